//! Symbolic animation and bounded verification of security protocols that
//! mix Dolev-Yao cryptography with physical-layer watermarking and jamming.
//!
//! The crate is layered bottom-up:
//!
//! * [`terms`]: the message algebra, its canonical form and text notation.
//! * [`inference`]: intruder knowledge saturation and buildability.
//! * [`kernel`]: a deterministic CSP process kernel over interaction trees.
//! * [`protocols`]: NSPK, NSWJ, DH and DHWJ models with a location-aware intruder.
//! * [`checker`]: bounded depth-first exploration with secrecy and
//!   correspondence checks.

pub mod checker;
pub mod inference;
pub mod kernel;
pub mod protocols;
pub mod terms;

pub use checker::{Property, PropertyKind, SignalPattern, Slot, Verdict};
pub use inference::Knowledge;
pub use kernel::{Process, Trace};
pub use protocols::{AttackMode, EveLocation, ProtocolConfig, ProtocolEvent, ProtocolKind, Signal};
pub use terms::{AgentId, Bitmask, BoundedIndex, KeyId, Message, SemanticBounds};

/// A process over the protocol event alphabet.
pub type ProtocolProcess = Process<ProtocolEvent>;
/// A trace over the protocol event alphabet.
pub type ProtocolTrace = Trace<ProtocolEvent>;
