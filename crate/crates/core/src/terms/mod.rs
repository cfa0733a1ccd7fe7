//! Symbolic message algebra.

mod grammar;
mod index;
mod message;

pub use grammar::{parse, parse_agent, render, ParseError};
pub use index::{mk_index, BoundedIndex, IndexError};
pub use message::{
    bitmask_leq, build_chain, exponent_chain, inverse_key, msg_eq, normalize, well_formed, AgentId, Bitmask, KeyId,
    Message, SemanticBounds,
};
