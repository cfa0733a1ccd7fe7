//! Protocol models: NSPK, NSWJ, DH and DHWJ with a location-aware intruder.

mod agents;
mod config;
mod event;
mod intruder;

pub use agents::{assemble, initiator_process, jamming_process, responder_process};
pub use config::{default_config, AttackMode, ConfigError, EveLocation, ProtocolConfig, ProtocolKind, UnknownName};
pub use event::{trace_from_json, trace_to_json, EventParseError, ProtocolEvent, Signal, SignalKind};
pub use intruder::{intruder_process, intruder_states, IntruderState};

pub fn receivable_messages(cfg: &ProtocolConfig) -> Vec<crate::terms::Message> {
    cfg.receivable_messages()
}
