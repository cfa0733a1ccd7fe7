//! The protocol event alphabet, its text rendering and its JSON form.

use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::terms::{parse, parse_agent, AgentId, Message, ParseError, SemanticBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalKind {
    StartProt,
    EndProt,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::StartProt => "StartProt",
            SignalKind::EndProt => "EndProt",
        }
    }

    pub fn from_name(s: &str) -> Option<SignalKind> {
        match s {
            "StartProt" => Some(SignalKind::StartProt),
            "EndProt" => Some(SignalKind::EndProt),
            _ => None,
        }
    }
}

/// A protocol stage marker carrying the agent, its intended peer and two
/// payload slots.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signal {
    pub kind: SignalKind,
    pub agent: AgentId,
    pub peer: AgentId,
    pub p1: Message,
    pub p2: Message,
}

impl Signal {
    pub fn start(agent: AgentId, peer: AgentId, p1: Message, p2: Message) -> Signal {
        Signal { kind: SignalKind::StartProt, agent, peer, p1, p2 }
    }

    pub fn end(agent: AgentId, peer: AgentId, p1: Message, p2: Message) -> Signal {
        Signal { kind: SignalKind::EndProt, agent, peer, p1, p2 }
    }
}

/// Variant order is the channel rank used by the total event order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolEvent {
    Env(AgentId, AgentId),
    /// `Send(src, medium, tgt, msg)`; medium `I` is the public channel.
    Send(AgentId, AgentId, AgentId, Message),
    Recv(AgentId, AgentId, AgentId, Message),
    CJam(Message),
    Sig(Signal),
    Leak(Message),
    TerminateEv,
}

impl ProtocolEvent {
    pub fn channel(&self) -> &'static str {
        match self {
            ProtocolEvent::Env(..) => "env",
            ProtocolEvent::Send(..) => "send",
            ProtocolEvent::Recv(..) => "recv",
            ProtocolEvent::CJam(_) => "cjam",
            ProtocolEvent::Sig(_) => "sig",
            ProtocolEvent::Leak(_) => "leak",
            ProtocolEvent::TerminateEv => "terminate",
        }
    }

    /// Send or Recv over the public medium.
    pub fn is_public_comm(&self) -> bool {
        matches!(
            self,
            ProtocolEvent::Send(_, AgentId::Intruder, _, _) | ProtocolEvent::Recv(_, AgentId::Intruder, _, _)
        )
    }

    pub fn signal(&self) -> Option<&Signal> {
        match self {
            ProtocolEvent::Sig(s) => Some(s),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let comm = |ch: &str, s: &AgentId, m: &AgentId, t: &AgentId, msg: &Message| {
            json!({
                "channel": ch,
                "src": s.to_string(),
                "medium": m.to_string(),
                "tgt": t.to_string(),
                "msg": msg.to_string(),
            })
        };
        match self {
            ProtocolEvent::Env(a, b) => {
                json!({"channel": "env", "initiator": a.to_string(), "responder": b.to_string()})
            }
            ProtocolEvent::Send(s, m, t, msg) => comm("send", s, m, t, msg),
            ProtocolEvent::Recv(s, m, t, msg) => comm("recv", s, m, t, msg),
            ProtocolEvent::CJam(msg) => json!({"channel": "cjam", "msg": msg.to_string()}),
            ProtocolEvent::Sig(s) => json!({
                "channel": "sig",
                "kind": s.kind.name(),
                "self": s.agent.to_string(),
                "peer": s.peer.to_string(),
                "p1": s.p1.to_string(),
                "p2": s.p2.to_string(),
            }),
            ProtocolEvent::Leak(msg) => json!({"channel": "leak", "msg": msg.to_string()}),
            ProtocolEvent::TerminateEv => json!({"channel": "terminate"}),
        }
    }

    pub fn from_json(v: &Value, bounds: &SemanticBounds) -> Result<ProtocolEvent, EventParseError> {
        let obj = v.as_object().ok_or(EventParseError::NotAnObject)?;
        let field = |name: &'static str| -> Result<&str, EventParseError> {
            obj.get(name).and_then(Value::as_str).ok_or(EventParseError::MissingField(name))
        };
        let agent = |name: &'static str| -> Result<AgentId, EventParseError> { Ok(parse_agent(field(name)?, bounds)?) };
        let msg = |name: &'static str| -> Result<Message, EventParseError> { Ok(parse(field(name)?, bounds)?) };
        Ok(match field("channel")? {
            "env" => ProtocolEvent::Env(agent("initiator")?, agent("responder")?),
            "send" => ProtocolEvent::Send(agent("src")?, agent("medium")?, agent("tgt")?, msg("msg")?),
            "recv" => ProtocolEvent::Recv(agent("src")?, agent("medium")?, agent("tgt")?, msg("msg")?),
            "cjam" => ProtocolEvent::CJam(msg("msg")?),
            "sig" => {
                let kind = field("kind")?;
                ProtocolEvent::Sig(Signal {
                    kind: SignalKind::from_name(kind)
                        .ok_or_else(|| EventParseError::UnknownSignal(kind.to_string()))?,
                    agent: agent("self")?,
                    peer: agent("peer")?,
                    p1: msg("p1")?,
                    p2: msg("p2")?,
                })
            }
            "leak" => ProtocolEvent::Leak(msg("msg")?),
            "terminate" => ProtocolEvent::TerminateEv,
            other => return Err(EventParseError::UnknownChannel(other.to_string())),
        })
    }

    /// Parses the dotted trace-line form produced by `Display`.
    pub fn parse(text: &str, bounds: &SemanticBounds) -> Result<ProtocolEvent, EventParseError> {
        let parts: Vec<&str> = text.trim().split('.').collect();
        let arity = |n: usize| {
            if parts.len() == n {
                Ok(())
            } else {
                Err(EventParseError::Arity { channel: parts[0].to_string(), expected: n - 1 })
            }
        };
        let agent = |s: &str| parse_agent(s, bounds).map_err(EventParseError::from);
        let msg = |s: &str| parse(s, bounds).map_err(EventParseError::from);
        Ok(match parts[0] {
            "env" => {
                arity(3)?;
                ProtocolEvent::Env(agent(parts[1])?, agent(parts[2])?)
            }
            "send" | "recv" => {
                arity(5)?;
                let (s, m, t, x) = (agent(parts[1])?, agent(parts[2])?, agent(parts[3])?, msg(parts[4])?);
                if parts[0] == "send" {
                    ProtocolEvent::Send(s, m, t, x)
                } else {
                    ProtocolEvent::Recv(s, m, t, x)
                }
            }
            "cjam" => {
                arity(2)?;
                ProtocolEvent::CJam(msg(parts[1])?)
            }
            "sig" => {
                arity(6)?;
                ProtocolEvent::Sig(Signal {
                    kind: SignalKind::from_name(parts[1])
                        .ok_or_else(|| EventParseError::UnknownSignal(parts[1].to_string()))?,
                    agent: agent(parts[2])?,
                    peer: agent(parts[3])?,
                    p1: msg(parts[4])?,
                    p2: msg(parts[5])?,
                })
            }
            "leak" => {
                arity(2)?;
                ProtocolEvent::Leak(msg(parts[1])?)
            }
            "terminate" => {
                arity(1)?;
                ProtocolEvent::TerminateEv
            }
            other => return Err(EventParseError::UnknownChannel(other.to_string())),
        })
    }
}

impl fmt::Display for ProtocolEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolEvent::Env(a, b) => write!(f, "env.{a}.{b}"),
            ProtocolEvent::Send(s, m, t, x) => write!(f, "send.{s}.{m}.{t}.{x}"),
            ProtocolEvent::Recv(s, m, t, x) => write!(f, "recv.{s}.{m}.{t}.{x}"),
            ProtocolEvent::CJam(x) => write!(f, "cjam.{x}"),
            ProtocolEvent::Sig(s) => {
                write!(f, "sig.{}.{}.{}.{}.{}", s.kind.name(), s.agent, s.peer, s.p1, s.p2)
            }
            ProtocolEvent::Leak(x) => write!(f, "leak.{x}"),
            ProtocolEvent::TerminateEv => f.write_str("terminate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventParseError {
    #[error("event is not a JSON object")]
    NotAnObject,
    #[error("missing or non-string field `{0}`")]
    MissingField(&'static str),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("unknown signal kind `{0}`")]
    UnknownSignal(String),
    #[error("channel `{channel}` takes {expected} arguments")]
    Arity { channel: String, expected: usize },
    #[error(transparent)]
    Term(#[from] ParseError),
}

/// Renders a trace as a JSON array of event objects.
pub fn trace_to_json(events: &[ProtocolEvent]) -> Value {
    Value::Array(events.iter().map(ProtocolEvent::to_json).collect())
}

pub fn trace_from_json(v: &Value, bounds: &SemanticBounds) -> Result<Vec<ProtocolEvent>, EventParseError> {
    match v {
        Value::Array(items) => items.iter().map(|e| ProtocolEvent::from_json(e, bounds)).collect(),
        _ => Err(EventParseError::NotAnObject),
    }
}
