//! Protocol configurations and their stable names.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::inference::Knowledge;
use crate::terms::{mk_index, AgentId, Bitmask, BoundedIndex, KeyId, Message, SemanticBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolKind {
    Nspk,
    Nswj,
    Dh,
    Dhwj,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EveLocation {
    Eve1,
    Eve2,
    Eve3,
    Eve4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackMode {
    Passive,
    Active,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{name}` (expected one of: {expected})")]
pub struct UnknownName {
    pub kind: &'static str,
    pub name: String,
    pub expected: &'static str,
}

macro_rules! named {
    ($ty:ident, $kind:literal, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl FromStr for $ty {
            type Err = UnknownName;
            fn from_str(s: &str) -> Result<Self, UnknownName> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(UnknownName {
                        kind: $kind,
                        name: s.to_string(),
                        expected: concat!($($name, " "),+).trim_ascii_end(),
                    }),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named!(ProtocolKind, "protocol", Nspk => "nspk", Nswj => "nswj", Dh => "dh", Dhwj => "dhwj");
named!(EveLocation, "eve location", Eve1 => "eve1", Eve2 => "eve2", Eve3 => "eve3", Eve4 => "eve4");
named!(AttackMode, "attack mode", Passive => "passive", Active => "active");

impl ProtocolKind {
    /// Uses watermarking and jamming.
    pub fn is_wj(self) -> bool {
        matches!(self, ProtocolKind::Nswj | ProtocolKind::Dhwj)
    }

    pub fn is_dh(self) -> bool {
        matches!(self, ProtocolKind::Dh | ProtocolKind::Dhwj)
    }
}

impl EveLocation {
    /// Whether the eavesdropper sits inside `agent`'s jamming range, where
    /// she only hears traffic to that agent jammed.
    pub fn in_jamming_range(self, agent: AgentId) -> bool {
        let (alice, bob) = match self {
            EveLocation::Eve1 => (true, false),
            EveLocation::Eve2 => (false, true),
            EveLocation::Eve3 => (true, true),
            EveLocation::Eve4 => (false, false),
        };
        match agent {
            AgentId::Legit(i) if i.value() == 0 => alice,
            AgentId::Legit(i) if i.value() == 1 => bob,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("no nonce configured for {0}")]
    MissingNonce(AgentId),
    #[error("no bitmask configured for {0}")]
    MissingBitmask(AgentId),
    #[error("{0} map is not injective")]
    NotInjective(&'static str),
    #[error("intruder bitmask lies below the bitmask of {0}")]
    IntruderMaskBelow(AgentId),
    #[error("secret {0} is derivable from the intruder's initial knowledge")]
    SecretKnown(Message),
    #[error("the protocol needs a secret datum")]
    MissingSecretDatum,
    #[error("semantic bounds must all be positive")]
    InvalidBounds,
    #[error("the configuration needs at least two legitimate agents")]
    TooFewAgents,
}

/// Everything needed to build and check one protocol instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub protocol: ProtocolKind,
    pub bounds: SemanticBounds,
    pub nonce_of: BTreeMap<AgentId, BoundedIndex>,
    pub bitmask_of: BTreeMap<AgentId, Bitmask>,
    pub env_partners: BTreeSet<AgentId>,
    pub secret_set: BTreeSet<Message>,
    pub intruder_initial: Knowledge,
    pub secret_datum: Option<Message>,
    pub eve: EveLocation,
    pub mode: AttackMode,
}

impl ProtocolConfig {
    pub fn alice(&self) -> AgentId {
        AgentId::Legit(mk_index(0, self.bounds.agents).expect("agent bound"))
    }

    pub fn bob(&self) -> AgentId {
        AgentId::Legit(mk_index(1, self.bounds.agents).expect("agent bound"))
    }

    /// Legitimate agents followed by the intruder.
    pub fn agents(&self) -> Vec<AgentId> {
        let mut v: Vec<AgentId> = BoundedIndex::all(self.bounds.agents).map(AgentId::Legit).collect();
        v.push(AgentId::Intruder);
        v
    }

    pub fn legit_agents(&self) -> Vec<AgentId> {
        BoundedIndex::all(self.bounds.agents).map(AgentId::Legit).collect()
    }

    pub fn nonce(&self, i: usize) -> Message {
        Message::Nonce(mk_index(i, self.bounds.nonces).expect("nonce bound"))
    }

    pub fn nonces(&self) -> Vec<Message> {
        BoundedIndex::all(self.bounds.nonces).map(Message::Nonce).collect()
    }

    pub fn nonce_for(&self, agent: AgentId) -> Result<Message, ConfigError> {
        self.nonce_of.get(&agent).map(|&i| Message::Nonce(i)).ok_or(ConfigError::MissingNonce(agent))
    }

    pub fn mask_for(&self, agent: AgentId) -> Result<Message, ConfigError> {
        self.bitmask_of.get(&agent).map(|&b| Message::Bitmask(b)).ok_or(ConfigError::MissingBitmask(agent))
    }

    pub fn masks(&self) -> Vec<Message> {
        let set: BTreeSet<Bitmask> = self.bitmask_of.values().copied().collect();
        set.into_iter().map(Message::Bitmask).collect()
    }

    /// Public key of an agent; keys follow agent order with the intruder last.
    pub fn public_key(&self, agent: AgentId) -> Message {
        Message::Key(KeyId::Public(self.key_index(agent, self.bounds.pub_keys)))
    }

    pub fn private_key(&self, agent: AgentId) -> Message {
        Message::Key(KeyId::Private(self.key_index(agent, self.bounds.priv_keys)))
    }

    fn key_index(&self, agent: AgentId, bound: usize) -> BoundedIndex {
        let pos = match agent {
            AgentId::Legit(i) => i.value(),
            _ => self.bounds.agents,
        };
        mk_index(pos.min(bound - 1), bound).expect("key bound")
    }

    pub fn generator(&self) -> Message {
        Message::ExpBase(mk_index(0, self.bounds.exp_bases).expect("exp base bound"))
    }

    pub fn secret_set(&self) -> &BTreeSet<Message> {
        &self.secret_set
    }

    /// Checks the structural invariants of the configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.bounds.is_valid() {
            return Err(ConfigError::InvalidBounds);
        }
        if self.bounds.agents < 2 {
            return Err(ConfigError::TooFewAgents);
        }
        for agent in [self.alice(), self.bob()] {
            self.nonce_for(agent)?;
        }
        let nonces: BTreeSet<_> = self.nonce_of.values().collect();
        if nonces.len() != self.nonce_of.len() {
            return Err(ConfigError::NotInjective("nonce"));
        }
        if self.protocol.is_dh() && self.secret_datum.is_none() {
            return Err(ConfigError::MissingSecretDatum);
        }
        if self.protocol.is_wj() {
            for agent in [self.alice(), self.bob(), AgentId::Intruder] {
                self.mask_for(agent)?;
            }
        }
        let masks: BTreeSet<_> = self.bitmask_of.values().collect();
        if masks.len() != self.bitmask_of.len() {
            return Err(ConfigError::NotInjective("bitmask"));
        }
        if let Some(&mine) = self.bitmask_of.get(&AgentId::Intruder) {
            for (&agent, &theirs) in &self.bitmask_of {
                if agent.is_legit() && mine.leq(theirs) {
                    return Err(ConfigError::IntruderMaskBelow(agent));
                }
            }
        }
        let initial = self.intruder_initial.saturate();
        if let Some(s) = self.secret_set.iter().find(|s| initial.knows(s)) {
            return Err(ConfigError::SecretKnown(s.clone()));
        }
        Ok(())
    }

    /// Every message some legitimate agent could accept at some step.
    pub fn receivable_messages(&self) -> Vec<Message> {
        let nonces = self.nonces();
        let agents: Vec<Message> = self.agents().into_iter().map(Message::Agent).collect();
        let mut shapes = Vec::new();
        match self.protocol {
            ProtocolKind::Nswj | ProtocolKind::Nspk => {
                for x in &nonces {
                    for y in &agents {
                        shapes.push(Message::pair(x.clone(), y.clone()));
                    }
                }
                for x in &nonces {
                    for y in &nonces {
                        shapes.push(Message::pair(x.clone(), y.clone()));
                    }
                }
                shapes.extend(nonces.iter().cloned());
            }
            ProtocolKind::Dh | ProtocolKind::Dhwj => {
                let g = self.generator();
                for x in &nonces {
                    shapes.push(Message::modexp(g.clone(), x.clone()));
                }
                for (i, x) in nonces.iter().enumerate() {
                    for y in &nonces[i..] {
                        let key =
                            crate::terms::normalize(&Message::modexp(Message::modexp(g.clone(), x.clone()), y.clone()));
                        for t in &nonces {
                            shapes.push(Message::senc(t.clone(), key.clone()));
                        }
                    }
                }
            }
        }
        let wrap: Vec<Message> = match self.protocol {
            ProtocolKind::Nswj | ProtocolKind::Dhwj => {
                let masks = self.masks();
                shapes.iter().flat_map(|s| masks.iter().map(move |b| Message::wat(s.clone(), b.clone()))).collect()
            }
            ProtocolKind::Nspk => {
                let keys: Vec<Message> = self.agents().into_iter().map(|a| self.public_key(a)).collect();
                shapes.iter().flat_map(|s| keys.iter().map(move |k| Message::aenc(s.clone(), k.clone()))).collect()
            }
            ProtocolKind::Dh => shapes,
        };
        wrap.iter().map(crate::terms::normalize).collect()
    }
}

fn bounds_for(protocol: ProtocolKind) -> SemanticBounds {
    let (keys, codes, len) = match protocol {
        ProtocolKind::Nspk => (3, 1, 1),
        ProtocolKind::Dh => (1, 1, 1),
        ProtocolKind::Nswj | ProtocolKind::Dhwj => (1, 3, 2),
    };
    SemanticBounds {
        agents: 2,
        nonces: 4,
        pub_keys: keys,
        priv_keys: keys,
        exp_bases: 1,
        bitmask_codes: codes,
        bitmask_max_len: len,
    }
}

/// The bundled configuration for a protocol, eavesdropper location and mode.
pub fn default_config(protocol: ProtocolKind, eve: EveLocation, mode: AttackMode) -> ProtocolConfig {
    let bounds = bounds_for(protocol);
    let agent = |i| AgentId::Legit(mk_index(i, bounds.agents).unwrap());
    let (alice, bob) = (agent(0), agent(1));
    let nonce = |i| mk_index(i, bounds.nonces).unwrap();
    let nonce_of: BTreeMap<_, _> =
        [(alice, nonce(0)), (bob, nonce(1)), (AgentId::Intruder, nonce(2))].into_iter().collect();

    let mut bitmask_of = BTreeMap::new();
    if protocol.is_wj() {
        let bm = |c| Bitmask::Bm {
            code: mk_index(c, bounds.bitmask_codes).unwrap(),
            length: mk_index(1, bounds.bitmask_max_len).unwrap(),
        };
        bitmask_of.insert(alice, bm(0));
        bitmask_of.insert(bob, bm(1));
        bitmask_of.insert(AgentId::Intruder, bm(2));
    }

    let env_partners: BTreeSet<_> = match protocol {
        ProtocolKind::Nspk => [bob, AgentId::Intruder].into_iter().collect(),
        _ => [bob].into_iter().collect(),
    };

    let mut cfg = ProtocolConfig {
        protocol,
        bounds,
        nonce_of,
        bitmask_of,
        env_partners,
        secret_set: BTreeSet::new(),
        intruder_initial: Knowledge::new(),
        secret_datum: None,
        eve,
        mode,
    };

    let mut initial: Vec<Message> = cfg.agents().into_iter().map(Message::Agent).collect();
    initial.push(Message::Nonce(nonce(2)));
    match protocol {
        ProtocolKind::Nswj => {
            cfg.secret_set = [Message::Nonce(nonce(0)), Message::Nonce(nonce(1))].into_iter().collect();
        }
        ProtocolKind::Nspk => {
            cfg.secret_set = [Message::Nonce(nonce(1))].into_iter().collect();
            for a in cfg.agents() {
                initial.push(cfg.public_key(a));
            }
            initial.push(cfg.private_key(AgentId::Intruder));
        }
        ProtocolKind::Dh | ProtocolKind::Dhwj => {
            let t = Message::Nonce(nonce(3));
            let g = cfg.generator();
            cfg.secret_datum = Some(t.clone());
            // The clear half-keys are secret too: the jammers exist to keep them
            // from the eavesdropper, and the session key itself is never derivable.
            cfg.secret_set = [
                t,
                Message::modexp(g.clone(), Message::Nonce(nonce(0))),
                Message::modexp(g.clone(), Message::Nonce(nonce(1))),
            ]
            .into_iter()
            .collect();
            initial.push(g);
        }
    }
    if protocol.is_wj() {
        initial.push(Message::Bitmask(cfg.bitmask_of[&AgentId::Intruder]));
    }
    cfg.intruder_initial = Knowledge::from_messages(&initial);
    cfg
}
