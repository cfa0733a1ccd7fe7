use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::index::BoundedIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentId {
    Legit(BoundedIndex),
    Intruder,
    Server,
}

impl AgentId {
    pub fn is_legit(self) -> bool {
        matches!(self, AgentId::Legit(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyId {
    Public(BoundedIndex),
    Private(BoundedIndex),
}

/// A symbolic spreading code, identified by code number and length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bitmask {
    Null,
    Bm { code: BoundedIndex, length: BoundedIndex },
}

impl Bitmask {
    /// Prefix order: the null mask is below everything, otherwise the codes
    /// must agree and the left length must not exceed the right one.
    pub fn leq(self, other: Bitmask) -> bool {
        match (self, other) {
            (Bitmask::Null, _) => true,
            (Bitmask::Bm { .. }, Bitmask::Null) => false,
            (Bitmask::Bm { code: c1, length: l1 }, Bitmask::Bm { code: c2, length: l2 }) => {
                c1 == c2 && l1.value() <= l2.value()
            }
        }
    }
}

pub fn bitmask_leq(b1: Bitmask, b2: Bitmask) -> bool {
    b1.leq(b2)
}

/// Index-space sizes for one protocol instantiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticBounds {
    pub agents: usize,
    pub nonces: usize,
    pub pub_keys: usize,
    pub priv_keys: usize,
    pub exp_bases: usize,
    pub bitmask_codes: usize,
    pub bitmask_max_len: usize,
}

impl SemanticBounds {
    pub fn is_valid(&self) -> bool {
        [
            self.agents,
            self.nonces,
            self.pub_keys,
            self.priv_keys,
            self.exp_bases,
            self.bitmask_codes,
            self.bitmask_max_len,
        ]
        .iter()
        .all(|&b| b >= 1)
    }
}

/// The closed message term algebra.
///
/// Variant order matters: the derived `Ord` is the total term order used for
/// exponent canonicalization and for deterministic knowledge iteration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Message {
    Agent(AgentId),
    Nonce(BoundedIndex),
    Key(KeyId),
    Pair(Arc<Message>, Arc<Message>),
    ExpBase(BoundedIndex),
    ModExp(Arc<Message>, Arc<Message>),
    Bitmask(Bitmask),
    Wat(Arc<Message>, Arc<Message>),
    Jam(Arc<Message>, Arc<Message>),
    SEnc(Arc<Message>, Arc<Message>),
    AEnc(Arc<Message>, Arc<Message>),
    Sig(Arc<Message>, Arc<Message>),
}

impl Message {
    pub fn pair(a: Message, b: Message) -> Message {
        Message::Pair(Arc::new(a), Arc::new(b))
    }
    pub fn modexp(base: Message, exp: Message) -> Message {
        Message::ModExp(Arc::new(base), Arc::new(exp))
    }
    pub fn wat(payload: Message, mask: Message) -> Message {
        Message::Wat(Arc::new(payload), Arc::new(mask))
    }
    pub fn jam(payload: Message, mask: Message) -> Message {
        Message::Jam(Arc::new(payload), Arc::new(mask))
    }
    pub fn senc(payload: Message, key: Message) -> Message {
        Message::SEnc(Arc::new(payload), Arc::new(key))
    }
    pub fn aenc(payload: Message, key: Message) -> Message {
        Message::AEnc(Arc::new(payload), Arc::new(key))
    }
    pub fn sig(payload: Message, key: Message) -> Message {
        Message::Sig(Arc::new(payload), Arc::new(key))
    }
    pub fn bitmask(b: Bitmask) -> Message {
        Message::Bitmask(b)
    }
    pub fn null_mask() -> Message {
        Message::Bitmask(Bitmask::Null)
    }

    pub fn depth(&self) -> usize {
        match self {
            Message::Pair(a, b)
            | Message::ModExp(a, b)
            | Message::Wat(a, b)
            | Message::Jam(a, b)
            | Message::SEnc(a, b)
            | Message::AEnc(a, b)
            | Message::Sig(a, b) => 1 + a.depth().max(b.depth()),
            _ => 1,
        }
    }

    /// The bitmask carried by an `MBitm` term.
    pub fn as_bitmask(&self) -> Option<Bitmask> {
        match self {
            Message::Bitmask(b) => Some(*b),
            _ => None,
        }
    }

    /// Visits this term and all of its subterms, parents first.
    pub fn for_each_subterm(&self, f: &mut impl FnMut(&Message)) {
        f(self);
        if let Some((a, b)) = self.children() {
            a.for_each_subterm(f);
            b.for_each_subterm(f);
        }
    }

    pub fn children(&self) -> Option<(&Message, &Message)> {
        match self {
            Message::Pair(a, b)
            | Message::ModExp(a, b)
            | Message::Wat(a, b)
            | Message::Jam(a, b)
            | Message::SEnc(a, b)
            | Message::AEnc(a, b)
            | Message::Sig(a, b) => Some((a, b)),
            _ => None,
        }
    }
}

/// Canonical form: null jams removed and modexp exponent chains sorted.
pub fn normalize(m: &Message) -> Message {
    match m {
        Message::Agent(_) | Message::Nonce(_) | Message::Key(_) | Message::ExpBase(_) | Message::Bitmask(_) => {
            m.clone()
        }
        Message::Pair(a, b) => Message::pair(normalize(a), normalize(b)),
        Message::Wat(a, b) => Message::wat(normalize(a), normalize(b)),
        Message::SEnc(a, b) => Message::senc(normalize(a), normalize(b)),
        Message::AEnc(a, b) => Message::aenc(normalize(a), normalize(b)),
        Message::Sig(a, b) => Message::sig(normalize(a), normalize(b)),
        Message::Jam(a, b) => {
            let payload = normalize(a);
            let mask = normalize(b);
            if mask == Message::null_mask() {
                payload
            } else {
                Message::jam(payload, mask)
            }
        }
        Message::ModExp(..) => {
            let (base, exps) = exponent_chain(m);
            let mut exps: Vec<Message> = exps.into_iter().map(normalize).collect();
            // a null jam around the base can expose a further chain
            let base = normalize(base);
            let (inner_base, inner_exps) = exponent_chain(&base);
            exps.extend(inner_exps.into_iter().cloned());
            let inner_base = inner_base.clone();
            exps.sort();
            build_chain(inner_base, exps)
        }
    }
}

/// Splits `((b^e1)^e2)...^en` into `b` and `[e1, .., en]`.
pub fn exponent_chain(m: &Message) -> (&Message, Vec<&Message>) {
    let mut exps = Vec::new();
    let mut cur = m;
    while let Message::ModExp(base, exp) = cur {
        exps.push(exp.as_ref());
        cur = base;
    }
    exps.reverse();
    (cur, exps)
}

pub fn build_chain(base: Message, exps: impl IntoIterator<Item = Message>) -> Message {
    exps.into_iter().fold(base, Message::modexp)
}

/// Equality modulo null jamming and exponent commutativity.
pub fn msg_eq(m1: &Message, m2: &Message) -> bool {
    normalize(m1) == normalize(m2)
}

/// Public and private keys swap; every other term is its own inverse.
pub fn inverse_key(k: &Message) -> Message {
    match k {
        Message::Key(KeyId::Public(i)) => Message::Key(KeyId::Private(*i)),
        Message::Key(KeyId::Private(i)) => Message::Key(KeyId::Public(*i)),
        other => other.clone(),
    }
}

/// Checks every index against `bounds` and that watermark/jam masks are
/// bitmask terms.
pub fn well_formed(m: &Message, bounds: &SemanticBounds) -> bool {
    let agent_ok = |a: &AgentId| match a {
        AgentId::Legit(i) => i.bound() == bounds.agents,
        _ => true,
    };
    match m {
        Message::Agent(a) => agent_ok(a),
        Message::Nonce(n) => n.bound() == bounds.nonces,
        Message::Key(KeyId::Public(i)) => i.bound() == bounds.pub_keys,
        Message::Key(KeyId::Private(i)) => i.bound() == bounds.priv_keys,
        Message::ExpBase(g) => g.bound() == bounds.exp_bases,
        Message::Bitmask(Bitmask::Null) => true,
        Message::Bitmask(Bitmask::Bm { code, length }) => {
            code.bound() == bounds.bitmask_codes && length.bound() == bounds.bitmask_max_len
        }
        Message::Wat(p, b) | Message::Jam(p, b) => {
            matches!(b.as_ref(), Message::Bitmask(_)) && well_formed(p, bounds) && well_formed(b, bounds)
        }
        Message::Pair(a, b)
        | Message::ModExp(a, b)
        | Message::SEnc(a, b)
        | Message::AEnc(a, b)
        | Message::Sig(a, b) => well_formed(a, bounds) && well_formed(b, bounds),
    }
}
