//! Intruder knowledge: breakdown saturation and build-up checks.
//!
//! Breakdown rules: unpairing, decryption/verification with the inverse key,
//! watermark stripping (no mask needed) and jam removal when the jamming mask
//! is known and is a prefix of the watermark mask. Build-up rules: pairing,
//! encryption/signing, watermarking with a known mask and modular
//! exponentiation. Jammed terms are never built; modexp is never broken.

use std::collections::BTreeSet;

use crate::terms::{exponent_chain, inverse_key, normalize, Message};

/// A duplicate-free, sorted set of normalized messages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Knowledge {
    items: BTreeSet<Message>,
}

impl Knowledge {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collects messages without saturating them.
    pub fn from_messages<'a>(msgs: impl IntoIterator<Item = &'a Message>) -> Self {
        Self { items: msgs.into_iter().map(normalize).collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_subset(&self, other: &Knowledge) -> bool {
        self.items.is_subset(&other.items)
    }

    /// Membership modulo normalization; no derivation is attempted.
    pub fn knows(&self, m: &Message) -> bool {
        self.items.contains(&normalize(m))
    }

    fn contains_normal(&self, m: &Message) -> bool {
        self.items.contains(m)
    }

    /// One round of every breakdown rule over the current items.
    pub fn break_once(&self) -> Knowledge {
        let mut next = self.clone();
        for item in &self.items {
            for derived in self.break_item(item) {
                next.items.insert(derived);
            }
        }
        next
    }

    /// Least fixpoint of [`Knowledge::break_once`] above `self`.
    pub fn saturate(&self) -> Knowledge {
        let mut k = Knowledge::new();
        let mut work: Vec<Message> = self.items.iter().cloned().collect();
        k.close(&mut work);
        k
    }

    /// `saturate(self ∪ {m})`, assuming `self` is already saturated.
    pub fn add_and_saturate(&self, m: &Message) -> Knowledge {
        let mut k = self.clone();
        let m = normalize(m);
        if k.contains_normal(&m) {
            return k;
        }
        k.close(&mut vec![m]);
        k
    }

    /// Inserts `work` and everything it yields until nothing changes.
    ///
    /// Unpairing and watermark stripping need no premise and are applied
    /// eagerly; locked terms (encryptions, jams) are retried whenever the
    /// knowledge has grown, since a new item may unlock an old term.
    fn close(&mut self, work: &mut Vec<Message>) {
        loop {
            while let Some(m) = work.pop() {
                if self.contains_normal(&m) {
                    continue;
                }
                match &m {
                    Message::Pair(a, b) => {
                        work.push(a.as_ref().clone());
                        work.push(b.as_ref().clone());
                    }
                    Message::Wat(p, _) => work.push(p.as_ref().clone()),
                    _ => {}
                }
                self.items.insert(m);
            }
            let unlocked: Vec<Message> = self
                .items
                .iter()
                .filter(|m| is_locked(m))
                .flat_map(|m| self.break_item(m))
                .filter(|m| !self.contains_normal(m))
                .collect();
            if unlocked.is_empty() {
                return;
            }
            work.extend(unlocked);
        }
    }

    fn break_item(&self, item: &Message) -> Vec<Message> {
        match item {
            Message::Pair(a, b) => vec![a.as_ref().clone(), b.as_ref().clone()],
            Message::Wat(p, _) => vec![p.as_ref().clone()],
            Message::AEnc(p, k) | Message::SEnc(p, k) | Message::Sig(p, k) => {
                if self.can_build(&normalize(&inverse_key(k))) {
                    vec![p.as_ref().clone()]
                } else {
                    vec![]
                }
            }
            Message::Jam(inner, jam_mask) => match (inner.as_ref(), jam_mask.as_bitmask()) {
                (Message::Wat(_, wat_mask), Some(jm)) => {
                    let prefix = wat_mask.as_bitmask().is_some_and(|wm| jm.leq(wm));
                    if prefix && self.contains_normal(jam_mask) {
                        vec![inner.as_ref().clone()]
                    } else {
                        vec![]
                    }
                }
                _ => vec![],
            },
            _ => vec![],
        }
    }

    /// Whether `m` can be composed from this (saturated) knowledge.
    pub fn buildable(&self, m: &Message) -> bool {
        self.can_build(&normalize(m))
    }

    fn can_build(&self, m: &Message) -> bool {
        if self.contains_normal(m) {
            return true;
        }
        match m {
            Message::Pair(a, b)
            | Message::AEnc(a, b)
            | Message::SEnc(a, b)
            | Message::Sig(a, b)
            | Message::Wat(a, b) => self.can_build(a) && self.can_build(b),
            Message::ModExp(..) => self.can_build_chain(m),
            _ => false,
        }
    }

    /// A normalized chain `base^e1^..^en` is buildable by starting from the
    /// base or from any known chain over a sub-multiset of the exponents, and
    /// raising it to each remaining exponent.
    fn can_build_chain(&self, m: &Message) -> bool {
        let (base, exps) = exponent_chain(m);
        let rest_buildable = |used: &[&Message]| {
            let mut remaining: Vec<&Message> = exps.clone();
            for u in used {
                match remaining.iter().position(|e| e == u) {
                    Some(i) => {
                        remaining.remove(i);
                    }
                    None => return false,
                }
            }
            remaining.iter().all(|e| self.can_build(e))
        };
        if self.can_build(base) && rest_buildable(&[]) {
            return true;
        }
        self.items.iter().any(|known| {
            if !matches!(known, Message::ModExp(..)) {
                return false;
            }
            let (known_base, known_exps) = exponent_chain(known);
            known_base == base && known_exps.len() < exps.len() && rest_buildable(&known_exps)
        })
    }

    /// The candidates that can be built, in order, without duplicates.
    pub fn filter_buildable(&self, candidates: &[Message]) -> Vec<Message> {
        let mut seen = BTreeSet::new();
        candidates.iter().map(normalize).filter(|m| seen.insert(m.clone())).filter(|m| self.can_build(m)).collect()
    }
}

fn is_locked(m: &Message) -> bool {
    matches!(m, Message::AEnc(..) | Message::SEnc(..) | Message::Sig(..) | Message::Jam(..))
}

impl FromIterator<Message> for Knowledge {
    fn from_iter<T: IntoIterator<Item = Message>>(iter: T) -> Self {
        Self { items: iter.into_iter().map(|m| normalize(&m)).collect() }
    }
}

/// Free-function spellings of the knowledge operations.
pub fn saturate(k: &Knowledge) -> Knowledge {
    k.saturate()
}

pub fn add_and_saturate(k: &Knowledge, m: &Message) -> Knowledge {
    k.add_and_saturate(m)
}

pub fn buildable(m: &Message, k: &Knowledge) -> bool {
    k.buildable(m)
}

pub fn filter_buildable(candidates: &[Message], k: &Knowledge) -> Vec<Message> {
    k.filter_buildable(candidates)
}

pub fn knows(k: &Knowledge, m: &Message) -> bool {
    k.knows(m)
}
