//! Naive knowledge closure and backward chaining, plus a seeded generator of
//! knowledge sets.

use std::collections::{BTreeSet, HashMap};

use plsanim_core::terms::{build_chain, exponent_chain, inverse_key, mk_index, normalize};
use plsanim_core::{AgentId, Bitmask, KeyId, Message, SemanticBounds};
use rand::Rng;

/// Applies every breakdown rule to every item until nothing changes.
pub fn saturate(start: &BTreeSet<Message>) -> BTreeSet<Message> {
    let mut k: BTreeSet<Message> = start.iter().map(normalize).collect();
    loop {
        let mut fresh = Vec::new();
        for x in &k {
            match x {
                Message::Pair(a, b) => {
                    fresh.push(a.as_ref().clone());
                    fresh.push(b.as_ref().clone());
                }
                Message::Wat(p, _) => fresh.push(p.as_ref().clone()),
                Message::AEnc(p, key) | Message::SEnc(p, key) | Message::Sig(p, key) => {
                    if buildable(&k, &inverse_key(key)) {
                        fresh.push(p.as_ref().clone());
                    }
                }
                Message::Jam(inner, mask) => {
                    let (Message::Wat(_, wm), Message::Bitmask(jb)) = (inner.as_ref(), mask.as_ref()) else {
                        continue;
                    };
                    let Message::Bitmask(wb) = wm.as_ref() else { continue };
                    if k.contains(mask.as_ref()) && jb.leq(*wb) {
                        fresh.push(inner.as_ref().clone());
                    }
                }
                _ => {}
            }
        }
        let before = k.len();
        k.extend(fresh.iter().map(normalize));
        if k.len() == before {
            return k;
        }
    }
}

/// Backward chaining: a goal is known, or is composed from buildable parts.
/// Modexp goals may peel any exponent off the canonical chain.
pub fn buildable(k: &BTreeSet<Message>, goal: &Message) -> bool {
    solve(k, &normalize(goal), &mut HashMap::new())
}

fn solve(k: &BTreeSet<Message>, g: &Message, memo: &mut HashMap<Message, bool>) -> bool {
    if let Some(&v) = memo.get(g) {
        return v;
    }
    memo.insert(g.clone(), false);
    let result = k.contains(g)
        || match g {
            Message::Pair(a, b)
            | Message::AEnc(a, b)
            | Message::SEnc(a, b)
            | Message::Sig(a, b)
            | Message::Wat(a, b) => solve(k, a, memo) && solve(k, b, memo),
            Message::ModExp(..) => {
                let (base, exps) = exponent_chain(g);
                (0..exps.len()).any(|i| {
                    let rest = exps.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, e)| (*e).clone());
                    let smaller = normalize(&build_chain(base.clone(), rest));
                    solve(k, exps[i], memo) && solve(k, &smaller, memo)
                })
            }
            _ => false,
        };
    memo.insert(g.clone(), result);
    result
}

pub fn mask(rng: &mut impl Rng, bounds: &SemanticBounds) -> Message {
    if rng.random_bool(0.2) {
        return Message::null_mask();
    }
    Message::bitmask(Bitmask::Bm {
        code: mk_index(rng.random_range(0..bounds.bitmask_codes), bounds.bitmask_codes).unwrap(),
        length: mk_index(rng.random_range(0..bounds.bitmask_max_len), bounds.bitmask_max_len).unwrap(),
    })
}

fn key(rng: &mut impl Rng, bounds: &SemanticBounds) -> Message {
    let i = mk_index(rng.random_range(0..bounds.pub_keys), bounds.pub_keys).unwrap();
    Message::Key(if rng.random_bool(0.5) { KeyId::Public(i) } else { KeyId::Private(i) })
}

pub fn atom(rng: &mut impl Rng, bounds: &SemanticBounds) -> Message {
    match rng.random_range(0..6) {
        0 => match rng.random_range(0..bounds.agents + 1) {
            i if i < bounds.agents => Message::Agent(AgentId::Legit(mk_index(i, bounds.agents).unwrap())),
            _ => Message::Agent(AgentId::Intruder),
        },
        1 | 2 => Message::Nonce(mk_index(rng.random_range(0..bounds.nonces), bounds.nonces).unwrap()),
        3 => key(rng, bounds),
        4 => Message::ExpBase(mk_index(0, bounds.exp_bases).unwrap()),
        _ => mask(rng, bounds),
    }
}

/// A random term of depth at most `depth` (atoms have depth 1).
pub fn message(rng: &mut impl Rng, bounds: &SemanticBounds, depth: usize) -> Message {
    if depth <= 1 || rng.random_bool(0.3) {
        return atom(rng, bounds);
    }
    let sub = |rng: &mut _| message(rng, bounds, depth - 1);
    match rng.random_range(0..8) {
        0 => Message::pair(sub(rng), sub(rng)),
        1 => Message::modexp(sub(rng), sub(rng)),
        2 => Message::wat(sub(rng), mask(rng, bounds)),
        3 => {
            // jams of watermarks are the interesting case
            let inner =
                if depth > 2 { Message::wat(message(rng, bounds, depth - 2), mask(rng, bounds)) } else { sub(rng) };
            Message::jam(inner, mask(rng, bounds))
        }
        4 => Message::senc(sub(rng), sub(rng)),
        5 | 6 => Message::aenc(sub(rng), key(rng, bounds)),
        _ => Message::sig(sub(rng), key(rng, bounds)),
    }
}
