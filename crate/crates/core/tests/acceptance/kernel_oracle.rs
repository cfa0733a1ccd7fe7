//! A tiny process syntax with a reference small-step semantics, used to
//! cross-check the interaction-tree kernel.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use plsanim_core::kernel::{
    deadlock, enabled, exception, ext_choice, hide, par, prefix, seq, step, terminated, EventSet, KernelError, Process,
    DEFAULT_FUEL,
};
use proptest::prelude::*;
use proptest::strategy::Union;

/// Events are `0..ALPHABET`; event sets are bit sets.
pub const ALPHABET: u8 = 16;

#[derive(Debug, Clone)]
pub enum Term {
    Stop,
    Skip,
    Prefix(u8, Box<Term>),
    Choice(Box<Term>, Box<Term>),
    Par(Box<Term>, u16, Box<Term>),
    Hide(Box<Term>, u16),
    Seq(Box<Term>, Box<Term>),
    Exc(Box<Term>, u16, Box<Term>),
}

impl Term {
    pub fn depth(&self) -> usize {
        match self {
            Term::Stop | Term::Skip => 1,
            Term::Prefix(_, t) | Term::Hide(t, _) => 1 + t.depth(),
            Term::Choice(p, q) | Term::Par(p, _, q) | Term::Seq(p, q) | Term::Exc(p, _, q) => {
                1 + p.depth().max(q.depth())
            }
        }
    }
}

fn b(t: Term) -> Box<Term> {
    Box::new(t)
}

/// Terms of depth at most `levels + 1` whose events lie in `lo..hi`. Choice
/// operands get disjoint halves of the range, so every generated choice is
/// well defined.
pub fn term(levels: u32, lo: u8, hi: u8) -> BoxedStrategy<Term> {
    let leaf = prop_oneof![Just(Term::Stop), Just(Term::Skip)].boxed();
    if levels == 0 {
        return leaf;
    }
    let sub = || term(levels - 1, lo, hi);
    let mut options = vec![
        leaf,
        (lo..hi, sub()).prop_map(|(e, t)| Term::Prefix(e, b(t))).boxed(),
        (lo..hi, sub()).prop_map(|(e, t)| Term::Prefix(e, b(t))).boxed(),
        (sub(), any::<u16>(), sub()).prop_map(|(p, s, q)| Term::Par(b(p), s, b(q))).boxed(),
        (sub(), any::<u16>()).prop_map(|(p, h)| Term::Hide(b(p), h)).boxed(),
        (sub(), sub()).prop_map(|(p, q)| Term::Seq(b(p), b(q))).boxed(),
        (sub(), any::<u16>(), sub()).prop_map(|(p, x, h)| Term::Exc(b(p), x, b(h))).boxed(),
    ];
    if hi - lo >= 2 {
        let mid = lo + (hi - lo) / 2;
        options.push(
            (term(levels - 1, lo, mid), term(levels - 1, mid, hi)).prop_map(|(p, q)| Term::Choice(b(p), b(q))).boxed(),
        );
    }
    Union::new(options).boxed()
}

fn set(bits: u16) -> EventSet<u8> {
    EventSet::from_fn(move |e: &u8| (bits >> e) & 1 == 1)
}

fn member(bits: u16, e: u8) -> bool {
    (bits >> e) & 1 == 1
}

/// Translates a term into a kernel process.
pub fn build(t: &Term) -> Process<u8> {
    match t {
        Term::Stop => deadlock(),
        Term::Skip => terminated(),
        Term::Prefix(e, t) => prefix(*e, build(t)),
        Term::Choice(p, q) => ext_choice(&build(p), &build(q)).expect("generated choices are disjoint"),
        Term::Par(p, s, q) => par(&build(p), &set(*s), &build(q)),
        Term::Hide(p, h) => hide(&build(p), &set(*h)),
        Term::Seq(p, q) => {
            let q = build(q);
            seq(&build(p), Arc::new(move || q.clone()))
        }
        Term::Exc(p, x, h) => exception(&build(p), &set(*x), &build(h)),
    }
}

enum Tr {
    Ret,
    Tau(Term),
    Vis(BTreeMap<u8, Term>),
}

/// One step of the reference semantics.
fn tr(t: &Term) -> Tr {
    match t {
        Term::Stop => Tr::Vis(BTreeMap::new()),
        Term::Skip => Tr::Ret,
        Term::Prefix(e, k) => Tr::Vis([(*e, (**k).clone())].into()),
        Term::Choice(p, q) => match (tr(p), tr(q)) {
            (Tr::Tau(p2), _) => Tr::Tau(Term::Choice(b(p2), q.clone())),
            (_, Tr::Tau(q2)) => Tr::Tau(Term::Choice(p.clone(), b(q2))),
            (Tr::Ret, _) | (_, Tr::Ret) => Tr::Ret,
            (Tr::Vis(mut a), Tr::Vis(c)) => {
                a.extend(c);
                Tr::Vis(a)
            }
        },
        Term::Seq(p, q) => match tr(p) {
            Tr::Ret => Tr::Tau((**q).clone()),
            Tr::Tau(p2) => Tr::Tau(Term::Seq(b(p2), q.clone())),
            Tr::Vis(m) => Tr::Vis(m.into_iter().map(|(e, k)| (e, Term::Seq(b(k), q.clone()))).collect()),
        },
        Term::Par(p, s, q) => match (tr(p), tr(q)) {
            (Tr::Tau(p2), _) => Tr::Tau(Term::Par(b(p2), *s, q.clone())),
            (_, Tr::Tau(q2)) => Tr::Tau(Term::Par(p.clone(), *s, b(q2))),
            (Tr::Ret, Tr::Ret) => Tr::Ret,
            (pt, qt) => {
                let pm = match pt {
                    Tr::Vis(m) => m,
                    _ => BTreeMap::new(),
                };
                let qm = match qt {
                    Tr::Vis(m) => m,
                    _ => BTreeMap::new(),
                };
                let mut out = BTreeMap::new();
                for (e, pk) in &pm {
                    if member(*s, *e) {
                        if let Some(qk) = qm.get(e) {
                            out.insert(*e, Term::Par(b(pk.clone()), *s, b(qk.clone())));
                        }
                    } else {
                        out.insert(*e, Term::Par(b(pk.clone()), *s, q.clone()));
                    }
                }
                for (e, qk) in &qm {
                    if !member(*s, *e) && !out.contains_key(e) {
                        out.insert(*e, Term::Par(p.clone(), *s, b(qk.clone())));
                    }
                }
                Tr::Vis(out)
            }
        },
        Term::Hide(p, h) => match tr(p) {
            Tr::Ret => Tr::Ret,
            Tr::Tau(p2) => Tr::Tau(Term::Hide(b(p2), *h)),
            Tr::Vis(m) => match m.iter().find(|(e, _)| member(*h, **e)) {
                Some((_, k)) => Tr::Tau(Term::Hide(b(k.clone()), *h)),
                None => Tr::Vis(m.into_iter().map(|(e, k)| (e, Term::Hide(b(k), *h))).collect()),
            },
        },
        Term::Exc(p, x, h) => match tr(p) {
            Tr::Ret => Tr::Ret,
            Tr::Tau(p2) => Tr::Tau(Term::Exc(b(p2), *x, h.clone())),
            Tr::Vis(m) => Tr::Vis(
                m.into_iter()
                    .map(|(e, k)| {
                        let next = if member(*x, e) { (**h).clone() } else { Term::Exc(b(k), *x, h.clone()) };
                        (e, next)
                    })
                    .collect(),
            ),
        },
    }
}

/// Observable behavior up to a number of visible events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub ret: bool,
    pub next: BTreeMap<u8, Tree>,
}

pub fn oracle_tree(t: &Term, depth: usize) -> Tree {
    let mut cur = t.clone();
    loop {
        match tr(&cur) {
            Tr::Tau(n) => cur = n,
            Tr::Ret => return Tree { ret: true, next: BTreeMap::new() },
            Tr::Vis(m) => {
                let next = if depth == 0 {
                    m.keys().map(|e| (*e, Tree { ret: false, next: BTreeMap::new() })).collect()
                } else {
                    m.iter().map(|(e, k)| (*e, oracle_tree(k, depth - 1))).collect()
                };
                return Tree { ret: false, next };
            }
        }
    }
}

pub fn kernel_tree(p: &Process<u8>, depth: usize) -> Tree {
    let p = p.resolve(DEFAULT_FUEL).expect("finite terms never diverge");
    if p.is_ret() {
        return Tree { ret: true, next: BTreeMap::new() };
    }
    let m = p.branches().expect("resolved and not terminated");
    let next = if depth == 0 {
        m.keys().map(|e| (*e, Tree { ret: false, next: BTreeMap::new() })).collect()
    } else {
        m.iter().map(|(e, k)| (*e, kernel_tree(&k.force(), depth - 1))).collect()
    };
    Tree { ret: false, next }
}

/// `enabled` and `step` agree on every event of the alphabet, recursively.
pub fn coherent(p: &Process<u8>, depth: usize) -> Result<(), String> {
    let en = enabled(p, DEFAULT_FUEL).map_err(|e| e.to_string())?;
    for e in 0..ALPHABET {
        match step(p, &e, DEFAULT_FUEL) {
            Ok(next) => {
                if !en.contains(&e) {
                    return Err(format!("step accepted {e} outside {en:?}"));
                }
                if depth > 0 {
                    coherent(&next, depth - 1)?;
                }
            }
            Err(KernelError::EventRefused(r)) if r == e && !en.contains(&e) => {}
            Err(err) => return Err(format!("step {e} with enabled {en:?}: {err}")),
        }
    }
    Ok(())
}

pub fn enabled_set(p: &Process<u8>) -> BTreeSet<u8> {
    enabled(p, DEFAULT_FUEL).expect("finite terms never diverge")
}
