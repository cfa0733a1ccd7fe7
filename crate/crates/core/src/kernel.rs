//! A deterministic CSP kernel over interaction trees.
//!
//! A [`Process`] is either terminated, a silent step, or a finite map of
//! visible events to continuations. Continuations are lazy thunks, so
//! recursive processes unfold only as far as they are executed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Silent steps resolved before giving up on a process.
pub const DEFAULT_FUEL: usize = 100;

/// Requirements on an event alphabet.
pub trait Label: Ord + Clone + fmt::Debug + Send + Sync + 'static {}
impl<T: Ord + Clone + fmt::Debug + Send + Sync + 'static> Label for T {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError<E: fmt::Debug> {
    #[error("event {0:?} is not enabled")]
    EventRefused(E),
    #[error("no visible event within {0} silent steps")]
    DivergenceExhausted(usize),
    #[error("duplicate event {0:?} in choice")]
    DuplicateEvent(E),
    #[error("both sides of an external choice offer {0:?}")]
    OverlappingAlphabets(E),
    #[error("recursive body refers to itself before any event")]
    Unguarded,
}

/// Failure while replaying a trace, with the index of the offending event.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace rejected at index {index}: {error}")]
pub struct RunError<E: fmt::Debug> {
    pub index: usize,
    pub error: KernelError<E>,
}

/// A lazily computed continuation.
pub struct Thunk<E>(Arc<dyn Fn() -> Process<E> + Send + Sync>);

impl<E> Clone for Thunk<E> {
    fn clone(&self) -> Self {
        Thunk(self.0.clone())
    }
}

impl<E: Label> Thunk<E> {
    pub fn new(f: impl Fn() -> Process<E> + Send + Sync + 'static) -> Self {
        Thunk(Arc::new(f))
    }

    /// A thunk that returns an already-built process.
    pub fn ready(p: Process<E>) -> Self {
        Thunk::new(move || p.clone())
    }

    pub fn force(&self) -> Process<E> {
        (self.0)()
    }
}

pub enum Node<E> {
    Ret,
    Sil(Thunk<E>),
    Vis(BTreeMap<E, Thunk<E>>),
}

/// An immutable, cheaply clonable process value.
pub struct Process<E>(Arc<Node<E>>);

impl<E> Clone for Process<E> {
    fn clone(&self) -> Self {
        Process(self.0.clone())
    }
}

impl<E: Label> fmt::Debug for Process<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Ret => f.write_str("Ret"),
            Node::Sil(_) => f.write_str("Sil(..)"),
            Node::Vis(m) => f.debug_set().entries(m.keys()).finish(),
        }
    }
}

/// A set of events given by a membership predicate.
pub struct EventSet<E>(Arc<dyn Fn(&E) -> bool + Send + Sync>);

impl<E> Clone for EventSet<E> {
    fn clone(&self) -> Self {
        EventSet(self.0.clone())
    }
}

impl<E: Label> EventSet<E> {
    pub fn from_fn(f: impl Fn(&E) -> bool + Send + Sync + 'static) -> Self {
        EventSet(Arc::new(f))
    }

    pub fn empty() -> Self {
        Self::from_fn(|_| false)
    }

    pub fn all() -> Self {
        Self::from_fn(|_| true)
    }

    pub fn contains(&self, e: &E) -> bool {
        (self.0)(e)
    }
}

impl<E: Label> FromIterator<E> for EventSet<E> {
    fn from_iter<T: IntoIterator<Item = E>>(iter: T) -> Self {
        let set: BTreeSet<E> = iter.into_iter().collect();
        Self::from_fn(move |e| set.contains(e))
    }
}

/// An ordered sequence of visible events.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace<E>(pub Vec<E>);

impl<E> Trace<E> {
    pub fn new() -> Self {
        Trace(Vec::new())
    }
    pub fn events(&self) -> &[E] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<E> From<Vec<E>> for Trace<E> {
    fn from(v: Vec<E>) -> Self {
        Trace(v)
    }
}

impl<E: Label> Process<E> {
    fn from_node(node: Node<E>) -> Self {
        Process(Arc::new(node))
    }

    pub fn node(&self) -> &Node<E> {
        &self.0
    }

    pub fn ret() -> Self {
        Self::from_node(Node::Ret)
    }

    pub fn sil(next: impl Fn() -> Process<E> + Send + Sync + 'static) -> Self {
        Self::from_node(Node::Sil(Thunk::new(next)))
    }

    pub fn vis(branches: BTreeMap<E, Thunk<E>>) -> Self {
        Self::from_node(Node::Vis(branches))
    }

    pub fn is_ret(&self) -> bool {
        matches!(self.node(), Node::Ret)
    }

    /// Visible branches, empty for terminated or silent processes.
    pub fn branches(&self) -> Option<&BTreeMap<E, Thunk<E>>> {
        match self.node() {
            Node::Vis(m) => Some(m),
            _ => None,
        }
    }

    /// Takes up to `fuel` silent steps until the process is `Ret` or `Vis`.
    pub fn resolve(&self, fuel: usize) -> Result<Process<E>, KernelError<E>> {
        let mut cur = self.clone();
        for _ in 0..=fuel {
            let next = match cur.node() {
                Node::Sil(t) => t.force(),
                _ => return Ok(cur),
            };
            cur = next;
        }
        Err(KernelError::DivergenceExhausted(fuel))
    }
}

/// `STOP`: offers nothing, never terminates.
pub fn deadlock<E: Label>() -> Process<E> {
    Process::vis(BTreeMap::new())
}

/// `SKIP`: successful termination.
pub fn terminated<E: Label>() -> Process<E> {
    Process::ret()
}

pub fn prefix<E: Label>(e: E, next: Process<E>) -> Process<E> {
    let mut m = BTreeMap::new();
    m.insert(e, Thunk::ready(next));
    Process::vis(m)
}

/// Like [`prefix`] but builds the continuation only when `e` is taken.
pub fn prefix_lazy<E: Label>(e: E, next: impl Fn() -> Process<E> + Send + Sync + 'static) -> Process<E> {
    let mut m = BTreeMap::new();
    m.insert(e, Thunk::new(next));
    Process::vis(m)
}

/// Generalized external choice over a finite event domain.
pub fn choice_map<E: Label>(branches: impl IntoIterator<Item = (E, Thunk<E>)>) -> Result<Process<E>, KernelError<E>> {
    let mut m = BTreeMap::new();
    for (e, k) in branches {
        if m.contains_key(&e) {
            return Err(KernelError::DuplicateEvent(e));
        }
        m.insert(e, k);
    }
    Ok(Process::vis(m))
}

/// Deterministic external choice. Silent steps on either side are resolved
/// first, termination on either side wins, and overlapping visible events are
/// rejected.
pub fn ext_choice<E: Label>(p: &Process<E>, q: &Process<E>) -> Result<Process<E>, KernelError<E>> {
    let p = p.resolve(DEFAULT_FUEL)?;
    let q = q.resolve(DEFAULT_FUEL)?;
    match (p.node(), q.node()) {
        (Node::Ret, _) => Ok(p),
        (_, Node::Ret) => Ok(q),
        (Node::Vis(pm), Node::Vis(qm)) => {
            let mut m = pm.clone();
            for (e, k) in qm {
                if m.contains_key(e) {
                    return Err(KernelError::OverlappingAlphabets(e.clone()));
                }
                m.insert(e.clone(), k.clone());
            }
            Ok(Process::vis(m))
        }
        _ => unreachable!("resolved processes are never silent"),
    }
}

/// Sequential composition: runs `p`, then `next()` once `p` terminates.
pub fn seq<E: Label>(p: &Process<E>, next: Arc<dyn Fn() -> Process<E> + Send + Sync>) -> Process<E> {
    match p.node() {
        Node::Ret => next(),
        Node::Sil(t) => {
            let t = t.clone();
            Process::sil(move || seq(&t.force(), next.clone()))
        }
        Node::Vis(m) => Process::vis(
            m.iter()
                .map(|(e, t)| {
                    let t = t.clone();
                    let next = next.clone();
                    (e.clone(), Thunk::new(move || seq(&t.force(), next.clone())))
                })
                .collect(),
        ),
    }
}

/// Generalized parallel composition.
///
/// Events in `sync` need both sides; other events interleave (the left side
/// wins if both offer the same unsynchronized event). Silent steps are taken
/// eagerly, left first. The composition terminates once both sides have.
pub fn par<E: Label>(p: &Process<E>, sync: &EventSet<E>, q: &Process<E>) -> Process<E> {
    match (p.node(), q.node()) {
        (Node::Sil(t), _) => {
            let (t, sync, q) = (t.clone(), sync.clone(), q.clone());
            Process::sil(move || par(&t.force(), &sync, &q))
        }
        (_, Node::Sil(t)) => {
            let (t, sync, p) = (t.clone(), sync.clone(), p.clone());
            Process::sil(move || par(&p, &sync, &t.force()))
        }
        (Node::Ret, Node::Ret) => Process::ret(),
        _ => {
            let empty = BTreeMap::new();
            let pm = p.branches().unwrap_or(&empty);
            let qm = q.branches().unwrap_or(&empty);
            let mut out = BTreeMap::new();
            for (e, pk) in pm {
                if sync.contains(e) {
                    if let Some(qk) = qm.get(e) {
                        let (pk, qk, sync) = (pk.clone(), qk.clone(), sync.clone());
                        out.insert(e.clone(), Thunk::new(move || par(&pk.force(), &sync, &qk.force())));
                    }
                } else {
                    let (pk, q, sync) = (pk.clone(), q.clone(), sync.clone());
                    out.insert(e.clone(), Thunk::new(move || par(&pk.force(), &sync, &q)));
                }
            }
            for (e, qk) in qm {
                if !sync.contains(e) && !out.contains_key(e) {
                    let (qk, p, sync) = (qk.clone(), p.clone(), sync.clone());
                    out.insert(e.clone(), Thunk::new(move || par(&p, &sync, &qk.force())));
                }
            }
            Process::vis(out)
        }
    }
}

/// Hiding. An enabled hidden event is taken as a silent step, preempting
/// the visible ones; with several enabled, the least in event order wins.
pub fn hide<E: Label>(p: &Process<E>, hidden: &EventSet<E>) -> Process<E> {
    match p.node() {
        Node::Ret => Process::ret(),
        Node::Sil(t) => {
            let (t, hidden) = (t.clone(), hidden.clone());
            Process::sil(move || hide(&t.force(), &hidden))
        }
        Node::Vis(m) => {
            if let Some((_, t)) = m.iter().find(|(e, _)| hidden.contains(e)) {
                let (t, hidden) = (t.clone(), hidden.clone());
                return Process::sil(move || hide(&t.force(), &hidden));
            }
            Process::vis(
                m.iter()
                    .map(|(e, t)| {
                        let (t, hidden) = (t.clone(), hidden.clone());
                        (e.clone(), Thunk::new(move || hide(&t.force(), &hidden)))
                    })
                    .collect(),
            )
        }
    }
}

/// Exception: behaves as `p` until an event of `trigger` is taken, then
/// continues as `handler`.
pub fn exception<E: Label>(p: &Process<E>, trigger: &EventSet<E>, handler: &Process<E>) -> Process<E> {
    match p.node() {
        Node::Ret => Process::ret(),
        Node::Sil(t) => {
            let (t, trigger, handler) = (t.clone(), trigger.clone(), handler.clone());
            Process::sil(move || exception(&t.force(), &trigger, &handler))
        }
        Node::Vis(m) => Process::vis(
            m.iter()
                .map(|(e, t)| {
                    if trigger.contains(e) {
                        (e.clone(), Thunk::ready(handler.clone()))
                    } else {
                        let (t, trigger, handler) = (t.clone(), trigger.clone(), handler.clone());
                        (e.clone(), Thunk::new(move || exception(&t.force(), &trigger, &handler)))
                    }
                })
                .collect(),
        ),
    }
}

/// Guarded recursion. `body` receives a thunk for the recursive process;
/// forcing it before `body` has produced a step is reported as
/// [`KernelError::Unguarded`].
pub fn rec<E: Label>(body: Arc<dyn Fn(Thunk<E>) -> Process<E> + Send + Sync>) -> Result<Process<E>, KernelError<E>> {
    let building = Arc::new(AtomicBool::new(true));
    let unguarded = Arc::new(AtomicBool::new(false));
    let me = {
        let body = body.clone();
        let building = building.clone();
        let unguarded = unguarded.clone();
        Thunk::new(move || {
            if building.load(Ordering::SeqCst) {
                unguarded.store(true, Ordering::SeqCst);
                return deadlock();
            }
            unfold(body.clone())
        })
    };
    let p = body(me);
    building.store(false, Ordering::SeqCst);
    if unguarded.load(Ordering::SeqCst) {
        return Err(KernelError::Unguarded);
    }
    Ok(p)
}

fn unfold<E: Label>(body: Arc<dyn Fn(Thunk<E>) -> Process<E> + Send + Sync>) -> Process<E> {
    let again = body.clone();
    body(Thunk::new(move || unfold(again.clone())))
}

pub fn enabled<E: Label>(p: &Process<E>, fuel: usize) -> Result<BTreeSet<E>, KernelError<E>> {
    let p = p.resolve(fuel)?;
    Ok(p.branches().map(|m| m.keys().cloned().collect()).unwrap_or_default())
}

pub fn step<E: Label>(p: &Process<E>, e: &E, fuel: usize) -> Result<Process<E>, KernelError<E>> {
    let p = p.resolve(fuel)?;
    match p.branches().and_then(|m| m.get(e)) {
        Some(t) => Ok(t.force()),
        None => Err(KernelError::EventRefused(e.clone())),
    }
}

/// Replays `trace` from `p`, returning the residual process.
pub fn run<E: Label>(p: &Process<E>, trace: &[E], fuel: usize) -> Result<Process<E>, RunError<E>> {
    let mut cur = p.clone();
    for (index, e) in trace.iter().enumerate() {
        cur = step(&cur, e, fuel).map_err(|error| RunError { index, error })?;
    }
    Ok(cur)
}
