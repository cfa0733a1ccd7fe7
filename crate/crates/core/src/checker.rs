//! Bounded depth-first exploration and property checking.
//!
//! Every counterexample is replayed against the root process before it is
//! reported, so a `Violated` verdict always carries a feasible trace.

// Errors carry the offending event; they are rare and not worth boxing.
#![allow(clippy::result_large_err)]

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kernel::{run, KernelError, Label, Process, RunError, Trace, DEFAULT_FUEL};
use crate::protocols::{assemble, ConfigError, ProtocolConfig, ProtocolEvent, Signal, SignalKind};
use crate::terms::{normalize, parse, parse_agent, AgentId, Message, ParseError, SemanticBounds};

/// Default exploration depth in events.
pub const DEFAULT_DEPTH: usize = 30;

/// What the visitor wants after seeing a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visit {
    Continue,
    /// Do not descend below this transition.
    Prune,
    Stop,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExplorationReport {
    pub states: u64,
    pub transitions: u64,
    /// Some path was cut off by the depth bound.
    pub max_depth_hit: bool,
    pub stopped: bool,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ExploreOptions {
    pub depth: usize,
    pub fuel: usize,
    /// Visit enabled events in descending order instead of ascending.
    pub reverse: bool,
    pub deadline: Option<Instant>,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { depth: DEFAULT_DEPTH, fuel: DEFAULT_FUEL, reverse: false, deadline: None }
    }
}

impl ExploreOptions {
    pub fn with_depth(depth: usize) -> Self {
        ExploreOptions { depth, ..Default::default() }
    }
}

/// Depth-first traversal of `p`. The visitor sees the trace leading to each
/// transition and the transition's event.
pub fn explore<E: Label>(
    p: &Process<E>,
    opts: &ExploreOptions,
    mut visitor: impl FnMut(&[E], &E) -> Visit,
) -> Result<ExplorationReport, KernelError<E>> {
    let mut report = ExplorationReport::default();
    let mut path = Vec::new();
    dfs(p, opts.depth, opts, &mut path, &mut visitor, &mut report)?;
    Ok(report)
}

fn dfs<E: Label>(
    p: &Process<E>,
    depth_left: usize,
    opts: &ExploreOptions,
    path: &mut Vec<E>,
    visitor: &mut impl FnMut(&[E], &E) -> Visit,
    report: &mut ExplorationReport,
) -> Result<(), KernelError<E>> {
    report.states += 1;
    if let Some(deadline) = opts.deadline {
        if report.states.is_multiple_of(256) && Instant::now() >= deadline {
            report.timed_out = true;
            return Ok(());
        }
    }
    let p = p.resolve(opts.fuel)?;
    let Some(branches) = p.branches() else { return Ok(()) };
    if branches.is_empty() {
        return Ok(());
    }
    if depth_left == 0 {
        report.max_depth_hit = true;
        return Ok(());
    }
    let mut visit = |e: &E, next: &crate::kernel::Thunk<E>| -> Result<bool, KernelError<E>> {
        report.transitions += 1;
        match visitor(path, e) {
            Visit::Stop => {
                report.stopped = true;
                return Ok(false);
            }
            Visit::Prune => return Ok(true),
            Visit::Continue => {}
        }
        path.push(e.clone());
        let r = dfs(&next.force(), depth_left - 1, opts, path, visitor, report);
        path.pop();
        r?;
        Ok(!report.stopped && !report.timed_out)
    };
    if opts.reverse {
        for (e, k) in branches.iter().rev() {
            if !visit(e, k)? {
                break;
            }
        }
    } else {
        for (e, k) in branches {
            if !visit(e, k)? {
                break;
            }
        }
    }
    Ok(())
}

/// A pattern slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot<T> {
    Any,
    Is(T),
    /// Must equal the same field of the triggering signal (guards only).
    SameAsTrigger,
}

impl<T: PartialEq> Slot<T> {
    fn matches(&self, value: &T, trigger: Option<&T>) -> bool {
        match self {
            Slot::Any => true,
            Slot::Is(v) => v == value,
            Slot::SameAsTrigger => trigger.is_none_or(|t| t == value),
        }
    }
}

/// A pattern over signal events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalPattern {
    pub kind: SignalKind,
    pub agent: Slot<AgentId>,
    pub peer: Slot<AgentId>,
    pub p1: Slot<Message>,
    pub p2: Slot<Message>,
}

impl SignalPattern {
    /// Matches `s`, resolving `SameAsTrigger` slots against `trigger`.
    pub fn matches(&self, s: &Signal, trigger: Option<&Signal>) -> bool {
        self.kind == s.kind
            && self.agent.matches(&s.agent, trigger.map(|t| &t.agent))
            && self.peer.matches(&s.peer, trigger.map(|t| &t.peer))
            && self.p1.matches(&s.p1, trigger.map(|t| &t.p1))
            && self.p2.matches(&s.p2, trigger.map(|t| &t.p2))
    }

    /// Parses `Kind.agent.peer.p1.p2` where a slot is `*`, `=` or a value.
    pub fn parse(text: &str, bounds: &SemanticBounds) -> Result<SignalPattern, PatternError> {
        let text = text.trim();
        let text = text.strip_prefix("sig.").unwrap_or(text);
        let parts: Vec<&str> = text.split('.').collect();
        if parts.len() != 5 {
            return Err(PatternError::Shape(text.to_string()));
        }
        let kind = SignalKind::from_name(parts[0]).ok_or_else(|| PatternError::Kind(parts[0].to_string()))?;
        fn slot<T>(s: &str, f: impl Fn(&str) -> Result<T, ParseError>) -> Result<Slot<T>, PatternError> {
            Ok(match s {
                "*" => Slot::Any,
                "=" => Slot::SameAsTrigger,
                _ => Slot::Is(f(s)?),
            })
        }
        Ok(SignalPattern {
            kind,
            agent: slot(parts[1], |s| parse_agent(s, bounds))?,
            peer: slot(parts[2], |s| parse_agent(s, bounds))?,
            p1: slot(parts[3], |s| parse(s, bounds).map(|m| normalize(&m)))?,
            p2: slot(parts[4], |s| parse(s, bounds).map(|m| normalize(&m)))?,
        })
    }
}

impl SignalPattern {
    /// The guard an authentication check pairs with this trigger: the peer's
    /// `StartProt` towards the trigger's agent with the same payloads.
    pub fn mirrored_guard(&self) -> SignalPattern {
        SignalPattern {
            kind: SignalKind::StartProt,
            agent: self.peer.clone(),
            peer: self.agent.clone(),
            p1: Slot::SameAsTrigger,
            p2: Slot::SameAsTrigger,
        }
    }
}

impl fmt::Display for SignalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn slot<T: fmt::Display>(s: &Slot<T>) -> String {
            match s {
                Slot::Any => "*".into(),
                Slot::SameAsTrigger => "=".into(),
                Slot::Is(v) => v.to_string(),
            }
        }
        write!(
            f,
            "{}.{}.{}.{}.{}",
            self.kind.name(),
            slot(&self.agent),
            slot(&self.peer),
            slot(&self.p1),
            slot(&self.p2)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern `{0}` must have the form Kind.agent.peer.p1.p2")]
    Shape(String),
    #[error("unknown signal kind `{0}`")]
    Kind(String),
    #[error(transparent)]
    Term(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Property {
    /// No secret (or only the given one) is ever leaked.
    Secrecy { message: Option<Message> },
    /// Every trigger is preceded by a matching guard.
    Correspondence { trigger: SignalPattern, guard: SignalPattern },
    /// As correspondence, with distinct guards for distinct triggers.
    Injective { trigger: SignalPattern, guard: SignalPattern },
}

/// The property names accepted on the command line and over HTTP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyKind {
    Secrecy,
    Corr,
    InjCorr,
}

impl PropertyKind {
    pub const ALL: &'static [PropertyKind] = &[PropertyKind::Secrecy, PropertyKind::Corr, PropertyKind::InjCorr];

    pub fn name(self) -> &'static str {
        match self {
            PropertyKind::Secrecy => "secrecy",
            PropertyKind::Corr => "corr",
            PropertyKind::InjCorr => "inj-corr",
        }
    }
}

impl FromStr for PropertyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "secrecy" => Ok(PropertyKind::Secrecy),
            "corr" => Ok(PropertyKind::Corr),
            "inj-corr" => Ok(PropertyKind::InjCorr),
            _ => Err(format!("unknown property `{s}` (expected secrecy, corr or inj-corr)")),
        }
    }
}

impl Property {
    pub fn secrecy() -> Property {
        Property::Secrecy { message: None }
    }

    /// Alice's completion with Bob must be matched by Bob's start with the
    /// same payloads.
    pub fn auth_for_alice(cfg: &ProtocolConfig) -> Property {
        Self::auth(cfg.alice(), cfg.bob())
    }

    pub fn auth_for_bob(cfg: &ProtocolConfig) -> Property {
        Self::auth(cfg.bob(), cfg.alice())
    }

    fn auth(me: AgentId, peer: AgentId) -> Property {
        let (trigger, guard) = Self::auth_patterns(me, peer);
        Property::Correspondence { trigger, guard }
    }

    pub fn auth_patterns(me: AgentId, peer: AgentId) -> (SignalPattern, SignalPattern) {
        let trigger = SignalPattern {
            kind: SignalKind::EndProt,
            agent: Slot::Is(me),
            peer: Slot::Is(peer),
            p1: Slot::Any,
            p2: Slot::Any,
        };
        let guard = SignalPattern {
            kind: SignalKind::StartProt,
            agent: Slot::Is(peer),
            peer: Slot::Is(me),
            p1: Slot::SameAsTrigger,
            p2: Slot::SameAsTrigger,
        };
        (trigger, guard)
    }

    /// Assembles a property from request arguments. A correspondence without
    /// a trigger is authentication for Bob; a missing guard mirrors the trigger.
    pub fn from_parts(
        kind: PropertyKind,
        message: Option<Message>,
        trigger: Option<SignalPattern>,
        guard: Option<SignalPattern>,
        cfg: &ProtocolConfig,
    ) -> Property {
        if kind == PropertyKind::Secrecy {
            return Property::Secrecy { message: message.map(|m| normalize(&m)) };
        }
        let (trigger, guard) = match trigger {
            Some(t) => {
                let g = guard.unwrap_or_else(|| t.mirrored_guard());
                (t, g)
            }
            None => {
                let (t, g) = Self::auth_patterns(cfg.bob(), cfg.alice());
                (t, guard.unwrap_or(g))
            }
        };
        let corr = Property::Correspondence { trigger, guard };
        if kind == PropertyKind::InjCorr {
            corr.injective()
        } else {
            corr
        }
    }

    /// The injective variant of a correspondence property.
    pub fn injective(self) -> Property {
        match self {
            Property::Correspondence { trigger, guard } => Property::Injective { trigger, guard },
            other => other,
        }
    }

    /// Whether taking `e` after `history` violates the property.
    pub fn violated_by(&self, history: &[ProtocolEvent], e: &ProtocolEvent) -> bool {
        match self {
            Property::Secrecy { message } => match e {
                ProtocolEvent::Leak(s) => message.as_ref().is_none_or(|m| normalize(m) == *s),
                _ => false,
            },
            Property::Correspondence { trigger, guard } => {
                let Some(t) = e.signal().filter(|s| trigger.matches(s, None)) else {
                    return false;
                };
                !history.iter().filter_map(ProtocolEvent::signal).any(|s| guard.matches(s, Some(t)))
            }
            Property::Injective { trigger, guard } => {
                if !e.signal().is_some_and(|s| trigger.matches(s, None)) {
                    return false;
                }
                let mut full: Vec<&ProtocolEvent> = history.iter().collect();
                full.push(e);
                !injective_match_exists(&full, trigger, guard)
            }
        }
    }
}

/// Bipartite matching of trigger occurrences to distinct earlier guards.
fn injective_match_exists(trace: &[&ProtocolEvent], trigger: &SignalPattern, guard: &SignalPattern) -> bool {
    let triggers: Vec<usize> =
        (0..trace.len()).filter(|&i| trace[i].signal().is_some_and(|s| trigger.matches(s, None))).collect();
    let candidates: Vec<Vec<usize>> = triggers
        .iter()
        .map(|&t| {
            let ts = trace[t].signal();
            (0..t).filter(|&g| trace[g].signal().is_some_and(|s| guard.matches(s, ts))).collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; trace.len()];
    fn augment(t: usize, cands: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &g in &cands[t] {
            if seen[g] {
                continue;
            }
            seen[g] = true;
            if owner[g].is_none_or(|o| augment(o, cands, owner, seen)) {
                owner[g] = Some(t);
                return true;
            }
        }
        false
    }
    (0..triggers.len()).all(|t| {
        let mut seen = vec![false; trace.len()];
        augment(t, &candidates, &mut owner, &mut seen)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds {
        states_explored: u64,
        max_depth_hit: bool,
    },
    Violated {
        counterexample: Trace<ProtocolEvent>,
        states_explored: u64,
    },
    /// The wall-clock budget ran out before the search finished.
    Timeout {
        states_explored: u64,
    },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }

    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }

    pub fn counterexample(&self) -> Option<&[ProtocolEvent]> {
        match self {
            Verdict::Violated { counterexample, .. } => Some(counterexample.events()),
            _ => None,
        }
    }

    pub fn states_explored(&self) -> u64 {
        match self {
            Verdict::Holds { states_explored, .. }
            | Verdict::Violated { states_explored, .. }
            | Verdict::Timeout { states_explored } => *states_explored,
        }
    }

    /// One-word summary: `holds`, `holds (bounded)`, `violated` or `timeout`.
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds { max_depth_hit: false, .. } => "holds",
            Verdict::Holds { max_depth_hit: true, .. } => "holds (bounded)",
            Verdict::Violated { .. } => "violated",
            Verdict::Timeout { .. } => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError<ProtocolEvent>),
    #[error("starting trace is not feasible: {0}")]
    Prefix(RunError<ProtocolEvent>),
    #[error("internal error: counterexample failed replay")]
    SelfValidation,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    pub explore: ExploreOptions,
}

impl CheckOptions {
    pub fn with_depth(depth: usize) -> Self {
        CheckOptions { explore: ExploreOptions::with_depth(depth) }
    }
}

/// Checks `property` on the assembled system of `cfg`.
pub fn check(cfg: &ProtocolConfig, property: &Property, opts: &CheckOptions) -> Result<Verdict, CheckError> {
    let root = assemble(cfg)?;
    check_from(&root, &[], property, opts)
}

pub fn check_secrecy(cfg: &ProtocolConfig, message: Option<Message>, depth: usize) -> Result<Verdict, CheckError> {
    check(cfg, &Property::Secrecy { message }, &CheckOptions::with_depth(depth))
}

pub fn check_correspondence(
    cfg: &ProtocolConfig,
    trigger: SignalPattern,
    guard: SignalPattern,
    depth: usize,
) -> Result<Verdict, CheckError> {
    check(cfg, &Property::Correspondence { trigger, guard }, &CheckOptions::with_depth(depth))
}

pub fn check_injective(
    cfg: &ProtocolConfig,
    trigger: SignalPattern,
    guard: SignalPattern,
    depth: usize,
) -> Result<Verdict, CheckError> {
    check(cfg, &Property::Injective { trigger, guard }, &CheckOptions::with_depth(depth))
}

/// Checks `property` on the paths extending `prefix` from `root`. The depth
/// bound counts events after the prefix; violations consider the whole trace.
pub fn check_from(
    root: &Process<ProtocolEvent>,
    prefix: &[ProtocolEvent],
    property: &Property,
    opts: &CheckOptions,
) -> Result<Verdict, CheckError> {
    let fuel = opts.explore.fuel;
    let start = run(root, prefix, fuel).map_err(CheckError::Prefix)?;
    let mut history = prefix.to_vec();
    let mut found: Option<Vec<ProtocolEvent>> = None;
    let report = explore(&start, &opts.explore, |path, e| {
        history.truncate(prefix.len());
        history.extend_from_slice(path);
        if property.violated_by(&history, e) {
            let mut trace = history.clone();
            trace.push(e.clone());
            found = Some(trace);
            Visit::Stop
        } else {
            Visit::Continue
        }
    })?;
    if let Some(trace) = found {
        validate(root, &trace, property, fuel)?;
        return Ok(Verdict::Violated { counterexample: Trace(trace), states_explored: report.states });
    }
    if report.timed_out {
        return Ok(Verdict::Timeout { states_explored: report.states });
    }
    Ok(Verdict::Holds { states_explored: report.states, max_depth_hit: report.max_depth_hit })
}

fn validate(
    root: &Process<ProtocolEvent>,
    trace: &[ProtocolEvent],
    property: &Property,
    fuel: usize,
) -> Result<(), CheckError> {
    let Some((last, history)) = trace.split_last() else {
        return Err(CheckError::SelfValidation);
    };
    if run(root, trace, fuel).is_err() || !property.violated_by(history, last) {
        return Err(CheckError::SelfValidation);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Index of the first refused event.
    pub failed_at: Option<usize>,
}

/// Replays `trace` on the assembled system of `cfg`.
pub fn check_feasible(cfg: &ProtocolConfig, trace: &[ProtocolEvent]) -> Result<Feasibility, ConfigError> {
    let root = assemble(cfg)?;
    Ok(match run(&root, trace, DEFAULT_FUEL) {
        Ok(_) => Feasibility { feasible: true, failed_at: None },
        Err(e) => Feasibility { feasible: false, failed_at: Some(e.index) },
    })
}

/// Walks up to `steps` uniformly chosen events from the initial state.
pub fn random_walk(cfg: &ProtocolConfig, steps: usize, seed: u64) -> Result<Trace<ProtocolEvent>, CheckError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = assemble(cfg)?;
    let mut trace = Vec::new();
    for _ in 0..steps {
        let resolved = p.resolve(DEFAULT_FUEL)?;
        let Some(branches) = resolved.branches().filter(|b| !b.is_empty()) else {
            break;
        };
        let i = rng.random_range(0..branches.len());
        let (e, k) = branches.iter().nth(i).expect("index in range");
        trace.push(e.clone());
        p = k.force();
    }
    Ok(Trace(trace))
}
