//! The location-aware intruder.
//!
//! The intruder is kept as an explicit state (knowledge, relay buffer, leaked
//! secrets) so that tests can inspect it along a trace; [`intruder_process`]
//! turns that state machine into a process.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::inference::Knowledge;
use crate::kernel::{hide, EventSet, Process, Thunk};
use crate::terms::{AgentId, Message};

use super::config::{AttackMode, ProtocolConfig};
use super::event::ProtocolEvent;

/// Data shared by every intruder state of one configuration.
#[derive(Debug)]
struct Setup {
    cfg: ProtocolConfig,
    /// Candidate sends heard from each legitimate agent.
    hearable: BTreeMap<AgentId, Vec<Message>>,
    receivable: Vec<Message>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntruderState {
    pub knowledge: Knowledge,
    /// Heard messages not yet delivered: (src, tgt, msg).
    pub buffer: BTreeSet<(AgentId, AgentId, Message)>,
    pub leaked: BTreeSet<Message>,
    /// Messages the intruder can currently fake, cached per knowledge.
    fakes: Arc<Vec<Message>>,
    /// A heard message waiting for the internal jam step.
    pending: Option<(AgentId, AgentId, Message)>,
}

impl IntruderState {
    pub fn initial(cfg: &ProtocolConfig) -> IntruderState {
        let knowledge = cfg.intruder_initial.saturate();
        let fakes = fakes_for(cfg, &knowledge, &cfg.receivable_messages());
        IntruderState {
            knowledge,
            buffer: BTreeSet::new(),
            leaked: BTreeSet::new(),
            fakes: Arc::new(fakes),
            pending: None,
        }
    }

    /// The payload the intruder's receiver hands over after hearing `m`
    /// addressed to `tgt`.
    pub fn jammed(cfg: &ProtocolConfig, tgt: AgentId, m: &Message) -> Message {
        let mask = if cfg.protocol.is_wj() && cfg.eve.in_jamming_range(tgt) {
            cfg.mask_for(tgt).unwrap_or_else(|_| Message::null_mask())
        } else {
            Message::null_mask()
        };
        Message::jam(m.clone(), mask)
    }

    /// Replays one visible or internal event against the state. Returns
    /// `None` if the intruder does not engage in it.
    pub fn after(&self, cfg: &ProtocolConfig, e: &ProtocolEvent) -> Option<IntruderState> {
        match e {
            ProtocolEvent::Send(a, AgentId::Intruder, b, m) if a.is_legit() && a != b => {
                let mut next = self.clone();
                next.pending = Some((*a, *b, m.clone()));
                Some(next)
            }
            ProtocolEvent::CJam(j) => {
                let (_, b, m) = self.pending.as_ref()?;
                if *j != crate::terms::normalize(&Self::jammed(cfg, *b, m)) {
                    return None;
                }
                Some(self.absorb(cfg, &cfg.receivable_messages()))
            }
            ProtocolEvent::Recv(x, AgentId::Intruder, y, m) => {
                let key = (*x, *y, m.clone());
                let mut next = self.clone();
                if next.buffer.remove(&key) {
                    return Some(next);
                }
                let active = cfg.mode == AttackMode::Active;
                (active && next.fakes.contains(m)).then_some(next)
            }
            ProtocolEvent::Leak(s) => {
                if self.leaked.contains(s) || !cfg.secret_set.contains(s) || !self.knowledge.knows(s) {
                    return None;
                }
                let mut next = self.clone();
                next.leaked.insert(s.clone());
                Some(next)
            }
            _ => None,
        }
    }

    fn absorb(&self, cfg: &ProtocolConfig, receivable: &[Message]) -> IntruderState {
        let (a, b, m) = self.pending.clone().expect("absorb without a heard message");
        let payload = Self::jammed(cfg, b, &m);
        let knowledge = self.knowledge.add_and_saturate(&payload);
        let fakes = if knowledge == self.knowledge {
            self.fakes.clone()
        } else {
            Arc::new(fakes_for(cfg, &knowledge, receivable))
        };
        let mut buffer = self.buffer.clone();
        if b.is_legit() {
            buffer.insert((a, b, m));
        }
        IntruderState { knowledge, buffer, leaked: self.leaked.clone(), fakes, pending: None }
    }
}

fn fakes_for(cfg: &ProtocolConfig, k: &Knowledge, receivable: &[Message]) -> Vec<Message> {
    if cfg.mode == AttackMode::Passive {
        return Vec::new();
    }
    k.filter_buildable(receivable)
}

/// Messages a legitimate agent might put on the public medium.
fn hearable(cfg: &ProtocolConfig, receivable: &[Message]) -> BTreeMap<AgentId, Vec<Message>> {
    cfg.legit_agents()
        .into_iter()
        .map(|a| {
            let list = if cfg.protocol.is_wj() {
                let mask = cfg.mask_for(a).ok();
                receivable
                    .iter()
                    .filter(|m| matches!(m, Message::Wat(_, b) if Some(b.as_ref()) == mask.as_ref()))
                    .cloned()
                    .collect()
            } else {
                receivable.to_vec()
            };
            (a, list)
        })
        .collect()
}

/// The intruder process, with its jam channel hidden.
pub fn intruder_process(cfg: &ProtocolConfig) -> Process<ProtocolEvent> {
    let receivable = cfg.receivable_messages();
    let setup = Arc::new(Setup { cfg: cfg.clone(), hearable: hearable(cfg, &receivable), receivable });
    let body = state_process(setup, IntruderState::initial(cfg));
    hide(&body, &EventSet::from_fn(|e| matches!(e, ProtocolEvent::CJam(_))))
}

#[derive(Clone)]
enum Move {
    Hear(AgentId, AgentId, Message),
    Deliver(AgentId, AgentId, Message),
    Leak(Message),
}

impl IntruderState {
    fn apply(&self, mv: &Move) -> IntruderState {
        let mut next = self.clone();
        match mv {
            Move::Hear(a, b, m) => next.pending = Some((*a, *b, m.clone())),
            Move::Deliver(x, y, m) => {
                next.buffer.remove(&(*x, *y, m.clone()));
            }
            Move::Leak(s) => {
                next.leaked.insert(s.clone());
            }
        }
        next
    }
}

fn state_process(setup: Arc<Setup>, st: IntruderState) -> Process<ProtocolEvent> {
    let cfg = &setup.cfg;
    let mut branches: BTreeMap<ProtocolEvent, Thunk<ProtocolEvent>> = BTreeMap::new();

    if let Some((_, b, m)) = &st.pending {
        let ev = ProtocolEvent::CJam(crate::terms::normalize(&IntruderState::jammed(cfg, *b, m)));
        let next = {
            let setup = setup.clone();
            let st = st.clone();
            Thunk::new(move || state_process(setup.clone(), st.absorb(&setup.cfg, &setup.receivable)))
        };
        branches.insert(ev, next);
        return Process::vis(branches);
    }

    let shared = Arc::new(st);
    let mut add = |ev: ProtocolEvent, mv: Move| {
        branches.entry(ev).or_insert_with(|| {
            let (setup, st) = (setup.clone(), shared.clone());
            Thunk::new(move || state_process(setup.clone(), st.apply(&mv)))
        });
    };

    // hear
    let everyone = cfg.agents();
    for (&a, msgs) in &setup.hearable {
        for &b in everyone.iter().filter(|&&b| b != a) {
            for m in msgs {
                add(ProtocolEvent::Send(a, AgentId::Intruder, b, m.clone()), Move::Hear(a, b, m.clone()));
            }
        }
    }

    // relay
    for (x, y, m) in &shared.buffer {
        add(ProtocolEvent::Recv(*x, AgentId::Intruder, *y, m.clone()), Move::Deliver(*x, *y, m.clone()));
    }

    // fake
    if cfg.mode == AttackMode::Active {
        for &y in everyone.iter().filter(|a| a.is_legit()) {
            for &x in everyone.iter().filter(|&&x| x != y) {
                for m in shared.fakes.iter() {
                    add(ProtocolEvent::Recv(x, AgentId::Intruder, y, m.clone()), Move::Deliver(x, y, m.clone()));
                }
            }
        }
    }

    // leak
    for s in &cfg.secret_set {
        if !shared.leaked.contains(s) && shared.knowledge.knows(s) {
            add(ProtocolEvent::Leak(s.clone()), Move::Leak(s.clone()));
        }
    }

    branches.insert(ProtocolEvent::TerminateEv, Thunk::ready(Process::ret()));
    Process::vis(branches)
}

/// Replays a visible trace against the intruder state machine, returning the
/// state after each event (internal jam steps are taken implicitly).
pub fn intruder_states(cfg: &ProtocolConfig, trace: &[ProtocolEvent]) -> Option<Vec<IntruderState>> {
    let receivable = cfg.receivable_messages();
    let mut st = IntruderState::initial(cfg);
    let mut out = Vec::with_capacity(trace.len());
    for e in trace {
        st = match e {
            ProtocolEvent::Env(..) | ProtocolEvent::Sig(_) => st,
            ProtocolEvent::TerminateEv => st,
            ProtocolEvent::Send(_, AgentId::Intruder, _, _) => st.after(cfg, e)?.absorb(cfg, &receivable),
            ProtocolEvent::Send(..) | ProtocolEvent::Recv(..) if !e.is_public_comm() => st,
            _ => st.after(cfg, e)?,
        };
        out.push(st.clone());
    }
    Some(out)
}
