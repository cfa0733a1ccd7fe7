//! Honest agents, their jamming receivers and the assembled system.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::kernel::{exception, hide, par, prefix_lazy, rec, EventSet, Process, Thunk};
use crate::terms::{normalize, AgentId, Message};

use super::config::{ConfigError, ProtocolConfig, ProtocolKind};
use super::event::{ProtocolEvent, Signal};
use super::intruder::intruder_process;

type P = Process<ProtocolEvent>;

const I: AgentId = AgentId::Intruder;

/// Wraps a payload for the hop `from -> to` as the protocol prescribes.
fn seal(cfg: &ProtocolConfig, from: AgentId, to: AgentId, x: Message) -> Result<Message, ConfigError> {
    let m = match cfg.protocol {
        ProtocolKind::Nswj | ProtocolKind::Dhwj => Message::wat(x, cfg.mask_for(from)?),
        ProtocolKind::Nspk => Message::aenc(x, cfg.public_key(to)),
        ProtocolKind::Dh => x,
    };
    Ok(normalize(&m))
}

fn then(e: ProtocolEvent, next: impl Fn() -> P + Send + Sync + 'static) -> P {
    prefix_lazy(e, next)
}

fn send(from: AgentId, to: AgentId, m: Message, next: impl Fn() -> P + Send + Sync + 'static) -> P {
    then(ProtocolEvent::Send(from, I, to, m), next)
}

fn sig(s: Signal, next: impl Fn() -> P + Send + Sync + 'static) -> P {
    then(ProtocolEvent::Sig(s), next)
}

fn finish() -> P {
    then(ProtocolEvent::TerminateEv, Process::ret)
}

/// External choice over receive options whose events are distinct by
/// construction.
fn receive(options: Vec<(ProtocolEvent, Thunk<ProtocolEvent>)>) -> P {
    Process::vis(options.into_iter().collect::<BTreeMap<_, _>>())
}

/// Agents the responder is willing to run with: only legitimate peers, so an
/// intruder has to impersonate one.
fn responder_partners(cfg: &ProtocolConfig, me: AgentId) -> Vec<AgentId> {
    cfg.legit_agents().into_iter().filter(|&a| a != me).collect()
}

fn wrap_agent(cfg: &ProtocolConfig, me: AgentId, body: P) -> P {
    let inner = if cfg.protocol.is_wj() {
        let jammer = jamming_process(me, cfg);
        let mine = EventSet::from_fn(move |e| matches!(e, ProtocolEvent::Recv(_, I, t, _) if *t == me));
        let jevents = EventSet::from_fn(|e| matches!(e, ProtocolEvent::CJam(_)));
        hide(&par(&body, &mine, &jammer), &jevents)
    } else {
        body
    };
    let term: EventSet<ProtocolEvent> = [ProtocolEvent::TerminateEv].into_iter().collect();
    exception(&inner, &term, &Process::ret())
}

/// The receiver in front of a WJ agent: it accepts public traffic addressed
/// to `agent` only when watermarked with the claimed sender's bitmask, jams
/// the channel with `agent`'s own bitmask, and hands the recovered message on.
/// Outside WJ protocols there is no jammer and the result is a deadlock.
pub fn jamming_process(agent: AgentId, cfg: &ProtocolConfig) -> P {
    let Ok(own) = cfg.mask_for(agent) else {
        return crate::kernel::deadlock();
    };
    let receivable = cfg.receivable_messages();
    let mut options = Vec::new();
    for src in cfg.legit_agents().into_iter().filter(|&a| a != agent) {
        let Ok(mask) = cfg.mask_for(src) else { continue };
        for m in receivable.iter().filter(|m| matches!(m, Message::Wat(_, b) if **b == mask)) {
            let jam = ProtocolEvent::CJam(normalize(&Message::jam(m.clone(), own.clone())));
            options.push((ProtocolEvent::Recv(src, I, agent, m.clone()), jam));
        }
    }
    let options = Arc::new(options);
    rec(Arc::new(move |me: Thunk<ProtocolEvent>| {
        receive(
            options
                .iter()
                .map(|(recv, jam)| {
                    let (jam, me) = (jam.clone(), me.clone());
                    (
                        recv.clone(),
                        Thunk::new(move || {
                            let me = me.clone();
                            then(jam.clone(), move || me.force())
                        }),
                    )
                })
                .collect(),
        )
    }))
    .expect("jammer recursion is guarded")
}

/// Alice: chooses a partner, runs the initiator role and terminates.
pub fn initiator_process(cfg: &ProtocolConfig) -> Result<P, ConfigError> {
    cfg.validate()?;
    let me = cfg.alice();
    let cfg_arc = Arc::new(cfg.clone());
    let mut options = Vec::new();
    for &peer in &cfg.env_partners {
        let cfg = cfg_arc.clone();
        // fail early on missing maps rather than inside a thunk
        if cfg.protocol.is_wj() {
            cfg.mask_for(peer)?;
        }
        let run = if cfg.protocol.is_dh() { dh_initiator(cfg, me, peer)? } else { ns_initiator(cfg, me, peer)? };
        options.push((ProtocolEvent::Env(me, peer), Thunk::ready(run)));
    }
    Ok(wrap_agent(cfg, me, receive(options)))
}

/// Bob: waits for a first message from any acceptable partner.
pub fn responder_process(cfg: &ProtocolConfig) -> Result<P, ConfigError> {
    cfg.validate()?;
    let me = cfg.bob();
    let body = if cfg.protocol.is_dh() {
        dh_responder(Arc::new(cfg.clone()), me)?
    } else {
        ns_responder(Arc::new(cfg.clone()), me)?
    };
    Ok(wrap_agent(cfg, me, body))
}

fn ns_initiator(cfg: Arc<ProtocolConfig>, me: AgentId, peer: AgentId) -> Result<P, ConfigError> {
    let na = cfg.nonce_for(me)?;
    let msg1 = seal(&cfg, me, peer, Message::pair(na.clone(), Message::Agent(me)))?;
    let mut replies = Vec::new();
    for nb in cfg.nonces() {
        let msg2 = seal(&cfg, peer, me, Message::pair(na.clone(), nb.clone()))?;
        let msg3 = seal(&cfg, me, peer, nb.clone())?;
        let (na, nb) = (na.clone(), nb.clone());
        let rest = sig(Signal::start(me, peer, na.clone(), nb.clone()), move || {
            let (na, nb) = (na.clone(), nb.clone());
            send(me, peer, msg3.clone(), move || sig(Signal::end(me, peer, na.clone(), nb.clone()), finish))
        });
        replies.push((ProtocolEvent::Recv(peer, I, me, msg2), Thunk::ready(rest)));
    }
    let wait = receive(replies);
    Ok(send(me, peer, msg1, move || wait.clone()))
}

fn ns_responder(cfg: Arc<ProtocolConfig>, me: AgentId) -> Result<P, ConfigError> {
    let nb = cfg.nonce_for(me)?;
    let mut options = Vec::new();
    for a in responder_partners(&cfg, me) {
        for na in cfg.nonces() {
            let msg1 = seal(&cfg, a, me, Message::pair(na.clone(), Message::Agent(a)))?;
            let msg2 = seal(&cfg, me, a, Message::pair(na.clone(), nb.clone()))?;
            let msg3 = seal(&cfg, a, me, nb.clone())?;
            let (na, nb) = (na.clone(), nb.clone());
            let rest = move || {
                let (na, nb, msg2, msg3) = (na.clone(), nb.clone(), msg2.clone(), msg3.clone());
                sig(Signal::start(me, a, na.clone(), nb.clone()), move || {
                    let (na, nb, msg3) = (na.clone(), nb.clone(), msg3.clone());
                    send(me, a, msg2.clone(), move || {
                        let (na, nb) = (na.clone(), nb.clone());
                        then(ProtocolEvent::Recv(a, I, me, msg3.clone()), move || {
                            sig(Signal::end(me, a, na.clone(), nb.clone()), finish)
                        })
                    })
                })
            };
            options.push((ProtocolEvent::Recv(a, I, me, msg1), Thunk::new(rest)));
        }
    }
    Ok(receive(options))
}

fn dh_initiator(cfg: Arc<ProtocolConfig>, me: AgentId, peer: AgentId) -> Result<P, ConfigError> {
    let na = cfg.nonce_for(me)?;
    let g = cfg.generator();
    let t = cfg.secret_datum.clone().ok_or(ConfigError::MissingSecretDatum)?;
    let msg1 = seal(&cfg, me, peer, Message::modexp(g.clone(), na.clone()))?;
    let mut replies = Vec::new();
    for nb in cfg.nonces() {
        let half = Message::modexp(g.clone(), nb);
        let msg2 = seal(&cfg, peer, me, half.clone())?;
        let key = normalize(&Message::modexp(half, na.clone()));
        let cipher = Message::senc(t.clone(), key.clone());
        let msg3 = seal(&cfg, me, peer, cipher.clone())?;
        let confirm = if cfg.protocol.is_wj() { Some(seal(&cfg, peer, me, cipher)?) } else { None };
        let end = {
            let (t, key) = (t.clone(), key.clone());
            move || sig(Signal::end(me, peer, key.clone(), t.clone()), finish)
        };
        let after_send: Arc<dyn Fn() -> P + Send + Sync> = match confirm {
            Some(msg4) => Arc::new(move || {
                let end = end.clone();
                then(ProtocolEvent::Recv(peer, I, me, msg4.clone()), end)
            }),
            None => Arc::new(end),
        };
        let rest = sig(Signal::start(me, peer, key, t.clone()), move || {
            let after_send = after_send.clone();
            send(me, peer, msg3.clone(), move || after_send())
        });
        replies.push((ProtocolEvent::Recv(peer, I, me, msg2), Thunk::ready(rest)));
    }
    let wait = receive(replies);
    Ok(send(me, peer, msg1, move || wait.clone()))
}

fn dh_responder(cfg: Arc<ProtocolConfig>, me: AgentId) -> Result<P, ConfigError> {
    let nb = cfg.nonce_for(me)?;
    let g = cfg.generator();
    let msg2_payload = Message::modexp(g.clone(), nb.clone());
    let mut options = Vec::new();
    for a in responder_partners(&cfg, me) {
        let msg2 = seal(&cfg, me, a, msg2_payload.clone())?;
        for na in cfg.nonces() {
            let half = Message::modexp(g.clone(), na);
            let msg1 = seal(&cfg, a, me, half.clone())?;
            let key = normalize(&Message::modexp(half, nb.clone()));
            let mut finals = Vec::new();
            for x in cfg.nonces() {
                let cipher = Message::senc(x.clone(), key.clone());
                let msg3 = seal(&cfg, a, me, cipher.clone())?;
                let msg4 = if cfg.protocol.is_wj() { Some(seal(&cfg, me, a, cipher)?) } else { None };
                let key = key.clone();
                let end = {
                    let (key, x) = (key.clone(), x.clone());
                    move || sig(Signal::end(me, a, key.clone(), x.clone()), finish)
                };
                let rest = sig(Signal::start(me, a, key, x), move || match &msg4 {
                    Some(m) => send(me, a, m.clone(), end.clone()),
                    None => end(),
                });
                finals.push((ProtocolEvent::Recv(a, I, me, msg3), Thunk::ready(rest)));
            }
            let wait = receive(finals);
            let reply = send(me, a, msg2.clone(), move || wait.clone());
            options.push((ProtocolEvent::Recv(a, I, me, msg1), Thunk::ready(reply)));
        }
    }
    Ok(receive(options))
}

/// `(Alice ‖{TerminateEv} Bob) ‖{public Send/Recv, TerminateEv} Intruder`.
pub fn assemble(cfg: &ProtocolConfig) -> Result<P, ConfigError> {
    let alice = initiator_process(cfg)?;
    let bob = responder_process(cfg)?;
    let term: EventSet<ProtocolEvent> = [ProtocolEvent::TerminateEv].into_iter().collect();
    let agents = par(&alice, &term, &bob);
    let abi = EventSet::from_fn(|e: &ProtocolEvent| e.is_public_comm() || *e == ProtocolEvent::TerminateEv);
    Ok(par(&agents, &abi, &intruder_process(cfg)))
}
