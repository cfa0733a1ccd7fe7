//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod inference_oracle;
mod kernel_oracle;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use plsanim_core::checker::{check, check_feasible, explore, CheckOptions, ExploreOptions, Visit};
use plsanim_core::kernel::{ext_choice, hide, par, EventSet};
use plsanim_core::protocols::{assemble, default_config};
use plsanim_core::{
    AgentId, AttackMode, EveLocation, Knowledge, Message, Property, ProtocolConfig, ProtocolEvent, ProtocolKind,
    Signal, Verdict,
};
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kernel_oracle::{build, coherent, enabled_set, kernel_tree, oracle_tree, term, ALPHABET};

type Outcome = Result<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prop {
    Secrecy,
    AuthAlice,
    AuthBob,
}

const PROPS: [Prop; 3] = [Prop::Secrecy, Prop::AuthAlice, Prop::AuthBob];

impl Prop {
    fn property(self, cfg: &ProtocolConfig) -> Property {
        match self {
            Prop::Secrecy => Property::secrecy(),
            Prop::AuthAlice => Property::auth_for_alice(cfg),
            Prop::AuthBob => Property::auth_for_bob(cfg),
        }
    }
}

struct Run {
    protocol: ProtocolKind,
    eve: EveLocation,
    mode: AttackMode,
    prop: Prop,
    verdict: Verdict,
    elapsed: Duration,
}

fn run_check(protocol: ProtocolKind, eve: EveLocation, mode: AttackMode, prop: Prop) -> Run {
    let cfg = default_config(protocol, eve, mode);
    let start = Instant::now();
    let verdict = check(&cfg, &prop.property(&cfg), &CheckOptions::default()).expect("check runs");
    Run { protocol, eve, mode, prop, verdict, elapsed: start.elapsed() }
}

/// Expected result from the published comparison table.
fn expected(protocol: ProtocolKind, eve: EveLocation, prop: Prop) -> bool {
    match protocol {
        ProtocolKind::Nspk => prop == Prop::AuthAlice,
        ProtocolKind::Dh => false,
        ProtocolKind::Nswj | ProtocolKind::Dhwj => prop != Prop::Secrecy || eve == EveLocation::Eve3,
    }
}

/// The 42 table entries plus DHWJ passive for the mode comparison.
fn matrix() -> Vec<Run> {
    let mut runs = Vec::new();
    for prop in PROPS {
        runs.push(run_check(ProtocolKind::Nspk, EveLocation::Eve1, AttackMode::Active, prop));
        runs.push(run_check(ProtocolKind::Dh, EveLocation::Eve1, AttackMode::Active, prop));
    }
    for protocol in [ProtocolKind::Nswj, ProtocolKind::Dhwj] {
        for mode in [AttackMode::Active, AttackMode::Passive] {
            for eve in EveLocation::ALL {
                for prop in PROPS {
                    runs.push(run_check(protocol, *eve, mode, prop));
                }
            }
        }
    }
    runs
}

fn in_table(r: &Run) -> bool {
    !(r.protocol == ProtocolKind::Dhwj && r.mode == AttackMode::Passive)
}

fn criterion_1(runs: &[Run]) -> Outcome {
    let table: Vec<&Run> = runs.iter().filter(|r| in_table(r)).collect();
    if table.len() != 42 {
        return Err(format!("{} table entries, expected 42", table.len()));
    }
    let wrong: Vec<String> = table
        .iter()
        .filter(|r| {
            r.verdict.holds() != expected(r.protocol, r.eve, r.prop) || matches!(r.verdict, Verdict::Timeout { .. })
        })
        .map(|r| format!("{}/{}/{}/{:?}: {}", r.protocol, r.eve, r.mode, r.prop, r.verdict.label()))
        .collect();
    if wrong.is_empty() {
        Ok("42/42 verdicts match".into())
    } else {
        Err(wrong.join("; "))
    }
}

fn criterion_2(runs: &[Run], cfg: &ProtocolConfig) -> Outcome {
    let r = runs
        .iter()
        .find(|r| {
            r.protocol == ProtocolKind::Nswj
                && r.eve == EveLocation::Eve1
                && r.mode == AttackMode::Active
                && r.prop == Prop::Secrecy
        })
        .expect("run present");
    let trace = r.verdict.counterexample().ok_or("secrecy holds at Eve1")?;
    let leak = ProtocolEvent::Leak(cfg.nonce(0));
    if trace.contains(&leak) {
        Ok(format!("{}-event counterexample contains {leak}", trace.len()))
    } else {
        Err(format!("no {leak} in counterexample"))
    }
}

fn criterion_3(runs: &[Run]) -> Outcome {
    let cfg = default_config(ProtocolKind::Nspk, EveLocation::Eve1, AttackMode::Active);
    let r = runs.iter().find(|r| r.protocol == ProtocolKind::Nspk && r.prop == Prop::AuthBob).expect("run present");
    let trace = r.verdict.counterexample().ok_or("auth for Bob holds")?;
    let (a, b) = (cfg.alice(), cfg.bob());
    let (na, nb) = (cfg.nonce(0), cfg.nonce(1));
    if !trace.contains(&ProtocolEvent::Env(a, AgentId::Intruder)) {
        return Err("no Env(A0,I)".into());
    }
    let msg1 = Message::aenc(Message::pair(na.clone(), Message::Agent(a)), cfg.public_key(b));
    let forged = trace.iter().enumerate().any(|(i, e)| match e {
        ProtocolEvent::Recv(_, _, tgt, m) if *tgt == b && *m == msg1 => !trace[..i]
            .iter()
            .any(|x| matches!(x, ProtocolEvent::Send(s, _, t, m2) if *s == a && *t == b && *m2 == msg1)),
        _ => false,
    });
    if !forged {
        return Err("no forged first message at Bob".into());
    }
    let end = ProtocolEvent::Sig(Signal::end(b, a, na.clone(), nb.clone()));
    let start = ProtocolEvent::Sig(Signal::start(a, b, na, nb));
    let Some(at) = trace.iter().position(|e| *e == end) else {
        return Err(format!("no {end}"));
    };
    if trace[..at].contains(&start) {
        return Err(format!("{start} precedes {end}"));
    }
    let feasible = check_feasible(&cfg, trace).map_err(|e| e.to_string())?;
    if !feasible.feasible {
        return Err(format!("replay refused at {:?}", feasible.failed_at));
    }
    Ok(format!("{}-event Lowe trace replays", trace.len()))
}

fn criterion_4(runs: &[Run]) -> Outcome {
    let budget = Duration::from_secs(120);
    let small = Duration::from_secs(10);
    let mut slowest = runs.iter().filter(|r| in_table(r)).collect::<Vec<_>>();
    slowest.sort_by_key(|r| std::cmp::Reverse(r.elapsed));
    let over: Vec<String> = runs
        .iter()
        .filter(|r| in_table(r))
        .filter(|r| {
            r.elapsed > budget || (r.protocol == ProtocolKind::Nswj && r.eve == EveLocation::Eve3 && r.elapsed > small)
        })
        .map(|r| format!("{}/{}/{}/{:?} took {:?}", r.protocol, r.eve, r.mode, r.prop, r.elapsed))
        .collect();
    if !over.is_empty() {
        return Err(over.join("; "));
    }
    let top = slowest[0];
    Ok(format!("slowest {}/{}/{:?} in {:.2?}", top.protocol, top.eve, top.prop, top.elapsed))
}

fn criterion_5() -> Outcome {
    let bounds = default_config(ProtocolKind::Nswj, EveLocation::Eve3, AttackMode::Active).bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut goals_checked = 0usize;
    for case in 0..1000 {
        let size = rng.random_range(1..=6);
        let start: BTreeSet<Message> = (0..size).map(|_| inference_oracle::message(&mut rng, &bounds, 3)).collect();
        let engine = Knowledge::from_messages(&start).saturate();
        let naive = inference_oracle::saturate(&start);
        let got: BTreeSet<Message> = engine.iter().cloned().collect();
        if got != naive {
            return Err(format!("case {case}: saturate differs on {start:?}"));
        }
        let mut goals: Vec<Message> = (0..12).map(|_| inference_oracle::message(&mut rng, &bounds, 3)).collect();
        for m in &start {
            m.for_each_subterm(&mut |s| goals.push(s.clone()));
        }
        // compositions of known parts exercise the build-up rules
        let known: Vec<Message> = naive.iter().cloned().collect();
        for _ in 0..6 {
            let x = known[rng.random_range(0..known.len())].clone();
            let y = known[rng.random_range(0..known.len())].clone();
            goals.push(match rng.random_range(0..4) {
                0 => Message::pair(x, y),
                1 => Message::modexp(x, y),
                2 => Message::senc(x, y),
                _ => Message::wat(x, inference_oracle::mask(&mut rng, &bounds)),
            });
        }
        for g in &goals {
            goals_checked += 1;
            if engine.buildable(g) != inference_oracle::buildable(&naive, g) {
                return Err(format!("case {case}: buildable({g}) differs on {start:?}"));
            }
        }
    }
    Ok(format!("1000 knowledge sets, {goals_checked} buildability goals agree"))
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn law(name: &str, cases: u32, f: impl Fn(&mut TestRunner) -> Result<(), String>) -> Result<(), String> {
    f(&mut runner(cases)).map_err(|e| format!("{name}: {e}"))
}

fn check_eq<T: PartialEq + std::fmt::Debug>(a: T, b: T) -> Result<(), TestCaseError> {
    if a == b {
        Ok(())
    } else {
        Err(TestCaseError::fail(format!("{a:?} != {b:?}")))
    }
}

const TREE_DEPTH: usize = 8;
const CASES: u32 = 400;

fn criterion_6() -> Outcome {
    let full = || term(3, 0, ALPHABET);
    law("oracle agreement", CASES, |r| {
        r.run(&full(), |t| {
            assert!(t.depth() <= 4);
            check_eq(kernel_tree(&build(&t), TREE_DEPTH), oracle_tree(&t, TREE_DEPTH))
        })
        .map_err(|e| e.to_string())
    })?;
    law("enabled/step coherence", CASES, |r| {
        r.run(&full(), |t| coherent(&build(&t), 4).map_err(TestCaseError::fail)).map_err(|e| e.to_string())
    })?;
    law("ext_choice commutativity", CASES, |r| {
        r.run(&(term(3, 0, 8), term(3, 8, 16)), |(p, q)| {
            let (p, q) = (build(&p), build(&q));
            let pq = ext_choice(&p, &q).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let qp = ext_choice(&q, &p).map_err(|e| TestCaseError::fail(e.to_string()))?;
            check_eq(kernel_tree(&pq, TREE_DEPTH), kernel_tree(&qp, TREE_DEPTH))
        })
        .map_err(|e| e.to_string())
    })?;
    law("ext_choice associativity", CASES, |r| {
        r.run(&(term(3, 0, 5), term(3, 5, 10), term(3, 10, 16)), |(p, q, s)| {
            let (p, q, s) = (build(&p), build(&q), build(&s));
            let fail = |e: plsanim_core::kernel::KernelError<u8>| TestCaseError::fail(e.to_string());
            let left = ext_choice(&ext_choice(&p, &q).map_err(fail)?, &s).map_err(fail)?;
            let right = ext_choice(&p, &ext_choice(&q, &s).map_err(fail)?).map_err(fail)?;
            check_eq(kernel_tree(&left, TREE_DEPTH), kernel_tree(&right, TREE_DEPTH))
        })
        .map_err(|e| e.to_string())
    })?;
    law("hide of nothing", CASES, |r| {
        r.run(&full(), |t| {
            let p = build(&t);
            check_eq(kernel_tree(&hide(&p, &EventSet::empty()), TREE_DEPTH), kernel_tree(&p, TREE_DEPTH))
        })
        .map_err(|e| e.to_string())
    })?;
    law("par interleave/lockstep", CASES, |r| {
        r.run(&(full(), full()), |(p, q)| {
            let (p, q) = (build(&p), build(&q));
            let (ep, eq) = (enabled_set(&p), enabled_set(&q));
            let union: BTreeSet<u8> = ep.union(&eq).copied().collect();
            let inter: BTreeSet<u8> = ep.intersection(&eq).copied().collect();
            check_eq(enabled_set(&par(&p, &EventSet::empty(), &q)), union)?;
            check_eq(enabled_set(&par(&p, &EventSet::all(), &q)), inter)
        })
        .map_err(|e| e.to_string())
    })?;
    Ok(format!("6 laws x {CASES} cases against the reference semantics"))
}

/// Searches for a run where every delivery matches an earlier send and both
/// agents finish with each other.
fn honest_run(cfg: &ProtocolConfig) -> Option<Vec<ProtocolEvent>> {
    let root = assemble(cfg).ok()?;
    let (a, b) = (cfg.alice(), cfg.bob());
    let mut found = None;
    explore(&root, &ExploreOptions::default(), |path, e| match e {
        ProtocolEvent::Env(_, peer) if *peer != b => Visit::Prune,
        ProtocolEvent::Leak(_) => Visit::Prune,
        ProtocolEvent::Recv(s, med, t, m)
            if !path.contains(&ProtocolEvent::Send(*s, *med, *t, m.clone())) =>
        {
            Visit::Prune
        }
        ProtocolEvent::TerminateEv => {
            let ended = |me: AgentId, peer: AgentId| {
                path.iter().any(|x| matches!(x, ProtocolEvent::Sig(s) if s.kind == plsanim_core::protocols::SignalKind::EndProt && s.agent == me && s.peer == peer))
            };
            if ended(a, b) && ended(b, a) {
                let mut t = path.to_vec();
                t.push(e.clone());
                found = Some(t);
                Visit::Stop
            } else {
                Visit::Prune
            }
        }
        _ => Visit::Continue,
    })
    .ok()?;
    found
}

fn criterion_7() -> Outcome {
    let mut lengths = BTreeSet::new();
    for protocol in ProtocolKind::ALL {
        for eve in EveLocation::ALL {
            let cfg = default_config(*protocol, *eve, AttackMode::Active);
            let trace = honest_run(&cfg).ok_or(format!("{protocol}/{eve}: no honest run found"))?;
            let f = check_feasible(&cfg, &trace).map_err(|e| e.to_string())?;
            if !f.feasible {
                return Err(format!("{protocol}/{eve}: honest run refused at {:?}", f.failed_at));
            }
            lengths.insert(format!("{protocol}={}", trace.len()));
        }
    }
    Ok(format!("16 honest runs replay ({})", lengths.into_iter().collect::<Vec<_>>().join(", ")))
}

fn criterion_8(runs: &[Run]) -> Outcome {
    let mut compared = 0;
    for r in runs.iter().filter(|r| r.mode == AttackMode::Active && r.protocol.is_wj()) {
        let p = runs
            .iter()
            .find(|x| x.mode == AttackMode::Passive && x.protocol == r.protocol && x.eve == r.eve && x.prop == r.prop)
            .expect("passive run present");
        if r.verdict.holds() != p.verdict.holds() {
            return Err(format!(
                "{}/{}/{:?}: active {} vs passive {}",
                r.protocol,
                r.eve,
                r.prop,
                r.verdict.label(),
                p.verdict.label()
            ));
        }
        compared += 1;
    }
    Ok(format!("{compared} verdict pairs agree"))
}

fn main() -> ExitCode {
    // honour the libtest filter convention loosely: `cargo test -- --list` etc.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let started = Instant::now();
    let runs = matrix();
    let nswj_e1 = default_config(ProtocolKind::Nswj, EveLocation::Eve1, AttackMode::Active);
    let results: Vec<(&str, Outcome)> = vec![
        ("1 results-table parity", criterion_1(&runs)),
        ("2 Eve1 NSWJ leaks N0", criterion_2(&runs, &nswj_e1)),
        ("3 NSPK Lowe counterexample", criterion_3(&runs)),
        ("4 runtime budget", criterion_4(&runs)),
        ("5 inference oracle equivalence", criterion_5()),
        ("6 kernel law suite", criterion_6()),
        ("7 honest-run feasibility", criterion_7()),
        ("8 passive/active agreement", criterion_8(&runs)),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1?}", results.len() - failed, started.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
