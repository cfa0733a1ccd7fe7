//! Command implementations behind the `plsanim` binary.

use std::io::{self, BufRead, Write};
use std::time::{Duration, Instant};

use plsanim_core::checker::{check_feasible, check_from, random_walk, CheckOptions, ExploreOptions};
use plsanim_core::protocols::{assemble, trace_from_json, ProtocolEvent};
use plsanim_core::{Property, ProtocolConfig, Verdict};
use plsanim_service::Session;

/// Exit status for a property that holds (or for success in general).
pub const EXIT_HOLDS: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_VIOLATED: u8 = 2;
/// The check ran out of wall-clock budget.
pub const EXIT_TIMEOUT: u8 = 3;

fn print_trace(out: &mut impl Write, trace: &[ProtocolEvent]) -> io::Result<()> {
    writeln!(out, "trace so far:")?;
    for e in trace {
        writeln!(out, "  {e}")?;
    }
    Ok(())
}

/// Manual animation: numbered menu, `r` resets, `q` or end of input quits.
pub fn animate(session: &mut Session, input: impl BufRead, out: &mut impl Write) -> io::Result<()> {
    let mut lines = input.lines();
    loop {
        if session.is_terminated() {
            writeln!(out, "terminated")?;
        } else if session.enabled().is_empty() {
            writeln!(out, "deadlock: no event is enabled")?;
        }
        for (i, e) in session.enabled().iter().enumerate() {
            writeln!(out, "{}. {e}", i + 1)?;
        }
        write!(out, "select an event, r to reset, q to quit> ")?;
        out.flush()?;
        let Some(line) = lines.next().transpose()? else {
            writeln!(out)?;
            return Ok(());
        };
        match line.trim() {
            "q" => return Ok(()),
            "r" => {
                session.reset();
                writeln!(out, "reset")?;
            }
            choice => match choice.parse::<usize>().ok().map(|n| session.step(n)) {
                Some(Ok(())) => print_trace(out, session.trace())?,
                _ => writeln!(out, "invalid selection `{choice}`")?,
            },
        }
    }
}

/// Runs a check and prints the verdict followed by any counterexample, one
/// event per line. Output is deterministic for a given configuration.
pub fn run_check(
    cfg: &ProtocolConfig,
    property: &Property,
    depth: usize,
    budget: Duration,
    out: &mut impl Write,
) -> io::Result<u8> {
    let root = match assemble(cfg) {
        Ok(root) => root,
        Err(e) => {
            writeln!(out, "error: {e}")?;
            return Ok(EXIT_ERROR);
        }
    };
    let opts = CheckOptions {
        explore: ExploreOptions { depth, deadline: Some(Instant::now() + budget), ..ExploreOptions::default() },
    };
    let verdict = match check_from(&root, &[], property, &opts) {
        Ok(v) => v,
        Err(e) => {
            writeln!(out, "error: {e}")?;
            return Ok(EXIT_ERROR);
        }
    };
    let what = describe(property);
    let at = format!("{} {} {}, depth {depth}", cfg.protocol, cfg.eve, cfg.mode);
    let states = verdict.states_explored();
    match &verdict {
        Verdict::Holds { max_depth_hit, .. } => {
            let bounded = if *max_depth_hit { " up to the depth bound" } else { "" };
            writeln!(out, "Holds{bounded}: {what} ({at}, {states} states)")?;
            Ok(EXIT_HOLDS)
        }
        Verdict::Violated { counterexample, .. } => {
            writeln!(out, "Violated: {what} ({at}, {states} states)")?;
            writeln!(out, "counterexample ({} events):", counterexample.len())?;
            for e in counterexample.events() {
                writeln!(out, "{e}")?;
            }
            Ok(EXIT_VIOLATED)
        }
        Verdict::Timeout { .. } => {
            writeln!(out, "Timeout after {budget:?}: {what} ({at}, {states} states)")?;
            Ok(EXIT_TIMEOUT)
        }
    }
}

fn describe(p: &Property) -> String {
    match p {
        Property::Secrecy { message: None } => "secrecy of every secret".into(),
        Property::Secrecy { message: Some(m) } => format!("secrecy of {m}"),
        Property::Correspondence { trigger, guard } => format!("{trigger} preceded by {guard}"),
        Property::Injective { trigger, guard } => format!("{trigger} injectively preceded by {guard}"),
    }
}

/// Reads a trace as a JSON array of events or as one rendered event per line.
pub fn read_trace(text: &str, cfg: &ProtocolConfig) -> Result<Vec<ProtocolEvent>, String> {
    if text.trim_start().starts_with('[') {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        return trace_from_json(&v, &cfg.bounds).map_err(|e| e.to_string());
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| ProtocolEvent::parse(l, &cfg.bounds).map_err(|e| format!("`{l}`: {e}")))
        .collect()
}

/// Replays a trace and reports where it is refused, if anywhere.
pub fn run_feasible(cfg: &ProtocolConfig, trace: &[ProtocolEvent], out: &mut impl Write) -> io::Result<u8> {
    match check_feasible(cfg, trace) {
        Ok(f) if f.feasible => {
            writeln!(out, "feasible ({} events)", trace.len())?;
            Ok(EXIT_HOLDS)
        }
        Ok(f) => {
            let i = f.failed_at.unwrap_or(0);
            writeln!(out, "infeasible: event {} `{}` is refused", i + 1, trace[i])?;
            Ok(EXIT_VIOLATED)
        }
        Err(e) => {
            writeln!(out, "error: {e}")?;
            Ok(EXIT_ERROR)
        }
    }
}

pub fn run_walk(cfg: &ProtocolConfig, steps: usize, seed: u64, out: &mut impl Write) -> io::Result<u8> {
    match random_walk(cfg, steps, seed) {
        Ok(trace) => {
            for e in trace.events() {
                writeln!(out, "{e}")?;
            }
            Ok(EXIT_HOLDS)
        }
        Err(e) => {
            writeln!(out, "error: {e}")?;
            Ok(EXIT_ERROR)
        }
    }
}
