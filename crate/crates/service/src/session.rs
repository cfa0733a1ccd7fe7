//! One animation session: a configuration and the trace fired so far.

// Kernel errors carry the offending event; they are rare and not worth boxing.
#![allow(clippy::result_large_err)]

use std::fmt;

use plsanim_core::kernel::{enabled, run, step, KernelError, RunError, DEFAULT_FUEL};
use plsanim_core::protocols::{assemble, default_config, ConfigError};
use plsanim_core::{AttackMode, EveLocation, ProtocolConfig, ProtocolEvent, ProtocolKind, ProtocolProcess};
use serde_json::{json, Value};

#[derive(Debug)]
pub enum CreateError {
    Config(ConfigError),
    Kernel(Box<KernelError<ProtocolEvent>>),
}

impl fmt::Display for CreateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CreateError::Config(e) => e.fmt(f),
            CreateError::Kernel(e) => e.fmt(f),
        }
    }
}

#[derive(Debug)]
pub enum StepError {
    /// The index does not name an enabled event.
    OutOfRange {
        index: usize,
        enabled: usize,
    },
    Terminated,
    Kernel(Box<KernelError<ProtocolEvent>>),
}

/// The trace is the source of truth: `current` is always
/// `run(assemble(cfg), trace)`.
pub struct Session {
    pub id: String,
    pub protocol: ProtocolKind,
    pub eve: EveLocation,
    pub mode: AttackMode,
    cfg: ProtocolConfig,
    root: ProtocolProcess,
    current: ProtocolProcess,
    trace: Vec<ProtocolEvent>,
    enabled: Vec<ProtocolEvent>,
    terminated: bool,
}

impl Session {
    pub fn new(id: String, protocol: ProtocolKind, eve: EveLocation, mode: AttackMode) -> Result<Self, CreateError> {
        let cfg = default_config(protocol, eve, mode);
        let root = assemble(&cfg).map_err(CreateError::Config)?;
        let mut s = Session {
            id,
            protocol,
            eve,
            mode,
            cfg,
            current: root.clone(),
            root,
            trace: Vec::new(),
            enabled: Vec::new(),
            terminated: false,
        };
        s.refresh().map_err(|e| CreateError::Kernel(Box::new(e)))?;
        Ok(s)
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn root(&self) -> &ProtocolProcess {
        &self.root
    }

    pub fn trace(&self) -> &[ProtocolEvent] {
        &self.trace
    }

    pub fn enabled(&self) -> &[ProtocolEvent] {
        &self.enabled
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    fn refresh(&mut self) -> Result<(), KernelError<ProtocolEvent>> {
        let resolved = self.current.resolve(DEFAULT_FUEL)?;
        self.terminated = resolved.is_ret();
        self.enabled = enabled(&resolved, DEFAULT_FUEL)?.into_iter().collect();
        Ok(())
    }

    /// Fires the `index`-th enabled event (1-based).
    pub fn step(&mut self, index: usize) -> Result<(), StepError> {
        if self.terminated {
            return Err(StepError::Terminated);
        }
        let Some(e) = index.checked_sub(1).and_then(|i| self.enabled.get(i)).cloned() else {
            return Err(StepError::OutOfRange { index, enabled: self.enabled.len() });
        };
        self.current = step(&self.current, &e, DEFAULT_FUEL).map_err(|e| StepError::Kernel(Box::new(e)))?;
        self.trace.push(e);
        self.refresh().map_err(|e| StepError::Kernel(Box::new(e)))
    }

    pub fn reset(&mut self) {
        self.current = self.root.clone();
        self.trace.clear();
        self.refresh().expect("the initial state resolved before");
    }

    /// Replaces the trace, keeping the old state if the new one is refused.
    pub fn replay(&mut self, trace: Vec<ProtocolEvent>) -> Result<(), RunError<ProtocolEvent>> {
        let current = run(&self.root, &trace, DEFAULT_FUEL)?;
        let (old_current, old_trace) =
            (std::mem::replace(&mut self.current, current), std::mem::replace(&mut self.trace, trace));
        if let Err(error) = self.refresh() {
            let index = self.trace.len();
            self.current = old_current;
            self.trace = old_trace;
            self.refresh().expect("the previous state resolved before");
            return Err(RunError { index, error });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let enabled: Vec<Value> = self
            .enabled
            .iter()
            .enumerate()
            .map(|(i, e)| json!({ "index": i + 1, "text": e.to_string(), "event": e.to_json() }))
            .collect();
        json!({
            "id": self.id,
            "protocol": self.protocol.name(),
            "eve": self.eve.name(),
            "mode": self.mode.name(),
            "trace": self.trace.iter().map(ProtocolEvent::to_json).collect::<Vec<_>>(),
            "enabled": enabled,
            "terminated": self.terminated,
        })
    }
}
