use std::io::{self, Write};
use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand};
use plsanim_cli::{animate, read_trace, run_check, run_feasible, run_walk, EXIT_ERROR};
use plsanim_core::checker::DEFAULT_DEPTH;
use plsanim_core::protocols::default_config;
use plsanim_core::terms::parse;
use plsanim_core::{AttackMode, EveLocation, Property, PropertyKind, ProtocolConfig, ProtocolKind, SignalPattern};
use plsanim_service::{ServiceConfig, Session};

/// Animate and verify security protocols with watermarking and jamming.
#[derive(Parser)]
#[command(name = "plsanim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step through a protocol by hand.
    Animate(Target),
    /// Check a property; exits 0 if it holds, 2 if violated, 3 on timeout.
    Check(CheckArgs),
    /// Serve the HTTP API (and optionally the web UI).
    Serve(ServeArgs),
    /// List protocols, Eve locations, modes and properties.
    List,
    /// Replay a trace file; exits 2 if some event is refused.
    Feasible(FeasibleArgs),
    /// Print a seeded random run.
    Walk(WalkArgs),
}

#[derive(Args)]
struct Target {
    /// nspk, nswj, dh or dhwj
    #[arg(value_name = "PROTOCOL", required_unless_present = "protocol_flag", conflicts_with = "protocol_flag")]
    protocol: Option<ProtocolKind>,
    #[arg(long = "protocol", id = "protocol_flag", value_name = "PROTOCOL")]
    protocol_flag: Option<ProtocolKind>,
    /// Intruder location: eve1 (near Alice), eve2 (near Bob), eve3 (near both), eve4 (near neither)
    #[arg(long, default_value = "eve3")]
    eve: EveLocation,
    #[arg(long, default_value = "active")]
    mode: AttackMode,
}

impl Target {
    fn config(&self) -> ProtocolConfig {
        let protocol = self.protocol.or(self.protocol_flag).expect("clap requires one of them");
        default_config(protocol, self.eve, self.mode)
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    target: Target,
    /// secrecy, corr or inj-corr
    #[arg(long, default_value = "secrecy")]
    property: PropertyKind,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    /// Secrecy of this message only, e.g. N0
    #[arg(long)]
    message: Option<String>,
    /// Signal pattern Kind.agent.peer.p1.p2 with `*` for any, e.g. EndProt.A1.A0.*.*
    #[arg(long)]
    trigger: Option<String>,
    /// Pattern that must precede the trigger; `=` copies the trigger's field
    #[arg(long)]
    guard: Option<String>,
    /// Wall-clock budget in seconds
    #[arg(long, default_value_t = 120)]
    timeout: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    address: IpAddr,
    /// Directory with the web UI to serve at /
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FeasibleArgs {
    #[command(flatten)]
    target: Target,
    /// JSON array of events, or one rendered event per line
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args)]
struct WalkArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    steps: usize,
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_ERROR)
}

fn build_property(args: &CheckArgs, cfg: &ProtocolConfig) -> Result<Property, String> {
    let message = args.message.as_deref().map(|m| parse(m, &cfg.bounds)).transpose().map_err(|e| e.to_string())?;
    let pattern = |p: &Option<String>| {
        p.as_deref().map(|p| SignalPattern::parse(p, &cfg.bounds)).transpose().map_err(|e| e.to_string())
    };
    Ok(Property::from_parts(args.property, message, pattern(&args.trigger)?, pattern(&args.guard)?, cfg))
}

fn serve(args: ServeArgs) -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail(e),
    };
    runtime.block_on(async {
        let listener = match tokio::net::TcpListener::bind((args.address, args.port)).await {
            Ok(l) => l,
            Err(e) => return fail(format!("cannot listen on {}:{}: {e}", args.address, args.port)),
        };
        tracing::info!("listening on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
        let config = ServiceConfig { static_dir: args.static_dir, ..ServiceConfig::default() };
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match plsanim_service::serve(listener, config, shutdown).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        }
    })
}

fn list(out: &mut impl Write) -> io::Result<()> {
    let names = |v: Vec<&str>| v.join(", ");
    writeln!(out, "protocols: {}", names(ProtocolKind::ALL.iter().map(|p| p.name()).collect()))?;
    writeln!(out, "eve locations: {}", names(EveLocation::ALL.iter().map(|e| e.name()).collect()))?;
    writeln!(out, "modes: {}", names(AttackMode::ALL.iter().map(|m| m.name()).collect()))?;
    writeln!(out, "properties: {}", names(PropertyKind::ALL.iter().map(|p| p.name()).collect()))?;
    writeln!(out, "default depth: {DEFAULT_DEPTH}")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Animate(target) => {
            let cfg = target.config();
            match Session::new("cli".into(), cfg.protocol, cfg.eve, cfg.mode) {
                Ok(mut session) => animate(&mut session, io::stdin().lock(), &mut out).map(|()| 0),
                Err(e) => return fail(e),
            }
        }
        Command::Check(args) => {
            let cfg = args.target.config();
            let property = match build_property(&args, &cfg) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            run_check(&cfg, &property, args.depth, Duration::from_secs(args.timeout), &mut out)
        }
        Command::Serve(args) => return serve(args),
        Command::List => list(&mut out).map(|()| 0),
        Command::Feasible(args) => {
            let cfg = args.target.config();
            let text = match std::fs::read_to_string(&args.trace) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", args.trace.display())),
            };
            match read_trace(&text, &cfg) {
                Ok(trace) => run_feasible(&cfg, &trace, &mut out),
                Err(e) => return fail(e),
            }
        }
        Command::Walk(args) => run_walk(&args.target.config(), args.steps, args.seed, &mut out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(e),
    }
}
