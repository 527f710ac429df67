//! `qkdlab`: reversed spaces, attack synthesis and verification, BB84
//! simulation, detector fuzzing and attack classification from the command
//! line.

mod artifact;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Outcome, Scenario};
use crate::config::{AttackRef, ReceiverRef, ScenarioConfig};
use crate::error::{exit, CliError, CliResult};

#[derive(Parser)]
#[command(name = "qkdlab", version, about = "Zero-error attack analysis for photonic BB84 receivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario document; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random choice (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the JSON artifact.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReceiverArg {
    /// Built-in receiver kind, e.g. interferometric-6mode.
    #[arg(long)]
    receiver: Option<String>,
}

#[derive(Args)]
struct AttackArg {
    /// Attack document path or builtin:<name>.
    #[arg(long)]
    attack: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Basis of the channel states that can reach a measured outcome.
    ReverseSpace {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        receiver: ReceiverArg,
    },
    /// All zero-error isometries against a receiver.
    Synth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        receiver: ReceiverArg,
        /// Eve register dimension (number of constraint columns when omitted).
        #[arg(long)]
        eve_dim: Option<usize>,
        /// Additional family members to sample.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Check that an attack never causes an error or invalid event.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        receiver: ReceiverArg,
        #[command(flatten)]
        attack: AttackArg,
    },
    /// Monte-Carlo BB84 session.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        receiver: ReceiverArg,
        #[command(flatten)]
        attack: AttackArg,
        #[arg(long)]
        rounds: Option<u64>,
        /// Newline-delimited JSON round log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also compute exact expectations.
        #[arg(long)]
        exact: bool,
    },
    /// Fuzz a black-box detector model, or replay a previous campaign.
    Fuzz {
        #[command(flatten)]
        common: Common,
        /// Fuzz artifact whose anomalies are re-executed.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Restrict the replay to one anomaly id.
        #[arg(long, requires = "replay")]
        anomaly: Option<usize>,
        /// Newline-delimited JSON trace of every probe.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        max_cases: Option<u64>,
    },
    /// Classify the attack registry by the spaces each attack touches.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Write the subsumption graph in Graphviz format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Render artifacts as tables.
    Report {
        #[command(flatten)]
        common: Common,
        artifacts: Vec<PathBuf>,
    },
}

fn scenario(common: &Common, receiver: Option<&ReceiverArg>) -> CliResult<Scenario> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(d) = &cfg.description {
        log::info!("scenario: {d}");
    }
    if let Some(r) = receiver.and_then(|r| r.receiver.clone()) {
        cfg.receiver = Some(ReceiverRef::Name(r));
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    Ok(Scenario { cfg, seed })
}

fn with_attack(mut s: Scenario, attack: &AttackArg) -> Scenario {
    if let Some(a) = &attack.attack {
        s.cfg.attack = Some(AttackRef::from_arg(a));
    }
    s
}

fn execute(command: Command) -> CliResult<(Outcome, Option<PathBuf>)> {
    let (outcome, s) = match command {
        Command::ReverseSpace { common, receiver } => {
            let s = scenario(&common, Some(&receiver))?;
            (commands::reverse_space(&s)?, s)
        }
        Command::Synth { common, receiver, eve_dim, samples } => {
            let mut s = scenario(&common, Some(&receiver))?;
            s.cfg.synth.eve_dim = eve_dim.or(s.cfg.synth.eve_dim);
            s.cfg.synth.samples = samples.unwrap_or(s.cfg.synth.samples);
            (commands::synth(&s)?, s)
        }
        Command::Verify { common, receiver, attack } => {
            let s = with_attack(scenario(&common, Some(&receiver))?, &attack);
            (commands::verify(&s)?, s)
        }
        Command::Simulate { common, receiver, attack, rounds, log, exact } => {
            let mut s = with_attack(scenario(&common, Some(&receiver))?, &attack);
            if attack.attack.is_some() {
                s.cfg.channel = None;
            }
            s.cfg.rounds = rounds.or(s.cfg.rounds);
            s.cfg.simulate.log = log.or(s.cfg.simulate.log);
            s.cfg.simulate.exact |= exact;
            (commands::simulate(&s)?, s)
        }
        Command::Fuzz { common, replay: Some(path), anomaly, .. } => {
            let s = scenario(&common, None)?;
            (commands::fuzz_replay(&path, anomaly)?, s)
        }
        Command::Fuzz { common, replay: None, trace, max_cases, .. } => {
            let mut s = scenario(&common, None)?;
            s.cfg.fuzz.trace = trace.or(s.cfg.fuzz.trace);
            if let Some(n) = max_cases {
                s.cfg.fuzz.strategy.max_cases = n;
            }
            (commands::fuzz(&s)?, s)
        }
        Command::Classify { common, dot } => {
            let mut s = scenario(&common, None)?;
            s.cfg.classify.dot = dot.or(s.cfg.classify.dot);
            (commands::classify(&s)?, s)
        }
        Command::Report { common, artifacts } => {
            let s = scenario(&common, None)?;
            let mut paths = s.cfg.report.artifacts.clone();
            paths.extend(artifacts);
            (commands::report(&paths)?, s)
        }
    };
    Ok((outcome, s.cfg.out))
}

fn run(command: Command) -> CliResult<u8> {
    let (outcome, out) = execute(command)?;
    match (&outcome.artifact, &out) {
        (Some(artifact), Some(path)) => {
            std::fs::write(path, artifact.to_json()?).map_err(|e| commands::io_error(path, e))?;
        }
        (None, Some(path)) => std::fs::write(path, &outcome.text).map_err(|e| commands::io_error(path, e))?,
        _ => {}
    }
    print!("{}", outcome.text);
    match outcome.failure {
        Some(f) => Err(f),
        None => Ok(exit::OK),
    }
}

fn init_logging() -> CliResult<()> {
    let level = match std::env::var("QKDLAB_LOG_LEVEL").as_deref() {
        Err(_) | Ok("") => log::LevelFilter::Warn,
        Ok("error") => log::LevelFilter::Error,
        Ok("warn") => log::LevelFilter::Warn,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => {
            return Err(CliError::config("malformed-params", format!("QKDLAB_LOG_LEVEL must be error, warn, info or debug (got '{other}')")))
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str().to_lowercase(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{}", CliError::config("usage", e.kind().to_string()).to_json());
            return ExitCode::from(exit::CONFIG);
        }
    };
    let result = init_logging().and_then(|()| run(cli.command));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit)
        }
    }
}
