//! Subcommand pipelines. Each returns the artifact it produced plus an
//! optional failure verdict that is reported after the artifact is written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use qkdlab::attacks::{build_constraint_system, synthesize_attacks, verify_oblivious};
use qkdlab::classify::{registry, AttackGraph, AttackRecord};
use qkdlab::fuzz::{replay, run_fuzz_campaign_traced, DeviceSpec, FuzzReport};
use qkdlab::protocol::{make_channel, ChannelModel, LogLine, RunOptions, Simulation};
use qkdlab::receivers::{AliceSourceModel, ReceiverModel, ReceiverSpec};

use crate::artifact::{Artifact, Body, ClassifiedRecord, ReplayResult};
use crate::config::{read_json, AttackRef, ScenarioConfig};
use crate::error::{CliError, CliResult};

pub struct Outcome {
    pub artifact: Option<Artifact>,
    /// Rendered text for stdout.
    pub text: String,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(artifact: Artifact) -> Self {
        Outcome { text: artifact.render(), artifact: Some(artifact), failure: None }
    }

    fn checked(artifact: Artifact, failure: Option<CliError>) -> Self {
        Outcome { failure, ..Outcome::ok(artifact) }
    }
}

/// Settings shared by the subcommands after merging flags over the config.
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub seed: u64,
}

impl Scenario {
    fn receiver_spec(&self) -> CliResult<ReceiverSpec> {
        self.cfg
            .receiver
            .as_ref()
            .ok_or_else(|| CliError::config("missing-receiver", "no receiver given (use --receiver or the config)"))?
            .spec()
    }

    fn receiver(&self) -> CliResult<(ReceiverModel, AliceSourceModel)> {
        let spec = self.receiver_spec()?;
        let receiver = spec.build().map_err(|e| CliError::from(e).with("receiver", spec.kind))?;
        let alice = match &self.cfg.alice {
            Some(a) => a.resolve(spec.kind)?,
            None => qkdlab::receivers::ideal_alice(spec.kind),
        };
        Ok((receiver, alice))
    }

    fn attack_ref(&self) -> CliResult<&AttackRef> {
        self.cfg
            .attack
            .as_ref()
            .ok_or_else(|| CliError::config("missing-attack", "no attack given (use --attack or the config)"))
    }
}

pub fn reverse_space(s: &Scenario) -> CliResult<Outcome> {
    let (receiver, _) = s.receiver()?;
    let states = receiver.reversed_space()?;
    info!("reversed space of {} has dimension {}", receiver.name, states.len());
    Ok(Outcome::ok(Artifact::new(
        s.seed,
        Body::ReverseSpace { receiver: receiver.name.clone(), dimension: states.len(), states },
    )))
}

pub fn synth(s: &Scenario) -> CliResult<Outcome> {
    let (receiver, alice) = s.receiver()?;
    let system = build_constraint_system(&receiver, &alice)?;
    let family = synthesize_attacks(&system, s.cfg.synth.eve_dim)
        .map_err(|e| CliError::from(e).with("receiver", &receiver.name))?;
    info!("family of dimension {} with {} instances", family.dimension(), family.instances.len());
    let samples = family.sample_members(s.cfg.synth.samples, s.seed);
    Ok(Outcome::ok(Artifact::new(s.seed, Body::Synth { family, samples })))
}

pub fn verify(s: &Scenario) -> CliResult<Outcome> {
    let (receiver, alice) = s.receiver()?;
    let attack = s.attack_ref()?.resolve(&receiver, &alice)?;
    let report = verify_oblivious(&attack, &receiver, &alice)?;
    let failure = (!report.passed()).then(|| {
        let worst = report.per_row_residuals.iter().max_by(|a, b| a.residual.total_cmp(&b.residual));
        CliError::verification(format!("attack '{}' is not a zero-error isometry for {}", attack.name, receiver.name))
            .with("attack", &attack.name)
            .with("receiver", &receiver.name)
            .with("oblivious", report.oblivious)
            .with("is_isometry", report.is_isometry)
            .with("max_error_amplitude", report.max_error_amplitude)
            .with("worst_row", worst)
    });
    Ok(Outcome::checked(Artifact::new(s.seed, Body::Verify { report }), failure))
}

pub fn simulate(s: &Scenario) -> CliResult<Outcome> {
    let (receiver, alice) = s.receiver()?;
    let channel = match (&s.cfg.channel, &s.cfg.attack) {
        (Some(c), _) => c.resolve(&receiver, &alice)?,
        (None, Some(a)) => ChannelModel::attack(a.resolve(&receiver, &alice)?),
        (None, None) => ChannelModel::Identity,
    };
    let channel = make_channel(channel, &receiver)?;
    let rounds = s.cfg.rounds.unwrap_or(10_000);
    let opts = RunOptions { test_fraction: s.cfg.simulate.test_fraction, threads: s.cfg.simulate.threads };
    let sim = Simulation::new(&alice, &channel, &receiver)?;
    info!("simulating {rounds} rounds of {} over {}", receiver.name, channel.name());
    let report = match &s.cfg.simulate.log {
        Some(path) => {
            let mut w = create(path)?;
            write_line(&mut w, &LogLine::Header(sim.header(rounds, s.seed, &opts)))?;
            let report = sim.run_logged(rounds, s.seed, &opts, |r| write_line(&mut w, &LogLine::Round(r)))?;
            w.flush().map_err(|e| io_error(path, e))?;
            report
        }
        None => sim.run(rounds, s.seed, &opts)?,
    };
    let exact = s.cfg.simulate.exact.then(|| sim.exact());
    Ok(Outcome::ok(Artifact::new(s.seed, Body::Simulate { report, exact })))
}

pub fn fuzz(s: &Scenario) -> CliResult<Outcome> {
    let spec = s.cfg.fuzz.device.clone();
    let mut device = spec.build()?;
    let mut sink = match &s.cfg.fuzz.trace {
        Some(path) => Some(create(path)?),
        None => None,
    };
    let report = run_fuzz_campaign_traced(device.as_mut(), &s.cfg.fuzz.strategy, s.seed, |rec| {
        if let Some(w) = sink.as_mut() {
            write_line(w, rec)?;
        }
        Ok(())
    })?;
    if let (Some(w), Some(path)) = (sink.as_mut(), &s.cfg.fuzz.trace) {
        w.flush().map_err(|e| io_error(path, e))?;
    }
    info!("{} cases, {} anomalies", report.test_cases_run, report.anomalies.len());
    Ok(Outcome::ok(Artifact::new(s.seed, Body::Fuzz { device_spec: spec, report })))
}

/// Re-runs anomalies of a fuzz artifact on a fresh device built from the
/// artifact's own device description.
pub fn fuzz_replay(path: &Path, anomaly: Option<usize>) -> CliResult<Outcome> {
    let artifact = Artifact::load(path)?;
    let Body::Fuzz { device_spec, report } = &artifact.body else {
        return Err(CliError::config("schema", format!("{} is not a fuzz artifact", path.display())));
    };
    let ids: Vec<usize> = match anomaly {
        Some(id) => vec![id],
        None => report.anomalies.iter().map(|a| a.id).collect(),
    };
    let results = ids
        .into_iter()
        .map(|id| replay_one(device_spec, report, id))
        .collect::<CliResult<Vec<_>>>()?;
    let failed: Vec<usize> = results.iter().filter(|r| !r.matches).map(|r| r.anomaly).collect();
    let failure = (!failed.is_empty())
        .then(|| CliError::verification("replayed anomalies differ from the recorded counts").with("anomalies", &failed));
    let body = Body::Replay { device: report.device.clone(), results };
    Ok(Outcome::checked(Artifact::new(artifact.seed, body), failure))
}

fn replay_one(spec: &DeviceSpec, report: &FuzzReport, id: usize) -> CliResult<ReplayResult> {
    let mut device = spec.build()?;
    let observed = replay(device.as_mut(), report, id).map_err(|e| CliError::from(e).with("anomaly", id))?;
    let expected = report.anomalies.iter().find(|a| a.id == id).map(|a| a.counts.clone()).unwrap_or_default();
    Ok(ReplayResult { anomaly: id, matches: observed == expected, expected, observed })
}

pub fn classify(s: &Scenario) -> CliResult<Outcome> {
    let records: Vec<AttackRecord> = match &s.cfg.classify.records {
        Some(path) => read_json(path)?,
        None => registry(),
    };
    let graph = AttackGraph::from_records(&records);
    if let Some(path) = &s.cfg.classify.dot {
        std::fs::write(path, graph.to_dot()).map_err(|e| io_error(path, e))?;
    }
    let classified: Vec<ClassifiedRecord> = records
        .iter()
        .map(|r| ClassifiedRecord {
            id: r.id.clone(),
            name: r.name.clone(),
            target: r.target,
            class: r.classify(),
            expected_class: r.expected_class,
            families: r.families.iter().copied().collect(),
            missing_implied_families: r.missing_implied_families(),
        })
        .collect();
    let mismatched: Vec<&str> = classified
        .iter()
        .filter(|r| r.class != r.expected_class || !r.missing_implied_families.is_empty())
        .map(|r| r.id.as_str())
        .collect();
    let failure = (!mismatched.is_empty()).then(|| {
        CliError::verification("records disagree with their expected class or family tags").with("records", &mismatched)
    });
    Ok(Outcome::checked(Artifact::new(s.seed, Body::Classify { records: classified, graph }), failure))
}

/// Renders previously written artifacts in the order given.
pub fn report(paths: &[PathBuf]) -> CliResult<Outcome> {
    let mut text = String::new();
    for (i, path) in paths.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&Artifact::load(path)?.render());
    }
    Ok(Outcome { artifact: None, text, failure: None })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn write_line<T: serde::Serialize>(w: &mut impl Write, value: &T) -> qkdlab::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::config("io", format!("{}: {e}", path.display())).with("path", path)
}
