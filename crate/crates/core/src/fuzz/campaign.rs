use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{probe, BlackBoxDevice, FuzzInput, FuzzObservation, Pulse};
use crate::error::{Error, Result};
use crate::receivers::{Basis, BrightDetection, Interpretation, Polarization};

/// Schedule parameters of a campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// Budget in probes (every repetition counts).
    pub max_cases: u64,
    /// Mean photon numbers of the intensity sweep.
    pub intensity_grid: Vec<f64>,
    /// Time-slot shifts of the time sweep; non-negative values double as
    /// gaps between a prefix and the next probe.
    pub time_grid: Vec<i64>,
    /// Maximum number of inputs chained into one test case.
    pub combination_depth: usize,
    /// Probes per input in stages 1 and later.
    pub repeats: u32,
    /// Probes per valid state in the calibration stage.
    pub calibration_repeats: u32,
    /// Later stages add geometric midpoints to the intensity grid.
    pub refine: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            max_cases: 10_000,
            intensity_grid: vec![0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 1e3, 1e4],
            time_grid: vec![-2, -1, 0, 1, 2],
            combination_depth: 2,
            repeats: 24,
            calibration_repeats: 64,
            refine: true,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_cases == 0 || self.repeats == 0 || self.calibration_repeats == 0 {
            return Err(Error::MalformedParams("max_cases, repeats and calibration_repeats must be positive".into()));
        }
        if self.combination_depth == 0 {
            return Err(Error::MalformedParams("combination depth must be at least 1".into()));
        }
        if self.intensity_grid.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::MalformedParams("intensity grid values must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub(crate) fn refined_grid(&self) -> Vec<f64> {
        let mut g = self.intensity_grid.clone();
        g.sort_by(f64::total_cmp);
        if !self.refine {
            return g;
        }
        let mut out = Vec::with_capacity(2 * g.len());
        for w in g.windows(2) {
            out.push(w[0]);
            if w[0] > 0.0 {
                out.push((w[0] * w[1]).sqrt());
            }
        }
        out.extend(g.last());
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnomalyTag {
    /// A bright pulse is registered as a loss.
    Blinding,
    /// After an anomalous prefix, a pulse the calibrated device would
    /// detect is always lost.
    WeakUnderBlinding,
    /// After an anomalous prefix, a pulse always clicks in the detector of
    /// its own polarization.
    StrongUnderBlinding,
    /// A multi-photon pulse yields a single valid click.
    MultiPhotonAccepted,
    /// A pulse always produces the same single click.
    DeterministicClick,
}

impl AnomalyTag {
    /// Order in which anomalous inputs are reused as prefixes: suppressed
    /// detections first, since they suggest a changed device state.
    fn priority(self) -> u8 {
        match self {
            AnomalyTag::Blinding | AnomalyTag::WeakUnderBlinding => 0,
            AnomalyTag::StrongUnderBlinding | AnomalyTag::DeterministicClick => 1,
            AnomalyTag::MultiPhotonAccepted => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anomaly {
    pub id: usize,
    pub stage: usize,
    pub input: FuzzInput,
    /// Most frequent observation.
    pub observation: FuzzObservation,
    pub tag: AnomalyTag,
    /// Observation classes over all repetitions.
    pub counts: BTreeMap<String, u32>,
    /// Index of the first probe; repetition `r` used case `first_case + r`.
    pub first_case: u64,
    pub repeats: u32,
}

/// An out-of-protocol state the device measures, with the interpretation
/// it forces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VulnerabilityRecord {
    pub anomaly: usize,
    /// Pulses that put the device into the vulnerable configuration.
    pub prefix: Vec<Pulse>,
    pub state: Pulse,
    pub detector: String,
    pub basis: Basis,
    pub bit: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzReport {
    pub v: u32,
    pub device: String,
    pub seed: u64,
    pub strategy: StrategyConfig,
    pub test_cases_run: u64,
    /// Per-photon click probability calibrated on the valid states.
    pub calibrated_click_probability: f64,
    pub anomalies: Vec<Anomaly>,
    pub properties_found: BTreeSet<AnomalyTag>,
    pub derived_vulnerabilities: Vec<VulnerabilityRecord>,
}

/// One probe of a campaign, for the newline-delimited trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub case: u64,
    pub stage: usize,
    pub seed: u64,
    pub input: FuzzInput,
    pub observation: FuzzObservation,
}

/// Seed of probe number `case` in a campaign seeded with `seed`.
fn case_seed(seed: u64, case: u64) -> u64 {
    let mut z = seed.wrapping_add(case.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loss probability expected from the calibration for a pulse of mean
/// `mu` photons, each detected independently with probability `c`.
fn expected_loss(mu: f64, c: f64) -> f64 {
    let base = mu.floor();
    let frac = mu - base;
    let miss = 1.0 - c;
    (1.0 - frac) * miss.powf(base) + frac * miss.powf(base + 1.0)
}

/// An all-loss result is flagged when its probability under the
/// calibration falls below this.
const SURPRISE: f64 = 1e-6;

struct Campaign<'a, F: FnMut(&TraceRecord) -> Result<()>> {
    device: &'a mut dyn BlackBoxDevice,
    cfg: &'a StrategyConfig,
    seed: u64,
    case: u64,
    sink: F,
    tested: BTreeSet<String>,
}

impl<F: FnMut(&TraceRecord) -> Result<()>> Campaign<'_, F> {
    fn budget_left(&self, n: u32) -> bool {
        self.case + u64::from(n) <= self.cfg.max_cases
    }

    /// Probes `input` `n` times on a freshly reset device each time.
    fn run(&mut self, stage: usize, input: &FuzzInput, n: u32) -> Result<Vec<FuzzObservation>> {
        let mut out = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let seed = case_seed(self.seed, self.case);
            self.device.reset();
            let observation = probe(self.device, input, seed)?;
            (self.sink)(&TraceRecord { case: self.case, stage, seed, input: input.clone(), observation: observation.clone() })?;
            self.case += 1;
            out.push(observation);
        }
        Ok(out)
    }

    /// Returns false once the input was already tested or the budget is
    /// exhausted.
    fn fresh(&mut self, input: &FuzzInput) -> bool {
        self.tested.insert(serde_json::to_string(input).expect("inputs serialize"))
    }
}

fn classify(input: &FuzzInput, obs: &[FuzzObservation], has_prefix: bool, c: f64) -> Option<AnomalyTag> {
    let probe = input.probe()?;
    let mu = probe.mean_photons;
    if obs.iter().all(|o| o.interpretation == Interpretation::Loss) {
        let q = expected_loss(mu, c);
        if q.powi(obs.len() as i32) < SURPRISE {
            return Some(if has_prefix { AnomalyTag::WeakUnderBlinding } else { AnomalyTag::Blinding });
        }
        return None;
    }
    let first = obs[0].class();
    if obs.len() > 1 && obs[0].clicks.len() == 1 && obs.iter().all(|o| o.class() == first) {
        let own = format!("click:{}", probe.polarization.name());
        return Some(if has_prefix && first == own {
            AnomalyTag::StrongUnderBlinding
        } else {
            AnomalyTag::DeterministicClick
        });
    }
    if !has_prefix && mu >= 2.0 && obs.iter().any(|o| o.clicks.len() == 1) {
        return Some(AnomalyTag::MultiPhotonAccepted);
    }
    None
}

fn most_frequent(obs: &[FuzzObservation]) -> (FuzzObservation, BTreeMap<String, u32>) {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for o in obs {
        *counts.entry(o.class()).or_default() += 1;
    }
    let best = counts.iter().max_by_key(|(k, n)| (**n, std::cmp::Reverse((*k).clone()))).map(|(k, _)| k.clone());
    let rep = obs.iter().find(|o| Some(o.class()) == best).cloned().expect("non-empty observations");
    (rep, counts)
}

/// Runs the staged campaign and writes every probe to `sink`.
pub fn run_fuzz_campaign_traced<F>(
    device: &mut dyn BlackBoxDevice,
    cfg: &StrategyConfig,
    seed: u64,
    sink: F,
) -> Result<FuzzReport>
where
    F: FnMut(&TraceRecord) -> Result<()>,
{
    cfg.validate()?;
    let device_name = device.name();
    let mut c = Campaign { device, cfg, seed, case: 0, sink, tested: BTreeSet::new() };
    let mut anomalies: Vec<Anomaly> = Vec::new();

    // Stage 0: the valid BB84 states calibrate the per-photon click rate.
    let valid: Vec<FuzzInput> =
        Polarization::NAMED.iter().map(|p| FuzzInput::single(Pulse::new(0, *p, 1.0))).collect();
    let (mut clicked, mut total) = (0u64, 0u64);
    for input in &valid {
        if !c.budget_left(cfg.calibration_repeats) {
            break;
        }
        c.fresh(input);
        for o in c.run(0, input, cfg.calibration_repeats)? {
            total += 1;
            clicked += u64::from(o.interpretation != Interpretation::Loss);
        }
    }
    let click_rate = if total == 0 { 1.0 } else { clicked as f64 / total as f64 };

    let record = |c: &mut Campaign<'_, F>, stage: usize, input: FuzzInput, has_prefix: bool, anomalies: &mut Vec<Anomaly>| -> Result<bool> {
        if !c.fresh(&input) {
            return Ok(true);
        }
        if !c.budget_left(cfg.repeats) {
            return Ok(false);
        }
        let first_case = c.case;
        let obs = c.run(stage, &input, cfg.repeats)?;
        if let Some(tag) = classify(&input, &obs, has_prefix, click_rate) {
            let (observation, counts) = most_frequent(&obs);
            anomalies.push(Anomaly {
                id: anomalies.len(),
                stage,
                input,
                observation,
                tag,
                counts,
                first_case,
                repeats: cfg.repeats,
            });
        }
        Ok(true)
    };

    // Stage 1: one degree of freedom at a time.
    let mut budget = true;
    let mut grid = cfg.intensity_grid.clone();
    grid.sort_by(f64::total_cmp);
    'stage1: {
        for mu in &grid {
            for p in Polarization::NAMED {
                budget = record(&mut c, 1, FuzzInput::single(Pulse::new(0, p, *mu)), false, &mut anomalies)?;
                if !budget {
                    break 'stage1;
                }
            }
        }
        for shift in &cfg.time_grid {
            for p in Polarization::NAMED {
                budget = record(&mut c, 1, FuzzInput::single(Pulse::new(*shift, p, 1.0)), false, &mut anomalies)?;
                if !budget {
                    break 'stage1;
                }
            }
        }
    }

    // Later stages: anomalous inputs become prefixes of new probes.
    let fine = cfg.refined_grid();
    let gaps: Vec<i64> = {
        let mut g: Vec<i64> = cfg.time_grid.iter().copied().filter(|t| *t >= 0).collect();
        g.sort_unstable();
        g.dedup();
        if g.is_empty() {
            g.push(1);
        }
        g
    };
    for stage in 2..=cfg.combination_depth {
        if !budget {
            break;
        }
        let mut prefixes: Vec<&Anomaly> = anomalies.iter().filter(|a| a.stage == stage - 1).collect();
        prefixes.sort_by_key(|a| (a.tag.priority(), a.id));
        let prefixes: Vec<FuzzInput> = prefixes.into_iter().map(|a| a.input.clone()).collect();
        'stage: for prefix in prefixes {
            let last = prefix.pulses.last().map_or(0, |p| p.time_slot);
            for gap in &gaps {
                for mu in &fine {
                    for p in Polarization::NAMED {
                        let mut input = prefix.clone();
                        input.pulses.push(Pulse::new(last + gap, p, *mu));
                        budget = record(&mut c, stage, input, true, &mut anomalies)?;
                        if !budget {
                            break 'stage;
                        }
                    }
                }
            }
        }
    }

    let properties_found = anomalies.iter().map(|a| a.tag).collect();
    let derived_vulnerabilities = anomalies
        .iter()
        .filter(|a| a.tag == AnomalyTag::StrongUnderBlinding)
        .filter_map(|a| {
            let (state, prefix) = a.input.pulses.split_last()?;
            let basis = a.observation.basis_registered?;
            let bit = a.observation.interpretation.bit()?;
            Some(VulnerabilityRecord {
                anomaly: a.id,
                prefix: prefix.to_vec(),
                state: state.clone(),
                detector: a.observation.clicks.iter().next()?.clone(),
                basis,
                bit,
            })
        })
        .collect();
    Ok(FuzzReport {
        v: crate::protocol::SCHEMA_VERSION,
        device: device_name,
        seed,
        strategy: cfg.clone(),
        test_cases_run: c.case,
        calibrated_click_probability: click_rate,
        anomalies,
        properties_found,
        derived_vulnerabilities,
    })
}

pub fn run_fuzz_campaign(device: &mut dyn BlackBoxDevice, cfg: &StrategyConfig, seed: u64) -> Result<FuzzReport> {
    run_fuzz_campaign_traced(device, cfg, seed, |_| Ok(()))
}

/// Re-executes a logged anomaly with its original probe seeds and returns
/// the observation classes, which match the logged counts for a
/// deterministic device.
pub fn replay(device: &mut dyn BlackBoxDevice, report: &FuzzReport, anomaly: usize) -> Result<BTreeMap<String, u32>> {
    let a = report
        .anomalies
        .iter()
        .find(|a| a.id == anomaly)
        .ok_or_else(|| Error::MalformedParams(format!("report has no anomaly {anomaly}")))?;
    let mut counts = BTreeMap::new();
    for r in 0..u64::from(a.repeats) {
        device.reset();
        let o = probe(device, &a.input, case_seed(report.seed, a.first_case + r))?;
        *counts.entry(o.class()).or_default() += 1;
    }
    Ok(counts)
}

/// Bright-state detections for the blinded receiver model, one per
/// polarization, from the derived vulnerability records.
pub fn derived_detections(records: &[VulnerabilityRecord]) -> Vec<BrightDetection> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<BrightDetection> = records
        .iter()
        .filter(|r| !matches!(r.state.polarization, Polarization::Angle(_)))
        .filter(|r| seen.insert(r.state.polarization.name()))
        .map(|r| BrightDetection { polarization: r.state.polarization, basis: r.basis, bit: r.bit })
        .collect();
    out.sort_by_key(|d| (d.basis, d.bit));
    out
}
