use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BlackBoxDevice, FuzzInput, FuzzObservation, Pulse};
use crate::error::{Error, Result};
use crate::receivers::{Basis, Interpretation, Polarization};

/// How a click in more than one detector is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoubleClickRule {
    #[default]
    Invalid,
    Loss,
}

impl DoubleClickRule {
    fn interpretation(self) -> Interpretation {
        match self {
            DoubleClickRule::Invalid => Interpretation::Invalid,
            DoubleClickRule::Loss => Interpretation::Loss,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApdParams {
    /// Linear-mode click threshold, in mean photons reaching one APD.
    pub p_th: f64,
    /// Pulse intensity that switches illuminated APDs to linear mode.
    pub blind_threshold: f64,
    /// Slots after a blinding pulse during which APDs stay linear.
    pub recovery_slots: i64,
    /// Geiger-mode detection probability per arriving photon.
    pub geiger_efficiency: f64,
    /// Polarizing-splitter crosstalk into the orthogonal port.
    pub leakage: f64,
    pub double_click: DoubleClickRule,
}

impl Default for ApdParams {
    fn default() -> Self {
        ApdParams {
            p_th: 1.0,
            blind_threshold: 500.0,
            recovery_slots: 10,
            geiger_efficiency: 0.6,
            leakage: 1e-3,
            double_click: DoubleClickRule::Invalid,
        }
    }
}

impl ApdParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p_th > 0.0
            && self.p_th.is_finite()
            && self.blind_threshold > self.p_th
            && self.recovery_slots >= 0
            && (0.0..=1.0).contains(&self.geiger_efficiency)
            && (0.0..0.5).contains(&self.leakage);
        if !ok {
            return Err(Error::MalformedParams(format!("invalid APD parameters {self:?}")));
        }
        Ok(())
    }
}

/// Detector order: computational H, V, then Hadamard +45, -45.
const DETECTORS: [Polarization; 4] = Polarization::NAMED;

fn detector_meaning(d: usize) -> (Basis, Interpretation) {
    match d {
        0 => (Basis::Computational, Interpretation::Bit0),
        1 => (Basis::Computational, Interpretation::Bit1),
        2 => (Basis::Hadamard, Interpretation::Bit0),
        _ => (Basis::Hadamard, Interpretation::Bit1),
    }
}

/// Fraction of a pulse reaching each detector: a polarization-independent
/// 50/50 splitter, then a polarizing splitter per basis with crosstalk.
fn shares(p: Polarization, leakage: f64) -> [f64; 4] {
    let mut s = [0.0; 4];
    for (d, det) in DETECTORS.iter().enumerate() {
        let m = p.malus(*det);
        s[d] = 0.5 * ((1.0 - leakage) * m + leakage * (1.0 - m));
    }
    s
}

/// Photon number of a pulse: `floor(mu)` or `floor(mu) + 1`, with mean `mu`.
fn photon_number(mu: f64, rng: &mut ChaCha8Rng) -> u64 {
    let base = mu.floor();
    let extra = rng.random::<f64>() < mu - base;
    base as u64 + u64::from(extra)
}

fn categorical(weights: &[f64; 4], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn observe(clicks: &BTreeSet<usize>, double_click: DoubleClickRule) -> FuzzObservation {
    let ids = clicks.iter().map(|d| DETECTORS[*d].name()).collect();
    let (interpretation, basis_registered) = match clicks.len() {
        0 => (Interpretation::Loss, None),
        1 => {
            let (b, i) = detector_meaning(*clicks.iter().next().expect("one click"));
            (i, Some(b))
        }
        _ => (double_click.interpretation(), None),
    };
    FuzzObservation { clicks: ids, interpretation, basis_registered }
}

/// Passive-basis polarization BB84 receiver with four avalanche
/// photodiodes. Each APD is in Geiger mode until a pulse at or above
/// `blind_threshold` illuminates it; it then stays in linear mode for
/// `recovery_slots` slots and clicks only when more than `p_th` reaches it.
#[derive(Clone, Debug)]
pub struct ApdDevice {
    params: ApdParams,
    /// Last slot in which each APD is still linear.
    linear_until: [Option<i64>; 4],
}

pub fn make_apd_receiver_device(params: ApdParams) -> Result<ApdDevice> {
    params.validate()?;
    Ok(ApdDevice { params, linear_until: [None; 4] })
}

impl ApdDevice {
    fn is_linear(&self, d: usize, slot: i64) -> bool {
        self.linear_until[d].is_some_and(|t| slot <= t)
    }

    fn detect(&mut self, pulse: &Pulse, rng: &mut ChaCha8Rng) -> BTreeSet<usize> {
        let p = &self.params;
        let s = shares(pulse.polarization, p.leakage);
        let mu = pulse.mean_photons;
        let mut clicks = BTreeSet::new();
        if mu >= p.blind_threshold {
            // The blinding light itself produces no avalanche.
            for (d, share) in s.iter().enumerate() {
                if *share > 0.0 {
                    let until = pulse.time_slot + p.recovery_slots;
                    self.linear_until[d] = Some(self.linear_until[d].map_or(until, |t| t.max(until)));
                }
            }
            return clicks;
        }
        let geiger: Vec<bool> = (0..4).map(|d| !self.is_linear(d, pulse.time_slot)).collect();
        if geiger.iter().any(|g| *g) {
            for _ in 0..photon_number(mu, rng) {
                let d = categorical(&s, rng);
                if geiger[d] && rng.random::<f64>() < p.geiger_efficiency {
                    clicks.insert(d);
                }
            }
        }
        for d in 0..4 {
            if !geiger[d] && mu * s[d] > p.p_th {
                clicks.insert(d);
            }
        }
        clicks
    }
}

impl BlackBoxDevice for ApdDevice {
    fn name(&self) -> String {
        if self.params.blind_threshold.is_finite() {
            "apd-passive-bb84".into()
        } else {
            "threshold-passive-bb84".into()
        }
    }

    fn reset(&mut self) {
        self.linear_until = [None; 4];
    }

    fn respond(&mut self, input: &FuzzInput, rng: &mut ChaCha8Rng) -> FuzzObservation {
        let mut last = BTreeSet::new();
        for pulse in &input.pulses {
            last = self.detect(pulse, rng);
        }
        observe(&last, self.params.double_click)
    }
}

/// Ideal passive receiver with unit-efficiency photon-number-resolving
/// detectors: one photon gives one click, more photons are flagged invalid.
#[derive(Clone, Debug, Default)]
pub struct IdealPnrDevice;

impl BlackBoxDevice for IdealPnrDevice {
    fn name(&self) -> String {
        "ideal-pnr".into()
    }

    fn reset(&mut self) {}

    fn respond(&mut self, input: &FuzzInput, rng: &mut ChaCha8Rng) -> FuzzObservation {
        let Some(pulse) = input.probe() else {
            return observe(&BTreeSet::new(), DoubleClickRule::Invalid);
        };
        let n = photon_number(pulse.mean_photons, rng);
        match n {
            0 => observe(&BTreeSet::new(), DoubleClickRule::Invalid),
            1 => {
                let d = categorical(&shares(pulse.polarization, 0.0), rng);
                observe(&BTreeSet::from([d]), DoubleClickRule::Invalid)
            }
            _ => FuzzObservation {
                clicks: BTreeSet::new(),
                interpretation: Interpretation::Invalid,
                basis_registered: None,
            },
        }
    }
}

/// Device description as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DeviceSpec {
    Apd {
        #[serde(default)]
        params: ApdParams,
    },
    /// Threshold detectors that never blind: they cannot tell one photon
    /// from several.
    Threshold {
        #[serde(default = "unit")]
        efficiency: f64,
    },
    IdealPnr,
}

fn unit() -> f64 {
    1.0
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec::Apd { params: ApdParams::default() }
    }
}

impl DeviceSpec {
    pub fn build(&self) -> Result<Box<dyn BlackBoxDevice + Send>> {
        Ok(match self {
            DeviceSpec::Apd { params } => Box::new(make_apd_receiver_device(params.clone())?),
            DeviceSpec::Threshold { efficiency } => {
                if !(0.0..=1.0).contains(efficiency) {
                    return Err(Error::MalformedParams(format!("efficiency {efficiency} outside [0, 1]")));
                }
                Box::new(ApdDevice {
                    params: ApdParams {
                        blind_threshold: f64::INFINITY,
                        geiger_efficiency: *efficiency,
                        leakage: 0.0,
                        ..ApdParams::default()
                    },
                    linear_until: [None; 4],
                })
            }
            DeviceSpec::IdealPnr => Box::new(IdealPnrDevice),
        })
    }
}
