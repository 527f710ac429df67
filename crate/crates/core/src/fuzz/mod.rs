//! Black-box device fuzzing.
//!
//! A device is anything that turns a sequence of classical-intensity
//! pulses into detector clicks. The campaign only sees
//! [`FuzzObservation`]s: it calibrates on the valid BB84 states, varies one
//! degree of freedom at a time, and then prefixes anomalous inputs to new
//! probes.

mod campaign;
mod device;

#[cfg(test)]
mod tests;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use campaign::{
    derived_detections, replay, run_fuzz_campaign, run_fuzz_campaign_traced, Anomaly, AnomalyTag, FuzzReport,
    StrategyConfig, TraceRecord, VulnerabilityRecord,
};
pub use device::{make_apd_receiver_device, ApdDevice, ApdParams, DeviceSpec, DoubleClickRule, IdealPnrDevice};

use crate::error::{Error, Result};
use crate::receivers::{Basis, Interpretation, Polarization};

/// One pulse of a test input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub time_slot: i64,
    pub polarization: Polarization,
    /// Mean photon number. Integer values are exact Fock states.
    pub mean_photons: f64,
}

impl Pulse {
    pub fn new(time_slot: i64, polarization: Polarization, mean_photons: f64) -> Self {
        Pulse { time_slot, polarization, mean_photons }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzInput {
    pub pulses: Vec<Pulse>,
}

impl FuzzInput {
    pub fn single(p: Pulse) -> Self {
        FuzzInput { pulses: vec![p] }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pulses {
            if !p.mean_photons.is_finite() || p.mean_photons < 0.0 {
                return Err(Error::MalformedParams(format!(
                    "mean photon number must be finite and non-negative (got {})",
                    p.mean_photons
                )));
            }
        }
        if self.pulses.windows(2).any(|w| w[1].time_slot < w[0].time_slot) {
            return Err(Error::MalformedParams("pulse time slots must be non-decreasing".into()));
        }
        Ok(())
    }

    /// The pulse whose detection window is observed.
    pub fn probe(&self) -> Option<&Pulse> {
        self.pulses.last()
    }
}

/// What the device reports for the detection window of an input's last
/// pulse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzObservation {
    pub clicks: BTreeSet<String>,
    pub interpretation: Interpretation,
    pub basis_registered: Option<Basis>,
}

impl FuzzObservation {
    /// Coarse class used to compare observations: `click:<detector>` for a
    /// single click, otherwise the interpretation.
    pub fn class(&self) -> String {
        match (self.clicks.len(), self.clicks.iter().next()) {
            (1, Some(d)) => format!("click:{d}"),
            _ => match self.interpretation {
                Interpretation::Loss => "loss".into(),
                Interpretation::Invalid => "invalid".into(),
                Interpretation::Bit0 => "bit0".into(),
                Interpretation::Bit1 => "bit1".into(),
            },
        }
    }
}

/// The contract a fuzzed device offers: inputs in, observations out.
pub trait BlackBoxDevice {
    fn name(&self) -> String;

    /// Returns the device to its power-on state.
    fn reset(&mut self);

    /// Feeds `input` into the device and reports the last detection window.
    /// Internal state (such as blinded detectors) persists across calls
    /// until [`reset`](BlackBoxDevice::reset).
    fn respond(&mut self, input: &FuzzInput, rng: &mut ChaCha8Rng) -> FuzzObservation;
}

/// Probes a device with a seeded generator.
pub fn probe(device: &mut dyn BlackBoxDevice, input: &FuzzInput, seed: u64) -> Result<FuzzObservation> {
    input.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(device.respond(input, &mut rng))
}
