use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::builders::ReceiverKind;
use super::Basis;
use crate::error::{Error, Result};
use crate::fockspace::{ModeLabel, PhotonicState};
use crate::tolerance::COMPARE;
use crate::C64;

/// A protocol state `sum_i alpha_i |i>_A` over Alice's qubit basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicalState {
    pub label: String,
    pub basis: Basis,
    pub bit: u8,
    pub alpha: [C64; 2],
}

/// Ideal qubit source.
///
/// `qubit` holds the physical states `|0>_A`, `|1>_A` in channel modes.
/// It is `None` for an abstract qubit register that never reaches the
/// receiver's measured space by itself (the blinded receiver): an eavesdropper
/// acts on the register directly and an untouched channel delivers nothing
/// Bob can register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AliceSourceModel {
    pub qubit: Option<[PhotonicState; 2]>,
    pub states: Vec<LogicalState>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bb84_states() -> Vec<LogicalState> {
    let r = FRAC_1_SQRT_2;
    vec![
        LogicalState { label: "0".into(), basis: Basis::Computational, bit: 0, alpha: [c(1.0, 0.0), c(0.0, 0.0)] },
        LogicalState { label: "1".into(), basis: Basis::Computational, bit: 1, alpha: [c(0.0, 0.0), c(1.0, 0.0)] },
        LogicalState { label: "+".into(), basis: Basis::Hadamard, bit: 0, alpha: [c(r, 0.0), c(r, 0.0)] },
        LogicalState { label: "-".into(), basis: Basis::Hadamard, bit: 1, alpha: [c(r, 0.0), c(-r, 0.0)] },
    ]
}

fn hadamard_circular_states() -> Vec<LogicalState> {
    let r = FRAC_1_SQRT_2;
    vec![
        LogicalState { label: "+".into(), basis: Basis::Hadamard, bit: 0, alpha: [c(r, 0.0), c(r, 0.0)] },
        LogicalState { label: "-".into(), basis: Basis::Hadamard, bit: 1, alpha: [c(r, 0.0), c(-r, 0.0)] },
        LogicalState { label: "+i".into(), basis: Basis::Circular, bit: 0, alpha: [c(r, 0.0), c(0.0, r)] },
        LogicalState { label: "-i".into(), basis: Basis::Circular, bit: 1, alpha: [c(r, 0.0), c(0.0, -r)] },
    ]
}

impl AliceSourceModel {
    /// BB84 over the given physical qubit basis.
    pub fn bb84(qubit: [PhotonicState; 2]) -> Self {
        AliceSourceModel { qubit: Some(qubit), states: bb84_states() }
    }

    /// BB84 over an abstract qubit register.
    pub fn bb84_abstract() -> Self {
        AliceSourceModel { qubit: None, states: bb84_states() }
    }

    /// Time-bin qubit `|0> = t'_0`, `|1> = t'_1`.
    pub fn time_bin_bb84() -> Self {
        Self::bb84([
            PhotonicState::single(ModeLabel::chan(0)),
            PhotonicState::single(ModeLabel::chan(1)),
        ])
    }

    /// Polarization qubit `|0> = H`, `|1> = V`.
    pub fn polarization_bb84() -> Self {
        Self::bb84([
            PhotonicState::single(ModeLabel::pol_h(0)),
            PhotonicState::single(ModeLabel::pol_v(0)),
        ])
    }

    pub fn state(&self, label: &str) -> Result<&LogicalState> {
        self.states
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::MalformedParams(format!("Alice has no state '{label}'")))
    }

    /// Physical state of a logical state, if the qubit is embedded.
    pub fn physical(&self, state: &LogicalState) -> Option<PhotonicState> {
        self.qubit.as_ref().map(|[q0, q1]| {
            q0.scaled(state.alpha[0]).add_scaled(q1, state.alpha[1])
        })
    }

    /// Checks qubit orthonormality and orthonormality within each basis.
    pub fn validate(&self) -> Result<()> {
        if let Some([q0, q1]) = &self.qubit {
            let ok = (q0.norm() - 1.0).abs() < COMPARE
                && (q1.norm() - 1.0).abs() < COMPARE
                && q0.inner(q1).norm() < COMPARE;
            if !ok {
                return Err(Error::MalformedParams("Alice's qubit basis is not orthonormal".into()));
            }
        }
        for a in &self.states {
            if a.bit > 1 {
                return Err(Error::MalformedParams(format!("state '{}' has bit {}", a.label, a.bit)));
            }
            for b in &self.states {
                if a.basis != b.basis {
                    continue;
                }
                let g: C64 = a.alpha.iter().zip(&b.alpha).map(|(x, y)| x.conj() * y).sum();
                let target = if a.label == b.label { 1.0 } else { 0.0 };
                if (g - target).norm() > COMPARE {
                    return Err(Error::MalformedParams(format!(
                        "states '{}' and '{}' are not orthonormal",
                        a.label, b.label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bases(&self) -> Vec<Basis> {
        let mut b: Vec<Basis> = self.states.iter().map(|s| s.basis).collect();
        b.sort();
        b.dedup();
        b
    }
}

/// The ideal source paired with each built-in receiver.
pub fn ideal_alice(kind: ReceiverKind) -> AliceSourceModel {
    match kind {
        ReceiverKind::Interferometric6Mode
        | ReceiverKind::Interferometric4Mode
        | ReceiverKind::InterferometricDefended10Mode => AliceSourceModel::time_bin_bb84(),
        ReceiverKind::Interferometric2Mode => AliceSourceModel {
            qubit: Some([
                PhotonicState::single(ModeLabel::chan(0)),
                PhotonicState::single(ModeLabel::chan(1)),
            ]),
            states: hadamard_circular_states(),
        },
        ReceiverKind::PolarizationThreshold | ReceiverKind::IdealBb84 | ReceiverKind::Custom => {
            AliceSourceModel::polarization_bb84()
        }
        ReceiverKind::BlindedBright => AliceSourceModel::bb84_abstract(),
    }
}
