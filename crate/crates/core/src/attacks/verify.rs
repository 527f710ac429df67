use serde::{Deserialize, Serialize};

use super::{beta, AttackIsometry};
use crate::error::{Error, Result};
use crate::linalg::{self, CVec};
use crate::receivers::{coordinates, AliceSourceModel, Interpretation, ReceiverModel, Setting};
use crate::tolerance::COMPARE;
use crate::C64;

/// Eve's (unnormalized) vector paired with one Bob outcome in
/// `|Psi_EB> = sum_j |e_j>_E |j>_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointOutcome {
    pub outcome: String,
    pub interpretation: Interpretation,
    pub eve: CVec,
}

impl JointOutcome {
    pub fn probability(&self) -> f64 {
        linalg::norm(&self.eve).powi(2)
    }
}

/// `e_j = sum_{i,k} alpha_i beta^s_{k,j} v_{i,k}` for every outcome of the
/// setting.
pub fn joint_outcomes(attack: &AttackIsometry, setting: &Setting, alpha: &[C64]) -> Result<Vec<JointOutcome>> {
    let b = beta(setting, &attack.p_basis)?;
    let per_k: Vec<CVec> = (0..attack.p_basis.len()).map(|k| attack.eve_vector(alpha, k)).collect();
    setting
        .outcomes
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let mut eve = vec![C64::new(0.0, 0.0); attack.eve_dim];
            for (k, v) in per_k.iter().enumerate() {
                let c = b[k][j];
                if c.norm() > 0.0 {
                    linalg::axpy(&mut eve, c, v);
                }
            }
            Ok(JointOutcome {
                outcome: o.id.clone(),
                interpretation: setting.interpret(&o.id)?,
                eve,
            })
        })
        .collect()
}

/// Eve-vector norm on one forbidden outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowResidual {
    pub alice: String,
    pub setting: String,
    pub outcome: String,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub attack: String,
    pub receiver: String,
    pub oblivious: bool,
    pub max_error_amplitude: f64,
    pub isometry_residual: f64,
    pub is_isometry: bool,
    /// Every (Alice state, setting, forbidden outcome), in receiver order.
    pub per_row_residuals: Vec<RowResidual>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.oblivious && self.is_isometry
    }
}

/// Checks that every channel state of the attack lies in the receiver's
/// reversed space.
pub fn check_support(attack: &AttackIsometry, receiver: &ReceiverModel) -> Result<()> {
    let hp = receiver.reversed_space()?;
    for (k, p) in attack.p_basis.iter().enumerate() {
        let (_, lost) = coordinates(p, &hp);
        if lost > COMPARE {
            return Err(Error::DimensionMismatch(format!(
                "channel state {} of attack '{}' is not in the reversed space of '{}' (lost norm {lost:.3e})",
                attack.p_labels[k], attack.name, receiver.name
            )));
        }
    }
    Ok(())
}

/// Evaluates the final Eve-Bob state for every Alice state and setting and
/// reports the Eve-vector norm on each error or invalid outcome.
pub fn verify_oblivious(
    attack: &AttackIsometry,
    receiver: &ReceiverModel,
    alice: &AliceSourceModel,
) -> Result<VerificationReport> {
    attack.check_shape()?;
    if attack.alice_labels.len() != 2 {
        return Err(Error::DimensionMismatch("attacks act on a qubit (two Alice basis states)".into()));
    }
    check_support(attack, receiver)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for s in &receiver.settings {
        for a in &alice.states {
            let errors = receiver.error_outcomes(&s.id, a)?;
            for jo in joint_outcomes(attack, s, &a.alpha)? {
                if errors.contains(&jo.outcome) {
                    let residual = linalg::norm(&jo.eve);
                    worst = worst.max(residual);
                    rows.push(RowResidual {
                        alice: a.label.clone(),
                        setting: s.id.clone(),
                        outcome: jo.outcome,
                        residual,
                    });
                }
            }
        }
    }
    let iso = attack.isometry_residual();
    Ok(VerificationReport {
        attack: attack.name.clone(),
        receiver: receiver.name.clone(),
        oblivious: worst < COMPARE,
        max_error_amplitude: worst,
        isometry_residual: iso,
        is_isometry: iso < COMPARE,
        per_row_residuals: rows,
    })
}
