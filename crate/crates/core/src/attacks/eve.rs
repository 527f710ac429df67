use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::verify::joint_outcomes;
use super::AttackIsometry;
use crate::error::Result;
use crate::linalg::{self, CVec};
use crate::receivers::{AliceSourceModel, Basis, ReceiverModel};
use crate::C64;

/// Eve's unnormalized state after Alice sent `alice` and Bob, measuring in
/// the matching basis, obtained bit `result`. One vector per Bob outcome in
/// `J_result`; together they form the mixed conditional state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EveConditional {
    pub alice: String,
    pub basis: Basis,
    pub bit: u8,
    pub setting: String,
    pub result: u8,
    pub vectors: Vec<(String, CVec)>,
    /// Probability of this (setting, result) given the Alice state.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EveConditionalStates {
    pub eve_dim: usize,
    pub entries: Vec<EveConditional>,
}

impl EveConditionalStates {
    pub fn find(&self, alice: &str, result: u8) -> impl Iterator<Item = &EveConditional> {
        let alice = alice.to_string();
        self.entries
            .iter()
            .filter(move |e| e.alice == alice && e.result == result)
    }

    /// Unnormalized conditional operators `sigma_b` for a basis, summed
    /// over settings, results and Alice states carrying bit `b`.
    fn sigmas(&self, basis: Basis) -> [Vec<CVec>; 2] {
        let mut s = [linalg::zeros(self.eve_dim), linalg::zeros(self.eve_dim)];
        for e in self.entries.iter().filter(|e| e.basis == basis) {
            for (_, v) in &e.vectors {
                linalg::add_projector(&mut s[e.bit as usize], v, 1.0);
            }
        }
        s
    }

    pub fn bases(&self) -> Vec<Basis> {
        let mut b: Vec<Basis> = self.entries.iter().map(|e| e.basis).collect();
        b.sort();
        b.dedup();
        b
    }
}

/// Conditional Eve states for every Alice state, matched-basis setting and
/// valid Bob result.
pub fn eve_conditional_states(
    attack: &AttackIsometry,
    receiver: &ReceiverModel,
    alice: &AliceSourceModel,
) -> Result<EveConditionalStates> {
    attack.check_shape()?;
    let mut entries = Vec::new();
    for a in &alice.states {
        for s in receiver.settings.iter().filter(|s| s.basis == a.basis) {
            let joint = joint_outcomes(attack, s, &a.alpha)?;
            for result in 0..2u8 {
                let vectors: Vec<(String, CVec)> = joint
                    .iter()
                    .filter(|jo| jo.interpretation.bit() == Some(result))
                    .map(|jo| (jo.outcome.clone(), jo.eve.clone()))
                    .collect();
                let weight = vectors.iter().map(|(_, v)| linalg::norm(v).powi(2)).sum();
                entries.push(EveConditional {
                    alice: a.label.clone(),
                    basis: a.basis,
                    bit: a.bit,
                    setting: s.id.clone(),
                    result,
                    vectors,
                    weight,
                });
            }
        }
    }
    Ok(EveConditionalStates { eve_dim: attack.eve_dim, entries })
}

fn trace(m: &[CVec]) -> f64 {
    m.iter().enumerate().map(|(i, r)| r[i].re).sum()
}

fn difference(a: &[CVec], b: &[CVec]) -> Vec<CVec> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

/// Optimal probability of guessing Alice's bit on sifted rounds, per
/// basis: `(T + ||sigma_0 - sigma_1||_1) / 2T` with `T = tr(sigma_0 + sigma_1)`.
/// A basis with no valid detections gives 0.5.
pub fn eve_guess_probability(states: &EveConditionalStates) -> BTreeMap<Basis, f64> {
    states
        .bases()
        .into_iter()
        .map(|basis| {
            let [s0, s1] = states.sigmas(basis);
            let t = trace(&s0) + trace(&s1);
            if t < 1e-15 {
                return (basis, 0.5);
            }
            let (vals, _) = linalg::hermitian_eigen(&difference(&s0, &s1));
            let tn: f64 = vals.iter().map(|v| v.abs()).sum();
            (basis, ((t + tn) / (2.0 * t)).min(1.0))
        })
        .collect()
}

/// Helstrom success probability for two equiprobable normalized pure
/// states with the given overlap magnitude.
pub fn helstrom_pure(overlap: f64) -> f64 {
    (1.0 + (1.0 - overlap * overlap).max(0.0).sqrt()) / 2.0
}

/// Eve's optimal measurement per basis: the projector onto the positive
/// eigenspace of `sigma_0 - sigma_1` announces bit 0, the negative one
/// bit 1, and the kernel is split evenly.
#[derive(Clone, Debug, PartialEq)]
pub struct EvePovm {
    guess0: BTreeMap<Basis, Vec<CVec>>,
}

impl EvePovm {
    pub fn from_states(states: &EveConditionalStates) -> Self {
        let scale = states
            .entries
            .iter()
            .map(|e| e.weight)
            .fold(0.0, f64::max)
            .max(1e-300);
        let guess0 = states
            .bases()
            .into_iter()
            .map(|basis| {
                let [s0, s1] = states.sigmas(basis);
                let (vals, vecs) = linalg::hermitian_eigen(&difference(&s0, &s1));
                let mut pi = linalg::zeros(states.eve_dim);
                for (v, u) in vals.iter().zip(&vecs) {
                    let w = if *v > 1e-9 * scale {
                        1.0
                    } else if *v < -1e-9 * scale {
                        0.0
                    } else {
                        0.5
                    };
                    if w > 0.0 {
                        linalg::add_projector(&mut pi, u, w);
                    }
                }
                (basis, pi)
            })
            .collect();
        EvePovm { guess0 }
    }

    /// Probability that Eve announces bit 0 for her unnormalized state `e`
    /// once `basis` is revealed.
    pub fn prob_guess0(&self, basis: Basis, e: &[C64]) -> f64 {
        let n = linalg::norm(e).powi(2);
        match self.guess0.get(&basis) {
            Some(pi) if n > 0.0 => {
                let pe: CVec = pi.iter().map(|row| row.iter().zip(e).map(|(a, b)| a * b).sum()).collect();
                (linalg::dot(e, &pe).re / n).clamp(0.0, 1.0)
            }
            _ => 0.5,
        }
    }
}
