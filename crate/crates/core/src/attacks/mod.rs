//! Zero-error ("oblivious") eavesdropping on a receiver's reversed space.
//!
//! Eve's isometry is written through composite vectors
//! `v_{i,k} = eps_{i,k} |E_{i,k}>`: Alice's qubit basis state `i` goes to
//! `sum_k v_{i,k} (x) |k>_P`. Every zero-error condition is one linear
//! functional over the `(i,k)` pairs applied to all Eve components at
//! once, so the oblivious attacks are exactly the coefficient tables whose
//! Eve components all lie in the kernel of the constraint matrix, subject
//! to the isometry (Gram) conditions.

mod eve;
pub mod literal;
mod synth;
mod verify;

use serde::{Deserialize, Serialize};

pub use eve::{
    eve_conditional_states, eve_guess_probability, helstrom_pure, EveConditional, EveConditionalStates,
    EvePovm,
};
pub use synth::{synthesize_attacks, AttackFamily, GramConstraint, GramTerm};
pub use verify::{check_support, joint_outcomes, verify_oblivious, JointOutcome, RowResidual, VerificationReport};

use crate::error::{Error, Result};
use crate::fockspace::PhotonicState;
use crate::linalg::{self, CVec};
use crate::receivers::{coordinates, AliceSourceModel, Interpretation, ReceiverModel, Setting};
use crate::tolerance::COMPARE;
use crate::C64;

/// Eve's per-transmission isometry as a coefficient table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackIsometry {
    pub name: String,
    /// Receiver the attack was built for (informational).
    pub receiver: String,
    /// Labels of Alice's qubit basis states `i`.
    pub alice_labels: Vec<String>,
    /// Channel states `|k>_P` Eve sends.
    pub p_basis: Vec<PhotonicState>,
    pub p_labels: Vec<String>,
    pub eve_dim: usize,
    /// `coefficients[i][k]` is `v_{i,k}`, a vector of length `eve_dim`.
    pub coefficients: Vec<Vec<CVec>>,
}

impl AttackIsometry {
    /// Checks table shapes.
    pub fn check_shape(&self) -> Result<()> {
        let k = self.p_basis.len();
        if self.p_labels.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} channel states",
                self.p_labels.len(),
                k
            )));
        }
        if self.coefficients.len() != self.alice_labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient rows for {} Alice basis states",
                self.coefficients.len(),
                self.alice_labels.len()
            )));
        }
        for (i, row) in self.coefficients.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| v.len() != self.eve_dim) {
                return Err(Error::DimensionMismatch(format!(
                    "Eve vector of length {} in row {i}, expected {}",
                    v.len(),
                    self.eve_dim
                )));
            }
        }
        Ok(())
    }

    /// `G[i][i'] = sum_k <v_{i,k}, v_{i',k}>`.
    pub fn gram(&self) -> Vec<CVec> {
        let n = self.coefficients.len();
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        self.coefficients[a]
                            .iter()
                            .zip(&self.coefficients[b])
                            .map(|(x, y)| linalg::dot(x, y))
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn isometry_residual(&self) -> f64 {
        let g = self.gram();
        let mut worst: f64 = 0.0;
        for (a, row) in g.iter().enumerate() {
            for (b, x) in row.iter().enumerate() {
                let t = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((x - t).norm());
            }
        }
        worst
    }

    /// Eve's vector entangled with channel state `k` when Alice sends
    /// qubit coefficients `alpha`.
    pub fn eve_vector(&self, alpha: &[C64], k: usize) -> CVec {
        let mut out = vec![C64::new(0.0, 0.0); self.eve_dim];
        for (a, row) in alpha.iter().zip(&self.coefficients) {
            linalg::axpy(&mut out, *a, &row[k]);
        }
        out
    }

    /// Rewrites the table over another orthonormal channel basis that spans
    /// at least the attack's channel states.
    pub fn in_basis(&self, basis: &[PhotonicState], labels: &[String]) -> Result<AttackIsometry> {
        let overlaps: Vec<Vec<C64>> = basis
            .iter()
            .map(|q| self.p_basis.iter().map(|p| q.inner(p)).collect())
            .collect();
        for (k, p) in self.p_basis.iter().enumerate() {
            let (_, lost) = coordinates(p, basis);
            if lost > COMPARE {
                return Err(Error::DimensionMismatch(format!(
                    "channel state {} of attack '{}' leaves the target basis (lost norm {lost:.3e})",
                    self.p_labels[k], self.name
                )));
            }
        }
        let coefficients = self
            .coefficients
            .iter()
            .map(|row| {
                overlaps
                    .iter()
                    .map(|ov| {
                        let mut v = vec![C64::new(0.0, 0.0); self.eve_dim];
                        for (c, x) in ov.iter().zip(row) {
                            linalg::axpy(&mut v, *c, x);
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        Ok(AttackIsometry {
            name: self.name.clone(),
            receiver: self.receiver.clone(),
            alice_labels: self.alice_labels.clone(),
            p_basis: basis.to_vec(),
            p_labels: labels.to_vec(),
            eve_dim: self.eve_dim,
            coefficients,
        })
    }
}

/// `(i, k)` index pair of the constraint system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Column {
    pub i: usize,
    pub k: usize,
}

/// One zero-error condition: Alice state, Bob setting, forbidden outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub alice: String,
    pub setting: String,
    pub outcome: String,
    /// `alpha_i * beta^s_{k,j}` per column.
    pub entries: CVec,
}

/// The linear zero-error system over the signal directions of `H^P`.
///
/// Directions of `H^P` that only ever produce loss outcomes (such as the
/// vacuum) are kept apart in `loss_basis`: Eve may always route amplitude
/// there, which adds loss and nothing else, so they are excluded from the
/// columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub receiver: String,
    pub alice_labels: Vec<String>,
    pub p_basis: Vec<PhotonicState>,
    pub p_labels: Vec<String>,
    pub loss_basis: Vec<PhotonicState>,
    pub loss_labels: Vec<String>,
    pub columns: Vec<Column>,
    pub rows: Vec<ConstraintRow>,
    /// `<k|i_A>` per column when Alice's qubit is embedded in channel modes.
    pub embedding: Option<CVec>,
}

impl ConstraintSystem {
    pub fn column_index(&self, i: usize, k: usize) -> usize {
        i * self.p_basis.len() + k
    }

    pub fn column_label(&self, c: &Column) -> String {
        format!("({},{})", self.alice_labels[c.i], self.p_labels[c.k])
    }

    pub fn matrix(&self) -> Vec<CVec> {
        self.rows.iter().map(|r| r.entries.clone()).collect()
    }

    pub fn rank(&self) -> usize {
        linalg::rank(&self.matrix(), self.columns.len())
    }

    /// Orthonormal kernel basis, in canonical echelon form.
    pub fn null_space(&self) -> Vec<CVec> {
        linalg::null_space(&self.matrix(), self.columns.len())
    }

    /// Largest constraint violation `|M x|` over the Eve components of an
    /// attack already expressed over this system's channel basis.
    pub fn max_violation(&self, attack: &AttackIsometry) -> f64 {
        let mut worst: f64 = 0.0;
        for e in 0..attack.eve_dim {
            let x = self.component(attack, e);
            for r in &self.rows {
                let mx: C64 = r.entries.iter().zip(&x).map(|(a, b)| a * b).sum();
                worst = worst.max(mx.norm());
            }
        }
        worst
    }

    /// Eve component `e` of an attack as a vector over the columns.
    pub fn component(&self, attack: &AttackIsometry, e: usize) -> CVec {
        self.columns
            .iter()
            .map(|c| attack.coefficients[c.i][c.k][e])
            .collect()
    }
}

/// Null space of a constraint system.
pub fn null_space(system: &ConstraintSystem) -> Vec<CVec> {
    system.null_space()
}

/// `<j| U_s |p>` for every outcome of the setting, per channel state.
pub(crate) fn beta(setting: &Setting, p_basis: &[PhotonicState]) -> Result<Vec<CVec>> {
    p_basis
        .iter()
        .map(|p| {
            setting.outcome_amplitudes(p).map_err(|e| match e {
                Error::Domain(msg) => Error::DimensionMismatch(format!(
                    "channel state outside setting '{}' input space: {msg}",
                    setting.id
                )),
                other => other,
            })
        })
        .collect()
}

fn combine(basis: &[PhotonicState], coeffs: &[C64]) -> PhotonicState {
    let mut out = PhotonicState::zero();
    for (q, c) in basis.iter().zip(coeffs) {
        if c.norm() > 0.0 {
            out = out.add_scaled(q, *c);
        }
    }
    out.prune();
    out
}

fn label_state(state: &PhotonicState, receiver: &ReceiverModel, fallback: String) -> String {
    if state.len() == 1 {
        let (b, a) = state.terms().next().expect("one term");
        if (a.norm() - 1.0).abs() < COMPARE {
            return b.to_string();
        }
    }
    for s in &receiver.settings {
        for o in &s.outcomes {
            if let Ok(pre) = s.map.apply_adjoint(&o.state) {
                if (state.inner(&pre).norm() - 1.0).abs() < 1e-6 {
                    return format!("pre({})", o.id);
                }
            }
        }
    }
    fallback
}

/// The receiver's reversed space split into signal directions and
/// loss-only directions, with display labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpace {
    pub signal: Vec<PhotonicState>,
    pub signal_labels: Vec<String>,
    pub loss: Vec<PhotonicState>,
    pub loss_labels: Vec<String>,
}

pub fn attack_space(receiver: &ReceiverModel) -> Result<AttackSpace> {
    let hp = receiver.reversed_space()?;
    let n = hp.len();
    let mut rows: Vec<CVec> = Vec::new();
    for s in &receiver.settings {
        let b = beta(s, &hp)?;
        for (j, o) in s.outcomes.iter().enumerate() {
            if s.sets.get(&o.id) != Some(Interpretation::Loss) {
                rows.push((0..n).map(|k| b[k][j]).collect());
            }
        }
    }
    let loss_coords = linalg::null_space(&rows, n);
    let conj: Vec<CVec> = loss_coords
        .iter()
        .map(|v| v.iter().map(|x| x.conj()).collect())
        .collect();
    let signal_coords = linalg::null_space(&conj, n);
    let signal: Vec<PhotonicState> = signal_coords.iter().map(|c| combine(&hp, c)).collect();
    let loss: Vec<PhotonicState> = loss_coords.iter().map(|c| combine(&hp, c)).collect();
    let signal_labels = signal
        .iter()
        .enumerate()
        .map(|(k, q)| label_state(q, receiver, format!("q{k}")))
        .collect();
    let loss_labels = loss
        .iter()
        .enumerate()
        .map(|(k, q)| label_state(q, receiver, format!("l{k}")))
        .collect();
    Ok(AttackSpace { signal, signal_labels, loss, loss_labels })
}

/// Builds the zero-error system: one row per (Alice state, setting,
/// outcome in `J_error ∪ J_invalid`), entries `alpha_i beta^s_{k,j}`.
pub fn build_constraint_system(receiver: &ReceiverModel, alice: &AliceSourceModel) -> Result<ConstraintSystem> {
    alice.validate()?;
    let space = attack_space(receiver)?;
    let kdim = space.signal.len();
    let ndim = 2;
    let alice_labels = vec!["0".to_string(), "1".to_string()];
    let columns: Vec<Column> = (0..ndim)
        .flat_map(|i| (0..kdim).map(move |k| Column { i, k }))
        .collect();

    let embedding = match &alice.qubit {
        None => None,
        Some(qubit) => {
            let mut full = space.signal.clone();
            full.extend(space.loss.iter().cloned());
            let mut emb = Vec::with_capacity(columns.len());
            for (i, q) in qubit.iter().enumerate() {
                let (coords, lost) = coordinates(q, &full);
                if lost > COMPARE {
                    return Err(Error::Embedding { label: alice_labels[i].clone(), lost_norm: lost });
                }
                emb.extend_from_slice(&coords[..kdim]);
            }
            Some(emb)
        }
    };

    let mut rows = Vec::new();
    for s in &receiver.settings {
        let b = beta(s, &space.signal)?;
        for a in &alice.states {
            let errors = receiver.error_outcomes(&s.id, a)?;
            for (j, o) in s.outcomes.iter().enumerate() {
                if !errors.contains(&o.id) {
                    continue;
                }
                let entries = columns.iter().map(|c| a.alpha[c.i] * b[c.k][j]).collect();
                rows.push(ConstraintRow {
                    alice: a.label.clone(),
                    setting: s.id.clone(),
                    outcome: o.id.clone(),
                    entries,
                });
            }
        }
    }
    Ok(ConstraintSystem {
        receiver: receiver.name.clone(),
        alice_labels,
        p_basis: space.signal,
        p_labels: space.signal_labels,
        loss_basis: space.loss,
        loss_labels: space.loss_labels,
        columns,
        rows,
        embedding,
    })
}

/// Identity attack: Alice's state passes untouched, Eve keeps a fixed
/// one-dimensional register.
pub fn identity_attack(receiver: &ReceiverModel, alice: &AliceSourceModel) -> Result<AttackIsometry> {
    let qubit = alice.qubit.as_ref().ok_or_else(|| {
        Error::Unsupported("identity attack needs Alice's qubit embedded in channel modes".into())
    })?;
    let space = attack_space(receiver)?;
    let mut basis = space.signal.clone();
    basis.extend(space.loss.iter().cloned());
    let mut labels = space.signal_labels.clone();
    labels.extend(space.loss_labels.iter().cloned());
    let mut coefficients = Vec::new();
    for (i, q) in qubit.iter().enumerate() {
        let (coords, lost) = coordinates(q, &basis);
        if lost > COMPARE {
            return Err(Error::Embedding { label: i.to_string(), lost_norm: lost });
        }
        coefficients.push(coords.into_iter().map(|c| vec![c]).collect());
    }
    Ok(AttackIsometry {
        name: "identity".into(),
        receiver: receiver.name.clone(),
        alice_labels: vec!["0".into(), "1".into()],
        p_basis: basis,
        p_labels: labels,
        eve_dim: 1,
        coefficients,
    })
}
