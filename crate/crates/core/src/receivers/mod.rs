//! Receiver models: setting unitaries, measured outcome states, the
//! interpretation of outcomes as bits, losses or invalid events, and the
//! reversed space of channel states that can reach a measured outcome.

mod alice;
mod builders;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use alice::{ideal_alice, AliceSourceModel, LogicalState};
pub use builders::{
    make_receiver, BrightDetection, Polarization, ReceiverKind, ReceiverParams, ReceiverSpec,
};

use crate::error::{Error, Result};
use crate::fockspace::{
    orthonormalize, support_after_trace, FockBasisState, LinearMap, ModeLabel, PhotonicState,
};
use crate::tolerance::COMPARE;
use crate::C64;

/// Measurement basis of a protocol state or a receiver setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Computational,
    Hadamard,
    Circular,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::Computational => "computational",
            Basis::Hadamard => "hadamard",
            Basis::Circular => "circular",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classical meaning Bob assigns to an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpretation {
    Bit0,
    Bit1,
    Loss,
    Invalid,
}

impl Interpretation {
    pub fn bit(self) -> Option<u8> {
        match self {
            Interpretation::Bit0 => Some(0),
            Interpretation::Bit1 => Some(1),
            _ => None,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Interpretation::Bit0
        } else {
            Interpretation::Bit1
        }
    }
}

/// Partition of one setting's outcome ids into `J_0`, `J_1`, `J_loss` and
/// `J_invalid`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpretationSets {
    pub j0: BTreeSet<String>,
    pub j1: BTreeSet<String>,
    pub j_loss: BTreeSet<String>,
    pub j_invalid: BTreeSet<String>,
}

impl InterpretationSets {
    pub fn from_assignments<'a, I>(items: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, Interpretation)>,
    {
        let mut sets = InterpretationSets::default();
        for (id, interp) in items {
            sets.set_mut(interp).insert(id.to_string());
        }
        sets
    }

    fn set_mut(&mut self, interp: Interpretation) -> &mut BTreeSet<String> {
        match interp {
            Interpretation::Bit0 => &mut self.j0,
            Interpretation::Bit1 => &mut self.j1,
            Interpretation::Loss => &mut self.j_loss,
            Interpretation::Invalid => &mut self.j_invalid,
        }
    }

    pub fn get(&self, id: &str) -> Option<Interpretation> {
        if self.j0.contains(id) {
            Some(Interpretation::Bit0)
        } else if self.j1.contains(id) {
            Some(Interpretation::Bit1)
        } else if self.j_loss.contains(id) {
            Some(Interpretation::Loss)
        } else if self.j_invalid.contains(id) {
            Some(Interpretation::Invalid)
        } else {
            None
        }
    }

    /// `J_b` for a bit value.
    pub fn for_bit(&self, bit: u8) -> &BTreeSet<String> {
        if bit == 0 {
            &self.j0
        } else {
            &self.j1
        }
    }

    /// Checks that the sets are pairwise disjoint and cover exactly `ids`.
    pub fn check_partition(&self, ids: &BTreeSet<String>) -> Result<()> {
        let all = [&self.j0, &self.j1, &self.j_loss, &self.j_invalid];
        let total: usize = all.iter().map(|s| s.len()).sum();
        let union: BTreeSet<&String> = all.iter().flat_map(|s| s.iter()).collect();
        if union.len() != total {
            return Err(Error::MalformedParams("interpretation sets overlap".into()));
        }
        let union: BTreeSet<String> = union.into_iter().cloned().collect();
        if &union != ids {
            return Err(Error::MalformedParams(format!(
                "interpretation sets {:?} do not match outcome ids {:?}",
                union, ids
            )));
        }
        Ok(())
    }

    /// Moves every invalid outcome into the loss set.
    pub fn invalid_as_loss(mut self) -> Self {
        let invalid = std::mem::take(&mut self.j_invalid);
        self.j_loss.extend(invalid);
        self
    }
}

/// A measured outcome state `|j>_B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub id: String,
    pub state: PhotonicState,
}

/// One receiver setting `s`: the unitary `U_{B_s}` tabulated on the
/// channel-and-ancilla domain, the outcome states and their interpretation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub id: String,
    pub basis: Basis,
    pub map: LinearMap,
    pub outcomes: Vec<Outcome>,
    pub sets: InterpretationSets,
}

impl Setting {
    pub fn outcome_ids(&self) -> BTreeSet<String> {
        self.outcomes.iter().map(|o| o.id.clone()).collect()
    }

    pub fn outcome_index(&self, id: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o.id == id)
    }

    /// `<j| U_{B_s} |psi>` for every outcome `j`, in outcome order.
    pub fn outcome_amplitudes(&self, psi: &PhotonicState) -> Result<Vec<C64>> {
        let evolved = self.map.apply(psi)?;
        Ok(self.outcomes.iter().map(|o| o.state.inner(&evolved)).collect())
    }

    pub fn interpret(&self, outcome: &str) -> Result<Interpretation> {
        self.sets.get(outcome).ok_or_else(|| Error::UnknownOutcome {
            setting: self.id.clone(),
            outcome: outcome.to_string(),
        })
    }
}

/// Bob's receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverModel {
    pub name: String,
    pub settings: Vec<Setting>,
    pub channel_modes: BTreeSet<ModeLabel>,
    pub ancilla_modes: BTreeSet<ModeLabel>,
    /// The receiver has one physical measurement; the basis is registered
    /// from the outcome instead of being chosen beforehand.
    pub passive_choice: bool,
    /// Analyses assume at most one photon per transmission.
    pub single_photon: bool,
}

impl ReceiverModel {
    pub fn setting(&self, id: &str) -> Result<&Setting> {
        self.settings
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::UnknownSetting(id.to_string()))
    }

    pub fn interpret(&self, setting: &str, outcome: &str) -> Result<Interpretation> {
        self.setting(setting)?.interpret(outcome)
    }

    /// Outcomes counted as errors when Alice sends `alice` and Bob uses
    /// `setting`: `J_{1-b} ∪ J_invalid` for matched bases. Errors are not
    /// defined for mismatched bases; only `J_invalid` is returned then.
    pub fn error_outcomes(&self, setting: &str, alice: &LogicalState) -> Result<BTreeSet<String>> {
        let s = self.setting(setting)?;
        let mut out = s.sets.j_invalid.clone();
        if s.basis == alice.basis {
            out.extend(s.sets.for_bit(1 - alice.bit).iter().cloned());
        }
        Ok(out)
    }

    /// Orthonormal basis of the reversed space `H^P`.
    ///
    /// Every outcome state is evolved backwards through its setting, the
    /// ancilla modes are traced out, and the union of supports is
    /// orthonormalized. When the span is spanned by Fock basis states those
    /// are returned in canonical order.
    pub fn reversed_space(&self) -> Result<Vec<PhotonicState>> {
        let mut vectors = Vec::new();
        for s in &self.settings {
            for o in &s.outcomes {
                let pre = s.map.apply_adjoint(&o.state)?;
                if (pre.norm() - 1.0).abs() > COMPARE {
                    return Err(Error::Domain(format!(
                        "outcome '{}' of setting '{}' is not fully reachable from the map's input basis (norm {:.3e})",
                        o.id,
                        s.id,
                        pre.norm()
                    )));
                }
                vectors.extend(support_after_trace(&pre, &self.channel_modes));
            }
        }
        let basis = orthonormalize(&vectors);
        Ok(fock_aligned(&basis).unwrap_or(basis))
    }

    /// Structural checks: partitions, orthonormal outcomes, isometric maps.
    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() {
            return Err(Error::MalformedParams("receiver has no settings".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.settings {
            if !seen.insert(&s.id) {
                return Err(Error::MalformedParams(format!("duplicate setting id '{}'", s.id)));
            }
            if s.outcome_ids().len() != s.outcomes.len() {
                return Err(Error::MalformedParams(format!(
                    "duplicate outcome id in setting '{}'",
                    s.id
                )));
            }
            s.sets.check_partition(&s.outcome_ids())?;
            check_orthonormal(s.outcomes.iter().map(|o| &o.state), &s.id)?;
            if !s.map.is_isometry() {
                return Err(Error::MalformedParams(format!(
                    "map of setting '{}' is not an isometry (defect {:.3e})",
                    s.id,
                    s.map.isometry_defect()
                )));
            }
            for b in s.map.input_basis() {
                if b.modes()
                    .any(|m| !self.channel_modes.contains(m) && !self.ancilla_modes.contains(m))
                {
                    return Err(Error::MalformedParams(format!(
                        "input basis state {b} of setting '{}' uses undeclared modes",
                        s.id
                    )));
                }
            }
        }
        if self.passive_choice {
            let all: Vec<&PhotonicState> = self
                .settings
                .iter()
                .flat_map(|s| s.outcomes.iter().map(|o| &o.state))
                .collect();
            check_orthonormal(all.into_iter(), "passive measurement")?;
            let mut ids = BTreeSet::new();
            for s in &self.settings {
                for o in &s.outcomes {
                    if !ids.insert(&o.id) {
                        return Err(Error::MalformedParams(format!(
                            "passive receivers need globally unique outcome ids ('{}' repeats)",
                            o.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Distinct bases offered by the settings, in canonical order.
    pub fn bases(&self) -> Vec<Basis> {
        let set: BTreeSet<Basis> = self.settings.iter().map(|s| s.basis).collect();
        set.into_iter().collect()
    }

    /// Settings grouped by basis.
    pub fn settings_by_basis(&self) -> BTreeMap<Basis, Vec<&Setting>> {
        let mut map: BTreeMap<Basis, Vec<&Setting>> = BTreeMap::new();
        for s in &self.settings {
            map.entry(s.basis).or_default().push(s);
        }
        map
    }
}

fn check_orthonormal<'a, I: Iterator<Item = &'a PhotonicState>>(states: I, ctx: &str) -> Result<()> {
    let states: Vec<&PhotonicState> = states.collect();
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate().skip(i) {
            let g = a.inner(b);
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).norm() > COMPARE {
                return Err(Error::MalformedParams(format!(
                    "outcome states of '{ctx}' are not orthonormal (entry {i},{j} = {g})"
                )));
            }
        }
    }
    Ok(())
}

/// If the span of `basis` is spanned by Fock basis states, returns them in
/// canonical order.
fn fock_aligned(basis: &[PhotonicState]) -> Option<Vec<PhotonicState>> {
    let support: BTreeSet<FockBasisState> = basis
        .iter()
        .flat_map(|q| q.terms().map(|(b, _)| b.clone()))
        .collect();
    let contained: Vec<PhotonicState> = support
        .into_iter()
        .filter(|e| {
            let weight: f64 = basis.iter().map(|q| q.amplitude(e).norm_sqr()).sum();
            (weight - 1.0).abs() < COMPARE
        })
        .map(PhotonicState::basis)
        .collect();
    (contained.len() == basis.len()).then_some(contained)
}

/// Projection of `state` onto the span of the orthonormal `basis`, as
/// coefficients, together with the norm lost by projecting.
pub fn coordinates(state: &PhotonicState, basis: &[PhotonicState]) -> (Vec<C64>, f64) {
    let coeffs: Vec<C64> = basis.iter().map(|q| q.inner(state)).collect();
    let mut rest = state.clone();
    for (q, c) in basis.iter().zip(&coeffs) {
        rest = rest.add_scaled(q, -c);
    }
    (coeffs, rest.norm_sqr().sqrt())
}

#[cfg(test)]
mod tests;
