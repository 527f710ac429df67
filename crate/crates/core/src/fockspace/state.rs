use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::mode::ModeLabel;
use crate::tolerance::{COMPARE, GS_DROP, PRUNE};
use crate::C64;

/// Occupation-number basis state. Modes that are absent hold zero photons,
/// so the empty map is the vacuum `|V>`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockBasisState(BTreeMap<ModeLabel, u32>);

impl FockBasisState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    /// One photon in `mode`.
    pub fn single(mode: ModeLabel) -> Self {
        Self::from_counts([(mode, 1)])
    }

    pub fn from_counts<I: IntoIterator<Item = (ModeLabel, u32)>>(counts: I) -> Self {
        let mut map = BTreeMap::new();
        for (mode, n) in counts {
            if n > 0 {
                *map.entry(mode).or_insert(0) += n;
            }
        }
        FockBasisState(map)
    }

    pub fn count(&self, mode: &ModeLabel) -> u32 {
        self.0.get(mode).copied().unwrap_or(0)
    }

    pub fn total_photons(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_empty()
    }

    /// Occupied modes with their photon counts, in canonical order.
    pub fn occupied(&self) -> impl Iterator<Item = (&ModeLabel, u32)> {
        self.0.iter().map(|(m, n)| (m, *n))
    }

    pub fn modes(&self) -> impl Iterator<Item = &ModeLabel> {
        self.0.keys()
    }

    /// Adds one photon to `mode`.
    pub fn with_added(&self, mode: &ModeLabel) -> Self {
        let mut map = self.0.clone();
        *map.entry(mode.clone()).or_insert(0) += 1;
        FockBasisState(map)
    }

    /// Restriction to the modes for which `keep` returns true.
    pub fn restrict<F: Fn(&ModeLabel) -> bool>(&self, keep: F) -> Self {
        FockBasisState(
            self.0
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, n)| (m.clone(), *n))
                .collect(),
        )
    }
}

impl fmt::Display for FockBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "|V>");
        }
        write!(f, "|")?;
        for (pos, (mode, n)) in self.0.iter().enumerate() {
            if pos > 0 {
                write!(f, " ")?;
            }
            if *n == 1 {
                write!(f, "{mode}")?;
            } else {
                write!(f, "{mode}^{n}")?;
            }
        }
        write!(f, ">")
    }
}

/// Sparse superposition of Fock basis states.
///
/// Amplitudes below the prune threshold are never stored, so two states
/// built along different routes compare equal entry by entry once pruned.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhotonicState {
    amplitudes: BTreeMap<FockBasisState, C64>,
}

impl PhotonicState {
    /// The zero vector.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn vacuum() -> Self {
        Self::basis(FockBasisState::vacuum())
    }

    pub fn basis(state: FockBasisState) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(state, C64::new(1.0, 0.0));
        PhotonicState { amplitudes }
    }

    /// One photon in `mode`.
    pub fn single(mode: ModeLabel) -> Self {
        Self::basis(FockBasisState::single(mode))
    }

    pub fn from_terms<I: IntoIterator<Item = (FockBasisState, C64)>>(terms: I) -> Self {
        let mut state = PhotonicState::zero();
        for (basis, amp) in terms {
            state.add_term(basis, amp);
        }
        state.prune();
        state
    }

    /// Linear combination of single-photon states.
    pub fn from_single_photons<I: IntoIterator<Item = (ModeLabel, C64)>>(terms: I) -> Self {
        Self::from_terms(terms.into_iter().map(|(m, a)| (FockBasisState::single(m), a)))
    }

    pub fn add_term(&mut self, basis: FockBasisState, amp: C64) {
        *self.amplitudes.entry(basis).or_insert(C64::new(0.0, 0.0)) += amp;
    }

    /// Drops every amplitude whose magnitude is below the prune threshold.
    pub fn prune(&mut self) {
        self.amplitudes.retain(|_, a| a.norm() >= PRUNE);
    }

    pub fn amplitude(&self, basis: &FockBasisState) -> C64 {
        self.amplitudes
            .get(basis)
            .copied()
            .unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockBasisState, &C64)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < COMPARE
    }

    /// Returns the state scaled to unit norm, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n < PRUNE {
            None
        } else {
            Some(self.scaled(C64::new(1.0 / n, 0.0)))
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::from_terms(self.amplitudes.iter().map(|(b, a)| (b.clone(), a * c)))
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &Self, c: C64) -> Self {
        let mut out = self.clone();
        for (b, a) in &other.amplitudes {
            out.add_term(b.clone(), a * c);
        }
        out.prune();
        out
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = C64::new(0.0, 0.0);
        for (b, a) in &small.amplitudes {
            if let Some(c) = large.amplitudes.get(b) {
                acc += if conj_small { a.conj() * c } else { c.conj() * a };
            }
        }
        acc
    }

    /// All modes with nonzero occupation in some component.
    pub fn modes(&self) -> BTreeSet<ModeLabel> {
        self.amplitudes
            .keys()
            .flat_map(|b| b.modes().cloned())
            .collect()
    }

    /// Largest entrywise difference, for tolerance comparisons.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: BTreeSet<&FockBasisState> =
            self.amplitudes.keys().chain(other.amplitudes.keys()).collect();
        keys.into_iter()
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) < tol
    }

    /// True when every component has exactly `n` photons in total.
    pub fn has_photon_number(&self, n: u32) -> bool {
        self.amplitudes.keys().all(|b| b.total_photons() == n)
    }
}

impl fmt::Display for PhotonicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amplitudes.is_empty() {
            return write!(f, "0");
        }
        for (pos, (b, a)) in self.amplitudes.iter().enumerate() {
            if pos > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i){}", a.re, a.im, b)?;
        }
        Ok(())
    }
}

/// `<a|b>` over the union of occupied basis states.
pub fn inner_product(a: &PhotonicState, b: &PhotonicState) -> C64 {
    a.inner(b)
}

/// Modified Gram-Schmidt over states, dropping vectors whose residual norm
/// falls below the drop threshold. Input order decides the output basis.
pub fn orthonormalize(states: &[PhotonicState]) -> Vec<PhotonicState> {
    let mut basis: Vec<PhotonicState> = Vec::new();
    for s in states {
        let mut v = s.clone();
        for q in &basis {
            let c = q.inner(&v);
            v = v.add_scaled(q, -c);
        }
        // Second pass keeps orthogonality at machine precision.
        for q in &basis {
            let c = q.inner(&v);
            v = v.add_scaled(q, -c);
        }
        if v.norm() > GS_DROP {
            basis.push(v.normalized().expect("norm above drop threshold"));
        }
    }
    basis
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    occupation: FockBasisState,
    amplitude: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRepr {
    terms: Vec<TermRepr>,
}

impl Serialize for PhotonicState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateRepr {
            terms: self
                .amplitudes
                .iter()
                .map(|(b, a)| TermRepr {
                    occupation: b.clone(),
                    amplitude: [a.re, a.im],
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PhotonicState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = StateRepr::deserialize(deserializer)?;
        Ok(PhotonicState::from_terms(
            repr.terms
                .into_iter()
                .map(|t| (t.occupation, C64::new(t.amplitude[0], t.amplitude[1]))),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_and_orthogonal_outputs() {
        let v = PhotonicState::vacuum();
        assert!((inner_product(&v, &v) - c(1.0, 0.0)).norm() < 1e-15);
        let s0 = PhotonicState::single(ModeLabel::straight(0));
        let d0 = PhotonicState::single(ModeLabel::down(0));
        assert_eq!(inner_product(&s0, &d0), c(0.0, 0.0));
    }

    #[test]
    fn plus_overlaps_zero_by_inverse_root_two() {
        let h = ModeLabel::pol_h(0);
        let v = ModeLabel::pol_v(0);
        let plus = PhotonicState::from_single_photons([(h.clone(), c(FRAC_1_SQRT_2, 0.0)), (v, c(FRAC_1_SQRT_2, 0.0))]);
        let zero = PhotonicState::single(h);
        assert!((inner_product(&plus, &zero) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric() {
        let a = PhotonicState::from_single_photons([
            (ModeLabel::chan(0), c(0.3, 0.4)),
            (ModeLabel::chan(1), c(-0.1, 0.2)),
        ]);
        let b = PhotonicState::from_single_photons([
            (ModeLabel::chan(1), c(0.5, -0.7)),
            (ModeLabel::chan(2), c(0.1, 0.1)),
        ]);
        assert!((a.inner(&b) - b.inner(&a).conj()).norm() < 1e-15);
    }

    #[test]
    fn pruning_drops_tiny_amplitudes() {
        let s = PhotonicState::from_terms([
            (FockBasisState::vacuum(), c(1.0, 0.0)),
            (FockBasisState::single(ModeLabel::chan(0)), c(1e-13, 0.0)),
        ]);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let a = PhotonicState::single(ModeLabel::chan(0));
        let b = PhotonicState::single(ModeLabel::chan(1));
        let ab = a.add_scaled(&b, c(2.0, 0.0));
        let basis = orthonormalize(&[a.clone(), ab, b.clone(), a]);
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn json_round_trip() {
        let s = PhotonicState::from_terms([
            (FockBasisState::vacuum(), c(0.6, 0.0)),
            (
                FockBasisState::from_counts([(ModeLabel::pol_h(0), 2), (ModeLabel::pol_v(0), 1)]),
                c(0.0, 0.8),
            ),
        ]);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"h:0\":2"));
        let back: PhotonicState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
