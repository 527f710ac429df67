use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::state::{FockBasisState, PhotonicState};
use crate::error::{Error, Result};
use crate::tolerance::COMPARE;
use crate::C64;

/// Dense matrix between two ordered Fock bases. Rows index the output
/// basis, columns the input basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    input_basis: Vec<FockBasisState>,
    output_basis: Vec<FockBasisState>,
    matrix: Vec<Vec<C64>>,
    input_index: BTreeMap<FockBasisState, usize>,
    output_index: BTreeMap<FockBasisState, usize>,
}

impl LinearMap {
    pub fn new(
        input_basis: Vec<FockBasisState>,
        output_basis: Vec<FockBasisState>,
        matrix: Vec<Vec<C64>>,
    ) -> Result<Self> {
        if matrix.len() != output_basis.len()
            || matrix.iter().any(|row| row.len() != input_basis.len())
        {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be {}x{}",
                output_basis.len(),
                input_basis.len()
            )));
        }
        let input_index: BTreeMap<_, _> = input_basis
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, b)| (b, i))
            .collect();
        let output_index: BTreeMap<_, _> = output_basis
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, b)| (b, i))
            .collect();
        if input_index.len() != input_basis.len() || output_index.len() != output_basis.len() {
            return Err(Error::Registry("duplicate basis state in linear map".into()));
        }
        Ok(LinearMap {
            input_basis,
            output_basis,
            matrix,
            input_index,
            output_index,
        })
    }

    /// Tabulates `action` on every input basis state. The output basis is
    /// the sorted union of the images' supports.
    pub fn from_action<F>(input_basis: Vec<FockBasisState>, action: F) -> Result<Self>
    where
        F: Fn(&PhotonicState) -> Result<PhotonicState>,
    {
        let images: Vec<PhotonicState> = input_basis
            .iter()
            .map(|b| action(&PhotonicState::basis(b.clone())))
            .collect::<Result<_>>()?;
        let outputs: BTreeSet<FockBasisState> = images
            .iter()
            .flat_map(|img| img.terms().map(|(b, _)| b.clone()))
            .collect();
        let output_basis: Vec<FockBasisState> = outputs.into_iter().collect();
        let matrix = output_basis
            .iter()
            .map(|out| images.iter().map(|img| img.amplitude(out)).collect())
            .collect();
        Self::new(input_basis, output_basis, matrix)
    }

    /// Identity on the given basis.
    pub fn identity(basis: Vec<FockBasisState>) -> Result<Self> {
        let n = basis.len();
        let matrix = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
                    .collect()
            })
            .collect();
        Self::new(basis.clone(), basis, matrix)
    }

    pub fn input_basis(&self) -> &[FockBasisState] {
        &self.input_basis
    }

    pub fn output_basis(&self) -> &[FockBasisState] {
        &self.output_basis
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[row][col]
    }

    /// `<out|M|in>` for basis states, zero when either lies outside the map.
    pub fn element(&self, out: &FockBasisState, input: &FockBasisState) -> C64 {
        match (self.output_index.get(out), self.input_index.get(input)) {
            (Some(&r), Some(&c)) => self.matrix[r][c],
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn contains_input(&self, basis: &FockBasisState) -> bool {
        self.input_index.contains_key(basis)
    }

    /// Applies the map; components outside the input basis are a domain error.
    pub fn apply(&self, state: &PhotonicState) -> Result<PhotonicState> {
        let mut out = PhotonicState::zero();
        for (b, a) in state.terms() {
            let col = *self.input_index.get(b).ok_or_else(|| {
                Error::Domain(format!("basis state {b} lies outside the map's input basis"))
            })?;
            for (row, ob) in self.output_basis.iter().enumerate() {
                let m = self.matrix[row][col];
                if m.norm_sqr() > 0.0 {
                    out.add_term(ob.clone(), m * a);
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Applies the adjoint. Components outside the output basis have no
    /// preimage in the input span and are a domain error.
    pub fn apply_adjoint(&self, state: &PhotonicState) -> Result<PhotonicState> {
        let mut out = PhotonicState::zero();
        for (b, a) in state.terms() {
            let row = *self.output_index.get(b).ok_or_else(|| {
                Error::Domain(format!("basis state {b} lies outside the map's output basis"))
            })?;
            for (col, ib) in self.input_basis.iter().enumerate() {
                let m = self.matrix[row][col];
                if m.norm_sqr() > 0.0 {
                    out.add_term(ib.clone(), m.conj() * a);
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Largest deviation of `M^dag M` from the identity.
    pub fn isometry_defect(&self) -> f64 {
        let n = self.input_basis.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let g: C64 = self.matrix.iter().map(|row| row[i].conj() * row[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    pub fn is_isometry(&self) -> bool {
        self.isometry_defect() < COMPARE
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearMapRepr {
    input_basis: Vec<FockBasisState>,
    output_basis: Vec<FockBasisState>,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for LinearMap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LinearMapRepr {
            input_basis: self.input_basis.clone(),
            output_basis: self.output_basis.clone(),
            matrix: self
                .matrix
                .iter()
                .map(|row| row.iter().map(|c| [c.re, c.im]).collect())
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LinearMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = LinearMapRepr::deserialize(deserializer)?;
        let matrix = repr
            .matrix
            .into_iter()
            .map(|row| row.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        LinearMap::new(repr.input_basis, repr.output_basis, matrix).map_err(serde::de::Error::custom)
    }
}
