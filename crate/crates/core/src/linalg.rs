//! Dense complex linear algebra: kernels, canonical bases, Hermitian spectra.
//!
//! Singular value and eigen decompositions are delegated to `nalgebra`;
//! the canonicalization on top makes kernel bases reproducible and sparse.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::tolerance::{GS_DROP, RANK};
use crate::C64;

pub type CVec = Vec<C64>;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `a += c * b`.
pub fn axpy(a: &mut [C64], c: C64, b: &[C64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += c * y;
    }
}

pub fn scale(a: &[C64], c: C64) -> CVec {
    a.iter().map(|x| x * c).collect()
}

/// Modified Gram-Schmidt with re-orthogonalization; dependent vectors
/// (residual below the drop threshold) are skipped.
pub fn orthonormalize(vectors: &[CVec]) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(&mut w, -c, q);
            }
        }
        let n = norm(&w);
        if n > GS_DROP {
            basis.push(scale(&w, C64::new(1.0 / n, 0.0)));
        }
    }
    basis
}

/// Reduced row echelon form of the rows (partial pivoting), with rows
/// whose pivot would fall below `tol` removed.
pub fn rref(rows: &[CVec], tol: f64) -> Vec<CVec> {
    let mut m: Vec<CVec> = rows.to_vec();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut lead = 0;
    for col in 0..ncols {
        if lead >= m.len() {
            break;
        }
        let (best, best_abs) = (lead..m.len())
            .map(|r| (r, m[r][col].norm()))
            .fold((lead, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs < tol {
            continue;
        }
        m.swap(lead, best);
        let p = m[lead][col];
        let inv = C64::new(1.0, 0.0) / p;
        for x in m[lead].iter_mut() {
            *x *= inv;
        }
        let pivot_row = m[lead].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != lead {
                let f = row[col];
                if f.norm() > 0.0 {
                    axpy(row, -f, &pivot_row);
                }
            }
        }
        lead += 1;
    }
    m.truncate(lead);
    for row in m.iter_mut() {
        for x in row.iter_mut() {
            if x.norm() < 1e-14 {
                *x = zero();
            }
        }
    }
    m
}

fn to_matrix(rows: &[CVec], ncols: usize) -> DMatrix<C64> {
    let nrows = rows.len().max(ncols);
    DMatrix::from_fn(nrows, ncols, |r, c| rows.get(r).map_or(zero(), |row| row[c]))
}

/// Numerical rank at the global rank threshold.
pub fn rank(rows: &[CVec], ncols: usize) -> usize {
    if rows.is_empty() || ncols == 0 {
        return 0;
    }
    let svd = to_matrix(rows, ncols).svd(false, false);
    svd.singular_values.iter().filter(|s| **s > RANK).count()
}

/// Orthonormal basis of `{x : M x = 0}` for `M` given by its rows.
///
/// The kernel is obtained from a full SVD (the matrix is zero-padded to at
/// least square shape). The basis is then brought to reduced echelon form
/// and re-orthonormalized, so it does not depend on the SVD's internal
/// rotation of degenerate singular subspaces.
pub fn null_space(rows: &[CVec], ncols: usize) -> Vec<CVec> {
    if ncols == 0 {
        return Vec::new();
    }
    if rows.iter().all(|r| norm(r) == 0.0) {
        return canonical_basis(&identity_rows(ncols));
    }
    let m = to_matrix(rows, ncols);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut kernel = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= RANK {
            kernel.push((0..ncols).map(|c| v_t[(i, c)].conj()).collect::<CVec>());
        }
    }
    canonical_basis(&kernel)
}

fn identity_rows(n: usize) -> Vec<CVec> {
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| if r == c { C64::new(1.0, 0.0) } else { zero() })
                .collect()
        })
        .collect()
}

/// Echelon-form, orthonormal basis for the span of `vectors`.
pub fn canonical_basis(vectors: &[CVec]) -> Vec<CVec> {
    orthonormalize(&rref(vectors, 1e-8))
}

/// Norm of the component of `x` orthogonal to the span of the orthonormal
/// `basis`.
pub fn projection_residual(x: &[C64], basis: &[CVec]) -> f64 {
    let mut r = x.to_vec();
    for q in basis {
        let c = dot(q, &r);
        axpy(&mut r, -c, q);
    }
    norm(&r)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(mat: &[CVec]) -> (Vec<f64>, Vec<CVec>) {
    let n = mat.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let m = DMatrix::from_fn(n, n, |r, c| (mat[r][c] + mat[c][r].conj()) * 0.5);
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, CVec)> = (0..n)
        .map(|i| {
            (
                eig.eigenvalues[i],
                (0..n).map(|r| eig.eigenvectors[(r, i)]).collect(),
            )
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Outer product `|a><a|` scaled by `w`, accumulated into `acc`.
pub fn add_projector(acc: &mut [CVec], a: &[C64], w: f64) {
    for (r, row) in acc.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x += a[r] * a[c].conj() * w;
        }
    }
}

pub fn zeros(n: usize) -> Vec<CVec> {
    vec![vec![zero(); n]; n]
}
