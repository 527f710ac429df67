use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AttackIsometry, Column, ConstraintSystem};
use crate::error::{Error, Result};
use crate::fockspace::PhotonicState;
use crate::linalg::{self, CVec};
use crate::tolerance::{COMPARE, FAMILY_RESIDUAL, GRAM_SOLVE};
use crate::C64;

/// `coeff * W[l][m]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramTerm {
    pub l: usize,
    pub m: usize,
    pub coeff: C64,
}

/// One isometry condition `sum_k <v_{i,k}, v_{i2,k}> = delta_{i,i2}`,
/// written in terms of `W = Y Y^dag`, the Gram matrix of the Eve vectors
/// attached to the null-space directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramConstraint {
    pub i: usize,
    pub i2: usize,
    pub terms: Vec<GramTerm>,
    pub rhs: f64,
}

impl GramConstraint {
    pub fn evaluate(&self, w: &[CVec]) -> C64 {
        self.terms.iter().map(|t| t.coeff * w[t.l][t.m]).sum()
    }
}

fn fmt_c(c: C64) -> String {
    let r = |x: f64| {
        let s = format!("{x:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s == "-0" { "0".to_string() } else { s }
    };
    if c.im.abs() < 1e-12 {
        r(c.re)
    } else if c.re.abs() < 1e-12 {
        format!("{}i", r(c.im))
    } else {
        format!("({}{}{}i)", r(c.re), if c.im < 0.0 { "-" } else { "+" }, r(c.im.abs()))
    }
}

impl fmt::Display for GramConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G[{},{}]: ", self.i, self.i2)?;
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}*W[{},{}]", fmt_c(t.coeff), t.l, t.m)?;
        }
        write!(f, " = {}", self.rhs)
    }
}

/// Solution space of the zero-error system together with its isometry
/// conditions and concrete members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackFamily {
    pub receiver: String,
    pub alice_labels: Vec<String>,
    pub p_basis: Vec<PhotonicState>,
    pub p_labels: Vec<String>,
    pub loss_labels: Vec<String>,
    pub columns: Vec<Column>,
    pub column_labels: Vec<String>,
    pub constraint_rows: usize,
    pub rank: usize,
    /// Orthonormal kernel basis over the columns.
    pub null_basis: Vec<CVec>,
    pub gram_constraints: Vec<GramConstraint>,
    /// Only attacks that leave Alice's state untouched survive.
    pub trivial: bool,
    /// Extreme points of the diagonal-`W` solutions: weight per null
    /// direction.
    pub vertices: Vec<Vec<f64>>,
    pub minimal_eve_dim: usize,
    pub eve_dim: usize,
    pub instances: Vec<AttackIsometry>,
    pub note: String,
}

impl AttackFamily {
    pub fn dimension(&self) -> usize {
        self.null_basis.len()
    }

    /// Member attack from Eve vectors `y_l` (rows of `y`) attached to the
    /// null directions: `v_c = sum_l N_l[c] y_l`.
    pub fn member(&self, name: &str, y: &[CVec]) -> AttackIsometry {
        let eve_dim = y.first().map_or(1, |r| r.len());
        let kdim = self.p_basis.len();
        let mut coefficients = vec![vec![vec![C64::new(0.0, 0.0); eve_dim]; kdim]; self.alice_labels.len()];
        for (c, col) in self.columns.iter().enumerate() {
            for (l, n) in self.null_basis.iter().enumerate() {
                if n[c].norm() > 0.0 {
                    linalg::axpy(&mut coefficients[col.i][col.k], n[c], &y[l]);
                }
            }
        }
        AttackIsometry {
            name: name.to_string(),
            receiver: self.receiver.clone(),
            alice_labels: self.alice_labels.clone(),
            p_basis: self.p_basis.clone(),
            p_labels: self.p_labels.clone(),
            eve_dim,
            coefficients,
        }
    }

    /// Member for diagonal weights: each supported direction gets its own
    /// orthogonal Eve basis vector, padded to `eve_dim`.
    pub fn diagonal_member(&self, name: &str, weights: &[f64], eve_dim: usize) -> AttackIsometry {
        let mut y = vec![vec![C64::new(0.0, 0.0); eve_dim]; weights.len()];
        let mut slot = 0;
        for (l, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                y[l][slot] = C64::new(w.sqrt(), 0.0);
                slot += 1;
            }
        }
        self.member(name, &y)
    }

    /// Largest deviation of the Gram conditions for `W`.
    pub fn gram_residual(&self, w: &[CVec]) -> f64 {
        self.gram_constraints
            .iter()
            .map(|g| (g.evaluate(w) - g.rhs).norm())
            .fold(0.0, f64::max)
    }

    /// Random members: convex combinations of the vertices followed by a
    /// random unitary on Eve's register.
    pub fn sample_members(&self, n: usize, seed: u64) -> Vec<AttackIsometry> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dimension();
        if self.vertices.is_empty() {
            return self.instances.iter().take(n).cloned().collect();
        }
        (0..n)
            .map(|m| {
                let t: Vec<f64> = self.vertices.iter().map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = t.iter().sum();
                let mut w = vec![0.0; d];
                for (tv, v) in t.iter().zip(&self.vertices) {
                    for (x, y) in w.iter_mut().zip(v) {
                        *x += tv / total * y;
                    }
                }
                let u = random_unitary(d, &mut rng);
                let y: Vec<CVec> = (0..d)
                    .map(|l| u[l].iter().map(|x| x * w[l].sqrt()).collect())
                    .collect();
                self.member(&format!("sample-{m}"), &y)
            })
            .collect()
    }

    /// Distance of an attack's Eve components from the kernel, after
    /// rewriting it over this family's channel basis. Components on
    /// loss-only directions are ignored.
    pub fn membership_residual(&self, attack: &AttackIsometry) -> Result<f64> {
        let projected = project_to_signal(attack, &self.p_basis);
        let mut labels = self.p_labels.clone();
        labels.truncate(self.p_basis.len());
        let a = projected.in_basis(&self.p_basis, &labels)?;
        let mut worst: f64 = 0.0;
        for e in 0..a.eve_dim {
            let x: CVec = self.columns.iter().map(|c| a.coefficients[c.i][c.k][e]).collect();
            worst = worst.max(linalg::projection_residual(&x, &self.null_basis));
        }
        Ok(worst)
    }
}

/// Drops the components of the attack's channel states orthogonal to
/// `signal`.
fn project_to_signal(attack: &AttackIsometry, signal: &[PhotonicState]) -> AttackIsometry {
    let mut a = attack.clone();
    a.p_basis = attack
        .p_basis
        .iter()
        .map(|p| {
            let mut out = PhotonicState::zero();
            for q in signal {
                out = out.add_scaled(q, q.inner(p));
            }
            out.prune();
            out
        })
        .collect();
    a
}

fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> Vec<CVec> {
    loop {
        let raw: Vec<CVec> = (0..d)
            .map(|_| {
                (0..d)
                    .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect()
            })
            .collect();
        let q = linalg::orthonormalize(&raw);
        if q.len() == d {
            return q;
        }
    }
}

fn gram_constraints(system: &ConstraintSystem, null: &[CVec]) -> Vec<GramConstraint> {
    let n = system.alice_labels.len();
    let kdim = system.p_basis.len();
    let mut out = Vec::new();
    for i in 0..n {
        for i2 in i..n {
            let mut terms = Vec::new();
            for (l, nl) in null.iter().enumerate() {
                for (m, nm) in null.iter().enumerate() {
                    let coeff: C64 = (0..kdim)
                        .map(|k| {
                            nl[system.column_index(i, k)].conj() * nm[system.column_index(i2, k)]
                        })
                        .sum();
                    if coeff.norm() > 1e-12 {
                        terms.push(GramTerm { l, m, coeff });
                    }
                }
            }
            out.push(GramConstraint { i, i2, terms, rhs: if i == i2 { 1.0 } else { 0.0 } });
        }
    }
    out
}

/// Real linear system `A w = b` for diagonal `W = diag(w)`.
fn diagonal_system(constraints: &[GramConstraint], d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for g in constraints {
        let mut re = vec![0.0; d];
        let mut im = vec![0.0; d];
        for t in g.terms.iter().filter(|t| t.l == t.m) {
            re[t.l] += t.coeff.re;
            im[t.l] += t.coeff.im;
        }
        a.push(re);
        b.push(g.rhs);
        if g.i != g.i2 {
            a.push(im);
            b.push(0.0);
        }
    }
    (a, b)
}

fn subsets(d: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, d: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max {
            return;
        }
        for x in start..d {
            cur.push(x);
            rec(x + 1, d, max, cur, out);
            cur.pop();
        }
    }
    rec(0, d, max, &mut cur, &mut out);
    out
}

/// Basic feasible solutions of `A w = b, w >= 0`, each with a strictly
/// positive support on which `A` has full column rank. Sorted by support
/// size, then lexicographically by support.
fn enumerate_vertices(a: &[Vec<f64>], b: &[f64], d: usize) -> Vec<Vec<f64>> {
    let rows = a.len();
    if rows == 0 || d == 0 {
        return Vec::new();
    }
    let full = DMatrix::from_fn(rows, d, |r, c| a[r][c]);
    let rank = full.clone().svd(false, false).singular_values.iter().filter(|s| **s > 1e-9).count();
    let rhs = DVector::from_column_slice(b);
    let mut out = Vec::new();
    for s in subsets(d, rank.max(1)) {
        let sub = DMatrix::from_fn(rows, s.len(), |r, c| a[r][s[c]]);
        let svd = sub.clone().svd(true, true);
        if svd.singular_values.iter().any(|x| *x <= 1e-9) {
            continue;
        }
        let Ok(sol) = svd.solve(&rhs, 1e-12) else { continue };
        if (&sub * &sol - &rhs).norm() > 1e-10 || sol.iter().any(|x| *x <= 1e-12) {
            continue;
        }
        let mut w = vec![0.0; d];
        for (c, x) in s.iter().zip(sol.iter()) {
            w[*c] = *x;
        }
        out.push(w);
    }
    out
}

/// Projected-gradient search for `Y` (rank `r`) with `G(Y Y^dag) = I`.
fn numeric_search(
    system: &ConstraintSystem,
    null: &[CVec],
    r: usize,
    seed: u64,
) -> Option<Vec<CVec>> {
    let d = null.len();
    let n = system.alice_labels.len();
    let kdim = system.p_basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _restart in 0..16 {
        let mut y: Vec<CVec> = (0..d)
            .map(|_| {
                (0..r)
                    .map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * 0.5)
                    .collect()
            })
            .collect();
        for _ in 0..20000 {
            // v_c = sum_l N_l[c] y_l
            let v: Vec<CVec> = (0..n * kdim)
                .map(|c| {
                    let mut x = vec![C64::new(0.0, 0.0); r];
                    for l in 0..d {
                        if null[l][c].norm() > 0.0 {
                            linalg::axpy(&mut x, null[l][c], &y[l]);
                        }
                    }
                    x
                })
                .collect();
            let mut res = vec![vec![C64::new(0.0, 0.0); n]; n];
            let mut worst: f64 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let g: C64 = (0..kdim)
                        .map(|k| linalg::dot(&v[system.column_index(a, k)], &v[system.column_index(b, k)]))
                        .sum();
                    res[a][b] = g - if a == b { 1.0 } else { 0.0 };
                    worst = worst.max(res[a][b].norm());
                }
            }
            if worst < 1e-13 {
                return Some(y);
            }
            if !worst.is_finite() {
                break;
            }
            // d f / d conj(v_{(i,k)}) = 2 sum_b R_{b,i} v_{(b,k)}
            let grad_v: Vec<CVec> = (0..n * kdim)
                .map(|c| {
                    let (i, k) = (c / kdim, c % kdim);
                    let mut g = vec![C64::new(0.0, 0.0); r];
                    for b in 0..n {
                        linalg::axpy(&mut g, res[b][i] * 2.0, &v[system.column_index(b, k)]);
                    }
                    g
                })
                .collect();
            for l in 0..d {
                for c in 0..n * kdim {
                    let coeff = null[l][c].conj();
                    if coeff.norm() > 0.0 {
                        linalg::axpy(&mut y[l], -coeff * 0.1, &grad_v[c]);
                    }
                }
            }
        }
    }
    None
}

fn w_from_y(y: &[CVec]) -> Vec<CVec> {
    y.iter().map(|a| y.iter().map(|b| linalg::dot(b, a)).collect()).collect()
}

/// Computes the oblivious-attack family of a constraint system and
/// instantiates concrete members with `eve_dim` Eve dimensions (default:
/// the number of columns).
///
/// Eve vectors for distinct null directions are first taken orthogonal
/// (diagonal `W`), which turns the Gram conditions into a linear program
/// whose vertices are the canonical instances. A projected-gradient
/// search over general `W` of bounded rank is the fallback.
pub fn synthesize_attacks(system: &ConstraintSystem, eve_dim: Option<usize>) -> Result<AttackFamily> {
    let requested = eve_dim.unwrap_or(system.columns.len()).max(1);
    let null = system.null_space();
    let rank = system.rank();
    let constraints = gram_constraints(system, &null);
    let d = null.len();
    let column_labels = system.columns.iter().map(|c| system.column_label(c)).collect();
    let mut family = AttackFamily {
        receiver: system.receiver.clone(),
        alice_labels: system.alice_labels.clone(),
        p_basis: system.p_basis.clone(),
        p_labels: system.p_labels.clone(),
        loss_labels: system.loss_labels.clone(),
        columns: system.columns.clone(),
        column_labels,
        constraint_rows: system.rows.len(),
        rank,
        null_basis: null.clone(),
        gram_constraints: constraints.clone(),
        trivial: false,
        vertices: Vec::new(),
        minimal_eve_dim: 0,
        eve_dim: requested,
        instances: Vec::new(),
        note: String::new(),
    };
    if d == 0 {
        return Err(Error::Infeasible { requested, minimal: None });
    }
    if let Some(emb) = &system.embedding {
        let n = linalg::norm(emb);
        if d == 1 && n > 0.0 {
            let unit = linalg::scale(emb, C64::new(1.0 / n, 0.0));
            family.trivial = linalg::projection_residual(&unit, &null) < COMPARE;
        }
    }

    let (a, b) = diagonal_system(&constraints, d);
    let vertices = enumerate_vertices(&a, &b, d);
    let support = |w: &Vec<f64>| w.iter().filter(|x| **x > 0.0).count();
    let min_support = vertices.iter().map(support).min();

    let mut instances: Vec<AttackIsometry> = vertices
        .iter()
        .enumerate()
        .filter(|(_, w)| support(w) <= requested)
        .map(|(n, w)| family.diagonal_member(&format!("vertex-{n}"), w, requested))
        .collect();
    let mut minimal = min_support.unwrap_or(usize::MAX);
    if instances.is_empty() {
        let y = numeric_search(system, &null, requested, 0).ok_or(Error::Infeasible {
            requested,
            minimal: min_support,
        })?;
        if family.gram_residual(&w_from_y(&y)) > GRAM_SOLVE {
            return Err(Error::Infeasible { requested, minimal: min_support });
        }
        log::debug!("numeric Gram search succeeded at eve_dim {requested}");
        instances.push(family.member("numeric-0", &y));
        minimal = minimal.min(requested);
    }
    for inst in &instances {
        let mut worst: f64 = 0.0;
        for e in 0..inst.eve_dim {
            let x = system.component(inst, e);
            worst = worst.max(linalg::projection_residual(&x, &null));
        }
        debug_assert!(worst < FAMILY_RESIDUAL, "instance leaves the kernel: {worst}");
    }
    family.vertices = vertices;
    family.minimal_eve_dim = minimal;
    family.instances = instances;
    family.note = if family.trivial {
        "only the trivial attack survives: Eve's register is independent of Alice's state".into()
    } else {
        format!(
            "{d}-dimensional kernel over {} columns; instances are extreme points with orthogonal Eve vectors per kernel direction",
            system.columns.len()
        )
    };
    Ok(family)
}
