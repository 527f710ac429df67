//! Attacks written down as explicit coefficient tables: the published
//! interferometric and bright-illumination families, CNOT copying attacks
//! and the identity.

use std::f64::consts::FRAC_1_SQRT_2;

use super::{identity_attack, AttackIsometry};
use crate::error::{Error, Result};
use crate::fockspace::{ModeLabel, PhotonicState};
use crate::linalg::CVec;
use crate::receivers::{AliceSourceModel, Basis, ReceiverModel};
use crate::C64;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 9] = [
    "identity",
    "faked-states",
    "six-mode-mixed",
    "d2-half",
    "bright-illumination",
    "bright-computational",
    "bright-hadamard",
    "cnot",
    "cnot-hadamard",
];

fn unit(dim: usize, slot: usize, amp: f64) -> CVec {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[slot] = C64::new(amp, 0.0);
    v
}

fn zero(dim: usize) -> CVec {
    vec![C64::new(0.0, 0.0); dim]
}

fn time_bins(ts: &[i32]) -> (Vec<PhotonicState>, Vec<String>) {
    (
        ts.iter().map(|t| PhotonicState::single(ModeLabel::chan(*t))).collect(),
        ts.iter().map(|t| format!("|{}>", ModeLabel::chan(*t))).collect(),
    )
}

fn attack(name: &str, receiver: &str, p: (Vec<PhotonicState>, Vec<String>), eve_dim: usize, coefficients: Vec<Vec<CVec>>) -> AttackIsometry {
    AttackIsometry {
        name: name.into(),
        receiver: receiver.into(),
        alice_labels: vec!["0".into(), "1".into()],
        p_basis: p.0,
        p_labels: p.1,
        eve_dim,
        coefficients,
    }
}

/// Faked-states attack on the six-mode interferometer:
/// `|0> -> |E_1>|t'_{-1}>`, `|1> -> |E_2>|t'_2>`.
pub fn faked_states() -> AttackIsometry {
    let d = 2;
    attack(
        "faked-states",
        "interferometric-6mode",
        time_bins(&[-1, 2]),
        d,
        vec![vec![unit(d, 0, 1.0), zero(d)], vec![zero(d), unit(d, 1, 1.0)]],
    )
}

/// Six-mode family member
/// `|0> -> p|phi>|t'_0> + p1|phi_1>|t'_{-1}> + p2|psi_0>|V>`,
/// `|1> -> p|phi>|t'_1> + p3|phi_2>|t'_2> + p4|psi_1>|V>`,
/// with `p2`, `p4` fixed by normalization. Eve basis: `phi, phi_1, phi_2,
/// psi_0, psi_1`.
pub fn six_mode_member(p: f64, p1: f64, p3: f64) -> Result<AttackIsometry> {
    let p2sq = 1.0 - p * p - p1 * p1;
    let p4sq = 1.0 - p * p - p3 * p3;
    if p2sq < -1e-12 || p4sq < -1e-12 {
        return Err(Error::MalformedParams(format!(
            "p^2 + p1^2 and p^2 + p3^2 must not exceed 1 (got p={p}, p1={p1}, p3={p3})"
        )));
    }
    let (p2, p4) = (p2sq.max(0.0).sqrt(), p4sq.max(0.0).sqrt());
    let d = 5;
    let (mut basis, mut labels) = time_bins(&[-1, 0, 1, 2]);
    basis.insert(0, PhotonicState::vacuum());
    labels.insert(0, "|V>".into());
    // columns: V, t-1, t0, t1, t2
    let row0 = vec![unit(d, 3, p2), unit(d, 1, p1), unit(d, 0, p), zero(d), zero(d)];
    let row1 = vec![unit(d, 4, p4), zero(d), zero(d), unit(d, 0, p), unit(d, 2, p3)];
    Ok(attack("six-mode-member", "interferometric-6mode", (basis, labels), d, vec![row0, row1]))
}

/// Attack on the interferometer that opens one detection slot per
/// detector and basis:
/// `|0> -> p1|E1>|t'_{-1}> + p2|E2>|t'_0> + p3|E3>(|t'_1> + |t'_2>)`,
/// `|1> -> p3|E3>(|t'_0> - |t'_{-1}>) + p2|E2>|t'_1> + p4|E4>|t'_2>`.
/// With `e1_is_e4` the vectors `E1` and `E4` coincide.
pub fn four_mode_member(p: [f64; 4], e1_is_e4: bool) -> Result<AttackIsometry> {
    let [p1, p2, p3, p4] = p;
    let n0 = p1 * p1 + p2 * p2 + 2.0 * p3 * p3;
    let n1 = p4 * p4 + p2 * p2 + 2.0 * p3 * p3;
    if (n0 - 1.0).abs() > 1e-9 || (n1 - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedParams(format!(
            "normalization requires p1^2+p2^2+2p3^2 = p4^2+p2^2+2p3^2 = 1 (got {n0}, {n1})"
        )));
    }
    let d = if e1_is_e4 { 3 } else { 4 };
    let e4 = if e1_is_e4 { 0 } else { 3 };
    let row0 = vec![unit(d, 0, p1), unit(d, 1, p2), unit(d, 2, p3), unit(d, 2, p3)];
    let row1 = vec![unit(d, 2, -p3), unit(d, 2, p3), unit(d, 1, p2), unit(d, e4, p4)];
    Ok(attack("four-mode-member", "interferometric-4mode", time_bins(&[-1, 0, 1, 2]), d, vec![row0, row1]))
}

/// Bright-illumination family member over the blinded receiver's
/// reversed space `{|0>, |1>, |+>, |->}^bright`:
/// `|0> -> p|E0>|0> + q|E2>|+> + q|E3>|->`,
/// `|1> -> p|E1>|1> + q|E2>|+> - q|E3>|->`, with `p^2 + 2q^2 = 1`.
pub fn bright_member(receiver: &ReceiverModel, p: f64, q: f64) -> Result<AttackIsometry> {
    if p < 0.0 || q < 0.0 || (p * p + 2.0 * q * q - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedParams(format!("need p, q >= 0 with p^2 + 2q^2 = 1 (got p={p}, q={q})")));
    }
    let hp = receiver.reversed_space()?;
    if hp.len() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "receiver '{}' has a {}-dimensional reversed space, expected the four bright states",
            receiver.name,
            hp.len()
        )));
    }
    let labels = ["0", "1", "+", "-"].iter().map(|s| format!("|{s}>^bright")).collect();
    let d = 4;
    let row0 = vec![unit(d, 0, p), zero(d), unit(d, 2, q), unit(d, 3, q)];
    let row1 = vec![zero(d), unit(d, 1, p), unit(d, 2, q), unit(d, 3, -q)];
    Ok(attack("bright-member", &receiver.name, (hp, labels), d, vec![row0, row1]))
}

/// CNOT copying attack on a single-photon polarization qubit: Eve's
/// register records the bit of the chosen basis.
pub fn cnot(basis: Basis) -> Result<AttackIsometry> {
    let h = PhotonicState::single(ModeLabel::pol_h(0));
    let v = PhotonicState::single(ModeLabel::pol_v(0));
    let labels = vec!["|h:0>".to_string(), "|v:0>".to_string()];
    let d = 2;
    let c = |re: f64| C64::new(re, 0.0);
    let (row0, row1, name) = match basis {
        Basis::Computational => (
            vec![unit(d, 0, 1.0), zero(d)],
            vec![zero(d), unit(d, 1, 1.0)],
            "cnot",
        ),
        Basis::Hadamard => {
            // |0> = (|+> + |->)/sqrt2 -> (E0|+> + E1|->)/sqrt2, and |1> likewise
            // with a relative minus sign, expanded over H and V.
            let half = 0.5;
            (
                vec![vec![c(half), c(half)], vec![c(half), c(-half)]],
                vec![vec![c(half), c(-half)], vec![c(half), c(half)]],
                "cnot-hadamard",
            )
        }
        Basis::Circular => return Err(Error::Unsupported("circular CNOT attack".into())),
    };
    Ok(attack(name, "ideal-bb84", (vec![h, v], labels), d, vec![row0, row1]))
}

/// Resolves a built-in attack by name for the given receiver and source.
pub fn builtin(name: &str, receiver: &ReceiverModel, alice: &AliceSourceModel) -> Result<AttackIsometry> {
    let r = FRAC_1_SQRT_2;
    let mut a = match name {
        "identity" => identity_attack(receiver, alice)?,
        "faked-states" => faked_states(),
        "six-mode-mixed" => six_mode_member(r, r, r)?,
        "d2-half" => four_mode_member([0.5; 4], true)?,
        "bright-illumination" => {
            let t = 1.0 / 3f64.sqrt();
            bright_member(receiver, t, t)?
        }
        "bright-computational" => bright_member(receiver, 1.0, 0.0)?,
        "bright-hadamard" => bright_member(receiver, 0.0, r)?,
        "cnot" => cnot(Basis::Computational)?,
        "cnot-hadamard" => cnot(Basis::Hadamard)?,
        other => {
            return Err(Error::MalformedParams(format!(
                "unknown built-in attack '{other}' (known: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    a.name = name.to_string();
    Ok(a)
}
