use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::mode::{ModeKind, ModeLabel};
use super::state::{orthonormalize, FockBasisState, PhotonicState};
use crate::error::{Error, Result};
use crate::tolerance::DEFAULT_PHOTON_CUTOFF;
use crate::C64;

/// Passive linear mode transformation: each listed input creation operator
/// is replaced by a linear combination of output creation operators.
/// Modes that are not listed are left untouched.
pub type ModeMap = BTreeMap<ModeLabel, Vec<(ModeLabel, C64)>>;

/// Mach-Zehnder settings. The phase sits on the long arm; the delay is one
/// time bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerConfig {
    pub phase: f64,
    #[serde(default = "default_delay")]
    pub delay: i32,
    #[serde(default = "default_true")]
    pub blocked_arm_present: bool,
}

fn default_delay() -> i32 {
    1
}

fn default_true() -> bool {
    true
}

impl InterferometerConfig {
    pub fn with_phase(phase: f64) -> Self {
        InterferometerConfig {
            phase: phase.rem_euclid(2.0 * PI),
            delay: 1,
            blocked_arm_present: true,
        }
    }
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self::with_phase(0.0)
    }
}

/// Linear-optics engine with a per-mode photon cutoff.
#[derive(Clone, Copy, Debug)]
pub struct Optics {
    pub cutoff: u32,
}

impl Default for Optics {
    fn default() -> Self {
        Optics {
            cutoff: DEFAULT_PHOTON_CUTOFF,
        }
    }
}

fn beam_splitter_matrix() -> [[C64; 2]; 2] {
    let t = C64::new(FRAC_1_SQRT_2, 0.0);
    let r = C64::new(0.0, FRAC_1_SQRT_2);
    [[t, r], [r, t]]
}

fn adjoint(u: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [
        [u[0][0].conj(), u[1][0].conj()],
        [u[0][1].conj(), u[1][1].conj()],
    ]
}

fn short_arm(t: i32) -> ModeLabel {
    ModeLabel::custom("short", t)
}

fn long_arm(t: i32) -> ModeLabel {
    ModeLabel::custom("long", t)
}

impl Optics {
    pub fn new(cutoff: u32) -> Self {
        Optics { cutoff }
    }

    fn check_cutoff(&self, basis: &FockBasisState) -> Result<()> {
        for (mode, n) in basis.occupied() {
            if n > self.cutoff {
                return Err(Error::PhotonCutoff {
                    mode: mode.to_string(),
                    count: n,
                    cutoff: self.cutoff,
                });
            }
        }
        Ok(())
    }

    /// Applies a passive mode map through the creation-operator expansion
    /// `|n_1 n_2 ...> = prod (a_m^dag)^{n_m} / sqrt(n_m!) |V>`.
    pub fn apply_mode_map(&self, state: &PhotonicState, map: &ModeMap) -> Result<PhotonicState> {
        let mut out = PhotonicState::zero();
        for (basis, amp) in state.terms() {
            self.check_cutoff(basis)?;
            let mut norm = 1.0;
            let mut acc: BTreeMap<FockBasisState, C64> = BTreeMap::new();
            acc.insert(FockBasisState::vacuum(), *amp);
            for (mode, n) in basis.occupied() {
                let identity = [(mode.clone(), C64::new(1.0, 0.0))];
                let images: &[(ModeLabel, C64)] = match map.get(mode) {
                    Some(images) => images,
                    None => &identity,
                };
                for k in 1..=n {
                    norm *= k as f64;
                    let mut next: BTreeMap<FockBasisState, C64> = BTreeMap::new();
                    for (occ, a) in &acc {
                        for (target, u) in images {
                            let m = occ.count(target);
                            let grown = occ.with_added(target);
                            *next.entry(grown).or_insert(C64::new(0.0, 0.0)) +=
                                a * u * ((m + 1) as f64).sqrt();
                        }
                    }
                    acc = next;
                }
            }
            let scale = 1.0 / norm.sqrt();
            for (occ, a) in acc {
                self.check_cutoff(&occ)?;
                out.add_term(occ, a * scale);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Two-mode passive transform: input `j` maps to `sum_r u[r][j] * out_r`.
    pub fn apply_two_mode_unitary(
        &self,
        state: &PhotonicState,
        in_modes: (&ModeLabel, &ModeLabel),
        out_modes: (&ModeLabel, &ModeLabel),
        u: [[C64; 2]; 2],
    ) -> Result<PhotonicState> {
        if in_modes.0 == in_modes.1 || out_modes.0 == out_modes.1 {
            return Err(Error::Registry("two-mode element needs two distinct modes".into()));
        }
        let mut map = ModeMap::new();
        map.insert(
            in_modes.0.clone(),
            vec![(out_modes.0.clone(), u[0][0]), (out_modes.1.clone(), u[1][0])],
        );
        map.insert(
            in_modes.1.clone(),
            vec![(out_modes.0.clone(), u[0][1]), (out_modes.1.clone(), u[1][1])],
        );
        self.apply_mode_map(state, &map)
    }

    /// Symmetric 50:50 beam splitter with phase `i` on reflection:
    /// `a|10> + b|01>` goes to `((a + ib)|10> + (ia + b)|01>)/sqrt(2)`.
    pub fn beam_splitter(
        &self,
        state: &PhotonicState,
        in_modes: (&ModeLabel, &ModeLabel),
        out_modes: (&ModeLabel, &ModeLabel),
    ) -> Result<PhotonicState> {
        self.apply_two_mode_unitary(state, in_modes, out_modes, beam_splitter_matrix())
    }

    /// Inverse of [`Optics::beam_splitter`] with the same mode pairing.
    pub fn beam_splitter_adjoint(
        &self,
        state: &PhotonicState,
        out_modes: (&ModeLabel, &ModeLabel),
        in_modes: (&ModeLabel, &ModeLabel),
    ) -> Result<PhotonicState> {
        self.apply_two_mode_unitary(state, out_modes, in_modes, adjoint(beam_splitter_matrix()))
    }

    /// Multiplies every component by `exp(i n phi)`, `n` the count in `mode`.
    pub fn phase_shift(&self, state: &PhotonicState, mode: &ModeLabel, phi: f64) -> Result<PhotonicState> {
        let mut map = ModeMap::new();
        map.insert(mode.clone(), vec![(mode.clone(), C64::from_polar(1.0, phi))]);
        self.apply_mode_map(state, &map)
    }

    fn relabel(&self, state: &PhotonicState, pairs: Vec<(ModeLabel, ModeLabel)>) -> Result<PhotonicState> {
        let map: ModeMap = pairs
            .into_iter()
            .map(|(from, to)| (from, vec![(to, C64::new(1.0, 0.0))]))
            .collect();
        self.apply_mode_map(state, &map)
    }

    /// Forward evolution through the unbalanced Mach-Zehnder, composed from
    /// its elements: input splitter, phase and delay on the long arm, output
    /// splitter.
    pub fn mz_transform(&self, state: &PhotonicState, cfg: &InterferometerConfig) -> Result<PhotonicState> {
        let mut times = BTreeSet::new();
        for mode in state.modes() {
            match mode.kind {
                ModeKind::ChannelTimeBin => {}
                ModeKind::BlockedTimeBin if cfg.blocked_arm_present => {}
                _ => {
                    return Err(Error::Domain(format!(
                        "mz_transform expects interferometer input modes, found {mode}"
                    )))
                }
            }
            times.insert(mode.index);
        }
        let mut s = state.clone();
        for &t in &times {
            s = self.beam_splitter(
                &s,
                (&ModeLabel::chan(t), &ModeLabel::blocked(t)),
                (&short_arm(t), &long_arm(t)),
            )?;
        }
        for &t in &times {
            s = self.phase_shift(&s, &long_arm(t), cfg.phase)?;
        }
        s = self.relabel(
            &s,
            times
                .iter()
                .map(|&t| (long_arm(t), long_arm(t + cfg.delay)))
                .collect(),
        )?;
        let out_times: BTreeSet<i32> = times
            .iter()
            .flat_map(|&t| [t, t + cfg.delay])
            .collect();
        for &t in &out_times {
            s = self.beam_splitter(
                &s,
                (&short_arm(t), &long_arm(t)),
                (&ModeLabel::straight(t), &ModeLabel::down(t)),
            )?;
        }
        Ok(s)
    }

    /// Backward evolution: the adjoint of [`Optics::mz_transform`].
    pub fn mz_reverse(&self, state: &PhotonicState, cfg: &InterferometerConfig) -> Result<PhotonicState> {
        let mut times = BTreeSet::new();
        for mode in state.modes() {
            match mode.kind {
                ModeKind::OutputStraight | ModeKind::OutputDown => {}
                _ => {
                    return Err(Error::Domain(format!(
                        "mz_reverse expects interferometer output modes, found {mode}"
                    )))
                }
            }
            times.insert(mode.index);
        }
        let mut s = state.clone();
        for &t in &times {
            s = self.beam_splitter_adjoint(
                &s,
                (&ModeLabel::straight(t), &ModeLabel::down(t)),
                (&short_arm(t), &long_arm(t)),
            )?;
        }
        s = self.relabel(
            &s,
            times
                .iter()
                .map(|&t| (long_arm(t), long_arm(t - cfg.delay)))
                .collect(),
        )?;
        let in_times: BTreeSet<i32> = times
            .iter()
            .flat_map(|&t| [t, t - cfg.delay])
            .collect();
        for &t in &in_times {
            s = self.phase_shift(&s, &long_arm(t), -cfg.phase)?;
        }
        for &t in &in_times {
            s = self.beam_splitter_adjoint(
                &s,
                (&short_arm(t), &long_arm(t)),
                (&ModeLabel::chan(t), &ModeLabel::blocked(t)),
            )?;
        }
        if !cfg.blocked_arm_present
            && s.modes().iter().any(|m| m.kind == ModeKind::BlockedTimeBin)
        {
            log::debug!("mz_reverse populated blocked-arm modes of an interferometer without a blocked arm");
        }
        Ok(s)
    }
}

/// Beam splitter at the default photon cutoff.
pub fn apply_beam_splitter(
    state: &PhotonicState,
    in_modes: (&ModeLabel, &ModeLabel),
    out_modes: (&ModeLabel, &ModeLabel),
) -> Result<PhotonicState> {
    Optics::default().beam_splitter(state, in_modes, out_modes)
}

/// Phase shifter at the default photon cutoff.
pub fn apply_phase_shift(state: &PhotonicState, mode: &ModeLabel, phi: f64) -> Result<PhotonicState> {
    Optics::default().phase_shift(state, mode, phi)
}

/// Forward Mach-Zehnder evolution at the default photon cutoff.
pub fn mz_transform(state: &PhotonicState, cfg: &InterferometerConfig) -> Result<PhotonicState> {
    Optics::default().mz_transform(state, cfg)
}

/// Backward Mach-Zehnder evolution at the default photon cutoff.
pub fn mz_reverse(state: &PhotonicState, cfg: &InterferometerConfig) -> Result<PhotonicState> {
    Optics::default().mz_reverse(state, cfg)
}

/// Orthonormal basis of the support of the reduced density operator on
/// `keep`. Components are grouped by their configuration on the traced
/// modes; the conditional kept-mode vectors span the support.
pub fn support_after_trace(state: &PhotonicState, keep: &BTreeSet<ModeLabel>) -> Vec<PhotonicState> {
    let mut groups: BTreeMap<FockBasisState, PhotonicState> = BTreeMap::new();
    for (basis, amp) in state.terms() {
        let env = basis.restrict(|m| !keep.contains(m));
        let kept = basis.restrict(|m| keep.contains(m));
        groups.entry(env).or_default().add_term(kept, *amp);
    }
    let vectors: Vec<PhotonicState> = groups
        .into_values()
        .map(|mut v| {
            v.prune();
            v
        })
        .collect();
    orthonormalize(&vectors)
}

/// `k`-photon coherent-polarization Fock state
/// `(cos(theta) h^dag + sin(theta) v^dag)^k / sqrt(k!) |V>`.
pub fn bright_state(theta: f64, k: u32, slot: i32) -> PhotonicState {
    let mut map = ModeMap::new();
    let h = ModeLabel::pol_h(slot);
    let v = ModeLabel::pol_v(slot);
    let seed = ModeLabel::custom("bright-seed", slot);
    map.insert(
        seed.clone(),
        vec![
            (h, C64::new(theta.cos(), 0.0)),
            (v, C64::new(theta.sin(), 0.0)),
        ],
    );
    let start = PhotonicState::basis(FockBasisState::from_counts([(seed, k)]));
    Optics::new(k.max(DEFAULT_PHOTON_CUTOFF))
        .apply_mode_map(&start, &map)
        .expect("cutoff covers the requested photon number")
}
