use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Basis, Interpretation, InterpretationSets, Outcome, ReceiverModel, Setting};
use crate::error::{Error, Result};
use crate::fockspace::{
    bright_state, FockBasisState, InterferometerConfig, LinearMap, ModeLabel, Optics, PhotonicState,
};
use crate::linalg;
use crate::C64;

/// Built-in receiver families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReceiverKind {
    /// Time-bin interferometer measuring `s_0..s_2`, `d_0..d_2`.
    #[serde(rename = "interferometric-6mode")]
    Interferometric6Mode,
    /// Interferometer measuring only `s_1`, `d_1`; Hadamard and circular
    /// settings differ in the interferometer phase.
    #[serde(rename = "interferometric-2mode")]
    Interferometric2Mode,
    /// Interferometer measuring `d_0`, `d_1`, `s_1`, `s_2`, with
    /// computational bits read from `d_0` and `s_2` only.
    #[serde(rename = "interferometric-4mode")]
    Interferometric4Mode,
    /// Six-mode receiver whose detectors also watch `t_{-1}` and `t_3` and
    /// flag any click there as invalid.
    #[serde(rename = "interferometric-defended-10mode")]
    InterferometricDefended10Mode,
    /// Passive polarization receiver with threshold detectors, up to two
    /// photons per pulse.
    #[serde(rename = "polarization-threshold")]
    PolarizationThreshold,
    /// Blinded detectors that only register bright polarized pulses.
    #[serde(rename = "blinded-bright")]
    BlindedBright,
    /// Single-photon polarization qubit receiver with no enlargement.
    #[serde(rename = "ideal-bb84")]
    IdealBb84,
    /// Receiver given explicitly in the configuration.
    #[serde(rename = "custom")]
    Custom,
}

impl ReceiverKind {
    pub const BUILT_IN: [ReceiverKind; 7] = [
        ReceiverKind::Interferometric6Mode,
        ReceiverKind::Interferometric2Mode,
        ReceiverKind::Interferometric4Mode,
        ReceiverKind::InterferometricDefended10Mode,
        ReceiverKind::PolarizationThreshold,
        ReceiverKind::BlindedBright,
        ReceiverKind::IdealBb84,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Interferometric6Mode => "interferometric-6mode",
            ReceiverKind::Interferometric2Mode => "interferometric-2mode",
            ReceiverKind::Interferometric4Mode => "interferometric-4mode",
            ReceiverKind::InterferometricDefended10Mode => "interferometric-defended-10mode",
            ReceiverKind::PolarizationThreshold => "polarization-threshold",
            ReceiverKind::BlindedBright => "blinded-bright",
            ReceiverKind::IdealBb84 => "ideal-bb84",
            ReceiverKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReceiverKind::BUILT_IN
            .iter()
            .chain([ReceiverKind::Custom].iter())
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Linear polarization of a pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Polarization {
    H,
    V,
    Plus45,
    Minus45,
    /// Angle in radians, in `[0, pi)`.
    Angle(f64),
}

impl Polarization {
    pub const NAMED: [Polarization; 4] = [
        Polarization::H,
        Polarization::V,
        Polarization::Plus45,
        Polarization::Minus45,
    ];

    pub fn angle(self) -> f64 {
        match self {
            Polarization::H => 0.0,
            Polarization::V => FRAC_PI_2,
            Polarization::Plus45 => FRAC_PI_4,
            Polarization::Minus45 => 3.0 * FRAC_PI_4,
            Polarization::Angle(a) => a.rem_euclid(PI),
        }
    }

    /// Snaps angles within 1e-9 of a named polarization to its name.
    pub fn from_angle(theta: f64) -> Self {
        let t = theta.rem_euclid(PI);
        for p in Self::NAMED {
            let d = (p.angle() - t).abs();
            if d < 1e-9 || (PI - d) < 1e-9 {
                return p;
            }
        }
        Polarization::Angle(t)
    }

    pub fn name(self) -> String {
        match self {
            Polarization::H => "H".into(),
            Polarization::V => "V".into(),
            Polarization::Plus45 => "+45".into(),
            Polarization::Minus45 => "-45".into(),
            Polarization::Angle(a) => format!("{a:.9}"),
        }
    }

    /// BB84 polarization encoding `H = |0>`, `V = |1>`, `+45 = |+>`, `-45 = |->`.
    pub fn for_bb84(basis: Basis, bit: u8) -> Option<Self> {
        match (basis, bit) {
            (Basis::Computational, 0) => Some(Polarization::H),
            (Basis::Computational, 1) => Some(Polarization::V),
            (Basis::Hadamard, 0) => Some(Polarization::Plus45),
            (Basis::Hadamard, 1) => Some(Polarization::Minus45),
            _ => None,
        }
    }

    /// Intensity fraction transmitted onto an analyzer at `other`.
    pub fn malus(self, other: Polarization) -> f64 {
        (self.angle() - other.angle()).cos().powi(2)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolarizationRepr {
    Name(String),
    Angle(f64),
}

impl Serialize for Polarization {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Polarization::Angle(a) => PolarizationRepr::Angle(*a),
            named => PolarizationRepr::Name(named.name()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polarization {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match PolarizationRepr::deserialize(deserializer)? {
            PolarizationRepr::Angle(a) if a.is_finite() => Ok(Polarization::from_angle(a)),
            PolarizationRepr::Angle(_) => Err(serde::de::Error::custom("non-finite polarization angle")),
            PolarizationRepr::Name(n) => match n.as_str() {
                "H" => Ok(Polarization::H),
                "V" => Ok(Polarization::V),
                "+45" => Ok(Polarization::Plus45),
                "-45" => Ok(Polarization::Minus45),
                other => Err(serde::de::Error::custom(format!("unknown polarization '{other}'"))),
            },
        }
    }
}

/// A bright polarized pulse that a blinded receiver registers as a fixed
/// basis and bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrightDetection {
    pub polarization: Polarization,
    pub basis: Basis,
    pub bit: u8,
}

impl BrightDetection {
    /// The four detections of a fully blinded passive BB84 polarization receiver.
    pub fn standard() -> Vec<BrightDetection> {
        [
            (Basis::Computational, 0),
            (Basis::Computational, 1),
            (Basis::Hadamard, 0),
            (Basis::Hadamard, 1),
        ]
        .into_iter()
        .map(|(basis, bit)| BrightDetection {
            polarization: Polarization::for_bb84(basis, bit).expect("BB84 pair"),
            basis,
            bit,
        })
        .collect()
    }

    pub fn outcome_id(&self) -> String {
        format!("bright-{}", self.polarization.name())
    }
}

/// Optional knobs for the built-in receivers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverParams {
    /// Photon-number sector of the polarization receiver (1 or 2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_photons: Option<u32>,
    /// Photon number `k` of the bright states (blinded receiver).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bright_photons: Option<u32>,
    /// Bright-pulse detections of the blinded receiver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<BrightDetection>>,
    /// Bob ignores invalid events instead of counting them as errors.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub invalid_as_loss: bool,
    /// Full model for the `custom` kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Box<ReceiverModel>>,
}

/// Receiver kind plus parameters, as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub kind: ReceiverKind,
    #[serde(default)]
    pub params: ReceiverParams,
}

impl ReceiverSpec {
    pub fn of(kind: ReceiverKind) -> Self {
        ReceiverSpec { kind, params: ReceiverParams::default() }
    }

    pub fn build(&self) -> Result<ReceiverModel> {
        make_receiver(self.kind, &self.params)
    }
}

/// Builds and validates a receiver model.
pub fn make_receiver(kind: ReceiverKind, params: &ReceiverParams) -> Result<ReceiverModel> {
    let expect_none = |name: &str, present: bool| -> Result<()> {
        if present {
            Err(Error::MalformedParams(format!("parameter '{name}' does not apply to {kind}")))
        } else {
            Ok(())
        }
    };
    if kind != ReceiverKind::PolarizationThreshold {
        expect_none("max_photons", params.max_photons.is_some())?;
    }
    if kind != ReceiverKind::BlindedBright {
        expect_none("bright_photons", params.bright_photons.is_some())?;
        expect_none("detections", params.detections.is_some())?;
    }
    if kind != ReceiverKind::Custom {
        expect_none("model", params.model.is_some())?;
    }
    let mut model = match kind {
        ReceiverKind::Interferometric6Mode => six_mode(),
        ReceiverKind::Interferometric2Mode => two_mode(),
        ReceiverKind::Interferometric4Mode => four_mode(),
        ReceiverKind::InterferometricDefended10Mode => defended_ten_mode(),
        ReceiverKind::PolarizationThreshold => {
            let max = params.max_photons.unwrap_or(2);
            if !(1..=2).contains(&max) {
                return Err(Error::MalformedParams(format!("max_photons must be 1 or 2, got {max}")));
            }
            polarization_threshold(kind.name(), max)
        }
        ReceiverKind::IdealBb84 => polarization_threshold(kind.name(), 1),
        ReceiverKind::BlindedBright => {
            let k = params.bright_photons.unwrap_or(20);
            let detections = params
                .detections
                .clone()
                .unwrap_or_else(BrightDetection::standard);
            blinded_bright(k, &detections)
        }
        ReceiverKind::Custom => params
            .model
            .as_deref()
            .cloned()
            .ok_or_else(|| Error::MalformedParams("custom receiver needs 'model'".into())),
    }?;
    if params.invalid_as_loss {
        for s in model.settings.iter_mut() {
            s.sets = std::mem::take(&mut s.sets).invalid_as_loss();
        }
    }
    model.validate()?;
    Ok(model)
}

struct MzSetting {
    basis: Basis,
    phase: f64,
    outcomes: Vec<(ModeLabel, Interpretation)>,
}

fn vacuum_outcome() -> Outcome {
    Outcome { id: "vac".into(), state: PhotonicState::vacuum() }
}

fn interferometric(name: &str, specs: Vec<MzSetting>) -> Result<ReceiverModel> {
    let times: Vec<i32> = specs
        .iter()
        .flat_map(|s| s.outcomes.iter().map(|(m, _)| m.index))
        .collect();
    let lo = times.iter().min().copied().unwrap_or(0) - 2;
    let hi = times.iter().max().copied().unwrap_or(0) + 1;
    let mut domain = vec![FockBasisState::vacuum()];
    let mut channel_modes = BTreeSet::new();
    let mut ancilla_modes = BTreeSet::new();
    for t in lo..=hi {
        domain.push(FockBasisState::single(ModeLabel::chan(t)));
        domain.push(FockBasisState::single(ModeLabel::blocked(t)));
        channel_modes.insert(ModeLabel::chan(t));
        ancilla_modes.insert(ModeLabel::blocked(t));
    }
    let optics = Optics::default();
    let mut settings = Vec::new();
    for spec in specs {
        let cfg = InterferometerConfig::with_phase(spec.phase);
        let map = LinearMap::from_action(domain.clone(), |s| optics.mz_transform(s, &cfg))?;
        let mut outcomes = vec![vacuum_outcome()];
        let mut assignments = vec![("vac".to_string(), Interpretation::Loss)];
        for (mode, interp) in &spec.outcomes {
            outcomes.push(Outcome { id: mode.to_string(), state: PhotonicState::single(mode.clone()) });
            assignments.push((mode.to_string(), *interp));
        }
        settings.push(Setting {
            id: spec.basis.name().to_string(),
            basis: spec.basis,
            map,
            outcomes,
            sets: InterpretationSets::from_assignments(assignments.iter().map(|(i, x)| (i.as_str(), *x))),
        });
    }
    Ok(ReceiverModel {
        name: name.to_string(),
        settings,
        channel_modes,
        ancilla_modes,
        passive_choice: false,
        single_photon: true,
    })
}

fn outputs(times: std::ops::RangeInclusive<i32>, rule: impl Fn(&ModeLabel) -> Interpretation) -> Vec<(ModeLabel, Interpretation)> {
    times
        .flat_map(|t| [ModeLabel::straight(t), ModeLabel::down(t)])
        .map(|m| {
            let i = rule(&m);
            (m, i)
        })
        .collect()
}

fn is_down(m: &ModeLabel) -> bool {
    m.kind == crate::fockspace::ModeKind::OutputDown
}

fn six_mode_rule(basis: Basis, m: &ModeLabel) -> Interpretation {
    use Interpretation::*;
    match basis {
        Basis::Computational => match m.index {
            0 => Bit0,
            2 => Bit1,
            _ => Loss,
        },
        _ => match (m.index, is_down(m)) {
            (1, true) => Bit0,
            (1, false) => Bit1,
            _ => Loss,
        },
    }
}

fn six_mode() -> Result<ReceiverModel> {
    let specs = [Basis::Computational, Basis::Hadamard]
        .into_iter()
        .map(|basis| MzSetting { basis, phase: 0.0, outcomes: outputs(0..=2, |m| six_mode_rule(basis, m)) })
        .collect();
    interferometric(ReceiverKind::Interferometric6Mode.name(), specs)
}

fn two_mode() -> Result<ReceiverModel> {
    let rule = |m: &ModeLabel| if is_down(m) { Interpretation::Bit0 } else { Interpretation::Bit1 };
    let specs = vec![
        MzSetting { basis: Basis::Hadamard, phase: 0.0, outcomes: outputs(1..=1, rule) },
        MzSetting { basis: Basis::Circular, phase: FRAC_PI_2, outcomes: outputs(1..=1, rule) },
    ];
    interferometric(ReceiverKind::Interferometric2Mode.name(), specs)
}

fn four_mode() -> Result<ReceiverModel> {
    use Interpretation::*;
    let measured = [ModeLabel::down(0), ModeLabel::down(1), ModeLabel::straight(1), ModeLabel::straight(2)];
    let comp = |m: &ModeLabel| match (m.index, is_down(m)) {
        (0, true) => Bit0,
        (2, false) => Bit1,
        _ => Loss,
    };
    let specs = vec![
        MzSetting {
            basis: Basis::Computational,
            phase: 0.0,
            outcomes: measured.iter().map(|m| (m.clone(), comp(m))).collect(),
        },
        MzSetting {
            basis: Basis::Hadamard,
            phase: 0.0,
            outcomes: measured
                .iter()
                .map(|m| (m.clone(), six_mode_rule(Basis::Hadamard, m)))
                .collect(),
        },
    ];
    interferometric(ReceiverKind::Interferometric4Mode.name(), specs)
}

fn defended_ten_mode() -> Result<ReceiverModel> {
    let specs = [Basis::Computational, Basis::Hadamard]
        .into_iter()
        .map(|basis| MzSetting {
            basis,
            phase: 0.0,
            outcomes: outputs(-1..=3, |m| {
                if m.index == -1 || m.index == 3 {
                    Interpretation::Invalid
                } else {
                    six_mode_rule(basis, m)
                }
            }),
        })
        .collect();
    interferometric(ReceiverKind::InterferometricDefended10Mode.name(), specs)
}

fn polarization_outcome_id(b: &FockBasisState) -> String {
    if b.is_vacuum() {
        return "vac".into();
    }
    let mut id = String::new();
    let nh = b.count(&ModeLabel::pol_h(0));
    let nv = b.count(&ModeLabel::pol_v(0));
    if nh > 0 {
        id.push_str(&format!("h{nh}"));
    }
    if nv > 0 {
        id.push_str(&format!("v{nv}"));
    }
    id
}

fn polarization_interpretation(b: &FockBasisState) -> Interpretation {
    let nh = b.count(&ModeLabel::pol_h(0));
    let nv = b.count(&ModeLabel::pol_v(0));
    match (nh > 0, nv > 0) {
        (false, false) => Interpretation::Loss,
        (true, false) => Interpretation::Bit0,
        (false, true) => Interpretation::Bit1,
        (true, true) => Interpretation::Invalid,
    }
}

fn polarization_threshold(name: &str, max_photons: u32) -> Result<ReceiverModel> {
    let h = ModeLabel::pol_h(0);
    let v = ModeLabel::pol_v(0);
    let mut domain = Vec::new();
    for n in 0..=max_photons {
        for nv in 0..=n {
            domain.push(FockBasisState::from_counts([(h.clone(), n - nv), (v.clone(), nv)]));
        }
    }
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let hadamard = [[r, r], [r, -r]];
    let optics = Optics::default();
    let maps = [
        (Basis::Computational, LinearMap::identity(domain.clone())?),
        (
            Basis::Hadamard,
            LinearMap::from_action(domain.clone(), |s| {
                optics.apply_two_mode_unitary(s, (&h, &v), (&h, &v), hadamard)
            })?,
        ),
    ];
    let outcomes: Vec<Outcome> = domain
        .iter()
        .map(|b| Outcome { id: polarization_outcome_id(b), state: PhotonicState::basis(b.clone()) })
        .collect();
    let ids: Vec<String> = domain.iter().map(polarization_outcome_id).collect();
    let sets = InterpretationSets::from_assignments(
        domain.iter().zip(&ids).map(|(b, id)| (id.as_str(), polarization_interpretation(b))),
    );
    let settings = maps
        .into_iter()
        .map(|(basis, map)| Setting {
            id: basis.name().to_string(),
            basis,
            map,
            outcomes: outcomes.clone(),
            sets: sets.clone(),
        })
        .collect();
    Ok(ReceiverModel {
        name: name.to_string(),
        settings,
        channel_modes: [h, v].into_iter().collect(),
        ancilla_modes: BTreeSet::new(),
        passive_choice: false,
        single_photon: max_photons == 1,
    })
}

/// Symmetric (Loewdin) orthonormalization; treats all inputs alike.
fn symmetric_orthonormalize(states: &[PhotonicState]) -> Result<Vec<PhotonicState>> {
    let n = states.len();
    let gram: Vec<Vec<C64>> = (0..n)
        .map(|i| (0..n).map(|j| states[i].inner(&states[j])).collect())
        .collect();
    let (vals, vecs) = linalg::hermitian_eigen(&gram);
    if vals.iter().any(|v| *v < 1e-6) {
        return Err(Error::MalformedParams("bright states are linearly dependent".into()));
    }
    // S^{-1/2} = sum_l |u_l> <u_l| / sqrt(lambda_l)
    let mut inv_sqrt = linalg::zeros(n);
    for (val, vec) in vals.iter().zip(&vecs) {
        linalg::add_projector(&mut inv_sqrt, vec, 1.0 / val.sqrt());
    }
    Ok((0..n)
        .map(|a| {
            let mut out = PhotonicState::zero();
            for (b, s) in states.iter().enumerate() {
                out = out.add_scaled(s, inv_sqrt[b][a]);
            }
            out
        })
        .collect())
}

fn blinded_bright(k: u32, detections: &[BrightDetection]) -> Result<ReceiverModel> {
    if k == 0 {
        return Err(Error::MalformedParams("bright_photons must be positive".into()));
    }
    if detections.is_empty() {
        return Err(Error::MalformedParams("blinded receiver needs at least one detection".into()));
    }
    for d in detections {
        if d.bit > 1 {
            return Err(Error::MalformedParams(format!("detection bit {} is not 0 or 1", d.bit)));
        }
    }
    let raw: Vec<PhotonicState> = detections
        .iter()
        .map(|d| bright_state(d.polarization.angle(), k, 0))
        .collect();
    let states = symmetric_orthonormalize(&raw)?;
    let h = ModeLabel::pol_h(0);
    let v = ModeLabel::pol_v(0);
    let domain: Vec<FockBasisState> = (0..=k)
        .map(|nv| FockBasisState::from_counts([(h.clone(), k - nv), (v.clone(), nv)]))
        .collect();
    let map = LinearMap::identity(domain)?;
    let bases: BTreeSet<Basis> = detections.iter().map(|d| d.basis).collect();
    let settings = bases
        .into_iter()
        .map(|basis| {
            let mine: Vec<(usize, &BrightDetection)> =
                detections.iter().enumerate().filter(|(_, d)| d.basis == basis).collect();
            let ids: Vec<String> = mine.iter().map(|(_, d)| d.outcome_id()).collect();
            Setting {
                id: basis.name().to_string(),
                basis,
                map: map.clone(),
                outcomes: mine
                    .iter()
                    .zip(&ids)
                    .map(|((i, _), id)| Outcome { id: id.clone(), state: states[*i].clone() })
                    .collect(),
                sets: InterpretationSets::from_assignments(
                    mine.iter().zip(&ids).map(|((_, d), id)| (id.as_str(), Interpretation::from_bit(d.bit))),
                ),
            }
        })
        .collect();
    Ok(ReceiverModel {
        name: ReceiverKind::BlindedBright.name().to_string(),
        settings,
        channel_modes: [h, v].into_iter().collect(),
        ancilla_modes: BTreeSet::new(),
        passive_choice: true,
        single_photon: false,
    })
}
