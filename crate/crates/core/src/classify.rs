//! Side-channel versus state-channel classification.
//!
//! An attack is described by the Hilbert spaces it reads from and writes
//! to. Alice's legitimate interface is the span of her sent states `H_A`;
//! Bob's is the space of states that affect his measurement `H_B`. Eve may
//! also hold private ancillas. Anything else (the rest of the channel
//! spaces, or the environment `H_env` such as device internals) is a side
//! channel.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackIsometry;
use crate::error::Result;
use crate::linalg;
use crate::receivers::{coordinates, ReceiverModel};
use crate::tolerance::COMPARE;

/// Spaces an attack can depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReadSpace {
    /// Span of Alice's sent states.
    #[serde(rename = "H_A")]
    AliceSent,
    /// States that can leave Alice's channel but are not her sent states.
    #[serde(rename = "H_A_full\\H_A")]
    AliceExcess,
    #[serde(rename = "H_env")]
    Env,
    #[serde(rename = "eve_ancilla_in")]
    AncillaIn,
}

/// Spaces an attack's output can affect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WriteSpace {
    /// States that affect Bob's measurement (his reversed space).
    #[serde(rename = "H_B")]
    BobMeasured,
    /// States that can reach Bob's channel but do not affect his measurement.
    #[serde(rename = "H_B_full\\H_B")]
    BobExcess,
    #[serde(rename = "H_env")]
    Env,
    #[serde(rename = "eve_ancilla_out")]
    AncillaOut,
}

impl ReadSpace {
    pub const ALL: [ReadSpace; 4] = [ReadSpace::AliceSent, ReadSpace::AliceExcess, ReadSpace::Env, ReadSpace::AncillaIn];

    fn is_side(self) -> bool {
        matches!(self, ReadSpace::AliceExcess | ReadSpace::Env)
    }

    fn is_channel(self) -> bool {
        matches!(self, ReadSpace::AliceSent | ReadSpace::AliceExcess)
    }
}

impl WriteSpace {
    pub const ALL: [WriteSpace; 4] =
        [WriteSpace::BobMeasured, WriteSpace::BobExcess, WriteSpace::Env, WriteSpace::AncillaOut];

    fn is_side(self) -> bool {
        matches!(self, WriteSpace::BobExcess | WriteSpace::Env)
    }

    fn is_channel(self) -> bool {
        matches!(self, WriteSpace::BobMeasured | WriteSpace::BobExcess)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFootprint {
    pub reads: BTreeSet<ReadSpace>,
    pub writes: BTreeSet<WriteSpace>,
    /// The write to `H_env` is a side effect that neither Alice nor Bob
    /// can observe. Ignored when `H_env` is not written.
    #[serde(default)]
    pub inert_env_write: bool,
}

impl SpaceFootprint {
    pub fn new<R, W>(reads: R, writes: W) -> Self
    where
        R: IntoIterator<Item = ReadSpace>,
        W: IntoIterator<Item = WriteSpace>,
    {
        SpaceFootprint { reads: reads.into_iter().collect(), writes: writes.into_iter().collect(), inert_env_write: false }
    }

    pub fn with_inert_env_write(mut self) -> Self {
        self.writes.insert(WriteSpace::Env);
        self.inert_env_write = true;
        self
    }

    /// Whether the attack uses Alice's or Bob's quantum channel at all.
    pub fn uses_channel(&self) -> bool {
        self.reads.iter().any(|r| r.is_channel()) || self.writes.iter().any(|w| w.is_channel())
    }

    fn side_reads(&self) -> impl Iterator<Item = ReadSpace> + '_ {
        self.reads.iter().copied().filter(|r| r.is_side())
    }

    fn side_writes(&self) -> impl Iterator<Item = WriteSpace> + '_ {
        self.writes.iter().copied().filter(|w| w.is_side())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackClass {
    SideChannel,
    StateChannel,
    /// Formally a side channel whose only extra effect is an inert write
    /// to the environment.
    TrivialSideChannel,
    /// Uses no quantum channel (for example a camera in Bob's lab).
    Neither,
}

impl fmt::Display for AttackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackClass::SideChannel => "side-channel",
            AttackClass::StateChannel => "state-channel",
            AttackClass::TrivialSideChannel => "trivial-side-channel",
            AttackClass::Neither => "neither",
        })
    }
}

pub fn classify(fp: &SpaceFootprint) -> AttackClass {
    if !fp.uses_channel() {
        return AttackClass::Neither;
    }
    let side_reads = fp.side_reads().count();
    let side_writes: Vec<WriteSpace> = fp.side_writes().collect();
    if side_reads == 0 && side_writes.is_empty() {
        return AttackClass::StateChannel;
    }
    if side_reads == 0 && side_writes == [WriteSpace::Env] && fp.inert_env_write {
        return AttackClass::TrivialSideChannel;
    }
    AttackClass::SideChannel
}

/// Footprint of an attack isometry against a receiver: it reads Alice's
/// qubit, writes `H_B` and/or the rest of Bob's channel space depending on
/// where its channel states lie relative to the reversed space, and writes
/// Eve's ancilla when her states are not all parallel.
pub fn attack_footprint(attack: &AttackIsometry, receiver: &ReceiverModel) -> Result<SpaceFootprint> {
    attack.check_shape()?;
    let hp = receiver.reversed_space()?;
    let mut fp = SpaceFootprint::new([ReadSpace::AliceSent], []);
    let mut eve_vectors = Vec::new();
    for (k, p) in attack.p_basis.iter().enumerate() {
        let used: Vec<_> = attack.coefficients.iter().map(|row| &row[k]).filter(|v| linalg::norm(v) > COMPARE).collect();
        if used.is_empty() {
            continue;
        }
        eve_vectors.extend(used.into_iter().cloned());
        let (coeffs, lost) = coordinates(p, &hp);
        if linalg::norm(&coeffs) > COMPARE {
            fp.writes.insert(WriteSpace::BobMeasured);
        }
        if lost > COMPARE {
            fp.writes.insert(WriteSpace::BobExcess);
        }
    }
    if linalg::rank(&eve_vectors, attack.eve_dim) > 1 {
        fp.writes.insert(WriteSpace::AncillaOut);
    }
    Ok(fp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyTag {
    FakedStates,
    ReversedSpace,
    DetectorEfficiencyMismatch,
    BrightIllumination,
    TrojanHorse,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 5] = [
        FamilyTag::FakedStates,
        FamilyTag::ReversedSpace,
        FamilyTag::DetectorEfficiencyMismatch,
        FamilyTag::BrightIllumination,
        FamilyTag::TrojanHorse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::FakedStates => "faked-states",
            FamilyTag::ReversedSpace => "reversed-space",
            FamilyTag::DetectorEfficiencyMismatch => "detector-efficiency-mismatch",
            FamilyTag::BrightIllumination => "bright-illumination",
            FamilyTag::TrojanHorse => "trojan-horse",
        }
    }

    /// Graph node id, kept apart from attack ids of the same name.
    pub fn node_id(self) -> String {
        format!("family:{}", self.name())
    }

    /// Families this family is a special case of.
    pub fn parents(self) -> &'static [FamilyTag] {
        match self {
            FamilyTag::DetectorEfficiencyMismatch => &[FamilyTag::FakedStates],
            FamilyTag::FakedStates => &[FamilyTag::ReversedSpace],
            _ => &[],
        }
    }
}

/// Whose device the attack targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Alice,
    Bob,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackRecord {
    pub id: String,
    pub name: String,
    pub target: Target,
    pub footprint: SpaceFootprint,
    pub families: BTreeSet<FamilyTag>,
    pub expected_class: AttackClass,
    pub citation: String,
}

impl AttackRecord {
    pub fn classify(&self) -> AttackClass {
        classify(&self.footprint)
    }

    /// Family tags missing from the record although implied by its other
    /// tags.
    pub fn missing_implied_families(&self) -> Vec<FamilyTag> {
        let mut missing = BTreeSet::new();
        let mut stack: Vec<FamilyTag> = self.families.iter().copied().collect();
        while let Some(f) = stack.pop() {
            for p in f.parents() {
                if !self.families.contains(p) && missing.insert(*p) {
                    stack.push(*p);
                }
            }
        }
        missing.into_iter().collect()
    }
}

fn record(
    id: &str,
    name: &str,
    target: Target,
    footprint: SpaceFootprint,
    families: &[FamilyTag],
    expected_class: AttackClass,
    citation: &str,
) -> AttackRecord {
    AttackRecord {
        id: id.into(),
        name: name.into(),
        target,
        footprint,
        families: families.iter().copied().collect(),
        expected_class,
        citation: citation.into(),
    }
}

/// Known attacks with their footprints, families and expected classes.
pub fn registry() -> Vec<AttackRecord> {
    use AttackClass::*;
    use FamilyTag::*;
    use ReadSpace as R;
    use WriteSpace as W;
    vec![
        record(
            "pns",
            "Photon-Number Splitting",
            Target::Alice,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured, W::AncillaOut]),
            &[],
            StateChannel,
            "Eve keeps one photon of multi-photon pulses Alice emits and forwards the rest (Brassard, Lutkenhaus, Mor, Sanders 2000).",
        ),
        record(
            "large-pulse-alice",
            "Large Pulse (against Alice)",
            Target::Alice,
            SpaceFootprint::new([R::AliceSent, R::Env], [W::BobMeasured, W::Env]),
            &[TrojanHorse],
            SideChannel,
            "Bright light reflected from Alice's optics reveals her state choice (Vakhitov, Makarov, Hjelme 2001).",
        ),
        record(
            "large-pulse-bob",
            "Large Pulse (against Bob)",
            Target::Bob,
            SpaceFootprint::new([R::AliceSent, R::Env], [W::BobMeasured, W::Env]),
            &[TrojanHorse],
            SideChannel,
            "Bright light reflected from Bob's optics reveals his basis choice (Vakhitov, Makarov, Hjelme 2001).",
        ),
        record(
            "injection-locking",
            "Injection Locking",
            Target::Alice,
            SpaceFootprint::new([R::AliceExcess], [W::BobMeasured, W::Env]),
            &[],
            SideChannel,
            "Light injected into Alice's laser makes the emitted wavelength depend on her state (Pang et al. 2020).",
        ),
        record(
            "time-shift",
            "Time-Shift",
            Target::Bob,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured]),
            &[ReversedSpace],
            StateChannel,
            "Alice's signal is delayed so that only one detector can fire (Qi et al. 2007).",
        ),
        record(
            "trojan-pony",
            "Trojan Pony",
            Target::Bob,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured, W::AncillaOut]),
            &[FakedStates, ReversedSpace],
            StateChannel,
            "Multi-photon faked states whose double clicks Bob discards as losses (Gottesman et al. 2004).",
        ),
        record(
            "imperfect-faraday-mirror",
            "Imperfect Faraday Mirror",
            Target::Alice,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured, W::AncillaOut]),
            &[],
            StateChannel,
            "Alice's states span three dimensions; Eve measures and resends valid qubits (Wang et al. 2013).",
        ),
        record(
            "bright-illumination",
            "Bright Illumination",
            Target::Bob,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured, W::Env, W::AncillaOut]),
            &[BrightIllumination, ReversedSpace],
            SideChannel,
            "Bright light switches Bob's detectors to linear mode before faked bright states (Lydersen et al. 2010).",
        ),
        record(
            "fixed-apparatus",
            "Fixed Apparatus",
            Target::Bob,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured, W::Env, W::AncillaOut]),
            &[ReversedSpace],
            SideChannel,
            "General case: Eve manipulates Bob's ancillary space, such as a blocked arm not reachable from the channel (Boyer, Gelles, Mor 2014).",
        ),
        record(
            "detector-efficiency-mismatch",
            "Detector Efficiency Mismatch",
            Target::Bob,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured, W::AncillaOut]),
            &[DetectorEfficiencyMismatch, FakedStates, ReversedSpace],
            StateChannel,
            "Faked states placed where detector sensitivities differ (Makarov, Anisimov, Skaar 2006).",
        ),
        record(
            "time-bin-faked-states",
            "Time-bin faked states on a six-mode receiver",
            Target::Bob,
            SpaceFootprint::new([R::AliceSent], [W::BobMeasured, W::AncillaOut]),
            &[FakedStates, ReversedSpace],
            StateChannel,
            "Zero-error attack synthesized from the receiver's reversed space (Gelles and Mor 2012).",
        ),
        record(
            "camera-in-lab",
            "Camera in Bob's lab",
            Target::Bob,
            SpaceFootprint::new([R::Env], []),
            &[],
            Neither,
            "Eve watches Bob enter his basis choices; no quantum channel is involved.",
        ),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Attack,
    Family,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub label: String,
    pub kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub class: Option<AttackClass>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<Target>,
}

/// `from` is a special case of `to`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
}

/// Attack-relation graph: attacks and families as nodes, is-special-case-of
/// edges between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl AttackGraph {
    /// Edges are transitively reduced: a record tagged with a family and
    /// its parent only points to the family.
    pub fn from_records(records: &[AttackRecord]) -> Self {
        let mut nodes: Vec<GraphNode> = FamilyTag::ALL
            .iter()
            .map(|f| GraphNode { id: f.node_id(), label: f.name().into(), kind: NodeKind::Family, class: None, target: None })
            .collect();
        let mut edges = BTreeSet::new();
        for f in FamilyTag::ALL {
            for p in f.parents() {
                edges.insert(GraphEdge { from: f.node_id(), to: p.node_id() });
            }
        }
        for r in records {
            nodes.push(GraphNode {
                id: r.id.clone(),
                label: r.name.clone(),
                kind: NodeKind::Attack,
                class: Some(r.classify()),
                target: Some(r.target),
            });
            let implied: BTreeSet<FamilyTag> =
                r.families.iter().flat_map(|f| f.parents().iter().copied()).collect();
            for f in r.families.iter().filter(|f| !implied.contains(f)) {
                edges.insert(GraphEdge { from: r.id.clone(), to: f.node_id() });
            }
        }
        AttackGraph { nodes, edges: edges.into_iter().collect() }
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph attacks {\n  rankdir=BT;\n");
        for n in &self.nodes {
            let shape = match n.kind {
                NodeKind::Attack => "box",
                NodeKind::Family => "ellipse",
            };
            let label = match n.class {
                Some(c) => format!("{}\\n{c}", n.label),
                None => n.label.clone(),
            };
            out.push_str(&format!("  \"{}\" [shape={shape}, label=\"{label}\"];\n", n.id));
        }
        for e in &self.edges {
            out.push_str(&format!("  \"{}\" -> \"{}\";\n", e.from, e.to));
        }
        out.push_str("}\n");
        out
    }
}
