//! Artifact documents and their plain-text rendering.

use std::collections::BTreeMap;
use std::path::Path;

use qkdlab::attacks::{AttackFamily, AttackIsometry, VerificationReport};
use qkdlab::classify::{AttackClass, AttackGraph, FamilyTag, Target};
use qkdlab::fockspace::PhotonicState;
use qkdlab::fuzz::{DeviceSpec, FuzzReport, Pulse};
use qkdlab::protocol::{ExactStatistics, SimulationReport, SCHEMA_VERSION};
use qkdlab::receivers::Basis;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub v: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Body {
    ReverseSpace {
        receiver: String,
        dimension: usize,
        states: Vec<PhotonicState>,
    },
    Synth {
        family: AttackFamily,
        samples: Vec<AttackIsometry>,
    },
    Verify {
        report: VerificationReport,
    },
    Simulate {
        report: SimulationReport,
        exact: Option<ExactStatistics>,
    },
    Fuzz {
        device_spec: DeviceSpec,
        report: FuzzReport,
    },
    Replay {
        device: String,
        results: Vec<ReplayResult>,
    },
    Classify {
        records: Vec<ClassifiedRecord>,
        graph: AttackGraph,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub anomaly: usize,
    pub expected: BTreeMap<String, u32>,
    pub observed: BTreeMap<String, u32>,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedRecord {
    pub id: String,
    pub name: String,
    pub target: Target,
    pub class: AttackClass,
    pub expected_class: AttackClass,
    pub families: Vec<FamilyTag>,
    pub missing_implied_families: Vec<FamilyTag>,
}

impl Artifact {
    pub fn new(seed: u64, body: Body) -> Self {
        Artifact { v: SCHEMA_VERSION, seed, body }
    }

    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Reads an artifact, checking its version before its structure.
    pub fn load(path: &Path) -> CliResult<Self> {
        let value: Value = crate::config::read_json(path)?;
        match value.get("v").and_then(Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            other => {
                return Err(CliError::config(
                    "schema",
                    format!("{}: artifact version {other:?} (expected {SCHEMA_VERSION})", path.display()),
                )
                .with("path", path)
                .with("version", other))
            }
        }
        serde_json::from_value(value)
            .map_err(|e| CliError::config("schema", format!("{}: {e}", path.display())).with("path", path))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        match &self.body {
            Body::ReverseSpace { receiver, dimension, states } => {
                line(w, format!("reverse-space  receiver={receiver}  dim={dimension}"));
                for (i, s) in states.iter().enumerate() {
                    line(w, format!("  p{i}  {s}"));
                }
            }
            Body::Synth { family, samples } => render_synth(w, family, samples, self.seed),
            Body::Verify { report } => render_verify(w, report),
            Body::Simulate { report, exact } => render_simulation(w, report, exact.as_ref()),
            Body::Fuzz { report, .. } => render_fuzz(w, report),
            Body::Replay { device, results } => {
                line(w, format!("fuzz-replay  device={device}  seed={}", self.seed));
                for r in results {
                    let verdict = if r.matches { "ok" } else { "MISMATCH" };
                    line(w, format!("  anomaly {:>4}  {verdict}  {}", r.anomaly, counts(&r.observed)));
                }
            }
            Body::Classify { records, graph } => {
                line(w, format!("classify  records={}  graph nodes={} edges={}", records.len(), graph.nodes.len(), graph.edges.len()));
                line(w, format!("  {:<30} {:<6} {:<22} {:<22} families", "id", "target", "class", "expected"));
                for r in records {
                    let families: Vec<&str> = r.families.iter().map(|f| f.name()).collect();
                    line(
                        w,
                        format!(
                            "  {:<30} {:<6} {:<22} {:<22} {}",
                            r.id,
                            format!("{:?}", r.target).to_lowercase(),
                            r.class.to_string(),
                            r.expected_class.to_string(),
                            families.join(",")
                        ),
                    );
                }
            }
        }
        out
    }
}

fn line(w: &mut String, s: String) {
    w.push_str(&s);
    w.push('\n');
}

/// Three decimals, with exact zero printed as `0`.
pub fn rate(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.3}")
    }
}

fn short(b: Basis) -> &'static str {
    match b {
        Basis::Computational => "comp",
        Basis::Hadamard => "had",
        Basis::Circular => "circ",
    }
}

fn counts(c: &BTreeMap<String, u32>) -> String {
    c.iter().map(|(k, n)| format!("{k}={n}")).collect::<Vec<_>>().join(" ")
}

fn pulse(p: &Pulse) -> String {
    let mu = p.mean_photons;
    let mu = if mu.fract() == 0.0 { format!("{mu}") } else { format!("{mu:.3}") };
    format!("{}@{} x{mu}", p.polarization.name(), p.time_slot)
}

fn render_synth(w: &mut String, f: &AttackFamily, samples: &[AttackIsometry], seed: u64) {
    line(w, format!("synth  receiver={}  seed={seed}", f.receiver));
    line(
        w,
        format!(
            "  columns={} constraints={} rank={} family-dim={} eve-dim={} minimal-eve-dim={}",
            f.columns.len(),
            f.constraint_rows,
            f.rank,
            f.dimension(),
            f.eve_dim,
            f.minimal_eve_dim
        ),
    );
    line(w, format!("  trivial={}  vertices={}", f.trivial, f.vertices.len()));
    if !f.note.is_empty() {
        line(w, format!("  note: {}", f.note));
    }
    for a in f.instances.iter().chain(samples) {
        line(w, format!("  member {:<24} channel-states={} isometry-residual={:.1e}", a.name, a.p_basis.len(), a.isometry_residual()));
    }
}

fn render_verify(w: &mut String, r: &VerificationReport) {
    let verdict = if r.passed() { "PASS" } else { "FAIL" };
    line(w, format!("verify  attack={}  receiver={}  {verdict}", r.attack, r.receiver));
    line(
        w,
        format!(
            "  oblivious={} max-error-amplitude={:.3e} isometry={} isometry-residual={:.1e}",
            r.oblivious, r.max_error_amplitude, r.is_isometry, r.isometry_residual
        ),
    );
    for row in r.per_row_residuals.iter().filter(|x| x.residual > qkdlab::tolerance::COMPARE) {
        line(w, format!("  residual alice={} setting={} outcome={} amplitude={:.4}", row.alice, row.setting, row.outcome, row.residual));
    }
}

fn render_simulation(w: &mut String, r: &SimulationReport, exact: Option<&ExactStatistics>) {
    line(w, format!("simulate  receiver={}  channel={}  rounds={}  seed={}", r.receiver, r.channel, r.rounds, r.seed));
    if let Some(e) = exact {
        let mut weight = 0.0;
        let mut errors = 0.0;
        let mut effs = Vec::new();
        for (b, x) in &e.per_basis {
            effs.push(format!("{}={}", short(*b), rate(x.detection_efficiency)));
            weight += 1.0 - x.loss_rate;
            errors += (1.0 - x.loss_rate) * x.qber;
        }
        let qber = if weight > 0.0 { errors / weight } else { 0.0 };
        let eve = e.eve_guess_accuracy.map(|g| format!(" eve={}", rate(g))).unwrap_or_default();
        line(w, format!("  exact        efficiency {} qber={}{eve}", effs.join(" "), rate(qber)));
    }
    let effs: Vec<String> = r.per_basis.iter().map(|(b, x)| format!("{}={}", short(*b), rate(x.detection_efficiency))).collect();
    let eve = r.eve_guess_accuracy.map(|g| format!(" eve={}", rate(g))).unwrap_or_default();
    line(w, format!("  monte-carlo  efficiency {} qber={}{eve}", effs.join(" "), rate(r.qber)));
    for (b, x) in &r.per_basis {
        line(
            w,
            format!(
                "  {:<14} matched={} sifted={} errors={} invalid={} losses={} qber={}",
                b.to_string(),
                x.matched_rounds,
                x.sifted,
                x.errors,
                x.invalid,
                x.losses,
                rate(x.qber)
            ),
        );
    }
    line(w, format!("  qber-estimate={} from {} test bits", rate(r.qber_estimate.estimate), r.qber_estimate.test_bits));
}

fn render_fuzz(w: &mut String, r: &FuzzReport) {
    line(w, format!("fuzz  device={}  seed={}  cases={}", r.device, r.seed, r.test_cases_run));
    line(w, format!("  calibrated click probability={:.3}", r.calibrated_click_probability));
    let found: Vec<String> = r.properties_found.iter().map(|t| format!("{t:?}")).collect();
    line(w, format!("  properties: {}", if found.is_empty() { "none".into() } else { found.join(", ") }));
    let mut first = BTreeMap::new();
    for a in &r.anomalies {
        first.entry(a.tag).or_insert((a, 0)).1 += 1;
    }
    for (tag, (a, n)) in first {
        let input: Vec<String> = a.input.pulses.iter().map(pulse).collect();
        line(
            w,
            format!(
                "  {:<20} anomalies={n:<4} first: case {} [{}] -> {}",
                format!("{tag:?}"),
                a.first_case,
                input.join(", "),
                counts(&a.counts)
            ),
        );
    }
    for v in &r.derived_vulnerabilities {
        let prefix: Vec<String> = v.prefix.iter().map(pulse).collect();
        line(
            w,
            format!(
                "  vulnerability: {} after [{}] -> {} bit {} via {}",
                pulse(&v.state),
                prefix.join(", "),
                v.basis,
                v.bit,
                v.detector
            ),
        );
    }
}
