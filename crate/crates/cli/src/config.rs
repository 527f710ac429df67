//! Scenario documents. Relative paths inside a document resolve against the
//! document's directory; paths given on the command line resolve against
//! the working directory.

use std::path::{Path, PathBuf};

use qkdlab::attacks::{literal, AttackIsometry};
use qkdlab::fuzz::{DeviceSpec, StrategyConfig};
use qkdlab::protocol::{ChannelModel, SCHEMA_VERSION};
use qkdlab::receivers::{ideal_alice, AliceSourceModel, ReceiverKind, ReceiverModel, ReceiverSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub v: Option<u32>,
    pub description: Option<String>,
    pub receiver: Option<ReceiverRef>,
    pub alice: Option<AliceRef>,
    pub channel: Option<ChannelSpec>,
    pub attack: Option<AttackRef>,
    pub rounds: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub fuzz: FuzzOptions,
    #[serde(default)]
    pub classify: ClassifyOptions,
    #[serde(default)]
    pub report: ReportOptions,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    /// Eve register dimension; the number of constraint columns when absent.
    pub eve_dim: Option<usize>,
    /// Extra family members sampled with the scenario seed.
    pub samples: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    pub test_fraction: f64,
    pub threads: usize,
    /// Also compute the exact per-round outcome distribution.
    pub exact: bool,
    /// Newline-delimited JSON round log.
    pub log: Option<PathBuf>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions { test_fraction: qkdlab::protocol::DEFAULT_TEST_FRACTION, threads: 0, exact: false, log: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuzzOptions {
    pub device: DeviceSpec,
    pub strategy: StrategyConfig,
    /// Newline-delimited JSON trace of every probe.
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    /// JSON array of attack records replacing the built-in registry.
    pub records: Option<PathBuf>,
    /// Graphviz rendering of the subsumption graph.
    pub dot: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportOptions {
    pub artifacts: Vec<PathBuf>,
}

/// A built-in kind name or a full receiver spec.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ReceiverRef {
    Name(String),
    Spec(ReceiverSpec),
}

impl ReceiverRef {
    pub fn spec(&self) -> CliResult<ReceiverSpec> {
        match self {
            ReceiverRef::Name(n) => Ok(ReceiverSpec::of(n.parse::<ReceiverKind>()?)),
            ReceiverRef::Spec(s) => Ok(s.clone()),
        }
    }
}

/// `ideal` (the source matching the receiver), `time-bin`, `polarization`,
/// `abstract`, or an explicit source model.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum AliceRef {
    Name(String),
    Model(AliceSourceModel),
}

impl AliceRef {
    pub fn resolve(&self, kind: ReceiverKind) -> CliResult<AliceSourceModel> {
        let alice = match self {
            AliceRef::Name(n) => match n.as_str() {
                "ideal" => ideal_alice(kind),
                "time-bin" => AliceSourceModel::time_bin_bb84(),
                "polarization" => AliceSourceModel::polarization_bb84(),
                "abstract" => AliceSourceModel::bb84_abstract(),
                other => {
                    return Err(CliError::config("malformed-params", format!("unknown Alice source '{other}'"))
                        .with("known", ["ideal", "time-bin", "polarization", "abstract"]))
                }
            },
            AliceRef::Model(m) => m.clone(),
        };
        alice.validate()?;
        Ok(alice)
    }
}

/// `builtin:<name>`, a path to an attack document, or an inline attack.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum AttackRef {
    Ref(String),
    Inline(Box<AttackIsometry>),
}

impl AttackRef {
    /// Parses a command-line `--attack` value.
    pub fn from_arg(s: &str) -> Self {
        AttackRef::Ref(s.to_string())
    }

    pub fn resolve(&self, receiver: &ReceiverModel, alice: &AliceSourceModel) -> CliResult<AttackIsometry> {
        match self {
            AttackRef::Ref(r) => match r.strip_prefix("builtin:") {
                Some(name) => Ok(literal::builtin(name, receiver, alice)
                    .map_err(|e| CliError::from(e).with("known", literal::BUILTIN_NAMES))?),
                None => read_json(Path::new(r)),
            },
            AttackRef::Inline(a) => Ok((**a).clone()),
        }
    }

    fn rebase(&mut self, base: &Path) {
        if let AttackRef::Ref(r) = self {
            if !r.starts_with("builtin:") {
                *r = base.join(&*r).to_string_lossy().into_owned();
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub attack: AttackRef,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity,
    Lossy { loss: f64 },
    Pns { p_multi: f64 },
    Attack { components: Vec<ComponentSpec> },
}

impl ChannelSpec {
    pub fn resolve(&self, receiver: &ReceiverModel, alice: &AliceSourceModel) -> CliResult<ChannelModel> {
        Ok(match self {
            ChannelSpec::Identity => ChannelModel::Identity,
            ChannelSpec::Lossy { loss } => ChannelModel::Lossy { loss: *loss },
            ChannelSpec::Pns { p_multi } => ChannelModel::Pns { p_multi: *p_multi },
            ChannelSpec::Attack { components } => ChannelModel::attack_mixture(
                components
                    .iter()
                    .map(|c| Ok((c.weight, c.attack.resolve(receiver, alice)?)))
                    .collect::<CliResult<_>>()?,
            ),
        })
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg: ScenarioConfig = read_json(path)?;
        if let Some(v) = cfg.v {
            if v != SCHEMA_VERSION {
                return Err(CliError::config("schema", format!("config version {v} (expected {SCHEMA_VERSION})"))
                    .with("path", path));
            }
        }
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.rebase(&base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                *p = base.join(&*p);
            }
        };
        join(&mut self.out);
        join(&mut self.simulate.log);
        join(&mut self.fuzz.trace);
        join(&mut self.classify.records);
        join(&mut self.classify.dot);
        for a in &mut self.report.artifacts {
            *a = base.join(&*a);
        }
        if let Some(a) = &mut self.attack {
            a.rebase(base);
        }
        if let Some(ChannelSpec::Attack { components }) = &mut self.channel {
            for c in components {
                c.attack.rebase(base);
            }
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("io", format!("cannot read {}: {e}", path.display())).with("path", path))?;
    serde_json::from_str(&text).map_err(|e| CliError::config("json", format!("{}: {e}", path.display())).with("path", path))
}
