//! BB84 Monte-Carlo simulation over pluggable channels.
//!
//! Every (Alice state, Bob setting) pair is reduced once to an exact
//! categorical distribution over Bob's outcomes together with the
//! probability that Eve announces bit 0. Rounds then sample that table with
//! per-round counter-based RNG streams, so a run is reproducible under any
//! schedule.

mod log;
mod sim;
mod table;


use serde::{Deserialize, Serialize};

pub use log::{
    in_test_subset, read_log, sift_and_estimate, write_log, BasisReport, LogHeader, LogLine, OutcomeCount,
    QberEstimate, RoundRecord, SimulationReport, Tally, DEFAULT_TEST_FRACTION, SCHEMA_VERSION,
};
pub use sim::{exact_statistics, run_bb84, ExactBasis, ExactStatistics, OutcomeProbability, RunOptions, Simulation};

use crate::attacks::{check_support, AttackIsometry};
use crate::error::{Error, Result};
use crate::receivers::ReceiverModel;

/// One attack of a randomized attack channel, applied with probability
/// `weight`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackComponent {
    pub weight: f64,
    pub attack: AttackIsometry,
}

/// What happens to Alice's pulse between the source and Bob.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelModel {
    /// Pass-through.
    Identity,
    /// The pulse is replaced by vacuum with probability `loss`.
    Lossy { loss: f64 },
    /// With probability `p_multi` the source emits two identical photons;
    /// Eve keeps one and measures it in the announced basis.
    Pns { p_multi: f64 },
    /// Eve applies one of the isometries, chosen at random per round by
    /// weight, forwards the channel part and keeps her register for a
    /// Helstrom measurement after the basis is announced.
    AttackIsometry { components: Vec<AttackComponent> },
}

impl ChannelModel {
    pub fn attack(attack: AttackIsometry) -> Self {
        ChannelModel::AttackIsometry { components: vec![AttackComponent { weight: 1.0, attack }] }
    }

    pub fn attack_mixture(components: Vec<(f64, AttackIsometry)>) -> Self {
        ChannelModel::AttackIsometry {
            components: components
                .into_iter()
                .map(|(weight, attack)| AttackComponent { weight, attack })
                .collect(),
        }
    }

    /// Short description echoed into reports.
    pub fn name(&self) -> String {
        match self {
            ChannelModel::Identity => "identity".into(),
            ChannelModel::Lossy { loss } => format!("lossy({loss})"),
            ChannelModel::Pns { p_multi } => format!("pns({p_multi})"),
            ChannelModel::AttackIsometry { components } => {
                if let [c] = components.as_slice() {
                    format!("attack({})", c.attack.name)
                } else {
                    let parts: Vec<String> =
                        components.iter().map(|c| format!("{}*{}", c.weight, c.attack.name)).collect();
                    format!("attack({})", parts.join("+"))
                }
            }
        }
    }

    pub fn has_eve(&self) -> bool {
        matches!(self, ChannelModel::Pns { .. } | ChannelModel::AttackIsometry { .. })
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::MalformedParams(format!("{name} must lie in [0, 1] (got {p})")));
    }
    Ok(())
}

/// Validates a channel against the receiver it will feed. Attack payloads
/// must be well-shaped isometries whose channel states lie in the receiver's
/// reversed space; obliviousness is not required.
pub fn make_channel(channel: ChannelModel, receiver: &ReceiverModel) -> Result<ChannelModel> {
    match &channel {
        ChannelModel::Identity => {}
        ChannelModel::Lossy { loss } => check_probability("loss", *loss)?,
        ChannelModel::Pns { p_multi } => check_probability("p_multi", *p_multi)?,
        ChannelModel::AttackIsometry { components } => {
            if components.is_empty() {
                return Err(Error::MalformedParams("attack channel has no components".into()));
            }
            let mut total = 0.0;
            for c in components {
                check_probability("attack weight", c.weight)?;
                total += c.weight;
                c.attack.check_shape()?;
                if c.attack.alice_labels.len() != 2 {
                    return Err(Error::DimensionMismatch(format!(
                        "attack '{}' must act on a qubit (two Alice basis states)",
                        c.attack.name
                    )));
                }
                check_support(&c.attack, receiver)?;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::MalformedParams(format!("attack weights sum to {total}, expected 1")));
            }
        }
    }
    Ok(channel)
}
