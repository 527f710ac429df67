//! Exact per-round outcome distributions.

use super::ChannelModel;
use crate::attacks::{eve_conditional_states, joint_outcomes, AttackIsometry, EvePovm};
use crate::error::Result;
use crate::fockspace::PhotonicState;
use crate::receivers::{AliceSourceModel, Interpretation, LogicalState, ReceiverModel, Setting};

/// Entries below this probability are dropped; they only carry rounding
/// noise from amplitudes that vanish analytically.
const NEGLIGIBLE: f64 = 1e-24;

/// Outcome id used when a setting has no explicit vacuum outcome.
pub(crate) const NO_CLICK: &str = "none";

/// One way a round can end for a fixed Alice state.
#[derive(Clone, Debug)]
pub(crate) struct Entry {
    pub setting: usize,
    pub outcome: String,
    pub interpretation: Interpretation,
    /// Joint probability of Bob's setting and outcome.
    pub prob: f64,
    /// Probability that Eve announces bit 0; `None` without an eavesdropper.
    pub guess0: Option<f64>,
}

/// What Eve learns on a component that forwards Alice's state unchanged.
#[derive(Clone, Copy)]
enum Knowledge {
    Nothing,
    Coin,
    Bit,
}

enum Component<'a> {
    Direct { weight: f64, knowledge: Knowledge },
    Attack { weight: f64, attack: &'a AttackIsometry, povm: EvePovm },
    Vacuum { weight: f64 },
}

pub(crate) struct OutcomeTable {
    pub alice: Vec<LogicalState>,
    pub settings: Vec<(String, crate::receivers::Basis)>,
    /// Entries per Alice state, with their cumulative probabilities.
    pub rows: Vec<Vec<Entry>>,
    pub cumulative: Vec<Vec<f64>>,
}

impl OutcomeTable {
    pub fn build(alice: &AliceSourceModel, channel: &ChannelModel, receiver: &ReceiverModel) -> Result<Self> {
        alice.validate()?;
        receiver.validate()?;
        let components = components(channel, receiver, alice)?;
        let mut rows = Vec::with_capacity(alice.states.len());
        for a in &alice.states {
            let mut row = Vec::new();
            for c in &components {
                row.extend(component_entries(c, a, alice, receiver)?);
            }
            row.retain(|e| e.prob > NEGLIGIBLE);
            rows.push(row);
        }
        let cumulative = rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|e| {
                        acc += e.prob;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(OutcomeTable {
            alice: alice.states.clone(),
            settings: receiver.settings.iter().map(|s| (s.id.clone(), s.basis)).collect(),
            rows,
            cumulative,
        })
    }

    /// Index of the entry selected by a uniform draw `u` in `[0, 1)`.
    pub fn sample(&self, alice: usize, u: f64) -> usize {
        let cum = &self.cumulative[alice];
        let total = *cum.last().expect("every row has at least one entry");
        cum.partition_point(|c| *c <= u * total).min(cum.len() - 1)
    }
}

fn components<'a>(
    channel: &'a ChannelModel,
    receiver: &ReceiverModel,
    alice: &AliceSourceModel,
) -> Result<Vec<Component<'a>>> {
    Ok(match channel {
        ChannelModel::Identity => vec![Component::Direct { weight: 1.0, knowledge: Knowledge::Nothing }],
        ChannelModel::Lossy { loss } => vec![
            Component::Direct { weight: 1.0 - loss, knowledge: Knowledge::Nothing },
            Component::Vacuum { weight: *loss },
        ],
        ChannelModel::Pns { p_multi } => vec![
            Component::Direct { weight: *p_multi, knowledge: Knowledge::Bit },
            Component::Direct { weight: 1.0 - p_multi, knowledge: Knowledge::Coin },
        ],
        ChannelModel::AttackIsometry { components } => components
            .iter()
            .map(|c| {
                let states = eve_conditional_states(&c.attack, receiver, alice)?;
                Ok(Component::Attack { weight: c.weight, attack: &c.attack, povm: EvePovm::from_states(&states) })
            })
            .collect::<Result<_>>()?,
    })
}

fn guess_for(knowledge: Knowledge, a: &LogicalState) -> Option<f64> {
    match knowledge {
        Knowledge::Nothing => None,
        Knowledge::Coin => Some(0.5),
        Knowledge::Bit => Some(if a.bit == 0 { 1.0 } else { 0.0 }),
    }
}

/// The id and interpretation Bob records when nothing reaches a detector.
fn no_click(setting: &Setting) -> (String, Interpretation) {
    setting
        .outcomes
        .iter()
        .find(|o| o.state.len() == 1 && o.state.terms().all(|(b, _)| b.is_vacuum()))
        .and_then(|o| setting.sets.get(&o.id).map(|i| (o.id.clone(), i)))
        .unwrap_or_else(|| (NO_CLICK.to_string(), Interpretation::Loss))
}

/// Bob's outcome probabilities and Eve's guess probabilities for one
/// setting, without the loss remainder.
fn setting_entries(
    c: &Component,
    a: &LogicalState,
    physical: Option<&PhotonicState>,
    idx: usize,
    setting: &Setting,
) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    match c {
        Component::Direct { knowledge, .. } => {
            if let Some(psi) = physical {
                for (o, amp) in setting.outcomes.iter().zip(setting.outcome_amplitudes(psi)?) {
                    out.push(Entry {
                        setting: idx,
                        outcome: o.id.clone(),
                        interpretation: setting.interpret(&o.id)?,
                        prob: amp.norm_sqr(),
                        guess0: guess_for(*knowledge, a),
                    });
                }
            }
        }
        Component::Vacuum { .. } => {}
        Component::Attack { attack, povm, .. } => {
            for jo in joint_outcomes(attack, setting, &a.alpha)? {
                out.push(Entry {
                    setting: idx,
                    prob: jo.probability(),
                    guess0: Some(povm.prob_guess0(a.basis, &jo.eve)),
                    outcome: jo.outcome,
                    interpretation: jo.interpretation,
                });
            }
        }
    }
    Ok(out)
}

fn component_entries(
    c: &Component,
    a: &LogicalState,
    alice: &AliceSourceModel,
    receiver: &ReceiverModel,
) -> Result<Vec<Entry>> {
    let (weight, remainder_guess) = match c {
        Component::Direct { weight, knowledge } => (*weight, guess_for(*knowledge, a)),
        Component::Attack { weight, .. } => (*weight, Some(0.5)),
        Component::Vacuum { weight } => (*weight, None),
    };
    let physical = alice.physical(a);
    let n = receiver.settings.len() as f64;
    let mut entries = Vec::new();
    let loss = |idx: usize, s: &Setting, prob: f64| {
        let (outcome, interpretation) = no_click(s);
        Entry { setting: idx, outcome, interpretation, prob, guess0: remainder_guess }
    };
    if receiver.passive_choice {
        // One physical measurement: outcomes of all settings together, with
        // the basis registered from the outcome. On no click the registered
        // basis is uniform.
        let mut detected = 0.0;
        for (idx, s) in receiver.settings.iter().enumerate() {
            for mut e in setting_entries(c, a, physical.as_ref(), idx, s)? {
                detected += e.prob;
                e.prob *= weight;
                entries.push(e);
            }
        }
        let rest = (1.0 - detected).max(0.0);
        for (idx, s) in receiver.settings.iter().enumerate() {
            entries.push(loss(idx, s, weight * rest / n));
        }
    } else {
        for (idx, s) in receiver.settings.iter().enumerate() {
            let mut detected = 0.0;
            for mut e in setting_entries(c, a, physical.as_ref(), idx, s)? {
                detected += e.prob;
                e.prob *= weight / n;
                entries.push(e);
            }
            entries.push(loss(idx, s, weight * (1.0 - detected).max(0.0) / n));
        }
    }
    Ok(entries)
}
