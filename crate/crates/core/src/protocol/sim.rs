use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::log::{LogHeader, RoundRecord, SimulationReport, Tally, DEFAULT_TEST_FRACTION, SCHEMA_VERSION};
use super::table::{Entry, OutcomeTable};
use super::{make_channel, ChannelModel};
use crate::error::{Error, Result};
use crate::receivers::{AliceSourceModel, Basis, Interpretation, ReceiverModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub test_fraction: f64,
    /// Worker threads for unlogged runs; 0 picks the available parallelism.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { test_fraction: DEFAULT_TEST_FRACTION, threads: 0 }
    }
}

/// A channel and receiver reduced to exact per-round outcome tables.
pub struct Simulation {
    table: OutcomeTable,
    receiver: String,
    channel: String,
}

struct Round<'a> {
    alice: usize,
    index: usize,
    entry: &'a Entry,
    eve_guess: Option<u8>,
}

impl Simulation {
    pub fn new(alice: &AliceSourceModel, channel: &ChannelModel, receiver: &ReceiverModel) -> Result<Self> {
        let channel = make_channel(channel.clone(), receiver)?;
        Ok(Simulation {
            table: OutcomeTable::build(alice, &channel, receiver)?,
            receiver: receiver.name.clone(),
            channel: channel.name(),
        })
    }

    pub fn header(&self, rounds: u64, seed: u64, opts: &RunOptions) -> LogHeader {
        LogHeader {
            v: SCHEMA_VERSION,
            seed,
            rounds,
            receiver: self.receiver.clone(),
            channel: self.channel.clone(),
            test_fraction: opts.test_fraction,
        }
    }

    /// Round `round` drawn from its own stream of the seeded generator.
    fn round(&self, base: &ChaCha8Rng, round: u64) -> Round<'_> {
        let mut rng = base.clone();
        rng.set_stream(round);
        let alice = rng.random_range(0..self.table.alice.len());
        let index = self.table.sample(alice, rng.random::<f64>());
        let entry = &self.table.rows[alice][index];
        let eve_guess = entry.guess0.map(|p| if rng.random::<f64>() < p { 0 } else { 1 });
        Round { alice, index, entry, eve_guess }
    }

    fn record(&self, round: u64, r: &Round) -> RoundRecord {
        let a = &self.table.alice[r.alice];
        let (setting, basis) = &self.table.settings[r.entry.setting];
        RoundRecord {
            v: SCHEMA_VERSION,
            round,
            alice_basis: a.basis,
            alice_bit: a.bit,
            bob_setting: setting.clone(),
            bob_basis: *basis,
            outcome_id: r.entry.outcome.clone(),
            interpretation: r.entry.interpretation,
            eve_guess: r.eve_guess,
        }
    }

    fn check(rounds: u64, opts: &RunOptions) -> Result<()> {
        if rounds == 0 {
            return Err(Error::MalformedParams("rounds must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&opts.test_fraction) {
            return Err(Error::MalformedParams(format!(
                "test fraction must lie in [0, 1] (got {})",
                opts.test_fraction
            )));
        }
        Ok(())
    }

    fn tally_range(&self, base: &ChaCha8Rng, seed: u64, opts: &RunOptions, range: std::ops::Range<u64>) -> Tally {
        let mut tally = Tally::new(seed, opts.test_fraction);
        let mut counts: Vec<Vec<u64>> = self.table.rows.iter().map(|r| vec![0; r.len()]).collect();
        for round in range {
            let r = self.round(base, round);
            let a = &self.table.alice[r.alice];
            let basis = self.table.settings[r.entry.setting].1;
            tally.add_round(round, a.basis, a.bit, basis, r.entry.interpretation, r.eve_guess);
            counts[r.alice][r.index] += 1;
        }
        for (ai, row) in counts.iter().enumerate() {
            let a = &self.table.alice[ai];
            for (ei, n) in row.iter().enumerate().filter(|(_, n)| **n > 0) {
                let e = &self.table.rows[ai][ei];
                tally.add_outcomes(a.basis, a.bit, &self.table.settings[e.setting].0, &e.outcome, *n);
            }
        }
        tally
    }

    /// Runs `rounds` rounds, splitting them over worker threads. The report
    /// does not depend on the split.
    pub fn run(&self, rounds: u64, seed: u64, opts: &RunOptions) -> Result<SimulationReport> {
        Self::check(rounds, opts)?;
        let base = ChaCha8Rng::seed_from_u64(seed);
        let threads = match opts.threads {
            0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            n => n,
        }
        .min(rounds.div_ceil(10_000).max(1) as usize);
        let chunk = rounds.div_ceil(threads as u64);
        let tallies: Vec<Tally> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads as u64)
                .map(|t| {
                    let (base, range) = (&base, (t * chunk).min(rounds)..((t + 1) * chunk).min(rounds));
                    scope.spawn(move || self.tally_range(base, seed, opts, range))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("simulation worker panicked")).collect()
        });
        let mut total = Tally::new(seed, opts.test_fraction);
        for t in tallies {
            total.merge(t);
        }
        Ok(total.report(&self.receiver, &self.channel))
    }

    /// Sequential run that hands every round record to `sink`.
    pub fn run_logged<F>(&self, rounds: u64, seed: u64, opts: &RunOptions, mut sink: F) -> Result<SimulationReport>
    where
        F: FnMut(RoundRecord) -> Result<()>,
    {
        Self::check(rounds, opts)?;
        let base = ChaCha8Rng::seed_from_u64(seed);
        let mut tally = Tally::new(seed, opts.test_fraction);
        for round in 0..rounds {
            let rec = self.record(round, &self.round(&base, round));
            tally.add(&rec);
            sink(rec)?;
        }
        Ok(tally.report(&self.receiver, &self.channel))
    }

    /// Exact expectations of the quantities the Monte-Carlo run estimates.
    pub fn exact(&self) -> ExactStatistics {
        let t = &self.table;
        let prior = 1.0 / t.alice.len() as f64;
        let mut per_basis = BTreeMap::new();
        let (mut eve_num, mut eve_den, mut has_eve) = (0.0, 0.0, false);
        let mut outcomes: BTreeMap<(Basis, u8, String, String), f64> = BTreeMap::new();
        let mut acc: BTreeMap<Basis, [f64; 5]> = BTreeMap::new();
        for (a, row) in t.alice.iter().zip(&t.rows) {
            for e in row {
                let (setting, basis) = &t.settings[e.setting];
                *outcomes.entry((a.basis, a.bit, setting.clone(), e.outcome.clone())).or_default() += prior * e.prob;
                has_eve |= e.guess0.is_some();
                if *basis != a.basis {
                    continue;
                }
                // matched, valid, invalid, loss, errors
                let c = acc.entry(a.basis).or_insert([0.0; 5]);
                c[0] += e.prob;
                match e.interpretation {
                    Interpretation::Loss => c[3] += e.prob,
                    Interpretation::Invalid => {
                        c[2] += e.prob;
                        c[4] += e.prob;
                    }
                    Interpretation::Bit0 | Interpretation::Bit1 => {
                        c[1] += e.prob;
                        if e.interpretation.bit() != Some(a.bit) {
                            c[4] += e.prob;
                        }
                        if let Some(g0) = e.guess0 {
                            eve_den += e.prob;
                            eve_num += e.prob * if a.bit == 0 { g0 } else { 1.0 - g0 };
                        }
                    }
                }
            }
        }
        let ratio = |a: f64, b: f64| if b <= 0.0 { 0.0 } else { a / b };
        for (b, c) in acc {
            per_basis.insert(
                b,
                ExactBasis {
                    detection_efficiency: ratio(c[1], c[0]),
                    invalid_rate: ratio(c[2], c[0]),
                    loss_rate: ratio(c[3], c[0]),
                    qber: ratio(c[4], c[1] + c[2]),
                },
            );
        }
        ExactStatistics {
            per_basis,
            eve_guess_accuracy: has_eve.then(|| ratio(eve_num, eve_den)),
            outcomes: outcomes
                .into_iter()
                .map(|((alice_basis, alice_bit, bob_setting, outcome_id), probability)| OutcomeProbability {
                    alice_basis,
                    alice_bit,
                    bob_setting,
                    outcome_id,
                    probability,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactBasis {
    pub detection_efficiency: f64,
    pub loss_rate: f64,
    pub invalid_rate: f64,
    pub qber: f64,
}

/// Joint probability of (Alice state, Bob setting, outcome) in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeProbability {
    pub alice_basis: Basis,
    pub alice_bit: u8,
    pub bob_setting: String,
    pub outcome_id: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactStatistics {
    pub per_basis: BTreeMap<Basis, ExactBasis>,
    pub eve_guess_accuracy: Option<f64>,
    pub outcomes: Vec<OutcomeProbability>,
}

impl ExactStatistics {
    pub fn probability(&self, alice_basis: Basis, alice_bit: u8, setting: &str, outcome: &str) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| {
                o.alice_basis == alice_basis && o.alice_bit == alice_bit && o.bob_setting == setting && o.outcome_id == outcome
            })
            .map(|o| o.probability)
            .sum()
    }
}

/// Monte-Carlo BB84 session with default options.
pub fn run_bb84(
    alice: &AliceSourceModel,
    channel: &ChannelModel,
    receiver: &ReceiverModel,
    rounds: u64,
    seed: u64,
) -> Result<SimulationReport> {
    Simulation::new(alice, channel, receiver)?.run(rounds, seed, &RunOptions::default())
}

pub fn exact_statistics(
    alice: &AliceSourceModel,
    channel: &ChannelModel,
    receiver: &ReceiverModel,
) -> Result<ExactStatistics> {
    Ok(Simulation::new(alice, channel, receiver)?.exact())
}
