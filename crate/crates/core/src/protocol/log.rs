//! Round records, their newline-delimited JSON log and the streaming tally
//! that turns rounds into a [`SimulationReport`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receivers::{Basis, Interpretation};

/// Version of the round-log and report documents.
pub const SCHEMA_VERSION: u32 = 1;

/// Fraction of sifted bits publicly compared to estimate the QBER.
pub const DEFAULT_TEST_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub v: u32,
    pub seed: u64,
    pub rounds: u64,
    pub receiver: String,
    pub channel: String,
    pub test_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub v: u32,
    pub round: u64,
    pub alice_basis: Basis,
    pub alice_bit: u8,
    pub bob_setting: String,
    pub bob_basis: Basis,
    pub outcome_id: String,
    pub interpretation: Interpretation,
    pub eve_guess: Option<u8>,
}

/// One line of a round log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogLine {
    Header(LogHeader),
    Round(RoundRecord),
}

/// Writes a header line followed by one line per record.
pub fn write_log<W: Write>(mut w: W, header: &LogHeader, records: &[RoundRecord]) -> Result<()> {
    serde_json::to_writer(&mut w, &LogLine::Header(header.clone()))?;
    writeln!(w)?;
    for r in records {
        serde_json::to_writer(&mut w, &LogLine::Round(r.clone()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// Parses a round log. The first non-empty line must be the header.
pub fn read_log<R: BufRead>(r: R) -> Result<(LogHeader, Vec<RoundRecord>)> {
    let mut header = None;
    let mut records = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogLine>(&line)? {
            LogLine::Header(h) if header.is_none() && records.is_empty() => {
                if h.v != SCHEMA_VERSION {
                    return Err(Error::Schema(format!("round log version {} (expected {SCHEMA_VERSION})", h.v)));
                }
                header = Some(h);
            }
            LogLine::Header(_) => return Err(Error::Schema(format!("unexpected header on line {}", n + 1))),
            LogLine::Round(rec) => {
                if header.is_none() {
                    return Err(Error::Schema("round log does not start with a header".into()));
                }
                records.push(rec);
            }
        }
    }
    let header = header.ok_or(Error::EmptyLog)?;
    Ok((header, records))
}

/// Whether a sifted round belongs to the publicly compared test subset.
/// The decision is a hash of (seed, round), so it is reproducible from a
/// log alone.
pub fn in_test_subset(seed: u64, round: u64, fraction: f64) -> bool {
    let mut z = seed ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ((z >> 11) as f64 / (1u64 << 53) as f64) < fraction
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct BasisCounts {
    matched: u64,
    valid: u64,
    bit_errors: u64,
    invalid: u64,
    losses: u64,
    test_bits: u64,
    test_errors: u64,
}

/// Streaming aggregation of rounds. Merging tallies is order-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct Tally {
    seed: u64,
    test_fraction: f64,
    rounds: u64,
    invalid: u64,
    per_basis: BTreeMap<Basis, BasisCounts>,
    eve_bits: u64,
    eve_correct: u64,
    has_eve: bool,
    outcomes: BTreeMap<(Basis, u8, String, String), u64>,
}

impl Tally {
    pub fn new(seed: u64, test_fraction: f64) -> Self {
        Tally {
            seed,
            test_fraction,
            rounds: 0,
            invalid: 0,
            per_basis: BTreeMap::new(),
            eve_bits: 0,
            eve_correct: 0,
            has_eve: false,
            outcomes: BTreeMap::new(),
        }
    }

    /// Adds a round without touching the outcome histogram.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn add_round(
        &mut self,
        round: u64,
        alice_basis: Basis,
        alice_bit: u8,
        bob_basis: Basis,
        interpretation: Interpretation,
        eve_guess: Option<u8>,
    ) {
        self.rounds += 1;
        self.has_eve |= eve_guess.is_some();
        if interpretation == Interpretation::Invalid {
            self.invalid += 1;
        }
        if alice_basis != bob_basis {
            return;
        }
        let c = self.per_basis.entry(alice_basis).or_default();
        c.matched += 1;
        let error = match interpretation {
            Interpretation::Loss => {
                c.losses += 1;
                return;
            }
            Interpretation::Invalid => {
                c.invalid += 1;
                true
            }
            Interpretation::Bit0 | Interpretation::Bit1 => {
                c.valid += 1;
                let wrong = interpretation.bit() != Some(alice_bit);
                if wrong {
                    c.bit_errors += 1;
                }
                if let Some(g) = eve_guess {
                    self.eve_bits += 1;
                    if g == alice_bit {
                        self.eve_correct += 1;
                    }
                }
                wrong
            }
        };
        if in_test_subset(self.seed, round, self.test_fraction) {
            c.test_bits += 1;
            if error {
                c.test_errors += 1;
            }
        }
    }

    pub(crate) fn add_outcomes(&mut self, alice_basis: Basis, alice_bit: u8, setting: &str, outcome: &str, n: u64) {
        *self
            .outcomes
            .entry((alice_basis, alice_bit, setting.to_string(), outcome.to_string()))
            .or_default() += n;
    }

    pub fn add(&mut self, r: &RoundRecord) {
        self.add_round(r.round, r.alice_basis, r.alice_bit, r.bob_basis, r.interpretation, r.eve_guess);
        self.add_outcomes(r.alice_basis, r.alice_bit, &r.bob_setting, &r.outcome_id, 1);
    }

    pub fn merge(&mut self, other: Tally) {
        self.rounds += other.rounds;
        self.invalid += other.invalid;
        self.eve_bits += other.eve_bits;
        self.eve_correct += other.eve_correct;
        self.has_eve |= other.has_eve;
        for (b, o) in other.per_basis {
            let c = self.per_basis.entry(b).or_default();
            c.matched += o.matched;
            c.valid += o.valid;
            c.bit_errors += o.bit_errors;
            c.invalid += o.invalid;
            c.losses += o.losses;
            c.test_bits += o.test_bits;
            c.test_errors += o.test_errors;
        }
        for (k, n) in other.outcomes {
            *self.outcomes.entry(k).or_default() += n;
        }
    }

    pub fn report(&self, receiver: &str, channel: &str) -> SimulationReport {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_basis: BTreeMap<Basis, BasisReport> = self
            .per_basis
            .iter()
            .map(|(b, c)| {
                let sifted = c.valid + c.invalid;
                let errors = c.bit_errors + c.invalid;
                (
                    *b,
                    BasisReport {
                        matched_rounds: c.matched,
                        sifted,
                        valid: c.valid,
                        errors,
                        invalid: c.invalid,
                        losses: c.losses,
                        qber: ratio(errors, sifted),
                        detection_efficiency: ratio(c.valid, c.matched),
                        loss_rate: ratio(c.losses, c.matched),
                        invalid_rate: ratio(c.invalid, c.matched),
                    },
                )
            })
            .collect();
        let sifted: u64 = per_basis.values().map(|b| b.sifted).sum();
        let errors: u64 = per_basis.values().map(|b| b.errors).sum();
        let test_bits: u64 = self.per_basis.values().map(|c| c.test_bits).sum();
        let test_errors: u64 = self.per_basis.values().map(|c| c.test_errors).sum();
        SimulationReport {
            v: SCHEMA_VERSION,
            rounds: self.rounds,
            seed: self.seed,
            receiver: receiver.to_string(),
            channel: channel.to_string(),
            per_basis,
            sifted,
            errors,
            qber: ratio(errors, sifted),
            invalid_rate: ratio(self.invalid, self.rounds),
            qber_estimate: QberEstimate {
                test_fraction: self.test_fraction,
                test_bits,
                errors: test_errors,
                estimate: ratio(test_errors, test_bits),
            },
            eve_guessed_bits: self.eve_bits,
            eve_guess_accuracy: self.has_eve.then(|| ratio(self.eve_correct, self.eve_bits)),
            outcome_counts: self
                .outcomes
                .iter()
                .map(|((b, bit, s, o), n)| OutcomeCount {
                    alice_basis: *b,
                    alice_bit: *bit,
                    bob_setting: s.clone(),
                    outcome_id: o.clone(),
                    count: *n,
                })
                .collect(),
        }
    }
}

/// Statistics of rounds where Alice and Bob used the same basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisReport {
    pub matched_rounds: u64,
    /// Matched rounds that produced a bit or an invalid event.
    pub sifted: u64,
    pub valid: u64,
    /// Wrong bits plus invalid events.
    pub errors: u64,
    pub invalid: u64,
    pub losses: u64,
    pub qber: f64,
    pub detection_efficiency: f64,
    pub loss_rate: f64,
    pub invalid_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QberEstimate {
    pub test_fraction: f64,
    pub test_bits: u64,
    pub errors: u64,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeCount {
    pub alice_basis: Basis,
    pub alice_bit: u8,
    pub bob_setting: String,
    pub outcome_id: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationReport {
    pub v: u32,
    pub rounds: u64,
    pub seed: u64,
    pub receiver: String,
    pub channel: String,
    pub per_basis: BTreeMap<Basis, BasisReport>,
    pub sifted: u64,
    pub errors: u64,
    pub qber: f64,
    /// Invalid events over all rounds.
    pub invalid_rate: f64,
    pub qber_estimate: QberEstimate,
    pub eve_guessed_bits: u64,
    /// Fraction of sifted bits Eve predicts after the basis reveal; absent
    /// without an eavesdropper.
    pub eve_guess_accuracy: Option<f64>,
    pub outcome_counts: Vec<OutcomeCount>,
}

impl SimulationReport {
    pub fn basis(&self, b: Basis) -> Option<&BasisReport> {
        self.per_basis.get(&b)
    }
}

/// Recomputes the report from a persisted round log.
pub fn sift_and_estimate(header: &LogHeader, records: &[RoundRecord], test_fraction: f64) -> Result<SimulationReport> {
    if records.is_empty() {
        return Err(Error::EmptyLog);
    }
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::MalformedParams(format!("test fraction must lie in [0, 1] (got {test_fraction})")));
    }
    let mut tally = Tally::new(header.seed, test_fraction);
    for r in records {
        tally.add(r);
    }
    Ok(tally.report(&header.receiver, &header.channel))
}
