//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::time::{Duration, Instant};

use qkdlab::attacks::{
    build_constraint_system, eve_conditional_states, eve_guess_probability, literal, synthesize_attacks,
    verify_oblivious, AttackIsometry,
};
use qkdlab::classify::{classify, registry, AttackClass, FamilyTag, ReadSpace, SpaceFootprint};
use qkdlab::fockspace::{
    apply_beam_splitter, inner_product, FockBasisState, InterferometerConfig, ModeLabel, Optics, PhotonicState,
};
use qkdlab::fuzz::{
    derived_detections, make_apd_receiver_device, probe, run_fuzz_campaign, AnomalyTag, ApdParams, BlackBoxDevice,
    FuzzInput, Pulse, StrategyConfig,
};
use qkdlab::protocol::{ChannelModel, RunOptions, Simulation, SimulationReport};
use qkdlab::receivers::{
    ideal_alice, make_receiver, AliceSourceModel, Basis, Polarization, ReceiverKind, ReceiverModel, ReceiverParams,
};
use qkdlab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn setup(kind: ReceiverKind) -> (ReceiverModel, AliceSourceModel) {
    (make_receiver(kind, &ReceiverParams::default()).unwrap(), ideal_alice(kind))
}

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn run(alice: &AliceSourceModel, channel: &ChannelModel, receiver: &ReceiverModel, rounds: u64, seed: u64) -> SimulationReport {
    Simulation::new(alice, channel, receiver).unwrap().run(rounds, seed, &RunOptions::default()).unwrap()
}

fn singles(terms: &[(ModeLabel, C64)]) -> PhotonicState {
    PhotonicState::from_single_photons(terms.iter().cloned())
}

/// Single-photon evolutions through the symmetric beam splitter and the
/// time-bin Mach-Zehnder at phase 0, against hand-written tables.
fn optics_fidelity() -> Outcome {
    const TOL: f64 = 1e-12;
    let (a, b) = (ModeLabel::custom("in", 1), ModeLabel::custom("in", 2));
    let (o3, o4) = (ModeLabel::custom("out", 3), ModeLabel::custom("out", 4));
    let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
    let input = singles(&[(a.clone(), alpha), (b.clone(), beta)]);
    let out = apply_beam_splitter(&input, (&a, &b), (&o3, &o4)).map_err(|e| e.to_string())?;
    let i = c(0.0, 1.0);
    let expected =
        singles(&[(o3.clone(), (alpha + i * beta) * FRAC_1_SQRT_2), (o4.clone(), (i * alpha + beta) * FRAC_1_SQRT_2)]);
    ensure(out.approx_eq(&expected, TOL), format!("beam splitter: {out}"))?;

    let mz = InterferometerConfig::with_phase(0.0);
    let optics = Optics::default();
    let (s, d) = (ModeLabel::straight, ModeLabel::down);
    let h = 0.5;
    let t0 = optics.mz_transform(&PhotonicState::single(ModeLabel::chan(0)), &mz).map_err(|e| e.to_string())?;
    let t0_expected = singles(&[(s(0), c(h, 0.0)), (s(1), c(-h, 0.0)), (d(0), c(0.0, h)), (d(1), c(0.0, h))]);
    ensure(t0.approx_eq(&t0_expected, TOL), format!("|t'_0>: {t0}"))?;
    let t1 = optics.mz_transform(&PhotonicState::single(ModeLabel::chan(1)), &mz).map_err(|e| e.to_string())?;
    let t1_expected = singles(&[(s(1), c(h, 0.0)), (s(2), c(-h, 0.0)), (d(1), c(0.0, h)), (d(2), c(0.0, h))]);
    ensure(t1.approx_eq(&t1_expected, TOL), format!("|t'_1>: {t1}"))?;

    let r8 = 1.0 / 8f64.sqrt();
    let plus_in = singles(&[(ModeLabel::chan(0), c(FRAC_1_SQRT_2, 0.0)), (ModeLabel::chan(1), c(FRAC_1_SQRT_2, 0.0))]);
    let minus_in =
        singles(&[(ModeLabel::chan(0), c(FRAC_1_SQRT_2, 0.0)), (ModeLabel::chan(1), c(-FRAC_1_SQRT_2, 0.0))]);
    let plus = optics.mz_transform(&plus_in, &mz).map_err(|e| e.to_string())?;
    let plus_expected =
        singles(&[(s(0), c(r8, 0.0)), (s(2), c(-r8, 0.0)), (d(0), c(0.0, r8)), (d(1), c(0.0, 2.0 * r8)), (d(2), c(0.0, r8))]);
    ensure(plus.approx_eq(&plus_expected, TOL), format!("|+>: {plus}"))?;
    let minus = optics.mz_transform(&minus_in, &mz).map_err(|e| e.to_string())?;
    let minus_expected =
        singles(&[(s(0), c(r8, 0.0)), (s(1), c(-2.0 * r8, 0.0)), (s(2), c(r8, 0.0)), (d(0), c(0.0, r8)), (d(2), c(0.0, -r8))]);
    ensure(minus.approx_eq(&minus_expected, TOL), format!("|->: {minus}"))?;

    // U^dag |s_t> = (-a_{t-1} - i b_{t-1} + a_t - i b_t)/2 and
    // U^dag |d_t> = (-i a_{t-1} + b_{t-1} - i a_t - b_t)/2 at phase 0.
    let (ch, bl) = (ModeLabel::chan, ModeLabel::blocked);
    let st = optics.mz_reverse(&PhotonicState::single(s(1)), &mz).map_err(|e| e.to_string())?;
    let st_expected = singles(&[(ch(0), c(-h, 0.0)), (bl(0), c(0.0, -h)), (ch(1), c(h, 0.0)), (bl(1), c(0.0, -h))]);
    ensure(st.approx_eq(&st_expected, TOL), format!("U^dag|s_1>: {st}"))?;
    let dt = optics.mz_reverse(&PhotonicState::single(d(1)), &mz).map_err(|e| e.to_string())?;
    let dt_expected = singles(&[(ch(0), c(0.0, -h)), (bl(0), c(h, 0.0)), (ch(1), c(0.0, -h)), (bl(1), c(-h, 0.0))]);
    ensure(dt.approx_eq(&dt_expected, TOL), format!("U^dag|d_1>: {dt}"))?;
    Ok("five evolutions match within 1e-12".into())
}

fn reversed_space_dimensions() -> Outcome {
    let mut dims = Vec::new();
    for (kind, expected) in [
        (ReceiverKind::Interferometric6Mode, 5),
        (ReceiverKind::InterferometricDefended10Mode, 7),
        (ReceiverKind::Interferometric2Mode, 3),
    ] {
        let hp = make_receiver(kind, &ReceiverParams::default()).unwrap().reversed_space().map_err(|e| e.to_string())?;
        ensure(hp.len() == expected, format!("{}: dim {} != {expected}", kind.name(), hp.len()))?;
        dims.push(format!("{}={}", kind.name(), hp.len()));
    }
    // The six-mode span is exactly {V, t'_-1 .. t'_2}.
    let hp = make_receiver(ReceiverKind::Interferometric6Mode, &ReceiverParams::default()).unwrap().reversed_space().unwrap();
    let mut span = vec![PhotonicState::vacuum()];
    span.extend((-1..=2).map(|t| PhotonicState::single(ModeLabel::chan(t))));
    for q in &span {
        let inside: f64 = hp.iter().map(|p| inner_product(p, q).norm_sqr()).sum();
        ensure((inside - 1.0).abs() < 1e-9, format!("{q} not in H^P"))?;
    }
    Ok(dims.join(", "))
}

fn faked_states_reproduction() -> Outcome {
    let (r, a) = setup(ReceiverKind::Interferometric6Mode);
    let system = build_constraint_system(&r, &a).map_err(|e| e.to_string())?;
    let family = synthesize_attacks(&system, None).map_err(|e| e.to_string())?;
    let faked = literal::faked_states();
    let membership = family.membership_residual(&faked).map_err(|e| e.to_string())?;
    ensure(membership < 1e-9, format!("faked states not in family (residual {membership:e})"))?;
    let report = verify_oblivious(&faked, &r, &a).map_err(|e| e.to_string())?;
    ensure(report.passed() && report.max_error_amplitude == 0.0, format!("verify: {}", report.max_error_amplitude))?;
    let rounds = 100_000;
    let rep = run(&a, &ChannelModel::attack(faked), &r, rounds, 1);
    ensure(rep.qber == 0.0 && rep.errors == 0, format!("QBER {}", rep.qber))?;
    let had = rep.basis(Basis::Hadamard).ok_or("no Hadamard rounds")?;
    ensure(had.detection_efficiency == 0.0, format!("Hadamard efficiency {}", had.detection_efficiency))?;
    let comp = rep.basis(Basis::Computational).ok_or("no computational rounds")?;
    let tol = 4.0 * sigma(0.5, comp.matched_rounds);
    ensure((comp.detection_efficiency - 0.5).abs() < tol, format!("comp efficiency {}", comp.detection_efficiency))?;
    ensure(rep.eve_guess_accuracy == Some(1.0), format!("Eve accuracy {:?}", rep.eve_guess_accuracy))?;
    Ok(format!(
        "QBER=0, eff comp={:.4} had=0, Eve accuracy 1 over {} bits",
        comp.detection_efficiency, rep.eve_guessed_bits
    ))
}

/// `eps[i][j]`: Eve's vector attached to Alice's physical state `j` when
/// she sends basis state `i`, plus the norm outside Alice's qubit space.
fn alice_coefficients(attack: &AttackIsometry, qubit: &[PhotonicState; 2]) -> ([[Vec<C64>; 2]; 2], f64) {
    let zero = || vec![c(0.0, 0.0); attack.eve_dim];
    let mut eps = [[zero(), zero()], [zero(), zero()]];
    let mut outside: f64 = 0.0;
    for (i, row) in attack.coefficients.iter().enumerate() {
        let mut kept = 0.0;
        for (j, phys) in qubit.iter().enumerate() {
            for (k, p) in attack.p_basis.iter().enumerate() {
                let overlap = inner_product(phys, p);
                for (e, v) in row[k].iter().enumerate() {
                    eps[i][j][e] += overlap * v;
                }
            }
            kept += eps[i][j].iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
        let total: f64 = row.iter().flat_map(|v| v.iter()).map(|x| x.norm_sqr()).sum();
        outside = outside.max((total - kept).abs());
    }
    (eps, outside)
}

fn defended_reproduction() -> Outcome {
    let (r, a) = setup(ReceiverKind::InterferometricDefended10Mode);
    let system = build_constraint_system(&r, &a).map_err(|e| e.to_string())?;
    let family = synthesize_attacks(&system, None).map_err(|e| e.to_string())?;
    ensure(family.trivial, "family is not trivial")?;
    let qubit = a.qubit.clone().ok_or("time-bin Alice has a physical qubit")?;
    let members = family.sample_members(50, 4);
    ensure(!members.is_empty(), "no members")?;
    for m in &members {
        let guess = eve_guess_probability(&eve_conditional_states(m, &r, &a).map_err(|e| e.to_string())?);
        for b in [Basis::Computational, Basis::Hadamard] {
            ensure((guess[&b] - 0.5).abs() < 1e-9, format!("{}: guess {b:?} = {}", m.name, guess[&b]))?;
        }
        let (eps, outside) = alice_coefficients(m, &qubit);
        let diff = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let norm = |x: &[C64]| x.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt();
        ensure(outside < 1e-9, format!("{}: norm outside Alice's space {outside:e}", m.name))?;
        ensure(norm(&eps[0][1]) < 1e-9 && norm(&eps[1][0]) < 1e-9, "off-diagonal coefficients")?;
        ensure(diff(&eps[0][0], &eps[1][1]) < 1e-9, "diagonal Eve vectors differ")?;
        ensure((norm(&eps[0][0]) - 1.0).abs() < 1e-9, "diagonal Eve vector not normalized")?;
    }
    Ok(format!("trivial family; {} members act as identity, guess 0.5", members.len()))
}

fn four_mode_reproduction() -> Outcome {
    let (r, a) = setup(ReceiverKind::Interferometric4Mode);
    let m = literal::four_mode_member([0.5; 4], true).map_err(|e| e.to_string())?;
    let [p1, p2, p3, p4] = [0.5f64; 4];
    let n0 = p1 * p1 + p2 * p2 + 2.0 * p3 * p3;
    let n1 = p4 * p4 + p2 * p2 + 2.0 * p3 * p3;
    ensure((n0 - 1.0).abs() < 1e-9 && (n1 - 1.0).abs() < 1e-9, "normalization conditions")?;
    ensure(m.isometry_residual() < 1e-9, format!("Gram residual {}", m.isometry_residual()))?;
    ensure(literal::four_mode_member([0.5, 0.5, 0.5, 0.6], true).is_err(), "denormalized member accepted")?;
    let system = build_constraint_system(&r, &a).map_err(|e| e.to_string())?;
    let family = synthesize_attacks(&system, None).map_err(|e| e.to_string())?;
    ensure(family.membership_residual(&m).map_err(|e| e.to_string())? < 1e-9, "member outside family")?;
    let rounds = 1_000_000;
    let rep = run(&a, &ChannelModel::attack(m), &r, rounds, 2);
    ensure(rep.qber == 0.0, format!("QBER {}", rep.qber))?;
    let mut effs = BTreeMap::new();
    for (b, p) in [(Basis::Computational, 0.125), (Basis::Hadamard, 0.25)] {
        let br = rep.basis(b).ok_or("missing basis")?;
        let tol = 4.0 * sigma(p, br.matched_rounds);
        ensure((br.detection_efficiency - p).abs() < tol, format!("{b:?} efficiency {}", br.detection_efficiency))?;
        effs.insert(b, br.detection_efficiency);
    }
    ensure(rep.eve_guess_accuracy == Some(1.0), format!("Eve accuracy {:?}", rep.eve_guess_accuracy))?;
    Ok(format!(
        "QBER=0, eff comp={:.4} had={:.4}, Eve accuracy 1",
        effs[&Basis::Computational],
        effs[&Basis::Hadamard]
    ))
}

fn bright_reproduction() -> Outcome {
    let (r, a) = setup(ReceiverKind::BlindedBright);
    let system = build_constraint_system(&r, &a).map_err(|e| e.to_string())?;
    let family = synthesize_attacks(&system, None).map_err(|e| e.to_string())?;
    ensure(family.vertices.len() == 2, format!("{} vertices", family.vertices.len()))?;
    let norm = |v: &[C64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let members = family.sample_members(200, 6);
    ensure(members.len() == 200, "fewer than 200 members")?;
    for m in &members {
        let (p, q) = (norm(&m.coefficients[0][0]), norm(&m.coefficients[0][2]));
        ensure((p * p + 2.0 * q * q - 1.0).abs() < 1e-9, format!("p^2 + 2q^2 = {}", p * p + 2.0 * q * q))?;
        ensure(verify_oblivious(m, &r, &a).map_err(|e| e.to_string())?.passed(), "member not oblivious")?;
    }
    // p = 1 copies the computational bit onto bright computational states;
    // p = 0 copies the Hadamard bit onto bright Hadamard states.
    for (p, q, basis) in [(1.0, 0.0, Basis::Computational), (0.0, FRAC_1_SQRT_2, Basis::Hadamard)] {
        let m = literal::bright_member(&r, p, q).map_err(|e| e.to_string())?;
        ensure(family.membership_residual(&m).map_err(|e| e.to_string())? < 1e-9, "endpoint outside family")?;
        let guess = eve_guess_probability(&eve_conditional_states(&m, &r, &a).map_err(|e| e.to_string())?);
        ensure((guess[&basis] - 1.0).abs() < 1e-9, format!("p={p}: guess {basis:?} {}", guess[&basis]))?;
        let used: Vec<usize> = (0..4).filter(|k| norm(&m.coefficients[0][*k]) + norm(&m.coefficients[1][*k]) > 0.0).collect();
        let expected = if p == 1.0 { vec![0, 1] } else { vec![2, 3] };
        ensure(used == expected, format!("p={p}: channel states {used:?}"))?;
    }
    Ok("two-parameter family, 200 members satisfy p^2+2q^2=1, CNOT endpoints".into())
}

fn fuzzing_discovery() -> Outcome {
    let reference = make_receiver(ReceiverKind::BlindedBright, &ReceiverParams::default()).unwrap();
    let mut worst = 0;
    for seed in 0..10 {
        let mut device = make_apd_receiver_device(ApdParams::default()).map_err(|e| e.to_string())?;
        let report = run_fuzz_campaign(&mut device, &StrategyConfig::default(), seed).map_err(|e| e.to_string())?;
        ensure(report.test_cases_run <= 10_000, "budget exceeded")?;
        for tag in [AnomalyTag::Blinding, AnomalyTag::WeakUnderBlinding, AnomalyTag::StrongUnderBlinding] {
            ensure(report.properties_found.contains(&tag), format!("seed {seed}: {tag:?} not found"))?;
        }
        let first_strong = report
            .anomalies
            .iter()
            .filter(|a| a.tag == AnomalyTag::StrongUnderBlinding)
            .map(|a| a.first_case + u64::from(a.repeats))
            .min()
            .unwrap_or(0);
        worst = worst.max(first_strong);
        let detections = derived_detections(&report.derived_vulnerabilities);
        let derived = make_receiver(
            ReceiverKind::BlindedBright,
            &ReceiverParams { detections: Some(detections), ..ReceiverParams::default() },
        )
        .map_err(|e| e.to_string())?;
        ensure(derived.settings.len() == reference.settings.len(), "setting count")?;
        for (x, y) in derived.settings.iter().zip(&reference.settings) {
            ensure(x.sets == y.sets, format!("seed {seed}: interpretation sets differ in '{}'", x.id))?;
        }
    }
    Ok(format!("all three properties for seeds 0..9 (all found by case {worst}); derived receiver matches"))
}

fn non_oblivious_detection() -> Outcome {
    let (r, a) = setup(ReceiverKind::IdealBb84);
    let cnot = literal::cnot(Basis::Computational).map_err(|e| e.to_string())?;
    let report = verify_oblivious(&cnot, &r, &a).map_err(|e| e.to_string())?;
    ensure(!report.oblivious, "CNOT reported oblivious")?;
    let row = report
        .per_row_residuals
        .iter()
        .find(|x| x.alice == "+" && x.setting == "hadamard" && x.outcome == "v1")
        .ok_or("no (+, hadamard, v1) row")?;
    ensure(row.residual > 1e-3, format!("residual {}", row.residual))?;
    let channel = ChannelModel::attack_mixture(vec![
        (0.5, cnot),
        (0.5, literal::cnot(Basis::Hadamard).map_err(|e| e.to_string())?),
    ]);
    let rep = run(&a, &channel, &r, 100_000, 3);
    let had = rep.basis(Basis::Hadamard).ok_or("no Hadamard rounds")?;
    let tol = 3.0 * sigma(0.25, had.sifted);
    ensure((had.qber - 0.25).abs() < tol, format!("Hadamard QBER {}", had.qber))?;
    Ok(format!("residual {:.4} on (+, hadamard, v1); Hadamard QBER {:.4}", row.residual, had.qber))
}

fn classifier() -> Outcome {
    let records = registry();
    ensure(records.len() >= 8, "registry too small")?;
    for r in &records {
        ensure(classify(&r.footprint) == r.expected_class, format!("{} misclassified", r.id))?;
        if r.families.contains(&FamilyTag::FakedStates) {
            ensure(r.families.contains(&FamilyTag::ReversedSpace), format!("{}: faked-states without reversed-space", r.id))?;
        }
    }
    let expect = [
        ("pns", AttackClass::StateChannel),
        ("time-shift", AttackClass::StateChannel),
        ("trojan-pony", AttackClass::StateChannel),
        ("imperfect-faraday-mirror", AttackClass::StateChannel),
        ("large-pulse-alice", AttackClass::SideChannel),
        ("large-pulse-bob", AttackClass::SideChannel),
        ("injection-locking", AttackClass::SideChannel),
        ("bright-illumination", AttackClass::SideChannel),
        ("camera-in-lab", AttackClass::Neither),
    ];
    for (id, class) in expect {
        let r = records.iter().find(|r| r.id == id).ok_or(format!("missing {id}"))?;
        ensure(r.classify() == class, format!("{id}: {} != {class}", r.classify()))?;
    }
    ensure(classify(&SpaceFootprint::new([ReadSpace::Env], [])) == AttackClass::Neither, "camera")?;
    Ok(format!("{} records classified as expected; faked-states within reversed-space", records.len()))
}

/// Compact re-run of the randomized invariants with a fixed seed, 1000
/// instances each.
fn property_suites() -> Outcome {
    const N: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let amp = |rng: &mut ChaCha8Rng| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let optics = Optics::default();
    let (a, b) = (ModeLabel::custom("in", 0), ModeLabel::custom("in", 1));

    // Unitarity and photon-number conservation of the beam splitter.
    for _ in 0..N {
        let n = rng.random_range(0..4u32);
        let terms: Vec<_> = (0..=n)
            .map(|k| (FockBasisState::from_counts([(a.clone(), k), (b.clone(), n - k)]), amp(&mut rng)))
            .collect();
        let Some(x) = PhotonicState::from_terms(terms).normalized() else { continue };
        let out = optics.beam_splitter(&x, (&a, &b), (&a, &b)).map_err(|e| e.to_string())?;
        ensure((out.norm() - 1.0).abs() < 1e-9, "beam splitter is not norm preserving")?;
        ensure(out.has_photon_number(n), "photon number changed")?;
    }
    // Unitarity of the interferometer: forward then backward is the identity.
    for _ in 0..N {
        let x = singles(&(-2..=2).map(|t| (ModeLabel::chan(t), amp(&mut rng))).collect::<Vec<_>>());
        let x = x.normalized().ok_or("zero state")?;
        let cfg = InterferometerConfig::with_phase(rng.random_range(0.0..std::f64::consts::TAU));
        let fx = optics.mz_transform(&x, &cfg).map_err(|e| e.to_string())?;
        ensure((fx.norm() - 1.0).abs() < 1e-9 && fx.has_photon_number(1), "interferometer norm")?;
        ensure(optics.mz_reverse(&fx, &cfg).map_err(|e| e.to_string())?.approx_eq(&x, 1e-9), "round trip")?;
    }
    // Reversed-space orthogonality: states orthogonal to H^P are invisible.
    let receivers: Vec<ReceiverModel> =
        ReceiverKind::BUILT_IN.iter().map(|k| make_receiver(*k, &ReceiverParams::default()).unwrap()).collect();
    let spaces: Vec<Vec<PhotonicState>> = receivers.iter().map(|r| r.reversed_space().unwrap()).collect();
    for _ in 0..N {
        let which = rng.random_range(0..receivers.len());
        let (r, hp) = (&receivers[which], &spaces[which]);
        let candidates: Vec<PhotonicState> = r.settings[0]
            .map
            .input_basis()
            .iter()
            .filter(|s| s.modes().all(|m| r.channel_modes.contains(m)))
            .map(|s| PhotonicState::basis(s.clone()))
            .collect();
        let mut psi = PhotonicState::zero();
        for q in &candidates {
            psi = psi.add_scaled(q, amp(&mut rng));
        }
        for q in hp {
            psi = psi.add_scaled(q, -q.inner(&psi));
        }
        if let Some(psi) = psi.normalized().filter(|_| psi.norm() > 1e-6) {
            for s in &r.settings {
                let amps = s.outcome_amplitudes(&psi).map_err(|e| e.to_string())?;
                ensure(amps.iter().all(|x| x.norm() < 1e-8), format!("{}: leak into outcomes", r.name))?;
            }
        }
    }
    // Isometry Gram checks on sampled family members.
    let families: Vec<_> = [ReceiverKind::Interferometric6Mode, ReceiverKind::Interferometric4Mode, ReceiverKind::BlindedBright]
        .iter()
        .map(|k| {
            let (r, a) = setup(*k);
            let system = build_constraint_system(&r, &a).unwrap();
            (r, a, synthesize_attacks(&system, None).unwrap())
        })
        .collect();
    for i in 0..N {
        let (r, a, fam) = &families[i % families.len()];
        let m = fam.sample_members(1, rng.random()).pop().ok_or("no member")?;
        ensure(m.isometry_residual() < 1e-9, format!("Gram residual {}", m.isometry_residual()))?;
        ensure(verify_oblivious(&m, r, a).map_err(|e| e.to_string())?.max_error_amplitude < 1e-9, "not oblivious")?;
    }
    // Determinism of seeded simulations and device probes.
    let (r, a) = setup(ReceiverKind::Interferometric4Mode);
    let sim = Simulation::new(&a, &ChannelModel::Lossy { loss: 0.2 }, &r).map_err(|e| e.to_string())?;
    let mut device = make_apd_receiver_device(ApdParams::default()).map_err(|e| e.to_string())?;
    for _ in 0..N {
        let (seed, rounds) = (rng.random::<u64>(), rng.random_range(1..200));
        let x = sim.run(rounds, seed, &RunOptions { threads: 1, ..RunOptions::default() }).map_err(|e| e.to_string())?;
        let y = sim.run(rounds, seed, &RunOptions { threads: 3, ..RunOptions::default() }).map_err(|e| e.to_string())?;
        ensure(x == y, "simulation depends on thread count")?;
        let input = FuzzInput {
            pulses: vec![
                Pulse::new(0, Polarization::H, rng.random_range(0.0..2000.0)),
                Pulse::new(rng.random_range(0..12), Polarization::NAMED[rng.random_range(0..4)], rng.random_range(0.0..10.0)),
            ],
        };
        device.reset();
        let o1 = probe(&mut device, &input, seed).map_err(|e| e.to_string())?;
        device.reset();
        ensure(o1 == probe(&mut device, &input, seed).map_err(|e| e.to_string())?, "probe not deterministic")?;
    }
    Ok(format!("5 suites x {N} instances"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("optics fidelity", optics_fidelity, Duration::from_secs(1)),
        ("reversed-space dimensions", reversed_space_dimensions, Duration::from_secs(1)),
        ("faked-states reproduction", faked_states_reproduction, Duration::from_secs(30)),
        ("defended receiver", defended_reproduction, Duration::from_secs(10)),
        ("four-mode receiver", four_mode_reproduction, Duration::from_secs(60)),
        ("bright-illumination family", bright_reproduction, Duration::from_secs(10)),
        ("fuzzing discovery", fuzzing_discovery, Duration::from_secs(30)),
        ("non-oblivious detection", non_oblivious_detection, Duration::from_secs(60)),
        ("classifier", classifier, Duration::from_secs(60)),
        ("property suites", property_suites, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (n, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *budget => Err(format!("{detail}; over time budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({elapsed:.2?}): {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({elapsed:.2?}): {why}", n + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
