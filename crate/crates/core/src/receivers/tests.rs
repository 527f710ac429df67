use super::*;
use crate::fockspace::ModeLabel;

fn build(kind: ReceiverKind) -> ReceiverModel {
    make_receiver(kind, &ReceiverParams::default()).unwrap()
}

fn ids(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn probabilities(r: &ReceiverModel, setting: &str, psi: &PhotonicState) -> BTreeMap<String, f64> {
    let s = r.setting(setting).unwrap();
    s.outcomes
        .iter()
        .zip(s.outcome_amplitudes(psi).unwrap())
        .map(|(o, a)| (o.id.clone(), a.norm_sqr()))
        .collect()
}

#[test]
fn every_builtin_validates() {
    for kind in ReceiverKind::BUILT_IN {
        let r = build(kind);
        assert_eq!(r.name, kind.name());
        r.validate().unwrap();
        ideal_alice(kind).validate().unwrap();
    }
}

#[test]
fn reversed_space_dimensions() {
    let expected = [
        (ReceiverKind::Interferometric6Mode, 5),
        (ReceiverKind::Interferometric2Mode, 3),
        (ReceiverKind::Interferometric4Mode, 5),
        (ReceiverKind::InterferometricDefended10Mode, 7),
        (ReceiverKind::PolarizationThreshold, 6),
        (ReceiverKind::IdealBb84, 3),
        (ReceiverKind::BlindedBright, 4),
    ];
    for (kind, dim) in expected {
        assert_eq!(build(kind).reversed_space().unwrap().len(), dim, "{kind}");
    }
}

#[test]
fn six_mode_reversed_space_is_vacuum_and_four_time_bins() {
    let hp = build(ReceiverKind::Interferometric6Mode).reversed_space().unwrap();
    let mut want = vec![PhotonicState::vacuum()];
    want.extend((-1..=2).map(|t| PhotonicState::single(ModeLabel::chan(t))));
    for w in &want {
        assert!(hp.iter().any(|q| q.approx_eq(w, 1e-12)), "missing {w:?}");
    }
}

#[test]
fn six_mode_interpretation_sets() {
    let r = build(ReceiverKind::Interferometric6Mode);
    let comp = &r.setting("computational").unwrap().sets;
    assert_eq!(comp.j0, ids(&["s:0", "d:0"]));
    assert_eq!(comp.j1, ids(&["s:2", "d:2"]));
    assert_eq!(comp.j_loss, ids(&["vac", "s:1", "d:1"]));
    let had = &r.setting("hadamard").unwrap().sets;
    assert_eq!(had.j0, ids(&["d:1"]));
    assert_eq!(had.j1, ids(&["s:1"]));
    assert_eq!(had.j_loss, ids(&["vac", "s:0", "d:0", "s:2", "d:2"]));
    assert!(had.j_invalid.is_empty());
    assert_eq!(r.interpret("hadamard", "d:1").unwrap(), Interpretation::Bit0);
    assert_eq!(r.interpret("computational", "s:1").unwrap(), Interpretation::Loss);
    assert!(matches!(
        r.interpret("computational", "x:9"),
        Err(Error::UnknownOutcome { .. })
    ));
}

#[test]
fn error_outcomes_for_matched_and_mismatched_bases() {
    let r = build(ReceiverKind::Interferometric6Mode);
    let alice = ideal_alice(ReceiverKind::Interferometric6Mode);
    let zero = alice.state("0").unwrap();
    let plus = alice.state("+").unwrap();
    assert_eq!(r.error_outcomes("computational", zero).unwrap(), ids(&["s:2", "d:2"]));
    assert_eq!(r.error_outcomes("hadamard", plus).unwrap(), ids(&["s:1"]));
    assert!(r.error_outcomes("hadamard", zero).unwrap().is_empty());

    let d = build(ReceiverKind::InterferometricDefended10Mode);
    let e = d.error_outcomes("computational", zero).unwrap();
    assert_eq!(e, ids(&["s:2", "d:2", "s:-1", "d:-1", "s:3", "d:3"]));
}

#[test]
fn ideal_states_give_expected_statistics() {
    let kind = ReceiverKind::Interferometric6Mode;
    let r = build(kind);
    let alice = ideal_alice(kind);
    // |+>: the central slot interferes into d_1 only, the side slots are
    // each hit with probability 1/8.
    let plus = alice.physical(alice.state("+").unwrap()).unwrap();
    let p = probabilities(&r, "hadamard", &plus);
    assert!((p["d:1"] - 0.5).abs() < 1e-12);
    assert!(p["s:1"] < 1e-12);
    for id in ["s:0", "d:0", "s:2", "d:2"] {
        assert!((p[id] - 0.125).abs() < 1e-12, "{id}: {}", p[id]);
    }
    let minus = alice.physical(alice.state("-").unwrap()).unwrap();
    let p = probabilities(&r, "hadamard", &minus);
    assert!((p["s:1"] - 0.5).abs() < 1e-12 && p["d:1"] < 1e-12);
    // |0> = t'_0 takes the short arm to t = 0 with probability 1/2 and never
    // reaches t = 2.
    let zero = alice.physical(alice.state("0").unwrap()).unwrap();
    let p = probabilities(&r, "computational", &zero);
    assert!((p["s:0"] + p["d:0"] - 0.5).abs() < 1e-12);
    assert!(p["s:2"] + p["d:2"] < 1e-12);
}

#[test]
fn two_mode_reads_circular_states() {
    let kind = ReceiverKind::Interferometric2Mode;
    let r = build(kind);
    let alice = ideal_alice(kind);
    for (label, setting, good, bad) in [
        ("+", "hadamard", "d:1", "s:1"),
        ("-", "hadamard", "s:1", "d:1"),
        ("+i", "circular", "d:1", "s:1"),
        ("-i", "circular", "s:1", "d:1"),
    ] {
        let psi = alice.physical(alice.state(label).unwrap()).unwrap();
        let p = probabilities(&r, setting, &psi);
        assert!((p[good] - 0.5).abs() < 1e-12, "{label}");
        assert!(p[bad] < 1e-12, "{label}");
    }
}

#[test]
fn four_mode_sets() {
    let r = build(ReceiverKind::Interferometric4Mode);
    let comp = &r.setting("computational").unwrap().sets;
    assert_eq!(comp.j0, ids(&["d:0"]));
    assert_eq!(comp.j1, ids(&["s:2"]));
    assert_eq!(comp.j_loss, ids(&["vac", "d:1", "s:1"]));
}

#[test]
fn polarization_receiver_outcomes() {
    let r = build(ReceiverKind::PolarizationThreshold);
    let comp = r.setting("computational").unwrap();
    assert_eq!(comp.outcome_ids(), ids(&["vac", "h1", "v1", "h2", "h1v1", "v2"]));
    assert_eq!(comp.sets.j_invalid, ids(&["h1v1"]));
    assert_eq!(comp.sets.j0, ids(&["h1", "h2"]));
    let alice = ideal_alice(ReceiverKind::PolarizationThreshold);
    let minus = alice.physical(alice.state("-").unwrap()).unwrap();
    let p = probabilities(&r, "hadamard", &minus);
    assert!((p["v1"] - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_as_loss_moves_double_clicks() {
    let params = ReceiverParams { invalid_as_loss: true, ..Default::default() };
    let r = make_receiver(ReceiverKind::PolarizationThreshold, &params).unwrap();
    let s = r.setting("computational").unwrap();
    assert!(s.sets.j_invalid.is_empty());
    assert!(s.sets.j_loss.contains("h1v1"));
}

#[test]
fn blinded_receiver_states_are_orthonormal_and_close_to_bright_pulses() {
    let r = build(ReceiverKind::BlindedBright);
    assert!(r.passive_choice);
    let s = r.setting("hadamard").unwrap();
    let o = &s.outcomes[s.outcome_index("bright-+45").unwrap()];
    let raw = crate::fockspace::bright_state(std::f64::consts::FRAC_PI_4, 20, 0);
    assert!(o.state.inner(&raw).norm() > 0.999);
    assert_eq!(s.sets.j0, ids(&["bright-+45"]));
}

#[test]
fn parameters_are_checked() {
    let bad = ReceiverParams { max_photons: Some(2), ..Default::default() };
    assert!(matches!(
        make_receiver(ReceiverKind::Interferometric6Mode, &bad),
        Err(Error::MalformedParams(_))
    ));
    let bad = ReceiverParams { max_photons: Some(5), ..Default::default() };
    assert!(make_receiver(ReceiverKind::PolarizationThreshold, &bad).is_err());
    assert!(make_receiver(ReceiverKind::Custom, &ReceiverParams::default()).is_err());
    let err: std::result::Result<ReceiverParams, _> = serde_json::from_str(r#"{"bogus": 1}"#);
    assert!(err.is_err());
}

#[test]
fn custom_receiver_round_trips_through_json() {
    let model = build(ReceiverKind::Interferometric2Mode);
    let spec = ReceiverSpec {
        kind: ReceiverKind::Custom,
        params: ReceiverParams { model: Some(Box::new(model.clone())), ..Default::default() },
    };
    let text = serde_json::to_string(&spec).unwrap();
    let back: ReceiverSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back.build().unwrap(), model);
}

#[test]
fn kind_names_parse() {
    for kind in ReceiverKind::BUILT_IN {
        assert_eq!(kind.name().parse::<ReceiverKind>().unwrap(), kind);
        let json = serde_json::to_string(&kind).unwrap();
        assert_eq!(json, format!("\"{}\"", kind.name()));
    }
    assert!("nope".parse::<ReceiverKind>().is_err());
}

#[test]
fn polarization_serde() {
    let p: Polarization = serde_json::from_str("\"+45\"").unwrap();
    assert_eq!(p, Polarization::Plus45);
    let p: Polarization = serde_json::from_str("1.5707963267948966").unwrap();
    assert_eq!(p, Polarization::V);
    assert!((Polarization::H.malus(Polarization::Plus45) - 0.5).abs() < 1e-12);
}
