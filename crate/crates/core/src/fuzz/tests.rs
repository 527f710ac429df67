use std::collections::BTreeMap;

use super::*;
use crate::receivers::{make_receiver, BrightDetection, ReceiverKind, ReceiverParams};

fn apd() -> ApdDevice {
    make_apd_receiver_device(ApdParams::default()).unwrap()
}

fn classes(device: &mut dyn BlackBoxDevice, input: &FuzzInput, n: u64) -> BTreeMap<String, u32> {
    let mut out = BTreeMap::new();
    for s in 0..n {
        device.reset();
        *out.entry(probe(device, input, s).unwrap().class()).or_default() += 1;
    }
    out
}

fn blinded(p: Polarization, mu: f64) -> FuzzInput {
    FuzzInput { pulses: vec![Pulse::new(0, Polarization::H, 1e3), Pulse::new(1, p, mu)] }
}

#[test]
fn geiger_single_photon_splits_by_malus() {
    // With unit efficiency and no crosstalk, an H photon reaches the H APD
    // with probability 1/2 and each Hadamard APD with probability 1/4.
    let mut d = make_apd_receiver_device(ApdParams { geiger_efficiency: 1.0, leakage: 0.0, ..ApdParams::default() })
        .unwrap();
    let n = 20_000;
    let c = classes(&mut d, &FuzzInput::single(Pulse::new(0, Polarization::H, 1.0)), n);
    let expected = [("click:H", 0.5), ("click:+45", 0.25), ("click:-45", 0.25)];
    assert_eq!(c.len(), 3, "{c:?}");
    for (k, p) in expected {
        let got = f64::from(c[k]) / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((got - p).abs() < 4.0 * sigma, "{k}: {got} vs {p}");
    }
}

#[test]
fn bright_pulse_is_registered_as_loss() {
    let mut d = apd();
    let c = classes(&mut d, &FuzzInput::single(Pulse::new(0, Polarization::V, 1e3)), 50);
    assert_eq!(c, BTreeMap::from([("loss".to_string(), 50)]));
}

#[test]
fn linear_mode_clicks_only_above_threshold() {
    // Half of a 2.2 p_th pulse reaches the +45 APD, above threshold; each
    // computational APD gets a quarter, below it.
    let mut d = apd();
    let c = classes(&mut d, &blinded(Polarization::Plus45, 2.2), 20);
    assert_eq!(c, BTreeMap::from([("click:+45".to_string(), 20)]));
}

#[test]
fn blinded_device_loses_single_photons() {
    let mut d = apd();
    let c = classes(&mut d, &blinded(Polarization::H, 1.0), 50);
    assert_eq!(c, BTreeMap::from([("loss".to_string(), 50)]));
}

#[test]
fn bright_v_after_blinding_forces_bit_one() {
    let mut d = apd();
    d.reset();
    let o = probe(&mut d, &blinded(Polarization::V, 3.2), 7).unwrap();
    assert_eq!(o.interpretation, Interpretation::Bit1);
    assert_eq!(o.basis_registered, Some(Basis::Computational));
}

#[test]
fn blinding_wears_off() {
    let mut d = apd();
    let recovered = FuzzInput {
        pulses: vec![Pulse::new(0, Polarization::H, 1e3), Pulse::new(11, Polarization::H, 50.0)],
    };
    let c = classes(&mut d, &recovered, 20);
    assert!(!c.contains_key("loss"), "{c:?}");
}

#[test]
fn state_persists_between_calls_until_reset() {
    let mut d = apd();
    probe(&mut d, &FuzzInput::single(Pulse::new(0, Polarization::H, 1e3)), 0).unwrap();
    let weak = FuzzInput::single(Pulse::new(1, Polarization::H, 1.0));
    assert_eq!(probe(&mut d, &weak, 1).unwrap().interpretation, Interpretation::Loss);
    d.reset();
    let clicks = (0..50).filter(|s| probe(&mut d, &weak, *s).unwrap().interpretation != Interpretation::Loss).count();
    assert!(clicks > 10);
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut d = apd();
    let neg = FuzzInput::single(Pulse::new(0, Polarization::H, -1.0));
    assert_eq!(probe(&mut d, &neg, 0).unwrap_err().code(), "malformed-params");
    let order = FuzzInput { pulses: vec![Pulse::new(2, Polarization::H, 1.0), Pulse::new(1, Polarization::H, 1.0)] };
    assert!(probe(&mut d, &order, 0).is_err());
    assert!(make_apd_receiver_device(ApdParams { leakage: 0.7, ..ApdParams::default() }).is_err());
    let cfg = StrategyConfig { repeats: 0, ..StrategyConfig::default() };
    assert!(run_fuzz_campaign(&mut d, &cfg, 0).is_err());
}

#[test]
fn campaign_finds_the_three_blinding_properties() {
    for seed in 0..10 {
        let report = run_fuzz_campaign(&mut apd(), &StrategyConfig::default(), seed).unwrap();
        assert!(report.test_cases_run <= 10_000);
        for tag in [AnomalyTag::Blinding, AnomalyTag::WeakUnderBlinding, AnomalyTag::StrongUnderBlinding] {
            assert!(report.properties_found.contains(&tag), "seed {seed}: missing {tag:?}");
        }
        assert_eq!(derived_detections(&report.derived_vulnerabilities), BrightDetection::standard());
    }
}

#[test]
fn ideal_pnr_device_has_no_anomalies() {
    let report = run_fuzz_campaign(&mut IdealPnrDevice, &StrategyConfig::default(), 3).unwrap();
    assert!(report.anomalies.is_empty(), "{:?}", report.properties_found);
    assert!((report.calibrated_click_probability - 1.0).abs() < 1e-12);
}

#[test]
fn threshold_device_accepts_multi_photon_pulses() {
    let mut d = DeviceSpec::Threshold { efficiency: 1.0 }.build().unwrap();
    let report = run_fuzz_campaign(d.as_mut(), &StrategyConfig::default(), 3).unwrap();
    assert!(report.properties_found.contains(&AnomalyTag::MultiPhotonAccepted));
    assert!(!report.properties_found.contains(&AnomalyTag::Blinding));
    assert!(report.derived_vulnerabilities.is_empty());
}

#[test]
fn campaigns_are_reproducible() {
    let cfg = StrategyConfig::default();
    let a = run_fuzz_campaign(&mut apd(), &cfg, 42).unwrap();
    let b = run_fuzz_campaign(&mut apd(), &cfg, 42).unwrap();
    assert_eq!(a, b);
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<FuzzReport>(&json).unwrap(), a);
}

#[test]
fn properties_are_monotone_in_budget() {
    let mut previous = std::collections::BTreeSet::new();
    for max_cases in [500, 1_500, 2_000, 3_000, 5_000, 10_000] {
        let cfg = StrategyConfig { max_cases, ..StrategyConfig::default() };
        let report = run_fuzz_campaign(&mut apd(), &cfg, 5).unwrap();
        assert!(report.test_cases_run <= max_cases);
        assert!(previous.is_subset(&report.properties_found), "{max_cases}");
        previous = report.properties_found;
    }
}

#[test]
fn replay_reproduces_every_anomaly() {
    let report = run_fuzz_campaign(&mut apd(), &StrategyConfig::default(), 9).unwrap();
    assert!(!report.anomalies.is_empty());
    for a in &report.anomalies {
        assert_eq!(replay(&mut apd(), &report, a.id).unwrap(), a.counts, "anomaly {}", a.id);
    }
    assert!(replay(&mut apd(), &report, usize::MAX).is_err());
}

#[test]
fn trace_records_every_probe() {
    let cfg = StrategyConfig { max_cases: 800, ..StrategyConfig::default() };
    let mut trace = Vec::new();
    let report = run_fuzz_campaign_traced(&mut apd(), &cfg, 1, |r| {
        trace.push(r.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(trace.len() as u64, report.test_cases_run);
    assert!(trace.iter().enumerate().all(|(i, r)| r.case == i as u64));
    let mut d = apd();
    for r in trace.iter().step_by(37) {
        d.reset();
        assert_eq!(probe(&mut d, &r.input, r.seed).unwrap(), r.observation);
    }
}

#[test]
fn derived_detections_build_the_blinded_receiver() {
    let report = run_fuzz_campaign(&mut apd(), &StrategyConfig::default(), 0).unwrap();
    let detections = derived_detections(&report.derived_vulnerabilities);
    let derived = make_receiver(
        ReceiverKind::BlindedBright,
        &ReceiverParams { detections: Some(detections), ..ReceiverParams::default() },
    )
    .unwrap();
    let reference = make_receiver(ReceiverKind::BlindedBright, &ReceiverParams::default()).unwrap();
    for (a, b) in derived.settings.iter().zip(&reference.settings) {
        assert_eq!(a.sets, b.sets);
    }
}

#[test]
fn refined_grid_adds_geometric_midpoints() {
    let cfg = StrategyConfig { intensity_grid: vec![1.0, 10.0, 100.0], ..StrategyConfig::default() };
    let g = cfg.refined_grid();
    assert_eq!(g.len(), 5);
    assert!((g[1] - 10f64.sqrt()).abs() < 1e-12);
}
