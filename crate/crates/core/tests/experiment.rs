use std::f64::consts::PI;

use fano_ep::experiment::{
    delta_check, run_experiment, CaseSpec, CouplingRule, ExperimentSpec, Scenario,
};
use fano_ep::fano::FanoEnergyDepParams;
use fano_ep::fit::{fit_multistart, FanoParams, FitOptions, ModelKind};
use fano_ep::io;
use fano_ep::model::{uniform_grid, Channel, OscillatorParams, SpectralCurve};

fn uncoupled_spec() -> ExperimentSpec {
    ExperimentSpec {
        scenario: Scenario::Custom,
        cases: vec![CaseSpec {
            label: "free".into(),
            params: OscillatorParams::undamped(2.0, 2.1).unwrap(),
            rule: CouplingRule::Fixed { f: 0.0, g: 0.0 },
        }],
        channel: Channel::G11,
        window: Some((1.5, 1.9)),
        points: 64,
        family: None,
        seed: 0,
        multistart: 1,
        delta_check: false,
    }
}

#[test]
fn uncoupled_custom_curve_is_closed_form() {
    let out = run_experiment(&uncoupled_spec()).unwrap();
    let (curve, fit) = &out.curves[0];
    assert!(fit.is_none());
    for (w, s) in curve.points() {
        let expected = 1.0 / (4.0 - w * w).powi(2);
        assert!(
            (s - expected).abs() <= 1e-12 * expected,
            "{w}: {s} vs {expected}"
        );
    }
}

#[test]
fn emitted_csv_round_trips() {
    let out = run_experiment(&uncoupled_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    out.write(dir.path()).unwrap();
    let back = io::read_curve_file(&dir.path().join("custom_free.csv"), Channel::G11).unwrap();
    assert_eq!(back.energies(), out.curves[0].0.energies());
    assert_eq!(back.values(), out.curves[0].0.values());
    assert!(dir.path().join("custom.json").exists());
}

#[test]
fn invalid_specs_rejected() {
    let mut spec = uncoupled_spec();
    spec.points = 8;
    assert!(run_experiment(&spec).is_err());
    let mut spec = uncoupled_spec();
    spec.window = None;
    assert!(run_experiment(&spec).is_err());
    let mut spec = uncoupled_spec();
    spec.cases.push(spec.cases[0].clone());
    assert!(run_experiment(&spec).is_err());
    let mut spec = ExperimentSpec::preset(Scenario::Table1).unwrap();
    spec.cases[0].rule = CouplingRule::EpOffset { delta_f: -1.0 };
    assert!(run_experiment(&spec).is_err());
}

#[test]
fn errors_carry_case_label() {
    let mut spec = uncoupled_spec();
    spec.window = Some((1.9, 2.0));
    spec.points = 101;
    let err = run_experiment(&spec).unwrap_err();
    assert!(err.to_string().starts_with("case free:"), "{err}");
    assert!(err.is_numerical());
}

fn eq2_curve(delta: f64) -> (SpectralCurve, FanoEnergyDepParams) {
    let p = FanoEnergyDepParams {
        e1: 2.0,
        gamma1: 0.04,
        e2: 2.08,
        gamma2: 0.06,
        delta,
        scale: 1.5,
    };
    let energies = uniform_grid(1.8, 2.3, 1500).unwrap();
    let values = energies
        .iter()
        .map(|&e| FanoParams::EnergyDep(p).eval(e))
        .collect();
    (
        SpectralCurve::new(energies, values, Channel::G11).unwrap(),
        p,
    )
}

#[test]
fn phase_recovered_from_synthetic_data() {
    let (curve, truth) = eq2_curve(2.0);
    let seed = FanoParams::Simplified(FanoEnergyDepParams {
        delta: PI,
        scale: 4.0 * truth.scale,
        ..truth
    });
    let est = delta_check(&curve, &seed, &FitOptions::default()).unwrap();
    assert!((est.delta - 2.0).abs() < 1e-6, "{est:?}");
}

#[test]
fn held_phase_matches_simplified_fit() {
    let (curve, _) = eq2_curve(PI);
    let poles = [
        num_complex::Complex64::new(2.0, -0.02),
        num_complex::Complex64::new(2.08, -0.03),
    ];
    let held = FitOptions {
        hold_delta: true,
        ..FitOptions::default()
    };
    let a = fit_multistart(ModelKind::EnergyDep, &curve, Some(&poles), &held).unwrap();
    let b = fit_multistart(
        ModelKind::Simplified,
        &curve,
        Some(&poles),
        &FitOptions::default(),
    )
    .unwrap();
    let (FanoParams::EnergyDep(pa), FanoParams::Simplified(pb)) =
        (a.params.gauge_fixed(), b.params.gauge_fixed())
    else {
        panic!("families");
    };
    assert_eq!(pa.delta, PI);
    assert!((4.0 * pa.scale - pb.scale).abs() < 1e-6 * pb.scale);
    for (x, y) in [
        (pa.e1, pb.e1),
        (pa.gamma1, pb.gamma1),
        (pa.e2, pb.e2),
        (pa.gamma2, pb.gamma2),
    ] {
        assert!((x - y).abs() < 1e-6 * y.abs(), "{x} vs {y}");
    }
}

#[test]
fn presets_cover_all_cases() {
    for s in Scenario::PRESETS {
        let spec = ExperimentSpec::preset(s).unwrap();
        let n = if matches!(s, Scenario::Table3 | Scenario::Fig3) {
            6
        } else {
            4
        };
        assert_eq!(spec.cases.len(), n);
        spec.validate().unwrap();
    }
    assert!(ExperimentSpec::preset(Scenario::Custom).is_err());
}
