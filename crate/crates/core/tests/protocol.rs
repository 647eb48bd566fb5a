use std::f64::consts::PI;

use heatpump::config::{RunConfig, ScheduleSpec};
use heatpump::engine::GaussianEngine;
use heatpump::gaussian::IntegratorOptions;
use heatpump::model::{build_default_cycle, RampShape, Stroke, StrokeDurations, SystemParams};
use heatpump::polariton::{bogoliubov_basis, exchange_efficiency, survival_factor};
use heatpump::presets;
use heatpump::runner::{
    adiabaticity_probe, analyze_cycles, monotonicity_violations, run_protocol, InitialCondition, Trajectory,
};

fn fig1_params() -> SystemParams {
    presets::fig1().params
}

fn run(config: &RunConfig) -> Trajectory {
    let (schedule, _) = config.schedule().unwrap();
    let engine = config.engine(None).unwrap();
    run_protocol(&config.params, &schedule, engine.as_ref(), &config.initial(), &config.run_options()).unwrap()
}

#[test]
fn probe_separates_adiabatic_and_diabatic_ramps() {
    let p = fig1_params();
    let (slow, fast) = (40.0 / (2.0 * p.g), 0.1 / (2.0 * p.g));
    assert!(adiabaticity_probe(&p, slow, RampShape::Adiabatic).unwrap() < 0.05);
    for shape in [RampShape::Linear, RampShape::Adiabatic] {
        let moved = adiabaticity_probe(&p, fast, shape).unwrap();
        assert!(moved > 0.2, "{shape}: fast ramp moved N_A by only {moved}");
    }
    // A linear sweep spends too little time at the crossing to meet 0.05 here.
    let linear = adiabaticity_probe(&p, slow, RampShape::Linear).unwrap();
    assert!(linear > 0.05 && linear < 0.15, "{linear}");
}

#[test]
fn decoupled_probe() {
    // Without coupling the polaritons are the bare modes; a ramp that stays
    // on one side of the crossing leaves N_A untouched.
    let mut p = fig1_params();
    p.g = 0.0;
    p.delta_f = -3000.0;
    assert!(adiabaticity_probe(&p, 0.01, RampShape::Linear).unwrap() < 1e-14);
    // Across the crossing the upper branch changes character, so N_A jumps
    // from the cavity value to the phonon value.
    p.delta_f = -600.0;
    let jump = adiabaticity_probe(&p, 0.01, RampShape::Linear).unwrap();
    assert!((jump - (p.n_b - p.n_a)).abs() < 1e-9, "{jump}");
}

#[test]
fn probe_decreases_with_ramp_time() {
    let p = fig1_params();
    let taus: Vec<f64> = (0..10).map(|k| 0.1 / (2.0 * p.g) * 2f64.powi(k)).collect();
    let values: Vec<f64> = taus
        .iter()
        .map(|&t| adiabaticity_probe(&p, t, RampShape::Adiabatic).unwrap())
        .collect();
    let flagged = monotonicity_violations(&values, 1e-3);
    for k in &flagged {
        eprintln!(
            "probe not monotone between tau = {:.3e} ({:.4}) and {:.3e} ({:.4})",
            taus[*k],
            values[*k],
            taus[k + 1],
            values[k + 1]
        );
    }
    assert!(values.last().unwrap() < values.first().unwrap());
}

#[test]
fn fig1_stays_cold() {
    let config = presets::fig1();
    let traj = run(&config);
    let basis = bogoliubov_basis(config.params.delta_i, config.params.omega_b, config.params.g).unwrap();
    assert!(basis.u < 0.1);
    let (na, nb) = traj.polaritons[0];
    assert!((na - 0.5).abs() < 1e-10 && (nb - 2.0).abs() < 1e-10, "{na} {nb}");
    let (schedule, _) = config.schedule().unwrap();
    let report = analyze_cycles(&traj, &config.params, &schedule).unwrap();
    let c = &report.targets[0];
    assert_eq!(c.after.len(), 3);
    assert!(c.after[0] < 1.5);
    assert!(c.after.iter().all(|&n| n < 2.0), "{:?}", c.after);
    assert!(traj.min_uncertainty_margin.unwrap() >= -1e-9);
}

#[test]
fn single_cycle_report() {
    let mut config = presets::fig1();
    if let ScheduleSpec::DefaultCycle { cycles, .. } = &mut config.schedule {
        *cycles = 1;
    }
    let traj = run(&config);
    let (schedule, _) = config.schedule().unwrap();
    let report = analyze_cycles(&traj, &config.params, &schedule).unwrap();
    assert_eq!(report.cycles, 1);
    assert_eq!(report.targets[0].before.len(), 1);
    assert_eq!(report.targets[0].after.len(), 1);
}

#[test]
fn runs_are_deterministic() {
    let config = presets::fig1();
    assert_eq!(run(&config), run(&config));
    let mut swap = presets::swaptest();
    swap.engine = "fock".into();
    assert_eq!(run(&swap), run(&swap));
}

#[test]
fn without_exchange_the_target_relaxes_monotonically() {
    let mut config = presets::fig1();
    config.schedule = ScheduleSpec::Strokes {
        strokes: vec![Stroke::Hold { duration: 0.5 }],
        cycles: 4,
    };
    config.initial = Some(InitialCondition::Polariton {
        n_upper: 0.5,
        n_lower: 2.0,
        targets: vec![1.0],
    });
    let traj = run(&config);
    let c = traj.mode_index("c").unwrap();
    let series: Vec<f64> = traj.occupations.iter().map(|o| o[c]).collect();
    for w in series.windows(2) {
        assert!(w[1] >= w[0] && w[1] <= 12.0, "{w:?}");
    }
    let t = *traj.times.last().unwrap();
    let exact = 12.0 - 11.0 * (-t).exp();
    assert!((series.last().unwrap() - exact).abs() < 1e-8);
}

#[test]
fn empirical_map_slope_matches_analytic() {
    // Detune the target so that a full Rabi period moves only part of the
    // excess, which makes the slope (1 - eta) r large enough to measure.
    let mut p = fig1_params();
    let basis = bogoliubov_basis(p.delta_f, p.omega_b, p.g).unwrap();
    let coupling = basis.u * p.omega_0;
    p.delta = vec![basis.omega_upper - coupling];
    let (eta, rabi) = exchange_efficiency(&basis, p.delta[0], p.omega_0).unwrap();
    assert!((eta - 0.8).abs() < 1e-12);
    let durations = StrokeDurations::new(0.04, PI / (2.0 * rabi), 0.04, 0.1);
    let (schedule, _) = build_default_cycle(&p, durations, &[0], 3, RampShape::Adiabatic).unwrap();
    let r = survival_factor(p.gamma, &[schedule.period()]);
    let engine = GaussianEngine::default();
    let after = |n_c0: f64| {
        let init = InitialCondition::Polariton {
            n_upper: p.n_a,
            n_lower: p.n_b,
            targets: vec![n_c0],
        };
        let traj = run_protocol(&p, &schedule, &engine, &init, &Default::default()).unwrap();
        analyze_cycles(&traj, &p, &schedule).unwrap().targets[0].after.clone()
    };
    let (low, high) = (after(4.0), after(12.0));
    let analytic = (1.0 - eta) * r;
    for k in 0..2 {
        let slope = (high[k + 1] - low[k + 1]) / (high[k] - low[k]);
        assert!(((slope - analytic) / analytic).abs() < 0.25, "cycle {k}: {slope} vs {analytic}");
    }
}

#[test]
fn halving_the_step_leaves_fig1_unchanged() {
    let config = presets::fig1();
    let (schedule, _) = config.schedule().unwrap();
    let final_occ = |steps_per_unit: f64| {
        let engine = GaussianEngine {
            options: IntegratorOptions {
                steps_per_unit,
                ..IntegratorOptions::default()
            },
        };
        let traj = run_protocol(&config.params, &schedule, &engine, &config.initial(), &config.run_options()).unwrap();
        traj.occupations.last().unwrap().clone()
    };
    let (coarse, fine) = (final_occ(50.0), final_occ(100.0));
    for (a, b) in coarse.iter().zip(&fine) {
        assert!((a - b).abs() < 1e-8 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn lossless_exchange_conserves_phonons() {
    let traj = run(&presets::swaptest());
    let total: Vec<f64> = traj.occupations.iter().map(|o| o[1] + o[2]).collect();
    for t in &total {
        assert!((t - total[0]).abs() < 1e-9);
    }
    let last = traj.occupations.last().unwrap();
    assert!((last[1] - 0.5).abs() < 1e-9 && last[2].abs() < 1e-9);
}
