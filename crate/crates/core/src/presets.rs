//! Ready-made configurations, also shipped as JSON files with the CLI.

use std::f64::consts::PI;

use crate::config::{FockConfig, IntegratorConfig, OutputConfig, RunConfig, ScheduleSpec, ValidateConfig, SCHEMA_VERSION};
use crate::model::{RampShape, Stroke, StrokeDurations, SystemParams};
use crate::polariton::{bogoliubov_basis, exchange_efficiency};
use crate::runner::InitialCondition;

fn base(params: SystemParams, schedule: ScheduleSpec) -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        description: None,
        params,
        schedule,
        initial: None,
        engine: "gaussian".into(),
        dissipation: true,
        fock: None,
        integrator: IntegratorConfig::default(),
        output: OutputConfig::default(),
        spectrum: None,
        limit: None,
        validate: ValidateConfig::default(),
    }
}

/// One target at `n_c = 12`, three cycles with adiabatic ramps.
pub fn fig1() -> RunConfig {
    let params = SystemParams {
        omega_b: 2000.0,
        delta: vec![2000.0],
        g: 200.0,
        kappa: 40.0,
        gamma: 1.0,
        n_a: 0.5,
        n_b: 2.0,
        n_targets: vec![12.0],
        delta_i: -6000.0,
        delta_f: -600.0,
        omega_0: 200.0,
    };
    let mut c = base(
        params,
        ScheduleSpec::DefaultCycle {
            durations: StrokeDurations::new(0.04, 0.008, 0.04, 0.1),
            targets: None,
            cycles: 3,
            shape: RampShape::Adiabatic,
        },
    );
    c.description = Some("single-target cooling, three cycles".into());
    c.output.samples_per_stroke = 40;
    c
}

/// Two targets cooled alternately. Rates and frequencies are in units of a
/// mechanical damping ten times smaller than in [`fig1`], with `kappa = 400`.
pub fn fig2() -> RunConfig {
    let params = SystemParams {
        omega_b: 2.0e4,
        delta: vec![2.0e4, 2.0e4],
        g: 2.0e3,
        kappa: 400.0,
        gamma: 1.0,
        n_a: 0.0,
        n_b: 2.0,
        n_targets: vec![10.0, 7.4],
        delta_i: -6.0e4,
        delta_f: -6.0e3,
        omega_0: 2.0e3,
    };
    let mut c = base(
        params,
        ScheduleSpec::DefaultCycle {
            durations: StrokeDurations::new(0.004, 0.0008, 0.004, 0.01),
            targets: Some(vec![0, 1]),
            cycles: 2,
            shape: RampShape::Adiabatic,
        },
    );
    c.description = Some("two targets cooled alternately, two cycles".into());
    c.initial = Some(InitialCondition::Polariton {
        n_upper: 0.0,
        n_lower: 2.0,
        targets: vec![10.0, 7.4],
    });
    c
}

/// Scaled-down protocol small enough for the Fock engine.
pub fn smalltest() -> RunConfig {
    let params = SystemParams {
        omega_b: 1.0,
        delta: vec![1.0],
        g: 0.1,
        kappa: 1.0,
        gamma: 0.05,
        n_a: 0.0,
        n_b: 0.2,
        n_targets: vec![0.3],
        delta_i: -2.0,
        delta_f: -0.3,
        omega_0: 0.5,
    };
    let basis = bogoliubov_basis(params.delta_f, params.omega_b, params.g).expect("stable");
    let (_, rabi) = exchange_efficiency(&basis, params.delta[0], params.omega_0).expect("valid");
    let mut c = base(
        params,
        ScheduleSpec::DefaultCycle {
            durations: StrokeDurations::new(5.0, PI / (2.0 * rabi), 5.0, 3.0),
            targets: None,
            cycles: 2,
            shape: RampShape::Adiabatic,
        },
    );
    c.description = Some("scaled protocol for engine cross-validation".into());
    c.initial = Some(InitialCondition::Bare {
        occupations: vec![0.0, 0.2, 0.3],
    });
    c.fock = Some(FockConfig {
        cutoffs: vec![6, 6, 8],
        dt: None,
        leakage_threshold: 1e-3,
    });
    c.output.samples_per_stroke = 10;
    c
}

/// [`smalltest`] with cutoffs too small for its occupations.
pub fn tinycutoff() -> RunConfig {
    let mut c = smalltest();
    c.description = Some("deliberately undersized Fock cutoffs".into());
    c.fock.as_mut().expect("smalltest has cutoffs").cutoffs = vec![3, 3, 3];
    c
}

/// Lossless resonant `b`-`c` swap with the cavity decoupled.
pub fn swaptest() -> RunConfig {
    let params = SystemParams {
        omega_b: 2000.0,
        delta: vec![2000.0],
        g: 0.0,
        kappa: 40.0,
        gamma: 1.0,
        n_a: 0.0,
        n_b: 0.0,
        n_targets: vec![0.5],
        delta_i: -600.0,
        delta_f: -300.0,
        omega_0: 200.0,
    };
    let mut c = base(
        params,
        ScheduleSpec::Strokes {
            strokes: vec![Stroke::Exchange {
                duration: PI / 400.0,
                target: 0,
                amplitude: 200.0,
            }],
            cycles: 1,
        },
    );
    c.description = Some("lossless resonant swap".into());
    c.dissipation = false;
    c.initial = Some(InitialCondition::Bare {
        occupations: vec![0.0, 0.0, 0.5],
    });
    c.fock = Some(FockConfig {
        cutoffs: vec![2, 12, 12],
        dt: None,
        leakage_threshold: 1e-3,
    });
    c.validate.threshold = 1e-4;
    c
}

/// All presets with their file stems.
pub fn all() -> Vec<(&'static str, RunConfig)> {
    vec![
        ("fig1", fig1()),
        ("fig2", fig2()),
        ("smalltest", smalltest()),
        ("swaptest", swaptest()),
        ("tinycutoff", tinycutoff()),
    ]
}
