//! Protocol execution on a chosen engine and per-cycle analysis.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{Engine, GaussianEngine, Preparation};
use crate::error::{Error, Result};
use crate::model::{build_default_cycle, CycleSchedule, RampShape, StrokeDurations, SystemParams};
use crate::polariton::{
    bogoliubov_basis, cooling_limit, exchange_efficiency, survival_factor, CoolingMapParams,
};
use crate::quadratic::Protocol;

/// Initial occupations of a protocol run. All means are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Thermal polaritons at the starting detuning, thermal targets.
    Polariton {
        n_upper: f64,
        n_lower: f64,
        targets: Vec<f64>,
    },
    /// Thermal bare modes, in the order `a, b, targets...`.
    Bare { occupations: Vec<f64> },
}

impl InitialCondition {
    /// Every mode at its bath occupation, the cavity-like polariton taking `n_a`.
    pub fn from_baths(params: &SystemParams) -> Self {
        InitialCondition::Polariton {
            n_upper: params.n_a,
            n_lower: params.n_b,
            targets: params.n_targets.clone(),
        }
    }

    pub fn preparation(&self, params: &SystemParams, delta: f64) -> Result<Preparation> {
        match self {
            InitialCondition::Polariton {
                n_upper,
                n_lower,
                targets,
            } => {
                if targets.len() != params.target_count() {
                    return Err(Error::DimensionMismatch {
                        expected: params.target_count(),
                        found: targets.len(),
                    });
                }
                Ok(Preparation::Polariton {
                    basis: bogoliubov_basis(delta, params.omega_b, params.g)?,
                    upper: *n_upper,
                    lower: *n_lower,
                    others: targets.clone(),
                })
            }
            InitialCondition::Bare { occupations } => {
                if occupations.len() != params.mode_count() {
                    return Err(Error::DimensionMismatch {
                        expected: params.mode_count(),
                        found: occupations.len(),
                    });
                }
                Ok(Preparation::Thermal(occupations.clone()))
            }
        }
    }
}

/// Sample times: every stroke boundary plus `per_stroke - 1` equally spaced
/// interior points in each stroke.
pub fn sample_times(schedule: &CycleSchedule, per_stroke: usize) -> Vec<f64> {
    let n = per_stroke.max(1);
    let mut out = Vec::with_capacity(schedule.slot_count() * n + 1);
    for slot in 0..schedule.slot_count() {
        let (a, b) = (schedule.slot_start(slot), schedule.slot_end(slot));
        out.push(a);
        for k in 1..n {
            let t = a + (b - a) * k as f64 / n as f64;
            if t > a && t < b {
                out.push(t);
            }
        }
    }
    out.push(schedule.total_duration());
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub samples_per_stroke: usize,
    pub dissipation: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            samples_per_stroke: 20,
            dissipation: true,
        }
    }
}

/// End of a stroke.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marker {
    pub time: f64,
    pub sample: usize,
    /// Global stroke index.
    pub slot: usize,
    pub cycle: usize,
    /// Position within the cycle.
    pub stroke: usize,
    pub kind: &'static str,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub engine: String,
    pub fingerprint: String,
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// Bare-mode occupations per sample.
    pub occupations: Vec<Vec<f64>>,
    /// `(N_A, N_B)` in the instantaneous polariton basis.
    pub polaritons: Vec<(f64, f64)>,
    pub delta: Vec<f64>,
    pub omega0_active: Vec<f64>,
    /// Global stroke index; a boundary sample belongs to the stroke starting there.
    pub stroke_index: Vec<usize>,
    pub markers: Vec<Marker>,
    pub min_uncertainty_margin: Option<f64>,
    pub max_leakage: Option<f64>,
}

impl Trajectory {
    /// Index of the sample taken exactly at `t`.
    pub fn sample_at(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|x| x.total_cmp(&t)).ok()
    }

    pub fn mode_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn fingerprint(params: &SystemParams, schedule: &CycleSchedule, initial: &InitialCondition, engine: &dyn Engine) -> String {
    let doc = serde_json::json!({
        "params": params,
        "strokes": schedule.strokes(),
        "cycles": schedule.cycles(),
        "initial": initial,
        "engine": format!("{engine:?}"),
    });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn annotate(err: Error, schedule: &CycleSchedule) -> Error {
    let time = match err.root() {
        Error::IntegrationFailure { time, .. } | Error::Truncation { time, .. } => *time,
        _ => return err,
    };
    let mut slot = schedule.slot_at(time);
    // A failure exactly at a boundary was detected while finishing the previous stroke.
    if slot > 0 && schedule.slot_start(slot) == time {
        slot -= 1;
    }
    let per_cycle = schedule.strokes().len();
    err.context(format!(
        "cycle {}, stroke {} ({})",
        slot / per_cycle,
        slot % per_cycle,
        schedule.stroke_at_slot(slot).name()
    ))
}

/// Run `schedule` on `engine` and evaluate polariton observables at every sample.
pub fn run_protocol(
    params: &SystemParams,
    schedule: &CycleSchedule,
    engine: &dyn Engine,
    initial: &InitialCondition,
    options: &RunOptions,
) -> Result<Trajectory> {
    let mut protocol = Protocol::new(params.clone(), schedule.clone())?;
    protocol.dissipation = options.dissipation;
    let prep = initial.preparation(params, schedule.controls(0.0).delta)?;
    let times = sample_times(schedule, options.samples_per_stroke);
    let output = engine
        .run(&prep, &protocol, &times)
        .map_err(|e| annotate(e, schedule))?;

    let last_slot = schedule.slot_count() - 1;
    let mut traj = Trajectory {
        engine: engine.name().to_string(),
        fingerprint: fingerprint(params, schedule, initial, engine),
        labels: params.mode_labels(),
        times: Vec::with_capacity(times.len()),
        occupations: Vec::with_capacity(times.len()),
        polaritons: Vec::with_capacity(times.len()),
        delta: Vec::with_capacity(times.len()),
        omega0_active: Vec::with_capacity(times.len()),
        stroke_index: Vec::with_capacity(times.len()),
        markers: Vec::new(),
        min_uncertainty_margin: output.min_uncertainty_margin,
        max_leakage: output.max_leakage,
    };
    for state in &output.samples {
        let t = state.time;
        let slot = schedule.slot_at(t).min(last_slot);
        let controls = schedule.controls_in(slot, t);
        let basis = bogoliubov_basis(controls.delta, params.omega_b, params.g)?;
        traj.polaritons.push(state.polariton_occupations(&basis)?);
        traj.occupations.push(state.mode_occupations());
        traj.times.push(t);
        traj.delta.push(controls.delta);
        traj.omega0_active.push(controls.omega0_active());
        traj.stroke_index.push(slot);
    }
    let per_cycle = schedule.strokes().len();
    for slot in 0..schedule.slot_count() {
        let time = schedule.slot_end(slot);
        let sample = traj
            .sample_at(time)
            .ok_or_else(|| Error::invalid("samples", format!("no sample at stroke boundary {time}")))?;
        let stroke = schedule.stroke_at_slot(slot);
        traj.markers.push(Marker {
            time,
            sample,
            slot,
            cycle: slot / per_cycle,
            stroke: slot % per_cycle,
            kind: stroke.name(),
            target: stroke.exchange_target(),
        });
    }
    Ok(traj)
}

/// Fixed point of the affine map through the last three values, or the last
/// value when the sequence does not contract monotonically.
pub fn estimate_asymptote(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let last = *values.last()?;
    if n < 3 {
        return Some(last);
    }
    let (x1, x2, x3) = (values[n - 3], values[n - 2], values[n - 1]);
    let d1 = x2 - x1;
    let d2 = x3 - x2;
    if d1 == 0.0 {
        return Some(last);
    }
    let slope = d2 / d1;
    if (0.0..1.0).contains(&slope) {
        Some(x3 + slope * d2 / (1.0 - slope))
    } else {
        Some(last)
    }
}

fn relative(measured: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        measured.abs()
    } else {
        (measured - predicted) / predicted.abs()
    }
}

/// Per-target comparison of the simulated exchanges with the analytic map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetReport {
    pub target: usize,
    pub label: String,
    /// Occupation at the start of every exchange stroke.
    pub before: Vec<f64>,
    /// Occupation at the end of every exchange stroke.
    pub after: Vec<f64>,
    /// Single exchange with the fluid at `n_a`, applied to the measured `before`.
    pub predicted_after: Vec<f64>,
    /// Thermalization from the measured previous `after`; none for the first exchange.
    pub predicted_before: Vec<Option<f64>>,
    pub after_deviation: Vec<f64>,
    pub before_deviation: Vec<Option<f64>>,
    pub eta: f64,
    pub r: f64,
    pub asymptote: f64,
    pub limit: f64,
    /// `(asymptote - limit) / limit`.
    pub limit_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub cycles: usize,
    pub targets: Vec<TargetReport>,
}

/// Cycle-map parameters for one target: `eta` from its first exchange
/// pulse, `r` from one full period.
pub fn cooling_map(params: &SystemParams, schedule: &CycleSchedule, target: usize) -> Result<CoolingMapParams> {
    let first = *schedule
        .exchange_slots(target)
        .first()
        .ok_or_else(|| Error::invalid("schedule", format!("target {target} is never exchanged")))?;
    let controls = schedule.controls_in(first, schedule.slot_start(first));
    let basis = bogoliubov_basis(controls.delta, params.omega_b, params.g)?;
    let (eta, _) = exchange_efficiency(&basis, params.delta[target], controls.omega0_for(target))?;
    Ok(CoolingMapParams {
        eta,
        r: survival_factor(params.gamma, &[schedule.period()]),
        n_a: params.n_a,
        n_c: params.n_targets[target],
    })
}

pub fn analyze_cycles(traj: &Trajectory, params: &SystemParams, schedule: &CycleSchedule) -> Result<CycleReport> {
    let mut targets = Vec::new();
    for target in 0..params.target_count() {
        let slots = schedule.exchange_slots(target);
        if slots.is_empty() {
            continue;
        }
        let label = params.mode_labels()[2 + target].clone();
        let mode = traj
            .mode_index(&label)
            .ok_or_else(|| Error::invalid("trajectory", format!("no mode {label}")))?;
        let at = |t: f64| {
            traj.sample_at(t)
                .map(|i| traj.occupations[i][mode])
                .ok_or_else(|| Error::invalid("trajectory", format!("no sample at exchange boundary {t}")))
        };
        let mut before = Vec::with_capacity(slots.len());
        let mut after = Vec::with_capacity(slots.len());
        for &slot in &slots {
            before.push(at(schedule.slot_start(slot))?);
            after.push(at(schedule.slot_end(slot))?);
        }
        let map = cooling_map(params, schedule, target)?;
        let (eta, r) = (map.eta, map.r);
        let limit = cooling_limit(&map)?;
        let predicted_after: Vec<f64> = before.iter().map(|&b| map.heat_exchange(b, params.n_a)).collect();
        let predicted_before: Vec<Option<f64>> = (0..before.len())
            .map(|k| (k > 0).then(|| map.thermalize(after[k - 1])))
            .collect();
        let asymptote = estimate_asymptote(&after).expect("at least one exchange");
        targets.push(TargetReport {
            target,
            label,
            after_deviation: after.iter().zip(&predicted_after).map(|(&m, &p)| relative(m, p)).collect(),
            before_deviation: before
                .iter()
                .zip(&predicted_before)
                .map(|(&m, p)| p.map(|p| relative(m, p)))
                .collect(),
            before,
            after,
            predicted_after,
            predicted_before,
            eta,
            r,
            asymptote,
            limit,
            limit_deviation: relative(asymptote, limit),
        });
    }
    if targets.is_empty() {
        return Err(Error::invalid("schedule", "no exchange strokes to analyze"));
    }
    Ok(CycleReport {
        cycles: schedule.cycles(),
        targets,
    })
}

/// Largest change of the upper-polariton population, in the instantaneous
/// basis, during a lossless expansion ramp of duration `tau` from `delta_i`
/// to `delta_f`, starting from thermal polaritons at `(n_a, n_b)`.
pub fn adiabaticity_probe(params: &SystemParams, tau: f64, shape: RampShape) -> Result<f64> {
    let durations = StrokeDurations::new(tau, tau, tau, tau);
    let (schedule, _) = build_default_cycle(params, durations, &[0], 1, shape)?;
    let protocol = Protocol::new(params.clone(), schedule.clone())?.without_dissipation();
    let prep = InitialCondition::from_baths(params).preparation(params, params.delta_i)?;
    let samples: Vec<f64> = (0..=64).map(|k| tau * k as f64 / 64.0).collect();
    let out = GaussianEngine::default().run(&prep, &protocol, &samples)?;
    let mut start = None;
    let mut worst: f64 = 0.0;
    for state in &out.samples {
        let delta = schedule.controls_in(0, state.time).delta;
        let basis = bogoliubov_basis(delta, params.omega_b, params.g)?;
        let (na, _) = state.polariton_occupations(&basis)?;
        let n0 = *start.get_or_insert(na);
        worst = worst.max((na - n0).abs());
    }
    Ok(worst)
}

/// Indices `k` where the probe result at `taus[k + 1]` exceeds the one at
/// `taus[k]` by more than `slack`.
pub fn monotonicity_violations(values: &[f64], slack: f64) -> Vec<usize> {
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + slack)
        .map(|(k, _)| k)
        .collect()
}

/// Largest absolute difference between two trajectories over every sample,
/// bare-mode occupation and polariton occupation.
pub fn max_occupation_deviation(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times != b.times || a.labels != b.labels {
        return Err(Error::invalid("trajectory", "trajectories are sampled differently"));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.occupations.iter().zip(&b.occupations) {
        for (p, q) in x.iter().zip(y) {
            worst = worst.max((p - q).abs());
        }
    }
    for (x, y) in a.polaritons.iter().zip(&b.polaritons) {
        worst = worst.max((x.0 - y.0).abs()).max((x.1 - y.1).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// The reference run could not be trusted (truncation).
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation {
    pub verdict: Verdict,
    pub deviation: Option<f64>,
    pub threshold: f64,
    pub max_leakage: Option<f64>,
    pub note: Option<String>,
}

/// Compare a Gaussian run with a Fock run of the same protocol. Truncation
/// failures of the Fock run make the comparison inconclusive.
pub fn cross_validate(gaussian: Result<Trajectory>, fock: Result<Trajectory>, threshold: f64) -> Result<CrossValidation> {
    let gaussian = gaussian?;
    let fock = match fock {
        Ok(t) => t,
        Err(e) if matches!(e.root(), Error::Truncation { .. }) => {
            return Ok(CrossValidation {
                verdict: Verdict::Inconclusive,
                deviation: None,
                threshold,
                max_leakage: match e.root() {
                    Error::Truncation { leakage, .. } => Some(*leakage),
                    _ => None,
                },
                note: Some(e.to_string()),
            })
        }
        Err(e) => return Err(e),
    };
    let deviation = max_occupation_deviation(&gaussian, &fock)?;
    Ok(CrossValidation {
        verdict: if deviation < threshold { Verdict::Pass } else { Verdict::Fail },
        deviation: Some(deviation),
        threshold,
        max_leakage: fock.max_leakage,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polariton::iterate_cooling_map;

    fn fig1() -> SystemParams {
        SystemParams {
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
        }
    }

    #[test]
    fn sample_grid_hits_boundaries() {
        let (schedule, _) = build_default_cycle(
            &fig1(),
            StrokeDurations::new(0.04, 0.008, 0.04, 0.1),
            &[0],
            2,
            RampShape::Linear,
        )
        .unwrap();
        let times = sample_times(&schedule, 5);
        assert_eq!(times.len(), 8 * 5 + 1);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        for b in schedule.boundaries() {
            assert!(times.contains(&b));
        }
    }

    #[test]
    fn asymptote_of_geometric_sequence() {
        let map = CoolingMapParams {
            eta: 0.7,
            r: 0.8,
            n_a: 0.2,
            n_c: 10.0,
        };
        let seq = iterate_cooling_map(&map, 10.0, 3).unwrap();
        let fixed = cooling_limit(&map).unwrap();
        assert!((estimate_asymptote(&seq).unwrap() - fixed).abs() < 1e-12);
        assert_eq!(estimate_asymptote(&[1.0, 2.0]), Some(2.0));
        assert_eq!(estimate_asymptote(&[]), None);
        // Oscillating sequences fall back to the last value.
        assert_eq!(estimate_asymptote(&[1.0, 0.5, 0.9]), Some(0.9));
    }

    #[test]
    fn synthetic_trajectory_has_zero_deviation() {
        let params = fig1();
        let (schedule, _) = build_default_cycle(
            &params,
            StrokeDurations::new(0.04, 0.008, 0.04, 0.1),
            &[0],
            3,
            RampShape::Linear,
        )
        .unwrap();
        let basis = bogoliubov_basis(params.delta_f, params.omega_b, params.g).unwrap();
        let (eta, _) = exchange_efficiency(&basis, params.delta[0], params.omega_0).unwrap();
        let map = CoolingMapParams {
            eta,
            r: survival_factor(1.0, &[schedule.period()]),
            n_a: params.n_a,
            n_c: 12.0,
        };
        let times = schedule.boundaries();
        // Before/after values generated by the map itself.
        let mut occ = Vec::new();
        let mut current = 12.0;
        for slot in 0..schedule.slot_count() {
            if schedule.stroke_at_slot(slot).exchange_target().is_some() {
                if slot > 1 {
                    current = map.thermalize(current);
                }
                occ.push(current);
                current = map.heat_exchange(current, params.n_a);
            } else {
                occ.push(current);
            }
        }
        occ.push(current);
        let traj = Trajectory {
            engine: "synthetic".into(),
            fingerprint: String::new(),
            labels: params.mode_labels(),
            occupations: occ.iter().map(|&c| vec![0.0, 0.0, c]).collect(),
            polaritons: vec![(0.0, 0.0); times.len()],
            delta: vec![0.0; times.len()],
            omega0_active: vec![0.0; times.len()],
            stroke_index: vec![0; times.len()],
            times,
            markers: vec![],
            min_uncertainty_margin: None,
            max_leakage: None,
        };
        let report = analyze_cycles(&traj, &params, &schedule).unwrap();
        let t = &report.targets[0];
        assert_eq!(t.after.len(), 3);
        assert!(t.after_deviation.iter().all(|d| d.abs() < 1e-14));
        assert!(t.before_deviation.iter().flatten().all(|d| d.abs() < 1e-14));
        assert!(t.before_deviation[0].is_none());
    }

    #[test]
    fn initial_condition_json() {
        let json = r#"{"basis": "polariton", "n_upper": 0.5, "n_lower": 2, "targets": [12]}"#;
        let init: InitialCondition = serde_json::from_str(json).unwrap();
        assert_eq!(init, InitialCondition::from_baths(&fig1()));
        let bad = r#"{"basis": "bare", "occupations": [0, 1, 2], "extra": 1}"#;
        assert!(serde_json::from_str::<InitialCondition>(bad).is_err());
        let wrong = InitialCondition::Bare {
            occupations: vec![0.0, 1.0],
        };
        assert!(wrong.preparation(&fig1(), -6000.0).is_err());
    }

    #[test]
    fn truncation_is_inconclusive() {
        let (schedule, _) = build_default_cycle(
            &fig1(),
            StrokeDurations::new(0.04, 0.008, 0.04, 0.1),
            &[0],
            1,
            RampShape::Linear,
        )
        .unwrap();
        let err = Error::Truncation {
            mode: 2,
            leakage: 0.1,
            threshold: 1e-3,
            time: 0.0,
        };
        let fake = Trajectory {
            engine: "x".into(),
            fingerprint: String::new(),
            labels: vec!["a".into()],
            times: schedule.boundaries(),
            occupations: vec![vec![1.0]; 5],
            polaritons: vec![(0.0, 0.0); 5],
            delta: vec![0.0; 5],
            omega0_active: vec![0.0; 5],
            stroke_index: vec![0; 5],
            markers: vec![],
            min_uncertainty_margin: None,
            max_leakage: None,
        };
        let cv = cross_validate(Ok(fake.clone()), Err(annotate(err, &schedule)), 5e-2).unwrap();
        assert_eq!(cv.verdict, Verdict::Inconclusive);
        assert_eq!(cv.max_leakage, Some(0.1));
        let mut other = fake.clone();
        other.occupations[3][0] = 1.2;
        let cv = cross_validate(Ok(fake.clone()), Ok(other), 5e-2).unwrap();
        assert_eq!(cv.verdict, Verdict::Fail);
        assert!((cv.deviation.unwrap() - 0.2).abs() < 1e-12);
        let cv = cross_validate(Ok(fake.clone()), Ok(fake), 5e-2).unwrap();
        assert_eq!(cv.verdict, Verdict::Pass);
    }

    #[test]
    fn violations_respect_slack() {
        assert!(monotonicity_violations(&[0.5, 0.3, 0.3005, 0.1], 1e-3).is_empty());
        assert_eq!(monotonicity_violations(&[0.5, 0.3, 0.35, 0.1], 1e-3), vec![1]);
    }
}
