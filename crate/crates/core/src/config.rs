//! JSON run configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{Engine, EngineRegistry, EngineSettings};
use crate::error::{Error, Result};
use crate::fock::FockOptions;
use crate::gaussian::IntegratorOptions;
use crate::model::{build_default_cycle, CycleSchedule, RampShape, ScheduleWarning, Stroke, StrokeDurations, SystemParams};
use crate::runner::{InitialCondition, RunOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Four-stroke sub-cycle per target, in `targets` order (all targets by default).
    DefaultCycle {
        durations: StrokeDurations,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        targets: Option<Vec<usize>>,
        cycles: usize,
        #[serde(default)]
        shape: RampShape,
    },
    Strokes { strokes: Vec<Stroke>, cycles: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    /// Fock dimension per mode, in the order `a, b, targets...`.
    pub cutoffs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_leakage")]
    pub leakage_threshold: f64,
}

fn default_leakage() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_steps")]
    pub steps_per_unit: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            steps_per_unit: default_steps(),
        }
    }
}

fn default_tol() -> f64 {
    1e-10
}

fn default_steps() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_samples")]
    pub samples_per_stroke: usize,
    /// Default CSV destination when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            samples_per_stroke: default_samples(),
            path: None,
        }
    }
}

fn default_samples() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub from: f64,
    pub to: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitSweep {
    Eta,
    R,
    /// Total cycle duration, entering through `r = exp(-gamma * tau)`.
    Tau,
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    pub sweep: LimitSweep,
    #[serde(default)]
    pub from: f64,
    #[serde(default)]
    pub to: f64,
    #[serde(default = "one_sample")]
    pub samples: usize,
    /// Fixed values; derived from the schedule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Target mode whose bath enters the limit.
    #[serde(default)]
    pub target: usize,
}

fn one_sample() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
        }
    }
}

fn default_threshold() -> f64 {
    5e-2
}

fn default_engine() -> String {
    "gaussian".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub params: SystemParams,
    pub schedule: ScheduleSpec,
    /// Thermal polaritons at the bath occupations when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(default = "default_engine")]
    pub engine: String,
    #[serde(default = "yes")]
    pub dissipation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock: Option<FockConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
}

impl RunConfig {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every precondition that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.params.validate()?;
        let (schedule, _) = self.schedule()?;
        let initial = self.initial();
        initial.preparation(&self.params, schedule.controls(0.0).delta)?;
        if !(self.integrator.tol > 0.0 && self.integrator.steps_per_unit > 0.0) {
            return Err(Error::invalid("integrator", "tol and steps_per_unit must be positive"));
        }
        if self.output.samples_per_stroke == 0 {
            return Err(Error::invalid("samples_per_stroke", "must be at least 1"));
        }
        if let Some(fock) = &self.fock {
            if fock.cutoffs.len() != self.params.mode_count() {
                return Err(Error::invalid(
                    "cutoffs",
                    format!(
                        "expected {} cutoffs (one per mode), got {}",
                        self.params.mode_count(),
                        fock.cutoffs.len()
                    ),
                ));
            }
            if !(fock.leakage_threshold > 0.0 && fock.leakage_threshold < 1.0) {
                return Err(Error::invalid("leakage_threshold", "must lie in (0, 1)"));
            }
        }
        EngineRegistry::default().create(&self.engine, &self.engine_settings())?;
        if let Some(sp) = &self.spectrum {
            if sp.samples == 0 || !(sp.from < sp.to) {
                return Err(Error::invalid("spectrum", "empty detuning range"));
            }
        }
        if let Some(limit) = &self.limit {
            if limit.samples == 0 {
                return Err(Error::invalid("limit", "need at least one sample"));
            }
            if limit.sweep != LimitSweep::Point && !(limit.from <= limit.to) {
                return Err(Error::invalid("limit", "sweep range is reversed"));
            }
            if limit.target >= self.params.target_count() {
                return Err(Error::UnknownTarget {
                    index: limit.target,
                    count: self.params.target_count(),
                });
            }
        }
        if !(self.validate.threshold > 0.0) {
            return Err(Error::invalid("threshold", "must be positive"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<(CycleSchedule, Vec<ScheduleWarning>)> {
        match &self.schedule {
            ScheduleSpec::DefaultCycle {
                durations,
                targets,
                cycles,
                shape,
            } => {
                let all: Vec<usize> = (0..self.params.target_count()).collect();
                let targets = targets.as_deref().unwrap_or(&all);
                build_default_cycle(&self.params, *durations, targets, *cycles, *shape)
            }
            ScheduleSpec::Strokes { strokes, cycles } => {
                let schedule = CycleSchedule::new(&self.params, strokes.clone(), *cycles)?;
                let warnings = schedule.warnings(&self.params);
                Ok((schedule, warnings))
            }
        }
    }

    pub fn initial(&self) -> InitialCondition {
        self.initial
            .clone()
            .unwrap_or_else(|| InitialCondition::from_baths(&self.params))
    }

    pub fn engine_settings(&self) -> EngineSettings {
        EngineSettings {
            integrator: IntegratorOptions {
                tol: self.integrator.tol,
                steps_per_unit: self.integrator.steps_per_unit,
                ..IntegratorOptions::default()
            },
            fock: FockOptions {
                dt: self.fock.as_ref().and_then(|f| f.dt),
                leakage_threshold: self.fock.as_ref().map_or(default_leakage(), |f| f.leakage_threshold),
                ..FockOptions::default()
            },
            cutoffs: self.fock.as_ref().map(|f| f.cutoffs.clone()),
        }
    }

    pub fn engine(&self, name: Option<&str>) -> Result<Box<dyn Engine>> {
        EngineRegistry::default().create(name.unwrap_or(&self.engine), &self.engine_settings())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            samples_per_stroke: self.output.samples_per_stroke,
            dissipation: self.dissipation,
        }
    }

    /// Short hash of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "params": {
            "omega_b": 2000, "delta": [2000], "g": 200, "kappa": 40,
            "n_a": 0.5, "n_b": 2, "n_targets": [12],
            "delta_i": -6000, "delta_f": -600, "omega_0": 200
        },
        "schedule": {
            "kind": "default_cycle",
            "durations": {"expansion": 0.04, "exchange": 0.008, "compression": 0.04, "thermalization": 0.1},
            "cycles": 3
        }
    }"#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.engine, "gaussian");
        assert!(c.dissipation);
        assert_eq!(c.params.gamma, 1.0);
        assert_eq!(c.output.samples_per_stroke, 20);
        assert_eq!(c.initial(), InitialCondition::from_baths(&c.params));
        let (s, _) = c.schedule().unwrap();
        assert!((s.period() - 0.188).abs() < 1e-12);
        let again = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.fingerprint(), c.fingerprint());
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = MINIMAL.replacen("\"g\": 200", "\"g\": 200, \"gg\": 1", 1);
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("gg"), "{err}");
        let text = MINIMAL.replacen("\"schema_version\": 1", "\"schema_version\": 1, \"extra\": true", 1);
        assert!(RunConfig::from_json(&text).unwrap_err().to_string().contains("extra"));
    }

    #[test]
    fn rejects_bad_values() {
        let text = MINIMAL.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(RunConfig::from_json(&text).is_err());
        let text = MINIMAL.replacen("\"g\": 200", "\"g\": 900", 1);
        assert_eq!(RunConfig::from_json(&text).unwrap_err().kind(), crate::ErrorKind::Physics);
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.engine = "fock".into();
        assert!(c.validate().is_err());
        c.fock = Some(FockConfig {
            cutoffs: vec![4, 4],
            dt: None,
            leakage_threshold: 1e-3,
        });
        assert!(c.validate().is_err());
        c.fock.as_mut().unwrap().cutoffs.push(4);
        c.validate().unwrap();
        c.engine = "exact".into();
        assert!(matches!(c.validate(), Err(Error::UnknownEngine(_))));
    }
}
