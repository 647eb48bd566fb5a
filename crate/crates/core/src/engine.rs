//! Interchangeable propagation back-ends, selected by name at run time.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::fock::{propagate_fock, thermal_state, FockOptions, FockState};
use crate::gaussian::{propagate, GaussianState, IntegratorOptions};
use crate::polariton::PolaritonBasis;
use crate::quadratic::ModelSource;

/// Initial state handed to an engine.
#[derive(Debug, Clone)]
pub enum Preparation {
    /// Product of thermal states of the bare modes.
    Thermal(Vec<f64>),
    /// Thermal polaritons of the `(a, b)` pair in `basis`, other modes thermal
    /// with `others`.
    Polariton {
        basis: PolaritonBasis,
        upper: f64,
        lower: f64,
        others: Vec<f64>,
    },
    /// Product of Fock number states. Not Gaussian.
    Number(Vec<usize>),
}

/// Sampled moments plus engine-specific health figures.
#[derive(Debug, Clone)]
pub struct EngineOutput {
    pub samples: Vec<GaussianState>,
    /// Smallest eigenvalue of `cov + iJ/2` over the samples (Gaussian engine).
    pub min_uncertainty_margin: Option<f64>,
    /// Largest top-level population seen at any step (Fock engine).
    pub max_leakage: Option<f64>,
}

pub trait Engine: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Propagate `initial` from `t = 0` through `source`, sampling at `samples`.
    fn run(&self, initial: &Preparation, source: &dyn ModelSource, samples: &[f64]) -> Result<EngineOutput>;
}

#[derive(Debug, Clone, Default)]
pub struct GaussianEngine {
    pub options: IntegratorOptions,
}

impl Engine for GaussianEngine {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn run(&self, initial: &Preparation, source: &dyn ModelSource, samples: &[f64]) -> Result<EngineOutput> {
        let labels = source.mode_labels();
        let state = match initial {
            Preparation::Thermal(occ) => GaussianState::thermal(labels, occ)?,
            Preparation::Polariton {
                basis,
                upper,
                lower,
                others,
            } => {
                let mut occ = vec![0.0, 0.0];
                occ.extend_from_slice(others);
                GaussianState::thermal(labels, &occ)?.with_polariton_populations(basis, *upper, *lower)?
            }
            Preparation::Number(_) => {
                return Err(Error::invalid(
                    "initial",
                    "number states are not Gaussian; use the fock engine",
                ))
            }
        };
        let samples = propagate(&state, source, samples, &self.options)?;
        let margin = samples
            .iter()
            .map(GaussianState::uncertainty_margin)
            .fold(f64::INFINITY, f64::min);
        Ok(EngineOutput {
            samples,
            min_uncertainty_margin: Some(margin),
            max_leakage: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FockEngine {
    pub cutoffs: Vec<usize>,
    pub options: FockOptions,
}

impl Engine for FockEngine {
    fn name(&self) -> &'static str {
        "fock"
    }

    fn run(&self, initial: &Preparation, source: &dyn ModelSource, samples: &[f64]) -> Result<EngineOutput> {
        let state = match initial {
            Preparation::Thermal(occ) => thermal_state(&self.cutoffs, occ, self.options.leakage_threshold)?,
            Preparation::Number(levels) => FockState::number_state(&self.cutoffs, levels)?,
            Preparation::Polariton { .. } => {
                return Err(Error::invalid(
                    "initial",
                    "the fock engine supports bare-mode initial states only",
                ))
            }
        };
        let run = propagate_fock(&state, source, samples, &self.options)?;
        Ok(EngineOutput {
            samples: run.samples.into_iter().map(|s| s.moments).collect(),
            min_uncertainty_margin: None,
            max_leakage: Some(run.max_leakage),
        })
    }
}

/// Everything an engine factory may need.
#[derive(Debug, Clone, Default)]
pub struct EngineSettings {
    pub integrator: IntegratorOptions,
    pub fock: FockOptions,
    pub cutoffs: Option<Vec<usize>>,
}

type Factory = Box<dyn Fn(&EngineSettings) -> Result<Box<dyn Engine>> + Send + Sync>;

/// Engines registered by name.
pub struct EngineRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl fmt::Debug for EngineRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl EngineRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: &'static str,
        factory: impl Fn(&EngineSettings) -> Result<Box<dyn Engine>> + Send + Sync + 'static,
    ) {
        self.factories.insert(name, Box::new(factory));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, settings: &EngineSettings) -> Result<Box<dyn Engine>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownEngine(name.to_string()))?;
        factory(settings)
    }
}

impl Default for EngineRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register("gaussian", |s| {
            Ok(Box::new(GaussianEngine {
                options: s.integrator,
            }))
        });
        reg.register("fock", |s| {
            let cutoffs = s
                .cutoffs
                .clone()
                .ok_or_else(|| Error::invalid("cutoffs", "the fock engine needs per-mode cutoffs"))?;
            Ok(Box::new(FockEngine {
                cutoffs,
                options: s.fock,
            }))
        });
        reg
    }
}
