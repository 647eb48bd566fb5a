//! Quadratic bosonic models with thermal damping, the common input of both engines.
//!
//! Quadratures are ordered mode by mode, `R = (x_0, p_0, x_1, p_1, ...)`, with
//! `x = (a + a†)/√2` and `p = -i(a - a†)/√2`. A Hamiltonian is stored as the
//! symmetric matrix `M` with `H = ½ Rᵀ M R` up to a constant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Controls, CycleSchedule, SystemParams};

#[derive(Debug, Clone, PartialEq)]
pub struct BosonMode {
    pub label: String,
    pub frequency: f64,
    /// Energy decay rate: `d<N>/dt = -rate (<N> - bath)` when uncoupled.
    pub rate: f64,
    pub bath: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// `strength (a_i + a_i†)(a_j + a_j†)`.
    Position { i: usize, j: usize, strength: f64 },
    /// `strength (a_i† a_j + a_j† a_i)`.
    Exchange { i: usize, j: usize, strength: f64 },
}

impl Coupling {
    pub fn modes(&self) -> (usize, usize) {
        match *self {
            Coupling::Position { i, j, .. } | Coupling::Exchange { i, j, .. } => (i, j),
        }
    }

    pub fn strength(&self) -> f64 {
        match *self {
            Coupling::Position { strength, .. } | Coupling::Exchange { strength, .. } => strength,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub modes: Vec<BosonMode>,
    pub couplings: Vec<Coupling>,
}

impl QuadraticModel {
    pub fn new(modes: Vec<BosonMode>, couplings: Vec<Coupling>) -> Result<Self> {
        for m in &modes {
            if !(m.frequency.is_finite() && m.rate.is_finite() && m.bath.is_finite()) {
                return Err(Error::invalid("mode", format!("mode {} has non-finite data", m.label)));
            }
            if m.rate < 0.0 || m.bath < 0.0 {
                return Err(Error::invalid(
                    "mode",
                    format!("mode {} has a negative rate or bath occupation", m.label),
                ));
            }
        }
        for c in &couplings {
            let (i, j) = c.modes();
            if i == j || i >= modes.len() || j >= modes.len() {
                return Err(Error::invalid("coupling", format!("bad mode pair ({i}, {j})")));
            }
        }
        Ok(Self { modes, couplings })
    }

    /// The linearized optomechanical model at the given controls.
    ///
    /// Modes are `a` (frequency `-delta`), `b`, then the targets. Every target
    /// carries an exchange coupling to `b`, zero when its pulse is off, so the
    /// coupling topology never changes along a protocol.
    pub fn from_params(params: &SystemParams, controls: &Controls, dissipation: bool) -> Self {
        let rate = |r: f64| if dissipation { r } else { 0.0 };
        let mut modes = vec![
            BosonMode {
                label: "a".into(),
                frequency: -controls.delta,
                rate: rate(params.kappa),
                bath: params.n_a,
            },
            BosonMode {
                label: "b".into(),
                frequency: params.omega_b,
                rate: rate(params.gamma),
                bath: params.n_b,
            },
        ];
        let mut couplings = vec![Coupling::Position {
            i: 0,
            j: 1,
            strength: params.g,
        }];
        let labels = params.mode_labels();
        for (k, (&delta, &bath)) in params.delta.iter().zip(&params.n_targets).enumerate() {
            modes.push(BosonMode {
                label: labels[2 + k].clone(),
                frequency: delta,
                rate: rate(params.gamma),
                bath,
            });
            couplings.push(Coupling::Exchange {
                i: 1,
                j: 2 + k,
                strength: controls.omega0_for(k),
            });
        }
        Self { modes, couplings }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.modes.iter().map(|m| m.label.clone()).collect()
    }

    /// `M` such that `H = ½ Rᵀ M R + const`.
    pub fn hamiltonian_matrix(&self) -> DMatrix<f64> {
        let n = self.mode_count();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (j, mode) in self.modes.iter().enumerate() {
            m[(2 * j, 2 * j)] = mode.frequency;
            m[(2 * j + 1, 2 * j + 1)] = mode.frequency;
        }
        for c in &self.couplings {
            match *c {
                Coupling::Position { i, j, strength } => {
                    m[(2 * i, 2 * j)] += 2.0 * strength;
                    m[(2 * j, 2 * i)] += 2.0 * strength;
                }
                Coupling::Exchange { i, j, strength } => {
                    for q in 0..2 {
                        m[(2 * i + q, 2 * j + q)] += strength;
                        m[(2 * j + q, 2 * i + q)] += strength;
                    }
                }
            }
        }
        m
    }

    /// Largest frequency or rate appearing in the model.
    pub fn frequency_scale(&self) -> f64 {
        let modes = self
            .modes
            .iter()
            .map(|m| m.frequency.abs().max(m.rate));
        let couplings = self.couplings.iter().map(|c| 2.0 * c.strength().abs());
        modes.chain(couplings).fold(0.0, f64::max)
    }
}

/// A time interval over which a model source varies smoothly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub slot: usize,
}

/// Time-dependent quadratic model, piecewise smooth over segments.
pub trait ModelSource: Sync {
    fn mode_labels(&self) -> Vec<String>;

    /// Smooth pieces covering `[0, end_time]` in order.
    fn segments(&self) -> Vec<Segment>;

    /// Model at `t`, using the formula of segment `slot`.
    fn model(&self, slot: usize, t: f64) -> QuadraticModel;

    /// Upper bound on the frequencies and rates met along the way.
    fn frequency_scale(&self) -> f64;

    fn end_time(&self) -> f64 {
        self.segments().last().map_or(0.0, |s| s.end)
    }

    /// Schedule controls behind the model, if the source is a protocol.
    fn controls(&self, _slot: usize, _t: f64) -> Option<Controls> {
        None
    }
}

/// A time-independent model held for a fixed duration.
#[derive(Debug, Clone)]
pub struct StaticModel {
    pub model: QuadraticModel,
    pub duration: f64,
}

impl ModelSource for StaticModel {
    fn mode_labels(&self) -> Vec<String> {
        self.model.labels()
    }

    fn segments(&self) -> Vec<Segment> {
        vec![Segment {
            start: 0.0,
            end: self.duration,
            slot: 0,
        }]
    }

    fn model(&self, _slot: usize, _t: f64) -> QuadraticModel {
        self.model.clone()
    }

    fn frequency_scale(&self) -> f64 {
        self.model.frequency_scale()
    }
}

/// System parameters driven through a stroke schedule.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub params: SystemParams,
    pub schedule: CycleSchedule,
    pub dissipation: bool,
}

impl Protocol {
    pub fn new(params: SystemParams, schedule: CycleSchedule) -> Result<Self> {
        params.validate()?;
        if schedule.target_count() != params.target_count() {
            return Err(Error::DimensionMismatch {
                expected: params.target_count(),
                found: schedule.target_count(),
            });
        }
        Ok(Self {
            params,
            schedule,
            dissipation: true,
        })
    }

    pub fn without_dissipation(mut self) -> Self {
        self.dissipation = false;
        self
    }
}

impl ModelSource for Protocol {
    fn mode_labels(&self) -> Vec<String> {
        self.params.mode_labels()
    }

    fn segments(&self) -> Vec<Segment> {
        (0..self.schedule.slot_count())
            .map(|slot| Segment {
                start: self.schedule.slot_start(slot),
                end: self.schedule.slot_end(slot),
                slot,
            })
            .collect()
    }

    fn model(&self, slot: usize, t: f64) -> QuadraticModel {
        let controls = self.schedule.controls_in(slot, t);
        QuadraticModel::from_params(&self.params, &controls, self.dissipation)
    }

    fn frequency_scale(&self) -> f64 {
        let p = &self.params;
        let mut scale = p.delta_i.abs().max(p.delta_f.abs()).max(p.omega_b);
        for &d in &p.delta {
            scale = scale.max(d.abs());
        }
        for stroke in self.schedule.strokes() {
            if let crate::model::Stroke::Exchange { amplitude, .. } = *stroke {
                scale = scale.max(2.0 * amplitude);
            }
        }
        scale.max(2.0 * p.g).max(p.kappa).max(p.gamma)
    }

    fn end_time(&self) -> f64 {
        self.schedule.total_duration()
    }

    fn controls(&self, slot: usize, t: f64) -> Option<Controls> {
        Some(self.schedule.controls_in(slot, t))
    }
}
