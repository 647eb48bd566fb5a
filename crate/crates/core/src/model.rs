//! System parameters, the mean-field reduction and the stroke schedule.
//!
//! All frequencies and rates are expressed in units of the mechanical decay
//! rate `gamma` (normally 1) and all times in units of `1/gamma`, so that
//! published parameter sets can be entered verbatim. `hbar = 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linearized model parameters.
///
/// Mode `a` is the cavity field, mode `b` the optomechanically coupled phonon
/// mode and `targets` the additional mechanical modes that are cooled through
/// the parametric `b`-target exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub omega_b: f64,
    /// Rotating-frame frequency of every target mode.
    pub delta: Vec<f64>,
    pub g: f64,
    /// Energy decay rate of the cavity mode.
    pub kappa: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    pub n_a: f64,
    pub n_b: f64,
    /// Bath occupation of every target mode.
    pub n_targets: Vec<f64>,
    pub delta_i: f64,
    pub delta_f: f64,
    pub omega_0: f64,
}

fn one() -> f64 {
    1.0
}

fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {value}")))
    }
}

fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be >= 0, got {value}")))
    }
}

/// Largest coupling for which the polariton spectrum stays real at `delta`.
pub fn stability_limit(delta: f64, omega_b: f64) -> f64 {
    0.5 * (delta.abs() * omega_b).sqrt()
}

/// Fails with [`Error::Instability`] when `g` exceeds the stability limit at `delta`.
pub fn check_stability(delta: f64, omega_b: f64, g: f64) -> Result<()> {
    let limit = stability_limit(delta, omega_b);
    if g <= limit {
        Ok(())
    } else {
        Err(Error::Instability { delta, g, limit })
    }
}

impl SystemParams {
    pub fn target_count(&self) -> usize {
        self.delta.len()
    }

    /// Total number of bosonic modes: cavity, phonon `b` and the targets.
    pub fn mode_count(&self) -> usize {
        2 + self.target_count()
    }

    pub fn mode_labels(&self) -> Vec<String> {
        let mut labels = vec!["a".to_string(), "b".to_string()];
        labels.extend((0..self.target_count()).map(target_label));
        labels
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("gamma", self.gamma)?;
        check_positive("kappa", self.kappa)?;
        check_positive("omega_b", self.omega_b)?;
        check_non_negative("g", self.g)?;
        check_non_negative("omega_0", self.omega_0)?;
        check_non_negative("n_a", self.n_a)?;
        check_non_negative("n_b", self.n_b)?;
        if self.delta.is_empty() {
            return Err(Error::invalid("delta", "at least one target mode is required"));
        }
        if self.delta.len() != self.n_targets.len() {
            return Err(Error::invalid(
                "n_targets",
                format!(
                    "{} bath occupations given for {} target modes",
                    self.n_targets.len(),
                    self.delta.len()
                ),
            ));
        }
        for &d in &self.delta {
            check_finite("delta", d)?;
        }
        for &n in &self.n_targets {
            check_non_negative("n_targets", n)?;
        }
        check_finite("delta_i", self.delta_i)?;
        check_finite("delta_f", self.delta_f)?;
        if !(self.delta_i < self.delta_f && self.delta_f < 0.0) {
            return Err(Error::invalid(
                "delta_f",
                format!(
                    "require delta_i < delta_f < 0, got delta_i = {}, delta_f = {}",
                    self.delta_i, self.delta_f
                ),
            ));
        }
        // The limit grows with |delta|, so the smallest detuning is the binding one.
        check_stability(self.delta_f, self.omega_b, self.g)
    }

    /// Bath occupation of every mode in [`Self::mode_labels`] order.
    pub fn bath_occupations(&self) -> Vec<f64> {
        let mut n = vec![self.n_a, self.n_b];
        n.extend_from_slice(&self.n_targets);
        n
    }
}

pub(crate) fn target_label(index: usize) -> String {
    // c, d, e, ... as in the usual mode naming; fall back to indices past z.
    match u8::try_from(index).ok().and_then(|i| b'c'.checked_add(i)) {
        Some(ch) if ch <= b'z' => (ch as char).to_string(),
        _ => format!("t{index}"),
    }
}

/// Drive parameters entering the mean-field steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldInputs {
    pub alpha_in: f64,
    pub g0: f64,
    pub omega_b: f64,
    /// Bare detuning `omega_p - omega_a`.
    pub delta_bare: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanField {
    pub alpha: f64,
    pub beta: f64,
    pub g: f64,
    pub delta: f64,
}

/// Small-damping steady state of the driven cavity and the resulting
/// linearized coupling and shifted detuning. The pump phase is chosen so that
/// the intracavity amplitude is real.
pub fn mean_field_reduce(inputs: &MeanFieldInputs) -> Result<MeanField> {
    check_finite("alpha_in", inputs.alpha_in)?;
    check_finite("g0", inputs.g0)?;
    check_positive("omega_b", inputs.omega_b)?;
    check_finite("delta_bare", inputs.delta_bare)?;
    if inputs.delta_bare == 0.0 {
        return Err(Error::invalid(
            "delta_bare",
            "the steady-state amplitude diverges at zero bare detuning",
        ));
    }
    let alpha = inputs.alpha_in / inputs.delta_bare;
    let beta = -inputs.g0 * alpha * alpha / inputs.omega_b;
    Ok(MeanField {
        alpha,
        beta,
        g: alpha * inputs.g0,
        delta: inputs.delta_bare - 2.0 * beta * inputs.g0,
    })
}

/// Profile of a detuning ramp as a function of the normalized stroke time `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    #[default]
    Linear,
    /// Raised cosine, zero slope at both ends.
    Cosine,
    /// Constant adiabaticity: the sweep rate scales as the cube of the local
    /// two-level gap `sqrt((|delta| - omega_b)^2 + (2g)^2)`, so the passage
    /// slows down near the avoided crossing.
    Adiabatic,
}

impl fmt::Display for RampShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RampShape::Linear => "linear",
            RampShape::Cosine => "cosine",
            RampShape::Adiabatic => "adiabatic",
        })
    }
}

/// One piece of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stroke {
    /// Detuning sweep with the parametric coupling off.
    Ramp {
        duration: f64,
        from: f64,
        to: f64,
        #[serde(default)]
        shape: RampShape,
    },
    /// Square parametric pulse coupling `b` to one target at fixed detuning.
    Exchange {
        duration: f64,
        target: usize,
        amplitude: f64,
    },
    /// Fixed detuning, no parametric coupling.
    Hold { duration: f64 },
}

impl Stroke {
    pub fn duration(&self) -> f64 {
        match *self {
            Stroke::Ramp { duration, .. }
            | Stroke::Exchange { duration, .. }
            | Stroke::Hold { duration } => duration,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Stroke::Ramp { .. } => "ramp",
            Stroke::Exchange { .. } => "exchange",
            Stroke::Hold { .. } => "hold",
        }
    }

    pub fn exchange_target(&self) -> Option<usize> {
        match *self {
            Stroke::Exchange { target, .. } => Some(target),
            _ => None,
        }
    }
}

/// Instantaneous control values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub delta: f64,
    /// Active parametric pulse `(target, amplitude)`, if any.
    pub exchange: Option<(usize, f64)>,
    /// Global stroke index (cycle * strokes_per_cycle + position).
    pub slot: usize,
}

impl Controls {
    pub fn omega0_for(&self, target: usize) -> f64 {
        match self.exchange {
            Some((t, amp)) if t == target => amp,
            _ => 0.0,
        }
    }

    pub fn omega0_active(&self) -> f64 {
        self.exchange.map_or(0.0, |(_, amp)| amp)
    }
}

/// A recognised but non-fatal problem with a schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleWarning {
    /// A ramp is too fast compared to the inverse polariton splitting.
    NonAdiabaticRamp { stroke: usize, duration: f64, minimum: f64 },
    /// The hold stroke is too short to thermalize the photon-like polariton.
    IncompleteThermalization { stroke: usize, kappa_tau: f64 },
}

impl fmt::Display for ScheduleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleWarning::NonAdiabaticRamp {
                stroke,
                duration,
                minimum,
            } => write!(
                f,
                "stroke {stroke}: ramp duration {duration} is below 5/(2g) = {minimum}; expect non-adiabatic transfer"
            ),
            ScheduleWarning::IncompleteThermalization { stroke, kappa_tau } => write!(
                f,
                "stroke {stroke}: hold gives kappa*tau = {kappa_tau:.3} < 3; the cavity-like polariton will not fully thermalize"
            ),
        }
    }
}

/// Parameters the adiabatic ramp profile needs from the physical model.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CrossingGeometry {
    omega_b: f64,
    half_gap: f64,
}

/// A periodic, time-ordered list of strokes.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSchedule {
    strokes: Vec<Stroke>,
    cycles: usize,
    /// Detuning at the start of every stroke within one cycle.
    levels: Vec<f64>,
    /// Start of every stroke relative to the cycle start.
    offsets: Vec<f64>,
    period: f64,
    crossing: CrossingGeometry,
    target_count: usize,
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl CycleSchedule {
    /// Validate and build a schedule. Every cycle starts and ends at `params.delta_i`.
    pub fn new(params: &SystemParams, strokes: Vec<Stroke>, cycles: usize) -> Result<Self> {
        if strokes.is_empty() {
            return Err(Error::invalid("strokes", "a cycle needs at least one stroke"));
        }
        if cycles == 0 {
            return Err(Error::invalid("cycles", "cycle count must be positive"));
        }
        let mut levels = Vec::with_capacity(strokes.len());
        let mut offsets = Vec::with_capacity(strokes.len());
        let mut level = params.delta_i;
        let mut clock = 0.0;
        for (k, stroke) in strokes.iter().enumerate() {
            let duration = stroke.duration();
            if !(duration.is_finite() && duration > 0.0) {
                return Err(Error::invalid(
                    "duration",
                    format!("stroke {k} has non-positive duration {duration}"),
                ));
            }
            levels.push(level);
            offsets.push(clock);
            clock += duration;
            match *stroke {
                Stroke::Ramp { from, to, .. } => {
                    check_finite("from", from)?;
                    check_finite("to", to)?;
                    if !same_level(from, level) {
                        return Err(Error::invalid(
                            "from",
                            format!("stroke {k} starts at {from} but the detuning is {level}"),
                        ));
                    }
                    if from >= 0.0 || to >= 0.0 {
                        return Err(Error::invalid(
                            "to",
                            format!("stroke {k} leaves the red-detuned regime"),
                        ));
                    }
                    check_stability(from.max(to), params.omega_b, params.g)?;
                    level = to;
                }
                Stroke::Exchange {
                    target, amplitude, ..
                } => {
                    if target >= params.target_count() {
                        return Err(Error::UnknownTarget {
                            index: target,
                            count: params.target_count(),
                        });
                    }
                    check_non_negative("amplitude", amplitude)?;
                }
                Stroke::Hold { .. } => {}
            }
        }
        if !same_level(level, params.delta_i) {
            return Err(Error::invalid(
                "strokes",
                format!(
                    "the cycle ends at detuning {level}, not at delta_i = {}",
                    params.delta_i
                ),
            ));
        }
        check_stability(params.delta_i, params.omega_b, params.g)?;
        Ok(Self {
            strokes,
            cycles,
            levels,
            offsets,
            period: clock,
            crossing: CrossingGeometry {
                omega_b: params.omega_b,
                half_gap: 2.0 * params.g,
            },
            target_count: params.target_count(),
        })
    }

    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn total_duration(&self) -> f64 {
        self.period * self.cycles as f64
    }

    pub fn slot_count(&self) -> usize {
        self.strokes.len() * self.cycles
    }

    pub fn stroke_at_slot(&self, slot: usize) -> &Stroke {
        &self.strokes[slot % self.strokes.len()]
    }

    pub fn slot_start(&self, slot: usize) -> f64 {
        let n = self.strokes.len();
        (slot / n) as f64 * self.period + self.offsets[slot % n]
    }

    pub fn slot_end(&self, slot: usize) -> f64 {
        if slot + 1 == self.slot_count() {
            self.total_duration()
        } else {
            self.slot_start(slot + 1)
        }
    }

    /// All stroke boundaries, including `0` and the end of the last cycle.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.slot_count()).map(|s| self.slot_start(s)).collect();
        out.push(self.total_duration());
        out
    }

    /// Slot containing `t`; boundaries belong to the stroke that starts there.
    pub fn slot_at(&self, t: f64) -> usize {
        let total = self.slot_count();
        let mut lo = 0usize;
        let mut hi = total;
        // Largest slot with start <= t.
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.slot_start(mid) <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn controls(&self, t: f64) -> Controls {
        self.controls_in(self.slot_at(t), t)
    }

    /// Controls at `t` evaluated with the formula of `slot`, clamping `t` to
    /// the slot. Integrators use this so that stage evaluations at the end of
    /// a stroke never leak into the next one.
    pub fn controls_in(&self, slot: usize, t: f64) -> Controls {
        let k = slot % self.strokes.len();
        let level = self.levels[k];
        match self.strokes[k] {
            Stroke::Ramp {
                from, to, shape, ..
            } => {
                let start = self.slot_start(slot);
                let end = self.slot_end(slot);
                let s = if t <= start {
                    0.0
                } else if t >= end {
                    1.0
                } else {
                    (t - start) / (end - start)
                };
                Controls {
                    delta: self.ramp_value(from, to, shape, s),
                    exchange: None,
                    slot,
                }
            }
            Stroke::Exchange {
                target, amplitude, ..
            } => Controls {
                delta: level,
                exchange: Some((target, amplitude)),
                slot,
            },
            Stroke::Hold { .. } => Controls {
                delta: level,
                exchange: None,
                slot,
            },
        }
    }

    fn ramp_value(&self, from: f64, to: f64, shape: RampShape, s: f64) -> f64 {
        if s <= 0.0 {
            return from;
        }
        if s >= 1.0 {
            return to;
        }
        let w = match shape {
            RampShape::Linear => s,
            RampShape::Cosine => 0.5 - 0.5 * (std::f64::consts::PI * s).cos(),
            RampShape::Adiabatic => {
                let a = self.crossing.half_gap;
                if a <= 0.0 {
                    s
                } else {
                    // Distance from the crossing in two-level units; the map
                    // x -> x / sqrt(x^2 + a^2) is the integrated inverse cubic gap.
                    let x0 = -from - self.crossing.omega_b;
                    let x1 = -to - self.crossing.omega_b;
                    let f = |x: f64| x / x.hypot(a);
                    let y = f(x0) + s * (f(x1) - f(x0));
                    let x = a * y / (1.0 - y * y).sqrt();
                    return -(self.crossing.omega_b + x);
                }
            }
        };
        from + (to - from) * w
    }

    /// Global slots of all exchange strokes acting on `target`.
    pub fn exchange_slots(&self, target: usize) -> Vec<usize> {
        (0..self.slot_count())
            .filter(|&s| self.stroke_at_slot(s).exchange_target() == Some(target))
            .collect()
    }

    /// Adiabaticity and thermalization diagnostics.
    pub fn warnings(&self, params: &SystemParams) -> Vec<ScheduleWarning> {
        let mut out = Vec::new();
        for (k, stroke) in self.strokes.iter().enumerate() {
            match *stroke {
                Stroke::Ramp { duration, .. } if params.g > 0.0 => {
                    let minimum = 5.0 / (2.0 * params.g);
                    if duration < minimum {
                        out.push(ScheduleWarning::NonAdiabaticRamp {
                            stroke: k,
                            duration,
                            minimum,
                        });
                    }
                }
                Stroke::Hold { duration } => {
                    let kappa_tau = duration * params.kappa;
                    if kappa_tau < 3.0 {
                        out.push(ScheduleWarning::IncompleteThermalization { stroke: k, kappa_tau });
                    }
                }
                _ => {}
            }
        }
        out
    }
}

/// Durations of the four strokes of the standard cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeDurations {
    pub expansion: f64,
    pub exchange: f64,
    pub compression: f64,
    pub thermalization: f64,
}

impl StrokeDurations {
    pub fn new(expansion: f64, exchange: f64, compression: f64, thermalization: f64) -> Self {
        Self {
            expansion,
            exchange,
            compression,
            thermalization,
        }
    }

    pub fn sum(&self) -> f64 {
        self.expansion + self.exchange + self.compression + self.thermalization
    }
}

/// The four-stroke cooling cycle: expansion ramp, exchange pulse, compression
/// ramp, thermalization hold. With several targets each cycle contains one
/// such sub-cycle per target, in the given order, so exactly one target is
/// coupled per pulse.
pub fn build_default_cycle(
    params: &SystemParams,
    durations: StrokeDurations,
    targets: &[usize],
    cycles: usize,
    shape: RampShape,
) -> Result<(CycleSchedule, Vec<ScheduleWarning>)> {
    params.validate()?;
    if targets.is_empty() {
        return Err(Error::invalid("targets", "at least one target mode is required"));
    }
    let mut strokes = Vec::with_capacity(4 * targets.len());
    for &target in targets {
        if target >= params.target_count() {
            return Err(Error::UnknownTarget {
                index: target,
                count: params.target_count(),
            });
        }
        strokes.push(Stroke::Ramp {
            duration: durations.expansion,
            from: params.delta_i,
            to: params.delta_f,
            shape,
        });
        strokes.push(Stroke::Exchange {
            duration: durations.exchange,
            target,
            amplitude: params.omega_0,
        });
        strokes.push(Stroke::Ramp {
            duration: durations.compression,
            from: params.delta_f,
            to: params.delta_i,
            shape,
        });
        strokes.push(Stroke::Hold {
            duration: durations.thermalization,
        });
    }
    let schedule = CycleSchedule::new(params, strokes, cycles)?;
    let warnings = schedule.warnings(params);
    Ok((schedule, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn fig1_durations() -> StrokeDurations {
        StrokeDurations::new(0.04, 0.008, 0.04, 0.1)
    }

    #[test]
    fn mean_field_no_drive() {
        let mf = mean_field_reduce(&MeanFieldInputs {
            alpha_in: 0.0,
            g0: 1.0,
            omega_b: 1.0,
            delta_bare: -1.0,
        })
        .unwrap();
        assert_eq!(mf.alpha, 0.0);
        assert_eq!(mf.beta, 0.0);
        assert_eq!(mf.g, 0.0);
        assert_eq!(mf.delta, -1.0);
    }

    #[test]
    fn mean_field_substitution() {
        let mf = mean_field_reduce(&MeanFieldInputs {
            alpha_in: -2.0,
            g0: 0.1,
            omega_b: 1.0,
            delta_bare: -2.0,
        })
        .unwrap();
        assert!((mf.alpha - 1.0).abs() < 1e-15);
        assert!((mf.beta + 0.1).abs() < 1e-15);
        assert!((mf.g - 0.1).abs() < 1e-15);
        assert!((mf.delta + 1.98).abs() < 1e-14);

        let mf = mean_field_reduce(&MeanFieldInputs {
            alpha_in: -10.0,
            g0: 0.02,
            omega_b: 2.0,
            delta_bare: -5.0,
        })
        .unwrap();
        assert!((mf.alpha - 2.0).abs() < 1e-15);
        assert!((mf.beta + 0.04).abs() < 1e-15);
        assert!((mf.g - 0.04).abs() < 1e-15);
        assert!((mf.delta + 4.9984).abs() < 1e-13);
    }

    #[test]
    fn mean_field_rejects_zero_detuning() {
        let err = mean_field_reduce(&MeanFieldInputs {
            alpha_in: 1.0,
            g0: 1.0,
            omega_b: 1.0,
            delta_bare: 0.0,
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "delta_bare", .. }));
    }

    #[test]
    fn params_validation() {
        assert!(fig1().validate().is_ok());
        let mut p = fig1();
        p.delta_f = -7000.0;
        assert!(p.validate().is_err());
        let mut p = fig1();
        p.g = 600.0; // limit at delta_f = -600 is ~547.7
        assert!(matches!(p.validate(), Err(Error::Instability { .. })));
        let mut p = fig1();
        p.n_targets.push(1.0);
        assert!(p.validate().is_err());
        let mut p = fig1();
        p.kappa = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn fig1_cycle_period() {
        let (s, warnings) =
            build_default_cycle(&fig1(), fig1_durations(), &[0], 3, RampShape::Linear).unwrap();
        assert_eq!(s.strokes().len(), 4);
        assert!((s.period() - 0.188).abs() < 1e-15);
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(s.boundaries().len(), 13);
    }

    #[test]
    fn fast_ramp_warns() {
        let p = fig1();
        let d = StrokeDurations::new(0.1 / (2.0 * p.g), 0.008, 0.04, 0.1);
        let (_, warnings) = build_default_cycle(&p, d, &[0], 1, RampShape::Linear).unwrap();
        assert!(matches!(warnings[0], ScheduleWarning::NonAdiabaticRamp { stroke: 0, .. }));

        let d = StrokeDurations::new(0.04, 0.008, 0.04, 0.05);
        let (_, warnings) = build_default_cycle(&p, d, &[0], 1, RampShape::Linear).unwrap();
        assert!(matches!(
            warnings[0],
            ScheduleWarning::IncompleteThermalization { stroke: 3, .. }
        ));
    }

    #[test]
    fn default_cycle_errors() {
        let p = fig1();
        let bad = StrokeDurations::new(0.0, 0.008, 0.04, 0.1);
        assert!(build_default_cycle(&p, bad, &[0], 1, RampShape::Linear).is_err());
        assert!(matches!(
            build_default_cycle(&p, fig1_durations(), &[1], 1, RampShape::Linear),
            Err(Error::UnknownTarget { index: 1, count: 1 })
        ));
        assert!(build_default_cycle(&p, fig1_durations(), &[], 1, RampShape::Linear).is_err());
    }

    #[test]
    fn two_target_pulse_times() {
        // Single-target parameters in units of a ten times smaller gamma.
        let p = SystemParams {
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
        let d = StrokeDurations::new(0.004, 0.0008, 0.004, 0.01);
        let (s, _) = build_default_cycle(&p, d, &[0, 1], 2, RampShape::Linear).unwrap();
        let c: Vec<f64> = s.exchange_slots(0).iter().map(|&k| s.slot_start(k)).collect();
        let dd: Vec<f64> = s.exchange_slots(1).iter().map(|&k| s.slot_start(k)).collect();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(c[0], 0.004) && close(c[1], 0.0416), "{c:?}");
        assert!(close(dd[0], 0.0228) && close(dd[1], 0.0604), "{dd:?}");
    }

    #[test]
    fn controls_follow_strokes() {
        let (s, _) =
            build_default_cycle(&fig1(), fig1_durations(), &[0], 2, RampShape::Linear).unwrap();
        let c = s.controls(0.0);
        assert_eq!(c.delta, -6000.0);
        assert_eq!(c.exchange, None);
        let c = s.controls(0.02);
        assert!((c.delta + 3300.0).abs() < 1e-9);
        let c = s.controls(0.044);
        assert_eq!(c.delta, -600.0);
        assert_eq!(c.exchange, Some((0, 200.0)));
        assert_eq!(c.omega0_for(0), 200.0);
        let c = s.controls(0.15);
        assert_eq!(c.delta, -6000.0);
        assert_eq!(c.omega0_active(), 0.0);
        assert_eq!(s.controls(0.188 + 0.044).slot, 5);
    }

    #[test]
    fn boundaries_are_continuous_exactly() {
        for shape in [RampShape::Linear, RampShape::Cosine, RampShape::Adiabatic] {
            let (s, _) = build_default_cycle(&fig1(), fig1_durations(), &[0], 3, shape).unwrap();
            for slot in 1..s.slot_count() {
                let t = s.slot_start(slot);
                let left = s.controls_in(slot - 1, t).delta;
                let right = s.controls_in(slot, t).delta;
                assert_eq!(left, right, "{shape} slot {slot}");
            }
        }
    }

    #[test]
    fn adiabatic_ramp_is_monotone_and_slow_at_crossing() {
        let p = fig1();
        let (s, _) = build_default_cycle(&p, fig1_durations(), &[0], 1, RampShape::Adiabatic).unwrap();
        let n = 400;
        let mut prev = s.controls_in(0, 0.0).delta;
        let mut slowest = (f64::INFINITY, 0.0);
        for i in 1..=n {
            let t = 0.04 * i as f64 / n as f64;
            let d = s.controls_in(0, t).delta;
            assert!(d > prev);
            if d - prev < slowest.0 {
                slowest = (d - prev, 0.5 * (d + prev));
            }
            prev = d;
        }
        assert_eq!(prev, -600.0);
        assert!((slowest.1 + p.omega_b).abs() < 50.0, "{slowest:?}");
    }

    #[test]
    fn schedule_rejects_discontinuity() {
        let p = fig1();
        let strokes = vec![
            Stroke::Ramp {
                duration: 0.04,
                from: -6000.0,
                to: -600.0,
                shape: RampShape::Linear,
            },
            Stroke::Ramp {
                duration: 0.04,
                from: -700.0,
                to: -6000.0,
                shape: RampShape::Linear,
            },
        ];
        assert!(CycleSchedule::new(&p, strokes, 1).is_err());
        let open = vec![Stroke::Ramp {
            duration: 0.04,
            from: -6000.0,
            to: -600.0,
            shape: RampShape::Linear,
        }];
        assert!(CycleSchedule::new(&p, open, 1).is_err());
    }

    #[test]
    fn stroke_json_shape() {
        let s: Stroke =
            serde_json::from_str(r#"{"kind":"exchange","duration":0.008,"target":0,"amplitude":200}"#)
                .unwrap();
        assert_eq!(s.exchange_target(), Some(0));
        let bad = serde_json::from_str::<Stroke>(r#"{"kind":"hold","duration":0.1,"level":3}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn target_labels() {
        assert_eq!(target_label(0), "c");
        assert_eq!(target_label(1), "d");
        assert_eq!(target_label(30), "t30");
    }
}
