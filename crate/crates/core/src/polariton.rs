//! Closed-form layer: polariton spectrum and basis, two-mode Rabi exchange,
//! and the per-cycle heat-exchange map with its fixed point.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::check_stability;
use crate::symplectic::{symplectic_defect, symplectic_inverse, williamson};

fn check_red_detuned(delta: f64) -> Result<()> {
    if delta.is_finite() && delta < 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("detuning must be negative, got {delta}")))
    }
}

/// Upper and lower polariton frequencies `(ω_A, ω_B)` of the linearized
/// cavity-phonon Hamiltonian at detuning `delta`.
pub fn polariton_spectrum(delta: f64, omega_b: f64, g: f64) -> Result<(f64, f64)> {
    check_red_detuned(delta)?;
    if !(omega_b > 0.0) || !(g >= 0.0) {
        return Err(Error::invalid("omega_b", "need omega_b > 0 and g >= 0"));
    }
    check_stability(delta, omega_b, g)?;
    if g == 0.0 {
        let w = -delta;
        return Ok((w.max(omega_b), w.min(omega_b)));
    }
    let d2 = delta * delta;
    let b2 = omega_b * omega_b;
    let disc = (d2 - b2) * (d2 - b2) - 16.0 * g * g * delta * omega_b;
    let upper2 = 0.5 * (d2 + b2 + disc.sqrt());
    // ω_A² ω_B² = Δ²ω_b² + 4g²Δω_b; dividing avoids the cancellation in the minus root.
    let product = d2 * b2 + 4.0 * g * g * delta * omega_b;
    let lower2 = (product / upper2).max(0.0);
    Ok((upper2.sqrt(), lower2.sqrt()))
}

/// Splitting of the two branches at the avoided crossing `Δ = -ω_b`.
pub fn crossing_gap(omega_b: f64, g: f64) -> f64 {
    (omega_b * omega_b + 2.0 * g * omega_b).sqrt() - (omega_b * omega_b - 2.0 * g * omega_b).sqrt()
}

/// Symplectic transformation from the bare `(a, b)` quadratures to the
/// polariton `(A, B)` quadratures, `A` being the upper branch.
#[derive(Debug, Clone)]
pub struct PolaritonBasis {
    pub delta: f64,
    pub omega_upper: f64,
    pub omega_lower: f64,
    /// 4×4 symplectic matrix, `(x_A, p_A, x_B, p_B) = S (x_a, p_a, x_b, p_b)`.
    pub s: DMatrix<f64>,
    /// `|α|`, weight of `b` in `A = Σ α_j a_j + β_j a_j†`. Used for the
    /// effective exchange coupling.
    pub u: f64,
    /// `sqrt(|α|² + |β|²)`, the full quadrature overlap of `A` with `b`,
    /// including the counter-rotating part.
    pub u_quadrature: f64,
}

/// Bogoliubov coefficients `(α, β)` of normal mode `row_pair` on bare mode
/// `col_pair`, each returned as `(re, im)`.
fn bogoliubov_coefficients(s: &DMatrix<f64>, row_pair: usize, col_pair: usize) -> ((f64, f64), (f64, f64)) {
    let (r, c) = (2 * row_pair, 2 * col_pair);
    let xx = s[(r, c)];
    let xp = s[(r, c + 1)];
    let px = s[(r + 1, c)];
    let pp = s[(r + 1, c + 1)];
    (
        (0.5 * (xx + pp), 0.5 * (px - xp)),
        (0.5 * (xx - pp), 0.5 * (px + xp)),
    )
}

impl PolaritonBasis {
    /// `S⁻ᵀ M S⁻¹` for the bare Hamiltonian matrix `M`; diagonal in a valid basis.
    pub fn transformed_hamiltonian(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let inv = symplectic_inverse(&self.s);
        inv.transpose() * m * inv
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        symplectic_inverse(&self.s)
    }

    pub fn symplectic_defect(&self) -> f64 {
        symplectic_defect(&self.s)
    }

    /// Weight `|α|² - |β|²` of the cavity mode in polariton `A`.
    pub fn photon_fraction_upper(&self) -> f64 {
        let ((ar, ai), (br, bi)) = bogoliubov_coefficients(&self.s, 0, 0);
        ar * ar + ai * ai - br * br - bi * bi
    }
}

/// The bare `(a, b)` Hamiltonian matrix at detuning `delta`.
pub fn bare_hamiltonian(delta: f64, omega_b: f64, g: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            -delta, 0.0, 2.0 * g, 0.0, //
            0.0, -delta, 0.0, 0.0, //
            2.0 * g, 0.0, omega_b, 0.0, //
            0.0, 0.0, 0.0, omega_b,
        ],
    )
}

/// Numerical symplectic diagonalization of the cavity-phonon Hamiltonian.
pub fn bogoliubov_basis(delta: f64, omega_b: f64, g: f64) -> Result<PolaritonBasis> {
    check_red_detuned(delta)?;
    check_stability(delta, omega_b, g)?;
    let m = bare_hamiltonian(delta, omega_b, g);
    let nf = williamson(&m).map_err(|e| match e {
        Error::Degenerate(_) => Error::Instability {
            delta,
            g,
            limit: crate::model::stability_limit(delta, omega_b),
        },
        other => other,
    })?;
    let ((ar, ai), (br, bi)) = bogoliubov_coefficients(&nf.s, 0, 1);
    let alpha2 = ar * ar + ai * ai;
    let beta2 = br * br + bi * bi;
    Ok(PolaritonBasis {
        delta,
        omega_upper: nf.frequencies[0],
        omega_lower: nf.frequencies[1],
        s: nf.s,
        u: alpha2.sqrt(),
        u_quadrature: (alpha2 + beta2).sqrt(),
    })
}

/// Occupations `(N_b(t), N_c(t))` under the resonant-exchange Hamiltonian
/// `ω_b b†b + δ c†c + Ω₀(b†c + c†b)` from uncorrelated initial states.
pub fn rabi_populations(n_b0: f64, n_c0: f64, omega_b: f64, delta: f64, omega_0: f64, t: f64) -> (f64, f64) {
    let half_detuning = 0.5 * (omega_b - delta);
    let rabi = (half_detuning * half_detuning + omega_0 * omega_0).sqrt();
    let transfer = if rabi == 0.0 {
        0.0
    } else {
        let s = (rabi * t).sin();
        (omega_0 / rabi).powi(2) * s * s
    };
    let n_c = n_c0 + (n_b0 - n_c0) * transfer;
    (n_b0 + n_c0 - n_c, n_c)
}

/// Exchange efficiency `η = (Ω₀'/Ω')²` and effective Rabi frequency `Ω'` for
/// a pulse of strength `omega_0` between polariton `A` and a target at `delta_target`.
pub fn exchange_efficiency(basis: &PolaritonBasis, delta_target: f64, omega_0: f64) -> Result<(f64, f64)> {
    if !(omega_0 > 0.0) {
        return Err(Error::Degenerate(format!(
            "exchange efficiency is undefined for pulse strength {omega_0}"
        )));
    }
    let coupling = basis.u * omega_0;
    let half_mismatch = 0.5 * (basis.omega_upper - delta_target);
    let rabi = (half_mismatch * half_mismatch + coupling * coupling).sqrt();
    if rabi == 0.0 {
        return Err(Error::Degenerate(
            "polariton A has no phonon content and sits exactly on resonance".into(),
        ));
    }
    Ok(((coupling / rabi).powi(2), rabi))
}

/// Fraction of the excess target occupation that survives free
/// thermalization over the given durations, `exp(-γ Σ τ)`.
pub fn survival_factor(gamma: f64, durations: &[f64]) -> f64 {
    (-gamma * durations.iter().sum::<f64>()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingMapParams {
    pub eta: f64,
    pub r: f64,
    pub n_a: f64,
    pub n_c: f64,
}

impl CoolingMapParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::invalid("r", format!("must lie in (0, 1], got {}", self.r)));
        }
        if !(self.n_a >= 0.0 && self.n_c >= 0.0) {
            return Err(Error::invalid("n_a", "bath occupations must be non-negative"));
        }
        Ok(())
    }

    /// Occupation right after an exchange with a fluid holding `fluid` quanta.
    pub fn heat_exchange(&self, before: f64, fluid: f64) -> f64 {
        (1.0 - self.eta) * before + self.eta * fluid
    }

    /// Occupation before the next exchange given the value after the last one.
    pub fn thermalize(&self, after_previous: f64) -> f64 {
        self.n_c + self.r * (after_previous - self.n_c)
    }
}

/// Asymptotic occupation of the target after many cycles.
pub fn cooling_limit(params: &CoolingMapParams) -> Result<f64> {
    params.validate()?;
    let denominator = 1.0 - params.r * (1.0 - params.eta);
    if denominator == 0.0 {
        return Err(Error::Degenerate(
            "eta = 0 and r = 1: the target never exchanges heat".into(),
        ));
    }
    Ok((params.eta * params.n_a + (1.0 - params.r) * (1.0 - params.eta) * params.n_c) / denominator)
}

/// Post-exchange occupations for `cycles` cycles, each a thermalization
/// followed by an exchange with a fluid thermalized at `n_a`.
pub fn iterate_cooling_map(params: &CoolingMapParams, initial: f64, cycles: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if cycles == 0 {
        return Err(Error::invalid("cycles", "need at least one cycle"));
    }
    let mut out = Vec::with_capacity(cycles);
    let mut current = initial;
    for _ in 0..cycles {
        current = params.heat_exchange(params.thermalize(current), params.n_a);
        out.push(current);
    }
    Ok(out)
}
