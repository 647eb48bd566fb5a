//! Exact propagation of first and second moments for quadratic models with
//! thermal damping.
//!
//! Vacuum quadrature variance is ½, so a thermal mode with occupation `n` has
//! `cov_xx = cov_pp = n + ½`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polariton::PolaritonBasis;
use crate::quadratic::{ModelSource, QuadraticModel};
use crate::symplectic::symplectic_form;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub time: f64,
    pub labels: Vec<String>,
}

/// Occupation from the quadrature moments of one mode.
fn occupation(vxx: f64, vpp: f64, mx: f64, mp: f64) -> f64 {
    0.5 * (vxx + vpp - 1.0) + 0.5 * (mx * mx + mp * mp)
}

impl GaussianState {
    /// Product of thermal states with the given occupations, zero mean.
    pub fn thermal(labels: Vec<String>, occupations: &[f64]) -> Result<Self> {
        if labels.len() != occupations.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: occupations.len(),
            });
        }
        let n = labels.len();
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        for (j, &occ) in occupations.iter().enumerate() {
            if !(occ >= 0.0 && occ.is_finite()) {
                return Err(Error::invalid("occupations", format!("mode {j} has occupation {occ}")));
            }
            cov[(2 * j, 2 * j)] = occ + 0.5;
            cov[(2 * j + 1, 2 * j + 1)] = occ + 0.5;
        }
        Ok(Self {
            mean: DVector::zeros(2 * n),
            cov,
            time: 0.0,
            labels,
        })
    }

    pub fn vacuum(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self::thermal(labels, &vec![0.0; n]).expect("vacuum occupations are valid")
    }

    /// Replace the `(a, b)` block (modes 0 and 1) with thermal polariton
    /// populations `(n_upper, n_lower)` in `basis`, keeping the other modes.
    pub fn with_polariton_populations(mut self, basis: &PolaritonBasis, n_upper: f64, n_lower: f64) -> Result<Self> {
        self.require_modes(2)?;
        if !(n_upper >= 0.0 && n_lower >= 0.0) {
            return Err(Error::invalid("occupations", "polariton occupations must be >= 0"));
        }
        let pol = DMatrix::from_diagonal(&DVector::from_vec(vec![
            n_upper + 0.5,
            n_upper + 0.5,
            n_lower + 0.5,
            n_lower + 0.5,
        ]));
        let inv = basis.inverse();
        let block = &inv * pol * inv.transpose();
        let dim = self.cov.nrows();
        for i in 0..dim {
            for j in 0..dim {
                if i < 4 && j < 4 {
                    self.cov[(i, j)] = block[(i, j)];
                } else if i < 4 || j < 4 {
                    self.cov[(i, j)] = 0.0;
                }
            }
        }
        for i in 0..4 {
            self.mean[i] = 0.0;
        }
        Ok(self)
    }

    pub fn mode_count(&self) -> usize {
        self.labels.len()
    }

    fn require_modes(&self, n: usize) -> Result<()> {
        if self.mode_count() < n {
            Err(Error::DimensionMismatch {
                expected: n,
                found: self.mode_count(),
            })
        } else {
            Ok(())
        }
    }

    /// Mean occupation `<a_j† a_j>` of every bare mode.
    pub fn mode_occupations(&self) -> Vec<f64> {
        (0..self.mode_count())
            .map(|j| {
                occupation(
                    self.cov[(2 * j, 2 * j)],
                    self.cov[(2 * j + 1, 2 * j + 1)],
                    self.mean[2 * j],
                    self.mean[2 * j + 1],
                )
            })
            .collect()
    }

    /// Occupations `(N_A, N_B)` of the polaritons of `basis`.
    pub fn polariton_occupations(&self, basis: &PolaritonBasis) -> Result<(f64, f64)> {
        if basis.s.nrows() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: basis.s.nrows(),
            });
        }
        self.require_modes(2)?;
        let block = self.cov.view((0, 0), (4, 4));
        let cov = &basis.s * block * basis.s.transpose();
        let mean = &basis.s * self.mean.rows(0, 4);
        Ok((
            occupation(cov[(0, 0)], cov[(1, 1)], mean[0], mean[1]),
            occupation(cov[(2, 2)], cov[(3, 3)], mean[2], mean[3]),
        ))
    }

    /// Largest asymmetry `|cov - covᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.cov - self.cov.transpose()).amax()
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/2) J`; the state
    /// is physical when it is non-negative.
    pub fn uncertainty_margin(&self) -> f64 {
        let dim = self.cov.nrows();
        let k = symplectic_form(dim / 2) * 0.5;
        // Real representation [[C, -K], [K, C]] of C + iK has the same spectrum, doubled.
        let mut real = DMatrix::zeros(2 * dim, 2 * dim);
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        real.view_mut((0, 0), (dim, dim)).copy_from(&sym);
        real.view_mut((dim, dim), (dim, dim)).copy_from(&sym);
        real.view_mut((0, dim), (dim, dim)).copy_from(&(-&k));
        real.view_mut((dim, 0), (dim, dim)).copy_from(&k);
        nalgebra::SymmetricEigen::new(real).eigenvalues.min()
    }

    /// Checks symmetry, the uncertainty relation and non-negative occupations.
    pub fn check_physical(&self) -> Result<()> {
        let fail = |reason: String| Error::IntegrationFailure {
            time: self.time,
            reason,
        };
        let scale = self.cov.amax().max(1.0);
        let asym = self.asymmetry();
        if asym > 1e-12 * scale {
            return Err(fail(format!("covariance asymmetry {asym:.3e}")));
        }
        let margin = self.uncertainty_margin();
        if margin < -1e-9 {
            return Err(fail(format!("uncertainty relation violated by {margin:.3e}")));
        }
        if let Some((j, n)) = self
            .mode_occupations()
            .into_iter()
            .enumerate()
            .find(|&(_, n)| n < -1e-9)
        {
            return Err(fail(format!("mode {j} has negative occupation {n:.3e}")));
        }
        Ok(())
    }
}

/// Linear moment equations `dm/dt = A m`, `dσ/dt = Aσ + σAᵀ + D`.
#[derive(Debug, Clone)]
pub struct DriftDiffusion {
    pub a: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub valid_at: f64,
}

impl DriftDiffusion {
    /// Hamiltonian flow `J M` plus damping `-rate/2` on each quadrature of a
    /// damped mode; diffusion `rate (n + ½)` per quadrature.
    pub fn from_model(model: &QuadraticModel, time: f64) -> Self {
        let n = model.mode_count();
        let mut a = symplectic_form(n) * model.hamiltonian_matrix();
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        for (j, mode) in model.modes.iter().enumerate() {
            for q in 2 * j..2 * j + 2 {
                a[(q, q)] -= 0.5 * mode.rate;
                d[(q, q)] = mode.rate * (mode.bath + 0.5);
            }
        }
        Self { a, d, valid_at: time }
    }

    /// Largest real part among the eigenvalues of `A`.
    pub fn spectral_abscissa(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Stationary covariance, solving `A σ + σ Aᵀ + D = 0` directly.
    pub fn steady_state(&self) -> Result<DMatrix<f64>> {
        let dim = self.a.nrows();
        let id = DMatrix::<f64>::identity(dim, dim);
        let lhs = id.kronecker(&self.a) + self.a.kronecker(&id);
        let rhs = DVector::from_iterator(dim * dim, self.d.iter().map(|v| -v));
        let sol = lhs.lu().solve(&rhs).ok_or_else(|| {
            Error::Degenerate("drift matrix has no unique stationary state".into())
        })?;
        Ok(DMatrix::from_column_slice(dim, dim, sol.as_slice()))
    }

    pub fn lyapunov_residual(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * cov + cov * self.a.transpose() + &self.d
    }
}

/// Fixed-step RK4 with optional Richardson step halving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Bound on the Richardson error estimate per segment, relative to `max(1, |σ|)`.
    pub tol: f64,
    /// The base step is `1 / (steps_per_unit * f_max)`.
    pub steps_per_unit: f64,
    /// When false the base step is used as is.
    pub adaptive: bool,
    pub max_halvings: u32,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            steps_per_unit: 50.0,
            adaptive: true,
            max_halvings: 12,
        }
    }
}

#[derive(Clone)]
struct Moments {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Moments {
    fn axpy(&self, h: f64, k: &Moments) -> Moments {
        Moments {
            mean: &self.mean + &k.mean * h,
            cov: &self.cov + &k.cov * h,
        }
    }

    fn distance(&self, other: &Moments) -> f64 {
        (&self.cov - &other.cov)
            .amax()
            .max((&self.mean - &other.mean).amax())
    }
}

fn derivative(dd: &DriftDiffusion, y: &Moments) -> Moments {
    let a_cov = &dd.a * &y.cov;
    let cov = &a_cov + a_cov.transpose() + &dd.d;
    Moments {
        mean: &dd.a * &y.mean,
        cov,
    }
}

fn rk4_run(source: &dyn ModelSource, slot: usize, start: &Moments, t0: f64, t1: f64, steps: usize) -> Moments {
    let h = (t1 - t0) / steps as f64;
    let system = |t: f64| DriftDiffusion::from_model(&source.model(slot, t), t);
    let mut y = start.clone();
    let mut left = system(t0);
    for i in 0..steps {
        let t = t0 + h * i as f64;
        let t_next = if i + 1 == steps { t1 } else { t0 + h * (i + 1) as f64 };
        let mid = system(t + 0.5 * h);
        let right = system(t_next);
        let k1 = derivative(&left, &y);
        let k2 = derivative(&mid, &y.axpy(0.5 * h, &k1));
        let k3 = derivative(&mid, &y.axpy(0.5 * h, &k2));
        let k4 = derivative(&right, &y.axpy(h, &k3));
        let mut next = y.clone();
        next.mean += (&k1.mean + &k2.mean * 2.0 + &k3.mean * 2.0 + &k4.mean) * (h / 6.0);
        next.cov += (&k1.cov + &k2.cov * 2.0 + &k3.cov * 2.0 + &k4.cov) * (h / 6.0);
        // Keep the covariance exactly symmetric.
        next.cov = (&next.cov + next.cov.transpose()) * 0.5;
        y = next;
        left = right;
    }
    y
}

/// Time points at which the integration must stop: segment boundaries and samples.
pub(crate) fn checkpoints(source: &dyn ModelSource, t0: f64, samples: &[f64]) -> Result<Vec<(f64, f64, usize)>> {
    let end = source.end_time();
    for w in samples.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("samples", "sample times must be strictly increasing"));
        }
    }
    if let (Some(&first), Some(&last)) = (samples.first(), samples.last()) {
        if first < t0 || last > end {
            return Err(Error::invalid(
                "samples",
                format!("sample times must lie in [{t0}, {end}]"),
            ));
        }
    }
    // Integration stops at the last sample.
    let stop = samples.last().copied().unwrap_or(end);
    let mut pieces = Vec::new();
    for seg in source.segments() {
        if seg.end <= t0 || seg.start >= stop {
            continue;
        }
        let seg_end = seg.end.min(stop);
        let mut cursor = seg.start.max(t0);
        let start = cursor;
        for &s in samples.iter().filter(|&&s| s > start && s < seg_end) {
            pieces.push((cursor, s, seg.slot));
            cursor = s;
        }
        if seg_end > cursor {
            pieces.push((cursor, seg_end, seg.slot));
        }
    }
    Ok(pieces)
}

/// Propagate `state` through `source` and return the state at every sample time.
///
/// Samples must be increasing and lie within `[state.time, source.end_time()]`.
/// Every returned state has passed [`GaussianState::check_physical`].
pub fn propagate(
    state: &GaussianState,
    source: &dyn ModelSource,
    samples: &[f64],
    options: &IntegratorOptions,
) -> Result<Vec<GaussianState>> {
    if !(options.tol > 0.0) || !(options.steps_per_unit > 0.0) {
        return Err(Error::invalid("tol", "integrator tolerance and step density must be positive"));
    }
    let labels = source.mode_labels();
    if labels.len() != state.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: state.mode_count(),
        });
    }
    let h_max = 1.0 / (options.steps_per_unit * source.frequency_scale().max(f64::MIN_POSITIVE));
    let mut y = Moments {
        mean: state.mean.clone(),
        cov: state.cov.clone(),
    };
    let snapshot = |y: &Moments, t: f64| GaussianState {
        mean: y.mean.clone(),
        cov: y.cov.clone(),
        time: t,
        labels: labels.clone(),
    };

    let mut out = Vec::with_capacity(samples.len());
    let mut remaining = samples.iter().copied().peekable();
    while remaining.peek() == Some(&state.time) {
        remaining.next();
        let s = snapshot(&y, state.time);
        s.check_physical()?;
        out.push(s);
    }
    for (t0, t1, slot) in checkpoints(source, state.time, samples)? {
        let mut steps = ((t1 - t0) / h_max).ceil().max(1.0) as usize;
        let mut coarse = rk4_run(source, slot, &y, t0, t1, steps);
        if options.adaptive {
            let mut halvings = 0;
            loop {
                steps *= 2;
                let fine = rk4_run(source, slot, &y, t0, t1, steps);
                let err = fine.distance(&coarse) / 15.0;
                let scale = fine.cov.amax().max(1.0);
                coarse = fine;
                if err <= options.tol * scale {
                    break;
                }
                halvings += 1;
                if halvings >= options.max_halvings {
                    return Err(Error::IntegrationFailure {
                        time: t1,
                        reason: format!(
                            "step-halving did not reach tolerance {:.1e} (estimate {err:.3e})",
                            options.tol
                        ),
                    });
                }
            }
        }
        y = coarse;
        while remaining.peek() == Some(&t1) {
            remaining.next();
            let s = snapshot(&y, t1);
            s.check_physical()?;
            out.push(s);
        }
    }
    if let Some(t) = remaining.next() {
        return Err(Error::invalid("samples", format!("sample time {t} was not reached")));
    }
    Ok(out)
}
