//! Master-equation propagation on a truncated multi-mode Fock space.
//!
//! Superoperators are applied matrix-free to the density matrix. Basis index
//! order is the Kronecker order of the modes, the first mode most significant.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{checkpoints, GaussianState};
use crate::quadratic::{Coupling, ModelSource, QuadraticModel};

type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSpace {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl FockSpace {
    pub fn new(cutoffs: &[usize]) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::invalid("cutoffs", "at least one mode is required"));
        }
        if let Some(&c) = cutoffs.iter().find(|&&c| c < 2) {
            return Err(Error::invalid("cutoffs", format!("cutoff {c} is below 2")));
        }
        let mut strides = vec![1; cutoffs.len()];
        for j in (0..cutoffs.len() - 1).rev() {
            strides[j] = strides[j + 1] * cutoffs[j + 1];
        }
        let dim = cutoffs
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .filter(|&d| d <= 1 << 14)
            .ok_or_else(|| Error::invalid("cutoffs", "product dimension is too large"))?;
        Ok(Self {
            cutoffs: cutoffs.to_vec(),
            strides,
            dim,
        })
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode_count(&self) -> usize {
        self.cutoffs.len()
    }

    /// Fock level of `mode` in basis state `index`.
    pub fn level(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.cutoffs[mode]
    }

    pub fn index(&self, levels: &[usize]) -> usize {
        levels.iter().zip(&self.strides).map(|(l, s)| l * s).sum()
    }

    /// Truncated annihilation operator of `mode`.
    pub fn lowering(&self, mode: usize) -> Ladder {
        let entries = (0..self.dim)
            .filter_map(|from| {
                let n = self.level(from, mode);
                (n > 0).then(|| (from - self.strides[mode], from, (n as f64).sqrt()))
            })
            .collect();
        Ladder { dim: self.dim, entries }
    }

    /// Diagonal of the number operator of `mode`.
    pub fn number(&self, mode: usize) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| self.level(i, mode) as f64)
    }
}

/// Sparse operator with at most one entry per column, stored as `(row, col, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Ladder {
    pub fn adjoint(&self) -> Ladder {
        Ladder {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// Per-mode ladder and number operators on the product space.
#[derive(Debug, Clone)]
pub struct FockOperators {
    pub space: FockSpace,
    pub lowering: Vec<Ladder>,
    pub number: Vec<DVector<f64>>,
}

pub fn build_operators(cutoffs: &[usize]) -> Result<FockOperators> {
    let space = FockSpace::new(cutoffs)?;
    let lowering = (0..space.mode_count()).map(|j| space.lowering(j)).collect();
    let number = (0..space.mode_count()).map(|j| space.number(j)).collect();
    Ok(FockOperators {
        space,
        lowering,
        number,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub rho: DMatrix<C64>,
    pub cutoffs: Vec<usize>,
    pub time: f64,
}

/// Bounds that a density matrix must satisfy.
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl FockState {
    /// Product of diagonal single-mode states with the given level weights.
    pub fn product(cutoffs: &[usize], weights: &[Vec<f64>]) -> Result<Self> {
        let space = FockSpace::new(cutoffs)?;
        if weights.len() != cutoffs.len() {
            return Err(Error::DimensionMismatch {
                expected: cutoffs.len(),
                found: weights.len(),
            });
        }
        let mut rho = DMatrix::zeros(space.dim, space.dim);
        for i in 0..space.dim {
            let p: f64 = (0..space.mode_count())
                .map(|j| weights[j][space.level(i, j)])
                .product();
            rho[(i, i)] = C64::new(p, 0.0);
        }
        Ok(Self {
            rho,
            cutoffs: cutoffs.to_vec(),
            time: 0.0,
        })
    }

    pub fn number_state(cutoffs: &[usize], levels: &[usize]) -> Result<Self> {
        if levels.len() != cutoffs.len() {
            return Err(Error::DimensionMismatch {
                expected: cutoffs.len(),
                found: levels.len(),
            });
        }
        let mut weights = Vec::with_capacity(levels.len());
        for (j, (&n, &d)) in levels.iter().zip(cutoffs).enumerate() {
            if n >= d {
                return Err(Error::invalid(
                    "levels",
                    format!("level {n} of mode {j} is outside cutoff {d}"),
                ));
            }
            let mut w = vec![0.0; d];
            w[n] = 1.0;
            weights.push(w);
        }
        Self::product(cutoffs, &weights)
    }

    pub fn space(&self) -> FockSpace {
        FockSpace::new(&self.cutoffs).expect("state cutoffs were validated")
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// True when `rho + tol·I` admits a Cholesky factorization, i.e. the
    /// smallest eigenvalue is above `-tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        let n = self.rho.nrows();
        let shifted = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0)
            + DMatrix::<C64>::identity(n, n) * C64::new(tol, 0.0);
        shifted.cholesky().is_some()
    }

    /// Population of the top retained level of every mode.
    pub fn leakage(&self) -> Vec<f64> {
        let space = self.space();
        let mut out = vec![0.0; space.mode_count()];
        for i in 0..space.dim {
            let p = self.rho[(i, i)].re;
            for (j, slot) in out.iter_mut().enumerate() {
                if space.level(i, j) + 1 == space.cutoffs[j] {
                    *slot += p;
                }
            }
        }
        out
    }

    pub fn mode_occupations(&self) -> Vec<f64> {
        let space = self.space();
        (0..space.mode_count())
            .map(|j| (0..space.dim).map(|i| space.level(i, j) as f64 * self.rho[(i, i)].re).sum())
            .collect()
    }

    /// Quadrature means and symmetrized covariance, using the canonical
    /// commutator so that occupations are exactly `<a†a>`.
    pub fn moments(&self, labels: Vec<String>) -> Result<GaussianState> {
        let space = self.space();
        let m = space.mode_count();
        if labels.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: labels.len(),
            });
        }
        let d = space.dim;
        let ladders: Vec<Ladder> = (0..m).map(|j| space.lowering(j)).collect();
        let rho = self.rho.as_slice();
        // Column-major access: element (r, c) lives at r + c·d.
        let mut mean = vec![C64::new(0.0, 0.0); m];
        for (j, lad) in ladders.iter().enumerate() {
            mean[j] = lad.entries.iter().map(|&(r, c, v)| rho[c + r * d] * v).sum();
        }
        let mut pair = DMatrix::<C64>::zeros(m, m); // <a_i a_j>
        let mut cross = DMatrix::<C64>::zeros(m, m); // <a_i† a_j>
        let mut w = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..m {
            w.fill(C64::new(0.0, 0.0));
            left_apply(&ladders[j].entries, rho, &mut w, d);
            for i in 0..m {
                pair[(i, j)] = ladders[i].entries.iter().map(|&(r, c, v)| w[c + r * d] * v).sum();
                cross[(i, j)] = ladders[i].entries.iter().map(|&(r, c, v)| w[r + c * d] * v).sum();
            }
        }
        let mut q = DMatrix::<C64>::zeros(2 * m, 2 * m);
        let one = C64::new(1.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let delta = if i == j { one } else { C64::new(0.0, 0.0) };
                q[(2 * i, 2 * j)] = pair[(i, j)];
                q[(2 * i, 2 * j + 1)] = cross[(j, i)] + delta;
                q[(2 * i + 1, 2 * j)] = cross[(i, j)];
                q[(2 * i + 1, 2 * j + 1)] = pair[(j, i)].conj();
            }
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut t = DMatrix::<C64>::zeros(2 * m, 2 * m);
        for i in 0..m {
            t[(2 * i, 2 * i)] = C64::new(s, 0.0);
            t[(2 * i, 2 * i + 1)] = C64::new(s, 0.0);
            t[(2 * i + 1, 2 * i)] = C64::new(0.0, -s);
            t[(2 * i + 1, 2 * i + 1)] = C64::new(0.0, s);
        }
        let mut ops_mean = DVector::<C64>::zeros(2 * m);
        for i in 0..m {
            ops_mean[2 * i] = mean[i];
            ops_mean[2 * i + 1] = mean[i].conj();
        }
        let r_mean = (&t * ops_mean).map(|z| z.re);
        let second = &t * q * t.transpose();
        let sym = (&second + second.transpose()).map(|z| 0.5 * z.re);
        let cov = sym - &r_mean * r_mean.transpose();
        Ok(GaussianState {
            mean: r_mean,
            cov,
            time: self.time,
            labels,
        })
    }
}

/// Product of truncated thermal states, renormalized.
///
/// Rejected when the geometric tail beyond a cutoff, `(n/(n+1))^cutoff`,
/// exceeds `tail_threshold`.
pub fn thermal_state(cutoffs: &[usize], occupations: &[f64], tail_threshold: f64) -> Result<FockState> {
    if occupations.len() != cutoffs.len() {
        return Err(Error::DimensionMismatch {
            expected: cutoffs.len(),
            found: occupations.len(),
        });
    }
    let mut weights = Vec::with_capacity(cutoffs.len());
    for (j, (&n, &d)) in occupations.iter().zip(cutoffs).enumerate() {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::invalid("occupations", format!("mode {j} has occupation {n}")));
        }
        let ratio = n / (n + 1.0);
        let tail = ratio.powi(d as i32);
        if tail > tail_threshold {
            return Err(Error::Truncation {
                mode: j,
                leakage: tail,
                threshold: tail_threshold,
                time: 0.0,
            });
        }
        let mut w: Vec<f64> = (0..d).map(|k| ratio.powi(k as i32)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        weights.push(w);
    }
    FockState::product(cutoffs, &weights)
}

/// `dst += op · src` for column-major `d × d` matrices.
type Entries = Vec<(usize, usize, f64)>;

fn left_apply(entries: &[(usize, usize, f64)], src: &[C64], dst: &mut [C64], d: usize) {
    for (s_col, d_col) in src.chunks_exact(d).zip(dst.chunks_exact_mut(d)) {
        for &(r, c, v) in entries {
            d_col[r] += s_col[c] * v;
        }
    }
}

/// Sparse structure of the Hamiltonian couplings and jump operators, fixed
/// for a given model topology.
struct Liouvillian {
    d: usize,
    number: Vec<Vec<f64>>,
    /// Truncated `a a†` diagonal per mode.
    raised: Vec<Vec<f64>>,
    lowering: Vec<Entries>,
    raising: Vec<Entries>,
    /// Per coupling, the operator with unit strength.
    couplings: Vec<(Coupling, Entries)>,
}

/// Time-dependent coefficients of the Liouvillian at one instant.
struct Coefficients {
    /// Diagonal of `H - iG`, with `G` the anti-Hermitian damping part.
    diag: Vec<C64>,
    strengths: Vec<f64>,
    down: Vec<f64>,
    up: Vec<f64>,
}

fn product_entries(first: &[(usize, usize, f64)], second: &[(usize, usize, f64)], d: usize) -> Entries {
    // Both factors have at most one entry per column.
    let mut by_col = vec![None; d];
    for &(r, c, v) in first {
        by_col[c] = Some((r, v));
    }
    second
        .iter()
        .filter_map(|&(r, c, v)| by_col[r].map(|(r2, v2)| (r2, c, v * v2)))
        .collect()
}

impl Liouvillian {
    fn new(space: &FockSpace, model: &QuadraticModel) -> Self {
        let d = space.dim;
        let m = space.mode_count();
        let lowering: Vec<_> = (0..m).map(|j| space.lowering(j).entries).collect();
        let raising: Vec<_> = lowering
            .iter()
            .map(|e| e.iter().map(|&(r, c, v)| (c, r, v)).collect::<Vec<_>>())
            .collect();
        let number = (0..m)
            .map(|j| (0..d).map(|i| space.level(i, j) as f64).collect())
            .collect();
        let raised = (0..m)
            .map(|j| {
                (0..d)
                    .map(|i| {
                        let n = space.level(i, j);
                        if n + 1 < space.cutoffs[j] { (n + 1) as f64 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let couplings = model
            .couplings
            .iter()
            .map(|&c| {
                let mut entries = Vec::new();
                match c {
                    Coupling::Position { i, j, .. } => {
                        for oi in [&lowering[i], &raising[i]] {
                            for oj in [&lowering[j], &raising[j]] {
                                entries.extend(product_entries(oi, oj, d));
                            }
                        }
                    }
                    Coupling::Exchange { i, j, .. } => {
                        entries.extend(product_entries(&raising[i], &lowering[j], d));
                        entries.extend(product_entries(&raising[j], &lowering[i], d));
                    }
                }
                (c, entries)
            })
            .collect();
        Self {
            d,
            number,
            raised,
            lowering,
            raising,
            couplings,
        }
    }

    fn matches(&self, model: &QuadraticModel) -> bool {
        model.mode_count() == self.number.len()
            && model.couplings.len() == self.couplings.len()
            && model
                .couplings
                .iter()
                .zip(&self.couplings)
                .all(|(a, (b, _))| std::mem::discriminant(a) == std::mem::discriminant(b) && a.modes() == b.modes())
    }

    fn coefficients(&self, model: &QuadraticModel) -> Coefficients {
        let down: Vec<f64> = model.modes.iter().map(|m| m.rate * (m.bath + 1.0)).collect();
        let up: Vec<f64> = model.modes.iter().map(|m| m.rate * m.bath).collect();
        let diag = (0..self.d)
            .map(|i| {
                let mut h = 0.0;
                let mut g = 0.0;
                for (j, mode) in model.modes.iter().enumerate() {
                    h += mode.frequency * self.number[j][i];
                    g += 0.5 * (down[j] * self.number[j][i] + up[j] * self.raised[j][i]);
                }
                C64::new(h, -g)
            })
            .collect();
        Coefficients {
            diag,
            strengths: model.couplings.iter().map(Coupling::strength).collect(),
            down,
            up,
        }
    }

    /// `out = L(rho)`; `y` is a scratch buffer.
    fn apply(&self, k: &Coefficients, rho: &[C64], out: &mut [C64], y: &mut [C64]) {
        let d = self.d;
        let minus_i = C64::new(0.0, -1.0);
        // -i (H_eff rho - rho H_eff†) with H_eff = H - iG; the diagonal part first.
        for (c, (s_col, o_col)) in rho.chunks_exact(d).zip(out.chunks_exact_mut(d)).enumerate() {
            let right = k.diag[c].conj();
            for ((ov, &sv), &dv) in o_col.iter_mut().zip(s_col).zip(&k.diag) {
                *ov = minus_i * (dv - right) * sv;
            }
        }
        for ((_, entries), &strength) in self.couplings.iter().zip(&k.strengths) {
            if strength == 0.0 {
                continue;
            }
            // Left product, column by column.
            for (s_col, o_col) in rho.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                for &(r, c, v) in entries {
                    o_col[r] += minus_i * s_col[c] * (v * strength);
                }
            }
            // Right product: column c of rho H collects v · rho[:, r] for H[r, c] = v.
            for &(r, c, v) in entries {
                let f = C64::new(0.0, v * strength);
                let (src, dst) = (r * d, c * d);
                for i in 0..d {
                    out[dst + i] += rho[src + i] * f;
                }
            }
        }
        // Jumps: rate · L (rho L†).
        for j in 0..self.number.len() {
            for (rate, op) in [(k.down[j], &self.lowering[j]), (k.up[j], &self.raising[j])] {
                if rate == 0.0 {
                    continue;
                }
                y.fill(C64::new(0.0, 0.0));
                // L† has entry (c, r, v) for every entry (r, c, v) of L.
                for &(r, c, v) in op {
                    let (src, dst) = (c * d, r * d);
                    for i in 0..d {
                        y[dst + i] += rho[src + i] * v;
                    }
                }
                for (y_col, o_col) in y.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                    for &(r, c, v) in op {
                        o_col[r] += y_col[c] * (v * rate);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockOptions {
    /// Fixed step; defaults to `1 / (steps_per_unit · f_max)`.
    pub dt: Option<f64>,
    pub steps_per_unit: f64,
    /// Largest allowed population of any mode's top level.
    pub leakage_threshold: f64,
}

impl Default for FockOptions {
    fn default() -> Self {
        Self {
            dt: None,
            steps_per_unit: 50.0,
            leakage_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FockSample {
    pub moments: GaussianState,
    pub leakage: Vec<f64>,
    pub trace_error: f64,
    pub hermiticity_error: f64,
}

#[derive(Debug, Clone)]
pub struct FockRun {
    pub samples: Vec<FockSample>,
    pub final_state: FockState,
    /// Largest top-level population seen at any step.
    pub max_leakage: f64,
    pub steps: usize,
}

fn check_leakage(state: &FockState, threshold: f64) -> Result<f64> {
    let leak = state.leakage();
    let (mode, worst) = leak
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (j, l)| if l > acc.1 { (j, l) } else { acc });
    if worst > threshold {
        return Err(Error::Truncation {
            mode,
            leakage: worst,
            threshold,
            time: state.time,
        });
    }
    Ok(worst)
}

fn sample(state: &FockState, labels: &[String]) -> Result<FockSample> {
    let fail = |reason: String| Error::IntegrationFailure {
        time: state.time,
        reason,
    };
    let trace_error = (state.trace() - C64::new(1.0, 0.0)).norm();
    if trace_error > TRACE_TOL {
        return Err(fail(format!("trace drifted by {trace_error:.3e}")));
    }
    let hermiticity_error = state.hermiticity_error();
    if hermiticity_error > HERMITICITY_TOL {
        return Err(fail(format!("density matrix not Hermitian ({hermiticity_error:.3e})")));
    }
    if !state.is_positive(POSITIVITY_TOL) {
        return Err(fail("density matrix lost positivity; reduce the time step".into()));
    }
    Ok(FockSample {
        moments: state.moments(labels.to_vec())?,
        leakage: state.leakage(),
        trace_error,
        hermiticity_error,
    })
}

/// Fixed-step RK4 integration of the master equation, sampled at `samples`.
pub fn propagate_fock(
    state: &FockState,
    source: &dyn ModelSource,
    samples: &[f64],
    options: &FockOptions,
) -> Result<FockRun> {
    let labels = source.mode_labels();
    let space = state.space();
    if labels.len() != space.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: space.mode_count(),
        });
    }
    let f_max = source.frequency_scale().max(f64::MIN_POSITIVE);
    let dt_limit = 1.0 / (options.steps_per_unit * f_max);
    let dt = match options.dt {
        Some(dt) if !(dt > 0.0) => return Err(Error::invalid("dt", "time step must be positive")),
        Some(dt) if dt > dt_limit * (1.0 + 1e-12) => {
            return Err(Error::invalid(
                "dt",
                format!("time step {dt:.3e} does not resolve the fastest frequency (limit {dt_limit:.3e})"),
            ))
        }
        Some(dt) => dt,
        None => dt_limit,
    };

    let d = space.dim;
    let mut current = state.clone();
    let mut max_leakage = check_leakage(&current, options.leakage_threshold)?;
    let mut out = Vec::with_capacity(samples.len());
    let mut remaining = samples.iter().copied().peekable();
    while remaining.peek() == Some(&state.time) {
        remaining.next();
        out.push(sample(&current, &labels)?);
    }

    let zero = C64::new(0.0, 0.0);
    let mut k = [vec![zero; d * d], vec![zero; d * d], vec![zero; d * d], vec![zero; d * d]];
    let mut trial = vec![zero; d * d];
    let mut y = vec![zero; d * d];
    let mut liouvillian: Option<Liouvillian> = None;
    let mut steps_taken = 0;

    for (t0, t1, slot) in checkpoints(source, state.time, samples)? {
        let first = source.model(slot, t0);
        if !liouvillian.as_ref().is_some_and(|l| l.matches(&first)) {
            liouvillian = Some(Liouvillian::new(&space, &first));
        }
        let lv = liouvillian.as_ref().expect("set above");
        let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        let coeff = |t: f64| lv.coefficients(&source.model(slot, t));
        let mut left = coeff(t0);
        for i in 0..steps {
            let t = t0 + h * i as f64;
            let t_next = if i + 1 == steps { t1 } else { t0 + h * (i + 1) as f64 };
            let mid = coeff(t + 0.5 * h);
            let right = coeff(t_next);
            let rho = current.rho.as_mut_slice();
            lv.apply(&left, rho, &mut k[0], &mut y);
            for (tv, (&r, &kv)) in trial.iter_mut().zip(rho.iter().zip(&k[0])) {
                *tv = r + kv * (0.5 * h);
            }
            lv.apply(&mid, &trial, &mut k[1], &mut y);
            for (tv, (&r, &kv)) in trial.iter_mut().zip(rho.iter().zip(&k[1])) {
                *tv = r + kv * (0.5 * h);
            }
            lv.apply(&mid, &trial, &mut k[2], &mut y);
            for (tv, (&r, &kv)) in trial.iter_mut().zip(rho.iter().zip(&k[2])) {
                *tv = r + kv * h;
            }
            lv.apply(&right, &trial, &mut k[3], &mut y);
            for (idx, r) in rho.iter_mut().enumerate() {
                *r += (k[0][idx] + (k[1][idx] + k[2][idx]) * 2.0 + k[3][idx]) * (h / 6.0);
            }
            current.time = t_next;
            max_leakage = max_leakage.max(check_leakage(&current, options.leakage_threshold)?);
            left = right;
            steps_taken += 1;
        }
        while remaining.peek() == Some(&t1) {
            remaining.next();
            out.push(sample(&current, &labels)?);
        }
    }
    if let Some(t) = remaining.next() {
        return Err(Error::invalid("samples", format!("sample time {t} was not reached")));
    }
    Ok(FockRun {
        samples: out,
        final_state: current,
        max_leakage,
        steps: steps_taken,
    })
}
