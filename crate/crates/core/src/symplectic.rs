//! Symplectic normal form of positive-definite quadratic Hamiltonians.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Standard symplectic form for `n` modes in `(x_0, p_0, x_1, p_1, ...)` order.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k, 2 * k + 1)] = 1.0;
        j[(2 * k + 1, 2 * k)] = -1.0;
    }
    j
}

/// `max |Sᵀ J S - J|`.
pub fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let j = symplectic_form(s.nrows() / 2);
    (s.transpose() * &j * s - j).amax()
}

/// Inverse of a symplectic matrix, `S⁻¹ = -J Sᵀ J`.
pub fn symplectic_inverse(s: &DMatrix<f64>) -> DMatrix<f64> {
    let j = symplectic_form(s.nrows() / 2);
    -(&j * s.transpose() * &j)
}

/// Normal modes of `H = ½ Rᵀ M R`.
#[derive(Debug, Clone)]
pub struct NormalForm {
    /// Normal-mode frequencies, descending.
    pub frequencies: Vec<f64>,
    /// Symplectic `S` with normal-mode quadratures `R' = S R`, so that
    /// `M = Sᵀ diag(ω_0, ω_0, ω_1, ω_1, ...) S`.
    pub s: DMatrix<f64>,
}

/// Williamson decomposition of a symmetric positive-definite `M`.
///
/// With `K = M^{1/2} J M^{1/2}` antisymmetric, an orthogonal `O` bringing `K`
/// to blocks `ω J₂` gives `S = Ω^{-1/2} Oᵀ M^{1/2}`. `O` is assembled from the
/// eigenvectors of `K Kᵀ`, pairing each `e` with `f = -K e / ω`.
pub fn williamson(m: &DMatrix<f64>) -> Result<NormalForm> {
    let dim = m.nrows();
    if !dim.is_multiple_of(2) || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim + dim % 2,
            found: m.ncols(),
        });
    }
    let n = dim / 2;
    let eig = SymmetricEigen::new(m.clone());
    let min_eig = eig.eigenvalues.min();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if !(min_eig > 1e-14 * scale) {
        return Err(Error::Degenerate(format!(
            "quadratic form is not positive definite (smallest eigenvalue {min_eig:.3e})"
        )));
    }
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let m_half = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    let k = &m_half * symplectic_form(n) * &m_half;
    let kk = &k * k.transpose();
    let kk = (&kk + kk.transpose()) * 0.5;
    let eig_k = SymmetricEigen::new(kk);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig_k.eigenvalues[b].total_cmp(&eig_k.eigenvalues[a]));

    let mut columns: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(dim);
    let mut frequencies = Vec::with_capacity(n);
    for &idx in &order {
        if columns.len() == dim {
            break;
        }
        let mut v = eig_k.eigenvectors.column(idx).into_owned();
        // Two passes of Gram-Schmidt keep degenerate eigenspaces well separated.
        for _ in 0..2 {
            for c in &columns {
                let overlap = c.dot(&v);
                v -= c * overlap;
            }
        }
        let norm = v.norm();
        if norm < 1e-6 {
            continue;
        }
        v /= norm;
        let omega = (k.transpose() * &v).norm();
        let f = -(&k * &v) / omega;
        frequencies.push(omega);
        columns.push(v);
        columns.push(f);
    }
    if columns.len() != dim {
        return Err(Error::Degenerate(
            "could not assemble a complete symplectic basis".into(),
        ));
    }
    let o = DMatrix::from_columns(&columns);
    let inv_sqrt: Vec<f64> = frequencies
        .iter()
        .flat_map(|&w| [1.0 / w.sqrt(), 1.0 / w.sqrt()])
        .collect();
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(inv_sqrt)) * o.transpose() * m_half;
    Ok(NormalForm { frequencies, s })
}
