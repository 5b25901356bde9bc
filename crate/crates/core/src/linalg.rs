//! Dense linear-algebra helpers over `nalgebra` used across the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{MrdError, Result};

/// Relative jitter added before every factorization.
pub const JITTER_START: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Cholesky factor of `k + jitter·I`, where `jitter` starts at `1e-8·scale` and
/// doubles until the factorization succeeds or exceeds `1e-4·scale`.
pub fn jittered_cholesky(k: &DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if k.iter().any(|v| !v.is_finite()) {
        return Err(MrdError::NonFinite("matrix to factorize"));
    }
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * scale;
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(kj) {
            return Ok((chol, jitter));
        }
        rel *= 2.0;
        if rel > JITTER_MAX {
            return Err(MrdError::Factorization { jitter });
        }
    }
}

/// Cholesky of a matrix that already carries a noise diagonal: factorized as
/// is when possible, otherwise through [`jittered_cholesky`].
pub fn noisy_cholesky(k: &DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if k.iter().all(|v| v.is_finite()) {
        if let Some(chol) = Cholesky::new(k.clone()) {
            return Ok((chol, 0.0));
        }
    }
    jittered_cholesky(k, scale)
}

/// Cholesky of a matrix expected to be well conditioned (e.g. `I + βC`).
pub fn cholesky(k: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if k.iter().any(|v| !v.is_finite()) {
        return Err(MrdError::NonFinite("matrix to factorize"));
    }
    Cholesky::new(k).ok_or(MrdError::Factorization { jitter: 0.0 })
}

pub fn chol_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing and
/// eigenvector columns reordered to match.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // Sign convention: largest-magnitude entry positive.
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Orthonormal basis for the column span of `a` (thin QR).
pub fn orthonormal_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().qr().q()
}

/// Largest principal angle (radians) between the column spans of `a` and `b`,
/// which must have the same number of rows and columns. Computed from the
/// sine side so that tiny angles are resolved accurately.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let s = residual.singular_values().max();
    s.clamp(0.0, 1.0).asin()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MrdError::NonFinite(what))
    }
}
