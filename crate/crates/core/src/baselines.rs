//! Classical PCA and closed-form probabilistic PCA.

use nalgebra::{DMatrix, DVector};

use crate::error::{MrdError, Result};
use crate::linalg::sym_eigen_desc;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// `D×q`, orthonormal columns.
    pub projection: DMatrix<f64>,
    /// Top-q eigenvalues of the sample covariance `YᵀY/N`, non-increasing.
    pub eigenvalues: DVector<f64>,
    pub mean: DVector<f64>,
}

impl PcaResult {
    /// Latent scores `(Y − mean)·W`.
    pub fn transform(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let (yc, _) = center_with(y, &self.mean);
        yc * &self.projection
    }
}

/// Subtracts column means. Returns the centered matrix and the means.
pub fn center(y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if y.nrows() == 0 {
        return Err(MrdError::invalid("cannot center an empty matrix"));
    }
    let mean = y.row_mean().transpose();
    Ok(center_with(y, &mean))
}

fn center_with(y: &DMatrix<f64>, mean: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut c = y.clone();
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            c[(i, j)] -= mean[j];
        }
    }
    (c, mean.clone())
}

/// Top-q principal directions. Decomposes the `D×D` covariance when `D ≤ N`
/// and the `N×N` Gram matrix otherwise.
pub fn pca(y: &DMatrix<f64>, q: usize) -> Result<PcaResult> {
    let (n, d) = y.shape();
    if q == 0 || q > n.min(d) {
        return Err(MrdError::invalid(format!(
            "q must lie in 1..={}, got {q}",
            n.min(d)
        )));
    }
    let (yc, mean) = center(y)?;
    let nf = n as f64;
    let (eigenvalues, projection) = if d <= n {
        let cov = yc.transpose() * &yc / nf;
        let (vals, vecs) = sym_eigen_desc(&cov);
        (
            vals.rows(0, q).into_owned(),
            vecs.columns(0, q).into_owned(),
        )
    } else {
        let gram = &yc * yc.transpose() / nf;
        let (vals, vecs) = sym_eigen_desc(&gram);
        let mut w = DMatrix::zeros(d, q);
        let tiny = 1e-12 * vals[0].abs().max(f64::MIN_POSITIVE);
        for k in 0..q {
            if vals[k] > tiny {
                let col = yc.transpose() * vecs.column(k) / (nf * vals[k]).sqrt();
                w.set_column(k, &col);
            }
        }
        complete_orthonormal(&mut w, &vals, tiny);
        (vals.rows(0, q).into_owned(), w)
    };
    Ok(PcaResult {
        projection,
        eigenvalues: eigenvalues.map(|v| v.max(0.0)),
        mean,
    })
}

/// Fills zero columns (null eigen-directions) with unit vectors orthogonal to
/// the rest.
fn complete_orthonormal(w: &mut DMatrix<f64>, vals: &DVector<f64>, tiny: f64) {
    let (d, q) = w.shape();
    let mut candidate = 0;
    for k in 0..q {
        if vals[k] > tiny {
            continue;
        }
        while candidate < d {
            let mut v = DVector::zeros(d);
            v[candidate] = 1.0;
            candidate += 1;
            for j in 0..q {
                if j == k {
                    continue;
                }
                let c = w.column(j).dot(&v);
                v -= w.column(j) * c;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                w.set_column(k, &(v / norm));
                break;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PpcaResult {
    /// `D×q` loading matrix with rotation `R = I`.
    pub w: DMatrix<f64>,
    pub beta: f64,
    pub mean: DVector<f64>,
}

/// Maximum-likelihood PPCA: `W = U_q (Λ_q − β⁻¹I)^{1/2}`, with `β⁻¹` the mean
/// of the `D − q` discarded covariance eigenvalues.
pub fn ppca_fit(y: &DMatrix<f64>, q: usize) -> Result<PpcaResult> {
    let (n, d) = y.shape();
    if q == 0 || q >= d {
        return Err(MrdError::invalid(format!("q must lie in 1..{d}, got {q}")));
    }
    if q > n {
        return Err(MrdError::invalid(format!(
            "q={q} exceeds the {n} observations"
        )));
    }
    let p = pca(y, q)?;
    let (yc, _) = center(y)?;
    let total = yc.norm_squared() / n as f64;
    let kept: f64 = p.eigenvalues.iter().sum();
    let noise = (total - kept) / (d - q) as f64;
    if !(noise > 1e-12 * total.max(f64::MIN_POSITIVE)) {
        return Err(MrdError::Degenerate(
            "discarded eigenvalues have zero mean: the data has no residual variance".into(),
        ));
    }
    let mut w = p.projection.clone();
    for k in 0..q {
        let scale = (p.eigenvalues[k] - noise).max(0.0).sqrt();
        w.column_mut(k).scale_mut(scale);
    }
    Ok(PpcaResult {
        w,
        beta: 1.0 / noise,
        mean: p.mean,
    })
}

/// `Σ_n ln N(y_n | mean, WWᵀ + β⁻¹I)`.
pub fn ppca_log_likelihood(
    y: &DMatrix<f64>,
    w: &DMatrix<f64>,
    beta: f64,
    mean: &DVector<f64>,
) -> Result<f64> {
    let (n, d) = y.shape();
    if w.nrows() != d || mean.len() != d {
        return Err(MrdError::DimensionMismatch(
            "loading matrix and mean must match the data width".into(),
        ));
    }
    let mut c = w * w.transpose();
    for i in 0..d {
        c[(i, i)] += 1.0 / beta;
    }
    let chol = c
        .cholesky()
        .ok_or(MrdError::Factorization { jitter: 0.0 })?;
    let logdet = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let (yc, _) = center_with(y, mean);
    let sol = chol.solve(&yc.transpose());
    let quad = yc.transpose().component_mul(&sol).sum();
    Ok(-0.5 * (n as f64) * (d as f64 * LN_2PI + logdet) - 0.5 * quad)
}
