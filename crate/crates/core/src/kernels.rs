//! Covariance functions for the latent-to-view mappings.
//!
//! Two kernels are provided: the inner-product (linear) kernel, whose GPLVM is
//! dual probabilistic PCA, and the ARD exponentiated-quadratic kernel
//!
//! ```text
//! k(x, x') = σ² · exp(-½ Σ_k w_k (x_k − x'_k)²)  [+ β⁻¹ δ(x, x') on the training diagonal]
//! ```
//!
//! whose relevance weights `w_k` switch latent dimensions on and off. The
//! module also provides the expectations of the ARD kernel under a diagonal
//! Gaussian (the psi statistics) and their gradients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MrdError, Result};
use crate::gplvm::LatentDistribution;
use crate::linalg::ensure_finite;

/// Hyperparameters of one view's ARD kernel plus its noise precision.
///
/// Values are held in log space; the accessors return the positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArdKernelParams {
    log_signal_variance: f64,
    log_ard_weights: Vec<f64>,
    log_beta: f64,
}

impl ArdKernelParams {
    pub fn new(signal_variance: f64, ard_weights: &[f64], beta: f64) -> Result<Self> {
        if !(signal_variance > 0.0 && signal_variance.is_finite()) {
            return Err(MrdError::invalid(format!(
                "signal variance must be positive, got {signal_variance}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(MrdError::invalid(format!(
                "noise precision must be positive, got {beta}"
            )));
        }
        if let Some(w) = ard_weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(MrdError::invalid(format!(
                "ARD weights must be non-negative, got {w}"
            )));
        }
        Ok(Self {
            log_signal_variance: signal_variance.ln(),
            log_ard_weights: ard_weights.iter().map(|w| w.ln()).collect(),
            log_beta: beta.ln(),
        })
    }

    pub fn from_log(log_signal_variance: f64, log_ard_weights: Vec<f64>, log_beta: f64) -> Self {
        Self {
            log_signal_variance,
            log_ard_weights,
            log_beta,
        }
    }

    pub fn q(&self) -> usize {
        self.log_ard_weights.len()
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn ard_weights(&self) -> Vec<f64> {
        self.log_ard_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    pub fn log_signal_variance(&self) -> f64 {
        self.log_signal_variance
    }

    pub fn log_ard_weights(&self) -> &[f64] {
        &self.log_ard_weights
    }

    pub fn log_beta(&self) -> f64 {
        self.log_beta
    }

    pub(crate) fn set_log_signal_variance(&mut self, v: f64) {
        self.log_signal_variance = v;
    }

    pub(crate) fn log_ard_weights_mut(&mut self) -> &mut [f64] {
        &mut self.log_ard_weights
    }

    pub(crate) fn set_log_beta(&mut self, v: f64) {
        self.log_beta = v;
    }

    /// Scale passed to the jitter policy.
    pub(crate) fn jitter_scale(&self) -> f64 {
        self.signal_variance()
    }
}

/// A kernel evaluation, with the diagonal jitter that was needed to factorize it
/// (zero until the matrix is factorized).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub jitter: f64,
}

fn check_shapes(x1: &DMatrix<f64>, x2: &DMatrix<f64>, same_inputs: bool) -> Result<()> {
    if x1.ncols() != x2.ncols() {
        return Err(MrdError::DimensionMismatch(format!(
            "kernel inputs have {} and {} columns",
            x1.ncols(),
            x2.ncols()
        )));
    }
    if same_inputs && x1.nrows() != x2.nrows() {
        return Err(MrdError::DimensionMismatch(
            "same_inputs requires equal row counts".into(),
        ));
    }
    Ok(())
}

/// `k(x, x') = x·x'`, plus `β⁻¹` on the diagonal when `same_inputs`.
pub fn linear_kernel(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    beta: f64,
    same_inputs: bool,
) -> Result<KernelMatrix> {
    check_shapes(x1, x2, same_inputs)?;
    if !(beta > 0.0) {
        return Err(MrdError::invalid("beta must be positive"));
    }
    let mut values = x1 * x2.transpose();
    if same_inputs {
        for i in 0..values.nrows() {
            values[(i, i)] += 1.0 / beta;
        }
    }
    Ok(KernelMatrix {
        values,
        jitter: 0.0,
    })
}

/// ARD exponentiated-quadratic kernel, plus `β⁻¹` on the diagonal when
/// `same_inputs`.
pub fn ard_rbf_kernel(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    params: &ArdKernelParams,
    same_inputs: bool,
) -> Result<KernelMatrix> {
    check_shapes(x1, x2, same_inputs)?;
    if params.q() != x1.ncols() {
        return Err(MrdError::DimensionMismatch(format!(
            "kernel has {} ARD weights but inputs have {} columns",
            params.q(),
            x1.ncols()
        )));
    }
    ensure_finite(x1, "kernel input")?;
    ensure_finite(x2, "kernel input")?;
    let mut values = rbf_cross(x1, x2, params.signal_variance(), &params.ard_weights());
    if same_inputs {
        let noise = 1.0 / params.beta();
        for i in 0..values.nrows() {
            values[(i, i)] += noise;
        }
    }
    Ok(KernelMatrix {
        values,
        jitter: 0.0,
    })
}

/// Noise-free ARD cross-covariance.
pub(crate) fn rbf_cross(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    variance: f64,
    weights: &[f64],
) -> DMatrix<f64> {
    let q = weights.len();
    DMatrix::from_fn(x1.nrows(), x2.nrows(), |i, j| {
        let mut r2 = 0.0;
        for k in 0..q {
            let d = x1[(i, k)] - x2[(j, k)];
            r2 += weights[k] * d * d;
        }
        variance * (-0.5 * r2).exp()
    })
}

/// Derivatives of the training covariance `K(X, X) + β⁻¹I` with respect to
/// every log-hyperparameter and every latent coordinate.
///
/// Layout: `d_latent[n * q + k]` is the dense `N×N` matrix `∂K/∂x_{n,k}`; it is
/// nonzero only in row and column `n`.
#[derive(Debug, Clone)]
pub struct KernelGradients {
    pub d_log_signal_variance: DMatrix<f64>,
    pub d_log_ard_weights: Vec<DMatrix<f64>>,
    pub d_log_beta: DMatrix<f64>,
    pub d_latent: Vec<DMatrix<f64>>,
}

pub fn kernel_gradients(x: &DMatrix<f64>, params: &ArdKernelParams) -> Result<KernelGradients> {
    if params.q() != x.ncols() {
        return Err(MrdError::DimensionMismatch(format!(
            "kernel has {} ARD weights but inputs have {} columns",
            params.q(),
            x.ncols()
        )));
    }
    ensure_finite(x, "kernel input")?;
    let (n, q) = x.shape();
    let w = params.ard_weights();
    let k = rbf_cross(x, x, params.signal_variance(), &w);
    let d_log_ard_weights = (0..q)
        .map(|dim| {
            DMatrix::from_fn(n, n, |i, j| {
                let d = x[(i, dim)] - x[(j, dim)];
                -0.5 * w[dim] * d * d * k[(i, j)]
            })
        })
        .collect();
    let mut d_latent = Vec::with_capacity(n * q);
    for p in 0..n {
        for dim in 0..q {
            let mut g = DMatrix::zeros(n, n);
            for j in 0..n {
                if j == p {
                    continue;
                }
                let v = -w[dim] * (x[(p, dim)] - x[(j, dim)]) * k[(p, j)];
                g[(p, j)] = v;
                g[(j, p)] = v;
            }
            d_latent.push(g);
        }
    }
    Ok(KernelGradients {
        d_log_signal_variance: k,
        d_log_ard_weights,
        d_log_beta: DMatrix::identity(n, n) * (-1.0 / params.beta()),
        d_latent,
    })
}

/// Gradient of a scalar objective through a noise-free ARD Gram matrix
/// `K(Z, Z)` (jitter proportional to σ² included), given `G = ∂F/∂K`.
pub(crate) struct GramGradient {
    pub d_inputs: DMatrix<f64>,
    pub d_log_signal_variance: f64,
    pub d_log_ard_weights: Vec<f64>,
}

pub(crate) fn rbf_gram_backprop(
    z: &DMatrix<f64>,
    k_with_jitter: &DMatrix<f64>,
    weights: &[f64],
    g: &DMatrix<f64>,
) -> GramGradient {
    let (m, q) = z.shape();
    let mut d_inputs = DMatrix::zeros(m, q);
    let mut d_log_w = vec![0.0; q];
    let d_log_var = g.component_mul(k_with_jitter).sum();
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let gk = g[(a, b)] * k_with_jitter[(a, b)];
            for dim in 0..q {
                let d = z[(a, dim)] - z[(b, dim)];
                // Entry (a, b) depends on z_a and z_b; collect both slots.
                d_inputs[(a, dim)] -= gk * weights[dim] * d;
                d_inputs[(b, dim)] += gk * weights[dim] * d;
                d_log_w[dim] -= 0.5 * gk * weights[dim] * d * d;
            }
        }
    }
    GramGradient {
        d_inputs,
        d_log_signal_variance: d_log_var,
        d_log_ard_weights: d_log_w,
    }
}

/// Expectations of the ARD kernel under `q(X)`:
/// `psi0 = Σ_n E[k(x_n, x_n)]`, `psi1[n, m] = E[k(x_n, z_m)]`,
/// `psi2[m, m'] = Σ_n E[k(z_m, x_n) k(x_n, z_m')]`.
#[derive(Debug, Clone)]
pub struct PsiStatistics {
    pub psi0: f64,
    pub psi1: DMatrix<f64>,
    pub psi2: DMatrix<f64>,
}

fn check_psi_inputs(
    latent: &LatentDistribution,
    inducing: &DMatrix<f64>,
    params: &ArdKernelParams,
) -> Result<()> {
    let q = latent.q();
    if inducing.ncols() != q || params.q() != q {
        return Err(MrdError::DimensionMismatch(format!(
            "latent q={q}, inducing has {} columns, kernel has {} weights",
            inducing.ncols(),
            params.q()
        )));
    }
    if latent.variances.iter().any(|s| !(*s > 0.0)) {
        return Err(MrdError::invalid(
            "latent variances must be strictly positive",
        ));
    }
    ensure_finite(inducing, "inducing inputs")?;
    ensure_finite(&latent.means, "latent means")
}

pub fn psi_statistics(
    latent: &LatentDistribution,
    inducing: &DMatrix<f64>,
    params: &ArdKernelParams,
) -> Result<PsiStatistics> {
    check_psi_inputs(latent, inducing, params)?;
    let n = latent.n();
    let m = inducing.nrows();
    let q = latent.q();
    let var = params.signal_variance();
    let w = params.ard_weights();
    let mu = &latent.means;
    let s = &latent.variances;

    let psi1 = DMatrix::from_fn(n, m, |i, j| {
        let mut log = 0.0;
        for k in 0..q {
            let denom = w[k] * s[(i, k)] + 1.0;
            let d = mu[(i, k)] - inducing[(j, k)];
            log -= 0.5 * denom.ln() + 0.5 * w[k] * d * d / denom;
        }
        var * log.exp()
    });

    let mut psi2 = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut base = 0.0;
            for k in 0..q {
                let dz = inducing[(a, k)] - inducing[(b, k)];
                base -= 0.25 * w[k] * dz * dz;
            }
            let mut total = 0.0;
            for i in 0..n {
                let mut log = base;
                for k in 0..q {
                    let denom = 2.0 * w[k] * s[(i, k)] + 1.0;
                    let e = mu[(i, k)] - 0.5 * (inducing[(a, k)] + inducing[(b, k)]);
                    log -= 0.5 * denom.ln() + w[k] * e * e / denom;
                }
                total += log.exp();
            }
            psi2[(a, b)] = var * var * total;
            psi2[(b, a)] = psi2[(a, b)];
        }
    }

    Ok(PsiStatistics {
        psi0: n as f64 * var,
        psi1,
        psi2,
    })
}

/// Gradients of `F` with respect to the latent distribution, inducing inputs
/// and kernel log-hyperparameters, given `∂F/∂psi0`, `∂F/∂Psi1` and a
/// symmetric `∂F/∂Psi2`.
#[derive(Debug, Clone)]
pub(crate) struct PsiGradient {
    pub d_means: DMatrix<f64>,
    pub d_variances: DMatrix<f64>,
    pub d_inducing: DMatrix<f64>,
    pub d_log_signal_variance: f64,
    pub d_log_ard_weights: Vec<f64>,
}

pub(crate) fn psi_backprop(
    latent: &LatentDistribution,
    inducing: &DMatrix<f64>,
    params: &ArdKernelParams,
    psi: &PsiStatistics,
    g_psi0: f64,
    g_psi1: &DMatrix<f64>,
    g_psi2: &DMatrix<f64>,
) -> PsiGradient {
    let n = latent.n();
    let m = inducing.nrows();
    let q = latent.q();
    let var = params.signal_variance();
    let w = params.ard_weights();
    let mu = &latent.means;
    let s = &latent.variances;

    let mut d_means = DMatrix::zeros(n, q);
    let mut d_variances = DMatrix::zeros(n, q);
    let mut d_inducing = DMatrix::zeros(m, q);
    let mut d_log_w = vec![0.0; q];
    let mut d_log_var = g_psi0 * psi.psi0;

    // Psi1
    for i in 0..n {
        for j in 0..m {
            let c = g_psi1[(i, j)] * psi.psi1[(i, j)];
            if c == 0.0 {
                continue;
            }
            d_log_var += c;
            for k in 0..q {
                let denom = w[k] * s[(i, k)] + 1.0;
                let d = mu[(i, k)] - inducing[(j, k)];
                let dmu = -w[k] * d / denom;
                d_means[(i, k)] += c * dmu;
                d_inducing[(j, k)] -= c * dmu;
                d_variances[(i, k)] +=
                    c * (-0.5 * w[k] / denom + 0.5 * w[k] * w[k] * d * d / (denom * denom));
                d_log_w[k] += c * w[k] * (-0.5 * s[(i, k)] / denom - 0.5 * d * d / (denom * denom));
            }
        }
    }

    // Psi2, one data point at a time.
    let mut base = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let mut acc = 0.0;
            for k in 0..q {
                let dz = inducing[(a, k)] - inducing[(b, k)];
                acc -= 0.25 * w[k] * dz * dz;
            }
            base[(a, b)] = acc;
        }
    }
    let var2 = var * var;
    let mut e = vec![0.0; q];
    let mut denom = vec![0.0; q];
    for i in 0..n {
        for k in 0..q {
            denom[k] = 2.0 * w[k] * s[(i, k)] + 1.0;
        }
        let log_norm: f64 = denom.iter().map(|d| -0.5 * d.ln()).sum();
        for a in 0..m {
            for b in 0..m {
                let g = g_psi2[(a, b)];
                if g == 0.0 {
                    continue;
                }
                let mut log = base[(a, b)] + log_norm;
                for k in 0..q {
                    e[k] = mu[(i, k)] - 0.5 * (inducing[(a, k)] + inducing[(b, k)]);
                    log -= w[k] * e[k] * e[k] / denom[k];
                }
                let c = g * var2 * log.exp();
                d_log_var += 2.0 * c;
                for k in 0..q {
                    let dz = inducing[(a, k)] - inducing[(b, k)];
                    let ek = e[k];
                    let dk = denom[k];
                    d_means[(i, k)] += c * (-2.0 * w[k] * ek / dk);
                    d_variances[(i, k)] +=
                        c * (-w[k] / dk + 2.0 * w[k] * w[k] * ek * ek / (dk * dk));
                    d_inducing[(a, k)] += c * (-0.5 * w[k] * dz + w[k] * ek / dk);
                    d_inducing[(b, k)] += c * (0.5 * w[k] * dz + w[k] * ek / dk);
                    d_log_w[k] +=
                        c * w[k] * (-s[(i, k)] / dk - 0.25 * dz * dz - ek * ek / (dk * dk));
                }
            }
        }
    }

    PsiGradient {
        d_means,
        d_variances,
        d_inducing,
        d_log_signal_variance: d_log_var,
        d_log_ard_weights: d_log_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_matrix(rng: &mut SeededRng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.normal())
    }

    fn random_params(rng: &mut SeededRng, q: usize) -> ArdKernelParams {
        let w: Vec<f64> = (0..q).map(|_| rng.uniform_range(0.2, 2.0)).collect();
        ArdKernelParams::new(
            rng.uniform_range(0.5, 2.0),
            &w,
            rng.uniform_range(5.0, 50.0),
        )
        .unwrap()
    }

    #[test]
    fn linear_kernel_orthonormal_rows() {
        let x = DMatrix::<f64>::identity(2, 2);
        let k = linear_kernel(&x, &x, 1.0, true).unwrap();
        assert_eq!(
            k.values,
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0])
        );
    }

    #[test]
    fn linear_kernel_zero_vector() {
        let x1 = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        let x2 = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let k = linear_kernel(&x1, &x2, 1.0, false).unwrap();
        assert_eq!(k.values[(0, 0)], 0.0);
    }

    #[test]
    fn linear_kernel_matches_loop_oracle() {
        let mut rng = SeededRng::new(11);
        let x = random_matrix(&mut rng, 4, 3);
        let k = linear_kernel(&x, &x, 2.0, true).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut dot = 0.0;
                for c in 0..3 {
                    dot += x[(i, c)] * x[(j, c)];
                }
                if i == j {
                    dot += 0.5;
                }
                assert!((k.values[(i, j)] - dot).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_kernel_dimension_mismatch() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::zeros(2, 3);
        assert!(matches!(
            linear_kernel(&a, &b, 1.0, false),
            Err(MrdError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rbf_zero_distance_is_signal_variance() {
        let p = ArdKernelParams::new(1.5, &[0.7, 3.0], 10.0).unwrap();
        let x = DMatrix::from_row_slice(1, 2, &[0.3, -1.2]);
        let k = ard_rbf_kernel(&x, &x, &p, false).unwrap();
        assert!((k.values[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rbf_zero_weights_constant() {
        let p = ArdKernelParams::new(2.0, &[0.0, 0.0], 4.0).unwrap();
        let mut rng = SeededRng::new(2);
        let x = random_matrix(&mut rng, 5, 2);
        let k = ard_rbf_kernel(&x, &x, &p, true).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { 2.25 } else { 2.0 };
                assert!((k.values[(i, j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rbf_matches_scalar_oracle() {
        let mut rng = SeededRng::new(5);
        let x = random_matrix(&mut rng, 5, 2);
        let p = random_params(&mut rng, 2);
        let k = ard_rbf_kernel(&x, &x, &p, false).unwrap();
        let w = p.ard_weights();
        for i in 0..5 {
            for j in 0..5 {
                let r2 =
                    w[0] * (x[(i, 0)] - x[(j, 0)]).powi(2) + w[1] * (x[(i, 1)] - x[(j, 1)]).powi(2);
                let v = p.signal_variance() * (-0.5 * r2).exp();
                assert!((k.values[(i, j)] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rbf_rejects_non_finite() {
        let p = ArdKernelParams::new(1.0, &[1.0], 1.0).unwrap();
        let x = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(
            ard_rbf_kernel(&x, &x, &p, false),
            Err(MrdError::NonFinite(_))
        ));
    }

    #[test]
    fn rbf_symmetric_and_psd() {
        let mut rng = SeededRng::new(8);
        for _ in 0..10 {
            let x = random_matrix(&mut rng, 8, 3);
            let p = random_params(&mut rng, 3);
            let k = ard_rbf_kernel(&x, &x, &p, false).unwrap().values;
            let asym = (&k - k.transpose()).amax();
            assert!(asym < 1e-12);
            let eig = k.clone().symmetric_eigen().eigenvalues;
            assert!(eig.min() >= -1e-8 * eig.max());
        }
    }

    #[test]
    fn rbf_translation_invariant() {
        let mut rng = SeededRng::new(9);
        let x = random_matrix(&mut rng, 6, 3);
        let p = random_params(&mut rng, 3);
        let shift = DMatrix::from_fn(6, 3, |_, c| [3.0, -7.5, 0.25][c]);
        let k1 = ard_rbf_kernel(&x, &x, &p, true).unwrap().values;
        let k2 = ard_rbf_kernel(&(&x + &shift), &(&x + &shift), &p, true)
            .unwrap()
            .values;
        assert!((k1 - k2).amax() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ArdKernelParams::new(0.0, &[1.0], 1.0).is_err());
        assert!(ArdKernelParams::new(1.0, &[-1.0], 1.0).is_err());
        assert!(ArdKernelParams::new(1.0, &[1.0], -2.0).is_err());
    }

    #[test]
    fn gradient_wrt_log_variance_is_noiseless_kernel() {
        let mut rng = SeededRng::new(3);
        let x = random_matrix(&mut rng, 4, 2);
        let p = random_params(&mut rng, 2);
        let g = kernel_gradients(&x, &p).unwrap();
        let k = ard_rbf_kernel(&x, &x, &p, false).unwrap().values;
        assert!((g.d_log_signal_variance - k).amax() < 1e-15);
    }

    #[test]
    fn switched_off_dimension_has_zero_latent_gradient() {
        let mut rng = SeededRng::new(4);
        let x = random_matrix(&mut rng, 5, 3);
        let p = ArdKernelParams::new(1.3, &[0.8, 0.0, 1.7], 20.0).unwrap();
        let g = kernel_gradients(&x, &p).unwrap();
        for n in 0..5 {
            assert_eq!(g.d_latent[n * 3 + 1].amax(), 0.0);
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn kernel_gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..10 {
            let mut rng = SeededRng::new(100 + seed);
            let (n, q) = (4, 2);
            let x = random_matrix(&mut rng, n, q);
            let p = random_params(&mut rng, q);
            let g = kernel_gradients(&x, &p).unwrap();
            let eval = |x: &DMatrix<f64>, p: &ArdKernelParams| {
                ard_rbf_kernel(x, x, p, true).unwrap().values
            };
            let check = |analytic: &DMatrix<f64>, plus: DMatrix<f64>, minus: DMatrix<f64>| {
                let fd = (plus - minus) / (2.0 * h);
                for (a, b) in analytic.iter().zip(fd.iter()) {
                    assert!(rel_err(*a, *b) < 1e-6, "analytic {a} vs fd {b}");
                }
            };
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp.set_log_signal_variance(p.log_signal_variance() + h);
            pm.set_log_signal_variance(p.log_signal_variance() - h);
            check(&g.d_log_signal_variance, eval(&x, &pp), eval(&x, &pm));
            for k in 0..q {
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp.log_ard_weights_mut()[k] += h;
                pm.log_ard_weights_mut()[k] -= h;
                check(&g.d_log_ard_weights[k], eval(&x, &pp), eval(&x, &pm));
            }
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp.set_log_beta(p.log_beta() + h);
            pm.set_log_beta(p.log_beta() - h);
            check(&g.d_log_beta, eval(&x, &pp), eval(&x, &pm));
            for i in 0..n {
                for k in 0..q {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[(i, k)] += h;
                    xm[(i, k)] -= h;
                    check(&g.d_latent[i * q + k], eval(&xp, &p), eval(&xm, &p));
                }
            }
        }
    }

    #[test]
    fn psi0_is_n_times_variance() {
        let latent =
            LatentDistribution::new(DMatrix::zeros(7, 2), DMatrix::from_element(7, 2, 0.3))
                .unwrap();
        let p = ArdKernelParams::new(2.0, &[1.0, 1.0], 1.0).unwrap();
        let psi = psi_statistics(&latent, &DMatrix::zeros(3, 2), &p).unwrap();
        assert_eq!(psi.psi0, 14.0);
    }

    #[test]
    fn psi_rejects_non_positive_variance() {
        let mut latent =
            LatentDistribution::new(DMatrix::zeros(2, 1), DMatrix::from_element(2, 1, 1.0))
                .unwrap();
        latent.variances[(1, 0)] = 0.0;
        let p = ArdKernelParams::new(1.0, &[1.0], 1.0).unwrap();
        assert!(matches!(
            psi_statistics(&latent, &DMatrix::zeros(1, 1), &p),
            Err(MrdError::InvalidArgument(_))
        ));
    }

    #[test]
    fn psi_statistics_zero_variance_limit() {
        let mut rng = SeededRng::new(21);
        let (n, m, q) = (6, 4, 3);
        let mu = random_matrix(&mut rng, n, q);
        let z = random_matrix(&mut rng, m, q);
        let p = random_params(&mut rng, q);
        let latent =
            LatentDistribution::new(mu.clone(), DMatrix::from_element(n, q, 1e-12)).unwrap();
        let psi = psi_statistics(&latent, &z, &p).unwrap();
        let knm = ard_rbf_kernel(&mu, &z, &p, false).unwrap().values;
        assert!((&psi.psi1 - &knm).amax() < 1e-6);
        let direct = knm.transpose() * &knm;
        assert!((&psi.psi2 - direct).amax() < 1e-6);
    }

    #[test]
    fn psi2_symmetric_psd() {
        let mut rng = SeededRng::new(22);
        let mu = random_matrix(&mut rng, 10, 2);
        let s = DMatrix::from_fn(10, 2, |_, _| rng.uniform_range(0.05, 1.0));
        let z = random_matrix(&mut rng, 5, 2);
        let p = random_params(&mut rng, 2);
        let psi = psi_statistics(&LatentDistribution::new(mu, s).unwrap(), &z, &p).unwrap();
        assert!((&psi.psi2 - psi.psi2.transpose()).amax() < 1e-14);
        let eig = psi.psi2.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() >= -1e-10 * eig.max());
    }
}
