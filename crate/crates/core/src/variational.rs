//! The collapsed inducing-point variational bound for one view and its
//! gradients, plus the parameter packing and training loop shared by the
//! Bayesian GPLVM and MRD.
//!
//! For a view `Y` (`N×D`, centered) with kernel `k`, noise precision `β`,
//! inducing inputs `Z` and `A = K_uu + β·Ψ2`, the data-fit term is
//!
//! ```text
//! F = -ND/2·ln 2π + ND/2·ln β + D/2·ln|K_uu| − D/2·ln|A|
//!     − β/2·tr(YᵀY) + β²/2·tr(YᵀΨ1 A⁻¹ Ψ1ᵀY) − βD/2·ψ0 + βD/2·tr(K_uu⁻¹Ψ2)
//! ```
//!
//! and the full bound subtracts `KL[q(X) ‖ N(0, I)]` once.

use nalgebra::{DMatrix, DVector};

use crate::error::{MrdError, Result};
use crate::gplvm::LatentDistribution;
use crate::kernels::{psi_backprop, psi_statistics, rbf_cross, rbf_gram_backprop, ArdKernelParams};
use crate::linalg::{chol_logdet, cholesky, jittered_cholesky, sym_eigen_desc};
use crate::optimize::{maximize, TrainConfig};
use crate::rng::SeededRng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Initial per-coordinate variance of q(X) for variational training.
pub(crate) const LATENT_VARIANCE_INIT: f64 = 0.05;

/// Gradient of one view's data-fit term.
#[derive(Debug, Clone)]
pub(crate) struct ViewGradient {
    pub d_means: DMatrix<f64>,
    pub d_variances: DMatrix<f64>,
    pub d_inducing: DMatrix<f64>,
    pub d_log_signal_variance: f64,
    pub d_log_ard_weights: Vec<f64>,
    pub d_log_beta: f64,
}

/// Value (and optionally gradient) of one view's collapsed data-fit term.
pub(crate) fn view_bound(
    latent: &LatentDistribution,
    inducing: &DMatrix<f64>,
    params: &ArdKernelParams,
    y: &DMatrix<f64>,
    with_gradient: bool,
) -> Result<(f64, Option<ViewGradient>)> {
    if y.nrows() != latent.n() {
        return Err(MrdError::DimensionMismatch(format!(
            "view has {} rows, latent distribution has {}",
            y.nrows(),
            latent.n()
        )));
    }
    let n = y.nrows() as f64;
    let d = y.ncols() as f64;
    let m = inducing.nrows();
    let beta = params.beta();
    let weights = params.ard_weights();

    let psi = psi_statistics(latent, inducing, params)?;
    let kuu = rbf_cross(inducing, inducing, params.signal_variance(), &weights);
    let (chol_u, jitter) = jittered_cholesky(&kuu, params.jitter_scale())?;
    let lu = chol_u.l();
    let lu_inv = lu
        .clone()
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or(MrdError::Factorization { jitter })?;

    // C = Lu⁻¹ Ψ2 Lu⁻ᵀ, B = I + βC
    let c = &lu_inv * &psi.psi2 * lu_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let b = DMatrix::identity(m, m) + &c * beta;
    let chol_b = cholesky(b)?;
    let p = psi.psi1.transpose() * y; // M×D
    let lu_inv_p = &lu_inv * &p;
    let v = chol_b
        .l()
        .solve_lower_triangular(&lu_inv_p)
        .ok_or(MrdError::Factorization { jitter: 0.0 })?;
    let yy = y.norm_squared();
    let v2 = v.norm_squared();
    let trace_c = c.trace();

    let value = -0.5 * n * d * LN_2PI + 0.5 * n * d * beta.ln()
        - 0.5 * d * chol_logdet(&chol_b)
        - 0.5 * beta * yy
        + 0.5 * beta * beta * v2
        - 0.5 * beta * d * psi.psi0
        + 0.5 * beta * d * trace_c;

    if !with_gradient {
        return Ok((value, None));
    }

    let kinv = lu_inv.transpose() * &lu_inv;
    let binv = chol_b.inverse();
    let ainv = lu_inv.transpose() * &binv * &lu_inv;
    let ainv = (&ainv + ainv.transpose()) * 0.5;
    let ainv_p = &ainv * &p;
    let e = &ainv_p * ainv_p.transpose();

    let g_psi0 = -0.5 * beta * d;
    let g_psi1 = y * ainv_p.transpose() * (beta * beta);
    let g_psi2 = &ainv * (-0.5 * beta * d) - &e * (0.5 * beta.powi(3)) + &kinv * (0.5 * beta * d);
    let kinv_psi2_kinv = &kinv * &psi.psi2 * &kinv;
    let g_kuu = &kinv * (0.5 * d)
        - &ainv * (0.5 * d)
        - &e * (0.5 * beta * beta)
        - kinv_psi2_kinv * (0.5 * beta * d);

    let tr_ainv_psi2 = ainv.component_mul(&psi.psi2).sum();
    let tr_e_psi2 = e.component_mul(&psi.psi2).sum();
    let tr_kinv_psi2 = kinv.component_mul(&psi.psi2).sum();
    let d_beta = 0.5 * d * n / beta - 0.5 * d * tr_ainv_psi2 - 0.5 * yy + beta * v2
        - 0.5 * beta * beta * tr_e_psi2
        - 0.5 * d * psi.psi0
        + 0.5 * d * tr_kinv_psi2;

    let pg = psi_backprop(latent, inducing, params, &psi, g_psi0, &g_psi1, &g_psi2);
    let mut kuu_j = kuu;
    for i in 0..m {
        kuu_j[(i, i)] += jitter;
    }
    let kg = rbf_gram_backprop(inducing, &kuu_j, &weights, &g_kuu);

    let d_log_ard_weights = pg
        .d_log_ard_weights
        .iter()
        .zip(&kg.d_log_ard_weights)
        .map(|(a, b)| a + b)
        .collect();
    Ok((
        value,
        Some(ViewGradient {
            d_means: pg.d_means,
            d_variances: pg.d_variances,
            d_inducing: pg.d_inducing + kg.d_inputs,
            d_log_signal_variance: pg.d_log_signal_variance + kg.d_log_signal_variance,
            d_log_ard_weights,
            d_log_beta: beta * d_beta,
        }),
    ))
}

/// `KL[q(X) ‖ N(0, I)] = Σ ½(μ² + s − ln s − 1)`.
pub fn kl_to_standard_normal(latent: &LatentDistribution) -> f64 {
    latent
        .means
        .iter()
        .zip(latent.variances.iter())
        .map(|(m, s)| 0.5 * (m * m + s - s.ln() - 1.0))
        .sum()
}

/// Mutable training state for one view.
#[derive(Debug, Clone)]
pub(crate) struct ViewState {
    pub params: ArdKernelParams,
    pub inducing: DMatrix<f64>,
}

/// Everything the variational optimizer moves.
#[derive(Debug, Clone)]
pub(crate) struct VariationalState {
    pub latent: LatentDistribution,
    pub views: Vec<ViewState>,
}

impl VariationalState {
    fn latent_len(&self) -> usize {
        2 * self.latent.n() * self.latent.q()
    }

    /// Layout: means (row-major N×q), log variances (row-major N×q), then per
    /// view: inducing inputs (row-major M×q), log σ², log ARD weights, log β.
    pub fn pack(&self) -> Vec<f64> {
        let (n, q) = (self.latent.n(), self.latent.q());
        let mut x = Vec::with_capacity(self.latent_len());
        for i in 0..n {
            for k in 0..q {
                x.push(self.latent.means[(i, k)]);
            }
        }
        for i in 0..n {
            for k in 0..q {
                x.push(self.latent.variances[(i, k)].ln());
            }
        }
        for v in &self.views {
            for i in 0..v.inducing.nrows() {
                for k in 0..q {
                    x.push(v.inducing[(i, k)]);
                }
            }
            x.push(v.params.log_signal_variance());
            x.extend_from_slice(v.params.log_ard_weights());
            x.push(v.params.log_beta());
        }
        x
    }

    pub fn unpack(&mut self, x: &[f64]) {
        let (n, q) = (self.latent.n(), self.latent.q());
        let mut it = x.iter().copied();
        for i in 0..n {
            for k in 0..q {
                self.latent.means[(i, k)] = it.next().unwrap();
            }
        }
        for i in 0..n {
            for k in 0..q {
                self.latent.variances[(i, k)] = it.next().unwrap().exp();
            }
        }
        for v in &mut self.views {
            for i in 0..v.inducing.nrows() {
                for k in 0..q {
                    v.inducing[(i, k)] = it.next().unwrap();
                }
            }
            v.params.set_log_signal_variance(it.next().unwrap());
            for w in v.params.log_ard_weights_mut() {
                *w = it.next().unwrap();
            }
            v.params.set_log_beta(it.next().unwrap());
        }
    }

    /// Mask freezing everything except the latent distribution.
    pub fn latent_only_mask(&self) -> Vec<bool> {
        let total = self.pack().len();
        (0..total).map(|i| i >= self.latent_len()).collect()
    }

    /// Joint bound `Σ_v F_v − KL` and its gradient in packed layout.
    pub fn objective(
        &self,
        data: &[&DMatrix<f64>],
        with_gradient: bool,
    ) -> Result<(f64, Vec<f64>)> {
        if data.len() != self.views.len() {
            return Err(MrdError::DimensionMismatch(format!(
                "{} data matrices for {} views",
                data.len(),
                self.views.len()
            )));
        }
        let (n, q) = (self.latent.n(), self.latent.q());
        let kl = kl_to_standard_normal(&self.latent);
        let mut value = -kl;
        let mut d_means = DMatrix::zeros(n, q);
        let mut d_vars = DMatrix::zeros(n, q);
        let mut view_grads = Vec::with_capacity(self.views.len());
        for (view, y) in self.views.iter().zip(data) {
            let (f, g) = view_bound(&self.latent, &view.inducing, &view.params, y, with_gradient)?;
            value += f;
            if let Some(g) = g {
                d_means += &g.d_means;
                d_vars += &g.d_variances;
                view_grads.push(g);
            }
        }
        if !with_gradient {
            return Ok((value, Vec::new()));
        }
        let mut grad = Vec::with_capacity(self.latent_len());
        for i in 0..n {
            for k in 0..q {
                grad.push(d_means[(i, k)] - self.latent.means[(i, k)]);
            }
        }
        for i in 0..n {
            for k in 0..q {
                let s = self.latent.variances[(i, k)];
                // d/d ln s of (F − KL)
                grad.push(s * d_vars[(i, k)] - 0.5 * (s - 1.0));
            }
        }
        for g in &view_grads {
            for i in 0..g.d_inducing.nrows() {
                for k in 0..q {
                    grad.push(g.d_inducing[(i, k)]);
                }
            }
            grad.push(g.d_log_signal_variance);
            grad.extend_from_slice(&g.d_log_ard_weights);
            grad.push(g.d_log_beta);
        }
        Ok((value, grad))
    }
}

/// Result of a variational training run.
pub(crate) struct FitOutcome {
    pub state: VariationalState,
    pub trace: Vec<(usize, f64)>,
}

/// Runs the two training phases: latent-only warm-up, then everything.
pub(crate) fn fit_state(
    mut state: VariationalState,
    data: &[&DMatrix<f64>],
    config: &TrainConfig,
) -> Result<FitOutcome> {
    config.validate()?;
    let x0 = state.pack();
    let eval_state = state.clone();
    let objective = |x: &[f64]| {
        let mut s = eval_state.clone();
        s.unpack(x);
        s.objective(data, true)
    };

    let warmup = config.warmup_iterations.min(config.max_iterations);
    let mut trace = Vec::new();
    let mut x = x0;
    if warmup > 0 {
        let mask = state.latent_only_mask();
        let r = maximize(objective, x, Some(&mask), config, warmup, 0)?;
        trace.extend(r.trace);
        x = r.x;
    }
    let remaining = config.max_iterations - warmup;
    if remaining > 0 {
        let start = trace.last().map(|t: &(usize, f64)| t.0).unwrap_or(0);
        let r = maximize(objective, x, None, config, remaining, start)?;
        // The first entry repeats the last warm-up value.
        let skip = usize::from(!trace.is_empty());
        trace.extend(r.trace.into_iter().skip(skip));
        x = r.x;
    }
    state.unpack(&x);
    Ok(FitOutcome { state, trace })
}

/// Column-wise centering used for all training views.
pub(crate) fn center_columns(y: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = y.row_mean().transpose();
    let mut c = y.clone();
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            c[(i, j)] -= mean[j];
        }
    }
    (c, mean)
}

/// Average per-column variance of a centered matrix.
pub(crate) fn data_variance(y: &DMatrix<f64>) -> f64 {
    let v = y.norm_squared() / (y.nrows() * y.ncols()).max(1) as f64;
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Initial latent means: top principal-component scores of the (already
/// centered and rescaled) data, each column standardized to unit variance;
/// columns beyond the data rank are filled with seeded standard normals.
pub(crate) fn pca_init(y: &DMatrix<f64>, q: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let (n, d) = y.shape();
    let cov = y.transpose() * y / n as f64;
    let (vals, vecs) = sym_eigen_desc(&cov);
    let usable = q.min(d).min(n);
    let mut x = DMatrix::zeros(n, q);
    for k in 0..q {
        let use_pc = k < usable && vals[k] > 1e-12 * vals[0].max(1e-300);
        if use_pc {
            let col = y * vecs.column(k);
            x.set_column(k, &col);
        } else {
            for i in 0..n {
                x[(i, k)] = rng.normal();
            }
        }
        let mut col = x.column(k).into_owned();
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n as f64).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
        x.set_column(k, &col);
    }
    x
}

/// Seeded k-means (k-means++ seeding, then Lloyd steps) over the rows of `x`.
/// Returns all rows when `m ≥ N`.
pub(crate) fn kmeans_subsample(x: &DMatrix<f64>, m: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let (n, q) = x.shape();
    if m >= n {
        return x.clone();
    }
    let dist2 = |a: usize, c: &DMatrix<f64>, j: usize| -> f64 {
        (0..q).map(|k| (x[(a, k)] - c[(j, k)]).powi(2)).sum()
    };
    let mut centers = DMatrix::zeros(m, q);
    let first = rng.index(n);
    centers.set_row(0, &x.row(first));
    let mut best = vec![f64::INFINITY; n];
    for j in 1..m {
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist2(i, &centers, j - 1));
        }
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, b) in best.iter().enumerate() {
                acc += b;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.index(n)
        };
        centers.set_row(j, &x.row(pick));
    }
    for _ in 0..10 {
        let mut sums = DMatrix::<f64>::zeros(m, q);
        let mut counts = vec![0usize; m];
        for i in 0..n {
            let j = (0..m)
                .min_by(|&a, &b| dist2(i, &centers, a).total_cmp(&dist2(i, &centers, b)))
                .unwrap();
            counts[j] += 1;
            for k in 0..q {
                sums[(j, k)] += x[(i, k)];
            }
        }
        for j in 0..m {
            if counts[j] > 0 {
                for k in 0..q {
                    centers[(j, k)] = sums[(j, k)] / counts[j] as f64;
                }
            }
        }
    }
    centers
}
