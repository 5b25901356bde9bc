//! Single-view GPLVM: the MAP formulation, which optimizes the latent
//! coordinates of `∏_d N(y_d | 0, K_X + β⁻¹I)`, and the Bayesian formulation,
//! which places a diagonal Gaussian over them and maximizes the collapsed
//! variational bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ViewMatrix;
use crate::error::{MrdError, Result};
use crate::kernels::{
    ard_rbf_kernel, linear_kernel, rbf_cross, rbf_gram_backprop, ArdKernelParams,
};
use crate::linalg::{chol_logdet, noisy_cholesky};
use crate::optimize::{maximize, TrainConfig};
use crate::rng::SeededRng;
use crate::variational::{
    center_columns, data_variance, fit_state, kl_to_standard_normal, kmeans_subsample, pca_init,
    view_bound, VariationalState, ViewState, LATENT_VARIANCE_INIT,
};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Factorized Gaussian over latent points: row `n` is `N(means[n], diag(variances[n]))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDistribution {
    pub means: DMatrix<f64>,
    pub variances: DMatrix<f64>,
}

impl LatentDistribution {
    pub fn new(means: DMatrix<f64>, variances: DMatrix<f64>) -> Result<Self> {
        if means.shape() != variances.shape() {
            return Err(MrdError::DimensionMismatch(format!(
                "means {:?} vs variances {:?}",
                means.shape(),
                variances.shape()
            )));
        }
        if variances.iter().any(|s| !(*s > 0.0)) {
            return Err(MrdError::invalid(
                "latent variances must be strictly positive",
            ));
        }
        Ok(Self { means, variances })
    }

    /// The standard-normal prior, `μ = 0`, `s = 1`.
    pub fn prior(n: usize, q: usize) -> Self {
        Self {
            means: DMatrix::zeros(n, q),
            variances: DMatrix::from_element(n, q, 1.0),
        }
    }

    pub fn n(&self) -> usize {
        self.means.nrows()
    }

    pub fn q(&self) -> usize {
        self.means.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Map,
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    /// `x·x'`; only β is a hyperparameter.
    Linear,
    ArdRbf,
}

#[derive(Debug, Clone)]
pub struct GplvmModel {
    /// In MAP mode the variances are placeholders and ignored.
    pub latent: LatentDistribution,
    pub kernel: ArdKernelParams,
    pub kernel_choice: KernelChoice,
    pub inducing: Option<DMatrix<f64>>,
    pub mode: FitMode,
    pub training_trace: Vec<(usize, f64)>,
    /// Column means removed from the training data.
    pub data_mean: DVector<f64>,
}

fn check_view(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(MrdError::DimensionMismatch(format!(
            "{} latent rows for {} observations",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

fn training_covariance(
    x: &DMatrix<f64>,
    choice: KernelChoice,
    params: &ArdKernelParams,
) -> Result<DMatrix<f64>> {
    Ok(match choice {
        KernelChoice::Linear => linear_kernel(x, x, params.beta(), true)?.values,
        KernelChoice::ArdRbf => ard_rbf_kernel(x, x, params, true)?.values,
    })
}

/// `Σ_d ln N(y_d | 0, K_X + β⁻¹I)` with one shared Cholesky factorization.
/// `y` is used as given (callers center it).
pub fn gplvm_log_marginal(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    choice: KernelChoice,
    params: &ArdKernelParams,
) -> Result<f64> {
    Ok(log_marginal_impl(x, y, choice, params, false)?.0)
}

/// Gradient of [`gplvm_log_marginal`] with respect to the latent coordinates
/// and log-hyperparameters.
#[derive(Debug, Clone)]
pub struct LogMarginalGradient {
    pub d_latent: DMatrix<f64>,
    /// Zero for the linear kernel.
    pub d_log_signal_variance: f64,
    /// Empty for the linear kernel.
    pub d_log_ard_weights: Vec<f64>,
    pub d_log_beta: f64,
}

pub fn gplvm_log_marginal_gradient(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    choice: KernelChoice,
    params: &ArdKernelParams,
) -> Result<(f64, LogMarginalGradient)> {
    let (v, g) = log_marginal_impl(x, y, choice, params, true)?;
    Ok((v, g.expect("gradient requested")))
}

fn log_marginal_impl(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    choice: KernelChoice,
    params: &ArdKernelParams,
    with_gradient: bool,
) -> Result<(f64, Option<LogMarginalGradient>)> {
    check_view(x, y)?;
    let (n, d) = y.shape();
    let k = training_covariance(x, choice, params)?;
    let scale = match choice {
        KernelChoice::Linear => 1.0 / params.beta(),
        KernelChoice::ArdRbf => params.signal_variance(),
    };
    let (chol, _jitter) = noisy_cholesky(&k, scale)?;
    let alpha = chol.solve(y);
    let value = -0.5 * y.component_mul(&alpha).sum()
        - 0.5 * d as f64 * chol_logdet(&chol)
        - 0.5 * (n * d) as f64 * LN_2PI;
    if !with_gradient {
        return Ok((value, None));
    }
    // G = ∂L/∂K = ½(ααᵀ − D K⁻¹)
    let kinv = chol.inverse();
    let g = (&alpha * alpha.transpose() - kinv * d as f64) * 0.5;
    let d_log_beta = -g.trace() / params.beta();
    let grad = match choice {
        KernelChoice::Linear => LogMarginalGradient {
            d_latent: (&g + g.transpose()) * x,
            d_log_signal_variance: 0.0,
            d_log_ard_weights: Vec::new(),
            d_log_beta,
        },
        KernelChoice::ArdRbf => {
            let w = params.ard_weights();
            let kf = rbf_cross(x, x, params.signal_variance(), &w);
            let back = rbf_gram_backprop(x, &kf, &w, &g);
            LogMarginalGradient {
                d_latent: back.d_inputs,
                d_log_signal_variance: back.d_log_signal_variance,
                d_log_ard_weights: back.d_log_ard_weights,
                d_log_beta,
            }
        }
    };
    Ok((value, Some(grad)))
}

/// MAP objective: log marginal plus the `N(0, I)` log prior on every latent point.
fn map_objective(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    choice: KernelChoice,
    params: &ArdKernelParams,
) -> Result<(f64, LogMarginalGradient)> {
    let (v, mut g) = gplvm_log_marginal_gradient(x, y, choice, params)?;
    let prior = -0.5 * x.norm_squared() - 0.5 * x.len() as f64 * LN_2PI;
    g.d_latent -= x;
    Ok((v + prior, g))
}

/// The MAP training objective: log marginal of centered `y` plus the
/// `N(0, I)` prior on the latent points.
pub fn gplvm_map_objective(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    choice: KernelChoice,
    params: &ArdKernelParams,
) -> Result<f64> {
    let prior = -0.5 * x.norm_squared() - 0.5 * x.len() as f64 * LN_2PI;
    Ok(gplvm_log_marginal(x, y, choice, params)? + prior)
}

/// Initial hyperparameters: `σ² = data variance`, `w = 1/q`, `β⁻¹ = 0.01·data variance`.
pub(crate) fn initial_params(y_centered: &DMatrix<f64>, q: usize) -> ArdKernelParams {
    let var = data_variance(y_centered);
    ArdKernelParams::new(var, &vec![1.0 / q as f64; q], 1.0 / (0.01 * var))
        .expect("initial hyperparameters are positive")
}

fn validate_fit_inputs(y: &ViewMatrix, q: usize) -> Result<()> {
    if y.nrows() < 2 {
        return Err(MrdError::invalid("at least two observations are required"));
    }
    if q == 0 {
        return Err(MrdError::invalid("latent dimensionality must be positive"));
    }
    if y.values.iter().any(|v| !v.is_finite()) {
        return Err(MrdError::NonFinite("training data"));
    }
    Ok(())
}

/// MAP GPLVM: gradient ascent on the log marginal plus latent prior over the
/// latent coordinates and log-hyperparameters, initialized from PCA.
pub fn gplvm_map_fit(
    y: &ViewMatrix,
    q: usize,
    choice: KernelChoice,
    config: &TrainConfig,
) -> Result<GplvmModel> {
    validate_fit_inputs(y, q)?;
    let (yc, mean) = center_columns(&y.values);
    let mut rng = SeededRng::derived(config.seed, 1);
    let x0 = pca_init(&yc, q, &mut rng);
    let params = initial_params(&yc, q);
    let (x, params, trace) = map_optimize(x0, params, &yc, choice, config)?;
    let n = x.nrows();
    Ok(GplvmModel {
        latent: LatentDistribution {
            means: x,
            variances: DMatrix::from_element(n, q, 1.0),
        },
        kernel: params,
        kernel_choice: choice,
        inducing: None,
        mode: FitMode::Map,
        training_trace: trace,
        data_mean: mean,
    })
}

/// Runs the MAP optimizer from an explicit starting point on centered data.
pub fn map_optimize(
    x0: DMatrix<f64>,
    params: ArdKernelParams,
    yc: &DMatrix<f64>,
    choice: KernelChoice,
    config: &TrainConfig,
) -> Result<(DMatrix<f64>, ArdKernelParams, Vec<(usize, f64)>)> {
    let (n, q) = x0.shape();
    let nx = n * q;
    let rbf = choice == KernelChoice::ArdRbf;
    let pack = |x: &DMatrix<f64>, p: &ArdKernelParams| {
        let mut v: Vec<f64> = x.transpose().iter().copied().collect();
        if rbf {
            v.push(p.log_signal_variance());
            v.extend_from_slice(p.log_ard_weights());
        }
        v.push(p.log_beta());
        v
    };
    let unpack = |v: &[f64], template: &ArdKernelParams| {
        let x = DMatrix::from_row_slice(n, q, &v[..nx]);
        let mut p = template.clone();
        let mut i = nx;
        if rbf {
            p.set_log_signal_variance(v[i]);
            i += 1;
            for w in p.log_ard_weights_mut() {
                *w = v[i];
                i += 1;
            }
        }
        p.set_log_beta(v[i]);
        (x, p)
    };
    let objective = |v: &[f64]| {
        let (x, p) = unpack(v, &params);
        let (value, g) = map_objective(&x, yc, choice, &p)?;
        let mut grad: Vec<f64> = g.d_latent.transpose().iter().copied().collect();
        if rbf {
            grad.push(g.d_log_signal_variance);
            grad.extend_from_slice(&g.d_log_ard_weights);
        }
        grad.push(g.d_log_beta);
        Ok((value, grad))
    };

    let warmup = config.warmup_iterations.min(config.max_iterations);
    let mut v = pack(&x0, &params);
    let mut trace = Vec::new();
    if warmup > 0 {
        let mask: Vec<bool> = (0..v.len()).map(|i| i >= nx).collect();
        let r = maximize(objective, v, Some(&mask), config, warmup, 0)?;
        trace.extend(r.trace);
        v = r.x;
    }
    let remaining = config.max_iterations - warmup;
    if remaining > 0 {
        let start = trace.last().map(|t: &(usize, f64)| t.0).unwrap_or(0);
        let r = maximize(objective, v, None, config, remaining, start)?;
        let skip = usize::from(!trace.is_empty());
        trace.extend(r.trace.into_iter().skip(skip));
        v = r.x;
    }
    let (x, p) = unpack(&v, &params);
    Ok((x, p, trace))
}

impl GplvmModel {
    fn variational_state(&self) -> Result<VariationalState> {
        if self.mode != FitMode::Variational {
            return Err(MrdError::invalid("model is not variational"));
        }
        let inducing = self
            .inducing
            .clone()
            .ok_or_else(|| MrdError::invalid("variational model without inducing inputs"))?;
        Ok(VariationalState {
            latent: self.latent.clone(),
            views: vec![ViewState {
                params: self.kernel.clone(),
                inducing,
            }],
        })
    }

    /// Packed variational parameters: means, log variances (both row-major),
    /// inducing inputs (row-major), log σ², log ARD weights, log β.
    pub fn parameters(&self) -> Result<Vec<f64>> {
        Ok(self.variational_state()?.pack())
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let mut state = self.variational_state()?;
        if params.len() != state.pack().len() {
            return Err(MrdError::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                state.pack().len(),
                params.len()
            )));
        }
        state.unpack(params);
        self.latent = state.latent;
        let view = state.views.pop().expect("one view");
        self.kernel = view.params;
        self.inducing = Some(view.inducing);
        Ok(())
    }

    /// Centers `y` with the stored training mean.
    pub fn center(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.data_mean.len() {
            return Err(MrdError::DimensionMismatch(format!(
                "{} columns, model expects {}",
                y.ncols(),
                self.data_mean.len()
            )));
        }
        let mut c = y.clone();
        for j in 0..c.ncols() {
            for i in 0..c.nrows() {
                c[(i, j)] -= self.data_mean[j];
            }
        }
        Ok(c)
    }
}

/// The collapsed variational bound of a Bayesian GPLVM on `y` (centered with
/// the model's stored mean), minus `KL[q(X) ‖ N(0, I)]`.
pub fn bgplvm_elbo(model: &GplvmModel, y: &ViewMatrix) -> Result<f64> {
    let state = model.variational_state()?;
    let yc = model.center(&y.values)?;
    Ok(state.objective(&[&yc], false)?.0)
}

/// [`bgplvm_elbo`] with its gradient in the layout of [`GplvmModel::parameters`].
pub fn bgplvm_elbo_gradient(model: &GplvmModel, y: &ViewMatrix) -> Result<(f64, Vec<f64>)> {
    let state = model.variational_state()?;
    let yc = model.center(&y.values)?;
    state.objective(&[&yc], true)
}

/// The data-fit part of the bound, without the KL term.
pub fn bgplvm_data_fit(model: &GplvmModel, y: &ViewMatrix) -> Result<f64> {
    let state = model.variational_state()?;
    let yc = model.center(&y.values)?;
    let view = &state.views[0];
    Ok(view_bound(&state.latent, &view.inducing, &view.params, &yc, false)?.0)
}

pub fn bgplvm_kl(model: &GplvmModel) -> f64 {
    kl_to_standard_normal(&model.latent)
}

pub(crate) fn default_inducing_count(n: usize, config: &TrainConfig) -> usize {
    config.num_inducing.unwrap_or(20).min(n).max(1)
}

/// Bayesian GPLVM: maximizes the variational bound over latent means, log
/// variances, inducing inputs and log-hyperparameters.
pub fn bgplvm_fit(y: &ViewMatrix, q: usize, config: &TrainConfig) -> Result<GplvmModel> {
    validate_fit_inputs(y, q)?;
    let n = y.nrows();
    let m = default_inducing_count(n, config);
    if m > n {
        return Err(MrdError::invalid("more inducing points than observations"));
    }
    let (yc, mean) = center_columns(&y.values);
    let mut rng = SeededRng::derived(config.seed, 1);
    let means = pca_init(&yc, q, &mut rng);
    let inducing = kmeans_subsample(&means, m, &mut SeededRng::derived(config.seed, 2));
    let state = VariationalState {
        latent: LatentDistribution {
            means,
            variances: DMatrix::from_element(n, q, LATENT_VARIANCE_INIT),
        },
        views: vec![ViewState {
            params: initial_params(&yc, q),
            inducing,
        }],
    };
    let outcome = fit_state(state, &[&yc], config)?;
    let mut state = outcome.state;
    let view = state.views.pop().expect("one view");
    Ok(GplvmModel {
        latent: state.latent,
        kernel: view.params,
        kernel_choice: KernelChoice::ArdRbf,
        inducing: Some(view.inducing),
        mode: FitMode::Variational,
        training_trace: outcome.trace,
        data_mean: mean,
    })
}
