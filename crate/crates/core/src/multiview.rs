//! Manifold relevance determination: several row-aligned views explained by
//! one shared latent distribution, each through its own ARD kernel, noise
//! precision and inducing set. The learned relevance weights factorize the
//! latent space into shared, private and irrelevant dimensions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ViewMatrix;
use crate::error::{MrdError, Result};
use crate::gplvm::{default_inducing_count, initial_params, LatentDistribution};
use crate::kernels::{psi_statistics, rbf_cross, ArdKernelParams};
use crate::linalg::{cholesky, jittered_cholesky};
use crate::optimize::TrainConfig;
use crate::rng::SeededRng;
use crate::variational::{
    center_columns, data_variance, fit_state, kmeans_subsample, pca_init, VariationalState,
    ViewState, LATENT_VARIANCE_INIT,
};

pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// One view's part of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewModel {
    pub name: String,
    pub kernel: ArdKernelParams,
    pub inducing: DMatrix<f64>,
    /// Training observations with `mean` removed.
    pub data: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl ViewModel {
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn center(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.dim() {
            return Err(MrdError::DimensionMismatch(format!(
                "view `{}` has {} columns, input has {}",
                self.name,
                self.dim(),
                y.ncols()
            )));
        }
        let mut c = y.clone();
        for j in 0..c.ncols() {
            for i in 0..c.nrows() {
                c[(i, j)] -= self.mean[j];
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrdModel {
    pub latent: LatentDistribution,
    pub views: Vec<ViewModel>,
    pub training_trace: Vec<(usize, f64)>,
}

impl MrdModel {
    pub fn n(&self) -> usize {
        self.latent.n()
    }

    pub fn q(&self) -> usize {
        self.latent.q()
    }

    pub fn view_index(&self, name: &str) -> Result<usize> {
        self.views
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| MrdError::UnknownView(name.to_string()))
    }

    pub fn view(&self, name: &str) -> Result<&ViewModel> {
        Ok(&self.views[self.view_index(name)?])
    }

    pub fn view_names(&self) -> Vec<String> {
        self.views.iter().map(|v| v.name.clone()).collect()
    }

    /// Checks the structural invariants: one N and q everywhere.
    pub fn validate(&self) -> Result<()> {
        let (n, q) = (self.n(), self.q());
        for v in &self.views {
            if v.data.nrows() != n {
                return Err(MrdError::Alignment(format!(
                    "view `{}` has {} rows, latent has {n}",
                    v.name,
                    v.data.nrows()
                )));
            }
            if v.kernel.q() != q || v.inducing.ncols() != q {
                return Err(MrdError::DimensionMismatch(format!(
                    "view `{}` does not match latent dimensionality {q}",
                    v.name
                )));
            }
            if v.mean.len() != v.data.ncols() {
                return Err(MrdError::DimensionMismatch(format!(
                    "view `{}` mean has the wrong length",
                    v.name
                )));
            }
        }
        Ok(())
    }

    fn state(&self) -> VariationalState {
        VariationalState {
            latent: self.latent.clone(),
            views: self
                .views
                .iter()
                .map(|v| ViewState {
                    params: v.kernel.clone(),
                    inducing: v.inducing.clone(),
                })
                .collect(),
        }
    }

    fn absorb(&mut self, state: VariationalState) {
        self.latent = state.latent;
        for (v, s) in self.views.iter_mut().zip(state.views) {
            v.kernel = s.params;
            v.inducing = s.inducing;
        }
    }

    /// Packed parameters: means, log variances (row-major), then per view the
    /// inducing inputs (row-major), log σ², log ARD weights and log β.
    pub fn parameters(&self) -> Vec<f64> {
        self.state().pack()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let mut state = self.state();
        let expected = state.pack().len();
        if params.len() != expected {
            return Err(MrdError::DimensionMismatch(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        state.unpack(params);
        self.absorb(state);
        Ok(())
    }

    /// The bound on the stored training data.
    pub fn training_elbo(&self) -> Result<f64> {
        let data: Vec<&DMatrix<f64>> = self.views.iter().map(|v| &v.data).collect();
        Ok(self.state().objective(&data, false)?.0)
    }

    fn centered_inputs(&self, views: &[ViewMatrix]) -> Result<Vec<DMatrix<f64>>> {
        if views.len() != self.views.len() {
            return Err(MrdError::DimensionMismatch(format!(
                "model has {} views, {} given",
                self.views.len(),
                views.len()
            )));
        }
        views
            .iter()
            .zip(&self.views)
            .map(|(given, registered)| {
                if given.name != registered.name {
                    return Err(MrdError::UnknownView(format!(
                        "{} (expected `{}` at this position)",
                        given.name, registered.name
                    )));
                }
                if given.nrows() != self.n() {
                    return Err(MrdError::Alignment(format!(
                        "view `{}` has {} rows, model has {}",
                        given.name,
                        given.nrows(),
                        self.n()
                    )));
                }
                registered.center(&given.values)
            })
            .collect()
    }
}

/// The joint bound `Σ_v F_v − KL[q(X) ‖ N(0, I)]`, each view centered with its
/// stored training mean.
pub fn mrd_elbo(model: &MrdModel, views: &[ViewMatrix]) -> Result<f64> {
    let centered = model.centered_inputs(views)?;
    let refs: Vec<&DMatrix<f64>> = centered.iter().collect();
    Ok(model.state().objective(&refs, false)?.0)
}

/// [`mrd_elbo`] and its gradient in the layout of [`MrdModel::parameters`].
pub fn mrd_elbo_gradient(model: &MrdModel, views: &[ViewMatrix]) -> Result<(f64, Vec<f64>)> {
    let centered = model.centered_inputs(views)?;
    let refs: Vec<&DMatrix<f64>> = centered.iter().collect();
    model.state().objective(&refs, true)
}

/// Per-view data-fit terms (no KL).
pub fn mrd_view_terms(model: &MrdModel) -> Result<Vec<f64>> {
    model
        .views
        .iter()
        .map(|v| {
            Ok(crate::variational::view_bound(
                &model.latent,
                &v.inducing,
                &v.kernel,
                &v.data,
                false,
            )?
            .0)
        })
        .collect()
}

/// Builds the untrained model: PCA initialization on the column-concatenation
/// of the centered views, each rescaled to unit average variance.
pub fn mrd_initialize(views: &[ViewMatrix], q: usize, config: &TrainConfig) -> Result<MrdModel> {
    if views.is_empty() {
        return Err(MrdError::invalid("at least one view is required"));
    }
    if q == 0 {
        return Err(MrdError::invalid("latent dimensionality must be positive"));
    }
    let n = views[0].nrows();
    for v in views {
        if v.nrows() != n {
            return Err(MrdError::Alignment(format!(
                "view `{}` has {} rows but `{}` has {n}; all views must be row-aligned",
                v.name,
                v.nrows(),
                views[0].name
            )));
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(MrdError::NonFinite("training data"));
        }
    }
    for (i, a) in views.iter().enumerate() {
        if views[..i].iter().any(|b| b.name == a.name) {
            return Err(MrdError::invalid(format!(
                "duplicate view name `{}`",
                a.name
            )));
        }
    }
    if n < 2 {
        return Err(MrdError::invalid("at least two observations are required"));
    }
    let m = default_inducing_count(n, config);

    let centered: Vec<(DMatrix<f64>, DVector<f64>)> =
        views.iter().map(|v| center_columns(&v.values)).collect();
    let total_cols: usize = centered.iter().map(|(c, _)| c.ncols()).sum();
    let mut concat = DMatrix::zeros(n, total_cols);
    let mut col = 0;
    for (c, _) in &centered {
        let scale = 1.0 / data_variance(c).sqrt();
        for j in 0..c.ncols() {
            concat.set_column(col, &(c.column(j) * scale));
            col += 1;
        }
    }
    let mut rng = SeededRng::derived(config.seed, 1);
    let means = pca_init(&concat, q, &mut rng);
    let inducing = kmeans_subsample(&means, m, &mut SeededRng::derived(config.seed, 2));
    let view_models = views
        .iter()
        .zip(centered)
        .map(|(v, (data, mean))| ViewModel {
            name: v.name.clone(),
            kernel: initial_params(&data, q),
            inducing: inducing.clone(),
            data,
            mean,
        })
        .collect();
    Ok(MrdModel {
        latent: LatentDistribution {
            means,
            variances: DMatrix::from_element(n, q, LATENT_VARIANCE_INIT),
        },
        views: view_models,
        training_trace: Vec::new(),
    })
}

/// Trains from an explicit starting model (its trace is replaced).
pub fn mrd_train(mut model: MrdModel, config: &TrainConfig) -> Result<MrdModel> {
    model.validate()?;
    let data: Vec<DMatrix<f64>> = model.views.iter().map(|v| v.data.clone()).collect();
    let refs: Vec<&DMatrix<f64>> = data.iter().collect();
    let outcome = fit_state(model.state(), &refs, config)?;
    model.absorb(outcome.state);
    model.training_trace = outcome.trace;
    Ok(model)
}

/// Fits the shared latent distribution, all per-view hyperparameters and all
/// inducing sets by maximizing the joint bound.
///
/// Training runs with the views sorted by name, so the result does not depend
/// on the order they are passed in; the returned model keeps the caller's order.
pub fn mrd_fit(views: &[ViewMatrix], q: usize, config: &TrainConfig) -> Result<MrdModel> {
    let mut order: Vec<usize> = (0..views.len()).collect();
    order.sort_by(|&a, &b| views[a].name.cmp(&views[b].name));
    let sorted: Vec<ViewMatrix> = order.iter().map(|&i| views[i].clone()).collect();
    let mut model = mrd_train(mrd_initialize(&sorted, q, config)?, config)?;
    let mut trained: Vec<Option<ViewModel>> = model.views.drain(..).map(Some).collect();
    let mut restored = vec![None; views.len()];
    for (pos, &original) in order.iter().enumerate() {
        restored[original] = trained[pos].take();
    }
    model.views = restored.into_iter().flatten().collect();
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionLabel {
    Shared,
    Private(String),
    Irrelevant,
}

impl std::fmt::Display for DimensionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DimensionLabel::Shared => write!(f, "SHARED"),
            DimensionLabel::Private(v) => write!(f, "PRIVATE({v})"),
            DimensionLabel::Irrelevant => write!(f, "IRRELEVANT"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRelevance {
    pub view: String,
    /// ARD weights divided by the view's largest weight (all zero for a
    /// switched-off kernel).
    pub relevance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub relevance: Vec<ViewRelevance>,
    pub labels: Vec<DimensionLabel>,
    pub threshold: f64,
}

impl FactorizationReport {
    pub fn shared_dims(&self) -> Vec<usize> {
        self.dims_where(|l| *l == DimensionLabel::Shared)
    }

    pub fn private_dims(&self, view: &str) -> Vec<usize> {
        self.dims_where(|l| matches!(l, DimensionLabel::Private(v) if v == view))
    }

    pub fn irrelevant_dims(&self) -> Vec<usize> {
        self.dims_where(|l| *l == DimensionLabel::Irrelevant)
    }

    /// Dimensions with relevance at or above the threshold for `view`.
    pub fn active_dims(&self, view: &str) -> Vec<usize> {
        self.relevance
            .iter()
            .find(|r| r.view == view)
            .map(|r| {
                r.relevance
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v >= self.threshold)
                    .map(|(k, _)| k)
                    .collect()
            })
            .unwrap_or_default()
    }

    fn dims_where(&self, pred: impl Fn(&DimensionLabel) -> bool) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| pred(l))
            .map(|(k, _)| k)
            .collect()
    }
}

/// Views whose kernel explains less than this fraction of their variance,
/// `σ² / (σ² + β⁻¹)`, carry no latent structure and get zero relevance.
pub const MIN_SIGNAL_FRACTION: f64 = 0.05;

/// Max-normalizes each weight vector (all zeros stay zero).
pub fn normalize_relevance(weights: &[f64]) -> Vec<f64> {
    let max = weights.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        weights.iter().map(|w| w / max).collect()
    } else {
        vec![0.0; weights.len()]
    }
}

/// Normalized relevance of one view's kernel: its max-normalized ARD weights,
/// or all zeros when the kernel is switched off (see [`MIN_SIGNAL_FRACTION`]).
pub fn view_relevance(kernel: &ArdKernelParams) -> Vec<f64> {
    let signal = kernel.signal_variance();
    let fraction = signal / (signal + 1.0 / kernel.beta());
    if fraction < MIN_SIGNAL_FRACTION {
        vec![0.0; kernel.q()]
    } else {
        normalize_relevance(&kernel.ard_weights())
    }
}

/// Labels each latent dimension from per-view relevance vectors: SHARED when at
/// least two views reach the threshold, PRIVATE when exactly one does,
/// IRRELEVANT otherwise.
pub fn label_dimensions(relevance: &[ViewRelevance], threshold: f64) -> Vec<DimensionLabel> {
    let q = relevance.first().map(|r| r.relevance.len()).unwrap_or(0);
    (0..q)
        .map(|k| {
            let above: Vec<&ViewRelevance> = relevance
                .iter()
                .filter(|r| r.relevance[k] >= threshold)
                .collect();
            match above.len() {
                0 => DimensionLabel::Irrelevant,
                1 => DimensionLabel::Private(above[0].view.clone()),
                _ => DimensionLabel::Shared,
            }
        })
        .collect()
}

pub fn factorize(model: &MrdModel, threshold: f64) -> Result<FactorizationReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MrdError::invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let relevance: Vec<ViewRelevance> = model
        .views
        .iter()
        .map(|v| ViewRelevance {
            view: v.name.clone(),
            relevance: view_relevance(&v.kernel),
        })
        .collect();
    let labels = label_dimensions(&relevance, threshold);
    Ok(FactorizationReport {
        relevance,
        labels,
        threshold,
    })
}

/// Gaussian predictive marginals, one row per query point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: DMatrix<f64>,
    pub variance: DMatrix<f64>,
}

impl PredictiveDistribution {
    pub fn std_dev(&self) -> DMatrix<f64> {
        self.variance.map(f64::sqrt)
    }
}

/// Precomputed sparse-GP posterior for one view:
/// `mean(x) = β k_xuᵀ A⁻¹ Ψ1ᵀY`, `var(x) = σ² − k_xuᵀ (K_uu⁻¹ − A⁻¹) k_xu + β⁻¹`,
/// with `A = K_uu + βΨ2`.
pub(crate) struct ViewPredictor<'a> {
    view: &'a ViewModel,
    weights: Vec<f64>,
    /// `β A⁻¹ Ψ1ᵀY`, `M×D`.
    mean_weights: DMatrix<f64>,
    /// `K_uu⁻¹ − A⁻¹`.
    var_correction: DMatrix<f64>,
}

impl<'a> ViewPredictor<'a> {
    pub fn new(model: &'a MrdModel, view: usize) -> Result<Self> {
        let v = &model.views[view];
        let params = &v.kernel;
        let m = v.inducing.nrows();
        let beta = params.beta();
        let weights = params.ard_weights();
        let psi = psi_statistics(&model.latent, &v.inducing, params)?;
        let kuu = rbf_cross(&v.inducing, &v.inducing, params.signal_variance(), &weights);
        let (chol_u, jitter) = jittered_cholesky(&kuu, params.jitter_scale())?;
        let lu_inv = chol_u
            .l()
            .solve_lower_triangular(&DMatrix::identity(m, m))
            .ok_or(MrdError::Factorization { jitter })?;
        let c = &lu_inv * &psi.psi2 * lu_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let chol_b = cholesky(DMatrix::identity(m, m) + c * beta)?;
        let binv = chol_b.inverse();
        let p = psi.psi1.transpose() * &v.data;
        let mean_weights = lu_inv.transpose() * &binv * (&lu_inv * p) * beta;
        let var_correction = lu_inv.transpose() * (DMatrix::identity(m, m) - binv) * &lu_inv;
        Ok(Self {
            view: v,
            weights,
            mean_weights,
            var_correction,
        })
    }

    pub fn predict(&self, x_star: &DMatrix<f64>) -> PredictiveDistribution {
        let params = &self.view.kernel;
        let kxu = rbf_cross(
            x_star,
            &self.view.inducing,
            params.signal_variance(),
            &self.weights,
        );
        let mut mean = &kxu * &self.mean_weights;
        for j in 0..mean.ncols() {
            for i in 0..mean.nrows() {
                mean[(i, j)] += self.view.mean[j];
            }
        }
        let noise = 1.0 / params.beta();
        let d = self.view.dim();
        let mut variance = DMatrix::zeros(x_star.nrows(), d);
        for i in 0..x_star.nrows() {
            let k = kxu.row(i);
            let reduction = (k * &self.var_correction * k.transpose())[(0, 0)];
            let v = (params.signal_variance() - reduction).max(0.0) + noise;
            variance.row_mut(i).fill(v);
        }
        PredictiveDistribution { mean, variance }
    }
}

/// Sparse-GP posterior predictive of the named view at latent points `x_star`
/// (in data units, observation noise included).
pub fn predict_view(
    model: &MrdModel,
    x_star: &DMatrix<f64>,
    view_name: &str,
) -> Result<PredictiveDistribution> {
    let idx = model.view_index(view_name)?;
    if x_star.ncols() != model.q() {
        return Err(MrdError::DimensionMismatch(format!(
            "query points have {} columns, latent has {}",
            x_star.ncols(),
            model.q()
        )));
    }
    crate::linalg::ensure_finite(x_star, "query points")?;
    Ok(ViewPredictor::new(model, idx)?.predict(x_star))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relevance(view: &str, r: &[f64]) -> ViewRelevance {
        ViewRelevance {
            view: view.into(),
            relevance: r.to_vec(),
        }
    }

    #[test]
    fn label_rule_example() {
        let labels = label_dimensions(
            &[relevance("Y", &[1.0, 0.02]), relevance("Z", &[1.0, 0.9])],
            0.1,
        );
        assert_eq!(
            labels,
            vec![DimensionLabel::Shared, DimensionLabel::Private("Z".into())]
        );
    }

    #[test]
    fn all_zero_relevance_is_irrelevant() {
        assert_eq!(normalize_relevance(&[0.0, 0.0]), vec![0.0, 0.0]);
        let labels = label_dimensions(
            &[relevance("Y", &[0.0, 0.0]), relevance("Z", &[0.0, 0.0])],
            0.1,
        );
        assert!(labels.iter().all(|l| *l == DimensionLabel::Irrelevant));
    }

    #[test]
    fn switched_off_kernel_has_zero_relevance() {
        let quiet = ArdKernelParams::new(1e-3, &[2.0, 0.5], 1.0).unwrap();
        assert_eq!(view_relevance(&quiet), vec![0.0, 0.0]);
        let loud = ArdKernelParams::new(1.0, &[2.0, 0.5], 100.0).unwrap();
        assert_eq!(view_relevance(&loud), vec![1.0, 0.25]);
    }

    #[test]
    fn normalized_max_is_one() {
        let r = normalize_relevance(&[0.5, 2.0, 0.1]);
        assert_eq!(r, vec![0.25, 1.0, 0.05]);
    }
}
