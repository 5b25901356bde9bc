//! Procedures on a trained model: latent inference for novel observations,
//! tracking densities, δ-ball neighbor search in a latent subspace, cross-view
//! reconstruction and class-to-class mode transfer.

use nalgebra::{DMatrix, DVector};

use crate::error::{MrdError, Result};
use crate::gplvm::LatentDistribution;
use crate::kernels::{psi_backprop, psi_statistics, rbf_cross, PsiStatistics};
use crate::linalg::{chol_logdet, cholesky, jittered_cholesky, median};
use crate::multiview::{
    factorize, MrdModel, PredictiveDistribution, ViewPredictor, DEFAULT_THRESHOLD,
};
use crate::optimize::{maximize, TrainConfig};
use crate::rng::SeededRng;

/// Restarts per novel row: the nearest training point plus perturbations.
pub const RESTARTS: usize = 5;
/// Fixed seed for the restart perturbations, shared by every row.
pub const RESTART_SEED: u64 = 0x5eed;
/// How many times δ is doubled before giving up on an empty neighborhood.
pub const MAX_DELTA_DOUBLINGS: usize = 5;
const RESTART_SCALE: f64 = 0.5;
const INFERENCE_ITERATIONS: usize = 500;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct NovelLatentPosterior {
    pub means: DMatrix<f64>,
    pub variances: DMatrix<f64>,
    /// Final inference objective per novel row.
    pub objective: Vec<f64>,
}

/// The inference problem for a single novel row: the named view's bound on the
/// training data augmented by the row, minus the row's KL term, minus the
/// training-only bound. Everything except the row's `q(x*)` is frozen.
struct NovelObjective<'a> {
    model: &'a MrdModel,
    view: usize,
    psi: PsiStatistics,
    lu_inv: DMatrix<f64>,
    kinv: DMatrix<f64>,
    p_train: DMatrix<f64>,
    yy_train: f64,
    baseline: f64,
}

impl<'a> NovelObjective<'a> {
    fn new(model: &'a MrdModel, view: usize) -> Result<Self> {
        let v = &model.views[view];
        let params = &v.kernel;
        let m = v.inducing.nrows();
        let psi = psi_statistics(&model.latent, &v.inducing, params)?;
        let kuu = rbf_cross(
            &v.inducing,
            &v.inducing,
            params.signal_variance(),
            &params.ard_weights(),
        );
        let (chol_u, jitter) = jittered_cholesky(&kuu, params.jitter_scale())?;
        let lu_inv = chol_u
            .l()
            .solve_lower_triangular(&DMatrix::identity(m, m))
            .ok_or(MrdError::Factorization { jitter })?;
        let kinv = lu_inv.transpose() * &lu_inv;
        let p_train = psi.psi1.transpose() * &v.data;
        let yy_train = v.data.norm_squared();
        let mut obj = Self {
            model,
            view,
            psi,
            lu_inv,
            kinv,
            p_train,
            yy_train,
            baseline: 0.0,
        };
        let n = model.n() as f64;
        obj.baseline = obj
            .bound(n, obj.psi.psi0, &obj.p_train, &obj.psi.psi2, obj.yy_train)?
            .0;
        Ok(obj)
    }

    /// Collapsed bound from its sufficient statistics; also returns `A⁻¹`.
    fn bound(
        &self,
        n: f64,
        psi0: f64,
        p: &DMatrix<f64>,
        psi2: &DMatrix<f64>,
        yy: f64,
    ) -> Result<(f64, DMatrix<f64>)> {
        let params = &self.model.views[self.view].kernel;
        let beta = params.beta();
        let d = p.ncols() as f64;
        let m = p.nrows();
        let c = &self.lu_inv * psi2 * self.lu_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let chol_b = cholesky(DMatrix::identity(m, m) + &c * beta)?;
        let v = chol_b
            .l()
            .solve_lower_triangular(&(&self.lu_inv * p))
            .ok_or(MrdError::Factorization { jitter: 0.0 })?;
        let value = -0.5 * n * d * LN_2PI + 0.5 * n * d * beta.ln()
            - 0.5 * d * chol_logdet(&chol_b)
            - 0.5 * beta * yy
            + 0.5 * beta * beta * v.norm_squared()
            - 0.5 * beta * d * psi0
            + 0.5 * beta * d * c.trace();
        let ainv = self.lu_inv.transpose() * chol_b.inverse() * &self.lu_inv;
        Ok((value, (&ainv + ainv.transpose()) * 0.5))
    }

    /// Value and gradient with respect to `[means, ln variances]` of the row.
    fn evaluate(&self, x: &[f64], y_new: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
        let v = &self.model.views[self.view];
        let params = &v.kernel;
        let q = self.model.q();
        let beta = params.beta();
        let d = y_new.ncols() as f64;
        let means = DMatrix::from_row_slice(1, q, &x[..q]);
        let variances = DMatrix::from_iterator(1, q, x[q..].iter().map(|l| l.exp()));
        let row = LatentDistribution { means, variances };
        let psi_new = psi_statistics(&row, &v.inducing, params)?;

        let n = (self.model.n() + 1) as f64;
        let psi0 = self.psi.psi0 + psi_new.psi0;
        let psi2 = &self.psi.psi2 + &psi_new.psi2;
        let p = &self.p_train + psi_new.psi1.transpose() * y_new;
        let yy = self.yy_train + y_new.norm_squared();
        let (f_aug, ainv) = self.bound(n, psi0, &p, &psi2, yy)?;

        let kl: f64 = (0..q)
            .map(|k| {
                let (mu, s) = (row.means[(0, k)], row.variances[(0, k)]);
                0.5 * (mu * mu + s - s.ln() - 1.0)
            })
            .sum();
        let value = f_aug - kl - self.baseline;

        let ainv_p = &ainv * &p;
        let e = &ainv_p * ainv_p.transpose();
        let g_psi1 = y_new * ainv_p.transpose() * (beta * beta);
        let g_psi2 =
            &ainv * (-0.5 * beta * d) - &e * (0.5 * beta.powi(3)) + &self.kinv * (0.5 * beta * d);
        let g = psi_backprop(
            &row,
            &v.inducing,
            params,
            &psi_new,
            -0.5 * beta * d,
            &g_psi1,
            &g_psi2,
        );
        let mut grad = Vec::with_capacity(2 * q);
        for k in 0..q {
            grad.push(g.d_means[(0, k)] - row.means[(0, k)]);
        }
        for k in 0..q {
            let s = row.variances[(0, k)];
            grad.push(s * g.d_variances[(0, k)] - 0.5 * (s - 1.0));
        }
        Ok((value, grad))
    }
}

/// Starting points for one novel row: the latent mean of the training point
/// nearest in (centered) data space, plus perturbations of it scaled by the
/// per-dimension spread of the training means.
fn restart_points(model: &MrdModel, view: usize, y_new: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let data = &model.views[view].data;
    let nearest = (0..data.nrows())
        .map(|i| (i, (data.row(i) - y_new.row(0)).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let q = model.q();
    let means = &model.latent.means;
    let spread: Vec<f64> = (0..q)
        .map(|k| {
            let col = means.column(k);
            let mu = col.mean();
            (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
        })
        .collect();
    let base_mean: Vec<f64> = (0..q).map(|k| means[(nearest, k)]).collect();
    let base_logvar: Vec<f64> = (0..q)
        .map(|k| model.latent.variances[(nearest, k)].ln())
        .collect();
    let mut rng = SeededRng::new(RESTART_SEED);
    let mut starts = Vec::with_capacity(RESTARTS);
    for r in 0..RESTARTS {
        let mut x = base_mean.clone();
        if r > 0 {
            for (k, xk) in x.iter_mut().enumerate() {
                *xk += RESTART_SCALE * spread[k].max(1e-3) * rng.normal();
            }
        }
        x.extend_from_slice(&base_logvar);
        starts.push(x);
    }
    starts
}

fn inference_config() -> TrainConfig {
    TrainConfig {
        max_iterations: INFERENCE_ITERATIONS,
        warmup_iterations: 0,
        ..TrainConfig::default()
    }
}

/// Variational posterior `q(x*)` for each row of `y_star`, given in data
/// units (the view's stored training mean is subtracted here). The model is
/// not modified.
pub fn infer_latent(
    model: &MrdModel,
    view_name: &str,
    y_star: &DMatrix<f64>,
) -> Result<NovelLatentPosterior> {
    let view = model.view_index(view_name)?;
    crate::linalg::ensure_finite(y_star, "novel observations")?;
    let centered = model.views[view].center(y_star)?;
    let objective = NovelObjective::new(model, view)?;
    let config = inference_config();
    let (k, q) = (y_star.nrows(), model.q());
    let mut means = DMatrix::zeros(k, q);
    let mut variances = DMatrix::zeros(k, q);
    let mut values = Vec::with_capacity(k);
    for r in 0..k {
        let y_new = centered.rows(r, 1).into_owned();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for x0 in restart_points(model, view, &y_new) {
            let f = |x: &[f64]| objective.evaluate(x, &y_new);
            let result = match maximize(f, x0, None, &config, config.max_iterations, 0) {
                Ok(res) => res,
                Err(MrdError::NonFinite(_)) => continue,
                Err(e) => return Err(e),
            };
            if best.as_ref().map_or(true, |b| result.value > b.0) {
                best = Some((result.value, result.x));
            }
        }
        let (value, x) = best.ok_or(MrdError::NonFinite("novel-point objective"))?;
        for c in 0..q {
            means[(r, c)] = x[c];
            variances[(r, c)] = x[q + c].exp();
        }
        values.push(value);
    }
    Ok(NovelLatentPosterior {
        means,
        variances,
        objective: values,
    })
}

/// Posterior means of [`infer_latent`]; over a row sequence this is the
/// recovered latent trajectory.
pub fn most_likely_latent(
    model: &MrdModel,
    view_name: &str,
    y_star: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    Ok(infer_latent(model, view_name, y_star)?.means)
}

/// Per-step posteriors for an observation sequence (no temporal smoothing).
pub fn tracking_density(
    model: &MrdModel,
    view_name: &str,
    y_star_sequence: &DMatrix<f64>,
) -> Result<Vec<NovelLatentPosterior>> {
    model.view_index(view_name)?;
    (0..y_star_sequence.nrows())
        .map(|t| infer_latent(model, view_name, &y_star_sequence.rows(t, 1).into_owned()))
        .collect()
}

fn check_subspace(model: &MrdModel, subspace: &[usize]) -> Result<()> {
    if subspace.is_empty() {
        return Err(MrdError::invalid(
            "subspace must contain at least one dimension",
        ));
    }
    if let Some(&bad) = subspace.iter().find(|&&k| k >= model.q()) {
        return Err(MrdError::invalid(format!(
            "subspace dimension {bad} out of range for q = {}",
            model.q()
        )));
    }
    Ok(())
}

fn subspace_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Training indices whose latent means lie strictly within `delta` of each
/// row of `x_star`, distance measured over the `subspace` coordinates only.
/// Each list is sorted by distance, ties by index.
pub fn nearest_neighbors(
    model: &MrdModel,
    x_star: &DMatrix<f64>,
    delta: f64,
    subspace: &[usize],
) -> Result<Vec<Vec<usize>>> {
    check_subspace(model, subspace)?;
    if !(delta > 0.0) {
        return Err(MrdError::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if x_star.ncols() != model.q() {
        return Err(MrdError::DimensionMismatch(format!(
            "query points have {} columns, latent has {}",
            x_star.ncols(),
            model.q()
        )));
    }
    let means = &model.latent.means;
    let train: Vec<Vec<f64>> = (0..model.n())
        .map(|i| subspace.iter().map(|&k| means[(i, k)]).collect())
        .collect();
    Ok((0..x_star.nrows())
        .map(|r| {
            let query: Vec<f64> = subspace.iter().map(|&k| x_star[(r, k)]).collect();
            let mut hits: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, t)| (subspace_distance(&query, t), i))
                .filter(|(dist, _)| *dist < delta)
                .collect();
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            hits.into_iter().map(|(_, i)| i).collect()
        })
        .collect())
}

/// Half the median pairwise distance of the training latent means within
/// `subspace`.
pub fn default_delta(model: &MrdModel, subspace: &[usize]) -> Result<f64> {
    check_subspace(model, subspace)?;
    let means = &model.latent.means;
    let points: Vec<Vec<f64>> = (0..model.n())
        .map(|i| subspace.iter().map(|&k| means[(i, k)]).collect())
        .collect();
    let mut dists = Vec::with_capacity(points.len() * points.len() / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            dists.push(subspace_distance(&points[i], &points[j]));
        }
    }
    let delta = 0.5 * median(&dists);
    if delta > 0.0 {
        Ok(delta)
    } else {
        Err(MrdError::Degenerate(
            "training latent means coincide within the subspace".into(),
        ))
    }
}

/// Equal-weight Gaussian mixture over the neighbors' predictive
/// distributions for one novel row.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMixture {
    pub neighbors: Vec<usize>,
    /// One row per component.
    pub means: DMatrix<f64>,
    pub variances: DMatrix<f64>,
}

impl NeighborMixture {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.means.row_mean().transpose()
    }

    /// Per-dimension mixture variance (within plus between components).
    pub fn variance(&self) -> DVector<f64> {
        let mu = self.mean();
        let k = self.len() as f64;
        DVector::from_iterator(
            mu.len(),
            (0..mu.len()).map(|j| {
                (0..self.len())
                    .map(|c| self.variances[(c, j)] + (self.means[(c, j)] - mu[j]).powi(2))
                    .sum::<f64>()
                    / k
            }),
        )
    }

    /// Mixture log density of an observation.
    pub fn log_density(&self, y: &[f64]) -> f64 {
        let comps: Vec<f64> = (0..self.len())
            .map(|c| {
                (0..y.len())
                    .map(|j| {
                        let v = self.variances[(c, j)];
                        -0.5 * (LN_2PI + v.ln() + (y[j] - self.means[(c, j)]).powi(2) / v)
                    })
                    .sum()
            })
            .collect();
        let max = comps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + (comps.iter().map(|c| (c - max).exp()).sum::<f64>() / self.len() as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub x_star: NovelLatentPosterior,
    pub neighbor_indices: Vec<Vec<usize>>,
    /// Per novel row, the predictive distribution at its nearest neighbor
    /// (the mixture's point estimate).
    pub reconstruction: PredictiveDistribution,
    /// Per novel row, the full neighbor mixture.
    pub mixtures: Vec<NeighborMixture>,
    pub delta_used: f64,
}

/// Infers `q(x*)` from `y_star` in `from_view`, gathers training points within
/// `delta` in the subspace (doubling δ up to five times until every row has a
/// neighbor), and predicts `to_view` at the neighbors' full latent means.
pub fn cross_reconstruct(
    model: &MrdModel,
    from_view: &str,
    y_star: &DMatrix<f64>,
    to_view: &str,
    delta: f64,
    subspace: &[usize],
) -> Result<TransferResult> {
    model.view_index(from_view)?;
    let target = model.view_index(to_view)?;
    check_subspace(model, subspace)?;
    if !(delta > 0.0) {
        return Err(MrdError::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let x_star = infer_latent(model, from_view, y_star)?;

    let mut delta_used = delta;
    let mut doublings = 0;
    let neighbor_indices = loop {
        let nn = nearest_neighbors(model, &x_star.means, delta_used, subspace)?;
        if nn.iter().all(|list| !list.is_empty()) {
            break nn;
        }
        if doublings == MAX_DELTA_DOUBLINGS {
            return Err(MrdError::EmptyNeighborhood {
                delta_used,
                doublings,
            });
        }
        delta_used *= 2.0;
        doublings += 1;
    };

    let predictor = ViewPredictor::new(model, target)?;
    let q = model.q();
    let d = model.views[target].dim();
    let mut mixtures = Vec::with_capacity(neighbor_indices.len());
    let mut mean = DMatrix::zeros(neighbor_indices.len(), d);
    let mut variance = DMatrix::zeros(neighbor_indices.len(), d);
    for (r, neighbors) in neighbor_indices.iter().enumerate() {
        let mut points = DMatrix::zeros(neighbors.len(), q);
        for (row, &i) in neighbors.iter().enumerate() {
            points.set_row(row, &model.latent.means.row(i));
        }
        let pred = predictor.predict(&points);
        mean.set_row(r, &pred.mean.row(0));
        variance.set_row(r, &pred.variance.row(0));
        mixtures.push(NeighborMixture {
            neighbors: neighbors.clone(),
            means: pred.mean,
            variances: pred.variance,
        });
    }
    Ok(TransferResult {
        x_star,
        neighbor_indices,
        reconstruction: PredictiveDistribution { mean, variance },
        mixtures,
        delta_used,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransferResult {
    /// Predictive mean at the single nearest neighbor (`1×D_target`).
    pub best_target_sample: DMatrix<f64>,
    pub distribution: NeighborMixture,
    pub transfer: TransferResult,
}

/// Maps one source-class sample to the target class through the SHARED
/// dimensions (threshold 0.1). `delta` defaults to [`default_delta`] over
/// those dimensions.
pub fn mode_transfer(
    model: &MrdModel,
    source_view: &str,
    target_view: &str,
    sample: &DMatrix<f64>,
    delta: Option<f64>,
) -> Result<ModeTransferResult> {
    model.view_index(source_view)?;
    model.view_index(target_view)?;
    if sample.nrows() != 1 {
        return Err(MrdError::DimensionMismatch(format!(
            "mode transfer takes one sample, got {} rows",
            sample.nrows()
        )));
    }
    let shared = factorize(model, DEFAULT_THRESHOLD)?.shared_dims();
    if shared.is_empty() {
        return Err(MrdError::NoSharedDimensions);
    }
    let delta = match delta {
        Some(d) => d,
        None => default_delta(model, &shared)?,
    };
    let transfer = cross_reconstruct(model, source_view, sample, target_view, delta, &shared)?;
    Ok(ModeTransferResult {
        best_target_sample: transfer.reconstruction.mean.clone(),
        distribution: transfer.mixtures[0].clone(),
        transfer,
    })
}
