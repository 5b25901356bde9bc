//! Manifold relevance determination (MRD): a multi-view Bayesian Gaussian
//! process latent variable model whose per-view ARD kernels factorize one
//! shared latent space into shared and private subspaces.
//!
//! The crate covers the whole stack:
//!
//! - [`kernels`]: linear and ARD-RBF covariances, their gradients and the psi
//!   statistics of the RBF kernel under a Gaussian latent distribution.
//! - [`baselines`]: PCA and closed-form probabilistic PCA.
//! - [`gplvm`]: MAP GPLVM and the variational Bayesian GPLVM.
//! - [`multiview`]: the multi-view model, its joint bound and the factorization.
//! - [`transfer`]: latent inference for novel observations, neighbor search,
//!   cross-view reconstruction, tracking and mode transfer.
//! - [`data`]: seeded synthetic generators and CSV I/O.
//! - [`cli`]: the command-line front end behind the `mrd` binary.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod gplvm;
pub mod kernels;
pub mod linalg;
pub mod multiview;
pub mod optimize;
pub mod rng;
pub mod transfer;
mod variational;

pub use baselines::{pca, ppca_fit, ppca_log_likelihood, PcaResult, PpcaResult};
pub use data::{
    gen_shared_private, gen_slam_scene, gen_trajectories, load_csv, save_csv, GeneratorConfig,
    LatentRole, SyntheticBundle, ViewMatrix,
};
pub use error::{MrdError, Result};
pub use gplvm::{
    bgplvm_elbo, bgplvm_fit, gplvm_log_marginal, gplvm_map_fit, FitMode, GplvmModel, KernelChoice,
    LatentDistribution,
};
pub use kernels::{ard_rbf_kernel, linear_kernel, psi_statistics, ArdKernelParams, PsiStatistics};
pub use multiview::{
    factorize, mrd_elbo, mrd_fit, predict_view, DimensionLabel, FactorizationReport, MrdModel,
    PredictiveDistribution, ViewModel,
};
pub use optimize::TrainConfig;
pub use transfer::{
    cross_reconstruct, infer_latent, mode_transfer, most_likely_latent, nearest_neighbors,
    tracking_density, NovelLatentPosterior, TransferResult,
};
pub use variational::kl_to_standard_normal;
