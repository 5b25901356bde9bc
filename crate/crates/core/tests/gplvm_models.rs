use mrd::gplvm::bgplvm_data_fit;
use mrd::linalg::max_principal_angle;
use mrd::rng::SeededRng;
use mrd::*;
use nalgebra::{DMatrix, DVector};

fn centered(y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = y.clone();
    for j in 0..c.ncols() {
        let m = c.column(j).mean();
        c.column_mut(j).add_scalar_mut(-m);
    }
    c
}

#[test]
fn linear_map_gplvm_recovers_pca_subspace_under_noise() {
    let mut rng = SeededRng::new(21);
    let a = DMatrix::from_fn(50, 2, |_, _| rng.normal());
    let w = DMatrix::from_fn(2, 6, |_, _| rng.normal());
    let y = a * w + DMatrix::from_fn(50, 6, |_, _| 0.01 * rng.normal());
    let model = gplvm_map_fit(
        &ViewMatrix::new("Y", y.clone()),
        2,
        KernelChoice::Linear,
        &TrainConfig::with_seed(21),
    )
    .unwrap();
    let scores = pca(&y, 2).unwrap().transform(&y);
    let angle = max_principal_angle(&model.latent.means, &scores);
    assert!(angle < 1e-3, "principal angle {angle}");
}

#[test]
fn map_ard_keeps_one_dimension_for_one_dimensional_data() {
    let mut hits = 0;
    for seed in 0..10 {
        let bundle = gen_slam_scene(40, 10, 0.05, seed).unwrap();
        let model = gplvm_map_fit(
            &bundle.views[0],
            3,
            KernelChoice::ArdRbf,
            &TrainConfig::with_seed(seed),
        )
        .unwrap();
        let w = model.kernel.ard_weights();
        let max = w.iter().cloned().fold(0.0, f64::max);
        if w.iter().filter(|x| **x > 0.1 * max).count() == 1 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits}/10 seeds");
}

/// ARD relevance is measured through `σ² w_k`, the prior variance of the
/// mapping's slope along dimension `k`: on pure noise the kernel switches
/// itself off through the signal variance, leaving the weights themselves
/// unidentified.
#[test]
fn bayesian_gplvm_prunes_every_dimension_of_pure_noise() {
    let q = 2;
    let mut hits = 0;
    for seed in 0..10 {
        let mut rng = SeededRng::new(seed);
        let y = DMatrix::from_fn(20, 3, |_, _| rng.normal());
        let yc = centered(&y);
        let init_var = yc.norm_squared() / yc.len() as f64;
        let init_slope = init_var / q as f64;
        let model = bgplvm_fit(&ViewMatrix::new("Y", y), q, &TrainConfig::with_seed(seed)).unwrap();
        let s2 = model.kernel.signal_variance();
        if model
            .kernel
            .ard_weights()
            .iter()
            .all(|w| s2 * w < 0.05 * init_slope)
        {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits}/10 seeds");
}

#[test]
fn bound_reaches_log_marginal_in_the_point_mass_limit() {
    let mut rng = SeededRng::new(4);
    let (n, q, d) = (12, 2, 3);
    let means = DMatrix::from_fn(n, q, |_, _| rng.normal());
    let y = centered(&DMatrix::from_fn(n, d, |_, _| rng.normal()));
    let kernel = ArdKernelParams::new(1.3, &[0.7, 1.4], 20.0).unwrap();
    let model = GplvmModel {
        latent: LatentDistribution::new(means.clone(), DMatrix::from_element(n, q, 1e-10)).unwrap(),
        kernel: kernel.clone(),
        kernel_choice: KernelChoice::ArdRbf,
        inducing: Some(means.clone()),
        mode: FitMode::Variational,
        training_trace: Vec::new(),
        data_mean: DVector::zeros(d),
    };
    let fit = bgplvm_data_fit(&model, &ViewMatrix::new("Y", y.clone())).unwrap();
    let exact = gplvm_log_marginal(&means, &y, KernelChoice::ArdRbf, &kernel).unwrap();
    assert!(
        ((fit - exact) / exact).abs() < 1e-3,
        "bound {fit}, log marginal {exact}"
    );
    let full = bgplvm_elbo(&model, &ViewMatrix::new("Y", y)).unwrap();
    assert!((full - (fit - kl_to_standard_normal(&model.latent))).abs() < 1e-9);
}

#[test]
fn bayesian_gplvm_training_is_monotone_and_deterministic() {
    let bundle = gen_slam_scene(20, 6, 0.05, 2).unwrap();
    let config = TrainConfig {
        max_iterations: 200,
        ..TrainConfig::with_seed(2)
    };
    let a = bgplvm_fit(&bundle.views[0], 2, &config).unwrap();
    let b = bgplvm_fit(&bundle.views[0], 2, &config).unwrap();
    assert_eq!(a.training_trace, b.training_trace);
    assert!(a.training_trace.windows(2).all(|p| p[1].1 >= p[0].1 - 1e-9));
    let elbo = bgplvm_elbo(&a, &bundle.views[0]).unwrap();
    assert!((elbo - a.training_trace.last().unwrap().1).abs() < 1e-8 * elbo.abs().max(1.0));
}
