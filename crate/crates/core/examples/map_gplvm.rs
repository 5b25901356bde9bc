//! MAP GPLVM: with a linear kernel it recovers the PCA subspace; with an ARD
//! kernel it learns a nonlinear embedding.
//!
//! Run with `cargo run --release --example map_gplvm`.

use mrd::linalg::max_principal_angle;
use mrd::rng::SeededRng;
use mrd::{gen_slam_scene, gplvm_map_fit, pca, KernelChoice, TrainConfig, ViewMatrix};
use nalgebra::DMatrix;

fn main() -> mrd::Result<()> {
    let mut rng = SeededRng::new(2);
    let y =
        DMatrix::from_fn(50, 2, |_, _| rng.normal()) * DMatrix::from_fn(2, 5, |_, _| rng.normal());
    let config = TrainConfig::with_seed(2);

    let linear = gplvm_map_fit(
        &ViewMatrix::new("Y", y.clone()),
        2,
        KernelChoice::Linear,
        &config,
    )?;
    let scores = pca(&y, 2)?.transform(&y);
    println!(
        "linear kernel: {} iterations, principal angle to PCA = {:.2e} rad",
        linear.training_trace.len(),
        max_principal_angle(&linear.latent.means, &scores)
    );

    let scene = gen_slam_scene(40, 10, 0.05, 2)?;
    let ard = gplvm_map_fit(&scene.views[0], 3, KernelChoice::ArdRbf, &config)?;
    println!(
        "ARD kernel on one-dimensional data: weights {:?}, final objective {:.3}",
        ard.kernel
            .ard_weights()
            .iter()
            .map(|w| format!("{w:.3}"))
            .collect::<Vec<_>>(),
        ard.training_trace.last().map(|t| t.1).unwrap_or(f64::NAN)
    );
    Ok(())
}
