//! Bayesian GPLVM: the variational bound lets ARD weights switch off latent
//! dimensions the data does not need.
//!
//! Run with `cargo run --release --example bayesian_gplvm_ard`.

use mrd::{bgplvm_elbo, bgplvm_fit, gen_slam_scene, TrainConfig};

fn main() -> mrd::Result<()> {
    // One pose variable drives every observation column.
    let scene = gen_slam_scene(40, 10, 0.05, 0)?;
    let model = bgplvm_fit(&scene.views[0], 4, &TrainConfig::with_seed(0))?;

    let weights = model.kernel.ard_weights();
    let max = weights.iter().cloned().fold(0.0, f64::max);
    for (k, w) in weights.iter().enumerate() {
        println!("dimension {k}: weight {w:.3e}, relative {:.4}", w / max);
    }
    println!("bound = {:.4}", bgplvm_elbo(&model, &scene.views[0])?);
    println!("iterations = {}", model.training_trace.len());
    Ok(())
}
