//! Tracking density: a third agent's observation sweep, seen through one
//! trained view, is mapped to a per-step latent posterior.
//!
//! Run with `cargo run --release --example tracking`.

use mrd::linalg::pearson;
use mrd::{factorize, gen_slam_scene, mrd_fit, tracking_density, TrainConfig};

fn main() -> mrd::Result<()> {
    let scene = gen_slam_scene(40, 10, 0.05, 3)?;
    let model = mrd_fit(&scene.views, 3, &TrainConfig::with_seed(3))?;
    let sweep = scene.held_out.as_ref().expect("slam scenes carry a sweep");

    let steps = tracking_density(&model, &sweep.observed_as, &sweep.observations.values)?;
    let active = factorize(&model, 0.1)?.active_dims(&sweep.observed_as);
    let truth: Vec<f64> = sweep.latents.column(0).iter().copied().collect();
    for &k in &active {
        let path: Vec<f64> = steps.iter().map(|p| p.means[(0, k)]).collect();
        println!(
            "dimension {k}: |r| against the true pose = {:.3}",
            pearson(&path, &truth).abs()
        );
    }
    for (t, p) in steps.iter().enumerate().take(5) {
        let fmt = |m: &nalgebra::DMatrix<f64>| {
            m.row(0)
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!(
            "step {t}: mean [{}], variance [{}]",
            fmt(&p.means),
            fmt(&p.variances)
        );
    }
    Ok(())
}
