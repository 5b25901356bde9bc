//! Mode transfer: map a trajectory of class S to its analogue in class T.
//!
//! Run with `cargo run --release --example mode_transfer`.

use mrd::linalg::pearson;
use mrd::{gen_trajectories, mode_transfer, mrd_fit, TrainConfig};

fn main() -> mrd::Result<()> {
    let bundle = gen_trajectories(55, 20, 0.05, 2)?;
    let train: Vec<usize> = (0..50).collect();
    let views: Vec<_> = bundle.views.iter().map(|v| v.select_rows(&train)).collect();
    let model = mrd_fit(&views, 3, &TrainConfig::with_seed(2))?;

    for t in 50..55 {
        let sample = bundle.views[0].select_rows(&[t]).values;
        let result = mode_transfer(&model, "S", "T", &sample, None)?;
        let truth: Vec<f64> = bundle.clean_views[1]
            .values
            .row(t)
            .iter()
            .copied()
            .collect();
        let est: Vec<f64> = result.best_target_sample.iter().copied().collect();
        println!(
            "pair {t}: {} neighbors, r = {:.3}",
            result.distribution.len(),
            pearson(&truth, &est)
        );
    }
    Ok(())
}
