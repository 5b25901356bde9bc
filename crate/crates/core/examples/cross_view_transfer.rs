//! Reconstruct view Z from novel observations of view Y through the shared
//! latent dimensions.
//!
//! Run with `cargo run --release --example cross_view_transfer`.

use mrd::linalg::pearson;
use mrd::transfer::default_delta;
use mrd::{cross_reconstruct, factorize, gen_shared_private, mrd_fit, TrainConfig};

fn main() -> mrd::Result<()> {
    let bundle = gen_shared_private(70, 12, 12, 0.1, 1)?;
    let train: Vec<usize> = (0..60).collect();
    let test: Vec<usize> = (60..70).collect();
    let views: Vec<_> = bundle.views.iter().map(|v| v.select_rows(&train)).collect();
    let model = mrd_fit(&views, 4, &TrainConfig::with_seed(1))?;

    let shared = factorize(&model, 0.1)?.shared_dims();
    let delta = default_delta(&model, &shared)?;
    let y_star = bundle.views[0].select_rows(&test).values;
    let result = cross_reconstruct(&model, "Y", &y_star, "Z", delta, &shared)?;

    let columns = bundle.shared_driven_columns(1);
    let z_mean = &model.views[1].mean;
    for (r, &t) in test.iter().enumerate() {
        let truth: Vec<f64> = columns
            .iter()
            .map(|&j| bundle.clean_views[1].values[(t, j)] - z_mean[j])
            .collect();
        let est: Vec<f64> = columns
            .iter()
            .map(|&j| result.reconstruction.mean[(r, j)] - z_mean[j])
            .collect();
        println!(
            "row {t}: {} neighbors, r = {:.3}",
            result.neighbor_indices[r].len(),
            pearson(&truth, &est)
        );
    }
    println!(
        "shared dims {shared:?}, delta used {:.4}",
        result.delta_used
    );
    Ok(())
}
