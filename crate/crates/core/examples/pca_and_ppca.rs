//! Linear baselines: PCA and closed-form probabilistic PCA.
//!
//! Run with `cargo run --example pca_and_ppca`.

use mrd::rng::SeededRng;
use mrd::{pca, ppca_fit, ppca_log_likelihood};
use nalgebra::DMatrix;

fn main() -> mrd::Result<()> {
    let mut rng = SeededRng::new(1);
    let latent = DMatrix::from_fn(100, 2, |_, _| rng.normal());
    let loading = DMatrix::from_fn(2, 6, |_, _| rng.normal());
    let y = latent * loading + DMatrix::from_fn(100, 6, |_, _| 0.1 * rng.normal());

    let p = pca(&y, 2)?;
    println!("PCA eigenvalues: {:.4}", p.eigenvalues.transpose());
    println!("first scores:\n{:.3}", p.transform(&y).rows(0, 3));

    let model = ppca_fit(&y, 2)?;
    println!("PPCA noise variance 1/beta = {:.5}", 1.0 / model.beta);
    println!(
        "PPCA log likelihood = {:.3}",
        ppca_log_likelihood(&y, &model.w, model.beta, &model.mean)?
    );
    Ok(())
}
