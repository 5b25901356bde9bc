//! Two views with one shared and one private signal each: the per-view ARD
//! weights factorize the latent space.
//!
//! Run with `cargo run --release --example mrd_factorization`.

use mrd::{factorize, gen_shared_private, mrd_fit, TrainConfig};

fn main() -> mrd::Result<()> {
    let bundle = gen_shared_private(60, 12, 12, 0.1, 0)?;
    let model = mrd_fit(&bundle.views, 4, &TrainConfig::with_seed(0))?;
    let report = factorize(&model, 0.1)?;

    for r in &report.relevance {
        let cells: Vec<String> = r.relevance.iter().map(|v| format!("{v:.3}")).collect();
        println!("relevance {}: [{}]", r.view, cells.join(", "));
    }
    for (k, label) in report.labels.iter().enumerate() {
        println!("x{k}: {label}");
    }
    println!("true roles: {:?}", bundle.dimension_roles);
    Ok(())
}
