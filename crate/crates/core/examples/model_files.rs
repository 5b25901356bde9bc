//! Saving and loading trained models as versioned JSON.
//!
//! Run with `cargo run --release --example model_files`.

use mrd::cli::ModelFile;
use mrd::{gen_shared_private, mrd_fit, TrainConfig};

fn main() -> mrd::Result<()> {
    let bundle = gen_shared_private(40, 8, 8, 0.1, 4)?;
    let config = TrainConfig {
        max_iterations: 500,
        ..TrainConfig::with_seed(4)
    };
    let model = mrd_fit(&bundle.views, 3, &config)?;
    let columns: Vec<Vec<String>> = bundle.views.iter().map(|v| v.columns.clone()).collect();

    let path = std::env::temp_dir().join("mrd-model-example.json");
    ModelFile::from_mrd(&model, &columns, &config).save(&path)?;
    let restored = ModelFile::load(&path)?.to_mrd()?;
    println!("saved to {}", path.display());
    println!(
        "ELBO before {:.12}, after {:.12}",
        model.training_elbo()?,
        restored.training_elbo()?
    );
    Ok(())
}
