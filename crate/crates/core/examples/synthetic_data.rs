//! Seeded synthetic generators and CSV input/output.
//!
//! Run with `cargo run --example synthetic_data`.

use mrd::data::save_bundle;
use mrd::{gen_shared_private, gen_slam_scene, gen_trajectories, load_csv};

fn main() -> mrd::Result<()> {
    let dir = std::env::temp_dir().join("mrd-synthetic-example");
    for bundle in [
        gen_shared_private(60, 12, 12, 0.1, 7)?,
        gen_trajectories(50, 20, 0.05, 7)?,
        gen_slam_scene(40, 10, 0.05, 7)?,
    ] {
        let shapes: Vec<String> = bundle
            .views
            .iter()
            .map(|v| format!("{} {}x{}", v.name, v.nrows(), v.ncols()))
            .collect();
        println!("{:?}: {}", bundle.dimension_roles, shapes.join(", "));
    }

    let bundle = gen_shared_private(60, 12, 12, 0.1, 7)?;
    let files = save_bundle(&bundle, &dir, "demo")?;
    for f in &files {
        println!("wrote {f}");
    }
    let back = load_csv(dir.join("demo.Y.csv"))?;
    assert_eq!(back.values, bundle.views[0].values);
    println!("CSV round trip is exact");
    Ok(())
}
