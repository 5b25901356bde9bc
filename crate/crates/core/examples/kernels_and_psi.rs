//! Covariance functions and the psi statistics of the ARD kernel.
//!
//! Run with `cargo run --example kernels_and_psi`.

use mrd::rng::SeededRng;
use mrd::{ard_rbf_kernel, linear_kernel, psi_statistics, ArdKernelParams, LatentDistribution};
use nalgebra::DMatrix;

fn main() -> mrd::Result<()> {
    let mut rng = SeededRng::new(0);
    let x = DMatrix::from_fn(4, 2, |_, _| rng.normal());

    let lin = linear_kernel(&x, &x, 2.0, true)?;
    println!("linear kernel (beta = 2):\n{:.3}", lin.values);

    // The second latent dimension is switched off by its zero ARD weight.
    let params = ArdKernelParams::new(1.5, &[1.0, 0.0], 100.0)?;
    let rbf = ard_rbf_kernel(&x, &x, &params, false)?;
    println!("ARD RBF kernel:\n{:.3}", rbf.values);

    let latent = LatentDistribution::new(x.clone(), DMatrix::from_element(4, 2, 0.2))?;
    let inducing = x.rows(0, 2).into_owned();
    let psi = psi_statistics(&latent, &inducing, &params)?;
    println!("psi0 = {:.4} (N * signal variance)", psi.psi0);
    println!("psi1 =\n{:.4}", psi.psi1);
    println!("psi2 =\n{:.4}", psi.psi2);
    Ok(())
}
