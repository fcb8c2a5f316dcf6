//! Builds convolutional NTKs for a few architectures, checks them against
//! the offset-table path where it applies, and reports the spectrum.
//!
//!     cargo run --release --example cntk_layers

use ntk_complete::cntk::{build_cntk, build_stationary, ArchSpec, PixelKernel};
use ntk_complete::dual::Activation;
use ntk_complete::linalg::symmetric_eigenvalues;
use ntk_complete::priors::{analytic_uniform_prior, meshgrid_prior};

const ARCH: &str = "
input 16x16
conv 3
act relu
down
conv 3
act relu
up nearest
conv 3
act relu
";

fn main() -> ntk_complete::Result<()> {
    let prior = analytic_uniform_prior(16, 16)?;
    for depth in 1..=3 {
        let arch = ArchSpec::plain((16, 16), depth, 3, Activation::Relu)?;
        let direct = build_cntk(&arch, &prior)?;
        let table = build_stationary(&arch, &prior)?;
        let worst = direct
            .matrix
            .iter()
            .zip(table.to_dense().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "plain depth {depth}: K(0,0,0,0) = {:.4}, K(0,0,0,1) = {:.4}, K(0,0,8,8) = {:.4}, offset-table gap {worst:.1e}",
            direct.value(0, 0, 0, 0),
            direct.value(0, 0, 0, 1),
            direct.value(0, 0, 8, 8)
        );
    }

    let arch = ArchSpec::parse(ARCH)?;
    for (name, p) in [("uniform", prior.clone()), ("meshgrid", meshgrid_prior(16, 16)?)] {
        let k = build_cntk(&arch, &p)?;
        let eig = symmetric_eigenvalues(k.matrix.view())?;
        println!(
            "encoder-decoder, {name} prior: eigenvalues in [{:.3e}, {:.3e}], clamps {:?}",
            eig[0],
            eig[eig.len() - 1],
            k.diagnostics
        );
    }
    Ok(())
}
