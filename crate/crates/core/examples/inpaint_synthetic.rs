//! Inpaints a 16x16 hole in a synthetic 64x64 image with kernels of
//! increasing sampling depth and compares against mean fill.
//!
//!     cargo run --release --example inpaint_synthetic [OUT_DIR]

use ndarray::{Array2, Array3};

use ntk_complete::cntk::ArchSpec;
use ntk_complete::dual::Activation;
use ntk_complete::expand::expand_arch;
use ntk_complete::metrics::{psnr, ssim};
use ntk_complete::pipeline::{inpaint, mean_fill, write_mask, write_png, MaskedImage};
use ntk_complete::priors::analytic_uniform_prior;
use ntk_complete::solve::{Ridge, SolveOptions};

fn scene(d: usize) -> Array3<f64> {
    Array3::from_shape_fn((1, d, d), |(_, i, j)| {
        let (x, y) = (i as f64 / d as f64, j as f64 / d as f64);
        let ramp = if x + 0.4 * y < 0.6 { 0.2 + 0.3 * y } else { 0.7 - 0.2 * x };
        let disc = if (x - 0.55).powi(2) + (y - 0.5).powi(2) < 0.03 { 0.25 } else { 0.0 };
        ramp + disc
    })
}

fn main() -> ntk_complete::Result<()> {
    let out_dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(std::env::temp_dir);
    let d = 64;
    let truth = scene(d);
    let mask = Array2::from_shape_fn((d, d), |(i, j)| !((24..40).contains(&i) && (24..40).contains(&j)));
    let img = MaskedImage::new(truth.clone(), mask.clone())?;
    write_png(out_dir.join("scene.png"), &truth)?;
    write_mask(out_dir.join("scene_mask.png"), &mask)?;

    let score = |p: &Array3<f64>| -> ntk_complete::Result<(f64, f64)> {
        let (a, b) = (p.index_axis(ndarray::Axis(0), 0), truth.index_axis(ndarray::Axis(0), 0));
        Ok((psnr(a, b)?, ssim(a, b)?))
    };
    let (p, s) = score(&mean_fill(&img)?)?;
    println!("mean fill: PSNR {p:.2} dB, SSIM {s:.4}");

    let opts = SolveOptions { ridge: Ridge::TraceScaled(4e-5), ..SolveOptions::default() };
    for s in [0, 2, 4] {
        let arch = ArchSpec::encoder_decoder((d, d), s, 3, Activation::Relu, false)?;
        let kernel = expand_arch(&arch, &analytic_uniform_prior(d, d)?, d)?;
        let out = inpaint(&img, &kernel, &opts)?;
        let (p, q) = score(&out.pixels)?;
        let path = out_dir.join(format!("scene_inpainted_s{s}.png"));
        write_png(&path, &out.pixels)?;
        println!("s = {s}: PSNR {p:.2} dB, SSIM {q:.4} -> {}", path.display());
    }
    Ok(())
}
