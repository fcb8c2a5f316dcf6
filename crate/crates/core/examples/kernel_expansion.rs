//! Computes a kernel at 2^(s+1) pixels per side, expands it to 128x128,
//! writes it to an NTKC file and reads it back.
//!
//!     cargo run --release --example kernel_expansion [OUT_DIR]

use std::time::Instant;

use ntk_complete::cntk::{ArchSpec, PixelKernel};
use ntk_complete::dual::Activation;
use ntk_complete::expand::expand_arch;
use ntk_complete::kernel_file::{self, KernelFile};
use ntk_complete::priors::analytic_uniform_prior;

fn main() -> ntk_complete::Result<()> {
    let out_dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(std::env::temp_dir);
    let d2 = 128;
    for s in 0..=3 {
        let arch = ArchSpec::encoder_decoder((d2, d2), s, 3, Activation::Relu, false)?;
        let started = Instant::now();
        let compact = expand_arch(&arch, &analytic_uniform_prior(d2, d2)?, d2)?;
        let full = (d2 * d2) as f64 * (d2 * d2) as f64;
        println!(
            "s = {s}: {} stored values vs {full:.0} for the full kernel ({:.1} MB vs {:.1} GB), {:.2?}",
            compact.stored_len(),
            compact.stored_len() as f64 * 8e-6,
            full * 8e-9,
            started.elapsed()
        );
        println!("    K(0,0,0,0) = {:.4}, K(0,0,64,64) = {:.4}", compact.value(0, 0, 0, 0), compact.value(0, 0, 64, 64));
        if s == 3 {
            let path = out_dir.join("expanded_s3_128.ntkc");
            let file = KernelFile::Compact(compact);
            kernel_file::save(&path, &file)?;
            let back = kernel_file::load(&path)?;
            println!("wrote {} ({} bytes), reload identical: {}", path.display(), std::fs::metadata(&path)?.len(), back == file);
        }
    }
    Ok(())
}
