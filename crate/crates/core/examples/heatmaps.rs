//! Writes kernel-row heatmaps at 64x64 for architectures with 0 to 3
//! down/up pairs, plus a percentile-thresholded view.
//!
//!     cargo run --release --example heatmaps [OUT_DIR]

use ndarray::Axis;

use ntk_complete::cntk::ArchSpec;
use ntk_complete::dual::Activation;
use ntk_complete::expand::expand_arch;
use ntk_complete::pipeline::{heatmap, write_png};
use ntk_complete::priors::analytic_uniform_prior;

fn main() -> ntk_complete::Result<()> {
    let out_dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(std::env::temp_dir);
    let d = 64;
    for s in 0..=3 {
        let arch = ArchSpec::encoder_decoder((d, d), s, 3, Activation::Relu, false)?;
        let kernel = expand_arch(&arch, &analytic_uniform_prior(d, d)?, d)?;
        for (pct, tag) in [(0.0, "full"), (90.0, "p90")] {
            let map = heatmap(&kernel, 20, 37, pct)?;
            let path = out_dir.join(format!("heatmap_s{s}_{tag}.png"));
            write_png(&path, &map.insert_axis(Axis(0)))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
