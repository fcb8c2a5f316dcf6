//! File-level workflows behind the `ntkc` binary: PNG and mask loading,
//! inpainting, heatmaps, kernel precompute/expand and tabular completion.

use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;

use crate::cntk::{build_cntk, build_stationary, kernel_row, ArchSpec, PixelGram, PixelKernel};
use crate::error::{Error, Result};
use crate::expand::{expand_kernel, CompactKernel, KernelMeta};
use crate::kernel_file::KernelFile;
use crate::priors::{self, ImagePrior, UNIFORM_RHO};
use crate::solve::{self, SolveMode, SolveOptions, SolveReport};

/// Image prior as given on the command line.
///
/// * `uniform` or `uniform:RHO`: analytic infinite-channel prior (default
///   `rho = 0.75`)
/// * `random:C` or `random:C:HIGH`: `C` channels of `U[0, HIGH]` noise
///   (default `HIGH = 0.1`), seeded
/// * `meshgrid`
/// * `identity`: single-channel identity-matrix image
/// * `onehot`: one channel per pixel, i.e. orthogonal pixels
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Uniform { rho: f64 },
    Random { channels: usize, high: f64 },
    Meshgrid,
    Identity,
    OneHot,
}

impl PriorSpec {
    pub fn build(&self, m: usize, n: usize, seed: u64) -> Result<ImagePrior> {
        match *self {
            PriorSpec::Uniform { rho } => ImagePrior::analytic(rho, m, n),
            PriorSpec::Random { channels, high } => priors::uniform_random_prior(channels, m, n, high, seed),
            PriorSpec::Meshgrid => priors::meshgrid_prior(m, n),
            PriorSpec::Identity => priors::identity_image_prior(m, n),
            PriorSpec::OneHot => priors::one_hot_pixel_prior(m, n),
        }
    }
}

impl std::str::FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown prior `{s}`"));
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or("");
        let args: Vec<&str> = parts.collect();
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let parsed = match (head, args.as_slice()) {
            ("uniform", []) => PriorSpec::Uniform { rho: UNIFORM_RHO },
            ("uniform", [r]) => PriorSpec::Uniform { rho: num(r)? },
            ("random", [c]) => PriorSpec::Random { channels: c.parse().map_err(|_| bad())?, high: 0.1 },
            ("random", [c, h]) => PriorSpec::Random { channels: c.parse().map_err(|_| bad())?, high: num(h)? },
            ("meshgrid", []) => PriorSpec::Meshgrid,
            ("identity", []) => PriorSpec::Identity,
            ("onehot", []) => PriorSpec::OneHot,
            _ => return Err(bad()),
        };
        Ok(parsed)
    }
}

/// Image with a boolean observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedImage {
    /// `channels x m x n`, values in `[0, 1]`.
    pub pixels: Array3<f64>,
    /// `true` where observed.
    pub mask: Array2<bool>,
}

impl MaskedImage {
    pub fn new(pixels: Array3<f64>, mask: Array2<bool>) -> Result<Self> {
        let (c, m, n) = pixels.dim();
        if c == 0 {
            return Err(Error::Shape("image has no channels".into()));
        }
        if mask.dim() != (m, n) {
            return Err(Error::Shape(format!("mask is {:?} but image is {m}x{n}", mask.dim())));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("pixel values must be finite".into()));
        }
        Ok(Self { pixels, mask })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn observed(&self) -> Vec<(usize, usize)> {
        self.coords(true)
    }

    pub fn missing(&self) -> Vec<(usize, usize)> {
        self.coords(false)
    }

    fn coords(&self, want: bool) -> Vec<(usize, usize)> {
        self.mask
            .indexed_iter()
            .filter(|&(_, &o)| o == want)
            .map(|(ij, _)| ij)
            .collect()
    }

    /// Loads an 8-bit gray or RGB PNG and a mask PNG (0 = missing).
    pub fn load(image: impl AsRef<Path>, mask: impl AsRef<Path>) -> Result<Self> {
        let pixels = read_png(image)?;
        let m = read_png(mask)?;
        let mask = m.index_axis(Axis(0), 0).mapv(|v| v != 0.0);
        Self::new(pixels, mask)
    }
}

/// Reads a PNG as `channels x m x n` in `[0, 1]`. Gray images give one
/// channel, everything else three (alpha dropped).
pub fn read_png(path: impl AsRef<Path>) -> Result<Array3<f64>> {
    let img = image::open(path)?;
    let gray = matches!(
        img.color(),
        image::ColorType::L8 | image::ColorType::La8 | image::ColorType::L16 | image::ColorType::La16
    );
    if gray {
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        Ok(Array3::from_shape_fn((1, h as usize, w as usize), |(_, i, j)| {
            g.get_pixel(j as u32, i as u32)[0] as f64 / 255.0
        }))
    } else {
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Ok(Array3::from_shape_fn((3, h as usize, w as usize), |(c, i, j)| {
            rgb.get_pixel(j as u32, i as u32)[c] as f64 / 255.0
        }))
    }
}

/// `[0, 1]` to 8 bits, rounding half up.
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes a one- or three-channel image.
pub fn write_png(path: impl AsRef<Path>, pixels: &Array3<f64>) -> Result<()> {
    let (c, m, n) = pixels.dim();
    let (w, h) = (n as u32, m as u32);
    match c {
        1 => image::GrayImage::from_fn(w, h, |x, y| image::Luma([to_u8(pixels[(0, y as usize, x as usize)])]))
            .save(path)?,
        3 => image::RgbImage::from_fn(w, h, |x, y| {
            image::Rgb(std::array::from_fn(|ch| to_u8(pixels[(ch, y as usize, x as usize)])))
        })
        .save(path)?,
        _ => return Err(Error::Shape(format!("cannot write a {c}-channel PNG"))),
    }
    Ok(())
}

/// Writes a mask PNG: 255 observed, 0 missing.
pub fn write_mask(path: impl AsRef<Path>, mask: &Array2<bool>) -> Result<()> {
    let (m, n) = mask.dim();
    image::GrayImage::from_fn(n as u32, m as u32, |x, y| {
        image::Luma([if mask[(y as usize, x as usize)] { 255 } else { 0 }])
    })
    .save(path)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct InpaintDiagnostics {
    pub observed: usize,
    pub missing: usize,
    pub report: Option<SolveReport>,
    /// Per missing pixel, in row-major order: sum of the regression weights
    /// placed on observed pixels.
    pub weight_sums: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Inpainted {
    pub pixels: Array3<f64>,
    pub diagnostics: InpaintDiagnostics,
}

/// Kernel regression per channel on the observed pixels; missing pixels are
/// predicted, observed ones copied through, and the result clipped to
/// `[0, 1]`.
///
/// Direct solves larger than `opts.direct_cap` switch to the iterative solver.
pub fn inpaint(img: &MaskedImage, kernel: &dyn PixelKernel, opts: &SolveOptions) -> Result<Inpainted> {
    opts.validate()?;
    if kernel.dims() != img.dims() {
        return Err(Error::Shape(format!(
            "kernel resolution {:?} does not match image {:?}",
            kernel.dims(),
            img.dims()
        )));
    }
    let observed = img.observed();
    let missing = img.missing();
    let mut out = img.pixels.clone();
    if missing.is_empty() {
        return Ok(Inpainted {
            pixels: out,
            diagnostics: InpaintDiagnostics { observed: observed.len(), missing: 0, report: None, weight_sums: vec![] },
        });
    }
    if observed.is_empty() {
        return Err(Error::InvalidParameter("mask has no observed pixels".into()));
    }
    let c = img.pixels.dim().0;
    // one right-hand side per channel plus a constant one for weight sums
    let mut rhs = Array2::<f64>::ones((observed.len(), c + 1));
    for (a, &(i, j)) in observed.iter().enumerate() {
        for ch in 0..c {
            rhs[(a, ch)] = img.pixels[(ch, i, j)];
        }
    }
    let mut o = opts.clone();
    if o.mode == SolveMode::Direct && observed.len() > o.direct_cap {
        o.mode = SolveMode::Iterative;
    }
    let op = PixelGram::new(kernel, observed.clone())?;
    let sol = solve::solve(&op, rhs.view(), &o)?;
    let alpha = &sol.coefficients;
    let scale = o.kernel_scale;
    let preds: Vec<Vec<f64>> = missing
        .par_iter()
        .map(|&(i, j)| {
            let mut acc = vec![0.0; c + 1];
            for (a, &(i2, j2)) in observed.iter().enumerate() {
                let k = kernel.value(i, j, i2, j2);
                for (r, v) in acc.iter_mut().enumerate() {
                    *v += k * alpha[(a, r)];
                }
            }
            acc.into_iter().map(|v| v * scale).collect()
        })
        .collect();
    let mut weight_sums = Vec::with_capacity(missing.len());
    for (&(i, j), p) in missing.iter().zip(&preds) {
        for ch in 0..c {
            out[(ch, i, j)] = p[ch].clamp(0.0, 1.0);
        }
        weight_sums.push(p[c]);
    }
    Ok(Inpainted {
        pixels: out,
        diagnostics: InpaintDiagnostics {
            observed: observed.len(),
            missing: missing.len(),
            report: Some(sol.report),
            weight_sums,
        },
    })
}

/// Fills missing pixels with the per-channel mean of the observed ones.
pub fn mean_fill(img: &MaskedImage) -> Result<Array3<f64>> {
    let observed = img.observed();
    if observed.is_empty() {
        return Err(Error::InvalidParameter("mask has no observed pixels".into()));
    }
    let mut out = img.pixels.clone();
    for ch in 0..out.dim().0 {
        let mean = observed.iter().map(|&(i, j)| img.pixels[(ch, i, j)]).sum::<f64>() / observed.len() as f64;
        for &(i, j) in &img.missing() {
            out[(ch, i, j)] = mean;
        }
    }
    Ok(out)
}

/// Kernel row `K(i, j, :, :)` scaled to `[0, 1]`, with the smallest
/// `ceil(percentile / 100 * mn)` values set to zero.
pub fn heatmap(kernel: &dyn PixelKernel, i: usize, j: usize, percentile: f64) -> Result<Array2<f64>> {
    if !(0.0..100.0).contains(&percentile) {
        return Err(Error::InvalidParameter(format!("percentile must lie in [0, 100), got {percentile}")));
    }
    let row = kernel_row(kernel, i, j)?;
    let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = row.mapv(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
    let cut = (percentile / 100.0 * out.len() as f64).ceil() as usize;
    if cut > 0 {
        let flat = out.as_slice_mut().expect("standard layout");
        let mut order: Vec<usize> = (0..flat.len()).collect();
        order.sort_by(|&a, &b| flat[a].total_cmp(&flat[b]));
        for &idx in &order[..cut.min(flat.len())] {
            flat[idx] = 0.0;
        }
    }
    Ok(out)
}

/// Full kernel of `arch` on `prior`. Stationary inputs without sampling take
/// the offset-table shortcut.
pub fn precompute(arch: &ArchSpec, prior: &ImagePrior) -> Result<KernelFile> {
    let meta = KernelMeta::new(arch, prior);
    let stationary = !arch.has_sampling()
        && match prior {
            ImagePrior::AnalyticStationary { .. } => true,
            ImagePrior::Explicit { .. } => prior.is_stationary(crate::cntk::stationary::STATIONARITY_TOLERANCE),
        };
    let kernel = if stationary {
        let st = build_stationary(arch, prior)?;
        crate::cntk::CntkKernel::from_matrix(st.to_dense(), arch.input())?
    } else {
        build_cntk(arch, prior)?
    };
    Ok(KernelFile::Full { kernel, meta })
}

/// Expands a full kernel computed at `2^(s+1)` to `2^p2`. `s` is read off
/// the base resolution.
pub fn expand_file(file: &KernelFile, p2: u32) -> Result<CompactKernel> {
    let KernelFile::Full { kernel, meta } = file else {
        return Err(Error::Unsupported("kernel is already expanded".into()));
    };
    if meta.rho.is_nan() {
        return Err(Error::Unsupported("kernel expansion needs an analytic stationary prior".into()));
    }
    let (m, n) = kernel.dims;
    if m != n || !m.is_power_of_two() || m < 2 {
        return Err(Error::Unsupported(format!("base kernel must be 2^(s+1) square, got {m}x{n}")));
    }
    let s = m.trailing_zeros() as usize - 1;
    let d2 = 1usize
        .checked_shl(p2)
        .ok_or_else(|| Error::InvalidParameter(format!("target exponent {p2} is too large")))?;
    expand_kernel(kernel, s, d2, meta.clone())
}

/// Coarse memory estimate for a kernel workload, in bytes.
pub fn estimate_bytes(kernel_values: usize, system: usize) -> usize {
    8 * (kernel_values + system * system)
}

/// One line for standard error: wall time and an estimated peak memory.
pub fn resource_line(task: &str, started: Instant, bytes: usize) -> String {
    format!(
        "[{task}] wall {:.2}s, peak memory ~{:.1} MiB",
        started.elapsed().as_secs_f64(),
        bytes as f64 / (1024.0 * 1024.0)
    )
}
