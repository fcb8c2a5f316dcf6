//! Kernel expansion: the CNTK of a circularly padded network with `s`
//! stride-2 downsamplings and `s` nearest-neighbor upsamplings, on an analytic
//! stationary prior, is recovered at any power-of-two resolution from the
//! kernel at resolution `2^(s+1)`.
//!
//! Rows of the full kernel repeat with period `p = 2^s` up to a circular
//! shift, so only `p x p` rows are stored, each re-centered, padded with the
//! row minimum to `d2 x d2` and shifted back.

use ndarray::{Array2, Array4, ArrayView2};
use rayon::prelude::*;

use crate::cntk::{build_cntk, ArchSpec, CntkKernel, Layer, PixelKernel};
use crate::error::{Error, Result};
use crate::priors::ImagePrior;

/// Rotates rows down by `i` and columns right by `j`:
/// `out[(r + i) mod d1][(c + j) mod d2] = a[r][c]`.
pub fn rotate(a: ArrayView2<f64>, i: isize, j: isize) -> Array2<f64> {
    let (d1, d2) = a.dim();
    if d1 == 0 || d2 == 0 {
        return a.to_owned();
    }
    let si = i.rem_euclid(d1 as isize) as usize;
    let sj = j.rem_euclid(d2 as isize) as usize;
    Array2::from_shape_fn((d1, d2), |(r, c)| a[((r + d1 - si) % d1, (c + d2 - sj) % d2)])
}

/// Embeds `a` in the top-left corner of a `d2 x d2` matrix filled with the
/// minimum of `a`.
pub fn min_pad(a: ArrayView2<f64>, d2: usize) -> Result<Array2<f64>> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Shape(format!("minimum padding needs a square matrix, got {r}x{c}")));
    }
    if d2 < r {
        return Err(Error::Shape(format!("cannot pad {r}x{r} down to {d2}x{d2}")));
    }
    let fill = a.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = Array2::from_elem((d2, d2), fill);
    out.slice_mut(ndarray::s![..r, ..r]).assign(&a);
    Ok(out)
}

/// Provenance stored alongside serialized kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMeta {
    pub arch_hash: [u8; 32],
    /// Correlation of the analytic prior; NaN for explicit priors.
    pub rho: f64,
    /// Resolution at which the stored kernel was computed.
    pub base: (usize, usize),
}

impl KernelMeta {
    pub fn new(arch: &ArchSpec, prior: &ImagePrior) -> Self {
        Self {
            arch_hash: arch.hash(),
            rho: prior.rho().unwrap_or(f64::NAN),
            base: arch.input(),
        }
    }
}

/// `p x p` re-centered rows of size `d2 x d2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactKernel {
    rows: Array4<f64>,
    s: usize,
    d2: usize,
    pub meta: KernelMeta,
}

impl CompactKernel {
    pub(crate) fn from_parts(rows: Array4<f64>, s: usize, d2: usize, meta: KernelMeta) -> Result<Self> {
        let p = 1usize << s;
        if rows.dim() != (p, p, d2, d2) {
            return Err(Error::Format(format!(
                "compact kernel payload {:?} does not match p = {p}, d2 = {d2}",
                rows.dim()
            )));
        }
        Ok(Self { rows, s, d2, meta })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn period(&self) -> usize {
        1 << self.s
    }

    pub fn resolution(&self) -> usize {
        self.d2
    }

    pub fn rows(&self) -> &Array4<f64> {
        &self.rows
    }

    /// Number of stored values, `p^2 d2^2`.
    pub fn stored_len(&self) -> usize {
        self.rows.len()
    }

    /// `K(i, j, i2, j2)` at resolution `d2` without materializing the kernel.
    pub fn query(&self, i: usize, j: usize, i2: usize, j2: usize) -> Result<f64> {
        self.checked_value(i, j, i2, j2)
    }

    /// Full kernel between two coordinate lists.
    pub fn materialize_gram(&self, a: &[(usize, usize)], b: &[(usize, usize)]) -> Result<Array2<f64>> {
        crate::cntk::gram_between(self, a, b)
    }
}

impl PixelKernel for CompactKernel {
    fn dims(&self) -> (usize, usize) {
        (self.d2, self.d2)
    }

    fn value(&self, i: usize, j: usize, i2: usize, j2: usize) -> f64 {
        let p = self.period();
        let d = self.d2;
        let (ip, jp) = (i % p, j % p);
        let (si, sj) = (i - ip, j - jp);
        self.rows[(ip, jp, (i2 + d - si) % d, (j2 + d - sj) % d)]
    }
}

/// Assembles the compact store from a kernel computed at `2^(s+1)`.
pub fn expand_kernel(base: &CntkKernel, s: usize, d2: usize, meta: KernelMeta) -> Result<CompactKernel> {
    let p = 1usize << s;
    let b = 2 * p;
    if base.dims != (b, b) {
        return Err(Error::Shape(format!(
            "expansion with s = {s} needs a {b}x{b} base kernel, got {}x{}",
            base.dims.0, base.dims.1
        )));
    }
    if !d2.is_power_of_two() || d2 <= b {
        return Err(Error::InvalidParameter(format!(
            "target resolution must be a power of two above {b}, got {d2}"
        )));
    }
    let mut rows = Array4::<f64>::zeros((p, p, d2, d2));
    rows.outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .try_for_each(|(ip, mut block)| -> Result<()> {
            for jp in 0..p {
                let row = crate::cntk::kernel_row(base, ip, jp)?;
                let centered = rotate(row.view(), (p - ip) as isize, (p - jp) as isize);
                let padded = min_pad(centered.view(), d2)?;
                let back = rotate(padded.view(), ip as isize - p as isize, jp as isize - p as isize);
                block.index_axis_mut(ndarray::Axis(0), jp).assign(&back);
            }
            Ok(())
        })?;
    CompactKernel::from_parts(rows, s, d2, meta)
}

/// Checks the expansion hypotheses on `arch` and returns `s`.
pub fn expansion_depth(arch: &ArchSpec) -> Result<usize> {
    if arch.has_bilinear() {
        return Err(Error::Unsupported(
            "kernel expansion is only exact for nearest-neighbor upsampling".into(),
        ));
    }
    let s = arch.downsamples();
    if arch.upsamples() != s {
        return Err(Error::Unsupported(format!(
            "expansion needs matching sampling layers, got {s} down and {} up",
            arch.upsamples()
        )));
    }
    if arch.layers().iter().all(|l| !matches!(l, Layer::Conv { .. })) {
        return Err(Error::Unsupported("architecture has no convolution".into()));
    }
    Ok(s)
}

/// Builds the base kernel at `2^(s+1)` for `arch` and `prior` and expands it
/// to `d2 x d2`.
pub fn expand_arch(arch: &ArchSpec, prior: &ImagePrior, d2: usize) -> Result<CompactKernel> {
    let s = expansion_depth(arch)?;
    if !matches!(prior, ImagePrior::AnalyticStationary { .. }) {
        return Err(Error::Unsupported(
            "kernel expansion needs an analytic stationary prior".into(),
        ));
    }
    let b = 2usize << s;
    let base_arch = arch.with_input(b, b)?;
    let base_prior = prior.resized(b, b)?;
    let base = build_cntk(&base_arch, &base_prior)?;
    expand_kernel(&base, s, d2, KernelMeta::new(&base_arch, &base_prior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rotate_matches_worked_example() {
        // entries encode (row, col) as 10 * row + col, one-based
        let a = array![[11.0, 12.0, 13.0], [21.0, 22.0, 23.0], [31.0, 32.0, 33.0]];
        let r = rotate(a.view(), 1, 2);
        assert_eq!(r, array![[32.0, 33.0, 31.0], [12.0, 13.0, 11.0], [22.0, 23.0, 21.0]]);
        assert_eq!(rotate(a.view(), 0, 0), a);
        assert_eq!(rotate(r.view(), -1, -2), a);
    }

    #[test]
    fn min_pad_matches_worked_example() {
        let a = array![[0.1, 0.2], [0.3, 0.4]];
        let m = min_pad(a.view(), 4).unwrap();
        assert_eq!(
            m,
            array![
                [0.1, 0.2, 0.1, 0.1],
                [0.3, 0.4, 0.1, 0.1],
                [0.1, 0.1, 0.1, 0.1],
                [0.1, 0.1, 0.1, 0.1]
            ]
        );
        assert_eq!(min_pad(a.view(), 2).unwrap(), a);
        assert!(min_pad(a.view(), 1).is_err());
    }

    #[test]
    fn rejects_bilinear_and_explicit() {
        use crate::dual::Activation;
        let arch = ArchSpec::encoder_decoder((8, 8), 1, 3, Activation::Relu, true).unwrap();
        let prior = crate::priors::analytic_uniform_prior(8, 8).unwrap();
        assert!(matches!(expand_arch(&arch, &prior, 16), Err(Error::Unsupported(_))));
        let arch = ArchSpec::encoder_decoder((4, 4), 1, 3, Activation::Relu, false).unwrap();
        let mesh = crate::priors::meshgrid_prior(4, 4).unwrap();
        assert!(matches!(expand_arch(&arch, &mesh, 16), Err(Error::Unsupported(_))));
        assert!(expand_arch(&arch, &prior, 12).is_err());
    }
}
