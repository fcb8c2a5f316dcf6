//! Offset-table form of the CNTK for stationary priors and architectures
//! without sampling layers.
//!
//! With a stationary input every tensor in the recursion depends only on the
//! circular offset between the two pixels, and a convolution followed by the
//! `1/q^2` normalization leaves such tensors unchanged. The recursion then
//! runs independently per offset.

use ndarray::Array2;

use super::arch::{ArchSpec, Layer};
use super::PixelKernel;
use crate::dual::{dual, dual_derivative};
use crate::error::{Error, Result};
use crate::priors::ImagePrior;

/// Tolerance of the stationarity check on explicit priors, relative to the
/// largest Gram entry.
pub const STATIONARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryKernel {
    table: Array2<f64>,
}

impl StationaryKernel {
    /// Table over circular offsets `(di, dj)`, `0 <= di < m`, `0 <= dj < n`.
    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn at_offset(&self, di: usize, dj: usize) -> f64 {
        self.table[(di, dj)]
    }

    /// Full `mn x mn` kernel.
    pub fn to_dense(&self) -> Array2<f64> {
        let (m, n) = self.table.dim();
        Array2::from_shape_fn((m * n, m * n), |(a, b)| self.value(a / n, a % n, b / n, b % n))
    }
}

impl PixelKernel for StationaryKernel {
    fn dims(&self) -> (usize, usize) {
        self.table.dim()
    }

    fn value(&self, i: usize, j: usize, i2: usize, j2: usize) -> f64 {
        let (m, n) = self.table.dim();
        self.table[((i2 + m - i) % m, (j2 + n - j) % n)]
    }
}

/// Window sum of the prior Gram at pixel `(0, 0)` for every offset.
fn base_table(prior: &ImagePrior, q: usize) -> Result<Array2<f64>> {
    let (m, n) = prior.dims();
    match prior {
        ImagePrior::AnalyticStationary { rho, .. } => {
            let q2 = (q * q) as f64;
            Ok(Array2::from_shape_fn((m, n), |(di, dj)| if di == 0 && dj == 0 { q2 } else { q2 * rho }))
        }
        ImagePrior::Explicit { .. } => {
            if !prior.is_stationary(STATIONARITY_TOLERANCE) {
                return Err(Error::NonStationary(format!(
                    "pixel inner products vary with position beyond {STATIONARITY_TOLERANCE:e}"
                )));
            }
            let g = prior.pixel_gram();
            let h = (q / 2) as isize;
            let wrap = |v: isize, len: usize| v.rem_euclid(len as isize) as usize;
            Ok(Array2::from_shape_fn((m, n), |(di, dj)| {
                let mut acc = 0.0;
                for a in -h..=h {
                    for b in -h..=h {
                        let (r, c) = (wrap(a, m), wrap(b, n));
                        let (r2, c2) = (wrap(di as isize + a, m), wrap(dj as isize + b, n));
                        acc += g[(r * n + c, r2 * n + c2)];
                    }
                }
                acc
            }))
        }
    }
}

/// Builds the offset table by running the scalar recursion
/// `K_d = psi00 dual^(d)(psi/psi00) + K_{d-1} dual'(dual^(d-1)(psi/psi00))`
/// per offset, with `K_0 = psi`.
pub fn build_stationary(arch: &ArchSpec, prior: &ImagePrior) -> Result<StationaryKernel> {
    if arch.has_sampling() {
        return Err(Error::Unsupported(
            "the offset-table path needs an architecture without down/upsampling".into(),
        ));
    }
    if prior.dims() != arch.input() {
        return Err(Error::Shape(format!(
            "prior is {:?} but the architecture expects {:?}",
            prior.dims(),
            arch.input()
        )));
    }
    let layers = arch.effective_layers();
    let Some(&Layer::Conv { q }) = layers.first() else {
        unreachable!("validated architectures start with a convolution");
    };
    let psi = base_table(prior, q)?;
    let psi00 = psi[(0, 0)];
    if !(psi00 > 0.0) {
        return Err(Error::DegeneratePrior { i: 0, j: 0 });
    }
    let mut sigma = psi.clone();
    let mut k = psi;
    let mut var = psi00;
    for layer in &layers[1..] {
        match *layer {
            Layer::Act(act) => {
                for (s, kk) in sigma.iter_mut().zip(k.iter_mut()) {
                    let rho = (*s / var).clamp(-1.0, 1.0);
                    *kk *= dual_derivative(act, rho)?;
                    *s = var * dual(act, rho)?;
                }
                var = sigma[(0, 0)];
            }
            Layer::Conv { .. } => {
                k += &sigma;
            }
            Layer::Down | Layer::UpNearest | Layer::UpBilinear => unreachable!(),
        }
    }
    Ok(StationaryKernel { table: k })
}
