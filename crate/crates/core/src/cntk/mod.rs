//! Convolutional NTK for image completion.
//!
//! Each pixel `(i, j)` of an `m x n` image is a training example; the kernel
//! between two pixels is the tangent kernel of a circularly padded
//! convolutional network evaluated on a fixed prior image.

pub mod arch;
pub mod state;
pub mod stationary;

use ndarray::{Array2, ArrayView2};

pub use arch::{ArchSpec, Layer};
pub use state::{
    activate, bilinear_weights, conv_activation_update, convolve, downsample, init_state, upsample_bilinear,
    upsample_nearest, window_sum, CntkDiagnostics, CntkState, Phase,
};
pub use stationary::{build_stationary, StationaryKernel};

use crate::error::{Error, Result};
use crate::priors::ImagePrior;
use crate::solve::{apply_by_rows, KernelOperator};

/// Read access to a pixel-pair kernel `K(i, j, i2, j2)`.
pub trait PixelKernel: Sync {
    fn dims(&self) -> (usize, usize);

    /// Unchecked lookup; callers keep indices in range.
    fn value(&self, i: usize, j: usize, i2: usize, j2: usize) -> f64;

    fn checked_value(&self, i: usize, j: usize, i2: usize, j2: usize) -> Result<f64> {
        let (m, n) = self.dims();
        if i >= m || i2 >= m || j >= n || j2 >= n {
            return Err(Error::Index(format!("({i}, {j}, {i2}, {j2}) outside a {m}x{n} kernel")));
        }
        Ok(self.value(i, j, i2, j2))
    }
}

/// A fully materialized kernel as an `mn x mn` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CntkKernel {
    pub matrix: Array2<f64>,
    pub dims: (usize, usize),
    pub diagnostics: CntkDiagnostics,
}

impl CntkKernel {
    pub fn from_matrix(matrix: Array2<f64>, dims: (usize, usize)) -> Result<Self> {
        let mn = dims.0 * dims.1;
        if matrix.dim() != (mn, mn) {
            return Err(Error::Shape(format!(
                "a {}x{} kernel needs a {mn}x{mn} matrix, got {:?}",
                dims.0,
                dims.1,
                matrix.dim()
            )));
        }
        Ok(Self {
            matrix,
            dims,
            diagnostics: CntkDiagnostics::default(),
        })
    }

    pub fn get(&self, i: usize, j: usize, i2: usize, j2: usize) -> f64 {
        self.value(i, j, i2, j2)
    }
}

impl PixelKernel for CntkKernel {
    fn dims(&self) -> (usize, usize) {
        self.dims
    }

    fn value(&self, i: usize, j: usize, i2: usize, j2: usize) -> f64 {
        let n = self.dims.1;
        self.matrix[(i * n + j, i2 * n + j2)]
    }
}

/// Runs the layer recursion of `arch` on `prior` and returns the final
/// tangent kernel.
pub fn build_cntk(arch: &ArchSpec, prior: &ImagePrior) -> Result<CntkKernel> {
    if prior.dims() != arch.input() {
        return Err(Error::Arch {
            layer: 0,
            message: format!(
                "prior is {}x{} but the architecture input is {}x{}",
                prior.dims().0,
                prior.dims().1,
                arch.input().0,
                arch.input().1
            ),
        });
    }
    let mut state: Option<CntkState> = None;
    for (idx, layer) in arch.effective_layers().into_iter().enumerate() {
        let at = |e: Error| match e {
            Error::Shape(message) | Error::InvalidParameter(message) => Error::Arch { layer: idx, message },
            other => other,
        };
        state = Some(match (layer, state) {
            (Layer::Conv { q }, None) => init_state(prior, q)?,
            (Layer::Conv { q }, Some(s)) => convolve(s, q).map_err(at)?,
            (Layer::Act(a), Some(s)) => state::activate_impl(s, a, false).map_err(at)?,
            (Layer::Down, Some(s)) => downsample(s).map_err(at)?,
            (Layer::UpNearest, Some(s)) => upsample_nearest(s).map_err(at)?,
            (Layer::UpBilinear, Some(s)) => upsample_bilinear(s).map_err(at)?,
            (_, None) => unreachable!("validated architectures start with a convolution"),
        });
    }
    let s = state.expect("architecture has at least one layer");
    Ok(CntkKernel {
        matrix: s.k,
        dims: s.dims,
        diagnostics: s.diagnostics,
    })
}

/// The `m x n` slice `K(i, j, :, :)`.
pub fn kernel_row(kernel: &dyn PixelKernel, i: usize, j: usize) -> Result<Array2<f64>> {
    let (m, n) = kernel.dims();
    if i >= m || j >= n {
        return Err(Error::Index(format!("pixel ({i}, {j}) outside {m}x{n}")));
    }
    Ok(Array2::from_shape_fn((m, n), |(a, b)| kernel.value(i, j, a, b)))
}

/// Kernel values between two coordinate lists.
pub fn gram_between(kernel: &dyn PixelKernel, a: &[(usize, usize)], b: &[(usize, usize)]) -> Result<Array2<f64>> {
    let (m, n) = kernel.dims();
    if let Some(&(i, j)) = a.iter().chain(b).find(|&&(i, j)| i >= m || j >= n) {
        return Err(Error::Index(format!("pixel ({i}, {j}) outside {m}x{n}")));
    }
    let mut out = Array2::zeros((a.len(), b.len()));
    use rayon::prelude::*;
    out.axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .zip(a.par_iter())
        .for_each(|(mut row, &(i, j))| {
            for (o, &(i2, j2)) in row.iter_mut().zip(b) {
                *o = kernel.value(i, j, i2, j2);
            }
        });
    Ok(out)
}

/// Matrix-free view of the kernel restricted to a coordinate list.
pub struct PixelGram<'a> {
    kernel: &'a dyn PixelKernel,
    coords: Vec<(usize, usize)>,
}

impl<'a> PixelGram<'a> {
    pub fn new(kernel: &'a dyn PixelKernel, coords: Vec<(usize, usize)>) -> Result<Self> {
        let (m, n) = kernel.dims();
        if let Some(&(i, j)) = coords.iter().find(|&&(i, j)| i >= m || j >= n) {
            return Err(Error::Index(format!("pixel ({i}, {j}) outside {m}x{n}")));
        }
        Ok(Self { kernel, coords })
    }
}

impl KernelOperator for PixelGram<'_> {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let c = &self.coords;
        apply_by_rows(c.len(), x, |a, buf| {
            let (i, j) = c[a];
            for (o, &(i2, j2)) in buf.iter_mut().zip(c) {
                *o = self.kernel.value(i, j, i2, j2);
            }
        })
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| {
            let (i, j) = self.coords[rows[a]];
            let (i2, j2) = self.coords[cols[b]];
            self.kernel.value(i, j, i2, j2)
        })
    }
}
