//! Evaluation metrics for completed matrices and images.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

fn same_shape(metric: &'static str, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "{metric}: prediction is {:?} but truth is {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.is_empty() {
        return Err(Error::Metric { metric, reason: "inputs are empty".into() });
    }
    Ok(())
}

fn cosine(metric: &'static str, a: impl Iterator<Item = (f64, f64)>, what: impl FnOnce() -> String) -> Result<f64> {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Metric { metric, reason: format!("{} has zero norm", what()) });
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Uncentered correlation of the vectorized matrices,
/// `<pred, truth> / (|pred| |truth|)`.
///
/// This is not the classical centered Pearson coefficient; subtract the means
/// first if that is what you need.
pub fn pearson_r_paper(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    same_shape("pearson_r", pred, truth)?;
    cosine("pearson_r", pred.iter().copied().zip(truth.iter().copied()), || "an input".into())
}

/// Mean over columns of `1 - SSE / SST`, where SST is taken around the truth
/// column mean.
pub fn mean_r2(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    same_shape("mean_r2", pred, truth)?;
    let mut total = 0.0;
    for (j, (p, t)) in pred.axis_iter(Axis(1)).zip(truth.axis_iter(Axis(1))).enumerate() {
        let mean = t.mean().expect("non-empty column");
        let sst: f64 = t.iter().map(|y| (y - mean).powi(2)).sum();
        if sst == 0.0 {
            return Err(Error::Metric { metric: "mean_r2", reason: format!("truth column {j} is constant") });
        }
        let sse: f64 = p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum();
        total += 1.0 - sse / sst;
    }
    Ok(total / pred.ncols() as f64)
}

/// Mean over columns of the cosine between predicted and true columns.
pub fn mean_cosine(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    same_shape("mean_cosine", pred, truth)?;
    let mut total = 0.0;
    for (j, (p, t)) in pred.axis_iter(Axis(1)).zip(truth.axis_iter(Axis(1))).enumerate() {
        total += cosine("mean_cosine", p.iter().copied().zip(t.iter().copied()), || format!("column {j}"))?;
    }
    Ok(total / pred.ncols() as f64)
}

/// Per-fold metric differences of two methods over `r` repetitions of
/// `k`-fold cross-validation, stored `k x r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldDifferences {
    d: Array2<f64>,
    n1: usize,
    n2: usize,
}

impl FoldDifferences {
    pub fn new(d: Array2<f64>, n1: usize, n2: usize) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::InvalidParameter(format!("need at least two fold differences, got {}", d.len())));
        }
        if n1 == 0 {
            return Err(Error::InvalidParameter("training size must be positive".into()));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("fold differences must be finite".into()));
        }
        Ok(Self { d, n1, n2 })
    }

    pub fn differences(&self) -> ArrayView2<'_, f64> {
        self.d.view()
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }
}

/// Corrected repeated k-fold statistic with its degrees of freedom `kr - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStatistic {
    pub t: f64,
    pub dof: usize,
}

fn t_parts(fd: &FoldDifferences) -> Result<(f64, f64, usize)> {
    let kr = fd.d.len();
    let mean = fd.d.iter().sum::<f64>() / kr as f64;
    let var = fd.d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kr - 1) as f64;
    let scale = 1.0 / kr as f64 + fd.n2 as f64 / fd.n1 as f64;
    let denom = scale * var;
    if !(denom > f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::Metric { metric: "corrected_t", reason: "fold differences have zero variance".into() });
    }
    Ok((mean, denom, kr - 1))
}

/// `t = mean(d) / ((1/kr + n2/n1) var(d))`, with the variance term left
/// without a square root. See [`corrected_t_sqrt`] for the usual form.
pub fn corrected_t(fd: &FoldDifferences) -> Result<TStatistic> {
    let (mean, denom, dof) = t_parts(fd)?;
    Ok(TStatistic { t: mean / denom, dof })
}

/// The Nadeau-Bengio corrected resampled t statistic,
/// `mean(d) / sqrt((1/kr + n2/n1) var(d))`.
pub fn corrected_t_sqrt(fd: &FoldDifferences) -> Result<TStatistic> {
    let (mean, denom, dof) = t_parts(fd)?;
    Ok(TStatistic { t: mean / denom.sqrt(), dof })
}

/// Peak signal-to-noise ratio in dB for signals in `[0, 1]`:
/// `10 log10(1 / MSE)`. Identical inputs give `f64::INFINITY`.
pub fn psnr(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    same_shape("psnr", pred, truth)?;
    let mse = pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64;
    if !mse.is_finite() {
        return Err(Error::Metric { metric: "psnr", reason: "inputs are not finite".into() });
    }
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> Vec<f64> {
    let h = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-0.5 * ((i as f64 - h) / SSIM_SIGMA).powi(2)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter, valid region only.
fn filter_valid(a: &Array2<f64>, w: &[f64]) -> Array2<f64> {
    let (m, n) = a.dim();
    let k = w.len();
    let (om, on) = (m + 1 - k, n + 1 - k);
    let rows = Array2::from_shape_fn((m, on), |(i, j)| (0..k).map(|t| w[t] * a[(i, j + t)]).sum::<f64>());
    Array2::from_shape_fn((om, on), |(i, j)| (0..k).map(|t| w[t] * rows[(i + t, j)]).sum::<f64>())
}

/// Structural similarity of two grayscale images in `[0, 1]`: Gaussian
/// window of size 11 and width 1.5, `K1 = 0.01`, `K2 = 0.03`, population
/// (co)variances, averaged over positions where the window fits.
pub fn ssim(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    same_shape("ssim", pred, truth)?;
    let (m, n) = pred.dim();
    if m < SSIM_WINDOW || n < SSIM_WINDOW {
        return Err(Error::Metric {
            metric: "ssim",
            reason: format!("{m}x{n} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        });
    }
    let w = gaussian_window();
    let x = pred.to_owned();
    let y = truth.to_owned();
    let ux = filter_valid(&x, &w);
    let uy = filter_valid(&y, &w);
    let uxx = filter_valid(&(&x * &x), &w);
    let uyy = filter_valid(&(&y * &y), &w);
    let uxy = filter_valid(&(&x * &y), &w);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for idx in 0..ux.len() {
        let (a, b) = (ux.as_slice().unwrap()[idx], uy.as_slice().unwrap()[idx]);
        let vx = uxx.as_slice().unwrap()[idx] - a * a;
        let vy = uyy.as_slice().unwrap()[idx] - b * b;
        let cxy = uxy.as_slice().unwrap()[idx] - a * b;
        total += ((2.0 * a * b + c1) * (2.0 * cxy + c2)) / ((a * a + b * b + c1) * (vx + vy + c2));
    }
    Ok(total / ux.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn trivial_values() {
        let t = array![[1.0, 2.0], [3.0, 5.0]];
        assert!((pearson_r_paper(t.view(), t.view()).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r_paper((-&t).view(), t.view()).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(mean_r2(t.view(), t.view()).unwrap(), 1.0);
        let means = array![[2.0, 3.5], [2.0, 3.5]];
        assert_eq!(mean_r2(means.view(), t.view()).unwrap(), 0.0);
        assert!((mean_cosine((-&t).view(), t.view()).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(psnr(t.view(), t.view()).unwrap(), f64::INFINITY);
        let z = Array2::zeros((3, 3));
        let o = Array2::ones((3, 3));
        assert_eq!(psnr(z.view(), o.view()).unwrap(), 0.0);
    }

    #[test]
    fn error_paths() {
        let t = array![[1.0, 2.0], [1.0, 5.0]];
        let err = mean_r2(t.view(), t.view()).unwrap_err();
        assert!(err.to_string().contains("column 0"));
        let z = Array2::zeros((2, 2));
        assert!(pearson_r_paper(z.view(), t.view()).is_err());
        assert!(matches!(psnr(t.view(), z.slice(ndarray::s![..1, ..])), Err(Error::Shape(_))));
        let small = Array2::zeros((10, 12));
        assert!(ssim(small.view(), small.view()).is_err());
        let same = FoldDifferences::new(Array2::from_elem((2, 3), 0.4), 90, 10).unwrap();
        assert!(corrected_t(&same).is_err());
    }

    #[test]
    fn t_by_hand() {
        // mean 2.5, sample variance 5/3, scale 1/4 + 1/4
        let fd = FoldDifferences::new(array![[1.0, 2.0], [3.0, 4.0]], 80, 20).unwrap();
        let t = corrected_t(&fd).unwrap();
        assert!((t.t - 2.5 / (0.5 * 5.0 / 3.0)).abs() < 1e-14);
        assert_eq!(t.dof, 3);
        let ts = corrected_t_sqrt(&fd).unwrap();
        assert!((ts.t - 2.5 / (0.5f64 * 5.0 / 3.0).sqrt()).abs() < 1e-14);
        let neg = FoldDifferences::new(array![[-1.0, -2.0], [-3.0, -4.0]], 80, 20).unwrap();
        assert_eq!(corrected_t(&neg).unwrap().t, -t.t);
    }

    #[test]
    fn ssim_identities() {
        let x = Array2::from_shape_fn((16, 16), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0);
        assert!((ssim(x.view(), x.view()).unwrap() - 1.0).abs() < 1e-12);
        let c = Array2::from_elem((12, 12), 0.3);
        assert!((ssim(c.view(), c.view()).unwrap() - 1.0).abs() < 1e-12);
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
