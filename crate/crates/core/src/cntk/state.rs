//! Layer-by-layer recursion on the covariance and tangent kernel tensors.
//!
//! Tensors are stored as `mn x mn` matrices with pixel `(i, j)` at index
//! `i * n + j`. A state is either *pre-activation* (`sigma` is the covariance
//! of the convolution outputs and `k` their tangent kernel) or
//! *post-activation* (`sigma` is the covariance after the nonlinearity and
//! `k` holds `sigma_dot * k_pre`, the part of the tangent kernel coming from
//! earlier layers).

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::dual::{dual, dual_derivative, Activation};
use crate::error::{Error, Result};
use crate::priors::ImagePrior;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pre,
    Post,
}

/// Counts of numerical guards that fired during a build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CntkDiagnostics {
    /// Correlations outside `[-1, 1]` clamped before the dual activation.
    pub correlation_clamps: usize,
    /// Negative variances clamped to zero.
    pub variance_clamps: usize,
    /// Pixels whose first-layer variance is zero. Their kernel rows stay zero
    /// through every layer.
    pub zero_variance_pixels: usize,
}

impl CntkDiagnostics {
    fn merge(&mut self, other: CntkDiagnostics) {
        self.correlation_clamps += other.correlation_clamps;
        self.variance_clamps += other.variance_clamps;
        self.zero_variance_pixels += other.zero_variance_pixels;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CntkState {
    pub sigma: Array2<f64>,
    pub sigma_dot: Option<Array2<f64>>,
    pub k: Array2<f64>,
    pub dims: (usize, usize),
    pub phase: Phase,
    pub diagnostics: CntkDiagnostics,
}

impl CntkState {
    /// Entry `(i, j, i2, j2)` of a tensor stored in this state's layout.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.dims.1 + j
    }

    fn map_tensors(self, f: impl Fn(ArrayView2<f64>) -> Array2<f64>, dims: (usize, usize)) -> Self {
        CntkState {
            sigma: f(self.sigma.view()),
            sigma_dot: self.sigma_dot.as_ref().map(|s| f(s.view())),
            k: f(self.k.view()),
            dims,
            phase: self.phase,
            diagnostics: self.diagnostics,
        }
    }
}

fn wrap_table(len: usize, q: usize) -> Vec<Vec<usize>> {
    let h = (q / 2) as isize;
    (0..len)
        .map(|i| {
            (-h..=h)
                .map(|a| (i as isize + a).rem_euclid(len as isize) as usize)
                .collect()
        })
        .collect()
}

/// `W(T)(x, x') = sum_{a,b} T(x + (a,b), x' + (a,b))` over the centered
/// `q x q` window, circular indexing, `a` outer and `b` inner.
pub fn window_sum(t: ArrayView2<f64>, dims: (usize, usize), q: usize) -> Array2<f64> {
    let (m, n) = dims;
    let rows = wrap_table(m, q);
    let cols = wrap_table(n, q);
    let mn = m * n;
    let mut out = Array2::<f64>::zeros((mn, mn));
    out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(x, mut row)| {
        let (i, j) = (x / n, x % n);
        for (xp, o) in row.iter_mut().enumerate() {
            let (ip, jp) = (xp / n, xp % n);
            let mut acc = 0.0;
            for a in 0..q {
                let (r, rp) = (rows[i][a] * n, rows[ip][a] * n);
                for b in 0..q {
                    acc += t[(r + cols[j][b], rp + cols[jp][b])];
                }
            }
            *o = acc;
        }
    });
    out
}

/// First convolution applied to the prior: `sigma = k = W(G)` where `G` is
/// the channel Gram matrix of the prior. No `1/q^2` factor at this layer.
pub fn init_state(prior: &ImagePrior, q: usize) -> Result<CntkState> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::InvalidParameter(format!("filter size must be odd, got {q}")));
    }
    let dims = prior.dims();
    let (m, n) = dims;
    let sigma = match prior {
        ImagePrior::AnalyticStationary { rho, .. } => {
            let q2 = (q * q) as f64;
            let off = q2 * rho;
            Array2::from_shape_fn((m * n, m * n), |(a, b)| if a == b { q2 } else { off })
        }
        ImagePrior::Explicit { .. } => window_sum(prior.pixel_gram().view(), dims, q),
    };
    // Zero-variance pixels are the limit of vanishing input: every tensor
    // row at such a pixel stays zero. Only an all-zero prior is rejected.
    let zero = (0..m * n).filter(|&x| !(sigma[(x, x)] > 0.0)).count();
    if zero == m * n {
        return Err(Error::DegeneratePrior { i: 0, j: 0 });
    }
    Ok(CntkState {
        k: sigma.clone(),
        sigma,
        sigma_dot: None,
        dims,
        phase: Phase::Pre,
        diagnostics: CntkDiagnostics {
            zero_variance_pixels: zero,
            ..CntkDiagnostics::default()
        },
    })
}

pub(crate) fn activate_impl(state: CntkState, act: Activation, keep_dot: bool) -> Result<CntkState> {
    if state.phase != Phase::Pre {
        return Err(Error::InvalidParameter("activation applied to a post-activation state".into()));
    }
    let CntkState {
        mut sigma,
        mut k,
        dims,
        mut diagnostics,
        ..
    } = state;
    let mn = sigma.nrows();
    let mut variance_clamps = 0;
    let scale: Vec<f64> = sigma
        .diag()
        .iter()
        .map(|&d| {
            if d < 0.0 {
                variance_clamps += 1;
            }
            d.max(0.0).sqrt()
        })
        .collect();
    let mut dot = if keep_dot { Some(Array2::<f64>::zeros((mn, mn))) } else { None };

    let clamps: Result<usize> = {
        let per_row = sigma
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(k.axis_iter_mut(Axis(0)))
            .enumerate()
            .map(|(x, (mut srow, mut krow))| -> Result<(usize, Vec<f64>)> {
                let mut clamps = 0;
                let mut drow = Vec::with_capacity(if keep_dot { mn } else { 0 });
                for xp in 0..mn {
                    let norm = scale[x] * scale[xp];
                    let rho = if x == xp {
                        1.0
                    } else if norm > 0.0 {
                        srow[xp] / norm
                    } else {
                        0.0
                    };
                    let rho = if rho.abs() > 1.0 {
                        clamps += 1;
                        rho.clamp(-1.0, 1.0)
                    } else {
                        rho
                    };
                    let sd = dual_derivative(act, rho)?;
                    srow[xp] = norm * dual(act, rho)?;
                    krow[xp] *= sd;
                    if keep_dot {
                        drow.push(sd);
                    }
                }
                Ok((clamps, drow))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0;
        for (x, (c, drow)) in per_row.into_iter().enumerate() {
            total += c;
            if let Some(d) = dot.as_mut() {
                d.row_mut(x).assign(&ndarray::Array1::from(drow));
            }
        }
        Ok(total)
    };
    diagnostics.merge(CntkDiagnostics {
        correlation_clamps: clamps?,
        variance_clamps,
        ..CntkDiagnostics::default()
    });
    Ok(CntkState {
        sigma,
        sigma_dot: dot,
        k,
        dims,
        phase: Phase::Post,
        diagnostics,
    })
}

/// Applies the nonlinearity: `sigma <- sqrt(s s') dual(rho)`,
/// `sigma_dot <- dual'(rho)`, `k <- sigma_dot * k`.
pub fn activate(state: CntkState, act: Activation) -> Result<CntkState> {
    activate_impl(state, act, true)
}

/// Convolution after an activation: `sigma <- W(sigma) / q^2` and
/// `k <- W(sigma + k) / q^2`.
pub fn convolve(state: CntkState, q: usize) -> Result<CntkState> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::InvalidParameter(format!("filter size must be odd, got {q}")));
    }
    if state.phase != Phase::Post {
        return Err(Error::InvalidParameter("convolution must follow an activation".into()));
    }
    let q2 = (q * q) as f64;
    let mut sum = state.sigma.clone();
    sum += &state.k;
    let mut k = window_sum(sum.view(), state.dims, q);
    drop(sum);
    k.mapv_inplace(|v| v / q2);
    let mut sigma = window_sum(state.sigma.view(), state.dims, q);
    sigma.mapv_inplace(|v| v / q2);
    Ok(CntkState {
        sigma,
        sigma_dot: state.sigma_dot,
        k,
        dims: state.dims,
        phase: Phase::Pre,
        diagnostics: state.diagnostics,
    })
}

/// Activation followed by a `q x q` convolution.
pub fn conv_activation_update(state: CntkState, q: usize, act: Activation) -> Result<CntkState> {
    convolve(activate(state, act)?, q)
}

/// Keeps even coordinates: `T'(x, x') = T(2x, 2x')`.
pub fn downsample(state: CntkState) -> Result<CntkState> {
    let (m, n) = state.dims;
    if m % 2 != 0 || n % 2 != 0 {
        return Err(Error::Shape(format!("cannot downsample odd dims {m}x{n}")));
    }
    let (m2, n2) = (m / 2, n / 2);
    let src: Vec<usize> = (0..m2 * n2).map(|x| (2 * (x / n2)) * n + 2 * (x % n2)).collect();
    Ok(state.map_tensors(
        |t| Array2::from_shape_fn((m2 * n2, m2 * n2), |(a, b)| t[(src[a], src[b])]),
        (m2, n2),
    ))
}

/// `T'(x, x') = T(floor(x/2), floor(x'/2))`.
pub fn upsample_nearest(state: CntkState) -> Result<CntkState> {
    let (m, n) = state.dims;
    let (m2, n2) = (2 * m, 2 * n);
    let src: Vec<usize> = (0..m2 * n2).map(|x| (x / n2 / 2) * n + (x % n2) / 2).collect();
    Ok(state.map_tensors(
        |t| Array2::from_shape_fn((m2 * n2, m2 * n2), |(a, b)| t[(src[a], src[b])]),
        (m2, n2),
    ))
}

/// Align-corners bilinear interpolation from `d` to `2d` samples: output
/// `i` sits at input coordinate `i (d-1) / (2d-1)`. Each entry lists the two
/// source indices with their weights; the second index is clamped at the
/// border, where its weight is zero.
pub fn bilinear_weights(d: usize) -> Vec<[(usize, f64); 2]> {
    let den = 2 * d - 1;
    (0..2 * d)
        .map(|i| {
            let num = i * (d - 1);
            let r = num / den;
            let w1 = (num - r * den) as f64 / den as f64;
            [(r, 1.0 - w1), ((r + 1).min(d - 1), w1)]
        })
        .collect()
}

/// Quadratic form of the bilinear weights on every tensor.
pub fn upsample_bilinear(state: CntkState) -> Result<CntkState> {
    let (m, n) = state.dims;
    let (m2, n2) = (2 * m, 2 * n);
    let wr = bilinear_weights(m);
    let wc = bilinear_weights(n);
    // four (source, weight) taps per output pixel
    let taps: Vec<[(usize, f64); 4]> = (0..m2 * n2)
        .map(|x| {
            let (i, j) = (x / n2, x % n2);
            let mut t = [(0, 0.0); 4];
            for a in 0..2 {
                for b in 0..2 {
                    t[2 * a + b] = (wr[i][a].0 * n + wc[j][b].0, wr[i][a].1 * wc[j][b].1);
                }
            }
            t
        })
        .collect();
    let apply = |t: ArrayView2<f64>| {
        let mut out = Array2::<f64>::zeros((m2 * n2, m2 * n2));
        out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(x, mut row)| {
            for (xp, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for &(s, w) in &taps[x] {
                    for &(sp, wp) in &taps[xp] {
                        acc += w * wp * t[(s, sp)];
                    }
                }
                *o = acc;
            }
        });
        out
    };
    Ok(state.map_tensors(apply, (m2, n2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::analytic_uniform_prior;
    use ndarray::Array3;

    #[test]
    fn analytic_init_values() {
        let s = init_state(&analytic_uniform_prior(4, 4).unwrap(), 3).unwrap();
        assert_eq!(s.sigma[(5, 5)], 9.0);
        assert_eq!(s.sigma[(0, 5)], 27.0 / 4.0);
        assert_eq!(s.k, s.sigma);
    }

    #[test]
    fn constant_prior_init() {
        let p = ImagePrior::explicit(Array3::ones((1, 4, 4))).unwrap();
        let s = init_state(&p, 3).unwrap();
        assert!(s.sigma.iter().all(|&v| v == 9.0));
    }

    #[test]
    fn degenerate_prior_errors() {
        let p = crate::priors::identity_image_prior(8, 8).unwrap();
        let s = init_state(&p, 3).unwrap();
        // pixels more than one step off the diagonal see no diagonal entry
        assert_eq!(s.diagnostics.zero_variance_pixels, 64 - 5 * 8);
        let x = s.index(0, 4);
        assert!(s.k.row(x).iter().all(|&v| v == 0.0));
        let z = ImagePrior::explicit(Array3::zeros((1, 2, 2))).unwrap();
        assert!(matches!(init_state(&z, 1), Err(Error::DegeneratePrior { i: 0, j: 0 })));
    }

    #[test]
    fn phase_errors() {
        let s = init_state(&analytic_uniform_prior(2, 2).unwrap(), 1).unwrap();
        assert!(convolve(s.clone(), 3).is_err());
        let post = activate(s, Activation::Relu).unwrap();
        assert!(activate(post, Activation::Relu).is_err());
    }

    #[test]
    fn bilinear_weights_align_corners() {
        let w = bilinear_weights(4);
        assert_eq!(w.len(), 8);
        assert_eq!(w[0], [(0, 1.0), (1, 0.0)]);
        assert_eq!(w[7], [(3, 1.0), (3, 0.0)]);
        // output 1 sits at 3/7
        assert!((w[1][1].1 - 3.0 / 7.0).abs() < 1e-15);
        for t in &w {
            assert!((t[0].1 + t[1].1 - 1.0).abs() < 1e-15);
        }
        assert_eq!(bilinear_weights(1), vec![[(0, 1.0), (0, 0.0)]; 2]);
    }

    #[test]
    fn down_and_up_index_maps() {
        let mut s = init_state(&analytic_uniform_prior(4, 4).unwrap(), 3).unwrap();
        s.k = Array2::from_shape_fn((16, 16), |(a, b)| (a * 16 + b) as f64);
        s.sigma = s.k.clone();
        let d = downsample(s.clone()).unwrap();
        assert_eq!(d.dims, (2, 2));
        // (0,0,1,1) of the output is (0,0,2,2) of the input
        assert_eq!(d.k[(0, 3)], s.k[(0, 10)]);
        let u = upsample_nearest(d.clone()).unwrap();
        assert_eq!(u.dims, (4, 4));
        // (1,1,3,3) of the output is (0,0,1,1) of the input
        assert_eq!(u.k[(5, 15)], d.k[(0, 3)]);
        assert_eq!(downsample(u).unwrap().dims, (2, 2));
    }
}
