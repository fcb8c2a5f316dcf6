//! Feature priors: tabular column embeddings and image priors.

use ndarray::{concatenate, Array1, Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::csv_io;
use crate::error::{Error, Result};
use crate::fc::{augment_identity, normalize_prior, FeaturePrior};

/// Correlation between distinct pixels of an i.i.d. uniform prior in the
/// infinite-channel limit: `E[z]^2 / E[z^2] = (h/2)^2 / (h^2/3)`.
pub const UNIFORM_RHO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub enum ImagePrior {
    /// `c x m x n` channel tensor.
    Explicit { data: Array3<f64> },
    /// Infinitely many channels whose inner products are 1 on the same pixel
    /// and `rho` between distinct pixels.
    AnalyticStationary { rho: f64, m: usize, n: usize },
}

impl ImagePrior {
    pub fn explicit(data: Array3<f64>) -> Result<Self> {
        let (c, m, n) = data.dim();
        if c == 0 || m == 0 || n == 0 {
            return Err(Error::Shape(format!("explicit prior must be non-empty, got {c}x{m}x{n}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("prior has non-finite entries".into()));
        }
        Ok(ImagePrior::Explicit { data })
    }

    pub fn analytic(rho: f64, m: usize, n: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
        }
        if m == 0 || n == 0 {
            return Err(Error::Shape(format!("prior dims must be positive, got {m}x{n}")));
        }
        Ok(ImagePrior::AnalyticStationary { rho, m, n })
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            ImagePrior::Explicit { data } => (data.dim().1, data.dim().2),
            ImagePrior::AnalyticStationary { m, n, .. } => (*m, *n),
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match self {
            ImagePrior::AnalyticStationary { rho, .. } => Some(*rho),
            ImagePrior::Explicit { .. } => None,
        }
    }

    pub fn channels(&self) -> Option<usize> {
        match self {
            ImagePrior::Explicit { data } => Some(data.dim().0),
            ImagePrior::AnalyticStationary { .. } => None,
        }
    }

    /// Same analytic prior at another resolution.
    pub fn resized(&self, m: usize, n: usize) -> Result<Self> {
        match self {
            ImagePrior::AnalyticStationary { rho, .. } => Self::analytic(*rho, m, n),
            ImagePrior::Explicit { .. } => Err(Error::Unsupported("explicit priors have a fixed resolution".into())),
        }
    }

    /// Channel inner products between pixels, `mn x mn`, pixel `(i, j)` at
    /// index `i * n + j`.
    pub fn pixel_gram(&self) -> Array2<f64> {
        let (m, n) = self.dims();
        let mn = m * n;
        match self {
            ImagePrior::AnalyticStationary { rho, .. } => {
                Array2::from_shape_fn((mn, mn), |(a, b)| if a == b { 1.0 } else { *rho })
            }
            ImagePrior::Explicit { data } => {
                let c = data.dim().0;
                let flat = data
                    .view()
                    .into_shape_with_order((c, mn))
                    .expect("contiguous prior")
                    .t()
                    .as_standard_layout()
                    .to_owned();
                let mut g = Array2::<f64>::zeros((mn, mn));
                g.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(a, mut row)| {
                    let za = flat.row(a);
                    for (b, out) in row.iter_mut().enumerate() {
                        let zb = flat.row(b);
                        let mut acc = 0.0;
                        for p in 0..c {
                            acc += za[p] * zb[p];
                        }
                        *out = acc;
                    }
                });
                g
            }
        }
    }

    /// Whether the pixel Gram depends only on the circular offset, within
    /// `tol` relative to its largest entry.
    pub fn is_stationary(&self, tol: f64) -> bool {
        match self {
            ImagePrior::AnalyticStationary { .. } => true,
            ImagePrior::Explicit { .. } => {
                let (m, n) = self.dims();
                let g = self.pixel_gram();
                let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
                (0..m * n).all(|a| {
                    let (i, j) = (a / n, a % n);
                    (0..m * n).all(|b| {
                        let (di, dj) = ((b / n + m - i) % m, (b % n + n - j) % n);
                        (g[(a, b)] - g[(0, di * n + dj)]).abs() <= tol * scale
                    })
                })
            }
        }
    }
}

/// `n x n` identity as a column prior.
pub fn identity_prior(n: usize) -> Result<FeaturePrior> {
    if n == 0 {
        return Err(Error::InvalidParameter("identity prior needs n >= 1".into()));
    }
    normalize_prior(Array2::eye(n))
}

/// One-hot encoding of `labels` (values in `0..classes`), one column per
/// label. Completing with this prior reproduces group-mean imputation.
pub fn one_hot_prior(labels: &[usize], classes: usize) -> Result<FeaturePrior> {
    let mut raw = Array2::zeros((classes, labels.len()));
    for (j, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Index(format!("label {l} out of range for {classes} classes")));
        }
        raw[(l, j)] = 1.0;
    }
    normalize_prior(raw)
}

/// I.i.d. `U[0, high)` channels. Channel `p` draws from stream `p` of a
/// ChaCha8 generator seeded with `seed`, so any channel can be regenerated
/// on its own.
pub fn uniform_random_prior(c: usize, m: usize, n: usize, high: f64, seed: u64) -> Result<ImagePrior> {
    if !(high > 0.0 && high.is_finite()) {
        return Err(Error::InvalidParameter(format!("uniform prior bound must be positive, got {high}")));
    }
    let mut data = Array3::zeros((c, m, n));
    for (p, mut chan) in data.axis_iter_mut(Axis(0)).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        chan.iter_mut().for_each(|v| *v = rng.random::<f64>() * high);
    }
    ImagePrior::explicit(data)
}

/// Infinite-channel limit of [`uniform_random_prior`].
pub fn analytic_uniform_prior(m: usize, n: usize) -> Result<ImagePrior> {
    ImagePrior::analytic(UNIFORM_RHO, m, n)
}

/// Two channels holding the normalized row and column coordinate.
pub fn meshgrid_prior(m: usize, n: usize) -> Result<ImagePrior> {
    let coord = |k: usize, len: usize| if len > 1 { k as f64 / (len - 1) as f64 } else { 0.0 };
    let data = Array3::from_shape_fn((2, m, n), |(c, i, j)| if c == 0 { coord(i, m) } else { coord(j, n) });
    ImagePrior::explicit(data)
}

/// Single-channel identity matrix image (ones on the main diagonal).
pub fn identity_image_prior(m: usize, n: usize) -> Result<ImagePrior> {
    ImagePrior::explicit(Array3::from_shape_fn((1, m, n), |(_, i, j)| if i == j { 1.0 } else { 0.0 }))
}

/// One channel per pixel, each a delta at that pixel: distinct pixels are
/// orthogonal, the analytic prior with `rho = 0`.
pub fn one_hot_pixel_prior(m: usize, n: usize) -> Result<ImagePrior> {
    ImagePrior::analytic(0.0, m, n)
}

/// Keyed embedding vectors with an optional fallback for unknown keys.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    keys: Vec<String>,
    vectors: Array2<f64>,
    default: Option<Array1<f64>>,
}

impl EmbeddingTable {
    /// `vectors` holds one column per key.
    pub fn new(keys: Vec<String>, vectors: Array2<f64>, default: Option<Array1<f64>>) -> Result<Self> {
        if keys.len() != vectors.ncols() {
            return Err(Error::Shape(format!("{} keys but {} vectors", keys.len(), vectors.ncols())));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(k) = keys.iter().find(|k| !seen.insert(k.as_str())) {
            return Err(Error::InvalidParameter(format!("duplicate key `{k}`")));
        }
        if let Some(d) = &default {
            if d.len() != vectors.nrows() {
                return Err(Error::Shape(format!(
                    "default vector has length {}, table dimension is {}",
                    d.len(),
                    vectors.nrows()
                )));
            }
        }
        Ok(Self { keys, vectors, default })
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn get(&self, key: &str) -> Result<Array1<f64>> {
        match self.keys.iter().position(|k| k == key) {
            Some(j) => Ok(self.vectors.column(j).to_owned()),
            None => self.default.clone().ok_or_else(|| Error::MissingKey(key.to_string())),
        }
    }
}

/// Per `(drug, cell)` pair: the drug vector stacked on the cell vector, the
/// latter rescaled to the drug vector's norm times `cell_scale`; each column
/// is then unit-normalized.
pub fn reference_prior(
    drugs: &EmbeddingTable,
    cells: &EmbeddingTable,
    pairs: &[(String, String)],
    cell_scale: f64,
) -> Result<FeaturePrior> {
    if !(cell_scale >= 0.0 && cell_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("cell scale must be >= 0, got {cell_scale}")));
    }
    let (dd, dc) = (drugs.dim(), cells.dim());
    let mut raw = Array2::zeros((dd + dc, pairs.len()));
    for (col, (drug, cell)) in pairs.iter().enumerate() {
        let dv = drugs.get(drug)?;
        let cv = cells.get(cell)?;
        let dn = dv.dot(&dv).sqrt();
        let cn = cv.dot(&cv).sqrt();
        let factor = if cn > 0.0 { cell_scale * dn / cn } else { 0.0 };
        let stacked = concatenate![Axis(0), dv, cv.mapv(|v| v * factor)];
        raw.column_mut(col).assign(&stacked);
    }
    normalize_prior(raw)
}

/// Uses another method's imputed matrix (`p x n`, dense CSV) as the prior,
/// optionally stacking `augment * I` below it first.
pub fn method_output_prior(path: impl AsRef<std::path::Path>, augment: Option<f64>) -> Result<FeaturePrior> {
    let raw = csv_io::read_dense_file(path)?;
    if raw.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("method output prior has missing cells".into()));
    }
    match augment {
        Some(s) => normalize_prior(augment_identity(raw.view(), s)),
        None => normalize_prior(raw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_prior_is_reproducible() {
        let a = uniform_random_prior(3, 4, 5, 0.1, 42).unwrap();
        let b = uniform_random_prior(3, 4, 5, 0.1, 42).unwrap();
        assert_eq!(a, b);
        let c = uniform_random_prior(3, 4, 5, 0.1, 43).unwrap();
        assert_ne!(a, c);
        // first channels agree when more channels are requested
        let d = uniform_random_prior(5, 4, 5, 0.1, 42).unwrap();
        if let (ImagePrior::Explicit { data: x }, ImagePrior::Explicit { data: y }) = (&a, &d) {
            assert_eq!(x.index_axis(Axis(0), 2), y.index_axis(Axis(0), 2));
        }
    }

    #[test]
    fn uniform_prior_mean() {
        let ImagePrior::Explicit { data } = uniform_random_prior(200, 10, 10, 0.1, 1).unwrap() else {
            unreachable!()
        };
        let mean = data.mean().unwrap();
        // standard error of the mean: 0.1 / sqrt(12 * 20000)
        assert!((mean - 0.05).abs() < 4.0 * 0.1 / (12.0f64 * 20000.0).sqrt());
    }

    #[test]
    fn meshgrid_values() {
        let ImagePrior::Explicit { data } = meshgrid_prior(2, 2).unwrap() else { unreachable!() };
        assert_eq!(data.index_axis(Axis(0), 0), ndarray::array![[0.0, 0.0], [1.0, 1.0]]);
        assert_eq!(data.index_axis(Axis(0), 1), ndarray::array![[0.0, 1.0], [0.0, 1.0]]);
        let g = meshgrid_prior(4, 4).unwrap().pixel_gram();
        assert_ne!(g[(0, 5)], g[(5, 10)]);
        assert!(!meshgrid_prior(4, 4).unwrap().is_stationary(1e-10));
    }

    #[test]
    fn analytic_prior_validation() {
        assert_eq!(analytic_uniform_prior(3, 3).unwrap().rho(), Some(0.75));
        assert!(ImagePrior::analytic(1.0, 2, 2).is_err());
        let g = analytic_uniform_prior(2, 2).unwrap().pixel_gram();
        assert_eq!(g[(1, 1)], 1.0);
        assert_eq!(g[(0, 3)], 0.75);
    }

    #[test]
    fn constant_prior_is_stationary() {
        let p = ImagePrior::explicit(Array3::ones((2, 4, 4))).unwrap();
        assert!(p.is_stationary(1e-10));
    }

    #[test]
    fn reference_prior_properties() {
        let drugs = EmbeddingTable::new(
            vec!["a".into(), "b".into()],
            ndarray::array![[1.0, 0.0], [0.0, 2.0]],
            None,
        )
        .unwrap();
        let cells = EmbeddingTable::new(vec!["x".into()], ndarray::array![[3.0], [4.0], [0.0]], None).unwrap();
        let pairs = vec![("a".to_string(), "x".to_string()), ("a".to_string(), "x".to_string()), ("b".to_string(), "x".to_string())];
        let p = reference_prior(&drugs, &cells, &pairs, 1.25).unwrap();
        assert_eq!(p.data().column(0), p.data().column(1));
        for c in p.data().columns() {
            assert!((c.dot(&c) - 1.0).abs() < 1e-12);
        }
        let drug_only = reference_prior(&drugs, &cells, &pairs, 0.0).unwrap();
        assert_eq!(drug_only.data().column(2).to_vec(), vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let missing = vec![("a".to_string(), "y".to_string())];
        assert!(matches!(reference_prior(&drugs, &cells, &missing, 1.25), Err(Error::MissingKey(_))));
    }

    #[test]
    fn one_hot_columns() {
        let p = one_hot_prior(&[0, 1, 0], 2).unwrap();
        assert_eq!(p.data().column(2).to_vec(), vec![1.0, 0.0]);
        assert!(one_hot_prior(&[2], 2).is_err());
    }
}
