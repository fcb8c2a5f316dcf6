//! Kernel regression solvers.
//!
//! Every solver works on the system `(s K + lambda I) alpha = y`, where `s` is
//! the multiplicative kernel scale and `lambda` the (possibly trace-scaled)
//! ridge. Predictions use the same scale on the cross kernel, so ridgeless
//! predictions do not depend on `s`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, FactorKind, Factorization};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Ridge {
    #[default]
    None,
    Absolute(f64),
    /// `lambda = c * tr(K) / n`.
    TraceScaled(f64),
}

impl Ridge {
    pub fn lambda(&self, trace: f64, n: usize) -> f64 {
        match *self {
            Ridge::None => 0.0,
            Ridge::Absolute(l) => l,
            Ridge::TraceScaled(c) if n > 0 => c * trace / n as f64,
            Ridge::TraceScaled(_) => 0.0,
        }
    }
}

impl std::fmt::Display for Ridge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ridge::None => write!(f, "none"),
            Ridge::Absolute(l) => write!(f, "abs:{l}"),
            Ridge::TraceScaled(c) => write!(f, "trace:{c}"),
        }
    }
}

impl std::str::FromStr for Ridge {
    type Err = Error;

    /// Accepts `none`, `trace:C`, `abs:L` or a bare number (absolute).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("bad ridge `{s}`"));
        let ridge = if s.eq_ignore_ascii_case("none") {
            Ridge::None
        } else if let Some(v) = s.strip_prefix("trace:") {
            Ridge::TraceScaled(v.parse().map_err(|_| bad())?)
        } else if let Some(v) = s.strip_prefix("abs:") {
            Ridge::Absolute(v.parse().map_err(|_| bad())?)
        } else {
            Ridge::Absolute(s.parse().map_err(|_| bad())?)
        };
        match ridge {
            Ridge::Absolute(v) | Ridge::TraceScaled(v) if !(v >= 0.0 && v.is_finite()) => {
                Err(Error::InvalidParameter(format!("ridge must be finite and >= 0, got {v}")))
            }
            Ridge::Absolute(v) if v == 0.0 => Ok(Ridge::None),
            r => Ok(r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub mode: SolveMode,
    pub ridge: Ridge,
    pub kernel_scale: f64,
    pub epochs: usize,
    pub preconditioner_rank: usize,
    pub subsample: usize,
    pub seed: u64,
    /// Largest system the direct solver accepts.
    pub direct_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::Direct,
            ridge: Ridge::None,
            kernel_scale: 1.0,
            epochs: 100,
            preconditioner_rank: 160,
            subsample: 4000,
            seed: 0,
            direct_cap: 30_000,
        }
    }
}

impl SolveOptions {
    pub fn iterative() -> Self {
        Self {
            mode: SolveMode::Iterative,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kernel_scale > 0.0 && self.kernel_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel scale must be positive, got {}",
                self.kernel_scale
            )));
        }
        if let Ridge::TraceScaled(c) | Ridge::Absolute(c) = self.ridge {
            if !(c >= 0.0) {
                return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: &'static str,
    pub lambda: f64,
    pub epochs_run: usize,
    /// Largest relative residual over right-hand sides at the end of each
    /// epoch (iterative) or after back-substitution (direct).
    pub residuals: Vec<f64>,
    pub preconditioner_rank: usize,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

impl std::fmt::Display for SolveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "method={} lambda={:.3e} epochs={} residual={:.3e} precond_rank={}",
            self.method,
            self.lambda,
            self.epochs_run,
            self.final_residual(),
            self.preconditioner_rank
        )
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub coefficients: Array2<f64>,
    pub report: SolveReport,
}

/// Matrix-vector access to a symmetric kernel matrix without requiring it to
/// be stored densely.
pub trait KernelOperator: Sync {
    fn dim(&self) -> usize;

    /// `K x` for an `n x r` block of vectors.
    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64>;

    /// Dense sub-block `K[rows, cols]`.
    fn block(&self, rows: &[usize], cols: &[usize]) -> Array2<f64>;

    fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.block(&[i], &[i])[(0, 0)]).sum()
    }
}

impl KernelOperator for Array2<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        linalg::matmul(self.view(), x)
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| self[(rows[a], cols[b])])
    }

    fn trace(&self) -> f64 {
        self.diag().sum()
    }
}

fn check_rhs(n: usize, rhs: &ArrayView2<f64>) -> Result<()> {
    if rhs.nrows() != n {
        return Err(Error::Shape(format!(
            "right-hand side has {} rows, kernel has {n}",
            rhs.nrows()
        )));
    }
    Ok(())
}

fn relative_residuals(
    op: &dyn KernelOperator,
    scale: f64,
    lambda: f64,
    x: ArrayView2<f64>,
    rhs: ArrayView2<f64>,
) -> f64 {
    let mut r = op.apply(x);
    r.mapv_inplace(|v| v * scale);
    r.scaled_add(lambda, &x);
    r -= &rhs;
    r.axis_iter(Axis(1))
        .zip(rhs.axis_iter(Axis(1)))
        .map(|(rc, bc)| {
            let bn = bc.dot(&bc).sqrt();
            let rn = rc.dot(&rc).sqrt();
            if bn > 0.0 {
                rn / bn
            } else {
                rn
            }
        })
        .fold(0.0, f64::max)
}

/// Solves `(s K + lambda I) alpha = rhs` by Cholesky, falling back to LU.
pub fn direct_solve(k: ArrayView2<f64>, rhs: ArrayView2<f64>, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::Shape(format!("kernel must be square, got {}x{}", n, k.ncols())));
    }
    check_rhs(n, &rhs)?;
    if n > opts.direct_cap {
        return Err(Error::InvalidParameter(format!(
            "{n} equations exceed the direct-solve cap of {}; use the iterative solver",
            opts.direct_cap
        )));
    }
    let scale = opts.kernel_scale;
    let trace = scale * k.diag().sum();
    let lambda = opts.ridge.lambda(trace, n);
    let mut a = k.to_owned();
    a.mapv_inplace(|v| v * scale);
    a.diag_mut().mapv_inplace(|v| v + lambda);
    let factor = Factorization::new(a.view())?;
    let coefficients = factor.solve(rhs)?;
    let resid = relative_residuals(&k.to_owned(), scale, lambda, coefficients.view(), rhs);
    Ok(Solution {
        coefficients,
        report: SolveReport {
            method: match factor.kind() {
                FactorKind::Cholesky => "cholesky",
                FactorKind::Lu => "lu",
            },
            lambda,
            epochs_run: 0,
            residuals: vec![resid],
            preconditioner_rank: 0,
        },
    })
}

/// Spectral deflation `P = I - V diag(f) V^T` that flattens the leading
/// eigenvalues of the system matrix down to the first one kept.
#[derive(Debug, Clone)]
pub struct Deflation {
    vectors: Array2<f64>,
    factors: Array1<f64>,
}

impl Deflation {
    pub fn identity(n: usize) -> Self {
        Self {
            vectors: Array2::zeros((n, 0)),
            factors: Array1::zeros(0),
        }
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        if self.rank() == 0 {
            return x.to_owned();
        }
        let mut coeff = linalg::matmul(self.vectors.t(), x);
        for (mut row, f) in coeff.axis_iter_mut(Axis(0)).zip(self.factors.iter()) {
            row.mapv_inplace(|v| v * f);
        }
        let mut out = x.to_owned();
        out -= &linalg::matmul(self.vectors.view(), coeff.view());
        out
    }

    /// Builds the deflation from the top eigenpairs of a uniformly subsampled
    /// kernel block, extended to all points by the Nystrom formula when the
    /// subsample is smaller than the system.
    pub fn build(op: &dyn KernelOperator, scale: f64, lambda: f64, rank: usize, subsample: usize, seed: u64) -> Result<Self> {
        let n = op.dim();
        let sub = subsample.min(n);
        if rank == 0 || sub < 2 {
            return Ok(Self::identity(n));
        }
        let mut idx: Vec<usize> = if sub == n {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, n, sub).into_vec()
        };
        idx.sort_unstable();
        let mut kss = op.block(&idx, &idx);
        kss.mapv_inplace(|v| v * scale);
        let (vals, vecs) = linalg::symmetric_eigen(kss.view())?;
        let top = vals.last().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return Ok(Self::identity(n));
        }
        // descending order; keep k eigenpairs with a strictly positive (k+1)-th
        let desc: Vec<usize> = (0..vals.len()).rev().collect();
        let mut k = rank.min(sub - 1);
        while k > 0 && vals[desc[k]] <= top * 1e-12 {
            k -= 1;
        }
        if k == 0 {
            return Ok(Self::identity(n));
        }
        let ratio = n as f64 / sub as f64;
        let floor = ratio * vals[desc[k]] + lambda;

        let mut vectors = Array2::<f64>::zeros((n, k));
        if sub == n {
            for (c, &e) in desc.iter().take(k).enumerate() {
                vectors.column_mut(c).assign(&vecs.column(e));
            }
        } else {
            let mut u = Array2::<f64>::zeros((sub, k));
            for (c, &e) in desc.iter().take(k).enumerate() {
                u.column_mut(c).assign(&(&vecs.column(e) / vals[e]));
            }
            let all: Vec<usize> = (0..n).collect();
            for chunk_start in (0..n).step_by(1024) {
                let rows = &all[chunk_start..(chunk_start + 1024).min(n)];
                let mut kx = op.block(rows, &idx);
                kx.mapv_inplace(|v| v * scale);
                let ext = linalg::matmul(kx.view(), u.view());
                vectors.slice_mut(s![chunk_start..chunk_start + rows.len(), ..]).assign(&ext);
            }
            // modified Gram-Schmidt keeps P symmetric positive definite
            for c in 0..k {
                for prev in 0..c {
                    let proj = vectors.column(prev).dot(&vectors.column(c));
                    let p = vectors.column(prev).to_owned();
                    vectors.column_mut(c).scaled_add(-proj, &p);
                }
                let norm = vectors.column(c).dot(&vectors.column(c)).sqrt();
                if norm > 0.0 {
                    vectors.column_mut(c).mapv_inplace(|v| v / norm);
                }
            }
        }
        let factors = Array1::from_iter(desc.iter().take(k).map(|&e| {
            let mu = ratio * vals[e] + lambda;
            (1.0 - floor / mu).clamp(0.0, 1.0 - 1e-12)
        }));
        Ok(Self { vectors, factors })
    }
}

struct Column {
    beta: f64,
    hess: Vec<Vec<f64>>,
    cs: Vec<f64>,
    sn: Vec<f64>,
    g: Vec<f64>,
    steps: usize,
    active: bool,
}

impl Column {
    fn residual(&self) -> f64 {
        if self.beta == 0.0 {
            0.0
        } else {
            self.g[self.steps].abs() / self.beta
        }
    }
}

/// Right-preconditioned GMRES on `(s K + lambda I)`, one operator application
/// per epoch, all right-hand sides advanced in lockstep. The minimal-residual
/// property makes the epoch-end residual nonincreasing.
pub fn iterative_solve(op: &dyn KernelOperator, rhs: ArrayView2<f64>, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    let n = op.dim();
    check_rhs(n, &rhs)?;
    let r = rhs.ncols();
    let scale = opts.kernel_scale;
    let lambda = match opts.ridge {
        Ridge::None => 0.0,
        ridge => ridge.lambda(scale * op.trace(), n),
    };
    let precond = if opts.epochs == 0 {
        Deflation::identity(n)
    } else {
        Deflation::build(op, scale, lambda, opts.preconditioner_rank, opts.subsample, opts.seed)?
    };
    let mut report = SolveReport {
        method: "gmres",
        lambda,
        epochs_run: 0,
        residuals: Vec::new(),
        preconditioner_rank: precond.rank(),
    };
    if opts.epochs == 0 {
        return Ok(Solution {
            coefficients: Array2::zeros((n, r)),
            report,
        });
    }

    let mut cols: Vec<Column> = rhs
        .axis_iter(Axis(1))
        .map(|b| {
            let beta = b.dot(&b).sqrt();
            Column {
                beta,
                hess: Vec::new(),
                cs: Vec::new(),
                sn: Vec::new(),
                g: vec![beta],
                steps: 0,
                active: beta > 0.0,
            }
        })
        .collect();
    let mut v0 = rhs.to_owned();
    for (mut c, col) in v0.axis_iter_mut(Axis(1)).zip(cols.iter()) {
        if col.beta > 0.0 {
            c.mapv_inplace(|v| v / col.beta);
        }
    }
    let mut basis = vec![v0];
    let mut prev_resid = 1.0;

    for epoch in 0..opts.epochs {
        if !cols.iter().any(|c| c.active) {
            break;
        }
        let z = precond.apply(basis[epoch].view());
        let mut w = op.apply(z.view());
        w.mapv_inplace(|v| v * scale);
        w.scaled_add(lambda, &z);

        let j = epoch;
        for (c, col) in cols.iter_mut().enumerate() {
            if !col.active {
                w.column_mut(c).fill(0.0);
                continue;
            }
            let mut h = vec![0.0; j + 2];
            for (i, hi) in h.iter_mut().enumerate().take(j + 1) {
                let vi = basis[i].column(c);
                let proj = vi.dot(&w.column(c));
                *hi = proj;
                Zip::from(w.column_mut(c)).and(vi).for_each(|wv, &bv| *wv -= proj * bv);
            }
            let wn = w.column(c).dot(&w.column(c)).sqrt();
            h[j + 1] = wn;
            for i in 0..j {
                let t = col.cs[i] * h[i] + col.sn[i] * h[i + 1];
                h[i + 1] = -col.sn[i] * h[i] + col.cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[j].hypot(h[j + 1]);
            let (cs, sn) = if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) };
            h[j] = denom;
            h[j + 1] = 0.0;
            col.cs.push(cs);
            col.sn.push(sn);
            let gj = col.g[j];
            col.g[j] = cs * gj;
            col.g.push(-sn * gj);
            col.hess.push(h);
            col.steps = j + 1;
            if wn <= 1e-14 * col.beta || col.residual() <= 1e-15 {
                col.active = false;
                w.column_mut(c).fill(0.0);
            } else {
                w.column_mut(c).mapv_inplace(|v| v / wn);
            }
        }
        basis.push(w);
        report.epochs_run = epoch + 1;
        let resid = cols.iter().map(Column::residual).fold(0.0, f64::max);
        if !resid.is_finite() || resid > 10.0 * prev_resid {
            return Err(Error::Divergence(format!(
                "residual {resid:.3e} after epoch {} (previous {prev_resid:.3e})",
                epoch + 1
            )));
        }
        report.residuals.push(resid);
        prev_resid = resid;
    }

    let mut y_all = Array2::<f64>::zeros((n, r));
    for (c, col) in cols.iter().enumerate() {
        let k = col.steps;
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = col.g[i];
            for (l, yl) in y.iter().enumerate().take(k).skip(i + 1) {
                acc -= col.hess[l][i] * yl;
            }
            let diag = col.hess[i][i];
            y[i] = if diag == 0.0 { 0.0 } else { acc / diag };
        }
        let mut comb = y_all.column_mut(c);
        for (i, yi) in y.iter().enumerate() {
            comb.scaled_add(*yi, &basis[i].column(c));
        }
    }
    let coefficients = precond.apply(y_all.view());
    Ok(Solution { coefficients, report })
}

/// Dispatches on `opts.mode`. The direct path materializes the operator.
pub fn solve(op: &dyn KernelOperator, rhs: ArrayView2<f64>, opts: &SolveOptions) -> Result<Solution> {
    match opts.mode {
        SolveMode::Direct => {
            let all: Vec<usize> = (0..op.dim()).collect();
            let k = op.block(&all, &all);
            direct_solve(k.view(), rhs, opts)
        }
        SolveMode::Iterative => iterative_solve(op, rhs, opts),
    }
}

/// `s * cross^T alpha`: rows are test points, columns right-hand sides.
pub fn predict(coefficients: ArrayView2<f64>, cross_kernel: ArrayView2<f64>, kernel_scale: f64) -> Result<Array2<f64>> {
    if coefficients.nrows() != cross_kernel.nrows() {
        return Err(Error::Shape(format!(
            "{} coefficients but cross kernel has {} training rows",
            coefficients.nrows(),
            cross_kernel.nrows()
        )));
    }
    let mut out = linalg::matmul(cross_kernel.t(), coefficients);
    out.mapv_inplace(|v| v * kernel_scale);
    Ok(out)
}

/// Row-parallel product helper for operators that compute rows on the fly.
pub fn apply_by_rows<F>(n: usize, x: ArrayView2<f64>, row: F) -> Array2<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let r = x.ncols();
    let mut out = Array2::<f64>::zeros((n, r));
    out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each_init(
        || vec![0.0; n],
        |buf, (a, mut o)| {
            row(a, buf);
            for (b, &kab) in buf.iter().enumerate() {
                if kab != 0.0 {
                    Zip::from(&mut o).and(x.row(b)).for_each(|ov, &xv| *ov += kab * xv);
                }
            }
        },
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn random_spd(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() - 0.5);
        let mut k = g.t().dot(&g);
        k.diag_mut().mapv_inplace(|v| v + 1.0);
        k
    }

    #[test]
    fn identity_returns_rhs() {
        let k = Array2::<f64>::eye(4);
        let rhs = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]];
        let sol = direct_solve(k.view(), rhs.view(), &SolveOptions::default()).unwrap();
        assert_eq!(sol.coefficients, rhs);
    }

    #[test]
    fn ridge_parsing() {
        assert_eq!("trace:4e-5".parse::<Ridge>().unwrap(), Ridge::TraceScaled(4e-5));
        assert_eq!("none".parse::<Ridge>().unwrap(), Ridge::None);
        assert_eq!("0.5".parse::<Ridge>().unwrap(), Ridge::Absolute(0.5));
        assert!("trace:-1".parse::<Ridge>().is_err());
        assert!("x".parse::<Ridge>().is_err());
    }

    #[test]
    fn trace_scaled_residual() {
        let k = random_spd(100, 3);
        let rhs = Array2::from_shape_fn((100, 2), |(i, j)| (i as f64 * 0.1 + j as f64).sin());
        let opts = SolveOptions {
            ridge: Ridge::TraceScaled(4e-5),
            ..SolveOptions::default()
        };
        let sol = direct_solve(k.view(), rhs.view(), &opts).unwrap();
        let lambda = 4e-5 * k.diag().sum() / 100.0;
        assert!((sol.report.lambda - lambda).abs() < 1e-15 * lambda.max(1.0));
        let mut a = k.clone();
        a.diag_mut().mapv_inplace(|v| v + lambda);
        let r = a.dot(&sol.coefficients) - &rhs;
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rn <= 1e-8 * bn);
    }

    #[test]
    fn singular_without_ridge_recommends_ridge() {
        let k = array![[1.0, 1.0], [1.0, 1.0]];
        let err = direct_solve(k.view(), array![[1.0], [2.0]].view(), &SolveOptions::default()).unwrap_err();
        assert!(err.to_string().contains("--ridge trace"));
    }

    #[test]
    fn zero_epochs_gives_zero() {
        let k = random_spd(10, 1);
        let rhs = Array2::ones((10, 1));
        let opts = SolveOptions {
            epochs: 0,
            ..SolveOptions::iterative()
        };
        let sol = iterative_solve(&k, rhs.view(), &opts).unwrap();
        assert!(sol.coefficients.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gmres_matches_direct_and_is_monotone() {
        let k = random_spd(60, 7);
        let rhs = Array2::from_shape_fn((60, 3), |(i, j)| ((i * (j + 1)) as f64).cos());
        let direct = direct_solve(k.view(), rhs.view(), &SolveOptions::default()).unwrap();
        let opts = SolveOptions {
            epochs: 60,
            preconditioner_rank: 10,
            ..SolveOptions::iterative()
        };
        let it = iterative_solve(&k, rhs.view(), &opts).unwrap();
        let diff = (&it.coefficients - &direct.coefficients).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        let mag = direct.coefficients.mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        assert!(diff <= 1e-8 * mag, "diff {diff}");
        for w in it.report.residuals.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn nystrom_preconditioner_still_converges() {
        let k = random_spd(80, 9);
        let rhs = Array2::from_shape_fn((80, 1), |(i, _)| (i as f64).sin());
        let opts = SolveOptions {
            epochs: 80,
            preconditioner_rank: 8,
            subsample: 30,
            ..SolveOptions::iterative()
        };
        let it = iterative_solve(&k, rhs.view(), &opts).unwrap();
        assert!(it.report.final_residual() < 1e-10);
    }

    #[test]
    fn predict_single_point_is_dot() {
        let alpha = array![[1.0], [2.0]];
        let cross = array![[3.0], [4.0]];
        assert_eq!(predict(alpha.view(), cross.view(), 1.0).unwrap()[(0, 0)], 11.0);
        assert!(predict(alpha.view(), array![[1.0]].view(), 1.0).is_err());
    }

    #[test]
    fn rejects_bad_scale() {
        let opts = SolveOptions {
            kernel_scale: 0.0,
            ..SolveOptions::default()
        };
        assert!(direct_solve(Array2::eye(2).view(), Array2::ones((2, 1)).view(), &opts).is_err());
    }
}
