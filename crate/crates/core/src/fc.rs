//! Fully connected NTK completion for matrices whose columns carry a feature
//! embedding.
//!
//! Viewing each entry `(i, j)` as a training example, the NTK between entries
//! `(i, j)` and `(i', j')` is `kappa_d(<z_j, z_j'>)` when `i = i'` and zero
//! otherwise. Regression therefore decouples into one small solve per row, all
//! rows sharing the same `n x n` column kernel.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::dual::{kappa, Activation};
use crate::error::{Error, Result};
use crate::linalg;
use crate::solve::{self, SolveMode, SolveOptions};

/// Column embeddings with unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePrior {
    data: Array2<f64>,
    column_norms: Array1<f64>,
}

impl FeaturePrior {
    /// `p x n` matrix of unit columns.
    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    /// Norms of the raw columns before normalization.
    pub fn column_norms(&self) -> &Array1<f64> {
        &self.column_norms
    }

    pub fn embedding_dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn columns(&self) -> usize {
        self.data.ncols()
    }

    /// Applies the same permutation to the columns.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        Self {
            data: self.data.select(Axis(1), perm),
            column_norms: self.column_norms.select(Axis(0), perm),
        }
    }
}

/// Scales every column of `raw` to unit Euclidean norm.
pub fn normalize_prior(raw: Array2<f64>) -> Result<FeaturePrior> {
    let mut data = raw;
    let mut norms = Array1::zeros(data.ncols());
    for (j, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("prior column {j} has non-finite entries")));
        }
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroColumn { index: j });
        }
        col.mapv_inplace(|v| v / norm);
        norms[j] = norm;
    }
    Ok(FeaturePrior {
        data,
        column_norms: norms,
    })
}

/// Stacks `scale * I_n` below a `p x n` prior so that its Gram matrix is
/// positive definite. Apply before [`normalize_prior`].
pub fn augment_identity(raw: ArrayView2<f64>, scale: f64) -> Array2<f64> {
    let (p, n) = raw.dim();
    let mut out = Array2::zeros((p + n, n));
    out.slice_mut(ndarray::s![..p, ..]).assign(&raw);
    for j in 0..n {
        out[(p + j, j)] = scale;
    }
    out
}

/// Observed entries of an `m x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    shape: (usize, usize),
    entries: Vec<(usize, usize, f64)>,
}

impl ObservationSet {
    pub fn new(shape: (usize, usize), entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let (m, n) = shape;
        let mut seen = std::collections::HashSet::with_capacity(entries.len());
        for &(i, j, v) in &entries {
            if i >= m || j >= n {
                return Err(Error::Index(format!("observation ({i}, {j}) outside a {m}x{n} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("observation ({i}, {j}) is not finite")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidParameter(format!("duplicate observation ({i}, {j})")));
            }
        }
        Ok(Self { shape, entries })
    }

    /// Treats NaN cells as missing.
    pub fn from_dense(values: ArrayView2<f64>) -> Self {
        let entries = values
            .indexed_iter()
            .filter(|(_, v)| !v.is_nan())
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        Self {
            shape: values.dim(),
            entries,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Observed `(column, value)` pairs of every row, columns ascending.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.shape.0];
        for &(i, j, v) in &self.entries {
            rows[i].push((j, v));
        }
        for r in &mut rows {
            r.sort_by_key(|&(j, _)| j);
        }
        rows
    }

    /// Dense matrix with NaN at unobserved cells.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::from_elem(self.shape, f64::NAN);
        for &(i, j, v) in &self.entries {
            out[(i, j)] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnKernel {
    matrix: Array2<f64>,
}

impl ColumnKernel {
    /// Wraps an externally computed symmetric column kernel.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::Shape(format!("column kernel must be square, got {:?}", matrix.dim())));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }
}

/// `K[j, j'] = kappa_d(<z_j, z_j'>)`.
pub fn column_kernel(prior: &FeaturePrior, d: usize, act: Activation) -> Result<ColumnKernel> {
    if d == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let gram = linalg::matmul(prior.data.t(), prior.data.view());
    let n = gram.nrows();
    let mut matrix = Array2::zeros((n, n));
    for a in 0..n {
        for b in a..n {
            let v = kappa(act, d, gram[(a, b)])?;
            matrix[(a, b)] = v;
            matrix[(b, a)] = v;
        }
    }
    Ok(ColumnKernel { matrix })
}

/// NTK between the observed entries: block diagonal over rows.
pub fn entry_gram(obs: &ObservationSet, kernel: &ColumnKernel) -> Array2<f64> {
    let e = obs.entries();
    Array2::from_shape_fn((e.len(), e.len()), |(a, b)| {
        if e[a].0 == e[b].0 {
            kernel.matrix[(e[a].1, e[b].1)]
        } else {
            0.0
        }
    })
}

/// NTK between every observed entry and the target entry `(i, j)`.
pub fn entry_cross(obs: &ObservationSet, kernel: &ColumnKernel, target: (usize, usize)) -> Array1<f64> {
    obs.entries()
        .iter()
        .map(|&(i, j, _)| if i == target.0 { kernel.matrix[(j, target.1)] } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompletionDiagnostics {
    /// True when every row observed the same columns.
    pub shared_pattern: bool,
    pub factorizations: usize,
    pub back_substitutions: usize,
    pub max_residual: f64,
    pub ridge: f64,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub values: Array2<f64>,
    pub diagnostics: CompletionDiagnostics,
}

/// How rows are grouped for factorization.
#[derive(Debug)]
pub enum PatternSolve {
    /// All rows observe `columns`; one solve serves every row.
    Shared(SharedFactorization),
    /// Patterns differ across rows.
    PerRow,
}

/// Coefficients for every row of a shared observation pattern.
#[derive(Debug)]
pub struct SharedFactorization {
    pub columns: Vec<usize>,
    /// `|columns| x m` coefficient matrix, one column per row.
    pub coefficients: Array2<f64>,
    pub report: solve::SolveReport,
}

/// Detects a common observed-column set and, if present, solves all rows
/// against a single factorization.
pub fn shared_pattern_solve(obs: &ObservationSet, kernel: &ColumnKernel, opts: &SolveOptions) -> Result<PatternSolve> {
    let rows = obs.rows();
    let Some(first) = rows.first() else {
        return Ok(PatternSolve::PerRow);
    };
    let columns: Vec<usize> = first.iter().map(|&(j, _)| j).collect();
    let same = rows
        .iter()
        .all(|r| r.len() == columns.len() && r.iter().zip(&columns).all(|(&(j, _), &c)| j == c));
    if !same {
        return Ok(PatternSolve::PerRow);
    }
    if columns.is_empty() {
        return Err(Error::EmptyRow { row: 0 });
    }
    let rhs = Array2::from_shape_fn((columns.len(), rows.len()), |(a, i)| rows[i][a].1);
    let sol = solve_group(kernel, &columns, rhs.view(), opts)?;
    Ok(PatternSolve::Shared(SharedFactorization {
        columns,
        coefficients: sol.coefficients,
        report: sol.report,
    }))
}

fn solve_group(kernel: &ColumnKernel, columns: &[usize], rhs: ArrayView2<f64>, opts: &SolveOptions) -> Result<solve::Solution> {
    let k_oo = kernel.matrix.select(Axis(0), columns).select(Axis(1), columns);
    match opts.mode {
        SolveMode::Direct => solve::direct_solve(k_oo.view(), rhs, opts),
        SolveMode::Iterative => solve::iterative_solve(&k_oo, rhs, opts),
    }
}

fn fill_rows(
    out: &mut Array2<f64>,
    kernel: &ColumnKernel,
    columns: &[usize],
    row_ids: &[usize],
    coefficients: ArrayView2<f64>,
    scale: f64,
) -> Result<()> {
    let cross = kernel.matrix.select(Axis(0), columns);
    let pred = solve::predict(coefficients, cross.view(), scale)?;
    for (c, &i) in row_ids.iter().enumerate() {
        out.row_mut(i).assign(&pred.column(c));
    }
    Ok(())
}

/// Completes the matrix with a precomputed column kernel.
pub fn complete_with_kernel(obs: &ObservationSet, kernel: &ColumnKernel, opts: &SolveOptions) -> Result<Completion> {
    let (m, n) = obs.shape();
    if kernel.len() != n {
        return Err(Error::Shape(format!(
            "column kernel is {}x{} but the matrix has {n} columns",
            kernel.len(),
            kernel.len()
        )));
    }
    let rows = obs.rows();
    if let Some(row) = rows.iter().position(|r| r.is_empty()) {
        return Err(Error::EmptyRow { row });
    }
    let mut values = Array2::zeros((m, n));
    let mut diag = CompletionDiagnostics::default();

    match shared_pattern_solve(obs, kernel, opts)? {
        PatternSolve::Shared(shared) => {
            diag.shared_pattern = true;
            diag.factorizations = 1;
            diag.back_substitutions = m;
            diag.max_residual = shared.report.final_residual();
            diag.ridge = shared.report.lambda;
            let ids: Vec<usize> = (0..m).collect();
            fill_rows(&mut values, kernel, &shared.columns, &ids, shared.coefficients.view(), opts.kernel_scale)?;
        }
        PatternSolve::PerRow => {
            // rows with identical patterns still share a factorization
            let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
            for (i, r) in rows.iter().enumerate() {
                groups.entry(r.iter().map(|&(j, _)| j).collect()).or_default().push(i);
            }
            let mut groups: Vec<(Vec<usize>, Vec<usize>)> = groups.into_iter().collect();
            groups.sort();
            let solved: Vec<Result<(usize, solve::Solution)>> = groups
                .par_iter()
                .enumerate()
                .map(|(g, (columns, ids))| {
                    let rhs = Array2::from_shape_fn((columns.len(), ids.len()), |(a, c)| rows[ids[c]][a].1);
                    solve_group(kernel, columns, rhs.view(), opts).map(|s| (g, s))
                })
                .collect();
            for res in solved {
                let (g, sol) = res?;
                let (columns, ids) = &groups[g];
                diag.factorizations += 1;
                diag.back_substitutions += ids.len();
                diag.max_residual = diag.max_residual.max(sol.report.final_residual());
                diag.ridge = diag.ridge.max(sol.report.lambda);
                fill_rows(&mut values, kernel, columns, ids, sol.coefficients.view(), opts.kernel_scale)?;
            }
        }
    }
    for &(i, j, v) in obs.entries() {
        values[(i, j)] = v;
    }
    Ok(Completion {
        values,
        diagnostics: diag,
    })
}

/// Kernel regression with the depth-`d` NTK over the observed entries.
pub fn complete_matrix(
    obs: &ObservationSet,
    prior: &FeaturePrior,
    d: usize,
    act: Activation,
    opts: &SolveOptions,
) -> Result<Completion> {
    let (_, n) = obs.shape();
    if prior.columns() != n {
        return Err(Error::Shape(format!(
            "prior has {} columns but the matrix has {n}",
            prior.columns()
        )));
    }
    let kernel = column_kernel(prior, d, act)?;
    complete_with_kernel(obs, &kernel, opts)
}
