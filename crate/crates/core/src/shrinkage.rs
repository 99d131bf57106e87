//! Weighted lasso and elastic net by cyclic coordinate descent.
//!
//! The objective over the penalized coordinates is
//!
//! ```text
//! Σ_t ω_t (y_t − β₀ − x_t β)² + λ·α·Σ|β_j| + ½·λ·(1−α)·Σ β_j²
//! ```
//!
//! with the residual sum left unnormalized. Columns are optionally
//! standardized (weighted mean zero, weighted variance one) before fitting,
//! in which case the penalty applies to the standardized coefficients; the
//! returned coefficients are always on the original scale.
//!
//! The solver works on the weighted Gram matrix of the centered columns, so
//! one coordinate update costs `O(p)` regardless of the number of rows.

use std::cell::RefCell;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::design::LambdaGrid;
use crate::error::{Error, Result};

/// Rows per block when accumulating the Gram matrix.
const GRAM_CHUNK: usize = 512;

/// Relative slack applied to `λ_max` so that the all-zero solution is exact
/// at the top of the path despite rounding in `λα/2`.
const LAMBDA_MAX_SLACK: f64 = 1e-12;

/// `sign(z)·max(|z| − γ, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// A weighted shrinkage regression over a lambda path.
#[derive(Debug, Clone)]
pub struct ShrinkageProblem<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    /// Observation weights ω; all ones when absent.
    pub weights: Option<&'a DVector<f64>>,
    pub alpha: f64,
    pub lambda_grid: LambdaGrid,
    /// Per-column penalty flags; all penalized when absent.
    pub penalize: Option<Vec<bool>>,
    /// Fit an unpenalized intercept.
    pub intercept: bool,
    pub standardize: bool,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl<'a> ShrinkageProblem<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>) -> Self {
        Self {
            x,
            y,
            weights: None,
            alpha: 1.0,
            lambda_grid: LambdaGrid::default(),
            penalize: None,
            intercept: true,
            standardize: true,
            tol: 1e-7,
            max_sweeps: 10_000,
        }
    }

    fn validate(&self) -> Result<()> {
        let (n, p) = self.x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidValue(format!("design is {n} × {p}")));
        }
        if self.y.len() != n {
            return Err(Error::InvalidValue(format!(
                "response has {} rows, design has {n}",
                self.y.len()
            )));
        }
        if let Some(w) = self.weights {
            if w.len() != n {
                return Err(Error::InvalidValue(format!(
                    "{} weights for {n} rows",
                    w.len()
                )));
            }
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidValue("weights must be positive".into()));
            }
        }
        if let Some(flags) = &self.penalize {
            if flags.len() != p {
                return Err(Error::InvalidValue(format!(
                    "{} penalty flags for {p} columns",
                    flags.len()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidValue(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        self.lambda_grid
            .validate()
            .map_err(|e| Error::InvalidValue(e.to_string()))?;
        Ok(())
    }
}

/// Coefficients along the path and the AIC choice.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// Original-scale coefficients, one vector of length `p` per lambda.
    pub coefficients: Vec<DVector<f64>>,
    /// Nonzero coefficient count, intercept included.
    pub df: Vec<usize>,
    /// Weighted residual sum of squares.
    pub rss: Vec<f64>,
    pub sweeps: Vec<usize>,
    pub n: usize,
    pub chosen: usize,
}

impl PathResult {
    pub fn aic(&self, index: usize) -> f64 {
        aic(self.rss[index], self.df[index], self.n)
    }

    pub fn chosen_coefficients(&self) -> (f64, &DVector<f64>) {
        (self.intercepts[self.chosen], &self.coefficients[self.chosen])
    }

    /// CSV of `lambda, df, rss, aic`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        self.summary().write_csv(sink, None)
    }

    pub fn summary(&self) -> PathSummary {
        PathSummary {
            lambdas: self.lambdas.clone(),
            df: self.df.clone(),
            rss: self.rss.clone(),
            n: self.n,
            chosen: self.chosen,
        }
    }
}

/// Path statistics without the coefficient vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathSummary {
    pub lambdas: Vec<f64>,
    pub df: Vec<usize>,
    pub rss: Vec<f64>,
    pub n: usize,
    pub chosen: usize,
}

impl PathSummary {
    pub fn aic(&self, index: usize) -> f64 {
        aic(self.rss[index], self.df[index], self.n)
    }

    /// CSV of `lambda, df, rss, aic`, optionally after a `#` comment line.
    pub fn write_csv<W: Write>(&self, mut sink: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(sink, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["lambda", "df", "rss", "aic"])?;
        for i in 0..self.lambdas.len() {
            w.write_record([
                self.lambdas[i].to_string(),
                self.df[i].to_string(),
                self.rss[i].to_string(),
                self.aic(i).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn aic(rss: f64, df: usize, n: usize) -> f64 {
    let n = n as f64;
    n * (rss / n).ln() + 2.0 * df as f64
}

/// Index minimising AIC; ties go to the earliest (largest) lambda.
pub fn select_by_aic(rss: &[f64], df: &[usize], n: usize) -> usize {
    let mut best = 0;
    let mut best_aic = f64::INFINITY;
    for (i, (&r, &d)) in rss.iter().zip(df).enumerate() {
        let a = aic(r, d, n);
        if a < best_aic {
            best_aic = a;
            best = i;
        }
    }
    best
}

/// Weighted Gram matrix of the centered (and optionally scaled) columns,
/// reusable across responses that share design and weights.
#[derive(Debug, Clone)]
pub struct WeightedGram<'a> {
    x: &'a DMatrix<f64>,
    weights: Option<&'a DVector<f64>>,
    intercept: bool,
    /// Original column index of each retained column.
    included: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
    weight_sum: f64,
    gram: DMatrix<f64>,
}

impl<'a> WeightedGram<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        weights: Option<&'a DVector<f64>>,
        intercept: bool,
        standardize: bool,
    ) -> Self {
        let (n, p) = x.shape();
        let w = |i: usize| weights.map_or(1.0, |w| w[i]);
        let weight_sum: f64 = (0..n).map(w).sum();

        let mut included = Vec::with_capacity(p);
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let mean = if intercept {
                col.iter().enumerate().map(|(i, v)| w(i) * v).sum::<f64>() / weight_sum
            } else {
                0.0
            };
            let (var, sq) = col.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, v)| {
                let d = v - mean;
                (a + w(i) * d * d, b + w(i) * v * v)
            });
            let var = var / weight_sum;
            let mean_sq = sq / weight_sum;
            // constant (after centering) or all-zero columns carry no information
            if var == 0.0 || var <= 1e-24 * mean_sq {
                continue;
            }
            included.push(j);
            means.push(mean);
            scales.push(if standardize { var.sqrt() } else { 1.0 });
        }

        let q = included.len();
        let mut gram = DMatrix::<f64>::zeros(q, q);
        let mut chunk = DMatrix::<f64>::zeros(GRAM_CHUNK.min(n.max(1)), q);
        let mut start = 0;
        while start < n && q > 0 {
            let len = GRAM_CHUNK.min(n - start);
            for (k, &j) in included.iter().enumerate() {
                let (mean, scale) = (means[k], scales[k]);
                let src = x.column(j);
                for i in 0..len {
                    let row = start + i;
                    chunk[(i, k)] = w(row).sqrt() * (src[row] - mean) / scale;
                }
            }
            let rows = chunk.nrows() as isize;
            // gram += chunkᵀ·chunk over the first `len` rows
            unsafe {
                matrixmultiply::dgemm(
                    q,
                    len,
                    q,
                    1.0,
                    chunk.as_ptr(),
                    rows,
                    1,
                    chunk.as_ptr(),
                    1,
                    rows,
                    1.0,
                    gram.as_mut_ptr(),
                    1,
                    q as isize,
                );
            }
            start += len;
        }
        // symmetrise away accumulation asymmetry
        for a in 0..q {
            for b in (a + 1)..q {
                let v = 0.5 * (gram[(a, b)] + gram[(b, a)]);
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }

        Self {
            x,
            weights,
            intercept,
            included,
            means,
            scales,
            weight_sum,
            gram,
        }
    }

    pub fn included(&self) -> &[usize] {
        &self.included
    }

    /// Weighted centered response, `Σ ω ỹ²`, and `Zᵀ Ω ỹ`.
    fn correlations(&self, y: &DVector<f64>) -> (f64, f64, DVector<f64>) {
        let n = y.len();
        let w = |i: usize| self.weights.map_or(1.0, |w| w[i]);
        let y_mean = if self.intercept {
            (0..n).map(|i| w(i) * y[i]).sum::<f64>() / self.weight_sum
        } else {
            0.0
        };
        let wy: Vec<f64> = (0..n).map(|i| w(i) * (y[i] - y_mean)).collect();
        let yy: f64 = (0..n).map(|i| wy[i] * (y[i] - y_mean)).sum();
        let c = DVector::from_iterator(
            self.included.len(),
            self.included.iter().enumerate().map(|(k, &j)| {
                let col = self.x.column(j);
                let mean = self.means[k];
                let s: f64 = (0..n).map(|i| wy[i] * (col[i] - mean)).sum();
                s / self.scales[k]
            }),
        );
        (y_mean, yy, c)
    }
}

struct Solver<'g> {
    gram: &'g DMatrix<f64>,
    penalized: Vec<bool>,
    alpha: f64,
    tol: f64,
    // sqrt(G_jj / W): converts a coordinate step to standardized units
    step_scale: Vec<f64>,
    // factor of the last support system, reused across refinement steps
    factor: RefCell<Option<SupportFactor>>,
}

/// Cholesky factor `L Lᵀ = G_SS + l2·I` (ridge on penalized coordinates
/// only), maintained under column insertions and deletions so that a
/// support change costs `O(s²)` instead of a fresh `O(s³)` factorization.
struct SupportFactor {
    support: Vec<usize>,
    l: DMatrix<f64>,
    l2: f64,
}

impl SupportFactor {
    fn factor(solver: &Solver<'_>, support: &[usize], l2: f64) -> Option<Self> {
        let lhs = DMatrix::from_fn(support.len(), support.len(), |a, b| {
            let v = solver.gram[(support[a], support[b])];
            if a == b && solver.penalized[support[a]] {
                v + l2
            } else {
                v
            }
        });
        let l = lhs.cholesky()?.unpack();
        Some(Self {
            support: support.to_vec(),
            l,
            l2,
        })
    }

    /// Drops position `k`: deleting row `k` of `L` leaves a lower
    /// Hessenberg block that Givens rotations on column pairs restore.
    fn remove(&mut self, k: usize) {
        let s = self.support.len();
        let mut l = std::mem::replace(&mut self.l, DMatrix::zeros(0, 0)).remove_row(k);
        for j in k..s - 1 {
            let a = l[(j, j)];
            let b = l[(j, j + 1)];
            let r = a.hypot(b);
            if r == 0.0 {
                continue;
            }
            let (c, sn) = (a / r, b / r);
            for i in j..s - 1 {
                let x = l[(i, j)];
                let y = l[(i, j + 1)];
                l[(i, j)] = c * x + sn * y;
                l[(i, j + 1)] = -sn * x + c * y;
            }
            l[(j, j + 1)] = 0.0;
        }
        self.l = l.remove_column(s - 1);
        self.support.remove(k);
    }

    /// Appends coordinate `j`; `false` if the extended system is not
    /// numerically positive definite.
    fn push(&mut self, solver: &Solver<'_>, j: usize) -> bool {
        let s = self.support.len();
        let a = DVector::from_fn(s, |i, _| solver.gram[(self.support[i], j)]);
        let Some(y) = self.l.solve_lower_triangular(&a) else {
            return false;
        };
        let d = solver.gram[(j, j)] + if solver.penalized[j] { self.l2 } else { 0.0 };
        let pivot = d - y.norm_squared();
        if !(pivot > 1e-12 * d) {
            return false;
        }
        let mut l = std::mem::replace(&mut self.l, DMatrix::zeros(0, 0))
            .insert_row(s, 0.0)
            .insert_column(s, 0.0);
        for i in 0..s {
            l[(s, i)] = y[i];
        }
        l[(s, s)] = pivot.sqrt();
        self.l = l;
        self.support.push(j);
        true
    }

    /// Moves the factor to `support`; `false` if an insertion fails.
    fn update(&mut self, solver: &Solver<'_>, support: &[usize]) -> bool {
        let mut wanted = vec![false; solver.gram.nrows()];
        for &j in support {
            wanted[j] = true;
        }
        for k in (0..self.support.len()).rev() {
            if !wanted[self.support[k]] {
                self.remove(k);
            }
        }
        let mut present = vec![false; solver.gram.nrows()];
        for &j in &self.support {
            present[j] = true;
        }
        support.iter().all(|&j| present[j] || self.push(solver, j))
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let y = self.l.solve_lower_triangular(rhs)?;
        self.l.tr_solve_lower_triangular(&y)
    }
}

impl Solver<'_> {
    /// One pass over `coords`; returns the largest standardized step.
    fn sweep(
        &self,
        coords: &[usize],
        lambda: f64,
        theta: &mut DVector<f64>,
        resid: &mut DVector<f64>,
    ) -> f64 {
        let l1 = 0.5 * lambda * self.alpha;
        let l2 = 0.5 * lambda * (1.0 - self.alpha);
        let mut max_step = 0.0f64;
        for &j in coords {
            let gjj = self.gram[(j, j)];
            let old = theta[j];
            let z = resid[j] + gjj * old;
            let new = if self.penalized[j] {
                soft_threshold(z, l1) / (gjj + l2)
            } else {
                z / gjj
            };
            let delta = new - old;
            if delta != 0.0 {
                theta[j] = new;
                resid.axpy(-delta, &self.gram.column(j), 1.0);
                max_step = max_step.max(delta.abs() * self.step_scale[j]);
            }
        }
        max_step
    }

    fn objective(&self, lambda: f64, yy: f64, c: &DVector<f64>, theta: &DVector<f64>, resid: &DVector<f64>) -> f64 {
        let rss = yy - theta.dot(&(c + resid));
        let mut pen = 0.0;
        for j in 0..theta.len() {
            if self.penalized[j] {
                pen += lambda * (self.alpha * theta[j].abs() + 0.5 * (1.0 - self.alpha) * theta[j] * theta[j]);
            }
        }
        rss + pen
    }

    /// Coordinate descent to convergence at one lambda, cycling over the
    /// active set between full sweeps.
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        lambda: f64,
        max_sweeps: usize,
        yy: f64,
        c: &DVector<f64>,
        theta: &mut DVector<f64>,
        resid: &mut DVector<f64>,
    ) -> std::result::Result<usize, usize> {
        let all: Vec<usize> = (0..theta.len()).collect();
        let mut sweeps = 0;
        let mut last_obj = if cfg!(debug_assertions) {
            self.objective(lambda, yy, c, theta, resid)
        } else {
            0.0
        };
        let mut check = |theta: &DVector<f64>, resid: &DVector<f64>| {
            if cfg!(debug_assertions) {
                let obj = self.objective(lambda, yy, c, theta, resid);
                debug_assert!(
                    obj <= last_obj + 1e-9 * last_obj.abs().max(1.0),
                    "objective increased: {last_obj} -> {obj}"
                );
                last_obj = obj;
            }
        };
        loop {
            let step = self.sweep(&all, lambda, theta, resid);
            sweeps += 1;
            check(theta, resid);
            if step < self.tol {
                return Ok(sweeps);
            }
            if sweeps >= max_sweeps {
                return Err(sweeps);
            }
            if self.refine(lambda, yy, c, theta, resid, &mut sweeps, &mut check) {
                continue;
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| theta[j] != 0.0).collect();
            loop {
                let step = self.sweep(&active, lambda, theta, resid);
                sweeps += 1;
                check(theta, resid);
                if step < self.tol {
                    break;
                }
                if sweeps >= max_sweeps {
                    return Err(sweeps);
                }
            }
        }
    }

    /// Minimizer of the objective restricted to the current support with
    /// the current signs held fixed, or `None` if that system is singular.
    fn support_minimizer(&self, lambda: f64, c: &DVector<f64>, theta: &DVector<f64>, support: &[usize]) -> Option<DVector<f64>> {
        let l1 = 0.5 * lambda * self.alpha;
        let l2 = 0.5 * lambda * (1.0 - self.alpha);
        let rhs_of = |j: usize| {
            if self.penalized[j] {
                c[j] - l1 * theta[j].signum()
            } else {
                c[j]
            }
        };
        let mut cache = self.factor.borrow_mut();
        let mut reusable = cache.take().filter(|f| f.l2 == l2);
        // large support changes are cheaper to refactor
        if let Some(f) = &reusable {
            if f.support.len().abs_diff(support.len()) > support.len() / 4 + 1 {
                reusable = None;
            }
        }
        *cache = reusable
            .and_then(|mut f| f.update(self, support).then_some(f))
            .or_else(|| SupportFactor::factor(self, support, l2));
        let sol = match cache.as_ref() {
            Some(f) => {
                let rhs = DVector::from_iterator(f.support.len(), f.support.iter().map(|&j| rhs_of(j)));
                let x = f.solve(&rhs)?;
                let mut pos = vec![usize::MAX; self.gram.nrows()];
                for (a, &j) in f.support.iter().enumerate() {
                    pos[j] = a;
                }
                DVector::from_iterator(support.len(), support.iter().map(|&j| x[pos[j]]))
            }
            None => {
                // near-singular support: a tiny ridge keeps the factorization
                // usable; the caller verifies the step still descends
                let s = support.len();
                let mut lhs = DMatrix::from_fn(s, s, |a, b| self.gram[(support[a], support[b])]);
                let jitter = 1e-10 * lhs.trace().abs().max(f64::MIN_POSITIVE) / s as f64;
                for (a, &j) in support.iter().enumerate() {
                    lhs[(a, a)] += jitter + if self.penalized[j] { l2 } else { 0.0 };
                }
                let rhs = DVector::from_iterator(s, support.iter().map(|&j| rhs_of(j)));
                lhs.cholesky()?.solve(&rhs)
            }
        };
        sol.iter().all(|v| v.is_finite()).then_some(sol)
    }

    /// Moves from `theta` towards the support minimizer, stopping at the
    /// first coefficient that would change sign and dropping it. The
    /// objective coincides with a convex quadratic along that segment, so
    /// every move is a descent step. Returns `false` when the support
    /// system cannot be factorized or rounding spoils the descent.
    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        lambda: f64,
        yy: f64,
        c: &DVector<f64>,
        theta: &mut DVector<f64>,
        resid: &mut DVector<f64>,
        sweeps: &mut usize,
        check: &mut impl FnMut(&DVector<f64>, &DVector<f64>),
    ) -> bool {
        loop {
            let support: Vec<usize> = (0..theta.len())
                .filter(|&j| theta[j] != 0.0 || !self.penalized[j])
                .collect();
            if support.is_empty() {
                return true;
            }
            let Some(target) = self.support_minimizer(lambda, c, theta, &support) else {
                return false;
            };
            let mut t = 1.0f64;
            let mut blocking = Vec::new();
            for (a, &j) in support.iter().enumerate() {
                if !self.penalized[j] || target[a].signum() == theta[j].signum() {
                    continue;
                }
                let hit = theta[j] / (theta[j] - target[a]);
                if hit < t {
                    t = hit;
                    blocking.clear();
                    blocking.push(j);
                } else if hit == t {
                    blocking.push(j);
                }
            }
            let before = self.objective(lambda, yy, c, theta, resid);
            let saved = theta.clone();
            for (a, &j) in support.iter().enumerate() {
                theta[j] += t * (target[a] - theta[j]);
            }
            for &j in &blocking {
                theta[j] = 0.0;
            }
            let mut moved = c.clone();
            for &j in &support {
                if theta[j] != 0.0 {
                    moved.axpy(-theta[j], &self.gram.column(j), 1.0);
                }
            }
            if self.objective(lambda, yy, c, theta, &moved) > before + 1e-10 * before.abs().max(1.0) {
                *theta = saved;
                return false;
            }
            *resid = moved;
            *sweeps += 1;
            check(theta, resid);
            if blocking.is_empty() {
                return true;
            }
        }
    }
}

/// Fits a path on a prepared Gram matrix.
#[allow(clippy::too_many_arguments)]
pub fn fit_path_with_gram(
    gram: &WeightedGram<'_>,
    y: &DVector<f64>,
    alpha: f64,
    lambda_grid: &LambdaGrid,
    penalize: Option<&[bool]>,
    tol: f64,
    max_sweeps: usize,
) -> Result<PathResult> {
    let n = y.len();
    let p = gram.x.ncols();
    let q = gram.included.len();
    let (y_mean, yy, c) = gram.correlations(y);
    let penalized: Vec<bool> = gram
        .included
        .iter()
        .map(|&j| penalize.map_or(true, |f| f[j]))
        .collect();
    let step_scale: Vec<f64> = (0..q)
        .map(|k| (gram.gram[(k, k)] / gram.weight_sum).sqrt())
        .collect();
    let solver = Solver {
        gram: &gram.gram,
        penalized,
        alpha,
        tol,
        step_scale,
        factor: RefCell::new(None),
    };

    let mut theta = DVector::zeros(q);
    let mut resid = c.clone();

    // Fit unpenalized columns alone: the all-penalized-zero starting point.
    let free: Vec<usize> = (0..q).filter(|&k| !solver.penalized[k]).collect();
    if !free.is_empty() {
        let mut sweeps = 0;
        loop {
            let step = solver.sweep(&free, f64::INFINITY, &mut theta, &mut resid);
            sweeps += 1;
            if step < tol {
                break;
            }
            if sweeps >= max_sweeps {
                return Err(Error::Convergence {
                    sweeps,
                    lambda: f64::INFINITY,
                    last_iterate: theta.iter().copied().collect(),
                });
            }
        }
    }
    // |∂ loss / ∂θ_j| = 2|r_j| at the start point
    let max_grad = (0..q)
        .filter(|&k| solver.penalized[k])
        .map(|k| 2.0 * resid[k].abs())
        .fold(0.0, f64::max);
    let lambda_max = max_grad / alpha.max(1e-3) * (1.0 + LAMBDA_MAX_SLACK);
    let lambdas = lambda_grid.resolve(lambda_max);

    let unpack = |theta: &DVector<f64>| -> (f64, DVector<f64>) {
        let mut beta = DVector::zeros(p);
        let mut intercept = y_mean;
        for (k, &j) in gram.included.iter().enumerate() {
            let b = theta[k] / gram.scales[k];
            beta[j] = b;
            intercept -= gram.means[k] * b;
        }
        if !gram.intercept {
            intercept = 0.0;
        }
        (intercept, beta)
    };

    let mut result = PathResult {
        lambdas: lambdas.clone(),
        intercepts: Vec::with_capacity(lambdas.len()),
        coefficients: Vec::with_capacity(lambdas.len()),
        df: Vec::with_capacity(lambdas.len()),
        rss: Vec::with_capacity(lambdas.len()),
        sweeps: Vec::with_capacity(lambdas.len()),
        n,
        chosen: 0,
    };
    // The start point satisfies the optimality conditions at any λ ≥ λ_max;
    // re-solving there could only let rounding leak into penalized columns.
    let (start_theta, start_resid) = (theta.clone(), resid.clone());
    for &lambda in &lambdas {
        let sweeps = if lambda >= lambda_max {
            theta.copy_from(&start_theta);
            resid.copy_from(&start_resid);
            0
        } else {
            solver
                .solve(lambda, max_sweeps, yy, &c, &mut theta, &mut resid)
                .map_err(|sweeps| Error::Convergence {
                    sweeps,
                    lambda,
                    last_iterate: unpack(&theta).1.iter().copied().collect(),
                })?
        };
        let rss = (yy - theta.dot(&(&c + &resid))).max(0.0);
        let nonzero = theta.iter().filter(|v| **v != 0.0).count();
        let (b0, beta) = unpack(&theta);
        result.intercepts.push(b0);
        result.coefficients.push(beta);
        result.df.push(nonzero + usize::from(gram.intercept));
        result.rss.push(rss);
        result.sweeps.push(sweeps);
    }
    result.chosen = select_by_aic(&result.rss, &result.df, n);
    Ok(result)
}

/// Solves the problem over its lambda path, warm-starting each level from
/// the previous one, and picks a level by AIC.
pub fn fit_path(problem: &ShrinkageProblem<'_>) -> Result<PathResult> {
    problem.validate()?;
    let gram = WeightedGram::new(
        problem.x,
        problem.weights,
        problem.intercept,
        problem.standardize,
    );
    fit_path_with_gram(
        &gram,
        problem.y,
        problem.alpha,
        &problem.lambda_grid,
        problem.penalize.as_deref(),
        problem.tol,
        problem.max_sweeps,
    )
}

/// Largest lambda with a nonzero penalized coefficient; at or above it the
/// solution is all-zero on the penalized columns.
pub fn lambda_max(problem: &ShrinkageProblem<'_>) -> Result<f64> {
    let probe = ShrinkageProblem {
        lambda_grid: LambdaGrid::Relative {
            count: 1,
            min_ratio: 0.5,
        },
        ..problem.clone()
    };
    Ok(fit_path(&probe)?.lambdas[0])
}
