//! Linear conditional quantile regression.
//!
//! Each `(outcome, level)` cell is fitted by minimizing the pinball loss with
//! a dense vertex-to-vertex simplex in the style of Barrodale and Roberts:
//! the current iterate always interpolates `p_x` observations (the basis);
//! each step moves along the edge that releases one basis observation, with an
//! exact weighted-median line search picking the observation that enters.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{invalid_arg, Error, Result};

/// Interior probability points `0 < tau_1 < ... < tau_{D-1} < 1` together with
/// the jumps `nu_s = tau_s - tau_{s-1}` for `s = 1..=D`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    taus: Vec<f64>,
    nus: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(invalid_arg(
                "quantile grid needs at least one interior level",
            ));
        }
        if taus.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(invalid_arg(format!(
                "quantile levels must lie in (0, 1): {taus:?}"
            )));
        }
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid_arg(format!(
                "quantile levels must be strictly increasing: {taus:?}"
            )));
        }
        let mut nus = Vec::with_capacity(taus.len() + 1);
        let mut prev = 0.0;
        for &t in &taus {
            nus.push(t - prev);
            prev = t;
        }
        nus.push(1.0 - prev);
        Ok(QuantileGrid { taus, nus })
    }

    /// Evenly spaced grid `tau_s = s / D`.
    pub fn even(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(invalid_arg(format!("need D >= 2 levels, got {levels}")));
        }
        QuantileGrid::new((1..levels).map(|s| s as f64 / levels as f64).collect())
    }

    /// Interior levels `tau_1..tau_{D-1}`.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// Jumps `nu_1..nu_D`.
    pub fn nus(&self) -> &[f64] {
        &self.nus
    }

    /// `D`, the number of cells per margin.
    pub fn levels(&self) -> usize {
        self.nus.len()
    }

    /// Degrees of freedom of the null chi-square law, `(D-1)^2`.
    pub fn null_df(&self) -> u32 {
        let d = self.levels() as u32 - 1;
        d * d
    }

    pub fn min_nu(&self) -> f64 {
        self.nus.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_nu(&self) -> f64 {
        self.nus.iter().copied().fold(0.0, f64::max)
    }
}

/// Coefficients and (non-crossing) fitted quantiles for every outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFits {
    /// `betas[i][s]` is the coefficient vector for outcome `i`, interior level `s`.
    betas: Vec<Vec<Vec<f64>>>,
    /// `qhat[i]` is row-major `n x (D-1)`.
    qhat: Vec<Vec<f64>>,
    n: usize,
    interior: usize,
}

impl QuantileFits {
    pub fn beta(&self, outcome: usize, level: usize) -> &[f64] {
        &self.betas[outcome][level]
    }

    /// Post-swap fitted quantiles of subject `k` for outcome `i`.
    pub fn row(&self, outcome: usize, subject: usize) -> &[f64] {
        let m = self.interior;
        &self.qhat[outcome][subject * m..(subject + 1) * m]
    }

    /// Row-major `n x (D-1)` fitted quantiles for one outcome.
    pub fn outcome_quantiles(&self, outcome: usize) -> &[f64] {
        &self.qhat[outcome]
    }

    pub fn p(&self) -> usize {
        self.qhat.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn interior_levels(&self) -> usize {
        self.interior
    }
}

/// Pinball loss `sum_k rho_tau(y_k - x_k' beta)`.
pub fn pinball_objective(y: &[f64], x: &DMatrix<f64>, beta: &[f64], tau: f64) -> f64 {
    (0..y.len())
        .map(|k| {
            let fit: f64 = (0..x.ncols()).map(|j| x[(k, j)] * beta[j]).sum();
            let r = y[k] - fit;
            if r < 0.0 {
                r * (tau - 1.0)
            } else {
                r * tau
            }
        })
        .sum()
}

/// Checks shape, intercept and rank of a design for quantile fitting.
pub fn validate_design(x: &DMatrix<f64>) -> Result<()> {
    let (n, px) = x.shape();
    if px == 0 {
        return Err(invalid_arg("design has no columns"));
    }
    if n <= px {
        return Err(Error::InsufficientData(format!(
            "n = {n} must exceed p_x = {px}"
        )));
    }
    if x.column(0).iter().any(|&v| v != 1.0) {
        return Err(invalid_arg("first design column must be identically 1"));
    }
    if initial_basis(x).is_none() {
        return Err(Error::SingularDesign(format!(
            "design of {n} x {px} does not have full column rank"
        )));
    }
    Ok(())
}

/// Minimizes the pinball loss at level `tau`; returns an LP-vertex solution.
pub fn fit_pinball(y: &[f64], x: &DMatrix<f64>, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid_arg(format!("tau = {tau} outside (0, 1)")));
    }
    if y.len() != x.nrows() {
        return Err(invalid_arg(format!(
            "response has {} values but design has {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "response contains non-finite values".into(),
        ));
    }
    validate_design(x)?;
    solve_pinball(y, x, tau)
}

/// Greedy selection of `p_x` linearly independent rows in index order.
fn initial_basis(x: &DMatrix<f64>) -> Option<Vec<usize>> {
    let (n, px) = x.shape();
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(px);
    let mut rows = Vec::with_capacity(px);
    for k in 0..n {
        let row = x.row(k).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for q in &accepted {
            let c = q.dot(&v);
            v -= q * c;
        }
        let rn = v.norm();
        if rn > 1e-9 * norm {
            accepted.push(v / rn);
            rows.push(k);
            if rows.len() == px {
                return Some(rows);
            }
        }
    }
    None
}

fn row_dot(x: &DMatrix<f64>, k: usize, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (j, vj) in v.iter().enumerate() {
        s += x[(k, j)] * vj;
    }
    s
}

/// Directional derivative contribution of a non-basic observation whose
/// residual moves as `r - t * g`.
#[inline]
fn edge_slope(r: f64, g: f64, tau: f64, zero_tol: f64) -> f64 {
    if r.abs() <= zero_tol {
        ((1.0 - tau) * g).max(-tau * g)
    } else if r > 0.0 {
        -tau * g
    } else {
        (1.0 - tau) * g
    }
}

pub(crate) fn solve_pinball(y: &[f64], x: &DMatrix<f64>, tau: f64) -> Result<Vec<f64>> {
    let (n, px) = x.shape();
    if y.iter().all(|&v| v == y[0]) {
        let mut beta = vec![0.0; px];
        beta[0] = y[0];
        return Ok(beta);
    }
    let mut basis =
        initial_basis(x).ok_or_else(|| Error::SingularDesign("rank-deficient design".into()))?;
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-11 * scale;

    let mut in_basis = vec![false; n];
    let mut resid = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut cands: Vec<(f64, usize)> = Vec::with_capacity(n);
    let max_iter = 50 * n + 100;

    for _ in 0..max_iter {
        let a = DMatrix::from_fn(px, px, |r, c| x[(basis[r], c)]);
        let inv = a
            .try_inverse()
            .ok_or_else(|| Error::Numeric("basis matrix became singular".into()))?;
        let yh = DVector::from_iterator(px, basis.iter().map(|&k| y[k]));
        let beta: Vec<f64> = (&inv * yh).iter().copied().collect();

        in_basis.iter_mut().for_each(|b| *b = false);
        for &k in &basis {
            in_basis[k] = true;
        }
        for k in 0..n {
            resid[k] = if in_basis[k] {
                0.0
            } else {
                y[k] - row_dot(x, k, &beta)
            };
        }

        // steepest edge; ties go to the lowest basis position, "+" before "-"
        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..px {
            let d: Vec<f64> = inv.column(j).iter().copied().collect();
            let mut plus = 1.0 - tau;
            let mut minus = tau;
            let mut mass = 1.0;
            for k in 0..n {
                if in_basis[k] {
                    continue;
                }
                let gk = row_dot(x, k, &d);
                plus += edge_slope(resid[k], gk, tau, zero_tol);
                minus += edge_slope(resid[k], -gk, tau, zero_tol);
                mass += gk.abs();
            }
            let tol = 1e-12 * mass;
            for (slope, sign) in [(plus, 1.0), (minus, -1.0)] {
                if slope < -tol && best.is_none_or(|(b, _, _)| slope < b) {
                    best = Some((slope, j, sign));
                }
            }
        }
        let Some((slope0, j, sign)) = best else {
            return Ok(beta);
        };

        let d: Vec<f64> = inv.column(j).iter().map(|v| v * sign).collect();
        let mut gmax = 0.0f64;
        for k in 0..n {
            g[k] = if in_basis[k] { 0.0 } else { row_dot(x, k, &d) };
            gmax = gmax.max(g[k].abs());
        }
        let gtol = 1e-10 * gmax;
        cands.clear();
        for k in 0..n {
            if in_basis[k] || resid[k].abs() <= zero_tol || g[k].abs() <= gtol {
                continue;
            }
            let t = resid[k] / g[k];
            if t > 0.0 {
                cands.push((t, k));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut slope = slope0;
        let mut entering = None;
        for &(_, k) in &cands {
            slope += g[k].abs();
            if slope >= 0.0 {
                entering = Some(k);
                break;
            }
        }
        // round-off can leave the running slope a hair below zero at the end
        let entering = entering
            .or_else(|| cands.last().map(|c| c.1))
            .ok_or_else(|| Error::Numeric("pinball objective unbounded along an edge".into()))?;
        basis[j] = entering;
    }
    Err(Error::Numeric(format!(
        "simplex did not converge in {max_iter} pivots"
    )))
}

/// Sorts fitted quantiles of one subject so that levels do not cross.
pub fn enforce_noncrossing(qstar: &[f64]) -> Vec<f64> {
    let mut out = qstar.to_vec();
    out.sort_by(f64::total_cmp);
    out
}

/// Fits every `(outcome, level)` cell and repairs quantile crossing per subject.
pub fn fit_all(dataset: &Dataset, grid: &QuantileGrid) -> Result<QuantileFits> {
    let x = dataset.design();
    validate_design(x)?;
    let n = dataset.n();
    let m = grid.taus().len();

    // per outcome: coefficients by level, and the repaired fitted values
    type OutcomeFit = (Vec<Vec<f64>>, Vec<f64>);
    let per_outcome: Vec<Result<OutcomeFit>> = (0..dataset.p())
        .into_par_iter()
        .map(|i| {
            let y = dataset.outcome(i);
            let mut betas = Vec::with_capacity(m);
            for (s, &tau) in grid.taus().iter().enumerate() {
                let beta = solve_pinball(y, x, tau).map_err(|e| Error::Fit {
                    outcome: i,
                    level: s + 1,
                    source: Box::new(e),
                })?;
                betas.push(beta);
            }
            let mut q = vec![0.0; n * m];
            for k in 0..n {
                let row = &mut q[k * m..(k + 1) * m];
                for (s, beta) in betas.iter().enumerate() {
                    row[s] = row_dot(x, k, beta);
                }
                row.sort_by(f64::total_cmp);
            }
            Ok((betas, q))
        })
        .collect();

    let mut betas = Vec::with_capacity(dataset.p());
    let mut qhat = Vec::with_capacity(dataset.p());
    for r in per_outcome {
        let (b, q) = r?;
        betas.push(b);
        qhat.push(q);
    }
    Ok(QuantileFits {
        betas,
        qhat,
        n,
        interior: m,
    })
}

/// Number of observations at or below the pre-swap fitted hyperplane.
pub fn sign_count(y: &[f64], x: &DMatrix<f64>, beta: &[f64]) -> usize {
    (0..y.len())
        .filter(|&k| y[k] <= row_dot(x, k, beta))
        .count()
}

/// Outcome of checking `#{y <= fitted}` against `[tau n - p_x, tau n + p_x]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignCountReport {
    pub checked: usize,
    /// `(outcome, level, count)` for every fit outside the bound.
    pub violations: Vec<(usize, usize, usize)>,
}

impl SignCountReport {
    pub fn merge(&mut self, other: SignCountReport) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
    }
}

pub fn check_sign_counts(
    dataset: &Dataset,
    fits: &QuantileFits,
    grid: &QuantileGrid,
) -> SignCountReport {
    let x = dataset.design();
    let n = dataset.n() as f64;
    let px = dataset.px() as f64;
    let mut report = SignCountReport::default();
    for i in 0..dataset.p() {
        for (s, &tau) in grid.taus().iter().enumerate() {
            let count = sign_count(dataset.outcome(i), x, fits.beta(i, s));
            report.checked += 1;
            let c = count as f64;
            if c < tau * n - px || c > tau * n + px {
                report.violations.push((i, s + 1, count));
            }
        }
    }
    report
}
