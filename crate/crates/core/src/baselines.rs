//! Comparison tests: standardized residual covariance (LIN-DEP), Kendall's
//! tau and Spearman's rho, all feeding the two-sided FDR procedure.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{invalid_arg, Error, Result};
use crate::squac::PairMatrix;

/// OLS residuals of each outcome on the design, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    pub columns: Vec<Vec<f64>>,
}

/// `R_i = Y_i - X (X'X)^{-1} X' Y_i` for every outcome, via a thin QR of `X`.
pub fn ols_residuals(dataset: &Dataset) -> Result<ResidualMatrix> {
    let x = dataset.design();
    let (n, px) = x.shape();
    if n <= px {
        return Err(Error::InsufficientData(format!(
            "n = {n} must exceed p_x = {px}"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let rmax = (0..px).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..px).any(|j| r[(j, j)].abs() <= 1e-10 * rmax.max(1.0)) {
        return Err(Error::SingularDesign("X'X is singular".into()));
    }
    let q = qr.q();
    let columns = dataset
        .outcomes()
        .iter()
        .map(|y| {
            let yv = nalgebra::DVector::from_column_slice(y);
            let proj = &q * (q.transpose() * &yv);
            (yv - proj).iter().copied().collect()
        })
        .collect();
    Ok(ResidualMatrix { columns })
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn lin_dep_centered(ci: &[f64], cj: &[f64]) -> f64 {
    let n = ci.len() as f64;
    let sigma = ci.iter().zip(cj).map(|(a, b)| a * b).sum::<f64>() / n;
    let ss: f64 = ci
        .iter()
        .zip(cj)
        .map(|(a, b)| (a * b - sigma).powi(2))
        .sum();
    let denom = ss.sqrt();
    if denom > 0.0 {
        n * sigma / denom
    } else if sigma == 0.0 {
        0.0
    } else {
        sigma.signum() * f64::INFINITY
    }
}

/// Standardized residual covariance `n sigma_ij / sqrt(sum_k (c_k - sigma_ij)^2)`
/// where `c_k` are centered cross-products.
///
/// Identical nonzero cross-products give a signed infinite sentinel.
pub fn lin_dep_stat(ri: &[f64], rj: &[f64]) -> Result<f64> {
    if ri.len() != rj.len() {
        return Err(invalid_arg("residual vectors differ in length"));
    }
    if ri.len() < 3 {
        return Err(Error::InsufficientData("LIN-DEP needs n >= 3".into()));
    }
    Ok(lin_dep_centered(&centered(ri), &centered(rj)))
}

pub fn lin_dep_matrix(residuals: &ResidualMatrix) -> Result<PairMatrix> {
    let p = residuals.columns.len();
    if residuals.columns.first().is_some_and(|c| c.len() < 3) {
        return Err(Error::InsufficientData("LIN-DEP needs n >= 3".into()));
    }
    let cen: Vec<Vec<f64>> = residuals.columns.iter().map(|c| centered(c)).collect();
    Ok(fill_pairs(p, |i, j| lin_dep_centered(&cen[i], &cen[j])))
}

fn fill_pairs<F>(p: usize, f: F) -> PairMatrix
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| (i + 1..p).map(|j| f(i, j)).collect())
        .collect();
    let mut m = PairMatrix::zeros(p);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            m.set(i, i + 1 + off, v);
        }
    }
    m
}

/// Dense 0-based ranks (ties share a rank) and the order sorting the values.
#[derive(Debug, Clone)]
struct RankPrep {
    order: Vec<usize>,
    dense: Vec<usize>,
    distinct: usize,
}

impl RankPrep {
    fn new(y: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
        let mut dense = vec![0; y.len()];
        let mut rank = 0;
        for (pos, &k) in order.iter().enumerate() {
            if pos > 0 && y[k] != y[order[pos - 1]] {
                rank += 1;
            }
            dense[k] = rank;
        }
        RankPrep {
            order,
            dense,
            distinct: if y.is_empty() { 0 } else { rank + 1 },
        }
    }
}

/// Number of pairs strictly increasing in both coordinates, `O(n log n)`.
fn concordant_pairs(pi: &RankPrep, pj: &RankPrep, tree: &mut Vec<u32>) -> u64 {
    let m = pj.distinct;
    tree.clear();
    tree.resize(m + 1, 0);
    let mut total = 0u64;
    let order = &pi.order;
    let mut start = 0;
    while start < order.len() {
        let rank_i = pi.dense[order[start]];
        let mut end = start;
        while end < order.len() && pi.dense[order[end]] == rank_i {
            end += 1;
        }
        for &k in &order[start..end] {
            // Fenwick prefix over ranks strictly below this one
            let mut idx = pj.dense[k];
            while idx > 0 {
                total += tree[idx] as u64;
                idx &= idx - 1;
            }
        }
        for &k in &order[start..end] {
            let mut idx = pj.dense[k] + 1;
            while idx <= m {
                tree[idx] += 1;
                idx += idx & idx.wrapping_neg();
            }
        }
        start = end;
    }
    total
}

fn kendall_from_concordant(n: usize, nc: u64) -> f64 {
    let nf = n as f64;
    let total = nf * (nf - 1.0) / 2.0;
    let nd = total - nc as f64;
    let tau = 2.0 * (nc as f64 - nd) / (nf * (nf - 1.0));
    tau * (9.0 * nf * (nf - 1.0) / (2.0 * (2.0 * nf + 5.0))).sqrt()
}

/// Standardized Kendall statistic. A pair counts as concordant only when
/// both coordinates strictly increase together; every other pair (ties
/// included) counts as discordant.
pub fn kendall_stat(yi: &[f64], yj: &[f64]) -> Result<f64> {
    check_rank_inputs(yi, yj)?;
    let nc = concordant_pairs(&RankPrep::new(yi), &RankPrep::new(yj), &mut Vec::new());
    Ok(kendall_from_concordant(yi.len(), nc))
}

pub fn kendall_matrix(outcomes: &[Vec<f64>]) -> Result<PairMatrix> {
    if let Some(first) = outcomes.first() {
        check_rank_inputs(first, first)?;
    }
    let preps: Vec<RankPrep> = outcomes.iter().map(|y| RankPrep::new(y)).collect();
    let n = outcomes.first().map_or(0, Vec::len);
    Ok(fill_pairs(outcomes.len(), |i, j| {
        let mut tree = Vec::new();
        kendall_from_concordant(n, concordant_pairs(&preps[i], &preps[j], &mut tree))
    }))
}

fn check_rank_inputs(yi: &[f64], yj: &[f64]) -> Result<()> {
    if yi.len() != yj.len() {
        return Err(invalid_arg("outcome vectors differ in length"));
    }
    if yi.len() < 3 {
        return Err(Error::InsufficientData(
            "rank statistics need n >= 3".into(),
        ));
    }
    if yi.iter().chain(yj).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in outcome".into()));
    }
    Ok(())
}

/// 1-based ranks with ties replaced by their average rank.
pub fn tied_ranks(y: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0.0; y.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && y[order[end]] == y[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

fn spearman_from_ranks(ri: &[f64], rj: &[f64]) -> f64 {
    let n = ri.len() as f64;
    let d2: f64 = ri.iter().zip(rj).map(|(a, b)| (a - b) * (a - b)).sum();
    let rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
    let one_minus = 1.0 - rho * rho;
    if one_minus <= 0.0 {
        rho.signum() * f64::INFINITY
    } else {
        (n - 2.0).sqrt() * rho / one_minus.sqrt()
    }
}

/// Spearman's rho from tied ranks, transformed to `sqrt(n-2) rho / sqrt(1 - rho^2)`.
/// `|rho| = 1` gives a signed infinite sentinel.
pub fn spearman_stat(yi: &[f64], yj: &[f64]) -> Result<f64> {
    check_rank_inputs(yi, yj)?;
    Ok(spearman_from_ranks(&tied_ranks(yi), &tied_ranks(yj)))
}

/// Spearman's rho itself (before the t transform).
pub fn spearman_rho(yi: &[f64], yj: &[f64]) -> Result<f64> {
    check_rank_inputs(yi, yj)?;
    let (ri, rj) = (tied_ranks(yi), tied_ranks(yj));
    let n = yi.len() as f64;
    let d2: f64 = ri.iter().zip(&rj).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

pub fn spearman_matrix(outcomes: &[Vec<f64>]) -> Result<PairMatrix> {
    if let Some(first) = outcomes.first() {
        check_rank_inputs(first, first)?;
    }
    let ranks: Vec<Vec<f64>> = outcomes.iter().map(|y| tied_ranks(y)).collect();
    Ok(fill_pairs(outcomes.len(), |i, j| {
        spearman_from_ranks(&ranks[i], &ranks[j])
    }))
}
