//! Threshold search for simultaneous pairwise tests with FDR control.
//!
//! Statistics above a search cap are rejected outright; the rest are ranked
//! and scanned Benjamini-Hochberg style from the smallest upward until the
//! scaled tail probability `q G(T) / (r + l)` drops to `alpha`.

use crate::error::{invalid_arg, Error, Result};
use crate::specialfn::{chi2_sf, normal_sf, student_t_sf};
use crate::squac::{upper_pairs, PairMatrix, PairStatistics};

/// Threshold, rejection set and surrogate p-values of one FDR run.
#[derive(Debug, Clone, PartialEq)]
pub struct FdrOutcome {
    /// Rejections are exactly the pairs whose statistic exceeds `t_hat`.
    pub t_hat: f64,
    /// Rejected pairs `(i, j)`, `i < j`, in row-major order.
    pub rejections: Vec<(usize, usize)>,
    /// `G(T_ij)` for every pair.
    pub surrogate_p: PairMatrix,
    pub alpha: f64,
    /// Upper end of the threshold search range.
    pub t_p: f64,
}

impl FdrOutcome {
    pub fn is_rejected(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.rejections.binary_search(&key).is_ok()
    }
}

/// Search cap `4 log(n v p) + ((D-1)^2 - 2) log log(n v p)`.
pub fn threshold_tp(n: usize, p: usize, levels: usize) -> Result<f64> {
    let m = n.max(p);
    if m < 3 {
        return Err(invalid_arg(format!("max(n, p) = {m} must be at least 3")));
    }
    if levels < 2 {
        return Err(invalid_arg(format!("need D >= 2, got {levels}")));
    }
    let m = m as f64;
    let df = ((levels - 1) * (levels - 1)) as f64;
    Ok(4.0 * m.ln() + (df - 2.0) * m.ln().ln())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid_arg(format!("alpha = {alpha} outside (0, 1]")))
    }
}

/// Shared pre-threshold + step-up scan.
///
/// `values` lists upper-triangle statistics in row-major order; `+inf` is a
/// valid entry and is always rejected. Returns rejection flags and `t_hat`.
pub(crate) fn step_up<F>(values: &[f64], cap: f64, alpha: f64, tail: F) -> (Vec<bool>, f64)
where
    F: Fn(f64) -> f64,
{
    let q = values.len() as f64;
    let mut rejected = vec![false; values.len()];
    let mut candidates = Vec::with_capacity(values.len());
    for (idx, &v) in values.iter().enumerate() {
        if v > cap {
            rejected[idx] = true;
        } else {
            candidates.push(idx);
        }
    }
    let r = values.len() - candidates.len();
    // descending by value; equal values keep pair order
    candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut l_star = 0;
    for l in (1..=candidates.len()).rev() {
        let fdr_l = q * tail(values[candidates[l - 1]]) / (r + l) as f64;
        if fdr_l <= alpha {
            l_star = l;
            break;
        }
    }
    for &idx in &candidates[..l_star] {
        rejected[idx] = true;
    }
    let t_hat = if l_star == 0 {
        cap
    } else if l_star < candidates.len() {
        values[candidates[l_star]]
    } else {
        0.0
    };
    (rejected, t_hat)
}

fn outcome_from_flags(
    p: usize,
    flags: &[bool],
    surrogate: Vec<f64>,
    t_hat: f64,
    alpha: f64,
    t_p: f64,
) -> Result<FdrOutcome> {
    let rejections = upper_pairs(p)
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(pair, _)| pair)
        .collect();
    Ok(FdrOutcome {
        t_hat,
        rejections,
        surrogate_p: PairMatrix::from_upper(p, &surrogate)?,
        alpha,
        t_p,
    })
}

/// Runs the FDR procedure on SQUAC statistics with `G_D` the chi-square((D-1)^2) survival function.
pub fn control_fdr(stats: &PairStatistics, alpha: f64) -> Result<FdrOutcome> {
    check_alpha(alpha)?;
    let p = stats.p();
    let values: Vec<f64> = stats.values.upper().map(|(_, v)| v).collect();
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "statistic {bad} is not finite and nonnegative"
        )));
    }
    let t_p = threshold_tp(stats.n, p, stats.grid.levels())?;
    let df = stats.grid.null_df();
    let tail = |t: f64| chi2_sf(df, t).map(f64::from).unwrap_or(0.0);
    let surrogate: Vec<f64> = values.iter().map(|&v| tail(v)).collect();
    let (flags, t_hat) = step_up(&values, t_p, alpha, tail);
    outcome_from_flags(p, &flags, surrogate, t_hat, alpha, t_p)
}

/// Reference null law for a two-sided, approximately pivotal statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailDistribution {
    StandardNormal,
    StudentT { df: u32 },
}

impl TailDistribution {
    /// Two-sided tail `2 P(X > |t|)`; zero for infinite sentinels.
    pub fn two_sided(&self, t: f64) -> f64 {
        let t = t.abs();
        if t.is_infinite() {
            return 0.0;
        }
        let one = match *self {
            TailDistribution::StandardNormal => normal_sf(t).map(f64::from),
            TailDistribution::StudentT { df } => student_t_sf(df, t).map(f64::from),
        };
        (2.0 * one.unwrap_or(0.0)).min(1.0)
    }
}

/// Search cap `sqrt(4 log p - log log p - log log log p)`.
pub fn threshold_bp(p: usize) -> Result<f64> {
    let lp = (p as f64).ln();
    let ll = lp.ln();
    let lll = ll.ln();
    let inner = 4.0 * lp - ll - lll;
    if p < 3 || !inner.is_finite() || !lll.is_finite() || inner <= 0.0 {
        return Err(invalid_arg(format!(
            "p = {p} is too small for the two-sided search cap"
        )));
    }
    Ok(inner.sqrt())
}

/// FDR procedure for signed statistics with symmetric null `tail`.
///
/// Works on `|statistic|`; `+-inf` sentinels are always rejected.
pub fn control_fdr_two_sided(
    stats: &PairMatrix,
    tail: TailDistribution,
    alpha: f64,
) -> Result<FdrOutcome> {
    check_alpha(alpha)?;
    let p = stats.p();
    let b_p = threshold_bp(p)?;
    let values: Vec<f64> = stats.upper().map(|(_, v)| v.abs()).collect();
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("statistic is NaN".into()));
    }
    let surrogate: Vec<f64> = values.iter().map(|&v| tail.two_sided(v)).collect();
    let (flags, t_hat) = step_up(&values, b_p, alpha, |t| tail.two_sided(t));
    outcome_from_flags(p, &flags, surrogate, t_hat, alpha, b_p)
}
