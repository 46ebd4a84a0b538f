//! Association networks from real data and their cohort comparison.

use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fdr::control_fdr;
use crate::quantreg::{fit_all, QuantileGrid};
use crate::squac::all_pair_statistics;

/// One outcome pair of an inferred network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Outcome indices, `i < j` in input column order.
    pub i: usize,
    pub j: usize,
    pub statistic: f64,
    pub surrogate_p: f64,
    pub rejected: bool,
}

/// Every tested pair, sorted by descending statistic (ties by pair order).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub outcome_names: Vec<String>,
    pub edges: Vec<Edge>,
    pub t_hat: f64,
    pub levels: usize,
}

impl Network {
    /// Rejected pairs in row-major order.
    pub fn rejected(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| e.rejected)
            .map(|e| (e.i, e.j))
            .collect()
    }

    /// Number of rejected edges at each outcome.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.outcome_names.len()];
        for e in self.edges.iter().filter(|e| e.rejected) {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }
}

/// Fits every outcome, computes all pair statistics and applies FDR control.
pub fn infer_network(dataset: &Dataset, grid: &QuantileGrid, alpha: f64) -> Result<Network> {
    let fits = fit_all(dataset, grid)?;
    let stats = all_pair_statistics(dataset, &fits, grid)?;
    let outcome = control_fdr(&stats, alpha)?;
    let mut edges: Vec<Edge> = stats
        .values
        .upper()
        .map(|((i, j), t)| Edge {
            i,
            j,
            statistic: t,
            surrogate_p: outcome.surrogate_p.get(i, j),
            rejected: outcome.is_rejected(i, j),
        })
        .collect();
    edges.sort_by(|a, b| {
        b.statistic
            .total_cmp(&a.statistic)
            .then((a.i, a.j).cmp(&(b.i, b.j)))
    });
    Ok(Network {
        outcome_names: dataset.outcome_names().to_vec(),
        edges,
        t_hat: outcome.t_hat,
        levels: grid.levels(),
    })
}

/// Edges present in exactly one of two networks, plus degree changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferentialReport {
    pub outcome_names: Vec<String>,
    pub differential_edges: BTreeSet<(usize, usize)>,
    /// `(outcome, |degree_a - degree_b|)`, largest first, ties by outcome index.
    pub degree_diff: Vec<(usize, usize)>,
}

/// Compares two networks over the same outcomes.
pub fn diff_networks(a: &Network, b: &Network) -> Result<DifferentialReport> {
    if a.outcome_names != b.outcome_names {
        let only_a: Vec<&str> = a
            .outcome_names
            .iter()
            .filter(|n| !b.outcome_names.contains(n))
            .map(String::as_str)
            .collect();
        let only_b: Vec<&str> = b
            .outcome_names
            .iter()
            .filter(|n| !a.outcome_names.contains(n))
            .map(String::as_str)
            .collect();
        let detail = if only_a.is_empty() && only_b.is_empty() {
            "same columns in a different order".to_string()
        } else {
            format!(
                "only in A: [{}]; only in B: [{}]",
                only_a.join(", "),
                only_b.join(", ")
            )
        };
        return Err(Error::InvalidInput(format!(
            "outcome columns differ between cohorts: {detail}"
        )));
    }
    let ra = a.rejected();
    let rb = b.rejected();
    let differential_edges = ra.symmetric_difference(&rb).copied().collect();
    let (da, db) = (a.degrees(), b.degrees());
    let mut degree_diff: Vec<(usize, usize)> = da
        .iter()
        .zip(&db)
        .map(|(x, y)| x.abs_diff(*y))
        .enumerate()
        .collect();
    degree_diff.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    Ok(DifferentialReport {
        outcome_names: a.outcome_names.clone(),
        differential_edges,
        degree_diff,
    })
}

/// Infers each cohort's network separately, with its own covariates, and diffs them.
pub fn compare_cohorts(
    a: &Dataset,
    b: &Dataset,
    grid: &QuantileGrid,
    alpha: f64,
) -> Result<(Network, Network, DifferentialReport)> {
    if a.outcome_names() != b.outcome_names() {
        // fail before the expensive fits
        let stub = |d: &Dataset| Network {
            outcome_names: d.outcome_names().to_vec(),
            edges: vec![],
            t_hat: 0.0,
            levels: grid.levels(),
        };
        diff_networks(&stub(a), &stub(b))?;
    }
    let na = infer_network(a, grid, alpha)?;
    let nb = infer_network(b, grid, alpha)?;
    let report = diff_networks(&na, &nb)?;
    Ok((na, nb, report))
}
