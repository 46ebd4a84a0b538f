//! Sample-quantile contingency tables and the SQUAC statistic.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{invalid_arg, Error, Result};
use crate::quantreg::{QuantileFits, QuantileGrid};

/// Gaps between fitted quantiles below this are reported as collapsed levels.
pub const COLLAPSED_GAP: f64 = 1e-12;

/// Symmetric `p x p` matrix of pairwise statistics; the diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    p: usize,
    values: Vec<f64>,
}

impl PairMatrix {
    pub fn zeros(p: usize) -> Self {
        PairMatrix {
            p,
            values: vec![0.0; p * p],
        }
    }

    /// Builds a matrix from upper-triangle values listed in `(0,1), (0,2), ..., (p-2,p-1)` order.
    pub fn from_upper(p: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != p * p.saturating_sub(1) / 2 {
            return Err(invalid_arg(format!(
                "{} values do not fill the upper triangle of a {p} x {p} matrix",
                upper.len()
            )));
        }
        let mut m = PairMatrix::zeros(p);
        for ((i, j), &v) in upper_pairs(p).zip(upper) {
            m.set(i, j, v);
        }
        Ok(m)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.p + j] = v;
        self.values[j * self.p + i] = v;
    }

    /// `((i, j), value)` for `i < j` in row-major order.
    pub fn upper(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        upper_pairs(self.p).map(move |(i, j)| ((i, j), self.get(i, j)))
    }

    pub fn pair_count(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }
}

/// All `(i, j)` with `i < j < p`, row-major.
pub fn upper_pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |i| (i + 1..p).map(move |j| (i, j)))
}

/// SQUAC statistics for every outcome pair, with the grid and sample size used.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistics {
    pub values: PairMatrix,
    pub grid: QuantileGrid,
    pub n: usize,
}

impl PairStatistics {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn p(&self) -> usize {
        self.values.p()
    }
}

/// Observed counts `O_st` and expected counts `E_st = n nu_s nu_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquacTable {
    levels: usize,
    counts: Vec<u64>,
    expected: Vec<f64>,
    n: usize,
}

impl SquacTable {
    fn empty(grid: &QuantileGrid, n: usize) -> Self {
        let nus = grid.nus();
        let d = grid.levels();
        let expected = (0..d * d)
            .map(|c| n as f64 * nus[c / d] * nus[c % d])
            .collect();
        SquacTable {
            levels: d,
            counts: vec![0; d * d],
            expected,
            n,
        }
    }

    /// Table from explicit counts (row `s`, column `t`, row-major).
    pub fn from_counts(counts: Vec<u64>, grid: &QuantileGrid) -> Result<Self> {
        let d = grid.levels();
        if counts.len() != d * d {
            return Err(invalid_arg(format!(
                "expected {} cells, got {}",
                d * d,
                counts.len()
            )));
        }
        let n = counts.iter().sum::<u64>() as usize;
        let mut t = SquacTable::empty(grid, n);
        t.counts = counts;
        Ok(t)
    }

    pub fn count(&self, s: usize, t: usize) -> u64 {
        self.counts[s * self.levels + t]
    }

    pub fn expected(&self, s: usize, t: usize) -> f64 {
        self.expected[s * self.levels + t]
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Cell of `y` given one subject's sorted fitted quantiles: the `s` (0-based)
/// with `q[s-1] < y <= q[s]`, using -inf / +inf sentinels at the ends.
#[inline]
pub fn cell_index(y: f64, row: &[f64]) -> usize {
    row.partition_point(|&q| q < y)
}

fn check_rows(q: &[f64], m: usize, n: usize, which: &str) -> Result<()> {
    if q.len() != n * m {
        return Err(invalid_arg(format!(
            "{which}: {} fitted values, expected {n} x {m}",
            q.len()
        )));
    }
    for (k, row) in q.chunks_exact(m).enumerate() {
        if row.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidFit(format!(
                "{which}: fitted quantiles cross for subject {k}"
            )));
        }
    }
    Ok(())
}

/// Bins every subject of one outcome into its cell.
fn bin_outcome(y: &[f64], q: &[f64], m: usize) -> Vec<u8> {
    y.iter()
        .zip(q.chunks_exact(m))
        .map(|(&v, row)| cell_index(v, row) as u8)
        .collect()
}

fn has_collapsed_levels(q: &[f64], m: usize) -> bool {
    q.chunks_exact(m)
        .any(|row| row.windows(2).any(|w| w[1] - w[0] < COLLAPSED_GAP))
}

/// Builds the `D x D` table for one pair. `qi` and `qj` are row-major `n x (D-1)`.
pub fn build_table(
    yi: &[f64],
    yj: &[f64],
    qi: &[f64],
    qj: &[f64],
    grid: &QuantileGrid,
) -> Result<SquacTable> {
    let n = yi.len();
    if yj.len() != n {
        return Err(invalid_arg("outcome vectors differ in length"));
    }
    let m = grid.taus().len();
    check_rows(qi, m, n, "first outcome")?;
    check_rows(qj, m, n, "second outcome")?;
    let mut table = SquacTable::empty(grid, n);
    let d = grid.levels();
    for k in 0..n {
        let s = cell_index(yi[k], &qi[k * m..(k + 1) * m]);
        let t = cell_index(yj[k], &qj[k * m..(k + 1) * m]);
        table.counts[s * d + t] += 1;
    }
    Ok(table)
}

/// Pearson-form sum `sum_{s,t} (O_st - E_st)^2 / E_st`.
pub fn squac_statistic(table: &SquacTable) -> f64 {
    table
        .counts
        .iter()
        .zip(&table.expected)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum()
}

/// Statistic from pre-binned cell indices.
fn statistic_from_bins(
    bi: &[u8],
    bj: &[u8],
    d: usize,
    expected: &[f64],
    counts: &mut [u32],
) -> f64 {
    counts.iter_mut().for_each(|c| *c = 0);
    for (&s, &t) in bi.iter().zip(bj) {
        counts[s as usize * d + t as usize] += 1;
    }
    counts
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum()
}

/// SQUAC statistics for all `p (p - 1) / 2` pairs.
///
/// Each outcome is binned once; every pair then costs one pass over the subjects.
pub fn all_pair_statistics(
    dataset: &Dataset,
    fits: &QuantileFits,
    grid: &QuantileGrid,
) -> Result<PairStatistics> {
    let p = dataset.p();
    let n = dataset.n();
    let m = grid.taus().len();
    if fits.p() != p || fits.n() != n || fits.interior_levels() != m {
        return Err(invalid_arg("fits do not match the dataset and grid"));
    }
    if grid.levels() > u8::MAX as usize {
        return Err(invalid_arg("at most 255 quantile cells are supported"));
    }
    let mut bins = Vec::with_capacity(p);
    for i in 0..p {
        let q = fits.outcome_quantiles(i);
        check_rows(q, m, n, &format!("outcome {i}"))?;
        if has_collapsed_levels(q, m) {
            log::warn!(
                "outcome {i}: fitted quantile levels collapse (gap < {COLLAPSED_GAP:e}); \
                 statistics for every pair involving it are inflated"
            );
        }
        bins.push(bin_outcome(dataset.outcome(i), q, m));
    }
    let d = grid.levels();
    let expected = SquacTable::empty(grid, n).expected;

    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let mut counts = vec![0u32; d * d];
            (i + 1..p)
                .map(|j| statistic_from_bins(&bins[i], &bins[j], d, &expected, &mut counts))
                .collect()
        })
        .collect();
    let mut values = PairMatrix::zeros(p);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            values.set(i, i + 1 + off, v);
        }
    }
    Ok(PairStatistics {
        values,
        grid: grid.clone(),
        n,
    })
}

/// Plug-in sample average of the standardized joint-exceedance product for
/// cell `(s, t)` (1-based). A diagnostic only: it uses fitted, not true, quantiles.
pub fn empirical_gamma(
    yi: &[f64],
    yj: &[f64],
    qi: &[f64],
    qj: &[f64],
    grid: &QuantileGrid,
    s: usize,
    t: usize,
) -> Result<f64> {
    let d = grid.levels();
    if !(1..=d).contains(&s) || !(1..=d).contains(&t) {
        return Err(invalid_arg(format!("cell ({s}, {t}) outside 1..={d}")));
    }
    let n = yi.len();
    if yj.len() != n || n == 0 {
        return Err(invalid_arg(
            "outcome vectors must be non-empty and equal length",
        ));
    }
    let m = grid.taus().len();
    check_rows(qi, m, n, "first outcome")?;
    check_rows(qj, m, n, "second outcome")?;
    let (nu_s, nu_t) = (grid.nus()[s - 1], grid.nus()[t - 1]);
    let norm = (nu_s * nu_t).sqrt();
    let sum: f64 = (0..n)
        .map(|k| {
            let a = (cell_index(yi[k], &qi[k * m..(k + 1) * m]) == s - 1) as u8 as f64 - nu_s;
            let b = (cell_index(yj[k], &qj[k * m..(k + 1) * m]) == t - 1) as u8 as f64 - nu_t;
            a * b / norm
        })
        .sum();
    Ok(sum / n as f64)
}
