//! Replicated simulation experiments and their summary tables.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{kendall_matrix, lin_dep_matrix, ols_residuals, spearman_matrix};
use crate::dataset::Dataset;
use crate::error::{invalid_arg, Error, Result};
use crate::fdr::{control_fdr, control_fdr_two_sided, FdrOutcome, TailDistribution};
use crate::quantreg::{check_sign_counts, fit_all, QuantileGrid, SignCountReport};
use crate::simgen::{derive_seed, generate, GroundTruth, ScenarioId, SimScenario};
use crate::squac::all_pair_statistics;

/// A multiple-testing method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// SQUAC with an even grid of `levels` cells.
    Squac {
        levels: usize,
    },
    LinDep,
    Kendall,
    Spearman,
}

impl Method {
    pub fn levels(&self) -> Option<usize> {
        match self {
            Method::Squac { levels } => Some(*levels),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Squac { levels } => write!(f, "SQUAC({levels})"),
            Method::LinDep => f.write_str("LIN-DEP"),
            Method::Kendall => f.write_str("KENDALL"),
            Method::Spearman => f.write_str("SPEARMAN"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `squac` (D = 3), `squac(D)`, `lin_dep`, `kendall`, `spearman`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace('-', "_");
        match lower.as_str() {
            "squac" => Ok(Method::Squac { levels: 3 }),
            "lin_dep" | "lindep" => Ok(Method::LinDep),
            "kendall" => Ok(Method::Kendall),
            "spearman" => Ok(Method::Spearman),
            other => other
                .strip_prefix("squac(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&d| d >= 2)
                .map(|levels| Method::Squac { levels })
                .ok_or_else(|| {
                    invalid_arg(format!(
                        "unknown method '{s}' (valid: squac, squac(D), lin_dep, kendall, spearman)"
                    ))
                }),
        }
    }
}

/// Whether the experiment tests dependence given covariates or marginally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dependence {
    /// Outcomes carry covariate effects; SQUAC and LIN-DEP adjust for them.
    Conditional,
    /// Outcomes carry no covariate effects; every method uses an intercept only.
    Marginal,
}

/// Result of running one method on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub outcome: FdrOutcome,
    /// Sign-count check of every quantile fit (SQUAC only).
    pub sign_counts: Option<SignCountReport>,
}

/// Runs `method` on `dataset`. Rank methods ignore the covariates.
pub fn run_method(method: Method, dataset: &Dataset, alpha: f64) -> Result<MethodRun> {
    match method {
        Method::Squac { levels } => {
            let grid = QuantileGrid::even(levels)?;
            let fits = fit_all(dataset, &grid)?;
            let stats = all_pair_statistics(dataset, &fits, &grid)?;
            let outcome = control_fdr(&stats, alpha)?;
            Ok(MethodRun {
                outcome,
                sign_counts: Some(check_sign_counts(dataset, &fits, &grid)),
            })
        }
        Method::LinDep => {
            let stats = lin_dep_matrix(&ols_residuals(dataset)?)?;
            let outcome = control_fdr_two_sided(&stats, TailDistribution::StandardNormal, alpha)?;
            Ok(MethodRun {
                outcome,
                sign_counts: None,
            })
        }
        Method::Kendall => {
            let stats = kendall_matrix(dataset.outcomes())?;
            let outcome = control_fdr_two_sided(&stats, TailDistribution::StandardNormal, alpha)?;
            Ok(MethodRun {
                outcome,
                sign_counts: None,
            })
        }
        Method::Spearman => {
            let df = dataset
                .n()
                .checked_sub(2)
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::InsufficientData("SPEARMAN needs n >= 3".into()))?
                as u32;
            let stats = spearman_matrix(dataset.outcomes())?;
            let outcome = control_fdr_two_sided(&stats, TailDistribution::StudentT { df }, alpha)?;
            Ok(MethodRun {
                outcome,
                sign_counts: None,
            })
        }
    }
}

/// `(fdp, fn)` of a rejection set: false rejections over `max(|R|, 1)`, and
/// the number of truly dependent pairs left unrejected.
pub fn score(rejections: &[(usize, usize)], truth: &GroundTruth, p: usize) -> Result<(f64, usize)> {
    let mut seen = BTreeSet::new();
    for &(i, j) in rejections {
        if !(i < j && j < p) {
            return Err(Error::InvalidInput(format!(
                "rejected pair ({i}, {j}) is outside the pair set for p = {p}"
            )));
        }
        seen.insert((i, j));
    }
    let false_rej = seen.iter().filter(|&&(i, j)| !truth.contains(i, j)).count();
    let fdp = false_rej as f64 / seen.len().max(1) as f64;
    let fn_count = truth
        .dependent_pairs
        .iter()
        .filter(|pair| !seen.contains(pair))
        .count();
    Ok((fdp, fn_count))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub fdp: f64,
    pub false_negatives: usize,
    pub rejected_count: usize,
    pub method: Method,
    pub levels: Option<usize>,
    pub seed: u64,
    pub sign_counts: Option<SignCountReport>,
}

/// Configuration shared by all methods of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experiment {
    /// Scenario template; its seed is the base seed of the replication streams.
    pub scenario: SimScenario,
    pub dependence: Dependence,
    pub reps: usize,
    pub alpha: f64,
}

impl Experiment {
    pub fn new(scenario: SimScenario, dependence: Dependence, reps: usize, alpha: f64) -> Self {
        Experiment {
            scenario,
            dependence,
            reps,
            alpha,
        }
    }

    /// Scenario of replication `rep`.
    pub fn replication(&self, rep: usize) -> SimScenario {
        let s = self
            .scenario
            .with_seed(derive_seed(self.scenario.seed, rep));
        match self.dependence {
            Dependence::Conditional => s,
            Dependence::Marginal => s.marginal(),
        }
    }
}

/// Averages over replications of one method in one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub scenario: ScenarioId,
    pub n: usize,
    pub p: usize,
    pub dependence: Dependence,
    pub alpha: f64,
    /// Mean FDP.
    pub fdr_hat: f64,
    /// Mean number of false non-discoveries.
    pub fn_hat: f64,
    pub reps: Vec<ReplicationResult>,
}

impl Summary {
    /// All sign-count checks of this summary's quantile fits.
    pub fn sign_counts(&self) -> SignCountReport {
        let mut total = SignCountReport::default();
        for r in &self.reps {
            if let Some(s) = &r.sign_counts {
                total.merge(s.clone());
            }
        }
        total
    }
}

fn replicate(exp: &Experiment, rep: usize, methods: &[Method]) -> Result<Vec<ReplicationResult>> {
    let scenario = exp.replication(rep);
    let data = generate(&scenario)?;
    let dataset = data.dataset(exp.dependence == Dependence::Conditional)?;
    methods
        .iter()
        .map(|&method| {
            let run = run_method(method, &dataset, exp.alpha)?;
            let (fdp, false_negatives) = score(&run.outcome.rejections, &data.truth, scenario.p)?;
            Ok(ReplicationResult {
                fdp,
                false_negatives,
                rejected_count: run.outcome.rejections.len(),
                method,
                levels: method.levels(),
                seed: scenario.seed,
                sign_counts: run.sign_counts,
            })
        })
        .collect()
}

/// Runs several methods on the same replicated datasets.
///
/// Any failed replication aborts the whole experiment.
pub fn run_methods(exp: &Experiment, methods: &[Method]) -> Result<Vec<Summary>> {
    if exp.reps == 0 {
        return Err(invalid_arg("reps must be at least 1"));
    }
    if methods.is_empty() {
        return Err(invalid_arg("no methods requested"));
    }
    exp.scenario.validate()?;
    let per_rep: Vec<Result<Vec<ReplicationResult>>> = (0..exp.reps)
        .into_par_iter()
        .map(|rep| {
            replicate(exp, rep, methods).map_err(|e| Error::Replication {
                rep,
                source: Box::new(e),
            })
        })
        .collect();
    let mut per_rep_ok = Vec::with_capacity(exp.reps);
    for r in per_rep {
        per_rep_ok.push(r?);
    }
    Ok(methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let reps: Vec<ReplicationResult> = per_rep_ok.iter().map(|r| r[m].clone()).collect();
            let count = reps.len() as f64;
            // fixed-order sums keep results independent of scheduling
            let fdr_hat = reps.iter().map(|r| r.fdp).sum::<f64>() / count;
            let fn_hat = reps.iter().map(|r| r.false_negatives as f64).sum::<f64>() / count;
            Summary {
                method,
                scenario: exp.scenario.id,
                n: exp.scenario.n,
                p: exp.scenario.p,
                dependence: exp.dependence,
                alpha: exp.alpha,
                fdr_hat,
                fn_hat,
                reps,
            }
        })
        .collect())
}

pub fn run_experiment(exp: &Experiment, method: Method) -> Result<Summary> {
    Ok(run_methods(exp, &[method])?.remove(0))
}

/// Output layout for [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Tsv,
    Markdown,
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> String {
    format!("{:.2}", (x * 100.0).round() / 100.0)
}

/// One row per method, an `FDR`/`FN` column pair per setting.
pub fn emit_table(summaries: &[Summary], format: TableFormat) -> Result<String> {
    if summaries.is_empty() {
        return Err(invalid_arg("no summaries to tabulate"));
    }
    type Setting = (ScenarioId, usize, usize, Dependence);
    let mut settings: Vec<Setting> = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for s in summaries {
        let key = (s.scenario, s.n, s.p, s.dependence);
        if !settings.contains(&key) {
            settings.push(key);
        }
        if !methods.contains(&s.method) {
            methods.push(s.method);
        }
    }
    let uniform_dims = settings
        .iter()
        .all(|k| (k.1, k.2, k.3) == (settings[0].1, settings[0].2, settings[0].3));
    let label = |k: &Setting| {
        if uniform_dims {
            k.0.to_string()
        } else {
            let dep = match k.3 {
                Dependence::Conditional => "cond",
                Dependence::Marginal => "marg",
            };
            format!("{} n={} p={} {dep}", k.0, k.1, k.2)
        }
    };

    let mut header = vec!["method".to_string()];
    for k in &settings {
        header.push(format!("{} FDR", label(k)));
        header.push(format!("{} FN", label(k)));
    }
    let mut rows = Vec::new();
    for m in &methods {
        let mut row = vec![m.to_string()];
        for k in &settings {
            match summaries
                .iter()
                .find(|s| s.method == *m && (s.scenario, s.n, s.p, s.dependence) == *k)
            {
                Some(s) => {
                    row.push(round2(s.fdr_hat));
                    row.push(round2(s.fn_hat));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        rows.push(row);
    }

    let mut out = String::new();
    match format {
        TableFormat::Csv | TableFormat::Tsv => {
            let sep = if format == TableFormat::Csv {
                ","
            } else {
                "\t"
            };
            out.push_str(&header.join(sep));
            out.push('\n');
            for r in &rows {
                out.push_str(&r.join(sep));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| {
                    rows.iter()
                        .map(|r| r[c].len())
                        .chain([header[c].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (v, w))| {
                        if c == 0 {
                            format!("{v:<w$}")
                        } else {
                            format!("{v:>w$}")
                        }
                    })
                    .collect();
                format!("| {} |\n", padded.join(" | "))
            };
            out.push_str(&line(&header));
            let rule: Vec<String> = widths
                .iter()
                .enumerate()
                .map(|(c, w)| {
                    if c == 0 {
                        "-".repeat(*w)
                    } else {
                        format!("{}:", "-".repeat(w - 1))
                    }
                })
                .collect();
            out.push_str(&format!("| {} |\n", rule.join(" | ")));
            for r in &rows {
                out.push_str(&line(r));
            }
        }
    }
    Ok(out)
}
