//! Command implementations behind the `squac` binary.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use squac_core::harness::round2;
use squac_core::{
    compare_cohorts, emit_table, infer_network, run_methods, Dataset, Dependence,
    DifferentialReport, Experiment, Method, Network, QuantileGrid, ScenarioId, SimScenario,
    Summary, TableFormat,
};

/// A failure, classified by the exit code it maps to.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// Single-line diagnostic, `error[kind]: message`.
    pub fn diagnostic(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.kind(), msg)
    }
}

impl From<squac_core::Error> for CliError {
    fn from(e: squac_core::Error) -> Self {
        use squac_core::Error as E;
        let msg = e.to_string();
        match e.root() {
            E::InvalidArgument(_) => CliError::Usage(msg),
            E::InvalidInput(_) | E::SingularDesign(_) | E::InsufficientData(_) => {
                CliError::Data(msg)
            }
            _ => CliError::Numeric(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reads a headered CSV into a dataset.
///
/// `outcomes = None` takes every column that is not a covariate. Rows in
/// diagnostics are file line numbers, the header being row 1.
pub fn load_csv(
    path: &Path,
    outcomes: Option<&[String]>,
    covariates: &[String],
) -> CliResult<Dataset> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open '{}': {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: cannot read header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Data(format!(
            "{}: header row is empty",
            path.display()
        )));
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (c, h) in headers.iter().enumerate() {
        if let Some(first) = seen.insert(h, c) {
            return Err(CliError::Data(format!(
                "{}: duplicate column name \"{h}\" (columns {} and {})",
                path.display(),
                first + 1,
                c + 1
            )));
        }
    }
    let locate = |name: &String| -> CliResult<usize> {
        seen.get(name.as_str()).copied().ok_or_else(|| {
            CliError::Usage(format!("{}: no column named \"{name}\"", path.display()))
        })
    };
    let cov_idx: Vec<usize> = covariates.iter().map(locate).collect::<CliResult<_>>()?;
    let out_idx: Vec<usize> = match outcomes {
        Some(names) => names.iter().map(locate).collect::<CliResult<_>>()?,
        None => (0..headers.len())
            .filter(|c| !cov_idx.contains(c))
            .collect(),
    };
    if let Some(c) = out_idx.iter().find(|c| cov_idx.contains(c)) {
        return Err(CliError::Usage(format!(
            "column \"{}\" is both an outcome and a covariate",
            headers[*c]
        )));
    }
    if out_idx.len() < 2 {
        return Err(CliError::Usage(format!(
            "need at least two outcome columns, got {}",
            out_idx.len()
        )));
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    let wanted: Vec<usize> = out_idx.iter().chain(&cov_idx).copied().collect();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(CliError::Data(format!(
                "{}: row {row} has {} fields, header has {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        for &c in &wanted {
            let cell = &record[c];
            let name = &headers[c];
            if cell.is_empty()
                || cell.eq_ignore_ascii_case("na")
                || cell.eq_ignore_ascii_case("nan")
            {
                return Err(CliError::Data(format!(
                    "{}: row {row}, column \"{name}\": missing value",
                    path.display()
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {row}, column \"{name}\": non-numeric value '{cell}'",
                    path.display()
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: row {row}, column \"{name}\": non-finite value '{cell}'",
                    path.display()
                )));
            }
            columns[c].push(v);
        }
    }
    let y: Vec<Vec<f64>> = out_idx
        .iter()
        .map(|&c| std::mem::take(&mut columns[c]))
        .collect();
    let x: Vec<Vec<f64>> = cov_idx
        .iter()
        .map(|&c| std::mem::take(&mut columns[c]))
        .collect();
    let dataset = Dataset::with_covariates(y, &x)?
        .with_outcome_names(out_idx.iter().map(|&c| headers[c].clone()).collect())?
        .with_covariate_names(cov_idx.iter().map(|&c| headers[c].clone()).collect())?;
    Ok(dataset)
}

/// Quantile grid from explicit levels or an even grid of `d` cells.
pub fn make_grid(taus: &[f64], d: Option<usize>) -> CliResult<QuantileGrid> {
    let grid = match d {
        Some(d) => QuantileGrid::even(d),
        None => QuantileGrid::new(taus.to_vec()),
    };
    grid.map_err(|e| CliError::Usage(e.to_string()))
}

/// Output layout shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
    Markdown,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TableFormat::Csv,
            Format::Tsv => TableFormat::Tsv,
            Format::Markdown => TableFormat::Markdown,
        }
    }
}

/// Renders a header and rows in the requested layout.
pub fn render(header: &[&str], rows: &[Vec<String>], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv | Format::Tsv => {
            let sep = if format == Format::Csv { "," } else { "\t" };
            out.push_str(&header.join(sep));
            out.push('\n');
            for r in rows {
                out.push_str(&r.join(sep));
                out.push('\n');
            }
        }
        Format::Markdown => {
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            out.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
            for r in rows {
                out.push_str(&format!("| {} |\n", r.join(" | ")));
            }
        }
    }
    out
}

/// Runs the full pipeline on one dataset.
pub fn cmd_infer(dataset: &Dataset, grid: &QuantileGrid, alpha: f64) -> CliResult<Network> {
    check_alpha(alpha)?;
    Ok(infer_network(dataset, grid, alpha)?)
}

/// Edge list with columns `i j T surrogate_p rejected`, largest statistic first.
pub fn edge_list_table(net: &Network, format: Format) -> String {
    let rows: Vec<Vec<String>> = net
        .edges
        .iter()
        .map(|e| {
            vec![
                net.outcome_names[e.i].clone(),
                net.outcome_names[e.j].clone(),
                format!("{:?}", e.statistic),
                format!("{:?}", e.surrogate_p),
                e.rejected.to_string(),
            ]
        })
        .collect();
    render(&["i", "j", "T", "surrogate_p", "rejected"], &rows, format)
}

/// Infers both cohort networks, each with its own covariates, and compares them.
pub fn cmd_diff(
    a: &Dataset,
    b: &Dataset,
    grid: &QuantileGrid,
    alpha: f64,
) -> CliResult<DifferentialReport> {
    check_alpha(alpha)?;
    if a.outcome_names() != b.outcome_names() {
        return Err(schema_error(a.outcome_names(), b.outcome_names()));
    }
    let (_, _, report) = compare_cohorts(a, b, grid, alpha)?;
    Ok(report)
}

fn schema_error(a: &[String], b: &[String]) -> CliError {
    let only_a: Vec<&str> = a
        .iter()
        .filter(|n| !b.contains(n))
        .map(String::as_str)
        .collect();
    let only_b: Vec<&str> = b
        .iter()
        .filter(|n| !a.contains(n))
        .map(String::as_str)
        .collect();
    if only_a.is_empty() && only_b.is_empty() {
        CliError::Data("outcome columns of the two cohorts are in a different order".into())
    } else {
        CliError::Data(format!(
            "outcome columns differ: only in --data: [{}]; only in --data-b: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        ))
    }
}

/// Differential edges, then per-outcome degree differences.
pub fn diff_tables(report: &DifferentialReport, format: Format) -> String {
    let names = &report.outcome_names;
    let edges: Vec<Vec<String>> = report
        .differential_edges
        .iter()
        .map(|&(i, j)| vec![names[i].clone(), names[j].clone()])
        .collect();
    let degrees: Vec<Vec<String>> = report
        .degree_diff
        .iter()
        .map(|&(o, d)| vec![names[o].clone(), d.to_string()])
        .collect();
    let mut out = render(&["i", "j"], &edges, format);
    out.push('\n');
    out.push_str(&render(&["outcome", "degree_diff"], &degrees, format));
    out
}

/// Settings of a `simulate` run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub scenario: ScenarioId,
    pub methods: Vec<Method>,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub dependence: Dependence,
}

/// Runs every method on shared replicated datasets.
pub fn cmd_simulate(config: &SimulateConfig) -> CliResult<Vec<Summary>> {
    check_alpha(config.alpha)?;
    let scenario = SimScenario::new(config.scenario, config.n, config.p, config.seed);
    scenario
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let exp = Experiment::new(scenario, config.dependence, config.reps, config.alpha);
    Ok(run_methods(&exp, &config.methods)?)
}

pub fn simulate_table(summaries: &[Summary], format: Format) -> CliResult<String> {
    Ok(emit_table(summaries, format.into())?)
}

/// Per-replication detail rows, for auditing a summary table.
pub fn replication_table(summaries: &[Summary], format: Format) -> String {
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .flat_map(|s| {
            s.reps.iter().enumerate().map(move |(rep, r)| {
                vec![
                    s.method.to_string(),
                    rep.to_string(),
                    r.seed.to_string(),
                    r.rejected_count.to_string(),
                    round2(r.fdp),
                    r.false_negatives.to_string(),
                ]
            })
        })
        .collect();
    render(
        &["method", "rep", "seed", "rejected", "fdp", "fn"],
        &rows,
        format,
    )
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--alpha {alpha} outside (0, 1]")))
    }
}

/// Writes `contents` to `path` via a sibling temporary file, so a failed
/// write never leaves a partial output behind.
pub fn write_output(path: Option<&Path>, contents: &str) -> CliResult<()> {
    let Some(path) = path else {
        let mut stdout = std::io::stdout().lock();
        return stdout
            .write_all(contents.as_bytes())
            .and_then(|()| stdout.flush())
            .map_err(|e| CliError::Data(format!("cannot write output: {e}")));
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("'{}' is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.partial", file_name.to_string_lossy()));
    let result = fs::write(&tmp, contents).and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::Data(format!(
            "cannot write '{}': {e}",
            path.display()
        )));
    }
    Ok(())
}
