use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use squac_cli::{
    cmd_diff, cmd_infer, cmd_simulate, diff_tables, edge_list_table, load_csv, make_grid,
    replication_table, simulate_table, write_output, CliError, CliResult, Format, SimulateConfig,
};
use squac_core::{Dependence, Method, ScenarioId};

/// Quantile-association network inference with false discovery rate control.
#[derive(Parser, Debug)]
#[command(name = "squac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infer the association network of one dataset.
    Infer(InferArgs),
    /// Compare the networks of two cohorts sharing outcome columns.
    Diff(DiffArgs),
    /// Run a simulation study and print the FDR / FN table.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct ColumnArgs {
    /// Outcome column names (default: every non-covariate column).
    #[arg(long, value_delimiter = ',')]
    outcomes: Option<Vec<String>>,
    /// Covariate column names; an intercept is always added.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Interior quantile levels, strictly increasing in (0, 1).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.33,0.67",
        conflicts_with = "d"
    )]
    taus: Vec<f64>,
    /// Use the even grid with this many cells per margin instead.
    #[arg(long)]
    d: Option<usize>,
    /// Target false discovery rate.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Headered CSV, one column per variable.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct DiffArgs {
    /// First cohort.
    #[arg(long)]
    data: PathBuf,
    /// Second cohort.
    #[arg(long)]
    data_b: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario id, SE1 to SE6.
    #[arg(long)]
    scenario: String,
    /// Method to run; repeatable. One of squac, squac(D), lin_dep, kendall, spearman.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Cell counts for a bare `squac` method.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    d: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Number of outcomes (default: 100, or the scenario minimum if larger).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Drop covariate effects from the outcome model.
    #[arg(long)]
    marginal: bool,
    /// Print one row per replication instead of the summary table.
    #[arg(long)]
    per_rep: bool,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let msg = first.trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(msg.to_string()).diagnostic());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Infer(a) => {
            let grid = make_grid(&a.grid.taus, a.grid.d)?;
            let data = load_csv(
                &a.data,
                a.columns.outcomes.as_deref(),
                &a.columns.covariates,
            )?;
            let net = cmd_infer(&data, &grid, a.grid.alpha)?;
            log::info!(
                "{} of {} pairs rejected",
                net.rejected().len(),
                net.edges.len()
            );
            let text = edge_list_table(&net, a.output.format.unwrap_or(Format::Tsv));
            write_output(a.output.out.as_deref(), &text)
        }
        Command::Diff(a) => {
            let grid = make_grid(&a.grid.taus, a.grid.d)?;
            let first = load_csv(
                &a.data,
                a.columns.outcomes.as_deref(),
                &a.columns.covariates,
            )?;
            let second = load_csv(
                &a.data_b,
                a.columns.outcomes.as_deref(),
                &a.columns.covariates,
            )?;
            let report = cmd_diff(&first, &second, &grid, a.grid.alpha)?;
            write_output(
                a.output.out.as_deref(),
                &diff_tables(&report, a.output.format.unwrap_or(Format::Tsv)),
            )
        }
        Command::Simulate(a) => {
            let scenario: ScenarioId = a.scenario.parse().map_err(CliError::from)?;
            let config = SimulateConfig {
                scenario,
                methods: expand_methods(&a.methods, &a.d)?,
                n: a.n,
                p: a.p.unwrap_or(scenario.min_p().max(100)),
                reps: a.reps,
                alpha: a.alpha,
                seed: a.seed,
                dependence: if a.marginal {
                    Dependence::Marginal
                } else {
                    Dependence::Conditional
                },
            };
            if config.reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let summaries = cmd_simulate(&config)?;
            let format = a.output.format.unwrap_or(Format::Markdown);
            let text = if a.per_rep {
                replication_table(&summaries, format)
            } else {
                simulate_table(&summaries, format)?
            };
            write_output(a.output.out.as_deref(), &text)
        }
    }
}

/// Parses `--method` values; a bare `squac` runs once per `--d` entry.
fn expand_methods(names: &[String], levels: &[usize]) -> CliResult<Vec<Method>> {
    let defaults = ["squac", "lin_dep", "kendall", "spearman"].map(String::from);
    let names = if names.is_empty() {
        &defaults[..]
    } else {
        names
    };
    let mut methods = Vec::new();
    for name in names {
        if name.eq_ignore_ascii_case("squac") {
            for &d in levels {
                if d < 2 {
                    return Err(CliError::Usage(format!("--d {d}: need at least 2 cells")));
                }
                methods.push(Method::Squac { levels: d });
            }
        } else {
            methods.push(name.parse().map_err(CliError::from)?);
        }
    }
    methods.dedup();
    Ok(methods)
}
