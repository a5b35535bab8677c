//! Command-line interface: every subcommand prints one JSON [`Report`] to
//! standard output on success, or a machine-readable error object to
//! standard error.
//!
//! Exit codes are frozen: 0 success, 2 parameter/validation errors, 3 a
//! matrix with fully matching rows, 4 an exact computation past its
//! tractability threshold. `--stable` zeroes `elapsed_ms` so repeated runs
//! are byte-identical. `DTEST_THREADS` sets the default worker count.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::discretize::{discretize_quantile, discretize_sign};
use crate::error::{Error, Result};
use crate::matrix::{load_discrete_csv, load_raw_csv, write_discrete_csv, ColumnSet};
use crate::montecarlo::{
    mc_matching_test, mc_min_test_length_distribution, mc_row_match, McConfig, McEstimate,
    GENERATOR_ID,
};
use crate::probability::{
    prob_matching_test, prob_row_match_profile, prob_row_match_uniform, AlphabetProfile,
    ProbabilityValue,
};
use crate::report::Report;
use crate::testing::{column_importance, enumerate_dead_end_tests, find_matching_row_groups};

#[derive(Debug, Parser)]
#[command(
    name = "dtest",
    version,
    about = "Diagnostic tests, match probabilities and Monte Carlo checks for discrete time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Zero timing fields so identical invocations emit identical bytes.
    #[arg(long, global = true)]
    stable: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a raw series CSV into a symbol matrix CSV.
    Discretize(DiscretizeArgs),
    /// Enumerate dead-end tests and rank column importance.
    Tests(TestsArgs),
    /// Rank columns by dead-end test membership only.
    Importance(TestsArgs),
    /// Group rows that match on the chosen columns.
    Cluster(ClusterArgs),
    /// Closed-form probabilities.
    #[command(subcommand)]
    Prob(ProbCommand),
    /// Monte Carlo estimates.
    #[command(subcommand)]
    Mc(McCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Sign,
    Quantile,
}

#[derive(Debug, Args)]
struct DiscretizeArgs {
    /// Raw series CSV (first field of each record is the row label).
    #[arg(long)]
    input: PathBuf,
    /// Input has a header row with column labels.
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum)]
    method: Method,
    /// Quantile levels k (quantile method only).
    #[arg(long, default_value_t = 2)]
    levels: u32,
    /// Compute quantile breakpoints per column instead of pooled.
    #[arg(long)]
    per_column: bool,
    /// Output CSV path for the symbol matrix.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct TestsArgs {
    /// Symbol matrix CSV.
    #[arg(long)]
    input: PathBuf,
    /// Input has a header row with column labels.
    #[arg(long)]
    header: bool,
    /// Comma-separated alphabet sizes; inferred as max+1 (min 2) if omitted.
    #[arg(long, value_delimiter = ',')]
    alphabet_sizes: Option<Vec<u32>>,
    /// Stop after this many dead-end tests.
    #[arg(long, default_value_t = 100_000)]
    max_count: usize,
    /// Wall-clock search budget in milliseconds.
    #[arg(long, default_value_t = 10_000)]
    time_budget_ms: u64,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    header: bool,
    #[arg(long, value_delimiter = ',')]
    alphabet_sizes: Option<Vec<u32>>,
    /// "all", or a comma-separated index list; empty selects no columns.
    #[arg(long, default_value = "all")]
    columns: String,
}

#[derive(Debug, Subcommand)]
enum ProbCommand {
    /// Probability that some two rows fully match.
    Rows(ProbRowsArgs),
    /// Probability of at least l non-constant columns.
    MatchingTest(ProbMatchingTestArgs),
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// Row count n.
    #[arg(long)]
    n: u64,
    /// Uniform column count m (with --k).
    #[arg(long)]
    m: Option<usize>,
    /// Uniform alphabet size k (with --m).
    #[arg(long)]
    k: Option<u32>,
    /// Per-column alphabet sizes, e.g. 2,3,2 (alternative to --m/--k).
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<u32>>,
}

impl ProfileArgs {
    fn resolve(&self) -> Result<AlphabetProfile> {
        match (&self.ks, self.m, self.k) {
            (Some(ks), None, None) => AlphabetProfile::new(ks.clone(), self.n),
            (None, Some(m), Some(k)) => AlphabetProfile::uniform(m, k, self.n),
            _ => Err(Error::Parameter(
                "give either --ks, or both --m and --k".into(),
            )),
        }
    }

    fn describe(&self, parameters: &mut BTreeMap<String, Value>) {
        parameters.insert("n".into(), json!(self.n));
        if let Some(ks) = &self.ks {
            parameters.insert("ks".into(), json!(ks));
        }
        if let Some(m) = self.m {
            parameters.insert("m".into(), json!(m));
        }
        if let Some(k) = self.k {
            parameters.insert("k".into(), json!(k));
        }
    }
}

#[derive(Debug, Args)]
struct ProbRowsArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Also compute the exact rational (may exit 4 when intractable).
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct ProbMatchingTestArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Matching-test dimension l.
    #[arg(long)]
    l: usize,
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Subcommand)]
enum McCommand {
    /// Estimate the row-match probability.
    Rows(McRowsArgs),
    /// Estimate the matching-test probability.
    MatchingTest(McMatchingTestArgs),
    /// Histogram of exact minimal test lengths over sampled matrices.
    MinLength(McMinLengthArgs),
}

#[derive(Debug, Args)]
struct McCommonArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Worker threads; defaults to DTEST_THREADS, then the CPU count.
    #[arg(long)]
    workers: Option<usize>,
}

impl McCommonArgs {
    fn config(&self) -> Result<McConfig> {
        McConfig::new(
            self.profile.resolve()?,
            self.trials,
            self.seed,
            resolve_workers(self.workers)?,
        )
    }

    fn describe(&self, parameters: &mut BTreeMap<String, Value>) {
        self.profile.describe(parameters);
        parameters.insert("trials".into(), json!(self.trials));
        parameters.insert("seed".into(), json!(self.seed));
    }
}

#[derive(Debug, Args)]
struct McRowsArgs {
    #[command(flatten)]
    common: McCommonArgs,
}

#[derive(Debug, Args)]
struct McMatchingTestArgs {
    #[command(flatten)]
    common: McCommonArgs,
    #[arg(long)]
    l: usize,
}

#[derive(Debug, Args)]
struct McMinLengthArgs {
    #[command(flatten)]
    common: McCommonArgs,
    /// Overall wall-clock budget in milliseconds for the per-sample searches.
    #[arg(long, default_value_t = 60_000)]
    budget_ms: u64,
}

fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(Error::Parameter("workers must be at least 1".into()));
        }
        return Ok(w);
    }
    if let Ok(env) = std::env::var("DTEST_THREADS") {
        let parsed: usize = env
            .parse()
            .map_err(|_| Error::Parameter(format!("DTEST_THREADS is not a count: {env:?}")))?;
        if parsed == 0 {
            return Err(Error::Parameter("DTEST_THREADS must be at least 1".into()));
        }
        return Ok(parsed);
    }
    Ok(std::thread::available_parallelism().map_or(1, usize::from))
}

/// Parses the CLI, runs the command, prints the report or error object, and
/// returns the process exit code.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match execute(&cli.command) {
        Ok(mut report) => {
            report.elapsed_ms = if cli.stable {
                0
            } else {
                started.elapsed().as_millis() as u64
            };
            // Tolerate a closed pipe (e.g. piping into `head`).
            use std::io::Write;
            let mut out = report.to_pretty_json();
            out.push('\n');
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(error) => {
            let mut details = serde_json::Map::new();
            if let Error::IndistinguishableRows { pairs } = &error {
                details.insert(
                    "pairs".into(),
                    json!(pairs
                        .iter()
                        .map(|(a, b)| json!([a, b]))
                        .collect::<Vec<Value>>()),
                );
            }
            let object = json!({
                "error": {
                    "kind": error.kind(),
                    "message": error.to_string(),
                    "details": details,
                }
            });
            eprintln!(
                "{}",
                serde_json::to_string_pretty(&object).expect("error object serializes")
            );
            ExitCode::from(exit_code_for(&error))
        }
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::IndistinguishableRows { .. } => 3,
        Error::ExactIntractable(_) => 4,
        _ => 2,
    }
}

fn execute(command: &Command) -> Result<Report> {
    match command {
        Command::Discretize(args) => cmd_discretize(args),
        Command::Tests(args) => cmd_tests(args, true),
        Command::Importance(args) => cmd_tests(args, false),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Prob(ProbCommand::Rows(args)) => cmd_prob_rows(args),
        Command::Prob(ProbCommand::MatchingTest(args)) => cmd_prob_matching_test(args),
        Command::Mc(McCommand::Rows(args)) => cmd_mc_rows(args),
        Command::Mc(McCommand::MatchingTest(args)) => cmd_mc_matching_test(args),
        Command::Mc(McCommand::MinLength(args)) => cmd_mc_min_length(args),
    }
}

fn cmd_discretize(args: &DiscretizeArgs) -> Result<Report> {
    if args.method == Method::Quantile && args.levels < 2 {
        return Err(Error::Parameter(format!(
            "quantile discretization needs at least 2 levels, got {}",
            args.levels
        )));
    }
    let raw = load_raw_csv(&args.input, args.header)?;
    let discrete = match args.method {
        Method::Sign => discretize_sign(&raw)?,
        Method::Quantile => discretize_quantile(&raw, args.levels, args.per_column)?,
    };
    write_discrete_csv(&discrete, &args.output)?;

    let mut parameters = BTreeMap::new();
    parameters.insert("input".into(), json!(args.input.display().to_string()));
    parameters.insert("header".into(), json!(args.header));
    parameters.insert(
        "method".into(),
        json!(match args.method {
            Method::Sign => "sign",
            Method::Quantile => "quantile",
        }),
    );
    if args.method == Method::Quantile {
        parameters.insert("levels".into(), json!(args.levels));
        parameters.insert("per_column".into(), json!(args.per_column));
    }
    parameters.insert("output".into(), json!(args.output.display().to_string()));
    let results = json!({
        "rows": discrete.n_rows(),
        "cols": discrete.n_cols(),
        "alphabet_sizes": discrete.alphabet_sizes(),
        "output": args.output.display().to_string(),
    });
    Ok(Report::new("discretize", parameters, results))
}

fn cmd_tests(args: &TestsArgs, full_report: bool) -> Result<Report> {
    let matrix = load_discrete_csv(&args.input, args.header, args.alphabet_sizes.clone())?;
    let report = enumerate_dead_end_tests(
        &matrix,
        args.max_count,
        Duration::from_millis(args.time_budget_ms),
    )?;
    let importance = if report.tests.is_empty() {
        Vec::new()
    } else {
        column_importance(&report, matrix.n_cols())?
    };

    let mut parameters = BTreeMap::new();
    parameters.insert("input".into(), json!(args.input.display().to_string()));
    parameters.insert("header".into(), json!(args.header));
    parameters.insert("max_count".into(), json!(args.max_count));
    parameters.insert("time_budget_ms".into(), json!(args.time_budget_ms));

    let importance_json: Vec<Value> = importance
        .iter()
        .map(|entry| {
            json!({
                "column": entry.column,
                "label": matrix.col_labels()[entry.column],
                "count": entry.count,
                "frequency": entry.frequency,
            })
        })
        .collect();

    let results = if full_report {
        let tests_json: Vec<Value> = report
            .tests
            .iter()
            .map(|t| {
                json!({
                    "columns": t.indices(),
                    "labels": t.iter().map(|j| &matrix.col_labels()[j]).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "n": matrix.n_rows(),
            "m": matrix.n_cols(),
            "tests": tests_json,
            "count": report.tests.len(),
            "min_length": report.min_length,
            "exhausted": report.exhausted,
            "budget_hit": report.budget_hit,
            "importance": importance_json,
        })
    } else {
        json!({
            "tests_considered": report.tests.len(),
            "exhausted": report.exhausted,
            "importance": importance_json,
        })
    };
    Ok(Report::new(
        if full_report { "tests" } else { "importance" },
        parameters,
        results,
    ))
}

fn cmd_cluster(args: &ClusterArgs) -> Result<Report> {
    let matrix = load_discrete_csv(&args.input, args.header, args.alphabet_sizes.clone())?;
    let all_columns = args.columns.trim() == "all";
    let columns = if all_columns {
        ColumnSet::full(matrix.n_cols())
    } else {
        parse_column_list(&args.columns)?
    };
    let partition = find_matching_row_groups(&matrix, &columns)?;

    let mut parameters = BTreeMap::new();
    parameters.insert("input".into(), json!(args.input.display().to_string()));
    parameters.insert("header".into(), json!(args.header));
    parameters.insert("columns".into(), json!(args.columns));

    let clusters: Vec<Value> = partition
        .clusters
        .iter()
        .map(|cluster| {
            let labels: Vec<&String> =
                cluster.iter().map(|&i| &matrix.row_labels()[i]).collect();
            json!({
                "rows": labels,
                "size": cluster.len(),
                "matching_submatrix": all_columns && cluster.len() >= 2,
            })
        })
        .collect();
    let results = json!({
        "clusters": clusters,
        "defining_columns": partition.defining_columns.indices(),
        "all_columns": all_columns,
    });
    Ok(Report::new("cluster", parameters, results))
}

fn parse_column_list(text: &str) -> Result<ColumnSet> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(ColumnSet::empty());
    }
    let mut indices = Vec::new();
    for part in trimmed.split(',') {
        let index: usize = part.trim().parse().map_err(|_| {
            Error::Parameter(format!("column list entry {part:?} is not an index"))
        })?;
        indices.push(index);
    }
    Ok(ColumnSet::new(indices))
}

fn probability_json(p: &ProbabilityValue) -> Value {
    let mut object = serde_json::Map::new();
    object.insert("float".into(), json!(p.float_value));
    object.insert("log".into(), json!(p.log_value));
    if let Some(exact) = &p.exact {
        object.insert(
            "exact".into(),
            json!({
                "numerator": exact.numer().to_string(),
                "denominator": exact.denom().to_string(),
            }),
        );
    }
    Value::Object(object)
}

fn cmd_prob_rows(args: &ProbRowsArgs) -> Result<Report> {
    let value = match (&args.profile.ks, args.profile.m, args.profile.k) {
        // Uniform parameters keep the dedicated path.
        (None, Some(m), Some(k)) => prob_row_match_uniform(args.profile.n, m, k, args.exact)?,
        _ => prob_row_match_profile(&args.profile.resolve()?, args.exact)?,
    };
    let mut parameters = BTreeMap::new();
    args.profile.describe(&mut parameters);
    parameters.insert("exact".into(), json!(args.exact));
    Ok(Report::new("prob.rows", parameters, probability_json(&value)))
}

fn cmd_prob_matching_test(args: &ProbMatchingTestArgs) -> Result<Report> {
    let profile = args.profile.resolve()?;
    let value = prob_matching_test(&profile, args.l, args.exact)?;
    let mut parameters = BTreeMap::new();
    args.profile.describe(&mut parameters);
    parameters.insert("l".into(), json!(args.l));
    parameters.insert("exact".into(), json!(args.exact));
    Ok(Report::new(
        "prob.matching-test",
        parameters,
        probability_json(&value),
    ))
}

// The worker count is deliberately absent from reports: results are a pure
// function of (profile, trials, seed), and reports must be byte-identical
// across worker counts.
fn estimate_json(estimate: &McEstimate) -> Value {
    json!({
        "estimate": estimate.estimate,
        "std_error": estimate.std_error,
        "successes": estimate.successes,
        "trials": estimate.trials,
        "seed": estimate.seed,
        "generator": GENERATOR_ID,
    })
}

fn cmd_mc_rows(args: &McRowsArgs) -> Result<Report> {
    let config = args.common.config()?;
    let estimate = mc_row_match(&config)?;
    let mut parameters = BTreeMap::new();
    args.common.describe(&mut parameters);
    Ok(Report::new("mc.rows", parameters, estimate_json(&estimate)))
}

fn cmd_mc_matching_test(args: &McMatchingTestArgs) -> Result<Report> {
    let config = args.common.config()?;
    let estimate = mc_matching_test(&config, args.l)?;
    let mut parameters = BTreeMap::new();
    args.common.describe(&mut parameters);
    parameters.insert("l".into(), json!(args.l));
    Ok(Report::new(
        "mc.matching-test",
        parameters,
        estimate_json(&estimate),
    ))
}

fn cmd_mc_min_length(args: &McMinLengthArgs) -> Result<Report> {
    let config = args.common.config()?;
    let histogram =
        mc_min_test_length_distribution(&config, Duration::from_millis(args.budget_ms))?;
    let mut parameters = BTreeMap::new();
    args.common.describe(&mut parameters);
    parameters.insert("budget_ms".into(), json!(args.budget_ms));
    let results = json!({
        "histogram": histogram.histogram,
        "matching_rows": histogram.matching_rows,
        "unresolved": histogram.unresolved,
        "trials": histogram.trials,
        "seed": histogram.seed,
        "generator": GENERATOR_ID,
    });
    Ok(Report::new("mc.min-length", parameters, results))
}
