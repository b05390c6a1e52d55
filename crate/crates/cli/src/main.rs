use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use krr_granger::bench::{run_experiment, write_metrics_csv, write_runtimes_csv, write_summaries_json, ExperimentPlan};
use krr_granger::cao::CaoConfig;
use krr_granger::engine::{gc_network_with_lag, gc_test, resolve_lags, GcConfig, LagSpec, Method, Preprocess, TestKind};
use krr_granger::eval::{evaluate_single, EdgeScores};
use krr_granger::krr::{GammaMode, KernelConfig};
use krr_granger::simnet::{generate, GroundTruth, NetworkName, NetworkSpec, TruthDocument};
use krr_granger::{Error, PValueMatrix, SplitSpec, TimeSeriesPanel};
use serde::{Deserialize, Serialize};

const WORKERS_ENV: &str = "KRR_GRANGER_WORKERS";

#[derive(Parser)]
#[command(name = "krr-granger", version, about = "Nonlinear Granger causality with kernel ridge regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate benchmark network panels and their ground truths.
    Simulate(SimulateArgs),
    /// Test one directed pair.
    Test(TestArgs),
    /// Test every ordered pair and write the p-value matrix.
    Network(NetworkArgs),
    /// Score a p-value matrix against a ground truth.
    Evaluate(EvaluateArgs),
    /// Run the simulate / recover / score protocol over many sets.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_network)]
    network: NetworkName,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    length: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    sets: u64,
    #[arg(long, default_value_t = 500)]
    burn_in: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Sign,
    Wilcoxon,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Krr,
    Linear,
}

#[derive(Clone, Copy)]
enum LagArg {
    Cao,
    Fixed(usize),
}

impl FromStr for LagArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "cao" {
            return Ok(LagArg::Cao);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or `cao`, got `{s}`")),
            Ok(l) => Ok(LagArg::Fixed(l)),
        }
    }
}

#[derive(Clone, Copy)]
struct GammaArg(GammaMode);

impl FromStr for GammaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(GammaArg(GammaMode::Auto));
        }
        match s.parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaArg(GammaMode::Fixed(g))),
            _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
        }
    }
}

#[derive(Clone, Copy)]
struct QuantileArg(Preprocess);

impl FromStr for QuantileArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "none" {
            return Ok(QuantileArg(Preprocess::None));
        }
        match s.parse::<usize>() {
            Ok(q) if q >= 2 => Ok(QuantileArg(Preprocess::Quantile(q))),
            _ => Err(format!("expected `none` or an integer >= 2, got `{s}`")),
        }
    }
}

fn parse_network(s: &str) -> Result<NetworkName, String> {
    s.parse::<NetworkName>().map_err(|_| {
        let all: Vec<&str> = NetworkName::ALL.iter().map(|n| n.as_str()).collect();
        format!("unknown network `{s}`; expected one of {}", all.join(", "))
    })
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a number in (0, 1), got `{s}`")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn parse_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("expected a number in [0, 1], got `{s}`")),
    }
}

/// Flags shared by every subcommand that runs the engine.
#[derive(Args)]
struct ConfigArgs {
    /// Lag count, or `cao` to select it by Cao's method.
    #[arg(long, default_value = "cao")]
    lags: LagArg,
    #[arg(long = "test", value_enum, default_value_t = TestArg::Sign)]
    test_kind: TestArg,
    #[arg(long, default_value = "1.0", value_parser = parse_positive)]
    lambda: f64,
    /// `auto` (1 / number of design columns) or a positive value.
    #[arg(long, default_value = "auto")]
    gamma: GammaArg,
    /// Fraction of lagged rows used for training.
    #[arg(long, default_value = "0.7", value_parser = parse_fraction)]
    split: f64,
    /// Rows dropped between train and test; defaults to the lag count.
    #[arg(long)]
    gap: Option<usize>,
    /// Quantile count for the uniform transform, or `none`.
    #[arg(long, default_value = "1000")]
    quantiles: QuantileArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Krr)]
    method: MethodArg,
    /// Largest embedding dimension considered by Cao's method.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    d_max: u64,
}

impl ConfigArgs {
    fn to_config(&self) -> GcConfig {
        GcConfig {
            lags: match self.lags {
                LagArg::Cao => LagSpec::AutoCao,
                LagArg::Fixed(l) => LagSpec::Fixed(l),
            },
            split: SplitSpec { train_fraction: self.split, gap: self.gap },
            kernel: KernelConfig { lambda: self.lambda, gamma: self.gamma.0 },
            test: match self.test_kind {
                TestArg::Sign => TestKind::Sign,
                TestArg::Wilcoxon => TestKind::Wilcoxon,
            },
            preprocess: self.quantiles.0,
            method: match self.method {
                MethodArg::Krr => Method::Krr,
                MethodArg::Linear => Method::LinearF,
            },
            cao: CaoConfig { d_max: self.d_max as usize, ..CaoConfig::default() },
        }
    }
}

#[derive(Args)]
struct WorkerArgs {
    /// Worker threads; defaults to the logical core count.
    #[arg(long, env = WORKERS_ENV, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

impl WorkerArgs {
    fn count(&self) -> usize {
        self.workers.map(|w| w as usize).unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: String,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    workers: WorkerArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NetworkArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    workers: WorkerArgs,
    /// Exit with status 2 when more pairs than this fail.
    #[arg(long, default_value_t = 0)]
    max_failures: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pvalues: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "0.05", value_parser = parse_unit)]
    threshold: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_network, required = true)]
    networks: Vec<NetworkName>,
    #[arg(long, value_delimiter = ',', default_value = "500,1000,1500,2000", value_parser = clap::value_parser!(u64).range(1..))]
    lengths: Vec<u64>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    sets: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    burn_in: usize,
    #[arg(long, default_value = "0.05", value_parser = parse_unit)]
    threshold: f64,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    workers: WorkerArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Usage problems exit 1, everything else 2.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Csv { .. } | Error::UnknownSeries(_) | Error::SameSeries(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

type CliResult<T = ()> = Result<T, CliError>;

/// p-value matrix document with `null` on the diagonal.
#[derive(Serialize, Deserialize)]
struct PValueDocument {
    series: Vec<String>,
    pvalues: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<GcConfig>,
    #[serde(default)]
    lag_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    failures: Vec<krr_granger::engine::CellError>,
}

// value errors from clap omit the usage line; show the subcommand's
fn usage_for(sub: Option<&str>) -> String {
    let mut root = Cli::command();
    match sub.and_then(|name| root.find_subcommand_mut(name)) {
        Some(cmd) => cmd.clone().bin_name(format!("krr-granger {}", cmd.get_name())).render_usage().to_string(),
        None => root.render_usage().to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for(std::env::args().nth(1).as_deref()));
            }
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).target(env_logger::Target::Stderr).init();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Network(a) => cmd_network(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn read_panel(path: &Path) -> CliResult<TimeSeriesPanel> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    TimeSeriesPanel::read_csv(BufReader::new(file)).map_err(|e| match e {
        Error::Io(io) => io_err(path, io),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_err(path, e))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
            writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(w).map_err(|e| CliError::Runtime(e.to_string()))
        }
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult {
    create_dir(&a.out_dir)?;
    for k in 0..a.sets {
        let spec = NetworkSpec { name: a.network, length: a.length as usize, burn_in: a.burn_in, seed: a.seed ^ k };
        let (panel, truth) = generate(&spec)?;
        let stem = format!("{}_len{}_set{k}", a.network, a.length);
        let csv_path = a.out_dir.join(format!("{stem}.csv"));
        let file = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
        panel.write_csv(BufWriter::new(file)).map_err(|e| io_err(&csv_path, e))?;
        let truth_path = a.out_dir.join(format!("{stem}_truth.json"));
        emit_json(&truth.to_document(), Some(&truth_path))?;
        println!("{}", csv_path.display());
        println!("{}", truth_path.display());
    }
    Ok(())
}

fn cmd_test(a: &TestArgs) -> CliResult {
    let config = a.config.to_config();
    config.validate()?;
    let panel = read_panel(&a.input)?;
    let result = with_pool(a.workers.count(), || gc_test(&panel, &a.source, &a.target, &config))??;
    if matches!(a.config.lags, LagArg::Cao) {
        eprintln!("selected lag: {}", result.lags_used);
    }
    emit_json(&result, a.out.as_deref())
}

fn cmd_network(a: &NetworkArgs) -> CliResult {
    let config = a.config.to_config();
    config.validate()?;
    let panel = read_panel(&a.input)?;
    let matrix: PValueMatrix = with_pool(a.workers.count(), || -> Result<PValueMatrix, CliError> {
        let lag = resolve_lags(&panel, &config)?;
        if matches!(a.config.lags, LagArg::Cao) {
            eprintln!("selected lag: {lag}");
        }
        Ok(gc_network_with_lag(&panel, &config, lag)?)
    })??;
    let failed = matrix.failures.len();
    let doc = PValueDocument {
        series: matrix.series,
        pvalues: matrix.pvalues,
        config: Some(config.with_lags(matrix.lag_used)),
        lag_used: Some(matrix.lag_used),
        failures: matrix.failures,
    };
    emit_json(&doc, a.out.as_deref())?;
    if failed > a.max_failures {
        return Err(CliError::Runtime(format!("{failed} pair(s) failed (allowed {})", a.max_failures)));
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult {
    let doc: PValueDocument = read_json(&a.pvalues)?;
    let truth_doc: TruthDocument = read_json(&a.truth)?;
    let truth = GroundTruth::from_document(&truth_doc).map_err(|e| CliError::Usage(format!("{}: {e}", a.truth.display())))?;
    let matrix = PValueMatrix { series: doc.series, pvalues: doc.pvalues, lag_used: doc.lag_used.unwrap_or(0), failures: Vec::new() };
    let scores = EdgeScores::from_matrix(&matrix, &truth).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = evaluate_single(&scores, a.threshold)?;
    emit_json(&report, a.out.as_deref())
}

fn cmd_bench(a: &BenchArgs) -> CliResult {
    let mut plan = ExperimentPlan::new(
        a.networks.clone(),
        a.lengths.iter().map(|&l| l as usize).collect(),
        a.sets as usize,
        a.seed,
        a.workers.count(),
    );
    plan.config = a.config.to_config();
    plan.burn_in = a.burn_in;
    plan.threshold = a.threshold;
    plan.validate()?;
    create_dir(&a.out_dir)?;
    let result = run_experiment(&plan)?;
    for s in &result.summaries {
        if let Some(lag) = s.lag {
            eprintln!("{} length {}: lag {lag}, {} of {} sets failed", s.network, s.length, s.n_failed, s.n_sets);
        }
    }

    let metrics = a.out_dir.join("metrics.csv");
    let f = File::create(&metrics).map_err(|e| io_err(&metrics, e))?;
    write_metrics_csv(BufWriter::new(f), &result.reports).map_err(|e| io_err(&metrics, e))?;
    let runtimes = a.out_dir.join("runtimes.csv");
    let f = File::create(&runtimes).map_err(|e| io_err(&runtimes, e))?;
    write_runtimes_csv(BufWriter::new(f), &result.runtimes).map_err(|e| io_err(&runtimes, e))?;
    let summaries = a.out_dir.join("summaries.json");
    let f = File::create(&summaries).map_err(|e| io_err(&summaries, e))?;
    write_summaries_json(BufWriter::new(f), &result.summaries).map_err(|e| io_err(&summaries, e))?;
    let failures = a.out_dir.join("failures.json");
    emit_json(&result.failures, Some(&failures))?;
    for p in [&metrics, &summaries, &runtimes, &failures] {
        println!("{}", p.display());
    }
    Ok(())
}
