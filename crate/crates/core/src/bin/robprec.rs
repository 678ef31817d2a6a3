use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robprec::experiment::{self, ExperimentConfig};
use robprec::io::{read_data_csv, write_matrix_csv, Diagnostics};
use robprec::metrics::DEFAULT_EDGE_TOL;
use robprec::psd::{DEFAULT_DELTA, DEFAULT_OGK_ITERATIONS, DEFAULT_REWEIGHT_QUANTILE};
use robprec::regularize::{DEFAULT_MAX_OUTER_ITERS, DEFAULT_TOL};
use robprec::scale::{calibrate_table, DEFAULT_TRIM_D};
use robprec::{Error, LambdaPolicy, PipelineSpec, PsdMethod, ScaleKind};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "robprec", version, about = "Robust sparse precision matrix estimation")]
struct Cli {
    /// Master seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output file (standard output when omitted).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a sparse precision matrix from a CSV of observations.
    Estimate(EstimateArgs),
    /// Run a contamination experiment and write per-replication results.
    Simulate(SimulateArgs),
    /// Count how often each precision entry is estimated as nonzero.
    SupportCounts(ConfigArgs),
    /// Monte Carlo Gaussian-consistency constants for the scale estimators.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV, one observation per row; a header row is optional.
    #[arg(long, short)]
    input: PathBuf,
    /// mad | iqr | qn | qn-corrected | tau | pn | pn-trimmed
    #[arg(long, default_value = "qn")]
    scale: String,
    /// npd | ogk | ogkw
    #[arg(long, default_value = "npd")]
    psd: String,
    #[arg(long)]
    lambda: f64,
    /// Use the classical sample covariance instead of a robust estimate.
    #[arg(long)]
    classical: bool,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_OGK_ITERATIONS)]
    ogk_iterations: usize,
    #[arg(long, default_value_t = DEFAULT_REWEIGHT_QUANTILE)]
    reweight_quantile: f64,
    #[arg(long, default_value_t = DEFAULT_TRIM_D)]
    trim_d: f64,
    /// Leave the diagonal of the precision matrix unpenalized.
    #[arg(long)]
    no_diagonal_penalty: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_OUTER_ITERS)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Diagnostics JSON path; defaults to `<output>.json`, or stderr.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// PRIAL summary CSV; defaults to `<output>.summary.csv` when --output is set.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',', default_value = "mad,iqr,qn,tau,pn,pn-trimmed")]
    kinds: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    n_cal: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
}

enum Failure {
    Input(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Input(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn estimate(cli: &Cli, args: &EstimateArgs) -> Result<(), Failure> {
    let file = File::open(&args.input)
        .map_err(|e| Failure::Input(format!("cannot open {}: {e}", args.input.display())))?;
    let (header, x) = read_data_csv(file)?;

    let lambda = LambdaPolicy::Fixed(args.lambda);
    let mut spec = if args.classical {
        PipelineSpec::classical(lambda)
    } else {
        let scale = match ScaleKind::from_name(&args.scale)? {
            ScaleKind::PnTrimmed { .. } => ScaleKind::PnTrimmed { d: args.trim_d },
            k => k,
        };
        let psd = match PsdMethod::from_name(&args.psd)? {
            PsdMethod::Npd { .. } => PsdMethod::Npd { delta: args.delta },
            PsdMethod::Ogk { .. } => PsdMethod::Ogk { iterations: args.ogk_iterations },
            PsdMethod::OgkReweighted { .. } => PsdMethod::OgkReweighted {
                iterations: args.ogk_iterations,
                quantile: args.reweight_quantile,
            },
        };
        PipelineSpec::robust(scale, psd, lambda)
    };
    spec.glasso.penalize_diagonal = !args.no_diagonal_penalty;
    spec.glasso.max_outer_iters = args.max_iter;
    spec.glasso.tol = args.tol;

    let (est, converged) = match spec.estimate(&x, args.lambda) {
        Ok(e) => (e, true),
        Err(Error::NotConverged { estimate }) => (*estimate, false),
        Err(e) => return Err(e.into()),
    };
    write_matrix_csv(&est.theta, header.as_deref(), open_output(cli.output.as_deref())?)?;

    let diag = Diagnostics::new(&spec.identity(), &est, DEFAULT_EDGE_TOL);
    let json = serde_json::to_string_pretty(&diag).expect("diagnostics serialize");
    match args.diagnostics.clone().or_else(|| cli.output.as_deref().map(|p| with_suffix(p, ".json"))) {
        Some(p) => std::fs::write(&p, json + "\n")
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display())))?,
        None => eprintln!("{json}"),
    }
    if converged {
        Ok(())
    } else {
        Err(Failure::Numeric(format!(
            "graphical lasso did not converge in {} sweeps; the last iterate was written",
            est.outer_iters
        )))
    }
}

fn load_config(cli: &Cli, args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = load_config(cli, &args.config)?;
    log::info!(
        "{} replications x {} levels x {} pipelines",
        cfg.replications,
        cfg.sweep.len(),
        cfg.pipelines.len()
    );
    let results = experiment::run_experiment(&cfg, cli.workers)?;
    let failed = results.rows().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} result rows carry an error tag");
    }
    experiment::write_results_csv(&results, open_output(cli.output.as_deref())?)?;
    let summary_path = args
        .summary
        .clone()
        .or_else(|| cli.output.as_deref().map(|p| p.with_extension("summary.csv")));
    let summary = experiment::summarize(&results);
    match summary_path {
        Some(p) => experiment::write_summary_csv(&summary, open_output(Some(&p))?)?,
        None => experiment::write_summary_csv(&summary, io::stderr().lock())?,
    }
    Ok(())
}

fn support_counts(cli: &Cli, args: &ConfigArgs) -> Result<(), Failure> {
    let cfg = load_config(cli, args)?;
    let results = experiment::run_experiment(&cfg, cli.workers)?;
    experiment::write_support_csv(&cfg, &results, open_output(cli.output.as_deref())?)?;
    Ok(())
}

fn calibrate(cli: &Cli, args: &CalibrateArgs) -> Result<(), Failure> {
    let kinds = args
        .kinds
        .iter()
        .map(|k| ScaleKind::from_name(k.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let table = calibrate_table(&kinds, args.n_cal, args.reps, cli.seed.unwrap_or(0))?;
    let mut out = serde_json::Map::new();
    for k in &kinds {
        out.insert(k.name().to_string(), table.get(*k).into());
    }
    let mut w = open_output(cli.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &out).map_err(|e| Failure::Input(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => estimate(&cli, a),
        Command::Simulate(a) => simulate(&cli, a),
        Command::SupportCounts(a) => support_counts(&cli, a),
        Command::Calibrate(a) => calibrate(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
