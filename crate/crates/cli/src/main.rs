use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use objper::io::{
    analyze, parse_series, write_atomic, AnalysisOptions, ComponentFile, IcPathFile, InputKind,
};
use objper::simulation::{
    run_monte_carlo, DirichletConfig, DistributionConfig, MonteCarloReport, NetworkConfig,
    PipelineOptions, DEFAULT_REPLICATES, FAST_REPLICATES,
};
use objper::tuning::Criterion;
use objper::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "objper",
    version,
    about = "Period estimation for random objects in metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan candidate periods, select the penalty and extract the component.
    Scan(AnalyzeArgs),
    /// Extract the periodic component, at a given or the selected period.
    Component(ComponentArgs),
    /// Print the lambda path and the information criterion per segment.
    IcPath(AnalyzeArgs),
    /// Monte Carlo runs of the full pipeline on a simulated family.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    SphereComposition,
    Laplacian,
    Wasserstein1d,
    Euclidean,
}

impl From<SpaceArg> for InputKind {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::SphereComposition => InputKind::SphereComposition,
            SpaceArg::Laplacian => InputKind::Laplacian,
            SpaceArg::Wasserstein1d => InputKind::Wasserstein1d,
            SpaceArg::Euclidean => InputKind::Euclidean,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    LogRss,
    Rss,
    ScaledRss,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::LogRss => Criterion::LogRss,
            CriterionArg::Rss => Criterion::Rss,
            CriterionArg::ScaledRss => Criterion::ScaledRss,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    space: SpaceArg,
    /// Largest candidate period (default round(4 sqrt(T))).
    #[arg(long)]
    theta_max: Option<usize>,
    #[arg(long, value_enum, default_value = "rss")]
    criterion: CriterionArg,
    /// Replace g(T) in the information criterion.
    #[arg(long)]
    g_override: Option<f64>,
    /// Emit penalized-loss curves at these multiples of the selected lambda.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    lambda_multipliers: Vec<f64>,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ComponentArgs {
    #[command(flatten)]
    common: AnalyzeArgs,
    /// Period to extract at; defaults to the selected one.
    #[arg(long)]
    theta: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Dirichlet,
    Network,
    Distribution,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    /// p(theta_hat = theta0)
    Hits,
    /// mean component MSE (squared distance)
    Mse,
    /// mean component distance (unsquared)
    Distance,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    /// Sample size.
    #[arg(long = "T", visible_alias = "len", default_value_t = 240)]
    len: usize,
    /// Dirichlet concentration (smaller means noisier).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 12)]
    theta0: usize,
    /// Network node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Network base edge weight.
    #[arg(long)]
    base: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Quantile grid size for the distribution family.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Use 50 replicates unless --reps is given.
    #[arg(long)]
    fast: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "rss")]
    criterion: CriterionArg,
    #[arg(long)]
    theta_max: Option<usize>,
    #[arg(long)]
    g_override: Option<f64>,
    /// Print a T x alpha table over T in {100, 240, 500}, alpha in {1, 0.5, 0.1}.
    #[arg(long, value_enum)]
    table: Option<TableArg>,
    /// Include wall-clock figures in the report.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

struct Failure {
    kind: String,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            code: if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        kind: "usage".into(),
        message: message.into(),
        code: EXIT_INPUT,
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(Failure::from),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::from(Error::Io(e)))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::from(Error::Json(e)))
}

fn analysis_options(a: &AnalyzeArgs, component_period: Option<usize>) -> AnalysisOptions {
    AnalysisOptions {
        theta_max: a.theta_max,
        criterion: a.criterion.into(),
        g_override: a.g_override,
        lambda_multipliers: a.lambda_multipliers.clone(),
        component_period,
    }
}

fn run_analysis(
    a: &AnalyzeArgs,
    command: &str,
    period: Option<usize>,
) -> Result<objper::io::ResultFile, Failure> {
    let series = parse_series(&a.input, a.space.into())?;
    let input = Some(a.input.display().to_string());
    Ok(analyze(
        &series,
        &analysis_options(a, period),
        command,
        input,
    )?)
}

fn pipeline_options(s: &SimulateArgs) -> PipelineOptions {
    PipelineOptions {
        criterion: s.criterion.into(),
        theta_max: s.theta_max,
        g_override: s.g_override,
    }
}

fn simulate_one(s: &SimulateArgs, len: usize, alpha: f64) -> Result<MonteCarloReport, Failure> {
    let reps = s.reps.unwrap_or(if s.fast {
        FAST_REPLICATES
    } else {
        DEFAULT_REPLICATES
    });
    let options = pipeline_options(s);
    let mut report = match s.family {
        FamilyArg::Dirichlet => {
            let cfg = DirichletConfig {
                len,
                alpha,
                theta0: s.theta0,
                seed: s.seed,
            };
            run_monte_carlo(&cfg, reps, options)?
        }
        FamilyArg::Network => {
            let d = NetworkConfig::default();
            let cfg = NetworkConfig {
                len,
                theta0: s.theta0,
                nodes: s.nodes.unwrap_or(d.nodes),
                base: s.base.unwrap_or(d.base),
                amplitude: s.amplitude.unwrap_or(d.amplitude),
                noise: s.noise.unwrap_or(d.noise),
                seed: s.seed,
            };
            run_monte_carlo(&cfg, reps, options)?
        }
        FamilyArg::Distribution => {
            let d = DistributionConfig::default();
            let cfg = DistributionConfig {
                len,
                theta0: s.theta0,
                grid: s.grid.unwrap_or(d.grid),
                amplitude: s.amplitude.unwrap_or(d.amplitude),
                noise: s.noise.unwrap_or(d.noise),
                seed: s.seed,
            };
            run_monte_carlo(&cfg, reps, options)?
        }
    };
    if !s.timing {
        report.timing = None;
    }
    Ok(report)
}

fn simulate_table(s: &SimulateArgs, table: TableArg) -> Result<String, Failure> {
    if !matches!(s.family, FamilyArg::Dirichlet) {
        return Err(usage("--table is defined for the dirichlet family only"));
    }
    let lens = [100, 240, 500];
    let alphas = [1.0, 0.5, 0.1];
    let (title, cell): (&str, fn(&MonteCarloReport) -> Option<f64>) = match table {
        TableArg::Hits => ("p(theta_hat = theta0)", |r| Some(r.hit_probability)),
        TableArg::Mse => ("mean component MSE", |r| r.mse.map(|m| m.mean)),
        TableArg::Distance => ("mean component distance", |r| {
            r.mean_distance.map(|m| m.mean)
        }),
    };
    let mut out = format!(
        "{title}, criterion {}, seed {}\n{:>6}",
        Criterion::from(s.criterion).as_str(),
        s.seed,
        "T"
    );
    for a in alphas {
        out.push_str(&format!(" {:>9}", format!("alpha={a}")));
    }
    out.push('\n');
    for len in lens {
        out.push_str(&format!("{len:>6}"));
        for a in alphas {
            let r = simulate_one(s, len, a)?;
            match cell(&r) {
                Some(v) => out.push_str(&format!(" {v:>9.3}")),
                None => out.push_str(&format!(" {:>9}", "n/a")),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("OBJPER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            usage(format!(
                "OBJPER_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot configure {n} worker threads: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Scan(a) => {
            let result = run_analysis(&a, "scan", None)?;
            emit(a.output.as_deref(), &result.to_json()?)
        }
        Command::IcPath(a) => {
            let result: IcPathFile = run_analysis(&a, "ic-path", None)?.into();
            emit(a.output.as_deref(), &to_json(&result)?)
        }
        Command::Component(c) => {
            let result: ComponentFile = run_analysis(&c.common, "component", c.theta)?.into();
            emit(c.common.output.as_deref(), &to_json(&result)?)
        }
        Command::Simulate(s) => {
            let text = match s.table {
                Some(t) => simulate_table(&s, t)?,
                None => to_json(&simulate_one(&s, s.len, s.alpha)?)?,
            };
            emit(s.output.as_deref(), &text)
        }
    }
}

fn report(f: &Failure) {
    let doc = serde_json::json!({
        "error": {
            "kind": f.kind,
            "message": f.message,
            "exit_code": f.code,
        }
    });
    eprintln!("{doc}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = usage(e.to_string().trim_end());
            report(&f);
            return ExitCode::from(f.code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}
