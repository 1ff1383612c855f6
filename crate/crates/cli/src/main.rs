use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// A bad invocation: missing inputs, malformed config, conflicting flags.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "actspace", version, about = "Activity spaces from GPS traces on a polygon-road map")]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean GPS data and select the map entities around it.
    Ingest(IngestArgs),
    /// Time-use table from GPS data and a map.
    Estimate(EstimateArgs),
    /// Level-gamma activity spaces from a time-use table.
    ActivitySpace(SpaceArgs),
    /// Cluster days by their activity patterns.
    Cluster(ClusterArgs),
    /// Cumulative activity spaces and last-crossing times.
    Stability(StabilityArgs),
    /// Simulate a study from a scenario.
    Simulate(SimulateArgs),
    /// Monte Carlo comparison of the estimators.
    Evaluate(EvaluateArgs),
    /// Display-only privacy layers.
    PrivacyRender(PrivacyArgs),
    /// SVG figures from saved outputs.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    gps: Option<PathBuf>,
    /// GIS layer (GeoJSON or CSV); repeat for several layers.
    #[arg(long)]
    gis: Vec<PathBuf>,
    /// Side of the study bounding box, in map units.
    #[arg(long)]
    theta: Option<f64>,
    /// Grid step of the bounding-box search.
    #[arg(long)]
    r: Option<f64>,
    /// Distance cutoff for polygon selection.
    #[arg(long)]
    d0: Option<f64>,
    /// Centroid distance below which polygons merge.
    #[arg(long)]
    cutoff: Option<f64>,
}

#[derive(Args, Debug)]
struct DayInputs {
    #[arg(long)]
    gps: Option<PathBuf>,
    /// Map entities (GeoJSON or CSV).
    #[arg(long)]
    entities: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    inputs: DayInputs,
    /// naive, weighted or adjusted.
    #[arg(long)]
    mode: Option<String>,
    /// Distance threshold of the adjusted estimator.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args, Debug)]
struct SpaceArgs {
    /// Time-use table CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// all, polygon, road or composed.
    #[arg(long)]
    class: Option<String>,
    /// Minimize total entity weight instead of entity count.
    #[arg(long)]
    weighted: bool,
    /// Map entities supplying weights.
    #[arg(long)]
    entities: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[command(flatten)]
    inputs: DayInputs,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Jitter-loop mass threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Number of clusters.
    #[arg(long, conflicts_with = "height")]
    k: Option<usize>,
    /// Cut height instead of a cluster count.
    #[arg(long)]
    height: Option<f64>,
    /// Outlier threshold in standard deviations.
    #[arg(long)]
    alpha: Option<f64>,
    /// zero or dwell-difference.
    #[arg(long)]
    match_cost: Option<String>,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[command(flatten)]
    inputs: DayInputs,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// polygon or road; both when omitted.
    #[arg(long)]
    class: Option<String>,
    /// Coverage levels c.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    #[arg(long)]
    xi: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario JSON; the built-in six-polygon map when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of days.
    #[arg(long)]
    n: Option<usize>,
    /// Observations per day.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// even or realistic.
    #[arg(long)]
    timestamps: Option<String>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    timestamps: Vec<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also fit the RMISE rate in n.
    #[arg(long)]
    convergence: bool,
}

#[derive(Args, Debug)]
struct PrivacyArgs {
    #[command(flatten)]
    inputs: DayInputs,
    /// Another road layer thinned consistently with the primary one.
    #[arg(long)]
    secondary: Option<PathBuf>,
    /// Segments farther than this from every record may be thinned.
    #[arg(long)]
    r0: Option<f64>,
    /// Fraction of eligible segments removed.
    #[arg(long)]
    q: Option<f64>,
    /// Side of the squares replacing polygons.
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    overlap_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Merge tree JSON.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Cluster labels CSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// LCT CSV.
    #[arg(long)]
    lct: Option<PathBuf>,
}

fn some_vec<T: Clone>(v: &[T]) -> Option<Vec<T>> {
    (!v.is_empty()).then(|| v.to_vec())
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Estimate(_) => "estimate",
            Command::ActivitySpace(_) => "activity-space",
            Command::Cluster(_) => "cluster",
            Command::Stability(_) => "stability",
            Command::Simulate(_) => "simulate",
            Command::Evaluate(_) => "evaluate",
            Command::PrivacyRender(_) => "privacy-render",
            Command::Plot(_) => "plot",
        }
    }

    /// The flags given on the command line, as a partial config.
    fn flags(&self) -> RunConfig {
        let d = RunConfig::default();
        match self {
            Command::Ingest(a) => RunConfig {
                gps: a.gps.clone(),
                gis: some_vec(&a.gis),
                theta: a.theta,
                r: a.r,
                d0: a.d0,
                cutoff: a.cutoff,
                ..d
            },
            Command::Estimate(a) => RunConfig {
                gps: a.inputs.gps.clone(),
                entities: a.inputs.entities.clone(),
                mode: a.mode.clone(),
                epsilon: a.epsilon,
                ..d
            },
            Command::ActivitySpace(a) => RunConfig {
                table: a.table.clone(),
                gamma: some_vec(&a.gamma),
                class: a.class.clone(),
                weighted: flag(a.weighted),
                entities: a.entities.clone(),
                ..d
            },
            Command::Cluster(a) => RunConfig {
                gps: a.inputs.gps.clone(),
                entities: a.inputs.entities.clone(),
                epsilon: a.epsilon,
                tau: a.tau,
                k: a.k,
                height: a.height,
                alpha: a.alpha,
                match_cost: a.match_cost.clone(),
                ..d
            },
            Command::Stability(a) => RunConfig {
                gps: a.inputs.gps.clone(),
                entities: a.inputs.entities.clone(),
                mode: a.mode.clone(),
                epsilon: a.epsilon,
                class: a.class.clone(),
                levels: some_vec(&a.levels),
                xi: a.xi,
                ..d
            },
            Command::Simulate(a) => RunConfig {
                scenario: a.scenario.clone(),
                seed: a.seed,
                n: a.n.map(|n| vec![n]),
                m: a.m.map(|m| vec![m]),
                sigma: a.sigma,
                timestamps: a.timestamps.clone().map(|t| vec![t]),
                ..d
            },
            Command::Evaluate(a) => RunConfig {
                scenario: a.scenario.clone(),
                n: some_vec(&a.n),
                m: some_vec(&a.m),
                timestamps: some_vec(&a.timestamps),
                epsilon: a.epsilon,
                sigma: a.sigma,
                replicates: a.replicates,
                seed: a.seed,
                convergence: flag(a.convergence),
                ..d
            },
            Command::PrivacyRender(a) => RunConfig {
                gps: a.inputs.gps.clone(),
                entities: a.inputs.entities.clone(),
                secondary: a.secondary.clone(),
                r0: a.r0,
                q: a.q,
                side: a.side,
                overlap_tol: a.overlap_tol,
                seed: a.seed,
                ..d
            },
            Command::Plot(a) => RunConfig {
                table: a.table.clone(),
                entities: a.entities.clone(),
                tree: a.tree.clone(),
                labels: a.labels.clone(),
                lct: a.lct.clone(),
                ..d
            },
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<actspace::Error>() {
        Some(actspace::Error::Infeasible(_)) => 3,
        Some(actspace::Error::InvalidParameter { .. }) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(UsageError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.merged(&cli.command.flags());
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    commands::run(cli.command.name(), &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
