use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use isobayes::dhz::{dhz_estimate, dhz_interval, DhzEstimate, DhzInterval};
use isobayes::grid::{compute_bin_stats, RegressionDataset};
use isobayes::harness::{coverage_study, load_csv, write_json, DhzCritical, GridRule, PriorConfig, StudyConfig};
use isobayes::immersion::{isotonize_surface, ImmersionKind};
use isobayes::intervals::{
    builtin_table, credible_interval, immersion_draws_from_params, recalibrate_level, CredibleInterval, Sided, ZbTable,
};
use isobayes::limitsim::{DriftSpec, LimitSimulator, SimConfig};
use isobayes::posterior::{posterior_params, sigma2_mmle, Sigma2Source};
use isobayes::rng::Substreams;
use isobayes::{Error, Result};

#[derive(Parser)]
#[command(
    name = "isobayes",
    version,
    about = "Bayesian inference for coordinatewise monotone regression"
)]
struct Cli {
    /// Master seed; overrides any seed in a configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file (defaults to standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isotonize the posterior mean on the grid.
    Fit(FitArgs),
    /// Credible interval at one point.
    Interval(IntervalArgs),
    /// Tabulate the limiting coverage distribution by simulation.
    SimulateZb(SimulateArgs),
    /// Coverage study from a TOML configuration.
    Coverage(CoverageArgs),
    /// Compare with the frequentist block-estimator interval.
    CompareDhz(CompareArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Dataset CSV with header x1,...,xd,y.
    #[arg(long)]
    data: PathBuf,
    /// Cells per axis, e.g. `10,10`; defaults to the cube-root rule.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    /// Prior hyperparameters (TOML with zeta, lambda2 and variance).
    #[arg(long)]
    prior: Option<PathBuf>,
    /// lower, upper or average.
    #[arg(long, default_value = "average")]
    kind: ImmersionKind,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct PointArgs {
    /// Evaluation point, e.g. `0.5,0.5`.
    #[arg(long, value_delimiter = ',', required = true)]
    x0: Vec<f64>,
    /// One minus the credibility.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// two-sided or one-sided.
    #[arg(long, default_value = "two-sided")]
    sided: Sided,
    #[arg(long, default_value_t = 2000)]
    draws: usize,
}

#[derive(Args)]
struct IntervalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    point: PointArgs,
    /// Also report the interval recalibrated to the nominal coverage.
    #[arg(long)]
    recalibrate: bool,
    /// Smoothness vector selecting the table, e.g. `1,1`; all ones by default.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<u32>>,
    /// Table CSV to use instead of the shipped tables.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    d: usize,
    /// Smoothness vector, e.g. `1,1`; all ones by default.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<u32>>,
    /// 1, 2, 3 or `all`.
    #[arg(long, default_value = "all")]
    kind: String,
    /// Lattice steps per unit.
    #[arg(long)]
    m: Option<usize>,
    /// Horizon on every axis.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    outer: usize,
    #[arg(long, default_value_t = 200)]
    inner: usize,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Critical values, e.g. `0.05=2.1,0.1=1.8`.
    #[arg(long, value_delimiter = ',')]
    c_gamma: Vec<String>,
    /// Study configuration; runs a coverage study with all three methods.
    #[arg(long, conflicts_with = "data")]
    config: Option<PathBuf>,
    /// Single dataset; compares the two intervals at `--x0`.
    #[arg(long, requires = "x0")]
    data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    #[arg(long, default_value_t = 2000)]
    draws: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Fit(a) => fit(&a, out),
        Command::Interval(a) => interval(&a, seed, out),
        Command::SimulateZb(a) => simulate(&a, seed, out),
        Command::Coverage(a) => {
            let mut config = StudyConfig::load(&a.config)?;
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            emit(&coverage_study(&config)?, out)
        }
        Command::CompareDhz(a) => compare(&a, cli.seed, out),
    }
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    write_json(value, writer(out)?)
}

/// Missing or unreadable datasets count as data errors.
fn load_data(path: &Path) -> Result<RegressionDataset> {
    load_csv(path).map_err(|e| match e {
        Error::Io(io) => Error::Schema {
            path: path.to_path_buf(),
            message: io.to_string(),
        },
        other => other,
    })
}

/// `--x0` problems are argument errors, not data errors.
fn check_x0(x0: &[f64], d: usize) -> Result<()> {
    if x0.len() != d {
        return Err(Error::Config(format!(
            "--x0 has {} coordinates but the data have {d}",
            x0.len()
        )));
    }
    if let Some(v) = x0.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Config(format!("--x0 coordinate {v} is outside [0, 1]")));
    }
    Ok(())
}

struct Model {
    data: RegressionDataset,
    stats: isobayes::grid::BinStats,
    prior: isobayes::posterior::PriorSpec,
}

fn model(a: &ModelArgs) -> Result<Model> {
    let data = load_data(&a.data)?;
    let rule = match &a.cells {
        Some(cells) => GridRule::Fixed { cells: cells.clone() },
        None => GridRule::CubeRootLoglog,
    };
    let grid = rule.grid(data.len(), data.dim())?;
    let prior_config = match &a.prior {
        Some(p) => PriorConfig::from_toml(&std::fs::read_to_string(p)?)?,
        None => PriorConfig::default(),
    };
    let prior = prior_config.build(&grid)?;
    let stats = compute_bin_stats(&data, &grid)?;
    Ok(Model { data, stats, prior })
}

#[derive(Serialize)]
struct FitOutput {
    kind: ImmersionKind,
    cells: Vec<usize>,
    counts: Vec<u64>,
    sigma2: f64,
    /// Posterior means before isotonization, row-major.
    posterior_mean: Vec<f64>,
    /// Isotonized heights, row-major.
    fitted: Vec<f64>,
}

fn fit(a: &FitArgs, out: Option<&Path>) -> Result<()> {
    let m = model(&a.model)?;
    let params = posterior_params(&m.stats, &m.prior, &m.data, Sigma2Source::Auto)?;
    let surface = isotonize_surface(&params.mean, &m.stats, a.model.kind)?;
    emit(
        &FitOutput {
            kind: a.model.kind,
            cells: m.stats.grid().cells().to_vec(),
            counts: m.stats.counts().to_vec(),
            sigma2: sigma2_mmle(&m.stats, &m.prior, &m.data)?,
            posterior_mean: params.mean,
            fitted: surface.into_theta(),
        },
        out,
    )
}

fn credible(
    m: &Model,
    p: &PointArgs,
    kind: ImmersionKind,
    seed: u64,
    credibility: &[f64],
) -> Result<Vec<CredibleInterval>> {
    let params = posterior_params(&m.stats, &m.prior, &m.data, Sigma2Source::Auto)?;
    let draws = immersion_draws_from_params(&m.stats, &params, &p.x0, kind, p.draws, &Substreams::new(seed))?;
    credibility
        .iter()
        .map(|&c| credible_interval(&draws, c, p.sided))
        .collect()
}

fn table_for(kind: ImmersionKind, beta: &[u32], path: Option<&Path>) -> Result<ZbTable> {
    match path {
        Some(p) => ZbTable::load(p, kind, beta),
        None => builtin_table(kind, beta)
            .ok_or_else(|| Error::Config(format!("no shipped table for kind {} and beta {beta:?}", kind.index()))),
    }
}

#[derive(Serialize)]
struct IntervalOutput {
    n: usize,
    cells: Vec<usize>,
    interval: CredibleInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    recalibrated: Option<CredibleInterval>,
}

fn interval(a: &IntervalArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let m = model(&a.model)?;
    check_x0(&a.point.x0, m.data.dim())?;
    let target = 1.0 - a.point.level;
    let mut levels = vec![target];
    if a.recalibrate {
        let beta = a.beta.clone().unwrap_or_else(|| vec![1; m.data.dim()]);
        let table = table_for(a.model.kind, &beta, a.table.as_deref())?;
        levels.push(recalibrate_level(target, &table, a.point.sided)?);
    }
    let mut found = credible(&m, &a.point, a.model.kind, seed, &levels)?.into_iter();
    emit(
        &IntervalOutput {
            n: m.data.len(),
            cells: m.stats.grid().cells().to_vec(),
            interval: found.next().expect("one interval per level"),
            recalibrated: found.next(),
        },
        out,
    )
}

fn simulate(a: &SimulateArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let beta = a.beta.clone().unwrap_or_else(|| vec![1; a.d]);
    if beta.len() != a.d {
        return Err(Error::Config(format!(
            "--beta has {} entries but --d is {}",
            beta.len(),
            a.d
        )));
    }
    let standard = SimConfig::standard(a.d)?;
    let m = a.m.unwrap_or(standard.m());
    let config = match a.horizon {
        Some(c) => SimConfig::square(a.d, m, c)?,
        None => SimConfig::new(m, standard.u_horizon().to_vec(), standard.v_horizon().to_vec())?,
    };
    let kinds: Vec<ImmersionKind> = match a.kind.as_str() {
        "all" => ImmersionKind::ALL.to_vec(),
        k => vec![k.parse()?],
    };
    let sim = LimitSimulator::new(config, DriftSpec::new(beta)?)?;
    let samples = sim.samples(a.outer, a.inner, &Substreams::new(seed))?;
    let tables = kinds.iter().map(|&k| samples.table(k)).collect::<Result<Vec<_>>>()?;
    let mut w = writer(out)?;
    ZbTable::write_all_csv(&tables, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_c_gamma(specs: &[String]) -> Result<Vec<DhzCritical>> {
    if specs.is_empty() {
        return Err(Error::Config(
            "compare-dhz needs explicit critical values, e.g. --c-gamma 0.05=2.1,0.1=1.8".into(),
        ));
    }
    specs
        .iter()
        .map(|s| {
            let bad = || Error::Config(format!("cannot read critical value {s:?}; expected level=value"));
            let (l, c) = s.split_once('=').ok_or_else(bad)?;
            let level: f64 = l.trim().parse().map_err(|_| bad())?;
            let c_gamma: f64 = c.trim().parse().map_err(|_| bad())?;
            if !(level > 0.0 && level < 1.0) || c_gamma.is_nan() || c_gamma < 0.0 {
                return Err(bad());
            }
            Ok(DhzCritical { level, c_gamma })
        })
        .collect()
}

#[derive(Serialize)]
struct ComparisonRow {
    level: f64,
    c_gamma: f64,
    bayes: CredibleInterval,
    dhz: DhzInterval,
}

#[derive(Serialize)]
struct Comparison {
    n: usize,
    x0: Vec<f64>,
    sigma_hat: f64,
    estimate: DhzEstimate,
    rows: Vec<ComparisonRow>,
}

fn compare(a: &CompareArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let critical = parse_c_gamma(&a.c_gamma)?;
    if let Some(path) = &a.config {
        let mut config = StudyConfig::load(path)?;
        if let Some(s) = seed {
            config.seed = s;
        }
        config.levels = critical.iter().map(|c| c.level).collect();
        config.dhz = critical;
        return emit(&coverage_study(&config)?, out);
    }
    let Some(data_path) = &a.data else {
        return Err(Error::Config("compare-dhz needs --config or --data".into()));
    };
    let x0 = a.x0.clone().expect("clap requires --x0 with --data");
    let m = model(&ModelArgs {
        data: data_path.clone(),
        cells: a.cells.clone(),
        prior: None,
        kind: ImmersionKind::Average,
    })?;
    check_x0(&x0, m.data.dim())?;
    let point = PointArgs {
        x0: x0.clone(),
        level: 0.05,
        sided: Sided::TwoSidedEqualTail,
        draws: a.draws,
    };
    let credibility: Vec<f64> = critical.iter().map(|c| 1.0 - c.level).collect();
    let bayes = credible(&m, &point, ImmersionKind::Average, seed.unwrap_or(0), &credibility)?;
    let estimate = dhz_estimate(&m.data, &x0)?;
    let sigma_hat = sigma2_mmle(&m.stats, &m.prior, &m.data)?.sqrt();
    let rows = critical
        .iter()
        .zip(bayes)
        .map(|(c, b)| {
            Ok(ComparisonRow {
                level: c.level,
                c_gamma: c.c_gamma,
                bayes: b,
                dhz: dhz_interval(&estimate, sigma_hat, c.c_gamma)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(
        &Comparison {
            n: m.data.len(),
            x0,
            sigma_hat,
            estimate,
            rows,
        },
        out,
    )
}
