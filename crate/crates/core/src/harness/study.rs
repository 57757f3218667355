use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functions::{generate_dataset, TestFunction};
use crate::dhz::{dhz_estimate, dhz_interval};
use crate::error::{Error, Result};
use crate::grid::{compute_bin_stats, GridSpec};
use crate::immersion::ImmersionKind;
use crate::intervals::{
    builtin_table, immersion_draws_from_params, interval_from_sorted, recalibrate_level, Sided, ZbTable,
};
use crate::posterior::{posterior_params, sigma2_mmle, PriorSpec, Sigma2Source, VarianceMode, DEFAULT_LAMBDA2};
use crate::rng::Substreams;

/// How the number of cells per axis follows from `n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRule {
    /// `⌈n^{1/3} ln ln n⌉`
    #[default]
    CubeRootLoglog,
    /// `⌈n^{1/4} log₁₀ n⌉`
    QuarterRootLog10,
    Fixed {
        cells: Vec<usize>,
    },
}

impl GridRule {
    pub fn grid(&self, n: usize, d: usize) -> Result<GridSpec> {
        match self {
            GridRule::CubeRootLoglog => GridSpec::cube_root_loglog(n, d),
            GridRule::QuarterRootLog10 => GridSpec::quarter_root_log10(n, d),
            GridRule::Fixed { cells } if cells.len() == d => GridSpec::new(cells.clone()),
            GridRule::Fixed { cells } => Err(Error::config(format!(
                "fixed grid has {} axes, data have {d}",
                cells.len()
            ))),
        }
    }
}

/// A scalar applied to every cell, or one value per cell in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellValues {
    Scalar(f64),
    PerCell(Vec<f64>),
}

impl CellValues {
    fn expand(&self, grid: &GridSpec, what: &str) -> Result<Vec<f64>> {
        match self {
            CellValues::Scalar(v) => Ok(vec![*v; grid.len()]),
            CellValues::PerCell(v) if v.len() == grid.len() => Ok(v.clone()),
            CellValues::PerCell(v) => Err(Error::config(format!(
                "{what} lists {} values for {} cells",
                v.len(),
                grid.len()
            ))),
        }
    }
}

/// Prior hyperparameters as they appear in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default = "PriorConfig::default_zeta")]
    pub zeta: CellValues,
    #[serde(default = "PriorConfig::default_lambda2")]
    pub lambda2: CellValues,
    #[serde(default)]
    pub variance: VarianceMode,
}

impl PriorConfig {
    fn default_zeta() -> CellValues {
        CellValues::Scalar(0.0)
    }

    fn default_lambda2() -> CellValues {
        CellValues::Scalar(DEFAULT_LAMBDA2)
    }

    pub fn build(&self, grid: &GridSpec) -> Result<PriorSpec> {
        PriorSpec::new(
            self.zeta.expand(grid, "zeta")?,
            self.lambda2.expand(grid, "lambda2")?,
            self.variance,
        )
        .map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            zeta: Self::default_zeta(),
            lambda2: Self::default_lambda2(),
            variance: VarianceMode::MmlePlugin,
        }
    }
}

/// A critical value for the frequentist baseline at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhzCritical {
    pub level: f64,
    pub c_gamma: f64,
}

/// One coverage experiment: a test function, sample size and method settings.
/// Levels are one minus the credibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub function: TestFunction,
    pub n: usize,
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    #[serde(default = "defaults::d")]
    pub d: usize,
    /// Defaults to the centre of the cube.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridRule,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default = "defaults::kind")]
    pub kind: ImmersionKind,
    #[serde(default = "defaults::sided")]
    pub sided: Sided,
    pub levels: Vec<f64>,
    /// Also report intervals at recalibrated credibility.
    #[serde(default = "defaults::yes")]
    pub recalibrate: bool,
    /// Smoothness vector selecting the recalibration table; all ones by default.
    #[serde(default)]
    pub beta: Option<Vec<u32>>,
    /// Table CSV to use instead of the shipped tables.
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub dhz: Vec<DhzCritical>,
    pub replications: usize,
    #[serde(default = "defaults::draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

mod defaults {
    use super::*;

    pub fn sigma() -> f64 {
        1.0
    }
    pub fn d() -> usize {
        2
    }
    pub fn kind() -> ImmersionKind {
        ImmersionKind::Average
    }
    pub fn sided() -> Sided {
        Sided::TwoSidedEqualTail
    }
    pub fn yes() -> bool {
        true
    }
    pub fn draws() -> usize {
        2000
    }
}

impl StudyConfig {
    /// Defaults for everything but the function, sample size, levels and
    /// replication count.
    pub fn new(function: TestFunction, n: usize, levels: Vec<f64>, replications: usize) -> Self {
        Self {
            function,
            n,
            sigma: defaults::sigma(),
            d: defaults::d(),
            x0: None,
            grid: GridRule::default(),
            prior: PriorConfig::default(),
            kind: defaults::kind(),
            sided: defaults::sided(),
            levels,
            recalibrate: defaults::yes(),
            beta: None,
            table: None,
            dhz: Vec::new(),
            replications,
            draws: defaults::draws(),
            seed: 0,
            workers: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn x0(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.5; self.d])
    }

    pub fn beta(&self) -> Vec<u32> {
        self.beta.clone().unwrap_or_else(|| vec![1; self.d])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.d == 0 || self.n == 0 || self.replications == 0 {
            return bad("d, n and replications must be positive".into());
        }
        if self.draws < 2 {
            return bad("draws must be at least 2".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} is invalid", self.sigma));
        }
        if self.levels.is_empty() {
            return bad("levels must not be empty".into());
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return bad(format!("level {l} is not in (0, 1)"));
        }
        let x0 = self.x0();
        if x0.len() != self.d || x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad(format!("x0 = {x0:?} is not a point of [0,1]^{}", self.d));
        }
        if self.beta().len() != self.d || self.beta().contains(&0) {
            return bad(format!("beta must hold {} positive integers", self.d));
        }
        if let Some(c) = self
            .dhz
            .iter()
            .find(|c| !(c.c_gamma >= 0.0) || !self.levels.contains(&c.level))
        {
            return bad(format!(
                "critical value for level {} is invalid or the level is not studied",
                c.level
            ));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    /// The table used for recalibration, when enabled.
    pub fn recalibration_table(&self) -> Result<Option<ZbTable>> {
        if !self.recalibrate {
            return Ok(None);
        }
        let beta = self.beta();
        let table = match &self.table {
            Some(path) => ZbTable::load(path, self.kind, &beta)?,
            None => builtin_table(self.kind, &beta).ok_or_else(|| {
                Error::config(format!(
                    "no shipped table for kind {} and beta {beta:?}; supply one with `table`",
                    self.kind.index()
                ))
            })?,
        };
        Ok(Some(table))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "IB")]
    Ib,
    #[serde(rename = "IB_adj")]
    IbAdj,
    #[serde(rename = "DHZ")]
    Dhz,
}

/// Coverage and length summary for one `(level, method)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub function: TestFunction,
    pub n: usize,
    pub level: f64,
    pub method: Method,
    pub coverage_pct: f64,
    pub mean_length: f64,
    pub sd_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    pub fn row(&self, level: f64, method: Method) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.level == level && r.method == method)
    }
}

/// The `(level, method)` pairs evaluated, with the credibility or critical
/// value each uses.
#[derive(Clone, Copy, Debug)]
enum Plan {
    Bayes {
        level: f64,
        method: Method,
        credibility: f64,
    },
    Dhz {
        level: f64,
        c_gamma: f64,
    },
}

impl Plan {
    fn key(&self) -> (f64, Method) {
        match *self {
            Plan::Bayes { level, method, .. } => (level, method),
            Plan::Dhz { level, .. } => (level, Method::Dhz),
        }
    }
}

fn plans(config: &StudyConfig) -> Result<Vec<Plan>> {
    let table = config.recalibration_table()?;
    let mut out = Vec::new();
    for &level in &config.levels {
        out.push(Plan::Bayes {
            level,
            method: Method::Ib,
            credibility: 1.0 - level,
        });
        if let Some(t) = &table {
            out.push(Plan::Bayes {
                level,
                method: Method::IbAdj,
                credibility: recalibrate_level(1.0 - level, t, config.sided)?,
            });
        }
        if let Some(c) = config.dhz.iter().find(|c| c.level == level) {
            out.push(Plan::Dhz {
                level,
                c_gamma: c.c_gamma,
            });
        }
    }
    Ok(out)
}

/// Whether the interval covered the truth, and its length.
type Outcome = (bool, f64);

fn replicate(config: &StudyConfig, plans: &[Plan], streams: &Substreams, r: u64) -> Result<Vec<Outcome>> {
    let x0 = config.x0();
    let truth = config.function.eval(&x0);
    let data = generate_dataset(
        config.function,
        config.n,
        config.d,
        config.sigma,
        &mut streams.stream(&[r, 0]),
    )?;
    let grid = config.grid.grid(config.n, config.d)?;
    let prior = config.prior.build(&grid)?;
    let stats = compute_bin_stats(&data, &grid)?;
    let params = posterior_params(&stats, &prior, &data, Sigma2Source::Auto)?;
    let draw_streams = streams.child(r).child(1);
    let mut sorted =
        immersion_draws_from_params(&stats, &params, &x0, config.kind, config.draws, &draw_streams)?.values;
    sorted.sort_by(f64::total_cmp);

    let needs_dhz = plans.iter().any(|p| matches!(p, Plan::Dhz { .. }));
    let dhz = if needs_dhz {
        let est = dhz_estimate(&data, &x0)?;
        let sigma = sigma2_mmle(&stats, &prior, &data)?.sqrt();
        Some((est, sigma))
    } else {
        None
    };

    plans
        .iter()
        .map(|p| match *p {
            Plan::Bayes { credibility, .. } => {
                let (lo, hi) = interval_from_sorted(&sorted, credibility, config.sided);
                Ok((lo <= truth && truth <= hi, hi - lo))
            }
            Plan::Dhz { c_gamma, .. } => {
                let (est, sigma) = dhz.as_ref().expect("estimated above");
                let ci = dhz_interval(est, *sigma, c_gamma)?;
                Ok((ci.contains(truth), ci.length()))
            }
        })
        .collect()
}

/// Runs every replication and summarizes coverage and interval length.
///
/// Replication `r` simulates its data from substream `[r, 0]` and its
/// posterior draws from `child(r).child(1)` of the master seed.
pub fn coverage_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let plans = plans(config)?;
    let streams = Substreams::new(config.seed);
    let outcomes: Vec<Vec<Outcome>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| replicate(config, &plans, &streams, r))
        .collect::<Result<_>>()?;

    let reps = outcomes.len() as f64;
    let rows = plans
        .iter()
        .enumerate()
        .map(|(i, plan)| {
            let (level, method) = plan.key();
            let hits = outcomes.iter().filter(|o| o[i].0).count();
            let lengths: Vec<f64> = outcomes.iter().map(|o| o[i].1).collect();
            let mean = lengths.iter().sum::<f64>() / reps;
            let sd = if lengths.len() > 1 {
                (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (reps - 1.0)).sqrt()
            } else {
                0.0
            };
            StudyRow {
                function: config.function,
                n: config.n,
                level,
                method,
                coverage_pct: 100.0 * hits as f64 / reps,
                mean_length: mean,
                sd_length: sd,
            }
        })
        .collect();
    Ok(StudyResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> StudyConfig {
        let mut c = StudyConfig::new(TestFunction::F2, 100, vec![0.05, 0.1], 12);
        c.draws = 200;
        c.seed = 4;
        c
    }

    #[test]
    fn parses_toml() {
        let c = StudyConfig::from_toml(
            r#"
            function = "f2"
            n = 200
            levels = [0.05]
            replications = 500
            seed = 7

            [prior]
            zeta = 0.0
            lambda2 = 100.0
            variance = { mode = "inverse_gamma", b1 = 2.0, b2 = 1.0 }

            [[dhz]]
            level = 0.05
            c_gamma = 1.7
            "#,
        )
        .unwrap();
        assert_eq!(c.function, TestFunction::F2);
        assert_eq!(c.d, 2);
        assert_eq!(c.x0(), vec![0.5, 0.5]);
        assert_eq!(c.draws, 2000);
        assert_eq!(c.kind, ImmersionKind::Average);
        assert_eq!(c.prior.variance, VarianceMode::InverseGamma { b1: 2.0, b2: 1.0 });
        assert_eq!(c.dhz[0].c_gamma, 1.7);
        assert_eq!(c.grid.grid(200, 2).unwrap().cells(), &[10, 10]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "function = \"f9\"\nn = 10\nlevels = [0.05]\nreplications = 1",
            "function = \"f1\"\nn = 10\nlevels = [1.5]\nreplications = 1",
            "function = \"f1\"\nn = 10\nlevels = [0.05]\nreplications = 0",
            "function = \"f1\"\nn = 10\nlevels = [0.05]\nreplications = 1\nbogus = 3",
            "function = \"f1\"\nn = 10\nlevels = [0.05]\nreplications = 1\nx0 = [0.5]",
        ] {
            assert!(matches!(StudyConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn vanishing_noise_covers_at_a_cell_centre() {
        let mut c = StudyConfig::new(TestFunction::F2, 2000, vec![0.05], 10);
        c.sigma = 1e-6;
        c.draws = 200;
        c.recalibrate = false;
        let j = c.grid.grid(c.n, 2).unwrap().cells()[0] as f64;
        let centre = ((j / 2.0).floor() + 0.5) / j;
        c.x0 = Some(vec![centre, centre]);
        let row = coverage_study(&c).unwrap().rows[0].clone();
        assert_eq!(row.coverage_pct, 100.0);
        // σ̂² still absorbs the variation of f inside each cell.
        assert!(row.mean_length < 0.1, "{row:?}");
    }

    #[test]
    fn per_cell_prior() {
        let grid = GridSpec::uniform(1, 3).unwrap();
        let p = PriorConfig::from_toml("zeta = [1.0, 2.0, 3.0]\nlambda2 = 5.0").unwrap();
        let spec = p.build(&grid).unwrap();
        assert_eq!(spec.zeta(), &[1.0, 2.0, 3.0]);
        assert_eq!(spec.lambda2(), &[5.0; 3]);
        assert!(p.build(&GridSpec::uniform(1, 4).unwrap()).is_err());
    }

    #[test]
    fn missing_table_is_a_config_error() {
        let mut c = small();
        c.beta = Some(vec![5, 5]);
        assert!(matches!(coverage_study(&c), Err(Error::Config(_))));
        c.recalibrate = false;
        assert!(coverage_study(&c).is_ok());
    }

    #[test]
    fn rows_cover_levels_and_methods() {
        let res = coverage_study(&small()).unwrap();
        assert_eq!(res.rows.len(), 4);
        for r in &res.rows {
            assert!((0.0..=100.0).contains(&r.coverage_pct));
            assert!(r.mean_length >= 0.0 && r.sd_length >= 0.0);
        }
        // recalibrated intervals are narrower
        for level in [0.05, 0.1] {
            let ib = res.row(level, Method::Ib).unwrap();
            let adj = res.row(level, Method::IbAdj).unwrap();
            assert!(adj.mean_length <= ib.mean_length);
        }
    }

    #[test]
    fn nested_levels_give_ordered_coverage() {
        let res = coverage_study(&small()).unwrap();
        let a = res.row(0.05, Method::Ib).unwrap();
        let b = res.row(0.1, Method::Ib).unwrap();
        assert!(a.coverage_pct >= b.coverage_pct);
        assert!(a.mean_length >= b.mean_length);
    }

    #[test]
    fn same_seed_same_result_for_any_pool() {
        let c = small();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| coverage_study(&c).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn dhz_rows_when_critical_values_given() {
        let mut c = small();
        c.replications = 3;
        c.dhz = vec![DhzCritical {
            level: 0.05,
            c_gamma: 2.0,
        }];
        let res = coverage_study(&c).unwrap();
        let row = res.row(0.05, Method::Dhz).unwrap();
        assert!(row.mean_length > 0.0);
        assert!(res.row(0.1, Method::Dhz).is_none());
    }
}
