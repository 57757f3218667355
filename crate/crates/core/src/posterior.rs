//! Conjugate Gaussian posterior for the step heights `θ_j`.
//!
//! Each height has an independent `N(ζ_j, σ²λ_j²)` prior. Given `σ²` the
//! posterior factorizes over cells:
//!
//! ```text
//! θ_j | data, σ ~ N((N_j Ȳ_j + ζ_j λ_j⁻²) / (N_j + λ_j⁻²), σ² / (N_j + λ_j⁻²))
//! ```
//!
//! `σ²` is either fixed, replaced by its marginal maximum likelihood
//! estimate, or drawn from its Inverse-Gamma posterior for every draw.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bin_index, BinStats, GridSpec, RegressionDataset};
use crate::rng::Substreams;

/// Lower clamp applied to the marginal likelihood estimate of `σ²`.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Prior variance multiplier used when a configuration omits `lambda2`.
pub const DEFAULT_LAMBDA2: f64 = 1000.0;

/// How the error variance enters the posterior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum VarianceMode {
    /// A known `σ²`.
    Fixed { sigma2: f64 },
    /// Plug in the marginal maximum likelihood estimate `σ̂²`.
    #[default]
    MmlePlugin,
    /// `σ² ~ IG(b1, b2)` a priori; drawn from `IG(b1 + n/2, b2 + nσ̂²/2)`.
    InverseGamma { b1: f64, b2: f64 },
}

/// Independent Gaussian priors on the step heights.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    zeta: Vec<f64>,
    lambda2: Vec<f64>,
    variance_mode: VarianceMode,
}

impl PriorSpec {
    /// Per-cell prior means and variance multipliers. `lambda2` may be
    /// `+∞` for a flat prior on a cell.
    pub fn new(zeta: Vec<f64>, lambda2: Vec<f64>, variance_mode: VarianceMode) -> Result<Self> {
        if zeta.len() != lambda2.len() {
            return Err(Error::arg(format!(
                "zeta has {} cells, lambda2 has {}",
                zeta.len(),
                lambda2.len()
            )));
        }
        if let Some(z) = zeta.iter().find(|z| !z.is_finite()) {
            return Err(Error::arg(format!("prior mean {z} is not finite")));
        }
        if let Some(l) = lambda2.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::arg(format!("prior variance multiplier {l} is not positive")));
        }
        match variance_mode {
            VarianceMode::Fixed { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                return Err(Error::arg(format!("fixed sigma2 {sigma2} is not positive")));
            }
            VarianceMode::InverseGamma { b1, b2 } => check_ig(b1, b2)?,
            _ => {}
        }
        Ok(Self {
            zeta,
            lambda2,
            variance_mode,
        })
    }

    /// The same `ζ` and `λ²` on every cell of `grid`.
    pub fn uniform(grid: &GridSpec, zeta: f64, lambda2: f64, variance_mode: VarianceMode) -> Result<Self> {
        Self::new(vec![zeta; grid.len()], vec![lambda2; grid.len()], variance_mode)
    }

    /// `ζ = 0`, `λ² = 1000`, `σ²` by marginal maximum likelihood.
    pub fn weakly_informative(grid: &GridSpec) -> Self {
        Self::uniform(grid, 0.0, DEFAULT_LAMBDA2, VarianceMode::MmlePlugin).expect("default hyperparameters are valid")
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn lambda2(&self) -> &[f64] {
        &self.lambda2
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.variance_mode
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// `λ_j⁻²`; zero for a flat prior.
    fn precision(&self, j: usize) -> f64 {
        1.0 / self.lambda2[j]
    }
}

fn check_ig(b1: f64, b2: f64) -> Result<()> {
    if b1 > 0.0 && b2 > 0.0 && b1.is_finite() && b2.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "inverse-gamma hyperparameters must be positive, got ({b1}, {b2})"
        )))
    }
}

/// The marginal maximum likelihood estimate of `σ²`, clamped below at
/// [`SIGMA2_FLOOR`].
///
/// Computed per cell as `Σ(Y_i − Ȳ_j)² + N_j(Ȳ_j − ζ_j)² λ_j⁻²/(N_j + λ_j⁻²)`,
/// which equals `Σ(Y_i − ζ_j)² − N_j²(Ȳ_j − ζ_j)²/(N_j + λ_j⁻²)` without the
/// cancellation between its two terms.
pub fn sigma2_mmle(stats: &BinStats, prior: &PriorSpec, data: &RegressionDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::arg("sigma2 estimate needs at least one observation"));
    }
    let grid = stats.grid();
    check_prior_shape(grid, prior)?;
    if stats.n() != data.len() as u64 {
        return Err(Error::arg("bin statistics were not computed from this dataset"));
    }
    let mut within = vec![0.0; grid.len()];
    for (x, y) in data.iter() {
        let lin = grid.linear(&bin_index(x, grid)?);
        let mean = stats.mean(lin).expect("an observation's own cell is occupied");
        within[lin] += (y - mean) * (y - mean);
    }
    let mut total = 0.0;
    for (lin, w) in within.into_iter().enumerate() {
        let Some(mean) = stats.mean(lin) else { continue };
        let n = stats.counts()[lin] as f64;
        let prec = prior.precision(lin);
        let dev = mean - prior.zeta[lin];
        total += w + n * dev * dev * prec / (n + prec);
    }
    Ok((total / data.len() as f64).max(SIGMA2_FLOOR))
}

/// Posterior `(shape, scale)` of `σ²` under an `IG(b1, b2)` prior.
pub fn sigma2_posterior_params(b1: f64, b2: f64, n: u64, sigma2_hat: f64) -> Result<(f64, f64)> {
    check_ig(b1, b2)?;
    if !(sigma2_hat >= 0.0) {
        return Err(Error::arg(format!("sigma2 estimate {sigma2_hat} is negative")));
    }
    let n = n as f64;
    Ok((b1 + n / 2.0, b2 + n * sigma2_hat / 2.0))
}

/// How each posterior draw obtains its `σ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Sigma2Rule {
    Constant {
        sigma2: f64,
    },
    /// Inverse-Gamma with density `∝ x^{−(shape+1)} e^{−scale/x}`.
    InverseGamma {
        shape: f64,
        scale: f64,
    },
}

impl Sigma2Rule {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Sigma2Rule::Constant { sigma2 } => sigma2,
            Sigma2Rule::InverseGamma { shape, scale } => {
                let g: f64 = Gamma::new(shape, 1.0)
                    .expect("shape validated on construction")
                    .sample(rng);
                scale / g
            }
        }
    }
}

/// Per-cell posterior parameters given the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorParams {
    pub mean: Vec<f64>,
    /// Posterior variance divided by `σ²`.
    pub var_scale: Vec<f64>,
    pub sigma2: Sigma2Rule,
}

impl PosteriorParams {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Where `σ²` comes from when forming posterior parameters. `Auto` follows
/// the prior's [`VarianceMode`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigma2Source {
    Auto,
    /// Use this estimate instead of recomputing `σ̂²`.
    Estimate(f64),
}

fn check_prior_shape(grid: &GridSpec, prior: &PriorSpec) -> Result<()> {
    if prior.len() != grid.len() {
        return Err(Error::arg(format!(
            "prior covers {} cells, grid has {}",
            prior.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Conjugate update of every cell.
///
/// `data` is only consulted when `σ̂²` must be computed.
pub fn posterior_params(
    stats: &BinStats,
    prior: &PriorSpec,
    data: &RegressionDataset,
    source: Sigma2Source,
) -> Result<PosteriorParams> {
    check_prior_shape(stats.grid(), prior)?;
    let sigma2_hat = || match source {
        Sigma2Source::Estimate(s) if s > 0.0 => Ok(s),
        Sigma2Source::Estimate(s) => Err(Error::arg(format!("sigma2 estimate {s} is not positive"))),
        Sigma2Source::Auto => sigma2_mmle(stats, prior, data),
    };
    let sigma2 = match prior.variance_mode {
        VarianceMode::Fixed { sigma2 } => Sigma2Rule::Constant { sigma2 },
        VarianceMode::MmlePlugin => Sigma2Rule::Constant { sigma2: sigma2_hat()? },
        VarianceMode::InverseGamma { b1, b2 } => {
            let (shape, scale) = sigma2_posterior_params(b1, b2, stats.n(), sigma2_hat()?)?;
            Sigma2Rule::InverseGamma { shape, scale }
        }
    };
    let mut mean = Vec::with_capacity(prior.len());
    let mut var_scale = Vec::with_capacity(prior.len());
    for (j, (&n, &sum)) in stats.counts().iter().zip(stats.sums()).enumerate() {
        if n == 0 {
            if prior.lambda2[j].is_infinite() {
                return Err(Error::arg(format!(
                    "cell {j} is empty and has a flat prior; its posterior is improper"
                )));
            }
            mean.push(prior.zeta[j]);
            var_scale.push(prior.lambda2[j]);
        } else {
            let prec = prior.precision(j);
            let n = n as f64;
            mean.push((sum + prior.zeta[j] * prec) / (n + prec));
            var_scale.push(1.0 / (n + prec));
        }
    }
    Ok(PosteriorParams {
        mean,
        var_scale,
        sigma2,
    })
}

/// Posterior draws of the unrestricted heights, one row per draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaDraws {
    cells: usize,
    values: Vec<f64>,
}

impl ThetaDraws {
    pub fn n_draws(&self) -> usize {
        self.values.len().checked_div(self.cells).unwrap_or(0)
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.values[i * self.cells..(i + 1) * self.cells]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cells.max(1))
    }
}

/// Draw number `index`: `σ²` first, then every `θ_j`, from substream `[index]`.
pub fn sample_theta_into(params: &PosteriorParams, streams: &Substreams, index: u64, out: &mut [f64]) {
    let mut rng = streams.stream(&[index]);
    let sigma2 = params.sigma2.sample(&mut rng);
    for ((o, &m), &v) in out.iter_mut().zip(&params.mean).zip(&params.var_scale) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *o = m + (sigma2 * v).sqrt() * z;
    }
}

/// `n_draws` independent posterior draws. Draw `i` only depends on
/// `streams` and `i`, so the result is the same for any thread count.
pub fn sample_theta(params: &PosteriorParams, n_draws: usize, streams: &Substreams) -> Result<ThetaDraws> {
    if n_draws == 0 {
        return Err(Error::arg("need at least one draw"));
    }
    let cells = params.len();
    let mut values = vec![0.0; cells * n_draws];
    if cells > 0 {
        values
            .par_chunks_exact_mut(cells)
            .enumerate()
            .for_each(|(i, row)| sample_theta_into(params, streams, i as u64, row));
    }
    Ok(ThetaDraws { cells, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::compute_bin_stats;

    fn one_cell(ys: &[f64]) -> (RegressionDataset, BinStats) {
        let g = GridSpec::uniform(1, 1).unwrap();
        let data = RegressionDataset::new(1, ys.iter().map(|&y| ([0.5], y))).unwrap();
        let stats = compute_bin_stats(&data, &g).unwrap();
        (data, stats)
    }

    #[test]
    fn sigma2_single_bin_flat_prior() {
        let (data, stats) = one_cell(&[1.0, -1.0]);
        let prior = PriorSpec::uniform(stats.grid(), 0.0, f64::INFINITY, VarianceMode::MmlePlugin).unwrap();
        assert_eq!(sigma2_mmle(&stats, &prior, &data).unwrap(), 1.0);
    }

    #[test]
    fn sigma2_zero_residuals_hits_floor() {
        let (data, stats) = one_cell(&[0.0, 0.0, 0.0]);
        let prior = PriorSpec::uniform(stats.grid(), 0.0, 1.0, VarianceMode::MmlePlugin).unwrap();
        assert_eq!(sigma2_mmle(&stats, &prior, &data).unwrap(), SIGMA2_FLOOR);
    }

    #[test]
    fn sigma2_needs_data() {
        let g = GridSpec::uniform(1, 2).unwrap();
        let data = RegressionDataset::empty(1).unwrap();
        let stats = compute_bin_stats(&data, &g).unwrap();
        let prior = PriorSpec::weakly_informative(&g);
        assert!(matches!(sigma2_mmle(&stats, &prior, &data), Err(Error::Argument(_))));
    }

    #[test]
    fn inverse_gamma_update() {
        assert_eq!(sigma2_posterior_params(1.0, 1.0, 2, 1.0).unwrap(), (2.0, 2.0));
        assert_eq!(sigma2_posterior_params(1.5, 0.5, 0, 3.0).unwrap(), (1.5, 0.5));
        assert_eq!(sigma2_posterior_params(2.0, 3.0, 100, 0.25).unwrap(), (52.0, 15.5));
        assert!(sigma2_posterior_params(0.0, 1.0, 3, 1.0).is_err());
        assert!(sigma2_posterior_params(1.0, -1.0, 3, 1.0).is_err());
    }

    #[test]
    fn empty_bin_returns_prior() {
        let g = GridSpec::uniform(1, 2).unwrap();
        let data = RegressionDataset::new(1, vec![([0.1], 2.0)]).unwrap();
        let stats = compute_bin_stats(&data, &g).unwrap();
        let prior = PriorSpec::new(vec![0.3, -0.7], vec![2.0, 5.0], VarianceMode::Fixed { sigma2: 1.0 }).unwrap();
        let p = posterior_params(&stats, &prior, &data, Sigma2Source::Auto).unwrap();
        assert_eq!(p.mean[1], -0.7);
        assert_eq!(p.var_scale[1], 5.0);
    }

    #[test]
    fn conjugate_update_example() {
        // N=3, Ȳ=2, ζ=0, λ²=1, σ²=1: mean 6/4, variance 1/4
        let (data, stats) = one_cell(&[1.0, 2.0, 3.0]);
        let prior = PriorSpec::uniform(stats.grid(), 0.0, 1.0, VarianceMode::Fixed { sigma2: 1.0 }).unwrap();
        let p = posterior_params(&stats, &prior, &data, Sigma2Source::Auto).unwrap();
        assert_eq!(p.mean[0], 1.5);
        assert_eq!(p.var_scale[0], 0.25);
    }

    #[test]
    fn flat_prior_gives_bin_mean_exactly() {
        let (data, stats) = one_cell(&[0.1, 0.7, 1.3, 0.2]);
        let prior = PriorSpec::uniform(stats.grid(), 5.0, f64::INFINITY, VarianceMode::Fixed { sigma2: 1.0 }).unwrap();
        let p = posterior_params(&stats, &prior, &data, Sigma2Source::Auto).unwrap();
        assert_eq!(p.mean[0], stats.mean(0).unwrap());
        assert_eq!(p.var_scale[0], 0.25);
    }

    #[test]
    fn flat_prior_on_empty_cell_is_rejected() {
        let g = GridSpec::uniform(1, 2).unwrap();
        let data = RegressionDataset::new(1, vec![([0.1], 2.0)]).unwrap();
        let stats = compute_bin_stats(&data, &g).unwrap();
        let prior = PriorSpec::uniform(&g, 0.0, f64::INFINITY, VarianceMode::Fixed { sigma2: 1.0 }).unwrap();
        assert!(posterior_params(&stats, &prior, &data, Sigma2Source::Auto).is_err());
    }

    #[test]
    fn prior_validation() {
        assert!(PriorSpec::new(vec![0.0], vec![0.0], VarianceMode::MmlePlugin).is_err());
        assert!(PriorSpec::new(vec![f64::NAN], vec![1.0], VarianceMode::MmlePlugin).is_err());
        assert!(PriorSpec::new(vec![0.0], vec![1.0], VarianceMode::InverseGamma { b1: 0.0, b2: 1.0 }).is_err());
        assert!(PriorSpec::new(vec![0.0, 1.0], vec![1.0], VarianceMode::MmlePlugin).is_err());
    }

    #[test]
    fn degenerate_variance_returns_means() {
        let params = PosteriorParams {
            mean: vec![1.0, -2.0, 0.5],
            var_scale: vec![0.0; 3],
            sigma2: Sigma2Rule::Constant { sigma2: 1.0 },
        };
        let draws = sample_theta(&params, 10, &Substreams::new(3)).unwrap();
        for d in draws.iter() {
            assert_eq!(d, params.mean.as_slice());
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let params = PosteriorParams {
            mean: vec![0.0, 1.0],
            var_scale: vec![1.0, 0.5],
            sigma2: Sigma2Rule::InverseGamma { shape: 3.0, scale: 2.0 },
        };
        let a = sample_theta(&params, 50, &Substreams::new(9)).unwrap();
        let b = sample_theta(&params, 50, &Substreams::new(9)).unwrap();
        let c = sample_theta(&params, 50, &Substreams::new(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_within_standard_error() {
        let params = PosteriorParams {
            mean: vec![0.7],
            var_scale: vec![0.5],
            sigma2: Sigma2Rule::Constant { sigma2: 2.0 },
        };
        let n = 100_000;
        let draws = sample_theta(&params, n, &Substreams::new(11)).unwrap();
        let mean = draws.iter().map(|d| d[0]).sum::<f64>() / n as f64;
        let sd = 1.0;
        assert!((mean - 0.7).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn zero_draws_rejected() {
        let params = PosteriorParams {
            mean: vec![0.0],
            var_scale: vec![1.0],
            sigma2: Sigma2Rule::Constant { sigma2: 1.0 },
        };
        assert!(sample_theta(&params, 0, &Substreams::new(0)).is_err());
    }
}
