//! Credible intervals from immersion-posterior draws, and the tables of the
//! limiting distribution of `Z_B` used to translate between credibility and
//! limiting frequentist coverage.
//!
//! The one-sided interval `(−∞, Q_γ]` at credibility `1−γ` has limiting
//! coverage `P(Z_B ≤ 1−γ)`. The equal-tailed interval has limiting coverage
//! `P(Z_B ≤ 1−γ/2) − P(Z_B ≤ γ/2)`. Both relations are free of the unknown
//! regression function, so they can be inverted from a table.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{bin_index, compute_bin_stats, BinStats, GridSpec, RegressionDataset, WeightedBlocks};
use crate::immersion::{immerse_cell, CornerSet, ImmersionKind};
use crate::posterior::{posterior_params, sample_theta_into, PosteriorParams, PriorSpec, Sigma2Source};
use crate::rng::Substreams;

/// Draws of the immersed function value at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImmersionDraws {
    pub kind: ImmersionKind,
    pub x0: Vec<f64>,
    /// The chosen functional, one value per draw.
    pub values: Vec<f64>,
    /// Max-min values, per draw.
    pub lower: Vec<f64>,
    /// Min-max values, per draw.
    pub upper: Vec<f64>,
    /// The unrestricted height of the cell containing `x0`, per draw.
    pub unrestricted: Vec<f64>,
}

impl ImmersionDraws {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Samples the posterior, pushes each draw through both maps at `x0`, and
/// keeps the functional selected by `kind`.
pub fn immersion_draws_at(
    data: &RegressionDataset,
    grid: &GridSpec,
    prior: &PriorSpec,
    x0: &[f64],
    kind: ImmersionKind,
    n_draws: usize,
    streams: &Substreams,
) -> Result<ImmersionDraws> {
    let stats = compute_bin_stats(data, grid)?;
    let params = posterior_params(&stats, prior, data, Sigma2Source::Auto)?;
    immersion_draws_from_params(&stats, &params, x0, kind, n_draws, streams)
}

/// As [`immersion_draws_at`] for precomputed statistics and parameters.
/// Draw `i` uses posterior substream `i`.
pub fn immersion_draws_from_params(
    stats: &BinStats,
    params: &PosteriorParams,
    x0: &[f64],
    kind: ImmersionKind,
    n_draws: usize,
    streams: &Substreams,
) -> Result<ImmersionDraws> {
    if n_draws < 2 {
        return Err(Error::arg("need at least two draws"));
    }
    if params.len() != stats.grid().len() {
        return Err(Error::arg("posterior parameters do not match the grid"));
    }
    if stats.n() == 0 {
        return Err(Error::state("no observations to isotonize against"));
    }
    let grid = stats.grid();
    let j0 = bin_index(x0, grid)?;
    let cell = grid.linear(&j0);
    let corners = CornerSet::new(grid, &j0)?;
    let per_draw = (0..n_draws)
        .into_par_iter()
        .map_init(
            || vec![0.0; params.len()],
            |theta, i| {
                sample_theta_into(params, streams, i as u64, theta);
                let blocks = WeightedBlocks::new(stats, theta)?;
                let v = immerse_cell(&blocks, theta, &corners)?;
                Ok((v.lower, v.upper, theta[cell]))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let lower: Vec<f64> = per_draw.iter().map(|t| t.0).collect();
    let upper: Vec<f64> = per_draw.iter().map(|t| t.1).collect();
    let unrestricted = per_draw.iter().map(|t| t.2).collect();
    let values = lower.iter().zip(&upper).map(|(&l, &u)| kind.select(l, u)).collect();
    Ok(ImmersionDraws {
        kind,
        x0: x0.to_vec(),
        values,
        lower,
        upper,
        unrestricted,
    })
}

/// Linear interpolation between order statistics (the "type 7" rule):
/// with `h = (n−1)p`, returns `x₍⌊h⌋₎ + (h−⌊h⌋)(x₍⌊h⌋+1₎ − x₍⌊h⌋₎)`.
///
/// `sorted` must be sorted ascending and nonempty.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    /// `[q_{γ/2}, q_{1−γ/2}]`.
    TwoSidedEqualTail,
    /// `(−∞, q_{1−γ}]`.
    UpperOneSided,
}

impl std::str::FromStr for Sided {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" | "two_sided" | "two_sided_equal_tail" => Ok(Self::TwoSidedEqualTail),
            "one-sided" | "one_sided" | "upper_one_sided" => Ok(Self::UpperOneSided),
            _ => Err(Error::arg(format!("unknown interval type {s:?}"))),
        }
    }
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// A pointwise credible interval. `lower` is `−∞` for one-sided intervals
/// and serializes as `null`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CredibleInterval {
    #[serde(serialize_with = "finite_or_null")]
    pub lower: f64,
    pub upper: f64,
    pub credibility: f64,
    pub kind: ImmersionKind,
    pub sided: Sided,
    pub x0: Vec<f64>,
}

impl CredibleInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn check_credibility(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("credibility {c} is not in (0, 1)")))
    }
}

/// Equal-tailed or one-sided interval from the empirical quantiles of
/// `values`.
pub fn credible_interval_from(values: &[f64], credibility: f64, sided: Sided) -> Result<(f64, f64)> {
    check_credibility(credibility)?;
    if values.is_empty() {
        return Err(Error::arg("no draws to form an interval from"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("draws contain NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(interval_from_sorted(&sorted, credibility, sided))
}

/// As [`credible_interval_from`] for draws already sorted ascending.
pub fn interval_from_sorted(sorted: &[f64], credibility: f64, sided: Sided) -> (f64, f64) {
    let gamma = 1.0 - credibility;
    match sided {
        Sided::TwoSidedEqualTail => (
            quantile_type7(sorted, gamma / 2.0),
            quantile_type7(sorted, 1.0 - gamma / 2.0),
        ),
        Sided::UpperOneSided => (f64::NEG_INFINITY, quantile_type7(sorted, credibility)),
    }
}

pub fn credible_interval(draws: &ImmersionDraws, credibility: f64, sided: Sided) -> Result<CredibleInterval> {
    let (lower, upper) = credible_interval_from(&draws.values, credibility, sided)?;
    Ok(CredibleInterval {
        lower,
        upper,
        credibility,
        kind: draws.kind,
        sided,
        x0: draws.x0.clone(),
    })
}

/// Distribution function of `Z_B^{(kind)}` for one smoothness vector `β`,
/// tabulated at increasing nodes and interpolated linearly in between.
#[derive(Clone, Debug, PartialEq)]
pub struct ZbTable {
    kind: ImmersionKind,
    d: usize,
    beta: Vec<u32>,
    z: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ZbRow {
    kind: u8,
    d: usize,
    beta: String,
    z: f64,
    cdf: f64,
}

/// `(kind, beta)`, dimension and `(z, cdf)` nodes for one table in a CSV.
type TableGroup = ((u8, String), usize, Vec<(f64, f64)>);

fn beta_key(beta: &[u32]) -> String {
    beta.iter().map(u32::to_string).collect::<Vec<_>>().join("-")
}

fn parse_beta(s: &str) -> Result<Vec<u32>> {
    s.split('-')
        .map(|b| {
            b.trim()
                .parse::<u32>()
                .ok()
                .filter(|&b| b >= 1)
                .ok_or_else(|| Error::arg(format!("bad smoothness vector {s:?}")))
        })
        .collect()
}

impl ZbTable {
    /// Builds a table from `(z, P(Z_B ≤ z))` nodes.
    pub fn from_points(kind: ImmersionKind, beta: Vec<u32>, points: Vec<(f64, f64)>) -> Result<Self> {
        if beta.is_empty() || beta.contains(&0) {
            return Err(Error::arg("smoothness entries must be positive integers"));
        }
        if points.len() < 2 {
            return Err(Error::arg("a table needs at least two nodes"));
        }
        let (z, cdf): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if z.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::arg("table nodes must be strictly increasing"));
        }
        if cdf.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::arg("table CDF values must be nondecreasing"));
        }
        if cdf.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::arg("table CDF values must lie in [0, 1]"));
        }
        Ok(Self {
            kind,
            d: beta.len(),
            beta,
            z,
            cdf,
        })
    }

    /// The empirical distribution function of `samples` on the nodes
    /// `0, step, 2·step, …, 1`.
    pub fn from_samples(kind: ImmersionKind, beta: Vec<u32>, samples: &[f64], nodes: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::arg("no samples to tabulate"));
        }
        if nodes < 1 {
            return Err(Error::arg("need at least one grid step"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let points = (0..=nodes)
            .map(|i| {
                let z = i as f64 / nodes as f64;
                let below = sorted.partition_point(|&s| s <= z);
                (z, below as f64 / n)
            })
            .collect();
        Self::from_points(kind, beta, points)
    }

    pub fn kind(&self) -> ImmersionKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn beta(&self) -> &[u32] {
        &self.beta
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z.iter().copied().zip(self.cdf.iter().copied())
    }

    /// `[z_min, z_max]`.
    pub fn support(&self) -> (f64, f64) {
        (self.z[0], *self.z.last().unwrap())
    }

    /// Largest gap between neighbouring nodes.
    pub fn max_step(&self) -> f64 {
        self.z.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Whether `Z_B` is symmetric about `1/2` for this table: the averaged
    /// functional, and every functional when `d = 1`.
    pub fn is_symmetric(&self) -> bool {
        self.kind == ImmersionKind::Average || self.d == 1
    }

    /// Adds the mirror image `(1−z, 1−F(z))` of every node whose mirror is
    /// not already tabulated. Only valid for symmetric distributions.
    pub fn mirrored(&self) -> Result<Self> {
        if !self.is_symmetric() {
            return Err(Error::arg("only a symmetric distribution can be mirrored"));
        }
        let mut points: BTreeMap<u64, (f64, f64)> = self.nodes().map(|(z, c)| (z.to_bits(), (z, c))).collect();
        for (z, c) in self.nodes() {
            let mz = 1.0 - z;
            if !self.z.iter().any(|&t| (t - mz).abs() < 1e-12) {
                points.insert(mz.to_bits(), (mz, 1.0 - c));
            }
        }
        let mut points: Vec<(f64, f64)> = points.into_values().collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::from_points(self.kind, self.beta.clone(), points)
    }

    /// `P(Z_B ≤ z)`, interpolated.
    pub fn cdf(&self, z: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if !(z >= lo - 1e-12 && z <= hi + 1e-12) {
            return Err(Error::Range {
                what: "z",
                value: z,
                lo,
                hi,
            });
        }
        let z = z.clamp(lo, hi);
        let i = self.z.partition_point(|&t| t < z);
        if self.z[i] == z {
            return Ok(self.cdf[i]);
        }
        let t = (z - self.z[i - 1]) / (self.z[i] - self.z[i - 1]);
        Ok(self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1]))
    }

    /// `inf{z : F(z) ≥ p}` on the interpolated distribution function.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let (flo, fhi) = (self.cdf[0], *self.cdf.last().unwrap());
        let out = || Error::Range {
            what: "probability",
            value: p,
            lo: flo,
            hi: fhi,
        };
        if !(p <= fhi) || !(p >= flo) {
            return Err(out());
        }
        let i = self.cdf.partition_point(|&c| c < p);
        if i == 0 {
            return Ok(self.z[0]);
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = (p - c0) / (c1 - c0);
        Ok(self.z[i - 1] + t * (self.z[i] - self.z[i - 1]))
    }

    /// Writes this table as CSV rows, with header when `header` is set.
    pub fn write_csv<W: Write>(&self, w: W, header: bool) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(header).from_writer(w);
        for (z, cdf) in self.nodes() {
            wr.serialize(ZbRow {
                kind: self.kind.index(),
                d: self.d,
                beta: beta_key(&self.beta),
                z,
                cdf,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes several tables into one CSV.
    pub fn write_all_csv<W: Write>(tables: &[ZbTable], mut w: W) -> Result<()> {
        for (i, t) in tables.iter().enumerate() {
            t.write_csv(&mut w, i == 0)?;
        }
        Ok(())
    }

    /// Reads every table in a CSV, grouped by `(kind, β)` in file order.
    pub fn read_all<R: Read>(r: R) -> Result<Vec<ZbTable>> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let expected = ["kind", "d", "beta", "z", "cdf"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::arg(format!(
                "table header must be {}, found {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut groups: Vec<TableGroup> = Vec::new();
        for row in rd.deserialize() {
            let row: ZbRow = row?;
            let key = (row.kind, row.beta.clone());
            match groups.iter_mut().find(|g| g.0 == key) {
                Some(g) => g.2.push((row.z, row.cdf)),
                None => groups.push((key, row.d, vec![(row.z, row.cdf)])),
            }
        }
        groups
            .into_iter()
            .map(|((kind, beta), d, points)| {
                let beta = parse_beta(&beta)?;
                if beta.len() != d {
                    return Err(Error::arg(format!("beta {beta:?} does not have {d} entries")));
                }
                Self::from_points(ImmersionKind::from_index(kind)?, beta, points)
            })
            .collect()
    }

    /// Loads the table for `(kind, β)` from a CSV file.
    pub fn load(path: &Path, kind: ImmersionKind, beta: &[u32]) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let tables = Self::read_all(file).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        find_table(tables, kind, beta).ok_or_else(|| {
            Error::config(format!(
                "{} holds no table for kind {} and beta {}",
                path.display(),
                kind.index(),
                beta_key(beta)
            ))
        })
    }
}

fn find_table(tables: Vec<ZbTable>, kind: ImmersionKind, beta: &[u32]) -> Option<ZbTable> {
    let d = beta.len();
    tables
        .into_iter()
        .find(|t| t.beta == beta && (t.kind == kind || (d == 1 && t.d == 1)))
}

const BUILTIN_D1: &str = include_str!("../tables/zb_d1.csv");
const BUILTIN_D2: &str = include_str!("../tables/zb_d2.csv");

/// The tables shipped with the crate: `d = 1` with `β ∈ {1, 3, 5}` and
/// `d = 2` with `β ∈ {(1,1), (3,1), (3,3)}`, all three kinds.
pub fn builtin_table(kind: ImmersionKind, beta: &[u32]) -> Option<ZbTable> {
    let src = match beta.len() {
        1 => BUILTIN_D1,
        2 => BUILTIN_D2,
        _ => return None,
    };
    let tables = ZbTable::read_all(src.as_bytes()).expect("shipped tables parse");
    find_table(tables, kind, beta)
}

/// All shipped tables.
pub fn builtin_tables() -> Vec<ZbTable> {
    [BUILTIN_D1, BUILTIN_D2]
        .iter()
        .flat_map(|src| ZbTable::read_all(src.as_bytes()).expect("shipped tables parse"))
        .collect()
}

/// Limiting coverage of an interval at the given credibility.
pub fn coverage_of_level(credibility: f64, table: &ZbTable, sided: Sided) -> Result<f64> {
    check_credibility(credibility)?;
    match sided {
        Sided::UpperOneSided => table.cdf(credibility),
        Sided::TwoSidedEqualTail => {
            let gamma = 1.0 - credibility;
            let upper = table.cdf(1.0 - gamma / 2.0)?;
            if table.is_symmetric() {
                // The same upper-tail form that `recalibrate_level` inverts.
                Ok(2.0 * upper - 1.0)
            } else {
                Ok(upper - table.cdf(gamma / 2.0)?)
            }
        }
    }
}

/// The credibility whose limiting coverage is `target`.
///
/// One-sided: `F⁻¹(target)`. Two-sided with a symmetric distribution:
/// `2F⁻¹(1 − α/2) − 1` with `α = 1 − target`, i.e. `1 − 2F⁻¹(α/2)`.
/// Otherwise the two-sided relation is solved for `γ` by bisection.
pub fn recalibrate_level(target: f64, table: &ZbTable, sided: Sided) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::arg(format!("target coverage {target} is not in (0, 1)")));
    }
    let level = match sided {
        Sided::UpperOneSided => table.quantile(target)?,
        Sided::TwoSidedEqualTail if table.is_symmetric() => {
            let alpha = 1.0 - target;
            2.0 * table.quantile(1.0 - alpha / 2.0)? - 1.0
        }
        Sided::TwoSidedEqualTail => bisect_two_sided(target, table)?,
    };
    check_credibility(level).map_err(|_| Error::Range {
        what: "target coverage",
        value: target,
        lo: 0.0,
        hi: 1.0,
    })?;
    Ok(level)
}

fn bisect_two_sided(target: f64, table: &ZbTable) -> Result<f64> {
    let (zlo, zhi) = table.support();
    // γ must keep both γ/2 and 1 − γ/2 inside the support.
    let g_min = (2.0 * zlo).max(2.0 * (1.0 - zhi)).max(0.0);
    let g_max = (2.0 * zhi).min(2.0 * (1.0 - zlo)).min(1.0);
    let coverage = |g: f64| -> Result<f64> { Ok(table.cdf(1.0 - g / 2.0)? - table.cdf(g / 2.0)?) };
    if !(g_min < g_max) {
        return Err(Error::Range {
            what: "target coverage",
            value: target,
            lo: 0.0,
            hi: 0.0,
        });
    }
    let (c_hi, c_lo) = (coverage(g_min)?, coverage(g_max)?);
    if !(target >= c_lo && target <= c_hi) {
        return Err(Error::Range {
            what: "target coverage",
            value: target,
            lo: c_lo,
            hi: c_hi,
        });
    }
    let (mut a, mut b) = (g_min, g_max);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if coverage(m)? >= target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(1.0 - 0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `P(Z_B ≤ z)` at `z = 0.70, 0.75, …, 0.995` for `d = 1, β = 1`.
    const D1_BETA1_CDF: [(f64, f64); 9] = [
        (0.700, 0.719),
        (0.750, 0.772),
        (0.800, 0.826),
        (0.850, 0.875),
        (0.900, 0.923),
        (0.950, 0.965),
        (0.975, 0.985),
        (0.990, 0.994),
        (0.995, 0.997),
    ];

    /// Quantiles of `Z_B` for `d = 1, β = 1` as `(q, p)` nodes.
    const D1_BETA1_QUANTILES: [(f64, f64); 8] = [
        (0.683, 0.700),
        (0.730, 0.750),
        (0.777, 0.800),
        (0.825, 0.850),
        (0.878, 0.900),
        (0.932, 0.950),
        (0.964, 0.975),
        (0.994, 0.990),
    ];

    /// Quantiles of `Z_B^{(3)}` for `β = (1,1)` as `(q, p)` nodes.
    const D2_AVG_QUANTILES: [(f64, f64); 9] = [
        (0.677, 0.700),
        (0.724, 0.750),
        (0.771, 0.800),
        (0.819, 0.850),
        (0.872, 0.900),
        (0.928, 0.950),
        (0.959, 0.975),
        (0.982, 0.990),
        (0.990, 0.995),
    ];

    /// `P(Z_B^{(3)} ≤ z)` for `β = (1,1)`.
    const D2_AVG_CDF: [(f64, f64); 9] = [
        (0.700, 0.725),
        (0.750, 0.778),
        (0.800, 0.832),
        (0.850, 0.880),
        (0.900, 0.927),
        (0.950, 0.968),
        (0.975, 0.987),
        (0.990, 0.995),
        (0.995, 0.998),
    ];

    fn table(kind: ImmersionKind, beta: Vec<u32>, pts: &[(f64, f64)]) -> ZbTable {
        ZbTable::from_points(kind, beta, pts.to_vec()).unwrap()
    }

    #[test]
    fn type7_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = credible_interval_from(&v, 0.90, Sided::TwoSidedEqualTail).unwrap();
        assert!((lo - 5.95).abs() < 1e-12);
        assert!((hi - 95.05).abs() < 1e-12);
    }

    #[test]
    fn interval_tends_to_range() {
        let v = [3.0, -1.0, 2.5, 7.0];
        let (lo, hi) = credible_interval_from(&v, 1.0 - 1e-15, Sided::TwoSidedEqualTail).unwrap();
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 7.0).abs() < 1e-12);
    }

    #[test]
    fn constant_draws_collapse() {
        let (lo, hi) = credible_interval_from(&[2.0; 10], 0.9, Sided::TwoSidedEqualTail).unwrap();
        assert_eq!((lo, hi), (2.0, 2.0));
        let (lo, hi) = credible_interval_from(&[2.0; 10], 0.9, Sided::UpperOneSided).unwrap();
        assert_eq!((lo, hi), (f64::NEG_INFINITY, 2.0));
    }

    #[test]
    fn interval_errors() {
        assert!(credible_interval_from(&[], 0.9, Sided::TwoSidedEqualTail).is_err());
        assert!(credible_interval_from(&[1.0], 1.0, Sided::TwoSidedEqualTail).is_err());
        assert!(credible_interval_from(&[1.0], 0.0, Sided::UpperOneSided).is_err());
    }

    #[test]
    fn two_sided_average_recalibration() {
        let t = table(ImmersionKind::Average, vec![1, 1], &D2_AVG_QUANTILES)
            .mirrored()
            .unwrap();
        let c = recalibrate_level(0.95, &t, Sided::TwoSidedEqualTail).unwrap();
        assert!((c - 0.918).abs() < 1e-12, "{c}");
    }

    #[test]
    fn one_sided_recalibration() {
        let t = table(ImmersionKind::Lower, vec![1], &D1_BETA1_QUANTILES);
        let c = recalibrate_level(0.90, &t, Sided::UpperOneSided).unwrap();
        assert!((c - 0.878).abs() < 1e-12);
    }

    #[test]
    fn identity_table_is_a_fixed_point() {
        let t = table(ImmersionKind::Lower, vec![1, 1], &[(0.0, 0.0), (1.0, 1.0)]);
        for target in [0.6, 0.8, 0.9, 0.95] {
            assert!((recalibrate_level(target, &t, Sided::UpperOneSided).unwrap() - target).abs() < 1e-12);
            assert!((recalibrate_level(target, &t, Sided::TwoSidedEqualTail).unwrap() - target).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_coverage() {
        let t = table(ImmersionKind::Lower, vec![1], &D1_BETA1_CDF);
        assert_eq!(coverage_of_level(0.95, &t, Sided::UpperOneSided).unwrap(), 0.965);
        let t3 = table(ImmersionKind::Average, vec![1, 1], &D2_AVG_CDF);
        assert_eq!(coverage_of_level(0.90, &t3, Sided::UpperOneSided).unwrap(), 0.927);
        let m = t3.mirrored().unwrap();
        assert!((coverage_of_level(0.5, &m, Sided::UpperOneSided).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_support_is_a_range_error() {
        let t = table(ImmersionKind::Lower, vec![1], &D1_BETA1_CDF);
        assert!(matches!(
            coverage_of_level(0.5, &t, Sided::UpperOneSided),
            Err(Error::Range { .. })
        ));
        assert!(matches!(
            recalibrate_level(0.5, &t, Sided::UpperOneSided),
            Err(Error::Range { .. })
        ));
        let u = table(ImmersionKind::Upper, vec![1, 1], &D2_AVG_CDF);
        assert!(matches!(
            recalibrate_level(0.95, &u, Sided::TwoSidedEqualTail),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn two_sided_symmetric_uses_mirror() {
        // Two-sided coverage of a symmetric table needs only the upper tail.
        let t = table(ImmersionKind::Average, vec![1, 1], &D2_AVG_CDF);
        let c = coverage_of_level(0.90, &t, Sided::TwoSidedEqualTail).unwrap();
        assert!((c - (2.0 * 0.968 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn round_trip_on_paper_tables() {
        let one = table(ImmersionKind::Lower, vec![1], &D1_BETA1_CDF);
        let three = table(ImmersionKind::Average, vec![1, 1], &D2_AVG_CDF)
            .mirrored()
            .unwrap();
        for target in [0.75, 0.8, 0.85, 0.9, 0.95, 0.975] {
            let c = recalibrate_level(target, &one, Sided::UpperOneSided).unwrap();
            assert!((coverage_of_level(c, &one, Sided::UpperOneSided).unwrap() - target).abs() < 1e-12);
            assert!(c < target);
        }
        for target in [0.5, 0.7, 0.8, 0.9, 0.95] {
            let c = recalibrate_level(target, &three, Sided::TwoSidedEqualTail).unwrap();
            assert!((coverage_of_level(c, &three, Sided::TwoSidedEqualTail).unwrap() - target).abs() < 1e-9);
            assert!(c < target);
        }
    }

    #[test]
    fn csv_round_trip() {
        let a = table(ImmersionKind::Average, vec![1, 3], &D2_AVG_CDF);
        let b = table(ImmersionKind::Lower, vec![1, 3], &D2_AVG_QUANTILES);
        let mut buf = Vec::new();
        ZbTable::write_all_csv(&[a.clone(), b.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("kind,d,beta,z,cdf\n3,2,1-3,0.7,0.725\n"));
        assert_eq!(ZbTable::read_all(buf.as_slice()).unwrap(), vec![a, b]);
    }

    #[test]
    fn csv_header_checked() {
        let bad = "kind,dim,beta,z,cdf\n1,1,1,0.5,0.5\n";
        assert!(ZbTable::read_all(bad.as_bytes()).is_err());
    }

    #[test]
    fn empirical_table_from_samples() {
        let s = [0.0, 0.25, 0.5, 0.5, 1.0];
        let t = ZbTable::from_samples(ImmersionKind::Lower, vec![1], &s, 4).unwrap();
        let cdf: Vec<f64> = t.nodes().map(|n| n.1).collect();
        assert_eq!(cdf, vec![0.2, 0.4, 0.8, 0.8, 1.0]);
    }

    #[test]
    fn builtin_tables_cover_the_defaults() {
        for beta in [vec![1], vec![3], vec![5], vec![1, 1], vec![3, 1], vec![3, 3]] {
            for kind in ImmersionKind::ALL {
                let t = builtin_table(kind, &beta).unwrap();
                assert_eq!(t.beta(), beta.as_slice());
                assert_eq!(t.support(), (0.0, 1.0));
            }
        }
    }
}
