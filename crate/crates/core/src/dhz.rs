//! The frequentist block max-min / min-max estimator on raw observations
//! and its pivotal confidence interval.
//!
//! Rectangles `[u, v]` are closed and their corners range over the observed
//! coordinates on each axis together with `x₀`. On that compressed lattice
//! every rectangle is a block of cells, so means come from prefix sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BinStats, GridSpec, RegressionDataset};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DhzEstimate {
    pub f_minus: f64,
    pub f_plus: f64,
    pub f_hat: f64,
    /// Observations in the block named by `count_block`.
    pub block_count: u64,
    pub count_block: CountBlock,
    /// Lower corner attaining `f_minus`.
    pub u_hat: Vec<f64>,
    /// Upper corner attaining `f_plus`.
    pub v_hat: Vec<f64>,
}

/// The rectangle whose observations are counted in the interval width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CountBlock {
    /// `[û, v̂]`, with `û` from the max-min and `v̂` from the min-max.
    Crossed,
    /// `[û, v]` for the `v` attaining the max-min; used when `[û, v̂]` is
    /// empty, which happens when both corners fall in the gap around `x₀`.
    Lower,
}

/// Per-axis sorted distinct coordinates, including `x0`.
fn axis_values(data: &RegressionDataset, x0: &[f64]) -> Vec<Vec<f64>> {
    (0..data.dim())
        .map(|k| {
            let mut v: Vec<f64> = (0..data.len()).map(|i| data.x(i)[k]).collect();
            v.push(x0[k]);
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect()
}

fn position(values: &[f64], x: f64) -> usize {
    values
        .binary_search_by(|v| v.total_cmp(&x))
        .expect("coordinate is one of the axis values")
}

/// Inner corners that recently cut a row short, tried before a full scan.
const KILLERS: usize = 4;

/// `max` over `outer` of `min` over `inner` of `value`, skipping `None`.
/// Returns the value with its outer corner and that row's first argmin.
///
/// A row stops once it cannot beat the best so far, so only rows that
/// improve are scanned in full; ties keep the first corner.
fn max_min<'a>(
    outer: &'a [usize],
    inner: &'a [usize],
    d: usize,
    value: impl Fn(&[usize], &[usize]) -> Option<f64>,
) -> (f64, &'a [usize], &'a [usize]) {
    let mut best: Option<(f64, &[usize], &[usize])> = None;
    let mut killers: Vec<&[usize]> = Vec::with_capacity(KILLERS + 1);
    'rows: for u in outer.chunks_exact(d) {
        if let Some((b, _, _)) = best {
            for i in 0..killers.len() {
                if value(u, killers[i]).is_some_and(|m| m <= b) {
                    killers[..=i].rotate_right(1);
                    continue 'rows;
                }
            }
        }
        let mut row: Option<(f64, &[usize])> = None;
        for v in inner.chunks_exact(d) {
            let Some(m) = value(u, v) else { continue };
            if row.is_none_or(|(r, _)| m < r) {
                row = Some((m, v));
            }
            if best.is_some_and(|(b, _, _)| m <= b) {
                killers.insert(0, v);
                killers.truncate(KILLERS);
                continue 'rows;
            }
        }
        if let Some((r, v)) = row {
            if best.is_none_or(|(b, _, _)| r > b) {
                best = Some((r, u, v));
            }
        }
    }
    best.expect("some block holds an observation")
}

/// The estimator at `x0`. Ties in the outer optimizations keep the first
/// corner in row-major order.
pub fn dhz_estimate(data: &RegressionDataset, x0: &[f64]) -> Result<DhzEstimate> {
    if data.is_empty() {
        return Err(Error::state("the estimator needs at least one observation"));
    }
    if x0.len() != data.dim() {
        return Err(Error::arg(format!(
            "x0 has dimension {}, data has {}",
            x0.len(),
            data.dim()
        )));
    }
    if let Some((axis, &value)) = x0.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain { axis, value });
    }

    let values = axis_values(data, x0);
    let grid = GridSpec::new(values.iter().map(Vec::len).collect())?;
    let mut counts = vec![0u64; grid.len()];
    let mut sums = vec![0.0; grid.len()];
    for (x, y) in data.iter() {
        let j: Vec<usize> = x.iter().zip(&values).map(|(&xk, vk)| position(vk, xk)).collect();
        let lin = grid.linear(&j);
        counts[lin] += 1;
        sums[lin] += y;
    }
    let stats = BinStats::from_cells(&grid, counts, sums)?;
    let pc = stats.prefix_counts();
    let ps = stats.prefix_sums();
    let mean = |lo: &[usize], hi: &[usize]| {
        let n = pc.block_sum(lo, hi);
        (n > 0).then(|| ps.block_sum(lo, hi) / n as f64)
    };

    let d = grid.dim();
    let j0: Vec<usize> = x0.iter().zip(&values).map(|(&x, vk)| position(vk, x)).collect();
    let zero = vec![0; d];
    let top: Vec<usize> = grid.cells().iter().map(|n| n - 1).collect();
    let lowers: Vec<usize> = grid.block_indices(&zero, &j0).flatten().collect();
    let uppers: Vec<usize> = grid.block_indices(&j0, &top).flatten().collect();

    let (f_minus, u_idx, v_minus) = max_min(&lowers, &uppers, d, |lo, hi| mean(lo, hi));
    let (neg_plus, v_idx, _) = max_min(&uppers, &lowers, d, |hi, lo| mean(lo, hi).map(|m| -m));
    let f_plus = -neg_plus;
    let mut block_count = pc.block_sum(u_idx, v_idx);
    let mut count_block = CountBlock::Crossed;
    if block_count == 0 {
        block_count = pc.block_sum(u_idx, v_minus);
        count_block = CountBlock::Lower;
    }
    let coords = |idx: &[usize]| idx.iter().zip(&values).map(|(&j, vk)| vk[j]).collect();
    Ok(DhzEstimate {
        f_minus,
        f_plus,
        f_hat: 0.5 * (f_minus + f_plus),
        block_count,
        count_block,
        u_hat: coords(u_idx),
        v_hat: coords(v_idx),
    })
}

/// `f̂ ± c_γ σ̂ / √count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DhzInterval {
    pub lower: f64,
    pub upper: f64,
}

impl DhzInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

pub fn dhz_interval(est: &DhzEstimate, sigma_hat: f64, c_gamma: f64) -> Result<DhzInterval> {
    if !(c_gamma >= 0.0 && c_gamma.is_finite()) {
        return Err(Error::arg(format!("critical value {c_gamma} must be nonnegative")));
    }
    if !(sigma_hat >= 0.0 && sigma_hat.is_finite()) {
        return Err(Error::arg(format!("noise scale {sigma_hat} must be nonnegative")));
    }
    if est.block_count == 0 {
        return Err(Error::state("empty block"));
    }
    let half = c_gamma * sigma_hat / (est.block_count as f64).sqrt();
    Ok(DhzInterval {
        lower: est.f_hat - half,
        upper: est.f_hat + half,
    })
}
