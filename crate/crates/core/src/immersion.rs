//! Block isotonization of step functions.
//!
//! For a cell `j₀`, the lower map takes the max over lower corners
//! `j₁ ⪯ j₀` of the min over upper corners `j₂ ⪰ j₀` of the count-weighted
//! block mean of `θ` on `[j₁:j₂]`; the upper map swaps the two operations.
//! Only blocks holding at least one observation enter the inner operation,
//! and an outer corner none of whose blocks is occupied is skipped.
//!
//! Both maps send any step function into the coordinatewise nondecreasing
//! ones and fix monotone functions when every cell is occupied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bin_index, BinStats, GridSpec, WeightedBlocks};

/// Which immersion map to push posterior draws through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImmersionKind {
    /// Max-min.
    Lower,
    /// Min-max.
    Upper,
    /// Average of the two.
    Average,
}

impl ImmersionKind {
    pub const ALL: [ImmersionKind; 3] = [Self::Lower, Self::Upper, Self::Average];

    /// The index `1`, `2`, `3` used in tables of the limiting distribution.
    pub fn index(self) -> u8 {
        match self {
            Self::Lower => 1,
            Self::Upper => 2,
            Self::Average => 3,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::Lower),
            2 => Ok(Self::Upper),
            3 => Ok(Self::Average),
            _ => Err(Error::arg(format!("immersion kind must be 1, 2 or 3, got {i}"))),
        }
    }

    /// Combines the lower and upper values.
    pub fn select(self, lower: f64, upper: f64) -> f64 {
        match self {
            Self::Lower => lower,
            Self::Upper => upper,
            Self::Average => (lower + upper) / 2.0,
        }
    }
}

impl std::str::FromStr for ImmersionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "lower" | "maxmin" => Ok(Self::Lower),
            "2" | "upper" | "minmax" => Ok(Self::Upper),
            "3" | "average" => Ok(Self::Average),
            _ => Err(Error::arg(format!("unknown immersion kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for ImmersionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lower => "lower",
            Self::Upper => "upper",
            Self::Average => "average",
        })
    }
}

/// A piecewise constant function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    grid: GridSpec,
    theta: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: GridSpec, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != grid.len() {
            return Err(Error::arg(format!("{} heights for {} cells", theta.len(), grid.len())));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::arg("step heights must be finite"));
        }
        Ok(Self { grid, theta })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    /// Value at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.theta[self.grid.linear(&bin_index(x, &self.grid)?)])
    }

    /// Whether `θ_{j₁} ≤ θ_{j₂}` whenever `j₁ ⪯ j₂`.
    pub fn is_monotone(&self) -> bool {
        is_monotone(&self.grid, &self.theta)
    }
}

/// Checks coordinatewise monotonicity through the one-step neighbours,
/// which by transitivity covers every comparable pair.
pub fn is_monotone(grid: &GridSpec, theta: &[f64]) -> bool {
    let zero = vec![0; grid.dim()];
    let top: Vec<usize> = grid.cells().iter().map(|n| n - 1).collect();
    grid.block_indices(&zero, &top).all(|j| {
        let here = theta[grid.linear(&j)];
        (0..grid.dim()).all(|k| {
            if j[k] + 1 == grid.cells()[k] {
                return true;
            }
            let mut next = j.clone();
            next[k] += 1;
            here <= theta[grid.linear(&next)]
        })
    })
}

/// Lower and upper immersion values at one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellImmersion {
    pub lower: f64,
    pub upper: f64,
}

impl CellImmersion {
    pub fn get(&self, kind: ImmersionKind) -> f64 {
        kind.select(self.lower, self.upper)
    }
}

/// Corner lists around one cell: every `j₁ ⪯ j₀` and every `j₂ ⪰ j₀`,
/// flattened `d` entries at a time.
#[derive(Clone, Debug)]
pub struct CornerSet {
    d: usize,
    cell: Vec<usize>,
    lower: Vec<usize>,
    upper: Vec<usize>,
}

impl CornerSet {
    pub fn new(grid: &GridSpec, j0: &[usize]) -> Result<Self> {
        grid.check_index(j0)?;
        let zero = vec![0; grid.dim()];
        let top: Vec<usize> = grid.cells().iter().map(|n| n - 1).collect();
        Ok(Self {
            d: grid.dim(),
            cell: j0.to_vec(),
            lower: grid.block_indices(&zero, j0).flatten().collect(),
            upper: grid.block_indices(j0, &top).flatten().collect(),
        })
    }

    fn lowers(&self) -> std::slice::ChunksExact<'_, usize> {
        self.lower.chunks_exact(self.d)
    }

    fn uppers(&self) -> std::slice::ChunksExact<'_, usize> {
        self.upper.chunks_exact(self.d)
    }
}

fn block_value(
    blocks: &WeightedBlocks<'_>,
    theta: &[f64],
    corners: &CornerSet,
    lo: &[usize],
    hi: &[usize],
) -> Option<f64> {
    if lo == hi {
        // A single cell: its own height, without the round trip through N θ / N.
        let lin = blocks.stats().grid().linear(&corners.cell);
        return (blocks.stats().counts()[lin] > 0).then(|| theta[lin]);
    }
    blocks.mean_unchecked(lo, hi)
}

fn lower_value(blocks: &WeightedBlocks<'_>, theta: &[f64], corners: &CornerSet) -> Option<f64> {
    let mut best: Option<f64> = None;
    for lo in corners.lowers() {
        let inner = corners
            .uppers()
            .filter_map(|hi| block_value(blocks, theta, corners, lo, hi))
            .reduce(f64::min);
        if let Some(v) = inner {
            best = Some(best.map_or(v, |b| b.max(v)));
        }
    }
    best
}

fn upper_value(blocks: &WeightedBlocks<'_>, theta: &[f64], corners: &CornerSet) -> Option<f64> {
    let mut best: Option<f64> = None;
    for hi in corners.uppers() {
        let inner = corners
            .lowers()
            .filter_map(|lo| block_value(blocks, theta, corners, lo, hi))
            .reduce(f64::max);
        if let Some(v) = inner {
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    best
}

fn no_data() -> Error {
    Error::state("every cell is empty; the block means are undefined")
}

/// Evaluates both maps at a prepared corner set. `theta` must be the
/// heights `blocks` was built from.
pub fn immerse_cell(blocks: &WeightedBlocks<'_>, theta: &[f64], corners: &CornerSet) -> Result<CellImmersion> {
    let lower = lower_value(blocks, theta, corners).ok_or_else(no_data)?;
    let upper = upper_value(blocks, theta, corners).ok_or_else(no_data)?;
    Ok(CellImmersion { lower, upper })
}

fn prepare<'a>(theta: &[f64], stats: &'a BinStats, x0: &[f64]) -> Result<(WeightedBlocks<'a>, CornerSet)> {
    if stats.n() == 0 {
        return Err(no_data());
    }
    let blocks = WeightedBlocks::new(stats, theta)?;
    let j0 = bin_index(x0, stats.grid())?;
    let corners = CornerSet::new(stats.grid(), &j0)?;
    Ok((blocks, corners))
}

/// The max-min map evaluated at `x0`.
pub fn iota_lower_at(theta: &[f64], stats: &BinStats, x0: &[f64]) -> Result<f64> {
    let (blocks, corners) = prepare(theta, stats, x0)?;
    lower_value(&blocks, theta, &corners).ok_or_else(no_data)
}

/// The min-max map evaluated at `x0`.
pub fn iota_upper_at(theta: &[f64], stats: &BinStats, x0: &[f64]) -> Result<f64> {
    let (blocks, corners) = prepare(theta, stats, x0)?;
    upper_value(&blocks, theta, &corners).ok_or_else(no_data)
}

pub fn iota_at(kind: ImmersionKind, theta: &[f64], stats: &BinStats, x0: &[f64]) -> Result<f64> {
    match kind {
        ImmersionKind::Lower => iota_lower_at(theta, stats, x0),
        ImmersionKind::Upper => iota_upper_at(theta, stats, x0),
        ImmersionKind::Average => {
            let (blocks, corners) = prepare(theta, stats, x0)?;
            Ok(immerse_cell(&blocks, theta, &corners)?.get(kind))
        }
    }
}

/// Applies the chosen map at every cell, using the cell index itself as
/// the evaluation point.
pub fn isotonize_surface(theta: &[f64], stats: &BinStats, kind: ImmersionKind) -> Result<StepFunction> {
    if stats.n() == 0 {
        return Err(no_data());
    }
    let grid = stats.grid();
    let blocks = WeightedBlocks::new(stats, theta)?;
    let out = (0..grid.len())
        .map(|lin| {
            let corners = CornerSet::new(grid, &grid.unravel(lin))?;
            let v = match kind {
                ImmersionKind::Lower => lower_value(&blocks, theta, &corners).ok_or_else(no_data)?,
                ImmersionKind::Upper => upper_value(&blocks, theta, &corners).ok_or_else(no_data)?,
                ImmersionKind::Average => immerse_cell(&blocks, theta, &corners)?.get(kind),
            };
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    StepFunction::new(grid.clone(), out)
}

/// Weighted least-squares nondecreasing fit by pooling adjacent violators.
pub fn pava_1d(theta: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != weights.len() {
        return Err(Error::arg("heights and weights differ in length"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::arg(format!("weight {w} is not positive")));
    }
    // (mean, weight, length) per pooled block
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(theta.len());
    for (&t, &w) in theta.iter().zip(weights) {
        let mut cur = (t, w, 1);
        while let Some(&(m, pw, len)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let tw = pw + cur.1;
            cur = ((m * pw + cur.0 * cur.1) / tw, tw, len + cur.2);
        }
        blocks.push(cur);
    }
    Ok(blocks
        .into_iter()
        .flat_map(|(m, _, len)| std::iter::repeat_n(m, len))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats(cells: Vec<usize>, counts: Vec<u64>) -> BinStats {
        let g = GridSpec::new(cells).unwrap();
        let sums = vec![0.0; counts.len()];
        BinStats::from_cells(&g, counts, sums).unwrap()
    }

    fn centre(grid: &GridSpec, j: &[usize]) -> Vec<f64> {
        j.iter()
            .zip(grid.cells())
            .map(|(&a, &n)| (a as f64 + 0.5) / n as f64)
            .collect()
    }

    #[test]
    fn two_cells_pool() {
        let s = stats(vec![2], vec![1, 1]);
        assert_eq!(iota_lower_at(&[2.0, 1.0], &s, &[0.25]).unwrap(), 1.5);
        assert_eq!(iota_upper_at(&[2.0, 1.0], &s, &[0.25]).unwrap(), 1.5);
        assert_eq!(iota_at(ImmersionKind::Average, &[2.0, 1.0], &s, &[0.25]).unwrap(), 1.5);
    }

    #[test]
    fn monotone_input_is_fixed() {
        let s = stats(vec![2], vec![1, 1]);
        assert_eq!(iota_lower_at(&[1.0, 2.0], &s, &[0.75]).unwrap(), 2.0);
        assert_eq!(iota_upper_at(&[1.0, 2.0], &s, &[0.75]).unwrap(), 2.0);
    }

    #[test]
    fn constant_surface_any_kind() {
        let s = stats(vec![3, 2], vec![1, 4, 2, 7, 1, 3]);
        let theta = [0.25; 6];
        for kind in ImmersionKind::ALL {
            assert_eq!(iota_at(kind, &theta, &s, &[0.5, 0.9]).unwrap(), 0.25);
        }
    }

    #[test]
    fn kind_dispatch() {
        let s = stats(vec![3], vec![2, 1, 3]);
        let theta = [0.2, -1.0, 0.4];
        assert_eq!(
            iota_at(ImmersionKind::Lower, &theta, &s, &[0.5]).unwrap(),
            iota_lower_at(&theta, &s, &[0.5]).unwrap()
        );
        assert_eq!(
            iota_at(ImmersionKind::Upper, &theta, &s, &[0.5]).unwrap(),
            iota_upper_at(&theta, &s, &[0.5]).unwrap()
        );
    }

    #[test]
    fn three_cells_pool_to_two() {
        let s = stats(vec![3], vec![1, 1, 1]);
        let out = isotonize_surface(&[3.0, 1.0, 2.0], &s, ImmersionKind::Lower).unwrap();
        assert_eq!(out.theta(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn empty_data_is_a_state_error() {
        let s = stats(vec![2, 2], vec![0; 4]);
        assert!(matches!(
            iota_lower_at(&[0.0; 4], &s, &[0.5, 0.5]),
            Err(Error::State(_))
        ));
        assert!(matches!(
            isotonize_surface(&[0.0; 4], &s, ImmersionKind::Upper),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn empty_cells_may_reverse_the_order() {
        // Upper corner cells empty: the lower map can exceed the upper map.
        let s = stats(vec![3], vec![1, 0, 1]);
        let theta = [5.0, 0.0, 1.0];
        let lo = iota_lower_at(&theta, &s, &[0.5]).unwrap();
        let hi = iota_upper_at(&theta, &s, &[0.5]).unwrap();
        // lower: j1 ∈ {0,1}; j1=0 → min(mean[0:1]=5, mean[0:2]=3) = 3; j1=1 → min(mean[1:2]=1) = 1 → 3
        // upper: j2 ∈ {1,2}; j2=1 → max(mean[0:1]=5) = 5; j2=2 → max(3, 1) = 3 → 3
        assert_eq!((lo, hi), (3.0, 3.0));

        // Only cells (0,0) and (1,1) are occupied; x0 sits in the empty cell (0,1).
        let s = stats(vec![2, 3], vec![2, 0, 0, 0, 2, 0]);
        let theta = [2.0, 8.0, 5.0, 8.0, 7.0, 3.0];
        let lo = iota_lower_at(&theta, &s, &[0.25, 0.5]).unwrap();
        let hi = iota_upper_at(&theta, &s, &[0.25, 0.5]).unwrap();
        assert_eq!((lo, hi), (7.0, 2.0));
    }

    #[test]
    fn pava_examples() {
        assert_eq!(pava_1d(&[1.0, 2.0, 3.0], &[1.0; 3]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(pava_1d(&[2.0, 1.0], &[1.0; 2]).unwrap(), vec![1.5, 1.5]);
        assert_eq!(pava_1d(&[3.0, 1.0, 2.0], &[1.0; 3]).unwrap(), vec![2.0, 2.0, 2.0]);
        assert!(pava_1d(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(pava_1d(&[1.0, 2.0], &[1.0, -2.0]).is_err());
    }

    #[test]
    fn integer_monotone_surface_fixed_exactly() {
        let s = stats(vec![3, 3], vec![1, 2, 3, 1, 5, 1, 2, 2, 7]);
        let theta = [0.0, 1.0, 4.0, 1.0, 2.0, 4.0, 3.0, 3.0, 5.0];
        for kind in ImmersionKind::ALL {
            assert_eq!(isotonize_surface(&theta, &s, kind).unwrap().theta(), &theta);
        }
    }

    /// Block mean by looping over the block's cells.
    fn direct_mean(s: &BinStats, theta: &[f64], lo: &[usize], hi: &[usize]) -> Option<f64> {
        let g = s.grid();
        let (mut num, mut den) = (0.0, 0u64);
        for j in g.block_indices(lo, hi) {
            let lin = g.linear(&j);
            num += s.counts()[lin] as f64 * theta[lin];
            den += s.counts()[lin];
        }
        (den > 0).then(|| num / den as f64)
    }

    fn brute_force(s: &BinStats, theta: &[f64], j0: &[usize]) -> (f64, f64) {
        let g = s.grid();
        let zero = vec![0; g.dim()];
        let top: Vec<usize> = g.cells().iter().map(|n| n - 1).collect();
        let lowers: Vec<_> = g.block_indices(&zero, j0).collect();
        let uppers: Vec<_> = g.block_indices(j0, &top).collect();
        let mut maxmin = f64::NEG_INFINITY;
        for lo in &lowers {
            let mut m = f64::INFINITY;
            for hi in &uppers {
                if let Some(v) = direct_mean(s, theta, lo, hi) {
                    m = m.min(v);
                }
            }
            if m.is_finite() {
                maxmin = maxmin.max(m);
            }
        }
        let mut minmax = f64::INFINITY;
        for hi in &uppers {
            let mut m = f64::NEG_INFINITY;
            for lo in &lowers {
                if let Some(v) = direct_mean(s, theta, lo, hi) {
                    m = m.max(v);
                }
            }
            if m.is_finite() {
                minmax = minmax.min(m);
            }
        }
        (maxmin, minmax)
    }

    fn instance(max_d: usize, max_j: usize, allow_empty: bool) -> impl Strategy<Value = (BinStats, Vec<f64>)> {
        prop::collection::vec(1..=max_j, 1..=max_d).prop_flat_map(move |cells| {
            let len: usize = cells.iter().product();
            let lo = if allow_empty { 0u64 } else { 1 };
            (
                Just(cells),
                prop::collection::vec(lo..5, len),
                prop::collection::vec(-3.0f64..3.0, len),
            )
                .prop_filter("needs data", |(_, c, _)| c.iter().sum::<u64>() > 0)
                .prop_map(|(cells, counts, theta)| (stats(cells, counts), theta))
        })
    }

    proptest! {
        #[test]
        fn output_is_monotone((s, theta) in instance(3, 5, true)) {
            for kind in [ImmersionKind::Lower, ImmersionKind::Upper] {
                prop_assert!(isotonize_surface(&theta, &s, kind).unwrap().is_monotone());
            }
        }

        #[test]
        fn lower_below_upper_with_full_support((s, theta) in instance(3, 4, false)) {
            let g = s.grid().clone();
            for lin in 0..g.len() {
                let x = centre(&g, &g.unravel(lin));
                let lo = iota_lower_at(&theta, &s, &x).unwrap();
                let hi = iota_upper_at(&theta, &s, &x).unwrap();
                prop_assert!(lo <= hi + 1e-12, "{} > {}", lo, hi);
            }
        }

        #[test]
        fn monotone_input_fixed((s, raw) in instance(3, 4, false)) {
            // Sorting along a linear extension does not give a monotone
            // surface; build one from a sum of per-axis increasing terms.
            let g = s.grid().clone();
            let theta: Vec<f64> = (0..g.len()).map(|lin| {
                g.unravel(lin).iter().enumerate().map(|(k, &jk)| (jk as f64 + 1.0) * raw[k % raw.len()].abs()).sum()
            }).collect();
            for kind in [ImmersionKind::Lower, ImmersionKind::Upper] {
                let out = isotonize_surface(&theta, &s, kind).unwrap();
                for (a, b) in out.theta().iter().zip(&theta) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }

        #[test]
        fn affine_equivariance((s, theta) in instance(2, 4, true), a in 0.0f64..4.0, b in -5.0f64..5.0) {
            let g = s.grid().clone();
            let shifted: Vec<f64> = theta.iter().map(|t| a * t + b).collect();
            for kind in ImmersionKind::ALL {
                let base = isotonize_surface(&theta, &s, kind).unwrap();
                let moved = isotonize_surface(&shifted, &s, kind).unwrap();
                for lin in 0..g.len() {
                    let want = a * base.theta()[lin] + b;
                    prop_assert!((moved.theta()[lin] - want).abs() <= 1e-10 * (1.0 + want.abs()));
                }
            }
        }

        #[test]
        fn univariate_matches_pava(
            (counts, theta) in (1usize..=50).prop_flat_map(|j| (
                prop::collection::vec(1u64..6, j),
                prop::collection::vec(-3.0f64..3.0, j),
            ))
        ) {
            let s = stats(vec![counts.len()], counts.clone());
            let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let fit = pava_1d(&theta, &w).unwrap();
            for kind in [ImmersionKind::Lower, ImmersionKind::Upper] {
                let out = isotonize_surface(&theta, &s, kind).unwrap();
                for (a, b) in out.theta().iter().zip(&fit) {
                    prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn matches_brute_force_on_3x3((s, theta) in instance(2, 3, true).prop_filter("3x3", |(s, _)| s.grid().cells() == [3, 3])) {
            check_brute_force(&s, &theta);
        }
    }

    fn check_brute_force(s: &BinStats, theta: &[f64]) {
        let g = s.grid().clone();
        for lin in 0..g.len() {
            let j = g.unravel(lin);
            let x = centre(&g, &j);
            let (lo, hi) = brute_force(s, theta, &j);
            assert!((iota_lower_at(theta, s, &x).unwrap() - lo).abs() <= 1e-12);
            assert!((iota_upper_at(theta, s, &x).unwrap() - hi).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn brute_force_3x3_dense(counts in prop::collection::vec(0u64..4, 9), theta in prop::collection::vec(-2.0f64..2.0, 9)) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            check_brute_force(&stats(vec![3, 3], counts), &theta);
        }
    }
}
