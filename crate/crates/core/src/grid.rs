//! Hyperrectangular partitions of the unit cube and per-cell statistics.
//!
//! Cell indices are zero-based: axis `k` has cells `0..J_k`, and cell `j`
//! covers `(j/J_k, (j+1)/J_k]` except cell `0`, which is closed at `0`.
//! A point with `x_k = 1` lands in the last cell.

use std::ops::{Add, Sub};

use crate::error::{Error, Result};

/// The partition `[1:J]` of `[0,1]^d` into `J_1 × … × J_d` cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    cells: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl GridSpec {
    pub fn new(cells: Vec<usize>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::arg("grid needs at least one axis"));
        }
        if let Some(k) = cells.iter().position(|&j| j == 0) {
            return Err(Error::arg(format!("axis {k} has zero cells")));
        }
        let len = cells
            .iter()
            .try_fold(1usize, |acc, &j| acc.checked_mul(j))
            .ok_or_else(|| Error::arg("total cell count overflows the index type"))?;
        let mut strides = vec![1; cells.len()];
        for k in (0..cells.len() - 1).rev() {
            strides[k] = strides[k + 1] * cells[k + 1];
        }
        Ok(Self { cells, strides, len })
    }

    /// `d` axes with `j` cells each.
    pub fn uniform(d: usize, j: usize) -> Result<Self> {
        Self::new(vec![j; d])
    }

    /// `J = ⌈n^{1/3} ln(ln n)⌉` cells per axis, the rule used for the
    /// coverage experiments.
    pub fn cube_root_loglog(n: usize, d: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::arg("the cube-root rule needs n >= 3"));
        }
        let n = n as f64;
        let j = (n.cbrt() * n.ln().ln()).ceil().max(1.0) as usize;
        Self::uniform(d, j)
    }

    /// `J = ⌈n^{1/4} log₁₀ n⌉` cells per axis, the rule of the posterior
    /// density demonstration.
    pub fn quarter_root_log10(n: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg("the quarter-root rule needs n >= 2"));
        }
        let n = n as f64;
        let j = (n.powf(0.25) * n.log10()).ceil().max(1.0) as usize;
        Self::uniform(d, j)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    /// Cells per axis.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Row-major linear position of a multi-index (last axis fastest).
    pub fn linear(&self, j: &[usize]) -> usize {
        debug_assert_eq!(j.len(), self.dim());
        j.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn unravel(&self, mut lin: usize) -> Vec<usize> {
        let mut j = vec![0; self.dim()];
        for (k, s) in self.strides.iter().enumerate() {
            j[k] = lin / s;
            lin %= s;
        }
        j
    }

    /// Whether `j` is a valid cell index.
    pub fn contains_index(&self, j: &[usize]) -> bool {
        j.len() == self.dim() && j.iter().zip(&self.cells).all(|(a, n)| a < n)
    }

    /// Whether `x` lies in cell `j` under the half-open convention.
    pub fn cell_contains(&self, j: &[usize], x: &[f64]) -> bool {
        j.iter()
            .zip(x)
            .zip(&self.cells)
            .all(|((&jk, &xk), &nk)| axis_cell_contains(jk, nk, xk))
    }

    /// All multi-indices `j` with `lo ⪯ j ⪯ hi`, in row-major order.
    pub fn block_indices<'a>(&self, lo: &'a [usize], hi: &'a [usize]) -> BlockIter<'a> {
        BlockIter::new(lo, hi)
    }

    /// Checks that `m` is a multi-index of this grid.
    pub(crate) fn check_index(&self, j: &[usize]) -> Result<()> {
        if self.contains_index(j) {
            Ok(())
        } else {
            Err(Error::arg(format!("index {j:?} is outside the grid {:?}", self.cells)))
        }
    }
}

fn axis_cell_contains(j: usize, n: usize, x: f64) -> bool {
    let lo = j as f64 / n as f64;
    let hi = (j + 1) as f64 / n as f64;
    if j == 0 {
        (0.0..=hi).contains(&x)
    } else {
        lo < x && x <= hi
    }
}

/// Row-major iterator over the multi-indices of a block `[lo:hi]`.
#[derive(Debug, Clone)]
pub struct BlockIter<'a> {
    lo: &'a [usize],
    hi: &'a [usize],
    next: Option<Vec<usize>>,
}

impl<'a> BlockIter<'a> {
    fn new(lo: &'a [usize], hi: &'a [usize]) -> Self {
        let nonempty = lo.len() == hi.len() && lo.iter().zip(hi).all(|(a, b)| a <= b);
        Self {
            lo,
            hi,
            next: nonempty.then(|| lo.to_vec()),
        }
    }
}

impl Iterator for BlockIter<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for k in (0..succ.len()).rev() {
            if succ[k] < self.hi[k] {
                succ[k] += 1;
                self.next = Some(succ);
                return Some(current);
            }
            succ[k] = self.lo[k];
        }
        Some(current)
    }
}

/// The observations `(X_i, Y_i)`, with every `X_i` in `[0,1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl RegressionDataset {
    /// An empty dataset in dimension `dim`.
    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dimension must be at least 1"));
        }
        Ok(Self {
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
        })
    }

    pub fn new<I, X>(dim: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (X, f64)>,
        X: AsRef<[f64]>,
    {
        let mut data = Self::empty(dim)?;
        for (x, y) in points {
            data.push(x.as_ref(), y)?;
        }
        Ok(data)
    }

    /// Appends one observation, validating its coordinates.
    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::arg(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.dim
            )));
        }
        check_unit(x)?;
        if !y.is_finite() {
            return Err(Error::arg(format!("response {y} is not finite")));
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        self.xs.chunks_exact(self.dim).zip(self.ys.iter().copied())
    }
}

fn check_unit(x: &[f64]) -> Result<()> {
    for (axis, &value) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain { axis, value });
        }
    }
    Ok(())
}

/// The cell `j₀(x) = max(1, ⌈x ∘ J⌉)` containing `x`, zero-based.
pub fn bin_index(x: &[f64], grid: &GridSpec) -> Result<Vec<usize>> {
    if x.len() != grid.dim() {
        return Err(Error::arg(format!(
            "point has {} coordinates, grid has {} axes",
            x.len(),
            grid.dim()
        )));
    }
    check_unit(x)?;
    Ok(x.iter().zip(grid.cells()).map(|(&xk, &nk)| axis_bin(xk, nk)).collect())
}

fn axis_bin(x: f64, n: usize) -> usize {
    let mut j = ((x * n as f64).ceil() as usize).clamp(1, n);
    // x * n rounds; settle on the cell whose bounds contain x as divided out.
    while j > 1 && x <= (j - 1) as f64 / n as f64 {
        j -= 1;
    }
    while j < n && x > j as f64 / n as f64 {
        j += 1;
    }
    j - 1
}

/// Inclusive `d`-dimensional prefix sums supporting O(2^d) block queries.
///
/// The table is padded with a leading zero slab on every axis, so entry
/// `p` holds the sum over cells `j` with `j_k < p_k` for all `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixTable<T> {
    padded: Vec<usize>,
    strides: Vec<usize>,
    table: Vec<T>,
}

impl<T> PrefixTable<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    /// Builds the table for `values` laid out row-major on `grid`.
    pub fn new(grid: &GridSpec, values: &[T]) -> Self {
        assert_eq!(values.len(), grid.len(), "values must cover the grid");
        let padded: Vec<usize> = grid.cells().iter().map(|n| n + 1).collect();
        let d = padded.len();
        let mut strides = vec![1; d];
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * padded[k + 1];
        }
        let total = padded[0] * strides[0];
        let mut table = vec![T::default(); total];
        for (lin, &v) in values.iter().enumerate() {
            let j = grid.unravel(lin);
            let p: usize = j.iter().zip(&strides).map(|(a, s)| (a + 1) * s).sum();
            table[p] = v;
        }
        // One cumulative pass per axis.
        for k in 0..d {
            let s = strides[k];
            for p in 0..total {
                if !(p / s).is_multiple_of(padded[k]) {
                    table[p] = table[p] + table[p - s];
                }
            }
        }
        Self { padded, strides, table }
    }

    /// Sum over the block `lo ⪯ j ⪯ hi` (inclusive, zero-based).
    ///
    /// The caller guarantees `lo ⪯ hi` and that both are inside the grid.
    pub fn block_sum(&self, lo: &[usize], hi: &[usize]) -> T {
        let d = self.padded.len();
        let mut base = 0;
        let mut delta = [0usize; 16];
        debug_assert!(d <= delta.len());
        for k in 0..d {
            base += lo[k] * self.strides[k];
            delta[k] = (hi[k] + 1 - lo[k]) * self.strides[k];
        }
        let mut pos = T::default();
        let mut neg = T::default();
        for mask in 0..(1usize << d) {
            let mut off = base;
            let mut lows = 0;
            for (k, dk) in delta.iter().enumerate().take(d) {
                if mask >> k & 1 == 1 {
                    lows += 1;
                } else {
                    off += dk;
                }
            }
            if lows % 2 == 0 {
                pos = pos + self.table[off];
            } else {
                neg = neg + self.table[off];
            }
        }
        pos - neg
    }

    /// Sum over the whole grid.
    pub fn total(&self) -> T {
        *self.table.last().expect("table is never empty")
    }
}

/// Per-cell counts `N_j` and response sums, with prefix tables.
#[derive(Clone, Debug)]
pub struct BinStats {
    grid: GridSpec,
    counts: Vec<u64>,
    sums: Vec<f64>,
    prefix_counts: PrefixTable<u64>,
    prefix_sums: PrefixTable<f64>,
}

impl BinStats {
    /// Builds statistics directly from per-cell counts and sums.
    pub fn from_cells(grid: &GridSpec, counts: Vec<u64>, sums: Vec<f64>) -> Result<Self> {
        if counts.len() != grid.len() || sums.len() != grid.len() {
            return Err(Error::arg(format!(
                "expected {} cells, got {} counts and {} sums",
                grid.len(),
                counts.len(),
                sums.len()
            )));
        }
        if counts.iter().zip(&sums).any(|(&c, &s)| c == 0 && s != 0.0) {
            return Err(Error::arg("an empty cell has a nonzero response sum"));
        }
        let prefix_counts = PrefixTable::new(grid, &counts);
        let prefix_sums = PrefixTable::new(grid, &sums);
        Ok(Self {
            grid: grid.clone(),
            counts,
            sums,
            prefix_counts,
            prefix_sums,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Total number of observations `n`.
    pub fn n(&self) -> u64 {
        self.prefix_counts.total()
    }

    /// `Ȳ_j`, defined only for occupied cells.
    pub fn mean(&self, lin: usize) -> Option<f64> {
        (self.counts[lin] > 0).then(|| self.sums[lin] / self.counts[lin] as f64)
    }

    pub fn prefix_counts(&self) -> &PrefixTable<u64> {
        &self.prefix_counts
    }

    pub fn prefix_sums(&self) -> &PrefixTable<f64> {
        &self.prefix_sums
    }

    /// `N_{[lo:hi]}`.
    pub fn block_count(&self, lo: &[usize], hi: &[usize]) -> Result<u64> {
        check_block(&self.grid, lo, hi)?;
        Ok(self.prefix_counts.block_sum(lo, hi))
    }
}

/// Aggregates a dataset onto `grid`.
pub fn compute_bin_stats(data: &RegressionDataset, grid: &GridSpec) -> Result<BinStats> {
    if data.dim() != grid.dim() {
        return Err(Error::arg(format!(
            "dataset has dimension {}, grid has {}",
            data.dim(),
            grid.dim()
        )));
    }
    let mut counts = vec![0u64; grid.len()];
    let mut sums = vec![0.0; grid.len()];
    for (x, y) in data.iter() {
        let lin = grid.linear(&bin_index(x, grid)?);
        counts[lin] += 1;
        sums[lin] += y;
    }
    BinStats::from_cells(grid, counts, sums)
}

pub(crate) fn check_block(grid: &GridSpec, lo: &[usize], hi: &[usize]) -> Result<()> {
    grid.check_index(lo)?;
    grid.check_index(hi)?;
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Err(Error::arg(format!("block corners {lo:?} ⋠ {hi:?}")));
    }
    Ok(())
}

/// Count-weighted block means of one step function `θ`.
///
/// Holds the prefix table of `N_j θ_j`; rebuilt once per posterior draw.
#[derive(Clone, Debug)]
pub struct WeightedBlocks<'a> {
    stats: &'a BinStats,
    weighted: PrefixTable<f64>,
}

impl<'a> WeightedBlocks<'a> {
    pub fn new(stats: &'a BinStats, theta: &[f64]) -> Result<Self> {
        if theta.len() != stats.grid.len() {
            return Err(Error::arg(format!(
                "theta has {} entries, grid has {} cells",
                theta.len(),
                stats.grid.len()
            )));
        }
        let products: Vec<f64> = stats
            .counts
            .iter()
            .zip(theta)
            .map(|(&n, &t)| if n == 0 { 0.0 } else { n as f64 * t })
            .collect();
        Ok(Self {
            stats,
            weighted: PrefixTable::new(&stats.grid, &products),
        })
    }

    pub fn stats(&self) -> &BinStats {
        self.stats
    }

    /// `Σ_{[lo:hi]} N_j θ_j / N_{[lo:hi]}`, or `None` for an empty block.
    /// Corners are not validated.
    #[inline]
    pub fn mean_unchecked(&self, lo: &[usize], hi: &[usize]) -> Option<f64> {
        let n = self.stats.prefix_counts.block_sum(lo, hi);
        (n > 0).then(|| self.weighted.block_sum(lo, hi) / n as f64)
    }

    pub fn mean(&self, lo: &[usize], hi: &[usize]) -> Result<Option<f64>> {
        check_block(&self.stats.grid, lo, hi)?;
        Ok(self.mean_unchecked(lo, hi))
    }
}

/// The count-weighted mean of `theta` over the block `[j1:j2]`; `None` when
/// the block holds no observations.
pub fn block_mean(stats: &BinStats, j1: &[usize], j2: &[usize], theta: &[f64]) -> Result<Option<f64>> {
    check_block(&stats.grid, j1, j2)?;
    Ok(WeightedBlocks::new(stats, theta)?.mean_unchecked(j1, j2))
}
