//! The field `Ũ` on the lattice and its sup-inf / inf-sup functionals.

use super::process::{ProcessField, ProcessField1D, ProcessField2D};
use super::DriftSpec;
use crate::error::{Error, Result};

/// `Ũ` at a single point given the field value `h = H̃₁ + H̃₂` there.
pub fn u_value(h: f64, u: &[f64], v: &[f64], drift: &DriftSpec) -> Result<f64> {
    let d = drift.value(u, v)?;
    let denom: f64 = u.iter().zip(v).map(|(a, b)| a + b).product();
    Ok(h / denom + d)
}

/// Per-axis `1/(u+v)` and drift on the `nu × nv` lattice.
#[derive(Clone, Debug)]
pub(crate) struct AxisTable {
    nu: usize,
    nv: usize,
    inv: Vec<f64>,
    drift: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct KernelTables {
    axes: Vec<AxisTable>,
}

impl KernelTables {
    pub(crate) fn new(m: usize, nu: &[usize], nv: &[usize], drift: &DriftSpec) -> Result<Self> {
        if nu.len() != drift.dim() || nv.len() != drift.dim() {
            return Err(Error::arg("field dimension does not match the smoothness vector"));
        }
        let m = m as f64;
        let axes = (0..drift.dim())
            .map(|k| {
                let mut inv = Vec::with_capacity(nu[k] * nv[k]);
                let mut dr = Vec::with_capacity(nu[k] * nv[k]);
                for i in 0..nu[k] {
                    let u = (i + 1) as f64 / m;
                    for j in 0..nv[k] {
                        let v = (j + 1) as f64 / m;
                        inv.push(1.0 / (u + v));
                        dr.push(drift.term(k, u, v));
                    }
                }
                AxisTable {
                    nu: nu[k],
                    nv: nv[k],
                    inv,
                    drift: dr,
                }
            })
            .collect();
        Ok(Self { axes })
    }

    fn shape(&self) -> (Vec<usize>, Vec<usize>) {
        (
            self.axes.iter().map(|a| a.nu).collect(),
            self.axes.iter().map(|a| a.nv).collect(),
        )
    }
}

/// `H̃₁ + H̃₂` restricted to the lattice without the zero index.
pub(crate) enum Combined {
    D1 {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    D2 {
        vv: Vec<f64>,
        uv: Vec<f64>,
        uu: Vec<f64>,
        vu: Vec<f64>,
    },
}

fn drop_zero_2d(t: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let w = cols + 1;
    let mut out = Vec::with_capacity(rows * cols);
    for i in 1..=rows {
        out.extend_from_slice(&t[i * w + 1..i * w + w]);
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl Combined {
    pub(crate) fn new(h1: &ProcessField, h2: &ProcessField, tables: &KernelTables) -> Result<Self> {
        let (nu, nv) = tables.shape();
        match (h1, h2) {
            (ProcessField::D1(f), ProcessField::D1(g)) => {
                check_1d(f, &nu, &nv)?;
                check_1d(g, &nu, &nv)?;
                Ok(Self::D1 {
                    a: add(&f.u[1..], &g.u[1..]),
                    b: add(&f.v[1..], &g.v[1..]),
                })
            }
            (ProcessField::D2(f), ProcessField::D2(g)) => {
                let want = [nu[0], nu[1], nv[0], nv[1]];
                if f.steps != want || g.steps != want {
                    return Err(Error::arg("fields do not share the simulation lattice"));
                }
                let [nu1, nu2, nv1, nv2] = want;
                let both = |x: fn(&ProcessField2D) -> &Vec<f64>, r, c| {
                    add(&drop_zero_2d(x(f), r, c), &drop_zero_2d(x(g), r, c))
                };
                Ok(Self::D2 {
                    vv: both(|p| &p.vv, nv1, nv2),
                    uv: both(|p| &p.uv, nu1, nv2),
                    uu: both(|p| &p.uu, nu1, nu2),
                    vu: both(|p| &p.vu, nv1, nu2),
                })
            }
            _ => Err(Error::arg("fields differ in dimension")),
        }
    }
}

fn check_1d(f: &ProcessField1D, nu: &[usize], nv: &[usize]) -> Result<()> {
    if nu.len() != 1 || f.u.len() != nu[0] + 1 || f.v.len() != nv[0] + 1 {
        return Err(Error::arg("fields do not share the simulation lattice"));
    }
    Ok(())
}

#[inline(always)]
fn cell_1d(a: f64, b: f64, inv: f64, drift: f64) -> f64 {
    (a + b) * inv + drift
}

#[inline(always)]
fn cell_2d(q12: f64, q34: f64, inv1: f64, inv2: f64, d1: f64, d2: f64) -> f64 {
    (q12 + q34) * (inv1 * inv2) + (d1 + d2)
}

/// `sup_u inf_v` and `inf_v sup_u` of one realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrema {
    pub supinf: f64,
    pub infsup: f64,
}

impl Extrema {
    /// Whether the kind-`k` functional is nonpositive, for `k = 1, 2, 3`.
    pub fn nonpositive(&self) -> [bool; 3] {
        [
            self.supinf <= 0.0,
            self.infsup <= 0.0,
            0.5 * (self.supinf + self.infsup) <= 0.0,
        ]
    }
}

/// Row minima and column maxima of `scale · Ũ` in one sweep.
///
/// `colmax` is scratch of length `∏ nv_k`.
pub(crate) fn extrema(c: &Combined, t: &KernelTables, scale: f64, colmax: &mut Vec<f64>) -> Extrema {
    let mut supinf = f64::NEG_INFINITY;
    match c {
        Combined::D1 { a, b } => {
            let ax = &t.axes[0];
            let nv = ax.nv;
            colmax.clear();
            colmax.resize(nv, f64::NEG_INFINITY);
            for (iu, &ai) in a.iter().enumerate() {
                let inv = &ax.inv[iu * nv..(iu + 1) * nv];
                let dr = &ax.drift[iu * nv..(iu + 1) * nv];
                let rowmin = sweep_row(colmax, |iv| scale * cell_1d(ai, b[iv], inv[iv], dr[iv]));
                supinf = supinf.max(rowmin);
            }
        }
        Combined::D2 { vv, uv, uu, vu } => {
            let (a1, a2) = (&t.axes[0], &t.axes[1]);
            let (nu2, nv1, nv2) = (a2.nu, a1.nv, a2.nv);
            colmax.clear();
            colmax.resize(nv1 * nv2, f64::NEG_INFINITY);
            for iu1 in 0..a1.nu {
                let q2 = &uv[iu1 * nv2..(iu1 + 1) * nv2];
                for iu2 in 0..nu2 {
                    let q3 = uu[iu1 * nu2 + iu2];
                    let inv2 = &a2.inv[iu2 * nv2..(iu2 + 1) * nv2];
                    let d2 = &a2.drift[iu2 * nv2..(iu2 + 1) * nv2];
                    let mut rowmin = f64::INFINITY;
                    for iv1 in 0..nv1 {
                        let q34 = q3 + vu[iv1 * nu2 + iu2];
                        let inv1 = a1.inv[iu1 * nv1 + iv1];
                        let d1 = a1.drift[iu1 * nv1 + iv1];
                        let q1 = &vv[iv1 * nv2..(iv1 + 1) * nv2];
                        let cm = &mut colmax[iv1 * nv2..(iv1 + 1) * nv2];
                        let m = sweep_row(cm, |iv2| {
                            scale * cell_2d(q1[iv2] + q2[iv2], q34, inv1, inv2[iv2], d1, d2[iv2])
                        });
                        rowmin = rowmin.min(m);
                    }
                    supinf = supinf.max(rowmin);
                }
            }
        }
    }
    let infsup = colmax.iter().copied().fold(f64::INFINITY, f64::min);
    Extrema { supinf, infsup }
}

/// Folds `f(i)` into `colmax[i]` and returns `min_i f(i)`.
#[inline(always)]
fn sweep_row(colmax: &mut [f64], f: impl Fn(usize) -> f64) -> f64 {
    const LANES: usize = 8;
    let n = colmax.len();
    let mut acc = [f64::INFINITY; LANES];
    let body = n - n % LANES;
    for base in (0..body).step_by(LANES) {
        for l in 0..LANES {
            let x = f(base + l);
            acc[l] = if x < acc[l] { x } else { acc[l] };
            let c = &mut colmax[base + l];
            *c = if x > *c { x } else { *c };
        }
    }
    let mut rowmin = acc.iter().copied().fold(f64::INFINITY, f64::min);
    for (i, c) in colmax.iter_mut().enumerate().take(n).skip(body) {
        let x = f(i);
        rowmin = rowmin.min(x);
        *c = c.max(x);
    }
    rowmin
}

/// `Ũ` materialized on the lattice: rows index `u`, columns index `v`, both
/// flattened row-major over axes.
#[derive(Clone, Debug, PartialEq)]
pub struct UField {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl UField {
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::arg("field shape does not match its values"));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

pub(crate) fn materialize(c: &Combined, t: &KernelTables) -> UField {
    match c {
        Combined::D1 { a, b } => {
            let ax = &t.axes[0];
            let mut values = Vec::with_capacity(ax.nu * ax.nv);
            for (iu, &ai) in a.iter().enumerate() {
                for (iv, &bi) in b.iter().enumerate() {
                    let k = iu * ax.nv + iv;
                    values.push(cell_1d(ai, bi, ax.inv[k], ax.drift[k]));
                }
            }
            UField {
                rows: ax.nu,
                cols: ax.nv,
                values,
            }
        }
        Combined::D2 { vv, uv, uu, vu } => {
            let (a1, a2) = (&t.axes[0], &t.axes[1]);
            let (nu1, nu2, nv1, nv2) = (a1.nu, a2.nu, a1.nv, a2.nv);
            let mut values = Vec::with_capacity(nu1 * nu2 * nv1 * nv2);
            for iu1 in 0..nu1 {
                for iu2 in 0..nu2 {
                    for iv1 in 0..nv1 {
                        let q34 = uu[iu1 * nu2 + iu2] + vu[iv1 * nu2 + iu2];
                        for iv2 in 0..nv2 {
                            let q12 = vv[iv1 * nv2 + iv2] + uv[iu1 * nv2 + iv2];
                            values.push(cell_2d(
                                q12,
                                q34,
                                a1.inv[iu1 * nv1 + iv1],
                                a2.inv[iu2 * nv2 + iv2],
                                a1.drift[iu1 * nv1 + iv1],
                                a2.drift[iu2 * nv2 + iv2],
                            ));
                        }
                    }
                }
            }
            UField {
                rows: nu1 * nu2,
                cols: nv1 * nv2,
                values,
            }
        }
    }
}

fn field_shape(h: &ProcessField) -> (usize, Vec<usize>, Vec<usize>) {
    match h {
        ProcessField::D1(f) => (f.m, vec![f.u.len() - 1], vec![f.v.len() - 1]),
        ProcessField::D2(f) => (f.m, f.steps[..2].to_vec(), f.steps[2..].to_vec()),
    }
}

/// `Ũ` on the lattice of `h1`, which `h2` must share.
pub fn u_field(h1: &ProcessField, h2: &ProcessField, drift: &DriftSpec) -> Result<UField> {
    let (m, nu, nv) = field_shape(h1);
    if field_shape(h2) != (m, nu.clone(), nv.clone()) {
        return Err(Error::arg("fields do not share the simulation lattice"));
    }
    let tables = KernelTables::new(m, &nu, &nv, drift)?;
    Ok(materialize(&Combined::new(h1, h2, &tables)?, &tables))
}

/// `max_row min_col`.
pub fn supinf(field: &UField) -> f64 {
    field
        .values
        .chunks_exact(field.cols)
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `min_col max_row`.
pub fn infsup(field: &UField) -> f64 {
    let mut colmax = vec![f64::NEG_INFINITY; field.cols];
    for row in field.values.chunks_exact(field.cols) {
        for (c, &x) in colmax.iter_mut().zip(row) {
            *c = c.max(x);
        }
    }
    colmax.into_iter().fold(f64::INFINITY, f64::min)
}
