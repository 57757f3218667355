//! Discretized Gaussian fields `H̃(u, v)` with covariance
//! `∏_k (u_k ∧ u'_k + v_k ∧ v'_k)`.
//!
//! In one dimension `H̃(u, v) ≈ m^{-1/2}(Σ_{j≤⌈mu⌉} ζ_j + Σ_{j≤⌈mv⌉} ζ'_j)`.
//! In two dimensions the four quadrants `(v₁,v₂)`, `(u₁,v₂)`, `(u₁,u₂)` and
//! `(v₁,u₂)` each get an independent matrix of standard normals, and
//! `H̃(u, v)` is `1/m` times the sum of the four rectangular partial sums.

use rand::Rng;
use rand_distr::StandardNormal;

use super::SimConfig;

/// Cumulative sums `[0, s_1, s_2, …]` of `n` scaled standard normals.
fn cumulative<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        acc += z;
        out.push(acc * scale);
    }
    out
}

/// Padded 2-d partial sums of an `rows × cols` normal matrix, stored
/// `(rows+1) × (cols+1)` so index `(i, j)` sums entries `< i`, `< j`.
fn partial_sums_2d<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Vec<f64> {
    let w = cols + 1;
    let mut raw = vec![0.0; (rows + 1) * w];
    for i in 1..=rows {
        for j in 1..=cols {
            raw[i * w + j] = rng.sample(StandardNormal);
        }
    }
    for i in 1..=rows {
        for j in 1..=cols {
            raw[i * w + j] += raw[(i - 1) * w + j] + raw[i * w + j - 1] - raw[(i - 1) * w + j - 1];
        }
    }
    raw.iter_mut().for_each(|v| *v *= scale);
    raw
}

/// `H̃` on `[0, c_u] × [0, c_v]` in one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessField1D {
    pub(crate) m: usize,
    /// `m^{-1/2} Σ_{j≤i} ζ_j`, indexed by `i = ⌈mu⌉`.
    pub(crate) u: Vec<f64>,
    /// `m^{-1/2} Σ_{j≤i} ζ'_j`, indexed by `i = ⌈mv⌉`.
    pub(crate) v: Vec<f64>,
}

impl ProcessField1D {
    pub fn simulate<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Self {
        let scale = 1.0 / (config.m as f64).sqrt();
        let u = cumulative(rng, config.u_steps(0), scale);
        let v = cumulative(rng, config.v_steps(0), scale);
        Self { m: config.m, u, v }
    }

    /// The identically zero field.
    pub fn zero(config: &SimConfig) -> Self {
        Self {
            m: config.m,
            u: vec![0.0; config.u_steps(0) + 1],
            v: vec![0.0; config.v_steps(0) + 1],
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            m: self.m,
            u: self.u.iter().map(|x| -x).collect(),
            v: self.v.iter().map(|x| -x).collect(),
        }
    }

    /// `H̃(u, v)`, with coordinates rounded up to the `1/m` lattice.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.u[lattice(self.m, u)] + self.v[lattice(self.m, v)]
    }
}

/// `H̃` in two dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessField2D {
    pub(crate) m: usize,
    /// Lattice steps per axis: `(u₁, u₂, v₁, v₂)`.
    pub(crate) steps: [usize; 4],
    /// Quadrant `(v₁, v₂)`, padded `(nv1+1) × (nv2+1)`.
    pub(crate) vv: Vec<f64>,
    /// Quadrant `(u₁, v₂)`, padded `(nu1+1) × (nv2+1)`.
    pub(crate) uv: Vec<f64>,
    /// Quadrant `(u₁, u₂)`, padded `(nu1+1) × (nu2+1)`.
    pub(crate) uu: Vec<f64>,
    /// Quadrant `(v₁, u₂)`, padded `(nv1+1) × (nu2+1)`.
    pub(crate) vu: Vec<f64>,
}

impl ProcessField2D {
    pub fn simulate<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Self {
        let s = 1.0 / config.m as f64;
        let [nu1, nu2, nv1, nv2] = config.steps_2d();
        let vv = partial_sums_2d(rng, nv1, nv2, s);
        let uv = partial_sums_2d(rng, nu1, nv2, s);
        let uu = partial_sums_2d(rng, nu1, nu2, s);
        let vu = partial_sums_2d(rng, nv1, nu2, s);
        Self {
            m: config.m,
            steps: [nu1, nu2, nv1, nv2],
            vv,
            uv,
            uu,
            vu,
        }
    }

    pub fn zero(config: &SimConfig) -> Self {
        let [nu1, nu2, nv1, nv2] = config.steps_2d();
        Self {
            m: config.m,
            steps: [nu1, nu2, nv1, nv2],
            vv: vec![0.0; (nv1 + 1) * (nv2 + 1)],
            uv: vec![0.0; (nu1 + 1) * (nv2 + 1)],
            uu: vec![0.0; (nu1 + 1) * (nu2 + 1)],
            vu: vec![0.0; (nv1 + 1) * (nu2 + 1)],
        }
    }

    pub fn negated(&self) -> Self {
        let neg = |v: &Vec<f64>| v.iter().map(|x| -x).collect();
        Self {
            m: self.m,
            steps: self.steps,
            vv: neg(&self.vv),
            uv: neg(&self.uv),
            uu: neg(&self.uu),
            vu: neg(&self.vu),
        }
    }

    /// The four quadrant partial sums at `(u, v)`, in the order
    /// `(v₁,v₂)`, `(u₁,v₂)`, `(u₁,u₂)`, `(v₁,u₂)`.
    pub fn quadrants(&self, u: [f64; 2], v: [f64; 2]) -> [f64; 4] {
        let [_, nu2, _, nv2] = self.steps;
        let (u1, u2) = (lattice(self.m, u[0]), lattice(self.m, u[1]));
        let (v1, v2) = (lattice(self.m, v[0]), lattice(self.m, v[1]));
        [
            self.vv[v1 * (nv2 + 1) + v2],
            self.uv[u1 * (nv2 + 1) + v2],
            self.uu[u1 * (nu2 + 1) + u2],
            self.vu[v1 * (nu2 + 1) + u2],
        ]
    }

    pub fn eval(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        self.quadrants(u, v).iter().sum()
    }
}

/// `⌈m x⌉`, robust to `x` being a lattice point up to rounding.
fn lattice(m: usize, x: f64) -> usize {
    let t = x * m as f64;
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as usize
    } else {
        t.ceil() as usize
    }
}

/// A discretized `H̃` of either supported dimension.
#[derive(Clone, Debug, PartialEq)]
pub enum ProcessField {
    D1(ProcessField1D),
    D2(ProcessField2D),
}

impl ProcessField {
    pub fn simulate<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Self {
        match config.dim() {
            1 => Self::D1(ProcessField1D::simulate(config, rng)),
            _ => Self::D2(ProcessField2D::simulate(config, rng)),
        }
    }

    pub fn zero(config: &SimConfig) -> Self {
        match config.dim() {
            1 => Self::D1(ProcessField1D::zero(config)),
            _ => Self::D2(ProcessField2D::zero(config)),
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            Self::D1(f) => Self::D1(f.negated()),
            Self::D2(f) => Self::D2(f.negated()),
        }
    }

    /// `H̃(u, v)` at lattice-rounded coordinates.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Self::D1(f) => f.eval(u[0], v[0]),
            Self::D2(f) => f.eval([u[0], u[1]], [v[0], v[1]]),
        }
    }
}

/// `H̃(u, v)` for `d = 1`, simulated on `[0, c]²` at `m` steps per unit.
pub fn simulate_h_1d<R: Rng + ?Sized>(m: usize, c: f64, rng: &mut R) -> crate::Result<ProcessField1D> {
    let config = SimConfig::new(m, vec![c], vec![c])?;
    Ok(ProcessField1D::simulate(&config, rng))
}

/// `H̃(u, v)` for `d = 2` with u-horizons `(s₁, s₂)` and v-horizons `(t₁, t₂)`.
pub fn simulate_h_2d<R: Rng + ?Sized>(
    m: usize,
    u_horizon: [f64; 2],
    v_horizon: [f64; 2],
    rng: &mut R,
) -> crate::Result<ProcessField2D> {
    let config = SimConfig::new(m, u_horizon.to_vec(), v_horizon.to_vec())?;
    Ok(ProcessField2D::simulate(&config, rng))
}
