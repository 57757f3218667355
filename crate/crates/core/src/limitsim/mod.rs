//! Monte Carlo for the limiting law of the immersed posterior.
//!
//! `Z_B` is the conditional probability, given a first Gaussian field `H̃₁`,
//! that a functional of `Ũ = (H̃₁ + H̃₂)/∏(u_k+v_k) + drift` is nonpositive.
//! An outer loop draws `H̃₁`, an inner loop draws `H̃₂`, and the empirical
//! distribution of the inner fractions is tabulated as a [`ZbTable`].
//!
//! Only `d ∈ {1, 2}` is supported.

mod functional;
mod process;
mod zb;

pub use functional::{infsup, supinf, u_field, u_value, Extrema, UField};
pub use process::{simulate_h_1d, simulate_h_2d, ProcessField, ProcessField1D, ProcessField2D};
pub use zb::{zb_distribution, zb_sample, LimitSimulator, ZbSamples, TABLE_NODES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
#[cfg(doc)]
use crate::intervals::ZbTable;

/// Smoothness vector `β` and the drift `Σ_k (v_k^{β_k+1} − (−u_k)^{β_k+1})/(u_k+v_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftSpec {
    beta: Vec<u32>,
}

impl DriftSpec {
    pub fn new(beta: Vec<u32>) -> Result<Self> {
        if beta.is_empty() || beta.contains(&0) {
            return Err(Error::arg("smoothness entries must be positive integers"));
        }
        Ok(Self { beta })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[u32] {
        &self.beta
    }

    /// The axis-`k` drift term; `u + v` must be positive.
    pub fn term(&self, k: usize, u: f64, v: f64) -> f64 {
        let p = self.beta[k] as i32 + 1;
        (v.powi(p) - (-u).powi(p)) / (u + v)
    }

    pub fn value(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != self.dim() || v.len() != self.dim() {
            return Err(Error::arg("point dimension does not match the smoothness vector"));
        }
        let mut total = 0.0;
        for k in 0..self.dim() {
            if !(u[k] >= 0.0 && v[k] >= 0.0) || u[k] + v[k] == 0.0 {
                return Err(Error::arg(format!(
                    "drift is undefined at u = {}, v = {} on axis {k}",
                    u[k], v[k]
                )));
            }
            total += self.term(k, u[k], v[k]);
        }
        Ok(total)
    }
}

/// Lattice and horizons for the discretized fields.
///
/// Axis `k` carries points `i/m` for `i = 1..=⌈m·s_k⌉` on the u-side and
/// `i = 1..=⌈m·t_k⌉` on the v-side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    m: usize,
    u_horizon: Vec<f64>,
    v_horizon: Vec<f64>,
}

impl SimConfig {
    pub fn new(m: usize, u_horizon: Vec<f64>, v_horizon: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::arg("need at least one step per unit"));
        }
        if u_horizon.len() != v_horizon.len() {
            return Err(Error::arg("u and v horizons differ in dimension"));
        }
        if !(1..=2).contains(&u_horizon.len()) {
            return Err(Error::config(format!(
                "limit simulation supports d = 1 or 2, got d = {}",
                u_horizon.len()
            )));
        }
        if u_horizon.iter().chain(&v_horizon).any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::arg("horizons must be positive and finite"));
        }
        Ok(Self {
            m,
            u_horizon,
            v_horizon,
        })
    }

    /// `m = 50`, horizon 7 for `d = 1`; `m = 5`, horizons 5 for `d = 2`.
    pub fn standard(d: usize) -> Result<Self> {
        match d {
            1 => Self::new(50, vec![7.0], vec![7.0]),
            2 => Self::new(5, vec![5.0; 2], vec![5.0; 2]),
            _ => Err(Error::config(format!(
                "limit simulation supports d = 1 or 2, got d = {d}"
            ))),
        }
    }

    /// Same horizon `c` on every axis and side.
    pub fn square(d: usize, m: usize, c: f64) -> Result<Self> {
        Self::new(m, vec![c; d], vec![c; d])
    }

    pub fn dim(&self) -> usize {
        self.u_horizon.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn u_horizon(&self) -> &[f64] {
        &self.u_horizon
    }

    pub fn v_horizon(&self) -> &[f64] {
        &self.v_horizon
    }

    fn steps(&self, h: f64) -> usize {
        ((h * self.m as f64 - 1e-9).ceil() as usize).max(1)
    }

    pub fn u_steps(&self, k: usize) -> usize {
        self.steps(self.u_horizon[k])
    }

    pub fn v_steps(&self, k: usize) -> usize {
        self.steps(self.v_horizon[k])
    }

    pub(crate) fn steps_2d(&self) -> [usize; 4] {
        [self.u_steps(0), self.u_steps(1), self.v_steps(0), self.v_steps(1)]
    }

    /// Lattice coordinate of step `i` (zero-based), i.e. `(i+1)/m`.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.m as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_terms() {
        let d = DriftSpec::new(vec![1]).unwrap();
        assert_eq!(d.value(&[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(d.value(&[0.5], &[2.0]).unwrap(), 1.5);
        // β = 3: (v⁴ − u⁴)/(u+v) = (v − u)(v² + u²)
        let d3 = DriftSpec::new(vec![3]).unwrap();
        let (u, v) = (0.7, 1.9);
        assert!((d3.term(0, u, v) - (v - u) * (v * v + u * u)).abs() < 1e-12);
        // additive over axes
        let d2 = DriftSpec::new(vec![1, 3]).unwrap();
        let got = d2.value(&[0.5, u], &[2.0, v]).unwrap();
        assert!((got - 1.5 - (v - u) * (v * v + u * u)).abs() < 1e-12);
    }

    #[test]
    fn drift_rejects_origin() {
        let d = DriftSpec::new(vec![1, 1]).unwrap();
        assert!(d.value(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(d.value(&[1.0], &[1.0]).is_err());
        assert!(DriftSpec::new(vec![]).is_err());
        assert!(DriftSpec::new(vec![0]).is_err());
    }

    #[test]
    fn config_shapes() {
        let c = SimConfig::standard(1).unwrap();
        assert_eq!((c.u_steps(0), c.v_steps(0)), (350, 350));
        let c = SimConfig::standard(2).unwrap();
        assert_eq!(c.steps_2d(), [25; 4]);
        let c = SimConfig::new(4, vec![0.3], vec![1.0]).unwrap();
        assert_eq!((c.u_steps(0), c.v_steps(0)), (2, 4));
        assert_eq!(c.coordinate(0), 0.25);
        assert!(matches!(SimConfig::standard(3), Err(Error::Config(_))));
        assert!(SimConfig::new(0, vec![1.0], vec![1.0]).is_err());
        assert!(SimConfig::new(5, vec![1.0], vec![-1.0]).is_err());
    }
}
