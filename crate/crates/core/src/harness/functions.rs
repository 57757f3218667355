use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RegressionDataset;

/// The five benchmark surfaces, written for `d = 2` and extended to any `d`
/// through the coordinate sum `s = Σx_k` and product `p = ∏x_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    /// `s²`
    F1,
    /// `√s`
    F2,
    /// `p`
    F3,
    /// `eˢ`
    F4,
    /// `eᵖ`
    F5,
}

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [Self::F1, Self::F2, Self::F3, Self::F4, Self::F5];

    pub fn eval(self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().sum();
        let p: f64 = x.iter().product();
        match self {
            Self::F1 => s * s,
            Self::F2 => s.sqrt(),
            Self::F3 => p,
            Self::F4 => s.exp(),
            Self::F5 => p.exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::F4 => "f4",
            Self::F5 => "f5",
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown test function {s:?}; expected f1..f5")))
    }
}

/// `n` points with `X ~ U[0,1]^d` and `Y = f(X) + ε`, `ε ~ N(0, σ²)`.
pub fn generate_dataset<R: Rng + ?Sized>(
    function: TestFunction,
    n: usize,
    d: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<RegressionDataset> {
    if d == 0 {
        return Err(Error::config("dimension must be positive"));
    }
    let noise = Normal::new(0.0, sigma).map_err(|_| Error::config(format!("noise level {sigma} is invalid")))?;
    let mut data = RegressionDataset::empty(d)?;
    let mut x = vec![0.0; d];
    for _ in 0..n {
        x.iter_mut().for_each(|xk| *xk = rng.random::<f64>());
        let y = function.eval(&x) + noise.sample(rng);
        data.push(&x, y)?;
    }
    Ok(data)
}
