use rayon::prelude::*;

use super::functional::{extrema, materialize, Combined, Extrema, KernelTables, UField};
use super::process::ProcessField;
use super::{DriftSpec, SimConfig};
use crate::error::{Error, Result};
use crate::immersion::ImmersionKind;
use crate::intervals::ZbTable;
use crate::rng::Substreams;

/// Steps on `[0, 1]` for tabulated distribution functions (`z` spacing 0.001).
pub const TABLE_NODES: usize = 1000;

/// A configured simulator: lattice, drift and precomputed kernel tables.
#[derive(Clone, Debug)]
pub struct LimitSimulator {
    config: SimConfig,
    drift: DriftSpec,
    tables: KernelTables,
}

impl LimitSimulator {
    pub fn new(config: SimConfig, drift: DriftSpec) -> Result<Self> {
        if config.dim() != drift.dim() {
            return Err(Error::config(format!(
                "smoothness vector has {} entries but the lattice has d = {}",
                drift.dim(),
                config.dim()
            )));
        }
        let d = config.dim();
        let nu: Vec<usize> = (0..d).map(|k| config.u_steps(k)).collect();
        let nv: Vec<usize> = (0..d).map(|k| config.v_steps(k)).collect();
        let tables = KernelTables::new(config.m(), &nu, &nv, &drift)?;
        Ok(Self { config, drift, tables })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn simulate<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> ProcessField {
        ProcessField::simulate(&self.config, rng)
    }

    pub fn u_field(&self, h1: &ProcessField, h2: &ProcessField) -> Result<UField> {
        Ok(materialize(&Combined::new(h1, h2, &self.tables)?, &self.tables))
    }

    /// Extrema of `scale · Ũ` without materializing the field.
    pub fn extrema(&self, h1: &ProcessField, h2: &ProcessField, scale: f64) -> Result<Extrema> {
        let c = Combined::new(h1, h2, &self.tables)?;
        Ok(extrema(&c, &self.tables, scale, &mut Vec::new()))
    }

    /// Fractions of `n_inner` realizations whose kind-1, 2 and 3 functionals
    /// of `scale · Ũ` are nonpositive. Inner draw `i` uses `inner.stream(&[i+1])`.
    pub fn fractions_scaled(
        &self,
        h1: &ProcessField,
        n_inner: usize,
        inner: &Substreams,
        scale: f64,
    ) -> Result<[f64; 3]> {
        if n_inner == 0 {
            return Err(Error::arg("need at least one inner realization"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::arg("scale must be positive and finite"));
        }
        let mut hits = [0usize; 3];
        let mut scratch = Vec::new();
        for i in 0..n_inner {
            let h2 = self.simulate(&mut inner.stream(&[i as u64 + 1]));
            let c = Combined::new(h1, &h2, &self.tables)?;
            let e = extrema(&c, &self.tables, scale, &mut scratch);
            for (h, hit) in hits.iter_mut().zip(e.nonpositive()) {
                *h += hit as usize;
            }
        }
        Ok(hits.map(|h| h as f64 / n_inner as f64))
    }

    pub fn fractions(&self, h1: &ProcessField, n_inner: usize, inner: &Substreams) -> Result<[f64; 3]> {
        self.fractions_scaled(h1, n_inner, inner, 1.0)
    }

    /// One draw of `Z_B` for each kind. Outer draw `o` takes `H̃₁` from
    /// `streams.stream(&[o, 0])` and its inner fields from `streams.child(o)`.
    pub fn outer_draw(&self, o: u64, n_inner: usize, streams: &Substreams) -> Result<[f64; 3]> {
        let h1 = self.simulate(&mut streams.stream(&[o, 0]));
        self.fractions(&h1, n_inner, &streams.child(o))
    }

    /// `n_outer` draws of `Z_B` for all kinds, in outer-index order.
    pub fn samples(&self, n_outer: usize, n_inner: usize, streams: &Substreams) -> Result<ZbSamples> {
        if n_outer == 0 {
            return Err(Error::arg("need at least one outer realization"));
        }
        let draws: Vec<[f64; 3]> = (0..n_outer as u64)
            .into_par_iter()
            .map(|o| self.outer_draw(o, n_inner, streams))
            .collect::<Result<_>>()?;
        let pick = |k: usize| draws.iter().map(|d| d[k]).collect();
        Ok(ZbSamples {
            beta: self.drift.beta().to_vec(),
            values: [pick(0), pick(1), pick(2)],
        })
    }
}

/// Draws of `Z_B^{(1)}`, `Z_B^{(2)}` and `Z_B^{(3)}` sharing the same fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ZbSamples {
    beta: Vec<u32>,
    values: [Vec<f64>; 3],
}

impl ZbSamples {
    pub fn get(&self, kind: ImmersionKind) -> &[f64] {
        &self.values[kind.index() as usize - 1]
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn table(&self, kind: ImmersionKind) -> Result<ZbTable> {
        ZbTable::from_samples(kind, self.beta.clone(), self.get(kind), TABLE_NODES)
    }

    pub fn tables(&self) -> Result<Vec<ZbTable>> {
        ImmersionKind::ALL.iter().map(|&k| self.table(k)).collect()
    }
}

/// Fraction of `n_inner` fresh `H̃₂` fields for which the kind's functional
/// of `Ũ` is nonpositive.
pub fn zb_sample(
    h1: &ProcessField,
    n_inner: usize,
    drift: &DriftSpec,
    kind: ImmersionKind,
    config: &SimConfig,
    inner: &Substreams,
) -> Result<f64> {
    let sim = LimitSimulator::new(config.clone(), drift.clone())?;
    Ok(sim.fractions(h1, n_inner, inner)?[kind.index() as usize - 1])
}

/// Empirical distribution of `Z_B^{(kind)}` on the 0.001 grid.
pub fn zb_distribution(
    n_outer: usize,
    n_inner: usize,
    config: &SimConfig,
    drift: &DriftSpec,
    kind: ImmersionKind,
    streams: &Substreams,
) -> Result<ZbTable> {
    let sim = LimitSimulator::new(config.clone(), drift.clone())?;
    sim.samples(n_outer, n_inner, streams)?.table(kind)
}
