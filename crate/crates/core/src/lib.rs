//! Bayesian inference for coordinatewise monotone regression on `[0,1]^d`.
//!
//! Responses are binned on a rectangular grid, each cell height gets a
//! conjugate Gaussian posterior, and posterior draws are mapped into the
//! monotone cone with block max-min / min-max maps. Pointwise credible
//! intervals come from the mapped draws; their limiting coverage is
//! tabulated by [`limitsim`] and used to recalibrate the credibility.
//!
//! ```
//! use isobayes::prelude::*;
//!
//! let data = RegressionDataset::new(1, [([0.1], 0.0), ([0.4], 2.0), ([0.6], 1.0), ([0.9], 3.0)])?;
//! let grid = GridSpec::uniform(1, 4)?;
//! let stats = compute_bin_stats(&data, &grid)?;
//! assert_eq!(stats.counts(), &[1, 1, 1, 1]);
//! # Ok::<(), isobayes::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dhz;
pub mod error;
pub mod grid;
pub mod harness;
pub mod immersion;
pub mod intervals;
pub mod limitsim;
pub mod posterior;
pub mod rng;

pub use error::{Error, Result};

/// The types and functions most programs need.
pub mod prelude {
    pub use crate::dhz::{dhz_estimate, dhz_interval, DhzEstimate, DhzInterval};
    pub use crate::error::{Error, Result};
    pub use crate::grid::{bin_index, block_mean, compute_bin_stats, BinStats, GridSpec, RegressionDataset};
    pub use crate::immersion::{iota_at, isotonize_surface, ImmersionKind, StepFunction};
    pub use crate::intervals::{
        builtin_table, coverage_of_level, credible_interval, immersion_draws_at, recalibrate_level, CredibleInterval,
        ImmersionDraws, Sided, ZbTable,
    };
    pub use crate::posterior::{posterior_params, sample_theta, sigma2_mmle, PriorSpec, Sigma2Source, VarianceMode};
    pub use crate::rng::Substreams;
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/posterior.md")]
    mod posterior {}
    #[doc = include_str!("../../../book/src/immersion.md")]
    mod immersion {}
    #[doc = include_str!("../../../book/src/intervals.md")]
    mod intervals {}
    #[doc = include_str!("../../../book/src/limitsim.md")]
    mod limitsim {}
    #[doc = include_str!("../../../book/src/coverage.md")]
    mod coverage {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
