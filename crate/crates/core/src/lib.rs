//! Numerical core for inferring time-varying potential landscapes from
//! discrete stance classifications.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! pipeline driver and the command line live in the `stancefield` crate.
//!
//! Data flows through the modules in this order:
//!
//! 1. [`ingest`]: observations, target filtering, time binning and the
//!    normalized time coordinate.
//! 2. [`regression`]: Bayesian kernel ridge regression per (person, target).
//! 3. [`latent`]: pivot, edge filling, probabilistic PCA with missing data,
//!    smoothing.
//! 4. [`stationarity`]: drift, ADF, KPSS and Fisher combination.
//! 5. [`landscape`]: the potential network, its training and analysis.
//! 6. [`evaluate`]: horizon evaluation against forecasting baselines.
//! 7. [`analytics`]: significance tests and descriptive statistics.
//!
//! [`synthetic`] generates Langevin trajectories from known potentials and
//! [`density`] holds the kernel density estimate used for figures.
#![no_std]
// `!(x > y)` is written on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytics;
pub mod density;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod landscape;
pub mod latent;
pub mod regression;
pub mod seed;
pub mod special;
pub mod stationarity;
pub mod synthetic;

pub use error::{Error, Result};
