//! Statistical recalibration of ensemble forecasts with parameter
//! uncertainty, and the scores used to verify them.
//!
//! * [`mos`]: linear regression recalibration with plug-in Normal and
//!   Student-t predictive distributions.
//! * [`ngr`]: non-homogeneous Gaussian regression fitted by maximum
//!   likelihood.
//! * [`bootstrap`]: predictive bootstrap turning NGR parameter uncertainty
//!   into a Normal mixture forecast.
//! * [`verification`]: Ignorance, CRPS, CRPSS, PIT and interval coverage.
//! * [`harness`]: synthetic data, detrending and cross-validation.
//! * [`cli`]: dataset files and the `recal` command line.

pub mod bootstrap;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod mos;
pub mod ngr;
pub mod quadrature;
pub mod rng;
pub mod simplex;
pub mod special;
pub mod training;
pub mod verification;

pub use distributions::{MixtureComponent, Normal, NormalMixture, PredictiveDist, StudentT};
pub use error::{Error, Result};
pub use training::{Record, TrainingSet};
