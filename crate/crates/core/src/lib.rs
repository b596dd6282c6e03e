//! Estimating the number of signals (principal components above a noise
//! floor) in a spiked covariance model.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectra`]: sample covariance and the descending eigenvalue spectrum.
//! * [`model`]: spiked population models, SNR schedules and seeded sampling.
//! * [`criteria`]: penalized-likelihood selection rules (MIL, BIC, AIC-type,
//!   GAIC-type, BFC) and the sequential Tracy–Widom test (KN).
//! * [`theory`]: closed-form limits, thresholds and consistency conditions.
//! * [`montecarlo`]: replicate experiments and the built-in simulation grids.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the simulation harness uses.

// `!(x > 0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod scalar;
pub mod spectra;
pub mod theory;

pub use criteria::{CandidateRange, EstimatorSpec, KnNoise, Mode};
pub use error::{Error, Result};
pub use model::SnrSchedule;
pub use montecarlo::{ExperimentConfig, ExperimentReport, NamedTable};
pub use scalar::Real;
pub use theory::ConsistencyReport;

pub type ObservationSet = spectra::ObservationSet<f64>;
pub type CovarianceMatrix = spectra::CovarianceMatrix<f64>;
pub type EigenSpectrum = spectra::EigenSpectrum<f64>;
pub type SpikedModel = model::SpikedModel<f64>;
pub type CriterionCurve = criteria::CriterionCurve<f64>;
pub type KEstimate = criteria::KEstimate<f64>;
