//! Network sampling laboratory for respondent-driven sampling (RDS).
//!
//! The crate simulates random-walk and branching RDS samples on graphs,
//! computes the exact spectral sampling variance of a random walk, and
//! implements the RDS variance estimators (VHE, SBE) together with the
//! branching-distance and higher-order-Markov corrections. A regression
//! test of the first-order Markov (FOM) assumption and a replication
//! harness that reports bias, design effects and coverage complete the
//! toolkit.
//!
//! The numeric core ([`spectral`], the chains in [`synth`] and the
//! [`estimators`]) is generic over the scalar type through [`Real`]; the
//! aliases below fix it to `f64`, which is what the sampler, the FOM test
//! and the harness use.

pub mod error;
pub mod estimators;
pub mod fomtest;
pub mod graph;
pub mod harness;
pub mod sampler;
pub mod scalar;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use graph::Graph;
pub use sampler::{RdsConfig, RecruitmentForest};
pub use scalar::Real;

pub type SpectralDecomposition = spectral::SpectralDecomposition<f64>;
pub type ProjectionCoefficients = spectral::ProjectionCoefficients<f64>;
pub type TransitionMatrix = graph::TransitionMatrix<f64>;
pub type CategoryChain = synth::CategoryChain<f64>;
pub type VarianceEstimate = estimators::VarianceEstimate<f64>;
pub type EmpiricalCategoryChain = estimators::EmpiricalCategoryChain<f64>;
pub type RwsVariance = spectral::RwsVariance<f64>;

pub type SpectralDecomposition32 = spectral::SpectralDecomposition<f32>;
pub type CategoryChain32 = synth::CategoryChain<f32>;
