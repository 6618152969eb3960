//! Correlation-network analytics for asset panels.
//!
//! Rolling windows of detrended, exponentially weighted correlations are
//! filtered into MST/PMFG networks, clustered with the Directed Bubble
//! Hierarchical Tree, and compared over time with the Adjusted Rand Index,
//! metacorrelation and hypergeometric cluster matching.

pub mod cli;
pub mod compare;
pub mod dbht;
pub mod error;
pub mod estimator;
pub mod filtergraph;
pub mod ingest;
pub mod partition;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, Result};
pub use partition::Clustering;
pub use scalar::{Field, Scalar};

/// Exact rational arithmetic for the counting statistics.
pub type Rational = num_rational::Ratio<num_bigint::BigInt>;

pub type ReturnsPanel64 = ingest::ReturnsPanel<f64>;
pub type ReturnsPanel32 = ingest::ReturnsPanel<f32>;
pub type CorrelationMatrix64 = estimator::CorrelationMatrix<f64>;
pub type CorrelationMatrix32 = estimator::CorrelationMatrix<f32>;
pub type DistanceMatrix64 = estimator::DistanceMatrix<f64>;
pub type DistanceMatrix32 = estimator::DistanceMatrix<f32>;
