//! Numeric abstraction shared by the estimator, graph and clustering code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Floating-point element type for correlation, distance and weight computations.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Field used by the counting statistics (ARI, hypergeometric pmf).
///
/// Floats give the fast path; `Ratio<BigInt>` gives exact answers.
pub trait Field: Num + Clone + FromPrimitive + PartialOrd + Debug {
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in field")
    }
}

impl Field for f32 {}
impl Field for f64 {}
impl Field for Ratio<BigInt> {}
impl Field for Ratio<i128> {}
