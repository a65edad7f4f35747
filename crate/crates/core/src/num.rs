//! Scalar abstraction for the probability and sample-size arithmetic.

use std::fmt::{Debug, Display};

pub trait Scalar: num_traits::Float + num_traits::FromPrimitive + Debug + Display + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar literal")
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("scalar from usize")
    }

    /// Ceiling as a non-negative count, saturating.
    fn ceil_count(self) -> u64 {
        let c = self.ceil();
        if c <= Self::zero() {
            0
        } else {
            c.to_u64().unwrap_or(u64::MAX)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
