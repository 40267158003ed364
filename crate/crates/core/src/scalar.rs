//! Numeric traits shared by the scoring code.
//!
//! Ranking scores need logarithms, so BM25 is written against [`Real`]
//! (`f32`/`f64`). Classification metrics and report means only need field
//! arithmetic, so they are written against [`Scalar`], which also admits
//! exact rationals such as `num_rational::Ratio<i64>`.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// Field-like numeric type: floats or exact rationals.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Floating point: f32 or f64.
pub trait Real: Scalar + Float + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in float type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |acc, v| acc + *v);
    Some(sum / T::from_count(values.len()))
}
