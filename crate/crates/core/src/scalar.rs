use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by embeddings, encoders, indexes and losses.
///
/// Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    /// Widening conversion to `f64`.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts between scalar types through `f64`.
    fn cast<T: Scalar>(self) -> T {
        T::of(self.to_f64_lossy())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Plain sequential inner product; the reduction order is fixed so results do
/// not depend on thread scheduling.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

/// Numerically stable `ln(sum(exp(x)))`.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if !max.is_finite() {
        return max;
    }
    let sum: S = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}
