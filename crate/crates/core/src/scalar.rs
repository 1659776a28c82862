use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type used for distances, weights and fitness values.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Relative threshold below which a fitness change is treated as a tie.
    fn tie_tolerance() -> Self;

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f64 {
    #[inline]
    fn tie_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    #[inline]
    fn tie_tolerance() -> Self {
        1e-6
    }
}

/// `true` when moving from `current` by `delta` is a strict improvement,
/// i.e. the decrease exceeds rounding noise relative to `current`.
#[inline]
pub fn improves<T: Scalar>(delta: T, current: T) -> bool {
    delta < -(current.abs() * T::tie_tolerance())
}

/// Strictly-better comparison with the same tolerance as [`improves`].
#[inline]
pub fn better<T: Scalar>(candidate: T, incumbent: T) -> bool {
    if incumbent.is_infinite() {
        return candidate < incumbent;
    }
    improves(candidate - incumbent, incumbent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_are_not_improvements() {
        assert!(!better(100.0_f64, 100.0));
        assert!(!better(100.0_f64 - 1e-13, 100.0));
        assert!(better(99.0_f64, 100.0));
        assert!(better(5.0_f32, f32::INFINITY));
    }
}
