//! Scalar abstraction shared by the scoring, allocation and statistics code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the numeric modules are generic over.
///
/// Implemented for `f32` and `f64`; the file formats and the CLI use `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`, rounding to the nearest value.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into `Self`.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion back to `f64`, used for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for "equal within rounding" checks at this precision.
    fn tolerance(magnitude: Self) -> Self {
        let floor = Self::lit(1e-12);
        let scaled = Self::epsilon() * Self::lit(64.0) * magnitude.abs().max(Self::one());
        floor.max(scaled)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_tracks_precision() {
        assert_eq!(f64::tolerance(1.0), 1e-12_f64.max(f64::EPSILON * 64.0));
        assert!(f32::tolerance(1.0) > 1e-6);
        assert!(f64::tolerance(1e6) > f64::tolerance(1.0));
    }

    #[test]
    fn literal_round_trip() {
        assert_eq!(f32::lit(0.25), 0.25_f32);
        assert_eq!(f64::count(7), 7.0);
        assert_eq!(0.5_f32.as_f64(), 0.5);
    }
}
