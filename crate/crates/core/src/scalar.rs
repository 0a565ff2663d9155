//! Scalar abstraction for the numerical core.
//!
//! The dense-network math is written once, generic over [`Scalar`], and
//! instantiated as `f32` or `f64` through the aliases at the crate root.
//! Training and evaluation pin `f64`: the gradient-check tolerances assume
//! double precision.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the network core.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Significant decimal digits that make text round-trips lossless.
    const ROUND_TRIP_DIGITS: usize;

    /// Lossless conversion from `f64` space (used by the seeded generators,
    /// which produce `f64` draws by construction).
    fn from_f64_lossy(value: f64) -> Self {
        Self::from(value).expect("finite f64 converts to any supported scalar")
    }

    /// Raw bit pattern, widened to `u64`. Used for bit-exact comparisons and
    /// parameter hashing.
    fn to_bits_u64(self) -> u64;
}

impl Scalar for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;

    fn to_bits_u64(self) -> u64 {
        u64::from(self.to_bits())
    }
}

impl Scalar for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
}

/// Formats a scalar as decimal text with enough significant digits that
/// parsing it back yields the identical bit pattern.
pub fn encode_decimal<F: Scalar>(value: F) -> String {
    format!("{:.*e}", F::ROUND_TRIP_DIGITS - 1, value)
}

/// Parses decimal text produced by [`encode_decimal`] (or any plain decimal).
pub fn parse_decimal<F: Scalar>(text: &str) -> Option<F> {
    text.trim().parse::<F>().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_round_trip_is_bit_exact_f64() {
        for &v in &[
            0.0_f64,
            -0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1.0e-300,
            -3.123456789012345e250,
            f64::MIN_POSITIVE,
        ] {
            let text = encode_decimal(v);
            let back: f64 = parse_decimal(&text).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "text was {text}");
        }
    }

    #[test]
    fn decimal_round_trip_is_bit_exact_f32() {
        for &v in &[0.1_f32, -2.718281828, 1.0e-38, 3.4e38] {
            let text = encode_decimal(v);
            let back: f32 = parse_decimal(&text).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "text was {text}");
        }
    }
}
