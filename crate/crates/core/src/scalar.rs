//! Numeric abstraction shared by the speed solver and the simulator.
//!
//! The engine runs either on `f64` (fast, used by the service and the
//! property suites) or on exact big rationals, which reproduce delivery
//! times such as `2000/7` without rounding.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive};

pub type Exact = BigRational;

pub trait Scalar: Clone + Debug + Display + PartialOrd + Signed + Send + Sync + 'static {
    /// Exact conversion for rationals; identity for `f64`.
    fn from_f64(value: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn floor_value(&self) -> Self;

    /// Absolute tolerance of the speed fixed-point test.
    fn convergence_eps() -> Self;

    /// Markings with magnitude at or below this are treated as empty.
    fn empty_tolerance() -> Self;

    /// Two event times closer than this are coalesced into one boundary.
    fn time_tolerance(at: &Self) -> Self;

    /// Strictly greater than zero. `Signed::is_positive` counts `+0.0`.
    fn above_zero(&self) -> bool {
        *self > Self::zero()
    }

    fn below_zero(&self) -> bool {
        *self < Self::zero()
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    /// Rendering used for exact reporting (`2000/7` for rationals).
    fn exact_string(&self) -> String {
        self.to_string()
    }
}

impl Scalar for f64 {
    fn from_f64(value: f64) -> Self {
        value
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn floor_value(&self) -> Self {
        self.floor()
    }

    fn convergence_eps() -> Self {
        1e-12
    }

    fn empty_tolerance() -> Self {
        1e-9
    }

    fn time_tolerance(at: &Self) -> Self {
        1e-9 * at.abs().max(1.0)
    }
}

impl Scalar for BigRational {
    fn from_f64(value: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(value)
            .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn floor_value(&self) -> Self {
        self.floor()
    }

    fn convergence_eps() -> Self {
        <Self as Scalar>::from_f64(1e-12)
    }

    fn empty_tolerance() -> Self {
        num_traits::Zero::zero()
    }

    fn time_tolerance(_at: &Self) -> Self {
        num_traits::Zero::zero()
    }
}

/// Parses `"a/b"` or a plain decimal into an exact rational.
pub fn parse_exact(text: &str) -> Option<Exact> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let value: f64 = text.parse().ok()?;
    <BigRational as FromPrimitive>::from_f64(value)
}
