//! Exact rational arithmetic helpers.
//!
//! Every quantity a checker compares is a [`Rat`]; floats never enter a
//! verdict. The display format is `p/q` (plain `p` when the denominator
//! is one), which doubles as the on-disk encoding in CSV and JSON files.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational.
pub type Rat = num_rational::BigRational;

/// Rational from a machine integer.
pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational from an unsigned count.
pub fn uint(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `n / d` with `d != 0`.
pub fn frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

/// Parses `p/q` or `p`. Whitespace around the token is accepted.
pub fn parse(s: &str) -> Result<Rat> {
    let t = s.trim();
    t.parse::<Rat>()
        .map_err(|e| Error::parse("rational", format!("{t:?}: {e}")))
}

/// Parses a rational that must be non-negative.
pub fn parse_nonneg(s: &str) -> Result<Rat> {
    let r = parse(s)?;
    if r.is_negative() {
        return Err(Error::validation(format!("expected non-negative value, got {r}")));
    }
    Ok(r)
}

/// Floor of a non-negative rational as a u64, if it fits.
pub fn floor_u64(r: &Rat) -> Option<u64> {
    use num_traits::ToPrimitive;
    r.floor().to_integer().to_u64()
}
