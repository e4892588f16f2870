//! Signed fixed-point encoding of rationals into the plaintext ring `Z_N`.
//!
//! A value `v` is stored as `round(v * 2^scale) mod N`. Negative values live
//! in the upper half `(N/2, N)`, two's-complement style; the comparison
//! protocol's half-test relies on exactly this convention. Inputs are exact
//! rationals so integer travel costs encode without representation error.

use rug::ops::RemRounding;
use rug::{Integer, Rational};

use crate::error::{Error, Result};

/// A plaintext ring element together with its fixed-point scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedCode {
    /// Representative in `[0, N)`.
    pub raw: Integer,
    /// Binary scale exponent: the code stands for `signed(raw) / 2^scale`.
    pub scale: u32,
}

impl FixedCode {
    pub fn new(raw: Integer, scale: u32) -> Self {
        debug_assert!(raw >= 0);
        Self { raw, scale }
    }

    /// Integer at scale zero, reduced into `[0, N)`.
    pub fn from_integer(value: &Integer, modulus: &Integer) -> Self {
        let raw = value.clone().rem_euc(modulus.clone());
        Self { raw, scale: 0 }
    }
}

/// Rounds half away from zero to the nearest integer.
pub fn round_half_away(value: &Rational) -> Integer {
    let num = value.numer();
    let den = value.denom(); // canonical, always positive
    let twice: Integer = Integer::from(num.abs_ref()) * 2u32 + den;
    let mut out = twice / (Integer::from(den) * 2u32);
    if *num < 0 {
        out = -out;
    }
    out
}

/// Encodes an exact rational at the given scale.
///
/// Fails with [`Error::Overflow`] unless `|value| * 2^scale < N/2`, the
/// condition for the signed interpretation to be unambiguous.
pub fn encode(value: &Rational, scale: u32, modulus: &Integer) -> Result<FixedCode> {
    let shifted = value.clone() * Rational::from(Integer::from(1) << scale);
    let half = Rational::from((modulus.clone(), Integer::from(2)));
    if shifted.clone().abs() >= half {
        return Err(Error::Overflow { value: value.to_string(), scale });
    }
    let raw = round_half_away(&shifted).rem_euc(modulus.clone());
    Ok(FixedCode { raw, scale })
}

/// Inverse of [`encode`]: signed interpretation divided by `2^scale`.
pub fn decode(code: &FixedCode, modulus: &Integer) -> Rational {
    Rational::from((signed_raw(&code.raw, modulus), Integer::from(1) << code.scale))
}

/// Maps `raw` in `[0, N)` to its signed representative in `(-N/2, N/2]`.
pub fn signed_raw(raw: &Integer, modulus: &Integer) -> Integer {
    let half = Integer::from(modulus / 2u32);
    if *raw > half {
        Integer::from(raw - modulus)
    } else {
        raw.clone()
    }
}

/// Fixed-point reciprocal used to turn division into scalar multiplication:
/// `round((1/y) * 2^scale)` as a signed integer.
pub fn reciprocal_code(y: &Rational, scale: u32) -> Result<Integer> {
    if *y == 0 {
        return Err(Error::DivisionByZero);
    }
    let recip = Rational::from(y.recip_ref()) * Rational::from(Integer::from(1) << scale);
    Ok(round_half_away(&recip))
}
