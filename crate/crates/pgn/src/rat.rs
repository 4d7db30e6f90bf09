//! Exact rational scalars and string/serde helpers.
//!
//! Rationals travel through JSON as strings (`"3"`, `"-7/2"`) so that no
//! precision is lost and files stay readable.

use num::bigint::{BigInt, Sign};
use num::rational::BigRational;
use num::{One, Signed, Zero};
use num_traits::ToPrimitive;
use std::str::FromStr;

pub type Rat = BigRational;

/// Parse `"p"` or `"p/q"`.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let mk = |t: &str| BigInt::from_str(t).map_err(|e| format!("bad integer {t:?}: {e}"));
    match s.split_once('/') {
        None => Ok(Rat::from_integer(mk(s)?)),
        Some((p, q)) => {
            let q = mk(q)?;
            if q.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Rat::new(mk(p)?, q))
        }
    }
}

/// Render in the same format `parse_rat` accepts.
pub fn fmt_rat(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn rat_i64(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_frac(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Exact conversion; every finite f64 is a dyadic rational.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    BigRational::from_float(x)
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back through a scaled representation for giant numerators.
        let bits = x.numer().bits().max(x.denom().bits()) as i64;
        let shift = (bits - 100).max(0) as u64;
        let num = (x.numer() >> shift).to_f64().unwrap_or(f64::MAX);
        let den = (x.denom() >> shift).to_f64().unwrap_or(f64::MAX);
        num / den
    })
}

/// Largest integer `<= x`.
pub fn floor_int(x: &Rat) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil_int(x: &Rat) -> BigInt {
    x.ceil().to_integer()
}

/// Round toward -inf to a dyadic with `prec` fractional bits.
pub fn round_down(x: &Rat, prec: u32) -> Rat {
    let scaled = x * Rat::from_integer(BigInt::one() << prec);
    Rat::new(floor_int(&scaled), BigInt::one() << prec)
}

/// Round toward +inf to a dyadic with `prec` fractional bits.
pub fn round_up(x: &Rat, prec: u32) -> Rat {
    let scaled = x * Rat::from_integer(BigInt::one() << prec);
    Rat::new(ceil_int(&scaled), BigInt::one() << prec)
}

/// `2^-prec` as a rational.
pub fn pow2_neg(prec: u32) -> Rat {
    Rat::new(BigInt::one(), BigInt::one() << prec)
}

/// Rational with bounded bit-size close to `x`: keeps roughly `prec`
/// significant bits.  Used to stop denominators from snowballing inside
/// long interval computations.  Rounds toward -inf / +inf as requested.
pub fn compress(x: &Rat, prec: u32, up: bool) -> Rat {
    if x.is_zero() {
        return Rat::zero();
    }
    let mag = x.numer().bits() as i64 - x.denom().bits() as i64;
    // Shift so that ~prec significant bits survive.
    let frac_bits = (prec as i64 - mag).max(0) as u32;
    if up {
        round_up(x, frac_bits)
    } else {
        round_down(x, frac_bits)
    }
}

pub fn big_sign(x: &BigInt) -> i32 {
    match x.sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

pub fn rat_abs(x: &Rat) -> Rat {
    x.abs()
}

/// serde adapter: a `Rat` as a `"p/q"` string.
pub mod serde_str {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(de::Error::custom)
    }
}

/// serde adapter for `Vec<Rat>`.
pub mod serde_vec {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(fmt_rat))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| parse_rat(s).map_err(de::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "5", "-3", "7/2", "-22/7"] {
            assert_eq!(fmt_rat(&parse_rat(s).unwrap()), s);
        }
        assert_eq!(fmt_rat(&parse_rat("4/2").unwrap()), "2");
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn rounding_brackets() {
        let x = rat_frac(1, 3);
        let lo = round_down(&x, 16);
        let hi = round_up(&x, 16);
        assert!(lo <= x && x <= hi);
        assert!(&hi - &lo <= pow2_neg(16));
    }

    #[test]
    fn compress_keeps_direction() {
        let x = parse_rat("123456789123456789/987654321987654321").unwrap();
        assert!(compress(&x, 30, false) <= x);
        assert!(compress(&x, 30, true) >= x);
    }
}
