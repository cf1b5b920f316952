//! Exact rational helpers shared by every module.
//!
//! Breakpoints and grid points are `BigRational`; the triadic grids used here
//! have denominators `3^(2^i)`, which overflow machine integers from level 6 on.

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};
use std::str::FromStr;

use crate::Error;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn pow3(e: u64) -> BigInt {
    num::pow(BigInt::from(3), e as usize)
}

/// `3^(2^level)`: number of atoms of the level-`level` triadic grid.
pub fn grid_size(level: u32) -> BigInt {
    pow3(1u64 << level)
}

/// Length of a level-`level` atom, `3^(-2^level)`.
pub fn atom_len(level: u32) -> Q {
    Q::new(BigInt::one(), grid_size(level))
}

pub fn floor(x: &Q) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil(x: &Q) -> BigInt {
    x.ceil().to_integer()
}

/// Natural log of a positive big integer, accurate for any size.
pub fn ln_int(n: &BigInt) -> f64 {
    debug_assert!(n.sign() == Sign::Plus);
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top: BigInt = n >> shift;
    top.to_f64().unwrap().ln() + (shift as f64) * std::f64::consts::LN_2
}

/// Natural log of a positive rational.
pub fn ln(x: &Q) -> f64 {
    ln_int(x.numer()) - ln_int(x.denom())
}

/// `-log_base(x)` for `0 < x <= 1`. Exact when `x` is an integral power of `base`.
pub fn neg_log(x: &Q, base: u32) -> f64 {
    if let Some(e) = exact_neg_log(x, base) {
        return e as f64;
    }
    -ln(x) / (base as f64).ln()
}

/// `Some(e)` when `x == base^(-e)` exactly.
pub fn exact_neg_log(x: &Q, base: u32) -> Option<u64> {
    if !x.numer().is_one() {
        return None;
    }
    let mut d = x.denom().clone();
    let b = BigInt::from(base);
    let mut e = 0u64;
    while d > BigInt::one() {
        if !(&d % &b).is_zero() {
            return None;
        }
        d /= &b;
        e += 1;
    }
    Some(e)
}

pub fn to_f64(x: &Q) -> f64 {
    if let Some(v) = x.to_f64() {
        if v.is_finite() && (v != 0.0 || x.is_zero()) {
            return v;
        }
    }
    let s = if x.is_negative() { -1.0 } else { 1.0 };
    s * ln(&x.abs()).exp()
}

pub fn fmt(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"p/q"`, an integer, or a plain decimal such as `"0.125"` or `"-1e-3"`.
pub fn parse(s: &str) -> Result<Q, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(p) => (&s[..p], s[p + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{ip}{fp}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let scale = exp - fp.len() as i64;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        Q::from_integer(n * num::pow(ten, scale as usize))
    } else {
        Q::new(n, num::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

pub fn ser<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt(x))
}

pub fn de<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).map_err(serde::de::Error::custom)
}

pub fn ser_vec<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&fmt(x))?;
    }
    seq.end()
}

pub fn de_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
    let v = Vec::<String>::deserialize(d)?;
    v.iter()
        .map(|s| parse(s).map_err(serde::de::Error::custom))
        .collect()
}

/// Integer square root test: `Some(r)` with `r*r == x` for a non-negative rational square.
pub fn sqrt_exact(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    if &(&n * &n) == x.numer() && &(&d * &d) == x.denom() {
        Some(Q::new(n, d))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse("1/3").unwrap(), q(1, 3));
        assert_eq!(parse("0.125").unwrap(), q(1, 8));
        assert_eq!(parse("-2.5e-1").unwrap(), q(-1, 4));
        assert_eq!(parse("7").unwrap(), qi(7));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
    }

    #[test]
    fn neg_log_exact_for_powers() {
        assert_eq!(exact_neg_log(&q(1, 81), 3), Some(4));
        assert_eq!(exact_neg_log(&q(2, 81), 3), None);
        assert_eq!(neg_log(&atom_len(5), 3), 32.0);
        assert!((neg_log(&q(8, 9), 3) - (2.0 - 3.0 * 2f64.ln() / 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn ln_of_huge_denominators() {
        let x = atom_len(9);
        assert!((ln(&x) / 3f64.ln() + 512.0).abs() < 1e-9);
        assert!((to_f64(&atom_len(5)) - 3f64.powi(-32)).abs() < 1e-25);
    }
}
