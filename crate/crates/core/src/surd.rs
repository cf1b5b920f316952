//! Exact real numbers of the form `Σ c_i √r_i` with rational `c_i` and
//! distinct squarefree integers `r_i`.
//!
//! Square roots of distinct squarefree integers are linearly independent over
//! the rationals, so the canonical form is unique and equality is structural.
//! Signs are decided by interval evaluation with increasing precision.

use num::{BigInt, Integer, One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

use crate::rat::{self, Q};
use crate::stepfn::Scalar;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Surd {
    /// Sorted by radicand; coefficients non-zero. Radicand 1 is the rational part.
    terms: Vec<(BigInt, Q)>,
}

const SMALL_PRIMES_UP_TO: u32 = 2000;

fn small_primes() -> &'static [u32] {
    static P: std::sync::OnceLock<Vec<u32>> = std::sync::OnceLock::new();
    P.get_or_init(|| {
        let n = SMALL_PRIMES_UP_TO as usize;
        let mut sieve = vec![true; n + 1];
        let mut out = Vec::new();
        for i in 2..=n {
            if sieve[i] {
                out.push(i as u32);
                let mut k = i * i;
                while k <= n {
                    sieve[k] = false;
                    k += i;
                }
            }
        }
        out
    })
}

/// `n = s² · r` with `r` squarefree as far as trial division and a final
/// perfect-square test can tell. Returns `(s, r)`.
fn split_square(n: &BigInt) -> (BigInt, BigInt) {
    let mut rest = n.clone();
    let mut s = BigInt::one();
    let mut r = BigInt::one();
    for &p in small_primes() {
        let p = BigInt::from(p);
        if &p * &p > rest {
            break;
        }
        let mut e = 0u32;
        while (&rest % &p).is_zero() {
            rest /= &p;
            e += 1;
        }
        s *= num::pow(p.clone(), (e / 2) as usize);
        if e % 2 == 1 {
            r *= &p;
        }
    }
    let root = rest.sqrt();
    if &root * &root == rest {
        s *= root;
    } else {
        r *= rest;
    }
    (s, r)
}

impl Surd {
    pub fn zero() -> Self {
        Surd { terms: Vec::new() }
    }

    pub fn rational(x: Q) -> Self {
        let mut s = Surd::zero();
        s.push(BigInt::one(), x);
        s
    }

    /// `c · √x` for a non-negative rational `x`.
    pub fn scaled_sqrt(c: &Q, x: &Q) -> Result<Self> {
        if x.is_negative() {
            return Err(Error::Domain(format!("square root of {}", rat::fmt(x))));
        }
        if x.is_zero() || c.is_zero() {
            return Ok(Surd::zero());
        }
        // √(p/q) = √(pq) / q
        let pq = x.numer() * x.denom();
        let (s, r) = split_square(&pq);
        let coef = c * Q::new(s, x.denom().clone());
        let mut out = Surd::zero();
        out.push(r, coef);
        Ok(out)
    }

    pub fn sqrt(x: &Q) -> Result<Self> {
        Self::scaled_sqrt(&Q::one(), x)
    }

    fn push(&mut self, r: BigInt, c: Q) {
        if !c.is_zero() {
            self.terms.push((r, c));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(BigInt, Q)] {
        &self.terms
    }

    /// The value as a rational, when it is one.
    pub fn as_rational(&self) -> Option<Q> {
        match self.terms.as_slice() {
            [] => Some(Q::zero()),
            [(r, c)] if r.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    fn combine(&self, o: &Self, sign: i32) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        let neg = |c: &Q| if sign < 0 { -c } else { c.clone() };
        while i < self.terms.len() || j < o.terms.len() {
            let ord = match (self.terms.get(i), o.terms.get(j)) {
                (Some(a), Some(b)) => a.0.cmp(&b.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    let (r, c) = &o.terms[j];
                    out.push((r.clone(), neg(c)));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &self.terms[i].1 + neg(&o.terms[j].1);
                    if !c.is_zero() {
                        out.push((self.terms[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Surd { terms: out }
    }

    pub fn scale_q(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Surd::zero();
        }
        Surd {
            terms: self.terms.iter().map(|(r, x)| (r.clone(), x * c)).collect(),
        }
    }

    fn product(&self, o: &Self) -> Self {
        let mut acc = Surd::zero();
        for (ra, ca) in &self.terms {
            for (rb, cb) in &o.terms {
                // √a √b = g √((a/g)(b/g)) for squarefree a, b with g = gcd(a, b)
                let g = ra.gcd(rb);
                let r = (ra / &g) * (rb / &g);
                let c = ca * cb * Q::from_integer(g);
                acc = acc.combine(&Surd { terms: vec![(r, c)] }, 1);
            }
        }
        acc
    }

    /// Reciprocal of a single term `c√r` or of `a + b√r`.
    pub fn inv(&self) -> Result<Self> {
        match self.terms.as_slice() {
            [] => Err(Error::Domain("division by zero".into())),
            [(r, c)] => Ok(Surd {
                terms: vec![(r.clone(), Q::one() / (c * Q::from_integer(r.clone())))],
            }),
            [(one, a), (r, b)] if one.is_one() => {
                let den = a * a - b * b * Q::from_integer(r.clone());
                let conj = Surd {
                    terms: vec![(one.clone(), a.clone()), (r.clone(), -b)],
                };
                Ok(conj.scale_q(&(Q::one() / den)))
            }
            _ => Err(Error::Inexact(format!("cannot invert {self}"))),
        }
    }

    /// Sign of the value, exact.
    pub fn signum(&self) -> i32 {
        match self.terms.as_slice() {
            [] => 0,
            [(_, c)] => {
                if c.is_positive() {
                    1
                } else {
                    -1
                }
            }
            _ => self.interval_sign(),
        }
    }

    fn interval_sign(&self) -> i32 {
        let mut bits = 64usize;
        loop {
            let scale = BigInt::one() << (2 * bits);
            let mut lo = Q::zero();
            let mut hi = Q::zero();
            for (r, c) in &self.terms {
                let s = (r * &scale).sqrt();
                let den = BigInt::one() << bits;
                let a = Q::new(s.clone(), den.clone());
                let b = if r.is_one() { a.clone() } else { Q::new(s + 1, den) };
                if c.is_positive() {
                    lo += c * &a;
                    hi += c * &b;
                } else {
                    lo += c * &b;
                    hi += c * &a;
                }
            }
            if lo.is_positive() {
                return 1;
            }
            if hi.is_negative() {
                return -1;
            }
            if bits >= 1 << 14 {
                let v = self.to_f64();
                return if v > 0.0 { 1 } else { -1 };
            }
            bits *= 4;
        }
    }

    pub fn value_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(r, c)| {
                let rf = match r.to_f64() {
                    Some(x) if x.is_finite() => x.sqrt(),
                    _ => (rat::ln_int(r) * 0.5).exp(),
                };
                rat::to_f64(c) * rf
            })
            .sum()
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (r, c)) in self.terms.iter().enumerate() {
            let body = if r.is_one() {
                rat::fmt(c)
            } else if c.is_one() {
                format!("sqrt({r})")
            } else {
                format!("{}*sqrt({r})", rat::fmt(c))
            };
            if k > 0 && !body.starts_with('-') {
                write!(f, "+")?;
            }
            write!(f, "{body}")?;
        }
        Ok(())
    }
}

impl Serialize for Surd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Serialize for crate::Step<Surd> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let bps: Vec<String> = self.breakpoints().iter().map(rat::fmt).collect();
        let vals: Vec<String> = self.values().iter().map(|v| v.to_string()).collect();
        let mut st = s.serialize_struct("Step", 2)?;
        st.serialize_field("breakpoints", &bps)?;
        st.serialize_field("values", &vals)?;
        st.end()
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(match self.combine(o, -1).signum() {
            0 => Ordering::Equal,
            s if s < 0 => Ordering::Less,
            _ => Ordering::Greater,
        })
    }
}

impl Scalar for Surd {
    fn zero_v() -> Self {
        Surd::zero()
    }
    fn from_q(x: &Q) -> Self {
        Surd::rational(x.clone())
    }
    fn from_i64(x: i64) -> Self {
        Surd::rational(rat::qi(x))
    }
    fn to_f64(&self) -> f64 {
        self.value_f64()
    }
    fn add(&self, o: &Self) -> Self {
        self.combine(o, 1)
    }
    fn sub(&self, o: &Self) -> Self {
        self.combine(o, -1)
    }
    fn mul(&self, o: &Self) -> Self {
        self.product(o)
    }
    fn weigh(&self, len: &Q) -> Self {
        self.scale_q(len)
    }
    fn is_neg(&self) -> bool {
        self.signum() < 0
    }
}

/// Scalars that also support square roots of rationals and division, so the
/// process constructions run unchanged in floating point or exactly.
pub trait Field: Scalar + Serialize {
    const EXACT: bool;
    fn sqrt_q(x: &Q) -> Result<Self>;
    fn inv(&self) -> Result<Self>;
    fn is_zero_v(&self) -> bool;
    /// `Some(x)` when the value is exactly the rational `x`.
    fn rational(&self) -> Option<Q>;
    fn step_json(f: &crate::Step<Self>) -> serde_json::Value;
    /// Square root of a non-negative value, when the field can hold it.
    fn sqrt_v(&self) -> Option<Self>;
}

impl Field for f64 {
    const EXACT: bool = false;
    fn sqrt_q(x: &Q) -> Result<Self> {
        if x.is_negative() {
            return Err(Error::Domain(format!("square root of {}", rat::fmt(x))));
        }
        Ok(rat::to_f64(x).sqrt())
    }
    fn inv(&self) -> Result<Self> {
        if *self == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(1.0 / self)
    }
    fn is_zero_v(&self) -> bool {
        *self == 0.0
    }
    fn rational(&self) -> Option<Q> {
        None
    }
    fn sqrt_v(&self) -> Option<Self> {
        (*self >= 0.0).then(|| self.sqrt())
    }
    fn step_json(f: &crate::Step<Self>) -> serde_json::Value {
        serde_json::to_value(f).unwrap_or_default()
    }
}

impl Field for Surd {
    const EXACT: bool = true;
    fn sqrt_q(x: &Q) -> Result<Self> {
        Surd::sqrt(x)
    }
    fn inv(&self) -> Result<Self> {
        Surd::inv(self)
    }
    fn is_zero_v(&self) -> bool {
        self.is_zero()
    }
    fn rational(&self) -> Option<Q> {
        self.as_rational()
    }
    fn sqrt_v(&self) -> Option<Self> {
        self.as_rational().and_then(|x| Surd::sqrt(&x).ok())
    }
    fn step_json(f: &crate::Step<Self>) -> serde_json::Value {
        serde_json::to_value(f).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{q, qi};

    #[test]
    fn canonical_square_roots() {
        assert_eq!(Surd::sqrt(&qi(12)).unwrap().to_string(), "2*sqrt(3)");
        assert_eq!(Surd::sqrt(&q(1, 3)).unwrap().to_string(), "1/3*sqrt(3)");
        assert_eq!(Surd::sqrt(&q(4, 9)).unwrap(), Surd::rational(q(2, 3)));
        assert!(Surd::sqrt(&qi(-1)).is_err());
    }

    #[test]
    fn products_collapse_to_rationals() {
        let a = Surd::sqrt(&qi(6)).unwrap();
        let b = Surd::sqrt(&qi(3)).unwrap();
        let ab = a.mul(&b);
        assert_eq!(ab.to_string(), "3*sqrt(2)");
        let s3 = Surd::sqrt(&qi(3)).unwrap();
        assert_eq!(s3.mul(&s3).as_rational(), Some(qi(3)));
    }

    #[test]
    fn signs_of_mixed_sums() {
        let s2 = Surd::sqrt(&qi(2)).unwrap();
        let s3 = Surd::sqrt(&qi(3)).unwrap();
        // √2 + √3 vs √10: 5 + 2√6 < 10 since √6 < 2.5
        let lhs = s2.add(&s3);
        let rhs = Surd::sqrt(&qi(10)).unwrap();
        assert!(lhs < rhs);
        assert!(s3.sub(&Surd::rational(q(17, 10))).signum() > 0);
        assert!(s3.sub(&Surd::rational(q(174, 100))).signum() < 0);
    }

    #[test]
    fn inverses() {
        let x = Surd::rational(qi(1)).sub(&Surd::sqrt(&q(1, 2)).unwrap());
        let y = x.inv().unwrap();
        assert_eq!(x.mul(&y), Surd::rational(qi(1)));
        let z = Surd::scaled_sqrt(&qi(2), &qi(5)).unwrap();
        assert_eq!(z.mul(&z.inv().unwrap()), Surd::rational(qi(1)));
    }
}
