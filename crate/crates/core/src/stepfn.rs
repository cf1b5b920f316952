//! Piecewise-constant functions on `(0, 1]` with exact rational breakpoints.
//!
//! Pieces are left-open, right-closed: piece `k` covers `(b[k-1], b[k]]` with
//! `b[-1] = 0`. Adjacent pieces always carry distinct values.
//!
//! Values are generic over [`Scalar`]: `f64` for everything involving square
//! roots or logarithms, [`Q`] when the whole computation stays rational.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;

use crate::rat::{self, Q};
use crate::Error;

/// Value type carried by a [`Step`].
pub trait Scalar: Clone + PartialEq + PartialOrd + Debug + Send + Sync + 'static {
    fn zero_v() -> Self;
    fn from_q(x: &Q) -> Self;
    fn from_i64(x: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// `self * len` where `len` is an exact length.
    fn weigh(&self, len: &Q) -> Self;
    fn is_neg(&self) -> bool {
        *self < Self::zero_v()
    }
    fn abs(&self) -> Self {
        if self.is_neg() {
            Self::zero_v().sub(self)
        } else {
            self.clone()
        }
    }
    fn min_of(&self, o: &Self) -> Self {
        if o < self {
            o.clone()
        } else {
            self.clone()
        }
    }
    fn max_of(&self, o: &Self) -> Self {
        if o > self {
            o.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for f64 {
    fn zero_v() -> Self {
        0.0
    }
    fn from_q(x: &Q) -> Self {
        rat::to_f64(x)
    }
    fn from_i64(x: i64) -> Self {
        x as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn weigh(&self, len: &Q) -> Self {
        self * rat::to_f64(len)
    }
}

impl Scalar for Q {
    fn zero_v() -> Self {
        Zero::zero()
    }
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn from_i64(x: i64) -> Self {
        rat::qi(x)
    }
    fn to_f64(&self) -> f64 {
        rat::to_f64(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn weigh(&self, len: &Q) -> Self {
        self * len
    }
}

/// A piecewise-constant function on `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Step<V: Scalar = f64> {
    bps: Vec<Q>,
    vals: Vec<V>,
}

/// Real-valued step function.
pub type StepFunction = Step<f64>;
/// Step function with exact rational values.
pub type ExactStep = Step<Q>;

/// One piece `(lo, hi]` of a step function.
#[derive(Clone, Copy, Debug)]
pub struct Piece<'a, V> {
    pub lo: &'a Q,
    pub hi: &'a Q,
    pub value: &'a V,
}

impl<'a, V> Piece<'a, V> {
    pub fn len(&self) -> Q {
        self.hi - self.lo
    }
}

static ZERO_Q: std::sync::OnceLock<Q> = std::sync::OnceLock::new();

fn zero_q() -> &'static Q {
    ZERO_Q.get_or_init(Q::zero)
}

impl<V: Scalar> Step<V> {
    pub fn constant(v: V) -> Self {
        Step {
            bps: vec![Q::one()],
            vals: vec![v],
        }
    }

    pub fn zero() -> Self {
        Self::constant(V::zero_v())
    }

    /// Builds from raw pieces; validates ordering and restores canonical form.
    pub fn new(bps: Vec<Q>, vals: Vec<V>) -> Result<Self, Error> {
        if bps.is_empty() || bps.len() != vals.len() {
            return Err(Error::Invalid("breakpoints and values must be non-empty and equal in length".into()));
        }
        if bps.last() != Some(&Q::one()) {
            return Err(Error::Invalid("last breakpoint must be 1".into()));
        }
        let mut prev = Q::zero();
        for b in &bps {
            if *b <= prev {
                return Err(Error::Invalid(format!("breakpoints must increase strictly in (0,1], got {}", rat::fmt(b))));
            }
            prev = b.clone();
        }
        Ok(Self::canonical(bps, vals))
    }

    fn canonical(bps: Vec<Q>, vals: Vec<V>) -> Self {
        let mut ob: Vec<Q> = Vec::with_capacity(bps.len());
        let mut ov: Vec<V> = Vec::with_capacity(vals.len());
        for (b, v) in bps.into_iter().zip(vals) {
            if ov.last() == Some(&v) {
                *ob.last_mut().unwrap() = b;
            } else {
                ob.push(b);
                ov.push(v);
            }
        }
        Step { bps: ob, vals: ov }
    }

    /// `v` on `(a, b]`, 0 elsewhere.
    pub fn indicator_scaled(a: &Q, b: &Q, v: V) -> Self {
        Self::from_segments(vec![(a.clone(), b.clone(), v)], V::zero_v())
    }

    pub fn indicator(a: &Q, b: &Q) -> Self {
        Self::indicator_scaled(a, b, V::from_i64(1))
    }

    /// Sorted, non-overlapping `(lo, hi, value)` segments; gaps get `fill`.
    pub fn from_segments(segs: Vec<(Q, Q, V)>, fill: V) -> Self {
        let mut bps = Vec::with_capacity(2 * segs.len() + 1);
        let mut vals = Vec::with_capacity(2 * segs.len() + 1);
        let mut x = Q::zero();
        for (lo, hi, v) in segs {
            let lo = lo.max(Q::zero());
            let hi = hi.min(Q::one());
            if hi <= lo || lo < x {
                continue;
            }
            if lo > x {
                bps.push(lo.clone());
                vals.push(fill.clone());
            }
            bps.push(hi.clone());
            vals.push(v);
            x = hi;
        }
        if x < Q::one() {
            bps.push(Q::one());
            vals.push(fill);
        }
        Self::canonical(bps, vals)
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.bps
    }

    pub fn values(&self) -> &[V] {
        &self.vals
    }

    pub fn num_pieces(&self) -> usize {
        self.bps.len()
    }

    pub fn pieces(&self) -> impl Iterator<Item = Piece<'_, V>> + '_ {
        (0..self.bps.len()).map(move |k| Piece {
            lo: if k == 0 { zero_q() } else { &self.bps[k - 1] },
            hi: &self.bps[k],
            value: &self.vals[k],
        })
    }

    /// Index of the piece containing `t`.
    fn locate(&self, t: &Q) -> usize {
        self.bps.partition_point(|b| b < t)
    }

    pub fn eval(&self, t: &Q) -> Result<V, Error> {
        if *t <= Q::zero() || *t > Q::one() {
            return Err(Error::Domain(format!("t = {} outside (0,1]", rat::fmt(t))));
        }
        Ok(self.vals[self.locate(t)].clone())
    }

    pub fn map<W: Scalar>(&self, f: impl Fn(&V) -> W) -> Step<W> {
        Step::canonical(self.bps.clone(), self.vals.iter().map(f).collect())
    }

    /// Pointwise combination over the union of both breakpoint sets.
    pub fn zip_with<W: Scalar, R: Scalar>(&self, other: &Step<W>, f: impl Fn(&V, &W) -> R) -> Step<R> {
        let n = self.bps.len() + other.bps.len();
        let mut bps = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n);
        let (mut i, mut j) = (0, 0);
        while i < self.bps.len() && j < other.bps.len() {
            vals.push(f(&self.vals[i], &other.vals[j]));
            match self.bps[i].cmp(&other.bps[j]) {
                std::cmp::Ordering::Less => {
                    bps.push(self.bps[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    bps.push(other.bps[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    bps.push(self.bps[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        Step::canonical(bps, vals)
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a.sub(b))
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a.mul(b))
    }

    pub fn min(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a.min_of(b))
    }

    pub fn max(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a.max_of(b))
    }

    pub fn scale(&self, c: &V) -> Self {
        self.map(|v| v.mul(c))
    }

    /// `f ∧ c`.
    pub fn clip_min(&self, c: &V) -> Self {
        self.map(|v| v.min_of(c))
    }

    /// `f ∨ c`.
    pub fn clip_max(&self, c: &V) -> Self {
        self.map(|v| v.max_of(c))
    }

    /// `(f - c)^+`.
    pub fn pos_part(&self, c: &V) -> Self {
        let z = V::zero_v();
        self.map(|v| v.sub(c).max_of(&z))
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    /// `f · 1_(a,b]`.
    pub fn restrict(&self, a: &Q, b: &Q) -> Self {
        self.mul(&Self::indicator(a, b))
    }

    pub fn integral(&self) -> V {
        self.pieces()
            .fold(V::zero_v(), |acc, p| acc.add(&p.value.weigh(&p.len())))
    }

    /// `∫ f²`.
    pub fn norm_sq(&self) -> V {
        self.pieces()
            .fold(V::zero_v(), |acc, p| acc.add(&p.value.mul(p.value).weigh(&p.len())))
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().to_f64().max(0.0).sqrt()
    }

    /// `∫ f g`.
    pub fn inner(&self, o: &Self) -> V {
        self.mul(o).integral()
    }

    pub fn max_value(&self) -> V {
        self.vals.iter().skip(1).fold(self.vals[0].clone(), |m, v| m.max_of(v))
    }

    pub fn min_value(&self) -> V {
        self.vals.iter().skip(1).fold(self.vals[0].clone(), |m, v| m.min_of(v))
    }

    /// Exact Lebesgue measure of `{t : pred(f(t))}`.
    pub fn measure_where(&self, pred: impl Fn(&V) -> bool) -> Q {
        self.pieces()
            .filter(|p| pred(p.value))
            .fold(Q::zero(), |acc, p| acc + p.len())
    }

    /// Pointwise `f <= g` on every piece of the common refinement.
    pub fn le(&self, o: &Self) -> bool {
        self.zip_with(o, |a, b| if a <= b { 0.0 } else { 1.0 })
            .max_value()
            == 0.0
    }

    /// Pointwise `f <= g + tol` (values compared as `f64`).
    pub fn le_tol(&self, o: &Self, tol: f64) -> bool {
        self.max_violation(o) <= tol
    }

    /// `max (f - g)^+` over the common refinement.
    pub fn max_violation(&self, o: &Self) -> f64 {
        let d = self.zip_with(o, |a, b| (a.to_f64() - b.to_f64()).max(0.0));
        d.max_value()
    }

    /// `sup |f - g|`.
    pub fn sup_dist(&self, o: &Self) -> f64 {
        self.zip_with(o, |a, b| (a.to_f64() - b.to_f64()).abs()).max_value()
    }

    pub fn to_f64(&self) -> StepFunction {
        self.map(|v| v.to_f64())
    }

    /// True when every breakpoint lies on the level-`level` triadic grid.
    pub fn is_measurable(&self, level: u32) -> bool {
        let n = Q::from_integer(rat::grid_size(level));
        self.bps.iter().all(|b| (b * &n).is_integer())
    }

    /// Pushforward under the affine map `(0,1] → (a,b]`, `0` outside `(a,b]`.
    pub fn into_window(&self, a: &Q, b: &Q) -> Self {
        let w = b - a;
        let mut segs = Vec::with_capacity(self.bps.len());
        for p in self.pieces() {
            segs.push((a + p.lo * &w, a + p.hi * &w, p.value.clone()));
        }
        Self::from_segments(segs, V::zero_v())
    }
}

impl Step<f64> {
    /// Conditional L2 norm `(E(f² | F_level))^(1/2)` over the triadic grid of
    /// mesh `3^(-2^level)`. Only atoms cut by a breakpoint are averaged; all
    /// other atoms inherit the piece value, so the grid is never materialized.
    pub fn cond_norm(&self, level: u32) -> Result<Self, Error> {
        if self.vals.iter().any(|v| *v < 0.0) {
            return Err(Error::Domain("conditional norm takes non-negative functions".into()));
        }
        let n = rat::grid_size(level);
        let nq = Q::from_integer(n.clone());
        let len = rat::atom_len(level);

        let mut mixed: Vec<num::BigInt> = Vec::new();
        for b in &self.bps[..self.bps.len() - 1] {
            let x = b * &nq;
            if !x.is_integer() {
                let m = rat::floor(&x);
                if mixed.last() != Some(&m) {
                    mixed.push(m);
                }
            }
        }
        if mixed.is_empty() {
            return Ok(self.clone());
        }

        let mut bps: Vec<Q> = Vec::with_capacity(self.bps.len() + 2 * mixed.len());
        let mut vals = Vec::with_capacity(bps.capacity());
        let mut k = 0usize; // first piece whose right end exceeds `last`
        let mut last = Q::zero();
        for m in mixed {
            let a = Q::from_integer(m) * &len;
            let b = &a + &len;
            while self.bps[k] <= a {
                bps.push(self.bps[k].clone());
                vals.push(self.vals[k]);
                k += 1;
            }
            if a > last && bps.last() != Some(&a) {
                bps.push(a.clone());
                vals.push(self.vals[k]);
            }
            let mut acc = 0.0;
            let mut lo = a;
            loop {
                let end = &self.bps[k];
                let hi = if *end < b { end.clone() } else { b.clone() };
                let v = self.vals[k];
                acc += v * v * rat::to_f64(&((&hi - &lo) * &nq));
                lo = hi;
                if *end < b {
                    k += 1;
                } else {
                    if *end == b {
                        k += 1;
                    }
                    break;
                }
            }
            bps.push(b.clone());
            vals.push(acc.max(0.0).sqrt());
            last = b;
        }
        while k < self.bps.len() {
            if self.bps[k] > last {
                bps.push(self.bps[k].clone());
                vals.push(self.vals[k]);
            }
            k += 1;
        }
        Ok(Self::canonical(bps, vals))
    }

    pub fn has_nonfinite(&self) -> bool {
        self.vals.iter().any(|v| !v.is_finite())
    }
}

/// Serialized form: `{"breakpoints": ["1/3","1"], "values": [1.0, 2.0]}`.
#[derive(Serialize, Deserialize)]
struct StepJson {
    #[serde(serialize_with = "rat::ser_vec", deserialize_with = "rat::de_vec")]
    breakpoints: Vec<Q>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ExactStepJson {
    #[serde(serialize_with = "rat::ser_vec", deserialize_with = "rat::de_vec")]
    breakpoints: Vec<Q>,
    #[serde(serialize_with = "rat::ser_vec", deserialize_with = "rat::de_vec")]
    values: Vec<Q>,
}

impl Serialize for Step<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StepJson {
            breakpoints: self.bps.clone(),
            values: self.vals.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Step<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = StepJson::deserialize(d)?;
        Step::new(j.breakpoints, j.values).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Step<Q> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ExactStepJson {
            breakpoints: self.bps.clone(),
            values: self.vals.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Step<Q> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = ExactStepJson::deserialize(d)?;
        Step::new(j.breakpoints, j.values).map_err(serde::de::Error::custom)
    }
}

/// `true` when `x` is non-negative in the exact field.
pub fn q_nonneg(x: &Q) -> bool {
    !x.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{q, qi};

    fn two_piece() -> StepFunction {
        Step::new(vec![q(1, 3), qi(1)], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn eval_uses_left_open_pieces() {
        let f = two_piece();
        assert_eq!(StepFunction::constant(1.0).eval(&q(1, 2)).unwrap(), 1.0);
        assert_eq!(f.eval(&q(1, 3)).unwrap(), 1.0);
        assert_eq!(f.eval(&q(34, 100)).unwrap(), 2.0);
        assert!(f.eval(&qi(0)).is_err());
        assert!(f.eval(&q(3, 2)).is_err());
    }

    #[test]
    fn slices_of_a_constant() {
        let f = StepFunction::constant(5.0);
        assert_eq!(f.clip_min(&2.0), StepFunction::constant(2.0));
        let f1 = f.clip_min(&4.0).sub(&f.clip_min(&2.0));
        assert_eq!(f1, StepFunction::constant(2.0));
        let up = f.sub(&f.clip_min(&2.0));
        assert_eq!(up, StepFunction::constant(3.0));
        let down = f.clip_min(&2.0);
        let mid = f.clip_min(&4.0).sub(&f.clip_min(&2.0));
        let top = f.sub(&f.clip_min(&4.0));
        assert_eq!(down.add(&mid).add(&top), f);
    }

    #[test]
    fn l2_norms() {
        assert_eq!(StepFunction::constant(-3.0).l2_norm(), 3.0);
        assert!((two_piece().l2_norm() - 3f64.sqrt()).abs() < 1e-12);
        let ind = StepFunction::indicator(&qi(0), &q(1, 9));
        assert!((ind.l2_norm() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_merges_equal_neighbours() {
        let f = Step::new(vec![q(1, 3), q(2, 3), qi(1)], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(f.num_pieces(), 2);
        let g = f.sub(&f);
        assert_eq!(g, StepFunction::zero());
    }

    #[test]
    fn cond_norm_examples() {
        let f = two_piece();
        assert_eq!(f.cond_norm(0).unwrap(), f);
        let ind = StepFunction::indicator(&qi(0), &q(1, 6));
        let c = ind.cond_norm(0).unwrap();
        let want = StepFunction::indicator_scaled(&qi(0), &q(1, 3), 0.5f64.sqrt());
        assert!(c.sup_dist(&want) < 1e-15);
        assert!(StepFunction::constant(-1.0).cond_norm(0).is_err());
    }

    #[test]
    fn cond_norm_on_a_deep_level_stays_sparse() {
        let t = Q::new(1.into(), rat::pow3(40)) * qi(7);
        let f = Step::new(vec![t.clone(), qi(1)], vec![2.0, 0.0]).unwrap();
        let c = f.cond_norm(5).unwrap();
        assert_eq!(c.num_pieces(), 2);
        assert!((c.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm().max(1e-30));
    }

    #[test]
    fn json_round_trip() {
        let f = two_piece();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"breakpoints":["1/3","1"],"values":[1.0,2.0]}"#);
        let g: StepFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn window_pushforward_preserves_shape() {
        let f = two_piece();
        let g = f.into_window(&q(1, 3), &q(2, 3));
        assert_eq!(g.eval(&q(4, 9)).unwrap(), 1.0);
        assert_eq!(g.eval(&q(5, 9)).unwrap(), 2.0);
        assert_eq!(g.eval(&q(5, 6)).unwrap(), 0.0);
    }
}
