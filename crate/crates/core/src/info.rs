//! Coefficient sequences, tail sets `B` and information functions.

use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::rat::{self, Q};
use crate::stepfn::{Step, StepFunction};
use crate::{Error, Result};

/// Finite coefficient sequence `(a_n)`, `n = 1..N`.
///
/// Squares are kept exactly; the signed magnitudes as `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSeq {
    a: Vec<f64>,
    squares: Vec<Q>,
}

impl CoefficientSeq {
    pub fn from_f64(a: &[f64]) -> Result<Self> {
        let mut squares = Vec::with_capacity(a.len());
        for (i, x) in a.iter().enumerate() {
            let xq = Q::from_float(*x)
                .ok_or_else(|| Error::Parse(format!("coefficient {} is not finite", i + 1)))?;
            squares.push(&xq * &xq);
        }
        Ok(CoefficientSeq { a: a.to_vec(), squares })
    }

    pub fn from_rationals(a: &[Q]) -> Self {
        CoefficientSeq {
            a: a.iter().map(rat::to_f64).collect(),
            squares: a.iter().map(|x| x * x).collect(),
        }
    }

    /// Sequence given by its squares `|a_n|²` (magnitudes taken non-negative).
    pub fn from_squares(sq: &[Q]) -> Result<Self> {
        if sq.iter().any(|s| s.is_negative()) {
            return Err(Error::Invalid("squares must be non-negative".into()));
        }
        Ok(CoefficientSeq {
            a: sq.iter().map(|s| rat::to_f64(s).sqrt()).collect(),
            squares: sq.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn squares(&self) -> &[Q] {
        &self.squares
    }

    pub fn total(&self) -> Q {
        self.squares.iter().fold(Q::zero(), |acc, s| acc + s)
    }

    pub fn is_normalized(&self) -> bool {
        self.total() == Q::one()
    }

    /// Rescales so that `Σ a_n² = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.total();
        if t.is_zero() {
            return Err(Error::Invalid("all coefficients vanish".into()));
        }
        let s = rat::to_f64(&t).sqrt();
        Ok(CoefficientSeq {
            a: self.a.iter().map(|x| x / s).collect(),
            squares: self.squares.iter().map(|x| x / &t).collect(),
        })
    }

    /// Sequence with entries reordered by `perm` (`out[k] = self[perm[k]]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        CoefficientSeq {
            a: perm.iter().map(|&k| self.a[k]).collect(),
            squares: perm.iter().map(|&k| self.squares[k].clone()).collect(),
        }
    }
}

/// Parses a coefficient file: a JSON array of numbers / rational strings, or
/// one value per line (`#` comments and blank lines skipped).
pub fn parse_coefficients(text: &str) -> Result<CoefficientSeq> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty coefficient input".into()));
    }
    if t.starts_with('[') {
        let raw: Vec<serde_json::Value> =
            serde_json::from_str(t).map_err(|e| Error::Parse(format!("line {}: {e}", e.line())))?;
        let mut qs = Vec::with_capacity(raw.len());
        for (i, v) in raw.iter().enumerate() {
            let x = match v {
                serde_json::Value::String(s) => rat::parse(s),
                serde_json::Value::Number(n) => rat::parse(&n.to_string()),
                _ => Err(Error::Parse(String::new())),
            }
            .map_err(|_| Error::Parse(format!("entry {}: not a number: {v}", i + 1)))?;
            qs.push(x);
        }
        if qs.is_empty() {
            return Err(Error::Parse("empty coefficient list".into()));
        }
        return Ok(CoefficientSeq::from_rationals(&qs));
    }
    let mut qs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let field = l.split(',').next().unwrap_or("").trim();
        let x = rat::parse(field).map_err(|_| Error::Parse(format!("line {}: not a number: {l:?}", i + 1)))?;
        qs.push(x);
    }
    if qs.is_empty() {
        return Err(Error::Parse("no coefficients found".into()));
    }
    Ok(CoefficientSeq::from_rationals(&qs))
}

/// Finite subset of `[0, 1]` containing `0` and `1`, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct PointSet {
    points: Vec<Q>,
}

impl TryFrom<Vec<String>> for PointSet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        let pts = v.iter().map(|s| rat::parse(s)).collect::<Result<Vec<_>>>()?;
        PointSet::new(pts)
    }
}

impl From<PointSet> for Vec<String> {
    fn from(p: PointSet) -> Self {
        p.points.iter().map(rat::fmt).collect()
    }
}

impl PointSet {
    /// Sorts, dedups and checks `{0, 1} ⊆ points ⊆ [0, 1]`.
    pub fn new(mut points: Vec<Q>) -> Result<Self> {
        points.sort();
        points.dedup();
        if points.first() != Some(&Q::zero()) || points.last() != Some(&Q::one()) {
            return Err(Error::Invalid("point set must contain 0 and 1 and lie in [0,1]".into()));
        }
        Ok(PointSet { points })
    }

    /// Like [`PointSet::new`] but adds the endpoints.
    pub fn with_endpoints(mut points: Vec<Q>) -> Result<Self> {
        points.push(Q::zero());
        points.push(Q::one());
        PointSet::new(points)
    }

    pub fn unit() -> Self {
        PointSet {
            points: vec![Q::zero(), Q::one()],
        }
    }

    pub fn points(&self) -> &[Q] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, t: &Q) -> bool {
        self.points.binary_search(t).is_ok()
    }

    /// Consecutive pairs `(α, β)`.
    pub fn gaps(&self) -> impl Iterator<Item = (&Q, &Q)> + '_ {
        self.points.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn union(&self, o: &PointSet) -> PointSet {
        let mut v = self.points.clone();
        v.extend(o.points.iter().cloned());
        PointSet::new(v).expect("union of point sets")
    }

    pub fn is_subset(&self, o: &PointSet) -> bool {
        self.points.iter().all(|p| o.contains(p))
    }

    /// `B ∩ [a, b]` together with `{0, 1}`.
    pub fn restrict(&self, a: &Q, b: &Q) -> PointSet {
        let v = self.points.iter().filter(|p| *p >= a && *p <= b).cloned().collect();
        PointSet::with_endpoints(v).expect("restricted point set")
    }

    /// Distance `ρ(t, B) = min_{s∈B} |s - t|`.
    pub fn dist(&self, t: &Q) -> Q {
        let k = self.points.partition_point(|p| p < t);
        let mut best: Option<Q> = None;
        for i in [k.wrapping_sub(1), k] {
            if let Some(p) = self.points.get(i) {
                let d = (p - t).abs();
                if best.as_ref().is_none_or(|b| d < *b) {
                    best = Some(d);
                }
            }
        }
        best.expect("non-empty point set")
    }

    /// `ρ(t, B \ {t})`.
    pub fn dist_excluding(&self, t: &Q) -> Option<Q> {
        let k = self.points.partition_point(|p| p < t);
        let after = if self.points.get(k) == Some(t) { k + 1 } else { k };
        let mut best: Option<Q> = None;
        for i in [k.wrapping_sub(1), after] {
            if let Some(p) = self.points.get(i) {
                let d = (p - t).abs();
                if best.as_ref().is_none_or(|b| d < *b) {
                    best = Some(d);
                }
            }
        }
        best
    }
}

/// Tail set `B = {Σ_{m≥n} |a_m|²} ∪ {0}` after normalization.
pub fn tail_set(seq: &CoefficientSeq) -> Result<PointSet> {
    if seq.is_empty() {
        return Err(Error::Invalid("empty coefficient sequence".into()));
    }
    let total = seq.total();
    if total.is_zero() {
        return Err(Error::Invalid("all coefficients vanish".into()));
    }
    let mut pts = Vec::with_capacity(seq.len() + 1);
    let mut acc = Q::zero();
    pts.push(acc.clone());
    for s in seq.squares().iter().rev() {
        acc += s;
        pts.push(&acc / &total);
    }
    PointSet::new(pts)
}

/// `-log_base(β - α)` on every gap `(α, β]` of `B` (base 3: `h_B`; base 2: `I_B`).
pub fn info_fn(b: &PointSet, base: u32) -> StepFunction {
    let mut bps = Vec::with_capacity(b.len());
    let mut vals = Vec::with_capacity(b.len());
    for (lo, hi) in b.gaps() {
        bps.push(hi.clone());
        vals.push(rat::neg_log(&(hi - lo), base));
    }
    Step::new(bps, vals).expect("gaps of a point set")
}

/// Closed sets given either explicitly or by a generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClosedSet {
    Finite { points: PointSet },
    Cantor { depth: u32 },
}

pub const MAX_CANTOR_DEPTH: u32 = 20;

impl ClosedSet {
    pub fn contains(&self, t: &Q) -> bool {
        match self {
            ClosedSet::Finite { points } => points.contains(t),
            ClosedSet::Cantor { .. } => in_cantor(t),
        }
    }
}

/// Membership in the full Cantor set for a rational point.
pub fn in_cantor(t: &Q) -> bool {
    if *t < Q::zero() || *t > Q::one() {
        return false;
    }
    // The ternary expansion of a rational is eventually periodic; track the
    // remainders until one repeats.
    let three = BigInt::from(3);
    let mut x = t.clone();
    let mut seen = std::collections::HashSet::new();
    loop {
        if x.is_zero() || x.is_one() {
            return true;
        }
        if !seen.insert(x.clone()) {
            return true;
        }
        let y = &x * Q::from_integer(three.clone());
        let d = rat::floor(&y);
        let frac = &y - Q::from_integer(d.clone());
        if d == BigInt::one() {
            // digit 1 allowed only as the terminal 1 = 0.0222...
            return frac.is_zero();
        }
        x = frac;
    }
}

/// Intervals `[lo, hi]` left after `depth` middle-third removals.
pub fn cantor_intervals(depth: u32) -> Vec<(Q, Q)> {
    let mut cur = vec![(Q::zero(), Q::one())];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(cur.len() * 2);
        for (a, b) in cur {
            let third = (&b - &a) / Q::from_integer(3.into());
            next.push((a.clone(), &a + &third));
            next.push((&b - &third, b));
        }
        cur = next;
    }
    cur
}

/// `H_B ∧ clip`, with `H_B = +∞` on `B` (a null set for the sets used here).
///
/// For the Cantor generator this is exact as long as `clip <= depth + 1`,
/// since every point not removed by step `depth` has `H_C >= depth + 1`.
pub fn info_fn_closed(set: &ClosedSet, clip: f64) -> Result<StepFunction> {
    match set {
        ClosedSet::Finite { points } => Ok(info_fn(points, 3).clip_min(&clip)),
        ClosedSet::Cantor { depth } => {
            let d = *depth;
            if d > MAX_CANTOR_DEPTH {
                return Err(Error::Budget(format!("Cantor depth {d} > {MAX_CANTOR_DEPTH}")));
            }
            if clip > (d + 1) as f64 {
                return Err(Error::Precondition(format!(
                    "clip {clip} needs depth >= {} to be exact",
                    (clip - 1.0).ceil()
                )));
            }
            let kept = cantor_intervals(d);
            let mut segs = Vec::with_capacity(2 * kept.len());
            // Gap between consecutive kept intervals has length 3^-m for the
            // step m at which it was removed.
            for (k, (a, b)) in kept.iter().enumerate() {
                segs.push((a.clone(), b.clone(), clip));
                if let Some((na, _)) = kept.get(k + 1) {
                    let len = na - b;
                    let m = rat::exact_neg_log(&len, 3).expect("Cantor gap length") as f64;
                    segs.push((b.clone(), na.clone(), m.min(clip)));
                }
            }
            Ok(Step::from_segments(segs, clip))
        }
    }
}

/// `2^j` for `2^j <= a < 2^(j+1)`; requires `a >= 1`.
pub fn dyadic_floor_value(a: f64) -> Result<f64> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::Domain(format!("dyadic floor needs a >= 1, got {a}")));
    }
    let mut e = a.log2().floor() as i32;
    while 2f64.powi(e + 1) <= a {
        e += 1;
    }
    while 2f64.powi(e) > a {
        e -= 1;
    }
    Ok(2f64.powi(e))
}

/// Underline: piecewise `2^j` for `2^j <= f < 2^(j+1)`.
pub fn dyadic_floor(f: &StepFunction) -> Result<StepFunction> {
    check_ge_one(f)?;
    Ok(f.map(|v| dyadic_floor_value(*v).expect("checked")))
}

/// Double underline: piecewise `2^(j-1)` for `2^j <= f < 2^(j+1)`.
pub fn dyadic_halffloor(f: &StepFunction) -> Result<StepFunction> {
    check_ge_one(f)?;
    Ok(f.map(|v| dyadic_floor_value(*v).expect("checked") / 2.0))
}

fn check_ge_one(f: &StepFunction) -> Result<()> {
    if f.min_value() < 1.0 {
        return Err(Error::Domain("dyadic rounding is defined for values >= 1".into()));
    }
    Ok(())
}

/// `max(h, 1)` plus whether any value was raised.
pub fn clip_below_one(h: &StepFunction) -> (StepFunction, bool) {
    let raised = h.min_value() < 1.0;
    (h.clip_max(&1.0), raised)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriadicCheck {
    pub ok: bool,
    /// Violating `(j, n)`: atom `δ_n^j` meets `(h >= 2^j)` without lying inside it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<(u32, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Whether `h >= 1` is triadic: every `(h >= 2^j)` is a union of level-`j` atoms.
pub fn is_triadic_fn(h: &StepFunction) -> TriadicCheck {
    if h.min_value() < 1.0 {
        return TriadicCheck {
            ok: false,
            witness: None,
            reason: Some("h < 1 somewhere".into()),
        };
    }
    let top = h.max_value();
    let mut j = 0u32;
    while 2f64.powi(j as i32) <= top {
        if let Some(n) = level_set_violation(h, j) {
            return TriadicCheck {
                ok: false,
                witness: Some((j, n.to_string())),
                reason: None,
            };
        }
        j += 1;
    }
    TriadicCheck {
        ok: true,
        witness: None,
        reason: None,
    }
}

/// First atom of level `j` cut by the boundary of `(h >= 2^j)`.
fn level_set_violation(h: &StepFunction, j: u32) -> Option<BigInt> {
    let thr = 2f64.powi(j as i32);
    let nq = Q::from_integer(rat::grid_size(j));
    let vals = h.values();
    let bps = h.breakpoints();
    for k in 0..vals.len() - 1 {
        if (vals[k] >= thr) != (vals[k + 1] >= thr) {
            let x = &bps[k] * &nq;
            if !x.is_integer() {
                return Some(rat::floor(&x));
            }
        }
    }
    None
}

/// Maximal run of level-`(j+1)` sub-atoms of one `δ_m^j` sharing the excess
/// `a = h - 2^(j+1)`: the atoms `δ^(j+1)_n` for `n` in `first..first+count`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcessRun {
    #[serde(serialize_with = "ser_bigint")]
    pub first: BigInt,
    pub count: u128,
    pub a: f64,
}

pub(crate) fn ser_bigint<S: serde::Serializer>(x: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// The representation `(h - 2^j) 1_{δ_m^j} = Σ_k (2^j + a_k) 1_{δ^(j+1)_{n(k)}}`
/// in run-length form, keyed by `m`; atoms with no excess are omitted.
pub type Representation = BTreeMap<BigInt, Vec<ExcessRun>>;

#[derive(Clone, Debug)]
pub struct TypeCheck {
    pub ok: bool,
    pub reason: Option<String>,
    pub representation: Representation,
}

/// Membership in `T_j`: triadic, constant on every `δ^(j+1)_n`, and every value
/// below `2^(j+1)` equal to some `2^(j')` with `j' <= j`.
pub fn is_type_j(h: &StepFunction, j: u32) -> TypeCheck {
    let fail = |r: String| TypeCheck {
        ok: false,
        reason: Some(r),
        representation: BTreeMap::new(),
    };
    let tri = is_triadic_fn(h);
    if !tri.ok {
        return fail(format!("not triadic: {:?} {:?}", tri.witness, tri.reason));
    }
    if !h.is_measurable(j + 1) {
        return fail(format!("not constant on level-{} atoms", j + 1));
    }
    let hi = 2f64.powi(j as i32 + 1);
    for v in h.values() {
        if *v < hi {
            let p = v.log2();
            if p.fract() != 0.0 || p < 0.0 || 2f64.powi(p as i32) != *v {
                return fail(format!("value {v} below 2^{} is not a power of two", j + 1));
            }
        }
    }
    match representation(h, j) {
        Ok(rep) => TypeCheck {
            ok: true,
            reason: None,
            representation: rep,
        },
        Err(e) => fail(e.to_string()),
    }
}

/// Run-length representation of the excess of a type-`j` function.
pub fn representation(h: &StepFunction, j: u32) -> Result<Representation> {
    let hi = 2f64.powi(j as i32 + 1);
    let fine = Q::from_integer(rat::grid_size(j + 1));
    let per = rat::grid_size(j); // sub-atoms per level-j atom
    let mut rep: Representation = BTreeMap::new();
    for p in h.pieces() {
        if *p.value < hi {
            continue;
        }
        let mut n0 = (p.lo * &fine).to_integer();
        let n1 = (p.hi * &fine).to_integer();
        while n0 < n1 {
            let m = &n0 / &per;
            let m_end = (&m + BigInt::one()) * &per;
            let stop = if m_end < n1 { m_end } else { n1.clone() };
            let count = (&stop - &n0)
                .to_u128()
                .ok_or_else(|| Error::Budget("run length exceeds u128".into()))?;
            rep.entry(m).or_default().push(ExcessRun {
                first: n0.clone(),
                count,
                a: p.value - hi,
            });
            n0 = stop;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{q, qi};

    fn ps(v: &[(i64, i64)]) -> PointSet {
        PointSet::new(v.iter().map(|&(a, b)| q(a, b)).collect()).unwrap()
    }

    #[test]
    fn tail_sets() {
        let s = CoefficientSeq::from_squares(&[q(1, 3), q(1, 3), q(1, 3)]).unwrap();
        assert_eq!(tail_set(&s).unwrap(), ps(&[(0, 1), (1, 3), (2, 3), (1, 1)]));
        let s = CoefficientSeq::from_squares(&[qi(1)]).unwrap();
        assert_eq!(tail_set(&s).unwrap(), PointSet::unit());
        let s = CoefficientSeq::from_squares(&[q(1, 2), q(1, 4), q(1, 4)]).unwrap();
        assert_eq!(tail_set(&s).unwrap(), ps(&[(0, 1), (1, 4), (1, 2), (1, 1)]));
        let s = CoefficientSeq::from_squares(&[q(1, 2), qi(0), q(1, 2)]).unwrap();
        assert_eq!(tail_set(&s).unwrap().len(), 3);
        assert!(tail_set(&CoefficientSeq::from_f64(&[]).unwrap()).is_err());
    }

    #[test]
    fn information_functions() {
        assert_eq!(info_fn(&ps(&[(0, 1), (1, 3), (2, 3), (1, 1)]), 3), StepFunction::constant(1.0));
        assert_eq!(info_fn(&PointSet::unit(), 3), StepFunction::constant(0.0));
        let h = info_fn(&ps(&[(0, 1), (1, 9), (1, 1)]), 3);
        assert_eq!(h.eval(&q(1, 9)).unwrap(), 2.0);
        assert!((h.eval(&q(1, 2)).unwrap() - (2.0 - 3.0 * 2f64.ln() / 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn cantor_closed_info() {
        let h = info_fn_closed(&ClosedSet::Cantor { depth: 3 }, 4.0).unwrap();
        assert_eq!(h.eval(&q(1, 2)).unwrap(), 1.0);
        assert_eq!(h.eval(&q(1, 6)).unwrap(), 2.0);
        assert_eq!(h.eval(&q(1, 18)).unwrap(), 3.0);
        assert_eq!(h.eval(&q(1, 100)).unwrap(), 4.0);
        assert!(info_fn_closed(&ClosedSet::Cantor { depth: 3 }, 6.0).is_err());
        let b = ps(&[(0, 1), (1, 9), (1, 1)]);
        let closed = info_fn_closed(&ClosedSet::Finite { points: b.clone() }, 1e9).unwrap();
        assert_eq!(closed, info_fn(&b, 3));
        let unit = info_fn_closed(&ClosedSet::Finite { points: PointSet::unit() }, 5.0).unwrap();
        assert_eq!(unit, StepFunction::constant(0.0));
    }

    #[test]
    fn cantor_membership() {
        assert!(in_cantor(&q(1, 4)));
        assert!(in_cantor(&q(1, 3)));
        assert!(in_cantor(&qi(0)));
        assert!(!in_cantor(&q(1, 2)));
    }

    #[test]
    fn dyadic_rounding() {
        assert_eq!(dyadic_floor_value(5.0).unwrap(), 4.0);
        assert_eq!(dyadic_floor_value(8.0).unwrap(), 8.0);
        assert_eq!(dyadic_floor_value(1.0).unwrap(), 1.0);
        let f = StepFunction::constant(1.0);
        assert_eq!(dyadic_halffloor(&f).unwrap(), StepFunction::constant(0.5));
        assert_eq!(dyadic_halffloor(&StepFunction::constant(5.0)).unwrap(), StepFunction::constant(2.0));
        assert!(dyadic_floor(&StepFunction::constant(0.5)).is_err());
    }

    #[test]
    fn triadic_predicate() {
        assert!(is_triadic_fn(&StepFunction::constant(1.0)).ok);
        let h = StepFunction::indicator_scaled(&qi(0), &q(1, 6), 2.0).add(&StepFunction::constant(1.0));
        let c = is_triadic_fn(&h);
        assert!(!c.ok);
        // (h >= 2) = (0, 1/6] cuts δ_1^1 = (1/9, 2/9].
        assert_eq!(c.witness, Some((1, "1".to_string())));
    }

    #[test]
    fn type_j_predicate() {
        let r = is_type_j(&StepFunction::constant(4.0), 2);
        assert!(r.ok && r.representation.is_empty());
        let h = StepFunction::indicator_scaled(&qi(0), &q(1, 3), 2.0).add(&StepFunction::constant(1.0));
        assert!(!is_type_j(&h, 1).ok); // value 3 < 4 is not a power of two
        let h = StepFunction::indicator_scaled(&qi(0), &q(1, 9), 5.0).add(&StepFunction::constant(1.0));
        let r = is_type_j(&h, 0);
        assert!(r.ok);
        let runs = &r.representation[&BigInt::zero()];
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].count, 1);
        assert_eq!(runs[0].a, 4.0);
    }

    #[test]
    fn coefficient_parsing() {
        let s = parse_coefficients("[\"1/2\", 0.5, \"1/2\", \"1/2\"]").unwrap();
        assert!(s.is_normalized());
        let s = parse_coefficients("# header\n0.6\n0.8\n").unwrap();
        assert!(s.is_normalized());
        let e = parse_coefficients("0.6\nfoo\n").unwrap_err();
        assert!(e.to_string().contains("line 2"));
        assert!(parse_coefficients("   ").is_err());
    }

    #[test]
    fn point_set_distances() {
        let b = ps(&[(0, 1), (1, 4), (1, 1)]);
        assert_eq!(b.dist(&q(1, 3)), q(1, 12));
        assert_eq!(b.dist_excluding(&q(1, 4)), Some(q(1, 4)));
        assert_eq!(b.dist(&q(1, 4)), qi(0));
    }
}
