//! L2 vectors with external coordinates, orthogonal processes on finite point
//! sets, maximal functions and the maximal inequality layer.
//!
//! A vector is a step function on `(0, 1]` plus a sparse coefficient map on an
//! abstract orthonormal family living off `[0, 1)`. Pointwise maxima are taken
//! of the body only; constructions keep the external part away from the unit
//! interval, so it never enters a maximal function there.

use num::{One, Zero};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;

use crate::par;
use crate::rat::{self, Q};
use crate::stepfn::Step;
use crate::surd::Field;
use crate::{Error, Result};

pub type ExtId = u64;

/// Tolerance for the floating-point Gram and orthogonality checks.
pub const GRAM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OrthoVector<V: Field = f64> {
    pub body: Step<V>,
    pub ext: BTreeMap<ExtId, V>,
}

impl<V: Field> Default for OrthoVector<V> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<V: Field> OrthoVector<V> {
    pub fn zero() -> Self {
        OrthoVector {
            body: Step::zero(),
            ext: BTreeMap::new(),
        }
    }

    pub fn from_body(body: Step<V>) -> Self {
        OrthoVector {
            body,
            ext: BTreeMap::new(),
        }
    }

    /// `c · e_id`.
    pub fn ext_coord(id: ExtId, c: V) -> Self {
        let mut ext = BTreeMap::new();
        if !c.is_zero_v() {
            ext.insert(id, c);
        }
        OrthoVector {
            body: Step::zero(),
            ext,
        }
    }

    pub fn basis(id: ExtId) -> Self {
        Self::ext_coord(id, V::from_i64(1))
    }

    fn merge_ext(&self, o: &Self, f: impl Fn(&V, &V) -> V) -> BTreeMap<ExtId, V> {
        let zero = V::zero_v();
        let mut out = BTreeMap::new();
        for id in self.ext.keys().chain(o.ext.keys()) {
            if out.contains_key(id) {
                continue;
            }
            let a = self.ext.get(id).unwrap_or(&zero);
            let b = o.ext.get(id).unwrap_or(&zero);
            let v = f(a, b);
            if !v.is_zero_v() {
                out.insert(*id, v);
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        OrthoVector {
            body: self.body.add(&o.body),
            ext: self.merge_ext(o, |a, b| a.add(b)),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        OrthoVector {
            body: self.body.sub(&o.body),
            ext: self.merge_ext(o, |a, b| a.sub(b)),
        }
    }

    pub fn scale(&self, c: &V) -> Self {
        OrthoVector {
            body: self.body.scale(c),
            ext: self
                .ext
                .iter()
                .map(|(k, v)| (*k, v.mul(c)))
                .filter(|(_, v)| !v.is_zero_v())
                .collect(),
        }
    }

    pub fn inner(&self, o: &Self) -> V {
        let mut acc = self.body.inner(&o.body);
        for (id, a) in &self.ext {
            if let Some(b) = o.ext.get(id) {
                acc = acc.add(&a.mul(b));
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> V {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().to_f64().max(0.0).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.ext.is_empty() && self.body.values().iter().all(|v| v.is_zero_v())
    }

    pub fn has_body(&self) -> bool {
        !self.body.values().iter().all(|v| v.is_zero_v())
    }

    /// Largest external id in use.
    pub fn max_ext_id(&self) -> Option<ExtId> {
        self.ext.keys().next_back().copied()
    }

    /// Body pushed forward onto the window `(a, b]` and divided by `√(b-a)`,
    /// which preserves its norm. The external part is unchanged.
    pub fn rescaled_into(&self, a: &Q, b: &Q) -> Result<Self> {
        let w = b - a;
        if w <= Q::zero() {
            return Err(Error::Invalid("empty window".into()));
        }
        let c = V::sqrt_q(&w)?.inv()?;
        Ok(OrthoVector {
            body: self.body.into_window(a, b).scale(&c),
            ext: self.ext.clone(),
        })
    }

    pub fn to_f64(&self) -> OrthoVector<f64> {
        OrthoVector {
            body: self.body.to_f64(),
            ext: self.ext.iter().map(|(k, v)| (*k, v.to_f64())).collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        let ext: serde_json::Map<String, Value> = self
            .ext
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::to_value(v).unwrap_or_default()))
            .collect();
        json!({ "body": V::step_json(&self.body), "ext": ext })
    }
}

/// Normalisation of process increments: `||X(t) - X(s)||² = c · λ([s,t] ∩ D)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Scaling {
    /// `c = 1`.
    Unit,
    /// `c = 3 · 24²`.
    Simple,
    Scaled {
        #[serde(serialize_with = "rat::ser")]
        c: Q,
    },
}

impl Scaling {
    pub fn factor(&self) -> Q {
        match self {
            Scaling::Unit => Q::one(),
            Scaling::Simple => rat::qi(3 * 24 * 24),
            Scaling::Scaled { c } => c.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrthoProcess<V: Field = f64> {
    times: Vec<Q>,
    values: Vec<OrthoVector<V>>,
    scaling: Scaling,
    /// Union of closed intervals `D`; increments are measured inside it.
    domain: Vec<(Q, Q)>,
}

impl<V: Field> OrthoProcess<V> {
    pub fn new(times: Vec<Q>, values: Vec<OrthoVector<V>>, scaling: Scaling) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Invalid(format!(
                "{} times for {} vectors",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("times must be strictly increasing".into()));
        }
        let domain = vec![(times[0].clone(), times[times.len() - 1].clone())];
        Ok(OrthoProcess {
            times,
            values,
            scaling,
            domain,
        })
    }

    pub fn with_domain(mut self, mut domain: Vec<(Q, Q)>) -> Result<Self> {
        domain.sort();
        if domain.iter().any(|(a, b)| a > b) || domain.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::Invalid("domain intervals must be disjoint".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn times(&self) -> &[Q] {
        &self.times
    }

    pub fn values(&self) -> &[OrthoVector<V>] {
        &self.values
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn domain(&self) -> &[(Q, Q)] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn index_of(&self, t: &Q) -> Option<usize> {
        self.times.binary_search(t).ok()
    }

    pub fn value_at(&self, t: &Q) -> Option<&OrthoVector<V>> {
        self.index_of(t).map(|i| &self.values[i])
    }

    /// `λ([s, t] ∩ D)`.
    pub fn domain_measure(&self, s: &Q, t: &Q) -> Q {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        self.domain.iter().fold(Q::zero(), |acc, (a, b)| {
            let lo = a.max(s);
            let hi = b.min(t);
            if hi > lo {
                acc + (hi - lo)
            } else {
                acc
            }
        })
    }

    pub fn expected_sq(&self, s: &Q, t: &Q) -> Q {
        self.scaling.factor() * self.domain_measure(s, t)
    }

    /// Affine change of time from the current span onto `[a, b]`; the scaling
    /// constant absorbs the change of length.
    pub fn reparametrize(&self, a: &Q, b: &Q) -> Result<Self> {
        let t0 = &self.times[0];
        let t1 = &self.times[self.times.len() - 1];
        if t1 <= t0 || b <= a {
            return Err(Error::Invalid("degenerate time span".into()));
        }
        let r = (b - a) / (t1 - t0);
        let map = |t: &Q| a + (t - t0) * &r;
        let c = self.scaling.factor() / &r;
        Ok(OrthoProcess {
            times: self.times.iter().map(map).collect(),
            values: self.values.clone(),
            scaling: if c.is_one() {
                Scaling::Unit
            } else {
                Scaling::Scaled { c }
            },
            domain: self.domain.iter().map(|(x, y)| (map(x), map(y))).collect(),
        })
    }

    /// Every value multiplied by `c`, with a new normalisation.
    pub fn scaled(&self, c: &V, scaling: Scaling) -> Self {
        OrthoProcess {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v.scale(c)).collect(),
            scaling,
            domain: self.domain.clone(),
        }
    }

    pub fn to_f64(&self) -> OrthoProcess<f64> {
        OrthoProcess {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v.to_f64()).collect(),
            scaling: self.scaling.clone(),
            domain: self.domain.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "scaling": self.scaling,
            "domain": self.domain.iter().map(|(a, b)| [rat::fmt(a), rat::fmt(b)]).collect::<Vec<_>>(),
            "exact": V::EXACT,
            "points": self.times.iter().zip(&self.values).map(|(t, v)| {
                json!({ "t": rat::fmt(t), "value": v.to_json() })
            }).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GramReport {
    pub pairs: usize,
    pub max_deviation: f64,
    /// Every deviation is exactly zero (exact mode only).
    pub exact_zero: bool,
    pub worst_pair: Option<(String, String)>,
    pub starts_at_zero: bool,
    pub ok: bool,
}

/// `max |‖X(t) − X(s)‖² − c·λ([s,t] ∩ D)|` over all pairs of times.
pub fn gram_check<V: Field>(x: &OrthoProcess<V>) -> GramReport {
    let n = x.len();
    let rows = par::map_indexed(n, |i| {
        let mut worst: Option<(f64, usize)> = None;
        let mut all_zero = true;
        for j in i + 1..n {
            let d = x.values[j].sub(&x.values[i]).norm_sq();
            let dev = d.sub(&V::from_q(&x.expected_sq(&x.times[i], &x.times[j])));
            if dev.is_zero_v() {
                continue;
            }
            all_zero = false;
            let e = dev.to_f64().abs();
            if worst.map_or(true, |(w, _)| e > w) {
                worst = Some((e, j));
            }
        }
        (worst, all_zero)
    });
    let mut max_dev = 0.0f64;
    let mut pair = None;
    let mut exact_zero = V::EXACT;
    for (i, (worst, z)) in rows.into_iter().enumerate() {
        exact_zero &= z;
        if let Some((e, j)) = worst {
            if pair.is_none() || e > max_dev {
                max_dev = e;
                pair = Some((rat::fmt(&x.times[i]), rat::fmt(&x.times[j])));
            }
        }
    }
    GramReport {
        pairs: n * n.saturating_sub(1) / 2,
        max_deviation: max_dev,
        exact_zero: exact_zero && n > 0,
        worst_pair: pair,
        starts_at_zero: x.values[0].is_zero(),
        ok: max_dev <= GRAM_TOL,
    }
}

fn select<'a, V: Field>(x: &'a OrthoProcess<V>, subset: Option<&[Q]>) -> Result<Vec<&'a OrthoVector<V>>> {
    match subset {
        None => Ok(x.values.iter().collect()),
        Some(ts) => ts
            .iter()
            .map(|t| {
                x.value_at(t)
                    .ok_or_else(|| Error::Invalid(format!("process not defined at {}", rat::fmt(t))))
            })
            .collect(),
    }
}

/// Pointwise `max_t body(X(t))`, or `max_t |body(X(t))|` with `abs`.
pub fn maximal_function<V: Field>(x: &OrthoProcess<V>, subset: Option<&[Q]>, abs: bool) -> Result<Step<V>> {
    let vs = select(x, subset)?;
    Ok(max_of_bodies(vs.iter().map(|v| &v.body), abs))
}

/// `max_t body(X(t) − X(base))` over `times` (all times when `None`), or the
/// maximum of its absolute value.
pub fn maximal_from<V: Field>(x: &OrthoProcess<V>, base: &Q, times: Option<&[Q]>, abs: bool) -> Result<Step<V>> {
    let b = x
        .value_at(base)
        .ok_or_else(|| Error::Invalid(format!("process not defined at {}", rat::fmt(base))))?;
    let vs = select(x, times)?;
    Ok(max_of_bodies(vs.iter().map(|v| v.body.sub(&b.body)).collect::<Vec<_>>().iter(), abs))
}

fn max_of_bodies<'a, V: Field>(bodies: impl Iterator<Item = &'a Step<V>>, abs: bool) -> Step<V> {
    let mut acc: Option<Step<V>> = None;
    for b in bodies {
        let b = if abs { b.abs() } else { b.clone() };
        acc = Some(match acc {
            None => b,
            Some(a) => a.max(&b),
        });
    }
    acc.unwrap_or_else(Step::zero)
}

/// `λ(f ≥ y)`, or `λ(f > y)` when `strict`.
pub fn exceedance<V: Field>(f: &Step<V>, y: &V, strict: bool) -> Q {
    f.measure_where(|v| if strict { v > y } else { v >= y })
}

/// Same as [`exceedance`], restricted to `(a, b]`.
pub fn exceedance_in<V: Field>(f: &Step<V>, a: &Q, b: &Q, y: &V, strict: bool) -> Q {
    let mut m = Q::zero();
    for p in f.pieces() {
        let lo = p.lo.max(a);
        let hi = p.hi.min(b);
        if hi > lo && (if strict { p.value > y } else { p.value >= y }) {
            m += hi - lo;
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MenshovReport {
    pub n: usize,
    pub k: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Exact value of the left side when it is available.
    pub lhs_exact: Option<String>,
    pub holds: bool,
}

fn orthogonal<V: Field>(a: &OrthoVector<V>, b: &OrthoVector<V>) -> bool {
    let ip = a.inner(b);
    if V::EXACT {
        ip.is_zero_v()
    } else {
        ip.to_f64().abs() <= GRAM_TOL * (1.0 + a.norm() * b.norm())
    }
}

/// `‖max_n |Y_1 + … + Y_n|‖² ≤ k² Σ ‖Y_n‖²` with `k = log₂ N + 1`.
///
/// External coordinates count as separate atoms of unit mass, so their
/// contribution to the left side is `Σ_id max_n |S_n[id]|²`.
pub fn menshov_bound_check<V: Field>(ys: &[OrthoVector<V>]) -> Result<MenshovReport> {
    let n = ys.len();
    if n == 0 {
        return Err(Error::Invalid("empty family".into()));
    }
    let bad = par::map_indexed(n, |i| (i + 1..n).find(|&j| !orthogonal(&ys[i], &ys[j])).map(|j| (i, j)));
    if let Some((i, j)) = bad.into_iter().flatten().next() {
        return Err(Error::Precondition(format!("vectors {i} and {j} are not orthogonal")));
    }
    let mut s = OrthoVector::<V>::zero();
    let mut body_max: Option<Step<V>> = None;
    let mut ext_max: BTreeMap<ExtId, V> = BTreeMap::new();
    let mut total = V::zero_v();
    for y in ys {
        total = total.add(&y.norm_sq());
        s = s.add(y);
        let a = s.body.abs();
        body_max = Some(match body_max {
            None => a,
            Some(m) => m.max(&a),
        });
        for (id, c) in &s.ext {
            let c = c.abs();
            let e = ext_max.entry(*id).or_insert_with(V::zero_v);
            if c > *e {
                *e = c;
            }
        }
    }
    let lhs_v = ext_max
        .values()
        .fold(body_max.unwrap_or_else(Step::zero).norm_sq(), |acc, c| acc.add(&c.mul(c)));
    let k = (n as f64).log2() + 1.0;
    let lhs = lhs_v.to_f64();
    let rhs = k * k * total.to_f64();
    Ok(MenshovReport {
        n,
        k,
        lhs,
        rhs,
        lhs_exact: V::EXACT.then(|| json_str(&lhs_v)),
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

fn json_str<V: Field>(v: &V) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub const MAX_M_GRID_LEVEL: u32 = 5;

/// Per-atom maximal functions `M_m^j = max_{t ∈ δ_m^j ∩ B} |X(t) − X(m 3^{-2^j})|`.
#[derive(Clone, Debug, PartialEq)]
pub struct MGrid<V: Field = f64> {
    pub j: u32,
    /// Atoms whose interior meets the time set; every other atom has `M = 0`.
    pub atoms: Vec<(u64, Step<V>)>,
}

impl<V: Field> MGrid<V> {
    pub fn get(&self, m: u64) -> Step<V> {
        self.atoms
            .binary_search_by_key(&m, |(k, _)| *k)
            .map(|i| self.atoms[i].1.clone())
            .unwrap_or_else(|_| Step::zero())
    }
}

pub fn m_grid<V: Field>(x: &OrthoProcess<V>, j: u32) -> Result<MGrid<V>> {
    if j > MAX_M_GRID_LEVEL {
        return Err(Error::Budget(format!("m_grid level {j} > {MAX_M_GRID_LEVEL}")));
    }
    let n = Q::from_integer(rat::grid_size(j));
    let mut interior: BTreeMap<u64, ()> = BTreeMap::new();
    for t in &x.times {
        let s = t * &n;
        if !s.is_integer() && *t > Q::zero() && *t < Q::one() {
            let m = rat::floor(&s);
            interior.insert(num::ToPrimitive::to_u64(&m).unwrap_or(u64::MAX), ());
        }
    }
    let ms: Vec<u64> = interior.into_keys().collect();
    let rows = par::map_slice(&ms, |&m| -> Result<(u64, Step<V>)> {
        let lo = rat::q(0, 1) + Q::from_integer(m.into()) / &n;
        let hi = &lo + Q::one() / &n;
        let ts: Vec<Q> = x.times.iter().filter(|t| **t >= lo && **t <= hi).cloned().collect();
        let f = maximal_from(x, &lo, Some(&ts), true).map_err(|_| {
            Error::Precondition(format!("process undefined at atom endpoint {}", rat::fmt(&lo)))
        })?;
        Ok((m, f))
    });
    Ok(MGrid {
        j,
        atoms: rows.into_iter().collect::<Result<_>>()?,
    })
}

pub const MAX_FACTORS: usize = 4;
/// Largest product grid iterated cell by cell.
pub const MAX_PRODUCT_CELLS: usize = 1 << 20;

/// Finite prefix of the glued process on `[0,1)^S`:
/// `X(t)(ω) = X_s(t)(ω_s) + Σ_{s' > s} X_{s'}(α_{s'})(ω_{s'})` for `t ∈ [α_{s+1}, α_s]`.
/// External coordinates of distinct factors are kept apart.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductProcess<V: Field = f64> {
    blocks: Vec<OrthoProcess<V>>,
    alphas: Vec<Q>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceCert {
    /// `max |⟨X_s(t), 1⟩|` over all factors and times.
    pub max_mean: f64,
    pub exact_zero: bool,
    pub starts_at_zero: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductExceedance {
    pub threshold: f64,
    #[serde(serialize_with = "rat::ser_vec")]
    pub per_block: Vec<Q>,
    /// `1 − Π(1 − p_s)`.
    #[serde(serialize_with = "rat::ser")]
    pub union_independent: Q,
    /// The same event measured cell by cell on the glued process.
    pub union_direct: Option<String>,
}

/// Glues factor processes onto `[α_{s+1}, α_s]`. Each block is moved onto its
/// interval by an affine change of time when its span differs.
pub fn glue_blocks<V: Field>(blocks: Vec<OrthoProcess<V>>, alphas: Vec<Q>) -> Result<ProductProcess<V>> {
    if blocks.is_empty() {
        return Err(Error::Invalid("no blocks".into()));
    }
    if blocks.len() > MAX_FACTORS {
        return Err(Error::Budget(format!("{} factors > {MAX_FACTORS}", blocks.len())));
    }
    if alphas.len() != blocks.len() + 1 || alphas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Invalid("need S+1 strictly decreasing cut points".into()));
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (s, b) in blocks.into_iter().enumerate() {
        let (lo, hi) = (&alphas[s + 1], &alphas[s]);
        let b = if &b.times[0] == lo && &b.times[b.len() - 1] == hi {
            b
        } else {
            b.reparametrize(lo, hi)?
        };
        if !b.values[0].is_zero() {
            return Err(Error::Precondition(format!("block {s} does not start at 0")));
        }
        out.push(b);
    }
    Ok(ProductProcess { blocks: out, alphas })
}

impl<V: Field> ProductProcess<V> {
    pub fn factors(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[OrthoProcess<V>] {
        &self.blocks
    }

    pub fn alphas(&self) -> &[Q] {
        &self.alphas
    }

    /// Block containing `t` (shared cut points belong to the block they end).
    pub fn block_of(&self, t: &Q) -> Option<usize> {
        (0..self.blocks.len()).find(|&s| t > &self.alphas[s + 1] && t <= &self.alphas[s])
    }

    /// Body value `X(t)(ω)`.
    pub fn eval(&self, t: &Q, omega: &[Q]) -> Result<V> {
        if omega.len() != self.blocks.len() {
            return Err(Error::Invalid("ω has the wrong number of coordinates".into()));
        }
        let last = self.blocks.len() - 1;
        let s = if t == &self.alphas[last + 1] {
            last
        } else {
            self.block_of(t)
                .ok_or_else(|| Error::Domain(format!("t = {} outside the blocks", rat::fmt(t))))?
        };
        let x = self.blocks[s]
            .value_at(t)
            .ok_or_else(|| Error::Invalid(format!("no value at {}", rat::fmt(t))))?;
        let mut v = x.body.eval(&omega[s])?;
        for s2 in s + 1..self.blocks.len() {
            let b = &self.blocks[s2];
            v = v.add(&b.values[b.len() - 1].body.eval(&omega[s2])?);
        }
        Ok(v)
    }

    pub fn independence(&self) -> IndependenceCert {
        let mut max_mean = 0.0f64;
        let mut exact_zero = V::EXACT;
        for b in &self.blocks {
            for v in &b.values {
                let m = v.body.integral();
                exact_zero &= m.is_zero_v();
                max_mean = max_mean.max(m.to_f64().abs());
            }
        }
        let starts_at_zero = self.blocks.iter().all(|b| b.values[0].is_zero());
        IndependenceCert {
            max_mean,
            exact_zero,
            starts_at_zero,
            ok: max_mean <= GRAM_TOL && starts_at_zero,
        }
    }

    /// `λ(max_{t ∈ block s} (X(t) − X(α_{s+1})) ≥ y for some s)`, with `> y`
    /// when `strict` and `|X(t) − X(α_{s+1})|` when `abs`.
    pub fn exceedance(&self, y: &V, strict: bool, abs: bool) -> Result<ProductExceedance> {
        let mut per_block = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let m = maximal_from(b, &b.times[0], None, abs)?;
            per_block.push(exceedance(&m, y, strict));
        }
        let miss = per_block.iter().fold(Q::one(), |acc, p| acc * (Q::one() - p));
        Ok(ProductExceedance {
            threshold: y.to_f64(),
            union_independent: Q::one() - miss,
            union_direct: self.union_direct(y, strict, abs).map(|q| rat::fmt(&q)),
            per_block,
        })
    }

    fn union_direct(&self, y: &V, strict: bool, abs: bool) -> Option<Q> {
        // per factor: common refinement of all bodies, one row of values per piece
        let mut grids: Vec<Vec<(Q, Vec<V>)>> = Vec::new();
        let mut cells = 1usize;
        for b in &self.blocks {
            let mut bps: Vec<Q> = b.values.iter().flat_map(|v| v.body.breakpoints().iter().cloned()).collect();
            bps.sort();
            bps.dedup();
            let mut lo = Q::zero();
            let mut rows = Vec::with_capacity(bps.len());
            for hi in bps {
                let vals = b.values.iter().map(|v| v.body.eval(&hi).unwrap_or_else(|_| V::zero_v())).collect();
                rows.push((&hi - &lo, vals));
                lo = hi;
            }
            cells = cells.checked_mul(rows.len())?;
            grids.push(rows);
        }
        if cells > MAX_PRODUCT_CELLS {
            return None;
        }
        let s_count = self.blocks.len();
        let mut idx = vec![0usize; s_count];
        let mut total = Q::zero();
        'cells: loop {
            // tails[s] = Σ_{s' > s} X_{s'}(α_{s'})(ω_{s'})
            let mut tails = vec![V::zero_v(); s_count + 1];
            for s in (0..s_count).rev() {
                let row = &grids[s][idx[s]].1;
                tails[s] = tails[s + 1].add(&row[row.len() - 1]);
            }
            let mut hit = false;
            for s in 0..s_count {
                let base = tails[s + 1].clone();
                for v in &grids[s][idx[s]].1 {
                    let d = v.add(&tails[s + 1]).sub(&base);
                    let d = if abs { d.abs() } else { d };
                    if if strict { &d > y } else { &d >= y } {
                        hit = true;
                        break;
                    }
                }
                if hit {
                    break;
                }
            }
            if hit {
                total += (0..s_count).fold(Q::one(), |acc, s| acc * &grids[s][idx[s]].0);
            }
            for s in 0..s_count {
                idx[s] += 1;
                if idx[s] < grids[s].len() {
                    continue 'cells;
                }
                idx[s] = 0;
            }
            break;
        }
        Some(total)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "alphas": self.alphas.iter().map(rat::fmt).collect::<Vec<_>>(),
            "blocks": self.blocks.iter().map(|b| b.to_json()).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{q, qi};
    use crate::stepfn::Scalar;
    use crate::surd::Surd;

    fn thirds(v: [i64; 3]) -> Step<Surd> {
        Step::new(
            vec![q(1, 3), q(2, 3), qi(1)],
            v.iter().map(|x| Surd::from_i64(*x)).collect(),
        )
        .unwrap()
    }

    /// `φ_n = (√3/3) e_0 + hat(x_1 − n)` and the process of its partial sums.
    pub(crate) fn phi1() -> (Vec<OrthoVector<Surd>>, OrthoProcess<Surd>) {
        let chi = Surd::scaled_sqrt(&q(1, 3), &qi(3)).unwrap();
        let bodies = [[0, 1, -1], [-1, 0, 1], [1, -1, 0]];
        let phis: Vec<_> = bodies
            .iter()
            .map(|b| OrthoVector {
                body: thirds(*b),
                ext: [(0, chi.clone())].into_iter().collect(),
            })
            .collect();
        let mut vals = vec![OrthoVector::zero()];
        for p in &phis {
            let next = vals.last().unwrap().add(p);
            vals.push(next);
        }
        let times = (0..4).map(|m| q(m, 3)).collect();
        let x = OrthoProcess::new(times, vals, Scaling::Scaled { c: qi(3) }).unwrap();
        (phis, x)
    }

    #[test]
    fn phi_process_gram_is_exact() {
        let (_, x) = phi1();
        let g = gram_check(&x);
        assert!(g.ok && g.exact_zero && g.starts_at_zero, "{g:?}");
    }

    #[test]
    fn gram_single_point_and_corruption() {
        let x = OrthoProcess::<f64>::new(vec![qi(0)], vec![OrthoVector::zero()], Scaling::Unit).unwrap();
        assert_eq!(gram_check(&x).max_deviation, 0.0);
        let (_, x) = phi1();
        let mut vals = x.values().to_vec();
        vals[2] = vals[2].add(&OrthoVector::basis(9));
        let bad = OrthoProcess::new(x.times().to_vec(), vals, x.scaling().clone()).unwrap();
        let g = gram_check(&bad);
        assert!(!g.ok && g.max_deviation > 0.5 && g.worst_pair.is_some());
    }

    #[test]
    fn maximal_of_phi_partial_sums() {
        let (_, x) = phi1();
        let m = maximal_function(&x, None, false).unwrap();
        assert_eq!(m, thirds([0, 1, 0]));
        assert_eq!(exceedance(&m, &Surd::from_i64(1), false), q(1, 3));
        let z = OrthoProcess::<f64>::new(vec![qi(0), qi(1)], vec![OrthoVector::zero(); 2], Scaling::Unit).unwrap();
        assert_eq!(maximal_function(&z, None, true).unwrap(), Step::zero());
    }

    #[test]
    fn menshov_examples() {
        let one = OrthoVector::<Surd>::from_body(Step::constant(Surd::from_i64(1)));
        let r = menshov_bound_check(std::slice::from_ref(&one)).unwrap();
        assert_eq!((r.lhs, r.rhs, r.k), (1.0, 1.0, 1.0));
        assert!(r.holds);
        let haar = OrthoVector::from_body(
            Step::new(vec![q(1, 2), qi(1)], vec![Surd::from_i64(1), Surd::from_i64(-1)]).unwrap(),
        );
        let r = menshov_bound_check(&[one.clone(), haar]).unwrap();
        assert_eq!(r.lhs_exact.as_deref(), Some("5/2"));
        assert_eq!(r.rhs, 8.0);
        assert!(r.holds && r.lhs < r.rhs);
        assert!(menshov_bound_check(&[one.clone(), one]).is_err());
        let (phis, _) = phi1();
        assert!(menshov_bound_check(&phis).unwrap().holds);
    }

    #[test]
    fn m_grid_conventions() {
        let (_, x) = phi1();
        // level 0 atoms are the thirds; no time lies inside one
        assert!(m_grid(&x, 0).unwrap().atoms.is_empty());
        let t = vec![qi(0), q(1, 9), q(1, 3), qi(1)];
        let c = OrthoVector::<f64>::from_body(Step::constant(1.0));
        let vals = vec![OrthoVector::zero(), c.clone(), c.clone(), c];
        let p = OrthoProcess::new(t, vals, Scaling::Unit).unwrap();
        let g = m_grid(&p, 0).unwrap();
        assert_eq!(g.atoms.len(), 1);
        assert_eq!(g.get(0), Step::constant(1.0));
        assert_eq!(g.get(2), Step::zero());
        let t = vec![qi(0), q(1, 9), q(2, 9)];
        let p = OrthoProcess::new(t, vec![OrthoVector::<f64>::zero(); 3], Scaling::Unit).unwrap();
        assert!(m_grid(&p, 1).unwrap().atoms.is_empty());
    }

    #[test]
    fn glue_examples() {
        let (_, x) = phi1();
        assert!(glue_blocks::<Surd>(vec![], vec![qi(1)]).is_err());
        let one = glue_blocks(vec![x.clone()], vec![qi(1), qi(0)]).unwrap();
        let e = one.exceedance(&Surd::from_i64(1), false, false).unwrap();
        assert_eq!(e.per_block, vec![q(1, 3)]);
        assert_eq!(e.union_direct.as_deref(), Some("1/3"));
        let two = glue_blocks(vec![x.clone(), x], vec![qi(1), q(1, 2), qi(0)]).unwrap();
        let e = two.exceedance(&Surd::from_i64(1), false, false).unwrap();
        assert_eq!(e.union_independent, q(5, 9));
        assert_eq!(e.union_direct.as_deref(), Some("5/9"));
        assert!(two.independence().ok && two.independence().exact_zero);
        // ω = (second third, first third): block 1 sits on top of block 2's endpoint
        let v = two.eval(&q(2, 3), &[q(1, 2), q(1, 6)]).unwrap();
        assert_eq!(v, Surd::from_i64(1));
    }

    #[test]
    fn rescaling_keeps_norms() {
        let (phis, _) = phi1();
        let r = phis[1].rescaled_into(&q(1, 2), &qi(1)).unwrap();
        assert_eq!(r.norm_sq(), phis[1].norm_sq());
        assert_eq!(r.body.eval(&q(1, 4)).unwrap(), Surd::zero());
    }
}
