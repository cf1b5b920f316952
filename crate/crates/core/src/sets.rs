//! Triadic sets, generated sets, interval shift maps and the local
//! continuity analyzer.

use num::{BigInt, One, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::BTreeSet;

use crate::info::{self, ClosedSet, PointSet};
use crate::rat::{self, Q};
use crate::stepfn::{ExactStep, Step, StepFunction};
use crate::vcalc;
use crate::{Error, Result};

/// Level of a grid point: smallest `i` with `t · 3^(2^i)` integral (`0` and
/// `1` count as level 0). `None` when `t` lies on no triadic grid.
pub fn grid_level(t: &Q) -> Option<u32> {
    let d = t.denom();
    if d.is_one() {
        return Some(0);
    }
    let e = rat::exact_neg_log(&Q::new(BigInt::one(), d.clone()), 3)?;
    let mut i = 0u32;
    while (1u64 << i) < e {
        i += 1;
    }
    Some(i)
}

fn base_points() -> Vec<Q> {
    vec![Q::zero(), rat::q(1, 3), rat::q(2, 3), Q::one()]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetViolation {
    MissingBase { point: String },
    NotGridPoint { point: String },
    Unpaired { point: String },
    MissingEndpoints { level: u32, n: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriadicSetCheck {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<SetViolation>,
}

/// Whether `B` is a triadic set: contains `{0, 1/3, 2/3, 1}`, is a union of
/// atom endpoint pairs, and contains both endpoints of every open atom it meets.
pub fn is_triadic_set(b: &PointSet) -> TriadicSetCheck {
    let fail = |w| TriadicSetCheck { ok: false, witness: Some(w) };
    for p in base_points() {
        if !b.contains(&p) {
            return fail(SetViolation::MissingBase { point: rat::fmt(&p) });
        }
    }
    let mut levels = Vec::with_capacity(b.len());
    for t in b.points() {
        match grid_level(t) {
            Some(l) => levels.push(l),
            None => return fail(SetViolation::NotGridPoint { point: rat::fmt(t) }),
        }
    }
    let top = levels.iter().copied().max().unwrap_or(0);
    for i in 0..=top {
        let n = Q::from_integer(rat::grid_size(i));
        let len = rat::atom_len(i);
        for (t, &l) in b.points().iter().zip(&levels) {
            if l <= i {
                continue;
            }
            let k = rat::floor(&(t * &n));
            let lo = Q::from_integer(k.clone()) / &n;
            if !b.contains(&lo) || !b.contains(&(&lo + &len)) {
                return fail(SetViolation::MissingEndpoints {
                    level: i,
                    n: k.to_string(),
                });
            }
        }
    }
    for (t, &l) in b.points().iter().zip(&levels) {
        let paired = (l..=top.max(l)).any(|i| {
            let len = rat::atom_len(i);
            b.contains(&(t - &len)) || b.contains(&(t + &len))
        });
        if !paired {
            return fail(SetViolation::Unpaired { point: rat::fmt(t) });
        }
    }
    TriadicSetCheck { ok: true, witness: None }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratedSet {
    pub base: PointSet,
    pub generated: PointSet,
    /// Pairs `(i, n)` contributing `{n 3^(-2^i), (n+1) 3^(-2^i)}`.
    pub pairs: Vec<(u32, String)>,
    pub triadic: bool,
}

/// Largest level `i >= 1` with `3^(-2^(i-1)) >= d`, or 0 when there is none.
fn max_level_for(d: &Q) -> u32 {
    let mut i = 0u32;
    while Q::new(BigInt::one(), rat::pow3(1u64 << i)) >= *d {
        i += 1;
    }
    i
}

/// The set generated by `A`: the base points plus both endpoints of every
/// atom `δ_n^i` (`i >= 1`) holding some `t ∈ A` with `ρ(t, A \ {t}) <= 3^(-2^(i-1))`.
pub fn generate(a: &PointSet) -> GeneratedSet {
    let mut pairs: BTreeSet<(u32, BigInt)> = BTreeSet::new();
    for t in a.points() {
        if t.is_zero() {
            continue;
        }
        let Some(d) = a.dist_excluding(t) else { continue };
        for i in 1..=max_level_for(&d) {
            let n = rat::ceil(&(t * Q::from_integer(rat::grid_size(i)))) - BigInt::one();
            pairs.insert((i, n));
        }
    }
    let mut pts = base_points();
    for (i, n) in &pairs {
        let len = rat::atom_len(*i);
        let lo = Q::from_integer(n.clone()) * &len;
        pts.push(&lo + &len);
        pts.push(lo);
    }
    let generated = PointSet::new(pts).expect("generated set");
    let triadic = is_triadic_set(&generated).ok;
    debug_assert!(triadic, "generated set must be triadic");
    GeneratedSet {
        base: a.clone(),
        generated,
        pairs: pairs.into_iter().map(|(i, n)| (i, n.to_string())).collect(),
        triadic,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhoSums {
    #[serde(serialize_with = "rat::ser")]
    pub over_generated: Q,
    #[serde(serialize_with = "rat::ser")]
    pub over_base: Q,
    pub ok: bool,
}

/// `(Σ_{t∈Ã} ρ(t, A), Σ_{s∈A} ρ(s, Ã))`, exactly; bounds 3 and 1.
pub fn rho_sums(a: &PointSet, gen: &PointSet) -> RhoSums {
    let s1 = gen.points().iter().fold(Q::zero(), |acc, t| acc + a.dist(t));
    let s2 = a.points().iter().fold(Q::zero(), |acc, s| acc + gen.dist(s));
    let ok = s1 <= rat::qi(3) && s2 <= Q::one();
    RhoSums {
        over_generated: s1,
        over_base: s2,
        ok,
    }
}

/// Gap length of `B` as an exact step function.
pub fn gap_lengths(b: &PointSet) -> ExactStep {
    let mut bps = Vec::with_capacity(b.len());
    let mut vals = Vec::with_capacity(b.len());
    for (lo, hi) in b.gaps() {
        bps.push(hi.clone());
        vals.push(hi - lo);
    }
    Step::new(bps, vals).expect("gaps of a point set")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub generated_subset: bool,
    pub extra_points: usize,
    /// `h_Ã >= h_A` on `(0, 1]`, compared via exact gap lengths.
    pub info_dominates: bool,
    pub info_dominates_larger: bool,
}

/// Monotonicity of generation for `A ⊆ A1`.
pub fn monotonicity_checks(a: &PointSet, a1: &PointSet) -> Result<MonotonicityReport> {
    if !a.is_subset(a1) {
        return Err(Error::Precondition("A must be a subset of A1".into()));
    }
    let g = generate(a).generated;
    let g1 = generate(a1).generated;
    let extra = g1.points().iter().filter(|p| !g.contains(p)).count();
    Ok(MonotonicityReport {
        generated_subset: g.is_subset(&g1),
        extra_points: extra,
        info_dominates: gap_lengths(&g).le(&gap_lengths(a)),
        info_dominates_larger: gap_lengths(&g1).le(&gap_lengths(a1)),
    })
}

/// Measure-preserving map permuting the level-`(j+1)` sub-atoms of `δ_m^j`
/// by translation; identity elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftMap {
    pub j: u32,
    pub m: BigInt,
    perm: Vec<usize>,
}

pub const MAX_SHIFT_LEVEL: u32 = 3;

impl ShiftMap {
    /// `perm[k]` is the destination of sub-atom `k` (numbered inside `δ_m^j`).
    pub fn new(j: u32, m: BigInt, perm: Vec<usize>) -> Result<Self> {
        if j > MAX_SHIFT_LEVEL {
            return Err(Error::Budget(format!("shift level {j} > {MAX_SHIFT_LEVEL}")));
        }
        let n = rat::grid_size(j).to_usize().expect("small level");
        if perm.len() != n {
            return Err(Error::Invalid(format!("permutation has {} entries, want {n}", perm.len())));
        }
        if m < BigInt::zero() || m >= rat::grid_size(j) {
            return Err(Error::Invalid(format!("atom index {m} out of range")));
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Invalid("not a permutation".into()));
            }
        }
        Ok(ShiftMap { j, m, perm })
    }

    pub fn identity(j: u32, m: BigInt) -> Result<Self> {
        let n = rat::grid_size(j).to_usize().unwrap_or(0);
        Self::new(j, m, (0..n).collect())
    }

    fn window(&self) -> (Q, Q) {
        let len = rat::atom_len(self.j);
        let lo = Q::from_integer(self.m.clone()) * &len;
        let hi = &lo + &len;
        (lo, hi)
    }

    fn sub_len(&self) -> Q {
        rat::atom_len(self.j + 1)
    }

    /// Image of a point; a right endpoint moves with its sub-atom, `0 ↦ 0`.
    pub fn apply_point(&self, t: &Q) -> Q {
        let (lo, hi) = self.window();
        if *t <= lo || *t > hi {
            return t.clone();
        }
        let sl = self.sub_len();
        let k = (rat::ceil(&((t - &lo) / &sl)) - BigInt::one()).to_usize().expect("sub-atom");
        t + Q::from_integer(BigInt::from(self.perm[k] as i64 - k as i64)) * sl
    }

    /// Image of a finite set, with `{0, 1}` kept.
    pub fn apply_set(&self, b: &PointSet) -> PointSet {
        PointSet::with_endpoints(b.points().iter().map(|t| self.apply_point(t)).collect()).expect("image set")
    }

    /// `f ∘ S^(-1)`.
    pub fn pushforward(&self, f: &StepFunction) -> StepFunction {
        let (lo, hi) = self.window();
        let sl = self.sub_len();
        let n = self.perm.len();
        let mut inv = vec![0usize; n];
        for (k, &p) in self.perm.iter().enumerate() {
            inv[p] = k;
        }
        let mut segs: Vec<(Q, Q, f64)> = Vec::new();
        let push_range = |segs: &mut Vec<(Q, Q, f64)>, a: &Q, b: &Q, shift: &Q| {
            let bps = f.breakpoints();
            let mut k = bps.partition_point(|x| x <= a);
            let mut x = a.clone();
            while x < *b && k < bps.len() {
                let e = bps[k].clone().min(b.clone());
                segs.push((&x + shift, &e + shift, f.values()[k]));
                x = e;
                k += 1;
            }
        };
        push_range(&mut segs, &Q::zero(), &lo, &Q::zero());
        for (dest, &src) in inv.iter().enumerate() {
            let a = &lo + Q::from_integer(BigInt::from(src)) * &sl;
            let b = &a + &sl;
            let shift = Q::from_integer(BigInt::from(dest as i64 - src as i64)) * &sl;
            push_range(&mut segs, &a, &b, &shift);
        }
        push_range(&mut segs, &hi, &Q::one(), &Q::zero());
        Step::from_segments(segs, 0.0)
    }

    /// `self ∘ other` when both act on the same atom.
    pub fn compose(&self, other: &ShiftMap) -> Result<ShiftMap> {
        if self.j != other.j || self.m != other.m {
            return Err(Error::Invalid("composition needs maps on the same atom".into()));
        }
        ShiftMap::new(self.j, self.m.clone(), other.perm.iter().map(|&k| self.perm[k]).collect())
    }
}

/// Finite composition `S_1 ∘ S_2 ∘ … ∘ S_r`, applied right to left.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShiftChain(pub Vec<ShiftMap>);

impl ShiftChain {
    pub fn apply_point(&self, t: &Q) -> Q {
        self.0.iter().rev().fold(t.clone(), |x, s| s.apply_point(&x))
    }

    pub fn apply_set(&self, b: &PointSet) -> PointSet {
        self.0.iter().rev().fold(b.clone(), |x, s| s.apply_set(&x))
    }

    pub fn pushforward(&self, f: &StepFunction) -> StepFunction {
        self.0.iter().rev().fold(f.clone(), |x, s| s.pushforward(&x))
    }
}

/// Distribution of values: sorted `(value, measure)` pairs.
pub fn distribution(f: &StepFunction) -> Vec<(f64, Q)> {
    let mut vals: Vec<f64> = f.values().to_vec();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    vals.into_iter().map(|v| (v, f.measure_where(|x| *x == v))).collect()
}

/// Whether `B` holds every level-`(j+1)` grid point of `δ_m^j`, so that the
/// shift moves the gaps of `B` rigidly.
pub fn is_rigid_for(b: &PointSet, s: &ShiftMap) -> bool {
    let (lo, _) = s.window();
    let sl = s.sub_len();
    (0..=s.perm.len()).all(|k| b.contains(&(&lo + Q::from_integer(BigInt::from(k)) * &sl)))
}

/// `(||V_0 … V_i h_B||, ||V_0 … V_i h_S(B)||)`.
pub fn shift_invariance(b: &PointSet, s: &ShiftChain, i: u32) -> Result<(f64, f64)> {
    let h = info::info_fn(b, 3);
    let hs = info::info_fn(&s.apply_set(b), 3);
    Ok((vcalc::v_composite(&h, 0, i)?.value, vcalc::v_composite(&hs, 0, i)?.value))
}

/// Measure of `(H_C = m)`: `2^(m-1)` removed intervals of length `3^(-m)`.
pub fn cantor_level_mass(m: u32) -> Q {
    if m == 0 {
        return Q::zero();
    }
    Q::new(num::pow(BigInt::from(2), (m - 1) as usize), rat::pow3(m as u64))
}

/// `||(H_C - k)^+||` by summing the level masses until the terms drop below 1e-30.
pub fn cantor_tail_norm(k: u32) -> f64 {
    let mut s = 0.0;
    let mut m = k + 1;
    loop {
        let term = ((m - k) as f64).powi(2) * rat::to_f64(&cantor_level_mass(m));
        s += term;
        if term < 1e-30 && m > k + 10 {
            break;
        }
        m += 1;
    }
    s.sqrt()
}

/// The bound `3 (2/3)^k` stated for the Cantor set.
pub fn cantor_stated_bound(k: u32) -> f64 {
    3.0 * (2.0f64 / 3.0).powi(k as i32)
}

/// `Σ_{l>=k} ||1_(H_C > l)|| = (2/3)^(k/2) / (1 - sqrt(2/3))`.
pub fn cantor_triangle_bound(k: u32) -> f64 {
    (2.0f64 / 3.0).powf(k as f64 / 2.0) / (1.0 - (2.0f64 / 3.0).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowTrace {
    #[serde(serialize_with = "rat::ser")]
    pub radius: Q,
    /// `(depth, V(min(H_B, depth) 1_U))`.
    pub trace: Vec<(u32, f64)>,
    pub last_increment: f64,
    pub increment_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityReport {
    #[serde(serialize_with = "rat::ser")]
    pub t: Q,
    pub windows: Vec<WindowTrace>,
    pub verdict: String,
}

/// Local criterion at `t ∈ B`: for each window `U = (t - r, t + r)` the values
/// `V(min(H_B, d) 1_U)` over truncation depths `d`.
pub fn continuity_verdict(set: &ClosedSet, t: &Q, radii: &[Q], depths: &[u32]) -> Result<ContinuityReport> {
    if !set.contains(t) {
        return Err(Error::Invalid(format!("t = {} is not in B", rat::fmt(t))));
    }
    if depths.is_empty() {
        return Err(Error::Invalid("no truncation depths".into()));
    }
    let mut windows = Vec::with_capacity(radii.len());
    for r in radii {
        let a = (t - r).max(Q::zero());
        let b = (t + r).min(Q::one());
        let mut trace = Vec::with_capacity(depths.len());
        for &d in depths {
            let h = match set {
                ClosedSet::Finite { .. } => info::info_fn_closed(set, f64::INFINITY)?,
                ClosedSet::Cantor { .. } => info::info_fn_closed(&ClosedSet::Cantor { depth: d }, d as f64)?,
            };
            let h = h.clip_min(&(d as f64)).restrict(&a, &b);
            trace.push((d, vcalc::v_functional(&h)?));
        }
        let incs: Vec<f64> = trace.windows(2).map(|w| w[1].1 - w[0].1).collect();
        let last_increment = incs.last().copied().unwrap_or(0.0);
        let increment_ratio = match incs.as_slice() {
            [.., p, q] if *p > 0.0 => Some(q / p),
            _ => None,
        };
        windows.push(WindowTrace {
            radius: r.clone(),
            trace,
            last_increment,
            increment_ratio,
        });
    }
    let verdict = match set {
        ClosedSet::Finite { .. } => "finite B: V(H_B 1_U) is finite for every window".to_string(),
        ClosedSet::Cantor { .. } => {
            let shrinking = windows
                .iter()
                .all(|w| w.increment_ratio.is_none_or(|r| r < 1.0));
            if shrinking {
                "truncation increments shrink geometrically; trace consistent with a finite limit".to_string()
            } else {
                "truncation increments do not shrink; no conclusion from finite depth".to_string()
            }
        }
    };
    Ok(ContinuityReport {
        t: t.clone(),
        windows,
        verdict,
    })
}
