//! The ternary-digit family `φ_n`, complexity certificates built from it, and
//! desk-scale divergent processes on finite triadic sets.
//!
//! For `x = x_1/3 + x_2/3² + …` and `n = [n_1, …, n_k]`,
//! `φ_n = 3^{-k} (√3 χ + Σ_l 3^l 1_{(x_1 = n_1, …, x_{l-1} = n_{l-1})} hat(x_l − n_l))`
//! where `hat(m) ∈ {−1, 0, 1}` and `hat(m) ≡ m (mod 3)`. The vector `χ` lives
//! in external coordinates.

use num::{BigInt, BigRational, One, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::info::PointSet;
use crate::ortho::{
    self, glue_blocks, gram_check, ExtId, GramReport, IndependenceCert, OrthoProcess, OrthoVector,
    ProductExceedance, ProductProcess, Scaling, GRAM_TOL,
};
use crate::par;
use crate::rat::{self, q, qi, Q};
use crate::sets;
use crate::stepfn::{ExactStep, Scalar, Step};
use crate::surd::{Field, Surd};
use crate::{Error, Result};

pub const MAX_PHI_K: u32 = 7;
/// Largest depth for the full pairwise checks of the family.
pub const MAX_CHECK_K: u32 = 5;
pub const MAX_BERNSTEIN_K: u32 = 20_000;
/// Highest grid level of a set accepted by [`build_divergent`].
pub const MAX_DIVERGENT_LEVEL: u32 = 2;
/// `24²·3`, the increment constant of a simple process.
const SIMPLE_C: i64 = 3 * 24 * 24;

pub fn hat(m: i64) -> i64 {
    match m.rem_euclid(3) {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

fn pow3_u(e: u32) -> u64 {
    3u64.pow(e)
}

/// Ternary digits of `x` up to depth `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TernaryContext {
    pub k: u32,
}

impl TernaryContext {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 || k > MAX_PHI_K {
            return Err(Error::Budget(format!("depth k = {k} outside 1..={MAX_PHI_K}")));
        }
        Ok(TernaryContext { k })
    }

    pub fn size(&self) -> u64 {
        pow3_u(self.k)
    }

    /// `[n_1, …, n_k]`, most significant first.
    pub fn digits(&self, n: u64) -> Vec<u8> {
        let mut d = vec![0u8; self.k as usize];
        let mut n = n;
        for slot in d.iter_mut().rev() {
            *slot = (n % 3) as u8;
            n /= 3;
        }
        d
    }

    pub fn number(&self, digits: &[u8]) -> u64 {
        digits.iter().fold(0, |acc, &d| acc * 3 + d as u64)
    }

    /// Interval `(x_1 = p_1, …, x_r = p_r)`.
    pub fn prefix_interval(prefix: &[u8]) -> (Q, Q) {
        let mut lo = Q::zero();
        let mut len = Q::one();
        for &d in prefix {
            len /= qi(3);
            lo += &len * qi(d as i64);
        }
        let hi = &lo + len;
        (lo, hi)
    }

    /// The digit function `x_l`.
    pub fn digit_fn(&self, l: u32) -> ExactStep {
        let n = pow3_u(l);
        let bps = (1..=n).map(|m| q(m as i64, n as i64)).collect();
        let vals = (0..n).map(|m| qi((m % 3) as i64)).collect();
        Step::new(bps, vals).expect("grid breakpoints")
    }

    /// `Σ_{1≤l≤k} 1_{(x_l = 1)}`.
    pub fn digit_sum_fn(&self) -> ExactStep {
        let n = self.size();
        let bps = (1..=n).map(|m| Q::new(BigInt::from(m), BigInt::from(n))).collect();
        let vals = (0..n)
            .map(|m| qi(self.digits(m).iter().filter(|&&d| d == 1).count() as i64))
            .collect();
        Step::new(bps, vals).expect("grid breakpoints")
    }

    /// `1_{(x_1 = p_1, …, x_{l-1} = p_{l-1})} hat(x_l − n_l)` with `l = prefix.len() + 1`.
    pub fn prefixed_hat(prefix: &[u8], n_l: u8) -> ExactStep {
        let (lo, hi) = Self::prefix_interval(prefix);
        let third = (&hi - &lo) / qi(3);
        let segs = (0..3)
            .map(|j| {
                let a = &lo + &third * qi(j);
                let b = &a + &third;
                (a, b, qi(hat(j - n_l as i64)))
            })
            .collect();
        Step::from_segments(segs, Q::zero())
    }
}

/// Body of `φ_n` on `(0, 1]`: `3^{l-k} hat(j − n_l)` on the `j`-th third of the
/// level-`(l−1)` prefix interval of `n`, for `j ≠ n_l`; zero elsewhere.
pub fn phi_body(k: u32, n: u64) -> Result<ExactStep> {
    let ctx = TernaryContext::new(k)?;
    if n >= ctx.size() {
        return Err(Error::Invalid(format!("index {n} ≥ 3^{k}")));
    }
    let d = ctx.digits(n);
    let mut segs = Vec::with_capacity(2 * k as usize);
    for l in 1..=k as usize {
        let (lo, hi) = TernaryContext::prefix_interval(&d[..l - 1]);
        let third = (&hi - &lo) / qi(3);
        let c = Q::new(BigInt::one(), BigInt::from(pow3_u(k - l as u32)));
        for j in 0..3u8 {
            if j == d[l - 1] {
                continue;
            }
            let a = &lo + &third * qi(j as i64);
            let b = &a + &third;
            segs.push((a, b, &c * qi(hat(j as i64 - d[l - 1] as i64))));
        }
    }
    segs.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(Step::from_segments(segs, Q::zero()))
}

fn check_chi<V: Field>(chi: &OrthoVector<V>) -> Result<()> {
    if chi.has_body() {
        return Err(Error::Precondition("χ must live off [0,1) (empty body)".into()));
    }
    let n = chi.norm_sq();
    let unit = if V::EXACT {
        n == V::from_i64(1)
    } else {
        (n.to_f64() - 1.0).abs() <= GRAM_TOL
    };
    if !unit {
        return Err(Error::Precondition(format!("‖χ‖² = {} ≠ 1", n.to_f64())));
    }
    Ok(())
}

/// The family `φ_0, …, φ_{3^k − 1}` for a unit `χ` with empty body.
pub fn phi_family<V: Field>(k: u32, chi: &OrthoVector<V>) -> Result<Vec<OrthoVector<V>>> {
    check_chi(chi)?;
    phi_family_in(k, &Q::zero(), &Q::one(), chi, &V::from_i64(1))
}

/// `scale · φ_n` with bodies moved onto `(a, b]` (norm preserving) and `χ`
/// arbitrary in the complement.
fn phi_family_in<V: Field>(k: u32, a: &Q, b: &Q, chi: &OrthoVector<V>, scale: &V) -> Result<Vec<OrthoVector<V>>> {
    let ctx = TernaryContext::new(k)?;
    let chi_coef = V::sqrt_q(&qi(3))?.mul(&V::from_q(&Q::new(BigInt::one(), BigInt::from(ctx.size()))));
    let chi_part = chi.scale(&chi_coef);
    let whole = a.is_zero() && b.is_one();
    let ns: Vec<u64> = (0..ctx.size()).collect();
    par::map_slice(&ns, |&n| {
        let body = OrthoVector::from_body(phi_body(k, n)?.map(V::from_q));
        let body = if whole { body } else { body.rescaled_into(a, b)? };
        Ok(body.add(&chi_part).scale(scale))
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub k: u32,
    /// The partial-block sums bounded by `3^{k−l} 1_{(x_l=1)}`, with equality on `(x_l = n_l)`.
    pub block_sums: bool,
    /// Full-block sums vanish.
    pub full_block_zero: bool,
    /// `Σ_{m<n} 1_{(x_1=m_1,…,x_{l−1}=m_{l−1})} hat(x_l − m_l) ≤ 3^{k−l} 1_{(x_l=1)}`,
    /// with equality on `(x_1 = n_1, …, x_l = n_l)`.
    pub prefix_sums: bool,
    pub ok: bool,
}

/// Integer identities behind the partial-sum formula, checked on every atom.
pub fn proof_identities(k: u32) -> Result<IdentityReport> {
    if k == 0 || k > MAX_CHECK_K {
        return Err(Error::Budget(format!("k = {k} outside 1..={MAX_CHECK_K}")));
    }
    let ctx = TernaryContext::new(k)?;
    let mut block_sums = true;
    let mut full_block_zero = true;
    for l in 1..=k {
        let w = pow3_u(k - l) as i64;
        for x in 0..3i64 {
            full_block_zero &= w * (0..3).map(|j| hat(x - j)).sum::<i64>() == 0;
        }
        for nl in 0..3i64 {
            for r in 0..w {
                for x in 0..3i64 {
                    let s: i64 = (0..nl).map(|j| w * hat(x - j)).sum::<i64>() + r * hat(x - nl);
                    let cap = if x == 1 { w } else { 0 };
                    block_sums &= s <= cap && (x != nl || s == cap);
                }
            }
        }
    }
    let size = ctx.size() as usize;
    let digits: Vec<Vec<u8>> = (0..size as u64).map(|m| ctx.digits(m)).collect();
    let rows = par::map_indexed(k as usize, |li| {
        let l = li + 1;
        let cap = pow3_u(k - l as u32) as i64;
        let mut f = vec![0i64; size];
        let mut ok = true;
        for n in 0..=size {
            if n < size {
                for x in 0..size {
                    ok &= f[x] <= if digits[x][l - 1] == 1 { cap } else { 0 };
                    if digits[x][..l] == digits[n][..l] {
                        ok &= f[x] == if digits[x][l - 1] == 1 { cap } else { 0 };
                    }
                }
                // add the term m = n
                for (x, dx) in digits.iter().enumerate() {
                    if dx[..l - 1] == digits[n][..l - 1] {
                        f[x] += hat(dx[l - 1] as i64 - digits[n][l - 1] as i64);
                    }
                }
            }
        }
        ok
    });
    let prefix_sums = rows.into_iter().all(|b| b);
    Ok(IdentityReport {
        k,
        block_sums,
        full_block_zero,
        prefix_sums,
        ok: block_sums && full_block_zero && prefix_sums,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    pub k: u32,
    /// Gram matrix equals `3/3^k · I` exactly.
    pub gram: bool,
    pub mean_zero: bool,
    pub sum_zero_on_unit: bool,
    pub off_unit_part: bool,
    pub total_is_sqrt3_chi: bool,
    pub max_partial_is_digit_sum: bool,
    pub prefix_identity: bool,
    pub vanishes_on_own_atom: bool,
    pub hat_inner_products: bool,
    pub identities: IdentityReport,
    pub ok: bool,
}

/// Every property of the family, evaluated exactly with `χ = e_0`.
pub fn family_check(k: u32) -> Result<FamilyReport> {
    if k == 0 || k > MAX_CHECK_K {
        return Err(Error::Budget(format!("k = {k} outside 1..={MAX_CHECK_K}")));
    }
    let ctx = TernaryContext::new(k)?;
    let chi = OrthoVector::<Surd>::basis(0);
    let phis = phi_family(k, &chi)?;
    let n = phis.len();
    let diag = Surd::rational(Q::new(BigInt::from(3), BigInt::from(ctx.size())));
    let gram = par::map_indexed(n, |i| {
        (i..n).all(|j| {
            let ip = phis[i].inner(&phis[j]);
            if i == j {
                ip == diag
            } else {
                ip.is_zero()
            }
        })
    })
    .into_iter()
    .all(|b| b);
    let mean_zero = phis.iter().all(|p| p.body.integral().is_zero());
    let total = phis.iter().fold(OrthoVector::zero(), |acc, p| acc.add(p));
    let sum_zero_on_unit = !total.has_body();
    let sqrt3 = Surd::sqrt(&qi(3))?;
    let coef = sqrt3.scale_q(&Q::new(BigInt::one(), BigInt::from(ctx.size())));
    let off_unit_part = phis.iter().all(|p| p.ext.len() == 1 && p.ext.get(&0) == Some(&coef));
    let total_is_sqrt3_chi = total == chi.scale(&sqrt3);

    let digit_sum = ctx.digit_sum_fn().map(Surd::from_q);
    let mut partial = Step::<Surd>::zero();
    let mut running_max: Option<Step<Surd>> = None;
    let mut prefix_identity = true;
    let mut vanishes_on_own_atom = true;
    for (m, p) in phis.iter().enumerate() {
        let mid = Q::new(BigInt::from(2 * m as u64 + 1), BigInt::from(2 * ctx.size()));
        prefix_identity &= partial.eval(&mid)? == digit_sum.eval(&mid)?;
        vanishes_on_own_atom &= p.body.eval(&mid)?.is_zero();
        partial = partial.add(&p.body);
        running_max = Some(match running_max {
            None => partial.clone(),
            Some(r) => r.max(&partial),
        });
    }
    let max_partial_is_digit_sum = running_max.as_ref() == Some(&digit_sum);

    let mut hat_inner_products = true;
    for l in 1..=k.min(3) {
        let inv = Q::new(BigInt::one(), BigInt::from(pow3_u(l)));
        for pm in 0..pow3_u(l - 1) {
            let prefix = if l == 1 { vec![] } else { TernaryContext { k: l - 1 }.digits(pm) };
            let (lo, hi) = TernaryContext::prefix_interval(&prefix);
            let ind = ExactStep::indicator(&lo, &hi);
            let h: Vec<ExactStep> = (0..3).map(|d| TernaryContext::prefixed_hat(&prefix, d)).collect();
            for a in 0..3 {
                hat_inner_products &= h[a].norm_sq() == &inv * qi(2);
                hat_inner_products &= h[a].inner(&ind).is_zero();
                for b in a + 1..3 {
                    hat_inner_products &= h[a].inner(&h[b]) == -inv.clone();
                }
            }
        }
    }
    let identities = proof_identities(k)?;
    let ok = gram
        && mean_zero
        && sum_zero_on_unit
        && off_unit_part
        && total_is_sqrt3_chi
        && max_partial_is_digit_sum
        && prefix_identity
        && vanishes_on_own_atom
        && hat_inner_products
        && identities.ok;
    Ok(FamilyReport {
        k,
        gram,
        mean_zero,
        sum_zero_on_unit,
        off_unit_part,
        total_is_sqrt3_chi,
        max_partial_is_digit_sum,
        prefix_identity,
        vanishes_on_own_atom,
        hat_inner_products,
        identities,
        ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernsteinReport {
    pub k: u32,
    /// Exact `P(Bin(k, 1/3) < k/6)`.
    #[serde(serialize_with = "rat::ser")]
    pub tail: Q,
    pub tail_f64: f64,
    /// `e^{−k/144}`.
    pub bound: f64,
    pub holds: bool,
}

pub fn bernstein_check(k: u32) -> Result<BernsteinReport> {
    if k == 0 || k > MAX_BERNSTEIN_K {
        return Err(Error::Invalid(format!("k = {k} outside 1..={MAX_BERNSTEIN_K}")));
    }
    let mut num = BigInt::zero();
    let mut binom = BigInt::one();
    let mut i = 0u32;
    while 6 * i < k {
        num += &binom * num::pow(BigInt::from(2), (k - i) as usize);
        binom = binom * BigInt::from(k - i) / BigInt::from(i + 1);
        i += 1;
    }
    let tail = Q::new(num, rat::pow3(k as u64));
    let tail_f64 = rat::to_f64(&tail);
    let bound = (-(k as f64) / 144.0).exp();
    Ok(BernsteinReport {
        k,
        tail,
        tail_f64,
        bound,
        holds: tail_f64 <= bound,
    })
}

/// Deterministic source of fresh external basis ids.
#[derive(Clone, Debug)]
pub struct IdAlloc {
    next: ExtId,
}

impl IdAlloc {
    pub fn starting_at(next: ExtId) -> Self {
        IdAlloc { next }
    }

    pub fn after<V: Field>(v: &OrthoVector<V>) -> Self {
        IdAlloc {
            next: v.max_ext_id().map_or(0, |m| m + 1),
        }
    }

    pub fn fresh(&mut self) -> ExtId {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// Shape of a simple set together with the recursion that certifies it.
#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    /// `[lo, hi]` with no point of `B` inside: the process jumps straight to
    /// its final value.
    Trivial { lo: Q, hi: Q },
    /// `3^k` closed intervals of equal length carried by an outer `φ`-family.
    Nest { k: u32, children: Vec<Plan> },
    /// Intervals with disjoint interiors; windows proportional to `y_l²`.
    Merge { children: Vec<Plan> },
}

#[derive(Clone, Debug)]
struct Claim<V> {
    eps: f64,
    y: f64,
    y_exact: Option<V>,
}

impl Plan {
    pub fn trivial(lo: Q, hi: Q) -> Result<Plan> {
        if hi <= lo {
            return Err(Error::Invalid("empty interval".into()));
        }
        Ok(Plan::Trivial { lo, hi })
    }

    pub fn nest(k: u32, children: Vec<Plan>) -> Result<Plan> {
        TernaryContext::new(k)?;
        if children.len() as u64 != pow3_u(k) {
            return Err(Error::Invalid(format!("{} intervals, expected 3^{k}", children.len())));
        }
        let len = children[0].length();
        if children.iter().any(|c| c.length() != len) {
            return Err(Error::Invalid("intervals of different lengths".into()));
        }
        check_disjoint(&children)?;
        Ok(Plan::Nest { k, children })
    }

    pub fn merge(children: Vec<Plan>) -> Result<Plan> {
        if children.is_empty() {
            return Err(Error::Invalid("nothing to merge".into()));
        }
        check_disjoint(&children)?;
        if children.len() == 1 {
            return Ok(children.into_iter().next().unwrap());
        }
        Ok(Plan::Merge { children })
    }

    /// `(min D, max D)`.
    pub fn span(&self) -> (Q, Q) {
        match self {
            Plan::Trivial { lo, hi } => (lo.clone(), hi.clone()),
            Plan::Nest { children, .. } | Plan::Merge { children } => {
                (children[0].span().0, children[children.len() - 1].span().1)
            }
        }
    }

    /// The closed intervals making up `D`.
    pub fn intervals(&self) -> Vec<(Q, Q)> {
        let mut out: Vec<(Q, Q)> = Vec::new();
        self.collect_intervals(&mut out);
        out
    }

    fn collect_intervals(&self, out: &mut Vec<(Q, Q)>) {
        match self {
            Plan::Trivial { lo, hi } => match out.last_mut() {
                Some(last) if &last.1 == lo => last.1 = hi.clone(),
                _ => out.push((lo.clone(), hi.clone())),
            },
            Plan::Nest { children, .. } | Plan::Merge { children } => {
                for c in children {
                    c.collect_intervals(out);
                }
            }
        }
    }

    /// `λ(D)`.
    pub fn length(&self) -> Q {
        self.intervals().iter().fold(Q::zero(), |acc, (a, b)| acc + (b - a))
    }

    fn claim<V: Field>(&self) -> Result<Claim<V>> {
        match self {
            Plan::Trivial { .. } => Ok(Claim {
                eps: 0.0,
                y: 0.0,
                y_exact: Some(V::zero_v()),
            }),
            Plan::Nest { k, children } => {
                let cs = children.iter().map(|c| c.claim::<V>()).collect::<Result<Vec<_>>>()?;
                let min = cs
                    .iter()
                    .min_by(|a, b| a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
                    .expect("3^k children");
                let lam = self.length();
                let four_k = 4.0 * *k as f64;
                let y = 3f64.powf(*k as f64 / 2.0) * min.y + four_k * rat::to_f64(&lam).sqrt();
                let y_exact = match &min.y_exact {
                    Some(ym) => Some(
                        V::sqrt_q(&Q::from_integer(rat::pow3(*k as u64)))?
                            .mul(ym)
                            .add(&V::sqrt_q(&lam)?.mul(&V::from_i64(4 * *k as i64))),
                    ),
                    None => None,
                };
                Ok(Claim {
                    eps: cs.iter().fold(0.0f64, |m, c| m.max(c.eps)) + (-(*k as f64) / 144.0).exp(),
                    y,
                    y_exact,
                })
            }
            Plan::Merge { children } => {
                let cs = children.iter().map(|c| c.claim::<V>()).collect::<Result<Vec<_>>>()?;
                let y = cs.iter().map(|c| c.y * c.y).sum::<f64>().sqrt();
                let sq = cs.iter().try_fold(V::zero_v(), |acc, c| c.y_exact.as_ref().map(|v| acc.add(&v.mul(v))));
                Ok(Claim {
                    eps: cs.iter().fold(0.0f64, |m, c| m.max(c.eps)),
                    y,
                    y_exact: sq.and_then(|s| s.sqrt_v()),
                })
            }
        }
    }

    pub fn to_json(&self) -> Value {
        let (lo, hi) = self.span();
        let span = [rat::fmt(&lo), rat::fmt(&hi)];
        match self {
            Plan::Trivial { .. } => json!({ "kind": "trivial", "span": span }),
            Plan::Nest { k, children } => json!({
                "kind": "nest", "k": k, "span": span,
                "children": children.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            }),
            Plan::Merge { children } => json!({
                "kind": "merge", "span": span,
                "children": children.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            }),
        }
    }
}

fn check_disjoint(children: &[Plan]) -> Result<()> {
    for w in children.windows(2) {
        if w[0].span().1 > w[1].span().0 {
            return Err(Error::Invalid("intervals overlap or are out of order".into()));
        }
    }
    Ok(())
}

/// `χ = Σ c_l χ_l` with `(χ_l)` orthonormal: the reflection taking `e_1` to
/// `c`, applied to `(χ, e_2, …, e_L)` with fresh `e_m`.
fn split_chi<V: Field>(chi: &OrthoVector<V>, c: &[V], ids: &mut IdAlloc) -> Result<Vec<OrthoVector<V>>> {
    let l = c.len();
    if l == 1 {
        return Ok(vec![chi.clone()]);
    }
    let mut f = vec![chi.clone()];
    for _ in 1..l {
        f.push(OrthoVector::basis(ids.fresh()));
    }
    let inv = V::from_i64(1).sub(&c[0]).inv()?;
    let mut out = Vec::with_capacity(l);
    for r in 0..l {
        let mut v = f[0].scale(&c[r]);
        for m in 1..l {
            let h = if r == 0 {
                c[m].clone()
            } else {
                let d = if r == m { V::from_i64(1) } else { V::zero_v() };
                d.sub(&c[r].mul(&c[m]).mul(&inv))
            };
            v = v.add(&f[m].scale(&h));
        }
        out.push(v);
    }
    Ok(out)
}

/// Simple process on `D ∩ B` answering the challenge `((a, b], χ)`.
fn realize<V: Field>(plan: &Plan, a: &Q, b: &Q, chi: &OrthoVector<V>, ids: &mut IdAlloc) -> Result<(Vec<Q>, Vec<OrthoVector<V>>)> {
    match plan {
        Plan::Trivial { lo, hi } => {
            let c = V::sqrt_q(&(qi(SIMPLE_C) * (hi - lo)))?;
            Ok((vec![lo.clone(), hi.clone()], vec![OrthoVector::zero(), chi.scale(&c)]))
        }
        Plan::Nest { k, children } => {
            if b <= a {
                return Err(Error::Invalid("nested family needs a non-empty window".into()));
            }
            let size = pow3_u(*k);
            let eta = children[0].length();
            let scale = V::sqrt_q(&(qi(24 * 24) * Q::from_integer(BigInt::from(size)) * &eta))?;
            let phis = phi_family_in(*k, a, b, chi, &scale)?;
            let inv_norm = V::sqrt_q(&(qi(SIMPLE_C) * &eta))?.inv()?;
            let w = (b - a) / Q::from_integer(BigInt::from(size));
            let mut times: Vec<Q> = Vec::new();
            let mut vals: Vec<OrthoVector<V>> = Vec::new();
            let mut prefix = OrthoVector::<V>::zero();
            for (n, (child, phi)) in children.iter().zip(&phis).enumerate() {
                let sa = a + &w * qi(n as i64);
                let sb = &sa + &w;
                let chi_n = phi.scale(&inv_norm);
                let (ts, vs) = realize(child, &sa, &sb, &chi_n, ids)?;
                for (t, v) in ts.into_iter().zip(vs) {
                    if times.last() == Some(&t) {
                        continue;
                    }
                    times.push(t);
                    vals.push(prefix.add(&v));
                }
                prefix = prefix.add(phi);
            }
            Ok((times, vals))
        }
        Plan::Merge { children } => {
            let claims = children.iter().map(|c| c.claim::<V>()).collect::<Result<Vec<_>>>()?;
            let weights: Vec<Q> = claims
                .iter()
                .map(|c| match c.y_exact.as_ref().and_then(|y| y.mul(y).rational()) {
                    Some(w) => w,
                    None => BigRational::from_float(c.y * c.y).unwrap_or_else(Q::zero),
                })
                .collect();
            let total_w: Q = weights.iter().fold(Q::zero(), |acc, w| acc + w);
            let lam = plan.length();
            let c: Vec<V> = children
                .iter()
                .map(|ch| V::sqrt_q(&(ch.length() / &lam)))
                .collect::<Result<_>>()?;
            let chis = split_chi(chi, &c, ids)?;
            let mut times: Vec<Q> = Vec::new();
            let mut vals: Vec<OrthoVector<V>> = Vec::new();
            let mut prefix = OrthoVector::<V>::zero();
            let mut acc = Q::zero();
            for ((child, w), chi_l) in children.iter().zip(&weights).zip(&chis) {
                let (sa, sb) = if total_w.is_zero() {
                    (a.clone(), a.clone())
                } else {
                    let sa = a + (b - a) * &acc / &total_w;
                    acc += w;
                    (sa, a + (b - a) * &acc / &total_w)
                };
                let (ts, vs) = realize(child, &sa, &sb, chi_l, ids)?;
                let last = vs[vs.len() - 1].clone();
                for (t, v) in ts.into_iter().zip(vs) {
                    if times.last() == Some(&t) {
                        continue;
                    }
                    times.push(t);
                    vals.push(prefix.add(&v));
                }
                prefix = prefix.add(&last);
            }
            Ok((times, vals))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertChecks {
    pub gram: GramReport,
    /// `X(max D) = 24 √(3 λ(D)) χ`.
    pub final_value: bool,
    /// Every `X(t)` lies in `L2((a, b] ∪ Z)`.
    pub support: bool,
    /// The measured failure fraction is below the claimed `ε`.
    pub eps_met: bool,
    pub ok: bool,
}

/// A simple set `D` with its witness process for one challenge `((a, b], χ)`.
#[derive(Clone, Debug)]
pub struct ComplexityCert<V: Field = f64> {
    pub plan: Plan,
    pub window: (Q, Q),
    pub chi: OrthoVector<V>,
    pub eps: f64,
    pub y: f64,
    pub process: OrthoProcess<V>,
    /// `λ((a, b] ∖ (max_t X(t) ≥ y/√(b−a))) / (b − a)`.
    pub achieved_eps: Q,
    pub checks: CertChecks,
}

impl<V: Field> ComplexityCert<V> {
    pub fn summary_json(&self) -> Value {
        json!({
            "intervals": self.plan.intervals().iter().map(|(a, b)| [rat::fmt(a), rat::fmt(b)]).collect::<Vec<_>>(),
            "window": [rat::fmt(&self.window.0), rat::fmt(&self.window.1)],
            "eps": self.eps,
            "y": self.y,
            "achieved_eps": rat::fmt(&self.achieved_eps),
            "achieved_eps_f64": rat::to_f64(&self.achieved_eps),
            "points": self.process.len(),
            "checks": self.checks,
        })
    }
}

/// Realizes `plan` against the challenge `((a, b], χ)` and checks the witness.
pub fn certify<V: Field>(plan: &Plan, a: &Q, b: &Q, chi: &OrthoVector<V>) -> Result<ComplexityCert<V>> {
    let norm = chi.norm_sq();
    let unit = if V::EXACT {
        norm == V::from_i64(1)
    } else {
        (norm.to_f64() - 1.0).abs() <= GRAM_TOL
    };
    if !unit {
        return Err(Error::Precondition("‖χ‖ ≠ 1".into()));
    }
    if a > b || *a < Q::zero() || *b > Q::one() {
        return Err(Error::Invalid("window must lie in [0,1]".into()));
    }
    let in_window = chi
        .body
        .pieces()
        .any(|p| !p.value.is_zero_v() && p.hi > a && p.lo < b);
    if in_window {
        return Err(Error::Precondition("χ must vanish on the window".into()));
    }
    let mut ids = IdAlloc::after(chi);
    let (times, vals) = realize(plan, a, b, chi, &mut ids)?;
    let process = OrthoProcess::new(times, vals, Scaling::Simple)?.with_domain(plan.intervals())?;
    let claim = plan.claim::<V>()?;
    let gram = gram_check(&process);

    let lam = plan.length();
    let target = chi.scale(&V::sqrt_q(&(qi(SIMPLE_C) * &lam))?);
    let last = &process.values()[process.len() - 1];
    let diff = last.sub(&target);
    let final_value = if V::EXACT {
        diff.is_zero()
    } else {
        diff.norm() <= GRAM_TOL
    };

    let support = process.values().iter().all(|v| {
        let outside_z = v.body.zip_with(&chi.body, |x, c| if c.is_zero_v() { x.clone() } else { V::zero_v() });
        let off = outside_z.sub(&outside_z.restrict(a, b));
        off.values().iter().all(|x| x.is_zero_v())
    });

    let w = b - a;
    let achieved_eps = if w.is_zero() {
        Q::zero()
    } else {
        let m = ortho::maximal_function(&process, None, false)?;
        let hit = match &claim.y_exact {
            Some(y) => {
                let y2 = y.mul(y);
                let wv = V::from_q(&w);
                let mut s = Q::zero();
                for p in m.pieces() {
                    let lo = p.lo.max(a);
                    let hi = p.hi.min(b);
                    if hi > lo && !p.value.is_neg() && p.value.mul(p.value).mul(&wv) >= y2 {
                        s += hi - lo;
                    }
                }
                s
            }
            None => {
                let thr = claim.y / rat::to_f64(&w).sqrt();
                ortho::exceedance_in(&m.to_f64(), a, b, &thr, false)
            }
        };
        (&w - hit) / &w
    };
    let eps_met = rat::to_f64(&achieved_eps) < claim.eps || (achieved_eps.is_zero() && claim.eps == 0.0);
    let ok = gram.ok && final_value && support;
    Ok(ComplexityCert {
        plan: plan.clone(),
        window: (a.clone(), b.clone()),
        chi: chi.clone(),
        eps: claim.eps,
        y: claim.y,
        process,
        achieved_eps,
        checks: CertChecks {
            gram,
            final_value,
            support,
            eps_met,
            ok,
        },
    })
}

/// `[α, β]` cut into `3^k` equal closed intervals with nothing inside them.
pub fn example_plan(k: u32, alpha: &Q, beta: &Q) -> Result<Plan> {
    let size = pow3_u(k.min(MAX_PHI_K + 1));
    TernaryContext::new(k)?;
    let step = (beta - alpha) / Q::from_integer(BigInt::from(size));
    let children = (0..size)
        .map(|m| {
            let lo = alpha + &step * Q::from_integer(BigInt::from(m));
            let hi = &lo + &step;
            Plan::trivial(lo, hi)
        })
        .collect::<Result<Vec<_>>>()?;
    Plan::nest(k, children)
}

/// The process `X(α + m(β−α)3^{-k}) = 24 √(3^k(β−α)) (φ_0 + … + φ_{m−1})`
/// answering `((a, b], χ)`. With `set`, the grid must lie in it.
pub fn example_process<V: Field>(
    k: u32,
    span: (&Q, &Q),
    chi: &OrthoVector<V>,
    window: (&Q, &Q),
    set: Option<&PointSet>,
) -> Result<ComplexityCert<V>> {
    let plan = example_plan(k, span.0, span.1)?;
    if let Some(b) = set {
        for t in plan_times(&plan) {
            if !b.contains(&t) {
                return Err(Error::Precondition(format!("grid point {} not in B", rat::fmt(&t))));
            }
        }
    }
    certify(&plan, window.0, window.1, chi)
}

fn plan_times(plan: &Plan) -> Vec<Q> {
    let mut out = Vec::new();
    fn walk(p: &Plan, out: &mut Vec<Q>) {
        match p {
            Plan::Trivial { lo, hi } => {
                if out.last() != Some(lo) {
                    out.push(lo.clone());
                }
                out.push(hi.clone());
            }
            Plan::Nest { children, .. } | Plan::Merge { children } => {
                for c in children {
                    walk(c, out);
                }
            }
        }
    }
    walk(plan, &mut out);
    out
}

/// `‖h 1_D‖`: the `y` a merged certificate inherits from per-piece `‖h 1_{D_l}‖`.
pub fn merged_level(h: &crate::StepFunction, intervals: &[(Q, Q)]) -> f64 {
    intervals
        .iter()
        .map(|(a, b)| h.restrict(a, b).norm_sq())
        .sum::<f64>()
        .sqrt()
}

/// `‖(a + 4k) 1_D‖` for a constant `a ≥ 0`: the `y` of a nested certificate.
pub fn nested_level(a: f64, k: u32, intervals: &[(Q, Q)]) -> f64 {
    let lam: f64 = intervals.iter().map(|(x, y)| rat::to_f64(&(y - x))).sum();
    (a + 4.0 * k as f64) * lam.sqrt()
}

/// Certificate tree following a finite triadic set: an atom whose whole
/// sub-grid lies in `B` is nested, any other atom meeting `B` is merged along
/// the sub-grid points it contains.
pub fn plan_for_set(b: &PointSet) -> Result<Plan> {
    let check = sets::is_triadic_set(b);
    if !check.ok {
        return Err(Error::Precondition(format!("set is not triadic: {:?}", check.witness)));
    }
    for t in b.points() {
        let l = sets::grid_level(t).unwrap_or(u32::MAX);
        if l > MAX_DIVERGENT_LEVEL {
            return Err(Error::Budget(format!(
                "point {} at grid level {l} > {MAX_DIVERGENT_LEVEL}",
                rat::fmt(t)
            )));
        }
    }
    plan_atom(b, Q::zero(), Q::one(), 0)
}

/// `depth 0` is `[0, 1]`; depth `d ≥ 1` atoms are the level-`(d−1)` grid atoms.
fn plan_atom(b: &PointSet, lo: Q, hi: Q, depth: u32) -> Result<Plan> {
    let inside = b.points().iter().any(|t| *t > lo && *t < hi);
    if !inside {
        return Plan::trivial(lo, hi);
    }
    let k = if depth == 0 { 1 } else { 1u32 << (depth - 1) };
    if k > MAX_PHI_K {
        return Err(Error::Budget(format!("nesting depth {depth}")));
    }
    let count = pow3_u(k);
    let step = (&hi - &lo) / Q::from_integer(BigInt::from(count));
    let grid: Vec<Q> = (0..=count)
        .map(|i| &lo + &step * Q::from_integer(BigInt::from(i)))
        .collect();
    if grid.iter().all(|g| b.contains(g)) {
        let children = grid
            .windows(2)
            .map(|w| plan_atom(b, w[0].clone(), w[1].clone(), depth + 1))
            .collect::<Result<Vec<_>>>()?;
        return Plan::nest(k, children);
    }
    let cuts: Vec<&Q> = grid.iter().filter(|g| b.contains(g)).collect();
    let mut children = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (p, r) = (w[0].clone(), w[1].clone());
        if &r - &p == step {
            children.push(plan_atom(b, p, r, depth + 1)?);
        } else {
            if b.points().iter().any(|t| t > &p && t < &r) {
                return Err(Error::Precondition("set is not triadic".into()));
            }
            children.push(Plan::trivial(p, r)?);
        }
    }
    Plan::merge(children)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExceedanceRow {
    pub y: f64,
    /// `λ(max_t X(t) > y)` on `(0, 1]`.
    #[serde(serialize_with = "rat::ser")]
    pub measure: Q,
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergentReport {
    pub points: usize,
    pub plan: Value,
    pub certificate: Value,
    pub exceedance: Vec<ExceedanceRow>,
    pub target_y: f64,
    /// `λ([0, 1) ∖ (max_t X(t) > y))` at the target.
    #[serde(serialize_with = "rat::ser")]
    pub target_miss: Q,
    /// `target_miss < 1/2`.
    pub below_half: bool,
}

/// Simple process on a finite triadic set `B` (grid levels ≤ 2) answering
/// `([0, 1), e_0)`, with exact exceedance measures of its maximal function.
pub fn build_divergent<V: Field>(b: &PointSet, target_y: f64) -> Result<(ComplexityCert<V>, DivergentReport)> {
    let plan = plan_for_set(b)?;
    let chi = OrthoVector::<V>::basis(0);
    let cert = certify(&plan, &Q::zero(), &Q::one(), &chi)?;
    let m = ortho::maximal_function(&cert.process, None, false)?.to_f64();
    let top = m.max_value().max(0.0);
    let mut exceedance = Vec::new();
    let mut y = 1.0f64;
    loop {
        exceedance.push(ExceedanceRow {
            y,
            measure: ortho::exceedance(&m, &y, true),
        });
        if y > top {
            break;
        }
        y *= 2.0;
    }
    let target_miss = Q::one() - ortho::exceedance(&m, &target_y, true);
    let report = DivergentReport {
        points: cert.process.len(),
        plan: plan.to_json(),
        certificate: cert.summary_json(),
        exceedance,
        target_y,
        below_half: target_miss < q(1, 2),
        target_miss,
    };
    Ok((cert, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct PrefixReport {
    pub alphas: Vec<String>,
    pub exceedance: ProductExceedance,
    /// Per block, `λ(max_t |X_s(t)| > 1) > 1/6`.
    pub above_sixth: Vec<bool>,
    pub independence: IndependenceCert,
}

/// Glues unit-normalised processes built on the sets `sets[s]` onto the blocks
/// `[α_{s+1}, α_s]` and measures where the glued process oscillates by more than 1.
pub fn divergent_prefix<V: Field>(sets_: &[PointSet], alphas: &[Q]) -> Result<(ProductProcess<V>, PrefixReport)> {
    if sets_.is_empty() || sets_.len() > ortho::MAX_FACTORS {
        return Err(Error::Budget(format!("{} blocks, allowed 1..={}", sets_.len(), ortho::MAX_FACTORS)));
    }
    if alphas.len() != sets_.len() + 1 {
        return Err(Error::Invalid("need one more cut point than blocks".into()));
    }
    let mut blocks = Vec::with_capacity(sets_.len());
    for (s, b) in sets_.iter().enumerate() {
        let (cert, _) = build_divergent::<V>(b, 1.0)?;
        let (lo, hi) = (&alphas[s + 1], &alphas[s]);
        if hi <= lo {
            return Err(Error::Invalid("cut points must decrease".into()));
        }
        // simple → unit on [0,1], then onto the block with ‖ΔX‖² = Δt
        let c = V::sqrt_q(&((hi - lo) / qi(SIMPLE_C)))?;
        let p = cert.process.reparametrize(lo, hi)?.scaled(&c, Scaling::Unit);
        blocks.push(p);
    }
    let prod = glue_blocks(blocks, alphas.to_vec())?;
    let exceedance = prod.exceedance(&V::from_i64(1), true, true)?;
    let above_sixth = exceedance.per_block.iter().map(|p| *p > q(1, 6)).collect();
    let report = PrefixReport {
        alphas: alphas.iter().map(rat::fmt).collect(),
        exceedance,
        above_sixth,
        independence: prod.independence(),
    };
    Ok((prod, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hat_residues() {
        assert_eq!((hat(0), hat(1), hat(2), hat(-1), hat(-2)), (0, 1, -1, -1, 1));
    }

    #[test]
    fn phi_bodies_are_sparse() {
        let b = phi_body(2, 4).unwrap(); // n = [1, 1]
        assert_eq!(b.eval(&q(1, 6)).unwrap(), q(-1, 3));
        assert_eq!(b.eval(&q(5, 6)).unwrap(), q(1, 3));
        assert_eq!(b.eval(&(q(4, 9) - q(1, 100))).unwrap(), qi(-1));
        assert_eq!(b.eval(&q(1, 2)).unwrap(), Q::zero());
        assert!(phi_body(7, 0).unwrap().num_pieces() <= 15);
    }

    #[test]
    fn k1_family_gram() {
        let chi = OrthoVector::<Surd>::basis(0);
        let phis = phi_family(1, &chi).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let ip = phis[i].inner(&phis[j]);
                assert_eq!(ip, Surd::from_i64(if i == j { 1 } else { 0 }));
            }
        }
        let total = phis.iter().fold(OrthoVector::zero(), |a, p| a.add(p));
        assert_eq!(total, chi.scale(&Surd::sqrt(&qi(3)).unwrap()));
        let bad = chi.add(&OrthoVector::from_body(Step::constant(Surd::from_i64(1))));
        assert!(phi_family(1, &bad).is_err());
        assert!(phi_family(1, &chi.scale(&Surd::from_i64(2))).is_err());
    }

    #[test]
    fn k2_max_partial_sums() {
        let chi = OrthoVector::<Surd>::basis(0);
        let phis = phi_family(2, &chi).unwrap();
        let mut s = OrthoVector::zero();
        let mut vals = vec![s.clone()];
        for p in &phis {
            s = s.add(p);
            vals.push(s.clone());
        }
        let x = OrthoProcess::new((0..10).map(|m| q(m, 9)).collect(), vals, Scaling::Scaled { c: qi(3) }).unwrap();
        let m = ortho::maximal_function(&x, None, false).unwrap().map(|v| v.to_f64());
        let dist = sets::distribution(&m);
        assert_eq!(dist, vec![(0.0, q(4, 9)), (1.0, q(4, 9)), (2.0, q(1, 9))]);
        assert_eq!(ortho::exceedance(&m, &1.0, false), q(5, 9));
        assert!(gram_check(&x).exact_zero);
        assert!(ortho::menshov_bound_check(&phis).unwrap().holds);
    }

    #[test]
    fn lemma_checks_small_k() {
        for k in 1..=3 {
            let r = family_check(k).unwrap();
            assert!(r.ok, "{r:?}");
        }
    }

    #[test]
    fn bernstein_examples() {
        let r = bernstein_check(1).unwrap();
        assert_eq!(r.tail, q(2, 3));
        assert!(r.holds);
        assert_eq!(bernstein_check(6).unwrap().tail, q(64, 729));
        let r = bernstein_check(144).unwrap();
        assert!(r.holds && r.bound < 0.368);
    }

    #[test]
    fn example_process_k1() {
        let chi = OrthoVector::<Surd>::basis(0);
        let (z, o) = (Q::zero(), Q::one());
        let c = example_process(1, (&z, &o), &chi, (&z, &o), None).unwrap();
        assert!(c.checks.ok, "{:?}", c.checks);
        assert!(c.checks.gram.exact_zero);
        assert_eq!(c.y, 4.0);
        // 24·1(x_1 = 1) ≥ 4 on one third
        assert_eq!(c.achieved_eps, q(2, 3));
        assert!(c.checks.eps_met && c.eps > 0.99);
        let v = &c.process.values();
        let d = v[2].sub(&v[1]).norm_sq();
        assert_eq!(d, Surd::from_i64(SIMPLE_C / 3));
        let grid = PointSet::new(vec![z.clone(), q(1, 3), o.clone()]).unwrap();
        assert!(example_process(1, (&z, &o), &chi, (&z, &o), Some(&grid)).is_err());
    }

    #[test]
    fn merge_halves() {
        let (z, h, o) = (Q::zero(), q(1, 2), Q::one());
        let p1 = example_plan(1, &z, &h).unwrap();
        let p2 = example_plan(1, &h, &o).unwrap();
        let m = Plan::merge(vec![p1.clone(), p2]).unwrap();
        let y1 = p1.claim::<f64>().unwrap().y;
        assert!((m.claim::<f64>().unwrap().y - y1 * 2f64.sqrt()).abs() < 1e-12);
        let chi = OrthoVector::<Surd>::basis(0);
        let c = certify(&m, &z, &o, &chi).unwrap();
        assert!(c.checks.ok, "{:?}", c.checks);
        assert!(c.checks.gram.exact_zero);
        assert!(Plan::merge(vec![example_plan(1, &z, &o).unwrap(), example_plan(1, &h, &o).unwrap()]).is_err());
        assert_eq!(Plan::merge(vec![p1.clone()]).unwrap(), p1);
    }

    #[test]
    fn nest_of_examples() {
        let children = (0..3)
            .map(|n| example_plan(1, &q(n, 3), &q(n + 1, 3)).unwrap())
            .collect();
        let p = Plan::nest(1, children).unwrap();
        let chi = OrthoVector::<Surd>::basis(0);
        let c = certify(&p, &Q::zero(), &Q::one(), &chi).unwrap();
        assert!(c.checks.ok && c.checks.gram.exact_zero, "{:?}", c.checks);
        assert_eq!(c.process.len(), 10);
    }

    #[test]
    fn divergent_small_sets() {
        let unit = PointSet::unit();
        assert!(build_divergent::<Surd>(&unit, 1.0).is_err());
        let base = PointSet::new(vec![qi(0), q(1, 3), q(2, 3), qi(1)]).unwrap();
        let (c, r) = build_divergent::<Surd>(&base, 1.0).unwrap();
        assert!(c.checks.ok && c.checks.gram.exact_zero);
        assert_eq!(r.points, 4);
        assert_eq!(r.exceedance[0].measure, q(1, 3));
        let grid1 = PointSet::new((0..=9).map(|m| q(m, 9)).collect()).unwrap();
        let (c, _) = build_divergent::<Surd>(&grid1, 1.0).unwrap();
        assert!(c.checks.ok && c.checks.gram.exact_zero);
        assert!(matches!(c.plan, Plan::Nest { k: 1, .. }));
    }

    #[test]
    fn partial_sets_merge() {
        let pts = vec![qi(0), q(1, 9), q(2, 9), q(1, 3), q(2, 3), qi(1)];
        let b = PointSet::new(pts).unwrap();
        let (c, _) = build_divergent::<Surd>(&b, 1.0).unwrap();
        assert!(c.checks.ok && c.checks.gram.exact_zero, "{:?}", c.checks);
        let (cf, _) = build_divergent::<f64>(&b, 1.0).unwrap();
        assert!(cf.checks.ok);
    }

    #[test]
    fn prefix_of_two_blocks() {
        let base = PointSet::new(vec![qi(0), q(1, 3), q(2, 3), qi(1)]).unwrap();
        let (p, r) = divergent_prefix::<Surd>(&[base.clone(), base], &[qi(1), q(1, 2), qi(0)]).unwrap();
        assert_eq!(p.factors(), 2);
        assert!(r.independence.ok);
        assert_eq!(r.exceedance.union_direct.as_deref(), Some(rat::fmt(&r.exceedance.union_independent).as_str()));
    }
}
