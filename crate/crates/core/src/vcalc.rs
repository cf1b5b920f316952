//! Conditional-norm operators `V_j`, `V̄_j`, their composites and the
//! functional `V h = lim ||V_0 … V_i h||`, plus the type-`j` machinery.

use num::BigInt;
use serde::Serialize;

use crate::info::{self, ExcessRun};
use crate::rat::{self, Q};
use crate::stepfn::{Step, StepFunction};
use crate::{Error, Result};

fn p2(j: i64) -> f64 {
    2f64.powi(j as i32)
}

/// `V_j h = (h ∧ 2^j) + ||(h - 2^j)^+||_j`.
pub fn v_step(h: &StepFunction, j: u32) -> Result<StepFunction> {
    let c = p2(j as i64);
    Ok(h.clip_min(&c).add(&h.pos_part(&c).cond_norm(j)?))
}

/// `V̄_j h = (h ∧ 2^j) + 2^j 1_(h ≥ 2^j) + ||(h - 2^(j+1))^+||_j`.
pub fn v_bar_step(h: &StepFunction, j: u32) -> Result<StepFunction> {
    let c = p2(j as i64);
    let ind = h.map(|v| if *v >= c { c } else { 0.0 });
    Ok(h.clip_min(&c).add(&ind).add(&h.pos_part(&(2.0 * c)).cond_norm(j)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct VLevel {
    pub j: u32,
    pub norm: f64,
    pub pieces: usize,
    #[serde(skip)]
    pub function: StepFunction,
}

/// Stages of `V_lo(V_(lo+1)(… V_hi h))`, listed in application order.
#[derive(Clone, Debug, Serialize)]
pub struct VTrace {
    pub j_lo: u32,
    pub j_hi: u32,
    pub levels: Vec<VLevel>,
    pub value: f64,
    /// First `i` with `2^i >= max h`; all `V_j` with `j >= i` fix `h`.
    pub stabilization_level: u32,
}

impl VTrace {
    pub fn result(&self) -> &StepFunction {
        &self.levels.last().expect("non-empty trace").function
    }
}

/// Smallest `i >= 0` with `2^i >= max(h, 1)`.
pub fn stabilization_level(h: &StepFunction) -> u32 {
    let top = h.max_value().max(1.0);
    let mut i = 0u32;
    while p2(i as i64) < top {
        i += 1;
    }
    i
}

fn composite_with(
    h: &StepFunction,
    j_lo: u32,
    j_hi: u32,
    op: impl Fn(&StepFunction, u32) -> Result<StepFunction>,
) -> Result<VTrace> {
    if j_lo > j_hi {
        return Err(Error::Invalid(format!("j_lo = {j_lo} > j_hi = {j_hi}")));
    }
    let mut cur = h.clone();
    let mut levels = Vec::with_capacity((j_hi - j_lo + 1) as usize);
    for j in (j_lo..=j_hi).rev() {
        cur = op(&cur, j)?;
        levels.push(VLevel {
            j,
            norm: cur.l2_norm(),
            pieces: cur.num_pieces(),
            function: cur.clone(),
        });
    }
    Ok(VTrace {
        j_lo,
        j_hi,
        value: cur.l2_norm(),
        levels,
        stabilization_level: stabilization_level(h),
    })
}

/// `V_lo … V_hi h`, applied right to left.
pub fn v_composite(h: &StepFunction, j_lo: u32, j_hi: u32) -> Result<VTrace> {
    composite_with(h, j_lo, j_hi, v_step)
}

/// `V̄_lo … V̄_hi h`.
pub fn v_bar_composite(h: &StepFunction, j_lo: u32, j_hi: u32) -> Result<StepFunction> {
    Ok(composite_with(h, j_lo, j_hi, v_bar_step)?.result().clone())
}

/// Function `V_lo … V_hi h`; identity when `lo > hi`.
pub fn v_chain(h: &StepFunction, j_lo: u32, j_hi: u32) -> Result<StepFunction> {
    if j_lo > j_hi {
        return Ok(h.clone());
    }
    Ok(v_composite(h, j_lo, j_hi)?.result().clone())
}

/// `V h = ||V_0 … V_i h||` at the stabilization level of a bounded `h >= 0`.
pub fn v_functional(h: &StepFunction) -> Result<f64> {
    if h.min_value() < 0.0 {
        return Err(Error::Domain("V is defined for non-negative functions".into()));
    }
    Ok(v_composite(h, 0, stabilization_level(h))?.value)
}

/// `f ∧ 2^j`.
pub fn down(f: &StepFunction, j: i64) -> StepFunction {
    f.clip_min(&p2(j))
}

/// `f - f ∧ 2^j`.
pub fn up(f: &StepFunction, j: i64) -> StepFunction {
    f.pos_part(&p2(j))
}

/// `f ∧ 2^(j+1) - f ∧ 2^j`.
pub fn band(f: &StepFunction, j: i64) -> StepFunction {
    down(f, j + 1).sub(&down(f, j))
}

/// Union of the level-`j` atoms meeting `(h >= 2^j)`.
pub fn atom_hull(h: &StepFunction, j: u32) -> StepFunction {
    let thr = p2(j as i64);
    let n = Q::from_integer(rat::grid_size(j));
    let mut segs: Vec<(Q, Q, f64)> = Vec::new();
    for p in h.pieces() {
        if *p.value < thr {
            continue;
        }
        let lo = Q::from_integer(rat::floor(&(p.lo * &n))) / &n;
        let hi = Q::from_integer(rat::ceil(&(p.hi * &n))) / &n;
        match segs.last_mut() {
            Some(last) if last.1 >= lo => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => segs.push((lo, hi, 1.0)),
        }
    }
    Step::from_segments(segs, 0.0)
}

/// Outcome of the block selection for one sorted sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSelection {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    /// Blocks as lists of original indices, with their membership in `S`.
    pub blocks: Vec<(Vec<usize>, bool)>,
    pub l: usize,
    pub t: usize,
    pub sum_c2: f64,
    pub c_bound: f64,
    pub precedes: bool,
    pub d_ok: bool,
}

/// `3^(2^(i-1))`, saturated at `u128::MAX`.
pub fn block_size(i: u32) -> u128 {
    if i == 0 || i > 7 {
        return u128::MAX;
    }
    3u128.pow(1 << (i - 1))
}

/// `3^(2^(i-1)) 2^(2i) (2^i + 1)`.
pub fn c_bound(i: u32) -> f64 {
    3f64.powf(p2(i as i64 - 1)) * p2(2 * i as i64) * (p2(i as i64) + 1.0)
}

/// Block selection for `(a_k)` and `i >= 1` (see [`select_runs`] for the
/// run-length form used on large grids).
pub fn select_blocks(a: &[f64], i: u32) -> Result<BlockSelection> {
    if i == 0 {
        return Err(Error::Precondition("block selection needs i >= 1".into()));
    }
    if a.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Precondition("block selection needs a_k >= 0".into()));
    }
    let k = a.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| a[x].total_cmp(&a[y]).then(x.cmp(&y)));
    let pi = p2(i as i64);
    let cap = p2(2 * i as i64);
    let l = order.iter().take_while(|&&o| a[o] <= cap).count();
    let nu = block_size(i);
    let t = (l as u128 / nu) as usize;
    let nu_us = nu.min(k as u128 + 1) as usize;
    let mut b = a.to_vec();
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    let mut in_s = vec![false; k];
    let mut blocks = Vec::with_capacity(t);
    for s in 0..t {
        let idx: Vec<usize> = order[s * nu_us..(s + 1) * nu_us].to_vec();
        let m = a[idx[0]];
        let mm = a[*idx.last().unwrap()];
        let sel = m >= mm - pi;
        if sel {
            for &o in &idx {
                b[o] = a[o] + pi;
                in_s[o] = true;
            }
        }
        blocks.push((idx, sel));
    }
    let c_end = (t as u128 + 1).saturating_mul(nu);
    for (pos, &o) in order.iter().enumerate() {
        if in_s[o] {
            continue;
        }
        if (pos as u128) < c_end {
            c[o] = pi;
        } else {
            d[o] = pi;
        }
    }
    let sum_c2 = c.iter().map(|x| x * x).sum();
    let precedes = blocks.iter().all(|(idx, sel)| {
        !sel || {
            let m = idx.iter().map(|&o| a[o]).fold(f64::INFINITY, f64::min);
            idx.iter().all(|&o| b[o] <= 2.0 * pi + m)
        }
    }) && (0..k).all(|o| in_s[o] || b[o] == a[o]);
    let d_ok = (0..k).all(|o| d[o] <= (a[o] + pi) / pi);
    Ok(BlockSelection {
        b,
        c,
        d,
        blocks,
        l,
        t,
        sum_c2,
        c_bound: c_bound(i),
        precedes,
        d_ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Treatment {
    /// Inside an `S` block: `b = a + 2^i`, no correction.
    Kept,
    /// `c = 2^i`.
    C,
    /// `d = 2^i`.
    D,
}

/// Run of consecutive sub-atoms sharing `a` and a treatment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreatedRun {
    #[serde(serialize_with = "info::ser_bigint")]
    pub first: BigInt,
    pub count: u128,
    pub a: f64,
    pub treatment: Treatment,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSelection {
    pub runs: Vec<TreatedRun>,
    pub k: u128,
    pub l: u128,
    pub t: u128,
    pub s_blocks: u128,
    pub c_count: u128,
    pub sum_c2: f64,
    pub precedes: bool,
}

/// Run-length block selection. Ties in `a` are ordered by sub-atom index.
///
/// Blocks lying inside one run have `m_s = M_s` and are always selected, so
/// only blocks straddling a run boundary are examined.
pub fn select_runs(runs: &[ExcessRun], i: u32) -> Result<RunSelection> {
    if i == 0 {
        return Err(Error::Precondition("block selection needs i >= 1".into()));
    }
    if runs.is_empty() {
        return Ok(RunSelection {
            precedes: true,
            ..Default::default()
        });
    }
    let mut rs: Vec<&ExcessRun> = runs.iter().filter(|r| r.count > 0).collect();
    rs.sort_by(|x, y| x.a.total_cmp(&y.a).then(x.first.cmp(&y.first)));
    let mut starts = Vec::with_capacity(rs.len());
    let mut k: u128 = 0;
    for r in &rs {
        starts.push(k);
        k = k
            .checked_add(r.count)
            .ok_or_else(|| Error::Budget("too many sub-atoms".into()))?;
    }
    let pi = p2(i as i64);
    let cap = p2(2 * i as i64);
    let l: u128 = rs.iter().filter(|r| r.a <= cap).map(|r| r.count).sum();
    let nu = block_size(i);
    let t = l / nu;
    let a_at = |pos: u128| -> f64 {
        let r = starts.partition_point(|s| *s <= pos) - 1;
        rs[r].a
    };
    // Straddling blocks that fail the spread test.
    let mut rejected: Vec<u128> = Vec::new();
    let mut precedes = true;
    let mut last = None;
    for &s0 in starts.iter().skip(1) {
        let blk = s0 / nu;
        if s0 % nu == 0 || blk >= t || last == Some(blk) {
            continue;
        }
        last = Some(blk);
        let lo = blk * nu;
        let (m, mm) = (a_at(lo), a_at(lo + nu - 1));
        if m < mm - pi {
            rejected.push(blk);
        } else {
            precedes &= mm + pi <= 2.0 * pi + m;
        }
    }
    // Position intervals with their treatment, in increasing order.
    let mut iv: Vec<(u128, u128, Treatment)> = Vec::new();
    let mut cur = 0u128;
    for &blk in &rejected {
        let lo = blk * nu;
        if lo > cur {
            iv.push((cur, lo, Treatment::Kept));
        }
        iv.push((lo, lo + nu, Treatment::C));
        cur = lo + nu;
    }
    let kept_end = t * nu;
    if kept_end > cur {
        iv.push((cur, kept_end, Treatment::Kept));
    }
    let c_end = (t + 1).saturating_mul(nu).min(k);
    if c_end > kept_end {
        iv.push((kept_end, c_end, Treatment::C));
    }
    if k > c_end {
        iv.push((c_end, k, Treatment::D));
    }
    let mut out = Vec::new();
    for (r, s0) in rs.iter().zip(&starts) {
        let e0 = s0 + r.count;
        let from = iv.partition_point(|x| x.1 <= *s0);
        for &(lo, hi, tr) in &iv[from..] {
            if lo >= e0 {
                break;
            }
            let a0 = lo.max(*s0);
            let a1 = hi.min(e0);
            out.push(TreatedRun {
                first: &r.first + BigInt::from(a0 - s0),
                count: a1 - a0,
                a: r.a,
                treatment: tr,
            });
        }
    }
    out.sort_by(|x, y| x.first.cmp(&y.first));
    let c_count: u128 = out
        .iter()
        .filter(|r| r.treatment == Treatment::C)
        .map(|r| r.count)
        .sum();
    Ok(RunSelection {
        runs: out,
        k,
        l,
        t,
        s_blocks: t - rejected.len() as u128,
        c_count,
        sum_c2: c_count as f64 * pi * pi,
        precedes,
    })
}

/// Certificate that `W_j = V_j U` satisfies `W_j h = V_j h - p - q` with
/// `p = ||p||_j <= 2^-j`, `q = ||q||_j <= 2^-j (V_j h - 2^j)^+`, `p + q <= (V_j h - 2^j)^+`.
#[derive(Clone, Debug, Serialize)]
pub struct JTriadicCert {
    pub j: u32,
    pub max_p: f64,
    pub p_bound: f64,
    pub max_q_excess: f64,
    pub max_pq_excess: f64,
    pub min_defect: f64,
    pub max_f_norm_j: f64,
    pub max_sum_c2: f64,
    pub c_bound: f64,
    pub g_ok: bool,
    pub p_measurable: bool,
    pub q_measurable: bool,
    pub clip_ok: bool,
    pub precedes: bool,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct TypeJOutcome {
    pub u: StepFunction,
    pub w: StepFunction,
    pub f: StepFunction,
    pub g: StepFunction,
    pub p: StepFunction,
    pub q: StepFunction,
    pub cert: JTriadicCert,
}

pub const CERT_TOL: f64 = 1e-9;

/// The type-`j` operator `U` of the block-selection construction and the
/// certificate for `W_j = V_j U`. Requires `h ∈ T_j` and `5 <= j <= 6`.
pub fn apply_type_j(h: &StepFunction, j: u32) -> Result<TypeJOutcome> {
    if j < 5 {
        return Err(Error::Precondition(format!("type-j operator needs j >= 5, got {j}")));
    }
    if j > 6 {
        return Err(Error::Budget(format!("level {} sub-atom counts exceed u128", j + 1)));
    }
    let tc = info::is_type_j(h, j);
    if !tc.ok {
        return Err(Error::Precondition(format!(
            "h is not of type {j}: {}",
            tc.reason.unwrap_or_default()
        )));
    }
    let pj = p2(j as i64);
    let fine = Q::from_integer(rat::grid_size(j + 1));
    let mut fsegs = Vec::new();
    let mut gsegs = Vec::new();
    let mut max_sum_c2: f64 = 0.0;
    let mut precedes = true;
    for runs in tc.representation.values() {
        let sel = select_runs(runs, j)?;
        max_sum_c2 = max_sum_c2.max(sel.sum_c2);
        precedes &= sel.precedes;
        for r in &sel.runs {
            let lo = Q::from_integer(r.first.clone()) / &fine;
            let hi = Q::from_integer(&r.first + BigInt::from(r.count)) / &fine;
            match r.treatment {
                Treatment::Kept => {}
                Treatment::C => fsegs.push((lo, hi, pj)),
                Treatment::D => gsegs.push((lo, hi, pj)),
            }
        }
    }
    let f = Step::from_segments(fsegs, 0.0);
    let g = Step::from_segments(gsegs, 0.0);
    let u = h.sub(&f).sub(&g);
    let w = v_step(&u, j)?;
    let v = v_step(h, j)?;
    let excess = v.pos_part(&pj);
    let defect = v.sub(&w);
    let f_norm = f.cond_norm(j)?;
    let p = defect.zip_with(&f_norm, |d, n| d.max(0.0).min(*n));
    let q = defect.sub(&p).map(|x| x.max(0.0));
    let g_ok = g.le(&h.pos_part(&pj).scale(&(1.0 / pj)));
    let max_p = p.max_value();
    let max_q_excess = q.sub(&excess.scale(&(1.0 / pj))).max_value();
    let max_pq_excess = p.add(&q).sub(&excess).max_value();
    let min_defect = defect.min_value();
    let clip_ok = u.clip_min(&pj) == h.clip_min(&pj);
    let p_measurable = p.is_measurable(j);
    let q_measurable = q.is_measurable(j);
    let cb = c_bound(j);
    let ok = max_p <= 1.0 / pj + CERT_TOL
        && max_q_excess <= CERT_TOL
        && max_pq_excess <= CERT_TOL
        && min_defect >= -CERT_TOL
        && max_sum_c2 <= cb
        && g_ok
        && p_measurable
        && q_measurable
        && clip_ok
        && precedes;
    Ok(TypeJOutcome {
        cert: JTriadicCert {
            j,
            max_p,
            p_bound: 1.0 / pj,
            max_q_excess,
            max_pq_excess,
            min_defect,
            max_f_norm_j: f_norm.max_value(),
            max_sum_c2,
            c_bound: cb,
            g_ok,
            p_measurable,
            q_measurable,
            clip_ok,
            precedes,
            ok,
        },
        u,
        w,
        f,
        g,
        p,
        q,
    })
}

/// Finite probability space with atom weights `p_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpace {
    pub weights: Vec<f64>,
}

impl DiscreteSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) || (s - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("weights must be positive and sum to 1".into()));
        }
        Ok(DiscreteSpace { weights })
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, x)| w * x * x).sum::<f64>().sqrt()
    }

    /// `V g = g ∧ 4 + ||(g - 4)^+||`.
    pub fn v(&self, g: &[f64]) -> Vec<f64> {
        let tail: Vec<f64> = g.iter().map(|x| (x - 4.0).max(0.0)).collect();
        let n = self.norm(&tail);
        g.iter().map(|x| x.min(4.0) + n).collect()
    }

    /// Hypotheses: `g >= g1 >= 2`, `g1 >= 4` and
    /// `||(g-2) 1_A|| <= 14 ||(g1-2) 1_A||` on `A = (g >= 8)`.
    pub fn hypotheses(&self, g: &[f64], g1: &[f64]) -> bool {
        let on_a = |f: &[f64]| -> Vec<f64> {
            f.iter()
                .zip(g)
                .map(|(x, gv)| if *gv >= 8.0 { x - 2.0 } else { 0.0 })
                .collect()
        };
        g.iter().zip(g1).all(|(a, b)| a >= b && *b >= 2.0)
            && g.iter().zip(g1).all(|(a, b)| *a < 8.0 || *b >= 4.0)
            && self.norm(&on_a(g)) <= 14.0 * self.norm(&on_a(g1))
    }

    /// `(||V g - 1||, 14 ||V g1 - 1||)`.
    pub fn sides(&self, g: &[f64], g1: &[f64]) -> (f64, f64) {
        let m1 = |f: Vec<f64>| -> Vec<f64> { f.into_iter().map(|x| x - 1.0).collect() };
        (self.norm(&m1(self.v(g))), 14.0 * self.norm(&m1(self.v(g1))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{info_fn, PointSet};
    use crate::rat::{q, qi};
    use num::ToPrimitive;

    fn c(v: f64) -> StepFunction {
        StepFunction::constant(v)
    }

    /// Materialized values on the level-3 grid (6561 atoms).
    struct Dense(Vec<f64>);

    impl Dense {
        const LEVEL: u32 = 3;
        fn from(h: &StepFunction) -> Dense {
            let n = 6561i64;
            Dense((0..n).map(|k| h.eval(&q(k + 1, n)).unwrap()).collect())
        }
        fn v(&self, j: u32) -> Dense {
            let c = p2(j as i64);
            let block = 6561 / 3usize.pow(1 << j);
            let mut out = vec![0.0; self.0.len()];
            for (bi, chunk) in self.0.chunks(block).enumerate() {
                let ms = chunk.iter().map(|x| (x - c).max(0.0).powi(2)).sum::<f64>() / block as f64;
                for (k, x) in chunk.iter().enumerate() {
                    out[bi * block + k] = x.min(c) + ms.sqrt();
                }
            }
            Dense(out)
        }
        fn norm(&self) -> f64 {
            (self.0.iter().map(|x| x * x).sum::<f64>() / self.0.len() as f64).sqrt()
        }
    }

    #[test]
    fn v_step_examples() {
        assert_eq!(v_step(&c(2.0), 1).unwrap(), c(2.0));
        assert_eq!(v_step(&c(5.0), 1).unwrap(), c(5.0));
        let h = StepFunction::indicator_scaled(&qi(0), &q(1, 3), 2.0);
        let v = v_step(&h, 0).unwrap();
        assert!(v.sup_dist(&h) < 1e-15);
    }

    #[test]
    fn v_bar_examples() {
        assert_eq!(v_bar_step(&c(4.0), 2).unwrap(), c(8.0));
        assert_eq!(v_bar_step(&c(3.0), 2).unwrap(), c(3.0));
        assert_eq!(v_bar_step(&c(9.0), 2).unwrap(), c(9.0));
    }

    #[test]
    fn functional_examples() {
        assert_eq!(v_functional(&c(0.0)).unwrap(), 0.0);
        assert_eq!(v_functional(&c(1.0)).unwrap(), 1.0);
        let b = PointSet::new(vec![qi(0), q(1, 3), q(2, 3), qi(1)]).unwrap();
        assert_eq!(v_functional(&info_fn(&b, 3).clip_max(&1.0)).unwrap(), 1.0);
        let t = v_composite(&c(1.0), 0, 3).unwrap();
        assert!(t.levels.iter().all(|l| l.function == c(1.0)));
        assert_eq!(t.stabilization_level, 0);
    }

    #[test]
    fn matches_dense_oracle() {
        let b = PointSet::new(vec![qi(0), q(1, 9), qi(1)]).unwrap();
        let h = info_fn(&b, 3).clip_max(&1.0);
        let mut d = Dense::from(&h);
        for j in (0..=2).rev() {
            d = d.v(j);
        }
        let t = v_composite(&h, 0, 2).unwrap();
        assert!((t.value - d.norm()).abs() < 1e-9);
        assert!(Dense::LEVEL == 3);
    }

    #[test]
    fn select_blocks_examples() {
        let e = select_blocks(&[], 1).unwrap();
        assert!(e.b.is_empty() && e.blocks.is_empty());
        let s = select_blocks(&[0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(s.b, vec![2.0; 3]);
        assert_eq!(s.c, vec![0.0; 3]);
        assert_eq!(s.d, vec![0.0; 3]);
        assert_eq!(s.blocks.len(), 1);
        assert!(s.blocks[0].1 && s.precedes);
        let s = select_blocks(&[0.0, 5.0], 1).unwrap();
        assert_eq!((s.l, s.t), (1, 0));
        assert_eq!(s.b, vec![0.0, 5.0]);
        assert_eq!(s.c, vec![2.0, 2.0]);
        assert_eq!(s.d, vec![0.0, 0.0]);
        assert!(s.d_ok && s.sum_c2 <= s.c_bound);
    }

    #[test]
    fn run_selection_agrees_with_plain() {
        let a = [0.0, 0.5, 3.0, 3.0, 3.0, 1.0, 7.0, 0.0, 2.0, 9.0];
        let plain = select_blocks(&a, 1).unwrap();
        let runs: Vec<ExcessRun> = a
            .iter()
            .enumerate()
            .map(|(k, x)| ExcessRun {
                first: BigInt::from(k),
                count: 1,
                a: *x,
            })
            .collect();
        let rl = select_runs(&runs, 1).unwrap();
        for r in &rl.runs {
            let k = r.first.to_usize().unwrap();
            let want = if plain.c[k] > 0.0 {
                Treatment::C
            } else if plain.d[k] > 0.0 {
                Treatment::D
            } else {
                Treatment::Kept
            };
            assert_eq!(r.treatment, want, "index {k}");
        }
        assert_eq!(rl.sum_c2, plain.sum_c2);
    }

    #[test]
    fn type_j_identity_on_constant() {
        let out = apply_type_j(&c(32.0), 5).unwrap();
        assert_eq!(out.u, c(32.0));
        assert!(out.cert.ok);
        assert!(apply_type_j(&c(4.0), 2).is_err());
    }

    #[test]
    fn type_j_single_excess_atom() {
        // h = 2^5 everywhere, 2^6 + 3 on one level-6 atom.
        let n = rat::grid_size(6);
        let lo = Q::from_integer(n.clone() / 2) / Q::from_integer(n.clone());
        let hi = &lo + rat::atom_len(6);
        let h = StepFunction::constant(32.0).add(&StepFunction::indicator_scaled(&lo, &hi, 35.0));
        let out = apply_type_j(&h, 5).unwrap();
        assert!(out.cert.ok, "{:?}", out.cert);
        assert_eq!(out.f.max_value(), 32.0);
        assert_eq!(out.g.max_value(), 0.0);
        assert_eq!(out.u.eval(&hi).unwrap(), 67.0 - 32.0);
    }

    #[test]
    fn discrete_space_lemma() {
        let s = DiscreteSpace::new(vec![0.5, 0.5]).unwrap();
        let g = [9.0, 3.0];
        let g1 = [5.0, 2.0];
        assert!(s.hypotheses(&g, &g1));
        let (l, r) = s.sides(&g, &g1);
        assert!(l <= r);
    }
}
