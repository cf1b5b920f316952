//! Classical and information-function convergence criteria for finite
//! coefficient sequences.

use num::{BigInt, One, Zero};
use serde::Serialize;

use crate::info::{self, CoefficientSeq};
use crate::rat::{self, Q};
use crate::stepfn::StepFunction;
use crate::vcalc;
use crate::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// `log2 |a_n|` from the exact square.
fn log2_abs(sq: &Q) -> f64 {
    0.5 * rat::ln(sq) / LN2
}

/// `2^(-e)` as an exact rational.
fn pow2_neg(e: u64) -> Q {
    Q::new(BigInt::one(), num::pow(BigInt::from(2), e as usize))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    pub i: u32,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSum {
    pub total: f64,
    pub blocks: Vec<Block>,
    /// Squared mass `Σ |a_n|^2` outside every block.
    pub residual: f64,
    /// Value of the slice or block below the first summed index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub below: Option<f64>,
}

fn collect_blocks(terms: std::collections::BTreeMap<u32, f64>) -> (f64, Vec<Block>) {
    let blocks: Vec<Block> = terms
        .into_iter()
        .map(|(i, s)| Block { i, value: s.sqrt() })
        .collect();
    (blocks.iter().fold(0.0, |a, b| a + b.value), blocks)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylReport {
    pub weighted_sum: f64,
    /// `(n, r_n / log2^2 n)` for `n >= 2`.
    pub ratios: Vec<(usize, f64)>,
    pub max_ratio: f64,
    pub last_ratio: f64,
}

/// `Σ r_n |a_n|^2` and the ratios `r_n / log2^2 n`.
pub fn rm_weyl(seq: &CoefficientSeq, r: &[f64]) -> Result<WeylReport> {
    if r.len() != seq.len() {
        return Err(Error::Invalid(format!("{} weights for {} coefficients", r.len(), seq.len())));
    }
    let weighted_sum = seq
        .squares()
        .iter()
        .zip(r)
        .map(|(s, w)| w * rat::to_f64(s))
        .sum();
    let ratios: Vec<(usize, f64)> = (2..=r.len())
        .map(|n| (n, r[n - 1] / (n as f64).log2().powi(2)))
        .collect();
    let max_ratio = ratios.iter().map(|x| x.1).fold(0.0, f64::max);
    let last_ratio = ratios.last().map_or(0.0, |x| x.1);
    Ok(WeylReport {
        weighted_sum,
        ratios,
        max_ratio,
        last_ratio,
    })
}

/// `Σ |a_n|^2 log2^2 |a_n|` for non-increasing `|a_n|`.
pub fn alpha_condition(seq: &CoefficientSeq) -> Result<f64> {
    let sq = seq.squares();
    if let Some(k) = sq.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::Precondition(format!(
            "|a_n| must be non-increasing (a_{} < a_{})",
            k + 1,
            k + 2
        )));
    }
    Ok(sq
        .iter()
        .filter(|s| !s.is_zero())
        .map(|s| rat::to_f64(s) * log2_abs(s).powi(2))
        .sum())
}

/// Index `i >= 1` with `2^(-2^(i+1)) <= |a| < 2^(-2^i)`, decided on the exact square.
fn beta_block(sq: &Q) -> Option<u32> {
    if sq.is_zero() || *sq >= pow2_neg(4) {
        return None;
    }
    let mut i = 1u32;
    loop {
        // |a| >= 2^(-2^(i+1))  <=>  a^2 >= 2^(-2^(i+2))
        if *sq >= pow2_neg(1u64 << (i + 2)) {
            return Some(i);
        }
        i += 1;
    }
}

/// Index `i >= 1` with `2^i <= -log2 |a| < 2^(i+1)`, i.e. `2^(-2^(i+1)) < |a| <= 2^(-2^i)`.
fn proof_block(sq: &Q) -> Option<u32> {
    if sq.is_zero() || *sq > pow2_neg(4) {
        return None;
    }
    let mut i = 1u32;
    loop {
        if *sq > pow2_neg(1u64 << (i + 2)) {
            return Some(i);
        }
        i += 1;
    }
}

fn block_sum(seq: &CoefficientSeq, block: impl Fn(&Q) -> Option<u32>) -> BlockSum {
    let mut terms = std::collections::BTreeMap::new();
    let mut residual = 0.0;
    for s in seq.squares() {
        if s.is_zero() {
            continue;
        }
        let v = rat::to_f64(s);
        match block(s) {
            Some(i) => *terms.entry(i).or_insert(0.0) += v * log2_abs(s).powi(2),
            None => residual += v,
        }
    }
    let (total, blocks) = collect_blocks(terms);
    BlockSum {
        total,
        blocks,
        residual,
        below: None,
    }
}

/// `Σ_{i>=1} (Σ_{2^(-2^(i+1)) <= |a_n| < 2^(-2^i)} |a_n|^2 log2^2 |a_n|)^(1/2)`.
pub fn beta_condition(seq: &CoefficientSeq) -> BlockSum {
    block_sum(seq, beta_block)
}

/// The same block sum with blocks `2^(-2^(i+1)) < |a_n| <= 2^(-2^i)`.
pub fn beta_condition_closed_right(seq: &CoefficientSeq) -> BlockSum {
    block_sum(seq, proof_block)
}

/// `z ∧ 2^(i+1) - z ∧ 2^i`.
fn slice(z: f64, i: u32) -> f64 {
    let lo = 2f64.powi(i as i32);
    z.min(2.0 * lo) - z.min(lo)
}

/// `Σ_{i>=1} (Σ a_n^2 (-log2 a_n)_i^2)^(1/2)`; the `i = 0` slice `z ∧ 2` goes to `below`.
pub fn gamma_condition(seq: &CoefficientSeq) -> Result<BlockSum> {
    if seq.values().iter().any(|a| *a < 0.0) {
        return Err(Error::Precondition("gamma condition needs a_n >= 0".into()));
    }
    let mut terms = std::collections::BTreeMap::new();
    let mut below = 0.0;
    for s in seq.squares() {
        if s.is_zero() {
            continue;
        }
        let v = rat::to_f64(s);
        let z = -log2_abs(s);
        below += v * z.min(2.0).powi(2);
        let mut i = 1u32;
        while 2f64.powi(i as i32) < z {
            *terms.entry(i).or_insert(0.0) += v * slice(z, i).powi(2);
            i += 1;
        }
    }
    let (total, blocks) = collect_blocks(terms);
    Ok(BlockSum {
        total,
        blocks,
        residual: 0.0,
        below: Some(below.sqrt()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub a_minus: f64,
    pub a_plus: f64,
    pub b_minus: f64,
    pub b_plus: f64,
    pub gamma: f64,
    pub beta: f64,
    pub beta_closed_right: f64,
    pub gamma_in_a: bool,
    pub beta_in_b: bool,
    pub beta_closed_right_in_b: bool,
    pub b_minus_le_a_plus_le_b_plus: bool,
}

const SANDWICH_TOL: f64 = 1e-12;

/// The bounds `A±`, `B±` built from `u_i = 1{n : 2^i <= -log2 a_n < 2^(i+1)}`
/// in `L2(N, Σ a_n^2 δ_n)`.
pub fn sandwich_check(seq: &CoefficientSeq) -> Result<Sandwich> {
    let gamma = gamma_condition(seq)?.total;
    let beta = beta_condition(seq).total;
    let beta_cr = beta_condition_closed_right(seq).total;
    // ||u_i||^2 per block
    let mut u: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    for s in seq.squares() {
        if s.is_zero() {
            continue;
        }
        let z = -log2_abs(s);
        if z >= 2.0 {
            let mut i = 1u32;
            while 2f64.powi(i as i32 + 1) <= z {
                i += 1;
            }
            *u.entry(i).or_insert(0.0) += rat::to_f64(s);
        }
    }
    let top = u.keys().next_back().copied().unwrap_or(0);
    let tail = |i: u32| -> f64 { u.range(i..).map(|(_, v)| v).sum::<f64>().sqrt() };
    let (mut a_minus, mut a_plus, mut b_minus, mut b_plus) = (0.0, 0.0, 0.0, 0.0);
    for i in 1..=top {
        let w = 2f64.powi(i as i32);
        a_minus += w * tail(i + 1);
        a_plus += w * tail(i);
        let ui = u.get(&i).copied().unwrap_or(0.0).sqrt();
        b_minus += w * ui;
        b_plus += 2.0 * w * ui;
    }
    let within = |lo: f64, x: f64, hi: f64| lo <= x + SANDWICH_TOL * (1.0 + x) && x <= hi + SANDWICH_TOL * (1.0 + hi);
    Ok(Sandwich {
        gamma_in_a: within(a_minus, gamma, a_plus),
        beta_in_b: within(b_minus, beta, b_plus),
        beta_closed_right_in_b: within(b_minus, beta_cr, b_plus),
        b_minus_le_a_plus_le_b_plus: within(b_minus, a_plus, b_plus),
        a_minus,
        a_plus,
        b_minus,
        b_plus,
        gamma,
        beta,
        beta_closed_right: beta_cr,
    })
}

/// `Σ_{i>=0} (Σ_{2^(2^i) <= n < 2^(2^(i+1))} |a_n|^2 log2^2 n)^(1/2)`; `n = 1` lies
/// below every block and is reported as `residual`.
pub fn tandori_sum(seq: &CoefficientSeq) -> BlockSum {
    let mut terms = std::collections::BTreeMap::new();
    let mut residual = 0.0;
    for (k, s) in seq.squares().iter().enumerate() {
        let n = k + 1;
        if s.is_zero() {
            continue;
        }
        let v = rat::to_f64(s);
        if n < 2 {
            residual += v;
            continue;
        }
        let lg = (n as f64).log2();
        // 2^(2^i) <= n < 2^(2^(i+1))  <=>  2^i <= log2 n < 2^(i+1)
        let bits = usize::BITS - n.leading_zeros() - 1; // floor(log2 n)
        let mut i = 0u32;
        while (1u32 << (i + 1)) <= bits {
            i += 1;
        }
        *terms.entry(i).or_insert(0.0) += v * lg * lg;
    }
    let (total, blocks) = collect_blocks(terms);
    BlockSum {
        total,
        blocks,
        residual,
        below: None,
    }
}

/// Variable in the block indicator of the second refined condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    /// `1_(2^i <= I_B < 2^(i+1))`
    #[default]
    Ib,
    /// `1_(2^i <= H_B < 2^(i+1))` as printed
    Hb,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinedConditions {
    pub alpha1: f64,
    pub beta1: BlockSum,
    pub gamma1: BlockSum,
    pub indicator: Indicator,
}

/// `f_i = f ∧ 2^(i+1) - f ∧ 2^i`.
pub fn slice_fn(f: &StepFunction, i: u32) -> StepFunction {
    vcalc::band(f, i as i64)
}

/// `||I_B||`, `Σ_{i>=1} ||I_B 1_(2^i <= X < 2^(i+1))||` and `Σ_{i>=1} ||(I_B)_i||`
/// with `(I_B)_0 = I_B ∧ 2` reported in `gamma1.below`.
pub fn refined_conditions(seq: &CoefficientSeq, indicator: Indicator) -> Result<RefinedConditions> {
    if !seq.is_normalized() {
        return Err(Error::Precondition("Σ |a_n|^2 must equal 1".into()));
    }
    let b = info::tail_set(seq)?;
    let ib = info::info_fn(&b, 2);
    let x = match indicator {
        Indicator::Ib => ib.clone(),
        Indicator::Hb => info::info_fn(&b, 3),
    };
    let top = ib.max_value().max(x.max_value());
    let mut beta_blocks = Vec::new();
    let mut gamma_blocks = Vec::new();
    let mut i = 1u32;
    while 2f64.powi(i as i32) <= top {
        let lo = 2f64.powi(i as i32);
        let mask = x.map(|v| if *v >= lo && *v < 2.0 * lo { 1.0 } else { 0.0 });
        let bv = ib.mul(&mask).l2_norm();
        if bv > 0.0 {
            beta_blocks.push(Block { i, value: bv });
        }
        let gv = slice_fn(&ib, i).l2_norm();
        if gv > 0.0 {
            gamma_blocks.push(Block { i, value: gv });
        }
        i += 1;
    }
    let below_mask = x.map(|v| if *v < 2.0 { 1.0 } else { 0.0 });
    Ok(RefinedConditions {
        alpha1: ib.l2_norm(),
        beta1: BlockSum {
            total: beta_blocks.iter().map(|b| b.value).sum(),
            blocks: beta_blocks,
            residual: 0.0,
            below: Some(ib.mul(&below_mask).l2_norm()),
        },
        gamma1: BlockSum {
            total: gamma_blocks.iter().map(|b| b.value).sum(),
            blocks: gamma_blocks,
            residual: 0.0,
            below: Some(ib.clip_min(&2.0).l2_norm()),
        },
        indicator,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureCriterion {
    pub total: f64,
    /// `||H_i||` for `i >= 0`, with `H_0 = H ∧ 2`.
    pub slices: Vec<f64>,
}

/// `Σ_{i>=0} ||H_i||` for `H = -log3 P(Ω_n)` on atom `n`.
pub fn measure_criterion(probs: &[Q]) -> Result<MeasureCriterion> {
    if probs.is_empty() || probs.iter().any(|p| *p <= Q::zero()) {
        return Err(Error::Invalid("probabilities must be positive".into()));
    }
    let total = probs.iter().fold(Q::zero(), |a, p| a + p);
    if (rat::to_f64(&total) - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("probabilities sum to {}", rat::to_f64(&total))));
    }
    let hs: Vec<(f64, f64)> = probs.iter().map(|p| (rat::to_f64(p), rat::neg_log(p, 3))).collect();
    let top = hs.iter().map(|x| x.1).fold(0.0, f64::max);
    let mut slices = vec![hs.iter().map(|(p, h)| p * h.min(2.0).powi(2)).sum::<f64>().sqrt()];
    let mut i = 1u32;
    while 2f64.powi(i as i32) < top {
        slices.push(hs.iter().map(|(p, h)| p * slice(*h, i).powi(2)).sum::<f64>().sqrt());
        i += 1;
    }
    Ok(MeasureCriterion {
        total: slices.iter().sum(),
        slices,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionEntry {
    pub name: String,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<BlockSum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub n: usize,
    pub normalized: bool,
    pub entries: Vec<CriterionEntry>,
    pub v_trace: vcalc::VTrace,
}

/// Every criterion on one sequence (normalized first); the information-function
/// value `V h_B` uses `max(h_B, 1)`.
pub fn evaluate_all(seq: &CoefficientSeq, indicator: Indicator) -> Result<CriterionReport> {
    let normalized = seq.is_normalized();
    let s = seq.normalized()?;
    let mut entries = Vec::new();
    let entry = |name: &str, r: Result<f64>, breakdown: Option<BlockSum>| match r {
        Ok(v) => CriterionEntry {
            name: name.into(),
            value: Some(v),
            breakdown,
            note: None,
        },
        Err(e) => CriterionEntry {
            name: name.into(),
            value: None,
            breakdown: None,
            note: Some(e.to_string()),
        },
    };
    entries.push(entry("alpha", alpha_condition(&s), None));
    let beta = beta_condition(&s);
    entries.push(entry("beta", Ok(beta.total), Some(beta)));
    match gamma_condition(&s) {
        Ok(g) => entries.push(entry("gamma", Ok(g.total), Some(g))),
        Err(e) => entries.push(entry("gamma", Err(e), None)),
    }
    let t = tandori_sum(&s);
    entries.push(entry("tandori", Ok(t.total), Some(t)));
    let th = refined_conditions(&s, indicator)?;
    entries.push(entry("alpha1", Ok(th.alpha1), None));
    entries.push(entry("beta1", Ok(th.beta1.total), Some(th.beta1)));
    entries.push(entry("gamma1", Ok(th.gamma1.total), Some(th.gamma1)));
    let h = info::info_fn(&info::tail_set(&s)?, 3).clip_max(&1.0);
    let v_trace = vcalc::v_composite(&h, 0, vcalc::stabilization_level(&h))?;
    entries.push(entry("V h_B", Ok(v_trace.value), None));
    Ok(CriterionReport {
        n: s.len(),
        normalized,
        entries,
        v_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{q, qi};

    fn sq(v: &[(i64, i64)]) -> CoefficientSeq {
        CoefficientSeq::from_squares(&v.iter().map(|&(a, b)| q(a, b)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_condition(&sq(&[(1, 1)])).unwrap(), 0.0);
        let v = alpha_condition(&sq(&[(1, 2), (1, 4), (1, 4)])).unwrap();
        assert!((v - 0.625).abs() < 1e-15);
        assert!(alpha_condition(&sq(&[(1, 4), (1, 2)])).is_err());
        assert_eq!(alpha_condition(&sq(&[(1, 1), (0, 1)])).unwrap(), 0.0);
    }

    #[test]
    fn beta_gamma_examples() {
        let s = CoefficientSeq::from_rationals(&[q(1, 8)]);
        assert!((beta_condition(&s).total - 0.375).abs() < 1e-15);
        let g = gamma_condition(&s).unwrap();
        assert!((g.total - 0.125).abs() < 1e-15);
        let one = CoefficientSeq::from_rationals(&[qi(1)]);
        assert_eq!(beta_condition(&one).total, 0.0);
        assert_eq!(beta_condition(&one).residual, 1.0);
        assert_eq!(gamma_condition(&one).unwrap().total, 0.0);
        assert!(gamma_condition(&CoefficientSeq::from_rationals(&[q(-1, 8)])).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let s = CoefficientSeq::from_rationals(&[q(1, 8)]);
        let w = sandwich_check(&s).unwrap();
        assert_eq!(w.a_plus, w.b_minus);
        assert!(w.gamma_in_a && w.beta_in_b && w.b_minus_le_a_plus_le_b_plus);
        let z = sandwich_check(&CoefficientSeq::from_rationals(&[qi(0), qi(0)])).unwrap();
        assert_eq!((z.a_minus, z.a_plus, z.b_minus, z.b_plus), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn tandori_examples() {
        assert_eq!(tandori_sum(&CoefficientSeq::from_rationals(&[qi(1), qi(0)])).total, 0.0);
        let mut a = vec![qi(0); 15];
        for x in a.iter_mut().skip(3) {
            *x = q(1, 4);
        }
        let t = tandori_sum(&CoefficientSeq::from_rationals(&a));
        assert_eq!(t.blocks.len(), 1);
        assert_eq!(t.blocks[0].i, 1);
    }

    #[test]
    fn refined_condition_examples() {
        let s = sq(&[(1, 3), (1, 3), (1, 3)]);
        let t = refined_conditions(&s, Indicator::Ib).unwrap();
        let l3 = 3f64.log2();
        assert!((t.alpha1 - l3).abs() < 1e-12);
        assert_eq!(t.gamma1.total, 0.0);
        assert!((t.gamma1.below.unwrap() - l3).abs() < 1e-12);
        let t = refined_conditions(&sq(&[(1, 1)]), Indicator::Ib).unwrap();
        assert_eq!((t.alpha1, t.beta1.total, t.gamma1.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn measure_examples() {
        let u3 = vec![q(1, 3); 3];
        assert_eq!(measure_criterion(&u3).unwrap().total, 1.0);
        assert_eq!(measure_criterion(&[qi(1)]).unwrap().total, 0.0);
        assert_eq!(measure_criterion(&vec![q(1, 9); 9]).unwrap().total, 2.0);
        assert!(measure_criterion(&[q(1, 2)]).is_err());
    }

    #[test]
    fn weyl_examples() {
        let s = sq(&[(1, 2), (1, 4), (1, 4)]);
        let r: Vec<f64> = (1..=3).map(|n: i32| (n as f64).log2().powi(2)).collect();
        let w = rm_weyl(&s, &r).unwrap();
        assert!(w.ratios.iter().all(|x| (x.1 - 1.0).abs() < 1e-15));
        assert_eq!(rm_weyl(&s, &[0.0; 3]).unwrap().weighted_sum, 0.0);
        assert!(rm_weyl(&s, &[0.0; 2]).is_err());
    }
}
