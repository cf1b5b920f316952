//! Randomized suites for the inequalities and identities behind the
//! operator calculus, the geometry of generated sets and the constructions.
//!
//! A suite is a list of independent instances. Instance `k` draws from
//! [`gen::rng`] with stream `k` and a per-suite seed, so results do not depend
//! on thread count or scheduling; aggregation runs in instance order.

use std::collections::BTreeSet;

use num::{BigInt, ToPrimitive};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::construct;
use crate::gen::{self, InstanceRng};
use crate::info::{self, PointSet};
use crate::ortho::{self, OrthoProcess, OrthoVector, Scaling};
use crate::par;
use crate::rat::{self, Q};
use crate::sets::{self, ShiftChain, ShiftMap};
use crate::stepfn::StepFunction;
use crate::surd::Surd;
use crate::vcalc::{self, DiscreteSpace};
use crate::criteria;
use crate::{Error, Result};

pub const DEFAULT_INSTANCES: usize = 100;
const TOL: f64 = 1e-9;

/// Result of one instance: `slack ≥ 0` when the checked inequality holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub ok: bool,
    pub slack: f64,
    pub detail: String,
}

impl Check {
    fn le(lhs: f64, rhs: f64, what: impl Into<String>) -> Check {
        let ok = lhs <= rhs + TOL * (1.0 + rhs.abs());
        Check {
            ok,
            slack: rhs - lhs,
            detail: if ok { String::new() } else { format!("{}: {lhs} > {rhs}", what.into()) },
        }
    }

    fn flag(ok: bool, what: impl Into<String>) -> Check {
        Check {
            ok,
            slack: if ok { 0.0 } else { -1.0 },
            detail: if ok { String::new() } else { what.into() },
        }
    }

    fn and(self, o: Check) -> Check {
        let ok = self.ok && o.ok;
        let detail = match (self.detail.is_empty(), o.detail.is_empty()) {
            (true, _) => o.detail,
            (_, true) => self.detail,
            _ => format!("{}; {}", self.detail, o.detail),
        };
        Check {
            ok,
            slack: self.slack.min(o.slack),
            detail,
        }
    }

    fn all(checks: impl IntoIterator<Item = Check>) -> Check {
        checks.into_iter().fold(Check::flag(true, ""), Check::and)
    }
}

type Runner = fn(&mut InstanceRng, usize) -> Result<Check>;

pub struct Suite {
    pub id: &'static str,
    pub title: &'static str,
    /// Fixed instance count, or `None` to use the configured count.
    pub fixed: Option<usize>,
    run: Runner,
}

pub fn all_suites() -> Vec<Suite> {
    vec![
        Suite { id: "oracle", title: "V composite equals the dense-grid oracle", fixed: None, run: oracle },
        Suite { id: "ternary-family", title: "ternary family identities, k = 1..3", fixed: Some(3), run: family_identities },
        Suite { id: "binomial-tail", title: "binomial tail below e^(-k/144), k = 1..200", fixed: Some(200), run: binomial_tail },
        Suite { id: "type-descent", title: "type descent of V_j and V_j U", fixed: None, run: type_descent },
        Suite { id: "block-selection", title: "block selection postconditions", fixed: None, run: block_selection },
        Suite { id: "floor-comparison", title: "floor comparison, shifted to levels 1..i", fixed: None, run: floor_comparison },
        Suite { id: "level-eight-tail", title: "V h below the level-8 tail plus 2^8", fixed: None, run: level_eight_tail },
        Suite { id: "generated-sets", title: "generated sets: triadic, monotone, rho sums", fixed: None, run: geometry },
        Suite { id: "maximal-inequality", title: "maximal inequality on the ternary families", fixed: Some(3), run: maximal_inequality },
        Suite { id: "atom-maxima", title: "atom maxima of constructed processes", fixed: None, run: atom_maxima_bound },
        Suite { id: "v-bar-chain", title: "V-bar chain below the doubled V chain", fixed: None, run: v_bar_chain },
        Suite { id: "scalar-fourteen", title: "scalar comparison with factor 14", fixed: None, run: scalar_fourteen },
        Suite { id: "half-floor", title: "half floor comparison with factor 14", fixed: None, run: half_floor },
        Suite { id: "one-step-triangle", title: "triangle bound for one V_j step", fixed: None, run: one_step_triangle },
        Suite { id: "slice-bounds", title: "slice bounds for generated sets", fixed: None, run: slice_bounds },
        Suite { id: "rigid-shift", title: "V invariant under rigid shifts", fixed: Some(20), run: rigid_shift },
        Suite { id: "criteria", title: "sandwich bounds and permutation invariance", fixed: None, run: criteria_suite },
    ]
}

pub fn suite_ids() -> Vec<&'static str> {
    all_suites().iter().map(|s| s.id).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub instance: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub id: String,
    pub title: String,
    pub instances: usize,
    pub violations: usize,
    pub errors: usize,
    pub min_slack: f64,
    pub failures: Vec<Failure>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub instances: usize,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub instances: usize,
    /// Suite ids to run; all when empty.
    pub only: Vec<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            instances: DEFAULT_INSTANCES,
            only: Vec::new(),
        }
    }
}

const MAX_LISTED_FAILURES: usize = 5;

fn suite_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a keeps suites independent of each other's instance counts
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64 ^ seed, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn run_suite(s: &Suite, seed: u64, instances: usize) -> SuiteResult {
    let n = s.fixed.unwrap_or(instances);
    let base = suite_seed(seed, s.id);
    let outcomes = par::map_indexed(n, |k| {
        let mut r = gen::rng(base, k as u64);
        (s.run)(&mut r, k)
    });
    let mut res = SuiteResult {
        id: s.id.to_string(),
        title: s.title.to_string(),
        instances: n,
        violations: 0,
        errors: 0,
        min_slack: f64::INFINITY,
        failures: Vec::new(),
        passed: true,
    };
    for (k, o) in outcomes.into_iter().enumerate() {
        let detail = match o {
            Ok(c) => {
                res.min_slack = res.min_slack.min(c.slack);
                if c.ok {
                    continue;
                }
                res.violations += 1;
                c.detail
            }
            Err(e) => {
                res.errors += 1;
                format!("error: {e}")
            }
        };
        if res.failures.len() < MAX_LISTED_FAILURES {
            res.failures.push(Failure { instance: k, detail });
        }
    }
    if n == 0 {
        res.min_slack = 0.0;
    }
    res.passed = res.violations == 0 && res.errors == 0;
    res
}

pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let suites = all_suites();
    for id in &cfg.only {
        if !suites.iter().any(|s| s.id == id) {
            return Err(Error::Invalid(format!("unknown suite '{id}'")));
        }
    }
    let results: Vec<SuiteResult> = suites
        .iter()
        .filter(|s| cfg.only.is_empty() || cfg.only.iter().any(|o| o == s.id))
        .map(|s| run_suite(s, cfg.seed, cfg.instances))
        .collect();
    let passed = results.iter().all(|r| r.passed);
    Ok(VerifyReport {
        seed: cfg.seed,
        instances: cfg.instances,
        suites: results,
        passed,
    })
}

fn p2(j: i64) -> f64 {
    2f64.powi(j as i32)
}

fn norm(f: &StepFunction) -> f64 {
    f.l2_norm()
}

/// Materialized function on the 6561 atoms of level 3.
struct Dense(Vec<f64>);

impl Dense {
    const CELLS: i64 = 6561;

    fn from(h: &StepFunction) -> Result<Dense> {
        (0..Self::CELLS)
            .map(|k| h.eval(&rat::q(k + 1, Self::CELLS)))
            .collect::<Result<Vec<_>>>()
            .map(Dense)
    }

    fn v(&self, j: u32) -> Dense {
        let c = p2(j as i64);
        let block = Self::CELLS as usize / 3usize.pow(1 << j);
        let mut out = Vec::with_capacity(self.0.len());
        for chunk in self.0.chunks(block) {
            let ms = chunk.iter().map(|x| (x - c).max(0.0).powi(2)).sum::<f64>() / block as f64;
            out.extend(chunk.iter().map(|x| x.min(c) + ms.sqrt()));
        }
        Dense(out)
    }

    fn norm(&self) -> f64 {
        (self.0.iter().map(|x| x * x).sum::<f64>() / self.0.len() as f64).sqrt()
    }
}

fn oracle(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let h = gen::step_function(r, 3, 12, 0.0, 12.0);
    let top = r.gen_range(0..=2u32);
    let mut d = Dense::from(&h)?;
    for j in (0..=top).rev() {
        d = d.v(j);
    }
    let fast = vcalc::v_composite(&h, 0, top)?.value;
    let diff = (fast - d.norm()).abs();
    Ok(Check::le(diff, 1e-9, format!("|V_0..V_{top} h| differs from the oracle by {diff:e}")))
}

fn family_identities(_r: &mut InstanceRng, k: usize) -> Result<Check> {
    let rep = construct::family_check(k as u32 + 1)?;
    Ok(Check::flag(rep.ok, format!("k = {}: {rep:?}", k + 1)))
}

fn binomial_tail(_r: &mut InstanceRng, k: usize) -> Result<Check> {
    let rep = construct::bernstein_check(k as u32 + 1)?;
    Ok(Check::le(rep.tail_f64, rep.bound, format!("k = {}", k + 1)))
}

fn type_descent(r: &mut InstanceRng, k: usize) -> Result<Check> {
    let j = if k % 10 == 9 { 5 } else { 1 + (k % 3) as u32 };
    let h = gen::type_j_function(r, j);
    let pre = info::is_type_j(&h, j);
    if !pre.ok {
        return Err(Error::Precondition(format!("generator left T_{j}: {:?}", pre.reason)));
    }
    let v = vcalc::v_step(&h, j)?;
    let mut c = Check::flag(info::is_type_j(&v, j - 1).ok, format!("V_{j} h not of type {}", j - 1));
    if j >= 5 {
        let out = vcalc::apply_type_j(&h, j)?;
        c = c
            .and(Check::flag(out.cert.ok, format!("W_{j} certificate: {:?}", out.cert)))
            .and(Check::flag(info::is_type_j(&out.w, j - 1).ok, format!("V_{j} U h not of type {}", j - 1)));
    }
    Ok(c)
}

fn block_selection(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let i = r.gen_range(1..=3u32);
    let nu = vcalc::block_size(i) as usize;
    let pi = p2(i as i64);
    let len = r.gen_range(0..=3 * nu);
    let cluster = r.gen_range(0.0..p2(2 * i as i64));
    let a: Vec<f64> = (0..len)
        .map(|_| match r.gen_range(0..3) {
            0 => (cluster + r.gen_range(0..8) as f64 * pi / 8.0).min(p2(2 * i as i64)),
            1 => r.gen_range(0..=64) as f64 * p2(2 * i as i64) / 32.0,
            _ => r.gen_range(0..=16) as f64,
        })
        .collect();
    let s = vcalc::select_blocks(&a, i)?;
    let mut c = Check::le(s.sum_c2, s.c_bound, "sum of c_k^2")
        .and(Check::flag(s.d_ok && s.precedes, "reported postconditions"));
    let mut seen = BTreeSet::new();
    let mut in_s = vec![false; a.len()];
    for (idx, sel) in &s.blocks {
        c = c.and(Check::flag(idx.len() == nu, "block size"));
        for &o in idx {
            c = c.and(Check::flag(seen.insert(o), "blocks overlap"));
            in_s[o] = *sel;
        }
        if *sel {
            let m = idx.iter().map(|&o| a[o]).fold(f64::INFINITY, f64::min);
            c = c.and(Check::flag(idx.iter().all(|&o| s.b[o] <= 2.0 * pi + m), "b_k above 2^(i+1) + min a"));
        }
    }
    for k in 0..a.len() {
        let (b, cc, d) = (s.b[k], s.c[k], s.d[k]);
        c = c
            .and(Check::flag(b == a[k] || b == a[k] + pi, format!("b_{k} not a_k or a_k + 2^i")))
            .and(Check::flag(in_s[k] || b == a[k], format!("b_{k} moved outside S")))
            .and(Check::flag(cc >= 0.0 && d >= 0.0, "negative c or d"))
            .and(Check::le((a[k] + pi - b - cc - d).abs(), 0.0, format!("a_{k} + 2^i - b_k != c_k + d_k")))
            .and(Check::le(d, (a[k] + pi) / pi, format!("d_{k} bound")));
    }
    Ok(c)
}

fn floor_comparison(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let i = r.gen_range(1..=3u32);
    let h = gen::triadic_function(r, i);
    let uh = info::dyadic_floor(&h)?;
    // levels 1..i with threshold 2^0, measured on the atoms of (h >= 2^1)
    let on = h.map(|x| if *x >= 2.0 { 1.0 } else { 0.0 });
    let lhs = norm(&indicator_product(&vcalc::up(&vcalc::v_chain(&h, 1, i)?, 0), &on));
    let rhs = 3.0 * norm(&indicator_product(&vcalc::up(&vcalc::v_chain(&uh, 1, i)?, 0), &on));
    let lit_l = norm(&vcalc::up(&vcalc::v_chain(&h, 8, i)?, 7));
    let lit_r = 3.0 * norm(&vcalc::up(&vcalc::v_chain(&uh, 8, i)?, 7));
    Ok(Check::le(lhs, rhs, format!("shifted, i = {i}")).and(Check::le(lit_l, lit_r, "literal levels")))
}

fn level_eight_tail(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let i = r.gen_range(0..=3u32);
    let h = gen::triadic_function(r, i);
    let v = vcalc::v_functional(&h)?;
    let top = vcalc::stabilization_level(&h);
    let tail = norm(&vcalc::up(&vcalc::v_chain(&h, 8, top)?, 7));
    Ok(Check::le(v, tail + 256.0, "V h"))
}

fn geometry(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let a = gen::finite_set(r, 6);
    let g = sets::generate(&a);
    let rho = sets::rho_sums(&a, &g.generated);
    let extra = gen::finite_set(r, 3);
    let a1 = a.union(&extra);
    let g1 = sets::generate(&a1);
    let mono = sets::monotonicity_checks(&a, &a1)?;
    Ok(Check::all([
        Check::flag(g.triadic && sets::is_triadic_set(&g.generated).ok, "generated set not triadic"),
        Check::flag(g1.triadic, "generated superset not triadic"),
        Check::le(rat::to_f64(&rho.over_generated), 3.0, "sum over the generated set"),
        Check::le(rat::to_f64(&rho.over_base), 1.0, "sum over the base set"),
        Check::flag(rho.ok, "exact rho bounds"),
        Check::flag(mono.generated_subset, "generation not monotone"),
        Check::flag(mono.info_dominates && mono.info_dominates_larger, "h of generated set below h of base"),
    ]))
}

fn maximal_inequality(_r: &mut InstanceRng, k: usize) -> Result<Check> {
    let chi = OrthoVector::<Surd>::basis(0);
    let phis = construct::phi_family(k as u32 + 1, &chi)?;
    let rep = ortho::menshov_bound_check(&phis)?;
    Ok(Check::le(rep.lhs, rep.rhs, format!("N = {}", rep.n)))
}

/// `‖M_n^j‖` over the body and the external coordinates, for the atoms the
/// time set reaches.
pub fn atom_maxima(x: &OrthoProcess<f64>, j: u32) -> Result<Vec<(u64, f64)>> {
    let grid = ortho::m_grid(x, j)?;
    let len = rat::atom_len(j);
    grid.atoms
        .iter()
        .map(|(m, body)| {
            let lo = &len * Q::from_integer(BigInt::from(*m));
            let hi = &lo + &len;
            let base = x
                .value_at(&lo)
                .ok_or_else(|| Error::Precondition("process undefined at atom endpoint".into()))?;
            let mut ext_max: std::collections::BTreeMap<u64, f64> = Default::default();
            for (t, v) in x.times().iter().zip(x.values()) {
                if *t < lo || *t > hi {
                    continue;
                }
                let d = v.sub(base);
                for (id, c) in &d.ext {
                    let e = ext_max.entry(*id).or_insert(0.0);
                    *e = e.max(c.abs());
                }
            }
            let sq = body.norm_sq() + ext_max.values().map(|v| v * v).sum::<f64>();
            Ok((*m, sq.sqrt()))
        })
        .collect()
}

fn atom_maxima_bound(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let b = gen::triadic_set(r, 2, 0.5);
    let (cert, _) = construct::build_divergent::<Surd>(&b, 1.0)?;
    let mut c = Check::flag(
        cert.checks.ok && cert.checks.gram.exact_zero,
        format!("construction checks: {:?}", cert.checks),
    );
    let unit = 1.0 / (24.0 * 3f64.sqrt());
    let x = cert.process.to_f64().scaled(&unit, Scaling::Unit);
    let hb = info::info_fn(&b, 3);
    let mut i = 0u32;
    while hb.max_value() > p2(i as i64 + 1) {
        i += 1;
    }
    for j in 0..=i {
        let e = vcalc::up(&vcalc::v_bar_composite(&hb, j, i)?, j as i64);
        let len = rat::atom_len(j);
        for (m, lhs) in atom_maxima(&x, j)? {
            let lo = &len * Q::from_integer(BigInt::from(m));
            let hi = &lo + &len;
            let rhs = 3.0 * norm(&e.restrict(&lo, &hi));
            c = c.and(Check::le(lhs, rhs, format!("j = {j}, n = {m}")));
        }
    }
    Ok(c)
}

fn v_bar_chain(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let i = r.gen_range(1..=3u32);
    let j = r.gen_range(0..i);
    let h = gen::triadic_function(r, i);
    let lhs = vcalc::up(&vcalc::v_bar_composite(&h, j, i)?, j as i64);
    let rhs = vcalc::up(&vcalc::v_chain(&h, j, i)?.scale(&2.0), j as i64);
    let excess = lhs.max_violation(&rhs);
    Ok(Check::le(excess, 0.0, format!("pointwise, i = {i}, j = {j}")))
}

fn scalar_fourteen(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let n = r.gen_range(1..=10usize);
    let raw: Vec<u32> = (0..n).map(|_| r.gen_range(1..=20)).collect();
    let total: u32 = raw.iter().sum();
    let space = DiscreteSpace::new(raw.iter().map(|w| *w as f64 / total as f64).collect())?;
    let g1: Vec<f64> = (0..n).map(|_| 2.0 + r.gen_range(0..=48) as f64 / 4.0).collect();
    let mut g: Vec<f64> = g1.iter().map(|x| x + r.gen_range(0..=64) as f64 / 4.0).collect();
    for (gv, g1v) in g.iter_mut().zip(&g1) {
        if *gv >= 8.0 && *g1v < 4.0 {
            *gv = 7.75f64.max(*g1v);
        }
    }
    // pull g toward g1 until the hypotheses hold
    let mut tries = 0;
    while !space.hypotheses(&g, &g1) {
        tries += 1;
        if tries > 60 {
            g = g1.clone();
            break;
        }
        for (gv, g1v) in g.iter_mut().zip(&g1) {
            *gv = g1v + (*gv - g1v) / 2.0;
        }
    }
    if !space.hypotheses(&g, &g1) {
        return Err(Error::Precondition("no admissible pair".into()));
    }
    let (l, rr) = space.sides(&g, &g1);
    Ok(Check::le(l, rr, format!("atoms = {n}")))
}

fn half_floor(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let i = r.gen_range(0..=3u32);
    let h = gen::triadic_function(r, i);
    let hh = info::dyadic_halffloor(&h)?;
    let lhs = vcalc::v_composite(&h, 0, i)?.value;
    let rhs = 14.0 * vcalc::v_composite(&hh, 0, i)?.value;
    Ok(Check::le(lhs, rhs, format!("i = {i}")))
}

fn indicator_product(f: &StepFunction, a: &StepFunction) -> StepFunction {
    f.zip_with(a, |x, m| if *m != 0.0 { *x } else { 0.0 })
}

fn one_step_triangle(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let j = r.gen_range(1..=3u32) as i64;
    let g = gen::step_function(r, 3, 10, 1.0, 20.0);
    let h = g.add(&gen::step_function(r, 3, 10, 0.0, 12.0));
    let a = vcalc::atom_hull(&h, j as u32);
    let lhs = norm(&vcalc::up(&vcalc::v_step(&h, j as u32)?, j - 1).sub(&vcalc::up(&vcalc::v_step(&g, j as u32)?, j - 1)));
    let rhs = norm(&vcalc::up(&h, j).sub(&vcalc::up(&g, j)))
        + norm(&indicator_product(&vcalc::down(&h, j).sub(&vcalc::down(&g, j)), &a))
        + norm(&vcalc::band(&h, j - 1).sub(&vcalc::band(&g, j - 1)));
    Ok(Check::le(lhs, rhs, format!("j = {j}")))
}

/// `(g, h, A)` for a set `B`: `g = V_(j+1)…V_i max(h_B, 1)`,
/// `h = V_(j+1)…V_i (max(h_B, 1) ∨ half_floor(h_B̃))`.
pub fn slice_pair(b: &PointSet, j: u32, i: u32) -> Result<(StepFunction, StepFunction, StepFunction)> {
    let hb = info::info_fn(b, 3).clip_max(&1.0);
    let gen_b = sets::generate(b).generated;
    let hh = info::dyadic_halffloor(&info::info_fn(&gen_b, 3))?;
    let g = vcalc::v_chain(&hb, j + 1, i)?;
    let h = vcalc::v_chain(&hb.max(&hh), j + 1, i)?;
    let a = vcalc::atom_hull(&h, j);
    Ok((g, h, a))
}

fn slice_bounds(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let b = gen::finite_set(r, 6);
    let j = r.gen_range(0..=2u32);
    let i = j + 1 + r.gen_range(0..=2u32);
    let (g, h, a) = slice_pair(&b, j, i)?;
    let ji = j as i64;
    let l32 = norm(&vcalc::band(&h, ji - 1).sub(&vcalc::band(&g, ji - 1)));
    let r32 = p2(ji) * 3f64.powf(-p2(ji - 1));
    let l33 = norm(&indicator_product(&vcalc::down(&h, ji).sub(&vcalc::down(&g, ji)), &a));
    let r33 = p2(ji + 1) * 3f64.powf(-p2(ji - 2));
    Ok(Check::le(l32, r32, format!("slice bound, j = {j}, i = {i}"))
        .and(Check::le(l33, r33, format!("floor bound on A, j = {j}, i = {i}"))))
}

fn rigid_shift(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let j = r.gen_range(0..=1u32);
    let m = r.gen_range(0..rat::grid_size(j).to_u64().expect("small"));
    let b = gen::with_full_atom(&gen::triadic_set(r, 2, 0.5), j, m);
    let n = 3usize.pow(1 << j);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(r);
    let s = ShiftMap::new(j, BigInt::from(m), perm)?;
    if !sets::is_rigid_for(&b, &s) {
        return Err(Error::Precondition("shift is not rigid for B".into()));
    }
    let (v, vs) = sets::shift_invariance(&b, &ShiftChain(vec![s]), 3)?;
    Ok(Check::le((v - vs).abs(), 0.0, format!("j = {j}, m = {m}: {v} vs {vs}")))
}

fn criteria_suite(r: &mut InstanceRng, _k: usize) -> Result<Check> {
    let seq = gen::coefficients(r, 40);
    let w = criteria::sandwich_check(&seq)?;
    let mut perm: Vec<usize> = (0..seq.len()).collect();
    perm.shuffle(r);
    let p = seq.permuted(&perm);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
    let beta = (criteria::beta_condition(&seq).total, criteria::beta_condition(&p).total);
    let gamma = (criteria::gamma_condition(&seq)?.total, criteria::gamma_condition(&p)?.total);
    Ok(Check::all([
        Check::flag(w.b_minus_le_a_plus_le_b_plus, format!("B- <= A+ <= B+: {w:?}")),
        Check::flag(w.gamma_in_a, format!("gamma outside [A-, A+]: {w:?}")),
        Check::flag(w.beta_in_b, format!("beta outside [B-, B+]: {w:?}")),
        Check::flag(close(beta.0, beta.1), format!("beta changed under permutation: {beta:?}")),
        Check::flag(close(gamma.0, gamma.1), format!("gamma changed under permutation: {gamma:?}")),
    ]))
}

/// A stored instance checked outside the random suites.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "check")]
pub enum Fixture {
    #[serde(rename = "gram")]
    Gram { times: Vec<String>, values: Vec<FixtureVector> },
    #[serde(rename = "rho-sums")]
    Rho { base: PointSet, generated: PointSet },
    #[serde(rename = "v-bar-chain")]
    VBar { h: StepFunction, i: u32, j: u32 },
    #[serde(rename = "scalar-fourteen")]
    Scalar { weights: Vec<f64>, g: Vec<f64>, g1: Vec<f64> },
    #[serde(rename = "half-floor")]
    HalfFloor { h: StepFunction, i: u32 },
}

#[derive(Clone, Debug, Deserialize)]
pub struct FixtureVector {
    pub body: StepFunction,
    #[serde(default)]
    pub ext: std::collections::BTreeMap<u64, f64>,
}

impl Fixture {
    pub fn id(&self) -> &'static str {
        match self {
            Fixture::Gram { .. } => "gram",
            Fixture::Rho { .. } => "rho-sums",
            Fixture::VBar { .. } => "v-bar-chain",
            Fixture::Scalar { .. } => "scalar-fourteen",
            Fixture::HalfFloor { .. } => "half-floor",
        }
    }

    pub fn check(&self) -> Result<Check> {
        match self {
            Fixture::Gram { times, values } => {
                let ts = times.iter().map(|t| rat::parse(t)).collect::<Result<Vec<_>>>()?;
                let vs = values
                    .iter()
                    .map(|v| OrthoVector { body: v.body.clone(), ext: v.ext.clone() })
                    .collect();
                let x = OrthoProcess::new(ts, vs, Scaling::Unit)?;
                let rep = ortho::gram_check(&x);
                Ok(Check::le(rep.max_deviation, 0.0, format!("gram deviation at {:?}", rep.worst_pair)))
            }
            Fixture::Rho { base, generated } => {
                let tri = sets::is_triadic_set(generated);
                let rho = sets::rho_sums(base, generated);
                Ok(Check::flag(tri.ok, format!("not triadic: {:?}", tri.witness))
                    .and(Check::le(rat::to_f64(&rho.over_generated), 3.0, "sum over the generated set"))
                    .and(Check::le(rat::to_f64(&rho.over_base), 1.0, "sum over the base set")))
            }
            Fixture::VBar { h, i, j } => {
                if j >= i {
                    return Err(Error::Invalid("need j < i".into()));
                }
                let lhs = vcalc::up(&vcalc::v_bar_composite(h, *j, *i)?, *j as i64);
                let rhs = vcalc::up(&vcalc::v_chain(h, *j, *i)?.scale(&2.0), *j as i64);
                Ok(Check::le(lhs.max_violation(&rhs), 0.0, "pointwise"))
            }
            Fixture::Scalar { weights, g, g1 } => {
                let s = DiscreteSpace::new(weights.clone())?;
                if g.len() != weights.len() || g1.len() != weights.len() {
                    return Err(Error::Invalid("length mismatch".into()));
                }
                if !s.hypotheses(g, g1) {
                    return Err(Error::Precondition("hypotheses of the scalar lemma fail".into()));
                }
                let (l, r) = s.sides(g, g1);
                Ok(Check::le(l, r, "scalar comparison"))
            }
            Fixture::HalfFloor { h, i } => {
                let hh = info::dyadic_halffloor(h)?;
                let l = vcalc::v_composite(h, 0, *i)?.value;
                let r = 14.0 * vcalc::v_composite(&hh, 0, *i)?.value;
                Ok(Check::le(l, r, "half floor comparison"))
            }
        }
    }
}

/// Checks a JSON fixture; the result carries the fixture's check id.
pub fn check_fixture(v: &Value) -> Result<SuiteResult> {
    let f: Fixture = serde_json::from_value(v.clone()).map_err(|e| Error::Invalid(format!("fixture: {e}")))?;
    let c = f.check()?;
    Ok(SuiteResult {
        id: f.id().to_string(),
        title: "fixture".into(),
        instances: 1,
        violations: usize::from(!c.ok),
        errors: 0,
        min_slack: c.slack,
        failures: if c.ok {
            Vec::new()
        } else {
            vec![Failure { instance: 0, detail: c.detail }]
        },
        passed: c.ok,
    })
}

/// Exceedance of `max |X|` over `y` for a unit process, exact.
pub fn unit_exceedance(x: &OrthoProcess<f64>, y: f64) -> Result<Q> {
    let m = ortho::maximal_function(x, None, true)?;
    Ok(ortho::exceedance(&m, &y, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepfn::Step;

    #[test]
    fn suites_pass_small() {
        let cfg = VerifyConfig {
            seed: 0,
            instances: 8,
            only: Vec::new(),
        };
        let rep = run(&cfg).unwrap();
        for s in &rep.suites {
            assert!(s.passed, "{} {:?}", s.id, s.failures);
        }
    }

    #[test]
    fn floor_comparison_needs_the_top_atoms() {
        let h = Step::constant(200.0);
        let uh = info::dyadic_floor(&h).unwrap();
        let l = norm(&vcalc::up(&vcalc::v_chain(&h, 8, 8).unwrap(), 7));
        let r = norm(&vcalc::up(&vcalc::v_chain(&uh, 8, 8).unwrap(), 7));
        assert_eq!((l, r), (72.0, 0.0));
    }

    #[test]
    fn unknown_suite_rejected() {
        let cfg = VerifyConfig {
            only: vec!["nope".into()],
            ..Default::default()
        };
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn fixtures_report_their_check() {
        let good = serde_json::json!({
            "check": "scalar-fourteen", "weights": [0.5, 0.5], "g": [9.0, 3.0], "g1": [5.0, 2.0]
        });
        assert!(check_fixture(&good).unwrap().passed);
        let bad = serde_json::json!({
            "check": "gram", "times": ["0", "1/2", "1"],
            "values": [
                {"body": {"breakpoints": ["1"], "values": [0.0]}},
                {"body": {"breakpoints": ["1"], "values": [1.0]}},
                {"body": {"breakpoints": ["1"], "values": [1.0]}}
            ]
        });
        let r = check_fixture(&bad).unwrap();
        assert!(!r.passed);
        assert_eq!(r.id, "gram");
    }
}
