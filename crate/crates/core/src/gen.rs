//! Seeded random instances: triadic sets, triadic and type-`j` functions,
//! finite sets, step functions and coefficient sequences.
//!
//! Every generator draws from a [`ChaCha8Rng`]; instance `k` of a run with
//! seed `s` uses stream `k` of the generator seeded with `s`, so instances are
//! independent of evaluation order.

use num::{BigInt, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::info::{CoefficientSeq, PointSet};
use crate::rat::{self, q, Q};
use crate::sets;
use crate::stepfn::{Step, StepFunction};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64, stream: u64) -> InstanceRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Number of level-`(j+1)` atoms inside one level-`j` atom.
fn children(j: u32) -> u64 {
    3u64.pow(1 << j)
}

/// Random contiguous runs of children `[first, first + len)` of one atom.
fn random_runs(r: &mut InstanceRng, n: u64, max_runs: usize) -> Vec<(u64, u64)> {
    let count = r.gen_range(1..=max_runs);
    let mut runs: Vec<(u64, u64)> = Vec::new();
    for _ in 0..count {
        let first = r.gen_range(0..n);
        let cap = (n - first).min(1 + n / 3);
        let len = r.gen_range(1..=cap);
        runs.push((first, len));
    }
    runs.sort();
    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (f, l) in runs {
        match merged.last_mut() {
            Some(last) if last.0 + last.1 >= f => last.1 = last.1.max(f + l - last.0),
            _ => merged.push((f, l)),
        }
    }
    merged
}

/// Triadic set with points of grid level at most `max_level`: each atom whose
/// endpoints are present is refined with probability `p` by adding the
/// endpoints of a few runs of its sub-atoms.
pub fn triadic_set(r: &mut InstanceRng, max_level: u32, p: f64) -> PointSet {
    let mut pts: Vec<Q> = vec![Q::zero(), q(1, 3), q(2, 3), Q::from_integer(1.into())];
    let mut active: Vec<(Q, u32)> = (0..3).map(|n| (q(n, 3), 0)).collect();
    for _ in 1..=max_level {
        let mut next = Vec::new();
        for (lo, j) in &active {
            if !r.gen_bool(p) {
                continue;
            }
            let len = rat::atom_len(j + 1);
            for (first, cnt) in random_runs(r, children(*j), 2) {
                for c in first..first + cnt {
                    let a = lo + &len * Q::from_integer(c.into());
                    pts.push(&a + &len);
                    next.push((a.clone(), j + 1));
                    pts.push(a);
                }
            }
        }
        active = next;
    }
    let set = PointSet::new(pts).expect("points in [0,1] with endpoints");
    debug_assert!(sets::is_triadic_set(&set).ok);
    set
}

/// `B` with every level-`(j+1)` grid point of the level-`j` atom `m` added.
pub fn with_full_atom(b: &PointSet, j: u32, m: u64) -> PointSet {
    let len = rat::atom_len(j);
    let sub = rat::atom_len(j + 1);
    let lo = &len * Q::from_integer(m.into());
    let k = children(j);
    let mut pts = b.points().to_vec();
    pts.extend((0..=k).map(|c| &lo + &sub * Q::from_integer(c.into())));
    PointSet::new(pts).expect("grid points")
}

/// Finite set satisfying the tail condition: `{0, 1}` and up to `n_max` points
/// `k/d` with `d` drawn from a few triadic and dyadic denominators.
pub fn finite_set(r: &mut InstanceRng, n_max: usize) -> PointSet {
    const DENOMS: [i64; 8] = [2, 3, 7, 9, 16, 27, 81, 250];
    let n = r.gen_range(0..=n_max);
    let mut pts = vec![Q::zero(), Q::from_integer(1.into())];
    for _ in 0..n {
        let d = *DENOMS.choose(r).expect("non-empty");
        pts.push(q(r.gen_range(1..d), d));
    }
    PointSet::new(pts).expect("points in [0,1]")
}

/// Step function with at most `pieces` pieces, breakpoints on the level-`level`
/// grid and values drawn from `lo + m·(hi − lo)/16`.
pub fn step_function(r: &mut InstanceRng, level: u32, pieces: usize, lo: f64, hi: f64) -> StepFunction {
    let n = rat::grid_size(level).to_u64().expect("small level");
    let cuts = r.gen_range(0..pieces.max(1));
    let mut bps: Vec<u64> = (0..cuts).map(|_| r.gen_range(1..n)).collect();
    bps.sort_unstable();
    bps.dedup();
    bps.push(n);
    let nq = Q::from_integer(BigInt::from(n));
    let segs = bps
        .iter()
        .scan(0u64, |prev, &b| {
            let seg = (Q::from_integer((*prev).into()) / &nq, Q::from_integer(b.into()) / &nq);
            *prev = b;
            Some(seg)
        })
        .map(|(a, b)| (a, b, lo + (hi - lo) * r.gen_range(0..=16) as f64 / 16.0))
        .collect();
    Step::from_segments(segs, lo)
}

struct Region {
    lo: Q,
    hi: Q,
    level: u32,
}

/// Nested regions: `(0, 1]` split into runs of level-`j` atoms carrying
/// level `≥ j`, down to level `top`.
fn nested_regions(r: &mut InstanceRng, top: u32, p: f64) -> Vec<Region> {
    let mut out = Vec::new();
    fill(r, &Q::zero(), &Q::from_integer(1.into()), 0, top, p, &mut out);
    out
}

/// `(lo, hi]` is `(0, 1]` for `level = 0` and a level-`level` atom otherwise.
fn fill(r: &mut InstanceRng, lo: &Q, hi: &Q, level: u32, top: u32, p: f64, out: &mut Vec<Region>) {
    if level >= top || !r.gen_bool(p) {
        out.push(Region { lo: lo.clone(), hi: hi.clone(), level });
        return;
    }
    let sub = rat::atom_len(level + 1);
    let n = if level == 0 { 9 } else { children(level) };
    let mut cursor = lo.clone();
    for (first, cnt) in random_runs(r, n, 3) {
        let a = lo + &sub * Q::from_integer(first.into());
        if a > cursor {
            out.push(Region { lo: cursor.clone(), hi: a.clone(), level });
        }
        // recurse into at most three children of the run; the rest stay whole
        let mut picks: Vec<u64> = if cnt <= 3 {
            (first..first + cnt).collect()
        } else {
            (0..3).map(|_| r.gen_range(first..first + cnt)).collect()
        };
        picks.sort_unstable();
        picks.dedup();
        let mut run_cursor = first;
        for c in picks {
            if c > run_cursor {
                let s = lo + &sub * Q::from_integer(run_cursor.into());
                let e = lo + &sub * Q::from_integer(c.into());
                out.push(Region { lo: s, hi: e, level: level + 1 });
            }
            let s = lo + &sub * Q::from_integer(c.into());
            let e = &s + &sub;
            fill(r, &s, &e, level + 1, top, p, out);
            run_cursor = c + 1;
        }
        if run_cursor < first + cnt {
            let s = lo + &sub * Q::from_integer(run_cursor.into());
            let e = lo + &sub * Q::from_integer((first + cnt).into());
            out.push(Region { lo: s, hi: e, level: level + 1 });
        }
        cursor = lo + &sub * Q::from_integer((first + cnt).into());
    }
    if &cursor < hi {
        out.push(Region { lo: cursor, hi: hi.clone(), level });
    }
}

fn dyadic_value(r: &mut InstanceRng, base: f64) -> f64 {
    base * (1.0 + r.gen_range(0..8) as f64 / 8.0)
}

/// Triadic function `1 ≤ h < 2^(i+1)`: `(h ≥ 2^j)` is a union of level-`j`
/// atoms, values on `(2^l ≤ h < 2^(l+1))` vary on up to two sub-pieces.
pub fn triadic_function(r: &mut InstanceRng, i: u32) -> StepFunction {
    let regions = nested_regions(r, i, 0.7);
    let mut segs = Vec::with_capacity(2 * regions.len());
    for reg in regions {
        let base = 2f64.powi(reg.level as i32);
        if r.gen_bool(0.5) {
            let mid = &reg.lo + (&reg.hi - &reg.lo) * q(r.gen_range(1..4), 4);
            let (v1, v2) = (dyadic_value(r, base), dyadic_value(r, base));
            segs.push((reg.lo, mid.clone(), v1));
            segs.push((mid, reg.hi, v2));
        } else {
            let v = dyadic_value(r, base);
            segs.push((reg.lo, reg.hi, v));
        }
    }
    Step::from_segments(segs, 1.0)
}

/// Function of type `j`: values `2^l` below `2^(j+1)`, and on a few runs of
/// level-`(j+1)` atoms inside `(h ≥ 2^j)` values `2^(j+1) + a` with `a ≥ 0`.
pub fn type_j_function(r: &mut InstanceRng, j: u32) -> StepFunction {
    let regions = nested_regions(r, j, 0.8);
    let mut segs = Vec::new();
    let fine = rat::atom_len(j + 1);
    let per = children(j);
    let top = 2f64.powi(j as i32 + 1);
    for reg in regions {
        let base = 2f64.powi(reg.level as i32);
        if reg.level < j || !r.gen_bool(0.7) {
            segs.push((reg.lo, reg.hi, base));
            continue;
        }
        // reg is a run of level-j atoms; elevate sub-atom runs in up to two of them
        let atoms = ((&reg.hi - &reg.lo) / rat::atom_len(j)).to_integer().to_u64().unwrap_or(1);
        let mut picks: Vec<u64> = (0..2).map(|_| r.gen_range(0..atoms)).collect();
        picks.sort_unstable();
        picks.dedup();
        let mut cursor = reg.lo.clone();
        for a in picks {
            let alo = &reg.lo + rat::atom_len(j) * Q::from_integer(a.into());
            for (first, cnt) in random_runs(r, per, 3) {
                let s = &alo + &fine * Q::from_integer(first.into());
                let e = &alo + &fine * Q::from_integer((first + cnt).into());
                if s > cursor {
                    segs.push((cursor.clone(), s.clone(), base));
                }
                segs.push((s, e.clone(), top + top * r.gen_range(0..=12) as f64 / 4.0));
                cursor = e;
            }
        }
        if cursor < reg.hi {
            segs.push((cursor, reg.hi, base));
        }
    }
    Step::from_segments(segs, 1.0)
}

/// Random `(a_n)` with `Σ a_n² = 1`, squares exact rationals, some entries tiny.
pub fn coefficients(r: &mut InstanceRng, n_max: usize) -> CoefficientSeq {
    let n = r.gen_range(1..=n_max);
    let raw: Vec<Q> = (0..n)
        .map(|_| {
            let e = r.gen_range(0..24);
            Q::new(BigInt::from(r.gen_range(1..=9)), BigInt::from(2).pow(e))
        })
        .collect();
    let total = raw.iter().fold(Q::zero(), |a, x| a + x);
    let sq: Vec<Q> = raw.into_iter().map(|x| x / &total).collect();
    CoefficientSeq::from_squares(&sq).expect("positive squares")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info;

    #[test]
    fn streams_are_reproducible() {
        let a = triadic_set(&mut rng(7, 3), 2, 0.6);
        let b = triadic_set(&mut rng(7, 3), 2, 0.6);
        assert_eq!(a, b);
        let c = triadic_function(&mut rng(1, 0), 3);
        assert_eq!(c, triadic_function(&mut rng(1, 0), 3));
    }

    #[test]
    fn generated_sets_are_triadic() {
        for k in 0..40 {
            let b = triadic_set(&mut rng(11, k), 2, 0.6);
            let chk = sets::is_triadic_set(&b);
            assert!(chk.ok, "{b:?} {chk:?}");
            assert!(b.points().iter().all(|t| sets::grid_level(t).unwrap() <= 2));
            let m = k % 3;
            assert!(sets::is_triadic_set(&with_full_atom(&b, 0, m)).ok);
        }
    }

    #[test]
    fn generated_functions_are_triadic() {
        for k in 0..40 {
            let i = (k % 4) as u32;
            let h = triadic_function(&mut rng(5, k), i);
            assert!(info::is_triadic_fn(&h).ok, "{h:?}");
            assert!(h.max_value() < 2f64.powi(i as i32 + 1) && h.min_value() >= 1.0);
            let j = 1 + (k % 3) as u32;
            let t = type_j_function(&mut rng(5, k), j);
            let chk = info::is_type_j(&t, j);
            assert!(chk.ok, "{j} {:?}", chk.reason);
        }
    }

    #[test]
    fn coefficient_sequences_are_normalized() {
        let s = coefficients(&mut rng(3, 1), 30);
        assert!(s.is_normalized());
        let f = step_function(&mut rng(3, 2), 2, 6, 0.0, 8.0);
        assert!(f.num_pieces() <= 6 && f.min_value() >= 0.0);
    }
}
