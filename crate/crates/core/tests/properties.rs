use num::BigInt;
use orthoseries::info::{self, CoefficientSeq, PointSet};
use orthoseries::rat::{self, q, Q};
use orthoseries::sets::{self, ShiftMap};
use orthoseries::vcalc;
use orthoseries::{criteria, Step, StepFunction};
use proptest::prelude::*;

/// Step function on the level-2 grid (multiples of 1/81).
fn step_on_81() -> impl Strategy<Value = StepFunction> {
    prop::collection::vec((1i64..81, 0u32..64), 1..8).prop_map(|cuts| {
        let mut segs: Vec<(Q, Q, f64)> = Vec::new();
        let mut pts: Vec<i64> = cuts.iter().map(|c| c.0).collect();
        pts.sort_unstable();
        pts.dedup();
        let mut lo = 0;
        for (k, p) in pts.iter().chain(std::iter::once(&81)).enumerate() {
            if *p > lo {
                let v = cuts.get(k).map_or(0, |c| c.1) as f64 / 4.0;
                segs.push((q(lo, 81), q(*p, 81), v));
                lo = *p;
            }
        }
        Step::from_segments(segs, 0.0)
    })
}

fn rational() -> impl Strategy<Value = Q> {
    (-1000i64..1000, 1i64..1000).prop_map(|(n, d)| q(n, d))
}

proptest! {
    #[test]
    fn rationals_round_trip(x in rational()) {
        prop_assert_eq!(rat::parse(&rat::fmt(&x)).unwrap(), x);
    }

    #[test]
    fn norm_triangle(f in step_on_81(), g in step_on_81()) {
        prop_assert!(f.add(&g).l2_norm() <= f.l2_norm() + g.l2_norm() + 1e-12);
        prop_assert!((f.inner(&g) - g.inner(&f)).abs() < 1e-12);
    }

    #[test]
    fn v_step_is_monotone(f in step_on_81(), g in step_on_81(), j in 0u32..3) {
        let lo = f.min(&g);
        let a = vcalc::v_step(&lo, j).unwrap();
        let b = vcalc::v_step(&f, j).unwrap();
        prop_assert!(a.max_violation(&b) <= 1e-12);
        let c = 2f64.powi(j as i32);
        prop_assert!(f.clip_min(&c).max_violation(&b) <= 1e-12);
    }

    #[test]
    fn conditional_norm_keeps_mass(f in step_on_81(), j in 0u32..3) {
        let n = f.cond_norm(j).unwrap();
        prop_assert!((n.norm_sq() - f.norm_sq()).abs() < 1e-9);
        prop_assert!(n.is_measurable(j));
    }

    #[test]
    fn dyadic_floors_bracket(f in step_on_81()) {
        let h = f.clip_max(&1.0);
        let fl = info::dyadic_floor(&h).unwrap();
        let hf = info::dyadic_halffloor(&h).unwrap();
        prop_assert!(fl.le(&h));
        prop_assert_eq!(h.zip_with(&fl, |a, b| if *a < 2.0 * b { 0.0 } else { 1.0 }).max_value(), 0.0);
        prop_assert!(hf.le(&fl));
    }

    #[test]
    fn tail_sets_partition_unit(raw in prop::collection::vec(1i64..50, 1..12)) {
        let qs: Vec<Q> = raw.iter().map(|n| q(*n, 64)).collect();
        let seq = CoefficientSeq::from_rationals(&qs).normalized().unwrap();
        let b = info::tail_set(&seq).unwrap();
        prop_assert_eq!(b.points().first().cloned(), Some(rat::qi(0)));
        prop_assert_eq!(b.points().last().cloned(), Some(rat::qi(1)));
        let total: Q = b.gaps().map(|(a, c)| c - a).sum();
        prop_assert_eq!(total, rat::qi(1));
    }

    #[test]
    fn measure_criterion_ignores_order(raw in prop::collection::vec(1i64..20, 1..10), rot in 0usize..10) {
        let s: i64 = raw.iter().sum();
        let probs: Vec<Q> = raw.iter().map(|n| q(*n, s)).collect();
        let mut rotated = probs.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        let a = criteria::measure_criterion(&probs).unwrap().total;
        let b = criteria::measure_criterion(&rotated).unwrap().total;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn shifts_preserve_distributions(f in step_on_81(), m in 0u64..9, perm_seed in 0usize..362880) {
        let mut rest: Vec<usize> = (0..9).collect();
        let mut perm = Vec::with_capacity(9);
        let mut s = perm_seed;
        for k in (1..=9).rev() {
            perm.push(rest.remove(s % k));
            s /= k;
        }
        let sh = ShiftMap::new(1, BigInt::from(m), perm).unwrap();
        let g = sh.pushforward(&f);
        prop_assert_eq!(sets::distribution(&f), sets::distribution(&g));
    }

    #[test]
    fn generation_is_monotone(
        pts in prop::collection::vec((1i64..200, 201i64..400), 0..5),
        more in prop::collection::vec((1i64..200, 201i64..400), 0..3),
    ) {
        let a = PointSet::with_endpoints(pts.iter().map(|(n, d)| q(*n, *d)).collect()).unwrap();
        let extra = PointSet::with_endpoints(more.iter().map(|(n, d)| q(*n, *d)).collect()).unwrap();
        let g = sets::generate(&a);
        let g1 = sets::generate(&a.union(&extra));
        prop_assert!(g.triadic && g1.triadic);
        prop_assert!(g.generated.is_subset(&g1.generated));
    }
}
