//! Independent recomputations checked against the library.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use schmidt_core::dangerous_sets::*;
use schmidt_core::exact_arith::*;
use schmidt_core::game_engine::*;
use schmidt_core::poly::Poly;
use schmidt_core::problem_model::*;
use schmidt_core::verifier::*;

/// Every primitive line through `(p, r, q)` with `|A| <= q^i`, `|B| <= q^j`.
fn all_dual_lines(p: i64, r: i64, q: i64, w: &Weights) -> Vec<(i64, i64, i64)> {
    let amax = floor_pow(&q.into(), &w.i).to_i64().unwrap();
    let bmax = floor_pow(&q.into(), &w.j).to_i64().unwrap();
    let mut out = Vec::new();
    for a in -amax..=amax {
        for b in -bmax..=bmax {
            if a == 0 && b == 0 {
                continue;
            }
            let s = a * p + b * r;
            if s % q != 0 {
                continue;
            }
            let c = -s / q;
            if a.gcd(&b).gcd(&c) == 1 {
                out.push((a, b, c));
            }
        }
    }
    out
}

#[test]
fn assigned_dual_line_is_among_brute_force_lines() {
    let w = Weights::half();
    for q in 1..=60 {
        for p in 0..=q {
            for r in 0..=q {
                if p.gcd(&r).gcd(&q) != 1 {
                    continue;
                }
                let all = all_dual_lines(p, r, q, &w);
                assert!(!all.is_empty(), "no line through ({p},{r},{q})");
                let l = assign_dual_line(&RationalPoint::new(p, r, q).unwrap(), &w).unwrap();
                assert!(all.contains(&(l.a, l.b, l.c)), "({p},{r},{q}) got {l:?}");
            }
        }
    }
}

/// `q^(1/2) d < c` decided as `q d^2 < c^2`.
fn half_weight_violates(q: u64, x: &Rat, y: &Rat, c: &Rat) -> bool {
    let qr = ri(q);
    let dx = dist_to_nearest_int(&(&qr * x));
    let dy = dist_to_nearest_int(&(&qr * y));
    let c2 = c * c;
    &qr * &dx * &dx < c2 && &qr * &dy * &dy < c2
}

#[test]
fn check_avoids_matches_squared_criterion() {
    let w = Weights::half();
    let c = rat(1, 5);
    for (xn, yn) in [(1, 3), (2, 7), (5, 11), (13, 17), (3, 29)] {
        let (x, y) = (rat(xn, 37), rat(yn, 41));
        let rep = check_avoids(&x, &y, &w, &Anchor::zero(), &c, 200);
        let expect: Vec<u64> = (1..=200).filter(|&q| half_weight_violates(q, &x, &y, &c)).collect();
        assert_eq!(rep.violations, expect, "x={x} y={y}");
    }
}

/// Line points by direct scan: `(p, r, q)` reduced, `p/q` within `c` of
/// `A0`, `|a p + b q - r| < kappa c q^-j`, `Delta` meeting `A0`, and
/// `q|E|` in the level band.
fn brute_line_points(line: &LineSpec, k: &LineConstants, a0: &Interval, n: u32, cap: i64) -> BTreeSet<RationalPoint> {
    let kc = &k.kappa * &k.c;
    let mut out = BTreeSet::new();
    for q in 1..=cap {
        let qr = ri(q);
        let plo = ceil_rat(&((&a0.lo - &k.c) * &qr)).to_i64().unwrap();
        let phi = floor_rat(&((&a0.hi + &k.c) * &qr)).to_i64().unwrap();
        for p in plo..=phi {
            let t = &line.a * ri(p) + &line.b * &qr;
            let base = floor_rat(&t).to_i64().unwrap();
            for r in base - 1..=base + 2 {
                if p.gcd(&r).gcd(&q) != 1 {
                    continue;
                }
                let gap = (&t - ri(r)).abs();
                if PowProd::pow(qr.clone(), -k.weights.j.clone()).times_rat(&kc).cmp_rat(&gap)
                    != std::cmp::Ordering::Greater
                {
                    continue;
                }
                let pt = RationalPoint { p, r, q };
                if !delta_interval(&pt, &k.c, &k.weights).meets(&a0.lo, &a0.hi) {
                    continue;
                }
                let l = assign_dual_line(&pt, &k.weights).unwrap();
                let qe = &qr * (ri(l.a) + ri(l.b) * &line.a).abs();
                if qe >= k.h(n) && qe < k.h(n + 1) {
                    out.insert(pt);
                }
            }
        }
    }
    out
}

#[test]
fn line_enumeration_matches_brute_force() {
    let cfg = GameConfig::demo_line(2, Anchor::zero());
    let a0 = alice_open(&cfg.b0);
    let Regime::Line { line } = &cfg.regime else { unreachable!() };
    let RegimeConstants::Line(k) = derive_constants(&cfg, &a0).unwrap() else { unreachable!() };
    let cap = floor_rat(k.q_cap.as_ref().unwrap()).to_i64().unwrap();
    for n in 1..=2 {
        let got: BTreeSet<RationalPoint> =
            enumerate_p_line_level(n, line, &k, &a0).unwrap().iter().map(|t| t.point).collect();
        let want = brute_line_points(line, &k, &a0, n, cap.min(line_q_bound(n, &k).to_i64().unwrap()));
        assert_eq!(got, want, "level {n}");
    }
}

#[test]
fn theta_components_agree_with_sampling() {
    // F(x) = x^2 - x + 3/16 has roots 1/4 and 3/4
    let f = Poly::new(vec![rat(3, 16), ri(-1), ri(1)]);
    let iv = Interval::new(ri(0), ri(1));
    let t = rat(1, 50);
    let comps = theta_components(&f, &t, &iv);
    assert_eq!(comps.len(), 2);
    for s in 1..1000 {
        let x = rat(s, 1000);
        let inside = f.eval(&x).abs() < t;
        let strictly_in = comps.iter().any(|c| c.left.hi < x && x < c.right.lo);
        let possibly_in = comps.iter().any(|c| c.left.lo <= x && x <= c.right.hi);
        if strictly_in {
            assert!(inside, "x={x}");
        }
        if inside {
            assert!(possibly_in, "x={x}");
        }
    }
}

#[test]
fn root_isolation_finds_rational_roots() {
    // (x - 1/3)(x - 1/2)(x + 2)
    let f =
        Poly::new(vec![-rat(1, 3), ri(1)]).mul(&Poly::new(vec![-rat(1, 2), ri(1)])).mul(&Poly::new(vec![ri(2), ri(1)]));
    let roots = f.isolate_roots(&ri(-3), &ri(3));
    assert_eq!(roots.len(), 3);
    for (b, want) in roots.iter().zip([ri(-2), rat(1, 3), rat(1, 2)]) {
        let b = f.refine(b, &rat(1, 1 << 30));
        assert!(b.lo <= want && want <= b.hi, "{want} not in [{}, {}]", b.lo, b.hi);
    }
}

#[test]
fn dio_scan_matches_direct_minimum() {
    let (a, b) = (rat(3, 7), rat(2, 9));
    let sigma = rat(1, 2);
    let s = dio_condition_scan(&a, &b, &sigma, &Rat::zero(), 62);
    // with sigma = 1/2 and epsilon = 0 the score is q^2 max(||qa||, ||qb||)
    let (mut best, mut arg) = (None::<Rat>, 0);
    for q in 1..=62u64 {
        let m = dist_to_nearest_int(&(ri(q) * &a)).max(dist_to_nearest_int(&(ri(q) * &b)));
        let v = ri(q * q) * m;
        if best.as_ref().is_none_or(|x| &v < x) {
            best = Some(v);
            arg = q;
        }
    }
    assert_eq!(s.argmin, arg);
    assert_eq!(s.min.as_rat(), best);
    assert!(s.min.signum() > 0);
    let s = dio_condition_scan(&a, &b, &sigma, &Rat::zero(), 63);
    assert_eq!((s.min.signum(), s.argmin), (0, 63));
}

#[test]
fn surd_ordering_matches_floating_point_away_from_ties() {
    let vals: Vec<Surd2> = (-6..=6).flat_map(|a| (-6..=6).map(move |b| Surd2::new(rat(a, 3), rat(b, 5)))).collect();
    for x in &vals {
        for y in &vals {
            let (fx, fy) = (x.to_f64(), y.to_f64());
            if (fx - fy).abs() > 1e-9 {
                assert_eq!(x.cmp(y), fx.partial_cmp(&fy).unwrap(), "{x} vs {y}");
            } else {
                assert_eq!(x, y);
            }
        }
    }
    assert!(Surd2::sqrt2() * Surd2::sqrt2() == Surd2::from_rat(ri(2)));
    assert!(Surd2::one().is_positive() && !Surd2::zero().is_positive());
}
