//! Brute-force Diophantine checks that rely only on exact arithmetic.
//!
//! Nothing here touches the enumeration code, so agreement between the two is
//! a meaningful cross-check.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact_arith::{cmp_pow, dist_to_nearest_int, floor_pow, floor_rat, ri, PowProd, Rat};
use crate::problem_model::{Anchor, Weights};

/// A near-approximation found by a scan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub q: u64,
    /// Exact score as a power expression.
    pub score: String,
    /// Decimal rendering of the score, approximate.
    pub approx: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadnessReport {
    pub q_cap: u64,
    pub worst_q: Option<u64>,
    pub passes: bool,
    /// Every `q` that violates, in increasing order.
    pub violations: Vec<u64>,
    /// The five smallest scores.
    pub witnesses: Vec<Witness>,
}

fn power_or_zero(base: u64, exp: &Rat, factor: &Rat) -> PowProd {
    if factor.is_zero() || base == 0 {
        PowProd::rat(Rat::zero())
    } else {
        PowProd::pow(ri(base), exp.clone()).times_rat(factor)
    }
}

fn witness(q: u64, s: &PowProd) -> Witness {
    Witness { q, score: s.to_string(), approx: format!("{:.6e}", s.approx_f64()) }
}

/// Does some `q <= q_cap` give both `||qx - gamma|| < c / q^i` and
/// `||qy - delta|| < c / q^j`?
///
/// The score of `q` is `max(q^i ||qx - gamma||, q^j ||qy - delta||)`; `q`
/// violates exactly when its score is below `c`.
pub fn check_avoids(x: &Rat, y: &Rat, w: &Weights, anchor: &Anchor, c: &Rat, q_cap: u64) -> BadnessReport {
    let cpp = PowProd::rat(c.clone());
    let mut scored: Vec<(PowProd, u64)> = Vec::with_capacity(q_cap as usize);
    let mut violations = Vec::new();
    for q in 1..=q_cap {
        let qr = ri(q);
        let dx = dist_to_nearest_int(&(&qr * x - &anchor.gamma));
        let dy = dist_to_nearest_int(&(&qr * y - &anchor.delta));
        let s = power_or_zero(q, &w.i, &dx).max(power_or_zero(q, &w.j, &dy));
        if s < cpp {
            violations.push(q);
        }
        scored.push((s, q));
    }
    scored.sort();
    BadnessReport {
        q_cap,
        worst_q: scored.first().map(|(_, q)| *q),
        passes: violations.is_empty(),
        violations,
        witnesses: scored.iter().take(5).map(|(s, q)| witness(*q, s)).collect(),
    }
}

/// Minimum of `max(|A|^(1/i), |B|^(1/j)) |Ax + B(ax + b) + C|` over the scanned triples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualScan {
    pub min: PowProd,
    pub triple: (i64, i64, i64),
}

fn nearest_int(v: &Rat) -> BigInt {
    floor_rat(&(v + Rat::new(1.into(), 2.into())))
}

/// `max(|A|^(1/i), |B|^(1/j))`.
pub fn dual_weight(a: i64, b: i64, w: &Weights) -> PowProd {
    let f = |v: i64, e: &Rat| power_or_zero(v.unsigned_abs(), &e.recip(), &Rat::one());
    f(a, &w.i).max(f(b, &w.j))
}

/// Scan `(A, B) != (0, 0)` with `|A| <= N^i`, `|B| <= N^j` (so that the
/// weight is at most `N`), choosing the best `C` for each pair.
///
/// Ties keep the first triple in the order: smaller `|B|`, smaller `|A|`,
/// nonnegative before negative.
pub fn dual_form_scan(x: &Rat, a: &Rat, b: &Rat, w: &Weights, cap_n: u64) -> DualScan {
    let n = BigInt::from(cap_n);
    let amax = floor_pow(&n, &w.i).to_i64().expect("cap too large");
    let bmax = floor_pow(&n, &w.j).to_i64().expect("cap too large");
    let y = a * x + b;
    let mut best: Option<DualScan> = None;
    for bm in 0..=bmax {
        for am in 0..=amax {
            for (bb, aa) in signed(bm).into_iter().flat_map(|bb| signed(am).into_iter().map(move |aa| (bb, aa))) {
                if aa == 0 && bb == 0 {
                    continue;
                }
                let v = ri(aa) * x + ri(bb) * &y;
                let cc = -nearest_int(&v);
                let val = dual_weight(aa, bb, w).times_rat(&(v + Rat::from_integer(cc.clone())).abs());
                if best.as_ref().is_none_or(|s| val < s.min) {
                    best = Some(DualScan { min: val, triple: (aa, bb, cc.to_i64().expect("C fits")) });
                }
            }
        }
    }
    best.expect("scan includes (1, 0)")
}

fn signed(v: i64) -> Vec<i64> {
    if v == 0 {
        vec![0]
    } else {
        vec![v, -v]
    }
}

/// One instance of the B-only estimate: with `A`, `C` the nearest-integer
/// complements of `Ba`, `Bb`, both
/// `|Ax + B(ax+b) + C| <= (1 + |x|) max(||Ba||, ||Bb||)` and
/// `max(|A|^(1/i), |B|^(1/j)) <= (1 + |a|)^(1/i) |B|^(1/min(i,j))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainCheck {
    pub triple: (i64, i64, i64),
    pub form_bound: bool,
    pub weight_bound: bool,
}

pub fn b_only_chain(x: &Rat, a: &Rat, b: &Rat, w: &Weights, bb: i64) -> ChainCheck {
    assert!(bb >= 1, "B must be positive");
    let br = ri(bb);
    let aa = -nearest_int(&(&br * a));
    let cc = -nearest_int(&(&br * b));
    let (ai, ci) = (aa.to_i64().expect("A fits"), cc.to_i64().expect("C fits"));
    let form = (ri(ai) * x + &br * (a * x + b) + ri(ci)).abs();
    let rhs = (Rat::one() + x.abs()) * dist_to_nearest_int(&(&br * a)).max(dist_to_nearest_int(&(&br * b)));
    let sigma = w.min();
    let lhs_w = dual_weight(ai, bb, w);
    let rhs_w = PowProd::pow(Rat::one() + a.abs(), w.i.recip()).mul(&PowProd::pow(br, sigma.recip()));
    ChainCheck { triple: (ai, bb, ci), form_bound: form <= rhs, weight_bound: lhs_w <= rhs_w }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DioScan {
    pub min: PowProd,
    pub argmin: u64,
}

/// Minimum over `q <= q_cap` of `q^(1/sigma - epsilon) max(||qa||, ||qb||)`.
pub fn dio_condition_scan(a: &Rat, b: &Rat, sigma: &Rat, epsilon: &Rat, q_cap: u64) -> DioScan {
    assert!(sigma.is_positive() && sigma <= &Rat::new(1.into(), 2.into()), "sigma must lie in (0, 1/2]");
    assert!(!epsilon.is_negative(), "epsilon must be nonnegative");
    assert!(q_cap >= 1, "empty scan");
    let e = sigma.recip() - epsilon;
    let mut best: Option<DioScan> = None;
    for q in 1..=q_cap {
        let qr = ri(q);
        let m = dist_to_nearest_int(&(&qr * a)).max(dist_to_nearest_int(&(&qr * b)));
        let v = power_or_zero(q, &e, &m);
        if best.as_ref().is_none_or(|s| v < s.min) {
            best = Some(DioScan { min: v, argmin: q });
        }
    }
    best.unwrap()
}

/// All of: `(A, B) != (0, 0)`, `gcd(A, B, C) = 1`, `Ap + Br + Cq = 0`,
/// `|A| <= q^i` and `|B| <= q^j`.
pub fn verify_dual_line(point: (i64, i64, i64), line: (i64, i64, i64), w: &Weights) -> bool {
    let (p, r, q) = point;
    let (a, b, c) = line;
    if q < 1 || (a == 0 && b == 0) {
        return false;
    }
    if a.gcd(&b).gcd(&c) != 1 {
        return false;
    }
    if (a as i128) * (p as i128) + (b as i128) * (r as i128) + (c as i128) * (q as i128) != 0 {
        return false;
    }
    let within =
        |v: i64, e: &Rat| v == 0 || q == 1 && v.abs() <= 1 || cmp_pow(&ri(v.abs()), &ri(q), e) != Ordering::Greater;
    within(a, &w.i) && within(b, &w.j)
}

/// Does `||qx|| == 0` for this `q`?
pub fn is_denominator(x: &Rat, q: u64) -> bool {
    (ri(q) * x).is_integer()
}

/// Least common multiple of the denominators.
pub fn lcm_denominators(xs: &[Rat]) -> BigInt {
    xs.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rat;

    fn half() -> Weights {
        Weights::half()
    }

    #[test]
    fn rational_point_fails_at_two() {
        let r = check_avoids(&rat(1, 2), &rat(1, 2), &half(), &Anchor::zero(), &rat(1, 100), 10);
        assert!(!r.passes);
        assert_eq!(r.violations.first(), Some(&2));
        assert_eq!(r.worst_q, Some(2));
    }

    #[test]
    fn zero_c_passes() {
        let r = check_avoids(&rat(1, 2), &rat(1, 2), &half(), &Anchor::zero(), &Rat::zero(), 10);
        assert!(r.passes);
    }

    #[test]
    fn dual_scan_examples() {
        let s = dual_form_scan(&Rat::zero(), &Rat::zero(), &Rat::zero(), &half(), 10);
        assert_eq!(s.triple, (1, 0, 0));
        assert_eq!(s.min.signum(), 0);
        let s = dual_form_scan(&rat(2, 7), &Rat::zero(), &rat(2, 5), &half(), 30);
        assert_eq!(s.min.signum(), 0);
    }

    #[test]
    fn dio_scan_table() {
        let s = dio_condition_scan(&rat(1, 2), &rat(1, 3), &rat(1, 2), &Rat::zero(), 5);
        assert_eq!((s.min.as_rat(), s.argmin), (Some(rat(1, 2)), 1));
        let s = dio_condition_scan(&rat(1, 2), &rat(1, 3), &rat(1, 2), &Rat::zero(), 6);
        assert_eq!((s.min.signum(), s.argmin), (0, 6));
    }

    #[test]
    fn dual_line_examples() {
        assert!(verify_dual_line((0, 0, 1), (1, 0, 0), &half()));
        assert!(verify_dual_line((1, 1, 2), (1, 1, -1), &half()));
        assert!(verify_dual_line((1, 2, 3), (1, 1, -1), &half()));
        assert!(!verify_dual_line((1, 2, 3), (2, 2, -2), &half()));
        assert!(!verify_dual_line((1, 1, 2), (2, 0, -1), &half()));
    }

    #[test]
    fn chain_holds_for_small_b() {
        for bb in 1..20 {
            let c = b_only_chain(&rat(2, 7), &rat(1, 2), &rat(1, 3), &half(), bb);
            assert!(c.form_bound && c.weight_bound, "{c:?}");
        }
    }
}
