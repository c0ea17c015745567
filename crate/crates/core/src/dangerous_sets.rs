//! Rational points near a curve or line, their dual lines, heights, levels
//! and the intervals (or rectangles) around them that the game must avoid.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact_arith::{ceil_rat, ceil_root_pow, floor_pow, floor_rat, ri, PowProd, Rat, Surd2};
use crate::poly::{Poly, RootBracket};
use crate::problem_model::{
    Anchor, CurveConstants, CurveSpec, Interval, LineConstants, LineSpec, PlaneConstants, Weights,
};

/// Hard ceiling on scanned denominators; beyond this a cap must be supplied.
pub const MAX_SCAN_Q: i64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DangerError {
    #[error("invalid point ({p}, {r}) / {q}: need q >= 1 and gcd(p, r, q) = 1")]
    InvalidPoint { p: i64, r: i64, q: i64 },
    #[error("x = {0} lies outside the curve interval")]
    PointOutsideInterval(Rat),
    #[error("no dual line found for ({p}, {r}) / {q}")]
    Unreachable { p: i64, r: i64, q: i64 },
    #[error("point ({p}, {r}) / {q} at level {n} matches no class band")]
    PartitionGap { p: i64, r: i64, q: i64, n: u32 },
    #[error("point ({p}, {r}) / {q} has q^(1 - j eps)|E| below c1")]
    QEBoundViolated { p: i64, r: i64, q: i64 },
    #[error("denominator range up to {0} is too large to scan; supply a cap")]
    EnumerationTooLarge(String),
}

/// `(p/q, r/q)` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RationalPoint {
    pub p: i64,
    pub r: i64,
    pub q: i64,
}

impl RationalPoint {
    pub fn new(p: i64, r: i64, q: i64) -> Result<Self, DangerError> {
        if q < 1 || p.gcd(&r).gcd(&q) != 1 {
            return Err(DangerError::InvalidPoint { p, r, q });
        }
        Ok(RationalPoint { p, r, q })
    }

    pub fn x(&self) -> Rat {
        Rat::new(self.p.into(), self.q.into())
    }

    pub fn y(&self) -> Rat {
        Rat::new(self.r.into(), self.q.into())
    }
}

/// Integer line `A x + B y + C = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualLine {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeightKind {
    Star,
    NonStar,
}

/// A dangerous point with everything needed to place it in the level partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedPoint {
    pub point: RationalPoint,
    pub line: DualLine,
    #[serde(with = "crate::serial::rat_str")]
    pub e: Rat,
    pub kind: HeightKind,
    /// `q |E|`
    #[serde(with = "crate::serial::rat_str")]
    pub qe: Rat,
    /// `9 kappa^2 c q |B|`; the second height term is its square root.
    #[serde(with = "crate::serial::rat_str")]
    pub radicand: Rat,
    pub level: u32,
    pub class_index: u32,
}

impl TaggedPoint {
    /// Sign of `H(P) - x` for `x >= 0`, with `H = max(q|E|, sqrt(radicand))`.
    pub fn cmp_height(&self, x: &Rat) -> Ordering {
        let x2 = x * x;
        let a = self.qe.cmp(x);
        let b = self.radicand.cmp(&x2);
        a.max(b)
    }

    /// `H(P)^2`, exact.
    pub fn height_sq(&self) -> Rat {
        (&self.qe * &self.qe).max(self.radicand.clone())
    }

    pub fn delta(&self, c: &Rat, w: &Weights) -> DeltaInterval {
        delta_interval(&self.point, c, w)
    }
}

/// `v = (p, r, q)` for the shifted problem; no coprimality is required.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InhomCandidate {
    pub p: i64,
    pub r: i64,
    pub q: i64,
}

impl InhomCandidate {
    pub fn x(&self, anchor: &Anchor) -> Rat {
        (Rat::from_integer(self.p.into()) + &anchor.gamma) / Rat::from_integer(self.q.into())
    }

    pub fn y(&self, anchor: &Anchor) -> Rat {
        (Rat::from_integer(self.r.into()) + &anchor.delta) / Rat::from_integer(self.q.into())
    }
}

/// Open interval `|x - center| < radius` with a cached rational hull.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaInterval {
    pub center: Rat,
    pub radius: PowProd,
    pub outer_lo: Rat,
    pub outer_hi: Rat,
}

impl DeltaInterval {
    pub fn new(center: Rat, radius: PowProd) -> Self {
        let (_, rhi) = radius.bounds(64);
        DeltaInterval { outer_lo: &center - &rhi, outer_hi: &center + &rhi, center, radius }
    }

    /// Whether the rational hull meets the closed interval `[lo, hi]`.
    pub fn may_meet(&self, lo: &Rat, hi: &Rat) -> bool {
        lo < &self.outer_hi && hi > &self.outer_lo
    }

    /// Exact test: does the open interval meet the closed `[lo, hi]`?
    pub fn meets(&self, lo: &Rat, hi: &Rat) -> bool {
        if !self.may_meet(lo, hi) {
            return false;
        }
        self.radius.cmp_rat(&(lo - &self.center)) == Ordering::Greater
            && self.radius.cmp_rat(&(&self.center - hi)) == Ordering::Greater
    }

    /// Does the open interval contain the point?
    pub fn contains(&self, x: &Rat) -> bool {
        self.meets(x, x)
    }

    /// Is the closed `[lo, hi]` inside this open interval?
    pub fn contains_closed(&self, lo: &Rat, hi: &Rat) -> bool {
        self.radius.cmp_rat(&(&self.center - lo)) == Ordering::Greater
            && self.radius.cmp_rat(&(hi - &self.center)) == Ordering::Greater
    }

    pub fn len_pow(&self) -> PowProd {
        self.radius.clone().times_rat(&ri(2))
    }
}

/// `floor(q^e)` on machine integers.
pub fn floor_pow_i64(q: i64, e: &Rat) -> i64 {
    floor_pow(&BigInt::from(q), e).to_i64().expect("q^e overflows i64")
}

fn mod_inverse(a: i64, m: i64) -> i64 {
    let g = a.extended_gcd(&m);
    debug_assert_eq!(g.gcd, 1);
    g.x.rem_euclid(m)
}

/// Minkowski-small integer line through the point.
///
/// Searches `|B| <= q^j` upward; for each `B` the admissible `A` form one
/// residue class mod `q / gcd(p, q)`. Ties are broken by smaller `|A|`, then
/// `B >= 0`, then `A >= 0`.
pub fn assign_dual_line(pt: &RationalPoint, w: &Weights) -> Result<DualLine, DangerError> {
    dual_line_within(pt, floor_pow_i64(pt.q, &w.i), floor_pow_i64(pt.q, &w.j))
}

/// [`assign_dual_line`] with precomputed `floor(q^i)` and `floor(q^j)`.
pub fn dual_line_within(pt: &RationalPoint, amax: i64, bmax: i64) -> Result<DualLine, DangerError> {
    let (p, r, q) = (pt.p as i128, pt.r as i128, pt.q as i128);
    let (amax, bmax) = (amax as i128, bmax as i128);
    let g = p.rem_euclid(q).gcd(&q);
    let qg = q / g;
    let inv = if qg == 1 { 0 } else { mod_inverse(((p / g).rem_euclid(qg)) as i64, qg as i64) as i128 };
    for bb in 0..=bmax {
        let mut best: Option<((i128, bool, bool), DualLine)> = None;
        let signs: &[i128] = if bb == 0 { &[0] } else { &[1, -1] };
        for &s in signs {
            let b = s * bb;
            let rhs = (-b * r).rem_euclid(q);
            if rhs % g != 0 {
                continue;
            }
            let a0 = ((rhs / g) * inv).rem_euclid(qg);
            // the residue class a0 + t*qg meets [-amax, amax]
            let mut a = a0 - ((a0 + amax) / qg) * qg;
            while a <= amax {
                if a >= -amax && !(a == 0 && b == 0) {
                    let num = a * p + b * r;
                    debug_assert_eq!(num.rem_euclid(q), 0);
                    let c = -num / q;
                    if a.gcd(&b).gcd(&c) == 1 {
                        let key = (a.abs(), b < 0, a < 0);
                        if best.as_ref().is_none_or(|(k, _)| key < *k) {
                            best = Some((key, DualLine { a: a as i64, b: b as i64, c: c as i64 }));
                        }
                    }
                }
                a += qg;
            }
        }
        if let Some((_, l)) = best {
            return Ok(l);
        }
    }
    Err(DangerError::Unreachable { p: pt.p, r: pt.r, q: pt.q })
}

/// `E = A + B f'(p/q)`.
pub fn compute_e(pt: &RationalPoint, line: &DualLine, curve: &CurveSpec) -> Result<Rat, DangerError> {
    let x = pt.x();
    if !curve.interval.contains(&x) {
        return Err(DangerError::PointOutsideInterval(x));
    }
    Ok(ri(line.a) + ri(line.b) * curve.df().eval(&x))
}

/// Whether `|value| < coef * q^(-e)`, exactly.
fn below_pow(value: &Rat, coef: &Rat, q: i64, e: &Rat) -> bool {
    let v = value.abs();
    if v.is_zero() {
        return coef.is_positive();
    }
    if &v >= coef {
        return false;
    }
    PowProd::pow(ri(q), -e.clone()).times_rat(coef).cmp_rat(&v) == Ordering::Greater
}

/// `(p/q - c q^-(1+i), p/q + c q^-(1+i))`.
pub fn delta_interval(pt: &RationalPoint, c: &Rat, w: &Weights) -> DeltaInterval {
    let rad = PowProd::pow(ri(pt.q), -(Rat::one() + &w.i)).times_rat(c);
    DeltaInterval::new(pt.x(), rad)
}

/// `Delta_theta(v)` for the shifted problem.
pub fn delta_theta_interval(v: &InhomCandidate, anchor: &Anchor, c_prime: &Rat, w: &Weights) -> DeltaInterval {
    let rad = PowProd::pow(ri(v.q), -(Rat::one() + &w.i)).times_rat(c_prime);
    DeltaInterval::new(v.x(anchor), rad)
}

/// Denominators that can carry a level-`n` point: `[qMin, qMax]` with
/// `kappa q^(1+i) >= H_n` and `q <= H_{n+1}^2 / (9 kappa^2 c)`.
pub fn q_range_for_level(n: u32, k: &CurveConstants) -> Option<(BigInt, BigInt)> {
    let qmin = ceil_root_pow(&(k.h(n) / &k.kappa), &(Rat::one() + &k.weights.i)).max(BigInt::one());
    let h = k.h(n + 1);
    let qmax = floor_rat(&(&h * &h / (ri(9) * &k.kappa * &k.kappa * &k.c)));
    if qmin > qmax {
        None
    } else {
        Some((qmin, qmax))
    }
}

/// Apply the constants' denominator cap and the scan ceiling.
fn capped(range: Option<(BigInt, BigInt)>, cap: &Option<Rat>) -> Result<Option<(i64, i64)>, DangerError> {
    let Some((lo, mut hi)) = range else { return Ok(None) };
    if let Some(c) = cap {
        hi = hi.min(floor_rat(c));
    }
    if lo > hi {
        return Ok(None);
    }
    if hi > BigInt::from(MAX_SCAN_Q) {
        return Err(DangerError::EnumerationTooLarge(hi.to_string()));
    }
    Ok(Some((lo.to_i64().unwrap(), hi.to_i64().unwrap())))
}

/// Integers `r` that may satisfy `|t - r| < bound` (bound > 0): every integer
/// within `bound` of `t`, and the nearest one(s) in any case.
fn r_candidates(t: &Rat, bound: &Rat) -> std::ops::RangeInclusive<i64> {
    let half = Rat::new(1.into(), 2.into());
    let b = bound.clone().max(half);
    let lo = ceil_rat(&(t - &b)).to_i64().expect("r out of range");
    let hi = floor_rat(&(t + &b)).to_i64().expect("r out of range");
    lo..=hi
}

/// Integers `p` with `p/q` in `[lo, hi]`.
fn p_range(q: i64, lo: &Rat, hi: &Rat) -> std::ops::RangeInclusive<i64> {
    let qr = ri(q);
    let a = ceil_rat(&(lo * &qr)).to_i64().expect("p out of range");
    let b = floor_rat(&(hi * &qr)).to_i64().expect("p out of range");
    a..=b
}

/// Level bookkeeping shared by the curve enumerations.
struct CurveTagger<'a> {
    curve: &'a CurveSpec,
    k: &'a CurveConstants,
    df: Poly,
    nine_k2c: Rat,
}

impl<'a> CurveTagger<'a> {
    fn new(curve: &'a CurveSpec, k: &'a CurveConstants) -> Self {
        CurveTagger { curve, k, df: curve.df(), nine_k2c: ri(9) * &k.kappa * &k.kappa * &k.c }
    }

    fn tag(&self, pt: RationalPoint) -> Result<TaggedPoint, DangerError> {
        let line = assign_dual_line(&pt, &self.k.weights)?;
        let e = ri(line.a) + ri(line.b) * self.df.eval(&pt.x());
        let qe = ri(pt.q) * e.abs();
        let radicand = &self.nine_k2c * ri(pt.q) * ri(line.b.abs());
        let kind = if &qe * &qe < radicand { HeightKind::Star } else { HeightKind::NonStar };
        Ok(TaggedPoint { point: pt, line, e, kind, qe, radicand, level: 0, class_index: 0 })
    }

    /// Level `n` with `H_n <= H(P) < H_{n+1}`, searching upward from 1.
    fn level_of(&self, tp: &TaggedPoint) -> Option<u32> {
        if tp.cmp_height(&self.k.h(1)) == Ordering::Less {
            return None;
        }
        let mut n = 1;
        while tp.cmp_height(&self.k.h(n + 1)) != Ordering::Less {
            n += 1;
        }
        Some(n)
    }

    fn member(&self, p: i64, r: i64, q: i64) -> bool {
        let x = Rat::new(p.into(), q.into());
        let t = ri(q) * self.curve.f.eval(&x) - ri(r);
        below_pow(&t, &(&self.k.kappa * &self.k.c), q, &self.k.weights.j)
    }
}

/// Points of `P_n` (with `p/q` in the curve interval and, if given, within
/// `c` of the window), sorted by `(q, p)`.
///
/// For each `q` only the integers `r` within `max(kappa c, 1/2)` of `q f(p/q)`
/// can pass the membership test, so the scan is linear in the number of
/// `(p, q)` pairs.
pub fn enumerate_p_level(
    n: u32,
    curve: &CurveSpec,
    k: &CurveConstants,
    window: Option<&Interval>,
) -> Result<Vec<TaggedPoint>, DangerError> {
    let Some((qlo, qhi)) = capped(q_range_for_level(n, k), &k.q_cap)? else { return Ok(vec![]) };
    let tagger = CurveTagger::new(curve, k);
    let (mut lo, mut hi) = (curve.interval.lo.clone(), curve.interval.hi.clone());
    if let Some(w) = window {
        lo = lo.max(&w.lo - &k.c);
        hi = hi.min(&w.hi + &k.c);
    }
    let kc = &k.kappa * &k.c;
    let mut out = Vec::new();
    for q in qlo..=qhi {
        for p in p_range(q, &lo, &hi) {
            let x = Rat::new(p.into(), q.into());
            let t = ri(q) * curve.f.eval(&x);
            for r in r_candidates(&t, &kc) {
                if p.gcd(&r).gcd(&q) != 1 || !tagger.member(p, r, q) {
                    continue;
                }
                let mut tp = tagger.tag(RationalPoint { p, r, q })?;
                if tagger.level_of(&tp) != Some(n) {
                    continue;
                }
                tp.level = n;
                tp.class_index = classify_partition(&tp, k)?;
                out.push(tp);
            }
        }
    }
    Ok(out)
}

/// Every point of levels `1..=levels`, grouped by level (index 0 is level 1).
pub fn enumerate_p_levels(
    levels: u32,
    curve: &CurveSpec,
    k: &CurveConstants,
    window: Option<&Interval>,
) -> Result<Vec<Vec<TaggedPoint>>, DangerError> {
    (1..=levels).map(|n| enumerate_p_level(n, curve, k, window)).collect()
}

/// Class index `k`: 0 for Star points, otherwise the smallest `k` in `1..=n`
/// with `H_n R^lambda_{k-1} <= kappa q^(1+i) <= H_n R^lambda_k`.
pub fn classify_partition(tp: &TaggedPoint, k: &CurveConstants) -> Result<u32, DangerError> {
    if tp.kind == HeightKind::Star {
        return Ok(0);
    }
    let n = tp.level;
    let x = PowProd::pow(ri(tp.point.q), Rat::one() + &k.weights.i).times_rat(&k.kappa);
    let hn = k.h(n);
    for kk in 1..=n {
        let lower = PowProd::pow(k.r.clone(), k.lambda(kk - 1)).times_rat(&hn);
        let upper = PowProd::pow(k.r.clone(), k.lambda(kk)).times_rat(&hn);
        if lower <= x && x <= upper {
            return Ok(kk);
        }
    }
    let pt = tp.point;
    Err(DangerError::PartitionGap { p: pt.p, r: pt.r, q: pt.q, n })
}

/// One endpoint of a component of `Theta(P)`: either a curve-interval
/// endpoint (exact) or an isolated root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaComponent {
    pub left: RootBracket,
    pub right: RootBracket,
}

impl ThetaComponent {
    /// Upper bound on the length.
    pub fn outer_len(&self) -> Rat {
        &self.right.hi - &self.left.lo
    }
}

/// `F_P(x) = A x + B f(x) + C`.
pub fn f_p(line: &DualLine, curve: &CurveSpec) -> Poly {
    let lin = Poly::new(vec![ri(line.c), ri(line.a)]);
    lin.add(&curve.f.scale(&ri(line.b)))
}

/// Maximal open subintervals of the curve interval where `|F_P| < 2 kappa c / q`.
pub fn theta_roots(tp: &TaggedPoint, curve: &CurveSpec, kappa: &Rat, c: &Rat) -> Vec<ThetaComponent> {
    let f = f_p(&tp.line, curve);
    let t = ri(2) * kappa * c / ri(tp.point.q);
    theta_components(&f, &t, &curve.interval)
}

/// Components of `{x in I : |f(x)| < t}` for `t > 0`.
///
/// Roots of `f - t` and `f + t` split `I` into segments of constant
/// membership; each root has `|f| = t`, so every inside segment is a whole
/// component.
pub fn theta_components(f: &Poly, t: &Rat, iv: &Interval) -> Vec<ThetaComponent> {
    let (lo, hi) = (&iv.lo, &iv.hi);
    let polys = [f.add_const(&-t.clone()), f.add_const(t)];
    let mut marks: Vec<(usize, RootBracket)> = Vec::new();
    for (ix, g) in polys.iter().enumerate() {
        marks.extend(g.isolate_roots(lo, hi).into_iter().map(|b| (ix, b)));
    }
    // refine until the brackets are pairwise disjoint
    loop {
        marks.sort_by(|a, b| a.1.lo.cmp(&b.1.lo));
        let Some(ix) = marks.windows(2).position(|w| w[0].1.hi >= w[1].1.lo) else { break };
        for j in [ix, ix + 1] {
            let (o, b) = marks[j].clone();
            if !b.is_exact() {
                marks[j] = (o, polys[o].refine(&b, &(b.width() / ri(2))));
            }
        }
    }
    // tight enough to decide length comparisons against the interval-size bound
    let tight = iv.len() / Rat::from_integer(BigInt::one() << 48);
    let exact = |x: &Rat| RootBracket { lo: x.clone(), hi: x.clone() };
    let mut bounds = vec![exact(lo)];
    bounds.extend(marks.into_iter().map(|(o, b)| if b.width() > tight { polys[o].refine(&b, &tight) } else { b }));
    bounds.push(exact(hi));
    let mut out = Vec::new();
    for w in bounds.windows(2) {
        let (a, b) = (&w[0].hi, &w[1].lo);
        if a < b && f.eval(&((a + b) / ri(2))).abs() < *t {
            out.push(ThetaComponent { left: w[0].clone(), right: w[1].clone() });
        }
    }
    out
}

/// Points of `V_n`: `q^(1+i)` in `[H'_n, H'_{n+1})`, `(p + gamma)/q` in the
/// interval (and near the window), and `|f((p+gamma)/q) - (r+delta)/q| < kappa c' q^-(1+j)`.
pub fn enumerate_v_level(
    n: u32,
    curve: &CurveSpec,
    k: &CurveConstants,
    anchor: &Anchor,
    window: Option<&Interval>,
) -> Result<Vec<InhomCandidate>, DangerError> {
    let e = Rat::one() + &k.weights.i;
    let qlo = ceil_root_pow(&k.h_prime(n), &e).max(BigInt::one());
    let qhi = ceil_root_pow(&k.h_prime(n + 1), &e) - 1;
    let Some((qlo, qhi)) = capped(if qlo <= qhi { Some((qlo, qhi)) } else { None }, &k.q_cap)? else {
        return Ok(vec![]);
    };
    let (mut lo, mut hi) = (curve.interval.lo.clone(), curve.interval.hi.clone());
    if let Some(w) = window {
        lo = lo.max(&w.lo - &k.c_prime);
        hi = hi.min(&w.hi + &k.c_prime);
    }
    let kc = &k.kappa * &k.c_prime;
    let mut out = Vec::new();
    for q in qlo..=qhi {
        let qr = ri(q);
        // (p + gamma)/q in [lo, hi]
        for p in p_range(q, &(&lo - &anchor.gamma / &qr), &(&hi - &anchor.gamma / &qr)) {
            let x = (ri(p) + &anchor.gamma) / &qr;
            let t = &qr * curve.f.eval(&x) - &anchor.delta;
            for r in r_candidates(&t, &kc) {
                if below_pow(&(&t - ri(r)), &kc, q, &k.weights.j) {
                    out.push(InhomCandidate { p, r, q });
                }
            }
        }
    }
    Ok(out)
}

/// Dual line and `E = A + B a` for a point of the line problem.
fn tag_line_point(pt: RationalPoint, line: &LineSpec, w: &Weights) -> Result<TaggedPoint, DangerError> {
    let l = assign_dual_line(&pt, w)?;
    let e = ri(l.a) + ri(l.b) * &line.a;
    let qe = ri(pt.q) * e.abs();
    Ok(TaggedPoint {
        point: pt,
        line: l,
        e,
        kind: HeightKind::NonStar,
        qe,
        radicand: Rat::zero(),
        level: 0,
        class_index: 0,
    })
}

/// Largest denominator that can carry a level-`n` line point.
pub fn line_q_bound(n: u32, k: &LineConstants) -> BigInt {
    let h = k.h(n + 1);
    if !k.irrational_mode {
        // q < d H_{n+1}
        ceil_rat(&(Rat::from_integer(k.d.clone()) * h)) - 1
    } else {
        // q^(j eps) < H_{n+1} / c1
        ceil_root_pow(&(h / &k.c1), &(&k.weights.j * &k.epsilon)) - 1
    }
}

/// Points of the level-`n` line set whose `Delta` meets `A0`, sorted by `(q, p)`.
/// Every kept point is checked against `q^(1 - j eps)|E| >= c1`.
pub fn enumerate_p_line_level(
    n: u32,
    line: &LineSpec,
    k: &LineConstants,
    a0: &Interval,
) -> Result<Vec<TaggedPoint>, DangerError> {
    let qhi = line_q_bound(n, k);
    let Some((qlo, qhi)) = capped(Some((BigInt::one(), qhi)), &k.q_cap)? else { return Ok(vec![]) };
    let w = &k.weights;
    let kc = &k.kappa * &k.c;
    let mut out = Vec::new();
    for q in qlo..=qhi {
        let qr = ri(q);
        for p in p_range(q, &(&a0.lo - &k.c), &(&a0.hi + &k.c)) {
            let t = &qr * &line.b + ri(p) * &line.a;
            for r in r_candidates(&t, &kc) {
                if p.gcd(&r).gcd(&q) != 1 || !below_pow(&(&t - ri(r)), &kc, q, &w.j) {
                    continue;
                }
                let pt = RationalPoint { p, r, q };
                if !delta_interval(&pt, &k.c, w).meets(&a0.lo, &a0.hi) {
                    continue;
                }
                let mut tp = tag_line_point(pt, line, w)?;
                if tp.qe < k.h(n) || tp.qe >= k.h(n + 1) {
                    continue;
                }
                // q^(1 - j eps)|E| >= c1
                let lhs = PowProd::pow(qr.clone(), Rat::one() - &w.j * &k.epsilon).times_rat(&tp.e.abs());
                if lhs.cmp_rat(&k.c1) == Ordering::Less {
                    return Err(DangerError::QEBoundViolated { p, r, q });
                }
                tp.level = n;
                tp.class_index = classify_line(&tp, k)?;
                out.push(tp);
            }
        }
    }
    Ok(out)
}

/// Smallest `k` in `1..=n` with `H_n R^lambda_{k-1} <= kappa q^(1+i) < H_n R^lambda_k`.
pub fn classify_line(tp: &TaggedPoint, k: &LineConstants) -> Result<u32, DangerError> {
    let n = tp.level;
    let x = PowProd::pow(ri(tp.point.q), Rat::one() + &k.weights.i).times_rat(&k.kappa);
    let hn = k.h(n);
    for kk in 1..=n {
        let lower = PowProd::pow(k.r.clone(), k.lambda_k(kk - 1)).times_rat(&hn);
        let upper = PowProd::pow(k.r.clone(), k.lambda_k(kk)).times_rat(&hn);
        if lower <= x && x < upper {
            return Ok(kk);
        }
    }
    let pt = tp.point;
    Err(DangerError::PartitionGap { p: pt.p, r: pt.r, q: pt.q, n })
}

/// Shifted candidates for the line problem: `|(a (p+gamma) + b q) - (r + delta)| < kappa c' q^-j`
/// with `Delta_theta(v)` meeting `A0`.
pub fn enumerate_v_line_level(
    n: u32,
    line: &LineSpec,
    k: &LineConstants,
    anchor: &Anchor,
    a0: &Interval,
) -> Result<Vec<InhomCandidate>, DangerError> {
    let e = Rat::one() + &k.weights.i;
    let qlo = ceil_root_pow(&k.h_prime(n), &e).max(BigInt::one());
    let qhi = ceil_root_pow(&k.h_prime(n + 1), &e) - 1;
    let Some((qlo, qhi)) = capped(if qlo <= qhi { Some((qlo, qhi)) } else { None }, &k.q_cap)? else {
        return Ok(vec![]);
    };
    let kc = &k.kappa * &k.c_prime;
    let mut out = Vec::new();
    for q in qlo..=qhi {
        let qr = ri(q);
        let lo = &a0.lo - &k.c_prime - &anchor.gamma / &qr;
        let hi = &a0.hi + &k.c_prime - &anchor.gamma / &qr;
        for p in p_range(q, &lo, &hi) {
            let t = (ri(p) + &anchor.gamma) * &line.a + &qr * &line.b - &anchor.delta;
            for r in r_candidates(&t, &kc) {
                let v = InhomCandidate { p, r, q };
                if below_pow(&(&t - ri(r)), &kc, q, &k.weights.j)
                    && delta_theta_interval(&v, anchor, &k.c_prime, &k.weights).meets(&a0.lo, &a0.hi)
                {
                    out.push(v);
                }
            }
        }
    }
    Ok(out)
}

/// Closed rectangle `|x - cx| <= hx`, `|y - cy| <= hy`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rect {
    pub cx: Rat,
    pub cy: Rat,
    pub hx: PowProd,
    pub hy: PowProd,
    /// Padded floating hull `[x0, x1, y0, y1]`, only for skipping exact tests.
    pub hull: [f64; 4],
}

impl Rect {
    pub fn new(cx: Rat, cy: Rat, hx: PowProd, hy: PowProd) -> Self {
        let pad = |h: &PowProd| h.approx_f64() * (1.0 + 1e-9) + 1e-15;
        let (x, y) = (cx.to_f64().unwrap_or(f64::NAN), cy.to_f64().unwrap_or(f64::NAN));
        let (bx, by) = (pad(&hx), pad(&hy));
        let hull = [x - bx, x + bx, y - by, y + by];
        Rect { cx, cy, hx, hy, hull }
    }

    /// Exact test against the closed square `[x0, x0+s] x [y0, y0+s]`.
    pub fn meets_square(&self, x0: &Surd2, y0: &Surd2, s: &Surd2) -> bool {
        axis_meets(&self.cx, &self.hx, x0, s) && axis_meets(&self.cy, &self.hy, y0, s)
    }

    /// Is the point inside the closed rectangle?
    pub fn contains(&self, x: &Rat, y: &Rat) -> bool {
        let dx = (x - &self.cx).abs();
        let dy = (y - &self.cy).abs();
        self.hx.cmp_rat(&dx) != Ordering::Less && self.hy.cmp_rat(&dy) != Ordering::Less
    }
}

/// `[c - h, c + h]` meets `[x0, x0 + s]`.
fn axis_meets(c: &Rat, h: &PowProd, x0: &Surd2, s: &Surd2) -> bool {
    let cs = Surd2::from_rat(c.clone());
    let left_gap = x0 - &cs; // need h >= x0 - c
    let right_gap = &(&cs - x0) - s; // need h >= c - x0 - s
    left_gap.cmp_powprod(h) != Ordering::Greater && right_gap.cmp_powprod(h) != Ordering::Greater
}

/// `Delta(P)` in the plane.
pub fn plane_delta(pt: &RationalPoint, c: &Rat, w: &Weights) -> Rect {
    let q = ri(pt.q);
    Rect::new(
        pt.x(),
        pt.y(),
        PowProd::pow(q.clone(), -(Rat::one() + &w.i)).times_rat(c),
        PowProd::pow(q, -(Rat::one() + &w.j)).times_rat(c),
    )
}

/// `Delta_theta(v)` in the plane.
pub fn plane_delta_theta(v: &InhomCandidate, anchor: &Anchor, c_prime: &Rat, w: &Weights) -> Rect {
    let q = ri(v.q);
    Rect::new(
        v.x(anchor),
        v.y(anchor),
        PowProd::pow(q.clone(), -(Rat::one() + &w.i)).times_rat(c_prime),
        PowProd::pow(q, -(Rat::one() + &w.j)).times_rat(c_prime),
    )
}

/// Plane dangerous sets of one level, restricted to rectangles meeting the square.
#[derive(Clone, Debug, Default)]
pub struct PlaneLevel {
    pub points: Vec<TaggedPoint>,
    pub candidates: Vec<InhomCandidate>,
}

/// Least integer `>= h`.
fn surd_ceil(h: &Surd2) -> i64 {
    (-(-h.clone()).floor()).to_i64().expect("threshold too large")
}

/// `P_n` and `V_n` of the plane problem for `n = 1..=levels`, keeping only
/// those whose rectangles meet the square with corner `(x0, y0)` and side `side`.
///
/// `P_n` uses `q max(|A|, |B|)` in `[H_n, H_{n+1})`; since `max(|A|,|B|) >= 1`
/// only `q < H_{n+1}` is scanned, further limited by the constants' cap.
pub fn enumerate_plane_levels(
    levels: u32,
    k: &PlaneConstants,
    anchor: &Anchor,
    corner: (&Surd2, &Surd2),
    side: &Surd2,
) -> Result<Vec<PlaneLevel>, DangerError> {
    let w = &k.weights;
    let thresholds: Vec<i64> = (1..=levels + 1).map(|n| surd_ceil(&k.h(n))).collect();
    let mut out = vec![PlaneLevel::default(); levels as usize];
    let hull = |c0: &Surd2, pad: &Rat| -> (Rat, Rat) {
        let (lo, _) = c0.bounds(64);
        let (_, hi) = (c0 + side).bounds(64);
        (lo - pad, hi + pad)
    };
    // P_n: any H(P) < H_{levels+1} forces q < H_{levels+1}
    let mut qmax = thresholds[levels as usize] - 1;
    if let Some(cap) = &k.q_cap {
        qmax = qmax.min(floor_rat(cap).to_i64().unwrap_or(i64::MAX));
    }
    if qmax > MAX_SCAN_Q {
        return Err(DangerError::EnumerationTooLarge(qmax.to_string()));
    }
    let (xlo, xhi) = hull(corner.0, &k.c);
    let (ylo, yhi) = hull(corner.1, &k.c);
    // centers inside this rational box certainly give rectangles meeting the square
    let (_, in_x0) = corner.0.bounds(64);
    let (in_x1, _) = (corner.0 + side).bounds(64);
    let (_, in_y0) = corner.1.bounds(64);
    let (in_y1, _) = (corner.1 + side).bounds(64);
    for q in 1..=qmax {
        let (amax, bmax) = (floor_pow_i64(q, &w.i), floor_pow_i64(q, &w.j));
        for p in p_range(q, &xlo, &xhi) {
            let x = Rat::new(p.into(), q.into());
            let x_inside = in_x0 <= x && x <= in_x1;
            for r in p_range(q, &ylo, &yhi) {
                if p.gcd(&r).gcd(&q) != 1 {
                    continue;
                }
                let pt = RationalPoint { p, r, q };
                let line = dual_line_within(&pt, amax, bmax)?;
                let h = q * line.a.abs().max(line.b.abs());
                let Some(n) = (0..levels as usize).find(|&ix| thresholds[ix] <= h && h < thresholds[ix + 1]) else {
                    continue;
                };
                let inside = x_inside && {
                    let y = Rat::new(r.into(), q.into());
                    in_y0 <= y && y <= in_y1
                };
                if !inside && !plane_delta(&pt, &k.c, w).meets_square(corner.0, corner.1, side) {
                    continue;
                }
                let qe = ri(h);
                out[n].points.push(TaggedPoint {
                    point: pt,
                    line,
                    e: Rat::zero(),
                    kind: HeightKind::NonStar,
                    qe,
                    radicand: Rat::zero(),
                    level: n as u32 + 1,
                    class_index: 0,
                });
            }
        }
    }
    // V_n: q^(1 + max(i, j)) in [H'_n, H'_{n+1})
    let e = Rat::one() + w.max();
    for n in 1..=levels {
        let lo_t = k.h_prime(n);
        let hi_t = k.h_prime(n + 1);
        let (xlo, xhi) = hull(corner.0, &k.c_prime);
        let (ylo, yhi) = hull(corner.1, &k.c_prime);
        let mut q = 1i64;
        loop {
            let qp = PowProd::pow(ri(q), e.clone());
            if hi_t.cmp_powprod(&qp) != Ordering::Greater {
                break;
            }
            if q > MAX_SCAN_Q {
                return Err(DangerError::EnumerationTooLarge(q.to_string()));
            }
            if lo_t.cmp_powprod(&qp) != Ordering::Greater {
                let qr = ri(q);
                let px = p_range(q, &(&xlo - &anchor.gamma / &qr), &(&xhi - &anchor.gamma / &qr));
                for p in px {
                    for r in p_range(q, &(&ylo - &anchor.delta / &qr), &(&yhi - &anchor.delta / &qr)) {
                        let v = InhomCandidate { p, r, q };
                        if plane_delta_theta(&v, anchor, &k.c_prime, w).meets_square(corner.0, corner.1, side) {
                            out[n as usize - 1].candidates.push(v);
                        }
                    }
                }
            }
            q += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rat;
    use crate::problem_model::{derive_curve_constants, ConstantsMode};

    fn half() -> Weights {
        Weights::half()
    }

    #[test]
    fn dual_line_examples() {
        let w = half();
        let l = assign_dual_line(&RationalPoint::new(0, 0, 1).unwrap(), &w).unwrap();
        assert_eq!(l, DualLine { a: 1, b: 0, c: 0 });
        let l = assign_dual_line(&RationalPoint::new(1, 1, 2).unwrap(), &w).unwrap();
        assert_eq!(l, DualLine { a: 1, b: 1, c: -1 });
        let l = assign_dual_line(&RationalPoint::new(1, 2, 3).unwrap(), &w).unwrap();
        assert_eq!(l, DualLine { a: 1, b: 1, c: -1 });
    }

    #[test]
    fn e_examples() {
        let par = CurveSpec::parabola(ri(0), ri(1)).unwrap();
        let pt = RationalPoint::new(1, 1, 2).unwrap();
        assert_eq!(compute_e(&pt, &DualLine { a: 1, b: 1, c: -1 }, &par).unwrap(), ri(2));
        assert_eq!(compute_e(&pt, &DualLine { a: 3, b: 0, c: -1 }, &par).unwrap(), ri(3));
        let cubic =
            CurveSpec::new(Poly::new(vec![ri(0), ri(0), ri(0), ri(1)]), Interval::new(rat(1, 10), ri(1))).unwrap();
        let pt = RationalPoint::new(1, 0, 3).unwrap();
        assert_eq!(compute_e(&pt, &DualLine { a: 2, b: -1, c: 0 }, &cubic).unwrap(), rat(5, 3));
        let far = RationalPoint::new(3, 0, 1).unwrap();
        assert!(compute_e(&far, &DualLine { a: 1, b: 0, c: -3 }, &par).is_err());
    }

    fn toy_constants() -> CurveConstants {
        // kappa = 2, c = 1/64, R = 4, l = 1
        CurveConstants::from_parts(half(), ri(1), ri(2), ri(4), ri(1), BigInt::from(1), rat(1, 64))
    }

    #[test]
    fn q_range_examples() {
        let k = toy_constants();
        assert_eq!(k.h(2), ri(84));
        let (_, qmax) = q_range_for_level(1, &k).unwrap();
        assert_eq!(qmax, BigInt::from(12544));
        // H_1 = 21: least q with 2 q^(3/2) >= 21 is 5
        let (qmin, _) = q_range_for_level(1, &k).unwrap();
        assert_eq!(k.h(1), ri(21));
        assert_eq!(qmin, BigInt::from(5));
        let tiny = CurveConstants::from_parts(half(), ri(1), ri(2), ri(4), ri(1), BigInt::from(1), rat(1, 1 << 40));
        assert!(q_range_for_level(1, &tiny).is_none());
    }

    #[test]
    fn delta_radius_example() {
        let d = delta_interval(&RationalPoint::new(1, 0, 4).unwrap(), &ri(1), &half());
        assert_eq!(d.radius.as_rat(), Some(rat(1, 8)));
        assert!(d.meets(&(rat(1, 8) + rat(1, 1000)), &ri(1)));
        // touching at the open endpoint is disjoint
        assert!(!d.meets(&rat(3, 8), &ri(1)));
        let q1 = delta_interval(&RationalPoint::new(0, 0, 1).unwrap(), &rat(1, 10), &half());
        assert!(!q1.meets(&rat(1, 10), &rat(2, 10)));
    }

    #[test]
    fn shared_band_endpoint_takes_smaller_class() {
        let k = toy_constants();
        // kappa q^(3/2) = H_n R^lambda_1 exactly for n = 1 needs a perfect square q; fabricate with q = 4
        let mut tp = TaggedPoint {
            point: RationalPoint { p: 1, r: 0, q: 4 },
            line: DualLine { a: 1, b: 0, c: 0 },
            e: ri(1),
            kind: HeightKind::NonStar,
            qe: ri(4),
            radicand: ri(0),
            level: 1,
            class_index: 0,
        };
        let x = PowProd::pow(ri(4), rat(3, 2)).times_rat(&k.kappa);
        let hn = k.h(1);
        let up = PowProd::pow(k.r.clone(), k.lambda(1)).times_rat(&hn);
        if x <= up && x >= PowProd::rat(hn) {
            assert_eq!(classify_partition(&tp, &k).unwrap(), 1);
        }
        tp.kind = HeightKind::Star;
        assert_eq!(classify_partition(&tp, &k).unwrap(), 0);
    }

    #[test]
    fn theta_for_vertical_dual_line_is_one_interval() {
        let par = CurveSpec::parabola(ri(0), ri(1)).unwrap();
        // B = 0: F = E x + C, Theta has length 4 kappa c / (q |E|)
        let tp = TaggedPoint {
            point: RationalPoint { p: 1, r: 1, q: 4 },
            line: DualLine { a: 2, b: 0, c: -1 },
            e: ri(2),
            kind: HeightKind::NonStar,
            qe: ri(8),
            radicand: ri(0),
            level: 1,
            class_index: 0,
        };
        let comps = theta_roots(&tp, &par, &ri(2), &rat(1, 100));
        assert_eq!(comps.len(), 1);
        let exact = ri(4) * ri(2) * rat(1, 100) / ri(8);
        assert!(comps[0].outer_len() >= exact && comps[0].outer_len() - exact < rat(1, 1 << 40));
    }

    #[test]
    fn theta_components_of_a_parabola() {
        // |x^2 - 1/4| < 1/8 on [0, 1] is (sqrt(1/8), sqrt(3/8))
        let f = Poly::new(vec![rat(-1, 4), ri(0), ri(1)]);
        let comps = theta_components(&f, &rat(1, 8), &Interval::new(ri(0), ri(1)));
        assert_eq!(comps.len(), 1);
        // whole interval when the band is wide
        let comps = theta_components(&f, &ri(10), &Interval::new(ri(0), ri(1)));
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].left.lo, ri(0));
        assert_eq!(comps[0].right.hi, ri(1));
        // two components when the band straddles the vertex: |x^2 - 1/4| < 1/8 on [-1, 1]
        let comps = theta_components(&f, &rat(1, 8), &Interval::new(ri(-1), ri(1)));
        assert_eq!(comps.len(), 2);
        // empty
        let comps = theta_components(&f.add_const(&ri(5)), &rat(1, 8), &Interval::new(ri(-1), ri(1)));
        assert!(comps.is_empty());
    }

    #[test]
    fn demo_parabola_level_three_is_on_curve_points() {
        let curve = CurveSpec::parabola(rat(1, 10), rat(9, 10)).unwrap();
        let a0 = Interval::new(rat(3, 10), rat(7, 10));
        let k =
            derive_curve_constants(&half(), &rat(1, 2), &curve, &a0, ConstantsMode::Demo).unwrap().with_level_cap(3);
        let pts = enumerate_p_level(3, &curve, &k, Some(&a0)).unwrap();
        assert!(!pts.is_empty());
        for tp in &pts {
            let s = tp.line.a;
            assert_eq!(tp.point.q, s * s);
            assert_eq!(tp.line.b, 0);
            assert_eq!(tp.kind, HeightKind::NonStar);
            assert!((3..=26).contains(&s));
        }
    }
}
