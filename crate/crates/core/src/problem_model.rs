//! Problem instances and the constants bundles of the three regimes.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact_arith::{ceil_root_pow, dist_to_nearest_int, floor_rat, ri, PowProd, Rat, Surd2};
use crate::poly::Poly;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("weights must satisfy 0 < j <= i < 1 and i + j = 1, got i = {i}, j = {j}")]
    BadWeights { i: Box<Rat>, j: Box<Rat> },
    #[error("beta must lie in (0, 1), got {0}")]
    BadBeta(Rat),
    #[error("curve polynomial must have degree at least 2")]
    DegreeTooLow,
    #[error("interval [{lo}, {hi}] is empty")]
    EmptyInterval { lo: Box<Rat>, hi: Box<Rat> },
    #[error("second derivative vanishes on the interval")]
    NondegeneracyViolated,
    #[error("A0 is too long for 3*kappa*l*R^2 < 1; {0} preliminary halvings are needed")]
    NeedsPreliminaryShrink(u32),
    #[error("finite scan found q = {q} with q^(1/j-eps) max(|qa|,|qb|) < c0")]
    C0ScanFailed { q: u64 },
    #[error("line slope must be nonzero")]
    ZeroSlope,
    #[error("no admissible mu found below {0}")]
    MuSearchExhausted(u64),
    #[error("A0 is not contained in the curve interval")]
    A0OutsideInterval,
}

/// Exponent pair `(i, j)` with `0 < j <= i < 1` and `i + j = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weights {
    #[serde(with = "crate::serial::rat_str")]
    pub i: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub j: Rat,
}

impl Weights {
    pub fn new(i: Rat, j: Rat) -> Result<Self, ModelError> {
        let ok = j.is_positive() && j <= i && i < Rat::one() && &i + &j == Rat::one();
        if ok {
            Ok(Weights { i, j })
        } else {
            Err(ModelError::BadWeights { i: Box::new(i), j: Box::new(j) })
        }
    }

    pub fn half() -> Self {
        Weights { i: Rat::new(1.into(), 2.into()), j: Rat::new(1.into(), 2.into()) }
    }

    pub fn max(&self) -> &Rat {
        if self.i >= self.j {
            &self.i
        } else {
            &self.j
        }
    }

    pub fn min(&self) -> &Rat {
        if self.i <= self.j {
            &self.i
        } else {
            &self.j
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::serial::rat_str")]
    pub lo: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub hi: Rat,
}

impl Interval {
    pub fn new(lo: Rat, hi: Rat) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    pub fn len(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Rat {
        (&self.lo + &self.hi) / ri(2)
    }

    pub fn contains(&self, x: &Rat) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    /// Largest absolute value attained on the interval.
    pub fn abs_max(&self) -> Rat {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Graph of a polynomial `f` over a closed interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub f: Poly,
    pub interval: Interval,
}

impl CurveSpec {
    pub fn new(f: Poly, interval: Interval) -> Result<Self, ModelError> {
        if f.degree().unwrap_or(0) < 2 {
            return Err(ModelError::DegreeTooLow);
        }
        if interval.lo >= interval.hi {
            return Err(ModelError::EmptyInterval { lo: Box::new(interval.lo), hi: Box::new(interval.hi) });
        }
        let f2 = f.derivative().derivative();
        if f2.count_roots(&interval.lo, &interval.hi) > 0 {
            return Err(ModelError::NondegeneracyViolated);
        }
        Ok(CurveSpec { f, interval })
    }

    /// `f(x) = x^2` on `[lo, hi]`.
    pub fn parabola(lo: Rat, hi: Rat) -> Result<Self, ModelError> {
        CurveSpec::new(Poly::new(vec![Rat::zero(), Rat::zero(), Rat::one()]), Interval::new(lo, hi))
    }

    pub fn df(&self) -> Poly {
        self.f.derivative()
    }

    pub fn d2f(&self) -> Poly {
        self.f.derivative().derivative()
    }
}

/// Line `y = a x + b` with the data needed for the lines strategy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpec {
    #[serde(with = "crate::serial::rat_str")]
    pub a: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub b: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub epsilon: Rat,
    /// Lower bound for `inf_q q^(1/j - eps) max(|qa|, |qb|)`, supplied by the user.
    #[serde(with = "crate::serial::rat_str")]
    pub c0: Rat,
    pub scan_cap: u64,
    /// Treat `a` as if it were irrational: use the lambda rule and the
    /// `q^(j eps)` cap instead of the denominator of `a`.
    #[serde(default)]
    pub irrational_mode: bool,
}

impl LineSpec {
    /// Validate the supplied `c0` against a finite scan up to `scan_cap`.
    pub fn new(a: Rat, b: Rat, epsilon: Rat, c0: Rat, scan_cap: u64, weights: &Weights) -> Result<Self, ModelError> {
        if a.is_zero() {
            return Err(ModelError::ZeroSlope);
        }
        let spec = LineSpec { a, b, epsilon, c0, scan_cap, irrational_mode: false };
        spec.check_c0(weights)?;
        Ok(spec)
    }

    pub fn check_c0(&self, w: &Weights) -> Result<(), ModelError> {
        let e = w.j.recip() - &self.epsilon;
        for q in 1..=self.scan_cap {
            let qr = ri(q);
            let m = dist_to_nearest_int(&(&qr * &self.a)).max(dist_to_nearest_int(&(&qr * &self.b)));
            if m.is_zero() {
                return Err(ModelError::C0ScanFailed { q });
            }
            // q^e * m >= c0  <=>  q^e >= c0 / m
            if PowProd::pow(qr, e.clone()).cmp_rat(&(&self.c0 / &m)) == Ordering::Less {
                return Err(ModelError::C0ScanFailed { q });
            }
        }
        Ok(())
    }

    /// Least `d >= 1` with `d a` an integer.
    pub fn denom_a(&self) -> BigInt {
        self.a.denom().clone()
    }
}

/// Inhomogeneous shift `theta = (gamma, delta)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Anchor {
    #[serde(with = "crate::serial::rat_str")]
    pub gamma: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub delta: Rat,
}

impl Anchor {
    pub fn new(gamma: Rat, delta: Rat) -> Self {
        Anchor { gamma, delta }
    }

    pub fn zero() -> Self {
        Anchor { gamma: Rat::zero(), delta: Rat::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.gamma.is_zero() && self.delta.is_zero()
    }
}

/// FAITHFUL uses the exact formulas; DEMO keeps the structural relations
/// (partition totality, regular-subtree degrees, game protocol) but picks a
/// much larger `c` and caps denominators so runs are not empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsMode {
    Faithful,
    Demo,
}

impl std::str::FromStr for ConstantsMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "faithful" => Ok(ConstantsMode::Faithful),
            "demo" => Ok(ConstantsMode::Demo),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

/// Result of one defining inequality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
}

fn check(name: &str, holds: bool) -> Check {
    Check { name: name.to_string(), holds }
}

/// Largest `2^-t` (t >= 0) that is `<= bound` (or `< bound` when `strict`).
pub fn dyadic_below(bound: &Rat, strict: bool) -> Rat {
    assert!(bound.is_positive());
    let mut c = Rat::one();
    let ok = |c: &Rat| if strict { c < bound } else { c <= bound };
    while !ok(&c) {
        c /= ri(2);
    }
    c
}

/// Same as [`dyadic_below`] for a bound given as a monomial.
pub fn dyadic_below_pow(bound: &PowProd, strict: bool) -> Rat {
    let mut c = Rat::one();
    loop {
        let o = bound.cmp_rat(&c);
        if o == Ordering::Greater || (!strict && o == Ordering::Equal) {
            return c;
        }
        c /= ri(2);
    }
}

/// Positive rational lower bound for a positive monomial.
fn lower_rat(m: &PowProd) -> Rat {
    if let Some(r) = m.as_rat() {
        return r;
    }
    let mut bits = 64;
    loop {
        let lo = m.bounds(bits).0;
        if lo.is_positive() {
            return lo;
        }
        bits *= 2;
    }
}

/// Least rational with denominator at most 1000 satisfying the bounds on
/// `|f'|` and `|f''|` over the curve interval.
pub fn kappa_for_curve(curve: &CurveSpec) -> Result<Rat, ModelError> {
    let (lo, hi) = (&curve.interval.lo, &curve.interval.hi);
    let d1 = curve.df();
    let d2 = curve.d2f();
    if d2.count_roots(lo, hi) > 0 {
        return Err(ModelError::NondegeneracyViolated);
    }
    let s2 = if d2.eval(lo).is_positive() { Rat::one() } else { -Rat::one() };
    let d2abs = d2.scale(&s2);
    let feasible = |k: &Rat| -> bool {
        if k <= &Rat::one() {
            return false;
        }
        let km1 = k - Rat::one();
        // |f'| <= k - 1
        d1.add_const(&km1).nonneg_on(lo, hi)
            && d1.scale(&-Rat::one()).add_const(&km1).nonneg_on(lo, hi)
            // 1/k <= |f''| <= k
            && d2abs.add_const(&-k.recip()).nonneg_on(lo, hi)
            && d2abs.scale(&-Rat::one()).add_const(k).nonneg_on(lo, hi)
    };
    // bracket the feasibility threshold
    let mut up = ri(2);
    while !feasible(&up) {
        up *= ri(2);
    }
    let mut down = Rat::one();
    let tol = Rat::new(BigInt::one(), BigInt::from(4_000_000u64));
    while &up - &down > tol {
        let mid = (&up + &down) / ri(2);
        if feasible(&mid) {
            up = mid;
        } else {
            down = mid;
        }
    }
    // least fraction with denominator <= 1000 that is feasible
    let mut best = up.clone();
    for d in 1..=1000i64 {
        let dr = ri(d);
        let n = floor_rat(&(&down * &dr)) + 1;
        let cand = Rat::new(n, BigInt::from(d));
        if cand < best && (cand >= up || feasible(&cand)) {
            best = cand;
        }
    }
    // `up` itself may have a large denominator; make sure the result is a small-denominator fraction
    if best.denom() > &BigInt::from(1000) {
        let mut cands = Vec::new();
        for d in 1..=1000i64 {
            let n = num_integer::Integer::div_ceil(&(up.numer() * BigInt::from(d)), up.denom());
            cands.push(Rat::new(n, BigInt::from(d)));
        }
        best = cands.into_iter().min().unwrap();
    }
    Ok(best)
}

/// `R = (2/beta)^s`.
pub fn r_from_beta(beta: &Rat, s: u32) -> Rat {
    let b = ri(2) / beta;
    let mut r = Rat::one();
    for _ in 0..s {
        r *= &b;
    }
    r
}

/// Integer part `[R]`.
pub fn int_part(r: &Rat) -> u64 {
    floor_rat(r).to_u64().expect("[R] too large")
}

fn check_beta(beta: &Rat) -> Result<(), ModelError> {
    if beta.is_positive() && beta < &Rat::one() {
        Ok(())
    } else {
        Err(ModelError::BadBeta(beta.clone()))
    }
}

/// Number of same-center halvings until `6 kappa rho(B_n) R^2 < 1`,
/// starting from `rho(B_0) = b0` with ratio `alpha*beta` per round.
pub fn preliminary_rounds(kappa: &Rat, r: &Rat, b0: &Rat, alpha_beta: &Rat) -> u32 {
    let mut rho = b0.clone();
    let mut n = 0;
    while ri(6) * kappa * &rho * r * r >= Rat::one() {
        rho *= alpha_beta;
        n += 1;
    }
    n
}

/// Constants of the curve regime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveConstants {
    pub weights: Weights,
    pub mode: ConstantsMode,
    #[serde(with = "crate::serial::rat_str")]
    pub beta: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub kappa: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub r: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub l: Rat,
    #[serde(with = "crate::serial::big_str")]
    pub mu: BigInt,
    #[serde(with = "crate::serial::rat_str")]
    pub c: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub c_prime: Rat,
    /// Denominator cap used by DEMO enumeration (`None` means no cap).
    #[serde(with = "crate::serial::opt_rat")]
    pub q_cap: Option<Rat>,
}

impl CurveConstants {
    /// Assemble a bundle from explicit values; used for hand-built test constants.
    pub fn from_parts(weights: Weights, beta: Rat, kappa: Rat, r: Rat, l: Rat, mu: BigInt, c: Rat) -> Self {
        let c_prime = &c / (&r * &r) / ri(10);
        CurveConstants { weights, mode: ConstantsMode::Demo, beta, kappa, r, l, mu, c, c_prime, q_cap: None }
    }

    /// `lambda_0 = 0`, `lambda_k = 2(1+i)k/j + mu`.
    pub fn lambda(&self, k: u32) -> Rat {
        if k == 0 {
            return Rat::zero();
        }
        ri(2) * (Rat::one() + &self.weights.i) * ri(k) / &self.weights.j + Rat::from_integer(self.mu.clone())
    }

    /// `H_n = 42 kappa^3 c R^n / l`.
    pub fn h(&self, n: u32) -> Rat {
        ri(42) * self.kappa.pow(3) * &self.c / &self.l * self.r.pow(n as i32)
    }

    /// `H'_n = 2 c' R^n / l`.
    pub fn h_prime(&self, n: u32) -> Rat {
        ri(2) * &self.c_prime / &self.l * self.r.pow(n as i32)
    }

    pub fn branching(&self) -> u64 {
        int_part(&self.r)
    }

    /// Largest `q` with `kappa q^(1+i) < H_{levels+1}`: every rational point
    /// of denominator at most this lies in one of the first `levels` levels.
    pub fn level_implied_q(&self, levels: u32) -> BigInt {
        let target = self.h(levels + 1) / &self.kappa;
        ceil_root_pow(&target, &(Rat::one() + &self.weights.i)) - 1
    }

    pub fn with_level_cap(mut self, levels: u32) -> Self {
        self.q_cap = Some(Rat::from_integer(self.level_implied_q(levels).max(BigInt::zero())));
        self
    }

    /// Re-check the defining inequalities.
    pub fn checks(&self) -> Vec<Check> {
        let (i, j) = (&self.weights.i, &self.weights.j);
        let mu = Rat::from_integer(self.mu.clone());
        let r2 = &self.r * &self.r;
        let mut out = vec![
            check("R = (2/beta)^5", self.r == r_from_beta(&self.beta, 5)),
            check("kappa > 1", self.kappa > Rat::one()),
            check("3 kappa l R^2 < 1", ri(3) * &self.kappa * &self.l * &r2 < Rat::one()),
        ];
        // 10 kappa^2 l^-1 R^(1/j - j mu / 6) <= 1
        let e = j.recip() - j * &mu / ri(6);
        let lhs = PowProd::pow(self.r.clone(), e).times_rat(&(ri(10) * &self.kappa * &self.kappa / &self.l));
        out.push(check("10 kappa^2 l^-1 R^(1/j - j mu/6) <= 1", lhs.cmp_rat(&Rat::one()) != Ordering::Greater));
        let cbound = self.faithful_c_bound();
        out.push(check("c <= l^2 / (10^3 kappa^5 R^(4+lambda_1))", cbound.cmp_rat(&self.c) != Ordering::Less));
        out.push(check("c' = c R^-2 / 10", self.c_prime == &self.c / &r2 / ri(10)));
        out.push(check(
            "H_1 <= 3 kappa c^(1/2)",
            // (H_1)^2 <= 9 kappa^2 c
            self.h(1).pow(2) <= ri(9) * &self.kappa * &self.kappa * &self.c,
        ));
        let _ = i;
        out
    }

    fn faithful_c_bound(&self) -> PowProd {
        let e = ri(4) + self.lambda(1);
        PowProd::pow(self.r.clone(), -e).times_rat(&(&self.l * &self.l / (ri(1000) * self.kappa.pow(5))))
    }

    /// Faithful-mode sanity chain `R > 32`, `l < 10^-3`, `c < 10^-10 l`.
    pub fn sanity_chain(&self) -> bool {
        self.r > ri(32) && self.l < Rat::new(1.into(), 1000.into()) && self.c < &self.l / ri(10_000_000_000i64)
    }
}

/// Least positive integer `mu` with `10 kappa^2 l^-1 R^(1/j - j mu / 6) <= 1`.
fn curve_mu(w: &Weights, kappa: &Rat, l: &Rat, r: &Rat) -> Result<BigInt, ModelError> {
    let coef = ri(10) * kappa * kappa / l;
    for mu in 1..100_000u64 {
        let e = w.j.recip() - &w.j * ri(mu) / ri(6);
        if PowProd::pow(r.clone(), e).times_rat(&coef).cmp_rat(&Rat::one()) != Ordering::Greater {
            return Ok(BigInt::from(mu));
        }
    }
    Err(ModelError::MuSearchExhausted(100_000))
}

/// Derive the curve constants for `A0`.
///
/// FAITHFUL signals `NeedsPreliminaryShrink` when `3 kappa l R^2 < 1` fails.
/// DEMO skips that requirement and takes `c` as the largest power of two with
/// `H_1 <= 3 kappa sqrt(c)`, so every rational point falls in some level.
pub fn derive_curve_constants(
    weights: &Weights,
    beta: &Rat,
    curve: &CurveSpec,
    a0: &Interval,
    mode: ConstantsMode,
) -> Result<CurveConstants, ModelError> {
    check_beta(beta)?;
    if !curve.interval.contains_interval(a0) {
        return Err(ModelError::A0OutsideInterval);
    }
    let kappa = kappa_for_curve(curve)?;
    let r = r_from_beta(beta, 5);
    let l = a0.len();
    if mode == ConstantsMode::Faithful && ri(3) * &kappa * &l * &r * &r >= Rat::one() {
        let ab = beta / ri(2);
        let n = preliminary_rounds(&kappa, &r, &(ri(2) * &l), &ab);
        return Err(ModelError::NeedsPreliminaryShrink(n));
    }
    let mu = curve_mu(weights, &kappa, &l, &r)?;
    let mut k = CurveConstants::from_parts(weights.clone(), beta.clone(), kappa, r, l, mu, Rat::one());
    k.mode = mode;
    k.c = match mode {
        ConstantsMode::Faithful => lower_rat(&k.faithful_c_bound()),
        ConstantsMode::Demo => {
            let bound = &k.l * &k.l / (ri(196) * k.kappa.pow(4) * &k.r * &k.r);
            dyadic_below(&bound, false)
        }
    };
    k.c_prime = &k.c / (&k.r * &k.r) / ri(10);
    Ok(k)
}

/// Constants of the lines regime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineConstants {
    pub weights: Weights,
    pub mode: ConstantsMode,
    #[serde(with = "crate::serial::rat_str")]
    pub beta: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub kappa: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub r: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub l: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub c1: Rat,
    #[serde(with = "crate::serial::big_str")]
    pub mu: BigInt,
    #[serde(with = "crate::serial::rat_str")]
    pub lambda: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub c: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub c_prime: Rat,
    #[serde(with = "crate::serial::big_str")]
    pub d: BigInt,
    pub irrational_mode: bool,
    #[serde(with = "crate::serial::rat_str")]
    pub epsilon: Rat,
    #[serde(with = "crate::serial::opt_rat")]
    pub q_cap: Option<Rat>,
}

impl LineConstants {
    /// `lambda_0 = 0`, `lambda_k = lambda j^-k + k/i + mu`.
    pub fn lambda_k(&self, k: u32) -> Rat {
        if k == 0 {
            return Rat::zero();
        }
        &self.lambda * self.weights.j.recip().pow(k as i32)
            + ri(k) / &self.weights.i
            + Rat::from_integer(self.mu.clone())
    }

    /// `H_n = 4 kappa c R^n / l`.
    pub fn h(&self, n: u32) -> Rat {
        ri(4) * &self.kappa * &self.c / &self.l * self.r.pow(n as i32)
    }

    /// `H'_n = 2 c' R^n / l`.
    pub fn h_prime(&self, n: u32) -> Rat {
        ri(2) * &self.c_prime / &self.l * self.r.pow(n as i32)
    }

    pub fn branching(&self) -> u64 {
        int_part(&self.r)
    }

    pub fn level_implied_q(&self, levels: u32) -> BigInt {
        let target = self.h(levels + 1) / &self.kappa;
        ceil_root_pow(&target, &(Rat::one() + &self.weights.i)) - 1
    }

    pub fn checks(&self) -> Vec<Check> {
        let i = &self.weights.i;
        let mu = Rat::from_integer(self.mu.clone());
        let m1 = PowProd::pow(self.r.clone(), ri(3) / i - i * &mu).times_rat(&(ri(20) * &self.kappa * &self.kappa));
        let mut out = vec![
            check("R = (2/beta)^4", self.r == r_from_beta(&self.beta, 4)),
            check("kappa = |a| + 1 > 1", self.kappa > Rat::one()),
            check("mu >= 1", self.mu >= BigInt::one()),
            check("20 kappa^2 R^(3/i - i mu) < 1", m1.cmp_rat(&Rat::one()) == Ordering::Less),
            check("H_1 <= c_1", self.h(1) <= self.c1),
        ];
        if !self.irrational_mode {
            let lhs = self.r.pow((&self.mu - 1u32).to_i32().unwrap_or(i32::MAX));
            out.push(check("R^(mu-1) >= kappa d^2", lhs >= &self.kappa * Rat::from_integer(&self.d * &self.d)));
            out.push(check("lambda = 0", self.lambda.is_zero()));
        }
        let cb = line_c_bound(self);
        out.push(check(
            "c <= min(c1 l/(4 kappa R), l^-i, R^(-2-lambda_1/(1+i))/(8 kappa))",
            cb.iter().all(|b| b.cmp_rat(&self.c) != Ordering::Less),
        ));
        out
    }
}

fn rat_half_neg() -> Rat {
    Rat::new((-1).into(), 2.into())
}

fn line_c_bound(k: &LineConstants) -> Vec<PowProd> {
    let i = &k.weights.i;
    vec![
        PowProd::rat(&k.c1 * &k.l / (ri(4) * &k.kappa * &k.r)),
        PowProd::pow(k.l.clone(), -i.clone()),
        PowProd::pow(k.r.clone(), -(ri(2) + k.lambda_k(1) / (Rat::one() + i))).times_rat(&(ri(8) * &k.kappa).recip()),
    ]
}

/// Derive the lines constants for `A0`.
///
/// DEMO takes `c` as the largest power of two `<= c1 l / (4 kappa R^(3/2))`
/// and caps `q` so that every dual line has `|B| <= scan_cap`. The faithful
/// bound empties every level; with `R` in place of `R^(3/2)` the level-one
/// points spread over many dual lines and remove more root children than the
/// game can spare.
pub fn derive_line_constants(
    weights: &Weights,
    beta: &Rat,
    line: &LineSpec,
    a0: &Interval,
    mode: ConstantsMode,
    depth: u32,
) -> Result<LineConstants, ModelError> {
    check_beta(beta)?;
    line.check_c0(weights)?;
    let kappa = line.a.abs() + Rat::one();
    let r = r_from_beta(beta, 4);
    let l = a0.len();
    let xmax = a0.abs_max();
    let c1 = &line.c0 / (&xmax + &l).max(Rat::one());
    let d = line.denom_a();
    let i = &weights.i;
    let mut mu = BigInt::one();
    loop {
        let m = Rat::from_integer(mu.clone());
        let a = PowProd::pow(r.clone(), ri(3) / i - i * &m).times_rat(&(ri(20) * &kappa * &kappa));
        let ok1 = a.cmp_rat(&Rat::one()) == Ordering::Less;
        let ok2 = line.irrational_mode || r.pow((&mu - 1u32).to_i32().unwrap()) >= &kappa * Rat::from_integer(&d * &d);
        if ok1 && ok2 {
            break;
        }
        mu += 1;
        if mu > BigInt::from(100_000) {
            return Err(ModelError::MuSearchExhausted(100_000));
        }
    }
    let lambda =
        if line.irrational_mode { line_lambda(weights, &kappa, &c1, &r, &line.epsilon, depth) } else { Rat::zero() };
    let mut k = LineConstants {
        weights: weights.clone(),
        mode,
        beta: beta.clone(),
        kappa,
        r,
        l,
        c1,
        mu,
        lambda,
        c: Rat::one(),
        c_prime: Rat::one(),
        d,
        irrational_mode: line.irrational_mode,
        epsilon: line.epsilon.clone(),
        q_cap: None,
    };
    k.c = match mode {
        ConstantsMode::Faithful => line_c_bound(&k).iter().map(lower_rat).min().unwrap(),
        ConstantsMode::Demo => {
            let b =
                PowProd::rat(&k.c1 * &k.l / (ri(4) * &k.kappa * &k.r)).mul(&PowProd::pow(k.r.clone(), rat_half_neg()));
            dyadic_below_pow(&b, false)
        }
    };
    k.c_prime = &k.c / (&k.r * &k.r) / ri(10);
    if mode == ConstantsMode::Demo {
        // the scan lower bound on q|E| only covers dual lines with |B| <= scan_cap
        let scan_q: BigInt = ceil_root_pow(&ri(line.scan_cap + 1u64), &weights.j) - 1;
        let level_q = k.level_implied_q(depth);
        k.q_cap = Some(Rat::from_integer(scan_q.min(level_q).max(BigInt::zero())));
    }
    Ok(k)
}

/// Least `lambda = t / 2^20` with `R^(lambda j^-n) >= kappa c1^-1 R^((1+i)n/(j eps))` for `n <= depth`.
fn line_lambda(w: &Weights, kappa: &Rat, c1: &Rat, r: &Rat, eps: &Rat, depth: u32) -> Rat {
    assert!(eps.is_positive(), "irrational mode needs epsilon > 0");
    let unit = Rat::new(BigInt::one(), BigInt::one() << 20);
    let holds = |lam: &Rat| {
        (1..=depth.max(1)).all(|n| {
            let jn = w.j.recip().pow(n as i32);
            let lhs = PowProd::pow(r.clone(), lam * jn);
            let rhs = PowProd::pow(r.clone(), (Rat::one() + &w.i) * ri(n) / (&w.j * eps)).times_rat(&(kappa / c1));
            lhs >= rhs
        })
    };
    let mut hi = Rat::one();
    while !holds(&hi) {
        hi *= ri(2);
    }
    let (mut lo_t, mut hi_t) = (BigInt::zero(), (&hi / &unit).to_integer());
    while &hi_t - &lo_t > BigInt::one() {
        let mid: BigInt = (&lo_t + &hi_t) / 2;
        if holds(&(Rat::from_integer(mid.clone()) * &unit)) {
            hi_t = mid;
        } else {
            lo_t = mid;
        }
    }
    if holds(&(Rat::from_integer(lo_t.clone()) * &unit)) {
        Rat::from_integer(lo_t) * unit
    } else {
        Rat::from_integer(hi_t) * unit
    }
}

/// Constants of the plane regime, living in Q(sqrt 2).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneConstants {
    pub weights: Weights,
    pub mode: ConstantsMode,
    #[serde(with = "crate::serial::rat_str")]
    pub beta: Rat,
    #[serde(with = "crate::serial::surd_str")]
    pub alpha0: Surd2,
    pub m: u64,
    #[serde(with = "crate::serial::surd_str")]
    pub r: Surd2,
    #[serde(with = "crate::serial::surd_str")]
    pub l: Surd2,
    #[serde(with = "crate::serial::rat_str")]
    pub c: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub c_prime: Rat,
    #[serde(with = "crate::serial::opt_rat")]
    pub q_cap: Option<Rat>,
}

impl PlaneConstants {
    /// `[R/m]`.
    pub fn blocks_per_side(&self) -> u64 {
        let s = self.r.scale(&ri(self.m).recip());
        s.floor().to_u64().expect("[R/m] too large")
    }

    /// Number of colors `D = [R/m]^2`.
    pub fn colors(&self) -> u64 {
        self.blocks_per_side().pow(2)
    }

    /// Branching `N = m^2 D`.
    pub fn branching(&self) -> u64 {
        self.m * self.m * self.colors()
    }

    /// `H_n = 6 c R^n / l`.
    pub fn h(&self, n: u32) -> Surd2 {
        let ln = self.l.inv().expect("l > 0");
        (&ln * &self.r.powi(n as i64)).scale(&(ri(6) * &self.c))
    }

    /// `H'_n = 3 c' R^n / l`.
    pub fn h_prime(&self, n: u32) -> Surd2 {
        let ln = self.l.inv().expect("l > 0");
        (&ln * &self.r.powi(n as i64)).scale(&(ri(3) * &self.c_prime))
    }

    /// Side length `l R^-n` of a level-`n` square.
    pub fn side(&self, n: u32) -> Surd2 {
        &self.l * &self.r.powi(-(n as i64))
    }

    /// Largest `q` with `q^(1+max(i,j)) < H_{levels+1}`.
    pub fn level_implied_q(&self, levels: u32) -> BigInt {
        let e = Rat::one() + self.weights.max();
        let h = self.h(levels + 1);
        let mut q = BigInt::one();
        while h.cmp_powprod(&PowProd::pow(Rat::from_integer(q.clone()), e.clone())) == Ordering::Greater {
            q += 1;
        }
        q - 1
    }

    pub fn checks(&self) -> Vec<Check> {
        let r_inv = self.r.inv().expect("R > 0");
        let b1 = (&self.l * &r_inv).scale(&Rat::new(1.into(), 6.into()));
        let b2 = r_inv.powi(12).scale(&Rat::new(1.into(), 16.into()));
        let cs = Surd2::from_rat(self.c.clone());
        let rr = (&self.r * &self.r).a.clone();
        vec![
            check("alpha0 = (30 sqrt2)^-1", self.alpha0 == Surd2::new(Rat::zero(), Rat::new(1.into(), 60.into()))),
            check("R = (alpha0 beta)^-1", self.r == self.alpha0.scale(&self.beta).inv().unwrap()),
            check("c < l R^-1 / 6", cs < b1),
            check("c < R^-12 / 16", cs < b2),
            check("c' = c R^-2 / 6", self.c_prime == &self.c / &rr / ri(6)),
            check("H_1 <= 1", self.h(1) <= Surd2::one()),
        ]
    }
}

/// Derive the plane constants for a first disc of diameter `l`.
///
/// FAITHFUL takes the largest `2^-t` strictly below both bounds; DEMO drops the
/// `R^-12 / 16` bound, which only matters for the proofs.
pub fn derive_plane_constants(
    weights: &Weights,
    beta: &Rat,
    l: &Surd2,
    mode: ConstantsMode,
) -> Result<PlaneConstants, ModelError> {
    check_beta(beta)?;
    let alpha0 = Surd2::new(Rat::zero(), Rat::new(1.into(), 60.into()));
    let r = alpha0.scale(beta).inv().expect("alpha0 beta > 0");
    let r_inv = r.inv().unwrap();
    let b1 = (l * &r_inv).scale(&Rat::new(1.into(), 6.into()));
    let b2 = r_inv.powi(12).scale(&Rat::new(1.into(), 16.into()));
    let bound = match mode {
        ConstantsMode::Faithful => b1.min(b2),
        ConstantsMode::Demo => b1,
    };
    let mut c = Rat::one();
    while Surd2::from_rat(c.clone()) >= bound {
        c /= ri(2);
    }
    let r2 = (&r * &r).a.clone();
    let c_prime = &c / &r2 / ri(6);
    Ok(PlaneConstants {
        weights: weights.clone(),
        mode,
        beta: beta.clone(),
        alpha0,
        m: 15,
        r,
        l: l.clone(),
        c,
        c_prime,
        q_cap: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rat;

    fn poly(cs: &[i64]) -> Poly {
        Poly::new(cs.iter().map(|&c| ri(c)).collect())
    }

    #[test]
    fn kappa_examples() {
        let c = CurveSpec::new(poly(&[0, 0, 1]), Interval::new(ri(0), rat(1, 10))).unwrap();
        assert_eq!(kappa_for_curve(&c).unwrap(), ri(2));
        let c = CurveSpec::new(poly(&[0, 0, 1]), Interval::new(ri(0), ri(2))).unwrap();
        assert_eq!(kappa_for_curve(&c).unwrap(), ri(5));
        let c = CurveSpec::new(poly(&[0, 0, 0, 1]), Interval::new(ri(1), ri(2))).unwrap();
        assert_eq!(kappa_for_curve(&c).unwrap(), ri(13));
        let c = CurveSpec::parabola(rat(1, 10), rat(9, 10)).unwrap();
        assert_eq!(kappa_for_curve(&c).unwrap(), rat(14, 5));
    }

    #[test]
    fn kappa_with_irrational_extremum_has_small_denominator() {
        // f' = 3x^2 - 1 has |f'| max at an endpoint; f'' = 6x on [1/2, 1]
        let c = CurveSpec::new(poly(&[0, -1, 0, 1]), Interval::new(rat(1, 2), ri(1))).unwrap();
        let k = kappa_for_curve(&c).unwrap();
        assert!(k.denom() <= &BigInt::from(1000));
        assert_eq!(k, ri(6));
    }

    #[test]
    fn nondegeneracy_rejected() {
        let e = CurveSpec::new(poly(&[0, 0, 0, 1]), Interval::new(ri(-1), ri(1))).unwrap_err();
        assert_eq!(e, ModelError::NondegeneracyViolated);
    }

    #[test]
    fn curve_constants_half_weights() {
        let w = Weights::half();
        let curve = CurveSpec::parabola(rat(1, 10), rat(9, 10)).unwrap();
        let a0 = Interval::new(rat(3, 10), rat(7, 10));
        let k = derive_curve_constants(&w, &rat(1, 2), &curve, &a0, ConstantsMode::Demo).unwrap();
        assert_eq!(k.r, ri(1024));
        for kk in 1..5u32 {
            assert_eq!(k.lambda(kk), ri(6 * kk) + Rat::from_integer(k.mu.clone()));
        }
        assert_eq!(k.h(3) * &k.r, k.h(4));
        assert_eq!(k.h_prime(2) * &k.r, k.h_prime(3));
        let names: Vec<_> = k.checks().into_iter().filter(|c| !c.holds).map(|c| c.name).collect();
        assert!(names.iter().all(|n| n.starts_with("3 kappa") || n.starts_with("c <=")), "{names:?}");
        let e = derive_curve_constants(&w, &rat(1, 2), &curve, &a0, ConstantsMode::Faithful).unwrap_err();
        assert!(matches!(e, ModelError::NeedsPreliminaryShrink(_)));
    }

    #[test]
    fn faithful_curve_constants_pass_all_checks() {
        let w = Weights::half();
        let curve = CurveSpec::parabola(rat(1, 10), rat(9, 10)).unwrap();
        let a0 = Interval::new(ri(1) / ri(2) - rat(1, 100_000_000), ri(1) / ri(2) + rat(1, 100_000_000));
        let k = derive_curve_constants(&w, &rat(1, 2), &curve, &a0, ConstantsMode::Faithful).unwrap();
        assert!(k.checks().iter().all(|c| c.holds), "{:?}", k.checks());
        assert!(k.sanity_chain());
    }

    #[test]
    fn preliminary_rounds_example() {
        // kappa = 2, R = 4, rho(B0) = 1, alpha beta = 1/4
        assert_eq!(preliminary_rounds(&ri(2), &ri(4), &ri(1), &rat(1, 4)), 4);
    }

    #[test]
    fn line_constants_example() {
        let w = Weights::half();
        let line = LineSpec::new(rat(1, 2), rat(1, 3), ri(0), rat(1, 2), 5, &w).unwrap();
        let a0 = Interval::new(rat(1, 4), rat(3, 4));
        let k = derive_line_constants(&w, &rat(1, 2), &line, &a0, ConstantsMode::Demo, 2).unwrap();
        assert_eq!(k.r, ri(256));
        assert_eq!(k.kappa, rat(3, 2));
        assert_eq!(k.d, BigInt::from(2));
        assert!(k.checks().iter().filter(|c| c.name.starts_with("R^(mu-1)")).all(|c| c.holds));
        // the extra condition alone gives mu = 2 at R = 256
        assert!(r_from_beta(&rat(1, 2), 4).pow(1) >= rat(3, 2) * ri(4));
        assert!(k.mu >= BigInt::from(2));
    }

    #[test]
    fn c0_scan_rejects_rational_degeneracy() {
        let w = Weights::half();
        let e = LineSpec::new(rat(1, 2), rat(1, 3), ri(0), rat(1, 2), 6, &w).unwrap_err();
        assert_eq!(e, ModelError::C0ScanFailed { q: 6 });
    }

    #[test]
    fn plane_constants_half() {
        let w = Weights::half();
        let k = derive_plane_constants(&w, &rat(1, 2), &Surd2::one(), ConstantsMode::Faithful).unwrap();
        assert_eq!(k.r, Surd2::new(ri(0), ri(60)));
        assert_eq!(k.blocks_per_side(), 5);
        assert_eq!(k.colors(), 25);
        assert_eq!(k.branching(), 5625);
        assert!(k.checks().iter().all(|c| c.holds));
    }
}
