//! Exact rational arithmetic, comparisons against rational powers, and the
//! quadratic field Q(sqrt 2).
//!
//! Everything here is exact. Irrational quantities such as `q^(3/2)` or
//! `3*kappa*sqrt(c*q*|B|)` are never evaluated; they are compared by raising
//! both sides to a common integer power.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary precision rational, always normalized (`gcd = 1`, positive denominator).
pub type Rat = BigRational;

/// Shorthand for `n/d`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as a rational.
pub fn ri<T: Into<BigInt>>(n: T) -> Rat {
    Rat::from_integer(n.into())
}

pub fn floor_rat(x: &Rat) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil_rat(x: &Rat) -> BigInt {
    x.ceil().to_integer()
}

/// Distance from `x` to the nearest integer, a value in `[0, 1/2]`.
pub fn dist_to_nearest_int(x: &Rat) -> Rat {
    let frac = x - x.floor();
    let other = Rat::one() - &frac;
    if frac <= other {
        frac
    } else {
        other
    }
}

/// The integers nearest to `x`; two of them when `x` is a half-integer.
pub fn nearest_ints(x: &Rat) -> Vec<BigInt> {
    let fl = floor_rat(x);
    let frac = x - Rat::from_integer(fl.clone());
    let half = rat(1, 2);
    match frac.cmp(&half) {
        Ordering::Less => vec![fl],
        Ordering::Greater => vec![fl + 1],
        Ordering::Equal => vec![fl.clone(), fl + 1],
    }
}

fn pow_rat(x: &Rat, e: &BigInt) -> Rat {
    let e_u = e.abs().to_u32().expect("exponent too large for exact power");
    let p = Rat::new(x.numer().pow(e_u), x.denom().pow(e_u));
    if e.is_negative() {
        p.recip()
    } else {
        p
    }
}

/// Sign of `lhs - base^exp` for positive `lhs` and `base`.
///
/// With `exp = n/d` this compares `lhs^d` with `base^n`.
pub fn cmp_pow(lhs: &Rat, base: &Rat, exp: &Rat) -> Ordering {
    assert!(lhs.is_positive() && base.is_positive(), "cmp_pow needs positive operands");
    let d = exp.denom().clone();
    let n = exp.numer().clone();
    pow_rat(lhs, &d).cmp(&pow_rat(base, &n))
}

/// `floor(q^exp)` for `q >= 1` and `exp >= 0`.
pub fn floor_pow(q: &BigInt, exp: &Rat) -> BigInt {
    assert!(q >= &BigInt::one(), "floor_pow needs q >= 1");
    assert!(!exp.is_negative(), "floor_pow needs a nonnegative exponent");
    let n = exp.numer().to_u32().expect("exponent numerator too large");
    let d = exp.denom().to_u32().expect("exponent denominator too large");
    q.pow(n).nth_root(d)
}

/// Least integer `k >= 1` with `k^exp >= x`, for positive `exp` (0 when `x <= 0`).
pub fn ceil_root_pow(x: &Rat, exp: &Rat) -> BigInt {
    assert!(exp.is_positive());
    if !x.is_positive() {
        return BigInt::zero();
    }
    let reaches = |k: &BigInt| cmp_pow(x, &Rat::from_integer(k.clone()), exp) != Ordering::Greater;
    let mut k = floor_pow(&ceil_rat(x).max(BigInt::one()), &exp.recip()).max(BigInt::one());
    while !reaches(&k) {
        k += 1;
    }
    while k > BigInt::one() && reaches(&(&k - 1)) {
        k -= 1;
    }
    k
}

/// A positive monomial `coef * prod(base_i ^ exp_i)` with rational bases and
/// exponents. Comparisons are exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowProd {
    pub coef: Rat,
    pub factors: Vec<(Rat, Rat)>,
}

impl PowProd {
    pub fn rat(coef: Rat) -> Self {
        PowProd { coef, factors: Vec::new() }
    }

    /// `base^exp`.
    pub fn pow(base: Rat, exp: Rat) -> Self {
        PowProd::rat(Rat::one()).times_pow(base, exp)
    }

    /// Multiply by `base^exp`, merging with an existing factor of the same base.
    pub fn times_pow(mut self, base: Rat, exp: Rat) -> Self {
        assert!(base.is_positive(), "PowProd bases must be positive");
        if exp.is_zero() || base.is_one() {
            return self;
        }
        if exp.is_integer() {
            self.coef *= pow_rat(&base, exp.numer());
            return self;
        }
        if let Some(f) = self.factors.iter_mut().find(|f| f.0 == base) {
            f.1 += exp;
        } else {
            self.factors.push((base, exp));
        }
        self.normalize()
    }

    pub fn times_rat(mut self, r: &Rat) -> Self {
        self.coef *= r;
        self
    }

    pub fn mul(&self, other: &PowProd) -> PowProd {
        let mut out = self.clone().times_rat(&other.coef);
        for (b, e) in &other.factors {
            out = out.times_pow(b.clone(), e.clone());
        }
        out
    }

    pub fn recip(&self) -> PowProd {
        PowProd {
            coef: self.coef.recip(),
            factors: self.factors.iter().map(|(b, e)| (b.clone(), -e.clone())).collect(),
        }
    }

    fn normalize(mut self) -> Self {
        let mut keep = Vec::with_capacity(self.factors.len());
        for (mut b, mut e) in self.factors.drain(..) {
            if let Some(d) = e.denom().to_u32() {
                let (rn, rd) = (b.numer().nth_root(d), b.denom().nth_root(d));
                if rn.pow(d) == *b.numer() && rd.pow(d) == *b.denom() {
                    b = Rat::new(rn, rd);
                    e = Rat::from_integer(e.numer().clone());
                }
            }
            if e.is_integer() {
                self.coef *= pow_rat(&b, e.numer());
            } else {
                keep.push((b, e));
            }
        }
        self.factors = keep;
        self
    }

    /// Least common denominator of the exponents.
    pub fn exp_lcm(&self) -> BigInt {
        self.factors.iter().fold(BigInt::one(), |acc, (_, e)| acc.lcm(e.denom()))
    }

    /// `self^k` as an exact rational, where `k` is a multiple of `exp_lcm`.
    pub fn raise_to_rational(&self, k: &BigInt) -> Rat {
        let mut v = pow_rat(&self.coef, k);
        for (b, e) in &self.factors {
            let ex = (e * Rat::from_integer(k.clone())).to_integer();
            v *= pow_rat(b, &ex);
        }
        v
    }

    /// True when the value is an exact rational; returns it.
    pub fn as_rat(&self) -> Option<Rat> {
        if self.factors.is_empty() {
            Some(self.coef.clone())
        } else {
            None
        }
    }

    pub fn signum(&self) -> i32 {
        if self.coef.is_zero() {
            0
        } else if self.coef.is_positive() {
            1
        } else {
            -1
        }
    }

    /// Compare with a rational.
    pub fn cmp_rat(&self, x: &Rat) -> Ordering {
        self.cmp(&PowProd::rat(x.clone()))
    }

    /// Rational bounds `lo <= self <= hi` for a positive monomial, with
    /// relative width about `2^-bits`.
    pub fn bounds(&self, bits: u32) -> (Rat, Rat) {
        if let Some(r) = self.as_rat() {
            return (r.clone(), r);
        }
        assert!(self.coef.is_positive(), "bounds needs a positive monomial");
        let k = self.exp_lcm();
        let ku = k.to_u32().expect("exponent denominator too large");
        let v = self.raise_to_rational(&k);
        let lo = rational_root_floor(&v, ku, bits);
        let scale = Rat::new(BigInt::one(), BigInt::one() << bits);
        let hi = &lo + &lo * &scale + &scale;
        (lo, hi)
    }

    /// Cheap floating approximation for display only.
    pub fn approx_f64(&self) -> f64 {
        let mut v = self.coef.to_f64().unwrap_or(f64::NAN);
        for (b, e) in &self.factors {
            v *= b.to_f64().unwrap_or(f64::NAN).powf(e.to_f64().unwrap_or(f64::NAN));
        }
        v
    }
}

/// A rational `r <= a^(1/k)` with `a^(1/k) - r` small relative to `2^-bits`.
fn rational_root_floor(a: &Rat, k: u32, bits: u32) -> Rat {
    if a.is_zero() {
        return Rat::zero();
    }
    let scale = BigInt::one() << bits;
    // floor((a * scale^k)^(1/k)) / scale
    let big = a * Rat::from_integer(scale.pow(k));
    let fl = floor_rat(&big);
    Rat::new(fl.nth_root(k), scale)
}

impl fmt::Display for PowProd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coef)?;
        for (b, e) in &self.factors {
            write!(f, "*({})^({})", b, e)?;
        }
        Ok(())
    }
}

impl PartialOrd for PowProd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PowProd {
    fn cmp(&self, other: &Self) -> Ordering {
        let (s1, s2) = (self.signum(), other.signum());
        if s1 != s2 {
            return s1.cmp(&s2);
        }
        if s1 == 0 {
            return Ordering::Equal;
        }
        let k = self.exp_lcm().lcm(&other.exp_lcm());
        let a = self.raise_to_rational(&k);
        let b = other.raise_to_rational(&k);
        // both sides share the sign s1; k-th powers preserve order for positives
        let (aa, bb) = (a.abs(), b.abs());
        if s1 > 0 {
            aa.cmp(&bb)
        } else {
            bb.cmp(&aa)
        }
    }
}

/// `a + b*sqrt(2)` with rational `a`, `b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Surd2 {
    pub a: Rat,
    pub b: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurdError {
    #[error("division by zero surd")]
    DivisionByZero,
    #[error("cannot parse surd from {0:?}")]
    Parse(String),
}

impl Surd2 {
    pub fn new(a: Rat, b: Rat) -> Self {
        Surd2 { a, b }
    }

    pub fn from_rat(a: Rat) -> Self {
        Surd2 { a, b: Rat::zero() }
    }

    pub fn sqrt2() -> Self {
        Surd2 { a: Rat::zero(), b: Rat::one() }
    }

    pub fn zero() -> Self {
        Surd2::from_rat(Rat::zero())
    }

    pub fn one() -> Self {
        Surd2::from_rat(Rat::one())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn conj(&self) -> Self {
        Surd2 { a: self.a.clone(), b: -self.b.clone() }
    }

    /// Field norm `a^2 - 2b^2`.
    pub fn norm(&self) -> Rat {
        &self.a * &self.a - Rat::from_integer(2.into()) * &self.b * &self.b
    }

    pub fn inv(&self) -> Result<Self, SurdError> {
        if self.is_zero() {
            return Err(SurdError::DivisionByZero);
        }
        let n = self.norm();
        Ok(Surd2 { a: &self.a / &n, b: -(&self.b / &n) })
    }

    pub fn div(&self, other: &Surd2) -> Result<Self, SurdError> {
        Ok(self * &other.inv()?)
    }

    pub fn scale(&self, r: &Rat) -> Self {
        Surd2 { a: &self.a * r, b: &self.b * r }
    }

    pub fn powi(&self, e: i64) -> Self {
        let base = if e < 0 { self.inv().expect("power of zero surd") } else { self.clone() };
        let mut out = Surd2::one();
        for _ in 0..e.unsigned_abs() {
            out = &out * &base;
        }
        out
    }

    pub fn signum(&self) -> i32 {
        let sa = sgn(&self.a);
        let sb = sgn(&self.b);
        if sa >= 0 && sb >= 0 {
            return if sa + sb > 0 { 1 } else { 0 };
        }
        if sa <= 0 && sb <= 0 {
            return -1;
        }
        let a2 = &self.a * &self.a;
        let b2 = Rat::from_integer(2.into()) * &self.b * &self.b;
        // mixed signs: the term with the larger square wins
        match a2.cmp(&b2) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() > 0
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn floor(&self) -> BigInt {
        let mut g = self.rough_floor();
        while Surd2::from_rat(Rat::from_integer(g.clone())) > *self {
            g -= 1;
        }
        while Surd2::from_rat(Rat::from_integer(&g + 1)) <= *self {
            g += 1;
        }
        g
    }

    fn rough_floor(&self) -> BigInt {
        // b*sqrt2 = sign(b) * sqrt(2 b^2); approximate sqrt by an integer root at a scale
        let digits = self.b.numer().bits() + self.b.denom().bits() + 8;
        let scale = BigInt::one() << digits;
        let two_b2 = Rat::from_integer(2.into()) * &self.b * &self.b;
        let scaled = floor_rat(&(two_b2 * Rat::from_integer(&scale * &scale)));
        let root = Rat::new(scaled.sqrt(), scale);
        let t = if self.b.is_negative() { -root } else { root };
        floor_rat(&(&self.a + t))
    }

    /// Rational bounds `lo <= self <= hi` with `hi - lo <= 2^-bits` (roughly).
    pub fn bounds(&self, bits: u32) -> (Rat, Rat) {
        let scale = BigInt::one() << bits;
        let s = Surd2 { a: &self.a * Rat::from_integer(scale.clone()), b: &self.b * Rat::from_integer(scale.clone()) };
        let f = s.floor();
        (Rat::new(f.clone(), scale.clone()), Rat::new(f + 1, scale))
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
    }

    /// Compare with a positive monomial by raising both sides to a common integer power.
    pub fn cmp_powprod(&self, m: &PowProd) -> Ordering {
        let s = self.signum();
        let t = m.signum();
        if s != t || s == 0 {
            return s.cmp(&t);
        }
        let k = m.exp_lcm();
        let ku = k.to_i64().expect("exponent denominator too large");
        let lhs = self.abs().powi(ku);
        let rhs = Surd2::from_rat(m.raise_to_rational(&k).abs());
        let ord = lhs.cmp(&rhs);
        if s > 0 {
            ord
        } else {
            ord.reverse()
        }
    }
}

fn sgn(x: &Rat) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

impl PartialOrd for Surd2 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Surd2 {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl<'a> Add<&'a Surd2> for &'a Surd2 {
    type Output = Surd2;
    fn add(self, o: &Surd2) -> Surd2 {
        Surd2 { a: &self.a + &o.a, b: &self.b + &o.b }
    }
}

impl<'a> Sub<&'a Surd2> for &'a Surd2 {
    type Output = Surd2;
    fn sub(self, o: &Surd2) -> Surd2 {
        Surd2 { a: &self.a - &o.a, b: &self.b - &o.b }
    }
}

impl<'a> Mul<&'a Surd2> for &'a Surd2 {
    type Output = Surd2;
    fn mul(self, o: &Surd2) -> Surd2 {
        let two = Rat::from_integer(2.into());
        Surd2 { a: &self.a * &o.a + two * &self.b * &o.b, b: &self.a * &o.b + &self.b * &o.a }
    }
}

impl Add for Surd2 {
    type Output = Surd2;
    fn add(self, o: Surd2) -> Surd2 {
        &self + &o
    }
}

impl Sub for Surd2 {
    type Output = Surd2;
    fn sub(self, o: Surd2) -> Surd2 {
        &self - &o
    }
}

impl Mul for Surd2 {
    type Output = Surd2;
    fn mul(self, o: Surd2) -> Surd2 {
        &self * &o
    }
}

impl Neg for Surd2 {
    type Output = Surd2;
    fn neg(self) -> Surd2 {
        Surd2 { a: -self.a, b: -self.b }
    }
}

impl fmt::Display for Surd2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}*sqrt2", self.a, self.b)
    }
}

impl FromStr for Surd2 {
    type Err = SurdError;

    /// Accepts `a+b*sqrt2` (as printed), or a bare rational.
    fn from_str(s: &str) -> Result<Self, SurdError> {
        let t = s.trim();
        let err = || SurdError::Parse(s.to_string());
        if let Some(body) = t.strip_suffix("*sqrt2") {
            // split at the last '+' that is not the leading sign of b
            let idx = body.char_indices().skip(1).filter(|(_, c)| *c == '+').map(|(i, _)| i).last().ok_or_else(err)?;
            let a = parse_rat(&body[..idx]).ok_or_else(err)?;
            let b = parse_rat(&body[idx + 1..]).ok_or_else(err)?;
            Ok(Surd2 { a, b })
        } else {
            Ok(Surd2::from_rat(parse_rat(t).ok_or_else(err)?))
        }
    }
}

/// Parse `n`, `n/d`, or a finite decimal such as `0.25`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let t = s.trim();
    if let Ok(r) = t.parse::<Rat>() {
        return Some(r);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t),
    };
    let (ip, fp) = body.split_once('.')?;
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    let digits = format!("{ip}{fp}");
    let n: BigInt = digits.parse().ok()?;
    let d = BigInt::from(10u32).pow(fp.len() as u32);
    let r = Rat::new(n, d);
    Some(if neg { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_int_distance_examples() {
        assert_eq!(dist_to_nearest_int(&rat(37, 10)), rat(3, 10));
        assert_eq!(dist_to_nearest_int(&rat(1, 2)), rat(1, 2));
        assert_eq!(dist_to_nearest_int(&rat(-7, 3)), rat(1, 3));
        assert_eq!(nearest_ints(&rat(5, 2)).len(), 2);
    }

    #[test]
    fn cmp_pow_examples() {
        assert_eq!(cmp_pow(&ri(3), &ri(2), &rat(3, 2)), Ordering::Greater);
        assert_eq!(cmp_pow(&ri(8), &ri(4), &rat(3, 2)), Ordering::Equal);
        assert_eq!(cmp_pow(&ri(5), &ri(30), &rat(1, 2)), Ordering::Less);
    }

    #[test]
    fn floor_pow_examples() {
        assert_eq!(floor_pow(&BigInt::from(2), &rat(1, 2)), BigInt::from(1));
        assert_eq!(floor_pow(&BigInt::from(1024), &rat(3, 2)), BigInt::from(32768));
        // integer cube oracle: 4^3 = 64 <= 100 < 125 = 5^3
        assert_eq!(floor_pow(&BigInt::from(10), &rat(2, 3)), BigInt::from(4));
    }

    #[test]
    fn ceil_root_pow_matches_scan() {
        // least q with q^(3/2) >= 21/2
        let q = ceil_root_pow(&rat(21, 2), &rat(3, 2));
        assert_eq!(q, BigInt::from(5));
    }

    #[test]
    fn surd_examples() {
        let x = Surd2::new(ri(1), ri(1));
        let y = Surd2::new(ri(1), ri(-1));
        assert_eq!(&x * &y, Surd2::from_rat(ri(-1)));
        assert_eq!(Surd2::new(ri(0), ri(4)).floor(), BigInt::from(5));
        let inv = Surd2::new(ri(0), ri(30)).inv().unwrap();
        assert_eq!(inv, Surd2::new(ri(0), rat(1, 60)));
        assert!(Surd2::zero().inv().is_err());
    }

    #[test]
    fn surd_roundtrip_string() {
        let s = Surd2::new(rat(-3, 7), rat(1, 60));
        let t: Surd2 = s.to_string().parse().unwrap();
        assert_eq!(s, t);
        let u: Surd2 = "0+-5/2*sqrt2".parse().unwrap();
        assert_eq!(u, Surd2::new(ri(0), rat(-5, 2)));
    }

    #[test]
    fn powprod_compares_mixed_exponents() {
        // 2 * 5^(3/2) ~ 22.36 >= 21 > 16 = 2 * 4^(3/2)
        let a = PowProd::pow(ri(5), rat(3, 2)).times_rat(&ri(2));
        assert_eq!(a.cmp_rat(&ri(21)), Ordering::Greater);
        let b = PowProd::pow(ri(4), rat(3, 2)).times_rat(&ri(2));
        assert_eq!(b.as_rat(), Some(ri(16)));
        let c = PowProd::pow(ri(2), rat(1, 2)).times_pow(ri(3), rat(1, 3));
        let d = PowProd::pow(ri(2), rat(1, 3)).times_pow(ri(3), rat(1, 2));
        assert_eq!(c.cmp(&d), Ordering::Less);
    }

    #[test]
    fn surd_vs_powprod() {
        // 4 sqrt2 = 32^(1/2)
        let s = Surd2::new(ri(0), ri(4));
        assert_eq!(s.cmp_powprod(&PowProd::pow(ri(32), rat(1, 2))), Ordering::Equal);
        assert_eq!(s.cmp_powprod(&PowProd::pow(ri(33), rat(1, 2))), Ordering::Less);
    }

    #[test]
    fn parse_rat_forms() {
        assert_eq!(parse_rat("3/4"), Some(rat(3, 4)));
        assert_eq!(parse_rat("-0.25"), Some(rat(-1, 4)));
        assert_eq!(parse_rat("7"), Some(ri(7)));
        assert_eq!(parse_rat("x"), None);
    }
}
