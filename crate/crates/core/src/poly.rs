//! Univariate polynomials with rational coefficients and exact real-root
//! isolation by Sturm sequences.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact_arith::Rat;

/// Coefficients from the constant term upward; no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poly {
    #[serde(with = "crate::serial::rat_vec")]
    pub coeffs: Vec<Rat>,
}

/// A root of a polynomial lies in `(lo, hi]`, or equals `lo` when `lo == hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootBracket {
    pub lo: Rat,
    pub hi: Rat,
}

impl RootBracket {
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Rat) -> Self {
        Poly::new(vec![c])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lead(&self) -> Rat {
        self.coeffs.last().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * Rat::from_integer(BigInt::from(k))).collect())
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let z = Rat::zero();
        Poly::new((0..n).map(|k| self.coeffs.get(k).unwrap_or(&z) + o.coeffs.get(k).unwrap_or(&z)).collect())
    }

    pub fn scale(&self, s: &Rat) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(&-Rat::one()))
    }

    pub fn add_const(&self, c: &Rat) -> Poly {
        self.add(&Poly::constant(c.clone()))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rat::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.degree().unwrap();
        let lead = d.lead();
        let mut rem = self.coeffs.clone();
        if self.coeffs.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![Rat::zero(); self.coeffs.len() - dd];
        for k in (dd..self.coeffs.len()).rev() {
            let coef = &rem[k] / &lead;
            if coef.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                let t = &coef * dc;
                rem[k - dd + j] -= t;
            }
            quot[k - dd] = coef;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        self.scale(&self.lead().recip())
    }

    pub fn gcd(&self, o: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Same roots, each simple.
    pub fn squarefree(&self) -> Poly {
        if self.degree().unwrap_or(0) < 1 {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        self.div_rem(&g).0
    }

    pub fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone(), self.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let r = chain[n - 2].div_rem(&chain[n - 1]).1;
            if r.is_zero() {
                break;
            }
            chain.push(r.scale(&-Rat::one()));
        }
        chain
    }

    /// Number of distinct real roots in `[lo, hi]`.
    pub fn count_roots(&self, lo: &Rat, hi: &Rat) -> usize {
        let p = self.squarefree();
        let chain = p.sturm_chain();
        let v = sign_changes(&chain, lo) - sign_changes(&chain, hi);
        v + usize::from(p.eval(lo).is_zero())
    }

    /// Isolating brackets of the distinct real roots in `[lo, hi]`, sorted.
    pub fn isolate_roots(&self, lo: &Rat, hi: &Rat) -> Vec<RootBracket> {
        assert!(!self.is_zero(), "cannot isolate roots of the zero polynomial");
        let p = self.squarefree();
        if p.degree() == Some(0) {
            return Vec::new();
        }
        let chain = p.sturm_chain();
        let mut out = Vec::new();
        if p.eval(lo).is_zero() {
            out.push(RootBracket { lo: lo.clone(), hi: lo.clone() });
        }
        isolate(&p, &chain, lo.clone(), hi.clone(), &mut out);
        out
    }

    /// Shrink a bracket of `self` to width at most `w`.
    pub fn refine(&self, b: &RootBracket, w: &Rat) -> RootBracket {
        let p = self.squarefree();
        let chain = p.sturm_chain();
        let mut cur = b.clone();
        while !cur.is_exact() && cur.width() > *w {
            if p.eval(&cur.hi).is_zero() {
                return RootBracket { lo: cur.hi.clone(), hi: cur.hi };
            }
            let mid = (&cur.lo + &cur.hi) / Rat::from_integer(2.into());
            let left = sign_changes(&chain, &cur.lo) - sign_changes(&chain, &mid);
            if left >= 1 {
                cur.hi = mid;
            } else {
                cur.lo = mid;
            }
        }
        cur
    }

    /// True if `self(x) >= 0` for every `x` in `[lo, hi]`.
    pub fn nonneg_on(&self, lo: &Rat, hi: &Rat) -> bool {
        if self.is_zero() {
            return true;
        }
        let mut pts = vec![lo.clone(), hi.clone()];
        let roots = self.isolate_roots(lo, hi);
        let refined: Vec<RootBracket> = separate(self, roots);
        // sample strictly between consecutive brackets; sign is constant there
        let mut edges = vec![lo.clone()];
        for r in &refined {
            edges.push(r.lo.clone());
            edges.push(r.hi.clone());
        }
        edges.push(hi.clone());
        for w in edges.windows(2) {
            if w[0] < w[1] {
                pts.push((&w[0] + &w[1]) / Rat::from_integer(2.into()));
            }
        }
        pts.iter().all(|x| !self.eval(x).is_negative())
    }

    /// Sign of the value at `x`.
    pub fn sign_at(&self, x: &Rat) -> Ordering {
        self.eval(x).cmp(&Rat::zero())
    }
}

/// Refine brackets until they are pairwise disjoint as closed intervals and
/// each bracket interior holds no other root.
fn separate(p: &Poly, mut roots: Vec<RootBracket>) -> Vec<RootBracket> {
    loop {
        let mut ok = true;
        for k in 1..roots.len() {
            if roots[k - 1].hi >= roots[k].lo {
                ok = false;
                let w0 = roots[k - 1].width() / Rat::from_integer(2.into());
                let w1 = roots[k].width() / Rat::from_integer(2.into());
                roots[k - 1] = p.refine(&roots[k - 1], &w0);
                roots[k] = p.refine(&roots[k], &w1);
            }
        }
        if ok {
            return roots;
        }
    }
}

fn sign_changes(chain: &[Poly], x: &Rat) -> usize {
    let mut last = 0i8;
    let mut n = 0;
    for p in chain {
        let v = p.eval(x);
        let s = if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        };
        if s != 0 {
            if last != 0 && s != last {
                n += 1;
            }
            last = s;
        }
    }
    n
}

fn isolate(p: &Poly, chain: &[Poly], lo: Rat, hi: Rat, out: &mut Vec<RootBracket>) {
    let n = sign_changes(chain, &lo) - sign_changes(chain, &hi);
    if n == 0 {
        return;
    }
    if n == 1 {
        if p.eval(&hi).is_zero() {
            out.push(RootBracket { lo: hi.clone(), hi });
        } else {
            out.push(RootBracket { lo, hi });
        }
        return;
    }
    let mid = (&lo + &hi) / Rat::from_integer(2.into());
    isolate(p, chain, lo, mid.clone(), out);
    isolate(p, chain, mid, hi, out);
}

/// Integer form of `L * q^d * f(p/q)` for fast exact evaluation at many `p/q`.
#[derive(Clone, Debug)]
pub struct HomogeneousForm {
    /// `L * a_k` for `k = 0..=d`.
    pub scaled: Vec<BigInt>,
    pub small: Option<Vec<i128>>,
    /// Common denominator `L` of the coefficients.
    pub denom: BigInt,
    pub degree: usize,
}

impl HomogeneousForm {
    pub fn new(f: &Poly) -> Self {
        let denom = f.coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let scaled: Vec<BigInt> =
            f.coeffs.iter().map(|c| (c * Rat::from_integer(denom.clone())).to_integer()).collect();
        let small = scaled.iter().map(|c| c.to_i128()).collect::<Option<Vec<_>>>();
        HomogeneousForm { degree: f.degree().unwrap_or(0), scaled, small, denom }
    }

    /// `L * q^d * f(p/q)` as an integer.
    pub fn eval(&self, p: &BigInt, q: &BigInt) -> BigInt {
        if let (Some(sm), Some(pp), Some(qq)) = (&self.small, p.to_i128(), q.to_i128()) {
            if let Some(v) = eval_i128(sm, self.degree, pp, qq) {
                return BigInt::from(v);
            }
        }
        let mut acc = BigInt::zero();
        for (k, c) in self.scaled.iter().enumerate() {
            acc += c * p.pow(k as u32) * q.pow((self.degree - k) as u32);
        }
        acc
    }
}

fn eval_i128(c: &[i128], d: usize, p: i128, q: i128) -> Option<i128> {
    let mut acc: i128 = 0;
    for (k, ck) in c.iter().enumerate() {
        let mut t = *ck;
        for _ in 0..k {
            t = t.checked_mul(p)?;
        }
        for _ in 0..(d - k) {
            t = t.checked_mul(q)?;
        }
        acc = acc.checked_add(t)?;
    }
    Some(acc)
}
