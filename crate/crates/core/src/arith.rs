//! Rationals, p-adic numbers with tracked absolute precision, the Teichmüller
//! character and the principal-unit projection, p-adic log/exp, and a few
//! combinatorial helpers.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArithError {
    #[error("{0} is not a p-adic unit")]
    NotUnit(String),
    #[error("{0} lies outside the convergence disc")]
    OutsideDisc(String),
    #[error("division by a p-adic zero")]
    DivisionByZero,
    #[error("{0} is not an odd prime")]
    BadPrime(u64),
    #[error("cannot parse {0:?} as a rational number")]
    Parse(String),
    #[error("insufficient precision: requested {requested}, available {available}")]
    Precision { requested: i64, available: i64 },
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"n"`, `"-n"` or `"n/d"`.
pub fn parse_rat(s: &str) -> Result<Rat, ArithError> {
    let bad = || ArithError::Parse(s.to_string());
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rat::new(n, d))
        }
        None => Ok(Rat::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn pow_big(p: u64, k: u32) -> BigInt {
    num_traits::pow(BigInt::from(p), k as usize)
}

/// Exponent of `p` in a nonzero integer.
pub fn vp_bigint(p: u64, n: &BigInt) -> u32 {
    debug_assert!(!n.is_zero());
    let pb = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

pub fn vp_i64(p: u64, n: i64) -> u32 {
    vp_bigint(p, &BigInt::from(n))
}

/// p-adic valuation of a rational, `None` for zero.
pub fn vp_rat(p: u64, r: &Rat) -> Option<i64> {
    if r.is_zero() {
        return None;
    }
    Some(vp_bigint(p, r.numer()) as i64 - vp_bigint(p, r.denom()) as i64)
}

pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

pub fn mod_inverse_i64(a: i64, m: i64) -> Option<i64> {
    mod_inverse(&BigInt::from(a), &BigInt::from(m)).and_then(|x| x.to_i64())
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Stirling numbers of the second kind S(k, n).
pub fn stirling2(k: usize, n: usize) -> BigInt {
    let mut row = vec![BigInt::zero(); n + 1];
    row[0] = BigInt::one();
    for i in 1..=k {
        let mut next = vec![BigInt::zero(); n + 1];
        for j in 1..=n.min(i) {
            next[j] = BigInt::from(j) * &row[j] + &row[j - 1];
        }
        row = next;
    }
    row[n].clone()
}

/// Generalized binomial coefficient a(a−1)…(a−n+1)/n!.
pub fn binom_rat(a: &Rat, n: usize) -> Rat {
    let mut acc = Rat::one();
    for i in 0..n {
        acc = acc * (a - rat_int(i as i64)) / rat_int(i as i64 + 1);
    }
    acc
}

pub fn binom_int(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    binom_rat(&rat_int(n as i64), k as usize).to_integer()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PadicCtx {
    pub p: u64,
    pub prec: u32,
}

impl PadicCtx {
    pub fn new(p: u64, prec: u32) -> Result<Self, ArithError> {
        if p == 2 || !is_prime(p) || prec == 0 {
            return Err(ArithError::BadPrime(p));
        }
        Ok(PadicCtx { p, prec })
    }

    pub fn with_prec(self, prec: u32) -> Self {
        PadicCtx { prec, ..self }
    }
}

/// A p-adic number `p^val · unit + O(p^(val+rel))`.
///
/// `rel == 0` encodes a zero known to absolute precision `val`. The unit part
/// is kept reduced in `[1, p^rel)`.
#[derive(Clone, Debug)]
pub struct PadicNum {
    p: u64,
    val: i64,
    unit: BigInt,
    rel: u32,
}

impl PadicNum {
    pub fn zero(p: u64, abs: i64) -> Self {
        PadicNum { p, val: abs, unit: BigInt::zero(), rel: 0 }
    }

    pub fn one(ctx: PadicCtx) -> Self {
        Self::from_int(ctx, 1)
    }

    /// Value `p^val · x` known modulo `p^abs`.
    fn make(p: u64, val: i64, x: BigInt, abs: i64) -> Self {
        if abs <= val {
            return Self::zero(p, abs);
        }
        let r = (abs - val) as u32;
        let x = x.mod_floor(&pow_big(p, r));
        if x.is_zero() {
            return Self::zero(p, abs);
        }
        let w = vp_bigint(p, &x);
        let unit = x / pow_big(p, w);
        PadicNum { p, val: val + w as i64, unit, rel: r - w }
    }

    pub fn from_bigint(ctx: PadicCtx, n: &BigInt) -> Self {
        if n.is_zero() {
            return Self::zero(ctx.p, ctx.prec as i64);
        }
        let v = vp_bigint(ctx.p, n) as i64;
        Self::make(ctx.p, 0, n.clone(), v + ctx.prec as i64)
    }

    pub fn from_int(ctx: PadicCtx, n: i64) -> Self {
        Self::from_bigint(ctx, &BigInt::from(n))
    }

    /// Exact rational embedded with relative precision `ctx.prec`.
    pub fn from_rat(ctx: PadicCtx, r: &Rat) -> Self {
        let Some(v) = vp_rat(ctx.p, r) else {
            return Self::zero(ctx.p, ctx.prec as i64);
        };
        let pv = pow_big(ctx.p, v.unsigned_abs() as u32);
        let (n, d) = if v >= 0 {
            (r.numer() / &pv, r.denom().clone())
        } else {
            (r.numer().clone(), r.denom() / &pv)
        };
        let m = pow_big(ctx.p, ctx.prec);
        let dinv = mod_inverse(&d, &m).expect("denominator is a p-unit after removing p");
        Self::make(ctx.p, v, n * dinv, v + ctx.prec as i64)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.rel == 0
    }

    pub fn valuation(&self) -> Option<i64> {
        (!self.is_zero()).then_some(self.val)
    }

    /// Valuation, with a zero reporting its absolute precision.
    pub fn val_or_prec(&self) -> i64 {
        self.val
    }

    pub fn abs_prec(&self) -> i64 {
        self.val + self.rel as i64
    }

    pub fn rel_prec(&self) -> u32 {
        self.rel
    }

    pub fn unit_part(&self) -> &BigInt {
        &self.unit
    }

    pub fn is_unit(&self) -> bool {
        !self.is_zero() && self.val == 0
    }

    /// Forgets digits beyond absolute precision `abs`.
    pub fn truncate(&self, abs: i64) -> Self {
        if abs >= self.abs_prec() {
            return self.clone();
        }
        if self.is_zero() {
            return Self::zero(self.p, abs);
        }
        Self::make(self.p, self.val, self.unit.clone(), abs)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let m = pow_big(self.p, self.rel);
        PadicNum { unit: &m - &self.unit, ..self.clone() }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.p, o.p, "mixed primes");
        let abs = self.abs_prec().min(o.abs_prec());
        match (self.is_zero(), o.is_zero()) {
            (true, true) => Self::zero(self.p, abs),
            (true, false) => o.truncate(abs),
            (false, true) => self.truncate(abs),
            (false, false) => {
                let v = self.val.min(o.val);
                let x = &self.unit * pow_big(self.p, (self.val - v) as u32)
                    + &o.unit * pow_big(self.p, (o.val - v) as u32);
                Self::make(self.p, v, x, abs)
            }
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.p, o.p, "mixed primes");
        match (self.is_zero(), o.is_zero()) {
            (true, true) => Self::zero(self.p, self.val + o.val),
            (true, false) => Self::zero(self.p, self.val + o.val),
            (false, true) => Self::zero(self.p, self.val + o.val),
            (false, false) => {
                let rel = self.rel.min(o.rel);
                let unit = (&self.unit * &o.unit).mod_floor(&pow_big(self.p, rel));
                PadicNum { p: self.p, val: self.val + o.val, unit, rel }
            }
        }
    }

    pub fn inv(&self) -> Result<Self, ArithError> {
        if self.is_zero() {
            return Err(ArithError::DivisionByZero);
        }
        let unit = mod_inverse(&self.unit, &pow_big(self.p, self.rel)).expect("unit part is invertible");
        Ok(PadicNum { p: self.p, val: -self.val, unit, rel: self.rel })
    }

    pub fn div(&self, o: &Self) -> Result<Self, ArithError> {
        Ok(self.mul(&o.inv()?))
    }

    pub fn pow(&self, e: i64) -> Result<Self, ArithError> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc: Option<PadicNum> = None;
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => b.clone(),
                    Some(a) => a.mul(&b),
                });
            }
            k >>= 1;
            if k > 0 {
                b = b.mul(&b);
            }
        }
        Ok(acc.unwrap_or_else(|| {
            let abs = if self.is_zero() { self.val.max(1) } else { self.rel as i64 };
            Self::make(self.p, 0, BigInt::one(), abs)
        }))
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        let ctx = PadicCtx { p: self.p, prec: self.rel.max(1) + 8 };
        self.mul(&Self::from_rat(ctx, r))
    }

    /// Compares at absolute precision `prec`; fails when either operand is
    /// known to less than that.
    pub fn eq_mod(&self, o: &Self, prec: i64) -> Result<bool, ArithError> {
        let avail = self.abs_prec().min(o.abs_prec());
        if avail < prec {
            return Err(ArithError::Precision { requested: prec, available: avail });
        }
        let d = self.sub(o);
        Ok(d.is_zero() || d.val >= prec)
    }

    /// Valuation of `self − o`, capped by the joint precision.
    pub fn agreement(&self, o: &Self) -> i64 {
        self.sub(o).val_or_prec()
    }

    /// Residue modulo `p^k` of a p-integral value.
    pub fn residue(&self, k: u32) -> Result<BigInt, ArithError> {
        if self.abs_prec() < k as i64 {
            return Err(ArithError::Precision { requested: k as i64, available: self.abs_prec() });
        }
        if self.is_zero() || self.val >= k as i64 {
            return Ok(BigInt::zero());
        }
        if self.val < 0 {
            return Err(ArithError::NotUnit(self.to_string()));
        }
        Ok((&self.unit * pow_big(self.p, self.val as u32)).mod_floor(&pow_big(self.p, k)))
    }

    /// Base-p digits of the unit part, least significant first.
    pub fn unit_digits(&self) -> String {
        let mut s = String::new();
        let mut x = self.unit.clone();
        let pb = BigInt::from(self.p);
        for _ in 0..self.rel {
            let (q, r) = x.div_rem(&pb);
            let d = r.to_u32().unwrap_or(0);
            s.push(std::char::from_digit(d, 36).unwrap_or('?'));
            x = q;
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "p": self.p,
            "val": self.val,
            "unit": self.unit_digits(),
            "abs_prec": self.abs_prec(),
        })
    }
}

impl fmt::Display for PadicNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "O({}^{})", self.p, self.val)
        } else {
            write!(f, "{}^{} * {} + O({}^{})", self.p, self.val, self.unit, self.p, self.abs_prec())
        }
    }
}

fn require_unit(u: &PadicNum) -> Result<(), ArithError> {
    if u.is_unit() {
        Ok(())
    } else {
        Err(ArithError::NotUnit(u.to_string()))
    }
}

/// ω(u): the (p−1)-st root of unity congruent to `u` mod p.
///
/// Depends only on `u mod p`, so the result carries the full context precision.
pub fn teichmuller(u: &PadicNum, ctx: PadicCtx) -> Result<PadicNum, ArithError> {
    require_unit(u)?;
    let m = pow_big(ctx.p, ctx.prec);
    let pb = BigInt::from(ctx.p);
    let mut x = u.unit.mod_floor(&pb);
    for _ in 0..=ctx.prec {
        let next = x.modpow(&pb, &m);
        if next == x {
            break;
        }
        x = next;
    }
    Ok(PadicNum::make(ctx.p, 0, x, ctx.prec as i64))
}

pub fn teichmuller_rat(u: &Rat, ctx: PadicCtx) -> Result<PadicNum, ArithError> {
    teichmuller(&PadicNum::from_rat(ctx, u), ctx)
}

/// ⟨u⟩ = u / ω(u), a principal unit.
pub fn angle(u: &PadicNum, ctx: PadicCtx) -> Result<PadicNum, ArithError> {
    let w = teichmuller(u, ctx)?;
    u.div(&w)
}

/// p-adic logarithm on 1 + pℤ_p.
pub fn padic_log(x: &PadicNum) -> Result<PadicNum, ArithError> {
    require_unit(x)?;
    let p = x.p;
    let target = x.abs_prec();
    let one = PadicNum::make(p, 0, BigInt::one(), target + 4);
    let y = x.sub(&one);
    if y.is_zero() {
        return Ok(PadicNum::zero(p, y.abs_prec()));
    }
    let v = y.val;
    if v < 1 {
        return Err(ArithError::OutsideDisc(x.to_string()));
    }
    let ctx = PadicCtx { p, prec: (target + 8) as u32 };
    let mut sum = PadicNum::zero(p, target + 8);
    let mut pw = y.clone();
    let mut n: i64 = 1;
    loop {
        let tail_floor = n * v - ilog(p, n as u64) as i64;
        if tail_floor >= target {
            break;
        }
        let term = pw.div(&PadicNum::from_int(ctx, n))?;
        sum = if n % 2 == 1 { sum.add(&term) } else { sum.sub(&term) };
        pw = pw.mul(&y);
        n += 1;
    }
    Ok(sum.truncate(target))
}

/// p-adic exponential on pℤ_p.
pub fn padic_exp(y: &PadicNum) -> Result<PadicNum, ArithError> {
    let p = y.p;
    let target = y.abs_prec();
    let one = PadicNum::make(p, 0, BigInt::one(), target.max(1));
    if y.is_zero() {
        return Ok(one.truncate(target.max(0)));
    }
    let v = y.val;
    if v < 1 {
        return Err(ArithError::OutsideDisc(y.to_string()));
    }
    let ctx = PadicCtx { p, prec: (target + 8) as u32 };
    // term valuation is at least n(v − 1/(p−1))
    let slope = Rat::from_integer(BigInt::from(v)) - rat(1, p as i64 - 1);
    let mut sum = PadicNum::make(p, 0, BigInt::one(), target + 8);
    let mut term = PadicNum::make(p, 0, BigInt::one(), target + 8);
    let mut n: i64 = 1;
    loop {
        if slope.clone() * rat_int(n) >= rat_int(target) {
            break;
        }
        term = term.mul(y).div(&PadicNum::from_int(ctx, n))?;
        sum = sum.add(&term);
        n += 1;
    }
    Ok(sum.truncate(target))
}

fn ilog(p: u64, n: u64) -> u32 {
    let mut k = 0;
    let mut x = n;
    while x >= p {
        x /= p;
        k += 1;
    }
    k
}

/// ⟨u⟩^s = exp(s · log⟨u⟩) for a p-integral exponent `s`.
pub fn char_power(u: &PadicNum, s: &PadicNum, ctx: PadicCtx) -> Result<PadicNum, ArithError> {
    if !s.is_zero() && s.val < 0 {
        return Err(ArithError::OutsideDisc(s.to_string()));
    }
    let a = angle(u, ctx)?;
    let l = padic_log(&a)?;
    padic_exp(&s.mul(&l))
}

/// ⟨u⟩^k for an integer exponent, by repeated multiplication.
pub fn char_power_int(u: &PadicNum, k: i64, ctx: PadicCtx) -> Result<PadicNum, ArithError> {
    angle(u, ctx)?.pow(k)
}

/// Exponent of a character u ↦ ⟨u⟩^s: an integer or a p-adic integer.
#[derive(Clone, Debug)]
pub enum CharExponent {
    Int(i64),
    Padic(PadicNum),
}

impl CharExponent {
    pub fn shift(&self, by: i64, ctx: PadicCtx) -> Self {
        match self {
            CharExponent::Int(s) => CharExponent::Int(s + by),
            CharExponent::Padic(s) => CharExponent::Padic(s.add(&PadicNum::from_int(ctx.with_prec(s.abs_prec().max(1) as u32 + 4), by))),
        }
    }

    pub fn to_padic(&self, ctx: PadicCtx) -> PadicNum {
        match self {
            CharExponent::Int(s) => PadicNum::from_int(ctx, *s),
            CharExponent::Padic(s) => s.clone(),
        }
    }
}

/// ⟨u⟩^s with the integer fast path.
pub fn char_power_exp(u: &PadicNum, s: &CharExponent, ctx: PadicCtx) -> Result<PadicNum, ArithError> {
    match s {
        CharExponent::Int(k) => char_power_int(u, *k, ctx),
        CharExponent::Padic(x) => char_power(u, x, ctx),
    }
}

/// Generalized binomial coefficient with a p-adic top argument.
pub fn binom_padic(a: &PadicNum, n: usize) -> Result<PadicNum, ArithError> {
    let ctx = PadicCtx { p: a.p, prec: (a.abs_prec().max(1) + 8) as u32 };
    let mut acc = PadicNum::make(a.p, 0, BigInt::one(), a.abs_prec().max(1) + 8);
    for i in 0..n {
        let shifted = a.sub(&PadicNum::from_int(ctx, i as i64));
        acc = acc.mul(&shifted).div(&PadicNum::from_int(ctx, i as i64 + 1))?;
    }
    Ok(acc)
}

/// An element α = num/den of ℚ/ℤ in lowest terms with 0 ≤ num < den.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorsionPoint {
    num: i64,
    den: i64,
}

impl TorsionPoint {
    pub fn new(a: i64, n: i64) -> Self {
        assert!(n != 0, "torsion point with zero denominator");
        let (a, n) = if n < 0 { (-a, -n) } else { (a, n) };
        let a = a.rem_euclid(n);
        let g = a.gcd(&n);
        if a == 0 {
            return TorsionPoint { num: 0, den: 1 };
        }
        TorsionPoint { num: a / g, den: n / g }
    }

    pub fn zero() -> Self {
        TorsionPoint { num: 0, den: 1 }
    }

    pub fn from_rat(r: &Rat) -> Self {
        let n = r.numer().to_i64().expect("numerator fits in i64");
        let d = r.denom().to_i64().expect("denominator fits in i64");
        Self::new(n, d)
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn ord(&self) -> i64 {
        self.den
    }

    pub fn ord_p(&self, p: u64) -> i64 {
        (p as i64).pow(vp_i64(p, self.den))
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// {α} ∈ [0, 1).
    pub fn frac(&self) -> Rat {
        rat(self.num, self.den)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.num, self.den)
    }

    pub fn add(&self, o: &Self) -> Self {
        let l = self.den.lcm(&o.den);
        Self::new(self.num * (l / self.den) + o.num * (l / o.den), l)
    }

    pub fn mul_int(&self, k: i64) -> Self {
        Self::new(self.num * k, self.den)
    }

    /// Splits α = α_p + α′ with ord(α_p) a power of p and ord(α′) prime to p.
    pub fn split_p(&self, p: u64) -> (Self, Self) {
        let pp = self.ord_p(p);
        let rest = self.den / pp;
        let x = if pp == 1 { 0 } else { self.num * mod_inverse_i64(rest, pp).unwrap_or(0) };
        let y = if rest == 1 { 0 } else { self.num * mod_inverse_i64(pp, rest).unwrap_or(0) };
        (Self::new(x, pp), Self::new(y, rest))
    }

    /// All α′ with f·α′ = α.
    pub fn division_points(&self, f: i64) -> Vec<Self> {
        (0..f).map(|i| Self::new(self.num + i * self.den, self.den * f)).collect()
    }
}

impl fmt::Display for TorsionPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub fn big_to_rat(n: &BigInt) -> Rat {
    Rat::from_integer(n.clone())
}

pub fn rat_pow(r: &Rat, e: i64) -> Rat {
    if e >= 0 {
        num_traits::pow(r.clone(), e as usize)
    } else {
        num_traits::pow(r.recip(), e.unsigned_abs() as usize)
    }
}

pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(n: u32) -> PadicCtx {
        PadicCtx::new(5, n).unwrap()
    }

    fn res(x: &PadicNum, k: u32) -> i64 {
        x.residue(k).unwrap().to_i64().unwrap()
    }

    #[test]
    fn teichmuller_examples() {
        let c = ctx(2);
        assert_eq!(res(&teichmuller(&PadicNum::from_int(c, 1), c).unwrap(), 2), 1);
        assert_eq!(res(&teichmuller(&PadicNum::from_int(c, 2), c).unwrap(), 2), 7);
        let c3 = ctx(3);
        assert_eq!(res(&teichmuller(&PadicNum::from_int(c3, -1), c3).unwrap(), 3), 124);
        assert!(teichmuller(&PadicNum::from_int(c, 5), c).is_err());
    }

    #[test]
    fn angle_examples() {
        let c = ctx(2);
        assert_eq!(res(&angle(&PadicNum::from_int(c, 2), c).unwrap(), 2), 11);
        let w = teichmuller(&PadicNum::from_int(ctx(10), 3), ctx(10)).unwrap();
        assert_eq!(res(&angle(&w, ctx(10)).unwrap(), 10), 1);
    }

    #[test]
    fn log_exp_round_trip() {
        let c = ctx(12);
        assert!(padic_log(&PadicNum::one(c)).unwrap().is_zero());
        let e0 = padic_exp(&PadicNum::zero(5, 12)).unwrap();
        assert_eq!(res(&e0, 12), 1);
        let x = PadicNum::from_int(c, 6);
        let back = padic_exp(&padic_log(&x).unwrap()).unwrap();
        assert!(back.eq_mod(&x, back.abs_prec()).unwrap());
        assert!(back.abs_prec() >= 11);
    }

    #[test]
    fn char_power_examples() {
        let c = ctx(2);
        let two = PadicNum::from_int(c, 2);
        assert_eq!(res(&char_power_int(&two, 3, c).unwrap(), 2), 6);
        let s = PadicNum::from_int(ctx(8), 3);
        let viaexp = char_power(&PadicNum::from_int(ctx(8), 2), &s, ctx(8)).unwrap();
        assert_eq!(res(&viaexp, 2), 6);
        let z = char_power(&two, &PadicNum::zero(5, 8), c).unwrap();
        assert_eq!(res(&z, 2), 1);
    }

    #[test]
    fn combinatorics() {
        assert_eq!(stirling2(3, 2), BigInt::from(3));
        assert_eq!(stirling2(0, 0), BigInt::from(1));
        assert_eq!(binom_rat(&rat(1, 2), 0), rat_int(1));
        assert_eq!(binom_rat(&rat(1, 2), 2), rat(-1, 8));
    }

    #[test]
    fn precision_bookkeeping() {
        let c = ctx(10);
        let a = PadicNum::from_int(c, 7);
        let b = PadicNum::from_int(c, 2);
        let d = a.add(&b).sub(&b);
        assert_eq!(d.abs_prec(), 10);
        let five = PadicNum::from_int(c, 5);
        assert_eq!(five.abs_prec(), 11);
        let x = PadicNum::from_rat(c, &rat(1, 6));
        assert_eq!(res(&x.truncate(2), 2), 21);
    }

    #[test]
    fn torsion_split() {
        let a = TorsionPoint::new(1, 10);
        let (ap, rest) = a.split_p(5);
        assert_eq!(ap, TorsionPoint::new(3, 5));
        assert_eq!(rest, TorsionPoint::new(1, 2));
        assert_eq!(ap.add(&rest), a);
    }

    proptest! {
        #[test]
        fn teichmuller_and_angle_multiplicative(u in 1i64..400, v in 1i64..400) {
            prop_assume!(u % 5 != 0 && v % 5 != 0);
            let c = ctx(9);
            let (pu, pv) = (PadicNum::from_int(c, u), PadicNum::from_int(c, v));
            let puv = PadicNum::from_int(c, u * v);
            let w = teichmuller(&pu, c).unwrap().mul(&teichmuller(&pv, c).unwrap());
            prop_assert!(w.eq_mod(&teichmuller(&puv, c).unwrap(), 9).unwrap());
            let a = angle(&pu, c).unwrap().mul(&angle(&pv, c).unwrap());
            prop_assert!(a.eq_mod(&angle(&puv, c).unwrap(), 9).unwrap());
        }

        #[test]
        fn log_is_additive(x in 0i64..200, y in 0i64..200) {
            let c = ctx(10);
            let (px, py) = (PadicNum::from_int(c, 1 + 5 * x), PadicNum::from_int(c, 1 + 5 * y));
            let lhs = padic_log(&px.mul(&py)).unwrap();
            let rhs = padic_log(&px).unwrap().add(&padic_log(&py).unwrap());
            let prec = lhs.abs_prec().min(rhs.abs_prec());
            prop_assert!(lhs.eq_mod(&rhs, prec).unwrap());
        }

        #[test]
        fn char_power_exponent_law(u in 1i64..300, s1 in 0i64..40, s2 in 0i64..40) {
            prop_assume!(u % 5 != 0);
            let c = ctx(10);
            let pu = PadicNum::from_int(c, u);
            let f = |s: i64| char_power(&pu, &PadicNum::from_int(c, s), c).unwrap();
            let lhs = f(s1 + s2);
            let rhs = f(s1).mul(&f(s2));
            let direct = char_power_int(&pu, s1 + s2, c).unwrap();
            let prec = lhs.abs_prec().min(rhs.abs_prec()).min(direct.abs_prec());
            prop_assert!(prec >= 9);
            prop_assert!(lhs.eq_mod(&rhs, prec).unwrap());
            prop_assert!(lhs.eq_mod(&direct, prec).unwrap());
        }

        #[test]
        fn recomputing_at_higher_precision_truncates_back(u in 1i64..500) {
            prop_assume!(u % 5 != 0);
            let lo = ctx(8);
            let hi = ctx(13);
            let a_lo = angle(&PadicNum::from_int(lo, u), lo).unwrap();
            let a_hi = angle(&PadicNum::from_int(hi, u), hi).unwrap();
            prop_assert_eq!(a_hi.residue(8).unwrap(), a_lo.residue(8).unwrap());
            let l_lo = padic_log(&a_lo).unwrap();
            let l_hi = padic_log(&a_hi).unwrap();
            prop_assert!(l_hi.eq_mod(&l_lo, l_lo.abs_prec()).unwrap());
        }
    }
}
