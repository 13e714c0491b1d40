//! Truncated q-expansions with exponents in (1/M)ℤ over a pluggable
//! coefficient ring.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{fmt_rat, rat, rat_int, PadicCtx, PadicNum, Rat};
use crate::cyclotomic::{embed_padic, CycloNum, CycloPadic};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QSeriesError {
    #[error("coefficient ring does not contain zeta_{m}^{e}")]
    MissingRoot { m: u64, e: i64 },
}

/// Additive structure shared by every coefficient ring.
pub trait Coeff: Clone {
    fn plus(&self, o: &Self) -> Self;
    fn negated(&self) -> Self;
    fn vanishes(&self) -> bool;
}

pub trait RingCoeff: Coeff {
    fn times(&self, o: &Self) -> Self;
}

/// Rings that can multiply by ζ_m^e.
pub trait RootsOfUnity: Coeff {
    fn mul_root(&self, m: u64, e: i64) -> Result<Self, QSeriesError>;
}

impl Coeff for Rat {
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn negated(&self) -> Self {
        -self
    }
    fn vanishes(&self) -> bool {
        Zero::is_zero(self)
    }
}

impl RingCoeff for Rat {
    fn times(&self, o: &Self) -> Self {
        self * o
    }
}

impl RootsOfUnity for Rat {
    fn mul_root(&self, m: u64, e: i64) -> Result<Self, QSeriesError> {
        let r = (2 * e).rem_euclid(2 * m as i64);
        match r {
            0 => Ok(self.clone()),
            x if x == m as i64 => Ok(-self),
            _ => Err(QSeriesError::MissingRoot { m, e }),
        }
    }
}

impl Coeff for CycloNum {
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn negated(&self) -> Self {
        self.neg()
    }
    fn vanishes(&self) -> bool {
        self.is_zero()
    }
}

impl RingCoeff for CycloNum {
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
}

impl RootsOfUnity for CycloNum {
    fn mul_root(&self, m: u64, e: i64) -> Result<Self, QSeriesError> {
        Ok(self.mul_zeta(m, e))
    }
}

impl Coeff for PadicNum {
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn negated(&self) -> Self {
        self.neg()
    }
    fn vanishes(&self) -> bool {
        self.is_zero()
    }
}

impl RingCoeff for PadicNum {
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
}

impl Coeff for CycloPadic {
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn negated(&self) -> Self {
        self.neg()
    }
    fn vanishes(&self) -> bool {
        self.coeffs().iter().all(PadicNum::is_zero)
    }
}

impl RingCoeff for CycloPadic {
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
}

impl RootsOfUnity for CycloPadic {
    fn mul_root(&self, m: u64, e: i64) -> Result<Self, QSeriesError> {
        let p = self.coeffs()[0].prime();
        let prec = self.abs_prec().max(1) as u32;
        let z = embed_padic(&CycloNum::zeta_pow(m, e), PadicCtx { p, prec });
        Ok(self.mul(&z))
    }
}

/// A q-expansion Σ c_k q^{k/M} truncated to exponents ≤ bound.
#[derive(Clone, Debug)]
pub struct QExp<R> {
    m: u64,
    bound: Rat,
    coeffs: BTreeMap<i64, R>,
}

impl<R: Coeff> QExp<R> {
    pub fn new(m: u64, bound: Rat) -> Self {
        QExp { m, bound, coeffs: BTreeMap::new() }
    }

    pub fn monomial(m: u64, bound: Rat, k: i64, c: R) -> Self {
        let mut s = Self::new(m, bound);
        s.add_term(k, c);
        s
    }

    pub fn denom(&self) -> u64 {
        self.m
    }

    pub fn bound(&self) -> &Rat {
        &self.bound
    }

    pub fn in_range(&self, k: i64) -> bool {
        k >= 0 && rat(k, self.m as i64) <= self.bound
    }

    /// Largest numerator k with k/M ≤ bound.
    pub fn max_numerator(&self) -> i64 {
        let b = &self.bound * rat_int(self.m as i64);
        b.floor().to_integer().try_into().unwrap_or(i64::MAX)
    }

    /// Adds c·q^{k/M}, ignoring terms past the bound.
    pub fn add_term(&mut self, k: i64, c: R) {
        if !self.in_range(k) || c.vanishes() {
            return;
        }
        match self.coeffs.remove(&k) {
            Some(old) => {
                let s = old.plus(&c);
                if !s.vanishes() {
                    self.coeffs.insert(k, s);
                }
            }
            None => {
                self.coeffs.insert(k, c);
            }
        }
    }

    pub fn coeff(&self, k: i64) -> Option<&R> {
        self.coeffs.get(&k)
    }

    /// Coefficient at the rational exponent e, if e lies on the grid.
    pub fn coeff_at(&self, e: &Rat) -> Option<&R> {
        let k = e * rat_int(self.m as i64);
        if !k.is_integer() {
            return None;
        }
        self.coeffs.get(&k.to_integer().try_into().ok()?)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Rat, &R)> + '_ {
        self.coeffs.iter().map(move |(k, c)| (rat(*k, self.m as i64), c))
    }

    pub fn raw_terms(&self) -> &BTreeMap<i64, R> {
        &self.coeffs
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Re-expresses the series over q^{1/m2}, where M divides m2.
    pub fn rekey(&self, m2: u64) -> Self {
        assert_eq!(m2 % self.m, 0, "new denominator must be a multiple");
        let f = (m2 / self.m) as i64;
        QExp { m: m2, bound: self.bound.clone(), coeffs: self.coeffs.iter().map(|(k, c)| (k * f, c.clone())).collect() }
    }

    pub fn truncate(&self, bound: &Rat) -> Self {
        let bound = bound.clone().min(self.bound.clone());
        let mut out = Self::new(self.m, bound);
        for (k, c) in &self.coeffs {
            out.add_term(*k, c.clone());
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let m = self.m.lcm(&o.m);
        let bound = self.bound.clone().min(o.bound.clone());
        let (a, b) = (self.rekey(m), o.rekey(m));
        let mut out = Self::new(m, bound);
        for (k, c) in a.coeffs.into_iter().chain(b.coeffs) {
            out.add_term(k, c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.negated())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn map<T: Coeff>(&self, f: impl Fn(&R) -> T) -> QExp<T> {
        let mut out = QExp::new(self.m, self.bound.clone());
        for (k, c) in &self.coeffs {
            out.add_term(*k, f(c));
        }
        out
    }

    pub fn try_map<T: Coeff, E>(&self, f: impl Fn(&R) -> Result<T, E>) -> Result<QExp<T>, E> {
        let mut out = QExp::new(self.m, self.bound.clone());
        for (k, c) in &self.coeffs {
            out.add_term(*k, f(c)?);
        }
        Ok(out)
    }

    /// Product with a series over another ring, combining coefficients by `f`.
    pub fn mul_with<S: Coeff, T: Coeff>(&self, o: &QExp<S>, f: impl Fn(&R, &S) -> T) -> QExp<T> {
        let m = self.m.lcm(&o.m);
        let (fa, fb) = ((m / self.m) as i64, (m / o.m) as i64);
        let mut out = QExp::new(m, self.bound.clone().min(o.bound.clone()));
        let top = out.max_numerator();
        for (ka, a) in &self.coeffs {
            for (kb, b) in &o.coeffs {
                let k = ka * fa + kb * fb;
                if k > top {
                    break;
                }
                out.add_term(k, f(a, b));
            }
        }
        out
    }

    /// The substitution q ↦ q^{1/f}: exponent e becomes e/f, bound B/f.
    pub fn rescale_tau_over_f(&self, f: u64) -> Self {
        assert!(f >= 1);
        QExp { m: self.m * f, bound: &self.bound / rat_int(f as i64), coeffs: self.coeffs.clone() }
    }

    /// The substitution q ↦ q^f.
    pub fn dilate(&self, f: u64) -> Self {
        assert!(f >= 1);
        let fi = f as i64;
        QExp { m: self.m, bound: &self.bound * rat_int(fi), coeffs: self.coeffs.iter().map(|(k, c)| (k * fi, c.clone())).collect() }
    }

    /// Keys whose coefficients differ, scanning exponents ≤ the smaller bound.
    pub fn first_mismatch(&self, o: &Self, eq: impl Fn(&R, &R) -> bool) -> Option<Rat> {
        let m = self.m.lcm(&o.m);
        let bound = self.bound.clone().min(o.bound.clone());
        let (a, b) = (self.rekey(m).truncate(&bound), o.rekey(m).truncate(&bound));
        let keys: std::collections::BTreeSet<i64> = a.coeffs.keys().chain(b.coeffs.keys()).copied().collect();
        keys.into_iter()
            .find(|k| match (a.coeffs.get(k), b.coeffs.get(k)) {
                (Some(x), Some(y)) => !eq(x, y),
                (Some(x), None) | (None, Some(x)) => !x.vanishes(),
                (None, None) => false,
            })
            .map(|k| rat(k, m as i64))
    }

    pub fn to_json(&self, f: impl Fn(&R) -> serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "M": self.m,
            "bound": fmt_rat(&self.bound),
            "coeffs": self.coeffs.iter().map(|(k, c)| serde_json::json!({
                "e": fmt_rat(&rat(*k, self.m as i64)),
                "c": f(c),
            })).collect::<Vec<_>>(),
        })
    }
}

impl<R: RingCoeff> QExp<R> {
    pub fn mul(&self, o: &Self) -> Self {
        self.mul_with(o, |a, b| a.times(b))
    }

    pub fn scale(&self, s: &R) -> Self {
        self.map(|c| c.times(s))
    }
}

impl<R: RootsOfUnity> QExp<R> {
    /// Multiplies the coefficient at q_M^k by ζ_M^{jk}.
    pub fn twist_root(&self, j: i64) -> Result<Self, QSeriesError> {
        let mut out = Self::new(self.m, self.bound.clone());
        for (k, c) in &self.coeffs {
            out.add_term(*k, c.mul_root(self.m, j * k)?);
        }
        Ok(out)
    }
}

impl<R: Coeff + PartialEq> PartialEq for QExp<R> {
    fn eq(&self, o: &Self) -> bool {
        self.bound == o.bound && self.first_mismatch(o, |a, b| a == b).is_none()
    }
}

pub fn one_rat(bound: Rat) -> QExp<Rat> {
    QExp::monomial(1, bound, 0, Rat::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(m: u64, bound: i64, terms: &[(i64, i64)]) -> QExp<Rat> {
        let mut s = QExp::new(m, rat_int(bound));
        for (k, c) in terms {
            s.add_term(*k, rat_int(*c));
        }
        s
    }

    #[test]
    fn basic_ring_ops() {
        let f = series(1, 5, &[(0, 1), (1, 1)]);
        let g = series(1, 5, &[(0, 1), (1, -1)]);
        assert_eq!(f.add(&QExp::new(1, rat_int(5))), f);
        assert_eq!(f.mul(&g), series(1, 5, &[(0, 1), (2, -1)]));
    }

    #[test]
    fn rescale_and_dilate() {
        let q = series(1, 4, &[(1, 1)]);
        assert_eq!(q.rescale_tau_over_f(1), q);
        let half = q.rescale_tau_over_f(2);
        assert_eq!(half.coeff_at(&rat(1, 2)), Some(&rat_int(1)));
        assert_eq!(half.bound(), &rat_int(2));
        assert_eq!(q.dilate(3).coeff_at(&rat_int(3)), Some(&rat_int(1)));
    }

    #[test]
    fn twisting() {
        let f = QExp::monomial(3, rat_int(2), 1, CycloNum::one(1));
        assert_eq!(f.twist_root(0).unwrap(), f);
        let t = f.twist_root(2).unwrap();
        assert_eq!(t.coeff(1), Some(&CycloNum::zeta_pow(3, 2)));
        let mut g = f.add(&QExp::monomial(3, rat_int(2), 5, CycloNum::one(1)));
        let orig = g.clone();
        for _ in 0..3 {
            g = g.twist_root(1).unwrap();
        }
        assert_eq!(g, orig);
        assert!(series(3, 1, &[(1, 1)]).twist_root(1).is_err());
    }

    fn arb(m: u64) -> impl Strategy<Value = QExp<Rat>> {
        proptest::collection::btree_map(0i64..(4 * m as i64), -5i64..6, 0..8).prop_map(move |mp| {
            let mut s = QExp::new(m, rat_int(3));
            for (k, c) in mp {
                s.add_term(k, rat_int(c));
            }
            s
        })
    }

    proptest! {
        #[test]
        fn mul_matches_naive_convolution(a in arb(2), b in arb(3)) {
            let prod = a.mul(&b);
            let mut naive: BTreeMap<Rat, Rat> = BTreeMap::new();
            for (ea, ca) in a.terms() {
                for (eb, cb) in b.terms() {
                    let e = &ea + &eb;
                    if e <= rat_int(3) {
                        *naive.entry(e).or_insert_with(Rat::zero) += ca * cb;
                    }
                }
            }
            naive.retain(|_, v| !Zero::is_zero(v));
            let got: BTreeMap<Rat, Rat> = prod.terms().map(|(e, c)| (e, c.clone())).collect();
            prop_assert_eq!(got, naive);
        }

        #[test]
        fn ring_axioms(a in arb(2), b in arb(2), c in arb(3)) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }

        #[test]
        fn truncation_coherent(a in arb(2), b in arb(2)) {
            let lo = rat(3, 2);
            prop_assert_eq!(a.mul(&b).truncate(&lo), a.truncate(&lo).mul(&b.truncate(&lo)));
        }

        #[test]
        fn rescale_composes(a in arb(2), x in 1u64..4, y in 1u64..4) {
            prop_assert_eq!(a.rescale_tau_over_f(x).rescale_tau_over_f(y), a.rescale_tau_over_f(x * y));
        }
    }
}
