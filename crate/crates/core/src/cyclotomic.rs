//! Exact arithmetic in ℚ(ζ_N), its reduction into (ℚ_p ⊗ ℚ)[x]/Φ_N, the
//! Galois action σ_d and the ⟨⟨c⟩⟩-action on torsion points.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{fmt_rat, rat_int, vp_bigint, PadicCtx, PadicNum, Rat, TorsionPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycloError {
    #[error("element of Q(zeta_{0}) is a zero divisor and has no inverse")]
    NotInvertible(u64),
    #[error("sigma_{d} is undefined on Q(zeta_{n}): gcd(d, n) != 1")]
    NotCoprime { d: i64, n: u64 },
    #[error("coefficient {index} has denominator divisible by {p}")]
    DenominatorDivisibleByP { index: usize, p: u64 },
    #[error("conductor must be positive")]
    ZeroConductor,
}

pub fn euler_phi(n: u64) -> usize {
    let mut m = n;
    let mut r = n;
    let mut d = 2;
    while d * d <= m {
        if m.is_multiple_of(d) {
            while m.is_multiple_of(d) {
                m /= d;
            }
            r -= r / d;
        }
        d += 1;
    }
    if m > 1 {
        r -= r / m;
    }
    r as usize
}

fn phi_cache() -> &'static Mutex<HashMap<u64, Arc<Vec<BigInt>>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Vec<BigInt>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Coefficients of Φ_N, constant term first.
pub fn cyclotomic_poly(n: u64) -> Arc<Vec<BigInt>> {
    if let Some(c) = phi_cache().lock().expect("cache lock").get(&n) {
        return c.clone();
    }
    // x^n − 1 divided by Φ_d for every proper divisor d
    let mut poly = vec![BigInt::zero(); n as usize + 1];
    poly[0] = -BigInt::one();
    poly[n as usize] = BigInt::one();
    for d in 1..n {
        if n.is_multiple_of(d) {
            let div = cyclotomic_poly(d);
            poly = exact_divide(&poly, &div);
        }
    }
    let arc = Arc::new(poly);
    phi_cache().lock().expect("cache lock").insert(n, arc.clone());
    arc
}

fn exact_divide(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let qd = num.len() - 1 - dd;
    let mut q = vec![BigInt::zero(); qd + 1];
    for i in (0..=qd).rev() {
        let c = rem[i + dd].clone();
        if c.is_zero() {
            continue;
        }
        for (j, dj) in den.iter().enumerate() {
            rem[i + j] -= &c * dj;
        }
        q[i] = c;
    }
    q
}

/// Reduces a dense polynomial modulo the monic Φ_N in place.
fn reduce_mod_phi<T: Clone>(mut poly: Vec<T>, n: u64, submul: impl Fn(&T, &T, &BigInt) -> T, is_zero: impl Fn(&T) -> bool) -> Vec<T> {
    let phi = cyclotomic_poly(n);
    let d = phi.len() - 1;
    if poly.len() <= d {
        return poly;
    }
    for top in (d..poly.len()).rev() {
        if is_zero(&poly[top]) {
            continue;
        }
        let lead = poly[top].clone();
        let shift = top - d;
        for (j, pj) in phi.iter().enumerate().take(d) {
            if !pj.is_zero() {
                poly[shift + j] = submul(&poly[shift + j], &lead, pj);
            }
        }
    }
    poly.truncate(d);
    poly
}

/// Element of ℚ(ζ_N) as a polynomial in ζ_N of degree < φ(N).
#[derive(Clone, Debug)]
pub struct CycloNum {
    n: u64,
    coeffs: Vec<Rat>,
}

/// Dense accumulator indexed by exponents mod N, reduced once at the end.
#[derive(Clone, Debug)]
pub struct CycloAccum {
    n: u64,
    dense: Vec<Rat>,
}

impl CycloAccum {
    pub fn new(n: u64) -> Self {
        CycloAccum { n, dense: vec![Rat::zero(); n as usize] }
    }

    /// Adds r·ζ_N^e.
    pub fn add_term(&mut self, e: i64, r: &Rat) {
        let i = e.rem_euclid(self.n as i64) as usize;
        self.dense[i] += r;
    }

    pub fn add_cyclo(&mut self, x: &CycloNum, scale: &Rat) {
        assert_eq!(self.n % x.n, 0, "accumulator conductor must be a multiple");
        let step = (self.n / x.n) as i64;
        for (i, c) in x.coeffs.iter().enumerate() {
            if !c.is_zero() {
                self.add_term(i as i64 * step, &(c * scale));
            }
        }
    }

    pub fn finish(self) -> CycloNum {
        let coeffs = reduce_mod_phi(self.dense, self.n, |a, l, p| a - l * Rat::from_integer(p.clone()), |x| x.is_zero());
        let mut coeffs = coeffs;
        coeffs.resize(euler_phi(self.n), Rat::zero());
        CycloNum { n: self.n, coeffs }
    }
}

impl CycloNum {
    pub fn zero(n: u64) -> Self {
        CycloNum { n, coeffs: vec![Rat::zero(); euler_phi(n)] }
    }

    pub fn from_rat(n: u64, r: Rat) -> Self {
        let mut x = Self::zero(n);
        x.coeffs[0] = r;
        x
    }

    pub fn one(n: u64) -> Self {
        Self::from_rat(n, Rat::one())
    }

    /// ζ_N^a reduced modulo Φ_N.
    pub fn zeta_pow(n: u64, a: i64) -> Self {
        let mut acc = CycloAccum::new(n);
        acc.add_term(a, &Rat::one());
        acc.finish()
    }

    pub fn conductor(&self) -> u64 {
        self.n
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// The rational value, if the element lies in ℚ.
    pub fn as_rat(&self) -> Option<Rat> {
        self.coeffs[1..].iter().all(Zero::is_zero).then(|| self.coeffs[0].clone())
    }

    /// Same element viewed in ℚ(ζ_m) for a multiple m of the conductor.
    pub fn lift(&self, m: u64) -> Self {
        if m == self.n {
            return self.clone();
        }
        let mut acc = CycloAccum::new(m);
        acc.add_cyclo(self, &Rat::one());
        acc.finish()
    }

    fn common(&self, o: &Self) -> (Self, Self) {
        let l = self.n.lcm(&o.n);
        (self.lift(l), o.lift(l))
    }

    pub fn add(&self, o: &Self) -> Self {
        let (a, b) = self.common(o);
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect();
        CycloNum { n: a.n, coeffs }
    }

    pub fn neg(&self) -> Self {
        CycloNum { n: self.n, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, r: &Rat) -> Self {
        CycloNum { n: self.n, coeffs: self.coeffs.iter().map(|c| c * r).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = self.common(o);
        let mut acc = CycloAccum::new(a.n);
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if !y.is_zero() {
                    acc.add_term((i + j) as i64, &(x * y));
                }
            }
        }
        acc.finish()
    }

    /// Multiplies by ζ_m^e, lifting to lcm(N, m).
    pub fn mul_zeta(&self, m: u64, e: i64) -> Self {
        let l = self.n.lcm(&m);
        let step = (l / self.n) as i64;
        let shift = e * (l / m) as i64;
        let mut acc = CycloAccum::new(l);
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                acc.add_term(i as i64 * step + shift, c);
            }
        }
        acc.finish()
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::one(self.n), |acc, _| acc.mul(self))
    }

    /// Inverse by solving the linear system (multiplication by x)·y = 1.
    pub fn inv(&self) -> Result<Self, CycloError> {
        let d = self.coeffs.len();
        // column j of the matrix is x · ζ^j
        let mut cols: Vec<Vec<Rat>> = Vec::with_capacity(d);
        for j in 0..d {
            cols.push(self.mul(&Self::zeta_pow(self.n, j as i64)).coeffs);
        }
        let mut m: Vec<Vec<Rat>> = (0..d)
            .map(|i| {
                let mut row: Vec<Rat> = (0..d).map(|j| cols[j][i].clone()).collect();
                row.push(if i == 0 { Rat::one() } else { Rat::zero() });
                row
            })
            .collect();
        let sol = solve_dense(&mut m, d).ok_or(CycloError::NotInvertible(self.n))?;
        Ok(CycloNum { n: self.n, coeffs: sol })
    }

    pub fn div(&self, o: &Self) -> Result<Self, CycloError> {
        Ok(self.mul(&o.inv()?))
    }

    /// The automorphism ζ_N ↦ ζ_N^d.
    pub fn galois_sigma(&self, d: i64) -> Result<Self, CycloError> {
        if d.gcd(&(self.n as i64)) != 1 {
            return Err(CycloError::NotCoprime { d, n: self.n });
        }
        let mut acc = CycloAccum::new(self.n);
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                acc.add_term(i as i64 * d, c);
            }
        }
        Ok(acc.finish())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.n,
            "coeffs": self.coeffs.iter().map(fmt_rat).collect::<Vec<_>>(),
        })
    }
}

impl PartialEq for CycloNum {
    fn eq(&self, o: &Self) -> bool {
        let (a, b) = self.common(o);
        a.coeffs == b.coeffs
    }
}

impl fmt::Display for CycloNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| if i == 0 { c.to_string() } else { format!("({c})z{}^{i}", self.n) })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

/// Gauss–Jordan elimination on an augmented d×(d+1) system; `None` if singular.
pub fn solve_dense(m: &mut [Vec<Rat>], d: usize) -> Option<Vec<Rat>> {
    for col in 0..d {
        let piv = (col..d).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let inv = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(m.iter().map(|row| row[d].clone()).collect())
}

/// Element of ℚ_p[x]/Φ_N with p-adic coefficients of tracked precision.
#[derive(Clone, Debug)]
pub struct CycloPadic {
    p: u64,
    n: u64,
    coeffs: Vec<PadicNum>,
}

fn padic_submul(a: &PadicNum, lead: &PadicNum, c: &BigInt) -> PadicNum {
    a.sub(&lead.mul(&exact_int(lead, c)))
}

/// An integer as a p-adic number precise enough not to limit `like`.
fn exact_int(like: &PadicNum, c: &BigInt) -> PadicNum {
    let extra = if c.is_zero() { 0 } else { vp_bigint(like.prime(), c) };
    let prec = (like.rel_prec() + extra + 4).max(4);
    PadicNum::from_bigint(PadicCtx { p: like.prime(), prec }, c)
}

impl CycloPadic {
    pub fn zero(ctx: PadicCtx, n: u64) -> Self {
        CycloPadic { p: ctx.p, n, coeffs: vec![PadicNum::zero(ctx.p, ctx.prec as i64); euler_phi(n)] }
    }

    pub fn from_padic(n: u64, x: PadicNum) -> Self {
        let p = x.prime();
        let abs = x.abs_prec();
        let mut coeffs = vec![PadicNum::zero(p, abs); euler_phi(n)];
        coeffs[0] = x;
        CycloPadic { p, n, coeffs }
    }

    pub fn conductor(&self) -> u64 {
        self.n
    }

    pub fn coeffs(&self) -> &[PadicNum] {
        &self.coeffs
    }

    pub fn abs_prec(&self) -> i64 {
        self.coeffs.iter().map(PadicNum::abs_prec).min().unwrap_or(i64::MAX)
    }

    pub fn min_val(&self) -> i64 {
        self.coeffs.iter().map(PadicNum::val_or_prec).min().unwrap_or(i64::MAX)
    }

    fn dense_reduce(&self, dense: Vec<PadicNum>, n: u64) -> Self {
        let mut coeffs = reduce_mod_phi(dense, n, padic_submul, |x| x.is_zero());
        let abs = self.abs_prec();
        coeffs.resize(euler_phi(n), PadicNum::zero(self.p, abs));
        CycloPadic { p: self.p, n, coeffs }
    }

    pub fn lift(&self, m: u64) -> Self {
        if m == self.n {
            return self.clone();
        }
        let step = (m / self.n) as usize;
        let abs = self.abs_prec();
        let mut dense = vec![PadicNum::zero(self.p, abs); m as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            dense[(i * step) % m as usize] = dense[(i * step) % m as usize].add(c);
        }
        self.dense_reduce(dense, m)
    }

    fn common(&self, o: &Self) -> (Self, Self) {
        let l = self.n.lcm(&o.n);
        (self.lift(l), o.lift(l))
    }

    pub fn add(&self, o: &Self) -> Self {
        let (a, b) = self.common(o);
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x.add(y)).collect();
        CycloPadic { p: a.p, n: a.n, coeffs }
    }

    pub fn neg(&self) -> Self {
        CycloPadic { p: self.p, n: self.n, coeffs: self.coeffs.iter().map(PadicNum::neg).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, s: &PadicNum) -> Self {
        CycloPadic { p: self.p, n: self.n, coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = self.common(o);
        let n = a.n as usize;
        let mut dense: Vec<Option<PadicNum>> = vec![None; n];
        for (i, x) in a.coeffs.iter().enumerate() {
            for (j, y) in b.coeffs.iter().enumerate() {
                let k = (i + j) % n;
                let t = x.mul(y);
                dense[k] = Some(match dense[k].take() {
                    Some(acc) => acc.add(&t),
                    None => t,
                });
            }
        }
        let abs = a.abs_prec().min(b.abs_prec());
        let dense = dense.into_iter().map(|c| c.unwrap_or_else(|| PadicNum::zero(a.p, abs))).collect();
        a.dense_reduce(dense, a.n)
    }

    /// Coefficientwise agreement to absolute precision `prec` after lifting
    /// to a common conductor.
    pub fn eq_mod(&self, o: &Self, prec: i64) -> Result<bool, crate::arith::ArithError> {
        let (a, b) = self.common(o);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            if !x.eq_mod(y, prec)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Minimum over coordinates of the valuation of `self − o`.
    pub fn agreement(&self, o: &Self) -> i64 {
        self.sub(o).min_val()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.n,
            "p": self.p,
            "coeffs": self.coeffs.iter().map(PadicNum::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Coefficientwise reduction of an element with p-integral coefficients.
pub fn reduce_padic(x: &CycloNum, ctx: PadicCtx) -> Result<CycloPadic, CycloError> {
    for (index, c) in x.coeffs.iter().enumerate() {
        if c.denom().is_multiple_of(&BigInt::from(ctx.p)) {
            return Err(CycloError::DenominatorDivisibleByP { index, p: ctx.p });
        }
    }
    Ok(embed_padic(x, ctx))
}

/// Coefficientwise embedding; p may divide denominators, giving negative valuations.
pub fn embed_padic(x: &CycloNum, ctx: PadicCtx) -> CycloPadic {
    let coeffs = x
        .coeffs
        .iter()
        .map(|c| if c.is_zero() { PadicNum::zero(ctx.p, ctx.prec as i64) } else { PadicNum::from_rat(ctx, c) })
        .collect();
    CycloPadic { p: ctx.p, n: x.n, coeffs }
}

/// ⟨⟨c⟩⟩α = c·α_p + α′ where α_p is the p-power-order part of α.
pub fn cc_act(c: i64, alpha: &TorsionPoint, p: u64) -> TorsionPoint {
    let (ap, rest) = alpha.split_p(p);
    ap.mul_int(c).add(&rest)
}

pub fn rat_cyclo(n: u64, num: i64) -> CycloNum {
    CycloNum::from_rat(n, rat_int(num))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    #[test]
    fn small_identities() {
        assert_eq!(CycloNum::zeta_pow(4, 2), rat_cyclo(4, -1));
        let z6 = CycloNum::zeta_pow(6, 1);
        let lhs = z6.mul(&z6).sub(&z6).add(&rat_cyclo(6, 1));
        assert!(lhs.is_zero());
        assert_eq!(z6.mul(&CycloNum::zeta_pow(6, 5)), rat_cyclo(6, 1));
        let s = CycloNum::zeta_pow(3, 1).add(&CycloNum::zeta_pow(3, 2));
        assert_eq!(s, rat_cyclo(3, -1));
    }

    #[test]
    fn conductor_lifting() {
        let a = CycloNum::zeta_pow(3, 1);
        let b = CycloNum::zeta_pow(4, 1);
        assert_eq!(a.mul(&b), CycloNum::zeta_pow(12, 7));
        assert_eq!(CycloNum::zeta_pow(2, 1), rat_cyclo(1, -1));
        assert_eq!(CycloNum::zeta_pow(1, 0).conductor(), 1);
    }

    #[test]
    fn inverse_and_galois() {
        let x = CycloNum::zeta_pow(7, 1).add(&rat_cyclo(7, 2));
        assert_eq!(x.mul(&x.inv().unwrap()), rat_cyclo(7, 1));
        assert!(CycloNum::zero(5).inv().is_err());
        let z8 = CycloNum::zeta_pow(8, 1);
        assert_eq!(z8.galois_sigma(1).unwrap(), z8);
        assert_eq!(z8.galois_sigma(3).unwrap(), CycloNum::zeta_pow(8, 3));
        assert!(z8.galois_sigma(2).is_err());
    }

    #[test]
    fn padic_reduction() {
        let ctx = PadicCtx::new(5, 2).unwrap();
        let r = reduce_padic(&CycloNum::from_rat(1, rat(1, 6)), ctx).unwrap();
        assert_eq!(r.coeffs()[0].residue(2).unwrap().to_i64(), Some(21));
        assert!(reduce_padic(&CycloNum::zero(3), ctx).unwrap().coeffs()[0].is_zero());
        assert!(matches!(
            reduce_padic(&CycloNum::from_rat(1, rat(1, 5)), ctx),
            Err(CycloError::DenominatorDivisibleByP { index: 0, p: 5 })
        ));
        assert_eq!(embed_padic(&CycloNum::from_rat(1, rat(1, 5)), ctx).min_val(), -1);
    }

    #[test]
    fn cc_action_examples() {
        for a in 0..15 {
            let al = TorsionPoint::new(a, 15);
            assert_eq!(cc_act(1, &al, 5), al);
            assert_eq!(cc_act(6, &al, 5), al);
        }
        assert_eq!(cc_act(2, &TorsionPoint::new(1, 5), 5), TorsionPoint::new(2, 5));
        assert_eq!(cc_act(2, &TorsionPoint::new(1, 3), 5), TorsionPoint::new(1, 3));
    }

    fn arb_cyclo(n: u64) -> impl Strategy<Value = CycloNum> {
        let dens = prop::sample::select(vec![1i64, 2, 3, 4, 6, 7]);
        proptest::collection::vec((-9i64..10, dens), euler_phi(n)).prop_map(move |v| CycloNum {
            n,
            coeffs: v.into_iter().map(|(a, b)| rat(a, b)).collect(),
        })
    }

    proptest! {
        #[test]
        fn galois_composes(x in arb_cyclo(7)) {
            let lhs = x.galois_sigma(3).unwrap().galois_sigma(2).unwrap();
            prop_assert_eq!(lhs, x.galois_sigma(6).unwrap());
        }

        #[test]
        fn galois_is_ring_hom(x in arb_cyclo(9), y in arb_cyclo(9), d in prop::sample::select(vec![1i64, 2, 4, 5, 7, 8])) {
            prop_assert_eq!(x.mul(&y).galois_sigma(d).unwrap(), x.galois_sigma(d).unwrap().mul(&y.galois_sigma(d).unwrap()));
            prop_assert_eq!(x.add(&y).galois_sigma(d).unwrap(), x.galois_sigma(d).unwrap().add(&y.galois_sigma(d).unwrap()));
        }

        #[test]
        fn ring_axioms(x in arb_cyclo(12), y in arb_cyclo(12), z in arb_cyclo(12)) {
            prop_assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
            prop_assert_eq!(x.mul(&y.add(&z)), x.mul(&y).add(&x.mul(&z)));
        }

        #[test]
        fn reduction_is_hom(x in arb_cyclo(8), y in arb_cyclo(8)) {
            let ctx = PadicCtx::new(5, 6).unwrap();
            let rx = reduce_padic(&x, ctx).unwrap();
            let ry = reduce_padic(&y, ctx).unwrap();
            let rxy = reduce_padic(&x.mul(&y), ctx).unwrap();
            prop_assert!(rx.mul(&ry).eq_mod(&rxy, 6).unwrap());
            prop_assert!(rx.add(&ry).eq_mod(&reduce_padic(&x.add(&y), ctx).unwrap(), 6).unwrap());
        }

        #[test]
        fn cc_act_preserves_order_and_commutes(a in 0i64..75, c in 1i64..40, m in 1i64..30) {
            prop_assume!(c % 5 != 0 && m % 5 != 0);
            let al = TorsionPoint::new(a, 75);
            let acted = cc_act(c, &al, 5);
            prop_assert_eq!(acted.ord(), al.ord());
            prop_assert_eq!(cc_act(c, &al.mul_int(m), 5), acted.mul_int(m));
        }
    }
}
