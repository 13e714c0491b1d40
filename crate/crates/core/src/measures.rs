//! Measures on ℤ_p through their Amice transforms, the measure μ_c,
//! polynomial and Mahler integration, and the p-adic Hurwitz zeta function.

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::arith::{
    binom_int, binom_rat, char_power_exp, factorial, rat, rat_int, rat_pow, stirling2, teichmuller, vp_i64, ArithError, CharExponent, PadicCtx,
    PadicNum, Rat, TorsionPoint,
};
use crate::lfunctions::{bernoulli_poly, hurwitz_neg};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("tail certificate {certificate} is below the requested precision {requested}")]
    Tail { certificate: i64, requested: i64 },
    #[error("polynomial of degree {degree} needs at least {degree}+1 Amice coefficients, have {available}")]
    Degree { degree: usize, available: usize },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// The moments b_n = ∫ binom(x, n) dμ for n < D.
#[derive(Clone, Debug)]
pub struct AmiceSeries {
    ctx: PadicCtx,
    b: Vec<PadicNum>,
}

impl AmiceSeries {
    pub fn new(ctx: PadicCtx, b: Vec<PadicNum>) -> Self {
        AmiceSeries { ctx, b }
    }

    pub fn ctx(&self) -> PadicCtx {
        self.ctx
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn coeffs(&self) -> &[PadicNum] {
        &self.b
    }

    /// Smallest valuation among the coefficients; nonnegative for a measure.
    pub fn min_valuation(&self) -> i64 {
        self.b.iter().map(PadicNum::val_or_prec).min().unwrap_or(i64::MAX)
    }
}

/// Amice transform c²/T − c/((1+T)^{1/c} − 1) of μ_c, to `d` terms.
///
/// With g = ((1+T)^{1/c} − 1)/T and h = (c²g − c)/T the transform is h/g,
/// and g(0) = 1/c is a unit.
pub fn mu_c(c: i64, ctx: PadicCtx, d: usize) -> Result<AmiceSeries, MeasureError> {
    if c.rem_euclid(ctx.p as i64) == 0 {
        return Err(MeasureError::Domain(format!("c = {c} is not a unit at {}", ctx.p)));
    }
    let work = ctx.with_prec(ctx.prec + 4);
    let inv_c = rat(1, c);
    let c2 = rat_int(c * c);
    let to_p = |r: Rat| PadicNum::from_rat(work, &r);
    let g: Vec<PadicNum> = (0..d).map(|n| to_p(binom_rat(&inv_c, n + 1))).collect();
    let h: Vec<PadicNum> = (0..d).map(|n| to_p(&c2 * binom_rat(&inv_c, n + 2))).collect();
    let g0_inv = g[0].inv()?;
    let mut b: Vec<PadicNum> = Vec::with_capacity(d);
    for n in 0..d {
        // g·b = h, solved term by term
        let mut acc = h[n].clone();
        for i in 1..=n {
            acc = acc.sub(&g[i].mul(&b[n - i]));
        }
        b.push(acc.mul(&g0_inv));
    }
    let b = b.into_iter().map(|x| x.truncate(ctx.prec as i64)).collect();
    Ok(AmiceSeries { ctx, b })
}

/// ∫ P(x) dμ for P = Σ a_k x^k, through x^k = Σ_n S(k,n) n! binom(x,n).
pub fn integrate_poly(mu: &AmiceSeries, coeffs: &[Rat]) -> Result<PadicNum, MeasureError> {
    let degree = coeffs.len().saturating_sub(1);
    if coeffs.len() > mu.len() {
        return Err(MeasureError::Degree { degree, available: mu.len() });
    }
    let ctx = mu.ctx.with_prec(mu.ctx.prec + 8);
    let mut total = PadicNum::zero(ctx.p, mu.ctx.prec as i64 + 8);
    for (k, a) in coeffs.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let mut moment_p = PadicNum::zero(ctx.p, ctx.prec as i64);
        for n in 0..=k {
            let w = stirling2(k, n) * factorial(n as u64);
            if !w.is_zero() {
                moment_p = moment_p.add(&mu.b[n].mul(&PadicNum::from_bigint(ctx, &w)));
            }
        }
        total = total.add(&moment_p.mul(&PadicNum::from_rat(ctx, a)));
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct MahlerIntegral {
    pub value: PadicNum,
    /// min over the last `window` terms of v_p(c_n b_n)
    pub certificate: i64,
    pub terms: usize,
}

/// Σ_{n<D} c_n(f) b_n with c_n(f) the n-th finite difference of f at 0.
pub fn integrate_mahler(mu: &AmiceSeries, f: impl Fn(i64) -> Result<PadicNum, MeasureError>, window: usize, requested: i64) -> Result<MahlerIntegral, MeasureError> {
    let d = mu.len();
    let ctx = mu.ctx;
    let values: Vec<PadicNum> = (0..d as i64).map(&f).collect::<Result<_, _>>()?;
    let exact = |n: &BigInt| PadicNum::from_bigint(ctx.with_prec(ctx.prec + 8), n);
    let mut value = PadicNum::zero(ctx.p, ctx.prec as i64 + 8);
    let mut certificate = i64::MAX;
    for n in 0..d {
        let mut cn = PadicNum::zero(ctx.p, ctx.prec as i64 + 8);
        for (i, fi) in values.iter().enumerate().take(n + 1) {
            let coef = binom_int(n as u64, i as u64);
            let term = fi.mul(&exact(&coef));
            cn = if (n - i) % 2 == 0 { cn.add(&term) } else { cn.sub(&term) };
        }
        let term = cn.mul(&mu.b[n]);
        if n + window >= d {
            certificate = certificate.min(term.val_or_prec());
        }
        value = value.add(&term);
    }
    if certificate < requested {
        return Err(MeasureError::Tail { certificate, requested });
    }
    let value = value.truncate(certificate);
    Ok(MahlerIntegral { value, certificate, terms: d })
}

/// x ↦ x_α = ord(α)({α} + x), mapping ℤ_p into one residue disc of ℤ_p^*.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AffineUnitMap {
    alpha: TorsionPoint,
    p: u64,
}

impl AffineUnitMap {
    pub fn new(alpha: TorsionPoint, p: u64) -> Result<Self, MeasureError> {
        if vp_i64(p, alpha.ord()) == 0 {
            return Err(MeasureError::Domain(format!("ord({alpha}) is prime to {p}")));
        }
        Ok(AffineUnitMap { alpha, p })
    }

    pub fn alpha(&self) -> TorsionPoint {
        self.alpha
    }

    pub fn ord(&self) -> i64 {
        self.alpha.ord()
    }

    /// 0_α = ord(α){α}, the numerator of α.
    pub fn base(&self) -> i64 {
        self.alpha.num()
    }

    pub fn at_int(&self, x: i64, ctx: PadicCtx) -> PadicNum {
        PadicNum::from_int(ctx, self.alpha.num() + self.alpha.ord() * x)
    }

    /// ω(x_α), the same for every x ∈ ℤ_p.
    pub fn teichmuller(&self, ctx: PadicCtx) -> Result<PadicNum, MeasureError> {
        Ok(teichmuller(&PadicNum::from_int(ctx, self.base()), ctx)?)
    }

    /// Coefficients of x_α^k as a polynomial in x.
    pub fn power_poly(&self, k: usize) -> Vec<Rat> {
        let (a, n) = (rat_int(self.base()), rat_int(self.ord()));
        (0..=k)
            .map(|i| Rat::from_integer(binom_int(k as u64, i as u64)) * rat_pow(&n, i as i64) * rat_pow(&a, (k - i) as i64))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ZetaValue {
    pub value: PadicNum,
    pub amice_terms: usize,
    pub certificate: i64,
}

/// ζ_{p,c}(κ, α, j) = −ω(0_α)^i ∫ ⟨x_α⟩^{s+1−j} dμ_c for κ = (i, s).
///
/// The number of Amice terms doubles until the Mahler tail certificate, taken
/// over the last `window` terms, reaches the requested precision.
#[allow(clippy::too_many_arguments)]
pub fn padic_hurwitz_zeta(c: i64, alpha: &AffineUnitMap, j: i64, branch: i64, s: &CharExponent, ctx: PadicCtx, requested: i64, window: usize) -> Result<ZetaValue, MeasureError> {
    let work = ctx.with_prec(ctx.prec + 4);
    let exponent = s.shift(1 - j, work);
    let w = alpha.teichmuller(work)?;
    let w_pow = w.pow(branch.rem_euclid(ctx.p as i64 - 1))?;
    let mut d = 16usize;
    loop {
        let mu = mu_c(c, work, d)?;
        let f = |x: i64| -> Result<PadicNum, MeasureError> { Ok(char_power_exp(&alpha.at_int(x, work), &exponent, work)?) };
        match integrate_mahler(&mu, f, window, requested) {
            Ok(m) => {
                let value = m.value.mul(&w_pow).neg().truncate(ctx.prec as i64);
                return Ok(ZetaValue { value, amice_terms: d, certificate: m.certificate });
            }
            Err(MeasureError::Tail { .. }) if d < 1024 => d *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// The classical side of the interpolation property:
/// ord(α)^{k−1} ω(0_α)^{j−1} (c² ζ(α, 1−k) − c^{2−k} ζ(⟨⟨c⟩⟩α, 1−k)).
pub fn hurwitz_interpolation_target(c: i64, alpha: &AffineUnitMap, j: i64, k: usize, ctx: PadicCtx) -> Result<PadicNum, MeasureError> {
    let moved = crate::cyclotomic::cc_act(c, &alpha.alpha(), ctx.p);
    let cr = rat_int(c);
    let classical = rat_pow(&rat_int(alpha.ord()), k as i64 - 1)
        * (&cr * &cr * hurwitz_neg(&alpha.alpha(), k) - rat_pow(&cr, 2 - k as i64) * hurwitz_neg(&moved, k));
    let w = alpha.teichmuller(ctx)?.pow(j - 1)?;
    Ok(PadicNum::from_rat(ctx, &classical).mul(&w))
}

/// Closed form of ∫ x_α^k dμ_c read off the Amice transform: the generating
/// function e^{u·0_α}·𝒜(e^{ord·u} − 1) gives
/// ord^k (c² B_{k+1}({α}) − c^{1−k} B_{k+1}(c{α})) / (k+1) with c{α} not reduced mod 1.
pub fn moment_closed_form(c: i64, alpha: &TorsionPoint, k: usize) -> Rat {
    let cr = rat_int(c);
    let x = alpha.frac();
    rat_pow(&rat_int(alpha.ord()), k as i64)
        * (&cr * &cr * bernoulli_poly(k + 1, &x) - rat_pow(&cr, 1 - k as i64) * bernoulli_poly(k + 1, &(&cr * &x)))
        / rat_int(k as i64 + 1)
}

/// The moment as the interpolation property states it, with ⟨⟨c⟩⟩α in place of c{α}:
/// −ord^k (c² ζ(α, −k) − c^{1−k} ζ(⟨⟨c⟩⟩α, −k)).
pub fn moment_reduced_form(c: i64, alpha: &TorsionPoint, p: u64, k: usize) -> Rat {
    let cr = rat_int(c);
    let moved = crate::cyclotomic::cc_act(c, alpha, p);
    -rat_pow(&rat_int(alpha.ord()), k as i64) * (&cr * &cr * hurwitz_neg(alpha, k + 1) - rat_pow(&cr, 1 - k as i64) * hurwitz_neg(&moved, k + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn ctx(n: u32) -> PadicCtx {
        PadicCtx::new(5, n).unwrap()
    }

    #[test]
    fn amice_coefficients() {
        let mu = mu_c(2, ctx(20), 30).unwrap();
        assert!(mu.coeffs()[0].eq_mod(&PadicNum::from_int(ctx(20), -1), 20).unwrap());
        assert!(mu.min_valuation() >= 0);
        let mu3 = mu_c(3, ctx(20), 30).unwrap();
        assert!(mu3.coeffs()[0].eq_mod(&PadicNum::from_int(ctx(20), -3), 20).unwrap());
        assert!(mu3.min_valuation() >= 0);
        let triv = mu_c(1, ctx(10), 12).unwrap();
        assert!(triv.coeffs().iter().all(PadicNum::is_zero));
    }

    #[test]
    fn polynomial_integration() {
        let c = ctx(20);
        let mu = mu_c(2, c, 30).unwrap();
        let one = integrate_poly(&mu, &[rat_int(1)]).unwrap();
        assert!(one.eq_mod(&PadicNum::from_int(c, -1), 20).unwrap());
        let x = integrate_poly(&mu, &[rat_int(0), rat_int(1)]).unwrap();
        assert!(x.eq_mod(&mu.coeffs()[1], 20).unwrap());
        let map = AffineUnitMap::new(TorsionPoint::new(1, 5), 5).unwrap();
        let xa = integrate_poly(&mu, &map.power_poly(1)).unwrap();
        assert!(xa.eq_mod(&PadicNum::from_rat(c, &rat(1, 4)), 20).unwrap());
        assert!(integrate_poly(&mu_c(2, c, 3).unwrap(), &vec![rat_int(0); 5]).is_err());
    }

    #[test]
    fn mahler_integration() {
        let c = ctx(20);
        let mu = mu_c(2, c, 40).unwrap();
        let one = integrate_mahler(&mu, |_| Ok(PadicNum::from_int(c, 1)), 8, 20).unwrap();
        assert!(one.value.eq_mod(&mu.coeffs()[0], 20).unwrap());
        let b5 = integrate_mahler(&mu, |x| Ok(PadicNum::from_bigint(c, &binom_int(x.max(0) as u64, 5))), 8, 20).unwrap();
        assert!(b5.value.eq_mod(&mu.coeffs()[5], 20).unwrap());
        let map = AffineUnitMap::new(TorsionPoint::new(2, 25), 5).unwrap();
        for s in 1..4usize {
            let m = integrate_mahler(&mu, |x| Ok(char_power_exp(&map.at_int(x, c), &CharExponent::Int(s as i64), c)?), 8, 18).unwrap();
            let poly = integrate_poly(&mu, &map.power_poly(s)).unwrap();
            let w = map.teichmuller(c).unwrap().pow(-(s as i64)).unwrap();
            assert!(m.value.eq_mod(&poly.mul(&w), 18).unwrap());
        }
        let short = mu_c(2, c, 4).unwrap();
        assert!(matches!(
            integrate_mahler(&short, |x| Ok(char_power_exp(&map.at_int(x, c), &CharExponent::Int(1), c)?), 2, 60),
            Err(MeasureError::Tail { .. })
        ));
    }

    #[test]
    fn residue_disc_constancy() {
        let c = ctx(6);
        for a in [TorsionPoint::new(1, 5), TorsionPoint::new(7, 25), TorsionPoint::new(3, 10)] {
            let map = AffineUnitMap::new(a, 5).unwrap();
            let w0 = map.teichmuller(c).unwrap();
            for x in 0..25 {
                let w = teichmuller(&map.at_int(x, c), c).unwrap();
                assert!(w.eq_mod(&w0, 6).unwrap());
            }
        }
        assert!(AffineUnitMap::new(TorsionPoint::new(1, 3), 5).is_err());
    }

    #[test]
    fn interpolation_closed_value() {
        let c = ctx(25);
        let map = AffineUnitMap::new(TorsionPoint::new(1, 5), 5).unwrap();
        // Ev_2 is the integer weight 2: branch 0, exponent 0
        let z = padic_hurwitz_zeta(2, &map, 1, 0, &CharExponent::Int(0), c, 19, 8).unwrap();
        assert_eq!(z.value.residue(19).unwrap().to_i64(), Some(1));
        let t = hurwitz_interpolation_target(2, &map, 1, 2, c).unwrap();
        assert!(t.eq_mod(&PadicNum::from_rat(c, &rat(-1, 4)), 25).unwrap());
    }

    #[test]
    fn moments_follow_unreduced_bernoulli_argument() {
        let c = ctx(25);
        for (cc, a) in [(2, TorsionPoint::new(1, 5)), (3, TorsionPoint::new(2, 5)), (2, TorsionPoint::new(1, 10)), (3, TorsionPoint::new(1, 25))] {
            let mu = mu_c(cc, c, 12).unwrap();
            let map = AffineUnitMap::new(a, 5).unwrap();
            for k in 1..=6 {
                let got = integrate_poly(&mu, &map.power_poly(k)).unwrap();
                let want = PadicNum::from_rat(c, &moment_closed_form(cc, &a, k));
                assert!(got.eq_mod(&want, 20).unwrap(), "c={cc} alpha={a} k={k}");
            }
        }
        // the two forms agree exactly when c{α} < 1 and α has p-power order
        assert_eq!(moment_closed_form(2, &TorsionPoint::new(1, 5), 3), moment_reduced_form(2, &TorsionPoint::new(1, 5), 5, 3));
        assert_ne!(moment_closed_form(3, &TorsionPoint::new(2, 5), 3), moment_reduced_form(3, &TorsionPoint::new(2, 5), 5, 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn branch_independence(j in 1i64..4, k in 1i64..5) {
            let c = ctx(12);
            let map = AffineUnitMap::new(TorsionPoint::new(1, 5), 5).unwrap();
            let w = k + j - 2;
            let a = padic_hurwitz_zeta(2, &map, j, w, &CharExponent::Int(w), c, 8, 8).unwrap();
            let b = padic_hurwitz_zeta(2, &map, j + 4, w + 4, &CharExponent::Int(w + 4), c, 8, 8).unwrap();
            prop_assert!(a.value.eq_mod(&b.value, 8).unwrap());
        }

        #[test]
        fn padic_exponent_agrees_with_integer(s in 0i64..6) {
            let c = ctx(12);
            let map = AffineUnitMap::new(TorsionPoint::new(2, 5), 5).unwrap();
            let a = padic_hurwitz_zeta(3, &map, 1, s, &CharExponent::Int(s), c, 8, 8).unwrap();
            let b = padic_hurwitz_zeta(3, &map, 1, s, &CharExponent::Padic(PadicNum::from_int(c, s)), c, 8, 8).unwrap();
            prop_assert!(a.value.eq_mod(&b.value, 8).unwrap());
        }
    }
}
