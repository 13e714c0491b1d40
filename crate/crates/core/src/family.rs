//! Weight characters, symbolic coefficients in κ^univ, the family Eisenstein
//! series F_{c,α,β}(κ^univ, j), its evaluations Ev_k, and the family box values.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{
    char_power_exp, factorial, rat, rat_int, rat_pow, teichmuller, vp_rat, ArithError, CharExponent, PadicCtx, PadicNum, Rat, TorsionPoint,
};
use crate::cyclotomic::{cc_act, embed_padic, CycloNum, CycloPadic};
use crate::eisenstein::{eis_qexp, zeis_box, zeis_cd_box, BoxQ2, EisError, EisId, EisKind, UnitAction};
use crate::measures::{padic_hurwitz_zeta, AffineUnitMap, MeasureError};
use crate::qseries::{Coeff, QExp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("{0} is not a p-adic unit")]
    NotUnit(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Eis(#[from] EisError),
}

/// κ(u) = ω(u)^i ⟨u⟩^s.
#[derive(Clone, Debug)]
pub struct WeightChar {
    p: u64,
    branch: i64,
    exponent: CharExponent,
}

impl WeightChar {
    pub fn new(p: u64, branch: i64, exponent: CharExponent) -> Self {
        WeightChar { p, branch: branch.rem_euclid(p as i64 - 1), exponent }
    }

    /// The integer k sits in weight space as z ↦ z^{k−2}.
    pub fn from_integer_weight(k: i64, p: u64) -> Self {
        Self::new(p, k - 2, CharExponent::Int(k - 2))
    }

    pub fn branch(&self) -> i64 {
        self.branch
    }

    pub fn exponent(&self) -> &CharExponent {
        &self.exponent
    }

    /// k when the character is z ↦ z^{k−2}.
    pub fn integer_weight(&self) -> Option<i64> {
        match self.exponent {
            CharExponent::Int(s) if (s - self.branch).rem_euclid(self.p as i64 - 1) == 0 => Some(s + 2),
            _ => None,
        }
    }

    pub fn eval(&self, u: &Rat, ctx: PadicCtx) -> Result<PadicNum, FamilyError> {
        if vp_rat(self.p, u) != Some(0) {
            return Err(FamilyError::NotUnit(crate::arith::fmt_rat(u)));
        }
        let x = PadicNum::from_rat(ctx, u);
        let w = teichmuller(&x, ctx)?.pow(self.branch)?;
        Ok(w.mul(&char_power_exp(&x, &self.exponent, ctx)?))
    }
}

/// scalar · κ^univ(unit_arg) · ⟨unit_arg⟩^angle_power.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTerm {
    scalar: CycloNum,
    unit_arg: Rat,
    angle_power: i64,
}

impl WeightTerm {
    pub fn constant(scalar: CycloNum) -> Self {
        WeightTerm { scalar, unit_arg: Rat::one(), angle_power: 0 }
    }

    pub fn one() -> Self {
        Self::constant(CycloNum::one(1))
    }

    pub fn kappa(scalar: CycloNum, unit_arg: Rat, p: u64) -> Result<Self, FamilyError> {
        Self::with_angle(scalar, unit_arg, 0, p)
    }

    pub fn with_angle(scalar: CycloNum, unit_arg: Rat, angle_power: i64, p: u64) -> Result<Self, FamilyError> {
        if vp_rat(p, &unit_arg) != Some(0) {
            return Err(FamilyError::NotUnit(crate::arith::fmt_rat(&unit_arg)));
        }
        Ok(WeightTerm { scalar, unit_arg, angle_power })
    }

    pub fn scalar(&self) -> &CycloNum {
        &self.scalar
    }

    pub fn unit_arg(&self) -> &Rat {
        &self.unit_arg
    }

    pub fn angle_power(&self) -> i64 {
        self.angle_power
    }

    /// Product of two terms. ⟨u⟩^a⟨v⟩^a = ⟨uv⟩^a, but unequal nonzero
    /// angle powers do not combine into one term.
    pub fn mul(&self, o: &Self) -> Option<Self> {
        let angle_power = match (self.angle_power, o.angle_power) {
            (0, b) => b,
            (a, 0) => a,
            (a, b) if a == b => a,
            _ => return None,
        };
        Some(WeightTerm { scalar: self.scalar.mul(&o.scalar), unit_arg: &self.unit_arg * &o.unit_arg, angle_power })
    }

    pub fn scale(&self, c: &CycloNum) -> Self {
        WeightTerm { scalar: self.scalar.mul(c), ..self.clone() }
    }

    /// Exact value at the integer weight k, where κ^univ(u) = u^{k−2}.
    /// None when an angle factor makes the value irrational.
    pub fn eval_integer_weight(&self, k: i64) -> Option<CycloNum> {
        (self.angle_power == 0).then(|| self.scalar.scale(&rat_pow(&self.unit_arg, k - 2)))
    }

    pub fn eval(&self, kappa: &WeightChar, ctx: PadicCtx) -> Result<CycloPadic, FamilyError> {
        let mut v = kappa.eval(&self.unit_arg, ctx)?;
        if self.angle_power != 0 {
            let u = PadicNum::from_rat(ctx, &self.unit_arg);
            v = v.mul(&char_power_exp(&u, &CharExponent::Int(self.angle_power), ctx)?);
        }
        Ok(embed_padic(&self.scalar, ctx).scale(&v))
    }
}

/// factor(κ) · ω(0_α)^{1−j} · ζ_{p,c}(κ, α, j), computed on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct PadicConst {
    pub c: i64,
    pub alpha: TorsionPoint,
    pub j: i64,
    pub factor: WeightTerm,
}

#[derive(Clone, Copy, Debug)]
pub struct EvalPrecision {
    pub ctx: PadicCtx,
    /// absolute precision demanded of the measure integrals
    pub requested: i64,
    /// number of trailing Mahler terms in the tail certificate
    pub window: usize,
}

impl PadicConst {
    pub fn eval(&self, kappa: &WeightChar, prec: EvalPrecision) -> Result<CycloPadic, FamilyError> {
        let ctx = prec.ctx;
        let map = AffineUnitMap::new(self.alpha, ctx.p)?;
        let z = padic_hurwitz_zeta(self.c, &map, self.j, kappa.branch(), kappa.exponent(), ctx, prec.requested, prec.window)?;
        let w = map.teichmuller(ctx)?.pow(1 - self.j)?;
        Ok(self.factor.eval(kappa, ctx)?.scale(&z.value.mul(&w)))
    }
}

/// A finite sum of weight terms plus deferred measure integrals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FamilyCoeff {
    terms: BTreeMap<(Rat, i64), CycloNum>,
    consts: Vec<PadicConst>,
}

impl FamilyCoeff {
    pub fn from_term(t: WeightTerm) -> Self {
        let mut out = Self::default();
        out.push(t);
        out
    }

    pub fn from_const(c: PadicConst) -> Self {
        FamilyCoeff { terms: BTreeMap::new(), consts: vec![c] }
    }

    pub fn push(&mut self, t: WeightTerm) {
        let key = (t.unit_arg, t.angle_power);
        let s = match self.terms.remove(&key) {
            Some(old) => old.add(&t.scalar),
            None => t.scalar,
        };
        if !s.is_zero() {
            self.terms.insert(key, s);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = WeightTerm> + '_ {
        self.terms.iter().map(|((u, e), s)| WeightTerm { scalar: s.clone(), unit_arg: u.clone(), angle_power: *e })
    }

    pub fn consts(&self) -> &[PadicConst] {
        &self.consts
    }

    /// Multiplies every term and deferred constant by `t`.
    pub fn mul_term(&self, t: &WeightTerm) -> Result<Self, FamilyError> {
        let angle = || FamilyError::Domain("product of distinct angle powers".into());
        let mut out = Self::default();
        for s in self.terms() {
            out.push(s.mul(t).ok_or_else(angle)?);
        }
        for c in &self.consts {
            out.consts.push(PadicConst { factor: c.factor.mul(t).ok_or_else(angle)?, ..c.clone() });
        }
        Ok(out)
    }

    pub fn scale(&self, c: &CycloNum) -> Self {
        let mut out = Self::default();
        for s in self.terms() {
            out.push(s.scale(c));
        }
        out.consts = self.consts.iter().map(|k| PadicConst { factor: k.factor.scale(c), ..k.clone() }).collect();
        out
    }

    pub fn eval(&self, kappa: &WeightChar, prec: EvalPrecision) -> Result<CycloPadic, FamilyError> {
        let mut acc = CycloPadic::zero(prec.ctx, 1);
        for t in self.terms() {
            acc = acc.add(&t.eval(kappa, prec.ctx)?);
        }
        for c in &self.consts {
            acc = acc.add(&c.eval(kappa, prec)?);
        }
        Ok(acc)
    }
}

impl Coeff for FamilyCoeff {
    fn plus(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for t in o.terms() {
            out.push(t);
        }
        out.consts.extend(o.consts.iter().cloned());
        out
    }

    fn negated(&self) -> Self {
        self.scale(&CycloNum::from_rat(1, -Rat::one()))
    }

    fn vanishes(&self) -> bool {
        self.terms.is_empty() && self.consts.is_empty()
    }
}

/// The family F_{c,α,β}(κ^univ, j) with its parameters.
#[derive(Clone, Debug)]
pub struct FamilyQExp {
    pub series: QExp<FamilyCoeff>,
    pub c: i64,
    pub alpha: TorsionPoint,
    pub beta: TorsionPoint,
    pub j: i64,
}

impl FamilyQExp {
    pub fn ev_weight(&self, k: i64, prec: EvalPrecision) -> Result<QExp<CycloPadic>, FamilyError> {
        ev_series(&self.series, k, prec)
    }
}

pub fn ev_series(s: &QExp<FamilyCoeff>, k: i64, prec: EvalPrecision) -> Result<QExp<CycloPadic>, FamilyError> {
    let kappa = WeightChar::from_integer_weight(k, prec.ctx.p);
    s.try_map(|c| c.eval(&kappa, prec))
}

fn check_admissible(c: i64, alpha: &TorsionPoint, p: u64) -> Result<(), FamilyError> {
    if c.rem_euclid(p as i64) == 0 {
        return Err(FamilyError::NotUnit(c.to_string()));
    }
    if alpha.ord() % p as i64 != 0 {
        return Err(FamilyError::Domain(format!("ord({alpha}) is prime to {p}")));
    }
    Ok(())
}

/// F̃_{α,β}(κ^univ, j): the coefficient at t = mn sums
/// e(βn)(m·ord α)^{1−j}κ^univ(m·ord α) over m ≡ α, plus the
/// κ^univ(−1)(−1)^{2−j}-weighted sum over m ≡ −α against e(−βn).
fn tilde_series(alpha: &TorsionPoint, beta: &TorsionPoint, j: i64, p: u64, bound: &Rat) -> Result<QExp<FamilyCoeff>, FamilyError> {
    let a_ord = alpha.ord();
    let nb = beta.ord() as u64;
    let mut out = QExp::new(a_ord as u64, bound.clone());
    let tmax = out.max_numerator();
    let sign = if j % 2 == 0 { Rat::one() } else { -Rat::one() };
    for (residue, s, root_sign, arg_sign) in [(alpha.num(), Rat::one(), 1i64, 1i64), ((-alpha.num()).rem_euclid(a_ord), sign, -1, -1)] {
        let mut u = if residue == 0 { a_ord } else { residue };
        while u <= tmax {
            // m·ord α = u is a p-adic unit because p divides ord α
            let w = rat_pow(&rat_int(u), 1 - j) * &s;
            for n in 1..=(tmax / u) {
                let scalar = CycloNum::zeta_pow(nb, root_sign * beta.num() * n).scale(&w);
                out.add_term(u * n, FamilyCoeff::from_term(WeightTerm::kappa(scalar, rat_int(arg_sign * u), p)?));
            }
            u += a_ord;
        }
    }
    Ok(out)
}

/// F_{c,α,β}(κ^univ, j) = ω(0_α)^{1−j}ζ_{p,c}(κ^univ, α, j)
///   + c²F̃_{α,β} − κ^univ(c⁻¹)c^j F̃_{⟨⟨c⟩⟩α,⟨⟨c⟩⟩β}.
pub fn family_f(c: i64, alpha: TorsionPoint, beta: TorsionPoint, j: i64, p: u64, bound: &Rat) -> Result<FamilyQExp, FamilyError> {
    check_admissible(c, &alpha, p)?;
    if j < 1 {
        return Err(FamilyError::Domain(format!("j = {j} must be at least 1")));
    }
    let c2 = CycloNum::from_rat(1, rat_int(c * c));
    let first = tilde_series(&alpha, &beta, j, p, bound)?.map(|x| x.scale(&c2));
    let moved = tilde_series(&cc_act(c, &alpha, p), &cc_act(c, &beta, p), j, p, bound)?;
    let twist = WeightTerm::kappa(CycloNum::from_rat(1, rat_pow(&rat_int(c), j)), rat(1, c), p)?;
    let second = moved.try_map(|x| x.mul_term(&twist))?;
    let mut series = first.sub(&second);
    series.add_term(0, FamilyCoeff::from_const(PadicConst { c, alpha, j, factor: WeightTerm::one() }));
    Ok(FamilyQExp { series, c, alpha, beta, j })
}

/// (ord α)^{k−1}(c²F^{(k)}_{α,β} − c^{2−k}F^{(k)}_{⟨⟨c⟩⟩α,⟨⟨c⟩⟩β}).
pub fn special_value_target(c: i64, alpha: TorsionPoint, beta: TorsionPoint, k: u32, p: u64, bound: &Rat) -> Result<QExp<CycloNum>, FamilyError> {
    let u = UnitAction::new(c, p)?;
    let s = eis_qexp(&EisId::with_c(EisKind::Fc, k, alpha, beta, u), bound)?;
    let scale = rat_pow(&rat_int(alpha.ord()), k as i64 - 1);
    Ok(s.map(|x| x.scale(&scale)))
}

pub fn embed_series(s: &QExp<CycloNum>, ctx: PadicCtx) -> QExp<CycloPadic> {
    s.map(|x| embed_padic(x, ctx))
}

/// First exponent at which two p-adic series differ modulo p^prec, with the
/// valuation of the difference there. Missing coefficients count as zero.
pub fn padic_mismatch(a: &QExp<CycloPadic>, b: &QExp<CycloPadic>, prec: i64) -> Option<(Rat, i64)> {
    let d = a.sub(b);
    let found = d.terms().map(|(e, x)| (e, x.min_val())).find(|(_, v)| *v < prec);
    found
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyCheck {
    pub weight: i64,
    pub holds: bool,
    /// exponent and achieved valuation at the first failing coefficient
    pub first_mismatch: Option<(Rat, i64)>,
}

impl FamilyCheck {
    fn new(weight: i64, lhs: &QExp<CycloPadic>, rhs: &QExp<CycloPadic>, prec: i64) -> Self {
        let first_mismatch = padic_mismatch(lhs, rhs, prec);
        FamilyCheck { weight, holds: first_mismatch.is_none(), first_mismatch }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "weight": self.weight,
            "holds": self.holds,
            "first_mismatch": self.first_mismatch.as_ref().map(|(e, v)| serde_json::json!({
                "e": crate::arith::fmt_rat(e),
                "valuation": v,
            })),
        })
    }
}

/// Compares Ev_{k+j} of the family with the classical target at precision
/// `requested`.
pub fn check_special(c: i64, alpha: TorsionPoint, beta: TorsionPoint, j: i64, k: u32, bound: &Rat, prec: EvalPrecision) -> Result<FamilyCheck, FamilyError> {
    let p = prec.ctx.p;
    let fam = family_f(c, alpha, beta, j, p, bound)?;
    let lhs = fam.ev_weight(k as i64 + j, prec)?;
    let rhs = embed_series(&special_value_target(c, alpha, beta, k, p, bound)?, prec.ctx);
    Ok(FamilyCheck::new(k as i64 + j, &lhs, &rhs, prec.requested))
}

#[derive(Clone, Debug)]
pub struct FamilyDistReport {
    pub sum_over_both: Vec<FamilyCheck>,
    pub sum_over_beta: Vec<FamilyCheck>,
}

impl FamilyDistReport {
    pub fn holds(&self) -> bool {
        self.sum_over_both.iter().chain(&self.sum_over_beta).all(|c| c.holds)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "holds": self.holds(),
            "sum_over_both": self.sum_over_both.iter().map(FamilyCheck::to_json).collect::<Vec<_>>(),
            "sum_over_beta": self.sum_over_beta.iter().map(FamilyCheck::to_json).collect::<Vec<_>>(),
        })
    }
}

fn sum_evaluated(parts: Vec<QExp<CycloPadic>>) -> Option<QExp<CycloPadic>> {
    parts.into_iter().reduce(|a, b| a.add(&b))
}

/// Σ_{fα′=α, fβ′=β} F_{c,α′,β′} = f·F_{c,α,β} and
/// Σ_{fβ′=β} F_{c,α,β′}(q^{1/f}) = f·F_{c,α,β}(q), after Ev_k for each k.
#[allow(clippy::too_many_arguments)]
pub fn family_dist_check(c: i64, alpha: TorsionPoint, beta: TorsionPoint, j: i64, f: i64, bound: &Rat, weights: &[i64], prec: EvalPrecision) -> Result<FamilyDistReport, FamilyError> {
    let p = prec.ctx.p;
    if f < 1 {
        return Err(FamilyError::Domain(format!("f = {f} must be positive")));
    }
    let fr = CycloNum::from_rat(1, rat_int(f));
    let base = family_f(c, alpha, beta, j, p, bound)?;
    let scaled: QExp<FamilyCoeff> = base.series.map(|x| x.scale(&fr));
    let alphas = alpha.division_points(f);
    let betas = beta.division_points(f);
    let mut both = Vec::new();
    let mut over_beta = Vec::new();
    for &k in weights {
        let rhs = ev_series(&scaled, k, prec)?;
        let mut parts = Vec::new();
        for a in &alphas {
            for b in &betas {
                parts.push(family_f(c, *a, *b, j, p, bound)?.ev_weight(k, prec)?);
            }
        }
        let lhs = sum_evaluated(parts).expect("f ≥ 1 division points");
        both.push(FamilyCheck::new(k, &lhs, &rhs, prec.requested));
        let inner = bound * rat_int(f);
        let mut parts = Vec::new();
        for b in &betas {
            parts.push(family_f(c, alpha, *b, j, p, &inner)?.ev_weight(k, prec)?.rescale_tau_over_f(f as u64));
        }
        let lhs = sum_evaluated(parts).expect("f ≥ 1 division points");
        over_beta.push(FamilyCheck::new(k, &lhs, &rhs, prec.requested));
    }
    Ok(FamilyDistReport { sum_over_both: both, sum_over_beta: over_beta })
}

fn check_family_box(bx: &BoxQ2, p: u64) -> Result<(), FamilyError> {
    if vp_rat(p, bx.a()) != Some(0) {
        return Err(FamilyError::Domain(format!("box corner {} is not a p-adic unit", crate::arith::fmt_rat(bx.a()))));
    }
    if vp_rat(p, bx.r()).is_none_or(|v| v < 1) {
        return Err(FamilyError::Domain(format!("box radius {} is not divisible by p", crate::arith::fmt_rat(bx.r()))));
    }
    Ok(())
}

/// r^{−j} ord(r⁻¹a)^{j−1} κ^univ(r/ord(r⁻¹a)) F_{c,r⁻¹a,r⁻¹b}(κ^univ, j).
pub fn family_box(c: i64, j: i64, bx: &BoxQ2, p: u64, bound: &Rat) -> Result<QExp<FamilyCoeff>, FamilyError> {
    check_family_box(bx, p)?;
    let (alpha, beta) = bx.torsion();
    let ord = rat_int(alpha.ord());
    let scalar = rat_pow(bx.r(), -j) * rat_pow(&ord, j - 1);
    let term = WeightTerm::kappa(CycloNum::from_rat(1, scalar), bx.r() / &ord, p)?;
    let fam = family_f(c, alpha, beta, j, p, bound)?;
    fam.series.try_map(|x| x.mul_term(&term))
}

/// (1/(j−1)!) family_box(c, j, box1) · zeis_box(Ec, j, box2, d).
#[allow(clippy::too_many_arguments)]
pub fn family_box_product(c: i64, d: i64, j: i64, box1: &BoxQ2, box2: &BoxQ2, p: u64, bound: &Rat) -> Result<QExp<FamilyCoeff>, FamilyError> {
    let fam = family_box(c, j, box1, p, bound)?;
    let e = zeis_box(EisKind::Ec, j as u32, box2, Some(UnitAction::new(d, p)?), bound)?;
    let inv_fact = Rat::new(One::one(), factorial(j as u64 - 1));
    Ok(fam.mul_with(&e, |x, y| x.scale(&y.scale(&inv_fact))))
}

/// Ev_k(family_box) against zeis_box(Fc, k−j), for k > j.
pub fn check_box(c: i64, j: i64, k: i64, bx: &BoxQ2, bound: &Rat, prec: EvalPrecision) -> Result<FamilyCheck, FamilyError> {
    let p = prec.ctx.p;
    if k <= j {
        return Err(FamilyError::Domain(format!("weight {k} must exceed j = {j}")));
    }
    let lhs = ev_series(&family_box(c, j, bx, p, bound)?, k, prec)?;
    let rhs = zeis_box(EisKind::Fc, (k - j) as u32, bx, Some(UnitAction::new(c, p)?), bound)?;
    Ok(FamilyCheck::new(k, &lhs, &embed_series(&rhs, prec.ctx), prec.requested))
}

/// Ev_k(family_box_product) against zeis_cd_box(k, j).
#[allow(clippy::too_many_arguments)]
pub fn check_box_product(c: i64, d: i64, j: i64, k: i64, box1: &BoxQ2, box2: &BoxQ2, bound: &Rat, prec: EvalPrecision) -> Result<FamilyCheck, FamilyError> {
    let p = prec.ctx.p;
    let lhs = ev_series(&family_box_product(c, d, j, box1, box2, p, bound)?, k, prec)?;
    let rhs = zeis_cd_box(k as u32, j as u32, UnitAction::new(c, p)?, UnitAction::new(d, p)?, box1, box2, bound)?;
    Ok(FamilyCheck::new(k, &lhs, &embed_series(&rhs, prec.ctx), prec.requested))
}

/// Partial sums S_n = Σ_{a₀ ≡ a mod M, 1 ≤ a₀ ≤ Mp^n} κ(a₀) a₀^{1−j} E_{c,1}(q^{p^n}, q_M^{a₀} ζ_M^b)
/// at κ = Ev_{k+j}, against M^{1−j} o^{j−1} κ(M/o) F_{c,a/M,b/M}(κ, j) with o = ord(a/M).
/// Nothing here is asserted; the valuations only show how fast S_n settles.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitDiagnostic {
    pub weight: i64,
    /// (n, least valuation of S_n − S_{n−1}) for n ≥ 2
    pub steps: Vec<(u32, i64)>,
    /// (n, least valuation of S_n minus the family side)
    pub to_family: Vec<(u32, i64)>,
}

impl LimitDiagnostic {
    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |v: &[(u32, i64)]| v.iter().map(|(n, x)| serde_json::json!({"n": n, "valuation": x})).collect::<Vec<_>>();
        serde_json::json!({
            "weight": self.weight,
            "steps": pairs(&self.steps),
            "to_family": pairs(&self.to_family),
        })
    }
}

fn least_valuation(a: &QExp<CycloPadic>, b: &QExp<CycloPadic>, cap: i64) -> i64 {
    a.sub(b).terms().map(|(_, x)| x.min_val()).fold(cap, i64::min)
}

#[allow(clippy::too_many_arguments)]
pub fn limit_diagnostic(c: i64, a: i64, b: i64, level: u64, j: i64, k: i64, n_max: u32, bound: &Rat, prec: EvalPrecision) -> Result<LimitDiagnostic, FamilyError> {
    let p = prec.ctx.p;
    let m = level as i64;
    if a.rem_euclid(p as i64) == 0 {
        return Err(FamilyError::NotUnit(format!("{a}")));
    }
    let mut partial = Vec::new();
    for n in 1..=n_max {
        let top = m * (p as i64).pow(n);
        let mut acc: QExp<CycloNum> = QExp::new(level, bound.clone());
        for a0 in (1..=top).filter(|x| (x - a).rem_euclid(m) == 0) {
            let e = crate::eisenstein::theta_dlog_pow(c, 1, a0, b, level, n, p, bound)?;
            acc = acc.add(&crate::eisenstein::scale_series(&e, &rat_pow(&rat_int(a0), k - 1)));
        }
        partial.push(embed_series(&acc, prec.ctx));
    }
    let point = TorsionPoint::new(a, m);
    let o = rat_int(point.ord());
    let lr = rat_int(m);
    let factor = rat_pow(&lr, 1 - j) * rat_pow(&o, j - 1) * rat_pow(&(&lr / &o), k + j - 2);
    let fam = family_f(c, point, TorsionPoint::new(b, m), j, p, bound)?.ev_weight(k + j, prec)?;
    let target = fam.map(|x| x.scale(&PadicNum::from_rat(prec.ctx, &factor)));
    let cap = prec.requested;
    let steps = partial.windows(2).zip(2..).map(|(w, n)| (n, least_valuation(&w[1], &w[0], cap))).collect();
    let to_family = partial.iter().zip(1..).map(|(s, n)| (n, least_valuation(s, &target, cap))).collect();
    Ok(LimitDiagnostic { weight: k + j, steps, to_family })
}

/// True when the deferred constant of F_{c,α,β} matches the classical constant
/// term, i.e. c{α} < 1 and ⟨⟨c⟩⟩α = cα in ℚ/ℤ.
pub fn constant_term_is_classical(c: i64, alpha: &TorsionPoint, p: u64) -> bool {
    let ca = rat_int(c) * alpha.frac();
    ca < Rat::one() && !ca.is_zero() && cc_act(c, alpha, p) == TorsionPoint::from_rat(&ca)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tp(a: i64, n: i64) -> TorsionPoint {
        TorsionPoint::new(a, n)
    }

    fn prec(n: u32, g: i64) -> EvalPrecision {
        EvalPrecision { ctx: PadicCtx::new(5, n).unwrap(), requested: n as i64 - g, window: 8 }
    }

    fn int(ctx: PadicCtx, n: i64) -> CycloPadic {
        CycloPadic::from_padic(1, PadicNum::from_int(ctx, n))
    }

    #[test]
    fn universal_character_values() {
        let ctx = PadicCtx::new(5, 20).unwrap();
        let one = WeightTerm::one();
        for k in 2..8 {
            let kap = WeightChar::from_integer_weight(k, 5);
            assert_eq!(kap.integer_weight(), Some(k));
            assert!(one.eval(&kap, ctx).unwrap().eq_mod(&int(ctx, 1), 20).unwrap());
            let m1 = WeightTerm::kappa(CycloNum::one(1), rat_int(-1), 5).unwrap();
            let sign = if k % 2 == 0 { 1 } else { -1 };
            assert!(m1.eval(&kap, ctx).unwrap().eq_mod(&int(ctx, sign), 20).unwrap());
        }
        let two = WeightTerm::kappa(CycloNum::one(1), rat_int(2), 5).unwrap();
        let v = two.eval(&WeightChar::from_integer_weight(4, 5), ctx).unwrap();
        assert!(v.eq_mod(&int(ctx, 4), 20).unwrap());
        assert!(WeightTerm::kappa(CycloNum::one(1), rat(1, 5), 5).is_err());
    }

    #[test]
    fn angle_power_factor() {
        let ctx = PadicCtx::new(5, 15).unwrap();
        // κ(u)⟨u⟩^{-(k-2)} at weight k is ω(u)^{k−2}
        let t = WeightTerm::with_angle(CycloNum::one(1), rat_int(2), -3, 5).unwrap();
        let v = t.eval(&WeightChar::from_integer_weight(5, 5), ctx).unwrap();
        let w = teichmuller(&PadicNum::from_int(ctx, 2), ctx).unwrap().pow(3).unwrap();
        assert!(v.eq_mod(&CycloPadic::from_padic(1, w), 15).unwrap());
    }

    #[test]
    fn c_twist_factor_at_integer_weight() {
        // κ(c⁻¹)c^j at weight k+j is c^{2−k}
        let ctx = PadicCtx::new(5, 20).unwrap();
        let t = WeightTerm::kappa(CycloNum::from_rat(1, rat_int(2)), rat(1, 2), 5).unwrap();
        let v = t.eval(&WeightChar::from_integer_weight(4, 5), ctx).unwrap();
        assert!(v.eq_mod(&CycloPadic::from_padic(1, PadicNum::from_rat(ctx, &rat(1, 2))), 20).unwrap());
    }

    #[test]
    fn first_tilde_coefficient() {
        let s = tilde_series(&tp(1, 5), &tp(0, 1), 1, 5, &rat(1, 5)).unwrap();
        let c = s.coeff_at(&rat(1, 5)).unwrap();
        let terms: Vec<_> = c.terms().collect();
        assert_eq!(terms, vec![WeightTerm::one()]);
    }

    #[test]
    fn constant_term_at_weight_two() {
        let p = prec(25, 6);
        let fam = family_f(2, tp(1, 5), tp(0, 1), 1, 5, &rat_int(1)).unwrap();
        let ev = fam.ev_weight(2, p).unwrap();
        assert!(ev.coeff(0).unwrap().eq_mod(&int(p.ctx, 1), 19).unwrap());
    }

    #[test]
    fn special_value_nonconstant_terms() {
        let p = prec(16, 4);
        for (c, a, b, j, k) in [(2, tp(1, 5), tp(0, 1), 1, 2u32), (3, tp(2, 5), tp(1, 5), 2, 3), (2, tp(1, 5), tp(1, 3), 1, 4), (3, tp(1, 25), tp(0, 1), 2, 5)] {
            let bound = rat_int(2);
            let fam = family_f(c, a, b, j, 5, &bound).unwrap();
            let mut lhs = fam.ev_weight(k as i64 + j, p).unwrap();
            let mut rhs = embed_series(&special_value_target(c, a, b, k, 5, &bound).unwrap(), p.ctx);
            lhs.add_term(0, lhs.coeff(0).cloned().unwrap().neg());
            if let Some(x) = rhs.coeff(0).cloned() {
                rhs.add_term(0, x.neg());
            }
            assert_eq!(padic_mismatch(&lhs, &rhs, 12), None, "c={c} alpha={a} beta={b} j={j} k={k}");
        }
    }

    #[test]
    fn special_value_full_when_constant_is_classical() {
        let p = prec(25, 6);
        for (c, a, j, k) in [(2, tp(1, 5), 1, 2u32), (2, tp(1, 25), 2, 3), (3, tp(1, 5), 1, 4)] {
            assert!(constant_term_is_classical(c, &a, 5));
            let r = check_special(c, a, tp(0, 1), j, k, &rat_int(3), p).unwrap();
            assert!(r.holds, "{r:?}");
        }
        assert!(!constant_term_is_classical(3, &tp(2, 5), 5));
        assert!(!constant_term_is_classical(2, &tp(1, 10), 5));
    }

    #[test]
    fn limit_partial_sums_are_reported() {
        let d = limit_diagnostic(2, 1, 0, 5, 1, 3, 2, &rat_int(1), prec(20, 4)).unwrap();
        assert_eq!(d.weight, 4);
        assert_eq!(d.steps.len(), 1);
        assert_eq!(d.to_family.len(), 2);
        assert!(matches!(limit_diagnostic(2, 5, 0, 5, 1, 3, 1, &rat_int(1), prec(20, 4)), Err(FamilyError::NotUnit(_))));
    }

    #[test]
    fn box_scalars() {
        let bx = BoxQ2::new(rat_int(1), rat_int(0), rat_int(5)).unwrap();
        let fam = family_box(2, 1, &bx, 5, &rat_int(1)).unwrap();
        let plain = family_f(2, tp(1, 5), tp(0, 1), 1, 5, &rat_int(1)).unwrap().series;
        let fifth = CycloNum::from_rat(1, rat(1, 5));
        assert_eq!(fam, plain.map(|x| x.scale(&fifth)));
        assert!(family_box(2, 1, &BoxQ2::new(rat_int(5), rat_int(0), rat_int(25)).unwrap(), 5, &rat_int(1)).is_err());
        assert!(family_box(2, 1, &BoxQ2::new(rat_int(1), rat_int(0), rat_int(3)).unwrap(), 5, &rat_int(1)).is_err());
    }

    #[test]
    fn box_evaluation_matches_classical_box() {
        let p = prec(20, 5);
        let bx = BoxQ2::new(rat_int(1), rat_int(0), rat_int(5)).unwrap();
        for (j, k) in [(1, 3), (1, 4), (2, 4)] {
            let r = check_box(2, j, k, &bx, &rat_int(2), p).unwrap();
            assert!(r.holds, "{r:?}");
        }
        let bx2 = BoxQ2::new(rat_int(0), rat_int(1), rat_int(3)).unwrap();
        let r = check_box_product(2, 2, 1, 3, &bx, &bx2, &rat_int(2), p).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn evaluation_commutes_with_classical_products() {
        let p = prec(15, 3);
        let fam = family_f(2, tp(1, 5), tp(0, 1), 1, 5, &rat_int(2)).unwrap();
        let classical = eis_qexp(&EisId::new(EisKind::E, 4, tp(0, 1), tp(0, 1)), &rat_int(2)).unwrap();
        for k in [3, 4] {
            let prod = fam.series.mul_with(&classical, |x, y| x.scale(y));
            let lhs = ev_series(&prod, k, p).unwrap();
            let rhs = fam.ev_weight(k, p).unwrap().mul(&embed_series(&classical, p.ctx));
            assert_eq!(padic_mismatch(&lhs, &rhs, 10), None);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn sign_term_matches_parity(k in 1i64..8, j in 1i64..4) {
            // κ^univ(−1)(−1)^{2−j} at weight k+j is (−1)^k
            let ctx = PadicCtx::new(5, 10).unwrap();
            let sign = if j % 2 == 0 { 1 } else { -1 };
            let t = WeightTerm::kappa(CycloNum::from_rat(1, rat_int(sign)), rat_int(-1), 5).unwrap();
            let v = t.eval(&WeightChar::from_integer_weight(k + j, 5), ctx).unwrap();
            let want = if k % 2 == 0 { 1 } else { -1 };
            prop_assert!(v.eq_mod(&int(ctx, want), 10).unwrap());
        }

        #[test]
        fn character_is_multiplicative(a in 1i64..40, b in 1i64..40, k in 2i64..9) {
            prop_assume!(a % 5 != 0 && b % 5 != 0);
            let ctx = PadicCtx::new(5, 12).unwrap();
            let kap = WeightChar::from_integer_weight(k, 5);
            let ta = WeightTerm::kappa(CycloNum::one(1), rat_int(a), 5).unwrap();
            let tb = WeightTerm::kappa(CycloNum::one(1), rat_int(b), 5).unwrap();
            let lhs = ta.mul(&tb).unwrap().eval(&kap, ctx).unwrap();
            let rhs = ta.eval(&kap, ctx).unwrap().mul(&tb.eval(&kap, ctx).unwrap());
            prop_assert!(lhs.eq_mod(&rhs, 12).unwrap());
            let direct = CycloPadic::from_padic(1, PadicNum::from_int(ctx, a * b).pow(k - 2).unwrap());
            prop_assert!(lhs.eq_mod(&direct, 12).unwrap());
        }
    }
}
