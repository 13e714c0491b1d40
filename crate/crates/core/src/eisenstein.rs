//! q-expansions of the Eisenstein series E^{(k)}_{α,β}, F^{(k)}_{α,β}, the
//! holomorphic weight-2 series Ẽ^{(2)}, their c-variants, logarithmic
//! derivatives of the theta function, and the box distributions built from
//! them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{factorial, rat, rat_int, rat_pow, Rat, TorsionPoint};
use crate::cyclotomic::{cc_act, CycloAccum, CycloError, CycloNum};
use crate::lfunctions::{dirichlet_star_neg, hurwitz_neg};
use crate::qseries::QExp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EisError {
    #[error("invalid Eisenstein series: {0}")]
    InvalidId(String),
    #[error("undefined input: {0}")]
    Domain(String),
    #[error(transparent)]
    Cyclo(#[from] CycloError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EisKind {
    E,
    F,
    ETilde2,
    Ec,
    Fc,
}

impl FromStr for EisKind {
    type Err = EisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" => Ok(EisKind::E),
            "F" => Ok(EisKind::F),
            "Etilde2" | "ETilde2" | "Et" => Ok(EisKind::ETilde2),
            "Ec" => Ok(EisKind::Ec),
            "Fc" => Ok(EisKind::Fc),
            other => Err(EisError::InvalidId(format!("unknown kind {other:?}"))),
        }
    }
}

impl fmt::Display for EisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EisKind::E => "E",
            EisKind::F => "F",
            EisKind::ETilde2 => "Etilde2",
            EisKind::Ec => "Ec",
            EisKind::Fc => "Fc",
        };
        f.write_str(s)
    }
}

/// A p-adic unit c acting on torsion points through ⟨⟨c⟩⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct UnitAction {
    pub c: i64,
    pub p: u64,
}

impl UnitAction {
    pub fn new(c: i64, p: u64) -> Result<Self, EisError> {
        if c.rem_euclid(p as i64) == 0 {
            return Err(EisError::InvalidId(format!("c = {c} is not a unit at {p}")));
        }
        Ok(UnitAction { c, p })
    }

    pub fn act(&self, alpha: &TorsionPoint) -> TorsionPoint {
        cc_act(self.c, alpha, self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EisId {
    pub kind: EisKind,
    pub k: u32,
    pub alpha: TorsionPoint,
    pub beta: TorsionPoint,
    pub c: Option<UnitAction>,
}

impl EisId {
    pub fn new(kind: EisKind, k: u32, alpha: TorsionPoint, beta: TorsionPoint) -> Self {
        EisId { kind, k, alpha, beta, c: None }
    }

    pub fn with_c(kind: EisKind, k: u32, alpha: TorsionPoint, beta: TorsionPoint, c: UnitAction) -> Self {
        EisId { kind, k, alpha, beta, c: Some(c) }
    }

    pub fn validate(&self) -> Result<(), EisError> {
        let bad = |m: &str| Err(EisError::InvalidId(m.to_string()));
        let origin = self.alpha.is_zero() && self.beta.is_zero();
        if self.k == 0 {
            return bad("weight must be at least 1");
        }
        match self.kind {
            EisKind::E if self.k == 2 => bad("E in weight 2 is not holomorphic; use Etilde2 or Ec"),
            EisKind::F | EisKind::Fc if self.k == 2 && origin => bad("F in weight 2 needs (alpha, beta) != (0, 0)"),
            EisKind::ETilde2 if self.k != 2 => bad("Etilde2 has weight 2"),
            EisKind::Ec | EisKind::Fc if self.c.is_none() => bad("c-variants need a unit c"),
            _ => Ok(()),
        }
    }

    fn at(&self, alpha: TorsionPoint, beta: TorsionPoint) -> Self {
        EisId { alpha, beta, ..*self }
    }
}

fn rat_cyclo(r: Rat) -> CycloNum {
    CycloNum::from_rat(1, r)
}

/// Which factor of the Dirichlet product carries the power k−1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PowerOn {
    N,
    M,
}

/// Non-constant part of E (PowerOn::N) or F (PowerOn::M): the coefficient at
/// t = mn sums e(±βn) times n^{k−1} or m^{k−1}, over m ≡ ±α and n ≥ 1.
fn convolution(alpha: &TorsionPoint, beta: &TorsionPoint, k: u32, on: PowerOn, bound: &Rat) -> QExp<CycloNum> {
    let a_ord = alpha.ord();
    let nb = beta.ord() as u64;
    let mut out = QExp::new(a_ord as u64, bound.clone());
    let tmax = out.max_numerator();
    let mut acc: BTreeMap<i64, CycloAccum> = BTreeMap::new();
    let sign = if k.is_multiple_of(2) { Rat::one() } else { -Rat::one() };
    for (residue, s, root_sign) in [(alpha.num(), Rat::one(), 1i64), ((-alpha.num()).rem_euclid(a_ord), sign, -1)] {
        let mut u = if residue == 0 { a_ord } else { residue };
        while u <= tmax {
            let m_pow = rat_pow(&rat(u, a_ord), k as i64 - 1);
            for n in 1..=(tmax / u) {
                let w = match on {
                    PowerOn::N => rat_pow(&rat_int(n), k as i64 - 1),
                    PowerOn::M => m_pow.clone(),
                };
                acc.entry(u * n).or_insert_with(|| CycloAccum::new(nb)).add_term(root_sign * beta.num() * n, &(w * &s));
            }
            u += a_ord;
        }
    }
    for (key, a) in acc {
        out.add_term(key, a.finish());
    }
    out
}

fn constant_term(id: &EisId, k: u32, on: PowerOn) -> CycloNum {
    let (alpha, beta) = (&id.alpha, &id.beta);
    if k == 1 {
        if !alpha.is_zero() {
            return rat_cyclo(hurwitz_neg(alpha, 1));
        }
        return dirichlet_star_neg(beta, 1).sub(&dirichlet_star_neg(&beta.neg(), 1)).scale(&rat(1, 2));
    }
    match on {
        PowerOn::N if alpha.is_zero() => dirichlet_star_neg(beta, k as usize),
        PowerOn::N => CycloNum::zero(1),
        PowerOn::M => rat_cyclo(hurwitz_neg(alpha, k as usize)),
    }
}

/// −1/24 + Σ σ_1(n) qⁿ, the holomorphic part of E^{(2)}_{0,0} up to scaling.
pub fn sigma1_series(bound: &Rat) -> QExp<CycloNum> {
    let mut out = QExp::new(1, bound.clone());
    out.add_term(0, rat_cyclo(rat(-1, 24)));
    let top = out.max_numerator();
    for d in 1..=top {
        for m in 1..=(top / d) {
            out.add_term(d * m, rat_cyclo(rat_int(d)));
        }
    }
    out
}

fn base_series(id: &EisId, bound: &Rat) -> QExp<CycloNum> {
    let on = match id.kind {
        EisKind::E | EisKind::ETilde2 | EisKind::Ec => PowerOn::N,
        EisKind::F | EisKind::Fc => PowerOn::M,
    };
    let mut s = convolution(&id.alpha, &id.beta, id.k, on, bound);
    s.add_term(0, constant_term(id, id.k, on));
    if id.k == 2 && on == PowerOn::N {
        // Ẽ^{(2)}_{α,β} = E^{(2)}_{α,β} − E^{(2)}_{0,0}; the holomorphic
        // projection of E^{(2)}_{0,0} is 2·(−1/24 + Σσ_1(n)qⁿ)
        s = s.sub(&sigma1_series(bound).map(|c| c.scale(&rat_int(2))));
    }
    s
}

/// The q-expansion of the series named by `id`, up to exponent `bound`.
pub fn eis_qexp(id: &EisId, bound: &Rat) -> Result<QExp<CycloNum>, EisError> {
    id.validate()?;
    match id.kind {
        EisKind::E | EisKind::F | EisKind::ETilde2 => Ok(base_series(id, bound)),
        EisKind::Ec | EisKind::Fc => {
            let u = id.c.expect("validated");
            let c = rat_int(u.c);
            let c2 = &c * &c;
            let moved = id.at(u.act(&id.alpha), u.act(&id.beta));
            let first = base_series(id, bound).map(|x| x.scale(&c2));
            let second = base_series(&moved, bound);
            let factor = match (id.kind, id.k) {
                (EisKind::Ec, 2) => c2,
                (EisKind::Ec, k) => rat_pow(&c, k as i64),
                (_, k) => rat_pow(&c, 2 - k as i64),
            };
            Ok(first.sub(&second.map(|x| x.scale(&factor))))
        }
    }
}

pub fn scale_series(s: &QExp<CycloNum>, r: &Rat) -> QExp<CycloNum> {
    s.map(|x| x.scale(r))
}

/// D_2^{r−1}[1/2 + 1/(w−1)] at w = ζ, with D_2 = w d/dw.
fn log_derivative_constant(r: u32, zeta: &CycloNum) -> Result<CycloNum, EisError> {
    // D_2^k (1/(w−1)) = P_k(w)/(w−1)^{k+1}, P_{k+1} = w(P_k'(w−1) − (k+1)P_k)
    let mut poly: Vec<Rat> = vec![Rat::one()];
    for k in 0..(r - 1) as usize {
        let mut next = vec![Rat::zero(); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            if i >= 1 {
                // P'(w)(w−1)·w contributes i·c·(w^{i+1} − w^i)
                next[i + 1] += rat_int(i as i64) * c;
                next[i] -= rat_int(i as i64) * c;
            }
            next[i + 1] -= rat_int(k as i64 + 1) * c;
        }
        poly = next;
    }
    let one = CycloNum::one(zeta.conductor());
    let denom = zeta.sub(&one);
    if denom.is_zero() {
        return Err(EisError::Domain("theta is evaluated at a lattice point".into()));
    }
    let mut value = CycloNum::zero(zeta.conductor());
    let mut pw = one.clone();
    for c in &poly {
        value = value.add(&pw.scale(c));
        pw = pw.mul(zeta);
    }
    let mut result = value.mul(&denom.pow(r).inv()?);
    if r == 1 {
        result = result.add(&rat_cyclo(rat(1, 2)));
    }
    Ok(result)
}

/// D_2^r log θ(x_1, x_2) with x_1 = q^{p^n}, x_2 = q^{a/M} ζ_M^b, as a series in q^{1/M}.
fn theta_log_derivative(r: u32, a: i64, b: i64, m: u64, level: i64, bound: &Rat) -> Result<QExp<CycloNum>, EisError> {
    let shift = a.div_euclid(level);
    let a0 = a.rem_euclid(level);
    let mut out = QExp::new(m, bound.clone());
    let top = out.max_numerator();
    let zeta_b = |e: i64| CycloNum::zeta_pow(m, b * e);
    let mut constant = if a0 == 0 {
        log_derivative_constant(r, &zeta_b(1))?
    } else if r == 1 {
        rat_cyclo(rat(-1, 2))
    } else {
        CycloNum::zero(1)
    };
    if r == 1 {
        constant = constant.sub(&rat_cyclo(rat_int(shift)));
    }
    out.add_term(0, constant);
    // −Σ_{n ≥ 0, m ≥ 1} x_1^{nm} w^m, skipping n = 0 when w is a constant
    let mut n0 = if a0 == 0 { 1 } else { 0 };
    while n0 * level + a0 <= top {
        let step = n0 * level + a0;
        for e in 1..=(top / step) {
            out.add_term(e * step, zeta_b(e).scale(&-rat_pow(&rat_int(e), r as i64 - 1)));
        }
        n0 += 1;
    }
    // +Σ_{n ≥ 1, m ≥ 1} x_1^{nm} w^{−m}
    let mut n1 = 1;
    while n1 * level - a0 <= top {
        let step = n1 * level - a0;
        for e in 1..=(top / step) {
            out.add_term(e * step, zeta_b(-e).scale(&rat_pow(&rat_int(-e), r as i64 - 1)));
        }
        n1 += 1;
    }
    Ok(out)
}

/// D_2^r log(r_c θ) = c²·D_2^r log θ(x_1, x_2) − c^r·D_2^r log θ(x_1, x_2^c), computed
/// from the product formula for θ. Here x_1 = q^{p^n} and x_2 = q^{a/M} ζ_M^b.
#[allow(clippy::too_many_arguments)]
pub fn theta_dlog_pow(c: i64, r: u32, a: i64, b: i64, m: u64, n: u32, p: u64, bound: &Rat) -> Result<QExp<CycloNum>, EisError> {
    if r == 0 {
        return Err(EisError::Domain("r must be at least 1".into()));
    }
    let level = m as i64 * (p as i64).pow(n);
    if a.rem_euclid(level) == 0 && b.rem_euclid(m as i64) == 0 {
        return Err(EisError::Domain("(a, b) is a lattice point".into()));
    }
    if (c * a).rem_euclid(level) == 0 && (c * b).rem_euclid(m as i64) == 0 {
        return Err(EisError::Domain("c·(a, b) is a lattice point".into()));
    }
    let base = theta_log_derivative(r, a, b, m, level, bound)?;
    let moved = theta_log_derivative(r, c * a, c * b, m, level, bound)?;
    let cr = rat_int(c);
    Ok(scale_series(&base, &(&cr * &cr)).sub(&scale_series(&moved, &rat_pow(&cr, r as i64))))
}

/// The Eisenstein side of the theta identity: −(c²E^{(r)}_{α,β} − c^r E^{(r)}_{cα,cβ})
/// with α = a/(Mp^n), β = b/M, expanded in q = x_1^{1/p^n}. Weight 2 uses Ẽ.
#[allow(clippy::too_many_arguments)]
pub fn theta_eisenstein_side(c: i64, r: u32, a: i64, b: i64, m: u64, n: u32, p: u64, bound: &Rat) -> Result<QExp<CycloNum>, EisError> {
    let pn = p.pow(n);
    let level = m as i64 * pn as i64;
    let kind = if r == 2 { EisKind::ETilde2 } else { EisKind::E };
    let inner = bound / rat_int(pn as i64);
    let alpha = TorsionPoint::new(a, level);
    let beta = TorsionPoint::new(b, m as i64);
    let e1 = eis_qexp(&EisId::new(kind, r, alpha, beta), &inner)?;
    let e2 = eis_qexp(&EisId::new(kind, r, alpha.mul_int(c), beta.mul_int(c)), &inner)?;
    let cr = rat_int(c);
    let comb = scale_series(&e1, &(&cr * &cr)).sub(&scale_series(&e2, &rat_pow(&cr, r as i64)));
    Ok(comb.neg().dilate(pn))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistReport {
    pub holds: bool,
    pub first_mismatch: Option<Rat>,
    pub summands: usize,
    pub coefficients_checked: usize,
}

impl DistReport {
    fn compare(lhs: &QExp<CycloNum>, rhs: &QExp<CycloNum>, summands: usize) -> Self {
        let first_mismatch = lhs.first_mismatch(rhs, |a, b| a == b);
        let coefficients_checked = rhs.max_numerator().max(0) as usize + 1;
        DistReport { holds: first_mismatch.is_none(), first_mismatch, summands, coefficients_checked }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "holds": self.holds,
            "first_mismatch": self.first_mismatch.as_ref().map(crate::arith::fmt_rat),
            "summands": self.summands,
            "coefficients_checked": self.coefficients_checked,
        })
    }
}

fn sum_series(parts: impl IntoIterator<Item = QExp<CycloNum>>, m: u64, bound: &Rat) -> QExp<CycloNum> {
    parts.into_iter().fold(QExp::new(m, bound.clone()), |acc, s| acc.add(&s))
}

fn rel_factor(kind: EisKind, k: u32, f: i64) -> Rat {
    match kind {
        EisKind::E | EisKind::ETilde2 | EisKind::Ec => rat_pow(&rat_int(f), k as i64),
        EisKind::F | EisKind::Fc => rat_pow(&rat_int(f), 2 - k as i64),
    }
}

/// Σ_{fα′=α, fβ′=β} X_{α′,β′} against f^k X_{α,β} (E-types) or f^{2−k} X_{α,β} (F-types).
pub fn dist_check_rel(id: &EisId, f: i64, bound: &Rat) -> Result<DistReport, EisError> {
    let rhs = scale_series(&eis_qexp(id, bound)?, &rel_factor(id.kind, id.k, f));
    let mut parts = Vec::new();
    for a in id.alpha.division_points(f) {
        for b in id.beta.division_points(f) {
            parts.push(eis_qexp(&id.at(a, b), bound)?);
        }
    }
    let n = parts.len();
    Ok(DistReport::compare(&sum_series(parts, 1, bound), &rhs, n))
}

/// Σ_{fβ′=β} X_{α,β′}(τ/f) against f^k X_{α,β} (E-types) or f·X_{α,β} (F-types).
pub fn dist_check_rel1(id: &EisId, f: i64, bound: &Rat) -> Result<DistReport, EisError> {
    let factor = match id.kind {
        EisKind::F | EisKind::Fc => rat_int(f),
        _ => rat_pow(&rat_int(f), id.k as i64),
    };
    let rhs = scale_series(&eis_qexp(id, bound)?, &factor);
    let inner = bound * rat_int(f);
    let mut parts = Vec::new();
    for b in id.beta.division_points(f) {
        parts.push(eis_qexp(&id.at(id.alpha, b), &inner)?.rescale_tau_over_f(f as u64));
    }
    let n = parts.len();
    Ok(DistReport::compare(&sum_series(parts, 1, bound), &rhs, n))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaloisReport {
    pub sigma_holds: bool,
    pub twist_holds: bool,
}

/// σ_d applied coefficientwise equals the series at (α, dβ), and the shift
/// q_M ↦ ζ_M q_M (M = ord α) gives the series at (α, α+β).
pub fn galois_compat(id: &EisId, d: i64, bound: &Rat) -> Result<GaloisReport, EisError> {
    let base = eis_qexp(id, bound)?;
    let conductor = base.raw_terms().values().map(CycloNum::conductor).fold(id.beta.ord() as u64, num_integer::lcm);
    let sigma = base.try_map(|x| x.lift(conductor).galois_sigma(d))?;
    let moved = eis_qexp(&id.at(id.alpha, id.beta.mul_int(d)), bound)?;
    let twisted = base.rekey(id.alpha.ord() as u64).twist_root(1).map_err(|e| EisError::Domain(e.to_string()))?;
    let shifted = eis_qexp(&id.at(id.alpha, id.alpha.add(&id.beta)), bound)?;
    Ok(GaloisReport {
        sigma_holds: sigma.first_mismatch(&moved, |a, b| a == b).is_none(),
        twist_holds: twisted.first_mismatch(&shifted, |a, b| a == b).is_none(),
    })
}

/// The compact open (a + rẐ) × (b + rẐ) of (ℚ ⊗ Ẑ)².
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxQ2 {
    a: Rat,
    b: Rat,
    r: Rat,
}

impl BoxQ2 {
    pub fn new(a: Rat, b: Rat, r: Rat) -> Result<Self, EisError> {
        if r.is_zero() {
            return Err(EisError::InvalidId("box radius must be nonzero".into()));
        }
        let reduce = |x: Rat| {
            let ar = num_traits::Signed::abs(&r);
            &x - &ar * (&x / &ar).floor()
        };
        Ok(BoxQ2 { a: reduce(a), b: reduce(b), r })
    }

    pub fn a(&self) -> &Rat {
        &self.a
    }

    pub fn b(&self) -> &Rat {
        &self.b
    }

    pub fn r(&self) -> &Rat {
        &self.r
    }

    /// (r⁻¹a, r⁻¹b) in (ℚ/ℤ)².
    pub fn torsion(&self) -> (TorsionPoint, TorsionPoint) {
        (TorsionPoint::from_rat(&(&self.a / &self.r)), TorsionPoint::from_rat(&(&self.b / &self.r)))
    }

    /// The f² sub-boxes (a + ir + rfẐ) × (b + jr + rfẐ).
    pub fn subdivide(&self, f: i64) -> Vec<BoxQ2> {
        let rf = &self.r * rat_int(f);
        let mut out = Vec::new();
        for i in 0..f {
            for j in 0..f {
                let a = &self.a + &self.r * rat_int(i);
                let b = &self.b + &self.r * rat_int(j);
                out.push(BoxQ2::new(a, b, rf.clone()).expect("nonzero radius"));
            }
        }
        out
    }
}

/// Value of the Eisenstein box distribution: r^{−k}E^{(k)} (Ẽ in weight 2) for
/// E-types and r^{k−2}F^{(k)} for F-types, at (r⁻¹a, r⁻¹b).
pub fn zeis_box(kind: EisKind, k: u32, bx: &BoxQ2, c: Option<UnitAction>, bound: &Rat) -> Result<QExp<CycloNum>, EisError> {
    let (alpha, beta) = bx.torsion();
    let (kind, factor) = match kind {
        EisKind::E if k == 2 => (EisKind::ETilde2, rat_pow(bx.r(), -(k as i64))),
        EisKind::E | EisKind::ETilde2 | EisKind::Ec => (kind, rat_pow(bx.r(), -(k as i64))),
        EisKind::F | EisKind::Fc => (kind, rat_pow(bx.r(), k as i64 - 2)),
    };
    let id = EisId { kind, k, alpha, beta, c };
    Ok(scale_series(&eis_qexp(&id, bound)?, &factor))
}

/// (1/(j−1)!)·zeis_box(Fc, k−j, box1)·zeis_box(Ec, j, box2).
#[allow(clippy::too_many_arguments)]
pub fn zeis_cd_box(k: u32, j: u32, c: UnitAction, d: UnitAction, box1: &BoxQ2, box2: &BoxQ2, bound: &Rat) -> Result<QExp<CycloNum>, EisError> {
    if k < 2 || j < 1 || j >= k {
        return Err(EisError::InvalidId(format!("need k >= 2 and 1 <= j <= k-1, got k={k}, j={j}")));
    }
    let f = zeis_box(EisKind::Fc, k - j, box1, Some(c), bound)?;
    let e = zeis_box(EisKind::Ec, j, box2, Some(d), bound)?;
    let inv_fact = Rat::new(One::one(), factorial(j as u64 - 1));
    Ok(scale_series(&f.mul(&e), &inv_fact))
}

/// Σ_{i < p^n} E^{(j)}_{(γ+iM)/(Mp^n), δ/M}(p^n τ), which should equal E^{(j)}_{γ/M, δ/M}(τ).
#[allow(clippy::too_many_arguments)]
pub fn final_sum(j: u32, gamma: i64, delta: i64, m: u64, p: u64, n: u32, bound: &Rat) -> Result<(QExp<CycloNum>, QExp<CycloNum>), EisError> {
    let pn = p.pow(n) as i64;
    let level = m as i64 * pn;
    let kind = if j == 2 { EisKind::ETilde2 } else { EisKind::E };
    let beta = TorsionPoint::new(delta, m as i64);
    let inner = bound / rat_int(pn);
    let mut parts = Vec::new();
    for i in 0..pn {
        let alpha = TorsionPoint::new(gamma + i * m as i64, level);
        parts.push(eis_qexp(&EisId::new(kind, j, alpha, beta), &inner)?.dilate(pn as u64));
    }
    let lhs = sum_series(parts, 1, bound);
    let rhs = eis_qexp(&EisId::new(kind, j, TorsionPoint::new(gamma, m as i64), beta), bound)?;
    Ok((lhs, rhs))
}
