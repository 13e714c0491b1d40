//! Truncated calculus in the variables Y = q̃^{p^n}, q̃_M, t and T with the
//! action of the group of pairs (u, v), its two derivations, log-theta
//! functions with a formal period ℓ = log q̃_M, the degree-2 bracket and the
//! reduction of Amice-twisted products to the residue line.
//!
//! Elements are exact: coefficients lie in ℚ(ζ_M) and the parameters u, v of
//! the group are either rationals or jets in four formal variables U, V, X, Y
//! truncated at a fixed total degree. The variable Y is inert under the
//! group, as is the weight variable, which is carried as a symbolic factor.
//!
//! Composition is on the right: acting by g₁ and then by g₂ is acting by
//! g₁g₂ with (u₁,v₁)(u₂,v₂) = (e^{v₂}u₁+u₂, v₁+v₂).

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::{binom_rat, factorial, is_prime, rat, rat_int, rat_pow, vp_rat, Rat};
use crate::cyclotomic::CycloNum;
use crate::eisenstein::{theta_dlog_pow, EisError};
use crate::qseries::QExp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CocycleError {
    #[error("invalid ring parameters: {0}")]
    Domain(String),
    #[error("sector violation: {0}")]
    Sector(String),
    #[error("monomial {0} lies outside the truncation")]
    Truncation(String),
    #[error("group element needs u ≡ 0 mod M and v formal without constant term: {0}")]
    Group(String),
    #[error("reduction step at t^{s} divides by j + 1 − s = 0")]
    ExcludedStep { s: u32 },
    #[error("element has a term below t^{0}")]
    TDivision(u32),
    #[error(transparent)]
    Eis(#[from] EisError),
}

/// The four formal variables; σ = (U, V) and τ = (X, Y) in brackets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formal {
    U,
    V,
    X,
    Y,
}

impl Formal {
    fn index(self) -> usize {
        match self {
            Formal::U => 0,
            Formal::V => 1,
            Formal::X => 2,
            Formal::Y => 3,
        }
    }

    pub fn jet(self) -> Jet {
        let mut j = [0u8; 4];
        j[self.index()] = 1;
        j
    }
}

/// Exponents of U, V, X, Y.
pub type Jet = [u8; 4];

pub const JET_ONE: Jet = [0; 4];

fn jet_degree(j: &Jet) -> u32 {
    j.iter().map(|&d| d as u32).sum()
}

fn jet_add(a: &Jet, b: &Jet) -> Jet {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Y^y q̃_M^x t^s T^e times a monomial in the formal variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    pub y: i64,
    pub x: i64,
    pub s: u32,
    pub e: u32,
    pub jet: Jet,
}

impl Mono {
    pub fn new(y: i64, x: i64, s: u32, e: u32) -> Self {
        Mono { y, x, s, e, jet: JET_ONE }
    }

    pub fn with_jet(self, jet: Jet) -> Self {
        Mono { jet, ..self }
    }

    fn label(&self) -> String {
        format!("Y^{} q^{} t^{} T^{} jet {:?}", self.y, self.x, self.s, self.e, self.jet)
    }
}

/// Truncation orders: q̃_M-weight at most ⌊B_q·M⌋, t-degree below B_t,
/// T-degree below B_T and jets of total degree at most `jet`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub q: Rat,
    pub t: u32,
    pub big_t: u32,
    pub jet: u32,
}

impl Bounds {
    pub fn new(q: Rat, t: u32, big_t: u32, jet: u32) -> Self {
        Bounds { q, t, big_t, jet }
    }
}

/// Ring context. The twist w is the j of the module 𝐃_{1,j}: the group acts
/// on its T-part through e^{−vw}(1+T)^u 𝒜((1+T)^{e^v}−1).
#[derive(Clone, Debug, PartialEq)]
pub struct TruncRing {
    p: u64,
    level: u64,
    m: u32,
    n: u32,
    twist: i64,
    q_weight: i64,
    bounds: Bounds,
}

impl TruncRing {
    /// Requires M = p^m with m ≥ 1, so that ζ_M^u = 1 for u ∈ p^mℤ_p.
    pub fn new(p: u64, level: u64, n: u32, twist: i64, bounds: Bounds) -> Result<Self, CocycleError> {
        if !is_prime(p) {
            return Err(CocycleError::Domain(format!("{p} is not prime")));
        }
        let mut m = 0;
        let mut rest = level;
        while rest > 1 && rest.is_multiple_of(p) {
            rest /= p;
            m += 1;
        }
        if m == 0 || rest != 1 {
            return Err(CocycleError::Domain(format!("M = {level} is not a positive power of {p}")));
        }
        if bounds.t == 0 || bounds.big_t == 0 || bounds.q.is_negative() {
            return Err(CocycleError::Domain("empty truncation".into()));
        }
        let q_weight = (&bounds.q * rat_int(level as i64)).floor().to_integer();
        let q_weight: i64 = q_weight.try_into().map_err(|_| CocycleError::Domain("q-bound too large".into()))?;
        Ok(TruncRing { p, level, m, n, twist, q_weight, bounds })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn twist(&self) -> i64 {
        self.twist
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Same ring with another twist.
    pub fn with_twist(&self, twist: i64) -> Self {
        TruncRing { twist, ..self.clone() }
    }

    /// Same ring with another jet degree.
    pub fn with_jet_degree(&self, jet: u32) -> Self {
        let mut r = self.clone();
        r.bounds.jet = jet;
        r
    }

    /// q̃_M-weight of Y = q̃^{p^n}.
    pub fn y_weight(&self) -> i64 {
        self.level as i64 * (self.p as i64).pow(self.n)
    }

    /// p^m.
    pub fn pm(&self) -> Rat {
        rat_int((self.p as i64).pow(self.m))
    }

    pub fn keeps(&self, k: &Mono) -> bool {
        k.y * self.y_weight() + k.x <= self.q_weight
            && k.s < self.bounds.t
            && k.e < self.bounds.big_t
            && jet_degree(&k.jet) <= self.bounds.jet
    }

    fn caps(&self) -> Caps {
        Caps { jet: self.bounds.jet, t: self.bounds.t, big_t: self.bounds.big_t }
    }

    pub fn zero(&self) -> Elt {
        Elt::zero(self.level)
    }

    pub fn monomial(&self, k: Mono, c: CycloNum) -> Result<Elt, CocycleError> {
        if !self.keeps(&k) {
            return Err(CocycleError::Truncation(k.label()));
        }
        let mut out = self.zero();
        out.add_term(k, c);
        Ok(out)
    }

    pub fn rat_monomial(&self, k: Mono, c: Rat) -> Result<Elt, CocycleError> {
        self.monomial(k, CycloNum::from_rat(self.level, c))
    }

    fn push(&self, out: &mut Elt, k: Mono, c: CycloNum) {
        if self.keeps(&k) {
            out.add_term(k, c);
        }
    }

    pub fn mul(&self, a: &Elt, b: &Elt) -> Elt {
        let mut out = self.zero();
        let yw = self.y_weight();
        for (ka, ca) in &a.terms {
            let wa = ka.y * yw + ka.x;
            let da = jet_degree(&ka.jet);
            for (kb, cb) in &b.terms {
                if ka.s + kb.s >= self.bounds.t
                    || ka.e + kb.e >= self.bounds.big_t
                    || da + jet_degree(&kb.jet) > self.bounds.jet
                    || wa + kb.y * yw + kb.x > self.q_weight
                {
                    continue;
                }
                let k = Mono { y: ka.y + kb.y, x: ka.x + kb.x, s: ka.s + kb.s, e: ka.e + kb.e, jet: jet_add(&ka.jet, &kb.jet) };
                out.add_term(k, ca.mul(cb));
            }
        }
        out
    }

    /// Coefficients of log(1+T) below T^{B_T}.
    fn log1p(&self) -> Vec<Rat> {
        (0..self.bounds.big_t as i64)
            .map(|i| if i == 0 { Rat::zero() } else { rat(if i % 2 == 1 { 1 } else { -1 }, i) })
            .collect()
    }

    /// ∂_{m,1} on 𝔎̃ ⊗ 𝐃: q̃_M ↦ (p^m t/M)q̃_M, t ↦ 0, Y ↦ 0, and
    /// multiplication by p^m log(1+T) on the 𝐃-part. Every element is read as
    /// f ⊗ 𝒜 with 𝒜 a polynomial in T, so a T-free term is f ⊗ 1.
    pub fn d1(&self, x: &Elt) -> Elt {
        self.d1_impl(x, true)
    }

    /// ∂_{m,2} on 𝔎̃ ⊗ 𝐃: t ↦ p^m t, q̃_M ↦ 0, Y ↦ 0, and on the 𝐃-part
    /// T^i ↦ p^m(i(1+T)T^{i−1}log(1+T) − wT^i).
    pub fn d2(&self, x: &Elt) -> Elt {
        self.d2_impl(x, true)
    }

    /// ∂_{m,1} on the coefficient ring 𝔎̃ (T-free elements).
    pub fn d1_coeff(&self, x: &Elt) -> Elt {
        self.d1_impl(x, false)
    }

    /// ∂_{m,2} on the coefficient ring 𝔎̃ (T-free elements).
    pub fn d2_coeff(&self, x: &Elt) -> Elt {
        self.d2_impl(x, false)
    }

    fn d1_impl(&self, x: &Elt, module: bool) -> Elt {
        let pm = self.pm();
        let log = self.log1p();
        let mut out = self.zero();
        for (k, c) in &x.terms {
            if k.x != 0 {
                let f = &pm * rat(k.x, self.level as i64);
                self.push(&mut out, Mono { s: k.s + 1, ..*k }, c.scale(&f));
            }
            if module {
                for (i, l) in log.iter().enumerate().skip(1) {
                    self.push(&mut out, Mono { e: k.e + i as u32, ..*k }, c.scale(&(&pm * l)));
                }
            }
        }
        out
    }

    fn d2_impl(&self, x: &Elt, module: bool) -> Elt {
        let pm = self.pm();
        let log = self.log1p();
        let twist = if module { self.twist } else { 0 };
        let mut out = self.zero();
        for (k, c) in &x.terms {
            let diag = &pm * rat_int(k.s as i64 - twist);
            if !diag.is_zero() {
                self.push(&mut out, *k, c.scale(&diag));
            }
            if module && k.e > 0 {
                let ie = &pm * rat_int(k.e as i64);
                for (i, l) in log.iter().enumerate().skip(1) {
                    let f = &ie * l;
                    self.push(&mut out, Mono { e: k.e - 1 + i as u32, ..*k }, c.scale(&f));
                    self.push(&mut out, Mono { e: k.e + i as u32, ..*k }, c.scale(&f));
                }
            }
        }
        out
    }

    /// ∂_{m,2} − p^m on 𝔎̃ ⊗ 𝐃.
    pub fn d2_shifted(&self, x: &Elt) -> Elt {
        self.d2(x).sub(&x.scale(&self.pm()))
    }

    /// Right action of g on 𝔎̃ ⊗ 𝐃: σ(q̃_M) = q̃_M exp(ut/M), σ(t) = e^v t,
    /// and (u,v)·𝒜(T) = e^{−vw}(1+T)^u 𝒜((1+T)^{e^v}−1).
    pub fn act(&self, g: &GroupElt, x: &Elt) -> Result<Elt, CocycleError> {
        self.act_impl(g, x, true)
    }

    /// Right action of g on the coefficient ring 𝔎̃.
    pub fn act_coeff(&self, g: &GroupElt, x: &Elt) -> Result<Elt, CocycleError> {
        self.act_impl(g, x, false)
    }

    fn act_impl(&self, g: &GroupElt, x: &Elt, module: bool) -> Result<Elt, CocycleError> {
        g.validate(self)?;
        let caps = self.caps();
        let log = Scalars::from_t_poly(&self.log1p());
        let exp_v = g.v.exp(&caps);
        let u_log = if module { g.u.mul(&log, &caps).exp(&caps) } else { Scalars::one() };
        let shifted = exp_v.mul(&log, &caps).exp(&caps).sub(&Scalars::one());
        let twist = if module { self.twist } else { 0 };
        let mut cache: BTreeMap<(i64, u32, u32), Scalars> = BTreeMap::new();
        let mut out = self.zero();
        for (k, c) in &x.terms {
            let factor = cache.entry((k.x, k.s, k.e)).or_insert_with(|| {
                let ut = g.u.mul(&Scalars::t_power(1), &caps).scale(&rat(k.x, self.level as i64));
                let scale_t = g.v.scale(&rat_int(k.s as i64 - twist)).exp(&caps);
                let mut f = ut.exp(&caps).mul(&scale_t, &caps).mul(&Scalars::t_power(k.s), &caps).mul(&u_log, &caps);
                for _ in 0..k.e {
                    f = f.mul(&shifted, &caps);
                }
                f
            });
            for ((jet, s, e), r) in &factor.0 {
                let jet = jet_add(jet, &k.jet);
                self.push(&mut out, Mono { s: *s, e: *e, jet, ..*k }, c.scale(r));
            }
        }
        Ok(out)
    }

    /// Action on a log-theta element: ℓ ↦ ℓ + u·t/M besides the series part.
    pub fn act_log(&self, g: &GroupElt, x: &LogSiegel) -> Result<LogSiegel, CocycleError> {
        let mut series = self.act_coeff(g, &x.series)?;
        if !x.coeff_lq.is_zero() {
            let f = &x.coeff_lq / rat_int(self.level as i64);
            for ((jet, _, _), r) in &g.u.0 {
                self.push(&mut series, Mono::new(0, 0, 1, 0).with_jet(*jet), CycloNum::from_rat(self.level, r * &f));
            }
        }
        Ok(LogSiegel { coeff_lq: x.coeff_lq.clone(), series, params: x.params })
    }
}

#[derive(Clone, Copy, Debug)]
struct Caps {
    jet: u32,
    t: u32,
    big_t: u32,
}

/// Rational scalars in the formal variables, t and T, used for the action.
#[derive(Clone, Debug, PartialEq, Default)]
struct Scalars(BTreeMap<(Jet, u32, u32), Rat>);

impl Scalars {
    fn one() -> Self {
        Self::monomial(JET_ONE, 0, 0, Rat::one())
    }

    fn monomial(jet: Jet, s: u32, e: u32, c: Rat) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert((jet, s, e), c);
        }
        Scalars(m)
    }

    fn t_power(s: u32) -> Self {
        Self::monomial(JET_ONE, s, 0, Rat::one())
    }

    fn from_t_poly(c: &[Rat]) -> Self {
        let mut out = Scalars::default();
        for (i, x) in c.iter().enumerate() {
            out.add_term((JET_ONE, 0, i as u32), x.clone());
        }
        out
    }

    fn add_term(&mut self, k: (Jet, u32, u32), c: Rat) {
        let slot = self.0.entry(k).or_insert_with(Rat::zero);
        *slot += c;
        if slot.is_zero() {
            self.0.remove(&k);
        }
    }

    fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &o.0 {
            out.add_term(*k, c.clone());
        }
        out
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-Rat::one()))
    }

    fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return Scalars::default();
        }
        Scalars(self.0.iter().map(|(k, c)| (*k, c * r)).collect())
    }

    fn mul(&self, o: &Self, caps: &Caps) -> Self {
        let mut out = Scalars::default();
        for ((ja, sa, ea), ca) in &self.0 {
            for ((jb, sb, eb), cb) in &o.0 {
                let (s, e) = (sa + sb, ea + eb);
                if s >= caps.t || e >= caps.big_t || jet_degree(ja) + jet_degree(jb) > caps.jet {
                    continue;
                }
                out.add_term((jet_add(ja, jb), s, e), ca * cb);
            }
        }
        out
    }

    fn constant(&self) -> Rat {
        self.0.get(&(JET_ONE, 0, 0)).cloned().unwrap_or_else(Rat::zero)
    }

    /// exp of a nilpotent scalar (no constant term).
    fn exp(&self, caps: &Caps) -> Self {
        debug_assert!(self.constant().is_zero());
        let mut out = Scalars::one();
        let mut term = Scalars::one();
        let mut k = 1i64;
        loop {
            term = term.mul(self, caps).scale(&rat(1, k));
            if term.0.is_empty() {
                return out;
            }
            out = out.add(&term);
            k += 1;
        }
    }
}

/// A pair (u, v) whose entries are polynomials in the formal variables.
/// The constant part of u must lie in Mℤ_p; v must have no constant part.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElt {
    u: Scalars,
    v: Scalars,
}

impl GroupElt {
    pub fn identity() -> Self {
        GroupElt { u: Scalars::default(), v: Scalars::default() }
    }

    /// (u, 0) for a rational u.
    pub fn translation(u: Rat) -> Self {
        GroupElt { u: Scalars::monomial(JET_ONE, 0, 0, u), v: Scalars::default() }
    }

    /// (scale·U₁, scale·V₁) for two formal variables.
    pub fn formal(u: Option<Formal>, v: Option<Formal>, scale: &Rat) -> Self {
        let lift = |f: Option<Formal>| match f {
            Some(f) => Scalars::monomial(f.jet(), 0, 0, scale.clone()),
            None => Scalars::default(),
        };
        GroupElt { u: lift(u), v: lift(v) }
    }

    /// u and v from explicit jet coefficients.
    pub fn from_jets(u: &[(Jet, Rat)], v: &[(Jet, Rat)]) -> Self {
        let build = |xs: &[(Jet, Rat)]| {
            let mut s = Scalars::default();
            for (j, c) in xs {
                s.add_term((*j, 0, 0), c.clone());
            }
            s
        };
        GroupElt { u: build(u), v: build(v) }
    }

    fn validate(&self, ring: &TruncRing) -> Result<(), CocycleError> {
        if !self.v.constant().is_zero() {
            return Err(CocycleError::Group("v has a constant term".into()));
        }
        let u0 = self.u.constant();
        if let Some(val) = vp_rat(ring.p, &u0) {
            if val < ring.m as i64 {
                return Err(CocycleError::Group(format!("u = {u0} is not divisible by M")));
            }
        }
        Ok(())
    }

    /// self·other = (e^{v₂}u₁ + u₂, v₁ + v₂).
    pub fn compose(&self, other: &GroupElt, ring: &TruncRing) -> GroupElt {
        let caps = Caps { t: 1, big_t: 1, ..ring.caps() };
        GroupElt { u: other.v.exp(&caps).mul(&self.u, &caps).add(&other.u), v: self.v.add(&other.v) }
    }
}

/// Exact truncated element with coefficients in ℚ(ζ_M).
#[derive(Clone, Debug, PartialEq)]
pub struct Elt {
    level: u64,
    terms: BTreeMap<Mono, CycloNum>,
}

impl Elt {
    pub fn zero(level: u64) -> Self {
        Elt { level, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, k: Mono, c: CycloNum) {
        let c = c.lift(self.level);
        match self.terms.get_mut(&k) {
            Some(slot) => {
                *slot = slot.add(&c);
                if slot.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None if !c.is_zero() => {
                self.terms.insert(k, c);
            }
            None => {}
        }
    }

    pub fn terms(&self) -> &BTreeMap<Mono, CycloNum> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, k: &Mono) -> CycloNum {
        self.terms.get(k).cloned().unwrap_or_else(|| CycloNum::zero(self.level))
    }

    pub fn add(&self, o: &Elt) -> Elt {
        let mut out = self.clone();
        for (k, c) in &o.terms {
            out.add_term(*k, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Elt {
        Elt { level: self.level, terms: self.terms.iter().map(|(k, c)| (*k, c.neg())).collect() }
    }

    pub fn sub(&self, o: &Elt) -> Elt {
        self.add(&o.neg())
    }

    pub fn scale(&self, r: &Rat) -> Elt {
        if r.is_zero() {
            return Elt::zero(self.level);
        }
        Elt { level: self.level, terms: self.terms.iter().map(|(k, c)| (*k, c.scale(r))).collect() }
    }

    /// The coefficient of one formal monomial, as an element without jets.
    pub fn jet_part(&self, jet: Jet) -> Elt {
        let mut out = Elt::zero(self.level);
        for (k, c) in self.terms.iter().filter(|(k, _)| k.jet == jet) {
            out.add_term(k.with_jet(JET_ONE), c.clone());
        }
        out
    }

    /// Terms free of t and T.
    pub fn at_t_zero(&self) -> Elt {
        let mut out = Elt::zero(self.level);
        for (k, c) in self.terms.iter().filter(|(k, _)| k.s == 0 && k.e == 0) {
            out.add_term(*k, c.clone());
        }
        out
    }

    /// Multiplies by t^k.
    pub fn shift_t(&self, k: u32, ring: &TruncRing) -> Elt {
        let mut out = Elt::zero(self.level);
        for (m, c) in &self.terms {
            ring.push(&mut out, Mono { s: m.s + k, ..*m }, c.clone());
        }
        out
    }

    /// Divides by t^k; every term must carry at least t^k.
    pub fn divide_t(&self, k: u32) -> Result<Elt, CocycleError> {
        let mut out = Elt::zero(self.level);
        for (m, c) in &self.terms {
            if m.s < k {
                return Err(CocycleError::TDivision(k));
            }
            out.add_term(Mono { s: m.s - k, ..*m }, c.clone());
        }
        Ok(out)
    }

    /// Smallest p-adic valuation among the ζ_M-coordinates of the coefficients.
    pub fn min_valuation(&self, p: u64) -> Option<i64> {
        self.terms.values().flat_map(|c| c.coeffs().iter().filter_map(|x| vp_rat(p, x))).min()
    }

    /// Evaluation at t = T = 0 and Y = q^{p^n}, q̃_M = q^{1/M}.
    pub fn to_qexp(&self, ring: &TruncRing) -> QExp<CycloNum> {
        let mut out = QExp::new(ring.level, ring.bounds.q.clone());
        for (k, c) in self.terms.iter().filter(|(k, _)| k.s == 0 && k.e == 0 && k.jet == JET_ONE) {
            out.add_term(k.y * ring.y_weight() + k.x, c.clone());
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(k, c)| serde_json::json!({"y": k.y, "x": k.x, "t": k.s, "T": k.e, "jet": k.jet, "coeff": c.to_json()}))
            .collect();
        serde_json::json!({"conductor": self.level, "terms": terms})
    }
}

/// A function of (Y, X) given by a multiple of log X plus Σ g_{y,k} Y^y X^k,
/// where X has q̃_M-weight `weight`. D_2 = X d/dX acts by k.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaLog {
    weight: i64,
    log_x: Rat,
    terms: BTreeMap<(i64, i64), Rat>,
}

impl ThetaLog {
    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn log_x(&self) -> &Rat {
        &self.log_x
    }

    pub fn terms(&self) -> &BTreeMap<(i64, i64), Rat> {
        &self.terms
    }

    fn add_term(&mut self, k: (i64, i64), c: Rat) {
        let slot = self.terms.entry(k).or_insert_with(Rat::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&k);
        }
    }

    /// D_2: the log X part becomes a constant.
    pub fn d2(&self) -> ThetaLog {
        let mut out = ThetaLog { weight: self.weight, log_x: Rat::zero(), terms: BTreeMap::new() };
        for ((y, k), c) in &self.terms {
            out.add_term((*y, *k), c * rat_int(*k));
        }
        out.add_term((0, 0), self.log_x.clone());
        out
    }

    pub fn d2_pow(&self, r: u32) -> ThetaLog {
        (0..r).fold(self.clone(), |acc, _| acc.d2())
    }

    fn scaled(&self, r: &Rat) -> ThetaLog {
        ThetaLog {
            weight: self.weight,
            log_x: &self.log_x * r,
            terms: self.terms.iter().map(|(k, c)| (*k, c * r)).collect(),
        }
    }

    pub fn add(&self, o: &ThetaLog) -> ThetaLog {
        let mut out = self.clone();
        out.log_x += &o.log_x;
        for (k, c) in &o.terms {
            out.add_term(*k, c.clone());
        }
        out
    }
}

/// log θ(Y, X^c) up to inert multiples of log Y, where X has weight a.
/// Writing X^c = Y^s Z with Z of weight ca − s·w_Y in (0, w_Y), the
/// quasi-periodicity θ(Y, YZ) = −Y^{−1/2}Z^{−1}θ(Y, Z) gives
/// log θ(Y, X^c) = −(1/2 + s)·c·log X + Σ log(1 − ·) expansions in Z.
fn log_theta_power(ring: &TruncRing, a: i64, c: i64) -> ThetaLog {
    let yw = ring.y_weight();
    let top = ring.q_weight;
    let s = (c * a).div_euclid(yw);
    let w0 = c * a - s * yw;
    let mut out = ThetaLog { weight: a, log_x: -(rat(1, 2) + rat_int(s)) * rat_int(c), terms: BTreeMap::new() };
    // Z^k has monomial Y^{−sk} X^{ck}
    let push = |out: &mut ThetaLog, ypow: i64, zpow: i64, coeff: Rat| {
        out.add_term((ypow - s * zpow, c * zpow), coeff);
    };
    let mut k = 1;
    while k * w0 <= top {
        push(&mut out, 0, k, -rat(1, k));
        k += 1;
    }
    let mut nn = 1;
    while nn * yw - w0 <= top {
        let mut k = 1;
        while k * (nn * yw - w0) <= top {
            push(&mut out, nn * k, -k, -rat(1, k));
            if k * (nn * yw + w0) <= top {
                push(&mut out, nn * k, k, -rat(1, k));
            }
            k += 1;
        }
        nn += 1;
    }
    out
}

/// log(r_c θ)(Y, X) = c²·log θ(Y, X) − log θ(Y, X^c), with X of weight a.
pub fn log_r_theta(ring: &TruncRing, c: i64, a: i64) -> Result<ThetaLog, CocycleError> {
    let yw = ring.y_weight();
    if a <= 0 || a >= ring.level as i64 {
        return Err(CocycleError::Sector(format!("need 0 < a < M, got a = {a}")));
    }
    if c < 1 || (c * a).rem_euclid(yw) == 0 {
        return Err(CocycleError::Sector(format!("c·a = {} is a multiple of the Y-weight {yw}", c * a)));
    }
    let base = log_theta_power(ring, a, 1).scaled(&rat_int(c * c));
    Ok(base.add(&log_theta_power(ring, a, c).scaled(&-Rat::one())))
}

/// Substitutes X = q̃_M^a ζ_M^b exp(bt/M) into a series without log X part.
pub fn substitute(ring: &TruncRing, f: &ThetaLog, b: i64) -> Result<Elt, CocycleError> {
    if !f.log_x.is_zero() {
        return Err(CocycleError::Domain("series still has a log X part".into()));
    }
    Ok(substitute_series(ring, f, b))
}

fn substitute_series(ring: &TruncRing, f: &ThetaLog, b: i64) -> Elt {
    let lev = ring.level as i64;
    let mut out = ring.zero();
    for ((y, k), g) in &f.terms {
        let base = CycloNum::zeta_pow(ring.level, b * k).scale(g);
        let step = rat(b * k, lev);
        let mut pw = Rat::one();
        for s in 0..ring.bounds.t {
            if s > 0 {
                pw = pw * &step / rat_int(s as i64);
            }
            if pw.is_zero() {
                break;
            }
            ring.push(&mut out, Mono::new(*y, f.weight * k, s, 0), base.scale(&pw));
        }
    }
    out
}

/// A multiple of the formal period ℓ = log q̃_M plus a series.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSiegel {
    coeff_lq: Rat,
    series: Elt,
    params: (i64, i64, i64),
}

impl LogSiegel {
    pub fn new(coeff_lq: Rat, series: Elt) -> Self {
        LogSiegel { coeff_lq, series, params: (0, 0, 0) }
    }

    pub fn coeff_lq(&self) -> &Rat {
        &self.coeff_lq
    }

    pub fn series(&self) -> &Elt {
        &self.series
    }

    /// (c, a, b).
    pub fn params(&self) -> (i64, i64, i64) {
        self.params
    }

    /// self − other, defined when the ℓ-parts agree.
    pub fn minus(&self, other: &LogSiegel) -> Result<Elt, CocycleError> {
        if self.coeff_lq != other.coeff_lq {
            return Err(CocycleError::Domain("difference keeps a multiple of ℓ".into()));
        }
        Ok(self.series.sub(&other.series))
    }
}

/// log((c² − ⟨c⟩)θ(q̃^{p^n}, q̃_M^a ζ̃_M^b)) with log(−1) = 0 and log ζ_M = 0,
/// so that log X = aℓ + bt/M.
pub fn log_siegel(ring: &TruncRing, c: i64, a: i64, b: i64) -> Result<LogSiegel, CocycleError> {
    let f = log_r_theta(ring, c, a)?;
    let mut series = substitute_series(ring, &f, b);
    ring.push(&mut series, Mono::new(0, 0, 1, 0), CycloNum::from_rat(ring.level, &f.log_x * rat(b, ring.level as i64)));
    Ok(LogSiegel { coeff_lq: &f.log_x * rat_int(a), series, params: (c, a, b) })
}

/// D_2^r of log_siegel(c, a, b) as an element.
pub fn dlog_siegel(ring: &TruncRing, c: i64, a: i64, b: i64, r: u32) -> Result<Elt, CocycleError> {
    if r == 0 {
        return Err(CocycleError::Domain("r must be at least 1".into()));
    }
    substitute(ring, &log_r_theta(ring, c, a)?.d2_pow(r), b)
}

/// Degree-2 part of {x₁ ⊗ x₂}_{σ,τ} = (τσ − σ)x₁ · (σ − 1)x₂ with σ = (U, V)
/// and τ = (X, Y) formal; τσ means σ applied first.
#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    level: u64,
    tensor: BTreeMap<Jet, Elt>,
}

impl Bracket {
    /// c_{i,j,k,l}: the coefficient of u^i v^j x^k y^l.
    pub fn coeff(&self, jet: Jet) -> Elt {
        self.tensor.get(&jet).cloned().unwrap_or_else(|| Elt::zero(self.level))
    }

    pub fn tensor(&self) -> &BTreeMap<Jet, Elt> {
        &self.tensor
    }

    pub fn from_tensor(level: u64, tensor: BTreeMap<Jet, Elt>) -> Self {
        Bracket { level, tensor }
    }
}

pub fn bracket(ring: &TruncRing, x1: &LogSiegel, x2: &LogSiegel) -> Result<Bracket, CocycleError> {
    let ring = ring.with_jet_degree(2);
    let one = Rat::one();
    let sigma = GroupElt::formal(Some(Formal::U), Some(Formal::V), &one);
    let tau = GroupElt::formal(Some(Formal::X), Some(Formal::Y), &one);
    let s1 = ring.act_log(&sigma, x1)?;
    let first = ring.act_log(&tau, &s1)?.minus(&s1)?;
    let second = ring.act_log(&sigma, x2)?.minus(x2)?;
    let mut tensor: BTreeMap<Jet, Elt> = BTreeMap::new();
    for (k, c) in ring.mul(&first, &second).terms() {
        tensor.entry(k.jet).or_insert_with(|| ring.zero()).add_term(k.with_jet(JET_ONE), c.clone());
    }
    Ok(Bracket { level: ring.level, tensor })
}

const UY: Jet = [1, 0, 0, 1];
const VX: Jet = [0, 1, 1, 0];

/// δ̃⁽²⁾ = c_{1,0,0,1} − c_{0,1,1,0}.
pub fn delta_tilde2(br: &Bracket) -> Elt {
    br.coeff(UY).sub(&br.coeff(VX))
}

/// δ⁽²⁾ = p^{2m}(c_{1,0,0,1} − c_{0,1,1,0}).
pub fn delta2(ring: &TruncRing, br: &Bracket) -> Elt {
    let pm = ring.pm();
    delta_tilde2(br).scale(&(&pm * &pm))
}

/// Coboundary term ((a₀d₀ − b₀c₀)t²/M²)·D₂log(r_cθ_{a₀,b₀})·D₂log(r_dθ_{c₀,d₀}).
pub fn two_cocycle_display(ring: &TruncRing, c: i64, d: i64, gamma: [i64; 4]) -> Result<Elt, CocycleError> {
    let [a0, b0, c0, d0] = gamma;
    let f = dlog_siegel(ring, c, a0, b0, 1)?;
    let g = dlog_siegel(ring, d, c0, d0, 1)?;
    let lev2 = rat_int((ring.level * ring.level) as i64);
    Ok(ring.mul(&f, &g).shift_t(2, ring).scale(&(rat_int(a0 * d0 - b0 * c0) / lev2)))
}

/// 𝒜_{γν_w}/κ(a) = det^{−w}(1+T)^{b/a} for γ = (a b; c d) and the ring twist w.
pub fn gamma_nu_transform(ring: &TruncRing, gamma: [i64; 4]) -> Result<Elt, CocycleError> {
    let [a, b, c, d] = gamma;
    let det = a * d - b * c;
    if a % ring.p as i64 == 0 || det % ring.p as i64 == 0 {
        return Err(CocycleError::Domain(format!("a = {a} and det = {det} must be p-units")));
    }
    let scale = rat_pow(&rat_int(det), -ring.twist);
    let expo = rat(b, a);
    let mut out = ring.zero();
    for e in 0..ring.bounds.big_t {
        ring.push(&mut out, Mono::new(0, 0, 0, e), CycloNum::from_rat(ring.level, &scale * binom_rat(&expo, e as usize)));
    }
    Ok(out)
}

/// Both sides of the vanishing combination for 𝒜 = 𝒜_{γν_w}:
/// (a(p^m − ∂₂) + b∂₁)(𝒜 t^s f g) and
/// (a(w+1−s)p^m t^s f g − p^m(ad−bc)t^{s+1}/M f·D₂g)𝒜,
/// with f = f(Y, q̃_M^a ζ̃_M^b) and g = g(Y, q̃_M^c ζ̃_M^d).
pub fn negligible_sides(ring: &TruncRing, gamma: [i64; 4], s: u32, f: &ThetaLog, g: &ThetaLog) -> Result<(Elt, Elt), CocycleError> {
    let [a, b, c, d] = gamma;
    if f.weight != a || g.weight != c {
        return Err(CocycleError::Domain("f and g must be built at the weights a and c of γ".into()));
    }
    let amice = gamma_nu_transform(ring, gamma)?;
    let fs = substitute(ring, f, b)?;
    let gs = substitute(ring, g, d)?;
    let dg = substitute(ring, &g.d2(), d)?;
    let pm = ring.pm();
    let fg = ring.mul(&fs, &gs);
    let x = ring.mul(&amice, &fg).shift_t(s, ring);
    let lhs = x.scale(&pm).sub(&ring.d2(&x)).scale(&rat_int(a)).add(&ring.d1(&x).scale(&rat_int(b)));
    let first = fg.shift_t(s, ring).scale(&(rat_int(a * (ring.twist + 1 - s as i64)) * &pm));
    let second = ring.mul(&fs, &dg).shift_t(s + 1, ring).scale(&(&pm * rat(a * d - b * c, ring.level as i64)));
    let rhs = ring.mul(&first.sub(&second), &amice);
    Ok((lhs, rhs))
}

/// One rewriting step 𝒜t^s f g ≡ ((ad−bc)/(aM(j+1−s)))·𝒜t^{s+1} f·D₂g.
pub fn negligible_step(s: u32, j: u32, a: i64, det: i64, level: u64) -> Result<Rat, CocycleError> {
    let gap = j as i64 + 1 - s as i64;
    if gap == 0 {
        return Err(CocycleError::ExcludedStep { s });
    }
    Ok(rat(det, a * level as i64 * gap))
}

/// The element 𝒜t^{s+1} f·D₂g scaled by the step factor.
pub fn negligible_reduce(ring: &TruncRing, gamma: [i64; 4], s: u32, f: &ThetaLog, g: &ThetaLog) -> Result<Elt, CocycleError> {
    let [a, b, c, d] = gamma;
    let j = u32::try_from(ring.twist).map_err(|_| CocycleError::Domain("twist must be non-negative".into()))?;
    let factor = negligible_step(s, j, a, a * d - b * c, ring.level)?;
    let amice = gamma_nu_transform(ring, gamma)?;
    let prod = ring.mul(&substitute(ring, f, b)?, &substitute(ring, &g.d2(), d)?);
    Ok(ring.mul(&amice, &prod).shift_t(s + 1, ring).scale(&factor))
}

/// Iterated rewriting of (det·t²/M²)𝒜_{γν_j} f·g up to t^{j+1} f·D₂^j g.
#[derive(Clone, Debug, PartialEq)]
pub struct NegligibleChain {
    pub steps: u32,
    pub factor: Rat,
    pub t_power: u32,
    pub dlog_power: u32,
}

impl NegligibleChain {
    /// The factor once 𝒜_{γν_j}/κ(a) = det^{−j}(1+T)^{b/a} is unfolded.
    pub fn residue_scalar(&self, det: i64, j: u32) -> Rat {
        &self.factor * rat_pow(&rat_int(det), -(j as i64))
    }
}

pub fn negligible_chain(j: u32, a: i64, det: i64, level: u64) -> Result<NegligibleChain, CocycleError> {
    let mut chain = NegligibleChain { steps: 0, factor: rat(det, (level * level) as i64), t_power: 2, dlog_power: 1 };
    for s in 2..=j {
        chain.factor *= negligible_step(s, j, a, det, level)?;
        chain.steps += 1;
        chain.t_power += 1;
        chain.dlog_power += 1;
    }
    Ok(chain)
}

/// κ(a₀)/(a₀^{j−1}M^{j+1}(j−1)!) without the κ factor.
pub fn olla_scalar(j: u32, a0: i64, level: u64) -> Rat {
    let denom = rat_pow(&rat_int(a0), j as i64 - 1) * rat_pow(&rat_int(level as i64), j as i64 + 1) * Rat::from_integer(factorial(j as u64 - 1));
    denom.recip()
}

/// A residue: κ(kappa_arg) times a series in q̃_M and Y.
#[derive(Clone, Debug, PartialEq)]
pub struct OllaValue {
    pub kappa_arg: i64,
    pub series: Elt,
}

/// (κ(a₀)/(a₀^{j−1}M^{j+1}(j−1)!))·D₂log(r_cθ_{a₀,b₀})·D₂^j log(r_dθ_{c₀,d₀}) at t = 0.
pub fn olla_res(ring: &TruncRing, j: u32, gamma: [i64; 4], c: i64, d: i64) -> Result<OllaValue, CocycleError> {
    let [a0, b0, c0, d0] = gamma;
    let f = dlog_siegel(ring, c, a0, b0, 1)?.at_t_zero();
    let g = dlog_siegel(ring, d, c0, d0, j)?.at_t_zero();
    Ok(OllaValue { kappa_arg: a0, series: ring.mul(&f, &g).scale(&olla_scalar(j, a0, ring.level)) })
}

/// The twisted product with t² dropped: 𝒜_{γν_{j−2}}·det^{−1}/M²·D₂log·D₂log,
/// over κ(a₀), in a ring of twist j − 2.
pub fn olla_input(ring: &TruncRing, gamma: [i64; 4], c: i64, d: i64) -> Result<Elt, CocycleError> {
    let [a0, b0, c0, d0] = gamma;
    let det = a0 * d0 - b0 * c0;
    let amice = gamma_nu_transform(ring, gamma)?;
    let f = dlog_siegel(ring, c, a0, b0, 1)?;
    let g = dlog_siegel(ring, d, c0, d0, 1)?;
    let lev2 = (ring.level * ring.level) as i64;
    Ok(ring.mul(&amice, &ring.mul(&f, &g)).scale(&rat(1, det * lev2)))
}

/// Result of the membership solve: whether a residual lies in the span of
/// ∂_{m,1}(monomial) and (∂_{m,2} − p^m)(monomial), block by block.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipCertificate {
    pub precision: i64,
    pub slack: i64,
    pub blocks: usize,
    pub unsolved: Vec<(i64, i64)>,
    /// Smallest v_p(multiplier) − v_p(residual block) over all blocks.
    pub worst_loss: Option<i64>,
}

impl MembershipCertificate {
    pub fn holds(&self) -> bool {
        self.unsolved.is_empty() && self.worst_loss.is_none_or(|l| l >= -self.slack)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "holds": self.holds(),
            "precision": self.precision,
            "slack": self.slack,
            "blocks": self.blocks,
            "unsolved_blocks": self.unsolved,
            "worst_loss": self.worst_loss,
        })
    }
}

/// A solution of Σ z_i·cols_i = target of least denominator at p, found by
/// Smith reduction over ℤ_(p): the pivot is always an entry of least
/// valuation, so the row and column operations stay invertible over ℤ_(p).
fn solve_in_span(p: u64, cols: &[Vec<Rat>], target: &[Rat]) -> Option<Vec<Rat>> {
    let rows = target.len();
    let ncols = cols.len();
    let mut a: Vec<Vec<Rat>> = (0..rows).map(|r| cols.iter().map(|c| c[r].clone()).collect()).collect();
    let mut rhs = target.to_vec();
    let mut q: Vec<Vec<Rat>> = (0..ncols).map(|i| (0..ncols).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect()).collect();
    let mut rank = 0;
    while rank < rows.min(ncols) {
        let pivot = (rank..rows)
            .flat_map(|i| (rank..ncols).map(move |j| (i, j)))
            .filter_map(|(i, j)| vp_rat(p, &a[i][j]).map(|v| (v, i, j)))
            .min();
        let Some((_, pi, pj)) = pivot else { break };
        a.swap(rank, pi);
        rhs.swap(rank, pi);
        for row in a.iter_mut() {
            row.swap(rank, pj);
        }
        for row in q.iter_mut() {
            row.swap(rank, pj);
        }
        let piv = a[rank][rank].clone();
        for i in 0..rows {
            if i != rank && !a[i][rank].is_zero() {
                let f = &a[i][rank] / &piv;
                let pivot_row = a[rank].clone();
                for (x, y) in a[i].iter_mut().zip(&pivot_row).skip(rank) {
                    *x -= &f * y;
                }
                let sub = &f * &rhs[rank];
                rhs[i] -= sub;
            }
        }
        for j in rank + 1..ncols {
            if !a[rank][j].is_zero() {
                let f = &a[rank][j] / &piv;
                a[rank][j] = Rat::zero();
                for row in q.iter_mut() {
                    let sub = &f * &row[rank];
                    row[j] -= sub;
                }
            }
        }
        rank += 1;
    }
    if rhs[rank..].iter().any(|x| !x.is_zero()) {
        return None;
    }
    let y: Vec<Rat> = (0..ncols).map(|i| if i < rank { &rhs[i] / &a[i][i] } else { Rat::zero() }).collect();
    let z: Vec<Rat> = q.iter().map(|row| row.iter().zip(&y).map(|(c, v)| c * v).sum()).collect();
    let check: Vec<Rat> = (0..rows).map(|r| cols.iter().zip(&z).map(|(c, v)| &c[r] * v).sum()).collect();
    (check == target).then_some(z)
}

/// Solves, for each (Y, q̃_M)-block of a jet-free residual, the linear system
/// against the images of all block monomials t^sT^e. The solve is exact over
/// ℚ and coordinatewise in the ζ_M-basis, the operators being rational.
pub fn membership(ring: &TruncRing, residual: &Elt, precision: i64) -> MembershipCertificate {
    let phi = CycloNum::zero(ring.level).coeffs().len();
    let mut blocks: BTreeMap<(i64, i64), Vec<(Mono, &CycloNum)>> = BTreeMap::new();
    for (k, c) in residual.terms() {
        blocks.entry((k.y, k.x)).or_default().push((*k, c));
    }
    let mut cert = MembershipCertificate { precision, slack: 2 * ring.m as i64, blocks: blocks.len(), unsolved: Vec::new(), worst_loss: None };
    for ((y, x), entries) in &blocks {
        let basis: Vec<Mono> =
            (0..ring.bounds.t).flat_map(|s| (0..ring.bounds.big_t).map(move |e| Mono::new(*y, *x, s, e))).collect();
        let index = |k: &Mono| basis.iter().position(|b| b == k);
        let mut cols = Vec::new();
        for b in &basis {
            let mono = ring.rat_monomial(*b, Rat::one()).expect("block monomial inside truncation");
            for img in [ring.d1(&mono), ring.d2_shifted(&mono)] {
                let mut col = vec![Rat::zero(); basis.len()];
                for (k, c) in img.terms() {
                    if let Some(i) = index(k) {
                        col[i] = c.as_rat().expect("derivations have rational coefficients");
                    }
                }
                cols.push(col);
            }
        }
        let mut loss: Option<i64> = None;
        let mut solved = true;
        for coord in 0..phi {
            let mut target = vec![Rat::zero(); basis.len()];
            for (k, c) in entries {
                match index(&k.with_jet(JET_ONE)) {
                    Some(i) if k.jet == JET_ONE => target[i] = c.coeffs()[coord].clone(),
                    _ => solved = false,
                }
            }
            let Some(t_val) = target.iter().filter_map(|v| vp_rat(ring.p, v)).min() else { continue };
            match solve_in_span(ring.p, &cols, &target) {
                Some(z) => {
                    if let Some(z_val) = z.iter().filter_map(|v| vp_rat(ring.p, v)).min() {
                        let l = z_val - t_val;
                        loss = Some(loss.map_or(l, |o: i64| o.min(l)));
                    }
                }
                None => solved = false,
            }
        }
        if !solved {
            cert.unsolved.push((*y, *x));
        }
        if let Some(l) = loss {
            cert.worst_loss = Some(cert.worst_loss.map_or(l, |o| o.min(l)));
        }
    }
    cert
}

/// Parameters of the cocycle checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CocycleConfig {
    pub p: u64,
    pub level: u64,
    pub n: u32,
    pub j: u32,
    pub gamma: [i64; 4],
    pub c: i64,
    pub d: i64,
    pub bounds: Bounds,
    pub precision: i64,
}

impl CocycleConfig {
    /// M = 5, n = 0, γ = (1 1; 0 1)(1 0; 2 1) = (3 1; 2 1), c = d = 2 and
    /// truncation (4, j+2, 2).
    pub fn standard(j: u32) -> Self {
        CocycleConfig {
            p: 5,
            level: 5,
            n: 0,
            j,
            gamma: [3, 1, 2, 1],
            c: 2,
            d: 2,
            bounds: Bounds::new(rat_int(4), j + 2, 2, 0),
            precision: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CocycleReport {
    pub j: u32,
    pub monomial_formulas: bool,
    pub lemme_t: bool,
    pub leibniz: bool,
    pub taylor: bool,
    pub group_law: bool,
    pub commutator_sign: Option<i64>,
    pub gamma_nu_derivatives: bool,
    pub negligible_identity: bool,
    pub chain_matches_residue_scalar: bool,
    pub dlog_matches_theta: bool,
    pub delta_tilde_vs_display: i64,
    pub membership: MembershipCertificate,
    pub membership_from_delta_tilde: MembershipCertificate,
    pub membership_from_delta2: MembershipCertificate,
}

impl CocycleReport {
    /// The checks of the derivation calculus and the residue certificate.
    pub fn holds(&self) -> bool {
        self.monomial_formulas
            && self.lemme_t
            && self.leibniz
            && self.taylor
            && self.group_law
            && self.commutator_sign.is_some()
            && self.gamma_nu_derivatives
            && self.negligible_identity
            && self.chain_matches_residue_scalar
            && self.dlog_matches_theta
            && self.membership.holds()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "j": self.j,
            "holds": self.holds(),
            "monomial_formulas": self.monomial_formulas,
            "lemme_t": self.lemme_t,
            "leibniz": self.leibniz,
            "taylor": self.taylor,
            "group_law": self.group_law,
            "commutator_sign": self.commutator_sign,
            "gamma_nu_derivatives": self.gamma_nu_derivatives,
            "negligible_identity": self.negligible_identity,
            "chain_matches_residue_scalar": self.chain_matches_residue_scalar,
            "dlog_matches_theta": self.dlog_matches_theta,
            "delta_tilde_vs_display": self.delta_tilde_vs_display,
            "membership": self.membership.to_json(),
            "membership_from_delta_tilde": self.membership_from_delta_tilde.to_json(),
            "membership_from_delta2": self.membership_from_delta2.to_json(),
        })
    }
}

fn sample_elements(ring: &TruncRing) -> Vec<Elt> {
    let lev = ring.level;
    let mut out = Vec::new();
    let picks = [(0, 1, 0, 0, 1, 2), (0, 2, 1, 1, 3, -1), (1, -1, 0, 1, -2, 5), (0, 3, 2, 0, 1, 7), (0, 0, 1, 2, 4, 3)];
    for (y, x, s, e, num, zeta) in picks {
        let k = Mono::new(y, x, s.min(ring.bounds.t - 1), e.min(ring.bounds.big_t - 1));
        if !ring.keeps(&k) {
            continue;
        }
        let c = CycloNum::zeta_pow(lev, zeta).scale(&rat(num, 3)).add(&CycloNum::from_rat(lev, rat(1, 2)));
        out.push(ring.monomial(k, c).expect("kept monomial"));
    }
    let sum = out.iter().fold(ring.zero(), |acc, x| acc.add(x));
    out.push(sum);
    out
}

fn coefficient_samples(ring: &TruncRing) -> Vec<Elt> {
    sample_elements(ring)
        .into_iter()
        .map(|x| {
            let mut out = ring.zero();
            for (k, c) in x.terms().iter().filter(|(k, _)| k.e == 0) {
                out.add_term(*k, c.clone());
            }
            out
        })
        .filter(|x| !x.is_empty())
        .collect()
}

fn check_monomial_formulas(ring: &TruncRing) -> Result<bool, CocycleError> {
    let ring = ring.with_twist(0);
    let pm = ring.pm();
    let q = ring.rat_monomial(Mono::new(0, 1, 0, 0), Rat::one())?;
    let t = ring.rat_monomial(Mono::new(0, 0, 1, 0), Rat::one())?;
    let qt = ring.rat_monomial(Mono::new(0, 1, 1, 0), &pm / rat_int(ring.level as i64))?;
    Ok(ring.d1_coeff(&q) == qt && ring.d1_coeff(&t).is_empty() && ring.d2_coeff(&t) == t.scale(&pm) && ring.d2_coeff(&q).is_empty())
}

/// ∂_{m,1}f = p^m log(1+T)f and (∂_{m,2} − p^m)f = p^m Σ a_i i(1+T)T^{i−1}log(1+T) − p^m(w+1)f
/// computed with plain polynomial arithmetic in T.
fn check_lemme_t(ring: &TruncRing) -> bool {
    let ring = ring.with_twist(ring.twist);
    let nt = ring.bounds.big_t as usize;
    let pm = ring.pm();
    let coeffs: Vec<Rat> = (0..nt as i64).map(|i| rat(2 * i - 3, i + 1)).collect();
    let log = ring.log1p();
    let poly_mul = |a: &[Rat], b: &[Rat]| {
        let mut out = vec![Rat::zero(); nt];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if i + j < nt {
                    out[i + j] += x * y;
                }
            }
        }
        out
    };
    let to_elt = |poly: &[Rat]| {
        let mut e = ring.zero();
        for (i, c) in poly.iter().enumerate() {
            e.add_term(Mono::new(0, 0, 0, i as u32), CycloNum::from_rat(ring.level, c.clone()));
        }
        e
    };
    let f = to_elt(&coeffs);
    let d1_expected: Vec<Rat> = poly_mul(&log, &coeffs).iter().map(|c| c * &pm).collect();
    // Σ a_i i T^{i−1}, then times (1+T) log(1+T)
    let mut deriv = vec![Rat::zero(); nt];
    for i in 1..nt {
        deriv[i - 1] = &coeffs[i] * rat_int(i as i64);
    }
    let mut one_plus_t = vec![Rat::zero(); nt];
    one_plus_t[0] = Rat::one();
    if nt > 1 {
        one_plus_t[1] = Rat::one();
    }
    let main = poly_mul(&poly_mul(&deriv, &one_plus_t), &log);
    let w1 = rat_int(ring.twist + 1);
    let d2_expected: Vec<Rat> = main.iter().zip(&coeffs).map(|(m, a)| &pm * (m - &w1 * a)).collect();
    ring.d1(&f) == to_elt(&d1_expected) && ring.d2_shifted(&f) == to_elt(&d2_expected)
}

/// Leibniz on 𝔎̃ and the module rule ∂(f·m) = ∂f·m + f·∂m on 𝔎̃ ⊗ 𝐃.
fn check_leibniz(ring: &TruncRing) -> bool {
    let coeffs = coefficient_samples(ring);
    let modules = sample_elements(ring);
    let mut ok = true;
    type Deriv = fn(&TruncRing, &Elt) -> Elt;
    let pairs: [(Deriv, Deriv); 2] = [(TruncRing::d1_coeff, TruncRing::d1), (TruncRing::d2_coeff, TruncRing::d2)];
    for (dc, dm) in pairs {
        for a in &coeffs {
            for b in &coeffs {
                ok &= dc(ring, &ring.mul(a, b)) == ring.mul(&dc(ring, a), b).add(&ring.mul(a, &dc(ring, b)));
            }
            for m in &modules {
                ok &= dm(ring, &ring.mul(a, m)) == ring.mul(&dc(ring, a), m).add(&ring.mul(a, &dm(ring, m)));
            }
        }
    }
    ok
}

fn check_taylor(ring: &TruncRing) -> Result<bool, CocycleError> {
    let ring = ring.with_jet_degree(1);
    let pm = ring.pm();
    let g1 = GroupElt::formal(Some(Formal::U), None, &pm);
    let g2 = GroupElt::formal(None, Some(Formal::V), &pm);
    let mut ok = true;
    for x in sample_elements(&ring) {
        ok &= ring.act(&g1, &x)?.jet_part(Formal::U.jet()) == ring.d1(&x);
        ok &= ring.act(&g2, &x)?.jet_part(Formal::V.jet()) == ring.d2(&x);
        ok &= ring.act(&GroupElt::identity(), &x)? == x;
    }
    for x in coefficient_samples(&ring) {
        ok &= ring.act_coeff(&g1, &x)?.jet_part(Formal::U.jet()) == ring.d1_coeff(&x);
        ok &= ring.act_coeff(&g2, &x)?.jet_part(Formal::V.jet()) == ring.d2_coeff(&x);
    }
    Ok(ok)
}

fn check_group_law(ring: &TruncRing) -> Result<bool, CocycleError> {
    let ring = ring.with_jet_degree(2);
    let pm = ring.pm();
    let g1 = GroupElt::formal(Some(Formal::U), Some(Formal::V), &pm);
    let g2 = GroupElt::formal(Some(Formal::X), Some(Formal::Y), &pm);
    let g12 = g1.compose(&g2, &ring);
    let mut ok = true;
    for x in sample_elements(&ring) {
        ok &= ring.act(&g2, &ring.act(&g1, &x)?)? == ring.act(&g12, &x)?;
        ok &= ring.act_coeff(&g2, &ring.act_coeff(&g1, &x)?)? == ring.act_coeff(&g12, &x)?;
    }
    Ok(ok)
}

/// Reads [∂₁, ∂₂] off the (U·Y)-coefficients of the two composites and returns
/// the sign ε with [∂₁, ∂₂] = ε·p^m·∂₁, if the derivations agree with it.
fn check_commutator(ring: &TruncRing) -> Result<Option<i64>, CocycleError> {
    let ring = ring.with_jet_degree(2);
    let pm = ring.pm();
    let sigma = GroupElt::formal(Some(Formal::U), Some(Formal::V), &pm);
    let tau = GroupElt::formal(Some(Formal::X), Some(Formal::Y), &pm);
    let mut sign = None;
    for x in sample_elements(&ring) {
        let outer_sigma = ring.act(&sigma, &ring.act(&tau, &x)?)?.jet_part(UY);
        let outer_tau = ring.act(&tau, &ring.act(&sigma, &x)?)?.jet_part(UY);
        let from_action = outer_sigma.sub(&outer_tau);
        let from_derivations = ring.d1(&ring.d2(&x)).sub(&ring.d2(&ring.d1(&x)));
        if from_action != from_derivations {
            return Ok(None);
        }
        let d1 = ring.d1(&x).scale(&pm);
        let this = if from_action == d1 {
            1
        } else if from_action == d1.neg() {
            -1
        } else {
            return Ok(None);
        };
        if d1.is_empty() {
            continue;
        }
        if sign.is_some_and(|s| s != this) {
            return Ok(None);
        }
        sign = Some(this);
    }
    Ok(sign)
}

fn check_gamma_nu(ring: &TruncRing) -> Result<bool, CocycleError> {
    let ring = TruncRing { bounds: Bounds { big_t: 6, ..ring.bounds.clone() }, ..ring.clone() };
    let pm = ring.pm();
    let p = ring.p as i64;
    let log = ring.rat_monomial(Mono::new(0, 0, 0, 1), Rat::one())?;
    let log = (2..ring.bounds.big_t as i64).fold(log, |acc, i| {
        acc.add(&ring.rat_monomial(Mono::new(0, 0, 0, i as u32), rat(if i % 2 == 1 { 1 } else { -1 }, i)).expect("kept"))
    });
    let mut ok = true;
    for gamma in [[1, 0, 0, 1], [1, 1, 0, 1], [2, 3, p, 1], [3, -1, 2 * p, 4], [4, 7, p, 2]] {
        let a = gamma[0];
        let amice = gamma_nu_transform(&ring, gamma)?;
        ok &= ring.d1(&amice) == ring.mul(&log, &amice).scale(&pm);
        let inner = log.scale(&rat(gamma[1], a)).sub(&ring.rat_monomial(Mono::new(0, 0, 0, 0), rat_int(ring.twist))?);
        ok &= ring.d2(&amice) == ring.mul(&inner, &amice).scale(&pm);
    }
    Ok(ok)
}

/// Runs the checks of the cocycle calculus for one configuration.
pub fn run_checks(cfg: &CocycleConfig) -> Result<CocycleReport, CocycleError> {
    let j = cfg.j;
    if j == 0 {
        return Err(CocycleError::Domain("j must be at least 1".into()));
    }
    let base = TruncRing::new(cfg.p, cfg.level, cfg.n, j as i64, cfg.bounds.clone())?;
    let [a0, b0, c0, d0] = cfg.gamma;
    let det = a0 * d0 - b0 * c0;

    let monomial_formulas = check_monomial_formulas(&base)?;
    let lemme_t = check_lemme_t(&TruncRing { bounds: Bounds { big_t: 6, ..base.bounds.clone() }, ..base.clone() });
    let leibniz = check_leibniz(&base);
    let taylor = check_taylor(&base)?;
    let group_law = check_group_law(&base)?;
    let commutator_sign = check_commutator(&base)?;
    let gamma_nu_derivatives = check_gamma_nu(&base)?;

    let f = log_r_theta(&base, cfg.c, a0)?.d2();
    let g = log_r_theta(&base, cfg.d, c0)?.d2();
    let mut negligible_identity = true;
    for s in 0..base.bounds.t {
        let (lhs, rhs) = negligible_sides(&base, cfg.gamma, s, &f, &g)?;
        negligible_identity &= lhs == rhs;
    }
    let chain = negligible_chain(j, a0, det, cfg.level)?;
    let chain_matches_residue_scalar = chain.residue_scalar(det, j) == olla_scalar(j, a0, cfg.level) && chain.t_power == j + 1;

    let mut dlog_matches_theta = true;
    for (cc, a, b) in [(cfg.c, a0, b0), (cfg.d, c0, d0)] {
        for r in 1..=j.max(2) {
            let ours = dlog_siegel(&base, cc, a, b, r)?.to_qexp(&base);
            let theirs = theta_dlog_pow(cc, r, a, b, cfg.level, cfg.n, cfg.p, &cfg.bounds.q)?;
            dlog_matches_theta &= ours == theirs;
        }
    }

    let x1 = log_siegel(&base, cfg.c, a0, b0)?;
    let x2 = log_siegel(&base, cfg.d, c0, d0)?;
    let br = bracket(&base, &x1, &x2)?;
    let dt = delta_tilde2(&br);
    let display = two_cocycle_display(&base, cfg.c, cfg.d, cfg.gamma)?;
    let delta_tilde_vs_display = if dt == display {
        1
    } else if dt == display.neg() {
        -1
    } else {
        0
    };

    let residue_ring = base.with_twist(j as i64 - 2);
    let claim = olla_res(&residue_ring, j, cfg.gamma, cfg.c, cfg.d)?.series.shift_t(j - 1, &residue_ring);
    let input = olla_input(&residue_ring, cfg.gamma, cfg.c, cfg.d)?;
    let main_certificate = membership(&residue_ring, &input.sub(&claim), cfg.precision);
    // the same input built from the computed bracket: 𝒜·(δ/t²)·det^{−2}
    let amice = gamma_nu_transform(&residue_ring, cfg.gamma)?;
    let det2 = rat_pow(&rat_int(det), -2);
    let from_dt = residue_ring.mul(&amice, &dt.divide_t(2)?).scale(&det2);
    let membership_from_delta_tilde = membership(&residue_ring, &from_dt.sub(&claim), cfg.precision);
    let from_d2 = residue_ring.mul(&amice, &delta2(&base, &br).divide_t(2)?).scale(&det2);
    let membership_from_delta2 = membership(&residue_ring, &from_d2.sub(&claim), cfg.precision);

    Ok(CocycleReport {
        j,
        monomial_formulas,
        lemme_t,
        leibniz,
        taylor,
        group_law,
        commutator_sign,
        gamma_nu_derivatives,
        negligible_identity,
        chain_matches_residue_scalar,
        dlog_matches_theta,
        delta_tilde_vs_display,
        membership: main_certificate,
        membership_from_delta_tilde,
        membership_from_delta2,
    })
}
