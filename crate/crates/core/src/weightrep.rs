//! Iwahori matrices, the cocycle ρ^univ_j, Dirac-supported measures with
//! their I_0(p)-action, and the specialization Sp_{k,j} to Sym^{k−2} ⊗ t^{−j}.
//!
//! With γz = (b+dz)/(a+cz) the points carry the right action z·γ = γz, so
//! (γ₁γ₂)z = γ₂(γ₁z) and ρ^univ_j(γ₁γ₂)(z) = ρ^univ_j(γ₁)(z)·ρ^univ_j(γ₂)(γ₁z).

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{binom_int, fmt_rat, rat_int, rat_pow, vp_rat, Rat};
use crate::cyclotomic::CycloNum;
use crate::family::{FamilyError, WeightTerm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepError {
    #[error("matrix is not in the Iwahori subgroup at {p}: {reason}")]
    NotIwahori { p: u64, reason: String },
    #[error("point {0} is not p-integral")]
    NotIntegral(String),
    #[error("weight {0} is below 2")]
    Weight(i64),
    #[error("weight term has an angle factor and no exact value")]
    Inexact,
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// A matrix (a b; c d) in I_0(p): p-integral, a and det units, c ≡ 0 mod p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IwahoriMat {
    p: u64,
    a: Rat,
    b: Rat,
    c: Rat,
    d: Rat,
}

fn integral(p: u64, x: &Rat) -> bool {
    vp_rat(p, x).is_none_or(|v| v >= 0)
}

impl IwahoriMat {
    pub fn new(p: u64, a: Rat, b: Rat, c: Rat, d: Rat) -> Result<Self, RepError> {
        let bad = |reason: &str| RepError::NotIwahori { p, reason: reason.into() };
        if ![&a, &b, &c, &d].iter().all(|x| integral(p, x)) {
            return Err(bad("entries must be p-integral"));
        }
        if vp_rat(p, &a) != Some(0) {
            return Err(bad("upper-left entry must be a unit"));
        }
        if vp_rat(p, &c).is_some_and(|v| v < 1) {
            return Err(bad("lower-left entry must be divisible by p"));
        }
        let m = IwahoriMat { p, a, b, c, d };
        if vp_rat(p, &m.det()) != Some(0) {
            return Err(bad("determinant must be a unit"));
        }
        Ok(m)
    }

    pub fn from_ints(p: u64, a: i64, b: i64, c: i64, d: i64) -> Result<Self, RepError> {
        Self::new(p, rat_int(a), rat_int(b), rat_int(c), rat_int(d))
    }

    pub fn identity(p: u64) -> Self {
        Self::from_ints(p, 1, 0, 0, 1).expect("identity is Iwahori")
    }

    pub fn entries(&self) -> [&Rat; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn det(&self) -> Rat {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn mul(&self, o: &Self) -> Self {
        IwahoriMat {
            p: self.p,
            a: &self.a * &o.a + &self.b * &o.c,
            b: &self.a * &o.b + &self.b * &o.d,
            c: &self.c * &o.a + &self.d * &o.c,
            d: &self.c * &o.b + &self.d * &o.d,
        }
    }

    /// a + cz, a unit for p-integral z.
    pub fn automorphy(&self, z: &Rat) -> Rat {
        &self.a + &self.c * z
    }

    /// γz = (b + dz)/(a + cz).
    pub fn act_point(&self, z: &Rat) -> Rat {
        (&self.b + &self.d * z) / self.automorphy(z)
    }
}

impl fmt::Display for IwahoriMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}; {} {})", fmt_rat(&self.a), fmt_rat(&self.b), fmt_rat(&self.c), fmt_rat(&self.d))
    }
}

/// ρ^univ_j(γ)(z) = κ^univ(a + cz)·det(γ)^{−j}.
pub fn rho_univ(g: &IwahoriMat, j: i64, z: &Rat) -> Result<WeightTerm, RepError> {
    if !integral(g.p, z) {
        return Err(RepError::NotIntegral(fmt_rat(z)));
    }
    let scalar = CycloNum::from_rat(1, rat_pow(&g.det(), -j));
    Ok(WeightTerm::kappa(scalar, g.automorphy(z), g.p)?)
}

/// A finite sum Σ coeff·δ_r over p-integral points r.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracMeasure {
    p: u64,
    atoms: Vec<(Rat, WeightTerm)>,
}

impl DiracMeasure {
    pub fn new(p: u64) -> Self {
        DiracMeasure { p, atoms: Vec::new() }
    }

    pub fn dirac(p: u64, r: Rat) -> Result<Self, RepError> {
        let mut m = Self::new(p);
        m.push(r, WeightTerm::one())?;
        Ok(m)
    }

    /// ν_j = δ_0.
    pub fn nu(p: u64) -> Self {
        Self::dirac(p, Rat::zero()).expect("0 is integral")
    }

    pub fn push(&mut self, r: Rat, coeff: WeightTerm) -> Result<(), RepError> {
        if !integral(self.p, &r) {
            return Err(RepError::NotIntegral(fmt_rat(&r)));
        }
        self.atoms.push((r, coeff));
        Ok(())
    }

    pub fn atoms(&self) -> &[(Rat, WeightTerm)] {
        &self.atoms
    }

    /// γ·δ_r = ρ^univ_j(γ)(r)·δ_{γr}, extended linearly.
    pub fn act(&self, g: &IwahoriMat, j: i64) -> Result<Self, RepError> {
        let mut out = Self::new(self.p);
        for (r, c) in &self.atoms {
            let rho = rho_univ(g, j, r)?;
            let coeff = c.mul(&rho).ok_or(RepError::Inexact)?;
            out.push(g.act_point(r), coeff)?;
        }
        Ok(out)
    }

    /// Point masses at the integer weight k, merged by support point.
    pub fn eval_integer_weight(&self, k: i64) -> Result<BTreeMap<Rat, Rat>, RepError> {
        let mut out: BTreeMap<Rat, Rat> = BTreeMap::new();
        for (r, c) in &self.atoms {
            let v = c.eval_integer_weight(k).and_then(|x| x.as_rat()).ok_or(RepError::Inexact)?;
            *out.entry(r.clone()).or_insert_with(Rat::zero) += v;
        }
        out.retain(|_, v| !v.is_zero());
        Ok(out)
    }
}

/// Σ_l coords[l]·e_1^{k−2−l} e_2^l ⊗ t^{−j}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymVector {
    k: i64,
    j: i64,
    coords: Vec<Rat>,
}

impl SymVector {
    pub fn new(k: i64, j: i64, coords: Vec<Rat>) -> Result<Self, RepError> {
        if k < 2 || coords.len() != (k - 1) as usize {
            return Err(RepError::Weight(k));
        }
        Ok(SymVector { k, j, coords })
    }

    /// e_1^{k−2} t^{−j}.
    pub fn highest_weight(k: i64, j: i64) -> Result<Self, RepError> {
        let mut coords = vec![Rat::zero(); (k - 1).max(0) as usize];
        if let Some(c) = coords.first_mut() {
            *c = Rat::one();
        }
        Self::new(k, j, coords)
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    /// e_1 ↦ ae_1 + be_2, e_2 ↦ ce_1 + de_2, and t ↦ det(γ)t.
    pub fn act(&self, g: &IwahoriMat) -> Self {
        let n = (self.k - 2) as usize;
        let e1 = poly_pows(&g.a, &g.b, n);
        let e2 = poly_pows(&g.c, &g.d, n);
        let mut out = vec![Rat::zero(); n + 1];
        for (l, v) in self.coords.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let (x, y) = (&e1[n - l], &e2[l]);
            for (i, xi) in x.iter().enumerate() {
                for (m, ym) in y.iter().enumerate() {
                    out[i + m] += v * xi * ym;
                }
            }
        }
        let twist = rat_pow(&g.det(), -self.j);
        SymVector { k: self.k, j: self.j, coords: out.into_iter().map(|c| c * &twist).collect() }
    }
}

/// Coefficients in e_2 of (u e_1 + w e_2)^i for i = 0..=n.
fn poly_pows(u: &Rat, w: &Rat, n: usize) -> Vec<Vec<Rat>> {
    (0..=n)
        .map(|i| {
            (0..=i)
                .map(|l| Rat::from_integer(binom_int(i as u64, l as u64)) * rat_pow(u, (i - l) as i64) * rat_pow(w, l as i64))
                .collect()
        })
        .collect()
}

/// Sp_{k,j}(μ) = ∫ (e_1 + z e_2)^{k−2} t^{−j} dμ at the integer weight k.
pub fn sp(k: i64, j: i64, mu: &DiracMeasure) -> Result<SymVector, RepError> {
    if k < 2 {
        return Err(RepError::Weight(k));
    }
    let n = (k - 2) as usize;
    let mut coords = vec![Rat::zero(); n + 1];
    for (r, mass) in mu.eval_integer_weight(k)? {
        for (l, c) in coords.iter_mut().enumerate() {
            *c += &mass * Rat::from_integer(binom_int(n as u64, l as u64)) * rat_pow(&r, l as i64);
        }
    }
    SymVector::new(k, j, coords)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepReport {
    pub cocycle: bool,
    pub equivariance: bool,
    pub highest_weight: bool,
    pub cases: usize,
}

impl RepReport {
    pub fn holds(&self) -> bool {
        self.cocycle && self.equivariance && self.highest_weight
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "holds": self.holds(),
            "cocycle": self.cocycle,
            "equivariance": self.equivariance,
            "highest_weight": self.highest_weight,
            "cases": self.cases,
        })
    }
}

/// Cocycle identity, Sp equivariance and Sp(ν_j) = e_1^{k−2}t^{−j} on the
/// given matrices, points, weights and twists, exactly over ℚ.
pub fn rep_check(mats: &[IwahoriMat], points: &[Rat], weights: &[i64], twists: &[i64]) -> Result<RepReport, RepError> {
    let p = mats.first().map(|m| m.p).unwrap_or(2);
    let mut report = RepReport { cocycle: true, equivariance: true, highest_weight: true, cases: 0 };
    let exact = |t: WeightTerm, k: i64| t.eval_integer_weight(k).ok_or(RepError::Inexact);
    for &k in weights {
        for &j in twists {
            report.highest_weight &= sp(k, j, &DiracMeasure::nu(p))? == SymVector::highest_weight(k, j)?;
            for g1 in mats {
                for g2 in mats {
                    for z in points {
                        report.cases += 1;
                        let lhs = exact(rho_univ(&g1.mul(g2), j, z)?, k)?;
                        let rhs = exact(rho_univ(g1, j, z)?, k)?.mul(&exact(rho_univ(g2, j, &g1.act_point(z))?, k)?);
                        report.cocycle &= lhs == rhs;
                    }
                }
                for z in points {
                    let mu = DiracMeasure::dirac(p, z.clone())?;
                    report.equivariance &= sp(k, j, &mu.act(g1, j)?)? == sp(k, j, &mu)?.act(g1);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use proptest::prelude::*;

    fn m(a: i64, b: i64, c: i64, d: i64) -> IwahoriMat {
        IwahoriMat::from_ints(5, a, b, c, d).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| rat_int(x)).collect()
    }

    #[test]
    fn membership() {
        assert!(IwahoriMat::from_ints(5, 1, 0, 1, 1).is_err());
        assert!(IwahoriMat::from_ints(5, 5, 1, 0, 1).is_err());
        assert!(IwahoriMat::from_ints(5, 1, 0, 0, 5).is_err());
        assert!(IwahoriMat::new(5, rat(1, 5), rat_int(0), rat_int(0), rat_int(1)).is_err());
        assert!(IwahoriMat::new(5, rat(1, 3), rat(2, 7), rat_int(10), rat_int(1)).is_ok());
    }

    #[test]
    fn trivial_cocycle_values() {
        for z in [rat_int(0), rat_int(3), rat(1, 2)] {
            assert_eq!(rho_univ(&IwahoriMat::identity(5), 2, &z).unwrap(), WeightTerm::one());
            assert_eq!(rho_univ(&m(1, 1, 0, 1), 1, &z).unwrap(), WeightTerm::one());
        }
    }

    #[test]
    fn dirac_actions() {
        let nu = DiracMeasure::nu(5);
        let moved = nu.act(&m(1, 1, 0, 1), 1).unwrap();
        assert_eq!(moved.eval_integer_weight(4).unwrap(), BTreeMap::from([(rat_int(1), rat_int(1))]));
        for j in 1..3 {
            let scaled = nu.act(&m(1, 0, 0, 2), j).unwrap();
            assert_eq!(scaled.eval_integer_weight(4).unwrap(), BTreeMap::from([(rat_int(0), rat_pow(&rat_int(2), -j))]));
        }
    }

    #[test]
    fn action_composes_on_the_right() {
        let (g1, g2) = (m(1, 1, 0, 1), m(2, 0, 5, 1));
        let mu = DiracMeasure::dirac(5, rat_int(3)).unwrap();
        let both = mu.act(&g1.mul(&g2), 1).unwrap().eval_integer_weight(4).unwrap();
        let right = mu.act(&g1, 1).unwrap().act(&g2, 1).unwrap().eval_integer_weight(4).unwrap();
        let left = mu.act(&g2, 1).unwrap().act(&g1, 1).unwrap().eval_integer_weight(4).unwrap();
        assert_eq!(both, right);
        assert_ne!(both, left);
    }

    #[test]
    fn specialization_values() {
        for k in [3, 4, 6] {
            for j in [1, 2] {
                assert_eq!(sp(k, j, &DiracMeasure::nu(5)).unwrap(), SymVector::highest_weight(k, j).unwrap());
            }
        }
        let v = sp(6, 1, &DiracMeasure::dirac(5, rat_int(1)).unwrap()).unwrap();
        assert_eq!(v.coords(), ints(&[1, 4, 6, 4, 1]).as_slice());
        let hw = SymVector::highest_weight(5, 2).unwrap().act(&m(1, 0, 5, 1));
        assert_eq!(hw.coords(), ints(&[1, 0, 0, 0]).as_slice());
        let low = SymVector::new(4, 0, ints(&[0, 0, 1])).unwrap().act(&m(1, 0, 5, 1));
        assert_eq!(low.coords(), ints(&[25, 10, 1]).as_slice());
        assert!(sp(1, 1, &DiracMeasure::nu(5)).is_err());
    }

    #[test]
    fn stated_grid() {
        let mats = [m(1, 1, 0, 1), m(1, 0, 0, 2), m(1, 0, 5, 1), m(3, 2, 10, 7)];
        let r = rep_check(&mats, &[rat_int(0), rat_int(2), rat(1, 3)], &[3, 4, 6], &[1, 2]).unwrap();
        assert!(r.holds(), "{r:?}");
    }

    fn iwahori() -> impl Strategy<Value = IwahoriMat> {
        (1i64..30, -20i64..20, -4i64..4, -20i64..20)
            .prop_filter_map("not Iwahori", |(a, b, c, d)| IwahoriMat::from_ints(5, a, b, 5 * c, d).ok())
    }

    proptest! {
        #[test]
        fn cocycle_identity(g1 in iwahori(), g2 in iwahori(), z in -30i64..30, k in prop::sample::select(vec![3i64, 5]), j in 1i64..3) {
            let z = rat_int(z);
            let lhs = rho_univ(&g1.mul(&g2), j, &z).unwrap().eval_integer_weight(k).unwrap();
            let rhs = rho_univ(&g1, j, &z).unwrap().eval_integer_weight(k).unwrap()
                .mul(&rho_univ(&g2, j, &g1.act_point(&z)).unwrap().eval_integer_weight(k).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn right_actions_compose(g1 in iwahori(), g2 in iwahori(), k in 2i64..7, j in 0i64..3) {
            let v = SymVector::new(k, j, (0..k - 1).map(|i| rat_int(i * i - 2)).collect()).unwrap();
            prop_assert_eq!(v.act(&g1).act(&g2), v.act(&g1.mul(&g2)));
            let mu = DiracMeasure::dirac(5, rat_int(k)).unwrap();
            let a = mu.act(&g1.mul(&g2), j).unwrap().eval_integer_weight(k).unwrap();
            let b = mu.act(&g1, j).unwrap().act(&g2, j).unwrap().eval_integer_weight(k).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn specialization_is_equivariant(g in iwahori(), z in -10i64..10, k in 2i64..7, j in 1i64..3) {
            let mu = DiracMeasure::dirac(5, rat_int(z)).unwrap();
            prop_assert_eq!(sp(k, j, &mu.act(&g, j).unwrap()).unwrap(), sp(k, j, &mu).unwrap().act(&g));
        }
    }
}
