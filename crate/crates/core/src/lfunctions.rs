//! Bernoulli numbers and polynomials, special values of the Hurwitz zeta
//! function and of ζ*(β, s) = Σ e(βn) n^{−s} at non-positive integers, and
//! truncated formal Dirichlet series.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::arith::{binom_int, rat, rat_int, rat_pow, Rat, TorsionPoint};
use crate::cyclotomic::{CycloAccum, CycloNum};

fn bernoulli_table() -> &'static Mutex<Vec<Rat>> {
    static TABLE: OnceLock<Mutex<Vec<Rat>>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(vec![Rat::one()]))
}

/// B_k with the convention B_1 = −1/2.
pub fn bernoulli(k: usize) -> Rat {
    let mut t = bernoulli_table().lock().expect("bernoulli table lock");
    while t.len() <= k {
        let n = t.len();
        // Σ_{i<n+1} binom(n+1, i) B_i = 0
        let s: Rat = (0..n).map(|i| Rat::from_integer(binom_int(n as u64 + 1, i as u64)) * &t[i]).sum();
        t.push(-s / rat_int(n as i64 + 1));
    }
    t[k].clone()
}

/// B_k(x) = Σ binom(k, i) B_i x^{k−i}.
pub fn bernoulli_poly(k: usize, x: &Rat) -> Rat {
    (0..=k)
        .map(|i| Rat::from_integer(binom_int(k as u64, i as u64)) * bernoulli(i) * rat_pow(x, (k - i) as i64))
        .sum()
}

/// ζ(α, 1−k) = −B_k(x)/k with x = {α}, or x = 1 when α = 0.
pub fn hurwitz_neg(alpha: &TorsionPoint, k: usize) -> Rat {
    assert!(k >= 1, "k must be positive");
    let x = if alpha.is_zero() { Rat::one() } else { alpha.frac() };
    -bernoulli_poly(k, &x) / rat_int(k as i64)
}

/// ζ*(β, 1−k) = N^{k−1} Σ_{a=1..N} ζ_N^{ab} ζ(a/N, 1−k) for β = b/N.
pub fn dirichlet_star_neg(beta: &TorsionPoint, k: usize) -> CycloNum {
    assert!(k >= 1, "k must be positive");
    let n = beta.ord();
    let mut acc = CycloAccum::new(n as u64);
    for a in 1..=n {
        acc.add_term(a * beta.num(), &hurwitz_neg(&TorsionPoint::new(a, n), k));
    }
    acc.finish().scale(&rat_pow(&rat_int(n), k as i64 - 1))
}

/// A formal Dirichlet series Σ a_t t^{−s} over t ∈ ℚ_{>0}, truncated to t ≤ bound.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletSeries {
    bound: Rat,
    terms: BTreeMap<Rat, CycloNum>,
}

impl DirichletSeries {
    pub fn new(bound: Rat) -> Self {
        DirichletSeries { bound, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, t: Rat, c: CycloNum) {
        if t > self.bound || t <= Rat::zero() || c.is_zero() {
            return;
        }
        let entry = self.terms.remove(&t);
        let s = match entry {
            Some(old) => old.add(&c),
            None => c,
        };
        if !s.is_zero() {
            self.terms.insert(t, s);
        }
    }

    /// ζ(α, s − w) = Σ_{m ≡ α, m > 0} m^w m^{−s}.
    pub fn hurwitz(alpha: &TorsionPoint, w: u32, bound: Rat) -> Self {
        let mut out = Self::new(bound);
        let a = alpha.ord();
        let mut u = if alpha.is_zero() { a } else { alpha.num() };
        while rat(u, a) <= out.bound {
            let m = rat(u, a);
            out.add_term(m.clone(), CycloNum::from_rat(1, rat_pow(&m, w as i64)));
            u += a;
        }
        out
    }

    /// ζ*(β, s − w) = Σ_{n ≥ 1} e(βn) n^w n^{−s}.
    pub fn star(beta: &TorsionPoint, w: u32, bound: Rat) -> Self {
        let mut out = Self::new(bound);
        let mut n = 1i64;
        while rat_int(n) <= out.bound {
            let z = CycloNum::zeta_pow(beta.ord() as u64, beta.num() * n);
            out.add_term(rat_int(n), z.scale(&rat_pow(&rat_int(n), w as i64)));
            n += 1;
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::new(self.bound.clone().min(o.bound.clone()));
        for (t1, a) in &self.terms {
            for (t2, b) in &o.terms {
                let t = t1 * t2;
                if t > out.bound {
                    break;
                }
                out.add_term(t, a.mul(b));
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = Self::new(self.bound.clone().min(o.bound.clone()));
        for (t, c) in self.terms.iter().chain(&o.terms) {
            out.add_term(t.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, r: &Rat) -> Self {
        let mut out = Self::new(self.bound.clone());
        for (t, c) in &self.terms {
            out.add_term(t.clone(), c.scale(r));
        }
        out
    }

    pub fn terms(&self) -> &BTreeMap<Rat, CycloNum> {
        &self.terms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli(1), rat(-1, 2));
        assert_eq!(bernoulli(2), rat(1, 6));
        assert_eq!(bernoulli(4), rat(-1, 30));
        assert_eq!(bernoulli(12), rat(-691, 2730));
        assert_eq!(bernoulli_poly(3, &rat_int(1)), rat_int(0));
        assert_eq!(bernoulli_poly(2, &rat(1, 2)), rat(-1, 12));
    }

    #[test]
    fn hurwitz_values() {
        assert_eq!(hurwitz_neg(&TorsionPoint::zero(), 2), rat(-1, 12));
        assert_eq!(hurwitz_neg(&TorsionPoint::new(1, 2), 2), rat(1, 24));
        assert_eq!(hurwitz_neg(&TorsionPoint::zero(), 1), rat(-1, 2));
    }

    #[test]
    fn star_values() {
        assert_eq!(dirichlet_star_neg(&TorsionPoint::zero(), 4), CycloNum::from_rat(1, rat(1, 120)));
        let z3 = CycloNum::zeta_pow(3, 1);
        let expect = z3.mul(&z3).sub(&z3).scale(&rat(1, 9));
        assert_eq!(dirichlet_star_neg(&TorsionPoint::new(1, 3), 3), expect);
        // Σ (−1)^n n^{−s} = (2^{1−s} − 1) ζ(s)
        for k in 1..8usize {
            let lhs = dirichlet_star_neg(&TorsionPoint::new(1, 2), k);
            let rhs = hurwitz_neg(&TorsionPoint::zero(), k) * (rat_pow(&rat_int(2), k as i64) - rat_int(1));
            assert_eq!(lhs, CycloNum::from_rat(1, rhs));
        }
    }

    #[test]
    fn dirichlet_product() {
        let z = DirichletSeries::hurwitz(&TorsionPoint::zero(), 0, rat_int(12));
        let sq = z.mul(&z);
        // coefficient of n^{−s} in ζ(s)² is the number of divisors
        assert_eq!(sq.terms()[&rat_int(12)], CycloNum::from_rat(1, rat_int(6)));
    }

    proptest! {
        #[test]
        fn multiplication_theorem(num in 0i64..30, den in 1i64..30, f in 1i64..5, k in 1usize..7) {
            let x = rat(num, den);
            let lhs: Rat = (0..f).map(|i| bernoulli_poly(k, &((&x + rat_int(i)) / rat_int(f)))).sum();
            prop_assert_eq!(lhs, rat_pow(&rat_int(f), 1 - k as i64) * bernoulli_poly(k, &x));
        }

        #[test]
        fn galois_on_star_values(b in 0i64..12, d in prop::sample::select(vec![1i64, 5, 7, 11]), k in 1usize..6) {
            let beta = TorsionPoint::new(b, 12);
            let lhs = dirichlet_star_neg(&beta, k).galois_sigma(d).unwrap();
            prop_assert_eq!(lhs, dirichlet_star_neg(&beta.mul_int(d), k));
        }
    }
}
