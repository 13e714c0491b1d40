//! Library results checked against independent computations written here.

use eisfam::arith::{rat, rat_int, rat_pow, CharExponent, PadicCtx, PadicNum, Rat, TorsionPoint};
use eisfam::cyclotomic::{CycloNum, CycloPadic};
use eisfam::eisenstein::{eis_qexp, EisId, EisKind};
use eisfam::family::{family_f, EvalPrecision};
use eisfam::lfunctions::{bernoulli_poly, hurwitz_neg};
use eisfam::measures::{padic_hurwitz_zeta, AffineUnitMap};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn tp(a: i64, n: i64) -> TorsionPoint {
    TorsionPoint::new(a, n)
}

/// Coefficient of q^t, t > 0, straight from the double sum over m ≡ ±α, m > 0, n ≥ 1 with mn = t.
fn direct_coefficient(kind: EisKind, k: u32, alpha: TorsionPoint, beta: TorsionPoint, t: &Rat) -> CycloNum {
    let n_beta = beta.ord() as u64;
    let mut acc = CycloNum::zero(n_beta);
    for sign in [1i64, -1] {
        let a = alpha.mul_int(sign).frac();
        let sign_k = if sign == -1 && k % 2 == 1 { -Rat::one() } else { Rat::one() };
        // m = a + i for i ≥ 0 (and i ≥ 1 when a = 0), n = t/m must be a positive integer
        let mut i = if a.is_zero() { 1 } else { 0 };
        loop {
            let m = &a + rat_int(i);
            if &m > t {
                break;
            }
            let n = t / &m;
            if n.is_integer() {
                let n_int: i64 = n.to_integer().try_into().unwrap();
                let weight = match kind {
                    EisKind::E => rat_pow(&n, k as i64 - 1),
                    _ => rat_pow(&m, k as i64 - 1),
                };
                let root = CycloNum::zeta_pow(n_beta, sign * beta.num() * n_int);
                acc = acc.add(&root.scale(&(weight * &sign_k)));
            }
            i += 1;
        }
    }
    acc
}

#[test]
fn eisenstein_coefficients_match_the_double_sum() {
    let bound = rat_int(4);
    for (kind, k) in [(EisKind::E, 1), (EisKind::E, 3), (EisKind::E, 4), (EisKind::F, 1), (EisKind::F, 3), (EisKind::F, 5)] {
        for (alpha, beta) in [(tp(0, 1), tp(1, 3)), (tp(1, 4), tp(0, 1)), (tp(2, 5), tp(1, 6)), (tp(1, 3), tp(1, 2))] {
            let id = EisId::new(kind, k, alpha, beta);
            if id.validate().is_err() {
                continue;
            }
            let s = eis_qexp(&id, &bound).unwrap();
            let level = alpha.ord();
            for num in 1..=(4 * level) {
                let t = rat(num, level);
                let want = direct_coefficient(kind, k, alpha, beta, &t);
                let got = s.coeff_at(&t).cloned().unwrap_or_else(|| CycloNum::zero(1));
                assert_eq!(got, want, "{kind}^({k}) alpha={alpha} beta={beta} t={t}");
            }
        }
    }
}

#[test]
fn sigma_three_series() {
    let s = eis_qexp(&EisId::new(EisKind::E, 4, tp(0, 1), tp(0, 1)), &rat_int(6)).unwrap();
    let sigma3 = |n: i64| (1..=n).filter(|d| n % d == 0).map(|d| d.pow(3)).sum::<i64>();
    assert_eq!(s.coeff(0).unwrap().as_rat(), Some(rat(1, 120)));
    for n in 1..=6 {
        assert_eq!(s.coeff_at(&rat_int(n)).unwrap().as_rat(), Some(rat_int(2 * sigma3(n))), "n={n}");
    }
}

#[test]
fn family_constant_term_matches_measure_and_bernoulli() {
    // for c{α} < 1 the constant term of Ev_{k+j} F, the measure value and the
    // Bernoulli combination ord^{k−1}(c²ζ(α, 1−k) − c^{2−k}ζ(cα, 1−k)) all agree
    let ctx = PadicCtx::new(5, 25).unwrap();
    let prec = EvalPrecision { ctx, requested: 19, window: 8 };
    let alpha = tp(1, 5);
    let map = AffineUnitMap::new(alpha, 5).unwrap();
    for (j, k) in [(1, 2), (1, 4), (2, 3)] {
        let fam = family_f(2, alpha, tp(0, 1), j, 5, &rat_int(1)).unwrap();
        let ev = fam.ev_weight(k + j, prec).unwrap();
        let classical = rat_pow(&rat_int(5), k - 1) * (rat_int(4) * hurwitz_neg(&alpha, k as usize) - rat_pow(&rat_int(2), 2 - k) * hurwitz_neg(&alpha.mul_int(2), k as usize));
        let w = k + j - 2;
        let z = padic_hurwitz_zeta(2, &map, j, w, &CharExponent::Int(w), ctx, 19, 8).unwrap();
        let from_rat = PadicNum::from_rat(ctx, &classical);
        assert!(z.value.eq_mod(&from_rat, 19).unwrap(), "j={j} k={k}");
        let constant = ev.coeff(0).expect("constant term");
        assert!(constant.eq_mod(&CycloPadic::from_padic(1, from_rat), 19).unwrap(), "j={j} k={k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bernoulli_difference_equation(k in 1usize..9, num in 0i64..12, den in 1i64..12) {
        let x = rat(num, den);
        let lhs = bernoulli_poly(k, &(&x + rat_int(1))) - bernoulli_poly(k, &x);
        prop_assert_eq!(lhs, rat_int(k as i64) * rat_pow(&x, k as i64 - 1));
    }

    #[test]
    fn hurwitz_values_sum_to_zeta(k in 1usize..8, n in 1i64..9) {
        // Σ_{a=1..n} ζ(a/n, s) = n^s ζ(s) at s = 1 − k
        let total: Rat = (1..=n).map(|a| hurwitz_neg(&tp(a, n), k)).sum();
        let zeta = hurwitz_neg(&tp(0, 1), k);
        prop_assert_eq!(total, rat_pow(&rat_int(n), 1 - k as i64) * zeta);
    }
}
