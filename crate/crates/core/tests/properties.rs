mod common;

use common::*;
use cuspidal::constants::compute_constants;
use cuspidal::cycles::{build_chain, run, ChainSpec, Coef, SubBranch};
use cuspidal::exact::{
    linear_solve_rational, rank_rational, AlgebraicElement, Float, PiLinear, Rational, RationalMatrix, Series1,
    Solution,
};
use cuspidal::expansion::{basis, fit_expansion_with, geometric_grid, BasisSample};
use cuspidal::hamiltonian::{mu_chain, HamiltonianModel, SaddleKind};
use cuspidal::ovals::{melnikov_integral, melnikov_nodes, trace_oval, PerturbationPoly, Side};
use proptest::prelude::*;
use rand::Rng;

fn rat() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=9).prop_map(|(n, d)| q(n, d))
}

fn pilinear() -> impl Strategy<Value = PiLinear> {
    (rat(), rat()).prop_map(|(a, b)| PiLinear::new(a, b))
}

fn h6() -> impl Strategy<Value = Rational> {
    prop_oneof![Just(q(-1, 1)), Just(q(-2, 1)), Just(q(-1, 3)), Just(q(-5, 4))]
}

fn algebraic(h6: Rational) -> impl Strategy<Value = AlgebraicElement> {
    proptest::collection::vec((rat(), 0i64..2, 0i64..6), 1..5).prop_map(move |terms| {
        terms.into_iter().fold(AlgebraicElement::zero(&h6).unwrap(), |acc, (c, s, k)| {
            acc.try_add(&AlgebraicElement::monomial(c, s, k, &h6).unwrap()).unwrap()
        })
    })
}

fn triple() -> impl Strategy<Value = (AlgebraicElement, AlgebraicElement, AlgebraicElement)> {
    h6().prop_flat_map(|h| (algebraic(h.clone()), algebraic(h.clone()), algebraic(h)))
}

fn series(len: usize) -> impl Strategy<Value = Vec<Rational>> {
    proptest::collection::vec(rat(), len)
}

fn poly_mul(a: &[Float], b: &[Float], n: usize) -> Vec<Float> {
    let prec = a[0].prec();
    let mut out = vec![Float::new(prec); n];
    for (i, x) in a.iter().enumerate().take(n) {
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] += Float::with_val(prec, x * y);
        }
    }
    out
}

/// Sixth root of `1 + Σ a_k x^k` by undetermined coefficients.
fn sixth_root(a: &[Float]) -> Vec<Float> {
    let prec = a[0].prec();
    let n = a.len();
    let mut b = vec![Float::new(prec); n];
    b[0] = Float::with_val(prec, 1u32);
    for m in 1..n {
        let mut p = vec![Float::new(prec); n];
        p[0] = Float::with_val(prec, 1u32);
        for _ in 0..6 {
            p = poly_mul(&p, &b, n);
        }
        b[m] = Float::with_val(prec, &a[m] - &p[m]) / 6u32;
    }
    b
}

/// Compositional inverse of `Σ_{k≥1} u_k x^k` by fixed point on `x = (t - Σ_{k≥2} u_k x^k) / u_1`.
fn reversion(u: &[Float]) -> Vec<Float> {
    let prec = u[1].prec();
    let n = u.len();
    let mut x = vec![Float::new(prec); n];
    for _ in 0..n {
        let mut rhs = vec![Float::new(prec); n];
        rhs[1] = Float::with_val(prec, 1u32);
        let mut p = x.clone();
        for uk in u.iter().skip(2) {
            p = poly_mul(&p, &x, n);
            for (r, v) in rhs.iter_mut().zip(&p) {
                *r -= Float::with_val(prec, uk * v);
            }
        }
        x = rhs.iter().map(|r| Float::with_val(prec, r / &u[1])).collect();
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rational_ring_axioms(a in rat(), b in rat(), c in rat()) {
        prop_assert_eq!(Rational::from(&a + &b) + &c, a.clone() + Rational::from(&b + &c));
        prop_assert_eq!(Rational::from(&a * &b) * &c, a.clone() * Rational::from(&b * &c));
        prop_assert_eq!(a.clone() * Rational::from(&b + &c), Rational::from(&a * &b) + Rational::from(&a * &c));
    }

    #[test]
    fn pilinear_module_axioms(x in pilinear(), y in pilinear(), z in pilinear(), s in rat(), t in rat()) {
        prop_assert_eq!(x.add(&y).add(&z), x.add(&y.add(&z)));
        prop_assert_eq!(x.add(&y), y.add(&x));
        prop_assert_eq!(x.add(&y).scale(&s), x.scale(&s).add(&y.scale(&s)));
        prop_assert_eq!(x.scale(&Rational::from(&s + &t)), x.scale(&s).add(&x.scale(&t)));
        prop_assert!(x.sub(&x).is_zero());
        // products exist when one side is rational
        let r = PiLinear::rational(s.clone());
        prop_assert_eq!(r.try_mul(&x.add(&y)).unwrap(), r.try_mul(&x).unwrap().add(&r.try_mul(&y).unwrap()));
    }

    #[test]
    fn algebraic_ring_axioms((a, b, c) in triple()) {
        let ab = a.try_mul(&b).unwrap();
        prop_assert_eq!(ab.try_mul(&c).unwrap(), a.try_mul(&b.try_mul(&c).unwrap()).unwrap());
        prop_assert_eq!(ab.clone(), b.try_mul(&a).unwrap());
        let lhs = a.try_mul(&b.try_add(&c).unwrap()).unwrap();
        let rhs = ab.try_add(&a.try_mul(&c).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(a.try_add(&b).unwrap().try_add(&c).unwrap(), a.try_add(&b.try_add(&c).unwrap()).unwrap());
    }

    #[test]
    fn algebraic_embedding_is_a_homomorphism((a, b, _c) in triple()) {
        let prec = 256;
        let ab = a.try_mul(&b).unwrap().to_float(prec);
        let want = a.to_float(prec) * b.to_float(prec);
        let scale = Float::with_val(prec, want.abs_ref()).max(&Float::with_val(prec, 1u32));
        prop_assert!(Float::with_val(prec, &ab - &want).abs() < Float::with_val(prec, &scale * 1e-60));
        if !a.is_zero() {
            if let Ok(inv) = a.try_inv() {
                prop_assert_eq!(inv.try_mul(&a).unwrap(), AlgebraicElement::from_rational(q(1, 1), a.h6()).unwrap());
            }
        }
    }

    #[test]
    fn beta_sixth_powers_are_rational(k in 1i64..4, c in rat()) {
        let h6 = q(-1, 1);
        let e = AlgebraicElement::monomial(c.clone(), 0, 6 * k, &h6).unwrap();
        prop_assert_eq!(e, AlgebraicElement::from_rational(c, &h6).unwrap());
    }

    #[test]
    fn series_reciprocal_round_trip(mut v in series(10), c0 in 1i64..5) {
        v[0] = q(c0, 1);
        let s = Series1::new(v, 10, &());
        let one = s.mul(&s.recip().unwrap());
        prop_assert_eq!(one, Series1::constant(q(1, 1), 10));
    }

    #[test]
    fn series_reversion_round_trip(mut v in series(9), c1 in 1i64..5) {
        v[0] = Rational::new();
        v[1] = q(c1, 1);
        let f = Series1::new(v, 9, &());
        let g = f.reversion().unwrap();
        prop_assert_eq!(f.compose(&g).unwrap(), Series1::x(9, &()));
        prop_assert_eq!(g.compose(&f).unwrap(), Series1::x(9, &()));
    }

    #[test]
    fn series_rational_power_round_trip(mut v in series(9)) {
        v[0] = q(1, 1);
        let s = Series1::new(v, 9, &());
        let r = s.pow_rational(&q(1, 3)).unwrap();
        prop_assert_eq!(r.pow(3), s);
    }

    #[test]
    fn h_series_stable_under_order(seed in any::<u64>()) {
        let h = random_hamiltonian(&mut rng(seed));
        let long = h.h_series(16).unwrap();
        let short = h.h_series(10).unwrap();
        prop_assert_eq!(&long.hj[..short.hj.len()], &short.hj[..]);
    }

    #[test]
    fn classification_follows_leading_term(seed in any::<u64>()) {
        let h = random_hamiltonian(&mut rng(seed));
        let c = h.classify().unwrap();
        let hs = h.h_series(14).unwrap();
        match hs.leading() {
            None => prop_assert_eq!(c.kind, SaddleKind::Other),
            Some((k, v)) => {
                prop_assert_eq!(c.k, k);
                prop_assert_eq!(c.hk, v.clone());
                if k == 6 && v.cmp0().is_lt() {
                    prop_assert_eq!(c.kind, SaddleKind::NilpotentSaddleOrder2);
                }
            }
        }
    }

    #[test]
    fn solve_residuals_vanish(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..7) {
        let mut r = rng(seed);
        let a: Vec<Vec<Rational>> = (0..rows)
            .map(|_| (0..cols).map(|_| if r.random_range(0..3) == 0 { Rational::new() } else { small_rational(&mut r) }).collect())
            .collect();
        let x0: Vec<Rational> = (0..cols).map(|_| small_rational(&mut r)).collect();
        let m = RationalMatrix::from_rows(a).unwrap();
        let b = m.mul_vec(&x0).unwrap();
        let rank = rank_rational(&m);
        match linear_solve_rational(&m, &b).unwrap() {
            Solution::Unique(x) => {
                prop_assert_eq!(m.mul_vec(&x).unwrap(), b);
                prop_assert_eq!(rank, cols);
            }
            Solution::Family { particular, nullspace, free } => {
                prop_assert_eq!(m.mul_vec(&particular).unwrap(), b);
                prop_assert_eq!(nullspace.len(), cols - rank);
                prop_assert_eq!(free.len(), nullspace.len());
                for v in &nullspace {
                    prop_assert!(m.mul_vec(v).unwrap().iter().all(|x| x.cmp0().is_eq()));
                }
            }
            Solution::Inconsistent => prop_assert!(false, "consistent system reported inconsistent"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mu_chain_matches_radical_oracle(seed in any::<u64>()) {
        let prec = 200;
        let mut r = rng(seed);
        let mut terms = vec![(6u32, 0u32, q(-r.random_range(1..=4), r.random_range(1..=3)))];
        for _ in 0..4 {
            let (i, j) = [(7, 0), (8, 0), (9, 0), (2, 2), (3, 1), (4, 1), (1, 3), (10, 0)][r.random_range(0..8)];
            terms.push((i, j, small_rational(&mut r)));
        }
        let h = HamiltonianModel::new(terms, 14).unwrap();
        let hs = h.h_series(14).unwrap();
        prop_assume!(hs.hj[6].cmp0().is_lt());
        let c = mu_chain(&hs, &hs.hj[6]).unwrap();
        // (-h(x))^{1/6} = x (-h6)^{1/6} (1 + Σ h_{6+k}/h_6 x^k)^{1/6}
        let h6 = hs.hj[6].clone();
        let a: Vec<Float> = (6..=14).map(|j| Float::with_val(prec, Rational::from(&hs.hj[j] / &h6))).collect();
        let root = sixth_root(&a);
        let m1 = Float::with_val(prec, Rational::from(-&h6)).root(6);
        let mut u = vec![Float::new(prec)];
        u.extend(root.iter().map(|b| Float::with_val(prec, b * &m1)));
        let tol = Float::with_val(prec, 1e-40);
        for (k, mu) in c.mu.iter().enumerate() {
            let d = Float::with_val(prec, mu.to_float(prec) - &u[k + 1]).abs();
            prop_assert!(d < tol, "mu_{}: {}", k + 1, d);
        }
        let x = reversion(&u);
        for (k, mb) in c.mu_bar.iter().enumerate() {
            let d = Float::with_val(prec, mb.to_float(prec) - &x[k + 1]).abs();
            prop_assert!(d < tol, "mubar_{}: {}", k + 1, d);
        }
    }

    #[test]
    fn fit_round_trip(seed in any::<u64>(), side in prop_oneof![Just(Side::InnerRight), Just(Side::InnerLeft), Just(Side::Outer)]) {
        let prec = 256;
        let mut r = rng(seed);
        let levels = geometric_grid(1e-6, 1e-3, 40, side, prec).unwrap();
        let n = basis(&levels[0], side).len();
        let c: Vec<Float> = (0..n).map(|_| Float::with_val(prec, r.random_range(-1.0..1.0))).collect();
        let m: Vec<Float> = levels
            .iter()
            .map(|h| basis(h, side).iter().zip(&c).fold(Float::new(prec), |acc, (b, x)| acc + Float::with_val(prec, b * x)))
            .collect();
        let fit = fit_expansion_with(&BasisSample { side, h: levels, m }, 0).unwrap();
        for (got, want) in fit.coefficients.iter().zip(&c) {
            let d = Float::with_val(prec, got - want).abs().to_f64();
            prop_assert!(d <= 1e-8 * want.to_f64().abs().max(1e-3), "{} vs {}", got, want);
        }
    }

    #[test]
    fn oval_node_rule_converges(seed in any::<u64>(), e in 2i32..5) {
        let mut r = rng(seed);
        let m = HamiltonianModel::lienard();
        let a = random_params(&mut r);
        let pq = PerturbationPoly::lienard(&a);
        let h = Float::with_val(160, -(10f64.powi(-e)) * 2.0);
        let exact = melnikov_integral(&trace_oval(&m, &h, Side::InnerRight, 8).unwrap(), &pq).unwrap().value.to_f64();
        let err = |n: usize| (melnikov_nodes(&trace_oval(&m, &h, Side::InnerRight, n).unwrap(), &pq) - exact).abs();
        let (coarse, fine) = (err(64), err(1024));
        let scale = exact.abs().max(1e-6);
        prop_assert!(fine <= coarse.max(1e-13 * scale));
        prop_assert!(fine < 1e-10 * scale.max(1.0), "{fine} at h = {h}");
    }

    #[test]
    fn quadrature_stable_under_precision(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = HamiltonianModel::lienard();
        let pq = PerturbationPoly::lienard(&random_params(&mut r));
        let v = |prec: u32| {
            let h = Float::with_val(prec, -1e-4);
            melnikov_integral(&trace_oval(&m, &h, Side::InnerLeft, 8).unwrap(), &pq).unwrap().value.to_f64()
        };
        let (a, b) = (v(128), v(256));
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-6));
    }
}

#[test]
fn chains_are_graded_and_signed() {
    let k = compute_constants(20).unwrap();
    let mut r = rng(5);
    for _ in 0..16 {
        let mut spec = ChainSpec::new(r.random_range(6..=9), r.random_range(1..=3));
        spec.sub_branch = if r.random_bool(0.5) { SubBranch::A } else { SubBranch::B };
        spec.ratio = 10f64.powf(r.random_range(-6.0..-4.0));
        let chain = build_chain(&spec, &k).unwrap();
        let levels = spec.levels();
        for g in &levels {
            for &(c, sign) in g {
                assert_eq!(chain.get(c).sign, sign, "{spec:?} {}", c.name());
            }
        }
        for w in levels[..levels.len() - 1].windows(2) {
            let lo = w[0].iter().map(|p| chain.get(p.0).ln_f64()).fold(f64::NEG_INFINITY, f64::max);
            let hi = w[1].iter().map(|p| chain.get(p.0).ln_f64()).fold(f64::INFINITY, f64::min);
            assert!(lo - hi <= spec.ratio.ln() + 1e-6 * lo.abs(), "{spec:?}");
        }
        let used: Vec<Coef> = levels.iter().flatten().map(|p| p.0).collect();
        for c in Coef::ALL.iter().filter(|c| !used.contains(c)) {
            assert!(chain.get(*c).is_zero());
        }
    }
}

#[test]
fn counts_follow_the_rule_for_random_ratios() {
    let k = compute_constants(20).unwrap();
    let mut r = rng(6);
    for l in 6..=9u32 {
        let mut spec = ChainSpec::new(l, r.random_range(1..=3));
        spec.ratio = 10f64.powf(r.random_range(-5.0..-4.0));
        let (_, rep) = run(&spec, &k).unwrap();
        assert!(rep.ambiguous.is_empty(), "{spec:?}");
        let want = if l >= 8 { 2 * l - 2 } else { 2 * l - 1 };
        assert_eq!(rep.total as u32, want, "{spec:?}");
        for z in &rep.zeros {
            assert!(z.margin_near > 10.0 && z.margin_far > 10.0);
            assert!(z.s_lo < z.s_hi);
        }
    }
}
