mod common;

use common::*;
use cuspidal::constants::compute_constants;
use cuspidal::exact::{Float, Rational};
use cuspidal::expansion::{fit_expansion, geometric_grid, sample_melnikov};
use cuspidal::hamiltonian::{r_coefficients_closed, HamiltonianModel, Sigma};
use cuspidal::lienard::{lienard_coefficients, sigma, LienardParams};
use cuspidal::ovals::{c_integrals, melnikov_integral, trace_oval, PerturbationPoly, Side};

const PREC: u32 = 160;

fn rel(a: &Float, b: &Float) -> f64 {
    let d = Float::with_val(PREC, a - b).abs().to_f64();
    d / b.to_f64().abs().max(1e-300)
}

#[test]
fn loop_time_identity_for_random_vectors() {
    let m = HamiltonianModel::lienard();
    let mut r = rng(7);
    for _ in 0..10 {
        let a = random_params(&mut r);
        let c = c_integrals(&m, &PerturbationPoly::lienard(&a), PREC).unwrap();
        let sum = Float::with_val(PREC, &c.c41.value + &c.c41_tilde.value);
        assert!(rel(&sum, &c.cstar31) < 1e-8, "{sum} vs {}", c.cstar31);
    }
}

#[test]
fn loop_integrals_match_closed_forms() {
    let m = HamiltonianModel::lienard();
    let forms = lienard_coefficients();
    let mut r = rng(8);
    for _ in 0..4 {
        let a = random_params(&mut r);
        let c = c_integrals(&m, &PerturbationPoly::lienard(&a), PREC).unwrap();
        let c0 = forms.get("c0").eval_float(&a, None, PREC);
        let c41 = forms.get("c41").eval_float(&a, None, PREC);
        assert!(Float::with_val(PREC, &c.c0.value - &c0).abs() < 1e-30);
        assert!(Float::with_val(PREC, &c.c41.value - &c41).abs() < 1e-30);
    }
}

#[test]
fn melnikov_tends_to_the_loop_value() {
    let m = HamiltonianModel::lienard();
    let a = LienardParams::from_slice(&[q(1, 1), q(-1, 2), q(2, 3)]).unwrap();
    let pq = PerturbationPoly::lienard(&a);
    let c0 = lienard_coefficients().get("c0").eval_float(&a, None, PREC).to_f64();
    let mut last = f64::INFINITY;
    for e in [3, 5, 7, 9] {
        let h = Float::with_val(PREC, -10f64.powi(-e));
        let o = trace_oval(&m, &h, Side::InnerRight, 8).unwrap();
        let gap = (melnikov_integral(&o, &pq).unwrap().value.to_f64() - c0).abs();
        assert!(gap < last, "h = 1e-{e}");
        last = gap;
    }
    assert!(last < 1e-5);
}

#[test]
fn chain_route_agrees_with_integral_forms() {
    // r̃00, r̃10, r̃20 from the σ closed forms against the Liénard c1, c2, c3
    let k = compute_constants(30).unwrap();
    let forms = lienard_coefficients();
    let h = HamiltonianModel::lienard();
    let mut r = rng(9);
    for _ in 0..5 {
        let a = random_params(&mut r);
        let s = Sigma(sigma(&a));
        let [r00, r10, r20] = r_coefficients_closed(&h, &s).unwrap();
        let c1 = Float::with_val(PREC, &k.a0t * r00.to_float(PREC));
        let c2 = Float::with_val(PREC, &k.a1t * r10.to_float(PREC));
        let c3 = r20.to_float(PREC) * Rational::from((-1, 12));
        for (nm, got) in [("c1", c1), ("c2", c2), ("c3", c3)] {
            let want = forms.get(nm).eval_float(&a, Some(&k), PREC);
            assert!(Float::with_val(PREC, &got - &want).abs() < 1e-25, "{nm}: {got} vs {want}");
        }
    }
}

#[test]
fn fit_recovers_leading_coefficients() {
    let k = compute_constants(30).unwrap();
    let m = HamiltonianModel::lienard();
    let a = random_params(&mut rng(10));
    let pq = PerturbationPoly::lienard(&a);
    let levels = geometric_grid(1e-9, 1e-3, 40, Side::InnerRight, PREC).unwrap();
    let fit = fit_expansion(&sample_melnikov(&m, &pq, Side::InnerRight, &levels).unwrap()).unwrap();
    let c = fit.unsigned();
    let forms = lienard_coefficients();
    for (i, nm) in ["c0", "c1", "c2", "c3"].iter().enumerate() {
        let want = forms.get(nm).eval_float(&a, Some(&k), PREC);
        assert!(rel(&c[i], &want) < 1e-4, "{nm}: {} vs {want}", c[i]);
    }
}
