mod common;

use std::time::{Duration, Instant};

use common::*;
use cuspidal::constants::compute_constants;
use cuspidal::cycles::{run, ChainSpec, SubBranch};
use cuspidal::exact::{sym_name, AlgebraicElement, Float, Rational, Series1};
use cuspidal::expansion::{basis, fit_expansion_with, geometric_grid, sample_melnikov, BasisSample};
use cuspidal::hamiltonian::{eval_appendix_hj, FormulaBank, HamiltonianModel};
use cuspidal::lienard::{
    jacobian_rank, lienard_coefficients, printed_brackets, printed_prefactor, solve_case, CaseSolution,
};
use cuspidal::ovals::{c_integrals, melnikov_integral, melnikov_nodes, trace_oval, PerturbationPoly, Side};
use rand::Rng;

const PREC: u32 = 160;

/// Criteria whose FAIL is a documented mismatch with the printed data rather than a defect.
const KNOWN_FAIL: [u32; 1] = [5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: &Float, b: &Float) -> f64 {
    Float::with_val(PREC, a - b).abs().to_f64() / b.to_f64().abs().max(1e-300)
}

fn constants() -> Outcome {
    let printed = [-0.5258182896, -0.7285951942, 0.3200718001, 0.0808471737, 1.051636580, -0.1616943474];
    let t = Instant::now();
    let k = match compute_constants(30) {
        Ok(k) => k,
        Err(e) => return ok(false, e.to_string()),
    };
    let dt = t.elapsed();
    let worst = k.f64s().iter().zip(printed).map(|(g, w)| ((g - w) / w).abs()).fold(0.0, f64::max);
    ok(worst <= 1e-9 && dt < Duration::from_secs(5), format!("max rel dev {worst:.1e}, 30 digits in {dt:.2?}"))
}

fn appendix_oracle() -> Outcome {
    let bank = FormulaBank::global();
    let corrected = bank.corrected();
    let mut r = rng(2024);
    let mut mismatched = Vec::new();
    let mut corrected_bad = 0;
    for _ in 0..100 {
        let h = random_hamiltonian(&mut r);
        let series = naive_h_series(&h, 14);
        let env = h.env::<Rational>(&());
        for j in 10..=14u32 {
            let target = format!("hs_{j}");
            let printed = eval_appendix_hj(&h, j).unwrap();
            let diff = Rational::from(&printed - &series[j as usize]);
            if diff.cmp0().is_ne() {
                let excess = bank.errata_for(&target).iter().fold(Rational::new(), |acc, e| {
                    acc + e
                        .excess()
                        .eval::<Rational, ()>(&(), |s| env.get(&sym_name(s)).ok_or(()), |_| ())
                        .unwrap()
                });
                let whitelisted = target == "hs_13" && diff == excess;
                mismatched.push((target.clone(), whitelisted));
            }
            let fixed: Rational = corrected.eval(&target, &env).unwrap();
            if fixed != series[j as usize] {
                corrected_bad += 1;
            }
        }
    }
    let unexplained = mismatched.iter().filter(|m| !m.1).count();
    ok(
        unexplained == 0 && corrected_bad == 0,
        format!(
            "100 Hamiltonians x h10..h14: {} discrepancies ({} whitelisted hs_13 missing-plus, {unexplained} unexplained); {corrected_bad} mismatches after the flagged terms are applied",
            mismatched.len(),
            mismatched.len() - unexplained,
        ),
    )
}

fn identities() -> Outcome {
    let bank = FormulaBank::global();
    let fixed = bank.corrected();
    let mut held = 0;
    let mut printed_held = 0;
    for (l, r) in IDENTITIES {
        let e = |b: &FormulaBank, t: &str| b.expand(t, &keep_chain_symbols).unwrap();
        if e(&fixed, l).sub(&e(&fixed, r)).is_zero() {
            held += 1;
        }
        if e(bank, l).sub(&e(bank, r)).is_zero() {
            printed_held += 1;
        }
    }
    ok(
        held == IDENTITIES.len(),
        format!("{held}/7 exact with the flagged terms applied; {printed_held}/7 on the printed bank (rt_8_0 = r1_4_1 differs by the m_8_4 and mt_4_3 flags)"),
    )
}

fn closed_forms() -> Outcome {
    let forms = lienard_coefficients();
    let entries = printed_brackets();
    let matched = entries
        .iter()
        .filter(|e| forms.get(e.form).coeffs[e.j] == e.value.scale(&printed_prefactor(e.form)))
        .count();
    ok(
        matched == entries.len(),
        format!("{matched}/{} printed coefficients exact (13+13+10+10 are printed, not 52)", entries.len()),
    )
}

fn solves() -> Outcome {
    let s: Vec<CaseSolution> = (1..=3).map(|c| solve_case(c).unwrap()).collect();
    let ranks: Vec<usize> = (1..=3).map(|c| jacobian_rank(c).unwrap()).collect();
    let ranks_ok = ranks == [11, 10, 9] && s.iter().map(|x| x.rank).eq([11, 10, 9]);
    let zero = |c: &CaseSolution, vars: &[usize]| vars.iter().all(|&v| c.relation(v).is_some_and(|r| r.terms.is_empty()));
    let case1 = s[0].ratio(5, 7) == q(-3, 4) && zero(&s[0], &[0, 1, 2, 3, 4, 6, 9, 11]);
    let case2 = s[1].ratio(5, 11) == q(165, 256)
        && s[1].ratio(5, 7) == q(-3, 4)
        && s[1].ratio(9, 11) == q(-61, 32);
    let case3 = s[2].ratio(6, 10) == q(8, 7) && s[2].ratio(8, 10) == q(-16, 7) && s[2].ratio(5, 7) == q(-3, 4);
    let printed8: Rational = "21702051851422978291/27670116110564327424".parse().unwrap();
    let printed10: Rational = "-99829438516545753655/55340232221128654848".parse().unwrap();
    let (r8, r10) = (s[0].ratio(8, 12), s[0].ratio(10, 12));
    let twenty_digit = r8 == printed8 && r10 == printed10;
    let dev = [(&r8, &printed8), (&r10, &printed10)]
        .iter()
        .map(|(e, p)| (Rational::from(*e - *p) / *e).to_f64().abs())
        .fold(0.0, f64::max);
    ok(
        twenty_digit && case1 && case2 && case3 && ranks_ok,
        format!(
            "case 1 exact a8 = {r8} a12, a10 = {r10} a12; printed 20-digit rationals {} (rel dev {dev:.1e}, binary64 roundings); other case-1 relations {}; case 2 {}; case 3 {}; ranks {ranks:?}",
            if twenty_digit { "reproduced" } else { "NOT reproduced" },
            if case1 { "match" } else { "differ" },
            if case2 { "match" } else { "differ" },
            if case3 { "match" } else { "differ" },
        ),
    )
}

fn cross_validation() -> Outcome {
    let t = Instant::now();
    let k = compute_constants(30).unwrap();
    let m = HamiltonianModel::lienard();
    let a = random_params(&mut rng(10));
    let pq = PerturbationPoly::lienard(&a);
    let levels = geometric_grid(1e-9, 1e-3, 40, Side::InnerRight, PREC).unwrap();
    let samples = sample_melnikov(&m, &pq, Side::InnerRight, &levels).unwrap();
    let forms = lienard_coefficients();
    let want: Vec<Float> = ["c0", "c1", "c2", "c3"].iter().map(|n| forms.get(n).eval_float(&a, Some(&k), PREC)).collect();
    let worst = |extra: usize| {
        let fit = fit_expansion_with(&samples, extra).unwrap();
        let c = fit.unsigned();
        want.iter().enumerate().map(|(i, w)| rel(&c[i], w)).fold(0.0, f64::max)
    };
    let augmented = worst(3);
    let plain = worst(0);
    let dt = t.elapsed();
    ok(
        augmented <= 1e-4 && dt < Duration::from_secs(60),
        format!("max rel error c0..c3 {augmented:.1e} with remainder columns ({plain:.1e} plain basis), {dt:.2?}"),
    )
}

fn loop_identity() -> Outcome {
    let m = HamiltonianModel::lienard();
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let pq = PerturbationPoly::lienard(&random_params(&mut r));
        let c = c_integrals(&m, &pq, PREC).unwrap();
        let sum = Float::with_val(PREC, &c.c41.value + &c.c41_tilde.value);
        worst = worst.max(rel(&sum, &c.cstar31));
    }
    ok(worst <= 1e-8, format!("10 vectors, max rel deviation {worst:.1e}"))
}

fn zero_counts() -> Outcome {
    let k = compute_constants(20).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    let count = |l: u32, variant: u32, ratio: f64, branch: SubBranch| {
        let mut spec = ChainSpec::new(l, variant);
        spec.ratio = ratio;
        spec.sub_branch = branch;
        let (_, rep) = run(&spec, &k).unwrap();
        let certified = rep.ambiguous.is_empty() && rep.zeros.iter().all(|z| z.margin_near > 1.0 && z.margin_far > 1.0);
        (rep.counts, rep.total, certified)
    };
    for (variant, want) in [(1, [6, 6, 4]), (2, [6, 5, 5]), (3, [5, 6, 5])] {
        for ratio in [1e-4, 5e-5] {
            let (c, total, cert) = count(9, variant, ratio, SubBranch::A);
            pass &= c == want && total == 16 && cert;
            if ratio == 1e-4 {
                notes.push(format!("l=9 v{variant} {c:?}"));
            }
        }
    }
    for (l, want) in [(8, 14), (7, 13), (6, 11)] {
        for ratio in [1e-4, 5e-5] {
            let (_, total, cert) = count(l, 1, ratio, SubBranch::A);
            pass &= total == want && cert;
            if ratio == 1e-4 {
                notes.push(format!("l={l} total {total}"));
            }
        }
    }
    ok(pass, format!("{}; stable under ratio 1e-4 -> 5e-5; all brackets certified", notes.join(", ")))
}

fn properties() -> Outcome {
    let mut r = rng(99);
    let mut fails = Vec::new();

    // ring axioms in Q(√2, β) with β⁶ = -h6
    let mut ring = true;
    for _ in 0..40 {
        let h6 = q(-r.random_range(1..=5), r.random_range(1..=3));
        let mut elt = || {
            (0..3).fold(AlgebraicElement::zero(&h6).unwrap(), |acc, _| {
                let m = AlgebraicElement::monomial(small_rational(&mut r), r.random_range(0..2), r.random_range(0..6), &h6);
                acc.try_add(&m.unwrap()).unwrap()
            })
        };
        let (a, b, c) = (elt(), elt(), elt());
        ring &= a.try_mul(&b).unwrap().try_mul(&c).unwrap() == a.try_mul(&b.try_mul(&c).unwrap()).unwrap();
        ring &= a.try_mul(&b.try_add(&c).unwrap()).unwrap()
            == a.try_mul(&b).unwrap().try_add(&a.try_mul(&c).unwrap()).unwrap();
    }
    if !ring {
        fails.push("ring axioms");
    }

    // series round trips
    let mut series = true;
    for _ in 0..40 {
        let mut v: Vec<Rational> = (0..9).map(|_| small_rational(&mut r)).collect();
        v[0] = Rational::new();
        v[1] = q(r.random_range(1..=4), 1);
        let f = Series1::new(v.clone(), 9, &());
        series &= f.compose(&f.reversion().unwrap()).unwrap() == Series1::x(9, &());
        v[0] = q(1, 1);
        let g = Series1::new(v, 9, &());
        series &= g.mul(&g.recip().unwrap()) == Series1::constant(q(1, 1), 9);
        series &= g.pow_rational(&q(1, 2)).unwrap().pow(2) == g;
    }
    if !series {
        fails.push("series round trips");
    }

    // fit round trip over three decades
    let mut fit = true;
    for side in [Side::InnerRight, Side::InnerLeft, Side::Outer] {
        let levels = geometric_grid(1e-6, 1e-3, 40, side, 256).unwrap();
        let n = basis(&levels[0], side).len();
        let c: Vec<Float> = (0..n).map(|_| Float::with_val(256, r.random_range(-1.0..1.0))).collect();
        let m = levels
            .iter()
            .map(|h| basis(h, side).iter().zip(&c).fold(Float::new(256), |acc, (b, x)| acc + Float::with_val(256, b * x)))
            .collect();
        let got = fit_expansion_with(&BasisSample { side, h: levels, m }, 0).unwrap();
        for (g, w) in got.coefficients.iter().zip(&c) {
            fit &= Float::with_val(256, g - w).abs().to_f64() <= 1e-8 * w.to_f64().abs().max(1e-3);
        }
    }
    if !fit {
        fails.push("fit round trip");
    }

    // node rule on a traced oval converges to the adaptive quadrature
    let mut conv = true;
    let m = HamiltonianModel::lienard();
    for _ in 0..4 {
        let pq = PerturbationPoly::lienard(&random_params(&mut r));
        let h = Float::with_val(PREC, -1e-3);
        let exact = melnikov_integral(&trace_oval(&m, &h, Side::InnerRight, 8).unwrap(), &pq).unwrap().value.to_f64();
        let err = |n| (melnikov_nodes(&trace_oval(&m, &h, Side::InnerRight, n).unwrap(), &pq) - exact).abs();
        let scale = exact.abs().max(1.0);
        conv &= err(1024) <= err(64).max(1e-13 * scale) && err(1024) < 1e-10 * scale;
    }
    if !conv {
        fails.push("oval convergence");
    }

    ok(
        fails.is_empty(),
        if fails.is_empty() {
            "ring axioms, series round trips, fit round trip, oval convergence (full proptest suites in tests/properties.rs)".into()
        } else {
            format!("failed: {}", fails.join(", "))
        },
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "constants", constants),
        (2, "appendix oracle", appendix_oracle),
        (3, "symbolic identities", identities),
        (4, "closed-form brackets", closed_forms),
        (5, "Lienard solves", solves),
        (6, "fit cross-validation", cross_validation),
        (7, "loop-time identity", loop_identity),
        (8, "zero counts", zero_counts),
        (9, "property suites", properties),
    ];
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {n} {name}: {} [{:.2?}]", o.detail, t.elapsed());
        if !o.pass && !KNOWN_FAIL.contains(&n) {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
