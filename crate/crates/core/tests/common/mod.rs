#![allow(dead_code)]

use cuspidal::exact::Rational;
use cuspidal::hamiltonian::HamiltonianModel;
use cuspidal::lienard::LienardParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

/// `p/q` with `q ∈ 1..=4`, `|p/q| ≤ 3`.
pub fn small_rational(r: &mut impl Rng) -> Rational {
    let d: i64 = r.random_range(1..=4);
    let n: i64 = r.random_range(-3 * d..=3 * d);
    q(n, d)
}

/// Up to eight terms `h_ij x^i y^j` with `i + j ≥ 3` and `i + 2j ≤ 14` (the only ones reaching `h_14`).
pub fn random_hamiltonian(r: &mut impl Rng) -> HamiltonianModel {
    let slots: Vec<(u32, u32)> = (0..=14u32)
        .flat_map(|i| (0..=7u32).map(move |j| (i, j)))
        .filter(|&(i, j)| i + j >= 3 && i + 2 * j <= 14)
        .collect();
    let n = r.random_range(1..=8);
    let terms: Vec<(u32, u32, Rational)> = (0..n)
        .map(|_| {
            let (i, j) = slots[r.random_range(0..slots.len())];
            (i, j, small_rational(r))
        })
        .collect();
    HamiltonianModel::new(terms, 14).expect("valid terms")
}

/// `a_0..a_12` with small rational entries, each nonzero with probability 3/4.
pub fn random_params(r: &mut impl Rng) -> LienardParams {
    let v: Vec<Rational> = (0..13)
        .map(|_| if r.random_range(0..4) == 0 { Rational::new() } else { small_rational(r) })
        .collect();
    LienardParams::from_slice(&v).unwrap()
}

fn mul_trunc(a: &[Rational], b: &[Rational], n: usize) -> Vec<Rational> {
    let mut out = vec![Rational::new(); n + 1];
    for (i, x) in a.iter().enumerate() {
        if x.cmp0().is_eq() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if i + j > n {
                break;
            }
            out[i + j] += Rational::from(x * y);
        }
    }
    out
}

fn pow_trunc(a: &[Rational], k: u32, n: usize) -> Vec<Rational> {
    let mut p = vec![Rational::new(); n + 1];
    p[0] = Rational::from(1);
    for _ in 0..k {
        p = mul_trunc(&p, a, n);
    }
    p
}

/// `h(x) = H(x, φ(x))` through `x^n`, with `φ` from the fixed point `y = -Σ j h_ij x^i y^{j-1}`.
///
/// Plain truncated polynomial arithmetic, independent of the series machinery.
pub fn naive_h_series(h: &HamiltonianModel, n: usize) -> Vec<Rational> {
    let terms: Vec<(u32, u32, Rational)> = h.terms().map(|(i, j, c)| (i, j, c.clone())).collect();
    let mut phi = vec![Rational::new(); n + 1];
    // each pass fixes at least one more coefficient
    for _ in 0..=n {
        let mut next = vec![Rational::new(); n + 1];
        for (i, j, c) in &terms {
            if *j == 0 || *i as usize > n {
                continue;
            }
            let yp = pow_trunc(&phi, j - 1, n);
            for (k, v) in yp.iter().enumerate() {
                if k + *i as usize <= n {
                    next[k + *i as usize] -= Rational::from(v * c) * *j;
                }
            }
        }
        phi = next;
    }
    let mut out = mul_trunc(&phi, &phi, n);
    for v in out.iter_mut() {
        *v /= 2;
    }
    for (i, j, c) in &terms {
        if *i as usize > n {
            continue;
        }
        let yp = pow_trunc(&phi, *j, n);
        for (k, v) in yp.iter().enumerate() {
            if k + *i as usize <= n {
                out[k + *i as usize] += Rational::from(v * c);
            }
        }
    }
    out
}

/// The seven identities `r̃ = r^{(1)}` stated after the coefficient theorem.
pub const IDENTITIES: [(&str, &str); 7] = [
    ("rt_0_0", "r1_0_1"),
    ("rt_2_0", "r1_1_1"),
    ("rt_4_0", "r1_2_1"),
    ("rt_6_0", "r1_3_1"),
    ("rt_8_0", "r1_4_1"),
    ("rt_0_1", "r1_0_3"),
    ("rt_2_1", "r1_1_3"),
];

pub fn keep_chain_symbols(n: &str) -> bool {
    n.starts_with("alpha_") || n.starts_with("mubar_") || n.starts_with("nbar_")
}
