//! The three asymptotic expansions of the Melnikov functions at `h = 0` and least-squares
//! extraction of their coefficients from sampled values.

use rayon::prelude::*;
use rug::{Float, Rational};
use serde::Serialize;
use thiserror::Error;

use crate::constants::{fmt_float, UniversalConstants};
use crate::hamiltonian::HamiltonianModel;
use crate::ovals::{melnikov_integral, trace_oval, OvalError, PerturbationPoly, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpansionError {
    #[error("need at least {need} samples, got {have}")]
    TooFewSamples { need: usize, have: usize },
    #[error("sample h = {0} has the wrong sign for this side")]
    WrongSide(String),
    #[error("sample levels are not strictly monotone")]
    NotMonotone,
    #[error("missing chain value {0}")]
    MissingChain(&'static str),
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Oval(#[from] OvalError),
}

pub const INNER_BASIS: [&str; 10] = [
    "1", "|h|^(2/3)", "|h|^(5/6)", "h ln|h|", "h", "|h|^(7/6)", "|h|^(4/3)", "|h|^(5/3)", "|h|^(11/6)", "h^2 ln|h|",
];
pub const OUTER_BASIS: [&str; 7] = ["1", "h^(2/3)", "h ln h", "h", "h^(4/3)", "h^(5/3)", "h^2 ln h"];

/// `|h|^{num/6}`.
fn pow6(a: &Float, num: u32) -> Float {
    let prec = a.prec();
    Float::with_val(prec, a.ln_ref()) * num / 6u32
}

/// Next terms of the remainder beyond `h² ln|h|`, in order of growth.
pub const INNER_REMAINDER: [&str; 3] = ["h^2", "|h|^(13/6)", "|h|^(7/3)"];
pub const OUTER_REMAINDER: [&str; 3] = ["h^2", "h^(7/3)", "h^(8/3)"];

/// Remainder columns used by [`fit_expansion`].
pub const DEFAULT_REMAINDER_TERMS: usize = 3;

/// The first `n` remainder terms at `h`.
pub fn remainder_basis(h: &Float, side: Side, n: usize) -> Vec<Float> {
    let prec = h.prec();
    let a = Float::with_val(prec, h.abs_ref());
    let p = |num: u32| pow6(&a, num).exp();
    let all = match side {
        Side::Outer => vec![p(12), p(14), p(16)],
        _ => vec![p(12), p(13), p(14)],
    };
    all.into_iter().take(n).collect()
}

/// Basis values at `h` for the given side, without any sign flips.
pub fn basis(h: &Float, side: Side) -> Vec<Float> {
    let prec = h.prec();
    let a = Float::with_val(prec, h.abs_ref());
    let ln = Float::with_val(prec, a.ln_ref());
    let p = |num: u32| pow6(&a, num).exp();
    let hln = Float::with_val(prec, h * &ln);
    let h2ln = Float::with_val(prec, h * h) * &ln;
    match side {
        Side::InnerRight | Side::InnerLeft => vec![
            Float::with_val(prec, 1u32),
            p(4),
            p(5),
            hln,
            h.clone(),
            p(7),
            p(8),
            p(10),
            p(11),
            h2ln,
        ],
        Side::Outer => vec![Float::with_val(prec, 1u32), p(4), hln, h.clone(), p(8), p(10), h2ln],
    }
}

/// Coefficients of all three expansions.
///
/// The outer coefficients `c*_i` other than `c*_3` are tied to the inner ones on construction.
#[derive(Clone, Debug)]
pub struct MelnikovExpansion {
    /// `c_0 .. c_9`.
    pub c: Vec<Float>,
    pub c0_tilde: Float,
    pub c4_tilde: Float,
    /// `c*_0 .. c*_6`.
    pub cstar: Vec<Float>,
    pub d1: Float,
    pub d2: Float,
}

impl MelnikovExpansion {
    /// From inner data plus `c*_3`, with `c*_0 = c_0 + c̃_0`, `c*_1 = -D_1 c_1`, `c*_2 = c_3`,
    /// `c*_4 = -D_2 c_6`, `c*_5 = D_1 c_7`, `c*_6 = c_9`.
    pub fn from_inner(c: Vec<Float>, c0_tilde: Float, c4_tilde: Float, cstar3: Float, d1: Float, d2: Float) -> Self {
        assert_eq!(c.len(), 10, "c_0 .. c_9");
        let prec = c[0].prec();
        let cstar = vec![
            Float::with_val(prec, &c[0] + &c0_tilde),
            -Float::with_val(prec, &d1 * &c[1]),
            c[3].clone(),
            cstar3,
            -Float::with_val(prec, &d2 * &c[6]),
            Float::with_val(prec, &d1 * &c[7]),
            c[9].clone(),
        ];
        MelnikovExpansion { c, c0_tilde, c4_tilde, cstar, d1, d2 }
    }

    pub fn zero(prec: u32, k: &UniversalConstants) -> Self {
        let z = || Float::new(prec);
        Self::from_inner(vec![z(); 10], z(), z(), z(), Float::with_val(prec, &k.d1), Float::with_val(prec, &k.d2))
    }

    /// Signed coefficients multiplying [`basis`] on the given side.
    pub fn side_coefficients(&self, side: Side) -> Vec<Float> {
        let prec = self.c[0].prec();
        match side {
            Side::InnerRight => self.c.clone(),
            Side::InnerLeft => {
                let mut v = self.c.clone();
                v[0] = self.c0_tilde.clone();
                v[4] = self.c4_tilde.clone();
                for k in [2, 5, 8] {
                    v[k] = -v[k].clone();
                }
                v
            }
            Side::Outer => {
                let two = |x: &Float| Float::with_val(prec, x * 2u32);
                vec![
                    self.cstar[0].clone(),
                    two(&self.cstar[1]),
                    two(&self.cstar[2]),
                    self.cstar[3].clone(),
                    two(&self.cstar[4]),
                    two(&self.cstar[5]),
                    two(&self.cstar[6]),
                ]
            }
        }
    }

    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let f = |v: &[Float]| v.iter().map(|x| fmt_float(x, digits)).collect::<Vec<_>>();
        serde_json::json!({
            "c": f(&self.c),
            "c0_tilde": fmt_float(&self.c0_tilde, digits),
            "c4_tilde": fmt_float(&self.c4_tilde, digits),
            "cstar": f(&self.cstar),
            "digits": digits,
        })
    }
}

/// Truncated expansion through the `h² ln|h|` term.
pub fn eval_expansion(e: &MelnikovExpansion, h: &Float, side: Side) -> Float {
    let prec = h.prec();
    let mut s = Float::new(prec);
    for (c, b) in e.side_coefficients(side).iter().zip(basis(h, side)) {
        s += b * c;
    }
    s
}

/// Values of the `r̃`, `r^{(1)}` chain entering the coefficient formulas.
#[derive(Clone, Debug, Default)]
pub struct ChainValues {
    pub r00: Option<Float>,
    pub r10: Option<Float>,
    pub r20: Option<Float>,
    pub r30: Option<Float>,
    pub r40: Option<Float>,
    pub r01: Option<Float>,
    pub r60: Option<Float>,
    pub r11: Option<Float>,
    pub r70: Option<Float>,
    pub r21: Option<Float>,
    pub r80: Option<Float>,
}

/// Integrals that the chain does not determine.
#[derive(Clone, Debug)]
pub struct LoopData {
    pub c0: Float,
    pub c0_tilde: Float,
    pub c4: Float,
    pub c4_tilde: Float,
    pub cstar3: Float,
}

pub fn assemble_from_chain(r: &ChainValues, k: &UniversalConstants, data: &LoopData) -> Result<MelnikovExpansion, ExpansionError> {
    let prec = data.c0.prec();
    let need = |x: &Option<Float>, name: &'static str| x.clone().ok_or(ExpansionError::MissingChain(name));
    let q = |n: i32, d: u32| Float::with_val(prec, Rational::from((n, d)));
    let (r00, r10, r20) = (need(&r.r00, "r00")?, need(&r.r10, "r10")?, need(&r.r20, "r20")?);
    let (r30, r40) = (need(&r.r30, "r30")?, need(&r.r40, "r40")?);
    let (r01, r60, r11, r70) = (need(&r.r01, "r01")?, need(&r.r60, "r60")?, need(&r.r11, "r11")?, need(&r.r70, "r70")?);
    let (r21, r80) = (need(&r.r21, "r21")?, need(&r.r80, "r80")?);
    let lin = |a: Float, x: &Float, b: Float, y: &Float| Float::with_val(prec, a * x) + Float::with_val(prec, b * y);
    let c = vec![
        data.c0.clone(),
        Float::with_val(prec, &k.a0t * &r00),
        Float::with_val(prec, &k.a1t * &r10),
        Float::with_val(prec, &r20 * q(-1, 12)),
        data.c4.clone(),
        Float::with_val(prec, &k.a3t * &r30),
        Float::with_val(prec, &k.a4t * &r40),
        -Float::with_val(prec, &k.a0t * lin(q(9, 10), &r01, q(-1, 10), &r60)),
        -Float::with_val(prec, &k.a1t * lin(q(9, 11), &r11, q(-2, 11), &r70)),
        lin(q(3, 4), &r21, q(-1, 4), &r80) * q(-1, 12),
    ];
    Ok(MelnikovExpansion::from_inner(
        c,
        data.c0_tilde.clone(),
        data.c4_tilde.clone(),
        data.cstar3.clone(),
        Float::with_val(prec, &k.d1),
        Float::with_val(prec, &k.d2),
    ))
}

/// Signed levels and Melnikov values on one side.
#[derive(Clone, Debug)]
pub struct BasisSample {
    pub side: Side,
    pub h: Vec<Float>,
    pub m: Vec<Float>,
}

impl BasisSample {
    pub fn validate(&self) -> Result<(), ExpansionError> {
        let want_pos = self.side == Side::Outer;
        for h in &self.h {
            if h.is_zero() || h.is_sign_positive() != want_pos {
                return Err(ExpansionError::WrongSide(fmt_float(h, 6)));
            }
        }
        let inc = self.h.windows(2).all(|w| w[0] < w[1]);
        let dec = self.h.windows(2).all(|w| w[0] > w[1]);
        if !(inc || dec) {
            return Err(ExpansionError::NotMonotone);
        }
        Ok(())
    }

    pub fn to_csv(&self, digits: usize) -> String {
        let mut s = String::from("h,M\n");
        for (h, m) in self.h.iter().zip(&self.m) {
            s.push_str(&format!("{},{}\n", fmt_float(h, digits), fmt_float(m, digits)));
        }
        s
    }

    pub fn from_csv(text: &str, side: Side, prec: u32) -> Result<Self, ExpansionError> {
        let mut h = Vec::new();
        let mut m = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with('h')) {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| ExpansionError::Grid(format!("line {}: {line:?}", k + 1)))?;
            let parse = |t: &str| {
                Float::parse(t.trim())
                    .map(|p| Float::with_val(prec, p))
                    .map_err(|_| ExpansionError::Grid(format!("line {}: bad number {t:?}", k + 1)))
            };
            h.push(parse(a)?);
            m.push(parse(b)?);
        }
        let s = BasisSample { side, h, m };
        s.validate()?;
        Ok(s)
    }
}

/// `n` levels geometric in `|h|` from `lo` to `hi`, signed for `side`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize, side: Side, prec: u32) -> Result<Vec<Float>, ExpansionError> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(ExpansionError::Grid(format!("need 0 < lo < hi and n >= 2, got {lo}, {hi}, {n}")));
    }
    let (l0, l1) = (Float::with_val(prec, lo).ln(), Float::with_val(prec, hi).ln());
    let step = Float::with_val(prec, &l1 - &l0) / (n as u32 - 1);
    Ok((0..n)
        .map(|k| {
            let v = Float::with_val(prec, &l0 + Float::with_val(prec, &step * k as u32)).exp();
            v * side.level_sign()
        })
        .collect())
}

/// `M(h)` on each level, in parallel.
pub fn sample_melnikov(
    model: &HamiltonianModel,
    pq: &PerturbationPoly,
    side: Side,
    levels: &[Float],
) -> Result<BasisSample, ExpansionError> {
    let m: Result<Vec<Float>, OvalError> = levels
        .par_iter()
        .map(|h| {
            let o = trace_oval(model, h, side, 8)?;
            Ok(melnikov_integral(&o, pq)?.value)
        })
        .collect();
    Ok(BasisSample { side, h: levels.to_vec(), m: m? })
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub side: Side,
    pub basis: Vec<&'static str>,
    #[serde(skip)]
    pub coefficients: Vec<Float>,
    #[serde(skip)]
    pub stderr: Vec<Float>,
    /// Nuisance columns absorbing the `O(h²)` remainder.
    pub remainder_basis: Vec<&'static str>,
    #[serde(skip)]
    pub remainder: Vec<Float>,
    /// Ratio of the largest to the smallest pivot of the scaled, column-pivoted `R`.
    pub condition: f64,
    pub ill_conditioned: bool,
    pub residual_norm: f64,
}

impl FitResult {
    /// Coefficients in the `c` convention of the side (sign flips and factors of 2 undone).
    pub fn unsigned(&self) -> Vec<Float> {
        let mut v = self.coefficients.clone();
        match self.side {
            Side::InnerRight => {}
            Side::InnerLeft => {
                for k in [2, 5, 8] {
                    v[k] = -v[k].clone();
                }
            }
            Side::Outer => {
                for k in [1, 2, 4, 5, 6] {
                    v[k] /= 2u32;
                }
            }
        }
        v
    }

    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        serde_json::json!({
            "side": self.side,
            "basis": self.basis,
            "coefficients": self.coefficients.iter().map(|x| fmt_float(x, digits)).collect::<Vec<_>>(),
            "stderr": self.stderr.iter().map(|x| fmt_float(x, 3)).collect::<Vec<_>>(),
            "remainder_basis": self.remainder_basis,
            "remainder": self.remainder.iter().map(|x| fmt_float(x, digits)).collect::<Vec<_>>(),
            "condition": format!("{:.3e}", self.condition),
            "ill_conditioned": self.ill_conditioned,
            "residual_norm": format!("{:.3e}", self.residual_norm),
            "digits": digits,
        })
    }
}

/// Condition estimates above this are flagged.
pub const CONDITION_LIMIT: f64 = 1e13;

/// [`fit_expansion_with`] using [`DEFAULT_REMAINDER_TERMS`] nuisance columns.
pub fn fit_expansion(samples: &BasisSample) -> Result<FitResult, ExpansionError> {
    fit_expansion_with(samples, DEFAULT_REMAINDER_TERMS)
}

/// Least squares in the side's singular basis plus `extra` remainder columns: unit-norm column
/// scaling, Householder QR with column pivoting, all in the sample precision.
pub fn fit_expansion_with(samples: &BasisSample, extra: usize) -> Result<FitResult, ExpansionError> {
    samples.validate()?;
    let side = samples.side;
    let (names, rem_names): (Vec<&'static str>, Vec<&'static str>) = match side {
        Side::Outer => (OUTER_BASIS.to_vec(), OUTER_REMAINDER.iter().take(extra).copied().collect()),
        _ => (INNER_BASIS.to_vec(), INNER_REMAINDER.iter().take(extra).copied().collect()),
    };
    let main = names.len();
    let k = main + rem_names.len();
    let n = samples.h.len();
    if n < 2 * k {
        return Err(ExpansionError::TooFewSamples { need: 2 * k, have: n });
    }
    let prec = samples.h[0].prec();
    let mut a: Vec<Vec<Float>> = samples
        .h
        .iter()
        .map(|h| {
            let mut row = basis(h, side);
            row.extend(remainder_basis(h, side, rem_names.len()));
            row
        })
        .collect();
    let mut b: Vec<Float> = samples.m.iter().map(|m| Float::with_val(prec, m)).collect();
    // column scaling
    let mut scale = Vec::with_capacity(k);
    for j in 0..k {
        let mut s = Float::new(prec);
        for row in &a {
            s += Float::with_val(prec, row[j].square_ref());
        }
        let s = s.sqrt();
        let s = if s.is_zero() { Float::with_val(prec, 1u32) } else { s };
        for row in a.iter_mut() {
            row[j] /= &s;
        }
        scale.push(s);
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut col_norm2: Vec<Float> = (0..k)
        .map(|j| a.iter().fold(Float::new(prec), |acc, r| acc + Float::with_val(prec, r[j].square_ref())))
        .collect();
    for step in 0..k {
        // pivot: largest remaining column norm
        let piv = (step..k)
            .max_by(|&x, &y| col_norm2[x].partial_cmp(&col_norm2[y]).expect("finite"))
            .expect("nonempty");
        if piv != step {
            for row in a.iter_mut() {
                row.swap(step, piv);
            }
            perm.swap(step, piv);
            col_norm2.swap(step, piv);
        }
        // Householder on column `step`, rows step..n
        let mut norm = Float::new(prec);
        for row in a.iter().skip(step) {
            norm += Float::with_val(prec, row[step].square_ref());
        }
        let norm = norm.sqrt();
        if norm.is_zero() {
            continue;
        }
        let alpha = if a[step][step].is_sign_negative() { norm.clone() } else { -norm.clone() };
        let mut v: Vec<Float> = a.iter().skip(step).map(|r| r[step].clone()).collect();
        v[0] -= &alpha;
        let vnorm2 = v.iter().fold(Float::new(prec), |acc, x| acc + Float::with_val(prec, x.square_ref()));
        if vnorm2.is_zero() {
            continue;
        }
        for j in step..k {
            let mut d = Float::new(prec);
            for (i, vi) in v.iter().enumerate() {
                d += Float::with_val(prec, vi * &a[step + i][j]);
            }
            let f = Float::with_val(prec, &d * 2u32) / &vnorm2;
            for (i, vi) in v.iter().enumerate() {
                a[step + i][j] -= Float::with_val(prec, vi * &f);
            }
        }
        let mut d = Float::new(prec);
        for (i, vi) in v.iter().enumerate() {
            d += Float::with_val(prec, vi * &b[step + i]);
        }
        let f = Float::with_val(prec, &d * 2u32) / &vnorm2;
        for (i, vi) in v.iter().enumerate() {
            b[step + i] -= Float::with_val(prec, vi * &f);
        }
        for j in step + 1..k {
            col_norm2[j] -= Float::with_val(prec, a[step][j].square_ref());
        }
    }
    // back substitution R z = (Qᵀb)[..k]
    let mut z = vec![Float::new(prec); k];
    for i in (0..k).rev() {
        let mut s = b[i].clone();
        for j in i + 1..k {
            s -= Float::with_val(prec, &a[i][j] * &z[j]);
        }
        z[i] = if a[i][i].is_zero() { Float::new(prec) } else { s / &a[i][i] };
    }
    let resid2 = b[k..].iter().fold(Float::new(prec), |acc, x| acc + Float::with_val(prec, x.square_ref()));
    let sigma2 = Float::with_val(prec, &resid2 / (n - k) as u32);
    // diag((RᵀR)⁻¹) = row norms² of R⁻¹
    let mut rinv = vec![vec![Float::new(prec); k]; k];
    for c in 0..k {
        for i in (0..=c).rev() {
            let mut s = if i == c { Float::with_val(prec, 1u32) } else { Float::new(prec) };
            for j in i + 1..=c {
                s -= Float::with_val(prec, &a[i][j] * &rinv[j][c]);
            }
            rinv[i][c] = if a[i][i].is_zero() { Float::new(prec) } else { s / &a[i][i] };
        }
    }
    let diag_abs: Vec<f64> = (0..k).map(|i| a[i][i].to_f64().abs()).collect();
    let dmax = diag_abs.iter().cloned().fold(0.0, f64::max);
    let dmin = diag_abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if dmin == 0.0 { f64::INFINITY } else { dmax / dmin };
    let mut coefficients = vec![Float::new(prec); k];
    let mut stderr = vec![Float::new(prec); k];
    for i in 0..k {
        let col = perm[i];
        coefficients[col] = Float::with_val(prec, &z[i] / &scale[col]);
        let v = rinv[i].iter().fold(Float::new(prec), |acc, x| acc + Float::with_val(prec, x.square_ref()));
        stderr[col] = (v * &sigma2).sqrt() / &scale[col];
    }
    let remainder = coefficients.split_off(main);
    stderr.truncate(main);
    Ok(FitResult {
        side,
        basis: names,
        coefficients,
        stderr,
        remainder_basis: rem_names,
        remainder,
        condition,
        ill_conditioned: condition > CONDITION_LIMIT,
        residual_norm: resid2.sqrt().to_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::compute_constants;

    const PREC: u32 = 200;

    fn fl(x: f64) -> Float {
        Float::with_val(PREC, x)
    }

    #[test]
    fn zero_expansion_is_zero() {
        let k = compute_constants(20).unwrap();
        let e = MelnikovExpansion::zero(PREC, &k);
        for side in Side::ALL {
            let h = fl(1e-4 * side.level_sign() as f64);
            assert!(eval_expansion(&e, &h, side).is_zero());
        }
    }

    #[test]
    fn single_term() {
        let k = compute_constants(20).unwrap();
        let mut e = MelnikovExpansion::zero(PREC, &k);
        e.c[1] = fl(1.0);
        let v = eval_expansion(&e, &fl(-1e-6), Side::InnerRight).to_f64();
        assert!((v - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn sign_pattern_on_the_left() {
        let k = compute_constants(20).unwrap();
        let mut e = MelnikovExpansion::zero(PREC, &k);
        e.c[2] = fl(1.0);
        let h = fl(-1e-3);
        let r = eval_expansion(&e, &h, Side::InnerRight).to_f64();
        let l = eval_expansion(&e, &h, Side::InnerLeft).to_f64();
        assert!((r + l).abs() < 1e-18 && r > 0.0);
    }

    #[test]
    fn fit_recovers_coefficients() {
        let k = compute_constants(20).unwrap();
        let c: Vec<Float> = (0..10).map(|i| fl((i as f64 * 0.7).sin() + 0.1)).collect();
        let e = MelnikovExpansion::from_inner(c.clone(), fl(0.3), fl(-0.2), fl(0.5), k.d1.clone(), k.d2.clone());
        for side in Side::ALL {
            let hs = geometric_grid(1e-6, 1e-3, 40, side, PREC).unwrap();
            let m = hs.iter().map(|h| eval_expansion(&e, h, side)).collect();
            let fit = fit_expansion(&BasisSample { side, h: hs, m }).unwrap();
            for (got, want) in fit.coefficients.iter().zip(e.side_coefficients(side)) {
                let err = Float::with_val(PREC, got - &want).abs().to_f64();
                assert!(err < 1e-8 * want.to_f64().abs().max(1.0), "{side}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn outer_relations() {
        let k = compute_constants(20).unwrap();
        let c: Vec<Float> = (0..10).map(|i| fl(i as f64 + 1.0)).collect();
        let e = MelnikovExpansion::from_inner(c, fl(0.5), fl(0.0), fl(0.0), k.d1.clone(), k.d2.clone());
        assert_eq!(e.cstar[2], e.c[3]);
        assert_eq!(e.cstar[6], e.c[9]);
        assert_eq!(e.cstar[0].to_f64(), 1.5);
    }

    #[test]
    fn too_few_samples() {
        let hs = geometric_grid(1e-6, 1e-3, 10, Side::InnerRight, PREC).unwrap();
        let m = hs.clone();
        assert!(matches!(
            fit_expansion(&BasisSample { side: Side::InnerRight, h: hs, m }),
            Err(ExpansionError::TooFewSamples { .. })
        ));
    }
}
