//! The six universal constants `Ã_0, Ã_1, Ã_3, Ã_4, Ā_0, Ā_2` by double-exponential quadrature.

use rug::float::Constant;
use rug::Float;
use serde::Serialize;
use thiserror::Error;

use crate::exact::bits_for_digits;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstantsError {
    #[error("digits must be at least 10, got {0}")]
    TooFewDigits(u32),
    #[error("{name}: precision target not met, error estimate {achieved}")]
    PrecisionNotMet { name: String, achieved: String },
}

/// Result of a tanh-sinh run.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub value: Float,
    /// Difference between the last two levels.
    pub error: Float,
    pub levels: u32,
    pub evaluations: usize,
}

/// `∫_0^1 f` by tanh-sinh; `f` receives `(x, 1 - x)` with both computed without cancellation.
///
/// Refines until two successive levels differ by less than `tol` (relative to the value) or
/// `max_level` is reached.
pub fn tanh_sinh_unit<F>(f: F, prec: u32, tol: &Float, max_level: u32) -> Quadrature
where
    F: Fn(&Float, &Float) -> Float,
{
    let half_pi = Float::with_val(prec, Constant::Pi) / 2u32;
    // stop once x(1-x) is negligible at this precision
    let tiny = Float::with_val(prec, Float::i_exp(1, -(2 * prec as i32) - 40));
    let node = |t: &Float| -> Option<(Float, Float, Float)> {
        let u = Float::with_val(prec, t.sinh_ref()) * &half_pi;
        let e = Float::with_val(prec, (-Float::with_val(prec, &u * 2u32)).exp_ref());
        let x = Float::with_val(prec, 1u32) / (Float::with_val(prec, 1u32) + &e);
        let omx = Float::with_val(prec, &e / (Float::with_val(prec, 1u32) + &e));
        let xx = Float::with_val(prec, &x * &omx);
        if xx < tiny || x.is_zero() || omx.is_zero() {
            return None;
        }
        let w = Float::with_val(prec, t.cosh_ref()) * &half_pi * xx * 2u32;
        Some((x, omx, w))
    };
    let mut evaluations = 0usize;
    // sum over integer multiples k·h of f·w, for a given step and parity filter
    let mut partial = |h: &Float, odd_only: bool| -> Float {
        let mut s = Float::new(prec);
        for sign in [1i32, -1] {
            let mut k: u64 = if odd_only { 1 } else if sign == 1 { 0 } else { 1 };
            loop {
                let t = Float::with_val(prec, h * k) * sign;
                let Some((x, omx, w)) = node(&t) else { break };
                s += f(&x, &omx) * w;
                evaluations += 1;
                k += if odd_only { 2 } else { 1 };
            }
        }
        s
    };
    let mut h = Float::with_val(prec, 1u32);
    let mut sum = partial(&h, false);
    let mut value = Float::with_val(prec, &sum * &h);
    let mut error = Float::with_val(prec, f64::INFINITY);
    let mut level = 0;
    while level < max_level {
        level += 1;
        h /= 2u32;
        sum += partial(&h, true);
        let next = Float::with_val(prec, &sum * &h);
        error = Float::with_val(prec, &next - &value).abs();
        value = next;
        let scale = Float::with_val(prec, value.abs_ref()).max(&Float::with_val(prec, 1e-30));
        if level >= 3 && error <= Float::with_val(prec, tol * &scale) {
            break;
        }
    }
    Quadrature { value, error, levels: level, evaluations }
}

#[derive(Clone, Debug)]
pub struct UniversalConstants {
    pub a0t: Float,
    pub a1t: Float,
    pub a3t: Float,
    pub a4t: Float,
    pub a0b: Float,
    pub a2b: Float,
    /// Error estimates in the order above.
    pub errors: [Float; 6],
    pub d1: Float,
    pub d2: Float,
    pub digits: u32,
}

pub const NAMES: [&str; 6] = ["A0_tilde", "A1_tilde", "A3_tilde", "A4_tilde", "A0_bar", "A2_bar"];

#[derive(Serialize)]
pub struct ConstantEntry {
    pub name: String,
    pub value: String,
    pub error: String,
}

impl UniversalConstants {
    pub fn values(&self) -> [&Float; 6] {
        [&self.a0t, &self.a1t, &self.a3t, &self.a4t, &self.a0b, &self.a2b]
    }

    pub fn f64s(&self) -> [f64; 6] {
        self.values().map(Float::to_f64)
    }

    /// Decimal rendering at the working digits (plus `D_1`, `D_2`).
    pub fn entries(&self) -> Vec<ConstantEntry> {
        let d = self.digits as usize;
        let mut v: Vec<ConstantEntry> = NAMES
            .iter()
            .zip(self.values())
            .zip(&self.errors)
            .map(|((n, x), e)| ConstantEntry {
                name: n.to_string(),
                value: fmt_float(x, d),
                error: fmt_float(e, 3),
            })
            .collect();
        let e1 = Float::with_val(self.a0t.prec(), &self.errors[0] + &self.errors[4]) * 4u32;
        let e2 = Float::with_val(self.a0t.prec(), &self.errors[3] + &self.errors[5]) * 4u32;
        v.push(ConstantEntry { name: "D1".into(), value: fmt_float(&self.d1, d), error: fmt_float(&e1, 3) });
        v.push(ConstantEntry { name: "D2".into(), value: fmt_float(&self.d2, d), error: fmt_float(&e2, 3) });
        v
    }
}

/// Scientific notation with `sig` significant digits.
pub fn fmt_float(x: &Float, sig: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    format!("{:.*e}", sig.saturating_sub(1), x)
}

fn one_minus_v6(v: &Float, omv: &Float) -> Float {
    // (1-v)(1+v+...+v^5) keeps full relative accuracy near v = 1
    let prec = v.prec();
    let mut s = Float::with_val(prec, 1u32);
    let mut p = Float::with_val(prec, 1u32);
    for _ in 0..5 {
        p *= v;
        s += &p;
    }
    s * omv
}

fn pow(v: &Float, n: u32) -> Float {
    use rug::ops::Pow;
    Float::with_val(v.prec(), v.pow(n))
}

pub fn compute_constants(digits: u32) -> Result<UniversalConstants, ConstantsError> {
    if digits < 10 {
        return Err(ConstantsError::TooFewDigits(digits));
    }
    let prec = bits_for_digits(digits) + 32;
    let tol = Float::with_val(prec, Float::i_exp(1, -(((digits + 4) as f64) * std::f64::consts::LOG2_10) as i32));
    let max_level = 14;
    let q = |f: &(dyn Fn(&Float, &Float) -> Float + Sync)| tanh_sinh_unit(f, prec, &tol, max_level);

    let integrals: Vec<Quadrature> = {
        let fs: Vec<Box<dyn Fn(&Float, &Float) -> Float + Sync>> = vec![
            Box::new(|v: &Float, o: &Float| Float::with_val(prec, v / one_minus_v6(v, o).sqrt())),
            Box::new(|v: &Float, o: &Float| Float::with_val(prec, one_minus_v6(v, o).sqrt().recip())),
            Box::new(|v: &Float, o: &Float| {
                let s = one_minus_v6(v, o).sqrt();
                let d = Float::with_val(prec, &s * Float::with_val(prec, &s + 1u32));
                pow(v, 4) / d
            }),
            Box::new(|v: &Float, o: &Float| {
                let s = one_minus_v6(v, o).sqrt();
                let d = Float::with_val(prec, &s * Float::with_val(prec, &s + 1u32));
                pow(v, 3) / d
            }),
            // [0,∞) folded onto [0,1] with v -> 1/v on [1,∞)
            Box::new(|v: &Float, _o: &Float| {
                let s = Float::with_val(prec, pow(v, 6) + 1u32).sqrt();
                Float::with_val(prec, 1u32 + Float::with_val(prec, v)) / s
            }),
            Box::new(|v: &Float, _o: &Float| {
                let s = Float::with_val(prec, pow(v, 6) + 1u32).sqrt();
                let a = Float::with_val(prec, v / Float::with_val(prec, &s * Float::with_val(prec, pow(v, 3) + &s)));
                let b = pow(v, 3) / Float::with_val(prec, &s * Float::with_val(prec, &s + 1u32));
                a + b
            }),
        ];
        std::thread::scope(|sc| {
            let hs: Vec<_> = fs.iter().map(|f| sc.spawn(move || q(f.as_ref()))).collect();
            hs.into_iter().map(|h| h.join().expect("quadrature thread")).collect()
        })
    };

    let r = |n: i32, d: u32| Float::with_val(prec, n) / d;
    let a0t = Float::with_val(prec, &integrals[0].value * r(-3, 4));
    let a1t = Float::with_val(prec, &integrals[1].value * r(-3, 5));
    let a3t = Float::with_val(prec, &integrals[2].value - 1u32) * r(-3, 7);
    let a4t = (Float::with_val(prec, &integrals[3].value) - r(1, 2)) * r(-3, 8);
    let a0b = Float::with_val(prec, &integrals[4].value * r(3, 4));
    let a2b = Float::with_val(prec, &integrals[5].value * r(-3, 8));
    let scales = [r(3, 4), r(3, 5), r(3, 7), r(3, 8), r(3, 4), r(3, 8)];
    let errors: [Float; 6] = std::array::from_fn(|i| Float::with_val(prec, &integrals[i].error * &scales[i]));

    let target = Float::with_val(prec, Float::i_exp(1, -((digits as f64) * std::f64::consts::LOG2_10) as i32));
    let vals = [&a0t, &a1t, &a3t, &a4t, &a0b, &a2b];
    for (i, e) in errors.iter().enumerate() {
        let rel = Float::with_val(prec, e / Float::with_val(prec, vals[i].abs_ref()));
        if rel > target {
            return Err(ConstantsError::PrecisionNotMet { name: NAMES[i].into(), achieved: fmt_float(e, 3) });
        }
    }
    let d1 = Float::with_val(prec, a0b.abs_ref()) / Float::with_val(prec, a0t.abs_ref());
    let d2 = Float::with_val(prec, a2b.abs_ref()) / Float::with_val(prec, a4t.abs_ref());
    Ok(UniversalConstants { a0t, a1t, a3t, a4t, a0b, a2b, errors, d1, d2, digits })
}
