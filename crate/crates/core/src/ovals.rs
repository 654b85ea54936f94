//! Level curves `H = h` around the double loop and the line integrals taken over them.
//!
//! All integrals use the physical clockwise orientation of the Hamiltonian flow
//! `ẋ = H_y, ẏ = -H_x`. For `H = ½y² + U(x)` the integrals are evaluated at high precision by
//! double-exponential quadrature in `x`; general `H` is traced numerically in `f64`.

use std::collections::BTreeMap;
use std::str::FromStr;

use rug::float::Constant;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::tanh_sinh_unit;
use crate::exact::{fmt_rational, parse_rational, ExactError};
use crate::hamiltonian::{HamiltonianError, HamiltonianModel, Sigma};
use crate::lienard::LienardParams;

/// Smallest `|h|` accepted by the tracer.
pub const MIN_ABS_H: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OvalError {
    #[error("level h = {h} is outside the range of the {side} family")]
    LevelOutOfRange { h: String, side: Side },
    #[error("topology check failed: {0}")]
    Topology(String),
    #[error("sigma_2 = {0} is nonzero; the time integral over the loop diverges")]
    Divergent(String),
    #[error("integrand term x^{0} y^{1} is not integrable at the saddle")]
    Singular(u32, u32),
    #[error("quadrature did not converge: {0}")]
    NotConverged(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    InnerRight,
    InnerLeft,
    Outer,
}

impl Side {
    pub const ALL: [Side; 3] = [Side::InnerRight, Side::InnerLeft, Side::Outer];

    pub fn name(self) -> &'static str {
        match self {
            Side::InnerRight => "inner-right",
            Side::InnerLeft => "inner-left",
            Side::Outer => "outer",
        }
    }

    /// Sign of admissible levels.
    pub fn level_sign(self) -> i32 {
        match self {
            Side::Outer => 1,
            _ => -1,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Side {
    type Err = OvalError;
    fn from_str(s: &str) -> Result<Self, OvalError> {
        match s {
            "inner-right" | "right" => Ok(Side::InnerRight),
            "inner-left" | "left" => Ok(Side::InnerLeft),
            "outer" => Ok(Side::Outer),
            _ => Err(OvalError::Schema(format!("unknown side {s:?}"))),
        }
    }
}

type Terms = BTreeMap<(u32, u32), Rational>;

/// `p = Σ a_ij x^i y^j`, `q = Σ b_ij x^i y^j`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PerturbationPoly {
    a: Terms,
    b: Terms,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    i: u32,
    j: u32,
    c: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PqJson {
    #[serde(default)]
    p: Vec<TermJson>,
    #[serde(default)]
    q: Vec<TermJson>,
}

fn add_term(t: &mut Terms, key: (u32, u32), c: Rational) {
    let e = t.entry(key).or_default();
    *e += c;
    if e.cmp0().is_eq() {
        t.remove(&key);
    }
}

impl PerturbationPoly {
    pub fn new(
        a: impl IntoIterator<Item = ((u32, u32), Rational)>,
        b: impl IntoIterator<Item = ((u32, u32), Rational)>,
    ) -> Self {
        let mut p = Self::default();
        for (k, c) in a {
            add_term(&mut p.a, k, c);
        }
        for (k, c) in b {
            add_term(&mut p.b, k, c);
        }
        p
    }

    /// `p = 0`, `q = -f(x) y`.
    pub fn lienard(params: &LienardParams) -> Self {
        Self::new([], params.a.iter().enumerate().map(|(j, c)| ((j as u32, 1), Rational::from(-c))))
    }

    pub fn a(&self, i: u32, j: u32) -> Rational {
        self.a.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn b(&self, i: u32, j: u32) -> Rational {
        self.b.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_empty() && self.b.is_empty()
    }

    pub fn sigma(&self) -> Sigma {
        let q = |x: Rational| x;
        Sigma([
            q(self.a(1, 0) + self.b(0, 1)),
            q(Rational::from(2) * self.a(2, 0) + self.b(1, 1)),
            q(self.a(1, 1) + Rational::from(2) * self.b(0, 2)),
            q(Rational::from(3) * self.a(3, 0) + self.b(2, 1)),
        ])
    }

    /// `p_x + q_y`.
    pub fn divergence(&self) -> Terms {
        let mut d = Terms::new();
        for (&(i, j), c) in &self.a {
            if i > 0 {
                add_term(&mut d, (i - 1, j), Rational::from(c * i));
            }
        }
        for (&(i, j), c) in &self.b {
            if j > 0 {
                add_term(&mut d, (i, j - 1), Rational::from(c * j));
            }
        }
        d
    }

    /// `p_x + q_y - σ_0 - σ_1 x - σ_3 x²`, defined only when `σ_2 = 0`.
    pub fn loop_time_integrand(&self) -> Result<Terms, OvalError> {
        let s = self.sigma();
        if s.0[2].cmp0().is_ne() {
            return Err(OvalError::Divergent(fmt_rational(&s.0[2])));
        }
        let mut d = self.divergence();
        for (k, c) in [((0, 0), &s.0[0]), ((1, 0), &s.0[1]), ((2, 0), &s.0[3])] {
            add_term(&mut d, k, Rational::from(-c));
        }
        Ok(d)
    }

    pub fn from_json(text: &str) -> Result<Self, OvalError> {
        let raw: PqJson = serde_json::from_str(text).map_err(|e| OvalError::Schema(e.to_string()))?;
        let conv = |v: &[TermJson]| -> Result<Vec<((u32, u32), Rational)>, OvalError> {
            v.iter().map(|t| Ok(((t.i, t.j), parse_rational(&t.c)?))).collect()
        };
        Ok(Self::new(conv(&raw.p)?, conv(&raw.q)?))
    }

    pub fn to_json(&self) -> String {
        let conv = |t: &Terms| -> Vec<TermJson> {
            t.iter().map(|(&(i, j), c)| TermJson { i, j, c: fmt_rational(c) }).collect()
        };
        serde_json::to_string(&PqJson { p: conv(&self.a), q: conv(&self.b) }).expect("serializable")
    }

    fn eval_f64(t: &Terms, x: f64, y: f64) -> f64 {
        t.iter().map(|(&(i, j), c)| c.to_f64() * x.powi(i as i32) * y.powi(j as i32)).sum()
    }
}

/// One sample of a traced oval; `wx`, `wy` are the weights of `∮ F dx` and `∮ F dy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub wx: f64,
    pub wy: f64,
}

#[derive(Clone, Debug)]
pub struct Oval {
    pub h: Float,
    pub side: Side,
    pub x_min: Float,
    pub x_max: Float,
    pub nodes: Vec<Node>,
    potential: Option<Potential>,
}

impl Oval {
    /// True for the limit loops `L_0`, `L̃_0`, `L*_0`.
    pub fn is_limit(&self) -> bool {
        self.h.is_zero()
    }

    pub fn prec(&self) -> u32 {
        self.h.prec()
    }

    pub fn is_separable(&self) -> bool {
        self.potential.is_some()
    }

    /// `max |H - h|` over the nodes.
    pub fn residual(&self, model: &HamiltonianModel) -> f64 {
        let h = self.h.to_f64();
        self.nodes
            .iter()
            .map(|n| (h_f64(model, n.x, n.y) - h).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
struct Potential {
    terms: Vec<(u32, Rational)>,
}

impl Potential {
    fn eval(&self, x: &Float) -> Float {
        let prec = x.prec();
        let mut s = Float::new(prec);
        for (i, c) in &self.terms {
            s += powu(x, *i) * c;
        }
        s
    }

    fn eval_f64(&self, x: f64) -> f64 {
        self.terms.iter().map(|(i, c)| c.to_f64() * x.powi(*i as i32)).sum()
    }

    fn deriv(&self, x: &Float) -> Float {
        let prec = x.prec();
        let mut s = Float::new(prec);
        for (i, c) in &self.terms {
            if *i > 0 {
                s += powu(x, i - 1) * c * *i;
            }
        }
        s
    }

    fn deriv_f64(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .filter(|(i, _)| *i > 0)
            .map(|(i, c)| c.to_f64() * *i as f64 * x.powi(*i as i32 - 1))
            .sum()
    }

    fn leading_saddle_coeff(&self) -> f64 {
        self.terms.iter().find(|(i, _)| *i == 6).map_or(1.0, |(_, c)| c.to_f64().abs())
    }

}

/// `h - U(x) = (x - x_min)(x_max - x) Q(x)`, so that `Y` keeps full relative accuracy at the
/// turning points when the distances to them are known exactly.
#[derive(Clone, Debug)]
struct Branch {
    q: Vec<Float>,
}

impl Branch {
    fn new(p: &Potential, h: &Float, x_min: &Float, x_max: &Float) -> Self {
        let prec = h.prec();
        let deg = p.terms.iter().map(|t| t.0 as usize).max().unwrap_or(0).max(2);
        let mut a = vec![Float::new(prec); deg + 1];
        a[0] += h;
        for (i, c) in &p.terms {
            a[*i as usize] -= c;
        }
        let div = |a: &[Float], r: &Float| -> Vec<Float> {
            let n = a.len() - 1;
            let mut b = vec![Float::new(prec); n];
            b[n - 1] = a[n].clone();
            for k in (1..n).rev() {
                b[k - 1] = Float::with_val(prec, &a[k] + Float::with_val(prec, r * &b[k]));
            }
            b
        };
        // deflate the smaller root first
        let (r1, r2) = if Float::with_val(prec, x_min.abs_ref()) <= Float::with_val(prec, x_max.abs_ref()) {
            (x_min, x_max)
        } else {
            (x_max, x_min)
        };
        let q = div(&div(&a, r1), r2).into_iter().map(|c| -c).collect();
        Branch { q }
    }

    /// `Y(x)` from `x`, `x - x_min` and `x_max - x`.
    fn y(&self, x: &Float, dlo: &Float, dhi: &Float) -> Float {
        let prec = x.prec();
        let mut v = Float::new(prec);
        for c in self.q.iter().rev() {
            v *= x;
            v += c;
        }
        let v = v * dlo * dhi * 2u32;
        if v.is_sign_negative() {
            Float::new(prec)
        } else {
            v.sqrt()
        }
    }
}

fn powu(x: &Float, n: u32) -> Float {
    use rug::ops::Pow;
    Float::with_val(x.prec(), x.pow(n))
}

fn h_f64(m: &HamiltonianModel, x: f64, y: f64) -> f64 {
    0.5 * y * y + m.terms().map(|(i, j, c)| c.to_f64() * x.powi(i as i32) * y.powi(j as i32)).sum::<f64>()
}

fn grad_f64(m: &HamiltonianModel, x: f64, y: f64) -> (f64, f64) {
    let mut hx = 0.0;
    let mut hy = y;
    for (i, j, c) in m.terms() {
        let c = c.to_f64();
        if i > 0 {
            hx += c * i as f64 * x.powi(i as i32 - 1) * y.powi(j as i32);
        }
        if j > 0 {
            hy += c * j as f64 * x.powi(i as i32) * y.powi(j as i32 - 1);
        }
    }
    (hx, hy)
}

/// `H(x, 0)` as a sparse polynomial.
fn axis_potential(m: &HamiltonianModel) -> Potential {
    Potential { terms: m.terms().filter(|t| t.1 == 0).map(|(i, _, c)| (i, c.clone())).collect() }
}

fn root_bound(p: &Potential) -> f64 {
    let Some((lead_i, lead)) = p.terms.iter().max_by_key(|t| t.0) else { return 1.0 };
    let lead = lead.to_f64().abs();
    let m = p.terms.iter().filter(|t| t.0 != *lead_i).map(|t| t.1.to_f64().abs() / lead).fold(0.0, f64::max);
    1.0 + m
}

/// Sign-change brackets of `f` on `[a, b]` over `n` equal cells.
fn scan(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut x0 = a;
    let mut f0 = f(a);
    for k in 1..=n {
        let x1 = a + (b - a) * k as f64 / n as f64;
        let f1 = f(x1);
        if f0 == 0.0 || (f0 < 0.0) != (f1 < 0.0) {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// Root of `U - h` in `[lo, hi]` to full precision: bisection in `f64`, then guarded Newton.
fn refine_root(p: &Potential, h: &Float, lo: f64, hi: f64) -> Float {
    let prec = h.prec();
    let hf = h.to_f64();
    let g = |x: f64| p.eval_f64(x) - hf;
    let (mut a, mut b) = (lo, hi);
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (g(m) < 0.0) == (ga < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    let (mut lo_f, mut hi_f) = (Float::with_val(prec, lo), Float::with_val(prec, hi));
    let sign_lo = Float::with_val(prec, p.eval(&lo_f) - h).is_sign_negative();
    let mut x = Float::with_val(prec, 0.5 * (a + b));
    let tol = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 8));
    for _ in 0..400 {
        let fx = Float::with_val(prec, p.eval(&x) - h);
        if fx.is_zero() {
            break;
        }
        if fx.is_sign_negative() == sign_lo {
            lo_f = x.clone();
        } else {
            hi_f = x.clone();
        }
        let d = p.deriv(&x);
        let flat = d.is_zero();
        let mut next = if flat { Float::new(prec) } else { Float::with_val(prec, &x - &fx / d) };
        if flat || next <= lo_f || next >= hi_f {
            next = Float::with_val(prec, &lo_f + &hi_f) / 2u32;
        }
        let step = Float::with_val(prec, &next - &x).abs();
        x = next;
        let scale = Float::with_val(prec, x.abs_ref()).max(&Float::with_val(prec, 1e-300));
        if step <= Float::with_val(prec, &tol * &scale) {
            break;
        }
    }
    x
}

/// Ends of the double loop on the `x`-axis: `(x_L, x_R)` with `H(x, 0) < 0` strictly between.
fn loop_ends(p: &Potential) -> Result<(f64, f64), OvalError> {
    let r = root_bound(p);
    let n = 20000;
    let eps = r * 1e-5;
    let right = scan(|x| p.eval_f64(x), eps, r, n);
    let left = scan(|x| p.eval_f64(-x), eps, r, n);
    let (Some(&(ra, rb)), Some(&(la, lb))) = (right.first(), left.first()) else {
        return Err(OvalError::Topology("H(x, 0) does not return to zero on both sides of the saddle".into()));
    };
    if p.eval_f64(eps) >= 0.0 || p.eval_f64(-eps) >= 0.0 {
        return Err(OvalError::Topology("H(x, 0) is not negative next to the saddle".into()));
    }
    let zero = Float::new(128);
    let xr = refine_root(p, &zero, ra, rb).to_f64();
    let neg = Potential { terms: p.terms.iter().map(|(i, c)| (*i, if i % 2 == 1 { Rational::from(-c) } else { c.clone() })).collect() };
    let xl = -refine_root(&neg, &zero, la, lb).to_f64();
    Ok((xl, xr))
}

/// Turning points `[x_min, x_max]` of the oval on the axis.
fn level_range(p: &Potential, h: &Float, side: Side) -> Result<(Float, Float), OvalError> {
    let (xl, xr) = loop_ends(p)?;
    let prec = h.prec();
    let hf = h.to_f64();
    let out_of_range = || OvalError::LevelOutOfRange { h: format!("{hf:e}"), side };
    if h.is_zero() {
        let exact_end = |x: f64| -> Float {
            let w = 1e-6 * x.abs().max(1e-6);
            refine_root(p, h, x - w, x + w)
        };
        return Ok(match side {
            Side::InnerRight => (Float::new(prec), exact_end(xr)),
            Side::InnerLeft => (exact_end(xl), Float::new(prec)),
            Side::Outer => (exact_end(xl), exact_end(xr)),
        });
    }
    if (hf > 0.0) != (side.level_sign() > 0) || hf.abs() < MIN_ABS_H {
        return Err(out_of_range());
    }
    let g = |x: f64| p.eval_f64(x) - hf;
    let n = 40000;
    match side {
        Side::InnerRight | Side::InnerLeft => {
            let (a, b) = if side == Side::InnerRight { (0.0, xr) } else { (xl, 0.0) };
            let br = scan(g, a, b, n);
            if br.len() != 2 {
                return Err(if br.is_empty() { out_of_range() } else { OvalError::Topology(format!("{} crossings of H(x, 0) = h inside the loop", br.len())) });
            }
            Ok((refine_root(p, h, br[0].0, br[0].1), refine_root(p, h, br[1].0, br[1].1)))
        }
        Side::Outer => {
            let r = root_bound(p) + 1.0;
            let right = scan(g, 0.0, r, n);
            let left = scan(|x| g(-x), 0.0, r, n);
            let (Some(&(ra, rb)), Some(&(la, lb))) = (right.first(), left.first()) else {
                return Err(out_of_range());
            };
            let lo = refine_root(p, h, -lb, -la);
            let hi = refine_root(p, h, ra, rb);
            if hi.to_f64() <= xr || lo.to_f64() >= xl {
                return Err(OvalError::Topology("outer level crosses the axis inside the loop".into()));
            }
            Ok((lo, hi))
        }
    }
}

/// Trace `H = h` on the given side with `n_nodes` samples.
///
/// The node weights integrate `∮ F dx` (resp. `dy`) clockwise. `h = 0` gives the limit loop.
pub fn trace_oval(model: &HamiltonianModel, h: &Float, side: Side, n_nodes: usize) -> Result<Oval, OvalError> {
    let axis = axis_potential(model);
    if model.separable_potential().is_some() {
        let (x_min, x_max) = level_range(&axis, h, side)?;
        let nodes = separable_nodes(&axis, h, &x_min, &x_max, n_nodes);
        return Ok(Oval { h: h.clone(), side, x_min, x_max, nodes, potential: Some(axis) });
    }
    if h.is_zero() {
        return Err(OvalError::Unsupported("limit loops of non-separable Hamiltonians".into()));
    }
    let (xl, xr) = loop_ends(&axis)?;
    let hf = h.to_f64();
    if (hf > 0.0) != (side.level_sign() > 0) || hf.abs() < MIN_ABS_H {
        return Err(OvalError::LevelOutOfRange { h: format!("{hf:e}"), side });
    }
    // seed on the axis: the outermost crossing on the chosen side
    let g = |x: f64| axis.eval_f64(x) - hf;
    let seed = match side {
        Side::InnerRight => scan(g, 0.0, xr, 40000).last().copied(),
        Side::InnerLeft => scan(g, xl, 0.0, 40000).first().copied(),
        Side::Outer => scan(g, xr, root_bound(&axis) + 1.0, 40000).first().copied(),
    }
    .ok_or(OvalError::LevelOutOfRange { h: format!("{hf:e}"), side })?;
    let x0 = refine_root(&axis, &Float::with_val(64, hf), seed.0, seed.1).to_f64();
    let nodes = trace_general(model, hf, (x0, 0.0), n_nodes)?;
    let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), n| (a.min(n.x), b.max(n.x)));
    let prec = h.prec();
    Ok(Oval {
        h: h.clone(),
        side,
        x_min: Float::with_val(prec, lo),
        x_max: Float::with_val(prec, hi),
        nodes,
        potential: None,
    })
}

/// `x = c - r cos θ` on a shifted uniform θ grid; upper branch for `θ ∈ (0, π)`.
fn separable_nodes(p: &Potential, h: &Float, x_min: &Float, x_max: &Float, n: usize) -> Vec<Node> {
    let hf = h.to_f64();
    let (a, b) = (x_min.to_f64(), x_max.to_f64());
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let dt = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            let x = c - r * t.cos();
            let yy = (2.0 * (hf - p.eval_f64(x))).max(0.0).sqrt();
            let y = if t < std::f64::consts::PI { yy } else { -yy };
            let dx = r * t.sin();
            let dy = if y == 0.0 { 0.0 } else { -p.deriv_f64(x) * dx / y };
            Node { x, y, wx: dx * dt, wy: dy * dt }
        })
        .collect()
}

/// Arc-length continuation along the flow direction with Newton projection onto `H = h`.
fn trace_general(m: &HamiltonianModel, h: f64, start: (f64, f64), n: usize) -> Result<Vec<Node>, OvalError> {
    let tangent = |x: f64, y: f64| -> (f64, f64) {
        let (hx, hy) = grad_f64(m, x, y);
        let nrm = hx.hypot(hy);
        (hy / nrm, -hx / nrm)
    };
    let project = |mut x: f64, mut y: f64| -> (f64, f64) {
        for _ in 0..20 {
            let f = h_f64(m, x, y) - h;
            let (hx, hy) = grad_f64(m, x, y);
            let g2 = hx * hx + hy * hy;
            if g2 == 0.0 {
                break;
            }
            x -= f * hx / g2;
            y -= f * hy / g2;
            if f.abs() < 1e-15 * h.abs().max(1e-300) {
                break;
            }
        }
        (x, y)
    };
    let step = |p: (f64, f64), ds: f64| -> (f64, f64) {
        let k1 = tangent(p.0, p.1);
        let k2 = tangent(p.0 + 0.5 * ds * k1.0, p.1 + 0.5 * ds * k1.1);
        let k3 = tangent(p.0 + 0.5 * ds * k2.0, p.1 + 0.5 * ds * k2.1);
        let k4 = tangent(p.0 + ds * k3.0, p.1 + ds * k3.1);
        project(
            p.0 + ds / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            p.1 + ds / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    };
    // first pass: perimeter, by detecting the return to the seed's axis crossing
    let scale = start.0.abs().max(1e-3);
    let ds0 = scale * 1e-4;
    let mut p = start;
    let mut len = 0.0;
    let max_steps = 10_000_000usize;
    let mut k = 0;
    loop {
        let q = step(p, ds0);
        len += ds0;
        k += 1;
        if k > 10 && (p.1 < 0.0) != (q.1 < 0.0) && (q.0 - start.0).abs() < 0.1 * scale {
            // interpolate the crossing
            let frac = p.1 / (p.1 - q.1);
            len -= ds0 * (1.0 - frac);
            break;
        }
        if k > max_steps {
            return Err(OvalError::NotConverged("oval did not close".into()));
        }
        p = q;
    }
    let ds = len / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut p = start;
    for _ in 0..n {
        let t = tangent(p.0, p.1);
        nodes.push(Node { x: p.0, y: p.1, wx: t.0 * ds, wy: t.1 * ds });
        p = step(p, ds);
    }
    Ok(nodes)
}

/// `∮ q dx - p dy` by the node weights (spectral for smooth closed ovals).
pub fn melnikov_nodes(oval: &Oval, pq: &PerturbationPoly) -> f64 {
    oval.nodes
        .iter()
        .map(|n| PerturbationPoly::eval_f64(&pq.b, n.x, n.y) * n.wx - PerturbationPoly::eval_f64(&pq.a, n.x, n.y) * n.wy)
        .sum()
}

/// High-precision value with an error estimate.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub value: Float,
    pub error: Float,
}

fn quad_tol(prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 24))
}

/// `∫_a^b F` split at `breaks`, by tanh-sinh on each piece; `F` receives `(x, x - a, b - x)`.
fn piecewise<F: Fn(&Float, &Float, &Float) -> Float>(f: &F, a: &Float, b: &Float, breaks: &[Float]) -> Estimate {
    let prec = a.prec();
    let mut pts = vec![a.clone()];
    pts.extend(breaks.iter().filter(|x| *x > a && *x < b).cloned());
    pts.push(b.clone());
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let tol = quad_tol(prec);
    let mut value = Float::new(prec);
    let mut error = Float::new(prec);
    let last = pts.len() - 2;
    for (k, w) in pts.windows(2).enumerate() {
        let (lo, hi) = (&w[0], &w[1]);
        let len = Float::with_val(prec, hi - lo);
        let q = tanh_sinh_unit(
            |u, omu| {
                let du = Float::with_val(prec, &len * u);
                let dv = Float::with_val(prec, &len * omu);
                let x = if u < omu { Float::with_val(prec, lo + &du) } else { Float::with_val(prec, hi - &dv) };
                let dlo = if k == 0 { du } else { Float::with_val(prec, &x - a) };
                let dhi = if k == last { dv } else { Float::with_val(prec, b - &x) };
                f(&x, &dlo, &dhi) * &len
            },
            prec,
            &tol,
            12,
        );
        value += q.value;
        error += q.error;
    }
    Estimate { value, error }
}

/// Breakpoints resolving the saddle scale `(|h| / |h_6|)^{1/6}` geometrically.
fn saddle_breaks(p: &Potential, oval: &Oval) -> Vec<Float> {
    let prec = oval.prec();
    let mut out = vec![Float::new(prec)];
    let s = if oval.is_limit() {
        return out;
    } else {
        (oval.h.to_f64().abs() / p.leading_saddle_coeff()).powf(1.0 / 6.0)
    };
    let span = oval.x_max.to_f64().abs().max(oval.x_min.to_f64().abs());
    let mut r = s;
    while r < span {
        out.push(Float::with_val(prec, r));
        out.push(Float::with_val(prec, -r));
        r *= 2.0;
    }
    out
}

/// `∮_{oval} Σ g_ij x^i y^j · dx dy` written as `∫ Σ_{j even} 2 g_ij x^i Y^{j+1} / (j+1) dx`.
fn area_integral(p: &Potential, oval: &Oval, g: &Terms) -> Estimate {
    let even: Vec<(u32, u32, Rational)> = g
        .iter()
        .filter(|(k, _)| k.1 % 2 == 0)
        .map(|(&(i, j), c)| (i, j, Rational::from(c * 2u32) / (j + 1)))
        .collect();
    let br = Branch::new(p, &oval.h, &oval.x_min, &oval.x_max);
    let f = |x: &Float, dlo: &Float, dhi: &Float| -> Float {
        let prec = x.prec();
        let y = br.y(x, dlo, dhi);
        let mut s = Float::new(prec);
        for (i, j, c) in &even {
            s += powu(x, *i) * powu(&y, j + 1) * c;
        }
        s
    };
    piecewise(&f, &oval.x_min, &oval.x_max, &saddle_breaks(p, oval))
}

/// `∮ q dx - p dy` over the oval (or limit loop), clockwise.
pub fn melnikov_integral(oval: &Oval, pq: &PerturbationPoly) -> Result<Estimate, OvalError> {
    let prec = oval.prec();
    match &oval.potential {
        // Green: ∮_cw q dx - p dy = ∬ (p_x + q_y)
        Some(p) => Ok(area_integral(p, oval, &pq.divergence())),
        None => Ok(Estimate {
            value: Float::with_val(prec, melnikov_nodes(oval, pq)),
            error: Float::with_val(prec, f64::NAN),
        }),
    }
}

/// `∮ g dt = ∫ Σ_{j even} 2 g_ij x^i Y^{j-1} dx`; odd powers of `y` cancel between the branches.
pub fn time_integral(oval: &Oval, g: &Terms) -> Result<Estimate, OvalError> {
    let Some(p) = &oval.potential else {
        return Err(OvalError::Unsupported("time integrals for non-separable Hamiltonians".into()));
    };
    if oval.is_limit() {
        if let Some((&(i, j), _)) = g.iter().find(|(&(i, j), _)| j == 0 && i < 3) {
            return Err(OvalError::Singular(i, j));
        }
    }
    let terms: Vec<(u32, u32, Rational)> =
        g.iter().filter(|(k, _)| k.1 % 2 == 0).map(|(&(i, j), c)| (i, j, Rational::from(c * 2u32))).collect();
    let br = Branch::new(p, &oval.h, &oval.x_min, &oval.x_max);
    let f = |x: &Float, dlo: &Float, dhi: &Float| -> Float {
        let prec = x.prec();
        let y = br.y(x, dlo, dhi);
        let mut s = Float::new(prec);
        if y.is_zero() {
            return s;
        }
        for (i, j, c) in &terms {
            let yp = if *j == 0 { Float::with_val(prec, y.recip_ref()) } else { powu(&y, j - 1) };
            s += powu(x, *i) * yp * c;
        }
        s
    };
    Ok(piecewise(&f, &oval.x_min, &oval.x_max, &saddle_breaks(p, oval)))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize, prec: u32) -> Vec<(Float, Float)> {
    let pi = Float::with_val(prec, Constant::Pi);
    let tol = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 6));
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let guess = Float::with_val(prec, &pi * (i as f64 + 0.75)) / (n as f64 + 0.5);
        let mut x = guess.cos();
        let mut dp = Float::new(prec);
        for _ in 0..100 {
            let mut p0 = Float::with_val(prec, 1u32);
            let mut p1 = x.clone();
            for k in 2..=n {
                let p2 = (Float::with_val(prec, &x * &p1) * (2 * k - 1) as u32 - Float::with_val(prec, &p0 * (k - 1) as u32))
                    / k as u32;
                p0 = p1;
                p1 = p2;
            }
            let x2m1 = Float::with_val(prec, &x * &x) - 1u32;
            dp = (Float::with_val(prec, &x * &p1) - &p0) * n as u32 / x2m1;
            let dx = Float::with_val(prec, &p1 / &dp);
            x -= &dx;
            if dx.abs() < tol {
                break;
            }
        }
        let one_m = Float::with_val(prec, 1u32) - Float::with_val(prec, &x * &x);
        let w = Float::with_val(prec, 2u32) / (one_m * Float::with_val(prec, &dp * &dp));
        out.push((x, w));
    }
    out
}

/// `∮_{L*_0} g dt` on the full limit loop with `x = x_R sin θ` (resp. `|x_L| sin θ`) and
/// Gauss-Legendre in `θ` on each half.
pub fn outer_loop_time_integral_gl(
    model: &HamiltonianModel,
    g: &Terms,
    prec: u32,
    n: usize,
) -> Result<Float, OvalError> {
    if model.separable_potential().is_none() {
        return Err(OvalError::Unsupported("time integrals for non-separable Hamiltonians".into()));
    }
    if let Some((&(i, j), _)) = g.iter().find(|(&(i, j), _)| j == 0 && i < 3) {
        return Err(OvalError::Singular(i, j));
    }
    let p = axis_potential(model);
    let zero = Float::new(prec);
    let loop0 = level_range(&p, &zero, Side::Outer)?;
    let terms: Vec<(u32, u32, Rational)> =
        g.iter().filter(|(k, _)| k.1 % 2 == 0).map(|(&(i, j), c)| (i, j, Rational::from(c * 2u32))).collect();
    let br = Branch::new(&p, &zero, &loop0.0, &loop0.1);
    let half_pi = Float::with_val(prec, Constant::Pi) / 2u32;
    let rule = gauss_legendre(n, prec);
    let mut total = Float::new(prec);
    for end in [&loop0.1, &loop0.0] {
        let r = Float::with_val(prec, end.abs_ref());
        let sign = if end.is_sign_negative() { -1i32 } else { 1 };
        // θ ∈ [0, π/2] mapped from [-1, 1]
        for (t, w) in &rule {
            let theta = Float::with_val(prec, (Float::with_val(prec, t + 1u32)) * &half_pi) / 2u32;
            let (s, c) = theta.sin_cos(Float::new(prec));
            let x = Float::with_val(prec, &r * &s) * sign;
            let dxdt = Float::with_val(prec, &r * &c);
            let y = br.y(&x, &Float::with_val(prec, &x - &loop0.0), &Float::with_val(prec, &loop0.1 - &x));
            if y.is_zero() {
                continue;
            }
            let mut f = Float::new(prec);
            for (i, j, cf) in &terms {
                let yp = if *j == 0 { Float::with_val(prec, y.recip_ref()) } else { powu(&y, j - 1) };
                f += powu(&x, *i) * yp * cf;
            }
            // dx = sign · r cos θ dθ and the θ-half maps onto a half of the loop in the flow direction
            let jac = Float::with_val(prec, w * &half_pi) / 2u32;
            total += f * dxdt * jac;
        }
    }
    Ok(total)
}

/// `c_0, c̃_0` (loop integrals) and `c_41, c̃_41, c*_31` (time integrals), physical orientation.
#[derive(Clone, Debug)]
pub struct CIntegrals {
    pub c0: Estimate,
    pub c0_tilde: Estimate,
    pub c41: Estimate,
    pub c41_tilde: Estimate,
    /// Full-loop value by the independent Gauss-Legendre route.
    pub cstar31: Float,
}

pub fn c_integrals(model: &HamiltonianModel, pq: &PerturbationPoly, prec: u32) -> Result<CIntegrals, OvalError> {
    let g = pq.loop_time_integrand()?;
    let zero = Float::new(prec);
    let right = trace_oval(model, &zero, Side::InnerRight, 16)?;
    let left = trace_oval(model, &zero, Side::InnerLeft, 16)?;
    Ok(CIntegrals {
        c0: melnikov_integral(&right, pq)?,
        c0_tilde: melnikov_integral(&left, pq)?,
        c41: time_integral(&right, &g)?,
        c41_tilde: time_integral(&left, &g)?,
        cstar31: outer_loop_time_integral_gl(model, &g, prec, 96)?,
    })
}
