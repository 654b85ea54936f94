//! Hamiltonian normal form `H = ½y² + Σ h_ij x^i y^j`, the `h_j` series along `H_y = 0`,
//! classification of the origin and the appendix coefficient chain.

pub mod bank;

use std::collections::BTreeMap;

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bank::{h_weight, Env, Erratum, FormulaBank};

use crate::exact::{
    fmt_rational, parse_rational, series_newton, AlgebraicElement, BiPoly, ExactError, Scalar,
    Series1, DEFAULT_ORDER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("term x^{0} y^{1} has degree < 3; the quadratic part is fixed to y^2/2")]
    LowDegree(u32, u32),
    #[error("term x^{0} y^{1} exceeds degree bound {2}")]
    DegreeBound(u32, u32, u32),
    #[error("formula bank: {0}")]
    Bank(String),
    #[error("no table for {0}")]
    UnknownTarget(String),
    #[error("missing input {0}")]
    MissingInput(String),
    #[error("{0} is not invertible")]
    NotInvertible(String),
    #[error("unsupported index j = {0} (closed forms exist for 10..=14)")]
    UnsupportedIndex(u32),
    #[error("origin is {0:?}, expected a nilpotent saddle of order 2")]
    ClassMismatch(SaddleKind),
    #[error("h6 must be negative, got {0}")]
    NonNegativeH6(String),
    #[error("series has order {have}, need {need}")]
    SeriesTooShort { have: usize, need: usize },
    #[error("unknown input symbol {0}")]
    UnknownInput(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HamiltonianModel {
    hij: BTreeMap<(u32, u32), Rational>,
    degree_bound: u32,
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
struct ModelJson {
    hij: Vec<TermJson>,
    degree_bound: u32,
}

impl HamiltonianModel {
    pub fn new(
        terms: impl IntoIterator<Item = (u32, u32, Rational)>,
        degree_bound: u32,
    ) -> Result<Self, HamiltonianError> {
        let mut hij = BTreeMap::new();
        for (i, j, c) in terms {
            if i + j < 3 {
                return Err(HamiltonianError::LowDegree(i, j));
            }
            if i + j > degree_bound {
                return Err(HamiltonianError::DegreeBound(i, j, degree_bound));
            }
            let e: &mut Rational = hij.entry((i, j)).or_default();
            *e += c;
        }
        hij.retain(|_, c: &mut Rational| c.cmp0().is_ne());
        Ok(HamiltonianModel { hij, degree_bound })
    }

    /// `½y² - x⁶ + x⁸`, the Liénard example.
    pub fn lienard() -> Self {
        Self::new([(6, 0, Rational::from(-1)), (8, 0, Rational::from(1))], 8).unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self, HamiltonianError> {
        let raw: ModelJson =
            serde_json::from_str(text).map_err(|e| HamiltonianError::Schema(e.to_string()))?;
        let mut terms = Vec::new();
        for t in raw.hij {
            let c = parse_rational(&t.c).map_err(|e| HamiltonianError::Schema(e.to_string()))?;
            terms.push((t.i, t.j, c));
        }
        Self::new(terms, raw.degree_bound)
    }

    pub fn to_json(&self) -> String {
        let raw = ModelJson {
            hij: self
                .hij
                .iter()
                .map(|(&(i, j), c)| TermJson { i, j, c: fmt_rational(c) })
                .collect(),
            degree_bound: self.degree_bound,
        };
        serde_json::to_string(&raw).expect("serializable")
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    pub fn coeff(&self, i: u32, j: u32) -> Rational {
        self.hij.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &Rational)> {
        self.hij.iter().map(|(&(i, j), c)| (i, j, c))
    }

    /// The full polynomial including `½y²`.
    fn full_terms(&self) -> Vec<(u32, u32, Rational)> {
        let mut v: Vec<_> = self.terms().map(|(i, j, c)| (i, j, c.clone())).collect();
        v.push((0, 2, Rational::from((1, 2))));
        v
    }

    /// Branch `y = φ(x)` of `H_y = 0` through the origin.
    pub fn phi(&self, order: usize) -> Result<Series1<Rational>, HamiltonianError> {
        let g = BiPoly::new(self.full_terms(), &()).d_dy();
        Ok(series_newton(&g, order)?)
    }

    /// `h_j` for `j < order + 1`, from `H(x, φ(x))`.
    pub fn h_series(&self, order: usize) -> Result<HSeriesCoefficients, HamiltonianError> {
        let n = order + 1;
        let phi = self.phi(n)?;
        let hx = BiPoly::new(self.full_terms(), &()).substitute(&phi);
        Ok(HSeriesCoefficients { hj: hx.coeffs().to_vec() })
    }

    pub fn classify(&self) -> Result<SaddleClass, HamiltonianError> {
        let hs = self.h_series(DEFAULT_ORDER)?;
        Ok(SaddleClass::from_series(&hs))
    }

    /// `Σ_{j} U_i x^i` when `H = ½y² + U(x)`.
    pub fn separable_potential(&self) -> Option<Vec<(u32, Rational)>> {
        self.hij
            .iter()
            .map(|(&(i, j), c)| (j == 0).then(|| (i, c.clone())))
            .collect()
    }

    pub fn is_even_in_x(&self) -> bool {
        self.hij.keys().all(|(i, _)| i % 2 == 0)
    }

    /// Environment binding every `h_i_j` (absent ones read as zero).
    pub fn env<T: Scalar>(&self, ctx: &T::Ctx) -> Env<T> {
        let mut env = Env::new(ctx);
        env.zero_default("h_");
        for (i, j, c) in self.terms() {
            env.set_rational(&format!("h_{i}_{j}"), c);
        }
        env
    }

    pub fn eval_float(&self, x: &Float, y: &Float) -> Float {
        let prec = x.prec();
        let mut s = Float::with_val(prec, y * y) / 2u32;
        for (i, j, c) in self.terms() {
            let t = (powu(x, i)) * (powu(y, j));
            s += t * c;
        }
        s
    }

    /// `(H_x, H_y)`.
    pub fn grad_float(&self, x: &Float, y: &Float) -> (Float, Float) {
        let prec = x.prec();
        let mut hx = Float::new(prec);
        let mut hy = y.clone();
        for (i, j, c) in self.terms() {
            if i > 0 {
                let t = (powu(x, i - 1)) * (powu(y, j));
                hx += t * c * i;
            }
            if j > 0 {
                let t = (powu(x, i)) * (powu(y, j - 1));
                hy += t * c * j;
            }
        }
        (hx, hy)
    }
}

fn powu(x: &Float, n: u32) -> Float {
    use rug::ops::Pow;
    Float::with_val(x.prec(), x.pow(n))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HSeriesCoefficients {
    /// `hj[j]` is the coefficient of `x^j`.
    #[serde(serialize_with = "ser_rationals")]
    pub hj: Vec<Rational>,
}

fn ser_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(fmt_rational))
}

impl HSeriesCoefficients {
    pub fn order(&self) -> usize {
        self.hj.len().saturating_sub(1)
    }

    pub fn get(&self, j: usize) -> Option<&Rational> {
        self.hj.get(j)
    }

    /// `h_j` as a rational or an error if the series is too short.
    pub fn h(&self, j: usize) -> Result<Rational, HamiltonianError> {
        self.hj
            .get(j)
            .cloned()
            .ok_or(HamiltonianError::SeriesTooShort { have: self.order(), need: j })
    }

    pub fn leading(&self) -> Option<(usize, Rational)> {
        self.hj.iter().enumerate().find(|(_, c)| c.cmp0().is_ne()).map(|(k, c)| (k, c.clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SaddleKind {
    CuspOrder1,
    NilpotentCenterOrder1,
    NilpotentSaddleOrder1,
    CuspOrder2,
    NilpotentSaddleOrder2,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaddleClass {
    pub kind: SaddleKind,
    /// Leading index; 0 when every computed `h_j` vanishes.
    pub k: usize,
    pub hk: Rational,
}

impl SaddleClass {
    pub fn from_series(hs: &HSeriesCoefficients) -> Self {
        let Some((k, hk)) = hs.leading() else {
            return SaddleClass { kind: SaddleKind::Other, k: 0, hk: Rational::new() };
        };
        let kind = match (k, hk.cmp0()) {
            (3, _) => SaddleKind::CuspOrder1,
            (4, std::cmp::Ordering::Greater) => SaddleKind::NilpotentCenterOrder1,
            (4, _) => SaddleKind::NilpotentSaddleOrder1,
            (5, _) => SaddleKind::CuspOrder2,
            (6, std::cmp::Ordering::Less) => SaddleKind::NilpotentSaddleOrder2,
            _ => SaddleKind::Other,
        };
        SaddleClass { kind, k, hk }
    }
}

pub fn classify_origin(h: &HamiltonianModel) -> Result<SaddleClass, HamiltonianError> {
    h.classify()
}

pub fn h_series(h: &HamiltonianModel, order: usize) -> Result<HSeriesCoefficients, HamiltonianError> {
    h.h_series(order)
}

/// Closed-form appendix expression for `h_j`, `j ∈ 10..=14`.
pub fn eval_appendix_hj(h: &HamiltonianModel, j: u32) -> Result<Rational, HamiltonianError> {
    if !(10..=14).contains(&j) {
        return Err(HamiltonianError::UnsupportedIndex(j));
    }
    FormulaBank::global().eval(&format!("hs_{j}"), &h.env::<Rational>(&()))
}

/// `μ_1..μ_9`, `μ̄_1..μ̄_8`, `n̄_0..n̄_8` over `Q(√2, β)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainCoefficients {
    #[serde(serialize_with = "ser_h6")]
    pub h6: Rational,
    /// `mu[i]` is `μ_{i+1}`.
    pub mu: Vec<AlgebraicElement>,
    /// `mu_bar[i]` is `μ̄_{i+1}`.
    pub mu_bar: Vec<AlgebraicElement>,
    /// `n_bar[i]` is `n̄_i`.
    pub n_bar: Vec<AlgebraicElement>,
}

fn ser_h6<S: serde::Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rational(q))
}

impl ChainCoefficients {
    /// Binds `beta`, `hs_j`, `mu_k`, `mubar_k` and `nbar_k`.
    pub fn env(&self, hs: &HSeriesCoefficients) -> Result<Env<AlgebraicElement>, HamiltonianError> {
        let mut env = Env::new(&self.h6);
        env.set("beta", AlgebraicElement::beta(&self.h6)?);
        for j in 6..=14 {
            env.set_rational(&format!("hs_{j}"), &hs.h(j)?);
        }
        for (i, v) in self.mu.iter().enumerate() {
            env.set(&format!("mu_{}", i + 1), v.clone());
        }
        for (i, v) in self.mu_bar.iter().enumerate() {
            env.set(&format!("mubar_{}", i + 1), v.clone());
        }
        for (i, v) in self.n_bar.iter().enumerate() {
            env.set(&format!("nbar_{i}"), v.clone());
        }
        Ok(env)
    }
}

pub fn mu_chain(hs: &HSeriesCoefficients, h6: &Rational) -> Result<ChainCoefficients, HamiltonianError> {
    if h6.cmp0().is_ge() {
        return Err(HamiltonianError::NonNegativeH6(fmt_rational(h6)));
    }
    if &hs.h(6)? != h6 {
        return Err(HamiltonianError::Schema(format!(
            "h6 modulus {} differs from series value {}",
            fmt_rational(h6),
            fmt_rational(&hs.h(6)?)
        )));
    }
    let bank = FormulaBank::global();
    let mut env: Env<AlgebraicElement> = Env::new(h6);
    env.set("beta", AlgebraicElement::beta(h6)?);
    for j in 6..=14 {
        env.set_rational(&format!("hs_{j}"), &hs.h(j)?);
    }
    let mu = (1..=9).map(|k| bank.eval(&format!("mu_{k}"), &env)).collect::<Result<Vec<_>, _>>()?;
    for (k, v) in mu.iter().enumerate() {
        env.set(&format!("mu_{}", k + 1), v.clone());
    }
    let mu_bar = (1..=8).map(|k| bank.eval(&format!("mubar_{k}"), &env)).collect::<Result<Vec<_>, _>>()?;
    for (k, v) in mu_bar.iter().enumerate() {
        env.set(&format!("mubar_{}", k + 1), v.clone());
    }
    let n_bar = (0..=8).map(|k| bank.eval(&format!("nbar_{k}"), &env)).collect::<Result<Vec<_>, _>>()?;
    Ok(ChainCoefficients { h6: h6.clone(), mu, mu_bar, n_bar })
}

/// `(σ_0, σ_1, σ_2, σ_3)` of the divergence `p_x + q_y` at the origin.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Sigma(pub [Rational; 4]);

/// Closed forms of `r̃_00`, `r̃_10`, `r̃_20`.
pub fn r_coefficients_closed(
    h: &HamiltonianModel,
    sigma: &Sigma,
) -> Result<[AlgebraicElement; 3], HamiltonianError> {
    let hs = h.h_series(DEFAULT_ORDER)?;
    let class = SaddleClass::from_series(&hs);
    if class.kind != SaddleKind::NilpotentSaddleOrder2 {
        return Err(HamiltonianError::ClassMismatch(class.kind));
    }
    let h6 = hs.h(6)?;
    let (h7, h8) = (hs.h(7)?, hs.h(8)?);
    let (h03, h12, h21, h22) = (h.coeff(0, 3), h.coeff(1, 2), h.coeff(2, 1), h.coeff(2, 2));
    let [s0, s1, s2, s3] = &sigma.0;
    let m = |c: Rational, s: i64, k: i64| AlgebraicElement::monomial(c, s, k, &h6);
    let q = |x: &Rational| Rational::from(x * 1);

    let r00 = m(Rational::from(2) * s0, 1, -1)?;

    let r10 = m(Rational::from(2) * q(&h7) / 3 * s0, 1, -8)?
        .try_add(&m(Rational::from(2) * (Rational::from(s1) - Rational::from(&h12 * s0)), 1, -2)?)?;

    let h6sq = Rational::from(&h6 * &h6);
    let mut b0 = Rational::from(24) * &h6sq * &h03 * &h21;
    b0 += Rational::from(12) * &h6sq * Rational::from(&h12 * &h12);
    b0 -= Rational::from(8) * &h6sq * &h22;
    b0 += Rational::from(4) * &h6 * &h7 * &h12;
    b0 -= Rational::from(4) * &h6 * &h8;
    b0 += Rational::from(3) * Rational::from(&h7 * &h7);
    let b1 = Rational::from(-8) * &h6sq * &h12 - Rational::from(4) * &h6 * &h7;
    let b2 = Rational::from(-8) * &h6sq * &h21;
    let b3 = Rational::from(8) * &h6sq;
    let bracket = b0 * s0 + b1 * s1 + b2 * s2 + b3 * s3;
    let r20 = m(bracket / 4, 1, -15)?;
    Ok([r00, r10, r20])
}

/// Inputs whose formulas are not part of the appendix.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AlphaInputs {
    values: BTreeMap<String, Rational>,
}

impl AlphaInputs {
    pub fn allowed_names() -> Vec<String> {
        let mut v: Vec<String> = (0..=5).map(|l| format!("alpha_{l}_0")).collect();
        v.push("alpha_0_1".into());
        v.push("alpha_1_1".into());
        v.extend((0..=5).map(|i| format!("abar_{i}_1")));
        v.extend((0..=5).map(|i| format!("bbar_{i}_0")));
        v.extend(["abar_0_2", "abar_1_2", "abar_0_3", "abar_1_3", "bbar_0_1", "bbar_1_1", "bbar_0_2", "bbar_1_2"].map(String::from));
        v
    }

    pub fn set(&mut self, name: &str, v: Rational) -> Result<&mut Self, HamiltonianError> {
        if !Self::allowed_names().iter().any(|n| n == name) {
            return Err(HamiltonianError::UnknownInput(name.to_string()));
        }
        self.values.insert(name.to_string(), v);
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Rational> {
        self.values.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Rational)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn bind<T: Scalar>(&self, env: &mut Env<T>) {
        for (k, v) in &self.values {
            env.set_rational(k, v);
        }
    }
}
