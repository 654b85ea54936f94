//! Exact scalar rings, truncated series and rational linear algebra.

mod algebraic;
mod matrix;
mod newton;
mod pilinear;
mod poly;
mod series;

pub use algebraic::AlgebraicElement;
pub use matrix::{
    linear_solve_rational, pi_split, rank_over_q_pi, rank_rational, PiLinearForm, RationalMatrix,
    Solution,
};
pub use newton::{series_newton, BiPoly};
pub use pilinear::PiLinear;
pub use poly::{intern, sym_name, Monomial, Poly, QPoly, Sym};
pub use series::{Series1, DEFAULT_ORDER};

pub use rug::{Float, Integer, Rational};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("product of two elements with nonzero pi parts (pi squared is out of scope)")]
    PiSquared,
    #[error("modulus mismatch: h6 = {0} vs {1}")]
    Modulus(String, String),
    #[error("h6 must be negative, got {0}")]
    NonNegativeH6(String),
    #[error("element is not invertible")]
    NotInvertible,
    #[error("series Newton iteration needs dG/dy(0,0) != 0")]
    SingularJacobian,
}

/// Parse `"p/q"` or `"p"` into a canonical rational.
pub fn parse_rational(s: &str) -> Result<Rational, ExactError> {
    let t = s.trim();
    t.parse::<Rational>()
        .map_err(|_| ExactError::Parse(s.to_string()))
}

/// `"p/q"`, or `"p"` when the denominator is one.
pub fn fmt_rational(q: &Rational) -> String {
    q.to_string()
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> Rational {
    Rational::from_f64(x).expect("finite f64")
}

/// Commutative ring operations shared by the exact and high-precision scalars.
///
/// Method names avoid clashing with the `std::ops` impls that `rug` types already carry.
pub trait Scalar: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    type Ctx: Clone + std::fmt::Debug + Send + Sync;

    fn zero(ctx: &Self::Ctx) -> Self;
    fn one(ctx: &Self::Ctx) -> Self;
    fn from_rational(q: &Rational, ctx: &Self::Ctx) -> Self;
    fn ctx(&self) -> Self::Ctx;

    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn negated(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn inverse(&self) -> Option<Self>;

    fn scaled(&self, q: &Rational) -> Self {
        self.times(&Self::from_rational(q, &self.ctx()))
    }

    fn powi(&self, n: i64) -> Option<Self> {
        let base = if n < 0 { self.inverse()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one(&self.ctx());
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.times(&b);
            }
            e >>= 1;
            if e > 0 {
                b = b.times(&b);
            }
        }
        Some(acc)
    }
}

impl Scalar for Rational {
    type Ctx = ();

    fn zero(_: &()) -> Self {
        Rational::new()
    }
    fn one(_: &()) -> Self {
        Rational::from(1)
    }
    fn from_rational(q: &Rational, _: &()) -> Self {
        q.clone()
    }
    fn ctx(&self) {}
    fn plus(&self, o: &Self) -> Self {
        Rational::from(self + o)
    }
    fn minus(&self, o: &Self) -> Self {
        Rational::from(self - o)
    }
    fn times(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn negated(&self) -> Self {
        Rational::from(-self)
    }
    fn is_zero(&self) -> bool {
        self.cmp0() == std::cmp::Ordering::Equal
    }
    fn inverse(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            None
        } else {
            Some(Rational::from(self.recip_ref()))
        }
    }
}

impl Scalar for Float {
    type Ctx = u32;

    fn zero(p: &u32) -> Self {
        Float::new(*p)
    }
    fn one(p: &u32) -> Self {
        Float::with_val(*p, 1)
    }
    fn from_rational(q: &Rational, p: &u32) -> Self {
        Float::with_val(*p, q)
    }
    fn ctx(&self) -> u32 {
        self.prec()
    }
    fn plus(&self, o: &Self) -> Self {
        Float::with_val(self.prec(), self + o)
    }
    fn minus(&self, o: &Self) -> Self {
        Float::with_val(self.prec(), self - o)
    }
    fn times(&self, o: &Self) -> Self {
        Float::with_val(self.prec(), self * o)
    }
    fn negated(&self) -> Self {
        Float::with_val(self.prec(), -self)
    }
    fn is_zero(&self) -> bool {
        Float::is_zero(self)
    }
    fn inverse(&self) -> Option<Self> {
        if Float::is_zero(self) {
            None
        } else {
            Some(Float::with_val(self.prec(), self.recip_ref()))
        }
    }
}

/// Bits of working precision for a target number of decimal digits, with guard bits.
pub fn bits_for_digits(digits: u32) -> u32 {
    ((digits as f64) * std::f64::consts::LOG2_10).ceil() as u32 + 16
}
