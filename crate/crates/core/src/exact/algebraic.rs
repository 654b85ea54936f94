use std::fmt;

use rug::{Float, Rational};
use serde::{Serialize, Serializer};

use super::matrix::{linear_solve_rational, RationalMatrix, Solution};
use super::{fmt_rational, ExactError, Scalar};

/// Element of `Q(√2, β)` with `β⁶ = -h6 > 0`.
///
/// Canonical basis `√2^s β^k` with `s < 2`, `k < 6`: `coeffs[s][k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraicElement {
    h6: Rational,
    coeffs: [[Rational; 6]; 2],
}

fn zero_block() -> [[Rational; 6]; 2] {
    std::array::from_fn(|_| std::array::from_fn(|_| Rational::new()))
}

impl AlgebraicElement {
    pub fn zero(h6: &Rational) -> Result<Self, ExactError> {
        if h6.cmp0().is_ge() {
            return Err(ExactError::NonNegativeH6(fmt_rational(h6)));
        }
        Ok(AlgebraicElement { h6: h6.clone(), coeffs: zero_block() })
    }

    pub fn from_rational(q: Rational, h6: &Rational) -> Result<Self, ExactError> {
        let mut e = Self::zero(h6)?;
        e.coeffs[0][0] = q;
        Ok(e)
    }

    /// `c · √2^s · β^k` for any integers `s`, `k`.
    pub fn monomial(c: Rational, s: i64, k: i64, h6: &Rational) -> Result<Self, ExactError> {
        let mut e = Self::zero(h6)?;
        let b6 = Rational::from(-h6);
        let mut c = c;
        let s_red = s.rem_euclid(2);
        let k_red = k.rem_euclid(6);
        let two_pow = (s - s_red) / 2;
        let b_pow = (k - k_red) / 6;
        c *= Rational::from(2).pow_signed(two_pow);
        c *= b6.pow_signed(b_pow);
        e.coeffs[s_red as usize][k_red as usize] = c;
        Ok(e)
    }

    pub fn beta(h6: &Rational) -> Result<Self, ExactError> {
        Self::monomial(Rational::from(1), 0, 1, h6)
    }

    pub fn sqrt2(h6: &Rational) -> Result<Self, ExactError> {
        Self::monomial(Rational::from(1), 1, 0, h6)
    }

    pub fn h6(&self) -> &Rational {
        &self.h6
    }

    pub fn coeff(&self, s: usize, k: usize) -> &Rational {
        &self.coeffs[s][k]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(|c| c.cmp0().is_eq())
    }

    /// Rational part when the element lies in `Q`.
    pub fn as_rational(&self) -> Option<Rational> {
        let rest = self
            .coeffs
            .iter()
            .flatten()
            .skip(1)
            .all(|c| c.cmp0().is_eq());
        rest.then(|| self.coeffs[0][0].clone())
    }

    /// True when no power of β appears (the element lies in `Q(√2)`).
    pub fn is_beta_free(&self) -> bool {
        self.coeffs.iter().all(|row| row[1..].iter().all(|c| c.cmp0().is_eq()))
    }

    fn check(&self, o: &Self) -> Result<(), ExactError> {
        if self.h6 != o.h6 {
            return Err(ExactError::Modulus(fmt_rational(&self.h6), fmt_rational(&o.h6)));
        }
        Ok(())
    }

    pub fn try_add(&self, o: &Self) -> Result<Self, ExactError> {
        self.check(o)?;
        let mut r = self.clone();
        for s in 0..2 {
            for k in 0..6 {
                r.coeffs[s][k] += &o.coeffs[s][k];
            }
        }
        Ok(r)
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self, ExactError> {
        self.try_add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        let mut r = self.clone();
        for c in r.coeffs.iter_mut().flatten() {
            *c = Rational::from(-&*c);
        }
        r
    }

    pub fn scale(&self, q: &Rational) -> Self {
        let mut r = self.clone();
        for c in r.coeffs.iter_mut().flatten() {
            *c *= q;
        }
        r
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self, ExactError> {
        self.check(o)?;
        let b6 = Rational::from(-&self.h6);
        let mut out = zero_block();
        for s1 in 0..2 {
            for k1 in 0..6 {
                let a = &self.coeffs[s1][k1];
                if a.cmp0().is_eq() {
                    continue;
                }
                for s2 in 0..2 {
                    for k2 in 0..6 {
                        let b = &o.coeffs[s2][k2];
                        if b.cmp0().is_eq() {
                            continue;
                        }
                        let mut c = Rational::from(a * b);
                        let mut s = s1 + s2;
                        let mut k = k1 + k2;
                        if s >= 2 {
                            s -= 2;
                            c *= 2;
                        }
                        if k >= 6 {
                            k -= 6;
                            c *= &b6;
                        }
                        out[s][k] += c;
                    }
                }
            }
        }
        Ok(AlgebraicElement { h6: self.h6.clone(), coeffs: out })
    }

    fn flat(&self) -> Vec<Rational> {
        self.coeffs.iter().flatten().cloned().collect()
    }

    fn from_flat(v: &[Rational], h6: &Rational) -> Self {
        let mut coeffs = zero_block();
        for (i, c) in v.iter().enumerate() {
            coeffs[i / 6][i % 6] = c.clone();
        }
        AlgebraicElement { h6: h6.clone(), coeffs }
    }

    /// Multiplicative inverse via the 12x12 multiplication matrix.
    pub fn try_inv(&self) -> Result<Self, ExactError> {
        if self.is_zero() {
            return Err(ExactError::NotInvertible);
        }
        let mut m = RationalMatrix::zeros(12, 12);
        for j in 0..12 {
            let mut e = vec![Rational::new(); 12];
            e[j] = Rational::from(1);
            let col = self.try_mul(&Self::from_flat(&e, &self.h6))?.flat();
            for (i, c) in col.into_iter().enumerate() {
                m.set(i, j, c);
            }
        }
        let mut rhs = vec![Rational::new(); 12];
        rhs[0] = Rational::from(1);
        match linear_solve_rational(&m, &rhs)? {
            Solution::Unique(x) => Ok(Self::from_flat(&x, &self.h6)),
            _ => Err(ExactError::NotInvertible),
        }
    }

    pub fn pow(&self, n: i64) -> Result<Self, ExactError> {
        Scalar::powi(self, n).ok_or(ExactError::NotInvertible)
    }

    /// Real embedding with `β > 0` and `√2 > 0`.
    pub fn to_float(&self, prec: u32) -> Float {
        let b6 = -Float::with_val(prec, &self.h6);
        let beta = b6.root(6);
        let r2 = Float::with_val(prec, 2).sqrt();
        let mut acc = Float::new(prec);
        for s in (0..2).rev() {
            let mut inner = Float::new(prec);
            for k in (0..6).rev() {
                inner *= &beta;
                inner += &self.coeffs[s][k];
            }
            acc *= &r2;
            acc += inner;
        }
        acc
    }
}

trait PowSigned {
    fn pow_signed(&self, e: i64) -> Rational;
}

impl PowSigned for Rational {
    fn pow_signed(&self, e: i64) -> Rational {
        use rug::ops::Pow;
        let r = Rational::from(self.pow(e.unsigned_abs() as u32));
        if e < 0 {
            r.recip()
        } else {
            r
        }
    }
}

impl fmt::Display for AlgebraicElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in 0..2 {
            for k in 0..6 {
                let c = &self.coeffs[s][k];
                if c.cmp0().is_eq() {
                    continue;
                }
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                write!(f, "{}", fmt_rational(c))?;
                if s == 1 {
                    write!(f, "·√2")?;
                }
                match k {
                    0 => {}
                    1 => write!(f, "·β")?,
                    _ => write!(f, "·β^{k}")?,
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Serialize for AlgebraicElement {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        #[derive(Serialize)]
        struct Term {
            s: usize,
            k: usize,
            c: String,
        }
        let terms: Vec<Term> = (0..2)
            .flat_map(|s| (0..6).map(move |k| (s, k)))
            .filter(|&(s, k)| self.coeffs[s][k].cmp0().is_ne())
            .map(|(s, k)| Term { s, k, c: fmt_rational(&self.coeffs[s][k]) })
            .collect();
        let mut st = ser.serialize_struct("AlgebraicElement", 2)?;
        st.serialize_field("h6", &fmt_rational(&self.h6))?;
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

impl Scalar for AlgebraicElement {
    type Ctx = Rational;

    fn zero(h6: &Rational) -> Self {
        AlgebraicElement { h6: h6.clone(), coeffs: zero_block() }
    }
    fn one(h6: &Rational) -> Self {
        let mut e = <Self as Scalar>::zero(h6);
        e.coeffs[0][0] = Rational::from(1);
        e
    }
    fn from_rational(q: &Rational, h6: &Rational) -> Self {
        let mut e = <Self as Scalar>::zero(h6);
        e.coeffs[0][0] = q.clone();
        e
    }
    fn ctx(&self) -> Rational {
        self.h6.clone()
    }
    fn plus(&self, o: &Self) -> Self {
        self.try_add(o).expect("same h6")
    }
    fn minus(&self, o: &Self) -> Self {
        self.try_sub(o).expect("same h6")
    }
    fn times(&self, o: &Self) -> Self {
        self.try_mul(o).expect("same h6")
    }
    fn negated(&self) -> Self {
        self.neg()
    }
    fn is_zero(&self) -> bool {
        AlgebraicElement::is_zero(self)
    }
    fn inverse(&self) -> Option<Self> {
        self.try_inv().ok()
    }
    fn scaled(&self, q: &Rational) -> Self {
        self.scale(q)
    }
}
