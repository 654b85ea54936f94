use std::fmt;

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use super::{fmt_rational, ExactError};

/// `rat + pi_coef * π` with rational parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PiLinear {
    pub rat: Rational,
    pub pi: Rational,
}

impl PiLinear {
    pub fn new(rat: Rational, pi: Rational) -> Self {
        PiLinear { rat, pi }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn rational(q: Rational) -> Self {
        PiLinear { rat: q, pi: Rational::new() }
    }

    pub fn pi_multiple(q: Rational) -> Self {
        PiLinear { rat: Rational::new(), pi: q }
    }

    pub fn is_zero(&self) -> bool {
        self.rat.cmp0().is_eq() && self.pi.cmp0().is_eq()
    }

    pub fn add(&self, o: &Self) -> Self {
        PiLinear {
            rat: Rational::from(&self.rat + &o.rat),
            pi: Rational::from(&self.pi + &o.pi),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        PiLinear {
            rat: Rational::from(&self.rat - &o.rat),
            pi: Rational::from(&self.pi - &o.pi),
        }
    }

    pub fn neg(&self) -> Self {
        PiLinear { rat: Rational::from(-&self.rat), pi: Rational::from(-&self.pi) }
    }

    pub fn scale(&self, q: &Rational) -> Self {
        PiLinear {
            rat: Rational::from(&self.rat * q),
            pi: Rational::from(&self.pi * q),
        }
    }

    /// Product; fails when both factors carry a π part.
    pub fn try_mul(&self, o: &Self) -> Result<Self, ExactError> {
        if self.pi.cmp0().is_ne() && o.pi.cmp0().is_ne() {
            return Err(ExactError::PiSquared);
        }
        let rat = Rational::from(&self.rat * &o.rat);
        let pi = Rational::from(&self.rat * &o.pi) + Rational::from(&self.pi * &o.rat);
        Ok(PiLinear { rat, pi })
    }

    pub fn to_float(&self, prec: u32) -> Float {
        let pi = Float::with_val(prec, rug::float::Constant::Pi);
        Float::with_val(prec, &self.rat) + pi * &self.pi
    }
}

impl fmt::Display for PiLinear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rat.cmp0().is_ne(), self.pi.cmp0().is_ne()) {
            (_, false) => write!(f, "{}", fmt_rational(&self.rat)),
            (false, true) => write!(f, "{}·π", fmt_rational(&self.pi)),
            (true, true) => write!(f, "{} + {}·π", fmt_rational(&self.rat), fmt_rational(&self.pi)),
        }
    }
}

impl Serialize for PiLinear {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PiLinear", 2)?;
        st.serialize_field("rat", &fmt_rational(&self.rat))?;
        st.serialize_field("pi", &fmt_rational(&self.pi))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for PiLinear {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            rat: String,
            pi: String,
        }
        let r = Raw::deserialize(d)?;
        let rat = super::parse_rational(&r.rat).map_err(serde::de::Error::custom)?;
        let pi = super::parse_rational(&r.pi).map_err(serde::de::Error::custom)?;
        Ok(PiLinear { rat, pi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_squared_is_rejected() {
        let a = PiLinear::pi_multiple(Rational::from(1));
        assert_eq!(a.try_mul(&a), Err(ExactError::PiSquared));
        let b = PiLinear::new(Rational::from(2), Rational::new());
        assert_eq!(a.try_mul(&b).unwrap(), PiLinear::pi_multiple(Rational::from(2)));
    }

    #[test]
    fn display() {
        let a = PiLinear::new(Rational::from((1, 2)), Rational::from((-3, 4)));
        assert_eq!(a.to_string(), "1/2 + -3/4·π");
    }
}
