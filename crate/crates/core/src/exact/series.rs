use rug::Rational;

use super::{ExactError, Scalar};

pub const DEFAULT_ORDER: usize = 20;

/// Truncated power series `Σ_{k<order} c_k x^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series1<T: Scalar> {
    coeffs: Vec<T>,
    ctx: T::Ctx,
}

impl<T: Scalar> Series1<T> {
    pub fn new(mut coeffs: Vec<T>, order: usize, ctx: &T::Ctx) -> Self {
        coeffs.truncate(order);
        coeffs.resize(order, T::zero(ctx));
        Series1 { coeffs, ctx: ctx.clone() }
    }

    pub fn zero(order: usize, ctx: &T::Ctx) -> Self {
        Self::new(Vec::new(), order, ctx)
    }

    pub fn constant(c: T, order: usize) -> Self {
        let ctx = c.ctx();
        Self::new(vec![c], order, &ctx)
    }

    /// The series `x`.
    pub fn x(order: usize, ctx: &T::Ctx) -> Self {
        Self::new(vec![T::zero(ctx), T::one(ctx)], order, ctx)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn ctx(&self) -> &T::Ctx {
        &self.ctx
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `x^k`; `None` at or beyond the truncation order.
    pub fn coeff(&self, k: usize) -> Option<&T> {
        self.coeffs.get(k)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new(self.coeffs.clone(), order.min(self.order()), &self.ctx)
    }

    fn common(&self, o: &Self) -> usize {
        self.order().min(o.order())
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.common(o);
        let c = (0..n).map(|k| self.coeffs[k].plus(&o.coeffs[k])).collect();
        Self::new(c, n, &self.ctx)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.common(o);
        let c = (0..n).map(|k| self.coeffs[k].minus(&o.coeffs[k])).collect();
        Self::new(c, n, &self.ctx)
    }

    pub fn neg(&self) -> Self {
        Series1 { coeffs: self.coeffs.iter().map(T::negated).collect(), ctx: self.ctx.clone() }
    }

    pub fn scale(&self, q: &Rational) -> Self {
        Series1 { coeffs: self.coeffs.iter().map(|c| c.scaled(q)).collect(), ctx: self.ctx.clone() }
    }

    pub fn scale_by(&self, s: &T) -> Self {
        Series1 { coeffs: self.coeffs.iter().map(|c| c.times(s)).collect(), ctx: self.ctx.clone() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.common(o);
        let mut c = vec![T::zero(&self.ctx); n];
        for (i, a) in self.coeffs.iter().take(n).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().take(n - i).enumerate() {
                if b.is_zero() {
                    continue;
                }
                c[i + j] = c[i + j].plus(&a.times(b));
            }
        }
        Series1 { coeffs: c, ctx: self.ctx.clone() }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(T::one(&self.ctx), self.order());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Termwise derivative; the order drops by one.
    pub fn derivative(&self) -> Self {
        let n = self.order().saturating_sub(1);
        let c = (0..n)
            .map(|k| self.coeffs[k + 1].scaled(&Rational::from(k as u64 + 1)))
            .collect();
        Self::new(c, n, &self.ctx)
    }

    /// `self(g(x))`; requires `g(0) = 0`.
    pub fn compose(&self, g: &Self) -> Result<Self, ExactError> {
        if !g.coeffs.first().is_none_or(T::is_zero) {
            return Err(ExactError::Dimension("inner series must vanish at 0".into()));
        }
        let n = self.common(g);
        let mut acc = Self::zero(n, &self.ctx);
        for c in self.coeffs.iter().take(n).rev() {
            acc = acc.mul(g);
            acc.coeffs[0] = acc.coeffs[0].plus(c);
        }
        Ok(acc)
    }

    /// Multiplicative inverse; the constant term must be a unit.
    pub fn recip(&self) -> Result<Self, ExactError> {
        let n = self.order();
        let inv0 = self.coeffs.first().and_then(T::inverse).ok_or(ExactError::NotInvertible)?;
        let mut r: Vec<T> = Vec::with_capacity(n);
        r.push(inv0.clone());
        for k in 1..n {
            let mut s = T::zero(&self.ctx);
            for j in 1..=k {
                s = s.plus(&self.coeffs[j].times(&r[k - j]));
            }
            r.push(s.times(&inv0).negated());
        }
        Ok(Self::new(r, n, &self.ctx))
    }

    /// `self^α` for a series with constant term one.
    pub fn pow_rational(&self, alpha: &Rational) -> Result<Self, ExactError> {
        let n = self.order();
        if n == 0 {
            return Ok(self.clone());
        }
        if self.coeffs[0] != T::one(&self.ctx) {
            return Err(ExactError::Dimension("rational power needs constant term 1".into()));
        }
        let mut p: Vec<T> = vec![T::one(&self.ctx)];
        for m in 1..n {
            let mut s = T::zero(&self.ctx);
            for k in 1..=m {
                let w = Rational::from(alpha * k as u64) - Rational::from((m - k) as u64);
                s = s.plus(&self.coeffs[k].times(&p[m - k]).scaled(&w));
            }
            p.push(s.scaled(&Rational::from((1, m as u64))));
        }
        Ok(Self::new(p, n, &self.ctx))
    }

    /// Compositional inverse; needs `c_0 = 0` and `c_1` a unit.
    pub fn reversion(&self) -> Result<Self, ExactError> {
        let n = self.order();
        if n < 2 || !self.coeffs[0].is_zero() {
            return Err(ExactError::NotInvertible);
        }
        let inv1 = self.coeffs[1].inverse().ok_or(ExactError::NotInvertible)?;
        let mut g = Self::zero(n, &self.ctx);
        g.coeffs[1] = inv1.clone();
        for k in 2..n {
            // with g_k = 0 the composite's x^k coefficient is the defect to cancel
            let fg = self.truncate(k + 1).compose(&g.truncate(k + 1))?;
            g.coeffs[k] = fg.coeffs[k].times(&inv1).negated();
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn reversion_of_x_plus_x2() {
        let f = Series1::new(vec![r(0, 1), r(1, 1), r(1, 1)], 8, &());
        let g = f.reversion().unwrap();
        // Catalan numbers with alternating signs
        let want = [0, 1, -1, 2, -5, 14, -42, 132];
        for (k, w) in want.iter().enumerate() {
            assert_eq!(g.coeff(k).unwrap(), &r(*w, 1));
        }
        let id = f.compose(&g).unwrap();
        assert_eq!(id, Series1::x(8, &()));
    }

    #[test]
    fn sqrt_of_one_plus_x() {
        let f = Series1::new(vec![r(1, 1), r(1, 1)], 5, &());
        let s = f.pow_rational(&r(1, 2)).unwrap();
        assert_eq!(s.mul(&s), f);
        assert_eq!(s.coeff(2).unwrap(), &r(-1, 8));
    }

    #[test]
    fn recip_geometric() {
        let f = Series1::new(vec![r(1, 1), r(-1, 1)], 6, &());
        let g = f.recip().unwrap();
        assert!(g.coeffs().iter().all(|c| *c == r(1, 1)));
    }

    #[test]
    fn beyond_order_is_none() {
        let f: Series1<Rational> = Series1::x(3, &());
        assert!(f.coeff(3).is_none());
    }
}
