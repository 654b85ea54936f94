use super::{ExactError, Scalar, Series1};

/// Sparse `Σ c_ij x^i y^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiPoly<T: Scalar> {
    pub terms: Vec<(u32, u32, T)>,
    pub ctx: T::Ctx,
}

impl<T: Scalar> BiPoly<T> {
    pub fn new(terms: Vec<(u32, u32, T)>, ctx: &T::Ctx) -> Self {
        BiPoly { terms, ctx: ctx.clone() }
    }

    pub fn d_dy(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.1 > 0)
            .map(|(i, j, c)| (*i, j - 1, c.scaled(&rug::Rational::from(*j))))
            .collect();
        BiPoly { terms, ctx: self.ctx.clone() }
    }

    /// `G(x, s(x))` truncated at the order of `s`.
    pub fn substitute(&self, s: &Series1<T>) -> Series1<T> {
        let n = s.order();
        let max_j = self.terms.iter().map(|t| t.1).max().unwrap_or(0);
        let mut pows = vec![Series1::constant(T::one(&self.ctx), n)];
        for _ in 0..max_j {
            let next = pows.last().unwrap().mul(s);
            pows.push(next);
        }
        let mut acc = Series1::zero(n, &self.ctx);
        for (i, j, c) in &self.terms {
            let i = *i as usize;
            if i >= n {
                continue;
            }
            let p = &pows[*j as usize];
            let mut shifted = vec![T::zero(&self.ctx); i];
            shifted.extend(p.coeffs()[..n - i].iter().map(|v| v.times(c)));
            acc = acc.add(&Series1::new(shifted, n, &self.ctx));
        }
        acc
    }

    pub fn eval_origin(&self) -> T {
        let mut s = T::zero(&self.ctx);
        for (i, j, c) in &self.terms {
            if *i == 0 && *j == 0 {
                s = s.plus(c);
            }
        }
        s
    }
}

/// Series root `s(x)` of `G(x, s(x)) = 0` with `s(0) = 0`, by Newton iteration with doubling precision.
pub fn series_newton<T: Scalar>(g: &BiPoly<T>, order: usize) -> Result<Series1<T>, ExactError> {
    let gy = g.d_dy();
    let gy0 = gy.eval_origin();
    if gy0.is_zero() {
        return Err(ExactError::SingularJacobian);
    }
    if !g.eval_origin().is_zero() {
        return Err(ExactError::Dimension("G(0,0) must vanish".into()));
    }
    let mut s = Series1::zero(order.min(1), &g.ctx);
    let mut prec = 1;
    while prec < order {
        prec = (2 * prec).min(order);
        let cur = Series1::new(s.coeffs().to_vec(), prec, &g.ctx);
        let val = g.substitute(&cur);
        let d = gy.substitute(&cur).recip()?;
        s = cur.sub(&val.mul(&d));
    }
    Ok(Series1::new(s.coeffs().to_vec(), order, &g.ctx))
}
