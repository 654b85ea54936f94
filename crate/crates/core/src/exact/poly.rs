use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{OnceLock, RwLock};

use rug::Rational;

use super::{fmt_rational, Scalar};

/// Interned symbol id.
pub type Sym = u32;

#[derive(Default)]
struct Interner {
    ids: HashMap<String, Sym>,
    names: Vec<String>,
}

fn interner() -> &'static RwLock<Interner> {
    static I: OnceLock<RwLock<Interner>> = OnceLock::new();
    I.get_or_init(Default::default)
}

pub fn intern(name: &str) -> Sym {
    if let Some(&id) = interner().read().unwrap().ids.get(name) {
        return id;
    }
    let mut w = interner().write().unwrap();
    if let Some(&id) = w.ids.get(name) {
        return id;
    }
    let id = w.names.len() as Sym;
    w.names.push(name.to_string());
    w.ids.insert(name.to_string(), id);
    id
}

pub fn sym_name(s: Sym) -> String {
    interner().read().unwrap().names[s as usize].clone()
}

/// Product of symbol powers, sorted by symbol id, no zero exponents.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<(Sym, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn from_pairs(mut v: Vec<(Sym, i32)>) -> Self {
        v.sort_unstable_by_key(|p| p.0);
        let mut out: Vec<(Sym, i32)> = Vec::with_capacity(v.len());
        for (s, e) in v {
            match out.last_mut() {
                Some(last) if last.0 == s => last.1 += e,
                _ => out.push((s, e)),
            }
        }
        out.retain(|p| p.1 != 0);
        Monomial(out)
    }

    pub fn var(s: Sym) -> Self {
        Monomial(vec![(s, 1)])
    }

    pub fn pairs(&self) -> &[(Sym, i32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, s: Sym) -> i32 {
        self.0.iter().find(|p| p.0 == s).map_or(0, |p| p.1)
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        out.push((a[i].0, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn pow(&self, n: i32) -> Self {
        if n == 0 {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|&(s, e)| (s, e * n)).collect())
    }

    /// Keep only symbols satisfying `keep`; returns (kept, rest).
    pub fn split(&self, keep: impl Fn(Sym) -> bool) -> (Monomial, Monomial) {
        let (k, r): (Vec<_>, Vec<_>) = self.0.iter().partition(|p| keep(p.0));
        (Monomial(k), Monomial(r))
    }

    pub fn named(&self) -> Vec<(String, i32)> {
        let mut v: Vec<_> = self.0.iter().map(|&(s, e)| (sym_name(s), e)).collect();
        v.sort();
        v
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.named().into_iter().map(|(n, e)| format!("{n}^{e}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Multivariate Laurent polynomial over `Q`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn var(name: &str) -> Self {
        Self::term(Rational::from(1), Monomial::var(intern(name)))
    }

    pub fn term(c: Rational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if c.cmp0().is_ne() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::new()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.cmp0().is_eq() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().cmp0().is_eq() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, o: &Poly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), Rational::from(-c))).collect() }
    }

    pub fn scale(&self, q: &Rational) -> Poly {
        if q.cmp0().is_eq() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), Rational::from(c * q))).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                r.add_term(m1.mul(m2), Rational::from(c1 * c2));
            }
        }
        r
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Rational) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.terms {
            r.add_term(m1.mul(m), Rational::from(c1 * c));
        }
        r
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::constant(Rational::from(1));
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Groups terms by the part of their monomial made of symbols satisfying `key`.
    pub fn collect_by(&self, key: impl Fn(Sym) -> bool) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (k, rest) = m.split(&key);
            out.entry(k).or_default().add_term(rest, c.clone());
        }
        out
    }

    /// Symbols appearing in any term.
    pub fn symbols(&self) -> Vec<Sym> {
        let mut v: Vec<Sym> = self.terms.keys().flat_map(|m| m.0.iter().map(|p| p.0)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Evaluates with `lookup` supplying a value per symbol.
    pub fn eval<T: Scalar, E>(
        &self,
        ctx: &T::Ctx,
        mut lookup: impl FnMut(Sym) -> Result<T, E>,
        not_invertible: impl Fn(Sym) -> E,
    ) -> Result<T, E> {
        let mut cache: HashMap<(Sym, i32), T> = HashMap::new();
        let mut acc = T::zero(ctx);
        for (m, c) in &self.terms {
            let mut t = T::from_rational(c, ctx);
            for &(s, e) in &m.0 {
                let v = match cache.get(&(s, e)) {
                    Some(v) => v.clone(),
                    None => {
                        let base = lookup(s)?;
                        let v = base.powi(e as i64).ok_or_else(|| not_invertible(s))?;
                        cache.insert((s, e), v.clone());
                        v
                    }
                };
                t = t.times(&v);
            }
            acc = acc.plus(&t);
        }
        Ok(acc)
    }

    /// Substitutes `s -> val` (nonnegative exponents only for non-monomial values).
    pub fn subs(&self, s: Sym, val: &Poly) -> Poly {
        let mut powers: HashMap<i32, Poly> = HashMap::new();
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(s);
            if e == 0 {
                out.add_term(m.clone(), c.clone());
                continue;
            }
            let (_, rest) = m.split(|x| x == s);
            let p = powers.entry(e).or_insert_with(|| {
                if e > 0 {
                    val.pow(e as u32)
                } else {
                    let inv = val.inverse().expect("negative power of a non-monomial");
                    inv.pow((-e) as u32)
                }
            });
            out.add_assign(&p.mul_monomial(&rest, c));
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut rows: Vec<(String, String)> =
            self.terms.iter().map(|(m, c)| (m.to_string(), fmt_rational(c))).collect();
        rows.sort();
        let parts: Vec<String> = rows
            .into_iter()
            .map(|(m, c)| if m.is_empty() { c } else { format!("{c} {m}") })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Scalar for Poly {
    type Ctx = ();

    fn zero(_: &()) -> Self {
        Poly::zero()
    }
    fn one(_: &()) -> Self {
        Poly::constant(Rational::from(1))
    }
    fn from_rational(q: &Rational, _: &()) -> Self {
        Poly::constant(q.clone())
    }
    fn ctx(&self) {}
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn minus(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn negated(&self) -> Self {
        self.neg()
    }
    fn is_zero(&self) -> bool {
        Poly::is_zero(self)
    }
    /// Only single-term polynomials are units.
    fn inverse(&self) -> Option<Self> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        Some(Poly::term(Rational::from(c.recip_ref()), m.pow(-1)))
    }
    fn scaled(&self, q: &Rational) -> Self {
        self.scale(q)
    }
}

/// Dense univariate polynomial over `Q`, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QPoly(Vec<Rational>);

impl QPoly {
    pub fn new(mut c: Vec<Rational>) -> Self {
        while c.last().is_some_and(|x| x.cmp0().is_eq()) {
            c.pop();
        }
        QPoly(c)
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let mut c = vec![Rational::new(); n];
        for (i, x) in self.0.iter().enumerate() {
            c[i] += x;
        }
        for (i, x) in o.0.iter().enumerate() {
            c[i] += x;
        }
        Self::new(c)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&QPoly(o.0.iter().map(|x| Rational::from(-x)).collect()))
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return QPoly::default();
        }
        let mut c = vec![Rational::new(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += Rational::from(a * b);
            }
        }
        Self::new(c)
    }

    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        let dd = d.degree().expect("division by zero polynomial");
        let lead = d.0[dd].clone();
        let mut r = self.0.clone();
        if r.len() <= dd {
            return (QPoly::default(), self.clone());
        }
        let mut q = vec![Rational::new(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let f = Rational::from(&r[k + dd] / &lead);
            if f.cmp0().is_ne() {
                for (j, dj) in d.0.iter().enumerate() {
                    r[k + j] -= Rational::from(&f * dj);
                }
            }
            q[k] = f;
        }
        r.truncate(dd);
        (Self::new(q), Self::new(r))
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.0.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laurent_product() {
        let x = Poly::var("x_test");
        let y = Poly::var("y_test");
        let p = x.add(&y);
        let q = p.mul(&p);
        assert_eq!(q.len(), 3);
        let xi = x.inverse().unwrap();
        assert_eq!(x.mul(&xi), Poly::constant(Rational::from(1)));
    }

    #[test]
    fn substitution() {
        let x = Poly::var("x_sub");
        let p = x.pow(3).add(&Poly::constant(Rational::from(2)));
        let s = intern("x_sub");
        let r = p.subs(s, &Poly::constant(Rational::from(2)));
        assert_eq!(r.as_constant(), Some(Rational::from(10)));
    }

    #[test]
    fn qpoly_division() {
        let a = QPoly::new(vec![Rational::from(-1), Rational::from(0), Rational::from(1)]);
        let b = QPoly::new(vec![Rational::from(1), Rational::from(1)]);
        let (q, r) = a.div_rem(&b);
        assert!(r.is_zero());
        assert_eq!(q, QPoly::new(vec![Rational::from(-1), Rational::from(1)]));
    }
}
