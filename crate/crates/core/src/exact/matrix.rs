use rug::{Integer, Rational};

use super::poly::QPoly;
use super::{ExactError, PiLinear};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix { rows, cols, data: vec![Rational::new(); rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, ExactError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ExactError::Dimension("ragged rows".into()));
        }
        let n = rows.len();
        Ok(RationalMatrix { rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[Rational]) -> Result<Vec<Rational>, ExactError> {
        if x.len() != self.cols {
            return Err(ExactError::Dimension(format!("{} columns vs vector of {}", self.cols, x.len())));
        }
        Ok((0..self.rows)
            .map(|i| {
                let mut s = Rational::new();
                for (a, b) in self.row(i).iter().zip(x) {
                    s += Rational::from(a * b);
                }
                s
            })
            .collect())
    }
}

/// Result of `A x = b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Unique(Vec<Rational>),
    /// `x = particular + Σ t_i nullspace[i]`; the free variables of `particular` are zero.
    Family { particular: Vec<Rational>, nullspace: Vec<Vec<Rational>>, free: Vec<usize> },
    Inconsistent,
}

/// Gauss-Jordan over `Q`.
pub fn linear_solve_rational(a: &RationalMatrix, b: &[Rational]) -> Result<Solution, ExactError> {
    if b.len() != a.rows {
        return Err(ExactError::Dimension(format!("{} rows vs rhs of {}", a.rows, b.len())));
    }
    let n = a.cols;
    let mut m: Vec<Vec<Rational>> = (0..a.rows)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.push(b[i].clone());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..m.len()).find(|&i| m[i][c].cmp0().is_ne()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rational::from(m[r][c].recip_ref());
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == r || row[c].cmp0().is_eq() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= Rational::from(&f * y);
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    if m[r..].iter().any(|row| row[n].cmp0().is_ne()) {
        return Ok(Solution::Inconsistent);
    }
    let mut particular = vec![Rational::new(); n];
    for (i, &c) in pivots.iter().enumerate() {
        particular[c] = m[i][n].clone();
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    if free.is_empty() {
        return Ok(Solution::Unique(particular));
    }
    let nullspace = free
        .iter()
        .map(|&f| {
            let mut v = vec![Rational::new(); n];
            v[f] = Rational::from(1);
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = Rational::from(-&m[i][f]);
            }
            v
        })
        .collect();
    Ok(Solution::Family { particular, nullspace, free })
}

/// Integral domain with exact division, as needed by fraction-free elimination.
trait Domain: Clone {
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn mul(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn exact_div(&self, o: &Self) -> Self;
    /// Lower is a better pivot.
    fn pivot_cost(&self) -> usize;
}

impl Domain for Integer {
    fn one() -> Self {
        Integer::from(1)
    }
    fn is_zero(&self) -> bool {
        self.cmp0().is_eq()
    }
    fn mul(&self, o: &Self) -> Self {
        Integer::from(self * o)
    }
    fn sub(&self, o: &Self) -> Self {
        Integer::from(self - o)
    }
    fn exact_div(&self, o: &Self) -> Self {
        Integer::from(self.div_exact_ref(o))
    }
    fn pivot_cost(&self) -> usize {
        // largest magnitude first
        usize::MAX - self.significant_bits() as usize
    }
}

impl Domain for QPoly {
    fn one() -> Self {
        QPoly::constant(Rational::from(1))
    }
    fn is_zero(&self) -> bool {
        QPoly::is_zero(self)
    }
    fn mul(&self, o: &Self) -> Self {
        QPoly::mul(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        QPoly::sub(self, o)
    }
    fn exact_div(&self, o: &Self) -> Self {
        let (q, r) = self.div_rem(o);
        debug_assert!(r.is_zero(), "inexact division in Bareiss step");
        q
    }
    fn pivot_cost(&self) -> usize {
        self.degree().unwrap_or(0)
    }
}

fn bareiss_rank<T: Domain>(mut m: Vec<Vec<T>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut prev = T::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows)
            .filter(|&i| !m[i][c].is_zero())
            .min_by_key(|&i| m[i][c].pivot_cost())
        else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..rows {
            for j in c + 1..cols {
                let v = m[r][c].mul(&m[i][j]).sub(&m[i][c].mul(&m[r][j]));
                m[i][j] = v.exact_div(&prev);
            }
        }
        prev = m[r][c].clone();
        r += 1;
    }
    r
}

fn integer_rows(a: &RationalMatrix) -> Vec<Vec<Integer>> {
    (0..a.rows)
        .map(|i| {
            let row = a.row(i);
            let mut l = Integer::from(1);
            for x in row {
                l.lcm_mut(x.denom());
            }
            row.iter()
                .map(|x| Integer::from(x.numer() * Integer::from(&l / x.denom())))
                .collect()
        })
        .collect()
}

/// Rank over `Q` by fraction-free elimination on integer-scaled rows.
pub fn rank_rational(a: &RationalMatrix) -> usize {
    bareiss_rank(integer_rows(a))
}

/// Rank over `Q(π)`; since π is transcendental this is the rank over `Q(t)`.
pub fn rank_over_q_pi(rows: &[Vec<PiLinear>]) -> usize {
    let m: Vec<Vec<QPoly>> = rows
        .iter()
        .map(|r| r.iter().map(|x| QPoly::new(vec![x.rat.clone(), x.pi.clone()])).collect())
        .collect();
    bareiss_rank(m)
}

/// `Σ coeffs[i]·a_i + constant = 0` with rational unknowns `a_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiLinearForm {
    pub coeffs: Vec<PiLinear>,
    pub constant: PiLinear,
}

/// Splits each form into its rational and π parts (both must vanish for rational unknowns).
pub fn pi_split(forms: &[PiLinearForm]) -> Result<(RationalMatrix, Vec<Rational>), ExactError> {
    let n = forms.first().map_or(0, |f| f.coeffs.len());
    let mut rows = Vec::with_capacity(2 * forms.len());
    let mut rhs = Vec::with_capacity(2 * forms.len());
    for f in forms {
        if f.coeffs.len() != n {
            return Err(ExactError::Dimension("forms of different length".into()));
        }
        rows.push(f.coeffs.iter().map(|c| c.rat.clone()).collect());
        rhs.push(Rational::from(-&f.constant.rat));
        rows.push(f.coeffs.iter().map(|c| c.pi.clone()).collect());
        rhs.push(Rational::from(-&f.constant.pi));
    }
    Ok((RationalMatrix::from_rows(rows)?, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn solve_family() {
        let a = RationalMatrix::from_rows(vec![
            vec![q(1, 1), q(2, 1), q(3, 1)],
            vec![q(2, 1), q(4, 1), q(6, 1)],
        ])
        .unwrap();
        let sol = linear_solve_rational(&a, &[q(1, 1), q(2, 1)]).unwrap();
        match sol {
            Solution::Family { particular, nullspace, .. } => {
                assert_eq!(nullspace.len(), 2);
                assert_eq!(a.mul_vec(&particular).unwrap(), vec![q(1, 1), q(2, 1)]);
                for v in nullspace {
                    assert!(a.mul_vec(&v).unwrap().iter().all(|x| x.cmp0().is_eq()));
                }
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(rank_rational(&a), 1);
        assert_eq!(linear_solve_rational(&a, &[q(1, 1), q(3, 1)]).unwrap(), Solution::Inconsistent);
    }

    #[test]
    fn rank_with_pi() {
        let p = |r: i64, s: i64| PiLinear::new(q(r, 1), q(s, 1));
        // rows (1, π) and (π, π²) would be dependent; here (1, π) and (π, 1) are not
        let rows = vec![vec![p(1, 0), p(0, 1)], vec![p(0, 1), p(1, 0)]];
        assert_eq!(rank_over_q_pi(&rows), 2);
        let rows = vec![vec![p(1, 1), p(2, 2)], vec![p(3, 3), p(6, 6)]];
        assert_eq!(rank_over_q_pi(&rows), 1);
    }
}
