//! The Liénard family `ẋ = y, ẏ = -8x⁵(x² - ¾) - ε f(x) y` with `f = Σ_{j≤12} a_j x^j`:
//! exact coefficient forms, the three vanishing systems and their ranks.

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::UniversalConstants;
use crate::exact::{
    fmt_rational, linear_solve_rational, parse_rational, pi_split, rank_over_q_pi, ExactError,
    PiLinear, PiLinearForm, Solution,
};

pub const N_PARAMS: usize = 13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LienardError {
    #[error("case must be 1, 2 or 3, got {0}")]
    BadCase(u32),
    #[error("vanishing system for case {0} is inconsistent")]
    Inconsistent(u32),
    #[error("at most {N_PARAMS} coefficients, got {0}")]
    TooMany(usize),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LienardParams {
    pub a: [Rational; N_PARAMS],
}

impl LienardParams {
    pub fn from_slice(a: &[Rational]) -> Result<Self, LienardError> {
        if a.len() > N_PARAMS {
            return Err(LienardError::TooMany(a.len()));
        }
        let mut p = Self::default();
        for (i, x) in a.iter().enumerate() {
            p.a[i] = x.clone();
        }
        Ok(p)
    }

    /// `{"a": ["p/q", ...]}`, shorter lists padded with zeros.
    pub fn from_json(text: &str) -> Result<Self, LienardError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            a: Vec<String>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| LienardError::Schema(e.to_string()))?;
        let v = raw
            .a
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_slice(&v)
    }
}

/// Nonzero transcendental factor kept symbolic in a coefficient form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    A0Tilde,
    A1Tilde,
    A3Tilde,
    A4Tilde,
}

impl Tag {
    pub fn value(self, k: &UniversalConstants) -> Float {
        match self {
            Tag::A0Tilde => k.a0t.clone(),
            Tag::A1Tilde => k.a1t.clone(),
            Tag::A3Tilde => k.a3t.clone(),
            Tag::A4Tilde => k.a4t.clone(),
        }
    }
}

/// `√2 · tag · Σ_j coeffs[j] a_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientForm {
    pub name: &'static str,
    pub tag: Option<Tag>,
    pub coeffs: Vec<PiLinear>,
}

impl CoefficientForm {
    fn rational(name: &'static str, tag: Option<Tag>, scale: Rational, inner: &[(usize, (i64, i64))]) -> Self {
        let mut coeffs = vec![PiLinear::zero(); N_PARAMS];
        for &(j, (n, d)) in inner {
            coeffs[j] = PiLinear::rational(Rational::from(&scale * Rational::from((n, d))));
        }
        CoefficientForm { name, tag, coeffs }
    }

    /// `Σ coeffs[j] a_j` (without the `√2` and the tag).
    pub fn bracket(&self, a: &LienardParams) -> PiLinear {
        self.coeffs
            .iter()
            .zip(&a.a)
            .fold(PiLinear::zero(), |acc, (c, x)| acc.add(&c.scale(x)))
    }

    pub fn eval_float(&self, a: &LienardParams, k: Option<&UniversalConstants>, prec: u32) -> Float {
        let mut v = self.bracket(a).to_float(prec) * Float::with_val(prec, 2u32).sqrt();
        if let Some(t) = self.tag {
            let k = k.expect("constants needed for a tagged form");
            v *= t.value(k);
        }
        v
    }
}

/// `∫_0^1 x^m √(1-x²) dx`.
pub fn beta_half(m: u32) -> PiLinear {
    match m {
        0 => PiLinear::pi_multiple(Rational::from((1, 4))),
        1 => PiLinear::rational(Rational::from((1, 3))),
        _ => beta_half(m - 2).scale(&Rational::from((m as i64 - 1, m as i64 + 2))),
    }
}

/// `∫_0^1 x^m / √(1-x²) dx`.
pub fn arcsine_moment(m: u32) -> PiLinear {
    match m {
        0 => PiLinear::pi_multiple(Rational::from((1, 2))),
        1 => PiLinear::rational(Rational::from(1)),
        _ => arcsine_moment(m - 2).scale(&Rational::from((m as i64 - 1, m as i64))),
    }
}

fn parity(j: u32) -> Rational {
    if j % 2 == 0 {
        Rational::from(1)
    } else {
        Rational::from(-1)
    }
}

/// Exact integrals, each stored as the multiplier of `√2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedFormIntegrals {
    /// `I_1j / √2`, `j = 0..=12`.
    pub i1: Vec<PiLinear>,
    /// `I_2j / √2`.
    pub i2: Vec<PiLinear>,
    /// `∫_0^1 f_j`, `j = 3..=12` (index `j - 3`).
    pub f: Vec<PiLinear>,
    /// `∫_{-1}^0 f_j`.
    pub f_tilde: Vec<PiLinear>,
}

pub fn closed_form_integrals() -> ClosedFormIntegrals {
    let two = Rational::from(2);
    let i1: Vec<PiLinear> = (0..N_PARAMS as u32).map(|j| beta_half(j + 3).scale(&two)).collect();
    let i2 = (0..N_PARAMS as u32).map(|j| i1[j as usize].scale(&parity(j + 3))).collect();
    let f: Vec<PiLinear> = (3..N_PARAMS as u32).map(|j| arcsine_moment(j - 3)).collect();
    let f_tilde = (3..N_PARAMS as u32).map(|j| f[j as usize - 3].scale(&parity(j - 3))).collect();
    ClosedFormIntegrals { i1, i2, f, f_tilde }
}

/// All twelve forms, in the order `c0, c0~, c41, c41~, c1, c2, c3, c5, c6, c7, c8, c9`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientForms {
    pub forms: Vec<CoefficientForm>,
}

impl CoefficientForms {
    pub fn get(&self, name: &str) -> &CoefficientForm {
        self.forms.iter().find(|f| f.name == name).expect("known coefficient name")
    }
}

pub const FORM_NAMES: [&str; 12] = ["c0", "c0t", "c41", "c41t", "c1", "c2", "c3", "c5", "c6", "c7", "c8", "c9"];

pub fn lienard_coefficients() -> CoefficientForms {
    let ints = closed_form_integrals();
    let neg = Rational::from(-1);
    let c0 = CoefficientForm { name: "c0", tag: None, coeffs: ints.i1.iter().map(|x| x.scale(&neg)).collect() };
    let c0t = CoefficientForm { name: "c0t", tag: None, coeffs: ints.i2.iter().map(|x| x.scale(&neg)).collect() };
    let pad = |v: &[PiLinear]| -> Vec<PiLinear> {
        let mut out = vec![PiLinear::zero(); 3];
        out.extend(v.iter().map(|x| x.scale(&neg)));
        out
    };
    let c41 = CoefficientForm { name: "c41", tag: None, coeffs: pad(&ints.f) };
    let c41t = CoefficientForm { name: "c41t", tag: None, coeffs: pad(&ints.f_tilde) };
    let q = |n: i64, d: i64| Rational::from((n, d));
    let forms = vec![
        c0,
        c0t,
        c41,
        c41t,
        CoefficientForm::rational("c1", Some(Tag::A0Tilde), q(-2, 1), &[(0, (1, 1))]),
        CoefficientForm::rational("c2", Some(Tag::A1Tilde), q(-2, 1), &[(1, (1, 1))]),
        CoefficientForm::rational("c3", None, q(1, 12), &[(0, (1, 1)), (2, (2, 1))]),
        CoefficientForm::rational("c5", Some(Tag::A3Tilde), q(-2, 3), &[(1, (2, 1)), (3, (3, 1))]),
        CoefficientForm::rational("c6", Some(Tag::A4Tilde), q(-1, 1), &[(0, (55, 36)), (2, (5, 3)), (4, (2, 1))]),
        CoefficientForm::rational(
            "c7",
            Some(Tag::A0Tilde),
            q(-1, 10),
            &[(0, (1729, 648)), (2, (91, 36)), (4, (7, 3)), (6, (2, 1))],
        ),
        CoefficientForm::rational(
            "c8",
            Some(Tag::A1Tilde),
            q(-4, 11),
            &[(1, (140, 81)), (3, (14, 9)), (5, (4, 3)), (7, (1, 1))],
        ),
        CoefficientForm::rational(
            "c9",
            None,
            q(-1, 48),
            &[(0, (315, 64)), (2, (35, 8)), (4, (15, 4)), (6, (3, 1)), (8, (2, 1))],
        ),
    ];
    CoefficientForms { forms }
}

/// One printed bracket entry: form, index `j`, `(rat numerator, denominator)` or π-multiple.
pub struct PrintedEntry {
    pub form: &'static str,
    pub j: usize,
    pub value: PiLinear,
}

/// Bracket coefficients as printed (each bracket multiplied by `-2√2` or `-√2`).
pub fn printed_brackets() -> Vec<PrintedEntry> {
    // (j, num, den, has π)
    const C0: [(usize, i64, i64, bool); 13] = [
        (12, 2048, 109395, false),
        (11, 429, 65536, true),
        (10, 1024, 45045, false),
        (9, 33, 4096, true),
        (8, 256, 9009, false),
        (0, 2, 15, false),
        (7, 21, 2048, true),
        (6, 128, 3465, false),
        (5, 7, 512, true),
        (4, 16, 315, false),
        (3, 5, 256, true),
        (2, 8, 105, false),
        (1, 1, 32, true),
    ];
    const C0T: [(usize, i64, i64, bool); 13] = [
        (12, -2048, 109395, false),
        (11, 429, 65536, true),
        (10, -1024, 45045, false),
        (9, 33, 4096, true),
        (8, -256, 9009, false),
        (0, -2, 15, false),
        (7, 21, 2048, true),
        (6, -128, 3465, false),
        (5, 7, 512, true),
        (4, -16, 315, false),
        (3, 5, 256, true),
        (2, -8, 105, false),
        (1, 1, 32, true),
    ];
    const C41: [(usize, i64, i64, bool); 10] = [
        (12, 128, 315, false),
        (11, 35, 256, true),
        (10, 16, 35, false),
        (9, 5, 32, true),
        (8, 8, 15, false),
        (7, 3, 16, true),
        (6, 2, 3, false),
        (5, 1, 4, true),
        (4, 1, 1, false),
        (3, 1, 2, true),
    ];
    const C41T: [(usize, i64, i64, bool); 10] = [
        (12, -128, 315, false),
        (11, 35, 256, true),
        (10, -16, 35, false),
        (9, 5, 32, true),
        (8, -8, 15, false),
        (7, 3, 16, true),
        (6, -2, 3, false),
        (5, 1, 4, true),
        (4, -1, 1, false),
        (3, 1, 2, true),
    ];
    let mk = |form: &'static str, t: &[(usize, i64, i64, bool)]| -> Vec<PrintedEntry> {
        t.iter()
            .map(|&(j, n, d, pi)| {
                let q = Rational::from((n, d));
                let value = if pi { PiLinear::pi_multiple(q) } else { PiLinear::rational(q) };
                PrintedEntry { form, j, value }
            })
            .collect()
    };
    let mut v = mk("c0", &C0);
    v.extend(mk("c0t", &C0T));
    v.extend(mk("c41", &C41));
    v.extend(mk("c41t", &C41T));
    v
}

/// Printed prefactor multiplying `√2` in front of each bracket.
pub fn printed_prefactor(form: &str) -> Rational {
    match form {
        "c0" | "c0t" => Rational::from(-2),
        _ => Rational::from(-1),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseSpec {
    pub case: u32,
    pub vanish: Vec<&'static str>,
    pub n_vars: usize,
    pub certificate: &'static str,
    pub limit_cycles: u32,
}

pub fn case_spec(case: u32) -> Result<CaseSpec, LienardError> {
    let base = ["c0t", "c41", "c41t", "c0", "c1", "c2", "c3", "c5", "c6"];
    let (extra, n_vars, certificate, limit_cycles): (&[&'static str], usize, &'static str, u32) = match case {
        1 => (&["c7", "c8"], 13, "c9", 16),
        2 => (&["c7"], 12, "c8", 14),
        3 => (&[], 11, "c7", 13),
        _ => return Err(LienardError::BadCase(case)),
    };
    let mut vanish: Vec<&'static str> = base.to_vec();
    vanish.extend_from_slice(extra);
    Ok(CaseSpec { case, vanish, n_vars, certificate, limit_cycles })
}

/// `a_var = Σ coeff · a_free`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub var: usize,
    pub terms: Vec<(usize, Rational)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseSolution {
    pub case: u32,
    pub n_vars: usize,
    pub free: Vec<usize>,
    /// One relation per pivot variable.
    pub relations: Vec<Relation>,
    /// Nullspace basis indexed like `free`.
    pub basis: Vec<Vec<Rational>>,
    pub certificate: &'static str,
    pub certificate_tag: Option<Tag>,
    /// Certificate bracket restricted to the solution set, per free variable (times `√2 · tag`).
    pub certificate_terms: Vec<(usize, PiLinear)>,
    pub rank: usize,
    pub limit_cycles: u32,
}

impl CaseSolution {
    pub fn relation(&self, var: usize) -> Option<&Relation> {
        self.relations.iter().find(|r| r.var == var)
    }

    /// `a_var / a_free` on the solution set (zero when `a_var` does not depend on it).
    pub fn ratio(&self, var: usize, free: usize) -> Rational {
        if var == free {
            return Rational::from(1);
        }
        self.relation(var)
            .and_then(|r| r.terms.iter().find(|t| t.0 == free).map(|t| t.1.clone()))
            .unwrap_or_default()
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let rel: serde_json::Map<String, serde_json::Value> = self
            .relations
            .iter()
            .map(|r| {
                let terms: serde_json::Map<String, serde_json::Value> = r
                    .terms
                    .iter()
                    .map(|(f, c)| (format!("a{f}"), json!(fmt_rational(c))))
                    .collect();
                (format!("a{}", r.var), serde_json::Value::Object(terms))
            })
            .collect();
        let cert: serde_json::Map<String, serde_json::Value> = self
            .certificate_terms
            .iter()
            .map(|(f, c)| (format!("a{f}"), json!({"rat": fmt_rational(&c.rat), "pi": fmt_rational(&c.pi)})))
            .collect();
        json!({
            "case": self.case,
            "variables": (0..self.n_vars).map(|i| format!("a{i}")).collect::<Vec<_>>(),
            "free": self.free.iter().map(|i| format!("a{i}")).collect::<Vec<_>>(),
            "relations": rel,
            "certificate": {
                "coefficient": self.certificate,
                "factor": match self.certificate_tag { Some(t) => format!("sqrt2*{t:?}"), None => "sqrt2".into() },
                "terms": cert,
            },
            "rank": self.rank,
            "limit_cycles": self.limit_cycles,
        })
    }
}

fn restricted_rows(forms: &CoefficientForms, names: &[&str], n: usize) -> Vec<Vec<PiLinear>> {
    names.iter().map(|nm| forms.get(nm).coeffs[..n].to_vec()).collect()
}

pub fn solve_case(case: u32) -> Result<CaseSolution, LienardError> {
    let spec = case_spec(case)?;
    let forms = lienard_coefficients();
    let n = spec.n_vars;
    let rows = restricted_rows(&forms, &spec.vanish, n);
    let lin: Vec<PiLinearForm> =
        rows.iter().map(|r| PiLinearForm { coeffs: r.clone(), constant: PiLinear::zero() }).collect();
    let (a, b) = pi_split(&lin)?;
    let sol = linear_solve_rational(&a, &b)?;
    let (free, basis) = match sol {
        Solution::Inconsistent => return Err(LienardError::Inconsistent(case)),
        Solution::Unique(_) => (Vec::new(), Vec::new()),
        Solution::Family { nullspace, free, .. } => (free, nullspace),
    };
    let relations = (0..n)
        .filter(|v| !free.contains(v))
        .map(|v| Relation {
            var: v,
            terms: free
                .iter()
                .zip(&basis)
                .filter(|(_, b)| b[v].cmp0().is_ne())
                .map(|(f, b)| (*f, b[v].clone()))
                .collect(),
        })
        .collect();
    let cert = forms.get(spec.certificate);
    let certificate_terms = free
        .iter()
        .zip(&basis)
        .map(|(f, b)| {
            let s = cert.coeffs[..n].iter().zip(b).fold(PiLinear::zero(), |acc, (c, x)| acc.add(&c.scale(x)));
            (*f, s)
        })
        .filter(|(_, s)| !s.is_zero())
        .collect();
    Ok(CaseSolution {
        case,
        n_vars: n,
        free,
        relations,
        basis,
        certificate: spec.certificate,
        certificate_tag: cert.tag,
        certificate_terms,
        rank: rank_over_q_pi(&rows),
        limit_cycles: spec.limit_cycles,
    })
}

/// Rank over `Q(π)` of the Jacobian of the vanishing forms (tags and `√2` dropped).
pub fn jacobian_rank(case: u32) -> Result<usize, LienardError> {
    let spec = case_spec(case)?;
    Ok(rank_over_q_pi(&restricted_rows(&lienard_coefficients(), &spec.vanish, spec.n_vars)))
}

/// Count rule of the zero-counting theorem: `2l - 2` for `l = 8, 9`, `2l - 1` for `l = 6, 7`.
pub fn limit_cycle_bound(l: u32) -> Option<u32> {
    match l {
        8 | 9 => Some(2 * l - 2),
        6 | 7 => Some(2 * l - 1),
        _ => None,
    }
}

/// Divergence data `σ = (-a_0, -a_1, 0, -a_2)` for `p = 0`, `q = -f(x) y`.
pub fn sigma(a: &LienardParams) -> [Rational; 4] {
    [Rational::from(-&a.a[0]), Rational::from(-&a.a[1]), Rational::new(), Rational::from(-&a.a[2])]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn beta_integrals() {
        let ints = closed_form_integrals();
        assert_eq!(ints.i1[0], PiLinear::rational(q(4, 15)));
        assert_eq!(ints.i1[1], PiLinear::pi_multiple(q(1, 16)));
        assert_eq!(ints.f[0], PiLinear::pi_multiple(q(1, 2)));
    }

    #[test]
    fn c3_form() {
        let f = lienard_coefficients();
        let c3 = f.get("c3");
        assert_eq!(c3.coeffs[0], PiLinear::rational(q(1, 12)));
        assert_eq!(c3.coeffs[2], PiLinear::rational(q(1, 6)));
        assert!(c3.coeffs[1].is_zero());
    }

    #[test]
    fn zero_params_zero_forms() {
        let a = LienardParams::default();
        for f in lienard_coefficients().forms {
            assert!(f.bracket(&a).is_zero());
        }
        assert_eq!(LienardParams::from_json(r#"{"a":[]}"#).unwrap(), a);
    }

    #[test]
    fn case_one_relations() {
        let s = solve_case(1).unwrap();
        assert_eq!(s.rank, 11);
        assert_eq!(s.free, vec![7, 12]);
        assert_eq!(s.ratio(8, 12), q(40, 51));
        assert_eq!(s.ratio(10, 12), q(-92, 51));
        assert_eq!(s.ratio(5, 7), q(-3, 4));
        for i in [0, 1, 2, 3, 4, 6, 9, 11] {
            assert!(s.relation(i).unwrap().terms.is_empty(), "a{i}");
        }
        // certificate c9 = -(√2/24) a8 on the solution set
        assert_eq!(s.certificate_terms, vec![(12, PiLinear::rational(q(-40, 51 * 24)))]);
    }

    #[test]
    fn printed_case_one_rationals_are_rounded() {
        let s = solve_case(1).unwrap();
        let printed8: Rational = "21702051851422978291/27670116110564327424".parse().unwrap();
        let printed10: Rational = "-99829438516545753655/55340232221128654848".parse().unwrap();
        for (exact, printed) in [(s.ratio(8, 12), printed8), (s.ratio(10, 12), printed10)] {
            assert_ne!(exact, printed);
            let rel = Rational::from(&exact - &printed) / &exact;
            assert!(rel.to_f64().abs() < 1e-14);
        }
    }

    #[test]
    fn case_two_and_three() {
        let s = solve_case(2).unwrap();
        assert_eq!(s.rank, 10);
        assert_eq!(s.ratio(5, 11), q(165, 256));
        assert_eq!(s.ratio(5, 7), q(-3, 4));
        assert_eq!(s.ratio(9, 11), q(-61, 32));
        assert_eq!(s.certificate_terms, vec![(11, PiLinear::rational(q(-4 * 55, 11 * 64)))]);
        let s = solve_case(3).unwrap();
        assert_eq!(s.rank, 9);
        assert_eq!(s.ratio(6, 10), q(8, 7));
        assert_eq!(s.ratio(8, 10), q(-16, 7));
        assert_eq!(s.ratio(5, 7), q(-3, 4));
        assert_eq!(s.certificate_terms, vec![(10, PiLinear::rational(q(-16, 70)))]);
    }

    #[test]
    fn solutions_annihilate_forms() {
        let forms = lienard_coefficients();
        for case in 1..=3 {
            let s = solve_case(case).unwrap();
            let spec = case_spec(case).unwrap();
            for b in &s.basis {
                let a = LienardParams::from_slice(b).unwrap();
                for nm in &spec.vanish {
                    assert!(forms.get(nm).bracket(&a).is_zero(), "case {case} {nm}");
                }
            }
        }
    }

    #[test]
    fn printed_brackets_match() {
        let forms = lienard_coefficients();
        for e in printed_brackets() {
            let want = e.value.scale(&printed_prefactor(e.form));
            assert_eq!(forms.get(e.form).coeffs[e.j], want, "{} a{}", e.form, e.j);
        }
    }

    #[test]
    fn bad_case() {
        assert_eq!(solve_case(4).unwrap_err(), LienardError::BadCase(4));
    }
}
