//! Term tables for the appendix coefficient formulas.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use rug::Rational;
use sha2::{Digest, Sha256};

use super::HamiltonianError;
use crate::exact::{intern, parse_rational, sym_name, Monomial, Poly, Scalar, Sym};

pub const BANK_TSV: &str = include_str!("../../data/appendix_terms.tsv");
pub const ERRATA_TSV: &str = include_str!("../../data/errata.tsv");
pub const BANK_SHA256: &str = "49a631048f7035071173c202cd01ebbd84d5e0e45150b3b311e7263c5440634c";

/// One flagged printed term together with what it most plausibly stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Erratum {
    pub target: String,
    pub kind: String,
    pub printed: Poly,
    pub intended: Poly,
    pub note: String,
}

impl Erratum {
    /// `printed - intended`: what the table carries in excess of the intended expression.
    pub fn excess(&self) -> Poly {
        self.printed.sub(&self.intended)
    }

    /// Symbols present in the printed term but not in the intended terms.
    pub fn stray_symbols(&self) -> Vec<Sym> {
        let intended = self.intended.symbols();
        self.printed.symbols().into_iter().filter(|s| !intended.contains(s)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct FormulaBank {
    tables: BTreeMap<String, Poly>,
    errata: Vec<Erratum>,
    digest: String,
}

fn parse_term(text: &str) -> Result<(Rational, Monomial), HamiltonianError> {
    let mut it = text.split_whitespace();
    let coef = it.next().ok_or_else(|| HamiltonianError::Bank(format!("empty term {text:?}")))?;
    let c = parse_rational(coef).map_err(|e| HamiltonianError::Bank(e.to_string()))?;
    let mut pairs = Vec::new();
    for tok in it {
        let (name, pow) = tok
            .split_once('^')
            .ok_or_else(|| HamiltonianError::Bank(format!("bad factor {tok:?}")))?;
        let e: i32 = pow.parse().map_err(|_| HamiltonianError::Bank(format!("bad exponent {tok:?}")))?;
        pairs.push((intern(name), e));
    }
    Ok((c, Monomial::from_pairs(pairs)))
}

fn parse_terms(text: &str) -> Result<Poly, HamiltonianError> {
    let mut p = Poly::zero();
    for t in text.split(';').filter(|t| !t.trim().is_empty()) {
        let (c, m) = parse_term(t)?;
        p.add_term(m, c);
    }
    Ok(p)
}

impl FormulaBank {
    /// The checked-in bank; fails if its digest differs from the pinned one.
    pub fn load() -> Result<Self, HamiltonianError> {
        let bank = Self::parse(BANK_TSV, ERRATA_TSV)?;
        if bank.digest != BANK_SHA256 {
            return Err(HamiltonianError::Bank(format!(
                "digest mismatch: {} (expected {BANK_SHA256})",
                bank.digest
            )));
        }
        Ok(bank)
    }

    /// Shared instance of the checked-in bank.
    pub fn global() -> &'static FormulaBank {
        static B: std::sync::OnceLock<FormulaBank> = std::sync::OnceLock::new();
        B.get_or_init(|| FormulaBank::load().expect("embedded formula bank"))
    }

    pub fn parse(bank: &str, errata: &str) -> Result<Self, HamiltonianError> {
        let digest: String = Sha256::digest(bank.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let mut tables: BTreeMap<String, Poly> = BTreeMap::new();
        for (lineno, line) in bank.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let mut cols = line.splitn(3, '\t');
            let target = cols.next().unwrap_or_default();
            let coef = cols.next().ok_or_else(|| HamiltonianError::Bank(format!("line {}: no coefficient", lineno + 1)))?;
            let mono = cols.next().unwrap_or("");
            let (c, m) = parse_term(&format!("{coef} {mono}"))
                .map_err(|e| HamiltonianError::Bank(format!("line {}: {e}", lineno + 1)))?;
            tables.entry(target.to_string()).or_default().add_term(m, c);
        }
        let mut list = Vec::new();
        for line in errata.lines() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 5 {
                return Err(HamiltonianError::Bank(format!("bad errata line {line:?}")));
            }
            list.push(Erratum {
                target: cols[0].to_string(),
                kind: cols[1].to_string(),
                printed: parse_terms(cols[2])?,
                intended: parse_terms(cols[3])?,
                note: cols[4].to_string(),
            });
        }
        Ok(FormulaBank { tables, errata: list, digest })
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn table(&self, target: &str) -> Option<&Poly> {
        self.tables.get(target)
    }

    pub fn term_count(&self, target: &str) -> usize {
        self.tables.get(target).map_or(0, Poly::len)
    }

    pub fn errata(&self) -> &[Erratum] {
        &self.errata
    }

    /// Copy with every flagged term replaced by its intended terms.
    pub fn corrected(&self) -> FormulaBank {
        let mut out = self.clone();
        for e in &self.errata {
            if let Some(t) = out.tables.get_mut(&e.target) {
                *t = t.sub(&e.excess());
            }
        }
        out
    }

    pub fn errata_for(&self, target: &str) -> Vec<&Erratum> {
        self.errata.iter().filter(|e| e.target == target).collect()
    }

    /// Evaluates `target`, resolving symbols from `env` first, then from other tables.
    pub fn eval<T: Scalar>(&self, target: &str, env: &Env<T>) -> Result<T, HamiltonianError> {
        let ev = Evaluator { bank: self, env, cache: RefCell::new(HashMap::new()), stack: RefCell::new(Vec::new()) };
        ev.value(intern(target))
    }

    /// Symbolic expansion: symbols for which `keep` holds, or that have no table, stay symbolic.
    pub fn expand(&self, target: &str, keep: &dyn Fn(&str) -> bool) -> Result<Poly, HamiltonianError> {
        let mut memo = HashMap::new();
        self.expand_inner(target, keep, &mut memo)
    }

    fn expand_inner(
        &self,
        target: &str,
        keep: &dyn Fn(&str) -> bool,
        memo: &mut HashMap<String, Poly>,
    ) -> Result<Poly, HamiltonianError> {
        if let Some(p) = memo.get(target) {
            return Ok(p.clone());
        }
        let mut p = self
            .tables
            .get(target)
            .ok_or_else(|| HamiltonianError::UnknownTarget(target.to_string()))?
            .clone();
        for s in p.symbols() {
            let name = sym_name(s);
            if keep(&name) || !self.tables.contains_key(&name) {
                continue;
            }
            let v = self.expand_inner(&name, keep, memo)?;
            let has_negative = p.terms().any(|(m, _)| m.exponent(s) < 0);
            if has_negative && v.len() != 1 {
                continue;
            }
            p = p.subs(s, &v);
        }
        memo.insert(target.to_string(), p.clone());
        Ok(p)
    }
}

/// Values for leaf symbols, plus families whose absent members read as zero.
#[derive(Clone, Debug)]
pub struct Env<T: Scalar> {
    pub ctx: T::Ctx,
    values: HashMap<String, T>,
    zero_prefixes: Vec<String>,
}

impl<T: Scalar> Env<T> {
    pub fn new(ctx: &T::Ctx) -> Self {
        Env { ctx: ctx.clone(), values: HashMap::new(), zero_prefixes: Vec::new() }
    }

    pub fn set(&mut self, name: &str, v: T) -> &mut Self {
        self.values.insert(name.to_string(), v);
        self
    }

    pub fn set_rational(&mut self, name: &str, q: &Rational) -> &mut Self {
        let v = T::from_rational(q, &self.ctx);
        self.set(name, v)
    }

    /// Absent symbols starting with `prefix` (e.g. `"h_"`) are zero.
    pub fn zero_default(&mut self, prefix: &str) -> &mut Self {
        self.zero_prefixes.push(prefix.to_string());
        self
    }

    pub fn get(&self, name: &str) -> Option<T> {
        if let Some(v) = self.values.get(name) {
            return Some(v.clone());
        }
        self.zero_prefixes
            .iter()
            .any(|p| name.starts_with(p.as_str()))
            .then(|| T::zero(&self.ctx))
    }
}

struct Evaluator<'a, T: Scalar> {
    bank: &'a FormulaBank,
    env: &'a Env<T>,
    cache: RefCell<HashMap<Sym, T>>,
    stack: RefCell<Vec<Sym>>,
}

impl<T: Scalar> Evaluator<'_, T> {
    fn value(&self, s: Sym) -> Result<T, HamiltonianError> {
        if let Some(v) = self.cache.borrow().get(&s) {
            return Ok(v.clone());
        }
        let name = sym_name(s);
        let v = if let Some(v) = self.env.get(&name) {
            v
        } else if let Some(table) = self.bank.tables.get(&name) {
            if self.stack.borrow().contains(&s) {
                return Err(HamiltonianError::Bank(format!("cyclic definition through {name}")));
            }
            self.stack.borrow_mut().push(s);
            let r = table.eval(&self.env.ctx, |x| self.value(x), |x| HamiltonianError::NotInvertible(sym_name(x)));
            self.stack.borrow_mut().pop();
            r?
        } else {
            return Err(HamiltonianError::MissingInput(name));
        };
        self.cache.borrow_mut().insert(s, v.clone());
        Ok(v)
    }
}

/// Weight of a Hamiltonian coefficient symbol under the quasi-homogeneous grading.
pub fn h_weight(name: &str) -> Option<i32> {
    if let Some(rest) = name.strip_prefix("h_") {
        let (i, j) = rest.split_once('_')?;
        let (i, j): (i32, i32) = (i.parse().ok()?, j.parse().ok()?);
        return Some(i + 2 * j - 4);
    }
    None
}
