//! Coefficient chains and certified zero counts of the truncated expansions f1, f2, f3.
//!
//! Everything is done in `s = -ln|h|`: the chains push zeros down to `|h| ~ e^{-10^4}` and
//! beyond, so `h` itself is never formed in double precision.

use rug::Float;
use serde::Serialize;
use thiserror::Error;

use crate::constants::{fmt_float, UniversalConstants};
use crate::exact::bits_for_digits;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CyclesError {
    #[error("l must be in 6..=9, got {0}")]
    BadOrder(u32),
    #[error("variant must be 1, 2 or 3, got {0}")]
    BadVariant(u32),
    #[error("ratio must lie in (0, 1), got {0}")]
    BadRatio(f64),
    #[error("base must lie in (0, 1), got {0}")]
    BadBase(f64),
    #[error("empty or inverted window [{0}, {1}] in -ln|h|")]
    BadWindow(f64, f64),
    #[error("chain check failed: {0}")]
    Chain(String),
}

/// The twelve coefficients entering f1, f2, f3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Coef {
    C0,
    C0t,
    C1,
    C2,
    C3,
    C41,
    C41t,
    C5,
    C6,
    C7,
    C8,
    C9,
}

impl Coef {
    pub const ALL: [Coef; 12] = [
        Coef::C0,
        Coef::C0t,
        Coef::C1,
        Coef::C2,
        Coef::C3,
        Coef::C41,
        Coef::C41t,
        Coef::C5,
        Coef::C6,
        Coef::C7,
        Coef::C8,
        Coef::C9,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Coef::C0 => "c0",
            Coef::C0t => "c0t",
            Coef::C1 => "c1",
            Coef::C2 => "c2",
            Coef::C3 => "c3",
            Coef::C41 => "c41",
            Coef::C41t => "c41t",
            Coef::C5 => "c5",
            Coef::C6 => "c6",
            Coef::C7 => "c7",
            Coef::C8 => "c8",
            Coef::C9 => "c9",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Chain coefficients `c_1 .. c_9` by subscript.
    fn numbered(k: u32) -> Coef {
        match k {
            1 => Coef::C1,
            2 => Coef::C2,
            3 => Coef::C3,
            5 => Coef::C5,
            6 => Coef::C6,
            7 => Coef::C7,
            8 => Coef::C8,
            9 => Coef::C9,
            _ => unreachable!("no chain coefficient c{k}"),
        }
    }
}

/// Which of the two orderings of the `h`-coefficients is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubBranch {
    /// `... c3 << -c41 << c̃41 << -c5 ...`
    A,
    /// `... c3 << -c̃41 << c41 << c5 ...`
    B,
}

impl std::str::FromStr for SubBranch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a" | "A" => Ok(SubBranch::A),
            "b" | "B" => Ok(SubBranch::B),
            _ => Err(format!("sub-branch must be a or b, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSpec {
    pub l: u32,
    pub variant: u32,
    pub sub_branch: SubBranch,
    /// Upper bound on consecutive magnitude ratios.
    pub ratio: f64,
    /// Magnitude of `c_{l-1}`; `c_l` itself has magnitude one.
    pub base: f64,
    /// Sign of `c8` when it is the last free entry (or the fixed one for `l = 8`).
    pub c8_sign: i32,
    /// New terms are at most `1/guard` of the old ones at the previous zeros.
    pub guard: f64,
    pub digits: u32,
}

impl ChainSpec {
    pub fn new(l: u32, variant: u32) -> Self {
        ChainSpec {
            l,
            variant,
            sub_branch: SubBranch::A,
            ratio: 1e-4,
            base: 1e-2,
            c8_sign: -1,
            guard: 1e3,
            digits: 60,
        }
    }

    pub fn validate(&self) -> Result<(), CyclesError> {
        if !(6..=9).contains(&self.l) {
            return Err(CyclesError::BadOrder(self.l));
        }
        if !(1..=3).contains(&self.variant) {
            return Err(CyclesError::BadVariant(self.variant));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(CyclesError::BadRatio(self.ratio));
        }
        if !(self.base > 0.0 && self.base < 1.0) {
            return Err(CyclesError::BadBase(self.base));
        }
        if !(self.guard >= 1.0) {
            return Err(CyclesError::Chain(format!("guard {} below 1", self.guard)));
        }
        Ok(())
    }

    /// Groups of equal magnitude with their signs, smallest first, ending at `c_l`.
    pub fn levels(&self) -> Vec<Vec<(Coef, i32)>> {
        use Coef::*;
        let mut lv: Vec<Vec<(Coef, i32)>> = match self.variant {
            1 => vec![vec![(C0, 1), (C0t, 1)]],
            2 => vec![vec![(C0, 1)], vec![(C0t, -1)]],
            _ => vec![vec![(C0t, 1)], vec![(C0, -1)]],
        };
        lv.push(vec![(C1, -1)]);
        lv.push(vec![(C2, -1)]);
        lv.push(vec![(C3, 1)]);
        match self.sub_branch {
            SubBranch::A => {
                lv.push(vec![(C41, -1)]);
                lv.push(vec![(C41t, 1)]);
                lv.push(vec![(C5, -1)]);
            }
            SubBranch::B => {
                lv.push(vec![(C41t, -1)]);
                lv.push(vec![(C41, 1)]);
                lv.push(vec![(C5, 1)]);
            }
        }
        lv.push(vec![(C6, 1)]);
        lv.push(vec![(C7, -1)]);
        lv.push(vec![(C8, self.c8_sign.signum())]);
        lv.push(vec![(C9, -1)]);
        let last = lv.iter().position(|g| g[0].0 == Coef::numbered(self.l)).expect("c_l present");
        lv.truncate(last + 1);
        lv
    }

    /// Counts the ordering is built to produce: the per-function triple where it is
    /// stated for the variant, and the total `2l-2` (l = 8, 9) or `2l-1` (l = 6, 7).
    pub fn expected(&self) -> (Option<[usize; 3]>, usize) {
        let total = if self.l >= 8 { 2 * self.l - 2 } else { 2 * self.l - 1 } as usize;
        let triple = match (self.l, self.variant) {
            (9, 1) => Some([6, 6, 4]),
            (9, 2) => Some([6, 5, 5]),
            (9, 3) => Some([5, 6, 5]),
            _ => None,
        };
        (triple, total)
    }
}

/// One term `w · t^{alpha6/6} · s^{log}` of some f_i, `t = |h|`, `s = -ln t`.
/// `parts` lists `(coefficient, factor)` with `w = Σ factor · coefficient`.
#[derive(Clone, Debug)]
struct Slot {
    parts: Vec<(Coef, Float)>,
    alpha6: u32,
    log: bool,
}

/// Signed terms of f1, f2 (h < 0) and f3 (h > 0) in the variable `(t, s)`.
fn slots(f: usize, d1: &Float, d2: &Float) -> Vec<Slot> {
    use Coef::*;
    let prec = d1.prec();
    let c = |x: f64| Float::with_val(prec, x);
    let one = |k: Coef, f: f64, a: u32, log: bool| Slot { parts: vec![(k, c(f))], alpha6: a, log };
    match f {
        // h ln|h| = t s, h = -t, h² ln|h| = -t² s
        0 => vec![
            one(C0, 1.0, 0, false),
            one(C1, 1.0, 4, false),
            one(C2, 1.0, 5, false),
            one(C3, 1.0, 6, true),
            one(C41, -1.0, 6, false),
            one(C5, 1.0, 7, false),
            one(C6, 1.0, 8, false),
            one(C7, 1.0, 10, false),
            one(C8, 1.0, 11, false),
            one(C9, -1.0, 12, true),
        ],
        1 => vec![
            one(C0t, 1.0, 0, false),
            one(C1, 1.0, 4, false),
            one(C2, -1.0, 5, false),
            one(C3, 1.0, 6, true),
            one(C41t, -1.0, 6, false),
            one(C5, -1.0, 7, false),
            one(C6, 1.0, 8, false),
            one(C7, 1.0, 10, false),
            one(C8, -1.0, 11, false),
            one(C9, -1.0, 12, true),
        ],
        // h ln h = -t s, h² ln h = -t² s
        _ => vec![
            Slot { parts: vec![(C0, c(1.0)), (C0t, c(1.0))], alpha6: 0, log: false },
            Slot { parts: vec![(C1, Float::with_val(prec, d1 * -2i32))], alpha6: 4, log: false },
            one(C3, -2.0, 6, true),
            Slot { parts: vec![(C41, c(1.0)), (C41t, c(1.0))], alpha6: 6, log: false },
            Slot { parts: vec![(C6, Float::with_val(prec, d2 * -2i32))], alpha6: 8, log: false },
            Slot { parts: vec![(C7, Float::with_val(prec, d1 * 2u32))], alpha6: 10, log: false },
            one(C9, -2.0, 12, true),
        ],
    }
}

/// A signed number stored as `sign · exp(ln_abs)`; chain entries reach `e^{-10^9}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogValue {
    /// -1, 0 or 1; `ln_abs` is meaningless when 0.
    pub sign: i32,
    pub ln_abs: Float,
}

impl LogValue {
    pub fn zero(prec: u32) -> LogValue {
        LogValue { sign: 0, ln_abs: Float::new(prec) }
    }

    pub fn from_float(x: &Float) -> LogValue {
        if x.is_zero() {
            return LogValue::zero(x.prec());
        }
        LogValue {
            sign: if x.is_sign_negative() { -1 } else { 1 },
            ln_abs: Float::with_val(x.prec(), x.abs_ref()).ln(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// The plain value; underflows to zero far out along a chain.
    pub fn to_float(&self) -> Float {
        let p = self.ln_abs.prec();
        if self.sign == 0 {
            return Float::new(p);
        }
        Float::with_val(p, self.ln_abs.exp_ref()) * self.sign
    }

    pub fn ln_f64(&self) -> f64 {
        self.ln_abs.to_f64()
    }

    fn scale(&self, f: &Float) -> LogValue {
        if self.sign == 0 || f.is_zero() {
            return LogValue::zero(self.ln_abs.prec());
        }
        let s = if f.is_sign_negative() { -self.sign } else { self.sign };
        let l = Float::with_val(self.ln_abs.prec(), f.abs_ref()).ln();
        LogValue { sign: s, ln_abs: Float::with_val(self.ln_abs.prec(), &self.ln_abs + &l) }
    }

    fn add(&self, other: &LogValue) -> LogValue {
        if other.sign == 0 {
            return self.clone();
        }
        if self.sign == 0 {
            return other.clone();
        }
        let (big, small) = if self.ln_abs >= other.ln_abs { (self, other) } else { (other, self) };
        let p = big.ln_abs.prec();
        let r = Float::with_val(p, &small.ln_abs - &big.ln_abs).exp();
        let r = if big.sign == small.sign { r } else { -r };
        if r == -1 {
            return LogValue::zero(p);
        }
        LogValue { sign: big.sign, ln_abs: Float::with_val(p, &big.ln_abs + r.ln_1p()) }
    }

    /// Scientific notation with `sig` significant digits and an exponent of any size.
    pub fn to_decimal(&self, sig: usize) -> String {
        if self.sign == 0 {
            return "0".into();
        }
        let p = self.ln_abs.prec();
        let l10 = Float::with_val(p, &self.ln_abs / Float::with_val(p, 10u32).ln());
        let e = Float::with_val(p, l10.floor_ref());
        let mant = Float::with_val(p, Float::with_val(p, &l10 - &e).exp10());
        let (mut e, mut m) = (e.to_f64() as i64, fmt_float(&mant, sig));
        // rounding can carry the mantissa to 10
        if let Some(stripped) = m.strip_suffix("e1") {
            e += 1;
            m = fmt_float(&Float::with_val(p, stripped.parse::<f64>().unwrap_or(10.0) / 10.0), sig);
        }
        let m = m.strip_suffix("e0").unwrap_or(&m).to_string();
        format!("{}{}e{}", if self.sign < 0 { "-" } else { "" }, m, e)
    }
}

/// Concrete coefficients with the constants that enter f3.
#[derive(Clone, Debug)]
pub struct Chain {
    pub values: [LogValue; 12],
    pub d1: Float,
    pub d2: Float,
    pub spec: Option<ChainSpec>,
    /// Approximate zero locations in `s` used during the construction, per function.
    pub balance_points: [Vec<f64>; 3],
}

#[derive(Serialize)]
pub struct ChainJson {
    pub spec: Option<ChainSpec>,
    pub digits: u32,
    pub coefficients: Vec<(String, String)>,
    pub ln_magnitudes: Vec<(String, Option<f64>)>,
}

impl Chain {
    /// A user-supplied vector; names absent from `values` are zero.
    pub fn from_values(values: &[(Coef, Float)], d1: &Float, d2: &Float) -> Chain {
        let prec = d1.prec();
        let mut v: [LogValue; 12] = std::array::from_fn(|_| LogValue::zero(prec));
        for (k, x) in values {
            v[k.index()] = LogValue::from_float(&Float::with_val(prec, x));
        }
        Chain { values: v, d1: d1.clone(), d2: d2.clone(), spec: None, balance_points: Default::default() }
    }

    pub fn get(&self, k: Coef) -> &LogValue {
        &self.values[k.index()]
    }

    pub fn prec(&self) -> u32 {
        self.d1.prec()
    }

    fn with_prec(&self, prec: u32) -> Chain {
        let mut c = self.clone();
        for v in c.values.iter_mut() {
            v.ln_abs.set_prec(prec);
        }
        c.d1.set_prec(prec);
        c.d2.set_prec(prec);
        c
    }

    fn terms(&self, f: usize) -> Vec<Term> {
        slots(f, &self.d1, &self.d2)
            .into_iter()
            .filter_map(|sl| {
                let mut w = LogValue::zero(self.prec());
                for (k, fac) in &sl.parts {
                    w = w.add(&self.get(*k).scale(fac));
                }
                (!w.is_zero()).then(|| Term {
                    sign: w.sign,
                    lnw_f: w.ln_f64(),
                    lnw: w.ln_abs,
                    alpha6: sl.alpha6,
                    log: sl.log,
                })
            })
            .collect()
    }

    pub fn to_json(&self, digits: u32) -> ChainJson {
        let d = digits as usize;
        ChainJson {
            spec: self.spec.clone(),
            digits,
            coefficients: Coef::ALL.iter().map(|k| (k.name().to_string(), self.get(*k).to_decimal(d))).collect(),
            ln_magnitudes: Coef::ALL
                .iter()
                .map(|k| {
                    let x = self.get(*k);
                    (k.name().to_string(), (!x.is_zero()).then(|| x.ln_f64()))
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
struct Term {
    sign: i32,
    lnw: Float,
    lnw_f: f64,
    alpha6: u32,
    log: bool,
}

impl Term {
    fn ln_abs(&self, s: f64) -> f64 {
        self.lnw_f - self.alpha6 as f64 * s / 6.0 + if self.log { s.ln() } else { 0.0 }
    }

    fn ln_abs_mp(&self, s: &Float, ln_s: &Float) -> Float {
        let p = s.prec();
        let mut l = Float::with_val(p, &self.lnw - Float::with_val(p, s * self.alpha6) / 6u32);
        if self.log {
            l += ln_s;
        }
        l
    }
}

/// `s` where `|a(s)| = e^{offset} |b(s)|`, searched above `from`; `a` must win as `s` grows.
fn balance(a: &Term, b: &Term, from: f64, offset: f64) -> Option<f64> {
    let d = |s: f64| a.ln_abs(s) - b.ln_abs(s) - offset;
    let lo = from.max(1.0);
    if d(lo) >= 0.0 {
        return Some(lo);
    }
    let mut hi = 2.0 * lo;
    while d(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    Some(bisect(d, lo, hi))
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let neg_lo = g(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper end of the scan window in `|h|`.
pub const WINDOW_TOP: f64 = 0.1;

/// Builds the chain top-down: `c_l = ±1`, `c_{l-1} = ±base`, and each further group is the
/// largest magnitude that is at most `ratio` times the group above and whose new term is at
/// most `1/guard` of the adjacent larger term at the current smallest zero of every f_i it
/// enters.
pub fn build_chain(spec: &ChainSpec, consts: &UniversalConstants) -> Result<Chain, CyclesError> {
    spec.validate()?;
    let prec = bits_for_digits(spec.digits);
    let d1 = Float::with_val(prec, &consts.d1);
    let d2 = Float::with_val(prec, &consts.d2);
    let mut chain = Chain::from_values(&[], &d1, &d2);
    chain.spec = Some(spec.clone());
    let slot_tables: Vec<Vec<Slot>> = (0..3).map(|f| slots(f, &d1, &d2)).collect();
    let slot_of = |f: usize, k: Coef| slot_tables[f].iter().position(|s| s.parts.iter().any(|p| p.0 == k));
    let mut active: [Vec<bool>; 3] = std::array::from_fn(|f| vec![false; slot_tables[f].len()]);
    let mut frontier = [-WINDOW_TOP.ln(); 3];
    let ln_guard = spec.guard.ln();

    let levels = spec.levels();
    let ln_ratio = Float::with_val(prec, spec.ratio).ln();
    let mut prev_ln_mag = Float::new(prec);
    for (depth, group) in levels.iter().rev().enumerate() {
        let ln_mag = match depth {
            0 => Float::new(prec),
            1 => Float::with_val(prec, spec.base).ln(),
            _ => {
                let mut m = Float::with_val(prec, &prev_ln_mag + &ln_ratio);
                let terms: Vec<Vec<Term>> = (0..3).map(|f| chain.terms(f)).collect();
                for &(k, _) in group {
                    for f in 0..3 {
                        let Some(si) = slot_of(f, k) else { continue };
                        if active[f][si] {
                            continue;
                        }
                        let Some(up) = next_active(&active[f], si) else { continue };
                        let big = term_for(&terms[f], &slot_tables[f][up]);
                        let sl = &slot_tables[f][si];
                        let fac = sl.parts.iter().find(|p| p.0 == k).expect("member").1.to_f64().abs().ln();
                        let s = frontier[f];
                        let new_at_unit = fac - sl.alpha6 as f64 * s / 6.0 + if sl.log { s.ln() } else { 0.0 };
                        let cap = big.ln_abs(s) - ln_guard - new_at_unit;
                        if m > cap {
                            m = Float::with_val(prec, cap);
                        }
                    }
                }
                m
            }
        };
        for &(k, sign) in group {
            chain.values[k.index()] = LogValue { sign, ln_abs: ln_mag.clone() };
        }
        prev_ln_mag = ln_mag;
        let terms: Vec<Vec<Term>> = (0..3).map(|f| chain.terms(f)).collect();
        for f in 0..3 {
            let mut newly: Vec<usize> = group.iter().filter_map(|&(k, _)| slot_of(f, k)).filter(|&si| !active[f][si]).collect();
            newly.sort();
            newly.dedup();
            for si in newly {
                if let Some(up) = next_active(&active[f], si) {
                    let small = term_for(&terms[f], &slot_tables[f][si]);
                    let big = term_for(&terms[f], &slot_tables[f][up]);
                    let none = || CyclesError::Chain(format!("no balance point in f{}", f + 1));
                    let s = balance(&small, &big, frontier[f], 0.0).ok_or_else(none)?;
                    // later terms are sized where this pair has separated again, which for a
                    // logarithmic pair is a factor `guard` further out in s, not a constant
                    frontier[f] = balance(&small, &big, s, ln_guard).ok_or_else(none)?;
                    chain.balance_points[f].push(s);
                }
                active[f][si] = true;
            }
        }
    }
    check_chain(&chain, spec)?;
    Ok(chain)
}

fn next_active(active: &[bool], si: usize) -> Option<usize> {
    (si + 1..active.len()).find(|&j| active[j])
}

fn term_for(terms: &[Term], slot: &Slot) -> Term {
    terms
        .iter()
        .find(|t| t.alpha6 == slot.alpha6 && t.log == slot.log)
        .cloned()
        .expect("active slot has a nonzero term")
}

/// Signs and the `ratio` bound between consecutive groups, recomputed from the values.
pub fn check_chain(chain: &Chain, spec: &ChainSpec) -> Result<(), CyclesError> {
    let levels = spec.levels();
    for g in &levels {
        for &(k, sign) in g {
            if chain.get(k).sign != sign {
                return Err(CyclesError::Chain(format!("{} has the wrong sign", k.name())));
            }
        }
    }
    // c_{l-1} against c_l is set by `base`, not `ratio`
    let prec = chain.prec();
    let bound = Float::with_val(prec, spec.ratio).ln() + Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 2));
    for w in levels[..levels.len() - 1].windows(2) {
        let ln = |p: &(Coef, i32)| chain.get(p.0).ln_abs.clone();
        let lo = w[0].iter().map(ln).reduce(|a, b| a.max(&b)).expect("nonempty group");
        let hi = w[1].iter().map(ln).reduce(|a, b| a.min(&b)).expect("nonempty group");
        if Float::with_val(prec, &lo - &hi) > bound {
            return Err(CyclesError::Chain(format!("{} is not << {}", w[0][0].0.name(), w[1][0].0.name())));
        }
    }
    for k in Coef::ALL {
        if !levels.iter().flatten().any(|p| p.0 == k) && !chain.get(k).is_zero() {
            return Err(CyclesError::Chain(format!("{} lies above c_l but is nonzero", k.name())));
        }
    }
    Ok(())
}

/// Scan window in `s = -ln|h|`, the same for the three functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub s_lo: f64,
    pub s_hi: f64,
    /// Below this the whole range is sampled at the grid step.
    pub s_dense: f64,
}

impl Window {
    pub fn new(s_lo: f64, s_hi: f64) -> Window {
        Window { s_lo, s_hi, s_dense: s_hi.min(s_lo + 120.0) }
    }

    /// From `|h| = 0.1` past the smallest balance point of the chain; the full grid covers
    /// `|h| >= ratio^{l+2}`.
    pub fn for_chain(chain: &Chain) -> Window {
        let s_lo = -WINDOW_TOP.ln();
        let deepest = chain.balance_points.iter().flatten().fold(s_lo, |a, &b| a.max(b));
        let mut s_hi = 1.25 * deepest + 50.0;
        let mut s_dense = s_lo + 120.0;
        if let Some(sp) = &chain.spec {
            let floor = -(sp.l as f64 + 2.0) * sp.ratio.ln();
            s_hi = s_hi.max(floor);
            s_dense = s_dense.max(floor);
        }
        Window { s_lo, s_hi, s_dense: s_dense.min(s_hi) }
    }
}

/// Value of `f · e^{-scale}` and its rounding bound at the chain's precision.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: Float,
    pub bound: Float,
    pub scale: Float,
}

impl Evaluation {
    pub fn certified(&self) -> bool {
        let a = Float::with_val(self.value.prec(), self.value.abs_ref());
        a > Float::with_val(self.value.prec(), &self.bound * 10u32)
    }

    fn sign(&self) -> i32 {
        if self.value.is_sign_negative() {
            -1
        } else {
            1
        }
    }

    fn margin(&self) -> f64 {
        (Float::with_val(self.value.prec(), self.value.abs_ref()) / &self.bound).to_f64()
    }
}

fn eval_mp(terms: &[Term], s: &Float) -> Evaluation {
    let prec = s.prec();
    let ln_s = Float::with_val(prec, s.ln_ref());
    let ls: Vec<Float> = terms.iter().map(|t| t.ln_abs_mp(s, &ln_s)).collect();
    let top = ls.iter().fold(Float::with_val(prec, f64::NEG_INFINITY), |a, b| a.max(b));
    let biggest = ls.iter().fold(Float::with_val(prec, 1u32), |a, b| a.max(&Float::with_val(prec, b.abs_ref())));
    let mut value = Float::new(prec);
    let mut abs = Float::new(prec);
    for (t, l) in terms.iter().zip(&ls) {
        let x = Float::with_val(prec, l - &top).exp();
        abs += &x;
        value += x * t.sign;
    }
    // log magnitudes of size |L| carry |L|·ulp absolute error; a few more ulps per term
    let ulp = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 1));
    let bound = abs * ulp * (biggest + (terms.len() as u32 + 8));
    Evaluation { value, bound, scale: top }
}

/// Sign at `s` from double-precision log magnitudes, `None` when too close to call.
fn screen(terms: &[Term], s: f64) -> Option<i32> {
    let ls: Vec<f64> = terms.iter().map(|t| t.ln_abs(s)).collect();
    let top = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut abs = 0.0;
    for (t, l) in terms.iter().zip(&ls) {
        let e = (l - top).exp();
        sum += t.sign as f64 * e;
        abs += e;
    }
    let size = ls.iter().fold(s, |a, b| a.max(b.abs()));
    let tol = 1e-9 + 1e-14 * size;
    if sum.abs() > tol * abs {
        Some(if sum < 0.0 { -1 } else { 1 })
    } else {
        None
    }
}

/// `max_{[a,b]} (L_j - L_k)` for the log magnitudes of two terms.
fn max_gap(j: &Term, k: &Term, a: f64, b: f64) -> f64 {
    let g = |s: f64| j.ln_abs(s) - k.ln_abs(s);
    let mut m = g(a).max(g(b));
    let da = -(j.alpha6 as f64 - k.alpha6 as f64) / 6.0;
    let dl = j.log as i32 as f64 - k.log as i32 as f64;
    // g' = da + dl/s vanishes once, at a maximum when dl > 0
    if dl > 0.0 && da < 0.0 {
        let sc = -dl / da;
        if sc > a && sc < b {
            m = m.max(g(sc));
        }
    }
    m
}

/// True when one term exceeds the sum of all terms of the opposite sign on `[a, b]`, so `f`
/// has no zero there.
fn dominated(terms: &[Term], a: f64, b: f64) -> bool {
    let mid = 0.5 * (a + b);
    let Some(k) = (0..terms.len()).max_by(|&x, &y| terms[x].ln_abs(mid).total_cmp(&terms[y].ln_abs(mid))) else {
        return true;
    };
    let mut sum = 0.0;
    for t in terms.iter().filter(|t| t.sign != terms[k].sign) {
        sum += max_gap(t, &terms[k], a, b).exp();
    }
    // margin covers rounding in the double-precision log magnitudes
    sum < 1.0 - 1e-4
}

/// [`dominated`] with the log magnitudes at full precision, for the long near-ties that
/// logarithmic crossings produce.
fn dominated_mp(terms: &[Term], a: f64, b: f64, prec: u32) -> bool {
    let pts: Vec<Float> = [a, b, 0.5 * (a + b)].iter().map(|x| Float::with_val(prec, *x)).collect();
    let ls: Vec<Vec<Float>> = pts
        .iter()
        .map(|s| {
            let ln_s = Float::with_val(prec, s.ln_ref());
            terms.iter().map(|t| t.ln_abs_mp(s, &ln_s)).collect()
        })
        .collect();
    let mid = &ls[2];
    let Some(k) = (0..terms.len()).max_by(|&x, &y| mid[x].partial_cmp(&mid[y]).expect("finite")) else {
        return true;
    };
    let mut sum = Float::new(prec);
    for (j, t) in terms.iter().enumerate() {
        if t.sign == terms[k].sign {
            continue;
        }
        let mut m = Float::with_val(prec, &ls[0][j] - &ls[0][k]).max(&Float::with_val(prec, &ls[1][j] - &ls[1][k]));
        let da = -(t.alpha6 as f64 - terms[k].alpha6 as f64) / 6.0;
        let dl = t.log as i32 as f64 - terms[k].log as i32 as f64;
        if dl > 0.0 && da < 0.0 && (-dl / da) > a && (-dl / da) < b {
            let sc = Float::with_val(prec, -dl / da);
            let ln_s = Float::with_val(prec, sc.ln_ref());
            m = m.max(&Float::with_val(prec, t.ln_abs_mp(&sc, &ln_s) - terms[k].ln_abs_mp(&sc, &ln_s)));
        }
        sum += m.exp();
    }
    let margin = Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 2));
    sum < Float::with_val(prec, 1u32 - margin)
}

/// Roots of `L_j = L_k` inside `[lo, hi]`, tagged `true` when only the logarithm separates them.
fn crossings(j: &Term, k: &Term, lo: f64, hi: f64) -> Vec<(f64, bool)> {
    let g = |s: f64| j.ln_abs(s) - k.ln_abs(s);
    let da = -(j.alpha6 as f64 - k.alpha6 as f64) / 6.0;
    let dl = j.log as i32 as f64 - k.log as i32 as f64;
    if da == 0.0 {
        if dl == 0.0 {
            return vec![];
        }
        let s = (-(j.lnw_f - k.lnw_f) / dl).exp();
        return if s > lo && s < hi { vec![(s, true)] } else { vec![] };
    }
    let mut pieces = vec![lo];
    if dl != 0.0 {
        let sc = -dl / da;
        if sc > lo && sc < hi {
            pieces.push(sc);
        }
    }
    pieces.push(hi);
    pieces
        .windows(2)
        .filter(|w| (g(w[0]) < 0.0) != (g(w[1]) < 0.0))
        .map(|w| (bisect(g, w[0], w[1]), false))
        .collect()
}

/// Grid step in `s`: `POINTS_PER_DECADE` points per decade of `|h|`.
fn grid_step() -> f64 {
    std::f64::consts::LN_10 / POINTS_PER_DECADE as f64
}

/// Initial samples: the full grid below `s_dense`, plus grid-spaced points around every
/// crossing of two term magnitudes, out to where they differ by a factor `1e4`.
fn sample_points(terms: &[Term], window: Window) -> Vec<f64> {
    let step = grid_step();
    let reach = 1e4f64.ln();
    let mut pts = vec![];
    let mut s = window.s_lo;
    while s < window.s_dense {
        pts.push(s);
        s += step;
    }
    pts.push(window.s_dense);
    pts.push(window.s_hi);
    for (j, a) in terms.iter().enumerate() {
        for b in &terms[j + 1..] {
            for (c, log_only) in crossings(a, b, window.s_lo, window.s_hi) {
                if log_only {
                    let f = reach.exp();
                    let mut x = (c / f).max(window.s_lo);
                    while x < (c * f).min(window.s_hi) {
                        pts.push(x);
                        x *= step.exp();
                    }
                } else {
                    let da = (a.alpha6 as f64 - b.alpha6 as f64).abs() / 6.0;
                    let w = (reach / da).min(2000.0);
                    let mut x = (c - w).max(window.s_lo);
                    while x < (c + w).min(window.s_hi) {
                        pts.push(x);
                        x += step;
                    }
                }
            }
        }
    }
    pts.retain(|x| *x >= window.s_lo && *x <= window.s_hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    pts
}

/// A certified sign change of one f_i.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroBracket {
    pub function: usize,
    /// Bracket in `s = -ln|h|`.
    pub s_lo: String,
    pub s_hi: String,
    /// The same bracket in `h` (negative for f1, f2).
    pub h_near: String,
    pub h_far: String,
    pub log10_abs_h: f64,
    /// `|f| / error bound` at the two ends, both above 10.
    pub margin_near: f64,
    pub margin_far: f64,
}

/// A sign change or gap that could not be certified at the working precision.
#[derive(Clone, Debug, Serialize)]
pub struct Ambiguity {
    pub function: usize,
    pub s_lo: f64,
    pub s_hi: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroCountReport {
    pub spec: Option<ChainSpec>,
    pub counts: [usize; 3],
    pub total: usize,
    pub ambiguous: Vec<Ambiguity>,
    pub expected: Option<[usize; 3]>,
    pub expected_total: Option<usize>,
    pub matches: Option<bool>,
    pub digits: u32,
    pub window: Window,
    pub points_per_decade: u32,
    pub samples: [usize; 3],
    pub zeros: Vec<ZeroBracket>,
}

pub const POINTS_PER_DECADE: u32 = 200;

/// Most extra samples a single function may add while closing uncertified gaps.
const REFINE_BUDGET: usize = 100_000;

/// Counts zeros of f1, f2, f3 on `window`.
///
/// Samples sit on a logarithmic grid (dense near the top of the window and around every
/// crossing of two term magnitudes). A gap between equal signs is accepted when it is one
/// grid step or when a single term dominates the rest on it, and is bisected otherwise. Each
/// sign change is then certified at `digits` and narrowed by bisection.
pub fn count_zeros(chain: &Chain, window: Window, digits: u32) -> Result<ZeroCountReport, CyclesError> {
    if !(window.s_lo > 0.0 && window.s_hi > window.s_lo && window.s_hi.is_finite()) {
        return Err(CyclesError::BadWindow(window.s_lo, window.s_hi));
    }
    let prec = bits_for_digits(digits);
    let re = chain.with_prec(prec);
    let results: Vec<FunctionScan> = {
        use rayon::prelude::*;
        (0..3usize).into_par_iter().map(|f| scan_one(&re, f, window, prec)).collect()
    };
    let mut zeros = vec![];
    let mut ambiguous = vec![];
    let mut counts = [0usize; 3];
    let mut samples = [0usize; 3];
    for (f, r) in results.into_iter().enumerate() {
        counts[f] = r.zeros.len();
        samples[f] = r.samples;
        zeros.extend(r.zeros);
        ambiguous.extend(r.ambiguous);
    }
    let total = counts.iter().sum();
    let (expected, expected_total) = match &chain.spec {
        Some(sp) => {
            let (e, t) = sp.expected();
            (e, Some(t))
        }
        None => (None, None),
    };
    let matches = expected_total.map(|t| ambiguous.is_empty() && total == t && expected.map_or(true, |e| e == counts));
    Ok(ZeroCountReport {
        spec: chain.spec.clone(),
        counts,
        total,
        ambiguous,
        expected,
        expected_total,
        matches,
        digits,
        window,
        points_per_decade: POINTS_PER_DECADE,
        samples,
        zeros,
    })
}

struct FunctionScan {
    zeros: Vec<ZeroBracket>,
    ambiguous: Vec<Ambiguity>,
    samples: usize,
}

fn scan_one(chain: &Chain, f: usize, window: Window, prec: u32) -> FunctionScan {
    let terms = chain.terms(f);
    let mut out = FunctionScan { zeros: vec![], ambiguous: vec![], samples: 0 };
    if terms.is_empty() {
        return out;
    }
    let step = grid_step();
    let sign_at = |s: f64| -> Option<i32> {
        screen(&terms, s).or_else(|| {
            let e = eval_mp(&terms, &Float::with_val(prec, s));
            e.certified().then(|| e.sign())
        })
    };
    let open = |a: &(f64, Option<i32>), b: &(f64, Option<i32>)| {
        a.1.is_some()
            && a.1 == b.1
            && b.0 - a.0 > 1.5 * step
            && !dominated(&terms, a.0, b.0)
            && !dominated_mp(&terms, a.0, b.0, prec)
    };
    let mut samples: Vec<(f64, Option<i32>)> = sample_points(&terms, window).into_iter().map(|s| (s, sign_at(s))).collect();
    let mut budget = REFINE_BUDGET;
    loop {
        let mut next = Vec::with_capacity(samples.len());
        let mut added = false;
        for w in samples.windows(2) {
            next.push(w[0]);
            if budget > 0 && open(&w[0], &w[1]) {
                let m = 0.5 * (w[0].0 + w[1].0);
                next.push((m, sign_at(m)));
                budget -= 1;
                added = true;
            }
        }
        next.push(*samples.last().expect("nonempty"));
        samples = next;
        if !added {
            break;
        }
    }
    out.samples = samples.len();
    for w in samples.windows(2) {
        if open(&w[0], &w[1]) {
            out.ambiguous.push(Ambiguity {
                function: f + 1,
                s_lo: w[0].0,
                s_hi: w[1].0,
                reason: "gap neither resolved by the grid nor dominated by one term".into(),
            });
        }
    }
    let mut last: Option<(f64, i32)> = None;
    let mut noise = false;
    for &(s, sg) in &samples {
        let Some(sg) = sg else {
            noise = true;
            continue;
        };
        if let Some((s0, g0)) = last {
            if g0 != sg {
                match certify(&terms, f, s0, s, prec) {
                    Ok(z) => out.zeros.push(z),
                    Err(reason) => out.ambiguous.push(Ambiguity { function: f + 1, s_lo: s0, s_hi: s, reason }),
                }
            } else if noise {
                out.ambiguous.push(Ambiguity {
                    function: f + 1,
                    s_lo: s0,
                    s_hi: s,
                    reason: "values below the noise floor between equal signs".into(),
                });
            }
        }
        last = Some((s, sg));
        noise = false;
    }
    out
}

fn certify(terms: &[Term], f: usize, s0: f64, s1: f64, prec: u32) -> Result<ZeroBracket, String> {
    let mut a = Float::with_val(prec, s0);
    let mut b = Float::with_val(prec, s1);
    let mut ea = eval_mp(terms, &a);
    let mut eb = eval_mp(terms, &b);
    if !ea.certified() || !eb.certified() {
        return Err("endpoint below ten times the error bound".into());
    }
    if ea.sign() == eb.sign() {
        return Err("full precision disagrees with the screening signs".into());
    }
    // halve while the midpoint stays certified
    for _ in 0..prec {
        let m = Float::with_val(prec, &a + &b) / 2u32;
        if m == a || m == b {
            break;
        }
        let em = eval_mp(terms, &m);
        if !em.certified() {
            break;
        }
        if em.sign() == ea.sign() {
            a = m;
            ea = em;
        } else {
            b = m;
            eb = em;
        }
    }
    let sign = if f < 2 { -1 } else { 1 };
    let h_of = |s: &Float| LogValue { sign, ln_abs: Float::with_val(prec, -s) };
    let d = (prec as f64 / std::f64::consts::LOG2_10) as usize;
    Ok(ZeroBracket {
        function: f + 1,
        s_lo: fmt_float(&a, d),
        s_hi: fmt_float(&b, d),
        h_near: h_of(&a).to_decimal(d),
        h_far: h_of(&b).to_decimal(d),
        log10_abs_h: -a.to_f64() / std::f64::consts::LN_10,
        margin_near: ea.margin(),
        margin_far: eb.margin(),
    })
}

/// Builds the chain, counts, and retries once with a wider guard if anything is ambiguous.
pub fn run(spec: &ChainSpec, consts: &UniversalConstants) -> Result<(Chain, ZeroCountReport), CyclesError> {
    let chain = build_chain(spec, consts)?;
    let report = count_zeros(&chain, Window::for_chain(&chain), spec.digits)?;
    if report.ambiguous.is_empty() {
        return Ok((chain, report));
    }
    let mut wider = spec.clone();
    wider.guard = spec.guard * spec.guard;
    let chain = build_chain(&wider, consts)?;
    let report = count_zeros(&chain, Window::for_chain(&chain), spec.digits)?;
    Ok((chain, report))
}
