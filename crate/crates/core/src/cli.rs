//! Batch front-end: JSON/CSV in, JSON/CSV out.
//!
//! Exit status 0 on success, 2 for schema errors, 3 for numeric failures. Diagnostics go to
//! stderr as one JSON object.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rug::Float;
use serde_json::{json, Value};
use thiserror::Error;

use crate::constants::{compute_constants, fmt_float, ConstantsError};
use crate::cycles::{run as run_cycles, ChainSpec, CyclesError, SubBranch};
use crate::exact::{bits_for_digits, fmt_rational, ExactError};
use crate::expansion::{fit_expansion_with, geometric_grid, sample_melnikov, BasisSample, ExpansionError, DEFAULT_REMAINDER_TERMS};
use crate::hamiltonian::{mu_chain, HamiltonianError, HamiltonianModel};
use crate::lienard::{
    case_spec, jacobian_rank, lienard_coefficients, solve_case, CaseSolution, LienardError, LienardParams, FORM_NAMES,
};
use crate::ovals::{trace_oval, OvalError, PerturbationPoly, Side};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Schema(_) => "schema",
            CliError::Numeric(_) => "numeric",
        };
        json!({"error": {"kind": kind, "message": self.to_string(), "exit_code": self.exit_code()}})
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        CliError::Schema(e.to_string())
    }
}

impl From<HamiltonianError> for CliError {
    fn from(e: HamiltonianError) -> Self {
        match e {
            HamiltonianError::NotInvertible(_) | HamiltonianError::Bank(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Schema(e.to_string()),
        }
    }
}

impl From<ConstantsError> for CliError {
    fn from(e: ConstantsError) -> Self {
        match e {
            ConstantsError::TooFewDigits(_) => CliError::Schema(e.to_string()),
            ConstantsError::PrecisionNotMet { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<LienardError> for CliError {
    fn from(e: LienardError) -> Self {
        match e {
            LienardError::Inconsistent(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Schema(e.to_string()),
        }
    }
}

impl From<OvalError> for CliError {
    fn from(e: OvalError) -> Self {
        match e {
            OvalError::Schema(_) | OvalError::LevelOutOfRange { .. } | OvalError::Exact(_) => {
                CliError::Schema(e.to_string())
            }
            OvalError::Hamiltonian(h) => h.into(),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ExpansionError> for CliError {
    fn from(e: ExpansionError) -> Self {
        match e {
            ExpansionError::Oval(o) => o.into(),
            ExpansionError::MissingChain(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Schema(e.to_string()),
        }
    }
}

impl From<CyclesError> for CliError {
    fn from(e: CyclesError) -> Self {
        match e {
            CyclesError::Chain(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Schema(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cuspidal", version, about = "Melnikov expansions near a cuspidal double homoclinic loop")]
pub struct Cli {
    /// Write the artifact here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// The six universal constants and D1, D2.
    Constants {
        #[arg(long, default_value_t = 30)]
        digits: u32,
    },
    /// Type of the origin from the leading h_j.
    Classify(ModelArg),
    /// Coefficients h_j of H(x, φ(x)).
    HSeries {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 14)]
        order: usize,
    },
    /// μ_k, μ̄_k, n̄_k over Q(√2, β).
    Chain(ModelArg),
    /// Nodes of one level oval as CSV.
    Trace {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true)]
        h: String,
        #[arg(long, default_value = "inner-right")]
        side: String,
        #[arg(long, default_value_t = 256)]
        nodes: usize,
    },
    /// M(h) on a grid of levels as CSV.
    MelnikovSample {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        pert: PerturbationArg,
        /// `geometric:lo,hi,n` in |h|.
        #[arg(long, default_value = "geometric:1e-9,1e-3,40")]
        h_grid: String,
        #[arg(long, default_value = "inner-right")]
        side: String,
        #[arg(long, default_value_t = 40)]
        digits: u32,
    },
    /// Least-squares fit of a sample CSV in the singular basis.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "inner-right")]
        side: String,
        #[arg(long, default_value_t = 40)]
        digits: u32,
        /// Remainder columns appended after the basis (0 gives the plain fit).
        #[arg(long, default_value_t = DEFAULT_REMAINDER_TERMS)]
        remainder: usize,
    },
    /// Liénard family: coefficient values, case solves and ranks.
    Lienard {
        #[command(subcommand)]
        command: LienardCommand,
    },
    /// Zero counting for the orderings.
    Cycles {
        #[command(subcommand)]
        command: CyclesCommand,
    },
    /// Solve, rank, sample, fit and count zeros for one Liénard case in a single report.
    #[command(name = "reproduce-theorem-3.1")]
    Reproduce {
        #[arg(long)]
        case: u32,
        #[arg(long, default_value_t = 30)]
        digits: u32,
        #[arg(long, default_value = "geometric:1e-9,1e-3,40")]
        h_grid: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum LienardCommand {
    Coeffs {
        /// `{"a": ["p/q", ...]}`
        #[arg(long)]
        a: PathBuf,
        #[arg(long, default_value_t = 30)]
        digits: u32,
    },
    Solve {
        #[arg(long)]
        case: u32,
    },
    Rank {
        #[arg(long)]
        case: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum CyclesCommand {
    Count(CountArgs),
}

#[derive(Args, Debug)]
pub struct CountArgs {
    #[arg(long, default_value_t = 9)]
    pub l: u32,
    #[arg(long, default_value_t = 1)]
    pub variant: u32,
    #[arg(long, default_value_t = 1e-4)]
    pub ratio: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub base: f64,
    #[arg(long, default_value_t = 60)]
    pub digits: u32,
    #[arg(long, default_value = "a")]
    pub sub_branch: String,
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    pub c8_sign: i32,
    /// Include the chain coefficients in the report.
    #[arg(long)]
    pub with_chain: bool,
}

#[derive(Args, Debug)]
pub struct ModelArg {
    /// `{"hij": [{"i", "j", "c"}], "degree_bound"}`; the Liénard Hamiltonian when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PerturbationArg {
    /// `{"p": [...], "q": [...]}`
    #[arg(long, conflicts_with = "a")]
    pub pq: Option<PathBuf>,
    /// Liénard a-vector `{"a": [...]}`.
    #[arg(long)]
    pub a: Option<PathBuf>,
}

/// Rendered artifact.
pub enum Output {
    Json(Value),
    Csv(String),
}

impl Output {
    pub fn render(&self) -> String {
        match self {
            Output::Json(v) => {
                let mut s = serde_json::to_string_pretty(v).expect("serializable");
                s.push('\n');
                s
            }
            Output::Csv(s) => s.clone(),
        }
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn load_model(m: &ModelArg) -> Result<HamiltonianModel, CliError> {
    match &m.model {
        Some(p) => Ok(HamiltonianModel::from_json(&read(p)?)?),
        None => Ok(HamiltonianModel::lienard()),
    }
}

fn load_params(path: &PathBuf) -> Result<LienardParams, CliError> {
    Ok(LienardParams::from_json(&read(path)?)?)
}

fn load_pert(p: &PerturbationArg) -> Result<PerturbationPoly, CliError> {
    match (&p.pq, &p.a) {
        (Some(path), _) => Ok(PerturbationPoly::from_json(&read(path)?)?),
        (None, Some(path)) => Ok(PerturbationPoly::lienard(&load_params(path)?)),
        (None, None) => Err(CliError::Schema("one of --pq or --a is required".into())),
    }
}

fn parse_side(s: &str) -> Result<Side, CliError> {
    Ok(s.parse::<Side>()?)
}

/// `geometric:lo,hi,n`.
pub fn parse_grid(s: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = || CliError::Schema(format!("grid must look like geometric:lo,hi,n, got {s:?}"));
    let rest = s.strip_prefix("geometric:").ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

fn prec_for(digits: u32) -> u32 {
    bits_for_digits(digits)
}

pub fn constants_report(digits: u32) -> Result<Value, CliError> {
    let k = compute_constants(digits)?;
    Ok(json!({"digits": digits, "constants": k.entries()}))
}

pub fn classify(model: &HamiltonianModel) -> Result<Value, CliError> {
    let c = model.classify()?;
    Ok(json!({"kind": c.kind, "k": c.k, "hk": fmt_rational(&c.hk)}))
}

pub fn h_series_report(model: &HamiltonianModel, order: usize) -> Result<Value, CliError> {
    let hs = model.h_series(order)?;
    Ok(json!({"order": hs.order(), "hj": hs.hj.iter().map(fmt_rational).collect::<Vec<_>>()}))
}

fn chain_report(model: &HamiltonianModel) -> Result<Value, CliError> {
    let hs = model.h_series(14)?;
    let h6 = hs.h(6)?;
    let c = mu_chain(&hs, &h6)?;
    Ok(serde_json::to_value(&c).expect("serializable"))
}

fn trace_csv(model: &HamiltonianModel, h: &str, side: Side, nodes: usize) -> Result<String, CliError> {
    if nodes < 4 {
        return Err(CliError::Schema(format!("need at least 4 nodes, got {nodes}")));
    }
    let prec = 128;
    let h = Float::parse(h.trim()).map(|p| Float::with_val(prec, p)).map_err(|_| CliError::Schema(format!("bad level {h:?}")))?;
    let o = trace_oval(model, &h, side, nodes)?;
    let mut s = String::from("x,y,weight,wx,wy\n");
    for n in &o.nodes {
        let w = n.wx.hypot(n.wy);
        s.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n", n.x, n.y, w, n.wx, n.wy));
    }
    Ok(s)
}

fn sample(
    model: &HamiltonianModel,
    pq: &PerturbationPoly,
    grid: &str,
    side: Side,
    digits: u32,
) -> Result<BasisSample, CliError> {
    let (lo, hi, n) = parse_grid(grid)?;
    let levels = geometric_grid(lo, hi, n, side, prec_for(digits))?;
    Ok(sample_melnikov(model, pq, side, &levels)?)
}

pub fn coeffs_report(a: &LienardParams, digits: u32) -> Result<Value, CliError> {
    let prec = prec_for(digits);
    let forms = lienard_coefficients();
    let needs_constants = FORM_NAMES.iter().any(|n| {
        let f = forms.get(n);
        f.tag.is_some() && !f.bracket(a).is_zero()
    });
    let k = if needs_constants { Some(compute_constants(digits.max(10))?) } else { None };
    let mut out = serde_json::Map::new();
    for name in FORM_NAMES {
        let f = forms.get(name);
        let br = f.bracket(a);
        let value = if br.is_zero() { Float::new(prec) } else { f.eval_float(a, k.as_ref(), prec) };
        out.insert(
            name.to_string(),
            json!({
                "bracket": br.to_string(),
                "factor": match f.tag { Some(t) => format!("sqrt2*{t:?}"), None => "sqrt2".into() },
                "value": fmt_float(&value, digits as usize),
            }),
        );
    }
    Ok(json!({
        "a": a.a.iter().map(fmt_rational).collect::<Vec<_>>(),
        "coefficients": out,
        "digits": digits,
    }))
}

fn count_spec(c: &CountArgs) -> Result<ChainSpec, CliError> {
    let mut spec = ChainSpec::new(c.l, c.variant);
    spec.ratio = c.ratio;
    spec.base = c.base;
    spec.digits = c.digits;
    spec.sub_branch = c.sub_branch.parse::<SubBranch>().map_err(CliError::Schema)?;
    if c.c8_sign != 1 && c.c8_sign != -1 {
        return Err(CliError::Schema(format!("c8 sign must be 1 or -1, got {}", c.c8_sign)));
    }
    spec.c8_sign = c.c8_sign;
    spec.validate()?;
    Ok(spec)
}

fn cycles_report(c: &CountArgs) -> Result<Value, CliError> {
    count_report(&count_spec(c)?, c.with_chain)
}

pub fn count_report(spec: &ChainSpec, with_chain: bool) -> Result<Value, CliError> {
    spec.validate()?;
    let k = compute_constants(20)?;
    let (chain, report) = run_cycles(spec, &k)?;
    let mut v = serde_json::to_value(&report).expect("serializable");
    if with_chain {
        v["chain"] = serde_json::to_value(chain.to_json(12)).expect("serializable");
    }
    Ok(v)
}

/// Coefficient order `c_l` certified nonzero in each case.
fn case_order(case: u32) -> u32 {
    match case {
        1 => 9,
        2 => 8,
        _ => 7,
    }
}

/// Point of the solution set with every free variable equal to one.
fn solution_point(sol: &CaseSolution) -> LienardParams {
    let mut a = LienardParams::default();
    for b in &sol.basis {
        for (i, x) in b.iter().enumerate() {
            a.a[i] += x;
        }
    }
    a
}

/// Full pipeline for one case of the Liénard family.
pub fn reproduce(case: u32, digits: u32, grid: &str) -> Result<Value, CliError> {
    let spec = case_spec(case)?;
    let sol = solve_case(case)?;
    let rank = jacobian_rank(case)?;
    let k = compute_constants(digits.max(20))?;
    let prec = prec_for(digits);

    // headline ratio: the highest dependent variable against the highest free one
    let top_free = *sol.free.last().ok_or_else(|| CliError::Numeric("solution set is a point".into()))?;
    let headline = sol
        .relations
        .iter()
        .filter(|r| r.terms.iter().any(|t| t.0 == top_free))
        .map(|r| r.var)
        .filter(|&v| v != top_free)
        .min()
        .unwrap_or(top_free);
    let ratios: serde_json::Map<String, Value> = sol
        .relations
        .iter()
        .filter(|r| !r.terms.is_empty())
        .flat_map(|r| {
            r.terms.iter().map(move |(f, c)| (format!("a{}/a{}", r.var, f), json!(fmt_rational(c))))
        })
        .collect();

    let a = solution_point(&sol);
    let forms = lienard_coefficients();
    let mut vanishing = serde_json::Map::new();
    for nm in &spec.vanish {
        vanishing.insert(nm.to_string(), json!(forms.get(nm).bracket(&a).is_zero()));
    }
    let cert = forms.get(spec.certificate);
    let cert_value = cert.eval_float(&a, Some(&k), prec);

    // sampling and fitting on the inner-right family at the solution point
    let t0 = Instant::now();
    let model = HamiltonianModel::lienard();
    let pq = PerturbationPoly::lienard(&a);
    let s = sample(&model, &pq, grid, Side::InnerRight, digits)?;
    let fit = fit_expansion_with(&s, DEFAULT_REMAINDER_TERMS)?;
    let scale = s.m.iter().map(|m| m.to_f64().abs()).fold(0.0, f64::max);
    let fitted = fit.unsigned();
    let leading: Vec<Value> = ["c0", "c1", "c2", "c3"]
        .iter()
        .enumerate()
        .map(|(i, nm)| {
            json!({
                "name": nm,
                "closed_form": fmt_float(&forms.get(nm).eval_float(&a, Some(&k), prec), digits as usize),
                "fitted": fmt_float(&fitted[i], 6),
            })
        })
        .collect();
    let sampling_seconds = t0.elapsed().as_secs_f64();

    let l = case_order(case);
    let mut counts = Vec::new();
    let mut totals = Vec::new();
    for variant in 1..=3 {
        let spec = ChainSpec::new(l, variant);
        let (_, r) = run_cycles(&spec, &k)?;
        totals.push(r.total);
        counts.push(json!({
            "variant": variant,
            "counts": r.counts,
            "total": r.total,
            "expected_total": r.expected_total,
            "matches": r.matches,
            "ambiguous": r.ambiguous.len(),
        }));
    }
    let total = *totals.iter().min().expect("three variants");

    Ok(json!({
        "case": case,
        "digits": digits,
        "solve": sol.to_json(),
        "headline_ratio": {
            "name": format!("a{headline}/a{top_free}"),
            "value": fmt_rational(&sol.ratio(headline, top_free)),
        },
        "ratios": ratios,
        "rank": rank,
        "n_vars": spec.n_vars,
        "vanishing": vanishing,
        "certificate": {
            "coefficient": spec.certificate,
            "point": a.a[..spec.n_vars].iter().map(fmt_rational).collect::<Vec<_>>(),
            "value": fmt_float(&cert_value, digits as usize),
            "nonzero": !cert_value.is_zero(),
        },
        "fit": {
            "side": Side::InnerRight,
            "grid": grid,
            "samples": s.h.len(),
            "max_abs_m": format!("{scale:.3e}"),
            "condition": format!("{:.3e}", fit.condition),
            "leading": leading,
            "seconds": format!("{sampling_seconds:.1}"),
        },
        "zero_counts": {
            "l": l,
            "variants": counts,
            "total": total,
        },
        "limit_cycles": total,
        "expected_limit_cycles": spec.limit_cycles,
    }))
}

fn finish_fit(text: &str, side: Side, digits: u32, remainder: usize) -> Result<Value, CliError> {
    let s = BasisSample::from_csv(text, side, prec_for(digits))?;
    Ok(fit_expansion_with(&s, remainder)?.to_json(digits as usize))
}

/// Runs one command and returns its artifact.
pub fn execute(cmd: &Command) -> Result<Output, CliError> {
    Ok(match cmd {
        Command::Constants { digits } => Output::Json(constants_report(*digits)?),
        Command::Classify(m) => Output::Json(classify(&load_model(m)?)?),
        Command::HSeries { model, order } => Output::Json(h_series_report(&load_model(model)?, *order)?),
        Command::Chain(m) => Output::Json(chain_report(&load_model(m)?)?),
        Command::Trace { model, h, side, nodes } => {
            Output::Csv(trace_csv(&load_model(model)?, h, parse_side(side)?, *nodes)?)
        }
        Command::MelnikovSample { model, pert, h_grid, side, digits } => {
            let s = sample(&load_model(model)?, &load_pert(pert)?, h_grid, parse_side(side)?, *digits)?;
            Output::Csv(s.to_csv(*digits as usize))
        }
        Command::Fit { input, side, digits, remainder } => {
            Output::Json(finish_fit(&read(input)?, parse_side(side)?, *digits, *remainder)?)
        }
        Command::Lienard { command } => Output::Json(match command {
            LienardCommand::Coeffs { a, digits } => coeffs_report(&load_params(a)?, *digits)?,
            LienardCommand::Solve { case } => solve_case(*case)?.to_json(),
            LienardCommand::Rank { case } => {
                let spec = case_spec(*case)?;
                json!({"case": case, "rank": jacobian_rank(*case)?, "equations": spec.vanish, "n_vars": spec.n_vars})
            }
        }),
        Command::Cycles { command: CyclesCommand::Count(c) } => Output::Json(cycles_report(c)?),
        Command::Reproduce { case, digits, h_grid } => Output::Json(reproduce(*case, *digits, h_grid)?),
    })
}

/// Parses `args`, runs, writes the artifact; returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = execute(&cli.command).and_then(|out| {
        let text = out.render();
        match &cli.output {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::Schema(format!("{}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
