//! End-to-end evaluation of `y(ζ)` to absolute error `2^-p`.
//!
//! The error is split into a tail part `2^-(p+2)` (certified truncation
//! order), a matrix part `2^-(p+2)` (truncated mode only; the tolerance on
//! `P̃` is divided by `‖v‖₁`), and the final truncation of each component at
//! `2^-(p+2)`, whose complex modulus stays below `2^-(p+1)`.

use std::time::Instant;

use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::arith::{ceil_log2_rational, DyadicComplex, GaussianRational};
use crate::bounds::{opt_norm_transform, truncation_order, NormTransform, TailCertificate};
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::ode::{radius_lower_bound, EvalPoint, InitialVector, Problem, Recurrence, ThetaOde};
use crate::product_tree::{bin_split, SplitOptions, DEFAULT_THRESHOLD};
use crate::trunc::{trunc_bin_split, StepNorm, TraceRecord, TruncOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Classic,
    Trunc,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Mode::Classic),
            "trunc" => Ok(Mode::Trunc),
            _ => Err(Error::Parse { what: "mode", input: s.to_string() }),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Classic => "classic",
            Mode::Trunc => "trunc",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    Certified,
    Heuristic,
}

impl std::str::FromStr for BoundMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "certified" => Ok(BoundMode::Certified),
            "heuristic" => Ok(BoundMode::Heuristic),
            _ => Err(Error::Parse { what: "bound mode", input: s.to_string() }),
        }
    }
}

/// How `|ζ| < ρ` was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiskCheck {
    /// `|ζ|` is below the root-based radius bound.
    RootBound,
    /// The tail certificate proves geometric decay of the terms at `ζ`.
    Certificate,
    /// Taken on the caller's word.
    Assumed,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub threshold: u64,
    pub delta: Option<u64>,
    pub bound_mode: BoundMode,
    pub assume_in_disk: bool,
    /// Measure chunk norms in an adapted basis instead of `N₁`.
    pub opt_norm: bool,
    pub parallel_depth: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            delta: None,
            bound_mode: BoundMode::Certified,
            assume_in_disk: false,
            opt_norm: false,
            parallel_depth: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalRequest {
    pub ode: ThetaOde,
    pub inits: Vec<GaussianRational>,
    pub point: EvalPoint,
    pub prec: u64,
    pub mode: Mode,
    pub options: EvalOptions,
}

impl EvalRequest {
    pub fn new(problem: &Problem, prec: u64, mode: Mode) -> Self {
        Self {
            ode: problem.ode.clone(),
            inits: problem.inits.clone(),
            point: EvalPoint::new(&problem.point),
            prec,
            mode,
            options: EvalOptions::default(),
        }
    }

    pub fn with_options(mut self, options: EvalOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Clone, Debug)]
pub struct EvalResult {
    pub value: DyadicComplex,
    pub prec: u64,
    pub mode: Mode,
    /// `|value − y(ζ)| ≤ 2^-error_exp` when certified.
    pub error_exp: u64,
    pub n: u64,
    pub delta: Option<u64>,
    pub m: Option<BigRational>,
    pub lg_m: Option<f64>,
    pub ledger_peak: u64,
    pub wall_ns: u128,
    pub certified: bool,
    pub disk_check: DiskCheck,
    pub certificate: Option<TailCertificate>,
    pub trace: Vec<TraceRecord>,
    pub max_entry_bits: Option<u64>,
    pub cap_bits: Option<u64>,
    pub transformed_norm: bool,
}

impl EvalResult {
    /// Digits after the point that the bound justifies, minus one.
    pub fn decimal_digits(&self) -> usize {
        ((self.prec as f64 * std::f64::consts::LOG10_2).floor() as usize).saturating_sub(1)
    }

    /// Truncated decimal rendering, `a` or `a + b*i`.
    pub fn to_decimal(&self) -> String {
        let d = self.decimal_digits();
        if self.value.im.is_zero() {
            self.value.re.to_decimal(d)
        } else {
            let im = self.value.im.to_decimal(d);
            match im.strip_prefix('-') {
                Some(abs) => format!("{} - {}*i", self.value.re.to_decimal(d), abs),
                None => format!("{} + {}*i", self.value.re.to_decimal(d), im),
            }
        }
    }
}

struct Prepared {
    rec: Recurrence,
    v: InitialVector,
    root_ok: bool,
}

fn prepare(req: &EvalRequest) -> Result<Prepared> {
    if req.prec == 0 {
        return Err(Error::InvalidRequest("precision must be at least 1 bit".into()));
    }
    let v = InitialVector::new(&req.ode, &req.inits)?;
    let root_ok = match radius_lower_bound(&req.ode) {
        None => true,
        Some(l) => req.point.modulus_upper() < l,
    };
    Ok(Prepared { rec: req.ode.recurrence(), v, root_ok })
}

fn outside(req: &EvalRequest) -> Error {
    Error::OutsideDisk {
        point: req.point.zeta.to_string(),
        bound: radius_lower_bound(&req.ode).map_or("inf".into(), |b| b.to_string()),
    }
}

/// `2^-(p+2)/‖v‖₁` as an exponent.
fn matrix_exponent(p: u64, v: &InitialVector) -> u64 {
    let norm = v.norm1_upper().max(BigRational::one());
    p + 2 + ceil_log2_rational(&norm).max(0) as u64
}

struct SumOutput {
    sum: GaussianRational,
    delta: Option<u64>,
    m: Option<BigRational>,
    lg_m: Option<f64>,
    trace: Vec<TraceRecord>,
    max_entry_bits: Option<u64>,
    cap_bits: Option<u64>,
    transformed_norm: bool,
}

fn last_row_dot<T>(row: &[T], v: &[GaussianRational], conv: impl Fn(&T) -> GaussianRational) -> GaussianRational {
    row.iter()
        .zip(v)
        .filter(|(_, x)| !x.is_zero())
        .fold(GaussianRational::zero(), |s, (a, x)| &s + &(&conv(a) * x))
}

/// `S_N` exactly (classic) or within `2^-(p+2)` (truncated).
fn partial_sum(req: &EvalRequest, prep: &Prepared, n: u64, ledger: &Ledger) -> Result<SumOutput> {
    let split = SplitOptions {
        threshold: req.options.threshold,
        parallel_depth: req.options.parallel_depth,
        ledger: ledger.clone(),
    };
    let w = prep.rec.width();
    match req.mode {
        Mode::Classic => {
            let prod = bin_split(&prep.rec, &req.point, 0, n, &split)?;
            let num = last_row_dot(prod.mat.row(w), &prep.v.v, |x| GaussianRational::from(x.clone()));
            let corner = GaussianRational::from(prod.corner().clone());
            let sum = num
                .checked_div(&corner)
                .ok_or_else(|| Error::Invariant("zero corner in the full product".into()))?;
            Ok(SumOutput {
                sum,
                delta: None,
                m: None,
                lg_m: None,
                trace: Vec::new(),
                max_entry_bits: None,
                cap_bits: None,
                transformed_norm: false,
            })
        }
        Mode::Trunc => {
            let transform: Option<NormTransform> = if req.options.opt_norm {
                opt_norm_transform(&prep.rec, &req.point).ok()
            } else {
                None
            };
            let opts = TruncOptions {
                delta: req.options.delta,
                split,
                norm: transform.as_ref().map(|t| t as &dyn StepNorm),
                ..TruncOptions::default()
            };
            let out = trunc_bin_split(&prep.rec, &req.point, n, matrix_exponent(req.prec, &prep.v), &opts)?;
            let sum = last_row_dot(out.mat.row(w), &prep.v.v, DyadicComplex::to_gaussian_rational);
            Ok(SumOutput {
                sum,
                delta: Some(out.delta),
                m: Some(out.m),
                lg_m: Some(out.lg_m),
                trace: out.trace,
                max_entry_bits: Some(out.max_entry_bits),
                cap_bits: Some(out.cap_bits),
                transformed_norm: transform.is_some(),
            })
        }
    }
}

fn round_value(sum: &GaussianRational, p: u64) -> Result<DyadicComplex> {
    DyadicComplex::trunc_gaussian_at(sum, p + 2)
}

/// Largest `N` the heuristic search will try.
const HEURISTIC_MAX_N: u64 = 1 << 24;

/// `|a − b| ≤ 2^-e`, exactly.
pub fn within(a: &DyadicComplex, b: &DyadicComplex, e: i64) -> bool {
    let d = a.sub(b).to_gaussian_rational();
    let lhs = d.modulus_sqr();
    let rhs = crate::arith::pow2(-2 * e);
    lhs <= rhs
}

fn heuristic_order(req: &EvalRequest, prep: &Prepared) -> Result<u64> {
    let probe = EvalRequest { prec: req.prec + 2, ..req.clone() };
    let ledger = Ledger::disabled();
    let mut n = 8u64;
    let mut prev = round_value(&partial_sum(&probe, prep, n, &ledger)?.sum, probe.prec)?;
    loop {
        if n > HEURISTIC_MAX_N {
            return Err(Error::CertificationFailed(format!(
                "heuristic search did not stabilize below N = {HEURISTIC_MAX_N}"
            )));
        }
        let next = round_value(&partial_sum(&probe, prep, 2 * n, &ledger)?.sum, probe.prec)?;
        if within(&prev, &next, req.prec as i64 + 2) {
            return Ok(2 * n);
        }
        prev = next;
        n *= 2;
    }
}

/// Evaluate `y(ζ)` to within `2^-p`.
pub fn evaluate(req: &EvalRequest) -> Result<EvalResult> {
    let start = Instant::now();
    let prep = prepare(req)?;
    let tail_exp = req.prec + 2;

    let certificate = match req.options.bound_mode {
        BoundMode::Certified => truncation_order(&prep.rec, &req.point, &prep.v, tail_exp).ok(),
        BoundMode::Heuristic => None,
    };
    let disk_check = if prep.root_ok {
        DiskCheck::RootBound
    } else if certificate.as_ref().is_some_and(|c| c.n > 0 || prep.v.is_zero()) {
        DiskCheck::Certificate
    } else if req.options.assume_in_disk {
        DiskCheck::Assumed
    } else {
        return Err(outside(req));
    };
    let (n, certified) = match &certificate {
        Some(c) => (c.n, true),
        None => (heuristic_order(req, &prep)?, false),
    };

    let ledger = Ledger::enabled();
    let out = partial_sum(req, &prep, n, &ledger)?;
    let value = round_value(&out.sum, req.prec)?;
    Ok(EvalResult {
        value,
        prec: req.prec,
        mode: req.mode,
        error_exp: req.prec,
        n,
        delta: out.delta,
        m: out.m,
        lg_m: out.lg_m,
        ledger_peak: ledger.peak(),
        wall_ns: start.elapsed().as_nanos(),
        certified,
        disk_check,
        certificate,
        trace: out.trace,
        max_entry_bits: out.max_entry_bits,
        cap_bits: out.cap_bits,
        transformed_norm: out.transformed_norm,
    })
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub classic: EvalResult,
    pub trunc: EvalResult,
}

/// Run both modes and require agreement to `2^(-p+1)`.
pub fn evaluate_both_and_compare(req: &EvalRequest) -> Result<Comparison> {
    let classic = evaluate(&EvalRequest { mode: Mode::Classic, ..req.clone() })?;
    let trunc = evaluate(&EvalRequest { mode: Mode::Trunc, ..req.clone() })?;
    let e = req.prec as i64 - 1;
    if !within(&classic.value, &trunc.value, e) {
        let diff = classic.value.sub(&trunc.value);
        return Err(Error::CorrectnessRegression { prec: req.prec, diff: diff.to_string() });
    }
    Ok(Comparison { classic, trunc })
}

/// Exact `S_n` for the request's series, by direct recurrence stepping.
pub fn exact_partial_sum(ode: &ThetaOde, inits: &[GaussianRational], point: &EvalPoint, n: u64) -> Result<GaussianRational> {
    let rec = ode.recurrence();
    let v = InitialVector::new(ode, inits)?;
    let p = bin_split(&rec, point, 0, n, &SplitOptions::default())?.reduce()?;
    Ok(p.mul_vec(&v.v)[rec.width()].normalize())
}

/// Bit-identical comparison that ignores timing.
pub fn same_output(a: &EvalResult, b: &EvalResult) -> bool {
    a.value == b.value && a.n == b.n && a.delta == b.delta && a.m == b.m && a.ledger_peak == b.ledger_peak
}

#[cfg(test)]
mod tests {
    use num_bigint::BigInt;
    use num_traits::Zero;
    use super::*;
    use crate::catalog;

    fn req(name: &str, p: u64, mode: Mode) -> EvalRequest {
        EvalRequest::new(&catalog::get(name).unwrap().problem(), p, mode)
    }

    fn close_to(r: &EvalResult, x: &GaussianRational, e: u64) -> bool {
        let d = &r.value.to_gaussian_rational() - x;
        d.modulus_sqr() <= crate::arith::pow2(-2 * e as i64)
    }

    #[test]
    fn geometric_is_two() {
        for mode in [Mode::Classic, Mode::Trunc] {
            let r = evaluate(&req("geometric", 64, mode)).unwrap();
            assert!(r.certified);
            assert!(close_to(&r, &GaussianRational::from_int(2), 64));
        }
    }

    #[test]
    fn ln2_against_series_oracle() {
        // ln 2 = Σ_{n≥0} 1/((n+1) 2^(n+1)); 200 terms leave a tail below 2^-200.
        let mut s = BigRational::zero();
        for n in 0..200u32 {
            s += BigRational::new(BigInt::one(), BigInt::from(n + 1) << (n + 1) as usize);
        }
        let oracle = GaussianRational::from_rational(&s);
        for mode in [Mode::Classic, Mode::Trunc] {
            let r = evaluate(&req("ln2", 128, mode)).unwrap();
            assert!(close_to(&r, &oracle, 128), "{mode}");
            assert_eq!(r.disk_check, DiskCheck::Certificate);
        }
    }

    #[test]
    fn arctan_against_series_oracle() {
        let mut s = BigRational::zero();
        for k in 0..100u32 {
            let t = BigRational::new(BigInt::one(), BigInt::from(2 * k + 1) << (2 * k + 1) as usize);
            if k % 2 == 0 {
                s += t;
            } else {
                s -= t;
            }
        }
        let oracle = GaussianRational::from_rational(&s);
        for mode in [Mode::Classic, Mode::Trunc] {
            let r = evaluate(&req("arctan", 64, mode)).unwrap();
            assert!(close_to(&r, &oracle, 64), "{mode}");
        }
    }

    #[test]
    fn modes_agree_and_small_precision_clamps() {
        let c = evaluate_both_and_compare(&req("exp", 1024, Mode::Classic)).unwrap();
        assert!(c.trunc.delta.unwrap() >= 1);
        let c = evaluate_both_and_compare(&req("ln2", 8, Mode::Classic)).unwrap();
        assert!(c.trunc.delta.unwrap() <= c.trunc.n.max(1));
    }

    #[test]
    fn deterministic() {
        let a = evaluate(&req("arctan", 300, Mode::Trunc)).unwrap();
        let b = evaluate(&req("arctan", 300, Mode::Trunc)).unwrap();
        assert!(same_output(&a, &b));
    }

    #[test]
    fn heuristic_mode_is_flagged() {
        let mut r = req("exp", 100, Mode::Trunc);
        r.options.bound_mode = BoundMode::Heuristic;
        let out = evaluate(&r).unwrap();
        assert!(!out.certified);
        let certified = evaluate(&req("exp", 100, Mode::Trunc)).unwrap();
        assert!(within(&out.value, &certified.value, 99));
    }

    #[test]
    fn opt_norm_shrinks_guard_bits() {
        let plain = evaluate(&req("ln2", 2000, Mode::Trunc)).unwrap();
        let mut r = req("ln2", 2000, Mode::Trunc);
        r.options.opt_norm = true;
        let tuned = evaluate(&r).unwrap();
        assert!(tuned.transformed_norm);
        assert!(within(&plain.value, &tuned.value, 1999));
        assert!(tuned.max_entry_bits.unwrap() < plain.max_entry_bits.unwrap());
    }

    #[test]
    fn outside_disk_needs_override() {
        let mut problem = catalog::get("geometric").unwrap().problem();
        problem.point = "3/2".parse().unwrap();
        let r = EvalRequest::new(&problem, 32, Mode::Classic);
        assert!(matches!(evaluate(&r), Err(Error::OutsideDisk { .. })));
    }

    #[test]
    fn decimal_rendering() {
        let r = evaluate(&req("geometric", 32, Mode::Classic)).unwrap();
        assert_eq!(r.decimal_digits(), 8);
        // Truncation may land just below 2.
        let s = r.to_decimal();
        assert!(s == "2.00000000" || s == "1.99999999", "{s}");
    }

    #[test]
    fn exact_sum_matches_classic() {
        let e = catalog::get("exp").unwrap();
        let s = exact_partial_sum(&e.ode, &e.inits, &EvalPoint::new(&e.point), 3).unwrap();
        assert_eq!(s, "5/2".parse().unwrap());
    }
}
