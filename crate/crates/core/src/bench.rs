//! Precision sweeps over catalog problems, recording time and ledger peaks.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{Dyadic, DyadicComplex};
use crate::catalog;
use crate::error::{Error, Result};
use crate::eval::{evaluate, within, EvalOptions, EvalRequest, EvalResult, Mode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub problem: String,
    pub mode: BenchMode,
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u64,
    /// Chunk count; absent for classic runs.
    pub delta: Option<u64>,
    #[serde(rename = "lgM")]
    pub lg_m: Option<f64>,
    pub wall_ns: u64,
    pub peak_bits: u64,
    pub digest: String,
}

/// Serializable copy of [`Mode`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Classic,
    Trunc,
}

impl From<Mode> for BenchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Classic => BenchMode::Classic,
            Mode::Trunc => BenchMode::Trunc,
        }
    }
}

impl From<BenchMode> for Mode {
    fn from(m: BenchMode) -> Self {
        match m {
            BenchMode::Classic => Mode::Classic,
            BenchMode::Trunc => Mode::Trunc,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenchOptions {
    pub eval: EvalOptions,
    /// Test hook: shift the truncated result by `2^(-p+2)` before the
    /// cross-mode check, which must then abort the series.
    pub inject_mismatch: bool,
}

/// Hex SHA-256 of the value's exact dyadic rendering.
pub fn digest(value: &DyadicComplex) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

fn record(problem: &str, r: &EvalResult, value: &DyadicComplex) -> BenchRecord {
    BenchRecord {
        problem: problem.to_string(),
        mode: r.mode.into(),
        p: r.prec,
        n: r.n,
        delta: r.delta,
        lg_m: r.lg_m,
        wall_ns: u64::try_from(r.wall_ns).unwrap_or(u64::MAX),
        peak_bits: r.ledger_peak,
        digest: digest(value),
    }
}

/// Evaluate `problem` at each precision in both modes, check that the two
/// values agree to `2^(-p+1)`, then hand the records for `modes` to `emit`.
/// Runs are sequential.
pub fn run_series_streaming(
    problem: &str,
    modes: &[Mode],
    p_list: &[u64],
    opts: &BenchOptions,
    emit: &mut dyn FnMut(&BenchRecord) -> Result<()>,
) -> Result<()> {
    let entry = catalog::get(problem)?;
    let prob = entry.problem();
    for &p in p_list {
        let run = |mode| {
            let start = Instant::now();
            let mut r = evaluate(&EvalRequest::new(&prob, p, mode).with_options(opts.eval.clone()))?;
            r.wall_ns = start.elapsed().as_nanos();
            Ok::<_, Error>(r)
        };
        let classic = run(Mode::Classic)?;
        let trunc = run(Mode::Trunc)?;
        let mut trunc_value = trunc.value.clone();
        if opts.inject_mismatch {
            let shift = Dyadic::new(1.into(), p.saturating_sub(2))?;
            trunc_value = DyadicComplex::new(trunc_value.re.add(&shift), trunc_value.im.clone());
        }
        if !within(&classic.value, &trunc_value, p as i64 - 1) {
            return Err(Error::CorrectnessRegression {
                prec: p,
                diff: classic.value.sub(&trunc_value).to_string(),
            });
        }
        for &mode in modes {
            match mode {
                Mode::Classic => emit(&record(problem, &classic, &classic.value))?,
                Mode::Trunc => emit(&record(problem, &trunc, &trunc_value))?,
            }
        }
    }
    Ok(())
}

pub fn run_series(problem: &str, modes: &[Mode], p_list: &[u64], opts: &BenchOptions) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    run_series_streaming(problem, modes, p_list, opts, &mut |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    /// Slope of `lg(peak)` against `lg(p)`.
    pub exponent: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares fit of `lg(peak_bits)` against `lg(p)` for each mode.
pub fn fit_scaling(records: &[BenchRecord]) -> Result<BTreeMap<BenchMode, Fit>> {
    let mut by_mode: BTreeMap<BenchMode, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        if r.p == 0 || r.peak_bits == 0 {
            return Err(Error::InsufficientData(format!("record with p = {} and peak = {}", r.p, r.peak_bits)));
        }
        by_mode.entry(r.mode).or_default().push(((r.p as f64).log2(), (r.peak_bits as f64).log2()));
    }
    if by_mode.is_empty() {
        return Err(Error::InsufficientData("no records".into()));
    }
    by_mode
        .into_iter()
        .map(|(mode, pts)| {
            if pts.len() < 4 {
                return Err(Error::InsufficientData(format!("{} records for {mode:?}, need 4", pts.len())));
            }
            Ok((mode, least_squares(&pts)?))
        })
        .collect()
}

fn least_squares(pts: &[(f64, f64)]) -> Result<Fit> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all records share one precision".into()));
    }
    let exponent = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Fit { exponent, r2, points: pts.len() })
}

pub fn write_csv<W: Write>(w: W, records: &[BenchRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<BenchRecord>> {
    csv::Reader::from_reader(r).deserialize().map(|x| x.map_err(Error::from)).collect()
}
