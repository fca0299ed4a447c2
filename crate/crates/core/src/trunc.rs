//! Truncated binary splitting: the product `P(0, N)` is assembled from `Δ`
//! exact chunk products, each divided by its corner and truncated, then
//! folded into an accumulator that is itself truncated after every step.
//!
//! All bounds are taken in the norm `N₁(A) = max_j Σ_i (|Re a_ij| + |Im a_ij|)`,
//! which is submultiplicative and dominates the induced 1-norm. With
//! `β_k = 2k`, truncating every component at `ε/(2k)` moves a `k × k`
//! matrix by at most `ε` in this norm.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::arith::{
    ceil_log2, ceil_log2_ratio, pow2, round_up, tolerance_exponent, Dyadic, DyadicComplex,
    GaussianInt, GaussianRational,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ode::{EvalPoint, Recurrence};
use crate::product_tree::{bin_split, ExactProduct, SplitOptions};

/// Significant bits carried by the low-precision norm bounds.
pub const BOUND_BITS: u64 = 64;
/// Allowance on top of `⌈lg ε⁻¹ + Δ lg M + lg Δ⌉` for the working precision.
pub const WORKING_SLACK_BITS: u64 = 64;
/// Largest truncation exponent accepted by default.
pub const DEFAULT_EXPONENT_CAP: u64 = 1 << 36;

/// Entries that admit an exact `|Re| + |Im|`.
pub trait L1Entry {
    fn abs_sum(&self) -> BigRational;
}

impl L1Entry for GaussianRational {
    fn abs_sum(&self) -> BigRational {
        GaussianRational::abs_sum(self)
    }
}

impl L1Entry for DyadicComplex {
    fn abs_sum(&self) -> BigRational {
        self.re.to_rational().abs() + self.im.to_rational().abs()
    }
}

impl L1Entry for GaussianInt {
    fn abs_sum(&self) -> BigRational {
        BigRational::from_integer(self.re.abs() + self.im.abs())
    }
}

/// `N₁(A)`: an exact upper bound on the induced 1-norm.
pub fn norm_1<T: crate::matrix::Ring + L1Entry>(a: &Matrix<T>) -> BigRational {
    (0..a.dim())
        .map(|j| a.column(j).map(L1Entry::abs_sum).fold(BigRational::zero(), |s, x| s + x))
        .max()
        .unwrap_or_else(BigRational::zero)
}

/// Componentwise truncation at `ε/(2k)`, so that `N₁(Trunc(A) − A) ≤ ε`.
pub fn trunc_matrix(a: &Matrix<GaussianRational>, eps: &BigRational) -> Result<Matrix<DyadicComplex>> {
    tolerance_exponent(eps)?;
    let beta = BigRational::from_integer(BigInt::from(2 * a.dim()));
    let e = tolerance_exponent(&(eps / beta))?;
    a.try_map(|x| DyadicComplex::trunc_gaussian_at(x, e))
}

/// A submultiplicative norm in which per-step bounds can be certified.
pub trait StepNorm: Sync {
    /// Upper bound on `‖B(n)‖`.
    fn step_bound(&self, rec: &Recurrence, pt: &EvalPoint, n: u64) -> Result<BigRational>;

    /// `⌈lg κ⌉` with `N₁(A) ≤ κ‖A‖` and `‖A‖ ≤ κ N₁(A)`.
    fn equivalence_log2(&self) -> u64 {
        0
    }

    /// Upper bound on `‖A‖`.
    fn norm(&self, a: &Matrix<GaussianRational>) -> BigRational;
}

/// `N₁` itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct L1Norm;

/// `|Re| + |Im|` of `x/y` for nonzero `y`.
pub fn ratio_abs_sum(x: &GaussianInt, y: &GaussianInt) -> BigRational {
    if y.is_real() {
        return BigRational::new(x.re.abs() + x.im.abs(), y.re.abs());
    }
    let num = x.mul_ref(&y.conj());
    BigRational::new(num.re.abs() + num.im.abs(), y.norm_sqr())
}

impl StepNorm for L1Norm {
    /// `1 + |ζ| + |ζ|·max_k |b_k(n)/b_0(n)|`, with `|·|` read as `|Re| + |Im|`.
    fn step_bound(&self, rec: &Recurrence, pt: &EvalPoint, n: u64) -> Result<BigRational> {
        let b0 = rec.b0_at(n)?;
        let z = pt.zeta.abs_sum();
        let worst = (1..rec.dim())
            .map(|k| ratio_abs_sum(&rec.b(k).eval_u64(n), &b0))
            .max()
            .unwrap_or_else(BigRational::zero);
        Ok(BigRational::one() + &z + z * worst)
    }

    fn norm(&self, a: &Matrix<GaussianRational>) -> BigRational {
        norm_1(a)
    }
}

/// Chunk boundaries `⌊qN/Δ⌋` for `q = 0..=Δ`.
pub fn chunk_bounds(n: u64, delta: u64) -> Vec<u64> {
    assert!(delta >= 1);
    (0..=delta).map(|q| ((q as u128 * n as u128) / delta as u128) as u64).collect()
}

/// `max(1, min(N, ⌈(N/p)(h + r lg N)⌉))`.
pub fn default_delta(n: u64, p: u64, h: u64, r: usize) -> u64 {
    if n <= 1 {
        return 1;
    }
    let raw = (n as f64 / p.max(1) as f64) * (h as f64 + r as f64 * (n as f64).log2());
    (raw.ceil() as u64).clamp(1, n)
}

/// Upward-rounded bound on `‖P(a, b)‖` as the product of step bounds.
pub fn chunk_norm_bound(
    rec: &Recurrence,
    pt: &EvalPoint,
    a: u64,
    b: u64,
    norm: &dyn StepNorm,
) -> Result<BigRational> {
    let mut prod = BigRational::one();
    for n in a..b {
        prod = round_up(&(prod * norm.step_bound(rec, pt, n)?), BOUND_BITS);
    }
    Ok(prod)
}

/// `M ≥ max_q ‖P(chunk_q)‖ + ε` over the chunks delimited by `bounds`.
pub fn bound_m_with(
    rec: &Recurrence,
    pt: &EvalPoint,
    bounds: &[u64],
    eps: &BigRational,
    norm: &dyn StepNorm,
) -> Result<BigRational> {
    let mut worst = BigRational::one();
    for w in bounds.windows(2) {
        worst = worst.max(chunk_norm_bound(rec, pt, w[0], w[1], norm)?);
    }
    Ok(round_up(&(worst + eps), BOUND_BITS))
}

/// `M` for `Δ` equal chunks of `[0, N)` in the `N₁` norm.
pub fn bound_m(rec: &Recurrence, pt: &EvalPoint, n: u64, delta: u64, eps: &BigRational) -> Result<BigRational> {
    bound_m_with(rec, pt, &chunk_bounds(n, delta), eps, &L1Norm)
}

pub fn log2_approx(x: &BigRational) -> f64 {
    fn lg(n: &BigInt) -> f64 {
        let b = n.bits();
        if b <= 900 {
            n.to_f64().unwrap().abs().log2()
        } else {
            (n >> (b - 64) as usize).to_f64().unwrap().abs().log2() + (b - 64) as f64
        }
    }
    lg(x.numer()) - lg(x.denom())
}

#[derive(Clone)]
pub struct TruncOptions<'a> {
    /// Forced chunk count, clamped to `[1, max(N, 1)]`.
    pub delta: Option<u64>,
    pub split: SplitOptions,
    /// Norm used for `M`; `N₁` when absent.
    pub norm: Option<&'a dyn StepNorm>,
    pub exponent_cap: u64,
}

impl Default for TruncOptions<'_> {
    fn default() -> Self {
        Self { delta: None, split: SplitOptions::default(), norm: None, exponent_cap: DEFAULT_EXPONENT_CAP }
    }
}

/// State of the accumulator after `q` chunks.
pub struct TruncStep<'a> {
    pub q: u64,
    pub delta: u64,
    pub bounds: &'a [u64],
    pub m: &'a BigRational,
    /// In the chosen norm, `‖P̃ − P‖ ≤ (q/Δ)·2^-eps_exp/M^(Δ−q)`.
    pub eps_exp: u64,
    pub acc: &'a Matrix<DyadicComplex>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub q: u64,
    pub a: u64,
    pub b: u64,
    pub chunk_bits: u64,
    pub acc_bits: u64,
    pub ledger_peak: u64,
}

#[derive(Clone, Debug)]
pub struct TruncOutput {
    pub mat: Matrix<DyadicComplex>,
    pub delta: u64,
    pub m: BigRational,
    pub lg_m: f64,
    pub eps_exp: u64,
    pub max_entry_bits: u64,
    pub cap_bits: u64,
    pub trace: Vec<TraceRecord>,
}

/// `P̃` with `N₁(P̃ − P(0, N)) ≤ 2^-p`.
pub fn trunc_bin_split(rec: &Recurrence, pt: &EvalPoint, n: u64, p: u64, opts: &TruncOptions) -> Result<TruncOutput> {
    trunc_bin_split_observed(rec, pt, n, p, opts, &mut |_| {})
}

/// Chunk product divided by its corner, truncated toward zero at exponent `e`.
fn divide_truncate(x: &ExactProduct, e: u64) -> Result<Matrix<DyadicComplex>> {
    let c = x.corner();
    if c.is_zero() {
        return Err(Error::Invariant(format!("zero corner on [{}, {})", x.a, x.b)));
    }
    if c.is_real() {
        let neg = c.re.is_negative();
        let d = c.re.abs();
        return x.mat.try_map(|v| {
            let (re, im) = if neg { (-&v.re, -&v.im) } else { (v.re.clone(), v.im.clone()) };
            Ok(DyadicComplex::new(Dyadic::trunc_ratio(&re, &d, e)?, Dyadic::trunc_ratio(&im, &d, e)?))
        });
    }
    let cc = c.conj();
    let d = c.norm_sqr();
    x.mat.try_map(|v| {
        let w = v.mul_ref(&cc);
        Ok(DyadicComplex::new(Dyadic::trunc_ratio(&w.re, &d, e)?, Dyadic::trunc_ratio(&w.im, &d, e)?))
    })
}

pub fn trunc_bin_split_observed(
    rec: &Recurrence,
    pt: &EvalPoint,
    n: u64,
    p: u64,
    opts: &TruncOptions,
    observer: &mut dyn FnMut(&TruncStep),
) -> Result<TruncOutput> {
    if p == 0 {
        return Err(Error::InvalidRequest("precision must be at least 1 bit".into()));
    }
    let norm: &dyn StepNorm = opts.norm.unwrap_or(&L1Norm);
    // Tolerances shrink by κ so that the target holds in N₁, and by κ again
    // so that N₁-truncations stay within budget in the chosen norm.
    let lg_kappa = norm.equivalence_log2();
    let eps_exp = p + 2 * lg_kappa;
    // Target in the chosen norm; κ times it is 2^-p in N₁.
    let norm_exp = p + lg_kappa;
    let h = rec.h1().max(pt.h2());
    let delta = match opts.delta {
        Some(d) => d.clamp(1, n.max(1)),
        None => default_delta(n, p, h, rec.order()),
    };
    let bounds = chunk_bounds(n, delta);
    let eps = pow2(-(norm_exp as i64));
    let m = bound_m_with(rec, pt, &bounds, &eps, norm)?;

    // ⌈lg(2k·2Δ·M^j)⌉ ≤ ⌈lg 4kΔ⌉ + ⌈j·L/1024⌉ with L = ⌈lg M^1024⌉.
    let k = rec.dim() as u64;
    let lg_base = ceil_log2(&BigInt::from(4 * k * delta));
    let lg_m1024 = {
        let (mn, md) = (m.numer().pow(1024u32), m.denom().pow(1024u32));
        ceil_log2_ratio(&mn, &md).max(0) as u64
    };
    let exponent = |j: u64| eps_exp + lg_base + (j as u128 * lg_m1024 as u128).div_ceil(1024) as u64;
    let e_chunk = exponent(delta - 1);
    if e_chunk > opts.exponent_cap {
        return Err(Error::ToleranceUnderflow { exponent: e_chunk, cap: opts.exponent_cap });
    }
    let cap_bits = {
        let dm = BigRational::from_integer(BigInt::from(delta)) * num_traits::pow::pow(m.clone(), delta as usize);
        eps_exp + ceil_log2_ratio(dm.numer(), dm.denom()).max(0) as u64
            + WORKING_SLACK_BITS
            + norm.equivalence_log2()
    };
    let check = |mat: &Matrix<DyadicComplex>| -> Result<u64> {
        let bits = mat.max_mantissa_bits();
        if bits > cap_bits {
            return Err(Error::WorkingPrecision { bits, cap: cap_bits });
        }
        Ok(bits)
    };

    let ledger = &opts.split.ledger;
    let mut acc: Matrix<DyadicComplex> = Matrix::identity(rec.dim());
    let mut acc_charge = ledger.charge(acc.storage_bits());
    let mut max_entry_bits = 0;
    let mut trace = Vec::with_capacity(delta as usize);
    observer(&TruncStep { q: 0, delta, bounds: &bounds, m: &m, eps_exp: norm_exp, acc: &acc });
    for q in 0..delta {
        let (a, b) = (bounds[q as usize], bounds[q as usize + 1]);
        let exact = bin_split(rec, pt, a, b, &opts.split)?;
        let chunk_bits = exact.bits();
        let qt = divide_truncate(&exact, e_chunk)?;
        drop(exact);
        let _qt_charge = ledger.charge(qt.storage_bits());
        max_entry_bits = max_entry_bits.max(check(&qt)?);

        let prod = qt.mul(&acc);
        let prod_charge = ledger.charge(prod.storage_bits());
        let e_acc = exponent(delta - q - 1);
        acc = prod.map(|x| x.at_exponent(e_acc));
        drop(prod);
        drop(prod_charge);
        acc_charge.update(acc.storage_bits());
        max_entry_bits = max_entry_bits.max(check(&acc)?);

        trace.push(TraceRecord {
            q: q + 1,
            a,
            b,
            chunk_bits,
            acc_bits: acc.storage_bits(),
            ledger_peak: ledger.peak(),
        });
        observer(&TruncStep { q: q + 1, delta, bounds: &bounds, m: &m, eps_exp: norm_exp, acc: &acc });
    }
    drop(acc_charge);
    let lg_m = log2_approx(&m);
    Ok(TruncOutput { mat: acc, delta, m, lg_m, eps_exp, max_entry_bits, cap_bits, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::ledger::Ledger;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn gq(s: &str) -> GaussianRational {
        s.parse().unwrap()
    }

    fn exp_half() -> (Recurrence, EvalPoint) {
        (catalog::get("exp").unwrap().ode.recurrence(), "1/2".parse().unwrap())
    }

    fn exact(rec: &Recurrence, pt: &EvalPoint, a: u64, b: u64) -> Matrix<GaussianRational> {
        bin_split(rec, pt, a, b, &SplitOptions::default()).unwrap().reduce().unwrap()
    }

    #[test]
    fn norm_examples() {
        let id: Matrix<GaussianRational> = Matrix::identity(2);
        assert_eq!(norm_1(&id), q(1, 1));
        let m = Matrix::from_rows(vec![vec![gq("1"), gq("0")], vec![gq("4"), gq("2")]]);
        assert_eq!(norm_1(&m), q(5, 1));
        let i = Matrix::from_rows(vec![vec![gq("i"), gq("0")], vec![gq("0"), gq("0")]]);
        assert_eq!(norm_1(&i), q(1, 1));
    }

    #[test]
    fn trunc_matrix_examples() {
        let a = Matrix::from_rows(vec![vec![gq("5/3")]]);
        let t = trunc_matrix(&a, &q(1, 4)).unwrap();
        assert_eq!(t.get(0, 0).to_gaussian_rational(), gq("13/8"));

        let z: Matrix<GaussianRational> = Matrix::zeros(3);
        assert_eq!(trunc_matrix(&z, &q(1, 3)).unwrap().to_gaussian_rational(), z);

        let third = Matrix::from_rows(vec![vec![gq("1/3"); 2]; 2]);
        let t = trunc_matrix(&third, &q(1, 4)).unwrap();
        for x in t.entries() {
            assert_eq!(x.to_gaussian_rational(), gq("5/16"));
        }
        let diff = third.sub(&t.to_gaussian_rational());
        assert_eq!(norm_1(&diff), q(1, 24));

        assert!(trunc_matrix(&third, &q(1, 1)).is_err());
    }

    #[test]
    fn bound_m_for_exp_single_chunk() {
        let (rec, pt) = exp_half();
        let eps = pow2(-32);
        let m = bound_m(&rec, &pt, 4, 1, &eps).unwrap();
        assert!(m >= q(455, 48) + &eps, "{m}");
        assert!(m <= q(10, 1));
        let empty = bound_m_with(&rec, &pt, &[3, 3], &eps, &L1Norm).unwrap();
        assert!(empty >= BigRational::one());
        assert!(norm_1(&exact(&rec, &pt, 0, 4)) <= m);
    }

    #[test]
    fn step_norm_is_at_least_one() {
        for e in catalog::all() {
            let rec = e.ode.recurrence();
            let pt = EvalPoint::new(&e.point);
            for n in [0u64, 1, 5, 77, 1000] {
                let b = crate::ode::step_matrix(&rec, &pt, n).unwrap();
                let nb = norm_1(&b);
                assert!(nb >= BigRational::one());
                assert!(nb <= L1Norm.step_bound(&rec, &pt, n).unwrap());
            }
        }
    }

    #[test]
    fn delta_formula_is_clamped() {
        assert_eq!(default_delta(0, 64, 3, 1), 1);
        assert_eq!(default_delta(1, 64, 3, 1), 1);
        assert_eq!(default_delta(10, 1, 100, 2), 10);
        assert_eq!(default_delta(1000, 1000, 2, 1), 12);
        assert_eq!(chunk_bounds(10, 3), vec![0, 3, 6, 10]);
    }

    #[test]
    fn single_chunk_matches_direct_truncation() {
        let (rec, pt) = exp_half();
        let p = 40;
        let opts = TruncOptions { delta: Some(1), ..Default::default() };
        let out = trunc_bin_split(&rec, &pt, 16, p, &opts).unwrap();
        assert_eq!(out.delta, 1);
        let exact = exact(&rec, &pt, 0, 16);
        // One chunk: truncation at ε/2 followed by an exact product with I.
        let direct = trunc_matrix(&exact, &pow2(-(p as i64) - 1)).unwrap();
        assert_eq!(out.mat.to_gaussian_rational(), direct.to_gaussian_rational());
    }

    #[test]
    fn exp_error_bound_and_induction() {
        let (rec, pt) = exp_half();
        let p = 32;
        for delta in [2u64, 4, 16] {
            let opts = TruncOptions { delta: Some(delta), ..Default::default() };
            let mut checked = 0;
            let out = trunc_bin_split_observed(&rec, &pt, 16, p, &opts, &mut |s| {
                let exact = exact(&rec, &pt, 0, s.bounds[s.q as usize]);
                let err = norm_1(&s.acc.to_gaussian_rational().sub(&exact));
                let allowed = BigRational::new(s.q.into(), s.delta.into()) * pow2(-(s.eps_exp as i64))
                    / num_traits::pow::pow(s.m.clone(), (s.delta - s.q) as usize);
                assert!(err <= allowed, "q = {}", s.q);
                checked += 1;
            })
            .unwrap();
            assert_eq!(checked, delta + 1);
            let err = norm_1(&out.mat.to_gaussian_rational().sub(&exact(&rec, &pt, 0, 16)));
            assert!(err <= pow2(-(p as i64)));
            assert!(out.max_entry_bits <= out.cap_bits);
        }
    }

    #[test]
    fn tolerance_underflow_is_reported() {
        let (rec, pt) = exp_half();
        let opts = TruncOptions { delta: Some(8), exponent_cap: 40, ..Default::default() };
        let err = trunc_bin_split(&rec, &pt, 64, 64, &opts).unwrap_err();
        assert!(matches!(err, Error::ToleranceUnderflow { cap: 40, .. }));
    }

    #[test]
    fn zero_length_run_is_identity() {
        let (rec, pt) = exp_half();
        let out = trunc_bin_split(&rec, &pt, 0, 16, &TruncOptions::default()).unwrap();
        assert_eq!(out.delta, 1);
        assert_eq!(out.mat.to_gaussian_rational(), Matrix::identity(2));
    }

    #[test]
    fn trace_and_ledger() {
        let e = catalog::get("ln2").unwrap();
        let rec = e.ode.recurrence();
        let pt = EvalPoint::new(&e.point);
        let ledger = Ledger::enabled();
        let opts = TruncOptions { split: SplitOptions::with_ledger(ledger.clone()), ..Default::default() };
        let out = trunc_bin_split(&rec, &pt, 300, 256, &opts).unwrap();
        assert_eq!(out.trace.len() as u64, out.delta);
        assert!(out.delta > 1);
        assert_eq!(out.trace.last().unwrap().b, 300);
        assert!(ledger.peak() > 0);
        assert_eq!(ledger.probe().current, 0);
        let err = norm_1(&out.mat.to_gaussian_rational().sub(&exact(&rec, &pt, 0, 300)));
        assert!(err <= pow2(-256));
    }
}
