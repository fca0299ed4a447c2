//! Exact balanced product trees of the cleared step matrices `B̂(n)`.

use crate::arith::{GaussianInt, GaussianRational};
use crate::error::{Error, Result};
use crate::ledger::{Charge, Ledger};
use crate::matrix::Matrix;
use crate::ode::{hat_step_matrix, EvalPoint, Recurrence};

pub const DEFAULT_THRESHOLD: u64 = 16;

#[derive(Clone, Debug)]
pub struct SplitOptions {
    /// Ranges of at most this length are multiplied out directly.
    pub threshold: u64,
    /// Levels of the tree whose two halves run on separate threads.
    pub parallel_depth: u32,
    pub ledger: Ledger,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, parallel_depth: 0, ledger: Ledger::disabled() }
    }
}

impl SplitOptions {
    pub fn with_ledger(ledger: Ledger) -> Self {
        Self { ledger, ..Self::default() }
    }
}

/// `B̂(b-1)···B̂(a)` over ℤ[i]; its corner is `∏ ζ̌·b_0(n)`.
#[derive(Debug)]
pub struct ExactProduct {
    pub mat: Matrix<GaussianInt>,
    pub a: u64,
    pub b: u64,
    charge: Charge,
}

impl ExactProduct {
    fn new(mat: Matrix<GaussianInt>, a: u64, b: u64, ledger: &Ledger) -> Self {
        let charge = ledger.charge(mat.bits());
        Self { mat, a, b, charge }
    }

    pub fn corner(&self) -> &GaussianInt {
        let k = self.mat.dim() - 1;
        self.mat.get(k, k)
    }

    pub fn bits(&self) -> u64 {
        self.charge.bits().max(self.mat.bits())
    }

    /// `P(a, b)`: the product divided by its corner.
    pub fn reduce(&self) -> Result<Matrix<GaussianRational>> {
        let c = self.corner();
        if c.is_zero() {
            return Err(Error::Invariant(format!("zero corner on [{}, {})", self.a, self.b)));
        }
        let den = c.norm_sqr();
        let cc = c.conj();
        Ok(self.mat.map(|x| GaussianRational::new(x.mul_ref(&cc), den.clone())))
    }
}

/// `B̂(b-1)···B̂(a)`, split at `m = ⌊(a+b)/2⌋` as `P(m, b)·P(a, m)`.
pub fn bin_split(
    rec: &Recurrence,
    pt: &EvalPoint,
    a: u64,
    b: u64,
    opts: &SplitOptions,
) -> Result<ExactProduct> {
    assert!(a <= b, "empty or reversed range [{a}, {b})");
    split(rec, pt, a, b, opts, opts.parallel_depth)
}

fn split(
    rec: &Recurrence,
    pt: &EvalPoint,
    a: u64,
    b: u64,
    opts: &SplitOptions,
    depth: u32,
) -> Result<ExactProduct> {
    if b - a <= opts.threshold.max(1) {
        return leaf(rec, pt, a, b, &opts.ledger);
    }
    let m = a + (b - a) / 2;
    let (lo, hi) = if depth > 0 {
        std::thread::scope(|s| {
            let hi = s.spawn(|| split(rec, pt, m, b, opts, depth - 1));
            let lo = split(rec, pt, a, m, opts, depth - 1);
            (lo, hi.join().expect("product tree worker panicked"))
        })
    } else {
        let lo = split(rec, pt, a, m, opts, 0)?;
        let hi = split(rec, pt, m, b, opts, 0)?;
        (Ok(lo), Ok(hi))
    };
    let (lo, hi) = (lo?, hi?);
    let mat = hi.mat.mul(&lo.mat);
    Ok(ExactProduct::new(mat, a, b, &opts.ledger))
}

fn leaf(rec: &Recurrence, pt: &EvalPoint, a: u64, b: u64, ledger: &Ledger) -> Result<ExactProduct> {
    if a == b {
        return Ok(ExactProduct::new(Matrix::identity(rec.dim()), a, b, ledger));
    }
    let mut acc = hat_step_matrix(rec, pt, a)?;
    let mut charge = ledger.charge(acc.bits());
    for n in a + 1..b {
        let step = hat_step_matrix(rec, pt, n)?;
        acc = step.mul(&acc);
        charge.update(acc.bits());
    }
    drop(charge);
    Ok(ExactProduct::new(acc, a, b, ledger))
}

/// Current and peak bits held by live products charged to `ledger`.
pub fn ledger_probe(ledger: &Ledger) -> crate::ledger::LedgerStats {
    ledger.probe()
}
