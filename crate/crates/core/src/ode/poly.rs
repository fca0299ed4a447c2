use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::arith::{GaussianInt, GaussianRational};

/// Dense univariate polynomial over ℤ[i], lowest degree first, no trailing
/// zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly {
    coeffs: Vec<GaussianInt>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<GaussianInt>) -> Self {
        while coeffs.last().is_some_and(GaussianInt::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_ints(cs: &[i64]) -> Self {
        Self::new(cs.iter().map(|&c| GaussianInt::from_int(c)).collect())
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[GaussianInt] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> GaussianInt {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn eval(&self, x: &BigInt) -> GaussianInt {
        let mut acc = GaussianInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = &acc.scale(x) + c;
        }
        acc
    }

    pub fn eval_u64(&self, n: u64) -> GaussianInt {
        self.eval(&BigInt::from(n))
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..len).map(|k| &self.coeff(k) + &other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![GaussianInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = &out[i + j] + &a.mul_ref(b);
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, k: &GaussianInt) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.mul_ref(k)).collect())
    }

    /// Multiply by `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut out = vec![GaussianInt::zero(); k];
        out.extend(self.coeffs.iter().cloned());
        Self::new(out)
    }

    /// Largest coefficient bit size, as [`GaussianRational::bit_size`].
    pub fn max_coeff_bit_size(&self) -> u64 {
        self.coeffs
            .iter()
            .map(|c| GaussianRational::from(c.clone()).bit_size())
            .max()
            .unwrap_or(0)
    }

    /// Render with variable `var`, highest degree first: `n^2+3*n-1`.
    pub fn display_in(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let (neg, body) = coeff_text(c);
            let mono = match k {
                0 => String::new(),
                1 => var.to_string(),
                _ => format!("{var}^{k}"),
            };
            let term = match (k, body.as_str()) {
                (0, _) => body,
                (_, "1") => mono,
                _ => format!("{body}*{mono}"),
            };
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { "-" } else { "+" });
            }
            out.push_str(&term);
        }
        out
    }
}

// Sign and magnitude text of a coefficient; non-real values are parenthesized.
fn coeff_text(c: &GaussianInt) -> (bool, String) {
    if c.is_real() {
        return (c.re.is_negative(), c.re.abs().to_string());
    }
    if c.re.is_zero() {
        let neg = c.im.is_negative();
        let m = c.im.abs();
        let body = if m.is_one() { "i".to_string() } else { format!("{m}*i") };
        return (neg, body);
    }
    (false, format!("({})", GaussianRational::from(c.clone())))
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_in("z"))
    }
}
