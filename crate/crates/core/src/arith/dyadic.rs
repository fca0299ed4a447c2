use std::fmt;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{ceil_log2_ratio, GaussianRational};
use crate::error::{Error, Result};

/// Largest exponent a [`Dyadic`] may carry.
pub const MAX_EXPONENT: u64 = 1 << 62;

/// Exact `mantissa · 2^-exp`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Dyadic {
    pub mantissa: BigInt,
    pub exp: u64,
}

/// `sgn(num)·⌊2^e·|num| / den⌋` for positive `den`.
pub(crate) fn trunc_ratio_at(num: &BigInt, den: &BigInt, e: u64) -> BigInt {
    if num.is_zero() {
        return BigInt::zero();
    }
    let scaled = num.abs() << e as usize;
    let q = scaled / den;
    if num.is_negative() {
        -q
    } else {
        q
    }
}

/// Shift right by `k` rounding toward zero.
fn shr_toward_zero(m: &BigInt, k: u64) -> BigInt {
    if k == 0 {
        return m.clone();
    }
    match m.sign() {
        Sign::Minus => -((-m) >> k as usize),
        _ => m >> k as usize,
    }
}

fn check_exponent(e: u128) -> Result<u64> {
    if e > MAX_EXPONENT as u128 {
        Err(Error::ExponentOverflow(e))
    } else {
        Ok(e as u64)
    }
}

/// Exponent `⌈lg ε⁻¹⌉` for a tolerance `0 < ε < 1`.
pub(crate) fn tolerance_exponent(eps: &BigRational) -> Result<u64> {
    if !eps.is_positive() || *eps >= BigRational::one() {
        return Err(Error::InvalidTolerance(eps.to_string()));
    }
    let e = ceil_log2_ratio(eps.denom(), eps.numer());
    check_exponent(e.max(0) as u128)
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exp: u64) -> Result<Self> {
        check_exponent(exp as u128)?;
        Ok(Self { mantissa, exp })
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        Self { mantissa: n.into(), exp: 0 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn mantissa_bits(&self) -> u64 {
        self.mantissa.bits()
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.mantissa.clone(), BigInt::one() << self.exp as usize)
    }

    /// Truncate `num/den` (positive `den`) toward zero at exponent `e`.
    pub fn trunc_ratio(num: &BigInt, den: &BigInt, e: u64) -> Result<Self> {
        check_exponent(e as u128)?;
        Ok(Self { mantissa: trunc_ratio_at(num, den, e), exp: e })
    }

    /// Re-express at exponent `e`: exact when `e ≥ self.exp`, otherwise
    /// truncated toward zero.
    pub fn at_exponent(&self, e: u64) -> Self {
        use std::cmp::Ordering::*;
        match e.cmp(&self.exp) {
            Equal => self.clone(),
            Greater => Self { mantissa: &self.mantissa << (e - self.exp) as usize, exp: e },
            Less => Self { mantissa: shr_toward_zero(&self.mantissa, self.exp - e), exp: e },
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exp.max(other.exp);
        let a = self.at_exponent(e);
        let b = other.at_exponent(e);
        Self { mantissa: a.mantissa + b.mantissa, exp: e }
    }

    pub fn neg(&self) -> Self {
        Self { mantissa: -&self.mantissa, exp: self.exp }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self { mantissa: &self.mantissa * &other.mantissa, exp: self.exp + other.exp }
    }

    /// Decimal expansion truncated toward zero after `digits` fractional digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        let neg = self.mantissa.is_negative();
        let scaled = (self.mantissa.abs() * BigInt::from(10u32).pow(digits as u32)) >> self.exp as usize;
        let s = scaled.to_string();
        let (int, frac) = if digits == 0 {
            (s, String::new())
        } else if s.len() > digits {
            let (a, b) = s.split_at(s.len() - digits);
            (a.to_string(), b.to_string())
        } else {
            ("0".to_string(), format!("{s:0>digits$}"))
        };
        let sign = if neg && scaled_nonzero(&int, &frac) { "-" } else { "" };
        if frac.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }
}

fn scaled_nonzero(int: &str, frac: &str) -> bool {
    int.chars().chain(frac.chars()).any(|c| c != '0')
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^-{}", self.mantissa, self.exp)
    }
}

/// `Trunc(a, ε) = sgn(a)·⌊2^e·|a|⌋·2^-e` with `e = ⌈lg ε⁻¹⌉`.
pub fn trunc_scalar(a: &BigRational, eps: &BigRational) -> Result<Dyadic> {
    let e = tolerance_exponent(eps)?;
    Dyadic::trunc_ratio(a.numer(), a.denom(), e)
}

/// Complex dyadic with exact components.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DyadicComplex {
    pub re: Dyadic,
    pub im: Dyadic,
}

impl DyadicComplex {
    pub fn new(re: Dyadic, im: Dyadic) -> Self {
        Self { re, im }
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        Self { re: Dyadic::from_int(n), im: Dyadic::zero() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn mantissa_bits(&self) -> u64 {
        self.re.mantissa_bits().max(self.im.mantissa_bits())
    }

    /// Total mantissa storage in bits.
    pub fn storage_bits(&self) -> u64 {
        self.re.mantissa_bits() + self.im.mantissa_bits()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { re: self.re.add(&other.re), im: self.im.add(&other.im) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { re: self.re.sub(&other.re), im: self.im.sub(&other.im) }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.im.is_zero() && other.im.is_zero() {
            return Self { re: self.re.mul(&other.re), im: Dyadic::zero() };
        }
        Self {
            re: self.re.mul(&other.re).sub(&self.im.mul(&other.im)),
            im: self.re.mul(&other.im).add(&self.im.mul(&other.re)),
        }
    }

    pub fn at_exponent(&self, e: u64) -> Self {
        Self { re: self.re.at_exponent(e), im: self.im.at_exponent(e) }
    }

    pub fn to_gaussian_rational(&self) -> GaussianRational {
        let e = self.re.exp.max(self.im.exp);
        let re = self.re.at_exponent(e).mantissa;
        let im = self.im.at_exponent(e).mantissa;
        GaussianRational::new(super::GaussianInt { re, im }, BigInt::one() << e as usize)
    }

    /// Truncate each component of `a` at exponent `e`.
    pub fn trunc_gaussian_at(a: &GaussianRational, e: u64) -> Result<Self> {
        Ok(Self {
            re: Dyadic::trunc_ratio(&a.num.re, &a.den, e)?,
            im: Dyadic::trunc_ratio(&a.num.im, &a.den, e)?,
        })
    }
}

impl fmt::Display for DyadicComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else {
            write!(f, "{} + ({})*i", self.re, self.im)
        }
    }
}

/// Componentwise truncation of a Gaussian rational at tolerance `ε`.
pub fn trunc_gaussian(a: &GaussianRational, eps: &BigRational) -> Result<DyadicComplex> {
    let e = tolerance_exponent(eps)?;
    DyadicComplex::trunc_gaussian_at(a, e)
}
