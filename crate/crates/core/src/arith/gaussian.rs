use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{ceil_log2, modulus_lower_parts, modulus_upper_parts};
use crate::error::{Error, Result};

/// Element of ℤ[i].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GaussianInt {
    pub re: BigInt,
    pub im: BigInt,
}

// Above this many bits the three-multiplication product wins.
const GAUSS_MUL_CUTOFF: u64 = 4096;

impl GaussianInt {
    pub fn new(re: impl Into<BigInt>, im: impl Into<BigInt>) -> Self {
        Self { re: re.into(), im: im.into() }
    }

    pub fn from_int(re: impl Into<BigInt>) -> Self {
        Self { re: re.into(), im: BigInt::zero() }
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

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: -&self.im }
    }

    /// `re² + im²`.
    pub fn norm_sqr(&self) -> BigInt {
        if self.im.is_zero() {
            return &self.re * &self.re;
        }
        &self.re * &self.re + &self.im * &self.im
    }

    /// Storage size in bits, summed over both components.
    pub fn bits(&self) -> u64 {
        self.re.bits() + self.im.bits()
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        if self.im.is_zero() {
            return Self { re: &self.re * k, im: BigInt::zero() };
        }
        Self { re: &self.re * k, im: &self.im * k }
    }

    pub fn mul_ref(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if self.im.is_zero() {
            return other.scale(&self.re);
        }
        if other.im.is_zero() {
            return self.scale(&other.re);
        }
        let (a, b, c, d) = (&self.re, &self.im, &other.re, &other.im);
        if self.bits().min(other.bits()) > GAUSS_MUL_CUTOFF {
            let k1 = c * (a + b);
            let k2 = a * (d - c);
            let k3 = b * (c + d);
            Self { re: &k1 - k3, im: k1 + k2 }
        } else {
            Self { re: a * c - b * d, im: a * d + b * c }
        }
    }

    pub fn modulus_upper(&self, bits: u64) -> BigRational {
        modulus_upper_parts(&self.re, &self.im, &BigInt::one(), bits)
    }

    pub fn modulus_lower(&self, bits: u64) -> BigRational {
        modulus_lower_parts(&self.re, &self.im, &BigInt::one(), bits)
    }
}

impl Add<&GaussianInt> for &GaussianInt {
    type Output = GaussianInt;
    fn add(self, rhs: &GaussianInt) -> GaussianInt {
        GaussianInt { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub<&GaussianInt> for &GaussianInt {
    type Output = GaussianInt;
    fn sub(self, rhs: &GaussianInt) -> GaussianInt {
        GaussianInt { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul<&GaussianInt> for &GaussianInt {
    type Output = GaussianInt;
    fn mul(self, rhs: &GaussianInt) -> GaussianInt {
        self.mul_ref(rhs)
    }
}

impl Neg for &GaussianInt {
    type Output = GaussianInt;
    fn neg(self) -> GaussianInt {
        GaussianInt { re: -&self.re, im: -&self.im }
    }
}

impl Neg for GaussianInt {
    type Output = GaussianInt;
    fn neg(self) -> GaussianInt {
        GaussianInt { re: -self.re, im: -self.im }
    }
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", GaussianRational::from(self.clone()))
    }
}

/// Element of ℚ(i) as a Gaussian-integer numerator over a positive integer
/// denominator. Not kept in lowest terms; see [`GaussianRational::normalize`].
#[derive(Clone, Debug)]
pub struct GaussianRational {
    pub num: GaussianInt,
    pub den: BigInt,
}

impl GaussianRational {
    /// Panics if `den` is zero.
    pub fn new(num: GaussianInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if den.is_negative() {
            Self { num: -num, den: -den }
        } else {
            Self { num, den }
        }
    }

    pub fn from_parts(re: &BigRational, im: &BigRational) -> Self {
        let den = re.denom() * im.denom();
        let num = GaussianInt {
            re: re.numer() * im.denom(),
            im: im.numer() * re.denom(),
        };
        Self { num, den }.normalize()
    }

    pub fn from_rational(re: &BigRational) -> Self {
        Self { num: GaussianInt::from_int(re.numer().clone()), den: re.denom().clone() }
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        Self::from(GaussianInt::from_int(n))
    }

    pub fn zero() -> Self {
        Self::from(GaussianInt::zero())
    }

    pub fn one() -> Self {
        Self::from(GaussianInt::one())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.num.is_real()
    }

    pub fn re(&self) -> BigRational {
        BigRational::new(self.num.re.clone(), self.den.clone())
    }

    pub fn im(&self) -> BigRational {
        BigRational::new(self.num.im.clone(), self.den.clone())
    }

    /// Divides out the common content of numerator and denominator.
    pub fn normalize(&self) -> Self {
        let g = self.num.re.gcd(&self.num.im).gcd(&self.den);
        if g.is_one() || g.is_zero() {
            return self.clone();
        }
        Self {
            num: GaussianInt { re: &self.num.re / &g, im: &self.num.im / &g },
            den: &self.den / &g,
        }
    }

    /// `⌈lg den⌉ + ⌈lg |re|⌉ + ⌈lg |im|⌉ + 1`, on the stored representation.
    pub fn bit_size(&self) -> u64 {
        ceil_log2(&self.den) + ceil_log2(&self.num.re) + ceil_log2(&self.num.im) + 1
    }

    pub fn conj(&self) -> Self {
        Self { num: self.num.conj(), den: self.den.clone() }
    }

    pub fn checked_div(&self, other: &Self) -> Option<Self> {
        if other.is_zero() {
            return None;
        }
        // (a/d1) / (b/d2) = a·conj(b)·d2 / (|b|²·d1)
        let num = self.num.mul_ref(&other.num.conj()).scale(&other.den);
        let den = other.num.norm_sqr() * &self.den;
        Some(Self::new(num, den))
    }

    pub fn scale_int(&self, k: &BigInt) -> Self {
        Self { num: self.num.scale(k), den: self.den.clone() }
    }

    pub fn modulus_upper(&self, bits: u64) -> BigRational {
        modulus_upper_parts(&self.num.re, &self.num.im, &self.den, bits)
    }

    pub fn modulus_lower(&self, bits: u64) -> BigRational {
        modulus_lower_parts(&self.num.re, &self.num.im, &self.den, bits)
    }

    /// Exact `|re| + |im|`, an upper bound on the modulus within `√2`.
    pub fn abs_sum(&self) -> BigRational {
        BigRational::new(self.num.re.abs() + self.num.im.abs(), self.den.clone())
    }

    /// Exact `re² + im²`.
    pub fn modulus_sqr(&self) -> BigRational {
        BigRational::new(self.num.norm_sqr(), &self.den * &self.den)
    }
}

impl From<GaussianInt> for GaussianRational {
    fn from(num: GaussianInt) -> Self {
        Self { num, den: BigInt::one() }
    }
}

impl PartialEq for GaussianRational {
    fn eq(&self, other: &Self) -> bool {
        self.num.re.clone() * &other.den == other.num.re.clone() * &self.den
            && self.num.im.clone() * &other.den == other.num.im.clone() * &self.den
    }
}

impl Eq for GaussianRational {}

impl Add<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: &GaussianRational) -> GaussianRational {
        if self.den == rhs.den {
            return GaussianRational { num: &self.num + &rhs.num, den: self.den.clone() };
        }
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        GaussianRational {
            num: &self.num.scale(&rhs.den) + &rhs.num.scale(&self.den),
            den: &self.den * &rhs.den,
        }
    }
}

impl Sub<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, rhs: &GaussianRational) -> GaussianRational {
        self + &(-rhs)
    }
}

impl Mul<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, rhs: &GaussianRational) -> GaussianRational {
        if self.is_zero() || rhs.is_zero() {
            return GaussianRational::zero();
        }
        GaussianRational { num: self.num.mul_ref(&rhs.num), den: &self.den * &rhs.den }
    }
}

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational { num: -&self.num, den: self.den.clone() }
    }
}

fn fmt_rational(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

impl fmt::Display for GaussianRational {
    /// Prints in lowest terms as `a/b+c/d*i`, omitting zero parts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = (self.re(), self.im());
        match (re.is_zero(), im.is_zero()) {
            (_, true) => write!(f, "{}", fmt_rational(&re)),
            (true, false) => write!(f, "{}*i", fmt_rational(&im)),
            (false, false) => {
                let sign = if im.is_negative() { "-" } else { "+" };
                write!(f, "{}{}{}*i", fmt_rational(&re), sign, fmt_rational(&im.abs()))
            }
        }
    }
}

fn parse_rational(s: &str, full: &str) -> Result<BigRational> {
    let err = || Error::Parse { what: "Gaussian rational", input: full.to_string() };
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| err())?;
    let d: BigInt = d.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(BigRational::new(n, d))
}

impl FromStr for GaussianRational {
    type Err = Error;

    /// Accepts `a/b+c/d*i` with either part optional: `1/2`, `-3`, `2*i`,
    /// `-i`, `1/2-1/3*i`, `i/4`.
    fn from_str(input: &str) -> Result<Self> {
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        let err = || Error::Parse { what: "Gaussian rational", input: input.to_string() };
        if s.is_empty() {
            return Err(err());
        }
        if !s.contains('i') {
            return Ok(Self::from_rational(&parse_rational(&s, input)?));
        }
        // Split at the last sign that is not the leading one.
        let split = s
            .char_indices()
            .filter(|&(k, c)| k > 0 && (c == '+' || c == '-'))
            .map(|(k, _)| k)
            .last();
        let (re_part, im_part) = match split {
            Some(k) if s[k..].contains('i') && !s[..k].contains('i') => (&s[..k], &s[k..]),
            _ => ("", s.as_str()),
        };
        let re = if re_part.is_empty() {
            BigRational::zero()
        } else {
            parse_rational(re_part, input)?
        };
        let (sign, body) = match im_part.as_bytes()[0] {
            b'+' => (1, &im_part[1..]),
            b'-' => (-1, &im_part[1..]),
            _ => (1, im_part),
        };
        let im_abs = if body == "i" {
            BigRational::one()
        } else if let Some(c) = body.strip_suffix("*i") {
            parse_rational(c, input)?
        } else if let Some(c) = body.strip_suffix('i') {
            parse_rational(c, input)?
        } else if let Some(d) = body.strip_prefix("i/") {
            BigRational::new(BigInt::one(), d.parse().map_err(|_| err())?)
        } else {
            return Err(err());
        };
        if im_abs.denom().is_zero() {
            return Err(err());
        }
        let im = if sign < 0 { -im_abs } else { im_abs };
        Ok(Self::from_parts(&re, &im))
    }
}
