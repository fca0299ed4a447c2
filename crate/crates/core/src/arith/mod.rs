//! Exact arithmetic over the Gaussian integers and rationals, complex dyadics,
//! and the truncation operator used by the linear-space engine.
//!
//! Nothing in here rounds implicitly. Where a bound has to be carried in low
//! precision (moduli, logarithms) the helpers below round in an explicit
//! direction and say which.

mod dyadic;
mod gaussian;

pub use dyadic::{trunc_gaussian, trunc_scalar, Dyadic, DyadicComplex, MAX_EXPONENT};
pub(crate) use dyadic::tolerance_exponent;
pub use gaussian::{GaussianInt, GaussianRational};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// `⌈lg |n|⌉`, with `⌈lg 0⌉ = 0`.
pub fn ceil_log2(n: &BigInt) -> u64 {
    if n.is_zero() {
        return 0;
    }
    let m = n.abs() - 1u32;
    m.bits()
}

/// Smallest integer `e` with `2^e ≥ num/den`, for positive `num` and `den`.
pub fn ceil_log2_ratio(num: &BigInt, den: &BigInt) -> i64 {
    debug_assert!(num.is_positive() && den.is_positive());
    // 2^(bn-1) <= num < 2^bn and likewise for den, so the answer is within
    // one of bn - bd; settle it exactly.
    let guess = num.bits() as i64 - den.bits() as i64;
    for e in [guess - 1, guess, guess + 1] {
        if pow2_ge(e, num, den) {
            return e;
        }
    }
    guess + 2
}

/// Largest integer `e` with `2^e ≤ num/den`, for positive `num` and `den`.
pub fn floor_log2_ratio(num: &BigInt, den: &BigInt) -> i64 {
    debug_assert!(num.is_positive() && den.is_positive());
    let guess = num.bits() as i64 - den.bits() as i64;
    for e in [guess + 1, guess, guess - 1] {
        if pow2_le(e, num, den) {
            return e;
        }
    }
    guess - 2
}

fn pow2_ge(e: i64, num: &BigInt, den: &BigInt) -> bool {
    if e >= 0 {
        (den << e as usize) >= *num
    } else {
        *den >= (num << (-e) as usize)
    }
}

fn pow2_le(e: i64, num: &BigInt, den: &BigInt) -> bool {
    if e >= 0 {
        (den << e as usize) <= *num
    } else {
        *den <= (num << (-e) as usize)
    }
}

/// `⌈lg x⌉` for a positive rational.
pub fn ceil_log2_rational(x: &BigRational) -> i64 {
    ceil_log2_ratio(x.numer(), x.denom())
}

pub fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Scale exponent `k` such that `x·2^k` has about `bits` significant bits.
fn scale_for(num: &BigInt, den: &BigInt, bits: u64) -> i64 {
    bits as i64 - (num.bits() as i64 - den.bits() as i64)
}

fn div_ceil_pos(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_ceil(b)
}

/// Smallest dyadic with about `bits` significant bits that is `≥ num/den`.
/// `den` must be positive.
pub fn round_up_ratio(num: &BigInt, den: &BigInt, bits: u64) -> BigRational {
    if num.is_zero() {
        return BigRational::zero();
    }
    let k = scale_for(&num.abs(), den, bits);
    let (n, d) = shift_pair(num, den, k);
    let q = div_ceil_pos(&n, &d);
    from_scaled(q, k)
}

/// Largest dyadic with about `bits` significant bits that is `≤ num/den`.
pub fn round_down_ratio(num: &BigInt, den: &BigInt, bits: u64) -> BigRational {
    if num.is_zero() {
        return BigRational::zero();
    }
    let k = scale_for(&num.abs(), den, bits);
    let (n, d) = shift_pair(num, den, k);
    let q = n.div_floor(&d);
    from_scaled(q, k)
}

pub fn round_up(x: &BigRational, bits: u64) -> BigRational {
    round_up_ratio(x.numer(), x.denom(), bits)
}

pub fn round_down(x: &BigRational, bits: u64) -> BigRational {
    round_down_ratio(x.numer(), x.denom(), bits)
}

fn shift_pair(num: &BigInt, den: &BigInt, k: i64) -> (BigInt, BigInt) {
    if k >= 0 {
        (num << k as usize, den.clone())
    } else {
        (num.clone(), den << (-k) as usize)
    }
}

fn from_scaled(q: BigInt, k: i64) -> BigRational {
    if k >= 0 {
        BigRational::new(q, BigInt::one() << k as usize)
    } else {
        BigRational::from_integer(q << (-k) as usize)
    }
}

/// Upper bound on `sqrt(re² + im²)/den` as a dyadic with about `bits`
/// significant bits. Exact when one component vanishes.
pub fn modulus_upper_parts(re: &BigInt, im: &BigInt, den: &BigInt, bits: u64) -> BigRational {
    if im.is_zero() {
        return round_up_ratio(&re.abs(), den, bits.max(64));
    }
    if re.is_zero() {
        return round_up_ratio(&im.abs(), den, bits.max(64));
    }
    let (r, k) = sqrt_scaled(re, im, den, bits, true);
    from_scaled(r, k)
}

/// Lower bound on `sqrt(re² + im²)/den`, dyadic with about `bits` bits.
pub fn modulus_lower_parts(re: &BigInt, im: &BigInt, den: &BigInt, bits: u64) -> BigRational {
    if im.is_zero() {
        return round_down_ratio(&re.abs(), den, bits.max(64));
    }
    if re.is_zero() {
        return round_down_ratio(&im.abs(), den, bits.max(64));
    }
    let (r, k) = sqrt_scaled(re, im, den, bits, false);
    from_scaled(r, k)
}

// Returns (r, k) with r/2^k bounding sqrt(re²+im²)/den from the requested side.
fn sqrt_scaled(re: &BigInt, im: &BigInt, den: &BigInt, bits: u64, up: bool) -> (BigInt, i64) {
    let sq = re * re + im * im;
    let den2 = den * den;
    // sqrt(sq/den2)·2^k, so the radicand is sq·4^k/den2.
    let mag = (sq.bits() as i64 - den2.bits() as i64) / 2;
    let k = bits as i64 + 2 - mag;
    let (n, d) = shift_pair(&sq, &den2, 2 * k);
    if up {
        let u = div_ceil_pos(&n, &d);
        let mut r = u.sqrt();
        if &r * &r < u {
            r += 1u32;
        }
        (r, k)
    } else {
        let u = n.div_floor(&d);
        (u.sqrt(), k)
    }
}

pub fn rational_abs_sum(a: &BigRational, b: &BigRational) -> BigRational {
    a.abs() + b.abs()
}

/// `x^k` rounded upward after every multiplication, for non-negative `x`.
pub fn pow_upper(x: &BigRational, k: u64, bits: u64) -> BigRational {
    let mut result = BigRational::one();
    let mut base = round_up(x, bits);
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = round_up(&(&result * &base), bits);
        }
        e >>= 1;
        if e > 0 {
            base = round_up(&(&base * &base), bits);
        }
    }
    result
}
