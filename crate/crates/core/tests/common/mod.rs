#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use holoprec::arith::{DyadicComplex, GaussianInt, GaussianRational};
use holoprec::catalog;
use holoprec::ode::{radius_lower_bound, EvalPoint, Poly, Problem, ThetaOde};

#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub problem: Problem,
}

impl Instance {
    pub fn point(&self) -> EvalPoint {
        EvalPoint::new(&self.problem.point)
    }
}

pub fn catalog_instances() -> Vec<Instance> {
    catalog::all()
        .into_iter()
        .map(|e| Instance { name: e.name.to_string(), problem: e.problem() })
        .collect()
}

fn small_int(rng: &mut ChaCha8Rng, zero_weight: f64) -> i64 {
    if rng.gen_bool(zero_weight) {
        0
    } else {
        rng.gen_range(-255..=255)
    }
}

fn random_poly(rng: &mut ChaCha8Rng, deg: usize, gaussian: bool) -> Poly {
    Poly::new(
        (0..=deg)
            .map(|_| {
                let im = if gaussian { small_int(rng, 0.6) } else { 0 };
                GaussianInt::new(small_int(rng, 0.3), im)
            })
            .collect(),
    )
}

fn random_init(rng: &mut ChaCha8Rng, gaussian: bool) -> GaussianRational {
    let re = BigRational::new(rng.gen_range(-20..=20).into(), rng.gen_range(1..=8).into());
    let im = if gaussian && rng.gen_bool(0.5) {
        BigRational::new(rng.gen_range(-20..=20).into(), rng.gen_range(1..=8).into())
    } else {
        BigRational::zero()
    };
    GaussianRational::from_parts(&re, &im)
}

/// Largest `2^-k` not exceeding `x`.
fn dyadic_below(x: &BigRational) -> u32 {
    let mut k = 0;
    while BigRational::new(BigInt::one(), BigInt::one() << k) > *x {
        k += 1;
    }
    k
}

/// Random operators with `r ≤ 3`, `1 ≤ s ≤ 4`, coefficients of at most 8 bits,
/// and `|ζ|` at most half the radius lower bound (at most 1/8 when entire).
pub fn random_corpus(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let idx = out.len();
        let gaussian = idx % 4 == 3;
        let r = rng.gen_range(1..=3usize);
        let s = rng.gen_range(1..=4usize);
        let mut coeffs: Vec<Poly> = (0..=r).map(|_| random_poly(&mut rng, s, gaussian)).collect();
        if coeffs[r].coeff(0).is_zero() {
            let c = rng.gen_range(1..=255i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
            let mut cs = coeffs[r].coeffs().to_vec();
            cs.resize(s + 1, GaussianInt::zero());
            cs[0] = GaussianInt::from_int(c);
            coeffs[r] = Poly::new(cs);
        }
        let Ok(ode) = ThetaOde::new(coeffs) else { continue };
        let rec = ode.recurrence();
        if (0..=600).any(|n| rec.b0_at(n).is_err()) {
            continue;
        }
        let half_bound = match radius_lower_bound(&ode) {
            Some(b) => b / BigInt::from(2),
            None => BigRational::new(1.into(), 8.into()),
        };
        let k = dyadic_below(&half_bound) as usize;
        let unit = BigRational::new(BigInt::one(), BigInt::one() << (k + 2));
        let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { BigInt::one() } else { -BigInt::one() };
        let point = match rng.gen_range(0..3) {
            0 => GaussianRational::from_rational(&(&unit * BigInt::from(4) * sign(&mut rng))),
            1 => GaussianRational::from_rational(&(&unit * BigInt::from(3) * sign(&mut rng))),
            _ => GaussianRational::from_parts(
                &(&unit * BigInt::from(2) * sign(&mut rng)),
                &(&unit * BigInt::from(2) * sign(&mut rng)),
            ),
        };
        let inits = (0..r).map(|_| random_init(&mut rng, gaussian)).collect();
        let problem = Problem { ode, inits, point };
        out.push(Instance { name: format!("random-{idx}"), problem });
    }
    out
}

/// Series coefficients `y_0..y_{n-1}` by substituting `Σ y_m z^m` into the
/// operator: the coefficient of `z^m` gives
/// `Σ_j (Σ_k a_{k,j} (m-j)^k) y_{m-j} = 0`, solved for `y_m` once `m ≥ r`.
pub fn series_terms(ode: &ThetaOde, inits: &[GaussianRational], n: usize) -> Vec<GaussianRational> {
    let a = ode.coeffs();
    let r = ode.order();
    let mut y: Vec<GaussianRational> = Vec::with_capacity(n);
    let mut fact = BigInt::one();
    for (k, c) in inits.iter().enumerate().take(n) {
        if k > 0 {
            fact *= k;
        }
        y.push(GaussianRational::new(c.num.clone(), &c.den * &fact));
    }
    let coef = |j: usize, m: i64| -> GaussianInt {
        let mut acc = GaussianInt::zero();
        let mut pw = BigInt::one();
        for ak in a {
            let c = ak.coeff(j);
            if !c.is_zero() {
                acc = &acc + &c.scale(&pw);
            }
            pw *= m;
        }
        acc
    };
    for m in r..n {
        let lead = GaussianRational::from(coef(0, m as i64));
        let mut rhs = GaussianRational::zero();
        for j in 1..=m {
            let c = coef(j, (m - j) as i64);
            if !c.is_zero() {
                rhs = &rhs - &(&GaussianRational::from(c) * &y[m - j]);
            }
        }
        y.push(rhs.checked_div(&lead).expect("nonzero leading recurrence coefficient").normalize());
    }
    y
}

/// `S_0, S_1, …, S_n` for the terms `y_k ζ^k`.
pub fn partial_sums(ode: &ThetaOde, inits: &[GaussianRational], zeta: &GaussianRational, n: usize) -> Vec<GaussianRational> {
    let y = series_terms(ode, inits, n);
    let mut out = vec![GaussianRational::zero()];
    let mut pw = GaussianRational::one();
    for yk in &y {
        let next = &out[out.len() - 1] + &(yk * &pw);
        out.push(next.normalize());
        pw = (&pw * zeta).normalize();
    }
    out
}

/// `|a − b|² ≤ 4^-e`.
pub fn close(a: &GaussianRational, b: &GaussianRational, e: i64) -> bool {
    let d = a - b;
    d.modulus_sqr() <= holoprec::arith::pow2(-2 * e)
}

pub fn dyadic_close(a: &DyadicComplex, b: &GaussianRational, e: i64) -> bool {
    close(&a.to_gaussian_rational(), b, e)
}

/// Exact largest column sum of `|Re| + |Im|`, for a matrix given by rows.
pub fn l1_norm(rows: &[Vec<GaussianRational>]) -> BigRational {
    let cols = rows.first().map_or(0, Vec::len);
    (0..cols)
        .map(|c| rows.iter().map(|r| r[c].re().abs() + r[c].im().abs()).fold(BigRational::zero(), |a, b| a + b))
        .max()
        .unwrap_or_else(BigRational::zero)
}
