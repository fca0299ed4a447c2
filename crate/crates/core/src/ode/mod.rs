//! Differential operators in θ-form, the recurrence on Taylor coefficients
//! they induce, and the step matrices that advance the recurrence together
//! with the partial sum.
//!
//! Operators are written `Σ_k a_k(z) θ^k` with `θ = z·d/dz` and
//! `a_k ∈ ℤ[i][z]`. The Taylor coefficients of a solution satisfy
//! `Σ_j b_j(n) y_{n+r-j} = 0` with `b_j(n) = Σ_k a_{k,j} (n+r-j)^k`.

mod json;
mod poly;

pub use json::{OdeForm, Problem, ProblemFile};
pub use poly::Poly;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arith::{GaussianInt, GaussianRational};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Precision used for the low-precision modulus bounds in this module.
const BOUND_BITS: u64 = 64;

/// `Σ_k a_k(z) θ^k`, with `0` an ordinary point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaOde {
    coeffs: Vec<Poly>,
}

impl ThetaOde {
    /// Validates `r ≥ 1` and `a_r(0) ≠ 0`.
    pub fn new(coeffs: Vec<Poly>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidOperator("order must be at least 1".into()));
        }
        let lead = coeffs.last().unwrap();
        if lead.is_zero() || lead.coeff(0).is_zero() {
            return Err(Error::NotOrdinary);
        }
        Ok(Self { coeffs })
    }

    /// Converts `Σ_k c_k(z) (d/dz)^k` to θ-form by multiplying through by
    /// `z^r` and expanding `z^k (d/dz)^k = θ(θ-1)···(θ-k+1)`.
    pub fn from_dz(c: Vec<Poly>) -> Result<Self> {
        if c.len() < 2 {
            return Err(Error::InvalidOperator("order must be at least 1".into()));
        }
        let r = c.len() - 1;
        if c[r].coeff(0).is_zero() {
            return Err(Error::NotOrdinary);
        }
        let stirling = stirling_first(r);
        let mut a = vec![Poly::zero(); r + 1];
        for (k, ck) in c.iter().enumerate() {
            let shifted = ck.shift(r - k);
            for (j, aj) in a.iter_mut().enumerate().take(k + 1) {
                let s = &stirling[k][j];
                if s.is_zero() {
                    continue;
                }
                *aj = aj.add(&shifted.scale(&GaussianInt::from_int(s.clone())));
            }
        }
        Self::new(a)
    }

    pub fn coeffs(&self) -> &[Poly] {
        &self.coeffs
    }

    /// `r`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `s = max_k deg a_k`.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().filter_map(Poly::degree).max().unwrap_or(0)
    }

    /// `s̃ = max(s, r)`, the dimension of the recurrence state.
    pub fn padded_degree(&self) -> usize {
        self.degree().max(self.order())
    }

    pub fn leading(&self) -> &Poly {
        self.coeffs.last().unwrap()
    }

    /// `h₁`: largest bit size among all coefficients.
    pub fn h1(&self) -> u64 {
        self.coeffs.iter().map(Poly::max_coeff_bit_size).max().unwrap_or(0)
    }

    pub fn recurrence(&self) -> Recurrence {
        derive_recurrence(self)
    }
}

/// Signed Stirling numbers of the first kind `s(k, j)` for `0 ≤ j ≤ k ≤ r`,
/// so that `x(x-1)···(x-k+1) = Σ_j s(k, j) x^j`.
fn stirling_first(r: usize) -> Vec<Vec<BigInt>> {
    let mut s = vec![vec![BigInt::zero(); r + 1]; r + 1];
    s[0][0] = BigInt::one();
    for k in 0..r {
        for j in 0..=k + 1 {
            let from_prev = if j > 0 { s[k][j - 1].clone() } else { BigInt::zero() };
            let v = from_prev - BigInt::from(k) * &s[k][j];
            s[k + 1][j] = v;
        }
    }
    s
}

/// `Σ_j b_j(n) y_{n+r-j} = 0` for `0 ≤ j ≤ s̃`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recurrence {
    b: Vec<Poly>,
    order: usize,
    h1: u64,
}

impl Recurrence {
    pub fn coeffs(&self) -> &[Poly] {
        &self.b
    }

    pub fn b(&self, j: usize) -> &Poly {
        &self.b[j]
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `h₁` of the operator this recurrence came from.
    pub fn h1(&self) -> u64 {
        self.h1
    }

    /// `s̃`.
    pub fn width(&self) -> usize {
        self.b.len() - 1
    }

    /// Dimension of the step matrices, `s̃ + 1`.
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Coefficient of `n^r` in `b_j`, i.e. `a_{r,j}`.
    pub fn leading_coeff(&self, j: usize) -> GaussianInt {
        self.b[j].coeff(self.order)
    }

    /// `b_0(n)`, rejecting zero.
    pub fn b0_at(&self, n: u64) -> Result<GaussianInt> {
        let v = self.b[0].eval_u64(n);
        if v.is_zero() {
            return Err(Error::SingularRecurrence { n });
        }
        Ok(v)
    }
}

/// `b_j(n) = Σ_{k=0}^r a_{k,j} (n + r - j)^k`.
pub fn derive_recurrence(ode: &ThetaOde) -> Recurrence {
    let r = ode.order();
    let width = ode.padded_degree();
    let b = (0..=width)
        .map(|j| {
            let shift = BigInt::from(r as i64 - j as i64);
            let base = Poly::new(vec![GaussianInt::from_int(shift), GaussianInt::one()]);
            let mut power = Poly::from_ints(&[1]);
            let mut acc = Poly::zero();
            for ak in ode.coeffs() {
                let c = ak.coeff(j);
                if !c.is_zero() {
                    acc = acc.add(&power.scale(&c));
                }
                power = power.mul(&base);
            }
            acc
        })
        .collect();
    Recurrence { b, order: r, h1: ode.h1() }
}

/// Evaluation point `ζ = ζ̂/ζ̌` in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPoint {
    pub zeta: GaussianRational,
    pub num: GaussianInt,
    pub den: BigInt,
}

impl EvalPoint {
    pub fn new(zeta: &GaussianRational) -> Self {
        let z = zeta.normalize();
        Self { num: z.num.clone(), den: z.den.clone(), zeta: z }
    }

    /// `h₂`.
    pub fn h2(&self) -> u64 {
        self.zeta.bit_size()
    }

    pub fn modulus_upper(&self) -> BigRational {
        self.zeta.modulus_upper(BOUND_BITS)
    }
}

impl std::str::FromStr for EvalPoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(Self::new(&s.parse()?))
    }
}

/// `(y_{r-s̃}, …, y_{r-1}, 0)` with `y_k = ℓ_k / k!` and zeros for `k < 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitialVector {
    pub v: Vec<GaussianRational>,
}

impl InitialVector {
    pub fn new(ode: &ThetaOde, inits: &[GaussianRational]) -> Result<Self> {
        let r = ode.order();
        if inits.len() != r {
            return Err(Error::Arity { expected: r, got: inits.len() });
        }
        let width = ode.padded_degree();
        let mut v = vec![GaussianRational::zero(); width + 1];
        let mut fact = BigInt::one();
        for (k, l) in inits.iter().enumerate() {
            if k > 0 {
                fact *= k;
            }
            let yk = GaussianRational::new(l.num.clone(), &l.den * &fact).normalize();
            v[width - r + k] = yk;
        }
        Ok(Self { v })
    }

    /// The state part, without the trailing partial-sum slot.
    pub fn state(&self) -> &[GaussianRational] {
        &self.v[..self.v.len() - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.v.iter().all(GaussianRational::is_zero)
    }

    /// Exact `Σ |re| + |im|`, an upper bound on the vector 1-norm.
    pub fn norm1_upper(&self) -> BigRational {
        self.v.iter().map(GaussianRational::abs_sum).fold(BigRational::zero(), |a, b| a + b)
    }
}

/// `B(n) = [[ζC(n), 0], [R, 1]]`.
pub fn step_matrix(rec: &Recurrence, pt: &EvalPoint, n: u64) -> Result<Matrix<GaussianRational>> {
    let hat = hat_step_matrix(rec, pt, n)?;
    let corner = GaussianRational::from(hat.get(rec.width(), rec.width()).clone());
    hat.try_map(|x| {
        GaussianRational::from(x.clone())
            .checked_div(&corner)
            .map(|q| q.normalize())
            .ok_or(Error::SingularRecurrence { n })
    })
}

/// `B̂(n) = b_0(n)·ζ̌·B(n)`, a matrix over ℤ[i].
pub fn hat_step_matrix(rec: &Recurrence, pt: &EvalPoint, n: u64) -> Result<Matrix<GaussianInt>> {
    let w = rec.width();
    let b0 = rec.b0_at(n)?;
    let mut m = Matrix::zeros(w + 1);
    // ζC(n)·b_0ζ̌: superdiagonal ζ̂·b_0, last state row -ζ̂·b_{s̃-c}.
    let zb0 = pt.num.mul_ref(&b0);
    for i in 0..w.saturating_sub(1) {
        m.set(i, i + 1, zb0.clone());
    }
    for c in 0..w {
        let bj = rec.b(w - c).eval_u64(n);
        if !bj.is_zero() {
            m.set(w - 1, c, -pt.num.mul_ref(&bj));
        }
    }
    let corner = b0.scale(&pt.den);
    m.set(w, w - rec.order(), corner.clone());
    m.set(w, w, corner);
    Ok(m)
}

/// Lower bound on `ρ = min{|z| : a_r(z) = 0}`, `None` meaning `ρ = ∞`.
///
/// Uses `|z| ≥ |c_0| / (|c_0| + max_{j≥1} |c_j|)` for any root of
/// `Σ c_j z^j`.
pub fn radius_lower_bound(ode: &ThetaOde) -> Option<BigRational> {
    let lead = ode.leading();
    if lead.degree() == Some(0) {
        return None;
    }
    let c0_lo = lead.coeff(0).modulus_lower(BOUND_BITS);
    let c0_up = lead.coeff(0).modulus_upper(BOUND_BITS);
    let rest = lead.coeffs()[1..]
        .iter()
        .map(|c| c.modulus_upper(BOUND_BITS))
        .max()
        .unwrap_or_else(BigRational::zero);
    Some(c0_lo / (c0_up + rest))
}

/// Whether `|ζ|` is certified strictly inside the radius lower bound.
pub fn point_in_disk(ode: &ThetaOde, pt: &EvalPoint) -> bool {
    match radius_lower_bound(ode) {
        None => true,
        Some(l) => pt.modulus_upper() < l,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn q(n: i64, d: i64) -> GaussianRational {
        GaussianRational::new(GaussianInt::from_int(n), d.into())
    }

    fn rq(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn theta_from_dz_examples() {
        // y' - y = 0
        let ode = ThetaOde::from_dz(vec![Poly::from_ints(&[-1]), Poly::from_ints(&[1])]).unwrap();
        assert_eq!(ode.coeffs(), &[Poly::from_ints(&[0, -1]), Poly::from_ints(&[1])]);
        // (1+z²)y'' + 2z y' = 0
        let ode = ThetaOde::from_dz(vec![
            Poly::zero(),
            Poly::from_ints(&[0, 2]),
            Poly::from_ints(&[1, 0, 1]),
        ])
        .unwrap();
        assert_eq!(
            ode.coeffs(),
            &[Poly::zero(), Poly::from_ints(&[-1, 0, 1]), Poly::from_ints(&[1, 0, 1])]
        );
        // y' = 0
        let ode = ThetaOde::from_dz(vec![Poly::zero(), Poly::from_ints(&[1])]).unwrap();
        assert_eq!(ode.coeffs(), &[Poly::zero(), Poly::from_ints(&[1])]);
    }

    #[test]
    fn singular_leading_coefficient_rejected() {
        let dz = ThetaOde::from_dz(vec![Poly::from_ints(&[1]), Poly::from_ints(&[0, 1])]);
        assert!(matches!(dz, Err(Error::NotOrdinary)));
        let th = ThetaOde::new(vec![Poly::from_ints(&[1]), Poly::from_ints(&[0, 1])]);
        assert!(matches!(th, Err(Error::NotOrdinary)));
        assert!(ThetaOde::new(vec![Poly::from_ints(&[1])]).is_err());
    }

    #[test]
    fn recurrences_of_catalog_operators() {
        let exp = catalog::get("exp").unwrap().ode.recurrence();
        assert_eq!(exp.coeffs(), &[Poly::from_ints(&[1, 1]), Poly::from_ints(&[-1])]);

        let atan = catalog::get("arctan").unwrap().ode.recurrence();
        assert_eq!(
            atan.coeffs(),
            &[Poly::from_ints(&[2, 3, 1]), Poly::zero(), Poly::from_ints(&[0, 1, 1])]
        );

        let ln = catalog::get("ln2").unwrap().ode;
        assert_eq!(ln.degree(), 1);
        assert_eq!(ln.padded_degree(), 2);
        let rec = ln.recurrence();
        assert_eq!(
            rec.coeffs(),
            &[Poly::from_ints(&[2, 3, 1]), Poly::from_ints(&[-1, -2, -1]), Poly::zero()]
        );
    }

    #[test]
    fn exp_recurrence_generates_inverse_factorials() {
        let rec = catalog::get("exp").unwrap().ode.recurrence();
        let mut y = BigRational::one();
        let mut fact = BigInt::one();
        for n in 0..20u64 {
            assert_eq!(y, BigRational::new(BigInt::one(), fact.clone()));
            // (n+1) y_{n+1} = y_n
            let b0 = rec.b(0).eval_u64(n).re;
            let b1 = rec.b(1).eval_u64(n).re;
            y = -(&y * BigRational::from_integer(b1)) / BigRational::from_integer(b0);
            fact *= n + 1;
        }
    }

    #[test]
    fn step_matrices_for_exp() {
        let rec = catalog::get("exp").unwrap().ode.recurrence();
        let one = EvalPoint::new(&GaussianRational::one());
        for n in 0..5u64 {
            let b = step_matrix(&rec, &one, n).unwrap();
            let expect = Matrix::from_rows(vec![
                vec![q(1, n as i64 + 1), GaussianRational::zero()],
                vec![q(1, 1), q(1, 1)],
            ]);
            assert_eq!(b, expect);
        }
        let half: EvalPoint = "1/2".parse().unwrap();
        let hat = hat_step_matrix(&rec, &half, 3).unwrap();
        assert_eq!(hat, crate::matrix::int_matrix(&[&[1, 0], &[8, 8]]));
        let hat0 = hat_step_matrix(&rec, &one, 0).unwrap();
        assert_eq!(hat0, crate::matrix::int_matrix(&[&[1, 0], &[1, 1]]));
    }

    #[test]
    fn geometric_step_matrix() {
        let geo = catalog::get("geometric").unwrap();
        let rec = geo.ode.recurrence();
        let pt = EvalPoint::new(&geo.point);
        for n in [0u64, 7, 100] {
            let b = step_matrix(&rec, &pt, n).unwrap();
            assert_eq!(b, Matrix::from_rows(vec![vec![q(1, 2), q(0, 1)], vec![q(1, 1), q(1, 1)]]));
        }
    }

    #[test]
    fn hat_corner_is_den_times_b0() {
        let rec = catalog::get("arctan").unwrap().ode.recurrence();
        let pt: EvalPoint = "1/3+1/5*i".parse().unwrap();
        for n in 0..10u64 {
            let hat = hat_step_matrix(&rec, &pt, n).unwrap();
            let w = rec.width();
            assert_eq!(hat.get(w, w), &rec.b0_at(n).unwrap().scale(&pt.den));
            let b = step_matrix(&rec, &pt, n).unwrap();
            let corner = GaussianRational::from(hat.get(w, w).clone());
            for i in 0..=w {
                for j in 0..=w {
                    let x = GaussianRational::from(hat.get(i, j).clone()).checked_div(&corner).unwrap();
                    assert_eq!(&x, b.get(i, j));
                }
            }
        }
    }

    #[test]
    fn singular_recurrence_detected() {
        // θ - 3: b_0(n) = n + 1 - 3 vanishes at n = 2.
        let ode = ThetaOde::new(vec![Poly::from_ints(&[-3]), Poly::from_ints(&[1])]).unwrap();
        let rec = ode.recurrence();
        let pt: EvalPoint = "1/2".parse().unwrap();
        assert!(hat_step_matrix(&rec, &pt, 1).is_ok());
        assert!(matches!(hat_step_matrix(&rec, &pt, 2), Err(Error::SingularRecurrence { n: 2 })));
    }

    #[test]
    fn initial_vectors() {
        let exp = catalog::get("exp").unwrap();
        let v = InitialVector::new(&exp.ode, &exp.inits).unwrap();
        assert_eq!(v.v, vec![q(1, 1), q(0, 1)]);

        let atan = catalog::get("arctan").unwrap();
        let v = InitialVector::new(&atan.ode, &atan.inits).unwrap();
        assert_eq!(v.v, vec![q(0, 1), q(1, 1), q(0, 1)]);

        let zero = InitialVector::new(&atan.ode, &[q(0, 1), q(0, 1)]).unwrap();
        assert!(zero.is_zero());
        assert!(matches!(
            InitialVector::new(&atan.ode, &[q(1, 1)]),
            Err(Error::Arity { expected: 2, got: 1 })
        ));

        // y(0) = 1, y'(0) = 2, y''(0) = 6 gives y_2 = 3.
        let ode = ThetaOde::new(vec![Poly::zero(), Poly::zero(), Poly::zero(), Poly::from_ints(&[1])]).unwrap();
        let v = InitialVector::new(&ode, &[q(1, 1), q(2, 1), q(6, 1)]).unwrap();
        assert_eq!(v.v, vec![q(1, 1), q(2, 1), q(3, 1), q(0, 1)]);
    }

    #[test]
    fn radius_bounds() {
        let mk = |lead: &[i64]| ThetaOde::new(vec![Poly::zero(), Poly::from_ints(lead)]).unwrap();
        assert_eq!(radius_lower_bound(&mk(&[1])), None);
        assert_eq!(radius_lower_bound(&mk(&[1, 0, 1])), Some(rq(1, 2)));
        assert_eq!(radius_lower_bound(&mk(&[2, -1])), Some(rq(2, 3)));
    }

    #[test]
    fn state_transition_identity() {
        // B(n)·(u_n, S_n) = (u_{n+1}, S_{n+1}) for the arctan series at 1/2.
        let atan = catalog::get("arctan").unwrap();
        let rec = atan.ode.recurrence();
        let pt = EvalPoint::new(&atan.point);
        let coef = |n: usize| -> GaussianRational {
            if n % 2 == 0 {
                return q(0, 1);
            }
            let sign = if (n / 2) % 2 == 0 { 1 } else { -1 };
            q(sign, n as i64)
        };
        let zpow = |n: usize| q(1, 1 << n);
        let mut state = vec![coef(0), coef(1), q(0, 1)];
        let mut sum = q(0, 1);
        for n in 0..30usize {
            let b = step_matrix(&rec, &pt, n as u64).unwrap();
            let next = b.mul_vec(&state);
            sum = &sum + &(&coef(n) * &zpow(n));
            let expect = vec![&coef(n + 1) * &zpow(n + 1), &coef(n + 2) * &zpow(n + 1), sum.clone()];
            assert_eq!(next, expect, "n = {n}");
            state = next;
        }
    }
}
