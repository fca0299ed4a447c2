//! Certified truncation orders.
//!
//! For `n ≥ n₁` the state `u_n = (y_{n+r-s̃}ζ^n, …, y_{n+r-1}ζ^n)` evolves as
//! `u_{n+1} = ζC(n)u_n`. Writing `C(n) = C_∞ + e_last·E(n)` and working in a
//! basis `Π̃` adapted to `C_∞`, the transformed step has norm at most
//! `q = ‖Π̃⁻¹ζC_∞Π̃‖₁ + |ζ|·κ_c·δ(n₁)` where `δ(n₁)` bounds `E(n)` for all
//! `n ≥ n₁`. If `q < 1` then `Σ_{n≥N} |y_n ζ^n| ≤ h·q^(N-n₁)/(1-q)` with
//! `h = ‖Π̃‖₁·‖Π̃⁻¹u_{n₁}‖₁`.
//!
//! `Π̃` is built from floating-point roots of the characteristic polynomial
//! of `C_∞` (a confluent Vandermonde matrix scaled by `diag(1, λ, λ², …)`).
//! Those roots are only a hint: every inequality is re-checked exactly.
//! Moduli are bounded by `|Re| + |Im|` throughout.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{ceil_log2_rational, pow2, pow_upper, round_down, round_up, GaussianRational};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ode::{EvalPoint, InitialVector, Poly, Recurrence};
use crate::product_tree::{bin_split, SplitOptions};
use crate::trunc::{norm_1, ratio_abs_sum, L1Entry, StepNorm};

/// Upper bound on `√2`, used when complex moduli are read off `|Re| + |Im|`.
fn sqrt2_upper() -> BigRational {
    BigRational::new(99.into(), 70.into())
}

/// Largest `n₁` tried once a certificate is already available.
const N1_SOFT_CAP: u64 = 1 << 12;
/// Largest `n₁` tried at all.
const N1_HARD_CAP: u64 = 1 << 20;
/// Significant bits of the rounded entries of `Π̃`.
const TRANSFORM_BITS: u64 = 30;
const CERT_BITS: u64 = 64;
const POW_BITS: u64 = 128;

fn vec_abs_sum(v: &[GaussianRational]) -> BigRational {
    v.iter().map(L1Entry::abs_sum).fold(BigRational::zero(), |a, b| a + b)
}

/// `ζC_∞`, the limit of the state block of `B(n)`.
pub fn zeta_c_infinity(rec: &Recurrence, pt: &EvalPoint) -> Matrix<GaussianRational> {
    let w = rec.width();
    let lead = GaussianRational::from(rec.leading_coeff(0));
    let mut c = Matrix::zeros(w);
    for i in 0..w.saturating_sub(1) {
        c.set(i, i + 1, pt.zeta.clone());
    }
    for col in 0..w {
        let a = GaussianRational::from(-rec.leading_coeff(w - col));
        c.set(w - 1, col, (&a.checked_div(&lead).unwrap() * &pt.zeta).normalize());
    }
    c
}

fn column_abs_sum(m: &Matrix<GaussianRational>, j: usize) -> BigRational {
    m.column(j).map(L1Entry::abs_sum).fold(BigRational::zero(), |a, b| a + b)
}

/// The polynomials `g_j = b_j·a_{r,0} − a_{r,j}·b_0`, of degree below `r`.
fn transient_numerators(rec: &Recurrence) -> Vec<Poly> {
    let a0 = rec.leading_coeff(0);
    (1..rec.dim())
        .map(|j| rec.b(j).scale(&a0).add(&rec.b(0).scale(&-rec.leading_coeff(j))))
        .collect()
}

/// `max_j |E_j(n)|` for one `n`, exactly.
fn transient_at(rec: &Recurrence, g: &[Poly], n: u64) -> Result<BigRational> {
    let den = rec.b0_at(n)?.mul_ref(&rec.leading_coeff(0));
    Ok(g.iter().map(|gj| ratio_abs_sum(&gj.eval_u64(n), &den)).max().unwrap_or_else(BigRational::zero))
}

/// `δ` with `|E_j(n)| ≤ δ` for every `j` and every `n ≥ n₁`, or `None` when
/// `n₁` is too small for the bound (or `b_0` may vanish beyond `n₁`).
pub fn transient_bound(rec: &Recurrence, n1: u64) -> Option<BigRational> {
    if n1 == 0 {
        return None;
    }
    let r = rec.order();
    let g = transient_numerators(rec);
    let b0 = rec.b(0);
    let mut complex = !rec.leading_coeff(0).is_real() || b0.coeffs().iter().any(|c| !c.is_real());
    let n = BigRational::from_integer(BigInt::from(n1));
    let inv_pows: Vec<BigRational> = (0..=r).map(|k| num_traits::pow::pow(n.recip(), k)).collect();
    // |b_0(n)|/n^r ≥ |β_r| − Σ_{k<r} |β_k| n^(k-r), nondecreasing in n.
    let beta_r = b0.coeff(r).modulus_lower(64);
    let mut den = beta_r;
    for k in 0..r {
        den -= b0.coeff(k).abs_sum() * &inv_pows[r - k];
    }
    if !den.is_positive() {
        return None;
    }
    den *= rec.leading_coeff(0).modulus_lower(64);
    let mut worst = BigRational::zero();
    for gj in &g {
        complex |= gj.coeffs().iter().any(|c| !c.is_real());
        if gj.degree().is_some_and(|d| d >= r) {
            return None;
        }
        let mut num = BigRational::zero();
        for (k, c) in gj.coeffs().iter().enumerate() {
            num += c.abs_sum() * &inv_pows[r - k];
        }
        worst = worst.max(num);
    }
    let delta = worst / den;
    Some(if complex { delta * sqrt2_upper() } else { delta })
}

/// A change of basis `Π̃` for the state block together with the constants
/// needed to bound transformed step matrices.
#[derive(Clone, Debug)]
pub struct NormTransform {
    pub pi: Matrix<GaussianRational>,
    pub pi_inv: Matrix<GaussianRational>,
    pub lambda: Option<BigRational>,
    /// `‖Π̃⁻¹ζC_∞Π̃‖₁`.
    pub q_inf: BigRational,
    /// `‖Π̃⁻¹ e_last‖₁·‖Π̃‖₁`.
    pub kappa_c: BigRational,
    /// Weight of the partial-sum coordinate in the full transform `diag(Π̃, t)`.
    pub t: BigRational,
    r_pi: BigRational,
    lg_kappa: u64,
    zeta_abs: BigRational,
    g: Vec<Poly>,
}

impl NormTransform {
    /// `None` if `pi` is singular or has the wrong size.
    pub fn new(rec: &Recurrence, pt: &EvalPoint, pi: Matrix<GaussianRational>, lambda: Option<BigRational>) -> Option<Self> {
        let w = rec.width();
        if pi.dim() != w {
            return None;
        }
        let pi = pi.normalize();
        let pi_inv = pi.inverse()?;
        let a_inf = pi_inv.mul(&zeta_c_infinity(rec, pt)).mul(&pi).normalize();
        let q_inf = norm_1(&a_inf);
        let pi_norm = norm_1(&pi);
        let kappa_c = column_abs_sum(&pi_inv, w - 1) * &pi_norm;
        let r_pi = pi.row(w - rec.order()).iter().map(L1Entry::abs_sum).max().unwrap();
        let t = pow2(ceil_log2_rational(&r_pi) + 16);
        let kappa = pi_norm.max(t.clone()) * norm_1(&pi_inv).max(t.recip());
        let lg_kappa = ceil_log2_rational(&kappa).max(0) as u64;
        Some(Self {
            pi,
            pi_inv,
            lambda,
            q_inf,
            kappa_c,
            t,
            r_pi,
            lg_kappa,
            zeta_abs: pt.zeta.abs_sum(),
            g: transient_numerators(rec),
        })
    }

    pub fn identity(rec: &Recurrence, pt: &EvalPoint) -> Self {
        Self::new(rec, pt, Matrix::identity(rec.width()), None).unwrap()
    }

    pub fn is_identity(&self) -> bool {
        self.pi == Matrix::identity(self.pi.dim())
    }

    /// Contraction factor valid for all `n ≥ n₁`.
    pub fn q_bound(&self, rec: &Recurrence, n1: u64) -> Option<BigRational> {
        let delta = transient_bound(rec, n1)?;
        Some(&self.q_inf + &self.zeta_abs * &self.kappa_c * delta)
    }

    /// `‖Π̃‖₁·‖Π̃⁻¹u‖₁` for a state vector `u`.
    pub fn headroom(&self, u: &[GaussianRational]) -> BigRational {
        norm_1(&self.pi) * vec_abs_sum(&self.pi_inv.mul_vec(u))
    }

    fn full(&self) -> (Matrix<GaussianRational>, Matrix<GaussianRational>) {
        let w = self.pi.dim();
        let mut t = Matrix::zeros(w + 1);
        let mut ti = Matrix::zeros(w + 1);
        for i in 0..w {
            for j in 0..w {
                t.set(i, j, self.pi.get(i, j).clone());
                ti.set(i, j, self.pi_inv.get(i, j).clone());
            }
        }
        t.set(w, w, GaussianRational::from_rational(&self.t));
        ti.set(w, w, GaussianRational::from_rational(&self.t.recip()));
        (t, ti)
    }
}

impl StepNorm for NormTransform {
    /// `max(1, q_∞ + |ζ|κ_c|E(n)| + t⁻¹‖RΠ̃‖)` bounds `‖T⁻¹B(n)T‖₁` for `T = diag(Π̃, t)`.
    fn step_bound(&self, rec: &Recurrence, _pt: &EvalPoint, n: u64) -> Result<BigRational> {
        let delta = transient_at(rec, &self.g, n)?;
        let state = &self.q_inf + &self.zeta_abs * &self.kappa_c * delta + &self.r_pi / &self.t;
        Ok(state.max(BigRational::one()))
    }

    fn equivalence_log2(&self) -> u64 {
        self.lg_kappa
    }

    fn norm(&self, a: &Matrix<GaussianRational>) -> BigRational {
        let (t, ti) = self.full();
        norm_1(&ti.mul(a).mul(&t))
    }
}

/// Roots of `Σ_k c_k x^k` (`c` lowest degree first, nonzero leading
/// coefficient) by Durand–Kerner iteration followed by Newton polishing.
fn complex_roots(c: &[Complex64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = c[d];
    let monic: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    let eval = |x: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * x + k);
    let deriv = |x: Complex64| {
        (1..=d).rev().fold(Complex64::new(0.0, 0.0), |acc, k| acc * x + monic[k] * k as f64)
    };
    let radius = 1.0 + monic[..d].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32) * radius * 0.5).collect();
    for _ in 0..1000 {
        let mut moved = 0.0f64;
        for i in 0..d {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                den = Complex64::new(1e-12, 0.0);
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    for x in z.iter_mut() {
        for _ in 0..3 {
            let dv = deriv(*x);
            if dv.norm() > 0.0 {
                *x -= eval(*x) / dv;
            }
        }
    }
    z
}

/// Eigenvalues of `C_∞` with multiplicities, nearby roots merged.
fn eigen_clusters(rec: &Recurrence) -> Vec<(Complex64, usize)> {
    let w = rec.width();
    // det(μ − C_∞) ∝ Σ_j a_{r,j} μ^(s̃-j); strip the zero roots first.
    let coeffs: Vec<Complex64> = (0..=w)
        .map(|j| {
            let c = rec.leading_coeff(w - j);
            Complex64::new(c.re.to_f64().unwrap_or(f64::MAX), c.im.to_f64().unwrap_or(f64::MAX))
        })
        .collect();
    let zeros = coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    roots.extend(complex_roots(&coeffs[zeros..]));
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for z in roots {
        let tol = 1e-6 * z.norm().max(1.0);
        match clusters.iter_mut().find(|(c, _)| (c - z).norm() < tol) {
            Some((c, m)) => {
                *c = (*c * *m as f64 + z) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => clusters.push((z, 1)),
        }
    }
    clusters
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn to_rational(x: f64) -> BigRational {
    match BigRational::from_float(x) {
        Some(v) if !v.is_zero() => round_down(&v, TRANSFORM_BITS),
        _ => BigRational::zero(),
    }
}

/// `Γ·diag(1, λ, …, λ^(s̃-1))` rounded to rationals, with `Γ` the confluent
/// Vandermonde matrix of the clustered eigenvalues.
fn scaled_vandermonde(clusters: &[(Complex64, usize)], w: usize, lambda: f64) -> Matrix<GaussianRational> {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(w);
    for &(mu, m) in clusters {
        for k in 0..m {
            cols.push(
                (0..w)
                    .map(|i| if i < k { Complex64::new(0.0, 0.0) } else { mu.powu((i - k) as u32) * binomial(i, k) })
                    .collect(),
            );
        }
    }
    let mut pi = Matrix::zeros(w);
    for (j, col) in cols.iter().enumerate() {
        let scale = lambda.powi(j as i32);
        for (i, x) in col.iter().enumerate() {
            let v = x * scale;
            pi.set(i, j, GaussianRational::from_parts(&to_rational(v.re), &to_rational(v.im)));
        }
    }
    pi
}

/// The identity followed by scaled eigenbases for a few values of `λ`.
pub fn candidate_transforms(rec: &Recurrence, pt: &EvalPoint) -> Vec<NormTransform> {
    let mut out = vec![NormTransform::identity(rec, pt)];
    let w = rec.width();
    let clusters = eigen_clusters(rec);
    if clusters.iter().map(|c| c.1).sum::<usize>() != w || clusters.iter().any(|c| !c.0.is_finite()) {
        return out;
    }
    let spectral = clusters.iter().map(|c| c.0.norm()).fold(0.0, f64::max);
    let z = pt.zeta.modulus_upper(64);
    let z = z.to_f64().unwrap_or(f64::INFINITY);
    let ratio = z * spectral;
    if ratio >= 1.0 {
        return out;
    }
    let lambda0 = (1.0 - ratio) / (2.0 * z.max(1.0));
    for div in [1.0, 4.0, 16.0, 64.0, 256.0] {
        let lambda = lambda0 / div;
        let pi = scaled_vandermonde(&clusters, w, lambda);
        if let Some(t) = NormTransform::new(rec, pt, pi, Some(to_rational(lambda))) {
            out.push(t);
        }
    }
    out
}

/// The candidate with the smallest certified `‖Π̃⁻¹ζC_∞Π̃‖₁`, which must be below 1.
pub fn opt_norm_transform(rec: &Recurrence, pt: &EvalPoint) -> Result<NormTransform> {
    let one = BigRational::one();
    let mut best: Option<NormTransform> = None;
    for t in candidate_transforms(rec, pt) {
        if t.q_inf >= one {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => t.q_inf < b.q_inf || (t.q_inf == b.q_inf && t.lg_kappa < b.lg_kappa),
        };
        if better {
            best = Some(t);
        }
    }
    best.ok_or_else(|| {
        Error::UnsupportedInstance("no candidate basis makes the limiting step matrix contracting".into())
    })
}

/// Self-contained evidence that `|S_∞ − S_N| ≤ 2^-eps_exp`.
///
/// Beyond `n1` the tail is geometric with ratio `q`. When `N < n1` the
/// exact partial sums `S_N` and `S_{n1}` bridge the gap.
#[derive(Clone, Debug, PartialEq)]
pub struct TailCertificate {
    pub n: u64,
    pub n1: u64,
    pub eps_exp: u64,
    pub q: BigRational,
    pub headroom: BigRational,
    /// `None` stands for the identity.
    pub transform: Option<Matrix<GaussianRational>>,
    pub lambda: Option<BigRational>,
}

#[derive(Serialize, Deserialize)]
struct CertificateWire {
    n: u64,
    n1: u64,
    eps_exp: u64,
    q: String,
    headroom: String,
    transform: Option<Vec<Vec<String>>>,
    lambda: Option<String>,
}

fn parse_rational(s: &str) -> Result<BigRational> {
    s.parse().map_err(|_| Error::Parse { what: "rational", input: s.to_string() })
}

impl Serialize for TailCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CertificateWire {
            n: self.n,
            n1: self.n1,
            eps_exp: self.eps_exp,
            q: self.q.to_string(),
            headroom: self.headroom.to_string(),
            transform: self.transform.as_ref().map(|m| {
                (0..m.dim()).map(|i| m.row(i).iter().map(|x| x.to_string()).collect()).collect()
            }),
            lambda: self.lambda.as_ref().map(|l| l.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TailCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = CertificateWire::deserialize(d)?;
        let conv = || -> Result<TailCertificate> {
            let transform = match &w.transform {
                None => None,
                Some(rows) => Some(Matrix::from_rows(
                    rows.iter()
                        .map(|r| r.iter().map(|x| x.parse()).collect::<Result<Vec<GaussianRational>>>())
                        .collect::<Result<Vec<_>>>()?,
                )),
            };
            Ok(TailCertificate {
                n: w.n,
                n1: w.n1,
                eps_exp: w.eps_exp,
                q: parse_rational(&w.q)?,
                headroom: parse_rational(&w.headroom)?,
                transform,
                lambda: w.lambda.as_deref().map(parse_rational).transpose()?,
            })
        };
        conv().map_err(D::Error::custom)
    }
}

/// `u_{n}` exactly, from `u_{from}` (as a full state-plus-sum vector).
fn advance(rec: &Recurrence, pt: &EvalPoint, v: &[GaussianRational], from: u64, to: u64) -> Result<Vec<GaussianRational>> {
    let p = bin_split(rec, pt, from, to, &SplitOptions::default())?.reduce()?;
    Ok(p.mul_vec(v).iter().map(GaussianRational::normalize).collect())
}

/// Smallest `k` with `h·q^k/(1-q) ≤ 2^-e`, checked with upward rounding.
fn steps_needed(h: &BigRational, q: &BigRational, e: u64) -> Option<u64> {
    let eps = pow2(-(e as i64));
    let one = BigRational::one();
    if h.is_zero() {
        return Some(0);
    }
    if q.is_zero() {
        return if h / (&one - q) <= eps { Some(0) } else { Some(1) };
    }
    let scale = h / (&one - q);
    let ok = |k: u64| &scale * pow_upper(q, k, POW_BITS) <= eps;
    let lg = |x: &BigRational| crate::trunc::log2_approx(x);
    let guess = ((lg(&scale) + e as f64) / -lg(q)).ceil();
    let mut k = if guess.is_finite() && guess > 0.0 { guess as u64 } else { 0 };
    if k > 1 << 40 {
        return None;
    }
    while !ok(k) {
        k = k + 1 + k / 64;
        if k > 1 << 40 {
            return None;
        }
    }
    while k > 0 && ok(k - 1) {
        k -= 1;
    }
    Some(k)
}

/// Bisect for a small `N ≤ n1` with `|S_{n1} − S_N| + tail ≤ 2^-e`, given
/// that `N = n1` satisfies it. Useful when a long transient forces a large
/// `n1` although the terms are already negligible well before it.
fn refine_below(
    rec: &Recurrence,
    pt: &EvalPoint,
    v: &[GaussianRational],
    s_n1: &GaussianRational,
    tail: &BigRational,
    n1: u64,
    e: u64,
) -> Result<u64> {
    let slack = pow2(-(e as i64)) - tail;
    let w = rec.width();
    let ok = |n: u64| -> Result<bool> {
        let s = &advance(rec, pt, v, 0, n)?[w];
        Ok((s_n1 - s).modulus_upper(CERT_BITS) <= slack)
    };
    let (mut lo, mut hi) = (0u64, n1);
    if ok(0)? {
        return Ok(0);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest certified `N` found over `n₁ ∈ {1, 2, 4, …}` and the candidate
/// bases; tail tolerance `2^-eps_exp`.
pub fn truncation_order(rec: &Recurrence, pt: &EvalPoint, v: &InitialVector, eps_exp: u64) -> Result<TailCertificate> {
    if v.is_zero() {
        return Ok(TailCertificate {
            n: 0,
            n1: 0,
            eps_exp,
            q: BigRational::zero(),
            headroom: BigRational::zero(),
            transform: None,
            lambda: None,
        });
    }
    let one = BigRational::one();
    let candidates: Vec<NormTransform> =
        candidate_transforms(rec, pt).into_iter().filter(|t| t.q_inf < one).collect();
    if candidates.is_empty() {
        return Err(Error::CertificationFailed(
            "the limiting step matrix is not contracting in any candidate basis".into(),
        ));
    }
    let w = rec.width();
    let mut best: Option<TailCertificate> = None;
    let mut state = v.v.clone();
    let mut at = 0u64;
    let mut n1 = 1u64;
    loop {
        let limit = if best.is_some() { N1_SOFT_CAP } else { N1_HARD_CAP };
        if n1 > limit || best.as_ref().is_some_and(|b| n1 >= b.n) {
            break;
        }
        state = advance(rec, pt, &state, at, n1)?;
        at = n1;
        let mut settled: Option<(BigRational, TailCertificate)> = None;
        for t in &candidates {
            let Some(q) = t.q_bound(rec, n1) else { continue };
            let q = round_up(&q, CERT_BITS);
            if q >= one {
                continue;
            }
            let h = round_up(&t.headroom(&state[..w]), CERT_BITS);
            let Some(k) = steps_needed(&h, &q, eps_exp) else { continue };
            let n = n1 + k;
            let cert = TailCertificate {
                n,
                n1,
                eps_exp,
                q: q.clone(),
                headroom: h.clone(),
                transform: (!t.is_identity()).then(|| t.pi.clone()),
                lambda: t.lambda.clone(),
            };
            if k == 0 {
                let tail = &h / (&one - &q);
                if settled.as_ref().is_none_or(|(s, _)| tail < *s) {
                    settled = Some((tail, cert.clone()));
                }
            }
            if best.as_ref().is_none_or(|b| n < b.n) {
                best = Some(cert);
            }
        }
        if let Some((tail, mut cert)) = settled {
            cert.n = refine_below(rec, pt, &v.v, &state[w], &tail, n1, eps_exp)?;
            if best.as_ref().is_none_or(|b| cert.n < b.n) {
                best = Some(cert);
            }
        }
        n1 *= 2;
    }
    best.ok_or_else(|| Error::CertificationFailed(format!("no contracting tail found for n1 ≤ {N1_HARD_CAP}")))
}

impl TailCertificate {
    /// Re-derive every inequality in exact (or upward-rounded) arithmetic.
    pub fn verify(&self, rec: &Recurrence, pt: &EvalPoint, v: &InitialVector) -> Result<()> {
        let fail = |msg: &str| Err(Error::CertificationFailed(msg.to_string()));
        if v.is_zero() {
            return Ok(());
        }
        if self.n1 == 0 {
            return fail("need n1 ≥ 1");
        }
        let one = BigRational::one();
        if self.q.is_negative() || self.q >= one {
            return fail("q must lie in [0, 1)");
        }
        let pi = self.transform.clone().unwrap_or_else(|| Matrix::identity(rec.width()));
        let Some(t) = NormTransform::new(rec, pt, pi, self.lambda.clone()) else {
            return fail("transform is singular or has the wrong size");
        };
        let Some(q) = t.q_bound(rec, self.n1) else {
            return fail("transient bound undefined at n1");
        };
        if q > self.q {
            return fail("contraction factor exceeds the certified q");
        }
        let state = advance(rec, pt, &v.v, 0, self.n1)?;
        if t.headroom(&state[..rec.width()]) > self.headroom {
            return fail("state norm at n1 exceeds the certified headroom");
        }
        let eps = pow2(-(self.eps_exp as i64));
        if self.n >= self.n1 {
            let tail = &self.headroom * pow_upper(&self.q, self.n - self.n1, POW_BITS) / (&one - &self.q);
            if tail > eps {
                return fail("geometric tail exceeds the tolerance");
            }
        } else {
            let w = rec.width();
            let s_n = &advance(rec, pt, &v.v, 0, self.n)?[w];
            let gap = (&state[w] - s_n).modulus_upper(CERT_BITS);
            if gap + &self.headroom / (&one - &self.q) > eps {
                return fail("partial sums between N and n1 plus the tail exceed the tolerance");
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn setup(name: &str) -> (Recurrence, EvalPoint, InitialVector) {
        let e = catalog::get(name).unwrap();
        let v = InitialVector::new(&e.ode, &e.inits).unwrap();
        (e.ode.recurrence(), EvalPoint::new(&e.point), v)
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn geometric_tail() {
        let (rec, pt, v) = setup("geometric");
        let cert = truncation_order(&rec, &pt, &v, 10).unwrap();
        cert.verify(&rec, &pt, &v).unwrap();
        // Σ_{n≥N} 2^-n = 2^(1-N) ≤ 2^-10 first holds at N = 11.
        assert!(cert.n >= 11 && cert.n <= 40, "N = {}", cert.n);
        let t = opt_norm_transform(&rec, &pt).unwrap();
        assert!(t.is_identity());
        assert_eq!(t.q_inf, q(1, 2));
    }

    #[test]
    fn exp_tail_is_exact_sum_bounded() {
        let e = catalog::get("exp").unwrap();
        let (rec, pt, v) = (e.ode.recurrence(), EvalPoint::new(&e.point), InitialVector::new(&e.ode, &e.inits).unwrap());
        let mut prev_ratio = f64::INFINITY;
        for p in [64u64, 256, 1024] {
            let cert = truncation_order(&rec, &pt, &v, p).unwrap();
            cert.verify(&rec, &pt, &v).unwrap();
            // Σ_{n≥N} 1/n! ≤ 2/N! for N ≥ 1.
            let mut fact = BigInt::one();
            for k in 1..=cert.n {
                fact *= k;
            }
            assert!(BigRational::new(2.into(), fact) <= pow2(-(p as i64)) * q(2, 1));
            let ratio = cert.n as f64 / p as f64;
            assert!(ratio < prev_ratio, "N/p should shrink: {ratio}");
            prev_ratio = ratio;
        }
        let t = opt_norm_transform(&rec, &pt).unwrap();
        assert!(t.is_identity());
        assert!(t.q_inf.is_zero());
    }

    #[test]
    fn arctan_contraction() {
        let (rec, pt, _) = setup("arctan");
        let t = opt_norm_transform(&rec, &pt).unwrap();
        assert!(t.q_inf >= q(1, 2) && t.q_inf < BigRational::one());
    }

    #[test]
    fn ln2_needs_a_nontrivial_basis() {
        let (rec, pt, v) = setup("ln2");
        assert_eq!(NormTransform::identity(&rec, &pt).q_inf, BigRational::one());
        let t = opt_norm_transform(&rec, &pt).unwrap();
        assert!(!t.is_identity());
        assert_eq!(t.q_inf, q(1, 2));
        let cert = truncation_order(&rec, &pt, &v, 128).unwrap();
        assert!(cert.transform.is_some());
        cert.verify(&rec, &pt, &v).unwrap();
        assert!(cert.n <= 4 * 130);
    }

    #[test]
    fn zero_initial_values() {
        let (rec, pt, _) = setup("arctan");
        let e = catalog::get("arctan").unwrap();
        let zero = InitialVector::new(&e.ode, &[GaussianRational::zero(), GaussianRational::zero()]).unwrap();
        let cert = truncation_order(&rec, &pt, &zero, 64).unwrap();
        assert_eq!(cert.n, 0);
        cert.verify(&rec, &pt, &zero).unwrap();
    }

    #[test]
    fn tampered_certificates_fail() {
        let (rec, pt, v) = setup("arctan");
        let cert = truncation_order(&rec, &pt, &v, 64).unwrap();
        let mut short = cert.clone();
        short.n -= 1;
        assert!(short.verify(&rec, &pt, &v).is_err());
        let mut low_q = cert.clone();
        low_q.q = q(1, 100);
        assert!(low_q.verify(&rec, &pt, &v).is_err());
        let mut low_h = cert.clone();
        low_h.headroom = &low_h.headroom / BigRational::from_integer(1000.into());
        assert!(low_h.verify(&rec, &pt, &v).is_err());
    }

    #[test]
    fn certificate_json_roundtrip() {
        let (rec, pt, v) = setup("ln2");
        let cert = truncation_order(&rec, &pt, &v, 64).unwrap();
        let back: TailCertificate = serde_json::from_str(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
        back.verify(&rec, &pt, &v).unwrap();
    }

    #[test]
    fn monotone_in_tolerance() {
        for name in catalog::NAMES {
            let (rec, pt, v) = setup(name);
            let mut prev = 0;
            for e in [16u64, 17, 32, 33, 100, 101] {
                let n = truncation_order(&rec, &pt, &v, e).unwrap().n;
                assert!(n >= prev, "{name}: N({e}) = {n} < {prev}");
                prev = n;
            }
        }
    }

    #[test]
    fn transform_step_bounds_dominate() {
        let (rec, pt, _) = setup("ln2");
        let t = opt_norm_transform(&rec, &pt).unwrap();
        for n in [0u64, 1, 3, 10, 100, 1000] {
            let b = crate::ode::step_matrix(&rec, &pt, n).unwrap();
            assert!(t.norm(&b) <= t.step_bound(&rec, &pt, n).unwrap(), "n = {n}");
        }
        // Far out the transformed step is nearly the limiting contraction.
        assert!(t.step_bound(&rec, &pt, 100_000).unwrap() <= q(1, 1));
    }

    #[test]
    fn durand_kerner_finds_roots() {
        // (x-1)(x+2)(x-3i)
        let c = [
            Complex64::new(0.0, 6.0),
            Complex64::new(-2.0, -3.0),
            Complex64::new(1.0, -3.0),
            Complex64::new(1.0, 0.0),
        ];
        let mut r = complex_roots(&c);
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - Complex64::new(-2.0, 0.0)).norm() < 1e-9);
        assert!((r[1] - Complex64::new(0.0, 3.0)).norm() < 1e-9);
        assert!((r[2] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    /// Large `a_{r-1}(0)/a_r(0)` delays contraction of the step bounds to
    /// `n1 = 512`, while the terms at `ζ = -1/512` are tiny far earlier.
    fn transient_problem() -> (Recurrence, EvalPoint, InitialVector) {
        let g = |re: i64, im: i64| crate::arith::GaussianInt::new(re, im);
        let ode = crate::ode::ThetaOde::new(vec![
            Poly::new(vec![g(254, 87), g(0, -215), g(59, 62)]),
            Poly::new(vec![g(-179, 65), g(-144, 141)]),
            Poly::new(vec![g(1, 0), g(-195, 0), g(-190, 0)]),
        ])
        .unwrap();
        let inits = vec![GaussianRational::from_int(-5), "19/6+1/5*i".parse().unwrap()];
        let v = InitialVector::new(&ode, &inits).unwrap();
        (ode.recurrence(), "-1/512".parse().unwrap(), v)
    }

    #[test]
    fn long_transient_is_bridged_exactly() {
        let (rec, pt, v) = transient_problem();
        for e in [34u64, 130, 258] {
            let c = truncation_order(&rec, &pt, &v, e).unwrap();
            assert!(c.n < c.n1 && c.n <= 120, "eps {e}: N = {}, n1 = {}", c.n, c.n1);
            c.verify(&rec, &pt, &v).unwrap();
            let mut short = c.clone();
            short.n = c.n / 2;
            assert!(short.verify(&rec, &pt, &v).is_err());
        }
    }
}
