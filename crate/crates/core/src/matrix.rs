//! Small dense square matrices over the exact scalar types.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arith::{DyadicComplex, GaussianInt, GaussianRational};

pub trait Ring: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
}

impl Ring for GaussianInt {
    fn zero() -> Self {
        GaussianInt::zero()
    }
    fn one() -> Self {
        GaussianInt::one()
    }
    fn is_zero(&self) -> bool {
        GaussianInt::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self.mul_ref(other)
    }
}

impl Ring for GaussianRational {
    fn zero() -> Self {
        GaussianRational::zero()
    }
    fn one() -> Self {
        GaussianRational::one()
    }
    fn is_zero(&self) -> bool {
        GaussianRational::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Ring for DyadicComplex {
    fn zero() -> Self {
        DyadicComplex::zero()
    }
    fn one() -> Self {
        DyadicComplex::one()
    }
    fn is_zero(&self) -> bool {
        DyadicComplex::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        DyadicComplex::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        DyadicComplex::mul(self, other)
    }
}

impl Ring for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

/// Row-major `k × k` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Ring> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self { dim, data: rows.into_iter().flatten().collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Column `j` as an iterator over rows.
    pub fn column(&self, j: usize) -> impl Iterator<Item = &T> {
        (0..self.dim).map(move |i| self.get(i, j))
    }

    /// `self · rhs`, skipping structurally zero terms.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let k = self.dim;
        let mut out = Self::zeros(k);
        for i in 0..k {
            for j in 0..k {
                let mut acc: Option<T> = None;
                for l in 0..k {
                    let (a, b) = (self.get(i, l), rhs.get(l, j));
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    let t = a.mul(b);
                    acc = Some(match acc {
                        None => t,
                        Some(s) => s.add(&t),
                    });
                }
                if let Some(s) = acc {
                    out.set(i, j, s);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(T::zero(), |s, (a, b)| s.add(&a.mul(b)))
            })
            .collect()
    }

    pub fn map<U: Ring>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { dim: self.dim, data: self.data.iter().map(f).collect() }
    }

    pub fn try_map<U: Ring, E>(&self, f: impl Fn(&T) -> Result<U, E>) -> Result<Matrix<U>, E> {
        let data = self.data.iter().map(f).collect::<Result<Vec<_>, E>>()?;
        Ok(Matrix { dim: self.dim, data })
    }
}

impl Matrix<GaussianInt> {
    /// Total storage of all entries in bits.
    pub fn bits(&self) -> u64 {
        self.data.iter().map(GaussianInt::bits).sum()
    }
}

impl Matrix<DyadicComplex> {
    pub fn storage_bits(&self) -> u64 {
        self.data.iter().map(DyadicComplex::storage_bits).sum()
    }

    pub fn max_mantissa_bits(&self) -> u64 {
        self.data.iter().map(DyadicComplex::mantissa_bits).max().unwrap_or(0)
    }

    pub fn to_gaussian_rational(&self) -> Matrix<GaussianRational> {
        self.map(DyadicComplex::to_gaussian_rational)
    }
}

impl Matrix<GaussianRational> {
    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn normalize(&self) -> Self {
        self.map(GaussianRational::normalize)
    }

    /// Exact inverse by Gauss–Jordan elimination, `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        let k = self.dim;
        let mut a = self.normalize();
        let mut inv = Self::identity(k);
        for col in 0..k {
            let pivot = (col..k).find(|&r| !a.get(r, col).is_zero())?;
            if pivot != col {
                for j in 0..k {
                    a.data.swap(pivot * k + j, col * k + j);
                    inv.data.swap(pivot * k + j, col * k + j);
                }
            }
            let p = a.get(col, col).clone();
            for j in 0..k {
                let x = a.get(col, j).checked_div(&p)?.normalize();
                a.set(col, j, x);
                let y = inv.get(col, j).checked_div(&p)?.normalize();
                inv.set(col, j, y);
            }
            for r in 0..k {
                if r == col || a.get(r, col).is_zero() {
                    continue;
                }
                let f = a.get(r, col).clone();
                for j in 0..k {
                    let x = (a.get(r, j) - &(&f * a.get(col, j))).normalize();
                    a.set(r, j, x);
                    let y = (inv.get(r, j) - &(&f * inv.get(col, j))).normalize();
                    inv.set(r, j, y);
                }
            }
        }
        Some(inv)
    }
}

impl From<Matrix<GaussianInt>> for Matrix<GaussianRational> {
    fn from(m: Matrix<GaussianInt>) -> Self {
        m.map(|x| GaussianRational::from(x.clone()))
    }
}

#[cfg(test)]
pub(crate) fn int_matrix(rows: &[&[i64]]) -> Matrix<GaussianInt> {
    Matrix::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|&x| GaussianInt::from_int(num_bigint::BigInt::from(x))).collect())
            .collect(),
    )
}
