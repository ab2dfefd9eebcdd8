//! Dense LU factorization with partial pivoting over multiprecision scalars.

use alloc::vec::Vec;

use crate::mp::{self, Float, MpComplex, Precision};

/// Scalar field the LU routine works over.
pub trait Scalar: Clone {
    fn zero_like(&self) -> Self;
    fn sub_mul(&self, a: &Self, b: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    /// `log10 |x|`, used for pivot selection and the singularity test.
    fn log10_abs(&self) -> f64;
}

impl Scalar for Float {
    // a zero carrying self's precision
    #[allow(clippy::eq_op)]
    fn zero_like(&self) -> Self {
        self - self
    }
    fn sub_mul(&self, a: &Self, b: &Self) -> Self {
        self - a * b
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn log10_abs(&self) -> f64 {
        mp::log10_abs(self)
    }
}

impl Scalar for MpComplex {
    // a zero carrying self's precision
    #[allow(clippy::eq_op)]
    fn zero_like(&self) -> Self {
        self - self
    }
    fn sub_mul(&self, a: &Self, b: &Self) -> Self {
        self - &(a * b)
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn log10_abs(&self) -> f64 {
        MpComplex::log10_abs(self)
    }
}

/// Pivot smaller than `10^-(digits - SINGULAR_MARGIN)` relative to the
/// largest entry is treated as zero.
const SINGULAR_MARGIN: f64 = 20.0;

/// The factorization failed at elimination step `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub step: usize,
    /// `log10` of the relative pivot that was rejected.
    pub log10_pivot: f64,
}

/// Row-major LU factors of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    a: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Factor the row-major `n x n` matrix `a` in place.
    pub fn factor(n: usize, mut a: Vec<T>, prec: Precision) -> Result<Self, Singular> {
        assert_eq!(a.len(), n * n);
        let scale = a
            .iter()
            .map(Scalar::log10_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        let floor = scale - (prec.decimal_digits() as f64 - SINGULAR_MARGIN);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|r| (r, a[r * n + k].log10_abs()))
                .fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < floor || !best.is_finite() {
                return Err(Singular {
                    step: k,
                    log10_pivot: best - scale,
                });
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            for r in k + 1..n {
                let f = a[r * n + k].div(&a[k * n + k]);
                for c in k + 1..n {
                    a[r * n + c] = a[r * n + c].sub_mul(&f, &a[k * n + c]);
                }
                a[r * n + k] = f;
            }
        }
        Ok(Lu { n, a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for r in 0..n {
            for c in 0..r {
                x[r] = x[r].sub_mul(&self.a[r * n + c], &x[c]);
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] = x[r].sub_mul(&self.a[r * n + c], &x[c]);
            }
            x[r] = x[r].div(&self.a[r * n + r]);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn solves_real_system() {
        let p = Precision::digits(40);
        let f = |x: f64| mp::from_f64(x, p);
        let a = alloc::vec![f(0.0), f(2.0), f(1.0), f(1.0), f(1.0), f(1.0), f(2.0), f(1.0), f(3.0)];
        let lu = Lu::factor(3, a, p).unwrap();
        let x = lu.solve(&[f(3.0), f(3.0), f(6.0)]);
        for xi in x {
            assert!((mp::to_f64(&xi) - 1.0).abs() < 1e-30);
        }
    }

    #[test]
    fn detects_singular_complex() {
        let p = Precision::digits(40);
        let c = |re: f64, im: f64| MpComplex::from_c64(Complex64::new(re, im), p);
        let a = alloc::vec![c(1.0, 1.0), c(2.0, 2.0), c(2.0, 2.0), c(4.0, 4.0)];
        let err = Lu::factor(2, a, p).unwrap_err();
        assert_eq!(err.step, 1);
    }
}
