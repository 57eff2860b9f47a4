//! Straightforward triple-loop oracles everything else is checked against.

use crate::element::{Element, Scalar};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, Triangle};

/// `beta * C + alpha * A * B`, loop order i, j, k, accumulating in the
/// accumulator type. A zero `beta` ignores the prior contents of `C`.
pub fn naive_gemm<T: Element>(
    alpha: T::Acc,
    a: &Matrix<T>,
    b: &Matrix<T>,
    beta: T::Acc,
    c: &Matrix<T::Acc>,
) -> Result<Matrix<T::Acc>> {
    let (m, k) = a.shape();
    let n = b.cols();
    if b.rows() != k || c.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!(
            "A is {m}x{k}, B is {}x{}, C is {}x{}",
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let mut out = c.clone();
    for i in 0..m {
        for j in 0..n {
            let mut sum = T::Acc::zero();
            for p in 0..k {
                sum = sum.mul_add(a.get(i, p).widen(), b.get(p, j).widen());
            }
            out.set(i, j, scale_and_add(alpha, sum, beta, c.get(i, j)));
        }
    }
    Ok(out)
}

/// Triangle-only `alpha * A * B^T + alpha * B * A^T + beta * C` for N x K
/// operands. The other triangle of `C` is copied through untouched.
pub fn naive_syr2k<T: Element>(
    alpha: T::Acc,
    a: &Matrix<T>,
    b: &Matrix<T>,
    beta: T::Acc,
    c: &Matrix<T::Acc>,
    half: Triangle,
) -> Result<Matrix<T::Acc>> {
    let (n, k) = a.shape();
    if c.rows() != c.cols() {
        return Err(Error::DimensionMismatch(format!(
            "C must be square, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    if b.shape() != (n, k) || c.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{k}, B is {}x{}, C is {}x{}",
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let mut out = c.clone();
    for i in 0..n {
        for j in 0..n {
            if !half.contains(i, j) {
                continue;
            }
            let mut sum = T::Acc::zero();
            for p in 0..k {
                sum = sum.mul_add(a.get(i, p).widen(), b.get(j, p).widen());
                sum = sum.mul_add(b.get(i, p).widen(), a.get(j, p).widen());
            }
            out.set(i, j, scale_and_add(alpha, sum, beta, c.get(i, j)));
        }
    }
    Ok(out)
}

#[inline(always)]
pub(crate) fn scale_and_add<A: Scalar>(alpha: A, sum: A, beta: A, prior: A) -> A {
    let scaled = alpha.times(sum);
    if beta == A::zero() {
        scaled
    } else {
        beta.times(prior).plus(scaled)
    }
}

/// `||X - Y||_F / max(||Y||_F, tiny)`, computed in `f64`.
pub fn frobenius_rel_error<A: Scalar>(x: &Matrix<A>, y: &Matrix<A>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let mut diff = 0.0f64;
    let mut norm = 0.0f64;
    for c in 0..x.cols() {
        for r in 0..x.rows() {
            let xv = x.get(r, c).to_f64();
            let yv = y.get(r, c).to_f64();
            diff += (xv - yv) * (xv - yv);
            norm += yv * yv;
        }
    }
    Ok(diff.sqrt() / norm.sqrt().max(A::TINY))
}

/// Largest `|x - y|` over all elements, in `f64`.
pub fn max_abs_diff<A: Scalar>(x: &Matrix<A>, y: &Matrix<A>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let mut worst = 0.0f64;
    for c in 0..x.cols() {
        for r in 0..x.rows() {
            worst = worst.max((x.get(r, c).to_f64() - y.get(r, c).to_f64()).abs());
        }
    }
    Ok(worst)
}

/// Largest absolute element, in `f64`.
pub fn max_abs<A: Scalar>(x: &Matrix<A>) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..x.cols() {
        for r in 0..x.rows() {
            worst = worst.max(x.get(r, c).to_f64().abs());
        }
    }
    worst
}
