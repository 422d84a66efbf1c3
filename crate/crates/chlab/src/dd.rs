//! Compensated floating-point accumulation (double-double building blocks).
//!
//! Two places in the crate need residuals evaluated with more than 53 bits:
//! iterative refinement of banded LU solves, where the Jacobian condition
//! number reaches `~1e17` at large implicit steps, and the conservation
//! defect sums used to pin the discrete mass. Both reduce to sums of products
//! accumulated through the classical error-free transformations: Knuth's
//! `two_sum` and the FMA-based `two_prod`.

/// Error-free sum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e`
/// exactly (Knuth's branch-free variant, valid for any ordering of inputs).
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free product via fused multiply-add: `a * b = p + e` exactly.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Running sum carried as an unevaluated `hi + lo` pair.
///
/// The `hi` word absorbs each new term through [`two_sum`]; rounding errors
/// drain into `lo` (Neumaier-style compensation). Good to roughly twice
/// working precision for the mildly ill-conditioned sums used here.
#[derive(Clone, Copy, Debug, Default)]
pub struct DdAcc {
    hi: f64,
    lo: f64,
}

impl DdAcc {
    pub fn new() -> Self {
        Self::default()
    }

    /// Start from a plain f64 value.
    pub fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Add a single term.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    /// Add the exact product `a * b` (both the rounded product and its
    /// FMA-recovered error term).
    #[inline]
    pub fn add_prod(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(p);
        self.lo += e;
    }

    /// Collapse to the nearest f64.
    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = DdAcc::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Compensated dot product `sum_i a[i] * b[i]`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    let mut acc = DdAcc::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.add_prod(x, y);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sum_recovers_exact_error() {
        let a = 1.0;
        let b = 2f64.powi(-60);
        let (s, e) = two_sum(a, b);
        assert_eq!(s, 1.0);
        assert_eq!(e, 2f64.powi(-60));
    }

    #[test]
    fn two_prod_recovers_exact_error() {
        // (1 + 2^-30)^2 = 1 + 2^-29 + 2^-60; the last bit falls off fl(p).
        let a = 1.0 + 2f64.powi(-30);
        let (p, e) = two_prod(a, a);
        assert_eq!(p, 1.0 + 2f64.powi(-29));
        assert_eq!(e, 2f64.powi(-60));
    }

    #[test]
    fn compensated_sum_survives_cancellation() {
        // Classic Neumaier case: plain summation returns 0.
        assert_eq!(sum(&[1.0, 1e100, 1.0, -1e100]), 2.0);
    }

    #[test]
    fn compensated_dot_survives_cancellation() {
        // 2^53 + 1 rounds to 2^53 in plain arithmetic, losing the 1.
        let a = [2f64.powi(53), 1.0, -(2f64.powi(53))];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(dot(&a, &b), 1.0);
    }

    #[test]
    fn dot_matches_naive_on_benign_data() {
        let a: Vec<f64> = (0..17).map(|i| 0.25 * i as f64 - 1.0).collect();
        let b: Vec<f64> = (0..17).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() <= 1e-14 * naive.abs());
    }
}
