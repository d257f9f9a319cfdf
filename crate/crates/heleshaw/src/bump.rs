//! Compactly supported smooth test functions.
//!
//! The fixed family is `φ(x) = exp(-1/(1 - |x-c|²/ρ²))` inside the ball
//! `B(c, ρ)` and `0` outside. With `u = |x-c|²/ρ²` and `w = 1/(1-u)` every
//! partial derivative of `φ` is a finite sum of terms
//! `coeff · φ · w^k · (x-c)^β`, and the product rule keeps that form, so the
//! derivatives up to order four are generated symbolically once and then
//! evaluated exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kernel::MultiIndex;
use crate::{Error, Result};

/// Radially symmetric bump supported on the closed ball `B(center, radius)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestBump {
    center: Vec<f64>,
    radius: f64,
}

/// `w = 1/(1-u)` beyond which `e^{-w} · w^k` underflows to a hard zero for
/// every power used here (`e^{-500} ≈ 7e-218`).
const W_CUTOFF: f64 = 500.0;

type BumpKey = (Vec<u8>, u8); // ((x-c)^beta, w^k)

impl TestBump {
    pub fn new(center: &[f64], radius: f64) -> Result<Self> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("bump radius {radius}")));
        }
        Ok(TestBump {
            center: center.to_vec(),
            radius,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn u(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (xi, ci) in x.iter().zip(&self.center) {
            s += (xi - ci) * (xi - ci);
        }
        s / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let u = self.u(x);
        if u >= 1.0 {
            return 0.0;
        }
        let w = 1.0 / (1.0 - u);
        if w >= W_CUTOFF {
            return 0.0;
        }
        (-w).exp()
    }

    /// Exact partial derivative `∂^α φ(x)` for `|α| ≤ 4`.
    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
        if alpha.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                got: alpha.len(),
            });
        }
        if alpha.order() == 0 {
            return Ok(self.value(x));
        }
        let u = self.u(x);
        if u >= 1.0 {
            return Ok(0.0);
        }
        let w = 1.0 / (1.0 - u);
        if w >= W_CUTOFF {
            return Ok(0.0);
        }
        let terms = self.derivative_terms(alpha);
        let phi = (-w).exp();
        let mut sum = 0.0;
        for ((beta, k), c) in &terms {
            let mut v = *c * phi;
            for (i, &b) in beta.iter().enumerate() {
                let z = x[i] - self.center[i];
                for _ in 0..b {
                    v *= z;
                }
            }
            v *= w.powi(*k as i32);
            sum += v;
        }
        Ok(sum)
    }

    fn derivative_terms(&self, alpha: &MultiIndex) -> BTreeMap<BumpKey, f64> {
        let n = self.center.len();
        let inv_r2 = 1.0 / (self.radius * self.radius);
        let mut terms: BTreeMap<BumpKey, f64> = BTreeMap::new();
        terms.insert((vec![0u8; n], 0), 1.0);
        for (i, k) in alpha.entries().into_iter().enumerate() {
            for _ in 0..k {
                terms = diff_terms(&terms, i, inv_r2);
            }
        }
        terms
    }
}

/// One application of `∂_i` to a sum of `φ w^k z^β` terms:
/// `∂_i φ = -(2 z_i/ρ²) w² φ`, `∂_i w = (2 z_i/ρ²) w²`, `∂_i z^β = β_i z^{β-e_i}`.
fn diff_terms(terms: &BTreeMap<BumpKey, f64>, i: usize, inv_r2: f64) -> BTreeMap<BumpKey, f64> {
    let mut out: BTreeMap<BumpKey, f64> = BTreeMap::new();
    let mut add = |key: BumpKey, c: f64| {
        if c != 0.0 {
            *out.entry(key).or_insert(0.0) += c;
        }
    };
    for ((beta, k), &c) in terms {
        // φ factor
        let mut b = beta.clone();
        b[i] += 1;
        add((b.clone(), k + 2), -2.0 * inv_r2 * c);
        // w^k factor
        if *k > 0 {
            add((b, k + 1), 2.0 * inv_r2 * c * *k as f64);
        }
        // z^β factor
        if beta[i] > 0 {
            let mut b = beta.clone();
            b[i] -= 1;
            add((b, *k), c * beta[i] as f64);
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_and_symmetry() {
        let b = TestBump::new(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(b.value(&[1.0, 0.0]), 0.0);
        assert_eq!(b.value(&[2.0, 0.3]), 0.0);
        assert!((b.value(&[0.0, 0.0]) - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(b.value(&[0.3, 0.4]), b.value(&[-0.3, 0.4]));
        // near the support edge: exact zero, no NaN
        assert_eq!(b.value(&[0.999_999_999_999, 0.0]), 0.0);
        let a = MultiIndex::new(&[2, 1]).unwrap();
        assert_eq!(b.derivative(&a, &[0.999_999_999_999, 0.0]).unwrap(), 0.0);
        assert_eq!(b.derivative(&a, &[5.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // ladder check: order k against central differences of order k-1
        let bump = TestBump::new(&[0.5, -0.25], 1.5).unwrap();
        let pts = [[0.5, -0.25], [0.9, 0.3], [-0.4, -0.6], [1.4, 0.2]];
        let h = 1e-5;
        for order in 1..=4 {
            for alpha in MultiIndex::all_of_order(2, order) {
                let e = alpha.entries();
                let i = e.iter().position(|&k| k > 0).unwrap();
                let mut lower = e.clone();
                lower[i] -= 1;
                let lower = MultiIndex::new(&lower).unwrap();
                for p in &pts {
                    let exact = bump.derivative(&alpha, p).unwrap();
                    let mut xp = p.to_vec();
                    xp[i] += h;
                    let plus = bump.derivative(&lower, &xp).unwrap();
                    xp[i] -= 2.0 * h;
                    let minus = bump.derivative(&lower, &xp).unwrap();
                    let fd = (plus - minus) / (2.0 * h);
                    let scale = exact.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (exact - fd).abs() / scale < 1e-5,
                        "alpha={alpha} p={p:?}: exact={exact} fd={fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn third_dim_derivative_smoke() {
        let bump = TestBump::new(&[0.0, 0.0, 0.0], 1.0).unwrap();
        let a = MultiIndex::new(&[1, 1, 1]).unwrap();
        let v = bump.derivative(&a, &[0.2, 0.3, -0.1]).unwrap();
        assert!(v.is_finite());
        // odd symmetry: flipping one odd coordinate flips the sign
        let v2 = bump.derivative(&a, &[-0.2, 0.3, -0.1]).unwrap();
        assert!((v + v2).abs() < 1e-15);
    }
}
