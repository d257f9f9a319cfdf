//! Fundamental solution of the Laplacian and its partial derivatives.
//!
//! `J(x) = -(1/2π) log|x|` in the plane and `J(x) = 1/((n-2) ω_n |x|^{n-2})`
//! for `n ≥ 3`, where `ω_n` is the area of the unit sphere. The convolution
//! `V(μ) = J * μ` then satisfies `ΔV(μ) = -μ`.
//!
//! Partial derivatives up to order four are produced symbolically: every
//! derivative of `J` is a finite sum of terms `c · x^β · |x|^{-m} · log|x|^L`
//! and the product rule maps that family into itself. Terms are derived once
//! per multi-index, flattened, and cached, so repeated evaluation inside
//! quadrature loops is a short dense loop.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::{Error, Result};

/// Maximum supported derivative order.
pub const MAX_ORDER: usize = 4;

/// Ambient dimension `n ≥ 2` together with the unit-sphere area `ω_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("dimension {n} < 2")));
        }
        Ok(Dimension(n))
    }

    pub fn n(&self) -> usize {
        self.0
    }

    /// Area of the unit sphere S^{n-1}: `ω_2 = 2π`, `ω_3 = 4π`, in general
    /// `2 π^{n/2} / Γ(n/2)`.
    pub fn sphere_area(&self) -> f64 {
        let n = self.0;
        2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
    }
}

/// Γ(n/2) for integer n ≥ 1.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        // Γ(k) = (k-1)! with k = n/2
        let k = n / 2;
        (1..k).map(|i| i as f64).product()
    } else {
        // Γ(k + 1/2) = (2k)! / (4^k k!) √π with k = (n-1)/2
        let k = (n - 1) / 2;
        let mut v = PI.sqrt();
        for i in 1..=k {
            v *= (2 * i - 1) as f64 / 2.0;
        }
        v
    }
}

/// Derivative multi-index `α` with `|α| ≤ 4`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<u8>,
}

impl MultiIndex {
    pub fn new(entries: &[usize]) -> Result<Self> {
        let order: usize = entries.iter().sum();
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder { order });
        }
        Ok(MultiIndex {
            entries: entries.iter().map(|&e| e as u8).collect(),
        })
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex {
            entries: vec![0; dim],
        }
    }

    pub fn order(&self) -> usize {
        self.entries.iter().map(|&e| e as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> Vec<usize> {
        self.entries.iter().map(|&e| e as usize).collect()
    }

    /// Component-wise sum; errors if the combined order exceeds 4.
    pub fn add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let e: Vec<usize> = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| a + b)
            .collect();
        MultiIndex::new(&e)
    }

    /// All multi-indices of the given order in `dim` coordinates, in
    /// lexicographic order.
    pub fn all_of_order(dim: usize, order: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0usize; dim];
        fn rec(dim: usize, pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if pos == dim - 1 {
                cur[pos] = left;
                out.push(MultiIndex::new(cur).expect("order bounded by caller"));
                return;
            }
            for k in (0..=left).rev() {
                cur[pos] = k;
                rec(dim, pos + 1, left - k, cur, out);
            }
        }
        rec(dim, 0, order, &mut cur, &mut out);
        out
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|e| e.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// One term `coeff · x^beta · |x|^{-inv_pow} · log|x|^{log_pow}`.
#[derive(Debug, Clone, Copy)]
struct FlatTerm {
    coeff: f64,
    beta: [u8; 8],
    inv_pow: i32,
    log_pow: u8,
}

type TermKey = (Vec<u8>, i32, u8);

fn differentiate(terms: &BTreeMap<TermKey, f64>, i: usize) -> BTreeMap<TermKey, f64> {
    let mut out: BTreeMap<TermKey, f64> = BTreeMap::new();
    let mut add = |key: TermKey, c: f64| {
        if c != 0.0 {
            *out.entry(key).or_insert(0.0) += c;
        }
    };
    for ((beta, m, l), &c) in terms {
        // d/dx_i x^beta = beta_i x^{beta - e_i}
        if beta[i] > 0 {
            let mut b = beta.clone();
            b[i] -= 1;
            add((b, *m, *l), c * beta[i] as f64);
        }
        // d/dx_i r^{-m} = -m x_i r^{-m-2}
        if *m != 0 {
            let mut b = beta.clone();
            b[i] += 1;
            add((b, m + 2, *l), -c * *m as f64);
        }
        // d/dx_i log^L r = L x_i r^{-2} log^{L-1} r
        if *l > 0 {
            let mut b = beta.clone();
            b[i] += 1;
            add((b, m + 2, l - 1), c * *l as f64);
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn base_terms(dim: Dimension) -> BTreeMap<TermKey, f64> {
    let n = dim.n();
    let mut terms = BTreeMap::new();
    if n == 2 {
        terms.insert((vec![0u8; n], 0, 1), -1.0 / (2.0 * PI));
    } else {
        terms.insert(
            (vec![0u8; n], (n - 2) as i32, 0),
            1.0 / ((n - 2) as f64 * dim.sphere_area()),
        );
    }
    terms
}

fn flatten(terms: &BTreeMap<TermKey, f64>) -> Vec<FlatTerm> {
    terms
        .iter()
        .map(|((beta, m, l), &c)| {
            let mut b = [0u8; 8];
            b[..beta.len()].copy_from_slice(beta);
            FlatTerm {
                coeff: c,
                beta: b,
                inv_pow: *m,
                log_pow: *l,
            }
        })
        .collect()
}

fn derivative_terms(alpha: &MultiIndex, dim: Dimension) -> Arc<Vec<FlatTerm>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, Vec<u8>), Arc<Vec<FlatTerm>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (dim.n(), alpha.entries.clone());
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return t.clone();
    }
    let mut terms = base_terms(dim);
    for (i, &k) in alpha.entries.iter().enumerate() {
        for _ in 0..k {
            terms = differentiate(&terms, i);
        }
    }
    let flat = Arc::new(flatten(&terms));
    cache.lock().unwrap().insert(key, flat.clone());
    flat
}

fn eval_terms(terms: &[FlatTerm], x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let log_r = if terms.iter().any(|t| t.log_pow > 0) {
        r.ln()
    } else {
        0.0
    };
    let mut sum = 0.0;
    for t in terms {
        let mut v = t.coeff;
        for (i, &xi) in x.iter().enumerate() {
            for _ in 0..t.beta[i] {
                v *= xi;
            }
        }
        if t.inv_pow != 0 {
            v *= r.powi(-t.inv_pow);
        }
        if t.log_pow > 0 {
            v *= log_r;
        }
        sum += v;
    }
    sum
}

/// Value of the kernel `J` at `x ≠ 0`.
pub fn kernel_value(x: &[f64], dim: Dimension) -> Result<f64> {
    check_point(x, dim)?;
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    let n = dim.n();
    if n == 2 {
        Ok(-r.ln() / (2.0 * PI))
    } else {
        Ok(r.powi(-((n - 2) as i32)) / ((n - 2) as f64 * dim.sphere_area()))
    }
}

/// Exact partial derivative `∂^α J(x)` for `|α| ≤ 4`, `x ≠ 0`.
pub fn kernel_derivative(alpha: &MultiIndex, x: &[f64], dim: Dimension) -> Result<f64> {
    check_point(x, dim)?;
    if alpha.len() != dim.n() {
        return Err(Error::DimensionMismatch {
            expected: dim.n(),
            got: alpha.len(),
        });
    }
    if norm(x) == 0.0 {
        return Err(Error::SingularPoint);
    }
    if alpha.order() == 0 {
        return kernel_value(x, dim);
    }
    Ok(eval_terms(&derivative_terms(alpha, dim), x))
}

/// Reusable evaluator for `∂^α J`; avoids cache lookups in hot loops.
#[derive(Clone)]
pub struct KernelDerivative {
    terms: Arc<Vec<FlatTerm>>,
    order: usize,
}

impl KernelDerivative {
    pub fn new(alpha: &MultiIndex, dim: Dimension) -> Result<Self> {
        if alpha.len() != dim.n() {
            return Err(Error::DimensionMismatch {
                expected: dim.n(),
                got: alpha.len(),
            });
        }
        Ok(KernelDerivative {
            terms: derivative_terms(alpha, dim),
            order: alpha.order(),
        })
    }

    /// Evaluate at `x`; the caller keeps `x` away from the origin.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        eval_terms(&self.terms, x)
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// Sharp-up-to-10% bound on `max_{|x|=1} |∂^α J(x)|`.
///
/// Derivatives of order `k ≥ 1` are homogeneous of degree `-(n-2+k)`
/// (`-k` in the plane), so this constant turns into the pointwise bound
/// `|∂^α J(x)| ≤ C_α |x|^{-(n-2+|α|)}`. Computed by dense sampling of the
/// unit sphere and inflated by a fixed safety factor.
pub fn derivative_sphere_bound(alpha: &MultiIndex, dim: Dimension) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, Vec<u8>), f64>>> = OnceLock::new();
    if alpha.order() == 0 {
        return Err(Error::InvalidInput(
            "sphere bound defined for derivative orders ≥ 1".into(),
        ));
    }
    if alpha.len() != dim.n() {
        return Err(Error::DimensionMismatch {
            expected: dim.n(),
            got: alpha.len(),
        });
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (dim.n(), alpha.entries.clone());
    if let Some(&v) = cache.lock().unwrap().get(&key) {
        return Ok(v);
    }
    let terms = derivative_terms(alpha, dim);
    let n = dim.n();
    let mut max_abs: f64 = 0.0;
    match n {
        2 => {
            let m = 4096;
            for k in 0..m {
                let th = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                let x = [th.cos(), th.sin()];
                max_abs = max_abs.max(eval_terms(&terms, &x).abs());
            }
        }
        3 => {
            let (mu, mv) = (512, 1024);
            for iu in 0..mu {
                let th = PI * (iu as f64 + 0.5) / mu as f64;
                let (st, ct) = th.sin_cos();
                for iv in 0..mv {
                    let ph = 2.0 * PI * (iv as f64 + 0.5) / mv as f64;
                    let x = [st * ph.cos(), st * ph.sin(), ct];
                    max_abs = max_abs.max(eval_terms(&terms, &x).abs());
                }
            }
        }
        _ => {
            // Higher dimensions: seeded random directions, larger inflation.
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6b65726e);
            for _ in 0..200_000 {
                let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let r = norm(&x);
                if r < 1e-3 {
                    continue;
                }
                x.iter_mut().for_each(|v| *v /= r);
                max_abs = max_abs.max(eval_terms(&terms, &x).abs());
            }
            max_abs *= 1.15;
        }
    }
    let bound = max_abs * 1.1;
    cache.lock().unwrap().insert(key, bound);
    Ok(bound)
}

/// Rigorous upper bound for `|∫_{D∖B_R(0)} ∂^α J(x-y) dy|` with `|α| = 3`,
/// unit density and any domain `D`, valid for `R > 2|x|`.
///
/// Since `|∂^α J(z)| ≤ C_α |z|^{-(n+1)}` and `|x-y| ≥ |y| - |x| ≥ R - |x|`
/// outside the ball, the tail is at most `C_α ω_n / (R - |x|)`.
pub fn kernel_tail_bound(alpha: &MultiIndex, big_r: f64, x: &[f64], dim: Dimension) -> Result<f64> {
    check_point(x, dim)?;
    if alpha.order() != 3 {
        return Err(Error::InvalidInput(format!(
            "tail bound requires |alpha| = 3, got {}",
            alpha.order()
        )));
    }
    let r_x = norm(x);
    if big_r <= 2.0 * r_x {
        return Err(Error::InvalidTruncationRadius {
            radius: big_r,
            min: 2.0 * r_x,
        });
    }
    let c = order3_sphere_bound(dim)?;
    Ok(c * dim.sphere_area() / (big_r - r_x))
}

/// Max of `derivative_sphere_bound` over all `|α| = 3`.
pub fn order3_sphere_bound(dim: Dimension) -> Result<f64> {
    let mut c: f64 = 0.0;
    for alpha in MultiIndex::all_of_order(dim.n(), 3) {
        c = c.max(derivative_sphere_bound(&alpha, dim)?);
    }
    Ok(c)
}

fn check_point(x: &[f64], dim: Dimension) -> Result<()> {
    if x.len() != dim.n() {
        return Err(Error::DimensionMismatch {
            expected: dim.n(),
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
