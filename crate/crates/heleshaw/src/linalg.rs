//! Small dense linear algebra helpers (no external solver needed at these
//! sizes: quadratic fits in n ∈ {2,3} have at most 10 unknowns).

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
/// `a` is row-major `n × n`. Returns `None` for a numerically singular system.
pub(crate) fn solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        let mut piv_abs = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > piv_abs {
                piv = row;
                piv_abs = v;
            }
        }
        if piv_abs < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in (col + 1)..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}

/// Least squares `min ||M x - y||₂` via column-scaled normal equations.
/// `m` is row-major `rows × cols` with `rows ≥ cols`.
pub(crate) fn least_squares(m: &[f64], y: &[f64], rows: usize, cols: usize) -> Option<Vec<f64>> {
    // column scaling improves the conditioning of MᵀM
    let mut scale = vec![0.0f64; cols];
    for c in 0..cols {
        let mut s = 0.0;
        for r in 0..rows {
            s += m[r * cols + c] * m[r * cols + c];
        }
        scale[c] = if s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let mut ata = vec![0.0f64; cols * cols];
    let mut aty = vec![0.0f64; cols];
    for r in 0..rows {
        for i in 0..cols {
            let mi = m[r * cols + i] / scale[i];
            aty[i] += mi * y[r];
            for j in i..cols {
                ata[i * cols + j] += mi * m[r * cols + j] / scale[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            ata[i * cols + j] = ata[j * cols + i];
        }
    }
    let x = solve(&mut ata, &mut aty, cols)?;
    Some(x.iter().zip(&scale).map(|(v, s)| v / s).collect())
}

/// Slope of the least-squares line through `(x_i, y_i)`.
pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![3.0, 5.0];
        let x = solve(&mut a, &mut b, 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn least_squares_recovers_quadratic() {
        // y = 3 - 2 t + 0.5 t², rows = (1, t, t²)
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let mut m = Vec::new();
        let mut y = Vec::new();
        for &t in &ts {
            m.extend_from_slice(&[1.0, t, t * t]);
            y.push(3.0 - 2.0 * t + 0.5 * t * t);
        }
        let x = least_squares(&m, &y, ts.len(), 3).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-10);
        assert!((x[1] + 2.0).abs() < 1e-10);
        assert!((x[2] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [0.5, 1.5, 2.5, 3.5];
        assert!((fit_slope(&xs, &ys) - 1.0).abs() < 1e-14);
    }
}
