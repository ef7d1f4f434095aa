//! Small dense numerics shared by the model modules: Householder least
//! squares, bracketed bisection and trapezoidal quadrature.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("root is not bracketed: f({a}) = {fa}, f({b}) = {fb}")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
}

/// Solves `min ||A x - y||²` for a row-major `rows × cols` design by
/// Householder QR. Columns whose reflected diagonal falls below
/// `1e-12 · ||A||_F` are reported as rank deficient.
pub fn lstsq(design: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, NumericError> {
    let rows = design.len();
    let cols = design.first().map_or(0, Vec::len);
    if rows < cols || rows == 0 {
        return Err(NumericError::TooFewRows { needed: cols.max(1), got: rows });
    }
    let mut a: Vec<Vec<f64>> = design.to_vec();
    let mut b = y.to_vec();
    let scale = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    for k in 0..cols {
        let norm = (k..rows).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale {
            return Err(NumericError::RankDeficient { column: k });
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..cols {
                let dot: f64 = (k..rows).map(|i| v[i - k] * a[i][j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..rows {
                    a[i][j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..rows).map(|i| v[i - k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                b[i] -= f * v[i - k];
            }
        }
        if a[k][k].abs() <= 1e-12 * scale {
            return Err(NumericError::RankDeficient { column: k });
        }
    }

    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let s: f64 = ((k + 1)..cols).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Ok(x)
}

/// Solves a small dense square system by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot vanishes.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-300 || !m[p][k].is_finite() {
            return None;
        }
        m.swap(k, p);
        rhs.swap(k, p);
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (rhs[k] - s) / m[k][k];
    }
    Some(x)
}

/// Bisection on `[a, b]` until the bracket is narrower than `tol` or no
/// further floating-point progress is possible.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64, NumericError> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericError::NotBracketed { a, b, fa, fb });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= tol || mid == a || mid == b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Trapezoidal integral of uniformly spaced samples.
pub fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            dt * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}
