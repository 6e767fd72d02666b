use crate::error::{ensure, ensure_finite, Error, Result};

use super::matrix::Matrix;

/// Relative threshold on `|R[j,j]|` below which a column is considered dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin Householder QR of a tall matrix.
///
/// Returns `Q` (m×n, orthonormal columns) and `R` (n×n, upper triangular) with a
/// nonnegative diagonal, so `Q` is a deterministic function of `w`.
pub fn qr_thin(w: &Matrix) -> Result<(Matrix, Matrix)> {
    let (m, n) = w.shape();
    ensure(m >= n, || format!("qr_thin needs rows >= cols, got {m}x{n}"))?;
    ensure(n >= 1, || "qr_thin needs at least one column".to_string())?;
    ensure_finite(w.as_slice(), "qr_thin input")?;

    let mut a = w.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| a.get(i, k)).collect();
        let xnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            reflectors.push(vec![0.0; m - k]);
            continue;
        }
        let alpha = if v[0] >= 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            v.iter_mut().for_each(|x| *x /= vnorm);
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * a.get(i, j)).sum();
            for i in k..m {
                a.set(i, j, a.get(i, j) - 2.0 * v[i - k] * s);
            }
        }
        reflectors.push(v);
    }

    let mut r = Matrix::from_fn(n, n, |i, j| if j >= i { a.get(i, j) } else { 0.0 });

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
    let mut q = Matrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let s: f64 = (k..m).map(|i| v[i - k] * q.get(i, j)).sum();
            if s != 0.0 {
                for i in k..m {
                    q.set(i, j, q.get(i, j) - 2.0 * v[i - k] * s);
                }
            }
        }
    }

    for j in 0..n {
        if r.get(j, j) < 0.0 {
            for c in j..n {
                r.set(j, c, -r.get(j, c));
            }
            for i in 0..m {
                q.set(i, j, -q.get(i, j));
            }
        }
    }

    let largest = (0..n).map(|j| r.get(j, j)).fold(0.0_f64, f64::max);
    if let Some(column) = (0..n).find(|&j| !(r.get(j, j) > RANK_TOLERANCE * largest)) {
        return Err(Error::RankDeficient { column });
    }
    Ok((q, r))
}

/// Pulls a cotangent on `Q` back to `W` through the thin QR `W = QR`.
///
/// With `B = QᵀQ̄` and `S = tril₋₁(B − Bᵀ)` this evaluates
/// `W̄ = (Q̄ + Q(S − B)) R⁻ᵀ`.
pub fn qr_backward(w: &Matrix, q: &Matrix, r: &Matrix, q_bar: &Matrix) -> Result<Matrix> {
    let (m, n) = w.shape();
    ensure(q.shape() == (m, n) && q_bar.shape() == (m, n) && r.shape() == (n, n), || {
        format!(
            "qr_backward shape mismatch: W {:?}, Q {:?}, R {:?}, dQ {:?}",
            w.shape(),
            q.shape(),
            r.shape(),
            q_bar.shape()
        )
    })?;
    ensure_finite(q_bar.as_slice(), "qr_backward cotangent")?;
    for j in 0..n {
        let d = r.get(j, j);
        if !(d.abs() >= RANK_TOLERANCE) {
            return Err(Error::IllConditioned { index: j, value: d });
        }
    }

    let b = q.t_matmul(q_bar)?;
    let mut inner = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s = if i > j { b.get(i, j) - b.get(j, i) } else { 0.0 };
            inner.set(i, j, s - b.get(i, j));
        }
    }
    let mut y = q.matmul(&inner)?.add(q_bar)?;

    // Solve X Rᵀ = Y row by row: R xᵀ = yᵀ by back substitution.
    for i in 0..m {
        let row = y.row_mut(i);
        for k in (0..n).rev() {
            let mut s = row[k];
            for c in k + 1..n {
                s -= r.get(k, c) * row[c];
            }
            row[k] = s / r.get(k, k);
        }
    }
    Ok(y)
}
