use crate::error::{ensure, Error, Result};

/// Central-difference gradient estimate `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    ensure(h > 0.0 && h.is_finite(), || format!("step h must be positive, got {h}"))?;
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = eval(&mut f, &probe, i)?;
        probe[i] = x[i] - h;
        let minus = eval(&mut f, &probe, i)?;
        probe[i] = x[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

fn eval<F>(f: &mut F, x: &[f64], coord: usize) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence {
            iteration: coord,
            what: "non-finite function value during finite differencing".into(),
        })
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both are exactly zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = super::norm(a).max(super::norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
