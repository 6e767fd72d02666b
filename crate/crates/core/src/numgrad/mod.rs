//! Dense linear algebra, Adam, differentiable thin QR and a finite-difference checker.
//!
//! Everything here is `f64` and pure: functions take their inputs by reference (or by
//! value when they hand back an updated state) and never keep hidden state.

mod adam;
mod finite_diff;
mod matrix;
mod qr;

pub use adam::AdamState;
pub use finite_diff::{finite_diff_grad, relative_error};
pub use matrix::{dot, norm, Matrix};
pub use qr::{qr_backward, qr_thin, RANK_TOLERANCE};

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
