use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Adam optimizer state for a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(dim: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step: 0,
            beta1: Self::DEFAULT_BETA1,
            beta2: Self::DEFAULT_BETA2,
            learning_rate,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn dim(&self) -> usize {
        self.first_moment.len()
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Consumes the state and returns the new one.
    pub fn step(mut self, mut params: Vec<f64>, grad: &[f64]) -> Result<(Vec<f64>, AdamState)> {
        ensure(params.len() == self.dim() && grad.len() == self.dim(), || {
            format!(
                "adam dimension mismatch: state {}, params {}, grad {}",
                self.dim(),
                params.len(),
                grad.len()
            )
        })?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                iteration: self.step as usize,
                what: format!("non-finite gradient entry {i}"),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok((params, self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let (p, s) = AdamState::new(3, 0.1)
            .step(vec![1.0, -2.0, 3.0], &[0.0; 3])
            .unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.steps_taken(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (p, _) = AdamState::new(1, 0.1).step(vec![0.0], &[1.0]).unwrap();
        // m̂ = v̂ = 1, so the step is lr / (1 + eps).
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!((p[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut state = AdamState::new(1, 0.1);
        let mut x = vec![5.0];
        for _ in 0..2000 {
            let g = [2.0 * x[0]];
            (x, state) = state.step(x, &g).unwrap();
        }
        assert!(x[0].abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn non_finite_gradient_reports_iteration() {
        let (p, s) = AdamState::new(1, 0.1).step(vec![0.0], &[1.0]).unwrap();
        match s.step(p, &[f64::NAN]) {
            Err(Error::Divergence { iteration, .. }) => assert_eq!(iteration, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(AdamState::new(2, 0.1).step(vec![0.0], &[1.0]).is_err());
    }
}
