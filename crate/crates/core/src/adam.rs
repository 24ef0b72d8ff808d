use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }

    /// One update of `params` in place. Non-finite gradients are rejected
    /// before anything is modified.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n || grads.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: if params.len() != n { params.len() } else { grads.len() },
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..n {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            params[i] -= self.learning_rate * (m / c1) / ((v / c2).sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 0.05);
        let mut p = vec![1.0, -2.0, 3.0];
        s.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::new(1, 0.05);
        let mut p = vec![0.0];
        s.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + 0.05).abs() < 1e-6);
    }

    #[test]
    fn second_step_is_monotone_and_bounded() {
        let mut s = AdamState::new(1, 0.05);
        let mut p = vec![0.0];
        s.step(&mut p, &[1.0]).unwrap();
        let after_one = p[0];
        s.step(&mut p, &[1.0]).unwrap();
        let second = after_one - p[0];
        assert!(second > 0.0 && second <= 0.05);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut s = AdamState::new(2, 0.05);
        let mut p = vec![1.0, 1.0];
        match s.step(&mut p, &[0.5, f64::NAN]) {
            Err(Error::NonFiniteGradient { index: 1 }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(s.step_count, 0);
        assert!(s.step(&mut p, &[1.0]).is_err());
    }
}
