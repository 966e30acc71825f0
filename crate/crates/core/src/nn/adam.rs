use super::Scalar;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam optimizer state for one flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<F>,
    v: Vec<F>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
            t: 0,
            m: vec![F::zero(); num_params],
            v: vec![F::zero(); num_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update of `params` along `grads`.
    pub fn apply(&mut self, params: &mut [F], grads: &[F]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam state for {} parameters got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (F::from_f64(self.beta1), F::from_f64(self.beta2));
        let (one_b1, one_b2) = (F::from_f64(1.0 - self.beta1), F::from_f64(1.0 - self.beta2));
        let step = F::from_f64(self.lr / (1.0 - self.beta1.powi(t)));
        let v_corr = F::from_f64(1.0 / (1.0 - self.beta2.powi(t)));
        let eps = F::from_f64(self.eps);
        for i in 0..params.len() {
            let g = grads[i];
            let m = b1 * self.m[i] + one_b1 * g;
            let v = b2 * self.v[i] + one_b2 * g * g;
            self.m[i] = m;
            self.v[i] = v;
            params[i] = params[i] - step * m / ((v * v_corr).sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0f64, -0.02, 1e-3] {
            let mut p = [1.0f64];
            let mut adam = Adam::new(1, 0.0005);
            adam.apply(&mut p, &[g]).unwrap();
            // m̂ = g, v̂ = g², so the step is lr · g / (|g| + eps).
            let want = 1.0 - 0.0005 * g / (g.abs() + 1e-8);
            assert!((p[0] - want).abs() < 1e-15, "{} vs {want}", p[0]);
            assert!((p[0] - (1.0 - 0.0005 * g.signum())).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut p = [0.25f64, -4.0];
        let mut adam = Adam::new(2, 0.1);
        adam.apply(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, [0.25, -4.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn two_constant_steps_closed_form() {
        let (lr, g) = (0.01f64, 0.5f64);
        let mut p = [0.0f64];
        let mut adam = Adam::new(1, lr);
        adam.apply(&mut p, &[g]).unwrap();
        let after_one = p[0];
        adam.apply(&mut p, &[g]).unwrap();
        // With a constant gradient both bias-corrected moments equal g and g².
        let step = lr * g / (g + 1e-8);
        assert!((after_one + step).abs() < 1e-15);
        assert!((p[0] + 2.0 * step).abs() < 1e-12);
        assert!(p[0] < after_one && after_one < 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut adam = Adam::<f32>::new(2, 0.1);
        assert!(adam.apply(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(adam.apply(&mut [0.0; 2], &[0.0; 1]).is_err());
    }
}
