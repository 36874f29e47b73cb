/// Adaptive-moment optimiser with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(n_params: usize, weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update. Decay applies only where `decay_mask` is set.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, decay_mask: &[bool]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            if decay_mask[i] {
                params[i] -= lr * self.weight_decay * params[i];
            }
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

pub fn global_norm(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescale `grad` so its global norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = global_norm(grad);
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = AdamW::new(2, 0.0);
        let mut p = vec![1.0, -1.0];
        opt.step(&mut p, &[0.5, -3.0], 0.1, &[false, false]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn decay_is_decoupled_and_masked() {
        let mut opt = AdamW::new(2, 0.5);
        let mut p = vec![2.0, 2.0];
        opt.step(&mut p, &[0.0, 0.0], 0.1, &[true, false]);
        assert!((p[0] - 1.9).abs() < 1e-12);
        assert_eq!(p[1], 2.0);
    }

    #[test]
    fn minimises_quadratic() {
        let mut opt = AdamW::new(1, 0.0);
        let mut p = vec![5.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 3.0)];
            opt.step(&mut p, &g, 0.05, &[false]);
        }
        assert!((p[0] - 3.0).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn clipping_bounds_norm(g in proptest::collection::vec(-100.0f64..100.0, 1..50), max in 0.01f64..10.0) {
            let mut g = g;
            let before = clip_grad_norm(&mut g, max);
            let after = global_norm(&g);
            if before > max {
                prop_assert!(after <= max + 1e-12);
            } else {
                prop_assert!((after - before).abs() < 1e-12);
            }
        }
    }
}
