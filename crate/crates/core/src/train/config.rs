use serde::{Deserialize, Serialize};

use super::{Result, TrainError};

/// Optimisation settings. Defaults follow the captioner recipe at full
/// scale; desk-scale runs override batch size, learning rate and warmup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub min_lr_ratio: f64,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub empty_alt_prob: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            peak_lr: 1e-3,
            warmup_steps: 2000,
            min_lr_ratio: 0.1,
            pretrain_epochs: 1,
            finetune_epochs: 4,
            empty_alt_prob: 0.5,
            weight_decay: 0.01,
            grad_clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return bad(format!("peak_lr must be positive, got {}", self.peak_lr));
        }
        if !(self.min_lr_ratio > 0.0 && self.min_lr_ratio <= 1.0) {
            return bad(format!(
                "min_lr_ratio must be in (0, 1], got {}",
                self.min_lr_ratio
            ));
        }
        if !(0.0..=1.0).contains(&self.empty_alt_prob) {
            return bad(format!(
                "empty_alt_prob must be in [0, 1], got {}",
                self.empty_alt_prob
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad(format!(
                "grad_clip_norm must be positive, got {}",
                self.grad_clip_norm
            ));
        }
        Ok(())
    }

    /// Optimizer steps for `items` examples over `epochs` (the last partial
    /// batch of each epoch counts as a step).
    pub fn steps_for(&self, items: usize, epochs: usize) -> usize {
        items.div_ceil(self.batch_size) * epochs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn paper_step_arithmetic() {
        let c = TrainConfig::default();
        let steps = c.steps_for(22_000_000, 1);
        assert_eq!(steps, 42_969);
        assert!((43_000i64 - steps as i64).abs() < 100);
    }

    #[test]
    fn toy_finetune_steps() {
        let c = TrainConfig {
            batch_size: 4,
            ..Default::default()
        };
        assert_eq!(c.steps_for(16, 4), 16);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            TrainConfig {
                empty_alt_prob: 1.5,
                ..Default::default()
            },
            TrainConfig {
                min_lr_ratio: 0.0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                grad_clip_norm: 0.0,
                ..Default::default()
            },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
