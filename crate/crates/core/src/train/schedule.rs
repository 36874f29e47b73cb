use super::{Result, TrainConfig, TrainError};

/// Learning rate at `step` of `total_steps`: linear warmup from 0 to
/// `peak_lr` over `warmup_steps`, then cosine decay reaching exactly
/// `min_lr_ratio * peak_lr` at `total_steps`.
pub fn lr_schedule(step: usize, total_steps: usize, cfg: &TrainConfig) -> Result<f64> {
    if step > total_steps {
        return Err(TrainError::Range {
            step,
            total: total_steps,
        });
    }
    let peak = cfg.peak_lr;
    let min = peak * cfg.min_lr_ratio;
    let warmup = cfg.warmup_steps.min(total_steps);
    if step < warmup {
        return Ok(peak * step as f64 / warmup as f64);
    }
    if step == warmup {
        return Ok(peak);
    }
    if step == total_steps {
        return Ok(min);
    }
    let t = (step - warmup) as f64 / (total_steps - warmup) as f64;
    Ok(min + (peak - min) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
}
