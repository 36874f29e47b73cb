use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{forward_loss, loss_and_grad, ModelParams, SequenceBatch};
use crate::par::Exec;

use super::{Result, TrainError};

/// The relative-error denominator never drops below this fraction of the
/// largest analytic gradient magnitude. Coordinates whose gradient is
/// tiny next to the rest are then judged by absolute error, where central
/// differences are dominated by their O(ε²) truncation term.
pub const REL_FLOOR_FRACTION: f64 = 1e-2;

const COORD_CHUNK: usize = 64;

/// Which coordinates to finite-difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCoords {
    All,
    /// A seeded random subset of distinct coordinates.
    Subset {
        count: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst `|a - n| / max(|a|, |n|, floor)`.
    pub max_rel_error: f64,
    /// Worst `|a - n| / max(|a|, |n|)` with no floor, for information.
    pub max_raw_rel_error: f64,
    pub max_abs_error: f64,
    pub floor: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub loss: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`; zero when both are zero.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let den = analytic.abs().max(numeric.abs()).max(floor);
    if den == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / den
    }
}

/// Compare the analytic gradient of the mean masked loss against central
/// differences `(L(θ + ε e_i) - L(θ - ε e_i)) / 2ε`.
pub fn grad_check(
    params: &ModelParams,
    batch: &SequenceBatch,
    epsilon: f64,
    coords: GradCoords,
    exec: Exec,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(TrainError::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = params.param_count();
    let indices: Vec<usize> = match coords {
        GradCoords::All => (0..n).collect(),
        GradCoords::Subset { count, seed } => {
            if count == 0 {
                return Err(TrainError::Config(
                    "gradient check needs at least one coordinate".into(),
                ));
            }
            if count > n {
                return Err(TrainError::Config(format!(
                    "requested {count} coordinates of {n}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = rand::seq::index::sample(&mut rng, n, count).into_vec();
            v.sort_unstable();
            v
        }
    };
    let (out, grad) = loss_and_grad(params, batch, exec)?;
    let chunks: Vec<&[usize]> = indices.chunks(COORD_CHUNK).collect();
    let numeric = exec.map(&chunks, |chunk| -> Result<Vec<f64>> {
        let mut p = params.clone();
        let mut out = Vec::with_capacity(chunk.len());
        for &i in *chunk {
            let orig = p.data[i];
            p.data[i] = orig + epsilon;
            let plus = forward_loss(&p, batch)?.mean;
            p.data[i] = orig - epsilon;
            let minus = forward_loss(&p, batch)?.mean;
            p.data[i] = orig;
            out.push((plus - minus) / (2.0 * epsilon));
        }
        Ok(out)
    });
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = (REL_FLOOR_FRACTION * gmax).max(f64::MIN_POSITIVE);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_raw_rel_error: 0.0,
        max_abs_error: 0.0,
        floor,
        worst_index: indices[0],
        analytic: grad[indices[0]],
        numeric: f64::NAN,
        checked: indices.len(),
        loss: out.mean,
    };
    let mut k = 0;
    for chunk in numeric {
        for num in chunk? {
            let i = indices[k];
            let rel = relative_error(grad[i], num, floor);
            report.max_raw_rel_error = report
                .max_raw_rel_error
                .max(relative_error(grad[i], num, 0.0));
            report.max_abs_error = report.max_abs_error.max((grad[i] - num).abs());
            if k == 0 || rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst_index = i;
                report.analytic = grad[i];
                report.numeric = num;
            }
            k += 1;
        }
    }
    Ok(report)
}
