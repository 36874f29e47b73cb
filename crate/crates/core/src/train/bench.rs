use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{generate_with, DecodeConfig, GenerateOptions, ModelConfig, ModelParams};
use crate::par::Exec;

use super::{Result, TrainError};

/// Generation throughput at one decoder layout length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sequence_length: usize,
    pub items_per_second: f64,
    pub parameter_count: usize,
    pub wall_seconds: f64,
    pub batch_size: usize,
    pub batches: usize,
    pub config_hash: String,
}

/// FNV-1a over the model configuration, as 16 hex digits.
pub fn config_hash(c: &ModelConfig) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for f in [
        c.d_model,
        c.n_heads,
        c.n_decoder_layers,
        c.n_mapping_layers,
        c.vocab_size,
        c.image_embed_dim,
        c.n_visual,
        c.m_alt,
        c.max_gen,
    ] {
        for b in (f as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Full-length generation items per second when the decoder runs over
/// `sequence_length = n_visual + alt_slots + max_gen` positions.
///
/// Each item decodes `max_gen - 2` tokens greedily with EOS suppressed.
/// One warm-up batch is run and excluded; batches then repeat until
/// `duration` has elapsed.
pub fn bench_throughput(
    params: &ModelParams,
    sequence_length: usize,
    batch_size: usize,
    duration: Duration,
    exec: Exec,
) -> Result<BenchReport> {
    let c = &params.config;
    if duration < Duration::from_secs(1) {
        return Err(TrainError::Config(
            "bench duration must be at least 1 s".into(),
        ));
    }
    if batch_size == 0 {
        return Err(TrainError::Config("batch_size must be positive".into()));
    }
    let fixed = c.n_visual + c.max_gen;
    if sequence_length < fixed || sequence_length > c.total_len() {
        return Err(TrainError::Config(format!(
            "sequence length {sequence_length} must lie in [{fixed}, {}]",
            c.total_len()
        )));
    }
    let opts = GenerateOptions {
        force_full: true,
        alt_slots: Some(sequence_length - fixed),
    };
    let decode = DecodeConfig::greedy(c.max_gen);
    let images: Vec<Vec<f64>> = (0..batch_size)
        .map(|i| {
            (0..c.image_embed_dim)
                .map(|j| ((i * 31 + j) as f64 * 0.37).sin())
                .collect()
        })
        .collect();
    let run_batch = || -> Result<()> {
        for r in exec.map(&images, |img| {
            generate_with(params, img, &[], &decode, opts)
        }) {
            r?;
        }
        Ok(())
    };
    run_batch()?;
    let start = Instant::now();
    let mut batches = 0;
    while start.elapsed() < duration {
        run_batch()?;
        batches += 1;
    }
    let wall = start.elapsed().as_secs_f64();
    Ok(BenchReport {
        sequence_length,
        items_per_second: (batches * batch_size) as f64 / wall,
        parameter_count: params.param_count(),
        wall_seconds: wall,
        batch_size,
        batches,
        config_hash: config_hash(c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    fn cfg() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_decoder_layers: 1,
            n_mapping_layers: 1,
            vocab_size: 16,
            image_embed_dim: 4,
            n_visual: 4,
            m_alt: 8,
            max_gen: 12,
        }
    }

    #[test]
    fn report_fields() {
        let p = init_model(cfg(), 0).unwrap();
        let r = bench_throughput(&p, 20, 2, Duration::from_secs(1), Exec::Sequential).unwrap();
        assert!(r.items_per_second > 0.0);
        assert!(r.wall_seconds >= 1.0);
        assert_eq!(r.parameter_count, p.param_count());
        assert_eq!(r.config_hash, config_hash(&p.config));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = init_model(cfg(), 0).unwrap();
        assert!(bench_throughput(&p, 20, 2, Duration::from_millis(500), Exec::Sequential).is_err());
        assert!(bench_throughput(&p, 15, 2, Duration::from_secs(1), Exec::Sequential).is_err());
        assert!(bench_throughput(&p, 25, 2, Duration::from_secs(1), Exec::Sequential).is_err());
    }

    #[test]
    fn hash_depends_on_config() {
        let a = cfg();
        let b = ModelConfig { m_alt: 9, ..a };
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 16);
    }
}
