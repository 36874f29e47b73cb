use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingMatrix};
use crate::model::{layout_sequence, loss_and_grad, ModelConfig, ModelParams, SequenceBatch};
use crate::par::Exec;
use crate::textproc::{tokenize, Vocab};

use super::{clip_grad_norm, lr_schedule, AdamW, Result, TrainConfig, TrainError};

/// One training triple: frozen image embedding, alt-text ids, target ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub image: Vec<f64>,
    pub alt_ids: Vec<u32>,
    pub caption_ids: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub steps: Vec<StepLog>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }
}

/// Per-item Bernoulli draws deciding whether the alt-text is replaced by
/// the empty-alt token. Draws depend only on the seed and their order.
#[derive(Debug, Clone)]
pub struct EmptyAltSampler {
    rng: ChaCha8Rng,
    p: f64,
}

impl EmptyAltSampler {
    pub fn new(p: f64, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            p,
        }
    }

    pub fn draw(&mut self) -> bool {
        self.rng.random::<f64>() < self.p
    }
}

/// Lay out `examples`, blanking the alt-text where `empty_alt[i]` is set.
pub fn build_batch(
    examples: &[&Example],
    empty_alt: &[bool],
    config: &ModelConfig,
) -> Result<SequenceBatch> {
    let rows = examples
        .iter()
        .zip(empty_alt)
        .map(|(e, &empty)| {
            layout_sequence(if empty { &[] } else { &e.alt_ids }, &e.caption_ids, config)
        })
        .collect();
    let images = examples.iter().map(|e| e.image.clone()).collect();
    Ok(SequenceBatch::new(rows, images)?)
}

/// Pre-training over `examples` for `cfg.pretrain_epochs`.
pub fn pretrain(
    params: &mut ModelParams,
    examples: &[Example],
    cfg: &TrainConfig,
    exec: Exec,
    log: Option<&Path>,
) -> Result<TrainReport> {
    run(params, examples, cfg.pretrain_epochs, cfg, exec, log)
}

/// Fine-tuning over `examples` for `cfg.finetune_epochs`.
pub fn finetune_examples(
    params: &mut ModelParams,
    examples: &[Example],
    cfg: &TrainConfig,
    exec: Exec,
    log: Option<&Path>,
) -> Result<TrainReport> {
    run(params, examples, cfg.finetune_epochs, cfg, exec, log)
}

/// Fine-tune on an annotated corpus: targets are each item's latest
/// round, conditioning is its original alt-text, and images come from
/// `embeddings` (looked up by item id).
#[allow(clippy::too_many_arguments)]
pub fn finetune(
    params: &mut ModelParams,
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    vocab: &Vocab,
    cfg: &TrainConfig,
    exec: Exec,
    log: Option<&Path>,
) -> Result<TrainReport> {
    let examples = corpus_examples(corpus, embeddings, vocab)?;
    finetune_examples(params, &examples, cfg, exec, log)
}

/// Training triples from a corpus, one per item, targeting the latest round.
pub fn corpus_examples(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    vocab: &Vocab,
) -> Result<Vec<Example>> {
    corpus
        .items()
        .iter()
        .map(|item| {
            let row = embeddings.by_id(&item.id).ok_or_else(|| {
                TrainError::Config(format!("no embedding for item {:?}", item.id))
            })?;
            let latest = corpus
                .latest(&item.id)
                .ok_or_else(|| TrainError::Config(format!("item {:?} has no rounds", item.id)))?;
            Ok(Example {
                id: item.id.clone(),
                image: row.iter().map(|&x| x as f64).collect(),
                alt_ids: tokenize(vocab, &item.alt_text),
                caption_ids: tokenize(vocab, &latest.caption),
            })
        })
        .collect()
}

fn run(
    params: &mut ModelParams,
    examples: &[Example],
    epochs: usize,
    cfg: &TrainConfig,
    exec: Exec,
    log: Option<&Path>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport::default();
    if epochs == 0 {
        return Ok(report);
    }
    if examples.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let total = cfg.steps_for(examples.len(), epochs);
    let mut writer = match log {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut empty = EmptyAltSampler::new(cfg.empty_alt_prob, cfg.seed.wrapping_add(1));
    let mut opt = AdamW::new(params.param_count(), cfg.weight_decay);
    let decay = params.layout.decay_mask();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0;
    for _ in 0..epochs {
        order.shuffle(&mut order_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let items: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let flags: Vec<bool> = items.iter().map(|_| empty.draw()).collect();
            let batch = build_batch(&items, &flags, &params.config)?;
            let (out, mut grad) = loss_and_grad(params, &batch, exec)?;
            let ids = || items.iter().map(|e| e.id.clone()).collect();
            if !out.mean.is_finite() {
                return Err(TrainError::NonFinite {
                    what: "loss",
                    step,
                    batch_ids: ids(),
                });
            }
            let grad_norm = clip_grad_norm(&mut grad, cfg.grad_clip_norm);
            if !grad_norm.is_finite() {
                return Err(TrainError::NonFinite {
                    what: "gradient",
                    step,
                    batch_ids: ids(),
                });
            }
            let lr = lr_schedule(step + 1, total, cfg)?;
            opt.step(&mut params.data, &grad, lr, &decay);
            let entry = StepLog {
                step,
                lr,
                loss: out.mean,
                grad_norm,
            };
            if let Some(w) = writer.as_mut() {
                serde_json::to_writer(&mut *w, &entry).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            if step % 100 == 0 {
                log::debug!(
                    "step {step}/{total} lr {lr:.3e} loss {:.4} |g| {grad_norm:.3}",
                    out.mean
                );
            }
            report.steps.push(entry);
            step += 1;
        }
    }
    if let Some(mut w) = writer {
        w.flush()?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_loss, init_model};

    fn cfg() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_decoder_layers: 1,
            n_mapping_layers: 1,
            vocab_size: 20,
            image_embed_dim: 4,
            n_visual: 2,
            m_alt: 3,
            max_gen: 6,
        }
    }

    fn examples(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example {
                id: format!("e{i}"),
                image: vec![(i as f64).sin(), (i as f64).cos(), 0.5, -0.5],
                alt_ids: vec![4 + (i % 5) as u32],
                caption_ids: vec![10 + (i % 5) as u32, 15],
            })
            .collect()
    }

    fn train_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            peak_lr: 1e-2,
            warmup_steps: 2,
            ..Default::default()
        }
    }

    #[test]
    fn step_count_and_final_lr() {
        let mut p = init_model(cfg(), 0).unwrap();
        let r =
            finetune_examples(&mut p, &examples(16), &train_cfg(), Exec::Sequential, None).unwrap();
        assert_eq!(r.steps.len(), 16);
        assert_eq!(r.steps.last().unwrap().lr, 0.1 * 1e-2);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let p0 = init_model(cfg(), 0).unwrap();
        let mut p = p0.clone();
        let c = TrainConfig {
            finetune_epochs: 0,
            ..train_cfg()
        };
        let r = finetune_examples(&mut p, &examples(16), &c, Exec::Sequential, None).unwrap();
        assert!(r.steps.is_empty());
        assert!(p
            .data
            .iter()
            .zip(&p0.data)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn deterministic_across_exec() {
        let ex = examples(10);
        let mut a = init_model(cfg(), 1).unwrap();
        let mut b = a.clone();
        let ra = pretrain(&mut a, &ex, &train_cfg(), Exec::Sequential, None).unwrap();
        let rb = pretrain(&mut b, &ex, &train_cfg(), Exec::Parallel, None).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn finetune_lowers_loss() {
        let ex = examples(16);
        let mut p = init_model(cfg(), 2).unwrap();
        let refs: Vec<&Example> = ex.iter().collect();
        let batch = build_batch(&refs, &[false; 16], &p.config).unwrap();
        let before = forward_loss(&p, &batch).unwrap().mean;
        let c = TrainConfig {
            empty_alt_prob: 0.0,
            ..train_cfg()
        };
        finetune_examples(&mut p, &ex, &c, Exec::Sequential, None).unwrap();
        let after = forward_loss(&p, &batch).unwrap().mean;
        assert!(after < before, "{after} >= {before}");
    }

    #[test]
    fn empty_alt_rate() {
        let mut s = EmptyAltSampler::new(0.5, 9);
        let n = 10_000;
        let hits = (0..n).filter(|_| s.draw()).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn log_file_has_one_line_per_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut p = init_model(cfg(), 0).unwrap();
        finetune_examples(
            &mut p,
            &examples(8),
            &train_cfg(),
            Exec::Sequential,
            Some(&path),
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<StepLog> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0].step, 0);
    }

    #[test]
    fn non_finite_reports_batch() {
        let mut p = init_model(cfg(), 0).unwrap();
        let hw = p.layout.head_w;
        p.slice_mut(hw)[0] = 1e308;
        p.slice_mut(hw)[1] = -1e308;
        let err = pretrain(&mut p, &examples(4), &train_cfg(), Exec::Sequential, None).unwrap_err();
        match err {
            TrainError::NonFinite {
                step, batch_ids, ..
            } => {
                assert_eq!(step, 0);
                assert_eq!(batch_ids.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
