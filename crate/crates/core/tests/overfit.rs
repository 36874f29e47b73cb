use std::time::Instant;

use altogether_core::model::{forward_loss, generate, init_model, DecodeConfig, ModelConfig};
use altogether_core::par::Exec;
use altogether_core::textproc::BYTE_BASE;
use altogether_core::train::{build_batch, pretrain, Example, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy() -> ModelConfig {
    ModelConfig {
        d_model: 32,
        n_heads: 4,
        n_decoder_layers: 2,
        n_mapping_layers: 1,
        vocab_size: 48,
        image_embed_dim: 8,
        n_visual: 2,
        m_alt: 4,
        max_gen: 10,
    }
}

fn triples(c: &ModelConfig, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut ChaCha8Rng| rng.random_range(BYTE_BASE..c.vocab_size as u32);
    (0..n)
        .map(|i| Example {
            id: format!("t{i}"),
            image: (0..c.image_embed_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            alt_ids: (0..rng.random_range(1..=c.m_alt))
                .map(|_| word(&mut rng))
                .collect(),
            caption_ids: (0..rng.random_range(2..=c.max_gen - 2))
                .map(|_| word(&mut rng))
                .collect(),
        })
        .collect()
}

#[test]
fn sixteen_triples_are_memorised() {
    let c = toy();
    let ex = triples(&c, 16, 11);
    let mut p = init_model(c, 3).unwrap();
    let cfg = TrainConfig {
        batch_size: 16,
        peak_lr: 3e-3,
        warmup_steps: 100,
        pretrain_epochs: 2000,
        empty_alt_prob: 0.0,
        weight_decay: 0.0,
        ..Default::default()
    };
    let start = Instant::now();
    let report = pretrain(&mut p, &ex, &cfg, Exec::default(), None).unwrap();
    assert!(report.steps.len() <= 2000);

    let refs: Vec<&Example> = ex.iter().collect();
    let batch = build_batch(&refs, &[false; 16], &p.config).unwrap();
    let loss = forward_loss(&p, &batch).unwrap().mean;
    assert!(loss < 0.05, "loss {loss}");

    let greedy = DecodeConfig::greedy(c.max_gen);
    for e in &ex {
        assert_eq!(
            generate(&p, &e.image, &e.alt_ids, &greedy).unwrap(),
            e.caption_ids,
            "{}",
            e.id
        );
    }
    assert!(start.elapsed().as_secs() < 300, "{:?}", start.elapsed());
}
