use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::textproc::{BOS, BYTE_BASE, EMPTY_ALT, EOS, PAD};

use super::forward::{check_image, mapping_forward};
use super::ops;
use super::{DecodeConfig, ModelError, ModelParams, Result};

/// Visual tokens (`n_visual × d_model`, row-major) for one image embedding.
pub fn map_embedding(params: &ModelParams, image: &[f64]) -> Result<Vec<f64>> {
    check_image(params, image)?;
    Ok(mapping_forward(params, image).0)
}

/// Decoder that consumes one position at a time, caching keys and values.
/// Feeding the same positions as a full forward pass yields the same
/// logits up to rounding.
pub struct IncrementalDecoder<'a> {
    params: &'a ModelParams,
    visual: Vec<f64>,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    last: Vec<f64>,
    len: usize,
}

impl<'a> IncrementalDecoder<'a> {
    pub fn new(params: &'a ModelParams, image: &[f64]) -> Result<Self> {
        let visual = map_embedding(params, image)?;
        let layers = params.config.n_decoder_layers;
        Ok(Self {
            params,
            visual,
            keys: vec![Vec::new(); layers],
            values: vec![Vec::new(); layers],
            last: Vec::new(),
            len: 0,
        })
    }

    /// Rows consumed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Feed the visual token for position `pos` (`pos < n_visual`).
    pub fn push_visual(&mut self, pos: usize) {
        let d = self.params.config.d_model;
        let x = self.visual[pos * d..(pos + 1) * d].to_vec();
        self.push_input(x, pos);
    }

    /// Feed token `id` at absolute position `pos`.
    pub fn push_token(&mut self, id: u32, pos: usize) {
        let d = self.params.config.d_model;
        let tok = self.params.slice(self.params.layout.tok_emb);
        let x = tok[id as usize * d..(id as usize + 1) * d].to_vec();
        self.push_input(x, pos);
    }

    fn push_input(&mut self, mut x: Vec<f64>, pos: usize) {
        let p = self.params;
        let c = &p.config;
        let d = c.d_model;
        let hdim = c.mlp_dim();
        let heads = c.n_heads;
        let hd = c.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let pe = &p.slice(p.layout.pos_emb)[pos * d..(pos + 1) * d];
        for (a, b) in x.iter_mut().zip(pe) {
            *a += b;
        }
        let t = self.len + 1;
        for (li, b) in p.layout.dec_blocks.iter().enumerate() {
            let (h1, _) = ops::layer_norm(&x, p.slice(b.ln1_g), p.slice(b.ln1_b), 1, d);
            let q = ops::linear(&h1, p.slice(b.wq), p.slice(b.bq), 1, d, d);
            let k = ops::linear(&h1, p.slice(b.wk), p.slice(b.bk), 1, d, d);
            let v = ops::linear(&h1, p.slice(b.wv), p.slice(b.bv), 1, d, d);
            self.keys[li].extend_from_slice(&k);
            self.values[li].extend_from_slice(&v);
            let keys = &self.keys[li];
            let values = &self.values[li];
            let mut att = vec![0.0; d];
            let mut scores = vec![0.0; t];
            for h in 0..heads {
                let off = h * hd;
                for (j, s) in scores.iter_mut().enumerate() {
                    *s = (0..hd)
                        .map(|c| q[off + c] * keys[j * d + off + c])
                        .sum::<f64>()
                        * scale;
                }
                ops::softmax_in_place(&mut scores);
                for (j, &w) in scores.iter().enumerate() {
                    for c in 0..hd {
                        att[off + c] += w * values[j * d + off + c];
                    }
                }
            }
            let proj = ops::linear(&att, p.slice(b.wo), p.slice(b.bo), 1, d, d);
            for (a, b) in x.iter_mut().zip(&proj) {
                *a += b;
            }
            let (h2, _) = ops::layer_norm(&x, p.slice(b.ln2_g), p.slice(b.ln2_b), 1, d);
            let mut pre = ops::linear(&h2, p.slice(b.fc1_w), p.slice(b.fc1_b), 1, d, hdim);
            for u in pre.iter_mut() {
                *u = ops::gelu(*u);
            }
            let mlp = ops::linear(&pre, p.slice(b.fc2_w), p.slice(b.fc2_b), 1, hdim, d);
            for (a, b) in x.iter_mut().zip(&mlp) {
                *a += b;
            }
        }
        self.last = x;
        self.len = t;
    }

    /// Next-token logits after the most recent position.
    pub fn logits(&self) -> Vec<f64> {
        let p = self.params;
        let l = &p.layout;
        let d = p.config.d_model;
        let (hn, _) = ops::layer_norm(&self.last, p.slice(l.ln_f_g), p.slice(l.ln_f_b), 1, d);
        ops::linear(
            &hn,
            p.slice(l.head_w),
            p.slice(l.head_b),
            1,
            d,
            p.config.vocab_size,
        )
    }
}

/// Token indices kept by nucleus truncation: the smallest most-probable
/// set whose cumulative probability reaches `top_p`, in descending order
/// of probability (ties broken by index).
pub fn nucleus_set(probs: &[f64], top_p: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut cum = 0.0;
    let mut keep = 0;
    for &i in &order {
        cum += probs[i];
        keep += 1;
        if cum >= top_p {
            break;
        }
    }
    order.truncate(keep);
    order
}

fn is_banned(id: usize) -> bool {
    id == PAD as usize || id == BOS as usize || id == EMPTY_ALT as usize
}

/// Pick the next token: greedy argmax when `temperature == 0`, otherwise
/// temperature scaling, nucleus truncation and a draw from `rng`.
/// PAD, BOS and EMPTY_ALT are never produced.
pub fn sample_token<R: Rng + ?Sized>(
    logits: &[f64],
    temperature: f64,
    top_p: f64,
    rng: &mut R,
) -> u32 {
    if temperature == 0.0 {
        let mut best = None;
        for (i, &z) in logits.iter().enumerate() {
            if is_banned(i) {
                continue;
            }
            match best {
                Some((_, bz)) if z <= bz => {}
                _ => best = Some((i, z)),
            }
        }
        return best.map(|(i, _)| i as u32).unwrap_or(EOS);
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            if is_banned(i) {
                f64::NEG_INFINITY
            } else {
                z / temperature
            }
        })
        .collect();
    ops::softmax_in_place(&mut probs);
    let keep = nucleus_set(&probs, top_p);
    let mass: f64 = keep.iter().map(|&i| probs[i]).sum();
    let mut u = rng.random::<f64>() * mass;
    for &i in &keep {
        u -= probs[i];
        if u < 0.0 {
            return i as u32;
        }
    }
    *keep.last().unwrap_or(&(EOS as usize)) as u32
}

/// Extra generation controls used by benchmarking.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Ignore EOS and always emit `max_tokens` tokens.
    pub force_full: bool,
    /// Feed exactly this many alt positions (cycling `alt_ids`, or a filler
    /// byte token when empty); `Some(0)` skips the alt region entirely.
    pub alt_slots: Option<usize>,
}

/// Caption token ids (without BOS/EOS) sampled for `image` conditioned on
/// `alt_ids`. An empty `alt_ids` conditions on the EMPTY_ALT token.
pub fn generate(
    params: &ModelParams,
    image: &[f64],
    alt_ids: &[u32],
    cfg: &DecodeConfig,
) -> Result<Vec<u32>> {
    generate_with(params, image, alt_ids, cfg, GenerateOptions::default())
}

pub fn generate_with(
    params: &ModelParams,
    image: &[f64],
    alt_ids: &[u32],
    cfg: &DecodeConfig,
    opts: GenerateOptions,
) -> Result<Vec<u32>> {
    let c = &params.config;
    cfg.validate(c)?;
    if let Some(&bad) = alt_ids.iter().find(|&&t| t as usize >= c.vocab_size) {
        return Err(ModelError::Domain(format!(
            "alt token {bad} is outside the vocabulary"
        )));
    }
    let mut dec = IncrementalDecoder::new(params, image)?;
    for pos in 0..c.n_visual {
        dec.push_visual(pos);
    }
    match opts.alt_slots {
        Some(n) => {
            let filler = [BYTE_BASE.min(c.vocab_size as u32 - 1)];
            let src: &[u32] = if alt_ids.is_empty() { &filler } else { alt_ids };
            for j in 0..n.min(c.m_alt) {
                dec.push_token(src[j % src.len()], c.n_visual + j);
            }
        }
        None => {
            let empty = [EMPTY_ALT];
            let alt: &[u32] = if alt_ids.is_empty() { &empty } else { alt_ids };
            for (j, &t) in alt.iter().take(c.m_alt).enumerate() {
                if t != PAD {
                    dec.push_token(t, c.n_visual + j);
                }
            }
        }
    }
    let start = c.caption_start();
    dec.push_token(BOS, start);
    let max_tokens = cfg.max_tokens.min(c.caption_capacity());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(max_tokens);
    while out.len() < max_tokens {
        let mut logits = dec.logits();
        if opts.force_full {
            logits[EOS as usize] = f64::NEG_INFINITY;
        }
        let tok = sample_token(&logits, cfg.temperature, cfg.top_p, &mut rng);
        if tok == EOS {
            break;
        }
        out.push(tok);
        if out.len() < max_tokens {
            dec.push_token(tok, start + out.len());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward::row_logits;
    use crate::model::{init_model, layout_sequence, ModelConfig};

    fn tiny() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_decoder_layers: 2,
            n_mapping_layers: 1,
            vocab_size: 24,
            image_embed_dim: 5,
            n_visual: 3,
            m_alt: 4,
            max_gen: 8,
        }
    }

    fn image(seed: f64) -> Vec<f64> {
        (0..5).map(|i| (i as f64 * 1.3 + seed).cos()).collect()
    }

    #[test]
    fn default_visual_shape() {
        let c = ModelConfig {
            vocab_size: 300,
            d_model: 16,
            ..ModelConfig::default()
        };
        let p = init_model(c, 0).unwrap();
        let v = map_embedding(&p, &vec![0.1; c.image_embed_dim]).unwrap();
        assert_eq!(v.len(), 40 * 16);
    }

    #[test]
    fn map_embedding_validation_and_sensitivity() {
        let p = init_model(tiny(), 1).unwrap();
        assert!(matches!(
            map_embedding(&p, &[0.0; 4]),
            Err(ModelError::Shape { .. })
        ));
        assert!(matches!(
            map_embedding(&p, &[0.0, 0.0, f64::NAN, 0.0, 0.0]),
            Err(ModelError::Domain(_))
        ));
        let a = map_embedding(&p, &image(0.0)).unwrap();
        assert_eq!(a, map_embedding(&p, &image(0.0)).unwrap());
        let b = map_embedding(&p, &image(2.0)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn incremental_matches_full_forward() {
        let c = tiny();
        let p = init_model(c, 2).unwrap();
        let img = image(0.5);
        let row = layout_sequence(&[5, 6, 7], &[9, 10, 11], &c);
        let full = row_logits(&p, &row, &img);
        let mut dec = IncrementalDecoder::new(&p, &img).unwrap();
        for (q, logits) in &full {
            if *q < c.n_visual {
                dec.push_visual(*q);
            } else {
                dec.push_token(row.ids[*q], *q);
            }
            for (a, b) in dec.logits().iter().zip(logits) {
                assert!((a - b).abs() < 1e-10, "position {q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn nucleus_example() {
        assert_eq!(nucleus_set(&[0.5, 0.3, 0.2], 0.7), vec![0, 1]);
        assert_eq!(nucleus_set(&[0.2, 0.3, 0.5], 0.5), vec![2]);
        assert_eq!(nucleus_set(&[0.5, 0.3, 0.2], 1.0), vec![0, 1, 2]);
    }

    #[test]
    fn nucleus_sampling_never_leaves_set() {
        let probs = [0.5f64, 0.3, 0.2];
        let mut logits = vec![f64::NEG_INFINITY; 7];
        for (i, p) in probs.iter().enumerate() {
            logits[4 + i] = p.ln();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [0usize; 7];
        for _ in 0..5000 {
            seen[sample_token(&logits, 1.0, 0.7, &mut rng) as usize] += 1;
        }
        assert_eq!(seen[6], 0);
        assert!(seen[4] > 0 && seen[5] > 0);
        let frac = seen[4] as f64 / 5000.0;
        assert!((frac - 0.625).abs() < 0.03, "renormalised share {frac}");
    }

    #[test]
    fn greedy_is_deterministic_and_capped() {
        let c = tiny();
        let mut p = init_model(c, 4).unwrap();
        let hb = p.layout.head_b;
        p.slice_mut(hb)[EOS as usize] = -50.0;
        let cfg = DecodeConfig::greedy(8);
        let a = generate(&p, &image(1.0), &[5, 6], &cfg).unwrap();
        assert_eq!(a, generate(&p, &image(1.0), &[5, 6], &cfg).unwrap());
        assert_eq!(a.len(), c.caption_capacity());
        let one = generate(&p, &image(1.0), &[5, 6], &DecodeConfig::greedy(1)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(a.iter().all(|&t| !is_banned(t as usize) && t != EOS));
    }

    #[test]
    fn seeded_sampling_reproducible() {
        let p = init_model(tiny(), 5).unwrap();
        let cfg = DecodeConfig {
            temperature: 1.0,
            top_p: 0.9,
            max_tokens: 6,
            seed: 11,
        };
        let a = generate(&p, &image(0.2), &[], &cfg).unwrap();
        assert_eq!(a, generate(&p, &image(0.2), &[], &cfg).unwrap());
    }

    #[test]
    fn force_full_ignores_eos() {
        let c = tiny();
        let mut p = init_model(c, 6).unwrap();
        let hb = p.layout.head_b;
        p.slice_mut(hb)[EOS as usize] = 50.0;
        let cfg = DecodeConfig::greedy(8);
        assert!(generate(&p, &image(0.0), &[5], &cfg).unwrap().is_empty());
        let opts = GenerateOptions {
            force_full: true,
            alt_slots: Some(4),
        };
        assert_eq!(
            generate_with(&p, &image(0.0), &[5], &cfg, opts)
                .unwrap()
                .len(),
            c.caption_capacity()
        );
    }
}
