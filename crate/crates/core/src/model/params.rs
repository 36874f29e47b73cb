use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError, Result};

/// A named slice of the flat parameter vector. Matrices are row-major
/// `[rows × cols]`; linear layers compute `y = x · W + b` with `W` stored
/// as `[in × out]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpec {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// One pre-LN transformer block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub ln1_g: TensorSpec,
    pub ln1_b: TensorSpec,
    pub wq: TensorSpec,
    pub bq: TensorSpec,
    pub wk: TensorSpec,
    pub bk: TensorSpec,
    pub wv: TensorSpec,
    pub bv: TensorSpec,
    pub wo: TensorSpec,
    pub bo: TensorSpec,
    pub ln2_g: TensorSpec,
    pub ln2_b: TensorSpec,
    pub fc1_w: TensorSpec,
    pub fc1_b: TensorSpec,
    pub fc2_w: TensorSpec,
    pub fc2_b: TensorSpec,
}

impl BlockLayout {
    #[cfg(test)]
    fn tensors(&self) -> [TensorSpec; 16] {
        [
            self.ln1_g, self.ln1_b, self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo,
            self.bo, self.ln2_g, self.ln2_b, self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b,
        ]
    }
}

/// Offsets of every tensor, in declaration (and serialization) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub tok_emb: TensorSpec,
    pub pos_emb: TensorSpec,
    pub map_in_w: TensorSpec,
    pub map_in_b: TensorSpec,
    pub map_queries: TensorSpec,
    pub map_blocks: Vec<BlockLayout>,
    pub map_ln_g: TensorSpec,
    pub map_ln_b: TensorSpec,
    pub dec_blocks: Vec<BlockLayout>,
    pub ln_f_g: TensorSpec,
    pub ln_f_b: TensorSpec,
    pub head_w: TensorSpec,
    pub head_b: TensorSpec,
    pub total: usize,
}

struct Alloc(usize);

impl Alloc {
    fn take(&mut self, rows: usize, cols: usize) -> TensorSpec {
        let t = TensorSpec {
            offset: self.0,
            rows,
            cols,
        };
        self.0 += rows * cols;
        t
    }

    fn block(&mut self, d: usize, h: usize) -> BlockLayout {
        BlockLayout {
            ln1_g: self.take(1, d),
            ln1_b: self.take(1, d),
            wq: self.take(d, d),
            bq: self.take(1, d),
            wk: self.take(d, d),
            bk: self.take(1, d),
            wv: self.take(d, d),
            bv: self.take(1, d),
            wo: self.take(d, d),
            bo: self.take(1, d),
            ln2_g: self.take(1, d),
            ln2_b: self.take(1, d),
            fc1_w: self.take(d, h),
            fc1_b: self.take(1, h),
            fc2_w: self.take(h, d),
            fc2_b: self.take(1, d),
        }
    }
}

impl Layout {
    pub fn new(c: &ModelConfig) -> Self {
        let d = c.d_model;
        let h = c.mlp_dim();
        let mut a = Alloc(0);
        let tok_emb = a.take(c.vocab_size, d);
        let pos_emb = a.take(c.total_len(), d);
        let map_in_w = a.take(c.image_embed_dim, d);
        let map_in_b = a.take(1, d);
        let map_queries = a.take(c.n_visual, d);
        let map_blocks = (0..c.n_mapping_layers).map(|_| a.block(d, h)).collect();
        let map_ln_g = a.take(1, d);
        let map_ln_b = a.take(1, d);
        let dec_blocks = (0..c.n_decoder_layers).map(|_| a.block(d, h)).collect();
        let ln_f_g = a.take(1, d);
        let ln_f_b = a.take(1, d);
        let head_w = a.take(d, c.vocab_size);
        let head_b = a.take(1, c.vocab_size);
        Layout {
            tok_emb,
            pos_emb,
            map_in_w,
            map_in_b,
            map_queries,
            map_blocks,
            map_ln_g,
            map_ln_b,
            dec_blocks,
            ln_f_g,
            ln_f_b,
            head_w,
            head_b,
            total: a.0,
        }
    }

    /// Mask of coordinates subject to weight decay (the linear weight
    /// matrices; embeddings, norms and biases are excluded).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        let mut mark = |t: TensorSpec| mask[t.range()].iter_mut().for_each(|m| *m = true);
        mark(self.map_in_w);
        mark(self.head_w);
        for b in self.map_blocks.iter().chain(&self.dec_blocks) {
            for t in [b.wq, b.wk, b.wv, b.wo, b.fc1_w, b.fc2_w] {
                mark(t);
            }
        }
        mask
    }

    #[cfg(test)]
    fn all_tensors(&self) -> Vec<TensorSpec> {
        let mut v = vec![
            self.tok_emb,
            self.pos_emb,
            self.map_in_w,
            self.map_in_b,
            self.map_queries,
        ];
        for b in &self.map_blocks {
            v.extend(b.tensors());
        }
        v.extend([self.map_ln_g, self.map_ln_b]);
        for b in &self.dec_blocks {
            v.extend(b.tensors());
        }
        v.extend([self.ln_f_g, self.ln_f_b, self.head_w, self.head_b]);
        v
    }
}

/// Configuration plus the flat `f64` parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters with the right shapes.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let data = vec![0.0; layout.total];
        Ok(Self {
            config,
            layout,
            data,
        })
    }

    pub fn from_data(config: ModelConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if data.len() != layout.total {
            return Err(ModelError::Shape {
                expected: layout.total,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::Domain(format!("parameter {i} is not finite")));
        }
        Ok(Self {
            config,
            layout,
            data,
        })
    }

    pub fn param_count(&self) -> usize {
        self.data.len()
    }

    pub fn slice(&self, t: TensorSpec) -> &[f64] {
        &self.data[t.range()]
    }

    pub fn slice_mut(&mut self, t: TensorSpec) -> &mut [f64] {
        &mut self.data[t.range()]
    }
}

/// Seeded initialization: linear weights `N(0, 1/fan_in)` with residual
/// output projections further scaled by `1/sqrt(2L)`, embeddings and
/// mapping queries `N(0, 1)` so every layer-norm input starts at unit
/// scale, layer-norm gains 1, biases 0.
pub fn init_model(config: ModelConfig, seed: u64) -> Result<ModelParams> {
    let mut p = ModelParams::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = p.layout.clone();
    let depth_scale = |n: usize| 1.0 / ((2 * n.max(1)) as f64).sqrt();

    let mut normal = |p: &mut ModelParams, t: TensorSpec, std: f64| {
        let dist = Normal::new(0.0, std).expect("positive std");
        for v in p.slice_mut(t) {
            *v = dist.sample(&mut rng);
        }
    };
    let fan = |t: TensorSpec| 1.0 / (t.rows as f64).sqrt();

    normal(&mut p, layout.tok_emb, 1.0);
    normal(&mut p, layout.pos_emb, 1.0);
    normal(&mut p, layout.map_in_w, fan(layout.map_in_w));
    normal(&mut p, layout.map_queries, 1.0);
    for (blocks, n) in [
        (&layout.map_blocks, config.n_mapping_layers),
        (&layout.dec_blocks, config.n_decoder_layers),
    ] {
        for b in blocks {
            for t in [b.wq, b.wk, b.wv, b.fc1_w] {
                normal(&mut p, t, fan(t));
            }
            for t in [b.wo, b.fc2_w] {
                normal(&mut p, t, fan(t) * depth_scale(n));
            }
            for t in [b.ln1_g, b.ln2_g] {
                p.slice_mut(t).fill(1.0);
            }
        }
    }
    for t in [layout.map_ln_g, layout.ln_f_g] {
        p.slice_mut(t).fill(1.0);
    }
    normal(&mut p, layout.head_w, fan(layout.head_w));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_decoder_layers: 2,
            n_mapping_layers: 1,
            vocab_size: 20,
            image_embed_dim: 5,
            n_visual: 3,
            m_alt: 4,
            max_gen: 6,
        }
    }

    #[test]
    fn deterministic_init() {
        let a = init_model(tiny(), 7).unwrap();
        let b = init_model(tiny(), 7).unwrap();
        assert_eq!(a.data, b.data);
        let c = init_model(tiny(), 8).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn param_count_matches_hand_sum() {
        let c = tiny();
        let (d, v, t, e, nv) = (8, 20, 13, 5, 3);
        let block = 2 * d + 4 * (d * d + d) + 2 * d + (d * 4 * d + 4 * d) + (4 * d * d + d);
        let expected =
            v * d + t * d + e * d + d + nv * d + block + 2 * d + 2 * block + 2 * d + d * v + v;
        let p = init_model(c, 0).unwrap();
        assert_eq!(p.param_count(), expected);
    }

    #[test]
    fn tensors_tile_the_vector() {
        let l = Layout::new(&tiny());
        let mut next = 0;
        for t in l.all_tensors() {
            assert_eq!(t.offset, next);
            next += t.len();
        }
        assert_eq!(next, l.total);
    }

    #[test]
    fn biases_zero_gains_one() {
        let p = init_model(tiny(), 1).unwrap();
        let b = p.layout.dec_blocks[0];
        assert!(p.slice(b.bq).iter().all(|&v| v == 0.0));
        assert!(p.slice(b.ln1_g).iter().all(|&v| v == 1.0));
        assert!(p.slice(p.layout.head_b).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_finite_data() {
        let p = init_model(tiny(), 1).unwrap();
        let mut data = p.data.clone();
        data[3] = f64::NAN;
        assert!(matches!(
            ModelParams::from_data(tiny(), data),
            Err(ModelError::Domain(_))
        ));
    }
}
