use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Captioner shape. The decoder length is `n_visual + m_alt + max_gen`
/// (424 with the defaults).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_decoder_layers: usize,
    pub n_mapping_layers: usize,
    pub vocab_size: usize,
    /// Dimensionality of the frozen image embedding.
    pub image_embed_dim: usize,
    pub n_visual: usize,
    pub m_alt: usize,
    pub max_gen: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_decoder_layers: 2,
            n_mapping_layers: 1,
            vocab_size: 512,
            image_embed_dim: 64,
            n_visual: 40,
            m_alt: 128,
            max_gen: 256,
        }
    }
}

impl ModelConfig {
    pub fn total_len(&self) -> usize {
        self.n_visual + self.m_alt + self.max_gen
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn mlp_dim(&self) -> usize {
        4 * self.d_model
    }

    /// Caption tokens that fit in the caption region next to BOS and EOS.
    pub fn caption_capacity(&self) -> usize {
        self.max_gen.saturating_sub(2)
    }

    /// First position of the caption region (the BOS slot).
    pub fn caption_start(&self) -> usize {
        self.n_visual + self.m_alt
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_decoder_layers", self.n_decoder_layers),
            ("n_mapping_layers", self.n_mapping_layers),
            ("vocab_size", self.vocab_size),
            ("image_embed_dim", self.image_embed_dim),
            ("n_visual", self.n_visual),
            ("m_alt", self.m_alt),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if self.max_gen < 2 {
            return Err(ModelError::Config(
                "max_gen must leave room for BOS and EOS (>= 2)".into(),
            ));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        let reserved = crate::textproc::BYTE_BASE as usize;
        if self.vocab_size < reserved {
            return Err(ModelError::Config(format!(
                "vocab_size {} cannot hold the {reserved} reserved tokens",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// Sampling settings; temperature 0 means greedy argmax.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            top_p: 0.7,
            max_tokens: 256,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn greedy(max_tokens: usize) -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            max_tokens,
            seed: 0,
        }
    }

    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(ModelError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ModelError::Config(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_tokens > model.max_gen {
            return Err(ModelError::Config(format!(
                "max_tokens {} exceeds max_gen {}",
                self.max_tokens, model.max_gen
            )));
        }
        Ok(())
    }
}
