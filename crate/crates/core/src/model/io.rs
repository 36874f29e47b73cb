use std::io::Write;
use std::path::Path;

use super::{ModelConfig, ModelError, ModelParams, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"ALTM";
pub const MODEL_VERSION: u32 = 1;

const CONFIG_FIELDS: usize = 9;
const HEADER_LEN: usize = 4 + 4 + CONFIG_FIELDS * 4 + 8;

/// Write `params` atomically: magic, version, the nine config fields as
/// `u32`, the parameter count as `u64`, then every parameter as a
/// little-endian `f64` in declaration order.
pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let c = &params.config;
    let fields = [
        c.d_model,
        c.n_heads,
        c.n_decoder_layers,
        c.n_mapping_layers,
        c.vocab_size,
        c.image_embed_dim,
        c.n_visual,
        c.m_alt,
        c.max_gen,
    ];
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MODEL_MAGIC);
    header.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for f in fields {
        let v = u32::try_from(f)
            .map_err(|_| ModelError::Config(format!("config field {f} does not fit in u32")))?;
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&(params.data.len() as u64).to_le_bytes());
    crate::io::write_atomic(path, |w| {
        w.write_all(&header)?;
        for v in &params.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}

/// Load a model and require its vocabulary to have `expected_vocab` entries.
pub fn load_model_for_vocab(path: &Path, expected_vocab: usize) -> Result<ModelParams> {
    let p = load_model(path)?;
    if p.config.vocab_size != expected_vocab {
        return Err(ModelError::VocabMismatch {
            file: p.config.vocab_size,
            expected: expected_vocab,
        });
    }
    Ok(p)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn from_bytes(b: &[u8]) -> Result<ModelParams> {
    if b.len() < HEADER_LEN {
        return Err(ModelError::Format(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            b.len()
        )));
    }
    if &b[..4] != MODEL_MAGIC {
        return Err(ModelError::Format("bad magic, not a model file".into()));
    }
    let version = u32_at(b, 4);
    if version != MODEL_VERSION {
        return Err(ModelError::Format(format!("unsupported version {version}")));
    }
    let f: Vec<usize> = (0..CONFIG_FIELDS)
        .map(|i| u32_at(b, 8 + 4 * i) as usize)
        .collect();
    let config = ModelConfig {
        d_model: f[0],
        n_heads: f[1],
        n_decoder_layers: f[2],
        n_mapping_layers: f[3],
        vocab_size: f[4],
        image_embed_dim: f[5],
        n_visual: f[6],
        m_alt: f[7],
        max_gen: f[8],
    };
    config
        .validate()
        .map_err(|e| ModelError::Format(format!("embedded config is invalid: {e}")))?;
    let at = 8 + 4 * CONFIG_FIELDS;
    let count = u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes")) as usize;
    let expected = super::Layout::new(&config).total;
    if count != expected {
        return Err(ModelError::Format(format!(
            "parameter count {count} does not match the {expected} implied by the config"
        )));
    }
    let body = &b[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(ModelError::Format(format!(
            "expected {} parameter bytes, found {}",
            count * 8,
            body.len()
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ModelParams::from_data(config, data).map_err(|e| ModelError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    fn cfg(vocab: usize) -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_decoder_layers: 1,
            n_mapping_layers: 1,
            vocab_size: vocab,
            image_embed_dim: 4,
            n_visual: 2,
            m_alt: 3,
            max_gen: 5,
        }
    }

    #[test]
    fn round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let p = init_model(cfg(30), 3).unwrap();
        save_model(&p, &path).unwrap();
        let q = load_model(&path).unwrap();
        assert_eq!(p.config, q.config);
        assert!(p
            .data
            .iter()
            .zip(&q.data)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn vocab_mismatch_names_both() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&init_model(cfg(30), 3).unwrap(), &path).unwrap();
        let err = load_model_for_vocab(&path, 64).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("30") && msg.contains("64"), "{msg}");
    }

    #[test]
    fn empty_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(load_model(&path), Err(ModelError::Format(_))));
        save_model(&init_model(cfg(30), 3).unwrap(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(ModelError::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(ModelError::Format(_))));
    }
}
