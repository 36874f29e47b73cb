use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorpusError, Result};
use crate::io::{read_jsonl, write_atomic, write_jsonl};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"ALTE";
pub const EMBEDDING_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// Maps caption text into the same space as the stored image embeddings.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f32>;
}

/// Row-major `count × dim` matrix of precomputed image embeddings plus an
/// id → row index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    id_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    id: String,
    row: usize,
}

/// Sidecar index path for an embedding file: `<path>.index.jsonl`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".index.jsonl");
    PathBuf::from(s)
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>, id_index: HashMap<String, usize>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(CorpusError::Format("dim 0 with non-empty payload".into()));
        }
        if dim > 0 && !data.len().is_multiple_of(dim) {
            return Err(CorpusError::Format(format!(
                "payload of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let count = data.len().checked_div(dim).unwrap_or(0);
        if let Some((id, &row)) = id_index.iter().find(|(_, &row)| row >= count) {
            return Err(CorpusError::Invalid(format!(
                "index maps {id:?} to row {row} but count is {count}"
            )));
        }
        Ok(Self {
            dim,
            data,
            id_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> Option<&[f32]> {
        (i < self.count()).then(|| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn by_id(&self, id: &str) -> Option<&[f32]> {
        self.id_index.get(id).and_then(|&i| self.row(i))
    }

    pub fn id_index(&self) -> &HashMap<String, usize> {
        &self.id_index
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Write the binary matrix and its sidecar index.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            use std::io::Write;
            w.write_all(EMBEDDING_MAGIC)?;
            w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
            w.write_all(&(self.dim as u32).to_le_bytes())?;
            w.write_all(&(self.count() as u64).to_le_bytes())?;
            for v in &self.data {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        })?;
        let mut index: Vec<IndexLine> = self
            .id_index
            .iter()
            .map(|(id, &row)| IndexLine {
                id: id.clone(),
                row,
            })
            .collect();
        index.sort_by(|a, b| a.row.cmp(&b.row).then_with(|| a.id.cmp(&b.id)));
        write_jsonl(&sidecar_path(path), &index)?;
        Ok(())
    }

    /// Read a matrix; the sidecar index is optional (missing → empty index).
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let m = Self::from_bytes(&bytes)?;
        let side = sidecar_path(path);
        let mut id_index = HashMap::new();
        if side.exists() {
            for (line, IndexLine { id, row }) in read_jsonl::<IndexLine>(&side)? {
                if id_index.insert(id.clone(), row).is_some() {
                    return Err(CorpusError::DuplicateId { id, line });
                }
            }
        }
        Self::new(m.dim, m.data, id_index)
    }

    /// Parse the binary payload (no sidecar).
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(CorpusError::Format(format!(
                "header needs {HEADER_LEN} bytes, file has {}",
                bytes.len()
            )));
        }
        if &bytes[0..4] != EMBEDDING_MAGIC {
            return Err(CorpusError::Format("bad magic, expected \"ALTE\"".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != EMBEDDING_VERSION {
            return Err(CorpusError::Format(format!(
                "unsupported version {version}"
            )));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let expected =
            (HEADER_LEN as u64).saturating_add(count.saturating_mul(dim as u64).saturating_mul(4));
        let actual = bytes.len() as u64;
        if actual != expected {
            return Err(CorpusError::Length { expected, actual });
        }
        let data: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dim, data, HashMap::new())
    }
}
