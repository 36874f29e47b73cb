use crate::textproc::{BOS, EMPTY_ALT, EOS, PAD};

use super::{ModelConfig, ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Visual,
    Alt,
    Caption,
    Pad,
}

/// One decoder row of length `n_visual + m_alt + max_gen`.
///
/// Visual positions hold `PAD` ids as placeholders; their inputs come from
/// the mapping network. `targets[p]` is the label predicted at position `p`
/// and only matters where `loss_mask[p]` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRow {
    pub ids: Vec<u32>,
    pub roles: Vec<Role>,
    pub targets: Vec<u32>,
    pub loss_mask: Vec<bool>,
    pub attn_valid: Vec<bool>,
    pub alt_truncated: bool,
    pub caption_truncated: bool,
}

impl SequenceRow {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn masked_count(&self) -> usize {
        self.loss_mask.iter().filter(|&&m| m).count()
    }

    /// Positions that take part in the forward pass: attention-valid
    /// positions up to the last loss-masked one.
    pub(crate) fn active_positions(&self) -> Vec<usize> {
        let last = self.loss_mask.iter().rposition(|&m| m).unwrap_or(0);
        (0..=last.min(self.len().saturating_sub(1)))
            .filter(|&p| self.attn_valid[p])
            .collect()
    }

    pub(crate) fn check(&self, c: &ModelConfig) -> Result<()> {
        let n = c.total_len();
        for len in [
            self.ids.len(),
            self.roles.len(),
            self.targets.len(),
            self.loss_mask.len(),
            self.attn_valid.len(),
        ] {
            if len != n {
                return Err(ModelError::Shape {
                    expected: n,
                    got: len,
                });
            }
        }
        for p in 0..n {
            let visual = p < c.n_visual;
            if visual != (self.roles[p] == Role::Visual) {
                return Err(ModelError::Domain(format!(
                    "position {p}: visual run must cover exactly the first {} positions",
                    c.n_visual
                )));
            }
            if self.ids[p] as usize >= c.vocab_size {
                return Err(ModelError::Domain(format!(
                    "token id {} at position {p} is outside the vocabulary",
                    self.ids[p]
                )));
            }
            if self.loss_mask[p] {
                if self.roles[p] != Role::Caption || !self.attn_valid[p] {
                    return Err(ModelError::Domain(format!(
                        "loss mask set outside the caption region at position {p}"
                    )));
                }
                if self.targets[p] as usize >= c.vocab_size {
                    return Err(ModelError::Domain(format!(
                        "target {} at position {p} is outside the vocabulary",
                        self.targets[p]
                    )));
                }
            }
        }
        let order = |r: Role| match r {
            Role::Visual => 0,
            Role::Alt => 1,
            Role::Caption => 2,
            Role::Pad => 3,
        };
        if self.roles.windows(2).any(|w| order(w[0]) > order(w[1])) {
            return Err(ModelError::Domain(
                "roles must run VISUAL, ALT, CAPTION, PAD in order".into(),
            ));
        }
        Ok(())
    }
}

/// Rows plus the frozen image embedding for each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub rows: Vec<SequenceRow>,
    pub images: Vec<Vec<f64>>,
}

impl SequenceBatch {
    pub fn new(rows: Vec<SequenceRow>, images: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != images.len() {
            return Err(ModelError::Shape {
                expected: rows.len(),
                got: images.len(),
            });
        }
        Ok(Self { rows, images })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn masked_count(&self) -> usize {
        self.rows.iter().map(SequenceRow::masked_count).sum()
    }
}

/// Lay out `[visual | alt | caption]` for one item.
///
/// An empty `alt_ids` is encoded as the single `EMPTY_ALT` token. Alt-text
/// longer than `m_alt` keeps its head; captions keep their first
/// `max_gen - 2` tokens so BOS and EOS fit. Both truncations are flagged.
/// `PAD` ids inside the alt-text are treated as padding and never attended.
pub fn layout_sequence(alt_ids: &[u32], caption_ids: &[u32], c: &ModelConfig) -> SequenceRow {
    let n = c.total_len();
    let mut ids = vec![PAD; n];
    let mut roles = vec![Role::Pad; n];
    let mut attn_valid = vec![false; n];
    let mut loss_mask = vec![false; n];
    let mut targets = vec![PAD; n];

    for p in 0..c.n_visual {
        roles[p] = Role::Visual;
        attn_valid[p] = true;
    }

    let empty = [EMPTY_ALT];
    let alt: &[u32] = if alt_ids.is_empty() { &empty } else { alt_ids };
    let alt_truncated = alt.len() > c.m_alt;
    let alt = &alt[..alt.len().min(c.m_alt)];
    for p in c.n_visual..c.caption_start() {
        roles[p] = Role::Alt;
    }
    for (j, &t) in alt.iter().enumerate() {
        ids[c.n_visual + j] = t;
        attn_valid[c.n_visual + j] = t != PAD;
    }

    let cap_truncated = caption_ids.len() > c.caption_capacity();
    let cap = &caption_ids[..caption_ids.len().min(c.caption_capacity())];
    let start = c.caption_start();
    let mut seq = Vec::with_capacity(cap.len() + 2);
    seq.push(BOS);
    seq.extend_from_slice(cap);
    seq.push(EOS);
    for (j, &t) in seq.iter().enumerate() {
        ids[start + j] = t;
        roles[start + j] = Role::Caption;
        attn_valid[start + j] = true;
    }
    for j in 0..seq.len() - 1 {
        loss_mask[start + j] = true;
        targets[start + j] = seq[j + 1];
    }

    SequenceRow {
        ids,
        roles,
        targets,
        loss_mask,
        attn_valid,
        alt_truncated,
        caption_truncated: cap_truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_mask_arithmetic() {
        let c = ModelConfig::default();
        let alt: Vec<u32> = (10..15).collect();
        let cap: Vec<u32> = (20..30).collect();
        let row = layout_sequence(&alt, &cap, &c);
        assert_eq!(row.len(), 424);
        assert_eq!(row.masked_count(), 11);
        assert_eq!(row.targets[c.caption_start() + 10], EOS);
        row.check(&c).unwrap();
        assert_eq!(row.roles.iter().filter(|&&r| r == Role::Visual).count(), 40);
    }

    #[test]
    fn empty_caption_masks_eos_only() {
        let c = ModelConfig::default();
        let row = layout_sequence(&[10], &[], &c);
        assert_eq!(row.masked_count(), 1);
        assert_eq!(row.targets[c.caption_start()], EOS);
    }

    #[test]
    fn empty_alt_is_empty_alt_token() {
        let c = ModelConfig::default();
        let row = layout_sequence(&[], &[9], &c);
        assert_eq!(row.ids[c.n_visual], EMPTY_ALT);
        assert!(row.attn_valid[c.n_visual]);
        assert!(!row.attn_valid[c.n_visual + 1]);
    }

    #[test]
    fn long_alt_head_truncated() {
        let c = ModelConfig::default();
        let alt: Vec<u32> = (0..200).map(|i| 10 + i % 100).collect();
        let row = layout_sequence(&alt, &[5], &c);
        assert!(row.alt_truncated);
        assert_eq!(&row.ids[40..168], &alt[..128]);
        assert!(!row.caption_truncated);
    }

    #[test]
    fn long_caption_truncated() {
        let c = ModelConfig {
            max_gen: 6,
            ..ModelConfig::default()
        };
        let row = layout_sequence(&[10], &[11, 12, 13, 14, 15, 16], &c);
        assert!(row.caption_truncated);
        assert_eq!(row.masked_count(), 5);
        assert_eq!(&row.ids[c.caption_start()..], &[BOS, 11, 12, 13, 14, EOS]);
    }

    #[test]
    fn roles_in_order_and_mask_in_caption() {
        let c = ModelConfig::default();
        let row = layout_sequence(&[10, 11], &[12, 13, 14], &c);
        for p in 0..row.len() {
            if row.loss_mask[p] {
                assert_eq!(row.roles[p], Role::Caption);
            }
        }
        let mut bad = row.clone();
        bad.roles[c.n_visual] = Role::Pad;
        assert!(bad.check(&c).is_err());
    }
}
