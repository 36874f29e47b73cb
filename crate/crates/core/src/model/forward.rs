use crate::par::Exec;

use super::layout::{Role, SequenceBatch, SequenceRow};
use super::ops::{self, LnCache};
use super::params::{BlockLayout, TensorSpec};
use super::{ModelError, ModelParams, Result};

/// Items per gradient accumulation chunk. Chunks are summed in order, so
/// the result does not depend on how chunks are scheduled.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// Cross-entropy averaged over every loss-masked position in the batch.
    pub mean: f64,
    /// Per-row, per-position losses; exactly zero outside the loss mask.
    pub per_position: Vec<Vec<f64>>,
    pub masked: usize,
}

/// Mean masked next-token loss of `batch`.
pub fn forward_loss(params: &ModelParams, batch: &SequenceBatch) -> Result<LossOutput> {
    let masked = check_batch(params, batch)?;
    let mut per_position = Vec::with_capacity(batch.len());
    let mut total = 0.0;
    for (row, image) in batch.rows.iter().zip(&batch.images) {
        let r = item_pass(params, row, image, None, 0.0)?;
        total += r.loss_sum;
        per_position.push(r.per_position);
    }
    Ok(LossOutput {
        mean: total / masked as f64,
        per_position,
        masked,
    })
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_grad(
    params: &ModelParams,
    batch: &SequenceBatch,
    exec: Exec,
) -> Result<(LossOutput, Vec<f64>)> {
    let masked = check_batch(params, batch)?;
    let scale = 1.0 / masked as f64;
    let n_chunks = batch.len().div_ceil(GRAD_CHUNK);
    let chunks = exec.map_range(n_chunks, |c| -> Result<_> {
        let mut grad = vec![0.0; params.param_count()];
        let mut out = Vec::new();
        let lo = c * GRAD_CHUNK;
        let hi = (lo + GRAD_CHUNK).min(batch.len());
        for i in lo..hi {
            out.push(item_pass(
                params,
                &batch.rows[i],
                &batch.images[i],
                Some(&mut grad),
                scale,
            )?);
        }
        Ok((out, grad))
    });
    let mut grad = vec![0.0; params.param_count()];
    let mut per_position = Vec::with_capacity(batch.len());
    let mut total = 0.0;
    for chunk in chunks {
        let (items, g) = chunk?;
        for r in items {
            total += r.loss_sum;
            per_position.push(r.per_position);
        }
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((
        LossOutput {
            mean: total / masked as f64,
            per_position,
            masked,
        },
        grad,
    ))
}

fn check_batch(params: &ModelParams, batch: &SequenceBatch) -> Result<usize> {
    for (row, image) in batch.rows.iter().zip(&batch.images) {
        row.check(&params.config)?;
        check_image(params, image)?;
    }
    let masked = batch.masked_count();
    if masked == 0 {
        return Err(ModelError::DegenerateBatch);
    }
    Ok(masked)
}

pub(crate) fn check_image(params: &ModelParams, image: &[f64]) -> Result<()> {
    if image.len() != params.config.image_embed_dim {
        return Err(ModelError::Shape {
            expected: params.config.image_embed_dim,
            got: image.len(),
        });
    }
    if image.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Domain(
            "image embedding has non-finite entries".into(),
        ));
    }
    Ok(())
}

pub(crate) struct BlockCache {
    x: Vec<f64>,
    ln1: LnCache,
    h1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    att: Vec<f64>,
    ln2: LnCache,
    h2: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
}

pub(crate) fn block_forward(
    p: &ModelParams,
    b: &BlockLayout,
    x: &[f64],
    t: usize,
    causal: bool,
) -> (Vec<f64>, BlockCache) {
    let d = p.config.d_model;
    let hdim = p.config.mlp_dim();
    let heads = p.config.n_heads;
    let (h1, ln1) = ops::layer_norm(x, p.slice(b.ln1_g), p.slice(b.ln1_b), t, d);
    let q = ops::linear(&h1, p.slice(b.wq), p.slice(b.bq), t, d, d);
    let k = ops::linear(&h1, p.slice(b.wk), p.slice(b.bk), t, d, d);
    let v = ops::linear(&h1, p.slice(b.wv), p.slice(b.bv), t, d, d);
    let (att, probs) = ops::attention(&q, &k, &v, t, d, heads, causal);
    let proj = ops::linear(&att, p.slice(b.wo), p.slice(b.bo), t, d, d);
    let x1: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a + b).collect();
    let (h2, ln2) = ops::layer_norm(&x1, p.slice(b.ln2_g), p.slice(b.ln2_b), t, d);
    let pre = ops::linear(&h2, p.slice(b.fc1_w), p.slice(b.fc1_b), t, d, hdim);
    let act: Vec<f64> = pre.iter().map(|&u| ops::gelu(u)).collect();
    let mlp = ops::linear(&act, p.slice(b.fc2_w), p.slice(b.fc2_b), t, hdim, d);
    let y: Vec<f64> = x1.iter().zip(&mlp).map(|(a, b)| a + b).collect();
    let cache = BlockCache {
        x: x.to_vec(),
        ln1,
        h1,
        q,
        k,
        v,
        probs,
        att,
        ln2,
        h2,
        pre,
        act,
    };
    (y, cache)
}

/// Mutable views of two tensors that do not overlap, `a` before `b`.
fn pair_mut(g: &mut [f64], a: TensorSpec, b: TensorSpec) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.offset + a.len() <= b.offset);
    let (lo, hi) = g.split_at_mut(b.offset);
    (&mut lo[a.range()], &mut hi[..b.len()])
}

pub(crate) fn block_backward(
    p: &ModelParams,
    b: &BlockLayout,
    c: &BlockCache,
    dy: &[f64],
    t: usize,
    causal: bool,
    grad: &mut [f64],
) -> Vec<f64> {
    let d = p.config.d_model;
    let hdim = p.config.mlp_dim();
    let heads = p.config.n_heads;

    let mut dact = vec![0.0; t * hdim];
    {
        let (dw, db) = pair_mut(grad, b.fc2_w, b.fc2_b);
        ops::linear_backward(&c.act, p.slice(b.fc2_w), dy, t, hdim, d, &mut dact, dw, db);
    }
    for (g, &u) in dact.iter_mut().zip(&c.pre) {
        *g *= ops::gelu_grad(u);
    }
    let mut dh2 = vec![0.0; t * d];
    {
        let (dw, db) = pair_mut(grad, b.fc1_w, b.fc1_b);
        ops::linear_backward(&c.h2, p.slice(b.fc1_w), &dact, t, d, hdim, &mut dh2, dw, db);
    }
    let mut dx1 = dy.to_vec();
    {
        let (dg, db) = pair_mut(grad, b.ln2_g, b.ln2_b);
        ops::layer_norm_backward(&c.ln2, p.slice(b.ln2_g), &dh2, t, d, &mut dx1, dg, db);
    }
    let mut datt = vec![0.0; t * d];
    {
        let (dw, db) = pair_mut(grad, b.wo, b.bo);
        ops::linear_backward(&c.att, p.slice(b.wo), &dx1, t, d, d, &mut datt, dw, db);
    }
    let mut dq = vec![0.0; t * d];
    let mut dk = vec![0.0; t * d];
    let mut dv = vec![0.0; t * d];
    ops::attention_backward(
        &c.q, &c.k, &c.v, &c.probs, &datt, t, d, heads, causal, &mut dq, &mut dk, &mut dv,
    );
    let mut dh1 = vec![0.0; t * d];
    for (w, bias, dproj) in [(b.wq, b.bq, &dq), (b.wk, b.bk, &dk), (b.wv, b.bv, &dv)] {
        let (dw, db) = pair_mut(grad, w, bias);
        ops::linear_backward(&c.h1, p.slice(w), dproj, t, d, d, &mut dh1, dw, db);
    }
    let mut dx = dx1;
    {
        let (dg, db) = pair_mut(grad, b.ln1_g, b.ln1_b);
        ops::layer_norm_backward(&c.ln1, p.slice(b.ln1_g), &dh1, t, d, &mut dx, dg, db);
    }
    debug_assert_eq!(c.x.len(), dx.len());
    dx
}

pub(crate) struct MappingCache {
    m_in: Vec<f64>,
    blocks: Vec<BlockCache>,
    ln: LnCache,
}

/// Visual tokens for one image: the learned queries are prepended with the
/// projected embedding, run through non-causal blocks, and the query rows
/// are normalized into `n_visual × d_model`.
pub(crate) fn mapping_forward(p: &ModelParams, image: &[f64]) -> (Vec<f64>, MappingCache) {
    let c = &p.config;
    let d = c.d_model;
    let l = &p.layout;
    let rows = c.n_visual + 1;
    let m = ops::linear(
        image,
        p.slice(l.map_in_w),
        p.slice(l.map_in_b),
        1,
        c.image_embed_dim,
        d,
    );
    let mut z = m;
    z.extend_from_slice(p.slice(l.map_queries));
    let mut caches = Vec::with_capacity(l.map_blocks.len());
    for b in &l.map_blocks {
        let (y, cache) = block_forward(p, b, &z, rows, false);
        caches.push(cache);
        z = y;
    }
    let (out, ln) = ops::layer_norm(
        &z[d..],
        p.slice(l.map_ln_g),
        p.slice(l.map_ln_b),
        c.n_visual,
        d,
    );
    (
        out,
        MappingCache {
            m_in: image.to_vec(),
            blocks: caches,
            ln,
        },
    )
}

fn mapping_backward(p: &ModelParams, cache: &MappingCache, dvis: &[f64], grad: &mut [f64]) {
    let c = &p.config;
    let d = c.d_model;
    let l = &p.layout;
    let rows = c.n_visual + 1;
    let mut dz = vec![0.0; rows * d];
    {
        let (dg, db) = pair_mut(grad, l.map_ln_g, l.map_ln_b);
        ops::layer_norm_backward(
            &cache.ln,
            p.slice(l.map_ln_g),
            dvis,
            c.n_visual,
            d,
            &mut dz[d..],
            dg,
            db,
        );
    }
    for (b, bc) in l.map_blocks.iter().zip(&cache.blocks).rev() {
        dz = block_backward(p, b, bc, &dz, rows, false, grad);
    }
    for (g, v) in grad[l.map_queries.range()].iter_mut().zip(&dz[d..]) {
        *g += v;
    }
    let (dw, db) = pair_mut(grad, l.map_in_w, l.map_in_b);
    ops::linear_backward(
        &cache.m_in,
        p.slice(l.map_in_w),
        &dz[..d],
        1,
        c.image_embed_dim,
        d,
        &mut [],
        dw,
        db,
    );
}

/// Decoder inputs for the active positions: visual tokens or token
/// embeddings, plus absolute position embeddings.
pub(crate) fn embed_rows(
    p: &ModelParams,
    row: &SequenceRow,
    positions: &[usize],
    visual: &[f64],
) -> Vec<f64> {
    let d = p.config.d_model;
    let tok = p.slice(p.layout.tok_emb);
    let pos = p.slice(p.layout.pos_emb);
    let mut x = Vec::with_capacity(positions.len() * d);
    for &q in positions {
        let src = if row.roles[q] == Role::Visual {
            &visual[q * d..(q + 1) * d]
        } else {
            let id = row.ids[q] as usize;
            &tok[id * d..(id + 1) * d]
        };
        let pe = &pos[q * d..(q + 1) * d];
        x.extend(src.iter().zip(pe).map(|(a, b)| a + b));
    }
    x
}

struct ItemResult {
    loss_sum: f64,
    per_position: Vec<f64>,
}

/// Forward pass for one row; with `grad`, also backpropagates the loss
/// sum multiplied by `scale` and accumulates into `grad`.
fn item_pass(
    p: &ModelParams,
    row: &SequenceRow,
    image: &[f64],
    grad: Option<&mut [f64]>,
    scale: f64,
) -> Result<ItemResult> {
    let c = &p.config;
    let d = c.d_model;
    let v = c.vocab_size;
    let l = &p.layout;

    let (visual, map_cache) = mapping_forward(p, image);
    let positions = row.active_positions();
    let t = positions.len();
    let mut x = embed_rows(p, row, &positions, &visual);
    let mut caches = Vec::with_capacity(l.dec_blocks.len());
    for b in &l.dec_blocks {
        let (y, cache) = block_forward(p, b, &x, t, true);
        caches.push(cache);
        x = y;
    }

    let loss_rows: Vec<usize> = (0..t).filter(|&r| row.loss_mask[positions[r]]).collect();
    let nl = loss_rows.len();
    let mut hsel = Vec::with_capacity(nl * d);
    for &r in &loss_rows {
        hsel.extend_from_slice(&x[r * d..(r + 1) * d]);
    }
    let (hn, lnf) = ops::layer_norm(&hsel, p.slice(l.ln_f_g), p.slice(l.ln_f_b), nl, d);
    let logits = ops::linear(&hn, p.slice(l.head_w), p.slice(l.head_b), nl, d, v);

    let mut per_position = vec![0.0; row.len()];
    let mut loss_sum = 0.0;
    let mut dlogits = vec![0.0; nl * v];
    for (i, &r) in loss_rows.iter().enumerate() {
        let q = positions[r];
        let target = row.targets[q] as usize;
        let lsm = ops::log_softmax(&logits[i * v..(i + 1) * v]);
        let loss = -lsm[target];
        per_position[q] = loss;
        loss_sum += loss;
        let dl = &mut dlogits[i * v..(i + 1) * v];
        for (g, &ls) in dl.iter_mut().zip(&lsm) {
            *g = ls.exp() * scale;
        }
        dl[target] -= scale;
    }

    let Some(grad) = grad else {
        return Ok(ItemResult {
            loss_sum,
            per_position,
        });
    };

    let mut dhn = vec![0.0; nl * d];
    {
        let (dw, db) = pair_mut(grad, l.head_w, l.head_b);
        ops::linear_backward(&hn, p.slice(l.head_w), &dlogits, nl, d, v, &mut dhn, dw, db);
    }
    let mut dhsel = vec![0.0; nl * d];
    {
        let (dg, db) = pair_mut(grad, l.ln_f_g, l.ln_f_b);
        ops::layer_norm_backward(&lnf, p.slice(l.ln_f_g), &dhn, nl, d, &mut dhsel, dg, db);
    }
    let mut dx = vec![0.0; t * d];
    for (i, &r) in loss_rows.iter().enumerate() {
        dx[r * d..(r + 1) * d].copy_from_slice(&dhsel[i * d..(i + 1) * d]);
    }
    for (b, bc) in l.dec_blocks.iter().zip(&caches).rev() {
        dx = block_backward(p, b, bc, &dx, t, true, grad);
    }

    let mut dvis = vec![0.0; c.n_visual * d];
    for (r, &q) in positions.iter().enumerate() {
        let g = &dx[r * d..(r + 1) * d];
        let pe = l.pos_emb.offset + q * d;
        for (a, b) in grad[pe..pe + d].iter_mut().zip(g) {
            *a += b;
        }
        if row.roles[q] == Role::Visual {
            for (a, b) in dvis[q * d..(q + 1) * d].iter_mut().zip(g) {
                *a += b;
            }
        } else {
            let te = l.tok_emb.offset + row.ids[q] as usize * d;
            for (a, b) in grad[te..te + d].iter_mut().zip(g) {
                *a += b;
            }
        }
    }
    mapping_backward(p, &map_cache, &dvis, grad);
    Ok(ItemResult {
        loss_sum,
        per_position,
    })
}

/// Logits at every active position of `row` (full, non-incremental pass).
#[cfg(test)]
pub(crate) fn row_logits(
    p: &ModelParams,
    row: &SequenceRow,
    image: &[f64],
) -> Vec<(usize, Vec<f64>)> {
    let c = &p.config;
    let d = c.d_model;
    let l = &p.layout;
    let (visual, _) = mapping_forward(p, image);
    let mut positions: Vec<usize> = (0..row.len()).filter(|&q| row.attn_valid[q]).collect();
    if let Some(last) = row.loss_mask.iter().rposition(|&m| m) {
        positions.retain(|&q| q <= last);
    }
    let t = positions.len();
    let mut x = embed_rows(p, row, &positions, &visual);
    for b in &l.dec_blocks {
        x = block_forward(p, b, &x, t, true).0;
    }
    let (hn, _) = ops::layer_norm(&x, p.slice(l.ln_f_g), p.slice(l.ln_f_b), t, d);
    let logits = ops::linear(
        &hn,
        p.slice(l.head_w),
        p.slice(l.head_b),
        t,
        d,
        c.vocab_size,
    );
    positions
        .into_iter()
        .enumerate()
        .map(|(r, q)| (q, logits[r * c.vocab_size..(r + 1) * c.vocab_size].to_vec()))
        .collect()
}
