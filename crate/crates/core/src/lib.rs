//! Alt-text re-alignment captioning toolkit.
//!
//! The crate is split along the workflow:
//!
//! - [`corpus`]: image/alt-text items, multi-round caption records, round
//!   statistics, embeddings storage and synthetic/alt-text mixing.
//! - [`textproc`]: word + byte-fallback tokenizer, lexicon-driven noun phrase
//!   chunker and starting-prompt validation.
//! - [`metrics`]: dense caption evaluation (CLIP-style score, BLEU-1,
//!   METEOR-lite, ROUGE-L, CIDEr-D, noun phrase P/R/F1).
//! - [`model`]: prefix-LM captioner with a mapping network, caption-only loss
//!   and nucleus sampling.
//! - [`train`]: optimisation loop, learning-rate schedule, synthetic concept
//!   world, gradient checking, re-alignment evaluation and throughput bench.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments
)]

pub mod corpus;
pub mod io;
pub mod metrics;
pub mod model;
pub mod par;
pub mod textproc;
pub mod train;
