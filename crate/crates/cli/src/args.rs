use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Alt-text re-alignment toolkit: corpus and annotation rounds, vocabulary,
/// synthetic worlds, captioner training and generation, evaluation, data
/// mixing, benchmarking and the annotation service.
///
/// Data goes to stdout, logs to stderr (level from ALTOGETHER_LOG: error,
/// info or debug). Exit codes: 0 success, 1 invalid input, 2 I/O error,
/// 3 internal error.
#[derive(Debug, Parser)]
#[command(name = "altogether", version)]
pub struct Cli {
    /// Seed for every stochastic step (initialisation, batching, sampling,
    /// mixing, world generation).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for data-parallel work; 0 uses every core and 1 runs
    /// sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an image/alt-text JSONL file and write it back normalised.
    Ingest(IngestArgs),
    /// Record annotation rounds or summarise them.
    #[command(subcommand)]
    Rounds(RoundsCommand),
    /// Build a word vocabulary.
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Generate a synthetic concept world with a full training setup.
    Synth(SynthArgs),
    /// Train a captioner.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Caption one image embedding, optionally conditioned on alt-text.
    Caption(CaptionArgs),
    /// Score predicted captions against references.
    Eval(EvalArgs),
    /// Choose alt-text or synthetic caption per item for a training set.
    Mix(MixArgs),
    /// Measure generation throughput at one or more sequence lengths.
    Bench(BenchArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
    /// Compare analytic and finite-difference gradients on a toy model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct CorpusFiles {
    /// Items JSONL: {"id", "image_ref", "alt_text", "source", "embedding_row"?}.
    #[arg(long)]
    pub items: PathBuf,
    /// Rounds JSONL: {"id", "round", "caption", "annotator", "ts"}.
    #[arg(long)]
    pub rounds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input pairs JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Normalised items JSONL to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Embedding matrix every item must have a row in.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RoundsCommand {
    /// Append one round for one item to the rounds file.
    Record(RecordArgs),
    /// Per-round mean length, edit distance and (optionally) alignment.
    Stats(RoundStatsArgs),
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long)]
    pub items: PathBuf,
    /// Rounds JSONL; replayed first, then appended to.
    #[arg(long)]
    pub rounds: PathBuf,
    /// Item id.
    #[arg(long)]
    pub id: String,
    /// Round number; must be one past the item's latest round.
    #[arg(long)]
    pub round: u32,
    #[arg(long)]
    pub caption: String,
    #[arg(long)]
    pub annotator: String,
}

#[derive(Debug, Args)]
pub struct RoundStatsArgs {
    #[command(flatten)]
    pub corpus: CorpusFiles,
    /// Image embeddings, for the alignment column (needs --world).
    #[arg(long, requires = "world")]
    pub embeddings: Option<PathBuf>,
    /// World spec written by `synth`; its text embedder scores alignment.
    #[arg(long, requires = "embeddings")]
    pub world: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum VocabCommand {
    /// Rank words of the alt-texts and captions by frequency.
    Build(VocabBuildArgs),
}

#[derive(Debug, Args)]
pub struct VocabBuildArgs {
    #[command(flatten)]
    pub corpus: CorpusFiles,
    /// Mixed training set whose texts are counted too.
    #[arg(long)]
    pub training: Option<PathBuf>,
    /// Total vocabulary size, reserved and byte tokens included.
    #[arg(long, default_value_t = 8192)]
    pub size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for world.json, items, rounds, references, embeddings and
    /// vocabulary.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 2_000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 40)]
    pub n_concepts: usize,
    /// Share of concepts the image embedding never carries.
    #[arg(long, default_value_t = 0.3)]
    pub rare_fraction: f64,
    /// Probability that an alt-text names a concept absent from the image.
    #[arg(long, default_value_t = 0.2)]
    pub distractor_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
}

#[derive(Debug, Args, Clone)]
pub struct ArchArgs {
    #[arg(long, default_value_t = 32)]
    pub d_model: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 1)]
    pub mapping_layers: usize,
    /// Visual prefix tokens.
    #[arg(long, default_value_t = 4)]
    pub n_visual: usize,
    /// Alt-text slots.
    #[arg(long, default_value_t = 6)]
    pub m_alt: usize,
    /// Caption slots, BOS and EOS included.
    #[arg(long, default_value_t = 12)]
    pub max_gen: usize,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 4)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    /// Probability of replacing an item's alt-text with the empty-alt token.
    #[arg(long, default_value_t = 0.5)]
    pub empty_alt_prob: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Per-step JSONL log (step, lr, loss, grad_norm).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Train a fresh model.
    Pretrain(PretrainArgs),
    /// Continue training a model on the latest annotation rounds.
    Finetune(FinetuneArgs),
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub corpus: CorpusFiles,
    /// Mixed training set; targets come from it instead of the latest round.
    #[arg(long)]
    pub training: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Model to start from.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusFiles,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct CaptionArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Id of the image row in the embedding matrix.
    #[arg(long)]
    pub embedding_id: String,
    /// Alt-text to condition on; omitted means the empty-alt token.
    #[arg(long)]
    pub alt: Option<String>,
    /// 0 decodes greedily.
    #[arg(long, default_value_t = 0.2)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.7)]
    pub top_p: f64,
    /// Cap on generated tokens; defaults to the model's caption slots.
    #[arg(long)]
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions JSONL: {"id", "text"}.
    #[arg(long)]
    pub pred: PathBuf,
    /// References JSONL: {"id", "text"}, several lines per id allowed.
    #[arg(long)]
    pub r#ref: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write per-item scores as JSONL.
    #[arg(long)]
    pub per_item: Option<PathBuf>,
    /// Image embeddings, for the alignment score (needs --world).
    #[arg(long, requires = "world")]
    pub embeddings: Option<PathBuf>,
    /// World spec written by `synth`; its text embedder scores alignment.
    #[arg(long, requires = "embeddings")]
    pub world: Option<PathBuf>,
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is outside the valid range [0, 1]"))
    }
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[command(flatten)]
    pub corpus: CorpusFiles,
    /// Probability of choosing the synthetic caption, in [0, 1].
    #[arg(long, value_parser = probability)]
    pub p: f64,
    /// Round the synthetic caption comes from; defaults to each item's
    /// latest round (2 or later).
    #[arg(long)]
    pub round: Option<u32>,
    /// Training set JSONL to write: {"id", "text", "source"}.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model to benchmark; without it a random toy model with the full
    /// 40 + 128 + 256 layout is used.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Sequence length; repeat to compare several.
    #[arg(long = "seq-len", default_values_t = [424usize, 296])]
    pub seq_len: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub batch_size: usize,
    /// Seconds of timed generation per length (at least 1).
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Event log to replay at startup and append to; in-memory without it.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 16)]
    pub d_model: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 1)]
    pub mapping_layers: usize,
    #[arg(long, default_value_t = 64)]
    pub vocab: usize,
    #[arg(long, default_value_t = 8)]
    pub image_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub n_visual: usize,
    #[arg(long, default_value_t = 8)]
    pub m_alt: usize,
    #[arg(long, default_value_t = 16)]
    pub max_gen: usize,
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Coordinates to check; 0 checks every parameter.
    #[arg(long, default_value_t = 0)]
    pub coords: usize,
    /// Exit 1 when the worst relative error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    fn leaves(cmd: &clap::Command, path: Vec<String>, out: &mut Vec<(Vec<String>, clap::Command)>) {
        let subs: Vec<_> = cmd
            .get_subcommands()
            .filter(|c| c.get_name() != "help")
            .collect();
        if subs.is_empty() {
            out.push((path.clone(), cmd.clone()));
        }
        for sub in subs {
            let mut p = path.clone();
            p.push(sub.get_name().to_string());
            leaves(sub, p, out);
        }
    }

    #[test]
    fn every_flag_is_in_help() {
        let mut root = Cli::command();
        root.build();
        let mut all = Vec::new();
        leaves(&root, Vec::new(), &mut all);
        assert_eq!(all.len(), 13);
        for (path, mut cmd) in all {
            let help = cmd.render_long_help().to_string();
            for arg in cmd.get_arguments() {
                if let Some(long) = arg.get_long() {
                    assert!(
                        help.contains(&format!("--{long}")),
                        "{path:?} help lacks --{long}"
                    );
                }
            }
            assert!(
                help.contains("--seed") && help.contains("--jobs"),
                "{path:?}"
            );
        }
    }

    #[test]
    fn probability_range() {
        assert_eq!(probability("0.25"), Ok(0.25));
        assert!(probability("1.5").unwrap_err().contains("[0, 1]"));
        assert!(probability("x").is_err());
    }
}
