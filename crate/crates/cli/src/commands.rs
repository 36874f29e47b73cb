use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use altogether_annosvc::Service;
use altogether_core::corpus::{
    export_training_set, mix_sample, read_training_set, round_stats, ChoiceSource, Corpus,
    EmbeddingMatrix, ImageItem, MixSpec, RoundLine, RoundStats, Source, SyntheticSource,
    TextEmbedder,
};
use altogether_core::io::{read_jsonl, write_atomic, write_jsonl};
use altogether_core::metrics::{aggregate, score_items, CaptionRow, SuiteOptions};
use altogether_core::model::{
    generate, init_model, layout_sequence, load_model, load_model_for_vocab, save_model,
    DecodeConfig, ModelConfig, ModelParams, SequenceBatch,
};
use altogether_core::par::Exec;
use altogether_core::textproc::{build_vocab, detokenize, tokenize, Lexicon, Vocab, BYTE_BASE};
use altogether_core::train::{
    bench_throughput, corpus_examples, finetune, grad_check, pretrain, synth_world, Example,
    GradCoords, TrainConfig, TrainReport, WorldSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::error::{Context, Failure, Result};

pub struct Globals {
    pub seed: u64,
    pub exec: Exec,
}

pub fn run(cli: Cli) -> Result<()> {
    let g = Globals {
        seed: cli.seed,
        exec: if cli.jobs == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        },
    };
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Rounds(RoundsCommand::Record(a)) => record(a),
        Command::Rounds(RoundsCommand::Stats(a)) => stats(a),
        Command::Vocab(VocabCommand::Build(a)) => vocab_build(a),
        Command::Synth(a) => synth(a, &g),
        Command::Train(TrainCommand::Pretrain(a)) => train_pretrain(a, &g),
        Command::Train(TrainCommand::Finetune(a)) => train_finetune(a, &g),
        Command::Caption(a) => caption(a, &g),
        Command::Eval(a) => eval(a, &g),
        Command::Mix(a) => mix(a, &g),
        Command::Bench(a) => bench(a, &g),
        Command::Serve(a) => serve(a),
        Command::Gradcheck(a) => gradcheck(a, &g),
    }
}

fn emit(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit_line(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_corpus(files: &CorpusFiles) -> Result<Corpus> {
    let mut corpus = Corpus::ingest_pairs(&files.items).ctx(files.items.display())?;
    if let Some(rounds) = &files.rounds {
        let n = corpus.load_rounds(rounds).ctx(rounds.display())?;
        log::info!("replayed {n} round records from {}", rounds.display());
    }
    Ok(corpus)
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::load(path).ctx(path.display())
}

fn load_vocab(path: &Path) -> Result<Vocab> {
    Vocab::load(path).ctx(path.display())
}

fn world_embedder(path: &Path) -> Result<Box<dyn TextEmbedder>> {
    let spec: WorldSpec =
        serde_json::from_slice(&fs::read(path).ctx(path.display())?).ctx(path.display())?;
    Ok(Box::new(synth_world(&spec)?.text_embedder()))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let corpus = Corpus::ingest_pairs(&a.input).ctx(a.input.display())?;
    if let Some(path) = &a.embeddings {
        let m = load_embeddings(path)?;
        let missing: Vec<&str> = corpus
            .items()
            .iter()
            .filter(|i| {
                m.by_id(&i.id).is_none() && i.embedding_row.and_then(|r| m.row(r)).is_none()
            })
            .map(|i| i.id.as_str())
            .collect();
        if let Some(first) = missing.first() {
            return Err(Failure::invalid(format!(
                "{} items have no embedding row in {} (first: {first:?})",
                missing.len(),
                path.display()
            )));
        }
    }
    corpus.save_items(&a.out).ctx(a.out.display())?;
    let mut sources: BTreeMap<String, usize> = BTreeMap::new();
    for item in corpus.items() {
        let name = serde_json::to_value(item.source)?
            .as_str()
            .unwrap_or("other")
            .to_string();
        *sources.entry(name).or_default() += 1;
    }
    emit(&json!({ "items": corpus.len(), "sources": sources, "out": a.out }))
}

fn record(a: RecordArgs) -> Result<()> {
    let mut corpus = Corpus::ingest_pairs(&a.items).ctx(a.items.display())?;
    if a.rounds.exists() {
        corpus.load_rounds(&a.rounds).ctx(a.rounds.display())?;
    }
    corpus.set_rounds_log(&a.rounds);
    let rec = corpus.record_round(&a.id, a.round, &a.caption, &a.annotator)?;
    emit(&rec)
}

fn stats_table(rows: &[RoundStats]) -> String {
    let mut s = format!(
        "{:>5}  {:>7}  {:>10}  {:>13}  {:>9}\n",
        "round", "items", "mean words", "mean edit dist", "alignment"
    );
    for r in rows {
        let align = r
            .mean_alignment
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into());
        s += &format!(
            "{:>5}  {:>7}  {:>10.2}  {:>13.2}  {:>9}\n",
            r.round_no, r.item_count, r.mean_length_words, r.mean_edit_distance, align
        );
    }
    s
}

fn stats(a: RoundStatsArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let embeddings = a.embeddings.as_deref().map(load_embeddings).transpose()?;
    let embedder = a.world.as_deref().map(world_embedder).transpose()?;
    let alignment = embeddings.as_ref().zip(embedder.as_deref());
    let rows = (1..=corpus.max_round())
        .map(|r| round_stats(&corpus, r, alignment))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match a.format {
        Format::Json => emit(&rows),
        Format::Table => {
            print!("{}", stats_table(&rows));
            Ok(())
        }
    }
}

fn vocab_build(a: VocabBuildArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let training = a
        .training
        .as_deref()
        .map(|p| read_training_set(p).ctx(p.display()))
        .transpose()?
        .unwrap_or_default();
    let texts = corpus
        .items()
        .iter()
        .flat_map(|i| corpus.rounds(&i.id).unwrap_or_default())
        .map(|r| r.caption.as_str())
        .chain(training.iter().map(|t| t.text.as_str()));
    let vocab = build_vocab(texts, a.size)?;
    vocab.save(&a.out).ctx(a.out.display())?;
    emit(&json!({ "size": vocab.len(), "learned": vocab.learned().len(), "out": a.out }))
}

fn synth(a: SynthArgs, g: &Globals) -> Result<()> {
    let spec = WorldSpec {
        n_concepts: a.n_concepts,
        rare_fraction: a.rare_fraction,
        distractor_rate: a.distractor_rate,
        embed_dim: a.embed_dim,
        seed: g.seed,
        ..Default::default()
    };
    let world = synth_world(&spec)?;
    let train = world.generate(a.n_train, 1);
    let test = world.generate(a.n_test, 2);
    fs::create_dir_all(&a.out_dir).ctx(a.out_dir.display())?;
    let dir = &a.out_dir;

    let spec_json = serde_json::to_vec_pretty(&spec)?;
    write_atomic(&dir.join("world.json"), |w| w.write_all(&spec_json))?;

    let mut data = Vec::with_capacity((train.len() + test.len()) * spec.embed_dim);
    let mut index = HashMap::new();
    let mut item_rows = |items: &[altogether_core::train::WorldItem]| -> Vec<ImageItem> {
        items
            .iter()
            .map(|it| {
                let row = index.len();
                index.insert(it.id.clone(), row);
                data.extend(it.image.iter().map(|&x| x as f32));
                ImageItem {
                    id: it.id.clone(),
                    image_ref: format!("synth://{}", it.id),
                    alt_text: it.alt_text.clone(),
                    source: Source::Synthetic,
                    embedding_row: Some(row),
                }
            })
            .collect()
    };
    let train_items = item_rows(&train);
    let test_items = item_rows(&test);
    write_jsonl(&dir.join("train.jsonl"), &train_items)?;
    write_jsonl(&dir.join("test.jsonl"), &test_items)?;
    EmbeddingMatrix::new(spec.embed_dim, data, index)?.save(&dir.join("embeddings.bin"))?;

    let rounds: Vec<RoundLine> = train
        .iter()
        .map(|it| RoundLine {
            id: it.id.clone(),
            round: 2,
            caption: it.caption.clone(),
            annotator: "synth".into(),
            ts: 0.0,
        })
        .collect();
    write_jsonl(&dir.join("train-rounds.jsonl"), &rounds)?;
    let refs: Vec<CaptionRow> = test
        .iter()
        .map(|it| CaptionRow::new(&it.id, &it.caption))
        .collect();
    write_jsonl(&dir.join("test-refs.jsonl"), &refs)?;
    let vocab = world.vocab()?;
    vocab.save(&dir.join("vocab.json"))?;
    emit(&json!({
        "out_dir": dir,
        "train": train.len(),
        "test": test.len(),
        "vocab_size": vocab.len(),
        "rare_concepts": world.concepts.iter().filter(|c| c.rare).count(),
    }))
}

fn train_config(o: &OptimArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: o.batch_size,
        peak_lr: o.lr,
        warmup_steps: o.warmup,
        pretrain_epochs: o.epochs,
        finetune_epochs: o.epochs,
        empty_alt_prob: o.empty_alt_prob,
        weight_decay: o.weight_decay,
        seed,
        ..Default::default()
    }
}

fn train_summary(report: &TrainReport, params: &ModelParams, out: &Path) -> Result<()> {
    emit(&json!({
        "steps": report.steps.len(),
        "final_loss": report.steps.last().map(|s| s.loss),
        "parameters": params.data.len(),
        "out": out,
    }))
}

fn training_examples(
    path: &Path,
    corpus: &Corpus,
    emb: &EmbeddingMatrix,
    vocab: &Vocab,
) -> Result<Vec<Example>> {
    read_training_set(path)
        .ctx(path.display())?
        .into_iter()
        .map(|line| {
            let item = corpus.get(&line.id).ok_or_else(|| {
                Failure::invalid(format!("{}: unknown item {:?}", path.display(), line.id))
            })?;
            let image = emb
                .by_id(&line.id)
                .ok_or_else(|| Failure::invalid(format!("no embedding for item {:?}", line.id)))?;
            Ok(Example {
                id: line.id,
                image: image.iter().map(|&x| x as f64).collect(),
                alt_ids: tokenize(vocab, &item.alt_text),
                caption_ids: tokenize(vocab, &line.text),
            })
        })
        .collect()
}

fn train_pretrain(a: PretrainArgs, g: &Globals) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let emb = load_embeddings(&a.embeddings)?;
    let vocab = load_vocab(&a.vocab)?;
    let examples = match &a.training {
        Some(path) => training_examples(path, &corpus, &emb, &vocab)?,
        None => corpus_examples(&corpus, &emb, &vocab)?,
    };
    let arch = &a.arch;
    let config = ModelConfig {
        d_model: arch.d_model,
        n_heads: arch.heads,
        n_decoder_layers: arch.layers,
        n_mapping_layers: arch.mapping_layers,
        vocab_size: vocab.len(),
        image_embed_dim: emb.dim(),
        n_visual: arch.n_visual,
        m_alt: arch.m_alt,
        max_gen: arch.max_gen,
    };
    let mut params = init_model(config, g.seed)?;
    let cfg = train_config(&a.optim, g.seed);
    log::info!(
        "pre-training on {} examples, {} parameters",
        examples.len(),
        params.data.len()
    );
    let report = pretrain(&mut params, &examples, &cfg, g.exec, a.optim.log.as_deref())?;
    save_model(&params, &a.out).ctx(a.out.display())?;
    train_summary(&report, &params, &a.out)
}

fn train_finetune(a: FinetuneArgs, g: &Globals) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let emb = load_embeddings(&a.embeddings)?;
    let vocab = load_vocab(&a.vocab)?;
    let mut params = load_model_for_vocab(&a.model, vocab.len()).ctx(a.model.display())?;
    let cfg = train_config(&a.optim, g.seed);
    let report = finetune(
        &mut params,
        &corpus,
        &emb,
        &vocab,
        &cfg,
        g.exec,
        a.optim.log.as_deref(),
    )?;
    save_model(&params, &a.out).ctx(a.out.display())?;
    train_summary(&report, &params, &a.out)
}

fn caption(a: CaptionArgs, g: &Globals) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let params = load_model_for_vocab(&a.model, vocab.len()).ctx(a.model.display())?;
    let emb = load_embeddings(&a.embeddings)?;
    let image: Vec<f64> = emb
        .by_id(&a.embedding_id)
        .ok_or_else(|| Failure::invalid(format!("no embedding with id {:?}", a.embedding_id)))?
        .iter()
        .map(|&x| x as f64)
        .collect();
    let alt_ids = a
        .alt
        .as_deref()
        .map(|t| tokenize(&vocab, t))
        .unwrap_or_default();
    let decode = DecodeConfig {
        temperature: a.temperature,
        top_p: a.top_p,
        max_tokens: a.max_tokens.unwrap_or(params.config.max_gen),
        seed: g.seed,
    };
    let ids = generate(&params, &image, &alt_ids, &decode)?;
    let text = detokenize(&vocab, &ids)?;
    if text.lossy {
        log::warn!("generated bytes were not valid UTF-8; replacement characters inserted");
    }
    println!("{}", text.text);
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<CaptionRow>> {
    Ok(read_jsonl::<CaptionRow>(path)
        .ctx(path.display())?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

fn eval(a: EvalArgs, g: &Globals) -> Result<()> {
    let preds = read_rows(&a.pred)?;
    let refs = read_rows(&a.r#ref)?;
    let embeddings = a.embeddings.as_deref().map(load_embeddings).transpose()?;
    let embedder = a.world.as_deref().map(world_embedder).transpose()?;
    let alignment = embeddings.as_ref().zip(embedder.as_deref());
    let opts = SuiteOptions {
        exec: g.exec,
        ..Default::default()
    };
    let items = score_items(&preds, &refs, alignment, &Lexicon::default_english(), opts)?;
    if let Some(path) = &a.per_item {
        write_jsonl(path, &items).ctx(path.display())?;
    }
    let report = aggregate(&items);
    match a.format {
        Format::Json => emit(&report),
        Format::Table => {
            print!("{}", report.to_table());
            Ok(())
        }
    }
}

fn mix(a: MixArgs, g: &Globals) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let spec = MixSpec::new(a.p, g.seed)?;
    let source = a
        .round
        .map_or(SyntheticSource::Latest, SyntheticSource::Round);
    let choices = mix_sample(&corpus, &spec, &source)?;
    export_training_set(&choices, &a.out).ctx(a.out.display())?;
    let synthetic = choices
        .iter()
        .filter(|c| c.chosen_source == ChoiceSource::Synthetic)
        .count();
    emit(&json!({
        "items": choices.len(),
        "synthetic": synthetic,
        "fraction": synthetic as f64 / choices.len() as f64,
        "out": a.out,
    }))
}

fn bench(a: BenchArgs, g: &Globals) -> Result<()> {
    let params = match &a.model {
        Some(path) => load_model(path).ctx(path.display())?,
        None => init_model(
            ModelConfig {
                d_model: 16,
                n_heads: 2,
                n_decoder_layers: 1,
                n_mapping_layers: 1,
                vocab_size: 64,
                image_embed_dim: 16,
                ..Default::default()
            },
            g.seed,
        )?,
    };
    let duration = Duration::try_from_secs_f64(a.duration).map_err(|_| {
        Failure::invalid(format!(
            "--duration {} is not a valid number of seconds",
            a.duration
        ))
    })?;
    for &len in &a.seq_len {
        let report = bench_throughput(&params, len, a.batch_size, duration, g.exec)?;
        emit_line(&report)?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let service = match &a.events {
        Some(path) => Service::open(path).ctx(path.display())?,
        None => Service::in_memory(),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .ctx(format!("bind {}:{}", a.host, a.port))?;
        let shutdown = async {
            if tokio::signal::ctrl_c().await.is_ok() {
                log::info!("shutting down");
            }
        };
        altogether_annosvc::serve(listener, Arc::new(service), shutdown).await?;
        Ok(())
    })
}

fn gradcheck(a: GradcheckArgs, g: &Globals) -> Result<()> {
    let c = ModelConfig {
        d_model: a.d_model,
        n_heads: a.heads,
        n_decoder_layers: a.layers,
        n_mapping_layers: a.mapping_layers,
        vocab_size: a.vocab,
        image_embed_dim: a.image_dim,
        n_visual: a.n_visual,
        m_alt: a.m_alt,
        max_gen: a.max_gen,
    };
    let params = init_model(c, g.seed)?;
    if a.vocab <= BYTE_BASE as usize {
        return Err(Failure::invalid(format!("--vocab must exceed {BYTE_BASE}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed.wrapping_add(1));
    let ids = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> Vec<u32> {
        let n = rng.random_range(lo..=hi.max(lo));
        (0..n)
            .map(|_| rng.random_range(BYTE_BASE..a.vocab as u32))
            .collect()
    };
    let mut rows = Vec::with_capacity(a.batch);
    let mut images = Vec::with_capacity(a.batch);
    for _ in 0..a.batch {
        let alt = ids(&mut rng, 1, c.m_alt);
        let cap = ids(&mut rng, 1, c.caption_capacity());
        rows.push(layout_sequence(&alt, &cap, &c));
        images.push(
            (0..c.image_embed_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        );
    }
    let batch = SequenceBatch::new(rows, images)?;
    let coords = match a.coords {
        0 => GradCoords::All,
        count => GradCoords::Subset {
            count,
            seed: g.seed,
        },
    };
    let r = grad_check(&params, &batch, a.eps, coords, g.exec)?;
    emit(&json!({
        "max_rel_error": r.max_rel_error,
        "max_raw_rel_error": r.max_raw_rel_error,
        "max_abs_error": r.max_abs_error,
        "floor": r.floor,
        "worst_index": r.worst_index,
        "analytic": r.analytic,
        "numeric": r.numeric,
        "checked": r.checked,
        "loss": r.loss,
    }))?;
    if r.max_rel_error > a.tolerance {
        return Err(Failure::invalid(format!(
            "max relative error {:.3e} exceeds tolerance {:.1e}",
            r.max_rel_error, a.tolerance
        )));
    }
    Ok(())
}
