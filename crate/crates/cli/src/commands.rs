use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use sentinet::embeddings::{
    generate_pairs, train_word2vec, write_loss_trace, EmbeddingTable, SkipGramConfig, Vocabulary,
};
use sentinet::evaluation::{
    attention_records, evaluate_checkpoint, write_attention, MetricsReport,
};
use sentinet::networks::{JointModel, LstmClassifier};
use sentinet::text::{
    balanced_subsample, clean_records, corpus_stats, read_clean_tsv, read_raw_tsv, save_clean_tsv,
    split, CleanExample, EmojiBlocks, LabelMap, Language, Normalizer, StopWords,
};
use sentinet::training::{
    train_baseline_with, train_joint_with, transfer_init, write_step_log, write_train_log,
    Checkpoint, EpochView, Hyperparams, LanguageData, ModelKind,
};
use sentinet::RngState;
use serde_json::json;

use crate::failure::Failure;
use crate::options::Settings;

type Outcome = Result<(), Failure>;

const INIT_TAG: u64 = 0x494E;
const SAMPLE_TAG: u64 = 0x5341;
const SPLIT_TAG: u64 = 0x5350;
const PAIRS_TAG: u64 = 0x5041;
const W2V_TAG: u64 = 0x5732;

/// Output directory that refuses to overwrite any input and records every
/// file it hands out.
struct Outputs {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(s: &Settings) -> Result<Self, Failure> {
        let dir = s.path("out_dir")?;
        fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, &e))?;
        Ok(Self {
            dir,
            inputs: s.input_paths(),
            written: Vec::new(),
        })
    }

    fn file(&mut self, name: &str) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        if let Ok(canon) = fs::canonicalize(&path) {
            if self.inputs.contains(&canon) {
                return Err(Failure::validation(
                    "output_collides_with_input",
                    format!("{} is also an input", path.display()),
                ));
            }
        }
        self.written.push(path.clone());
        Ok(path)
    }

    fn write_with<F>(&mut self, name: &str, body: F) -> Result<PathBuf, Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.file(name)?;
        let file = File::create(&path).map_err(|e| Failure::io(&path, &e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::io(&path, &e))?;
        Ok(path)
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<PathBuf, Failure> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    fn finish(mut self, s: &Settings) -> Outcome {
        let path = self.file("run_manifest.json")?;
        let manifest = s.manifest(&self.written);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(|e| Failure::io(&path, &e))
    }
}

pub fn run(s: &Settings) -> Outcome {
    match s.subcommand.as_str() {
        "preprocess" => preprocess(s),
        "train-embeddings" => train_embeddings(s),
        "train-baseline" => train_baseline(s),
        "transfer" => transfer(s),
        "train-joint" => train_joint(s),
        "evaluate" => evaluate(s),
        "export-attention" => export_attention(s),
        other => Err(Failure::usage(format!("unknown subcommand {other}"))),
    }
}

fn language(s: &Settings) -> Result<Language, Failure> {
    s.parse_required::<Language>("lang")
}

fn comma_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn default_split_sizes(lang: Language) -> (usize, usize, usize) {
    match lang {
        Language::Hindi => (2985, 746, 932),
        Language::Bengali => (3194, 798, 998),
    }
}

fn preprocess(s: &Settings) -> Outcome {
    let lang = language(s)?;
    let input = s.path("input")?;
    let seed = s.seed()?;
    let defaults = LabelMap::default();
    let labels = match (s.get("positive_labels"), s.get("negative_labels")) {
        (None, None) => defaults,
        (pos, neg) => LabelMap::new(
            comma_list(pos.unwrap_or("hof,hate,1")),
            comma_list(neg.unwrap_or("not,nothate,0")),
        ),
    };
    let stop_words = match s.get("stop_words") {
        Some(p) => StopWords::load(Path::new(p))?,
        None => StopWords::default(),
    };
    let emoji = match s.get("emoji_blocks") {
        Some(spec) => EmojiBlocks::parse(spec)?,
        None => EmojiBlocks::default(),
    };
    let (d_train, d_val, d_test) = default_split_sizes(lang);
    let sizes = (
        s.parse("train_size")?.unwrap_or(d_train),
        s.parse("val_size")?.unwrap_or(d_val),
        s.parse("test_size")?.unwrap_or(d_test),
    );
    let per_class: Option<usize> = s.parse("per_class")?;
    let mut out = Outputs::new(s)?;

    let normalizer = Normalizer::new(stop_words, emoji);
    let mut records = read_raw_tsv(&input, lang, s.flag("has_header"), &labels)?;
    log::info!("read {} records from {}", records.len(), input.display());
    for r in &mut records {
        r.label = labels.bit(&r.label)?.to_string();
    }
    let labels = LabelMap::new(["1"], ["0"]);
    let stats = corpus_stats(&records, &labels, &normalizer)?;
    let root = RngState::new(seed);
    let pool = match per_class {
        Some(k) => balanced_subsample(&records, k, &mut root.derive(&[SAMPLE_TAG]))?,
        None => records.clone(),
    };
    let (clean, dropped) = clean_records(&pool, &labels, &normalizer)?;
    let splits = split(&clean, sizes, &mut root.derive(&[SPLIT_TAG]))?;

    for (name, part) in [
        ("train", &splits.train),
        ("val", &splits.val),
        ("test", &splits.test),
        ("leftover", &splits.leftover),
    ] {
        let path = out.file(&format!("{lang}_{name}.tsv"))?;
        save_clean_tsv(&path, part)?;
    }
    out.write_json(
        &format!("{lang}_stats.json"),
        &json!({
            "language": lang,
            "records": records.len(),
            "sampled": pool.len(),
            "dropped_empty": dropped,
            "splits": {
                "train": splits.train.len(),
                "val": splits.val.len(),
                "test": splits.test.len(),
                "leftover": splits.leftover.len(),
            },
            "stats": stats,
        }),
    )?;
    log::info!(
        "{lang}: {} train, {} val, {} test, {} leftover, {dropped} dropped",
        splits.train.len(),
        splits.val.len(),
        splits.test.len(),
        splits.leftover.len()
    );
    out.finish(s)
}

fn read_examples(path: &Path, lang: Language) -> Result<Vec<CleanExample>, Failure> {
    let examples = read_clean_tsv(path)?;
    if let Some(bad) = examples.iter().find(|e| e.language != lang) {
        return Err(Failure::validation(
            "language_mismatch",
            format!(
                "{}: example {} is {}, expected {lang}",
                path.display(),
                bad.id,
                bad.language
            ),
        ));
    }
    Ok(examples)
}

fn train_embeddings(s: &Settings) -> Outcome {
    let lang = language(s)?;
    let inputs: Vec<PathBuf> = comma_list(s.require("input")?)
        .into_iter()
        .map(PathBuf::from)
        .collect();
    for p in &inputs {
        if !p.is_file() {
            return Err(Failure::io_message(p, "no such file"));
        }
    }
    let config = SkipGramConfig {
        epochs: s.parse_required("epochs")?,
        window: s.parse_required("window")?,
        dim: s.parse_required("dim")?,
        learning_rate: s.parse_required("learning_rate")?,
        batch_size: s.parse_required("batch_size")?,
    };
    let min_count: u64 = s.parse_required("min_count")?;
    let seed = s.seed()?;
    let mut out = Outputs::new(s)?;
    out.inputs
        .extend(inputs.iter().filter_map(|p| fs::canonicalize(p).ok()));

    let mut examples = Vec::new();
    for p in &inputs {
        examples.extend(read_examples(p, lang)?);
    }
    let vocab = Vocabulary::build(examples.iter().map(|e| &e.tokens), min_count);
    let docs: Vec<Vec<usize>> = examples.iter().map(|e| vocab.encode(&e.tokens)).collect();
    let root = RngState::new(seed);
    let pairs = generate_pairs(&docs, config.window, &vocab, &mut root.derive(&[PAIRS_TAG]))?;
    log::info!(
        "{lang}: vocabulary {} words, {} skip-gram pairs",
        vocab.len(),
        pairs.len()
    );
    let (model, trace) =
        train_word2vec::<f32>(&pairs, vocab.len(), &config, &mut root.derive(&[W2V_TAG]))?;
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        log::info!("{lang}: word2vec loss {first:.4} -> {last:.4}");
    }
    let table = EmbeddingTable::from_model(&vocab, &model)?;
    let path = out.file(&format!("embeddings_{lang}.txt"))?;
    table.save_text(&path)?;
    out.write_with(&format!("w2v_loss_{lang}.csv"), |w| {
        write_loss_trace(w, &trace)
    })?;
    out.finish(s)
}

fn hyperparams(base: Hyperparams, s: &Settings, embed_dim: usize) -> Result<Hyperparams, Failure> {
    let mut hp = Hyperparams { embed_dim, ..base };
    for (key, value) in s.hyperparams() {
        hp.set(&key, value)?;
    }
    hp.validate()?;
    Ok(hp)
}

fn log_epoch(view: &EpochView<'_>) -> ControlFlow<()> {
    for r in view.records {
        log::info!(
            "epoch {} {} {}: loss {:.4} accuracy {:.4}",
            r.epoch,
            r.language,
            r.split,
            r.loss,
            r.accuracy
        );
    }
    ControlFlow::Continue(())
}

fn train_baseline(s: &Settings) -> Outcome {
    let lang = language(s)?;
    let seed = s.seed()?;
    let table = EmbeddingTable::<f32>::load_text(&s.path("embeddings")?)?;
    let hp = hyperparams(Hyperparams::baseline(), s, table.dim())?;
    let train = read_examples(&s.path("train")?, lang)?;
    let val = read_examples(&s.path("val")?, lang)?;
    let mut out = Outputs::new(s)?;

    let model = LstmClassifier::new(
        &hp.lstm_config(),
        &mut RngState::new(seed).derive(&[INIT_TAG]),
    )?;
    let data = LanguageData {
        language: lang,
        table: &table,
        train: &train,
        val: &val,
    };
    let outcome = train_baseline_with(model, &data, &hp, seed, log_epoch)?;
    log::info!(
        "best validation accuracy {:.4} at epoch {}",
        outcome.best_val_accuracy,
        outcome.best_epoch
    );
    let ckpt = Checkpoint::from_baseline(&outcome.model, &hp, lang, &table);
    let path = out.file(&format!("baseline_{lang}.snet"))?;
    ckpt.save(&path)?;
    out.write_with("train_log.csv", |w| write_train_log(w, &outcome.log))?;
    out.finish(s)
}

fn transfer(s: &Settings) -> Outcome {
    let lang = language(s)?;
    let seed = s.seed()?;
    let source = Checkpoint::load(&s.path("source")?)?;
    if source.kind != ModelKind::Baseline {
        return Err(Failure::from(sentinet::Error::KindMismatch {
            expected: ModelKind::Baseline.to_string(),
            found: source.kind.to_string(),
        }));
    }
    let table = EmbeddingTable::<f32>::load_text(&s.path("embeddings")?)?;
    let hp = hyperparams(source.hyperparams.clone(), s, source.hyperparams.embed_dim)?;
    let (a, b) = (&source.hyperparams, &hp);
    if (a.embed_dim, a.hidden, a.layers) != (b.embed_dim, b.hidden, b.layers) {
        return Err(Failure::validation(
            "incompatible_checkpoint",
            "embed_dim, hidden and layers are fixed by the source checkpoint",
        ));
    }
    let train = read_examples(&s.path("train")?, lang)?;
    let val = read_examples(&s.path("val")?, lang)?;
    let mut out = Outputs::new(s)?;

    let model = transfer_init(&source, &table)?;
    let data = LanguageData {
        language: lang,
        table: &table,
        train: &train,
        val: &val,
    };
    let outcome = train_baseline_with(model, &data, &hp, seed, log_epoch)?;
    log::info!(
        "best validation accuracy {:.4} at epoch {}",
        outcome.best_val_accuracy,
        outcome.best_epoch
    );
    let ckpt = Checkpoint::from_baseline(&outcome.model, &hp, lang, &table);
    let path = out.file(&format!("transfer_{lang}.snet"))?;
    ckpt.save(&path)?;
    out.write_with("train_log.csv", |w| write_train_log(w, &outcome.log))?;
    out.finish(s)
}

fn train_joint(s: &Settings) -> Outcome {
    let seed = s.seed()?;
    let th = EmbeddingTable::<f32>::load_text(&s.path("hindi_embeddings")?)?;
    let tb = EmbeddingTable::<f32>::load_text(&s.path("bengali_embeddings")?)?;
    if th.dim() != tb.dim() {
        return Err(Failure::validation(
            "invalid_argument",
            format!(
                "embedding widths differ: hindi {}, bengali {}",
                th.dim(),
                tb.dim()
            ),
        ));
    }
    let hp = hyperparams(Hyperparams::joint(), s, th.dim())?;
    let h_train = read_examples(&s.path("hindi_train")?, Language::Hindi)?;
    let h_val = read_examples(&s.path("hindi_val")?, Language::Hindi)?;
    let b_train = read_examples(&s.path("bengali_train")?, Language::Bengali)?;
    let b_val = read_examples(&s.path("bengali_val")?, Language::Bengali)?;
    let mut out = Outputs::new(s)?;

    let model = JointModel::new(
        &hp.joint_config(),
        &mut RngState::new(seed).derive(&[INIT_TAG]),
    )?;
    let hindi = LanguageData {
        language: Language::Hindi,
        table: &th,
        train: &h_train,
        val: &h_val,
    };
    let bengali = LanguageData {
        language: Language::Bengali,
        table: &tb,
        train: &b_train,
        val: &b_val,
    };
    let outcome = train_joint_with(model, &hindi, &bengali, &hp, seed, |_| {}, log_epoch)?;
    log::info!(
        "best mean validation accuracy {:.4} at epoch {}",
        outcome.best_val_accuracy,
        outcome.best_epoch
    );
    let ckpt = Checkpoint::from_joint(
        &outcome.model,
        &hp,
        &[(Language::Hindi, &th), (Language::Bengali, &tb)],
    );
    let path = out.file("joint.snet")?;
    ckpt.save(&path)?;
    out.write_with("train_log.csv", |w| write_train_log(w, &outcome.log))?;
    out.write_with("steps.csv", |w| write_step_log(w, &outcome.steps))?;
    out.finish(s)
}

fn checkpoint_language(s: &Settings, ckpt: &Checkpoint) -> Result<Language, Failure> {
    if let Some(lang) = s.parse::<Language>("lang")? {
        return Ok(lang);
    }
    match ckpt.languages().as_slice() {
        [only] => Ok(*only),
        _ => Err(Failure::usage(format!(
            "{} needs --lang for a {} checkpoint",
            s.subcommand, ckpt.kind
        ))),
    }
}

fn evaluate(s: &Settings) -> Outcome {
    let ckpt = Checkpoint::load(&s.path("checkpoint")?)?;
    let lang = checkpoint_language(s, &ckpt)?;
    let table = EmbeddingTable::<f32>::load_text(&s.path("embeddings")?)?;
    let test = read_examples(&s.path("test")?, lang)?;
    let name = s
        .get("model_name")
        .map(String::from)
        .unwrap_or_else(|| format!("{}-{lang}", ckpt.kind));
    let mut out = Outputs::new(s)?;

    let report = evaluate_checkpoint(&ckpt, lang, &table, &test)?;
    println!("{}", MetricsReport::csv_header());
    println!("{}", report.csv_row(&name));
    out.write_json(
        &format!("metrics_{lang}.json"),
        &json!({ "model": name, "language": lang, "examples": test.len(), "metrics": report }),
    )?;
    out.write_with(&format!("metrics_{lang}.csv"), |w| {
        report.write_csv(w, &name)
    })?;
    out.finish(s)
}

fn export_attention(s: &Settings) -> Outcome {
    let ckpt = Checkpoint::load(&s.path("checkpoint")?)?;
    let model = ckpt.joint_model()?;
    let lang = checkpoint_language(s, &ckpt)?;
    let table = EmbeddingTable::<f32>::load_text(&s.path("embeddings")?)?;
    ckpt.check_vocabulary(lang, &table)?;
    let examples = read_examples(&s.path("input")?, lang)?;
    let hops = comma_list(s.require("hops")?)
        .iter()
        .map(|h| h.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            Failure::invalid_value(format!(
                "invalid hop list {:?}",
                s.get("hops").unwrap_or("")
            ))
        })?;
    let min_confidence: f64 = s.parse_required("min_confidence")?;
    let limit: Option<usize> = s.parse("limit")?;
    let mut out = Outputs::new(s)?;

    let mut records = attention_records(&model, &table, lang, &examples, &hops, min_confidence)?;
    if let Some(n) = limit {
        records.truncate(n);
    }
    let mut index = Vec::with_capacity(records.len());
    for v in &records {
        let (json_path, html_path) = write_attention(&out.dir, v)?;
        out.written.push(json_path.clone());
        out.written.push(html_path.clone());
        index.push(json!({
            "id": v.id,
            "confidence": v.confidence,
            "redundancy": v.redundancy,
            "json": json_path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "html": html_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        }));
    }
    log::info!(
        "{lang}: exported {} of {} examples",
        records.len(),
        examples.len()
    );
    out.write_json(&format!("attention_index_{lang}.json"), &json!(index))?;
    out.finish(s)
}
