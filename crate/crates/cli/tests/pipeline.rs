use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sentinet::RngState;

const BIN: &str = env!("CARGO_BIN_EXE_sentinet");

fn sentinet(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sentinet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn raw_corpus(path: &Path, seed: u64, hate_label: &str, calm_label: &str) {
    let hate = ["kharab", "ganda", "nafrat", "zeher", "bekar", "gussa"];
    let calm = ["accha", "pyaar", "sundar", "khushi", "dost", "shanti"];
    let mut rng = RngState::new(seed);
    let mut text = String::from("id\ttext\tlabel\n");
    for i in 0..64 {
        let (words, label) = if i % 2 == 0 {
            (&hate, hate_label)
        } else {
            (&calm, calm_label)
        };
        let n = 3 + rng.below(4);
        let mut body: Vec<String> = (0..n)
            .map(|_| words[rng.below(words.len())].to_string())
            .collect();
        if i % 5 == 0 {
            body.insert(0, "@someone".into());
        }
        if i % 7 == 0 {
            body.push("#Tag!".into());
        }
        if i % 3 == 0 {
            body.push("😂".into());
        }
        text.push_str(&format!("r{i:03}\t{}\t{label}\n", body.join(" ")));
    }
    text.push_str(&format!("r999\t@only_a_user\t{calm_label}\n"));
    fs::write(path, text).unwrap();
}

struct Pipeline {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Pipeline {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

fn digest(paths: &[PathBuf]) -> Vec<Vec<u8>> {
    paths.iter().map(|p| fs::read(p).unwrap()).collect()
}

fn build_pipeline() -> Pipeline {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let pl = Pipeline { _dir: dir, root };
    raw_corpus(&pl.path("hindi_raw.tsv"), 1, "HOF", "NOT");
    raw_corpus(&pl.path("bengali_raw.tsv"), 2, "1", "0");
    fs::write(pl.path("stop.txt"), "bekar\n").unwrap();

    for lang in ["hindi", "bengali"] {
        let raw = pl.path(&format!("{lang}_raw.tsv"));
        let data = pl.path(&format!("data_{lang}"));
        ok(&[
            "preprocess",
            "--input",
            p(&raw),
            "--lang",
            lang,
            "--has-header",
            "--stop-words",
            p(&pl.path("stop.txt")),
            "--per-class",
            "32",
            "--train-size",
            "40",
            "--val-size",
            "10",
            "--test-size",
            "8",
            "--seed",
            "3",
            "--out-dir",
            p(&data),
        ]);
        let train = data.join(format!("{lang}_train.tsv"));
        ok(&[
            "train-embeddings",
            "--input",
            p(&train),
            "--lang",
            lang,
            "--epochs",
            "3",
            "--dim",
            "6",
            "--batch-size",
            "64",
            "--out-dir",
            p(&pl.path(&format!("emb_{lang}"))),
        ]);
    }
    pl
}

fn hp_flags() -> Vec<&'static str> {
    vec![
        "--hidden",
        "4",
        "--layers",
        "2",
        "--batch-size",
        "8",
        "--epochs",
        "2",
        "--learning-rate",
        "0.001",
    ]
}

#[test]
fn full_pipeline() {
    let pl = build_pipeline();
    let data = |lang: &str, split: &str| pl.path(&format!("data_{lang}/{lang}_{split}.tsv"));
    let emb = |lang: &str| pl.path(&format!("emb_{lang}/embeddings_{lang}.txt"));

    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pl.path("data_hindi/hindi_stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["records"], 65);
    assert_eq!(stats["sampled"], 64);
    assert_eq!(stats["splits"]["train"], 40);
    assert!(stats["stats"]["emoji_totals"]["positive"].as_u64().unwrap() > 0);
    let train_text = fs::read_to_string(data("hindi", "train")).unwrap();
    assert!(!train_text.contains("bekar"));
    assert!(!train_text.contains('@'));
    assert!(fs::read_to_string(pl.path("emb_hindi/w2v_loss_hindi.csv"))
        .unwrap()
        .starts_with("epoch,loss\n"));

    let inputs: Vec<PathBuf> = ["hindi", "bengali"]
        .iter()
        .flat_map(|l| [data(l, "train"), data(l, "val"), data(l, "test"), emb(l)])
        .collect();
    let before = digest(&inputs);

    let (h_train, h_val, h_emb) = (data("hindi", "train"), data("hindi", "val"), emb("hindi"));
    let (b_train, b_val, b_emb) = (
        data("bengali", "train"),
        data("bengali", "val"),
        emb("bengali"),
    );
    let (base_dir, joint_dir) = (pl.path("base"), pl.path("joint"));
    let mut args = vec![
        "train-baseline",
        "--train",
        p(&h_train),
        "--val",
        p(&h_val),
        "--embeddings",
        p(&h_emb),
        "--out-dir",
        p(&base_dir),
    ];
    args.extend(hp_flags());
    ok(&args);
    let base_ckpt = pl.path("base/baseline_hindi.snet");
    let log = fs::read_to_string(pl.path("base/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2 * 3);

    let source_bytes = fs::read(&base_ckpt).unwrap();
    ok(&[
        "transfer",
        "--source",
        p(&base_ckpt),
        "--train",
        p(&data("bengali", "train")),
        "--val",
        p(&data("bengali", "val")),
        "--embeddings",
        p(&emb("bengali")),
        "--epochs",
        "1",
        "--out-dir",
        p(&pl.path("xfer")),
    ]);
    assert_eq!(fs::read(&base_ckpt).unwrap(), source_bytes);

    let mut args = vec![
        "train-joint",
        "--hindi-train",
        p(&h_train),
        "--hindi-val",
        p(&h_val),
        "--hindi-embeddings",
        p(&h_emb),
        "--bengali-train",
        p(&b_train),
        "--bengali-val",
        p(&b_val),
        "--bengali-embeddings",
        p(&b_emb),
        "--hops",
        "3",
        "--attention-hidden",
        "5",
        "--fc-hidden",
        "8",
        "--out-dir",
        p(&joint_dir),
    ];
    args.extend(hp_flags());
    ok(&args);
    let steps = fs::read_to_string(pl.path("joint/steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 1 + 2 * 5);

    let eval = ok(&[
        "evaluate",
        "--checkpoint",
        p(&pl.path("xfer/transfer_bengali.snet")),
        "--test",
        p(&data("bengali", "test")),
        "--embeddings",
        p(&emb("bengali")),
        "--out-dir",
        p(&pl.path("eval")),
    ]);
    let printed = String::from_utf8_lossy(&eval.stdout);
    assert!(printed.starts_with("model,accuracy,precision,recall,f1\nbaseline-bengali,"));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pl.path("eval/metrics_bengali.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["examples"], 8);

    let joint_eval = sentinet(&[
        "evaluate",
        "--checkpoint",
        p(&pl.path("joint/joint.snet")),
        "--test",
        p(&data("hindi", "test")),
        "--embeddings",
        p(&emb("hindi")),
        "--out-dir",
        p(&pl.path("eval")),
    ]);
    assert_eq!(joint_eval.status.code(), Some(2), "{}", stderr(&joint_eval));
    ok(&[
        "evaluate",
        "--checkpoint",
        p(&pl.path("joint/joint.snet")),
        "--lang",
        "hindi",
        "--test",
        p(&data("hindi", "test")),
        "--embeddings",
        p(&emb("hindi")),
        "--model-name",
        "JDIL-Hindi",
        "--out-dir",
        p(&pl.path("eval")),
    ]);
    let csv = fs::read_to_string(pl.path("eval/metrics_hindi.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("JDIL-Hindi,"));

    ok(&[
        "export-attention",
        "--checkpoint",
        p(&pl.path("joint/joint.snet")),
        "--lang",
        "hindi",
        "--input",
        p(&data("hindi", "test")),
        "--embeddings",
        p(&emb("hindi")),
        "--hops",
        "0,1,2",
        "--min-confidence",
        "0",
        "--limit",
        "4",
        "--out-dir",
        p(&pl.path("attn")),
    ]);
    let index: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(pl.path("attn/attention_index_hindi.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(index.as_array().unwrap().len(), 4);
    let first = index[0]["json"].as_str().unwrap();
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pl.path("attn").join(first)).unwrap()).unwrap();
    for row in record["weights"].as_array().unwrap() {
        let sum: f64 = row
            .as_array()
            .unwrap()
            .iter()
            .map(|w| w.as_f64().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }

    let bad_hop = sentinet(&[
        "export-attention",
        "--checkpoint",
        p(&pl.path("joint/joint.snet")),
        "--lang",
        "hindi",
        "--input",
        p(&data("hindi", "test")),
        "--embeddings",
        p(&emb("hindi")),
        "--hops",
        "3",
        "--out-dir",
        p(&pl.path("attn2")),
    ]);
    assert_eq!(bad_hop.status.code(), Some(4));
    let wrong_kind = sentinet(&[
        "export-attention",
        "--checkpoint",
        p(&base_ckpt),
        "--input",
        p(&data("hindi", "test")),
        "--embeddings",
        p(&emb("hindi")),
        "--out-dir",
        p(&pl.path("attn3")),
    ]);
    assert_eq!(wrong_kind.status.code(), Some(4));
    assert!(stderr(&wrong_kind).starts_with("kind_mismatch: "));
    let wrong_vocab = sentinet(&[
        "evaluate",
        "--checkpoint",
        p(&base_ckpt),
        "--test",
        p(&data("hindi", "test")),
        "--embeddings",
        p(&emb("bengali")),
        "--out-dir",
        p(&pl.path("eval2")),
    ]);
    assert!(stderr(&wrong_vocab).starts_with("vocabulary_mismatch: "));

    assert_eq!(digest(&inputs), before);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pl.path("joint/run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "train-joint");
    assert_eq!(manifest["cli"]["hops"], "3");
    assert_eq!(manifest["resolved"]["seed"], "1");
}

#[test]
fn help_on_every_subcommand() {
    for sub in [
        "preprocess",
        "train-embeddings",
        "train-baseline",
        "transfer",
        "train-joint",
        "evaluate",
        "export-attention",
    ] {
        let out = sentinet(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(
            text.contains("--config") && text.contains("--out-dir") && text.contains("--seed"),
            "{sub}"
        );
    }
    assert_eq!(sentinet(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_and_io_errors() {
    let out = sentinet(&["evaluate", "--checkpoint", "missing.snet"]);
    assert_eq!(out.status.code(), Some(3));
    let line = stderr(&out);
    assert!(
        line.starts_with("io_error: ") && line.contains("missing.snet"),
        "{line}"
    );
    assert_eq!(line.lines().count(), 1);

    assert_eq!(sentinet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sentinet(&["evaluate", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        sentinet(&["train-baseline", "--epochs", "many"])
            .status
            .code(),
        Some(2)
    );
    let missing = sentinet(&["train-baseline", "--out-dir", "x"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("--train, --val, --embeddings"));
}

#[test]
fn config_file_and_collisions() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.tsv");
    raw_corpus(&raw, 5, "HOF", "NOT");
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "# preprocess settings\ninput = {}\nlang = hindi\nhas_header = true\ntrain_size = 50\nval_size = 5\ntest_size = 5\nout-dir = {}\n",
            raw.display(),
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    ok(&["preprocess", "--config", p(&conf), "--train-size", "40"]);
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/run_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["train_size"], "50");
    assert_eq!(manifest["cli"]["train_size"], "40");
    assert_eq!(manifest["resolved"]["train_size"], "40");
    let train = fs::read_to_string(dir.path().join("out/hindi_train.tsv")).unwrap();
    assert_eq!(train.lines().count(), 40);

    fs::write(&conf, "lang = hindi\nwindow = 2\n").unwrap();
    let out = sentinet(&["preprocess", "--config", p(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("config_error: "));

    let clash_dir = dir.path().join("clash");
    fs::create_dir_all(&clash_dir).unwrap();
    let clash = clash_dir.join("hindi_train.tsv");
    fs::copy(&raw, &clash).unwrap();
    let original = fs::read(&clash).unwrap();
    let out = sentinet(&[
        "preprocess",
        "--input",
        p(&clash),
        "--lang",
        "hindi",
        "--has-header",
        "--train-size",
        "40",
        "--val-size",
        "5",
        "--test-size",
        "5",
        "--out-dir",
        p(&clash_dir),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert_eq!(fs::read(&clash).unwrap(), original);

    let short = sentinet(&[
        "preprocess",
        "--input",
        p(&raw),
        "--lang",
        "hindi",
        "--has-header",
        "--per-class",
        "40",
        "--out-dir",
        p(&dir.path().join("short")),
    ]);
    assert_eq!(short.status.code(), Some(4));
    assert!(stderr(&short).starts_with("insufficient_data: "));
}
