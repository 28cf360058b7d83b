use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};
use sentinet::text::Language;
use serde_json::{json, Value};

use crate::failure::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Existing file read by the subcommand.
    Input,
    /// Directory receiving every output.
    OutDir,
    Text,
    Count,
    Seed,
    Real,
    Flag,
    Lang,
}

#[derive(Clone, Copy, Debug)]
pub struct Opt {
    pub flag: &'static str,
    pub kind: Kind,
    pub help: &'static str,
    pub default: Option<&'static str>,
    pub required: bool,
}

const fn opt(flag: &'static str, kind: Kind, help: &'static str) -> Opt {
    Opt {
        flag,
        kind,
        help,
        default: None,
        required: false,
    }
}

const fn opt_or(flag: &'static str, kind: Kind, help: &'static str, default: &'static str) -> Opt {
    Opt {
        flag,
        kind,
        help,
        default: Some(default),
        required: false,
    }
}

const fn req(flag: &'static str, kind: Kind, help: &'static str) -> Opt {
    Opt {
        flag,
        kind,
        help,
        default: None,
        required: true,
    }
}

impl Opt {
    pub fn key(&self) -> String {
        self.flag.replace('-', "_")
    }
}

pub struct Spec {
    pub name: &'static str,
    pub about: &'static str,
    pub options: Vec<Opt>,
}

const SEED: Opt = opt_or("seed", Kind::Seed, "Root seed for every random stream", "1");
const OUT_DIR: Opt = req(
    "out-dir",
    Kind::OutDir,
    "Directory for all outputs (created if missing)",
);

const HYPERPARAMS: [Opt; 11] = [
    opt(
        "embed-dim",
        Kind::Count,
        "Embedding width (defaults to the table's width)",
    ),
    opt(
        "hidden",
        Kind::Count,
        "LSTM hidden size (per direction for the joint model)",
    ),
    opt("layers", Kind::Count, "Stacked recurrent layers"),
    opt("dropout", Kind::Real, "Dropout probability"),
    opt("batch-size", Kind::Count, "Examples per batch"),
    opt("epochs", Kind::Count, "Training epochs"),
    opt("learning-rate", Kind::Real, "Adam learning rate"),
    opt("hops", Kind::Count, "Attention hops r"),
    opt("attention-hidden", Kind::Count, "Attention hidden size d_a"),
    opt(
        "fc-hidden",
        Kind::Count,
        "Width of the fully connected layer after attention",
    ),
    opt(
        "penalty-coef",
        Kind::Real,
        "Coefficient of the attention redundancy penalty",
    ),
];

fn with_shared(mut options: Vec<Opt>, lang: Option<Opt>) -> Vec<Opt> {
    options.push(SEED);
    options.push(OUT_DIR);
    options.extend(lang);
    options
}

pub fn specs() -> Vec<Spec> {
    let lang = |help| opt("lang", Kind::Lang, help);
    vec![
        Spec {
            name: "preprocess",
            about:
                "Clean a raw TSV corpus, report emoji/hashtag statistics and write seeded splits",
            options: with_shared(
                vec![
                    req(
                        "input",
                        Kind::Input,
                        "Raw corpus TSV: id<TAB>text<TAB>label",
                    ),
                    opt_or(
                        "has-header",
                        Kind::Flag,
                        "Skip the first row of the input",
                        "false",
                    ),
                    opt(
                        "stop-words",
                        Kind::Input,
                        "Stop-word list, one word per line",
                    ),
                    opt(
                        "emoji-blocks",
                        Kind::Text,
                        "Emoji code point ranges, e.g. 1F300-1FAFF,2600-27BF",
                    ),
                    opt(
                        "positive-labels",
                        Kind::Text,
                        "Comma-separated labels mapped to 1 [default: hof,hate,1]",
                    ),
                    opt(
                        "negative-labels",
                        Kind::Text,
                        "Comma-separated labels mapped to 0 [default: not,nothate,0]",
                    ),
                    opt(
                        "per-class",
                        Kind::Count,
                        "Draw this many records per class before splitting",
                    ),
                    opt(
                        "train-size",
                        Kind::Count,
                        "Training examples [default: 2985 hindi, 3194 bengali]",
                    ),
                    opt(
                        "val-size",
                        Kind::Count,
                        "Validation examples [default: 746 hindi, 798 bengali]",
                    ),
                    opt(
                        "test-size",
                        Kind::Count,
                        "Test examples [default: 932 hindi, 998 bengali]",
                    ),
                ],
                Some(req("lang", Kind::Lang, "Corpus language")),
            ),
        },
        Spec {
            name: "train-embeddings",
            about: "Train skip-gram embeddings with frequency subsampling on cleaned TSVs",
            options: with_shared(
                vec![
                    req("input", Kind::Text, "Comma-separated cleaned TSV files"),
                    opt_or("epochs", Kind::Count, "Training epochs", "500"),
                    opt_or("window", Kind::Count, "Context window on each side", "2"),
                    opt_or("dim", Kind::Count, "Embedding width", "300"),
                    opt_or("learning-rate", Kind::Real, "Adam learning rate", "0.05"),
                    opt_or("batch-size", Kind::Count, "Pairs per batch", "512"),
                    opt_or(
                        "min-count",
                        Kind::Count,
                        "Minimum word count kept in the vocabulary",
                        "1",
                    ),
                ],
                Some(req("lang", Kind::Lang, "Language of the input examples")),
            ),
        },
        Spec {
            name: "train-baseline",
            about: "Train the stacked LSTM classifier on one language",
            options: with_shared(
                [
                    &[
                        req("train", Kind::Input, "Cleaned training TSV"),
                        req("val", Kind::Input, "Cleaned validation TSV"),
                        req("embeddings", Kind::Input, "Embedding table text file"),
                    ][..],
                    &HYPERPARAMS[..],
                ]
                .concat(),
                Some(opt_or("lang", Kind::Lang, "Training language", "hindi")),
            ),
        },
        Spec {
            name: "transfer",
            about: "Initialize from a baseline checkpoint, swap the embedding table and fine-tune",
            options: with_shared(
                [
                    &[
                        req(
                            "source",
                            Kind::Input,
                            "Baseline checkpoint to transfer from",
                        ),
                        req(
                            "train",
                            Kind::Input,
                            "Cleaned training TSV of the target language",
                        ),
                        req(
                            "val",
                            Kind::Input,
                            "Cleaned validation TSV of the target language",
                        ),
                        req("embeddings", Kind::Input, "Target-language embedding table"),
                    ][..],
                    &HYPERPARAMS[..],
                ]
                .concat(),
                Some(opt_or("lang", Kind::Lang, "Target language", "bengali")),
            ),
        },
        Spec {
            name: "train-joint",
            about: "Jointly train the self-attentive BiLSTM on Hindi and Bengali batches",
            options: with_shared(
                [
                    &[
                        req("hindi-train", Kind::Input, "Cleaned Hindi training TSV"),
                        req("hindi-val", Kind::Input, "Cleaned Hindi validation TSV"),
                        req("hindi-embeddings", Kind::Input, "Hindi embedding table"),
                        req("bengali-train", Kind::Input, "Cleaned Bengali training TSV"),
                        req("bengali-val", Kind::Input, "Cleaned Bengali validation TSV"),
                        req("bengali-embeddings", Kind::Input, "Bengali embedding table"),
                    ][..],
                    &HYPERPARAMS[..],
                ]
                .concat(),
                None,
            ),
        },
        Spec {
            name: "evaluate",
            about: "Score a checkpoint on a cleaned test split and write metrics",
            options: with_shared(
                vec![
                    req("checkpoint", Kind::Input, "Checkpoint to evaluate"),
                    req("test", Kind::Input, "Cleaned test TSV"),
                    req(
                        "embeddings",
                        Kind::Input,
                        "Embedding table of the test language",
                    ),
                    opt(
                        "model-name",
                        Kind::Text,
                        "Name in the metrics row [default: <kind>-<lang>]",
                    ),
                ],
                Some(lang(
                    "Test language (optional for single-language checkpoints)",
                )),
            ),
        },
        Spec {
            name: "export-attention",
            about: "Export attention weights of confident predictions as JSON and HTML",
            options: with_shared(
                vec![
                    req("checkpoint", Kind::Input, "Joint checkpoint"),
                    req("input", Kind::Input, "Cleaned TSV of examples to visualize"),
                    req(
                        "embeddings",
                        Kind::Input,
                        "Embedding table of the examples' language",
                    ),
                    opt_or(
                        "hops",
                        Kind::Text,
                        "Comma-separated hop indices",
                        "0,1,2,3,4",
                    ),
                    opt_or(
                        "min-confidence",
                        Kind::Real,
                        "Keep predictions with confidence above this",
                        "0.9",
                    ),
                    opt("limit", Kind::Count, "Export at most this many examples"),
                ],
                Some(lang("Language of the examples")),
            ),
        },
    ]
}

fn arg(o: &Opt) -> Arg {
    let a = Arg::new(o.flag).long(o.flag).help(o.help);
    match o.kind {
        Kind::Flag => a.action(ArgAction::SetTrue),
        kind => {
            let a = a.value_name(match kind {
                Kind::Input | Kind::OutDir => "PATH",
                Kind::Count | Kind::Seed => "N",
                Kind::Real => "X",
                Kind::Lang => "LANG",
                _ => "TEXT",
            });
            let a = match kind {
                Kind::Count => a.value_parser(clap::value_parser!(usize)),
                Kind::Seed => a.value_parser(clap::value_parser!(u64)),
                Kind::Real => a.value_parser(clap::value_parser!(f64)),
                Kind::Lang => a.value_parser(["hindi", "bengali"]),
                _ => a,
            };
            match o.default {
                Some(d) => a.default_value(d),
                None => a,
            }
        }
    }
}

pub fn command() -> Command {
    let mut cmd = Command::new("sentinet")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Word2Vec, LSTM, transfer and joint self-attentive BiLSTM pipeline for Hindi and Bengali hate-speech detection")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for spec in specs() {
        let mut sub = Command::new(spec.name)
            .about(spec.about)
            .after_help("Every flag can also be set in the --config file as key=value, using the flag name with '-' replaced by '_'. Flags given on the command line win.")
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("PATH")
                    .help("key=value settings file"),
            );
        for o in &spec.options {
            sub = sub.arg(arg(o));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Parses `key = value` lines; `#` starts a comment line. Keys accept `-` or `_`.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Failure::config(format!(
                "{}:{}: expected key=value",
                path.display(),
                n + 1
            )));
        };
        let key = k.trim().replace('-', "_");
        if out.iter().any(|(existing, _)| *existing == key) {
            return Err(Failure::config(format!(
                "{}:{}: duplicate key {key}",
                path.display(),
                n + 1
            )));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn check_value(o: &Opt, value: &str) -> Result<(), String> {
    let ok = match o.kind {
        Kind::Count => value.parse::<usize>().is_ok(),
        Kind::Seed => value.parse::<u64>().is_ok(),
        Kind::Real => value.parse::<f64>().map(f64::is_finite).unwrap_or(false),
        Kind::Flag => matches!(value, "true" | "false"),
        Kind::Lang => value.parse::<Language>().is_ok(),
        Kind::Input | Kind::OutDir | Kind::Text => !value.is_empty(),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("invalid value {value:?} for {}", o.key()))
    }
}

/// Resolved settings of one invocation: command line over config file over
/// built-in defaults.
#[derive(Debug)]
pub struct Settings {
    pub subcommand: String,
    options: Vec<Opt>,
    config_path: Option<PathBuf>,
    config: BTreeMap<String, String>,
    cli: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(spec: &Spec, matches: &ArgMatches) -> Result<Self, Failure> {
        let mut cli = BTreeMap::new();
        for o in &spec.options {
            if matches.value_source(o.flag) != Some(ValueSource::CommandLine) {
                continue;
            }
            let value = if o.kind == Kind::Flag {
                "true".to_string()
            } else {
                matches
                    .get_raw(o.flag)
                    .and_then(|mut v| v.next())
                    .map(|v| v.to_string_lossy().into_owned())
                    .unwrap_or_default()
            };
            cli.insert(o.key(), value);
        }

        let config_path = matches.get_one::<String>("config").map(PathBuf::from);
        let mut config = BTreeMap::new();
        if let Some(path) = &config_path {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, &e))?;
            for (key, value) in parse_config(&text, path)? {
                let Some(o) = spec.options.iter().find(|o| o.key() == key) else {
                    return Err(Failure::config(format!(
                        "{}: unknown key {key} for {}",
                        path.display(),
                        spec.name
                    )));
                };
                check_value(o, &value)
                    .map_err(|m| Failure::invalid_value(format!("{}: {m}", path.display())))?;
                config.insert(key, value);
            }
        }

        let mut resolved = BTreeMap::new();
        for o in &spec.options {
            let key = o.key();
            let value = cli
                .get(&key)
                .or_else(|| config.get(&key))
                .cloned()
                .or_else(|| o.default.map(String::from));
            if let Some(v) = value {
                resolved.insert(key, v);
            }
        }

        let settings = Self {
            subcommand: spec.name.to_string(),
            options: spec.options.clone(),
            config_path,
            config,
            cli,
            resolved,
        };
        settings.check_inputs()?;
        settings.check_required()?;
        Ok(settings)
    }

    /// Every input path named in the settings must exist before work begins,
    /// checked in declaration order.
    fn check_inputs(&self) -> Result<(), Failure> {
        for o in self.options.iter().filter(|o| o.kind == Kind::Input) {
            if let Some(p) = self.resolved.get(&o.key()) {
                let path = Path::new(p);
                let meta = fs::metadata(path).map_err(|e| Failure::io(path, &e))?;
                if !meta.is_file() {
                    return Err(Failure::io_message(path, "not a regular file"));
                }
            }
        }
        Ok(())
    }

    fn check_required(&self) -> Result<(), Failure> {
        let missing: Vec<String> = self
            .options
            .iter()
            .filter(|o| o.required && !self.resolved.contains_key(&o.key()))
            .map(|o| format!("--{}", o.flag))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Failure::usage(format!(
                "{} needs {} (flags or config keys)",
                self.subcommand,
                missing.join(", ")
            )))
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(
            self.options.iter().any(|o| o.key() == key),
            "undeclared key {key}"
        );
        self.resolved.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, Failure> {
        self.get(key).ok_or_else(|| {
            Failure::usage(format!(
                "{} needs --{} (or config key {key})",
                self.subcommand,
                key.replace('_', "-")
            ))
        })
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Failure::invalid_value(format!("invalid value {v:?} for {key}")))
            })
            .transpose()
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T, Failure> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Failure::invalid_value(format!("invalid value {v:?} for {key}")))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, Failure> {
        self.require(key).map(PathBuf::from)
    }

    pub fn flag(&self, key: &str) -> bool {
        self.get(key) == Some("true")
    }

    pub fn seed(&self) -> Result<u64, Failure> {
        self.parse_required("seed")
    }

    /// Input paths, canonicalized, for collision checks against outputs.
    pub fn input_paths(&self) -> Vec<PathBuf> {
        self.options
            .iter()
            .filter(|o| o.kind == Kind::Input)
            .filter_map(|o| self.resolved.get(&o.key()))
            .filter_map(|p| fs::canonicalize(p).ok())
            .collect()
    }

    /// Hyperparameter overrides present in the settings, in declaration order.
    pub fn hyperparams(&self) -> Vec<(String, &str)> {
        HYPERPARAMS
            .iter()
            .filter_map(|o| {
                let k = o.key();
                self.resolved.get(&k).map(|v| (k, v.as_str()))
            })
            .collect()
    }

    pub fn manifest(&self, outputs: &[PathBuf]) -> Value {
        json!({
            "subcommand": self.subcommand,
            "version": env!("CARGO_PKG_VERSION"),
            "config_file": self.config_path.as_ref().map(|p| p.display().to_string()),
            "config": self.config,
            "cli": self.cli,
            "resolved": self.resolved,
            "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(args: &[&str], config: Option<&str>) -> Result<Settings, Failure> {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.tsv");
        fs::write(&input, "").unwrap();
        let mut argv: Vec<String> = vec!["sentinet".into()];
        argv.extend(
            args.iter()
                .map(|s| s.replace("{in}", input.to_str().unwrap())),
        );
        if let Some(text) = config {
            let p = dir.path().join("run.conf");
            fs::write(&p, text).unwrap();
            argv.push("--config".into());
            argv.push(p.display().to_string());
        }
        let m = command().try_get_matches_from(argv).unwrap();
        let (name, sub) = m.subcommand().unwrap();
        let spec = specs().into_iter().find(|s| s.name == name).unwrap();
        Settings::resolve(&spec, sub)
    }

    #[test]
    fn every_flag_has_a_config_key() {
        for spec in specs() {
            let keys: Vec<String> = spec.options.iter().map(Opt::key).collect();
            let mut dedup = keys.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), keys.len(), "{}", spec.name);
            assert!(keys.iter().all(|k| !k.contains('-')));
        }
        command().debug_assert();
    }

    #[test]
    fn cli_beats_config_beats_default() {
        let s = settings(
            &[
                "train-embeddings",
                "--window",
                "3",
                "--input",
                "a.tsv",
                "--lang",
                "hindi",
                "--out-dir",
                "o",
            ],
            Some("window = 4\ndim=8\n# note\n"),
        )
        .unwrap();
        assert_eq!(s.get("window"), Some("3"));
        assert_eq!(s.get("dim"), Some("8"));
        assert_eq!(s.get("epochs"), Some("500"));
        assert_eq!(s.get("min_count"), Some("1"));
        assert_eq!(s.get("lang"), Some("hindi"));
        assert_eq!(s.manifest(&[])["cli"]["window"], "3");
        assert_eq!(s.manifest(&[])["config"]["window"], "4");
    }

    #[test]
    fn flags_and_hyphenated_keys() {
        let base = [
            "preprocess",
            "--input",
            "{in}",
            "--lang",
            "bengali",
            "--out-dir",
            "o",
        ];
        let s = settings(&base, Some("has-header=true\n")).unwrap();
        assert!(s.flag("has_header"));
        let s = settings(
            &[&base[..], &["--has-header"]].concat(),
            Some("has_header=false\n"),
        )
        .unwrap();
        assert!(s.flag("has_header"));
        assert!(!settings(&base, None).unwrap().flag("has_header"));
    }

    #[test]
    fn unknown_and_bad_config_keys() {
        let e = settings(&["train-embeddings"], Some("hops=3\n")).unwrap_err();
        assert_eq!(e.exit, 2);
        let e = settings(&["train-embeddings"], Some("window=three\n")).unwrap_err();
        assert_eq!(e.exit, 4);
        let e = settings(&["train-embeddings"], Some("window\n")).unwrap_err();
        assert_eq!(e.exit, 2);
        let e = settings(&["train-embeddings"], Some("dim=3\ndim=4\n")).unwrap_err();
        assert_eq!(e.exit, 2);
    }

    #[test]
    fn missing_input_is_io() {
        let e = settings(&["evaluate", "--checkpoint", "/nonexistent/x.snet"], None).unwrap_err();
        assert_eq!(e.exit, 3);
        assert!(e.message.contains("/nonexistent/x.snet"));
        let e = settings(&["evaluate", "--checkpoint", "{in}"], None).unwrap_err();
        assert_eq!(e.exit, 2);
        assert!(
            e.message.contains("--test, --embeddings, --out-dir"),
            "{}",
            e.message
        );
    }
}
