//! Flat `key=value` run configuration.
//!
//! A config file holds one `key=value` per line. Blank lines and lines
//! starting with `#` are ignored. `--set key=value` overrides the file and
//! `--seed` overrides both. Every key has a default; unknown keys and bad
//! values are all reported in one error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use currsum::corpus::{SyntheticSpec, Task};
use currsum::curriculum::TauPolicy;
use currsum::model::ModelConfig;
use currsum::trainer::{AdamWConfig, Regime, TrainConfig};
use currsum::{Error, Result};

/// Every recognized key with its default and meaning.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "top-level seed for init, shuffling and synthetic data"),
    ("data.train", "", "training corpus (JSONL); ignored when data.synthetic is set"),
    ("data.val", "", "validation corpus (JSONL), optional"),
    ("data.synthetic", "", "copy, lead1 or keyword_extract to generate the corpus"),
    ("data.n_train", "1000", "synthetic training examples"),
    ("data.n_val", "100", "synthetic validation examples"),
    ("data.noise_rate", "0", "probability of a corrupted synthetic training summary"),
    ("data.vocab_size", "50", "synthetic word types"),
    ("data.min_sentences", "3", "synthetic sentences per document, lower bound"),
    ("data.max_sentences", "5", "synthetic sentences per document, upper bound"),
    ("data.min_words", "3", "synthetic words per sentence, lower bound"),
    ("data.max_words", "6", "synthetic words per sentence, upper bound"),
    ("model.d_model", "64", "hidden size"),
    ("model.n_heads", "4", "attention heads"),
    ("model.enc_layers", "2", "encoder layers"),
    ("model.dec_layers", "2", "decoder layers"),
    ("model.ffn_dim", "128", "feed-forward hidden size"),
    ("model.max_len", "256", "longest encoder or decoder sequence"),
    ("train.regime", "baseline", "baseline, sentsum, currsum or currsentsum"),
    ("train.lr_main", "3e-5", "learning rate of the decoder group"),
    ("train.lr_pretrained", "1e-5", "learning rate of the tagging-trained group"),
    ("train.beta1", "0.9", "first moment decay"),
    ("train.beta2", "0.98", "second moment decay"),
    ("train.eps", "1e-8", "optimizer epsilon"),
    ("train.weight_decay", "0.01", "decoupled weight decay"),
    ("train.epochs", "1", "passes over the training data"),
    ("train.batch_size", "8", "examples per step"),
    ("train.max_steps", "0", "cap on optimizer steps, 0 for none"),
    ("train.eval_every", "50", "validation interval in steps"),
    ("train.clip_norm", "1.0", "global gradient norm cap"),
    ("train.stage1_steps", "500", "tagging steps before summarization training"),
    ("train.stage1_lr", "1e-3", "tagging learning rate"),
    ("train.max_decode_len", "32", "longest generated summary"),
    ("curriculum.lambda", "1.0", "confidence regularization strength"),
    ("curriculum.tau", "ema", "ema, batch_mean or static"),
    ("curriculum.tau_value", "0", "tau for the static policy"),
    ("curriculum.momentum", "0.9", "ema momentum"),
    ("compare.regimes", "baseline,currsum", "regimes compared by the compare command"),
    ("compare.seeds", "0,1,2,3,4", "seeds used by the compare command"),
    ("eval.beam", "4", "beam size for evaluation"),
];

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Files { train: Option<PathBuf>, val: Option<PathBuf> },
    Synthetic(SyntheticSpec),
}

/// Typed view of a complete configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub seed: u64,
    pub data: DataSource,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub regimes: Vec<Regime>,
    pub seeds: Vec<u64>,
    pub beam: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    explicit: BTreeMap<String, String>,
}

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

fn parse_pair(text: &str, origin: &str, problems: &mut Vec<String>) -> Option<(String, String)> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Some((k.trim().to_string(), v.trim().to_string())),
        _ => {
            problems.push(format!("{origin}: expected key=value, got {text:?}"));
            None
        }
    }
}

impl Settings {
    pub fn load(config: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut problems = Vec::new();
        let mut explicit = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(vec![format!("cannot read config {}: {e}", path.display())])
            })?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let origin = format!("{}:{}", path.display(), i + 1);
                if let Some((k, v)) = parse_pair(line, &origin, &mut problems) {
                    explicit.insert(k, v);
                }
            }
        }
        for o in overrides {
            if let Some((k, v)) = parse_pair(o, "--set", &mut problems) {
                explicit.insert(k, v);
            }
        }
        if let Some(s) = seed {
            explicit.insert("seed".into(), s.to_string());
        }
        for k in explicit.keys() {
            if !is_known(k) {
                problems.push(format!("unknown key {k:?}"));
            }
        }
        if problems.is_empty() {
            Ok(Self { explicit })
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn get(&self, key: &str) -> &str {
        if let Some(v) = self.explicit.get(key) {
            return v;
        }
        KEYS.iter()
            .find(|(k, _, _)| *k == key)
            .map(|(_, d, _)| *d)
            .expect("key is listed in KEYS")
    }

    /// Effective configuration as loadable `key=value` lines.
    pub fn render(&self) -> String {
        KEYS.iter()
            .map(|(k, _, _)| format!("{k}={}\n", self.get(k)))
            .collect()
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let mut p = Parser {
            settings: self,
            problems: Vec::new(),
        };
        let seed: u64 = p.num("seed");

        let mut model = ModelConfig::new(0);
        model.d_model = p.num("model.d_model");
        model.n_heads = p.num("model.n_heads");
        model.enc_layers = p.num("model.enc_layers");
        model.dec_layers = p.num("model.dec_layers");
        model.ffn_dim = p.num("model.ffn_dim");
        model.max_len = p.num("model.max_len");

        let tau = match self.get("curriculum.tau") {
            "ema" => TauPolicy::Ema {
                momentum: p.num("curriculum.momentum"),
            },
            "batch_mean" => TauPolicy::BatchMean,
            "static" => TauPolicy::Static(p.num("curriculum.tau_value")),
            other => {
                p.problems.push(format!(
                    "curriculum.tau: expected ema, batch_mean or static, got {other:?}"
                ));
                TauPolicy::default()
            }
        };
        let train = TrainConfig {
            regime: p.parsed("train.regime").unwrap_or(Regime::Baseline),
            lr_main: p.num("train.lr_main"),
            lr_pretrained: p.num("train.lr_pretrained"),
            adam: AdamWConfig {
                beta1: p.num("train.beta1"),
                beta2: p.num("train.beta2"),
                eps: p.num("train.eps"),
                weight_decay: p.num("train.weight_decay"),
            },
            epochs: p.num("train.epochs"),
            batch_size: p.num("train.batch_size"),
            max_steps: p.num("train.max_steps"),
            seed,
            lambda: p.num("curriculum.lambda"),
            tau,
            eval_every: p.num("train.eval_every"),
            clip_norm: p.num("train.clip_norm"),
            stage1_steps: p.num("train.stage1_steps"),
            stage1_lr: p.num("train.stage1_lr"),
            max_decode_len: p.num("train.max_decode_len"),
        };

        let data = match self.get("data.synthetic") {
            "" => {
                let path = |k: &str| Some(self.get(k)).filter(|v| !v.is_empty()).map(PathBuf::from);
                DataSource::Files {
                    train: path("data.train"),
                    val: path("data.val"),
                }
            }
            _ => {
                let task: Task = p.parsed("data.synthetic").unwrap_or(Task::Copy);
                let mut spec = SyntheticSpec::new(task, p.num("data.n_train"), p.num("data.n_val"), seed);
                spec.noise_rate = p.num("data.noise_rate");
                spec.vocab_size = p.num("data.vocab_size");
                spec.min_sentences = p.num("data.min_sentences");
                spec.max_sentences = p.num("data.max_sentences");
                spec.min_words = p.num("data.min_words");
                spec.max_words = p.num("data.max_words");
                if let Err(e) = spec.validate() {
                    p.problems.push(format!("data: {e}"));
                }
                DataSource::Synthetic(spec)
            }
        };

        let regimes = p.list::<Regime>("compare.regimes");
        let seeds = p.list::<u64>("compare.seeds");
        let beam = p.num("eval.beam");
        if beam == 0 {
            p.problems.push("eval.beam must be at least 1".into());
        }

        let mut problems = p.problems;
        let mut with_vocab = model.clone();
        with_vocab.vocab_size = currsum::corpus::vocab::SPECIAL_TOKENS.len();
        if let Err(Error::Config(m)) = with_vocab.validate() {
            problems.extend(m.into_iter().map(|m| format!("model: {m}")));
        }
        if let Err(Error::Config(m)) = train.validate() {
            problems.extend(m.into_iter().map(|m| format!("train: {m}")));
        }
        if problems.is_empty() {
            Ok(Resolved {
                seed,
                data,
                model,
                train,
                regimes,
                seeds,
                beam,
            })
        } else {
            Err(Error::Config(problems))
        }
    }
}

struct Parser<'a> {
    settings: &'a Settings,
    problems: Vec<String>,
}

impl Parser<'_> {
    fn parsed<T: FromStr>(&mut self, key: &str) -> Option<T> {
        let raw = self.settings.get(key);
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.problems.push(format!("{key}: cannot parse {raw:?}"));
                None
            }
        }
    }

    fn num<T: FromStr + Default>(&mut self, key: &str) -> T {
        self.parsed(key).unwrap_or_default()
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Vec<T> {
        let raw = self.settings.get(key).to_string();
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse() {
                Ok(v) => out.push(v),
                Err(_) => self.problems.push(format!("{key}: cannot parse {item:?}")),
            }
        }
        if out.is_empty() {
            self.problems.push(format!("{key}: needs at least one entry"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = Settings::default().resolve().unwrap();
        assert_eq!(r.train.regime, Regime::Baseline);
        assert_eq!(r.train.lr_main, 3e-5);
        assert_eq!(r.seeds.len(), 5);
        assert!(matches!(r.data, DataSource::Files { train: None, val: None }));
    }

    #[test]
    fn defaults_agree_with_library_defaults() {
        let r = Settings::default().resolve().unwrap();
        assert_eq!(r.train, TrainConfig::default());
    }

    #[test]
    fn overrides_and_seed_take_precedence() {
        let s = Settings::load(None, &["train.regime=currsum".into(), "seed=3".into()], Some(8))
            .unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.train.regime, Regime::CurrSum);
        assert_eq!(r.seed, 8);
        assert_eq!(r.train.seed, 8);
    }

    #[test]
    fn all_bad_values_are_reported() {
        let s = Settings::load(
            None,
            &[
                "train.regime=bart".into(),
                "model.d_model=x".into(),
                "train.batch_size=0".into(),
            ],
            None,
        )
        .unwrap();
        match s.resolve() {
            Err(Error::Config(p)) => {
                assert!(p.iter().any(|m| m.contains("train.regime")), "{p:?}");
                assert!(p.iter().any(|m| m.contains("model.d_model")), "{p:?}");
                assert!(p.iter().any(|m| m.contains("batch_size")), "{p:?}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_together() {
        let err = Settings::load(None, &["nope=1".into(), "also.nope=2".into()], None).unwrap_err();
        match err {
            Error::Config(p) => assert_eq!(p.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rendered_settings_round_trip() {
        let s = Settings::load(None, &["data.synthetic=lead1".into(), "seed=4".into()], None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg");
        std::fs::write(&path, s.render()).unwrap();
        let back = Settings::load(Some(&path), &[], None).unwrap();
        assert_eq!(back.resolve().unwrap(), s.resolve().unwrap());
    }
}
