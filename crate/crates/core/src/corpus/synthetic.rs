//! Seeded synthetic summarization corpora.
//!
//! Words are `w0 … w{vocab_size-1}`; sentences end in `.` so the splitter
//! sees unambiguous boundaries.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Example;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Token that marks the summary sentence in keyword extraction.
pub const MARKER: &str = "key";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// Summary is the whole source.
    Copy,
    /// Summary is the first source sentence.
    Lead1,
    /// Exactly one sentence carries [`MARKER`]; the summary is that sentence.
    KeywordExtract,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy" => Ok(Task::Copy),
            "lead1" => Ok(Task::Lead1),
            "keyword_extract" => Ok(Task::KeywordExtract),
            other => Err(Error::Argument(format!("unknown synthetic task {other:?}"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Copy => "copy",
            Task::Lead1 => "lead1",
            Task::KeywordExtract => "keyword_extract",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub task: Task,
    pub n_train: usize,
    pub n_val: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub vocab_size: usize,
    /// Probability that a training summary is swapped for a wrong sentence.
    pub noise_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(task: Task, n_train: usize, n_val: usize, seed: u64) -> Self {
        Self {
            task,
            n_train,
            n_val,
            min_sentences: 3,
            max_sentences: 5,
            min_words: 3,
            max_words: 6,
            vocab_size: 50,
            noise_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_train == 0 {
            problems.push("n_train must be positive".to_string());
        }
        if self.min_sentences < 1 || self.min_sentences > self.max_sentences {
            problems.push(format!(
                "sentence range {}..={} is empty or starts below 1",
                self.min_sentences, self.max_sentences
            ));
        }
        if self.min_words < 1 || self.min_words > self.max_words {
            problems.push(format!(
                "word range {}..={} is empty or starts below 1",
                self.min_words, self.max_words
            ));
        }
        if self.vocab_size == 0 {
            problems.push("vocab_size must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            problems.push(format!("noise_rate {} outside [0, 1)", self.noise_rate));
        }
        // A wrong sentence has to exist to corrupt a summary.
        if self.noise_rate > 0.0 && self.min_sentences < 2 {
            problems.push("noise needs at least two sentences per document".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(problems.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Vec<Example>,
    /// Always clean.
    pub val: Vec<Example>,
    /// Ids of training examples whose summary was corrupted.
    pub corrupted: Vec<String>,
}

fn sentence(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Vec<String> {
    let n = rng.gen_range(spec.min_words..=spec.max_words);
    (0..n)
        .map(|_| format!("w{}", rng.gen_range(0..spec.vocab_size)))
        .collect()
}

fn render(sentence: &[String]) -> String {
    format!("{}.", sentence.join(" "))
}

/// One document, its clean summary and the index of the target sentence
/// (`None` for copy, where the whole source is the target).
fn document(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> (Vec<Vec<String>>, Option<usize>) {
    let n = rng.gen_range(spec.min_sentences..=spec.max_sentences);
    let mut sentences: Vec<Vec<String>> = (0..n).map(|_| sentence(rng, spec)).collect();
    let target = match spec.task {
        Task::Copy => None,
        Task::Lead1 => Some(0),
        Task::KeywordExtract => {
            let t = rng.gen_range(0..n);
            let pos = rng.gen_range(0..=sentences[t].len());
            sentences[t].insert(pos, MARKER.to_string());
            Some(t)
        }
    };
    (sentences, target)
}

fn example(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    id: String,
    noisy: bool,
) -> (Example, bool) {
    let (sentences, target) = document(rng, spec);
    let source: Vec<String> = sentences.iter().map(|s| render(s)).collect();
    let clean = match target {
        Some(t) => source[t].clone(),
        None => source.join(" "),
    };
    let corrupt = noisy && rng.gen_bool(spec.noise_rate);
    let summary = if corrupt {
        let n = sentences.len();
        let pick = match target {
            // Uniform over the other n-1 sentences.
            Some(t) => (t + 1 + rng.gen_range(0..n - 1)) % n,
            None => rng.gen_range(0..n),
        };
        source[pick].clone()
    } else {
        clean
    };
    (Example::new(id, source.join(" "), summary), corrupt)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = substream(spec.seed, Stream::Noise);
    let mut train = Vec::with_capacity(spec.n_train);
    let mut corrupted = Vec::new();
    for i in 0..spec.n_train {
        let (ex, corrupt) = example(&mut rng, spec, format!("train-{i}"), spec.noise_rate > 0.0);
        if corrupt {
            corrupted.push(ex.id.clone());
        }
        train.push(ex);
    }
    let val = (0..spec.n_val)
        .map(|i| example(&mut rng, spec, format!("val-{i}"), false).0)
        .collect();
    Ok(SyntheticCorpus {
        train,
        val,
        corrupted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lead1_summary_is_first_sentence() {
        let c = generate_synthetic(&SyntheticSpec::new(Task::Lead1, 50, 10, 3)).unwrap();
        for ex in c.train.iter().chain(&c.val) {
            let first = ex.source.split_inclusive('.').next().unwrap().trim();
            assert_eq!(ex.summary, first);
        }
        assert!(c.corrupted.is_empty());
    }

    #[test]
    fn keyword_marker_appears_once() {
        let c = generate_synthetic(&SyntheticSpec::new(Task::KeywordExtract, 50, 10, 4)).unwrap();
        for ex in &c.train {
            assert_eq!(ex.source.matches(MARKER).count(), 1);
            assert!(ex.summary.contains(MARKER));
        }
    }

    #[test]
    fn noise_only_touches_training() {
        let mut spec = SyntheticSpec::new(Task::KeywordExtract, 200, 50, 5);
        spec.noise_rate = 0.5;
        let c = generate_synthetic(&spec).unwrap();
        assert!(!c.corrupted.is_empty());
        for ex in &c.train {
            let bad = c.corrupted.contains(&ex.id);
            assert_eq!(bad, !ex.summary.contains(MARKER));
        }
        assert!(c.val.iter().all(|ex| ex.summary.contains(MARKER)));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SyntheticSpec::new(Task::Copy, 10, 1, 0);
        spec.min_sentences = 0;
        assert!(matches!(generate_synthetic(&spec), Err(Error::Argument(_))));
        let mut spec = SyntheticSpec::new(Task::Copy, 10, 1, 0);
        spec.noise_rate = 1.0;
        assert!(spec.validate().is_err());
    }
}
