//! Command-line front end: labeling, training, evaluation and regime
//! comparison.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for bad input (corpus,
//! config, checkpoint or arguments).

pub mod settings;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use currsum::corpus::{
    corpus_hash, generate_synthetic, label_corpus, load_jsonl, write_labels, Example,
};
use currsum::model::{checkpoint, DecodeMode};
use currsum::textmetrics::{evaluate_rouge, RougeSummary};
use currsum::trainer::{evaluate, prepare, run_comparison, run_pipeline, EvalSet, PreparedData};
use currsum::{Error, Result};

use settings::{DataSource, Resolved, Settings};

#[derive(Debug, Parser)]
#[command(name = "currsum", version, about = "Curriculum-trained summarization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-sentence saliency labels for a JSONL corpus.
    Label {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one regime and write a checkpoint, report and manifest.
    Train(RunArgs),
    /// Score a checkpoint (greedy and beam) or a predictions file.
    Eval {
        /// Corpus whose summaries are the references.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Corpus-format file whose summaries are the candidates, matched
        /// by id.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train several regimes over several seeds and tabulate convergence.
    Compare(RunArgs),
}

/// Maps an error onto the exit-code contract.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Label { corpus, out } => cmd_label(&corpus, &out),
        Command::Train(args) => cmd_train(&args),
        Command::Eval {
            corpus,
            checkpoint,
            predictions,
            run,
        } => cmd_eval(&corpus, checkpoint.as_deref(), predictions.as_deref(), &run),
        Command::Compare(args) => cmd_compare(&args),
    }
}

/// Reads a corpus; a missing or unreadable file is an input error.
fn read_corpus(path: &Path) -> Result<Vec<Example>> {
    match load_jsonl(path) {
        Ok(c) => Ok(c.examples),
        Err(Error::Io(e)) => Err(Error::Corpus(format!("{}: {e}", path.display()))),
        Err(e) => Err(e),
    }
}

fn out_dir(out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn manifest(command: &str, hash: &str, body: &str) -> String {
    format!(
        "# currsum manifest\n# command: {command}\n# corpus_hash: {hash}\n# version: {}\n{body}",
        env!("CARGO_PKG_VERSION")
    )
}

fn load_settings(args: &RunArgs) -> Result<(Settings, Resolved)> {
    let settings = Settings::load(args.config.as_deref(), &args.overrides, args.seed)?;
    let resolved = settings.resolve()?;
    Ok((settings, resolved))
}

fn load_data(r: &Resolved) -> Result<PreparedData> {
    let (train, val) = match &r.data {
        DataSource::Synthetic(spec) => {
            let c = generate_synthetic(spec)?;
            log::info!("generated {} training examples, {} corrupted", c.train.len(), c.corrupted.len());
            (c.train, c.val)
        }
        DataSource::Files { train, val } => {
            let train = train.as_deref().ok_or_else(|| {
                Error::Config(vec!["data.train or data.synthetic must be set".into()])
            })?;
            let val = match val {
                Some(p) => read_corpus(p)?,
                None => Vec::new(),
            };
            (read_corpus(train)?, val)
        }
    };
    let data = prepare(&train, &val, r.model.max_len)?;
    for (id, reason) in &data.skipped {
        log::warn!("training example {id} skipped: {reason}");
    }
    Ok(data)
}

pub fn cmd_label(corpus: &Path, out: &Path) -> Result<()> {
    let examples = read_corpus(corpus)?;
    let labels = label_corpus(&examples);
    for id in &labels.skipped {
        log::warn!("example {id} has no sentences; no labels written");
    }
    std::fs::create_dir_all(out)?;
    write_labels(&labels, &out.join("labels.tsv"))?;
    let body = format!("corpus={}\n", corpus.display());
    std::fs::write(out.join("manifest.txt"), manifest("label", &labels.corpus_hash, &body))?;
    println!("labeled {} examples", labels.labels.len());
    Ok(())
}

pub fn cmd_train(args: &RunArgs) -> Result<()> {
    let (settings, r) = load_settings(args)?;
    let dir = out_dir(args.out.as_deref())?;
    let data = load_data(&r)?;
    let outcome = run_pipeline(&data, &r.model, &r.train)?;
    checkpoint::save(&outcome.model, &data.vocab, &dir.join("checkpoint.txt"))?;
    let mut csv = outcome.report.to_csv();
    for (step, mse) in outcome.stage1_mse.iter().enumerate() {
        writeln!(csv, "{step},stage1,tagging_mse,{mse:e}").unwrap();
    }
    std::fs::write(dir.join("report.csv"), csv)?;
    std::fs::write(
        dir.join("manifest.txt"),
        manifest("train", &data.corpus_hash, &settings.render()),
    )?;
    let rep = &outcome.report;
    println!(
        "{} seed {}: {} steps, best val RG-L {:.4} at step {} ({:.1?})",
        rep.regime, rep.seed, rep.total_steps, rep.best_rouge_l, rep.best_step, rep.wall_clock
    );
    Ok(())
}

fn format_scores(rows: &[(String, RougeSummary)]) -> String {
    let mut out = String::from("decode,rouge1,rouge2,rougeL\n");
    for (name, s) in rows {
        writeln!(out, "{name},{:.6},{:.6},{:.6}", s.rouge1, s.rouge2, s.rouge_l).unwrap();
    }
    out
}

pub fn cmd_eval(
    corpus: &Path,
    checkpoint_path: Option<&Path>,
    predictions: Option<&Path>,
    args: &RunArgs,
) -> Result<()> {
    let (_, r) = load_settings(args)?;
    let references = read_corpus(corpus)?;
    if references.is_empty() {
        return Err(Error::Corpus(format!("{} has no examples", corpus.display())));
    }
    let mut rows = Vec::new();
    if let Some(path) = predictions {
        let preds = read_corpus(path)?;
        let mut cands = Vec::with_capacity(references.len());
        let mut refs = Vec::with_capacity(references.len());
        for ex in &references {
            let p = preds
                .iter()
                .find(|p| p.id == ex.id)
                .ok_or_else(|| Error::Corpus(format!("no prediction for example {}", ex.id)))?;
            cands.push(p.summary_tokens());
            refs.push(ex.summary_tokens());
        }
        rows.push(("predictions".to_string(), evaluate_rouge(&cands, &refs)?));
    }
    if let Some(path) = checkpoint_path {
        let (model, vocab) = checkpoint::load(path)?;
        let set = EvalSet::new(&references, &vocab, model.config().max_len);
        if set.is_empty() {
            return Err(Error::Corpus("no example could be framed".into()));
        }
        let len = r.train.max_decode_len;
        rows.push(("greedy".into(), evaluate(&model, &vocab, &set, DecodeMode::Greedy, len)?));
        rows.push((
            format!("beam{}", r.beam),
            evaluate(&model, &vocab, &set, DecodeMode::Beam(r.beam), len)?,
        ));
    }
    if rows.is_empty() {
        return Err(Error::Argument("eval needs --checkpoint or --predictions".into()));
    }
    let table = format_scores(&rows);
    print!("{table}");
    if let Some(out) = &args.out {
        let dir = out_dir(Some(out))?;
        std::fs::write(dir.join("eval.csv"), &table)?;
        let body = format!("corpus={}\n", corpus.display());
        std::fs::write(
            dir.join("manifest.txt"),
            manifest("eval", &corpus_hash(&references), &body),
        )?;
    }
    Ok(())
}

pub fn cmd_compare(args: &RunArgs) -> Result<()> {
    let (settings, r) = load_settings(args)?;
    let dir = out_dir(args.out.as_deref())?;
    let data = load_data(&r)?;
    let table = run_comparison(&data, &r.model, &r.train, &r.regimes, &r.seeds)?;
    std::fs::write(dir.join("summary.csv"), table.summary_csv())?;
    std::fs::write(dir.join("curves.csv"), table.curves_csv())?;
    std::fs::write(
        dir.join("manifest.txt"),
        manifest("compare", &data.corpus_hash, &settings.render()),
    )?;
    print!("{}", table.summary_csv());
    Ok(())
}

