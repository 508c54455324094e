//! The `udharmony` command line.
//!
//! Every subcommand resolves its settings from command-line flags, then an
//! optional flat `key = value` config file, then built-in defaults. The
//! resolved settings are echoed into the output directory as `run.conf`
//! next to a `run_manifest.json` that pins input and output checksums.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 gold/prediction
//! alignment error.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::conllu::{parse_corpus, serialize_corpus, write_corpus, Corpus, ParseOptions};
use crate::convert::{self, ConverterConfig, NoReplacement, Strategy};
use crate::embed_store::{VectorStore, DEFAULT_K};
use crate::evalx::{self, Metric, ScoreOptions, SignificanceConfig, DEFAULT_THRESHOLD};
use crate::mismatch;
use crate::pair_index::{NormalizationPolicy, PairIndex};
use crate::rng::{SeededRng, GENERATOR_NAME};
use crate::sampler::{self, sample_file_stem, sha256_hex, SamplePlan, Side};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ALIGNMENT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Alignment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Alignment(_) => EXIT_ALIGNMENT,
        }
    }
}

fn input_err(e: impl Display) -> CliError {
    CliError::Input(e.to_string())
}

impl From<evalx::EvalError> for CliError {
    fn from(e: evalx::EvalError) -> Self {
        match e {
            evalx::EvalError::Alignment { .. } => CliError::Alignment(e.to_string()),
            evalx::EvalError::InvalidConfig(_) => CliError::Input(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "udharmony",
    version,
    about = "Harmonize dependency annotations between CoNLL-U treebanks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find relations the augment corpus uses for a word pair that the base corpus never does.
    Detect(DetectArgs),
    /// Relabel mismatched arcs of the augment corpus.
    Convert(ConvertArgs),
    /// Draw seeded half-base, half-augment training samples.
    Sample(SampleArgs),
    /// Score a prediction file against gold (UAS/LAS).
    Eval(EvalArgs),
    /// Error analysis and significance test for two prediction files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Accept multi-root and cyclic sentences with a warning.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub lenient: Option<bool>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long)]
    pub augment: Option<PathBuf>,
    /// Lowercase word forms before pairing.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub lowercase: Option<bool>,
    /// Detect on a seeded sample of this many sentences per corpus instead of the full corpora.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long)]
    pub augment: Option<PathBuf>,
    /// lexical, static-embedding or contextual-embedding.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Word-vector text file (embedding strategies).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Neighbors per word for embedding strategies.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub lowercase: Option<bool>,
    /// keep or drop: what to do with arcs lacking base evidence.
    #[arg(long)]
    pub on_no_replacement: Option<String>,
    /// Write the conversion report only.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub dry_run: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long)]
    pub augment: Option<PathBuf>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    pub tiers: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub exclude_punct: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Predictions of the model trained without conversion.
    #[arg(long)]
    pub unconverted: Option<PathBuf>,
    /// Predictions of the model trained on converted data.
    #[arg(long)]
    pub converted: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// LAS or UAS.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub exclude_punct: Option<bool>,
}

/// Resolved settings: flag, then config file, then default.
struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| input_err(format!("cannot read config {}: {}", path.display(), e)))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    input_err(format!(
                        "{}:{}: expected key = value",
                        path.display(),
                        i + 1
                    ))
                })?;
                file.insert(k.trim().replace('_', "-"), v.trim().to_owned());
            }
        }
        Ok(Settings {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn get<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    raw.parse::<T>()
                        .map_err(|e| input_err(format!("config key '{}': {}", key, e)))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_owned(), v.to_string());
        }
        Ok(value)
    }

    fn or<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.get(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_owned(), v.to_string());
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        Ok(self
            .get(key, flag.map(|p| p.display().to_string()))?
            .map(PathBuf::from))
    }

    fn required_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.path(key, flag)?
            .ok_or_else(|| input_err(format!("--{} is required", key)))
    }

    fn echo(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("{} = {}\n", k, v))
            .collect()
    }
}

/// Fails before any work starts if an input is missing or unreadable.
fn check_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        fs::File::open(p).map_err(|e| input_err(format!("cannot read {}: {}", p.display(), e)))?;
    }
    Ok(())
}

fn read_corpus(path: &Path, opts: ParseOptions) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| input_err(format!("{}: {}", path.display(), e)))?;
    parse_corpus(&bytes, &path.display().to_string(), opts)
        .map_err(|e| input_err(format!("{}: {}", path.display(), e)))
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| input_err(format!("--{}: '{}' is not a valid entry", key, x.trim())))
        })
        .collect()
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

/// Writes outputs under one directory and records them in the run manifest.
struct RunDir {
    dir: PathBuf,
    subcommand: &'static str,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl RunDir {
    fn create(dir: PathBuf, subcommand: &'static str, inputs: &[&Path]) -> Result<Self> {
        let mut digests = Vec::new();
        for p in inputs {
            let bytes = fs::read(p).map_err(|e| input_err(format!("{}: {}", p.display(), e)))?;
            digests.push(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&bytes),
            });
        }
        fs::create_dir_all(&dir)
            .map_err(|e| input_err(format!("cannot create {}: {}", dir.display(), e)))?;
        Ok(RunDir {
            dir,
            subcommand,
            inputs: digests,
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| input_err(format!("cannot write {}: {}", path.display(), e)))?;
        self.outputs.push(FileDigest {
            path: name.to_owned(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(input_err)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn finish(self, settings: &Settings) -> Result<()> {
        let conf = settings.echo();
        let path = self.dir.join("run.conf");
        fs::write(&path, &conf)
            .map_err(|e| input_err(format!("cannot write {}: {}", path.display(), e)))?;

        let manifest = serde_json::json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "generator": GENERATOR_NAME,
            "config": settings.resolved,
            "inputs": self.inputs,
            "outputs": self.outputs,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(input_err)?;
        bytes.push(b'\n');
        let path = self.dir.join("run_manifest.json");
        fs::write(&path, bytes)
            .map_err(|e| input_err(format!("cannot write {}: {}", path.display(), e)))
    }
}

fn parse_options(settings: &mut Settings, common: &Common) -> Result<ParseOptions> {
    let lenient = settings.or("lenient", common.lenient, false)?;
    Ok(ParseOptions { strict: !lenient })
}

fn out_dir(settings: &mut Settings, common: &Common) -> Result<PathBuf> {
    settings.required_path("out", common.out.clone())
}

pub fn cmd_detect(args: DetectArgs) -> Result<()> {
    let mut s = Settings::load(args.common.config.as_deref())?;
    let base_path = s.required_path("base", args.base)?;
    let aug_path = s.required_path("augment", args.augment)?;
    let out = out_dir(&mut s, &args.common)?;
    let policy = NormalizationPolicy::new(s.or("lowercase", args.lowercase, false)?);
    let opts = parse_options(&mut s, &args.common)?;
    let sample_size = s.get("sample", args.sample)?;
    let seed = s.or("seed", args.seed, 1u64)?;
    check_inputs(&[&base_path, &aug_path])?;

    let mut base = read_corpus(&base_path, opts)?;
    let mut aug = read_corpus(&aug_path, opts)?;
    if let Some(n) = sample_size {
        let mut rng = SeededRng::new(seed);
        for (corpus, side) in [(&mut base, Side::Base), (&mut aug, Side::Augment)] {
            let idx = sampler::select(&mut rng, corpus, n, side).map_err(input_err)?;
            corpus.sentences = idx.iter().map(|&i| corpus.sentences[i].clone()).collect();
        }
    }

    let ms = mismatch::detect(
        &PairIndex::build(&base, policy),
        &PairIndex::build(&aug, policy),
    )
    .map_err(input_err)?;

    let mut run = RunDir::create(out, "detect", &[&base_path, &aug_path])?;
    let mut tsv = Vec::new();
    ms.write_tsv(&mut tsv).map_err(input_err)?;
    run.write("mismatches.tsv", &tsv)?;
    run.write_json("mismatches.json", &ms.to_json())?;
    run.finish(&s)?;

    let summary = ms.summarize();
    println!(
        "{} mismatches over {} pairs ({} arcs)",
        summary.items, summary.pairs, summary.arcs
    );
    Ok(())
}

pub fn cmd_convert(args: ConvertArgs) -> Result<()> {
    let mut s = Settings::load(args.common.config.as_deref())?;
    let base_path = s.required_path("base", args.base)?;
    let aug_path = s.required_path("augment", args.augment)?;
    let out = out_dir(&mut s, &args.common)?;
    let strategy: Strategy = s
        .or("strategy", args.strategy, "lexical".to_owned())?
        .parse()
        .map_err(input_err)?;
    let vectors = s.path("vectors", args.vectors)?;
    let k = s.or("k", args.k, DEFAULT_K)?;
    if k == 0 {
        return Err(input_err("--k must be at least 1"));
    }
    let policy = NormalizationPolicy::new(s.or("lowercase", args.lowercase, false)?);
    let on_no_replacement: NoReplacement = s
        .or(
            "on-no-replacement",
            args.on_no_replacement,
            "keep".to_owned(),
        )?
        .parse()
        .map_err(input_err)?;
    let dry_run = s.or("dry-run", args.dry_run, false)?;
    let opts = parse_options(&mut s, &args.common)?;

    if strategy.uses_embeddings() && vectors.is_none() {
        return Err(input_err(convert::ConvertError::MissingVectors(strategy)));
    }
    let mut inputs: Vec<&Path> = vec![&base_path, &aug_path];
    if let (true, Some(v)) = (strategy.uses_embeddings(), vectors.as_deref()) {
        inputs.push(v);
    }
    check_inputs(&inputs)?;

    let base = read_corpus(&base_path, opts)?;
    let aug = read_corpus(&aug_path, opts)?;
    let store = match (strategy.uses_embeddings(), &vectors) {
        (true, Some(path)) => {
            let f = fs::File::open(path).map_err(input_err)?;
            Some(
                VectorStore::load(BufReader::new(f), policy)
                    .map_err(|e| input_err(format!("{}: {}", path.display(), e)))?,
            )
        }
        _ => None,
    };

    let base_index = PairIndex::build(&base, policy);
    let ms = mismatch::detect(&base_index, &PairIndex::build(&aug, policy)).map_err(input_err)?;
    let cfg = ConverterConfig {
        strategy,
        k,
        policy,
        on_no_replacement,
    };
    let report = convert::plan(&aug, &base_index, &ms, store.as_ref(), &cfg).map_err(input_err)?;

    let mut run = RunDir::create(out, "convert", &inputs)?;
    if !dry_run {
        let converted = convert::apply_plan(&aug, &report).map_err(input_err)?;
        let mut bytes = Vec::new();
        write_corpus(&converted, &mut bytes).map_err(input_err)?;
        run.write("converted.conllu", &bytes)?;
    }
    run.write_json("conversion_report.json", &report)?;
    let mut tsv = Vec::new();
    report.write_tsv(&mut tsv).map_err(input_err)?;
    run.write("conversion_summary.tsv", &tsv)?;
    run.finish(&s)?;

    println!(
        "{}: {} arcs relabeled, {} skipped{}",
        strategy,
        report.applied.len(),
        report.skipped.len(),
        if dry_run { " (dry run)" } else { "" }
    );
    Ok(())
}

pub fn cmd_sample(args: SampleArgs) -> Result<()> {
    let mut s = Settings::load(args.common.config.as_deref())?;
    let base_path = s.required_path("base", args.base)?;
    let aug_path = s.required_path("augment", args.augment)?;
    let out = out_dir(&mut s, &args.common)?;
    let default_tiers = sampler::DEFAULT_TIERS.map(|t| t.to_string()).join(",");
    let default_seeds = sampler::DEFAULT_SEEDS.map(|t| t.to_string()).join(",");
    let tiers: Vec<usize> = parse_list("tiers", &s.or("tiers", args.tiers, default_tiers)?)?;
    let seeds: Vec<u64> = parse_list("seeds", &s.or("seeds", args.seeds, default_seeds)?)?;
    let opts = parse_options(&mut s, &args.common)?;
    check_inputs(&[&base_path, &aug_path])?;

    let base = read_corpus(&base_path, opts)?;
    let aug = read_corpus(&aug_path, opts)?;

    // Draw everything before writing so a deficient tier leaves no output.
    let mut samples = Vec::new();
    for &tier in &tiers {
        for &seed in &seeds {
            let plan = SamplePlan {
                total_sentences: tier,
                base_train: &base,
                augment_train: &aug,
                seed,
            };
            let (corpus, manifest) = sampler::sample(&plan).map_err(input_err)?;
            samples.push((sample_file_stem(tier, seed), corpus, manifest));
        }
    }

    let mut run = RunDir::create(out, "sample", &[&base_path, &aug_path])?;
    for (stem, corpus, manifest) in &samples {
        run.write(&format!("{}.conllu", stem), &serialize_corpus(corpus))?;
        run.write_json(&format!("{}.manifest.json", stem), manifest)?;
    }
    run.finish(&s)?;
    println!("{} samples written", samples.len());
    Ok(())
}

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut s = Settings::load(args.common.config.as_deref())?;
    let gold_path = s.required_path("gold", args.gold)?;
    let pred_path = s.required_path("pred", args.pred)?;
    let out = s.path("out", args.common.out.clone())?;
    let exclude_punct = s.or("exclude-punct", args.exclude_punct, false)?;
    let opts = parse_options(&mut s, &args.common)?;
    check_inputs(&[&gold_path, &pred_path])?;

    let gold = read_corpus(&gold_path, opts)?;
    let pred = read_corpus(&pred_path, opts)?;
    let result = evalx::score_with(&gold, &pred, ScoreOptions { exclude_punct })?;

    if let Some(out) = out {
        let mut run = RunDir::create(out, "eval", &[&gold_path, &pred_path])?;
        run.write_json("score.json", &result.to_json())?;
        run.finish(&s)?;
    }
    println!("{}", result);
    Ok(())
}

pub fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut s = Settings::load(args.common.config.as_deref())?;
    let gold_path = s.required_path("gold", args.gold)?;
    let unconv_path = s.required_path("unconverted", args.unconverted)?;
    let conv_path = s.required_path("converted", args.converted)?;
    let out = out_dir(&mut s, &args.common)?;
    let threshold = s.or("threshold", args.threshold, DEFAULT_THRESHOLD)?;
    let defaults = SignificanceConfig::default();
    let metric: Metric = s
        .or("metric", args.metric, "LAS".to_owned())?
        .parse()
        .map_err(input_err)?;
    let sig = SignificanceConfig {
        alpha: s.or("alpha", args.alpha, defaults.alpha)?,
        resamples: s.or("resamples", args.resamples, defaults.resamples)?,
        seed: s.or("seed", args.seed, defaults.seed)?,
        metric,
        exclude_punct: s.or("exclude-punct", args.exclude_punct, false)?,
    };
    let opts = parse_options(&mut s, &args.common)?;
    check_inputs(&[&gold_path, &unconv_path, &conv_path])?;

    let gold = read_corpus(&gold_path, opts)?;
    let unconv = read_corpus(&unconv_path, opts)?;
    let conv = read_corpus(&conv_path, opts)?;

    let (u_entries, c_entries) = evalx::prediction_analysis(&gold, &unconv, &conv, threshold)?;
    let significance = evalx::compare_significance(&gold, &conv, &unconv, &sig)?;

    let mut run = RunDir::create(out, "report", &[&gold_path, &unconv_path, &conv_path])?;
    for (name, entries) in [
        ("confusion_unconverted.tsv", &u_entries),
        ("confusion_converted.tsv", &c_entries),
    ] {
        let mut tsv = Vec::new();
        evalx::write_confusion_tsv(entries, &mut tsv).map_err(input_err)?;
        run.write(name, &tsv)?;
    }
    run.write_json(
        "significance.json",
        &serde_json::json!({
            "a": conv_path.display().to_string(),
            "b": unconv_path.display().to_string(),
            "result": significance,
        }),
    )?;
    run.finish(&s)?;

    println!(
        "{}: converted {:.2} vs unconverted {:.2}, p = {:.4} ({})",
        significance.metric_label(),
        significance.metric_a,
        significance.metric_b,
        significance.p_value,
        significance.test
    );
    Ok(())
}

impl evalx::SignificanceResult {
    fn metric_label(&self) -> &'static str {
        match self.metric {
            Metric::Las => "LAS",
            Metric::Uas => "UAS",
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    }
}
