//! Command-line front end.
//!
//! Flags may also come from a `--config FILE` of `key=value` lines (keys are
//! long flag names without dashes). Flags given on the command line win.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::corpus::{build_vocabulary_from_corpus, Corpus, Vocabulary};
use crate::eval::{self, AnalogyDataset, SimilarityDataset, SweepRow};
use crate::lexicon::{parse_ppdb, Lexicon, RelationType};
use crate::trainer::{self, ContextMode, ExclusionSide, Mode, TrainConfig};
use crate::vectors::{EmbeddingSet, Format};

const USAGE_ERROR: i32 = 2;
const RUNTIME_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "paravec",
    version,
    about = "Word vectors from a corpus and a paraphrase lexicon"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count corpus tokens and write the vocabulary.
    #[command(args_override_self = true)]
    BuildVocab(BuildVocabArgs),
    /// Train word vectors.
    #[command(args_override_self = true)]
    Train(TrainCmd),
    /// Word-analogy accuracy of a vector file.
    #[command(args_override_self = true)]
    EvalAnalogy(EvalAnalogyArgs),
    /// SimLex-999 Spearman correlation of a vector file.
    #[command(args_override_self = true)]
    EvalSimlex(EvalSimlexArgs),
    /// Train and evaluate one threshold-mode model per theta.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ConfigFile {
    /// File of key=value lines supplying flags
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildVocabArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, value_name = "FILE", default_value = "vocab.tsv")]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigFile,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Whitespace-tokenized training text
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Saved vocabulary to use instead of counting the corpus
    #[arg(long, value_name = "FILE")]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// PPDB 2.0 lexical dump (required for threshold and bernoulli modes)
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Comma-separated relation types to keep from the lexicon
    #[arg(long, default_value = "equivalence,forward-entailment,reverse-entailment")]
    relations: String,
    /// cbow | threshold | bernoulli [default: cbow for train, threshold for sweep]
    #[arg(long)]
    mode: Option<Mode>,
    /// Score threshold of the gate (threshold mode)
    #[arg(long, default_value_t = 3.8)]
    theta: f64,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    /// Maximum one-sided context width
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long, default_value_t = 25)]
    negatives: usize,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    /// Initial learning rate
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Subsampling threshold (0 disables)
    #[arg(long, default_value_t = 1e-4)]
    subsample: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0.75)]
    noise_exponent: f64,
    #[arg(long, default_value_t = 100_000_000)]
    noise_table_size: usize,
    /// per-word | averaged
    #[arg(long, default_value = "per-word")]
    context: ContextMode,
    /// Paraphrase set kept out of the negatives: input | target
    #[arg(long, default_value = "input")]
    exclude_side: ExclusionSide,
    /// Exact logistic function instead of the lookup table
    #[arg(long)]
    exact_sigmoid: bool,
    /// No progress output
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    config: ConfigFile,
}

#[derive(Debug, Args)]
struct TrainCmd {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, value_name = "FILE", default_value = "vectors.bin")]
    output: PathBuf,
    /// Write the text format instead of binary
    #[arg(long)]
    text_output: bool,
    /// Also write the vocabulary used for training
    #[arg(long, value_name = "FILE")]
    save_vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalAnalogyArgs {
    #[arg(long, value_name = "FILE")]
    vectors: PathBuf,
    #[arg(long, value_name = "FILE")]
    questions: PathBuf,
    /// binary | text
    #[arg(long, default_value = "binary")]
    format: Format,
    /// Only use the first N words of the vector file (0 = all)
    #[arg(long, default_value_t = 0)]
    restrict_vocab: usize,
    #[command(flatten)]
    config: ConfigFile,
}

#[derive(Debug, Args)]
struct EvalSimlexArgs {
    #[arg(long, value_name = "FILE")]
    vectors: PathBuf,
    #[arg(long, value_name = "FILE")]
    simlex: PathBuf,
    /// binary | text
    #[arg(long, default_value = "binary")]
    format: Format,
    #[command(flatten)]
    config: ConfigFile,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, value_name = "FILE")]
    questions: PathBuf,
    /// Comma-separated thetas [default: 0.5,1.0,...,7.0]
    #[arg(long)]
    thetas: Option<String>,
    /// Tab-separated results table
    #[arg(long, value_name = "FILE", default_value = "sweep.tsv")]
    output: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Runs the CLI with process stdout/stderr and returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_io(argv: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match merge_config_file(argv) {
        Ok(a) => a,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return USAGE_ERROR;
        }
    };
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return if code == 0 { 0 } else { USAGE_ERROR };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return USAGE_ERROR;
        }
    };
    let result = match cli.command {
        Command::BuildVocab(a) => build_vocab(a, out, err),
        Command::Train(a) => train(a, out, err),
        Command::EvalAnalogy(a) => eval_analogy(a, out, err),
        Command::EvalSimlex(a) => eval_simlex(a, out, err),
        Command::Sweep(a) => sweep(a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            USAGE_ERROR
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            RUNTIME_ERROR
        }
    }
}

/// Expands `--config FILE` into flags placed right after the subcommand, so
/// that explicit command-line flags (which come later) override them.
fn merge_config_file(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_owned());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    // subcommand is the first non-flag argument after the program name
    let sub_pos = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1);
    let Some(sub_pos) = sub_pos else {
        return Ok(rest);
    };
    let cmd = Cli::command();
    let sub = cmd
        .find_subcommand(&rest[sub_pos])
        .ok_or_else(|| format!("unknown subcommand {:?}", rest[sub_pos]))?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected key=value", n + 1))?;
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| format!("{path}:{}: unknown setting {key:?}", n + 1))?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.push(value.to_owned());
        } else {
            match value {
                "true" | "1" | "yes" => injected.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                _ => return Err(format!("{path}:{}: {key} expects true or false", n + 1)),
            }
        }
    }
    let tail = rest.split_off(sub_pos + 1);
    rest.extend(injected);
    rest.extend(tail);
    Ok(rest)
}

fn open_input(path: &Path) -> std::result::Result<BufReader<File>, Failure> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 16, f))
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn create_output(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))
}

fn log_settings(err: &mut dyn Write, command: &str, settings: &[(&str, String)]) {
    let _ = writeln!(err, "[{command}] effective configuration:");
    for (k, v) in settings {
        let _ = writeln!(err, "  {k} = {v}");
    }
}

fn build_vocab(a: BuildVocabArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    open_input(&a.corpus)?;
    if a.min_count == 0 {
        return Err(usage("--min-count must be at least 1"));
    }
    log_settings(
        err,
        "build-vocab",
        &[
            ("corpus", a.corpus.display().to_string()),
            ("min-count", a.min_count.to_string()),
            ("output", a.output.display().to_string()),
        ],
    );
    let (vocab, raw) = build_vocabulary_from_corpus(&Corpus::from_path(&a.corpus), a.min_count).map_err(runtime)?;
    vocab.save(create_output(&a.output)?).map_err(runtime)?;
    writeln!(
        out,
        "raw tokens: {raw}\nvocabulary size: {}\nretained tokens: {}",
        vocab.len(),
        vocab.total_tokens()
    )
    .map_err(runtime)?;
    Ok(())
}

struct Prepared {
    corpus: Corpus,
    vocab: Vocabulary,
    lexicon: Option<Lexicon>,
    config: TrainConfig,
}

fn prepare_training(
    a: &TrainArgs,
    default_mode: Mode,
    command: &str,
    extra: &[(&str, String)],
    err: &mut dyn Write,
) -> std::result::Result<Prepared, Failure> {
    let mode = a.mode.unwrap_or(default_mode);
    let config = TrainConfig {
        mode,
        theta: a.theta,
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        initial_lr: a.lr,
        subsample_t: a.subsample,
        seed: a.seed,
        threads: a.threads,
        noise_exponent: a.noise_exponent,
        noise_table_size: a.noise_table_size,
        context: a.context,
        exclusion_side: a.exclude_side,
        exact_sigmoid: a.exact_sigmoid,
        verbose: !a.quiet,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    if mode != Mode::Cbow && a.lexicon.is_none() {
        return Err(usage(format!("--mode {mode} requires --lexicon")));
    }
    if a.min_count == 0 {
        return Err(usage("--min-count must be at least 1"));
    }
    let relations = RelationType::parse_list(&a.relations).map_err(|e| usage(e.to_string()))?;
    if relations.is_empty() {
        return Err(usage("--relations must name at least one relation type"));
    }
    open_input(&a.corpus)?;
    let vocab_reader = a.vocab.as_deref().map(open_input).transpose()?;
    let lexicon_reader = match (mode, &a.lexicon) {
        (Mode::Cbow, _) | (_, None) => None,
        (_, Some(p)) => Some(open_input(p)?),
    };

    let mut settings = vec![
        ("corpus", a.corpus.display().to_string()),
        (
            "vocab",
            a.vocab
                .as_ref()
                .map_or("(built from corpus)".into(), |p| p.display().to_string()),
        ),
        ("min-count", a.min_count.to_string()),
        (
            "lexicon",
            a.lexicon.as_ref().map_or("(none)".into(), |p| p.display().to_string()),
        ),
        (
            "relations",
            relations.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
        ),
    ];
    settings.extend(config.describe());
    settings.extend(extra.iter().cloned());
    log_settings(err, command, &settings);

    let corpus = Corpus::from_path(&a.corpus);
    let vocab = match vocab_reader {
        Some(r) => Vocabulary::load(r).map_err(runtime)?,
        None => build_vocabulary_from_corpus(&corpus, a.min_count).map_err(runtime)?.0,
    };
    let _ = writeln!(
        err,
        "vocabulary: {} words, {} tokens",
        vocab.len(),
        vocab.total_tokens()
    );
    let lexicon = match lexicon_reader {
        Some(r) => {
            let (lex, stats) = parse_ppdb(r, &relations, &vocab).map_err(runtime)?;
            let _ = writeln!(err, "lexicon: {stats}");
            Some(lex)
        }
        None => None,
    };
    Ok(Prepared {
        corpus,
        vocab,
        lexicon,
        config,
    })
}

fn train(a: TrainCmd, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let format = if a.text_output { Format::Text } else { Format::Binary };
    let extra = [
        ("output", a.output.display().to_string()),
        ("output-format", format!("{format:?}").to_lowercase()),
    ];
    let p = prepare_training(&a.train, Mode::Cbow, "train", &extra, err)?;
    let (model, stats) =
        trainer::train_with_stats(&p.corpus, &p.vocab, p.lexicon.as_ref(), &p.config).map_err(runtime)?;
    model
        .embeddings(&p.vocab)
        .save(format, create_output(&a.output)?)
        .map_err(runtime)?;
    if let Some(path) = &a.save_vocab {
        p.vocab.save(create_output(path)?).map_err(runtime)?;
    }
    writeln!(
        out,
        "trained {} x {} vectors -> {}\ntokens: {}  retained: {}  context updates: {}  paraphrase updates: {}",
        p.vocab.len(),
        p.config.dim,
        a.output.display(),
        stats.tokens,
        stats.retained,
        stats.context_updates,
        stats.paraphrase_updates
    )
    .map_err(runtime)?;
    Ok(())
}

fn load_vectors(path: &Path, format: Format) -> std::result::Result<EmbeddingSet, Failure> {
    let reader = open_input(path)?;
    EmbeddingSet::load(reader, format).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn eval_analogy(a: EvalAnalogyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let vec_reader = open_input(&a.vectors)?;
    let q_reader = open_input(&a.questions)?;
    log_settings(
        err,
        "eval-analogy",
        &[
            ("vectors", a.vectors.display().to_string()),
            ("questions", a.questions.display().to_string()),
            ("format", format!("{:?}", a.format).to_lowercase()),
            ("restrict-vocab", a.restrict_vocab.to_string()),
        ],
    );
    let mut set = EmbeddingSet::load(vec_reader, a.format).map_err(runtime)?;
    if a.restrict_vocab > 0 {
        set.truncate(a.restrict_vocab);
    }
    let data = AnalogyDataset::parse(q_reader).map_err(runtime)?;
    let report = eval::eval_analogy(&set.normalized(), &data).map_err(runtime)?;
    if report.attempted == 0 {
        let _ = writeln!(
            err,
            "warning: every question has an out-of-vocabulary word; nothing attempted"
        );
    }
    write!(out, "{report}").map_err(runtime)?;
    Ok(())
}

fn eval_simlex(a: EvalSimlexArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    open_input(&a.vectors)?;
    let reader = open_input(&a.simlex)?;
    log_settings(
        err,
        "eval-simlex",
        &[
            ("vectors", a.vectors.display().to_string()),
            ("simlex", a.simlex.display().to_string()),
            ("format", format!("{:?}", a.format).to_lowercase()),
        ],
    );
    let set = load_vectors(&a.vectors, a.format)?;
    let data = SimilarityDataset::parse(reader).map_err(runtime)?;
    let report = eval::eval_simlex(&set, &data).map_err(runtime)?;
    writeln!(out, "{report}").map_err(runtime)?;
    Ok(())
}

fn parse_thetas(list: &str) -> std::result::Result<Vec<f64>, Failure> {
    let thetas: Vec<f64> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| usage(format!("bad theta {s:?}"))))
        .collect::<std::result::Result<_, _>>()?;
    if thetas.is_empty() || thetas.iter().any(|t| t.is_nan()) {
        return Err(usage("--thetas must list at least one number"));
    }
    Ok(thetas)
}

fn sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    if matches!(a.train.mode, Some(m) if m != Mode::Threshold) {
        return Err(usage("sweep only runs in threshold mode"));
    }
    let thetas = match &a.thetas {
        Some(list) => parse_thetas(list)?,
        None => eval::default_thetas(),
    };
    let q_reader = open_input(&a.questions)?;
    let extra = [
        ("questions", a.questions.display().to_string()),
        (
            "thetas",
            thetas.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
        ),
        ("output", a.output.display().to_string()),
    ];
    let p = prepare_training(&a.train, Mode::Threshold, "sweep", &extra, err)?;
    let data = AnalogyDataset::parse(q_reader).map_err(runtime)?;
    let lexicon = p.lexicon.as_ref().expect("threshold mode loads a lexicon");
    let _ = writeln!(out, "{}", eval::SWEEP_HEADER);
    let rows: Vec<SweepRow> = eval::sweep_threshold(&p.config, &thetas, &p.corpus, &p.vocab, lexicon, &data, |row| {
        let _ = writeln!(out, "{}", eval::sweep_line(row));
    })
    .map_err(runtime)?;
    eval::write_sweep_table(&rows, create_output(&a.output)?).map_err(runtime)?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    if failed > 0 {
        return Err(runtime(format!("{failed} of {} sweep rows failed", rows.len())));
    }
    Ok(())
}
