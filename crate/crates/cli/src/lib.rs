//! The `tabqa` command line: ask and decompose questions over CSV tables, list top facts,
//! generate and validate training corpora, train and evaluate the neural decomposer, and run
//! the HTTP service.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tabqa_core::corpus::{self, entry_violations, validate_pair, Corpus, Rejection, Verdict};
use tabqa_core::fixtures;
use tabqa_core::metrics::{corpus_bleu, meteor_lite};
use tabqa_core::pipeline::{AskError, EngineConfig};
use tabqa_core::question::formulate;
use tabqa_core::table::{load_table, LoadOptions};
use tabqa_core::{DataTable, Decomposer, Engine, RuleDecomposer};
use tabqa_neural::data::training_pairs;
use tabqa_neural::train::loss_csv;
use tabqa_neural::{checkpoint, DecodeOptions, ModelError, NeuralDecomposer, Real, TrainConfig, TrainError};
use tabqa_service::{AppState, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNANSWERABLE: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_PER_METHOD: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "tabqa", version, about = "Ask natural-language questions of a CSV table")]
pub struct Cli {
    /// Seed for anything random.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// JSON file with defaults; flags win.
    #[arg(long, global = true, env = "TABQA_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer a question with a dashboard.
    Ask(AskArgs),
    /// Print the decomposition tree of a question.
    Decompose(DecomposeArgs),
    /// Top facts for a simple question.
    Facts(FactsArgs),
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Train the neural decomposer.
    Train(TrainArgs),
    /// BLEU and METEOR-lite of decompositions against a corpus.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Rule,
    Neural,
}

#[derive(Debug, Args)]
pub struct AskArgs {
    #[arg(long)]
    pub table: PathBuf,
    pub question: String,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Neural checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write the dashboard JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub table: PathBuf,
    pub question: String,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FactsArgs {
    #[arg(long)]
    pub table: PathBuf,
    pub question: String,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Generate a corpus from a directory of CSV tables.
    Generate {
        /// Directory of *.csv files; bundled tables when absent.
        #[arg(long)]
        tables: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_method: Option<usize>,
    },
    /// Check every entry against its classification contract.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        tables: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Training config JSON; the toy config when absent.
    #[arg(long = "train-config")]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Use at most this many pairs.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, conflicts_with = "candidates")]
    pub model: Option<PathBuf>,
    /// JSON lines, one `["first", "second"]` array per corpus entry.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub tables: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "TABQA_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "TABQA_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "TABQA_MAX_UPLOAD")]
    pub max_upload: Option<usize>,
    /// Session lifetime in seconds.
    #[arg(long, env = "TABQA_TTL")]
    pub ttl: Option<u64>,
    /// Ask deadline in milliseconds.
    #[arg(long, env = "TABQA_DEADLINE_MS")]
    pub deadline: Option<u64>,
    #[arg(long, env = "TABQA_SPILL_DIR")]
    pub spill_dir: Option<PathBuf>,
    #[arg(long, env = "TABQA_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
    #[arg(long, env = "TABQA_MODEL")]
    pub model: Option<PathBuf>,
}

/// Defaults read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub beam_width: Option<usize>,
    pub backend: Option<BackendKind>,
    pub model: Option<PathBuf>,
    pub tables: Option<PathBuf>,
    pub per_method: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Unanswerable(Vec<String>),
    Training(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Unanswerable(_) => EXIT_UNANSWERABLE,
            CliError::Training(_) => EXIT_TRAINING,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, message, reasons) = match self {
            CliError::Input(m) => ("input", m.clone(), vec![]),
            CliError::Unanswerable(r) => ("unanswerable", "no sub-question could be answered".to_string(), r.clone()),
            CliError::Training(m) => ("training", m.clone(), vec![]),
            CliError::Internal(m) => ("internal", m.clone(), vec![]),
        };
        json!({ "error": kind, "message": message, "reasons": reasons })
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

type Result<T> = std::result::Result<T, CliError>;

/// Resolved global options.
struct Ctx {
    seed: u64,
    /// Seed given by flag or config file, as opposed to the default.
    explicit_seed: Option<u64>,
    json: bool,
    file: FileConfig,
}

pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .try_init();
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(input("reading config"))?;
            serde_json::from_str(&text).map_err(input("parsing config"))?
        }
        None => FileConfig::default(),
    };
    let explicit_seed = cli.seed.or(file.seed);
    let ctx = Ctx { seed: explicit_seed.unwrap_or(DEFAULT_SEED), explicit_seed, json: cli.json, file };
    match cli.command {
        Command::Ask(a) => ask(&ctx, a),
        Command::Decompose(a) => decompose(&ctx, a),
        Command::Facts(a) => facts(&ctx, a),
        Command::Corpus(CorpusCommand::Generate { tables, out, per_method }) => {
            corpus_generate(&ctx, tables, &out, per_method)
        }
        Command::Corpus(CorpusCommand::Validate { input, tables }) => corpus_validate(&ctx, &input, tables),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{s}");
    Ok(())
}

/// Loads one CSV, named by its file stem.
pub fn read_table(path: &Path) -> Result<DataTable> {
    let bytes = std::fs::read(path).map_err(input(&path.display().to_string()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    load_table(&bytes, &LoadOptions::named(name)).map_err(input(&path.display().to_string()))
}

/// Every `*.csv` in `dir`, sorted by file name; the bundled corpus tables when `dir` is absent.
pub fn read_tables(dir: Option<&Path>) -> Result<Vec<DataTable>> {
    let Some(dir) = dir else {
        let mut v = fixtures::corpus_tables();
        v.extend(fixtures::small_tables());
        return Ok(v);
    };
    let entries = std::fs::read_dir(dir).map_err(input(&dir.display().to_string()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!("{}: no csv files", dir.display())));
    }
    paths.iter().map(|p| read_table(p)).collect()
}

fn load_neural(path: &Path) -> Result<NeuralDecomposer> {
    let text = std::fs::read_to_string(path).map_err(input(&path.display().to_string()))?;
    NeuralDecomposer::from_checkpoint(&text).map_err(input(&path.display().to_string()))
}

fn backend(ctx: &Ctx, kind: Option<BackendKind>, model: Option<PathBuf>) -> Result<Box<dyn Decomposer>> {
    match kind.or(ctx.file.backend).unwrap_or(BackendKind::Rule) {
        BackendKind::Rule => Ok(Box::new(RuleDecomposer)),
        BackendKind::Neural => {
            let path = model
                .or_else(|| ctx.file.model.clone())
                .ok_or_else(|| CliError::Input("the neural backend needs --model".into()))?;
            Ok(Box::new(load_neural(&path)?))
        }
    }
}

fn engine_config(ctx: &Ctx, beam: Option<usize>) -> Result<EngineConfig> {
    let mut c = EngineConfig::default();
    if let Some(k) = beam.or(ctx.file.beam_width) {
        if k == 0 {
            return Err(CliError::Input("beam width must be at least 1".into()));
        }
        c.search.beam_width = k;
    }
    Ok(c)
}

fn ask_error(e: AskError) -> CliError {
    match e {
        AskError::EmptyQuestion => CliError::Input(e.to_string()),
        other => CliError::Unanswerable(other.reasons()),
    }
}

fn ask(ctx: &Ctx, a: AskArgs) -> Result<()> {
    let x = read_table(&a.table)?;
    let engine = Engine::new(x)
        .with_config(engine_config(ctx, a.beam)?)
        .with_backend(backend(ctx, a.backend, a.model)?);
    let resp = engine.ask(&a.question).map_err(ask_error)?;
    if let Some(out) = &a.out {
        let s = serde_json::to_string_pretty(&resp).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(out, s).map_err(input(&out.display().to_string()))?;
    }
    if ctx.json {
        return print_json(&resp);
    }
    println!("{}", resp.dashboard.title);
    for s in &resp.dashboard.sections {
        println!("\n## {}", s.sub_question);
        for c in &s.charts {
            println!("- [{}] {} ({:.3})", c.chart.fact_type.as_str(), c.chart.caption, c.chart.relevance);
        }
    }
    for u in &resp.unanswered {
        println!("\nunanswered: {} ({})", u.question, u.reason);
    }
    Ok(())
}

fn print_tree(t: &tabqa_core::DecompositionTree, depth: usize) {
    let marker = if t.forced { " *" } else { "" };
    println!("{}{} [{}]{marker}", "  ".repeat(depth), t.question, t.class.as_str());
    for c in &t.children {
        print_tree(c, depth + 1);
    }
}

fn decompose(ctx: &Ctx, a: DecomposeArgs) -> Result<()> {
    let x = read_table(&a.table)?;
    let engine = Engine::new(x).with_backend(backend(ctx, a.backend, a.model)?);
    let q = a.question.trim();
    if q.is_empty() {
        return Err(CliError::Input("question is empty".into()));
    }
    let tree = engine.decompose(q).map_err(|e| ask_error(e.into()))?;
    if ctx.json {
        return print_json(&tree);
    }
    print_tree(&tree, 0);
    Ok(())
}

fn facts(ctx: &Ctx, a: FactsArgs) -> Result<()> {
    if a.k == 0 {
        return Err(CliError::Input("k must be at least 1".into()));
    }
    let x = read_table(&a.table)?;
    let mut config = engine_config(ctx, None)?;
    config.search.beam_width = config.search.beam_width.max(a.k);
    let engine = Engine::new(x).with_config(config);
    let mut found = match engine.facts(&a.question) {
        Ok(f) => f,
        Err(tabqa_core::search::SearchError::Unsatisfiable(r)) => return Err(CliError::Unanswerable(vec![r])),
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    found.truncate(a.k);
    if ctx.json {
        return print_json(&found);
    }
    for (i, f) in found.iter().enumerate() {
        let text = tabqa_core::render::fact_to_question(&f.fact, true).unwrap_or_default();
        println!("{}. {:.4} {} {}", i + 1, f.score, f.fact.fact_type.as_str(), text);
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(input(&path.display().to_string()))
}

fn corpus_generate(ctx: &Ctx, tables: Option<PathBuf>, out: &Path, per_method: Option<usize>) -> Result<()> {
    let dir = tables.or_else(|| ctx.file.tables.clone());
    let xs = read_tables(dir.as_deref())?;
    let per = per_method.or(ctx.file.per_method).unwrap_or(DEFAULT_PER_METHOD);
    let c = corpus::generate(&xs, ctx.seed, per);
    write_file(out, &c.to_jsonl())?;
    let summary = json!({
        "entries": c.entries.len(),
        "seed": ctx.seed,
        "tables": c.header.tables,
        "simple": c.count(tabqa_core::QuestionClass::Simple),
        "type_i": c.count(tabqa_core::QuestionClass::ComplexTypeI),
        "type_ii": c.count(tabqa_core::QuestionClass::ComplexTypeII),
    });
    if ctx.json {
        return print_json(&summary);
    }
    println!("wrote {} entries to {}", c.entries.len(), out.display());
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(input(&path.display().to_string()))?;
    Corpus::from_jsonl(&text).map_err(input(&path.display().to_string()))
}

fn corpus_validate(ctx: &Ctx, path: &Path, tables: Option<PathBuf>) -> Result<()> {
    let c = read_corpus(path)?;
    let dir = tables.or_else(|| ctx.file.tables.clone());
    let xs = read_tables(dir.as_deref())?;
    let mut problems = Vec::new();
    for (i, e) in c.entries.iter().enumerate() {
        let Some(x) = xs.iter().find(|x| x.name() == e.table_id) else {
            problems.push(format!("entry {i}: unknown table '{}'", e.table_id));
            continue;
        };
        for v in entry_violations(e, x) {
            problems.push(format!("entry {i}: {v}"));
        }
    }
    // A verbatim copy is never a valid rephrasing.
    if let Some(e) = c.entries.first() {
        if let Some(x) = xs.iter().find(|x| x.name() == e.table_id) {
            let engine = Engine::new(x.clone());
            let v = validate_pair(&e.complex_question, &e.complex_question, engine.provider())
                .map_err(|e| CliError::Internal(e.to_string()))?;
            if v != Verdict::Reject(Rejection::Copy) {
                problems.push("copy check: a verbatim copy was not rejected".into());
            }
        }
    }
    if ctx.json {
        print_json(&json!({ "entries": c.entries.len(), "violations": problems }))?;
    } else {
        for p in &problems {
            println!("{p}");
        }
        println!("{} entries, {} violations", c.entries.len(), problems.len());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{} violations", problems.len())))
    }
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let c = read_corpus(&a.corpus)?;
    let dir = a.tables.or_else(|| ctx.file.tables.clone());
    let xs = read_tables(dir.as_deref())?;
    let mut pairs = training_pairs(&c, &xs);
    if let Some(n) = a.limit {
        pairs.truncate(n);
    }
    let mut cfg = match &a.train_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(input(&p.display().to_string()))?;
            serde_json::from_str::<TrainConfig>(&text).map_err(input(&p.display().to_string()))?
        }
        None => TrainConfig::toy(0),
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = ctx.explicit_seed {
        cfg.model.seed = s;
    }
    let (model, vocab, log) = tabqa_neural::train::<Real>(&pairs, &cfg).map_err(|e| match e {
        TrainError::Model(ModelError::Config(_)) | TrainError::Empty => CliError::Input(e.to_string()),
        e => CliError::Training(e.to_string()),
    })?;
    write_file(&a.out, &checkpoint::to_json(&model, &vocab))?;
    if let Some(p) = &a.log {
        write_file(p, &loss_csv(&log))?;
    }
    let last = log.last().copied();
    if ctx.json {
        return print_json(&json!({ "pairs": pairs.len(), "vocab": vocab.len(), "epochs": log.len(), "last": last }));
    }
    match last {
        Some(l) => println!("{} pairs, epoch {}: loss {:.4}, token accuracy {:.4}", pairs.len(), l.epoch, l.loss, l.token_accuracy),
        None => println!("{} pairs, no epochs run", pairs.len()),
    }
    Ok(())
}

/// Corpus BLEU over all sub-questions and mean METEOR-lite, candidates aligned to entries.
pub fn score_candidates(refs: &[[String; 2]], cands: &[[String; 2]]) -> (f64, f64) {
    let pairs: Vec<(&str, Vec<&str>)> = refs
        .iter()
        .zip(cands)
        .flat_map(|(r, c)| (0..2).map(move |i| (c[i].as_str(), vec![r[i].as_str()])))
        .collect();
    let bleu = corpus_bleu(pairs.iter().map(|(c, r)| (*c, r.clone())));
    let n = pairs.len().max(1) as f64;
    let meteor = pairs.iter().map(|(c, r)| meteor_lite(c, r[0])).sum::<f64>() / n;
    (bleu, meteor)
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let c = read_corpus(&a.corpus)?;
    let refs: Vec<[String; 2]> = c
        .entries
        .iter()
        .filter_map(|e| match e.sub_questions.as_slice() {
            [x, y] => Some([x.clone(), y.clone()]),
            _ => None,
        })
        .collect();
    let cands: Vec<[String; 2]> = if let Some(p) = &a.candidates {
        let text = std::fs::read_to_string(p).map_err(input(&p.display().to_string()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<[String; 2]>(l))
            .collect::<std::result::Result<_, _>>()
            .map_err(input(&p.display().to_string()))?
    } else {
        let path = a
            .model
            .or_else(|| ctx.file.model.clone())
            .ok_or_else(|| CliError::Input("eval needs --model or --candidates".into()))?;
        let n = load_neural(&path)?;
        let dir = a.tables.or_else(|| ctx.file.tables.clone());
        let xs = read_tables(dir.as_deref())?;
        let mut out = Vec::new();
        for e in c.entries.iter().filter(|e| e.sub_questions.len() == 2) {
            let x = xs
                .iter()
                .find(|x| x.name() == e.table_id)
                .ok_or_else(|| CliError::Input(format!("unknown table '{}'", e.table_id)))?;
            let tokens = formulate(&e.complex_question, x).input_tokens();
            let (p, q) = n
                .decode_tokens(&tokens, e.method.class(), DecodeOptions::default())
                .map_err(|e| CliError::Internal(e.to_string()))?;
            out.push([p.join(" "), q.join(" ")]);
        }
        out
    };
    if cands.len() != refs.len() {
        return Err(CliError::Input(format!("{} candidates for {} entries", cands.len(), refs.len())));
    }
    let (bleu, meteor) = score_candidates(&refs, &cands);
    if ctx.json {
        return print_json(&json!({ "entries": refs.len(), "bleu": bleu, "meteor_lite": meteor }));
    }
    println!("entries {}\nbleu {bleu:.4}\nmeteor_lite {meteor:.4}", refs.len());
    Ok(())
}

fn serve(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::default();
    if let Some(v) = a.max_upload {
        config.max_upload = v;
    }
    if let Some(v) = a.ttl {
        config.ttl = Duration::from_secs(v);
    }
    if let Some(v) = a.deadline {
        config.deadline = Duration::from_millis(v);
    }
    if let Some(k) = ctx.file.beam_width {
        config.beam_width = k;
    }
    config.spill_dir = a.spill_dir;
    config.cors_origin = a.cors_origin;
    let mut state = AppState::new(config);
    if let Some(p) = a.model.or_else(|| ctx.file.model.clone()) {
        state = state.with_neural(load_neural(&p)?);
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| CliError::Input(format!("bind {}:{}: {e}", a.host, a.port)))?;
        if !ctx.json {
            if let Ok(addr) = listener.local_addr() {
                println!("listening on http://{addr}");
            }
        }
        tabqa_service::serve(listener, state).await.map_err(|e| CliError::Internal(e.to_string()))
    })
}
