//! Command-line front end: one binary, subcommand per operation. The CLI is
//! a thin layer over the library — it parses flags, echoes the effective
//! configuration to stderr, and maps errors to exit codes
//! (0 success, 1 setup/config error, 2 translation contract failure).

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{ingest_pairs, BilingualPair, DomainScope, IngestFormat, LanguagePair};
use crate::error::{Error, Result};
use crate::harness::{render_markdown, run_grid, EvalReport, GridConfig};
use crate::llm::{make_backend, translate_job, BackendConfig, TranslationJob, TranslationStatus};
use crate::prompting::{render_baseline, render_fewshot, select_examples, LanguageNames, ShotMode};
use crate::retrieval::{load_index, save_index, Bm25Params, RetrievalIndex};

/// Version stamped into every `--json` output.
pub const CLI_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "titlerag",
    version,
    about = "Retrieval-augmented machine translation for product titles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a persistent BM25 index from a bilingual corpus file
    BuildIndex(BuildIndexArgs),
    /// Add pairs from another corpus file to an existing index
    Add(AddArgs),
    /// Query an index for the most similar pairs
    Search(SearchArgs),
    /// Translate a single title
    Translate(TranslateArgs),
    /// Run an experiment grid and write JSON + Markdown reports
    Evaluate(EvaluateArgs),
    /// Re-render the Markdown report from a JSON report
    Report(ReportArgs),
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Bilingual corpus file (.jsonl or .tsv)
    #[arg(long)]
    corpus: PathBuf,
    /// Language pair, e.g. en-de
    #[arg(long)]
    lang: String,
    /// Domain scope: ttl, bp, pd, or tbd (union of all domains)
    #[arg(long)]
    domain: String,
    /// Directory to write the index into
    #[arg(long)]
    out: PathBuf,
    /// BM25 k1 (term-frequency saturation)
    #[arg(long)]
    k1: Option<f64>,
    /// BM25 b (length normalization)
    #[arg(long)]
    b: Option<f64>,
    /// Abort on the first malformed record instead of skipping it
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct AddArgs {
    /// Existing index directory (updated in place)
    #[arg(long)]
    index: PathBuf,
    /// Corpus file with the pairs to add
    #[arg(long)]
    corpus: PathBuf,
    /// Abort on the first malformed record instead of skipping it
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SearchArgs {
    /// Index directory
    #[arg(long)]
    index: PathBuf,
    /// Query text (scored like a source title)
    #[arg(long)]
    query: String,
    /// Maximum number of hits
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Emit one JSON document instead of tab-separated rows
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TranslateArgs {
    /// Index directory (required for rand/rag modes)
    #[arg(long)]
    index: Option<PathBuf>,
    /// Source title to translate
    #[arg(long)]
    title: String,
    /// Prompting mode: baseline, rand, or rag
    #[arg(long)]
    mode: String,
    /// Number of examples for rand/rag modes
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Backend: mock_echo, mock_copy_best, or a path to a backend TOML file
    #[arg(long)]
    backend: String,
    /// Seed for random example sampling
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Language pair, e.g. en-de (defaults to the index's pair)
    #[arg(long)]
    lang: Option<String>,
    /// Print the rendered prompt before the translation
    #[arg(long)]
    show_prompt: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Grid config file (TOML); relative paths resolve against its directory
    #[arg(long)]
    grid: PathBuf,
    /// Directory for report.json and report.md
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Existing report.json
    #[arg(long)]
    report: PathBuf,
    /// Write the Markdown here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `search --json` output. The schema is versioned; fields are appended,
/// never reordered or removed, within a version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutput {
    pub schema_version: u32,
    pub query: String,
    pub k: usize,
    pub hits: Vec<SearchHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub rank: usize,
    /// The pair's corpus id (zero-based input line number at ingest).
    pub id: u32,
    pub score: f64,
    pub src: String,
    pub tgt: String,
}

/// Entry point for the binary: parse, dispatch, map errors to exit codes.
pub fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::BuildIndex(args) => cmd_build_index(&args),
        Command::Add(args) => cmd_add(&args),
        Command::Search(args) => cmd_search(&args),
        Command::Translate(args) => cmd_translate(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Report(args) => cmd_report(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn echo_config(value: serde_json::Value) {
    eprintln!("effective config: {value}");
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_build_index(args: &BuildIndexArgs) -> Result<i32> {
    let lang: LanguagePair = args.lang.parse()?;
    let scope: DomainScope = args.domain.parse()?;
    let mut params = Bm25Params::default();
    if let Some(k1) = args.k1 {
        params.k1 = k1;
    }
    if let Some(b) = args.b {
        params.b = b;
    }
    params.validate()?;
    echo_config(serde_json::json!({
        "cmd": "build-index",
        "corpus": args.corpus.display().to_string(),
        "lang": lang,
        "domain": scope,
        "out": args.out.display().to_string(),
        "params": params,
        "strict": args.strict,
    }));

    let format = IngestFormat::from_path(&args.corpus);
    let corpus = ingest_pairs(&args.corpus, format, &lang, args.strict)?;
    if corpus.malformed > 0 {
        eprintln!("warning: skipped {} malformed record(s)", corpus.malformed);
    }
    let pool: Vec<BilingualPair> =
        corpus.domain_pool(scope).into_iter().cloned().collect();
    let out_of_scope = corpus.pairs.len() - pool.len();
    if out_of_scope > 0 {
        eprintln!("warning: {out_of_scope} record(s) outside domain scope {scope} not indexed");
    }
    let index = RetrievalIndex::build(lang, scope, &pool, params)?;
    if index.is_empty() {
        eprintln!("warning: index contains 0 documents");
    }
    save_index(&index, &args.out)?;
    println!("n_docs: {}", index.n_docs());
    println!("avg_doc_len: {:.4}", index.avg_doc_len());
    Ok(0)
}

fn cmd_add(args: &AddArgs) -> Result<i32> {
    echo_config(serde_json::json!({
        "cmd": "add",
        "index": args.index.display().to_string(),
        "corpus": args.corpus.display().to_string(),
        "strict": args.strict,
    }));
    let mut index = load_index(&args.index)?;
    let lang = index.lang().clone();
    let scope = index.scope();
    let format = IngestFormat::from_path(&args.corpus);
    let corpus = ingest_pairs(&args.corpus, format, &lang, args.strict)?;
    if corpus.malformed > 0 {
        eprintln!("warning: skipped {} malformed record(s)", corpus.malformed);
    }
    // Ids stay zero-based line numbers of their own input file, shifted past
    // the ids already in the index so every id remains unique.
    let offset = index.pairs().iter().map(|p| p.id + 1).max().unwrap_or(0);
    let pool: Vec<BilingualPair> = corpus.domain_pool(scope).into_iter().cloned().collect();
    let out_of_scope = corpus.pairs.len() - pool.len();
    if out_of_scope > 0 {
        eprintln!("warning: {out_of_scope} record(s) outside domain scope {scope} not indexed");
    }
    let added = pool.len();
    for mut pair in pool {
        pair.id += offset;
        index.add_pair(pair)?;
    }
    save_index(&index, &args.index)?;
    println!("added: {added}");
    println!("n_docs: {}", index.n_docs());
    Ok(0)
}

fn cmd_search(args: &SearchArgs) -> Result<i32> {
    echo_config(serde_json::json!({
        "cmd": "search",
        "index": args.index.display().to_string(),
        "query": args.query,
        "k": args.k,
        "json": args.json,
    }));
    let index = load_index(&args.index)?;
    let hits = index.search_topk(&args.query, args.k);
    if args.json {
        let output = SearchOutput {
            schema_version: CLI_SCHEMA_VERSION,
            query: args.query.clone(),
            k: args.k,
            hits: hits
                .iter()
                .map(|h| SearchHit {
                    rank: h.rank,
                    id: h.pair.id,
                    score: h.score,
                    src: h.pair.src_text.clone(),
                    tgt: h.pair.tgt_text.clone(),
                })
                .collect(),
        };
        println!("{}", serde_json::to_string(&output).expect("search output serializes"));
    } else {
        for h in &hits {
            println!("{}\t{:.6}\t{}\t{}", h.rank, h.score, h.pair.src_text, h.pair.tgt_text);
        }
    }
    Ok(0)
}

/// Accept a built-in mock name or a path to a TOML backend config.
fn parse_backend_arg(arg: &str) -> Result<BackendConfig> {
    match arg {
        "mock_echo" => Ok(BackendConfig::MockEcho),
        "mock_copy_best" => Ok(BackendConfig::MockCopyBest),
        path => {
            let path = Path::new(path);
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("backend config {}: {e}", path.display())))
        }
    }
}

fn cmd_translate(args: &TranslateArgs) -> Result<i32> {
    let backend_cfg = parse_backend_arg(&args.backend)?;
    backend_cfg.validate()?;
    let mode = match args.mode.as_str() {
        "baseline" => ShotMode::Baseline,
        "rand" => ShotMode::Rand(args.k),
        "rag" => ShotMode::Rag(args.k),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown mode '{other}' (expected baseline, rand, or rag)"
            )))
        }
    };
    mode.validate()?;

    let index = match &args.index {
        Some(dir) => Some(load_index(dir)?),
        None => None,
    };
    let lang: LanguagePair = match (&args.lang, &index) {
        (Some(flag), _) => flag.parse()?,
        (None, Some(idx)) => idx.lang().clone(),
        (None, None) => LanguagePair::new("en", "de").expect("builtin pair"),
    };
    if let (Some(idx), Some(_)) = (&index, &args.lang) {
        if *idx.lang() != lang {
            return Err(Error::Config(format!(
                "--lang {} disagrees with the index language {}",
                lang,
                idx.lang()
            )));
        }
    }
    echo_config(serde_json::json!({
        "cmd": "translate",
        "index": args.index.as_ref().map(|p| p.display().to_string()),
        "title": args.title,
        "mode": mode,
        "backend": backend_cfg,
        "seed": args.seed,
        "lang": lang,
        "show_prompt": args.show_prompt,
    }));

    let examples = match (&index, mode) {
        (_, ShotMode::Baseline) => Vec::new(),
        (Some(idx), m) => select_examples(m, idx, &args.title, args.seed)?,
        (None, _) => {
            return Err(Error::Config(
                "--index is required for rand and rag modes".into(),
            ))
        }
    };
    if mode != ShotMode::Baseline && examples.is_empty() {
        eprintln!("warning: retrieval returned no examples; using the zero-shot prompt");
    }

    let names = LanguageNames::default();
    let prompt = if examples.is_empty() {
        render_baseline(&args.title, &lang, &names)?
    } else {
        let seed = matches!(mode, ShotMode::Rand(_)).then_some(args.seed);
        render_fewshot(&args.title, &lang, &names, &examples, seed)?
    };
    if args.show_prompt {
        print!("{}", prompt.text);
        println!("---");
    }

    let backend = make_backend(&backend_cfg)?;
    let job = TranslationJob {
        segment_index: 0,
        prompt,
        title: args.title.clone(),
        examples,
    };
    let record = translate_job(&job, backend.as_ref());
    match record.status {
        TranslationStatus::Ok => {
            println!("{}", record.translation.expect("ok status carries a translation"));
            Ok(0)
        }
        TranslationStatus::ParseFailed => {
            eprintln!(
                "error: no valid translation object in the response after {} attempt(s); raw response follows",
                record.attempts
            );
            eprintln!("{}", record.raw_response);
            Ok(2)
        }
        TranslationStatus::TransportFailed => {
            eprintln!("error: transport failed after {} attempt(s)", record.attempts);
            eprintln!("{}", record.raw_response);
            Ok(2)
        }
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let grid = GridConfig::load(&args.grid)?;
    echo_config(serde_json::json!({
        "cmd": "evaluate",
        "out": args.out.display().to_string(),
        "grid": grid,
    }));
    let output = run_grid(&grid)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let json_path = args.out.join("report.json");
    write_file(&json_path, &output.report.to_json())?;
    let md_path = args.out.join("report.md");
    write_file(&md_path, &render_markdown(&output.report))?;
    println!("wrote {}", json_path.display());
    println!("wrote {}", md_path.display());
    Ok(0)
}

fn cmd_report(args: &ReportArgs) -> Result<i32> {
    echo_config(serde_json::json!({
        "cmd": "report",
        "report": args.report.display().to_string(),
        "out": args.out.as_ref().map(|p| p.display().to_string()),
    }));
    let text = std::fs::read_to_string(&args.report).map_err(|source| Error::Io {
        path: args.report.clone(),
        source,
    })?;
    let report = EvalReport::from_json(&text)?;
    let markdown = render_markdown(&report);
    match &args.out {
        Some(path) => {
            write_file(path, &markdown)?;
            println!("wrote {}", path.display());
        }
        None => print!("{markdown}"),
    }
    Ok(0)
}
