mod trace_view;
mod wiring;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use graphcheck::config::{parse_config, Config, ConfigError, Overrides};
use graphcheck::eval::{run_benchmark, BenchConfig, Dataset, Partition};
use graphcheck::pipeline::{claim_id_for, ClaimResult, Pipeline};
use graphcheck::report::bench_report;
use graphcheck::retrieval::{InvertedIndex, Tokenizer};
use graphcheck::trace::{Clock, DirSink, MemorySink, StepClock, SystemClock, TraceSink};
use graphcheck::Bm25Params;

/// Error in how the tool was invoked (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "graphcheck", version, about = "Verify claims over triplet graphs against a BM25-indexed corpus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or query a corpus index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Verify a single claim.
    Verify(VerifyArgs),
    /// Run a benchmark over HoVer or FEVEROUS claims.
    Bench(BenchArgs),
    /// Inspect trace files.
    #[command(subcommand)]
    Trace(TraceCommand),
    /// Inspect configuration.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Index a JSON Lines corpus of {"doc_id", "title", "text"} records.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Apply English stemming to documents and queries.
        #[arg(long)]
        stem: bool,
    },
    /// Print the top BM25 hits for a query.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Render a trace stage by stage.
    Show {
        /// A trace file, or a directory of them.
        path: PathBuf,
        #[arg(long)]
        claim_id: Option<String>,
        /// Print the stored events unchanged.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Validate configuration and print the effective values.
    Check {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Settings shared by `verify`, `bench` and `config check`.
#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    /// Chat-completions endpoint of the LLM backend.
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Scripted mock backend (JSON rules); excludes --backend-url.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Disambiguation iteration limit (0 disables disambiguation).
    #[arg(long)]
    max_iterations: Option<u32>,
    /// Verify every remaining triplet instead of stopping at the first failure.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_docs: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Reranking service endpoint.
    #[arg(long)]
    reranker_url: Option<String>,
    /// Per-claim time limit in seconds.
    #[arg(long)]
    claim_timeout: Option<u64>,
    /// Directory for per-claim trace files.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            backend_url: self.backend_url.clone(),
            model: self.model.clone(),
            mock_script: self.mock_script.clone(),
            index: self.index.clone(),
            top_k: self.top_k,
            max_docs: self.max_docs,
            max_tokens: self.max_tokens,
            reranker_url: self.reranker_url.clone(),
            max_iterations: self.max_iterations,
            exhaustive: self.exhaustive.then_some(true),
            claim_timeout_secs: self.claim_timeout,
            trace_dir: self.trace_out.clone(),
            ..Default::default()
        }
    }

    fn load(&self, extra: Overrides) -> Result<Config> {
        let mut o = self.overrides();
        o.workers = extra.workers;
        o.seed = extra.seed;
        o.report_dir = extra.report_dir;
        parse_config(self.config.as_deref(), &o).map_err(config_error)
    }
}

fn config_error(e: ConfigError) -> anyhow::Error {
    match e {
        ConfigError::Io { .. } => anyhow::Error::new(e),
        other => usage(other.to_string()),
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    claim: String,
    /// Defaults to a hash of the claim text.
    #[arg(long)]
    claim_id: Option<String>,
    #[command(flatten)]
    run: RunArgs,
    /// Print the final claim graph as JSON.
    #[arg(long)]
    dump_graph: bool,
    /// Print the full result as JSON instead of the summary.
    #[arg(long)]
    json: bool,
    /// Synthetic clock advancing this many milliseconds per reading.
    #[arg(long)]
    step_clock_ms: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dataset: String,
    /// HoVer JSON or FEVEROUS JSON Lines file.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated partitions (default: all for the dataset).
    #[arg(long, value_delimiter = ',')]
    partitions: Vec<String>,
    /// Claims sampled per partition.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
    /// Synthetic clock advancing this many milliseconds per reading, for
    /// reproducible timing columns.
    #[arg(long)]
    step_clock_ms: Option<u64>,
}

fn clock(step_ms: Option<u64>) -> Arc<dyn Clock> {
    match step_ms {
        Some(ms) => Arc::new(StepClock {
            step: Duration::from_millis(ms),
        }),
        None => Arc::new(SystemClock),
    }
}

fn index_build(corpus: &Path, out: &Path, stem: bool) -> Result<()> {
    let index = InvertedIndex::build_from_path(corpus, Tokenizer { stem })
        .with_context(|| format!("indexing {}", corpus.display()))?;
    let manifest = index.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "indexed {} documents, {} terms, avg length {:.2} -> {}",
        manifest.doc_count,
        manifest.term_count,
        manifest.avg_doc_len,
        out.display()
    );
    Ok(())
}

fn index_search(dir: &Path, query: &str, k: usize) -> Result<()> {
    let index = InvertedIndex::load(dir).with_context(|| format!("loading index {}", dir.display()))?;
    for (rank, hit) in index.search(query, k, &Bm25Params::default()).iter().enumerate() {
        println!("{}\t{}\t{:.4}\t{}", rank + 1, hit.document.doc_id, hit.score, hit.document.title);
    }
    Ok(())
}

fn sink(dir: Option<&Path>) -> Result<Arc<dyn TraceSink>> {
    Ok(match dir {
        Some(d) => {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            Arc::new(DirSink::new(d))
        }
        None => Arc::new(MemorySink),
    })
}

fn summary(r: &ClaimResult) -> String {
    let mut out = format!("Verdict: {}\nClaim: {}\n", r.verdict, r.claim);
    if let Some(class) = r.error {
        out.push_str(&format!(
            "Error: {class} ({})\n",
            r.error_detail.as_deref().unwrap_or_default()
        ));
    }
    out.push_str(&format!("Triplets: {}\n", r.graph.triplets.len()));
    if let Some(d) = &r.disambiguation {
        out.push_str(&format!(
            "Placeholders: {} ({} resolved in {} iterations, {:?})\n",
            r.initial_placeholders,
            r.resolved_placeholders(),
            d.iterations_used,
            d.status
        ));
    }
    let ok = r.subclaim_results.iter().filter(|s| s.supported).count();
    out.push_str(&format!("Sub-claims: {ok}/{} supported\n", r.subclaim_results.len()));
    for s in &r.subclaim_results {
        out.push_str(&format!(
            "  [{}] {} -> {}\n",
            s.triplet_id,
            s.subclaim,
            if s.supported { "supported" } else { "not supported" }
        ));
    }
    out.push_str(&format!(
        "Cost: {} LLM calls, {} KB interactions, {:.2} s\n",
        r.cost.llm_calls, r.cost.kb_interactions, r.cost.inference_seconds
    ));
    if let Some(p) = &r.trace_ref {
        out.push_str(&format!("Trace: {}\n", p.display()));
    }
    out
}

fn verify(args: &VerifyArgs) -> Result<()> {
    let config = args.run.load(Overrides::default())?;
    let gateway = wiring::gateway(&config)?;
    let retriever = wiring::retriever(&config)?;
    let pipeline = Pipeline::new(gateway, Arc::new(retriever))
        .with_config(config.pipeline_config())
        .with_sink(sink(config.output.trace_dir.as_deref())?)
        .with_clock(clock(args.step_clock_ms));
    let id = args.claim_id.clone().unwrap_or_else(|| claim_id_for(&args.claim));
    let result = pipeline.verify_claim(&id, &args.claim);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        print!("{}", summary(&result));
    }
    if args.dump_graph {
        println!("{}", serde_json::to_string_pretty(&result.graph)?);
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let dataset: Dataset = args.dataset.parse().map_err(|e: graphcheck::eval::EvalError| usage(e.to_string()))?;
    let partitions: Vec<Partition> = if args.partitions.is_empty() {
        dataset.partitions().to_vec()
    } else {
        args.partitions
            .iter()
            .map(|p| p.parse().map_err(|e: graphcheck::eval::EvalError| usage(e.to_string())))
            .collect::<Result<_>>()?
    };
    let config = args.run.load(Overrides {
        workers: args.workers,
        seed: args.seed,
        report_dir: args.out.clone(),
        ..Default::default()
    })?;
    let out = config
        .output
        .report_dir
        .clone()
        .ok_or_else(|| usage("bench needs --out or output.report_dir"))?;
    let (claims, load) = dataset.load(&args.data).with_context(|| format!("loading {}", args.data.display()))?;
    log::info!("{load:?}");

    let trace_dir = config.output.trace_dir.clone().unwrap_or_else(|| out.join("traces"));
    let pipeline = Pipeline::new(wiring::gateway(&config)?, Arc::new(wiring::retriever(&config)?))
        .with_config(config.pipeline_config())
        .with_sink(sink(Some(&trace_dir))?)
        .with_clock(clock(args.step_clock_ms));
    let bench_config = BenchConfig {
        partitions,
        n: args.n,
        seed: config.seed,
    };
    let run = run_benchmark(&claims, &bench_config, &pipeline);
    let report = bench_report(&format!("Benchmark: {dataset}"), &run);

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let write = |name: &str, body: &str| -> Result<()> {
        let p = out.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    write("report.md", &report.markdown)?;
    write("scores.tsv", &report.scores_tsv)?;
    write("cost.tsv", &report.cost_tsv)?;
    write("resolution.tsv", &report.resolution_tsv)?;
    let mut predictions = String::new();
    for p in &run.partitions {
        for (c, r) in p.claims.iter().zip(&p.results) {
            let line = serde_json::json!({
                "claim_id": c.claim_id,
                "partition": p.partition,
                "gold": c.gold,
                "pred": r.verdict,
                "error": r.error,
                "llm_calls": r.cost.llm_calls,
                "kb_interactions": r.cost.kb_interactions,
            });
            predictions.push_str(&line.to_string());
            predictions.push('\n');
        }
    }
    write("predictions.jsonl", &predictions)?;
    write(
        "load_report.json",
        &serde_json::to_string_pretty(&load).context("serializing load report")?,
    )?;
    print!("{}", report.markdown);
    Ok(())
}

fn config_check(run: &RunArgs) -> Result<()> {
    let config = run.load(Overrides::default())?;
    match config.backend_mode() {
        Ok(mode) => eprintln!("backend: {mode:?}"),
        Err(e) => eprintln!("warning: {e}"),
    }
    println!("{}", serde_json::to_string_pretty(&config)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(IndexCommand::Build { corpus, out, stem }) => index_build(&corpus, &out, stem),
        Command::Index(IndexCommand::Search { index, query, k }) => index_search(&index, &query, k),
        Command::Verify(args) => verify(&args),
        Command::Bench(args) => bench(&args),
        Command::Trace(TraceCommand::Show { path, claim_id, json }) => {
            let text = trace_view::show(&path, claim_id.as_deref(), json)?;
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
        Command::Config(ConfigCommand::Check { run }) => config_check(&run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
