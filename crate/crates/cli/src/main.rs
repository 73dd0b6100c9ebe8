mod config;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use issuefix_core::compare::{build_comparison, ComparisonReport};
use issuefix_core::gateway::{Gateway, HttpProvider, MockProvider};
use issuefix_core::ingest::{
    group_by_file, list_files, load_report, toy_scan, write_delimited, FileIssueSet, IssueCategory,
    ScanReport,
};
use issuefix_core::orchestrator::{
    rebase_report, Analyzer, Pipeline, PipelineConfig, ReportLoader, RunReport, ToyAnalyzer,
};
use issuefix_core::prompt::ExampleBank;
use issuefix_core::rag::{load_fixture_sources, Retriever};
use issuefix_core::report::{cost_table, revision_table, summarize_run, SyntheticLedger};
use issuefix_core::review::ReviewStore;
use issuefix_core::triage::plan;

use config::{FileConfig, Overrides, Providers, RunConfig, HTTP_PROVIDER, MOCK_PROVIDER};

#[derive(Parser)]
#[command(
    name = "issuefix",
    version,
    about = "Revise static-analysis issues with tiered language models"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scan report, or scan a tree with literal rules.
    Ingest(IngestArgs),
    /// Print the revision plan as JSON.
    Plan(PlanArgs),
    /// Run the tiered revision pipeline.
    Revise(RunArgs),
    /// Compare two trees file by file.
    Compare(CompareArgs),
    /// Render revision and cost tables.
    Report(ReportArgs),
    /// Serve the review API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    report: Option<PathBuf>,
    /// Scan this tree with `--rules` instead of reading a report.
    #[arg(long, requires = "rules")]
    root: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Write the ingested issues as a delimited report.
    #[arg(long)]
    emit_csv: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    root: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Toy analyzer rules (JSON) used for scans.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Directory of externally produced re-scan reports.
    #[arg(long)]
    reports_dir: Option<PathBuf>,
    #[arg(long, value_parser = ["divided", "comprehensive"])]
    strategy: Option<String>,
    #[arg(long, overrides_with = "no_rag")]
    rag: bool,
    #[arg(long, overrides_with = "rag")]
    no_rag: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    window: Option<u32>,
    #[arg(long)]
    workers: Option<usize>,
    /// `mock`, `mock=DIR` or `http`.
    #[arg(long)]
    providers: Option<String>,
    /// Retrieval source fixtures (JSON).
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Few-shot example bank (JSON); the built-in bank otherwise.
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Require a review decision on every file before apply.
    #[arg(long)]
    review_all: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also write each file's first-tier prompt under this directory.
    #[arg(long)]
    emit_prompts: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    revised: PathBuf,
    /// Issues anchoring the hallucination windows.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = issuefix_core::compare::DEFAULT_WINDOW)]
    window: u32,
    /// Write the full comparison reports here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ReportArgs {
    /// A run report written by `revise`.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Externally recorded counts and costs (JSON).
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Output directory of a `revise` run.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    serve_addr: SocketAddr,
    /// Static review UI assets.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Revise(a) => revise(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn print_counts(report: &ScanReport) {
    for c in IssueCategory::ALL {
        println!("{}: {}", c, report.count(c));
    }
    println!("TOTAL: {}", report.issues.len());
}

fn ingest(a: IngestArgs) -> anyhow::Result<()> {
    let report = match (&a.report, &a.root, &a.rules) {
        (Some(path), None, _) => load_report(path)?,
        (None, Some(root), Some(rules)) => toy_scan(root, &ToyAnalyzer::load_rules(rules)?)?,
        _ => bail!("give either --report, or --root with --rules"),
    };
    print_counts(&report);
    if let Some(path) = &a.emit_csv {
        std::fs::write(path, write_delimited(&report))
            .with_context(|| path.display().to_string())?;
    }
    Ok(())
}

fn resolve(a: &RunArgs) -> anyhow::Result<RunConfig> {
    let file = match &a.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let rag = match (a.rag, a.no_rag) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    };
    let flags = Overrides {
        root: a.root.clone(),
        report: a.report.clone(),
        rules: a.rules.clone(),
        reports_dir: a.reports_dir.clone(),
        strategy: a.strategy.clone(),
        rag,
        k: a.k,
        window: a.window,
        workers: a.workers,
        providers: a.providers.clone(),
        sources: a.sources.clone(),
        examples: a.examples.clone(),
        out: a.out.clone(),
        review_all: a.review_all.then_some(true),
    };
    Ok(RunConfig::resolve(file, flags)?)
}

fn analyzer(cfg: &RunConfig) -> anyhow::Result<Box<dyn Analyzer>> {
    Ok(match (&cfg.rules, &cfg.reports_dir) {
        (Some(rules), _) => Box::new(ToyAnalyzer::new(ToyAnalyzer::load_rules(rules)?)),
        (None, Some(dir)) => Box::new(ReportLoader::new(dir)),
        (None, None) => bail!("no analyzer configured"),
    })
}

fn initial_report(cfg: &RunConfig, analyzer: &dyn Analyzer) -> anyhow::Result<ScanReport> {
    let report = match &cfg.report {
        Some(path) => load_report(path)?,
        None => analyzer.scan(&cfg.root)?,
    };
    Ok(rebase_report(&report, &cfg.root))
}

fn plan_cmd(a: PlanArgs) -> anyhow::Result<()> {
    let cfg = resolve(&a.run)?;
    let analyzer = analyzer(&cfg)?;
    let report = initial_report(&cfg, analyzer.as_ref())?;
    let mut p = plan(&report, cfg.strategy, &cfg.tiers)?;
    p.output_root_template = cfg.output_root_template.clone();
    println!("{}", p.to_json());

    let Some(dir) = &a.emit_prompts else {
        return Ok(());
    };
    let gateway = Gateway::new();
    let (bank, retriever) = prompt_inputs(&cfg)?;
    let pipeline = Pipeline {
        analyzer: analyzer.as_ref(),
        gateway: &gateway,
        bank: &bank,
        retriever: retriever.as_ref(),
        config: pipeline_config(&cfg),
    };
    for sub in &p.sub_plans {
        for set in &sub.file_sets {
            let source = cfg.root.join(&set.file_location);
            let content =
                std::fs::read_to_string(&source).with_context(|| source.display().to_string())?;
            let mut warnings = Vec::new();
            let prompt = pipeline.file_prompt(set, &content, &mut warnings)?;
            for w in warnings {
                tracing::warn!("{w}");
            }
            let target = dir
                .join(&sub.label)
                .join(format!("{}.txt", set.file_location));
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
            }
            std::fs::write(&target, prompt.transcript())
                .with_context(|| target.display().to_string())?;
        }
    }
    Ok(())
}

fn prompt_inputs(cfg: &RunConfig) -> anyhow::Result<(ExampleBank, Option<Retriever>)> {
    let bank = match &cfg.examples {
        Some(path) => ExampleBank::load(path)?,
        None => ExampleBank::builtin(),
    };
    let retriever = match (&cfg.sources, cfg.rag) {
        (Some(path), true) => Some(Retriever::new(load_fixture_sources(path)?)),
        (None, true) => {
            tracing::warn!(
                "retrieval enabled but no --sources given; prompts carry no retrieved context"
            );
            None
        }
        _ => None,
    };
    Ok((bank, retriever))
}

fn pipeline_config(cfg: &RunConfig) -> PipelineConfig {
    let mut c = PipelineConfig::new(cfg.strategy, cfg.tiers.clone());
    c.rag = cfg.rag;
    c.k = cfg.k;
    c.window = cfg.window;
    c.workers = cfg.workers;
    c.output_root_template = cfg.output_root_template.clone();
    c
}

fn revise(a: RunArgs) -> anyhow::Result<()> {
    let cfg = resolve(&a)?;
    let analyzer = analyzer(&cfg)?;
    let report = initial_report(&cfg, analyzer.as_ref())?;

    let mut gateway = Gateway::new();
    match &cfg.providers {
        Providers::Mock(dir) => {
            gateway.register(MOCK_PROVIDER, Arc::new(MockProvider::load(dir)?), None);
        }
        Providers::Http {
            endpoint,
            api_key_env,
        } => {
            let provider = HttpProvider::new(endpoint, api_key_env.as_deref())
                .map_err(|e| anyhow::anyhow!("http provider: {e}"))?;
            let rpm = cfg
                .requests_per_minute
                .iter()
                .flatten()
                .min()
                .copied()
                .unwrap_or(issuefix_core::gateway::DEFAULT_REQUESTS_PER_MINUTE);
            gateway.register(HTTP_PROVIDER, Arc::new(provider), Some(rpm));
        }
    }
    let (bank, retriever) = prompt_inputs(&cfg)?;
    let pipeline = Pipeline {
        analyzer: analyzer.as_ref(),
        gateway: &gateway,
        bank: &bank,
        retriever: retriever.as_ref(),
        config: pipeline_config(&cfg),
    };
    let output = pipeline.run(&report, &cfg.root, &cfg.out)?;

    let store = ReviewStore::open(cfg.out.join("review"))?;
    for (label, comparisons) in &output.comparisons {
        let leg = output
            .report
            .legs
            .iter()
            .find(|l| &l.label == label)
            .expect("comparisons belong to a leg");
        let Some(final_root) = &leg.final_root else {
            continue;
        };
        let id = format!("{}.{}.{}", output.report.root_name, cfg.strategy, label);
        let summary = store.create_run(
            &id,
            label,
            &cfg.root,
            &cfg.out.join(final_root),
            comparisons,
            cfg.review_all,
        )?;
        println!(
            "review run {id}: {} files, {} flagged",
            summary.files, summary.flagged
        );
    }

    print!(
        "{}",
        revision_table(&summarize_run(&output.report)).render()
    );
    println!("run report: {}", output.report_path.display());
    Ok(())
}

fn compare(a: CompareArgs) -> anyhow::Result<()> {
    let issues: Vec<FileIssueSet> = match &a.report {
        Some(path) => group_by_file(&rebase_report(&load_report(path)?, &a.original)),
        None => Vec::new(),
    };
    let mut reports: Vec<ComparisonReport> = Vec::new();
    for rel in list_files(&a.original)? {
        let revised_path = a.revised.join(&rel);
        if !revised_path.is_file() {
            continue;
        }
        let (Ok(original), Ok(revised)) = (
            std::fs::read_to_string(a.original.join(&rel)),
            std::fs::read_to_string(&revised_path),
        ) else {
            continue;
        };
        if original == revised {
            continue;
        }
        let set = issues
            .iter()
            .find(|s| s.file_location == rel)
            .cloned()
            .unwrap_or(FileIssueSet {
                file_location: rel.clone(),
                issues: Vec::new(),
            });
        reports.push(build_comparison(&original, &revised, &set, a.window));
    }
    for r in &reports {
        println!(
            "{}\thunks={}\tP={:.4}\tR={:.4}\tF1={:.4}\tflags={}",
            r.file_location,
            r.hunks.len(),
            r.metrics.precision(),
            r.metrics.recall(),
            r.metrics.f1(),
            r.flags.len()
        );
    }
    println!("{} changed files", reports.len());
    if let Some(out) = &a.out {
        write_json(out, &reports)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| path.display().to_string())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    if let Some(path) = &a.run {
        let run = RunReport::load(path)?;
        print!("{}", revision_table(&summarize_run(&run)).render());
        if let Some(reason) = &run.aborted {
            println!("run aborted: {reason}");
        }
    }
    if let Some(path) = &a.ledger {
        let ledger = SyntheticLedger::load(path)?;
        print!("{}", revision_table(&ledger.summaries()).render());
        if !ledger.cost_samples.is_empty() {
            println!();
            print!("{}", cost_table(&ledger.cost_samples).render());
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let store = Arc::new(ReviewStore::open(a.out.join("review"))?);
    let runtime = tokio_runtime()?;
    runtime.block_on(issuefix_server::serve(a.serve_addr, store, a.ui_dir))?;
    Ok(())
}

fn tokio_runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}
