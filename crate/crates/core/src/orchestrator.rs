//! Tiered revision runs over mirrored output trees.
//!
//! Each tier copies its input tree to `<out>/<root>.rev.<label>.<tier>`,
//! overwrites the files it revises, re-scans the copy and hands the
//! remaining issues to the next tier.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compare::{build_comparison, ComparisonReport};
use crate::error::{Error, Result};
use crate::gateway::{CostRecord, Gateway, RetryPolicy, TierRef};
use crate::ingest::{
    group_by_file, list_files, load_report, toy_scan_with, FileIssueSet, Issue, IssueCategory,
    ScanReport, ToyRule,
};
use crate::numeric::{format_percent, Money, Rate};
use crate::par::{self, Mode};
use crate::prompt::{build_prompt_with_budget, language_tag, ExampleBank, Prompt};
use crate::rag::{
    formulate_query, rank, RetrievedContext, Retriever, DEFAULT_CONTEXT_BUDGET, DEFAULT_K,
};
use crate::triage::{anchor_lines, plan, RevisionPlan, Strategy, SubPlan, DEFAULT_OUTPUT_TEMPLATE};

pub const RUN_REPORT_FILE: &str = "run_report.json";
pub const PLAN_FILE: &str = "plan.json";
pub const COMPARISONS_DIR: &str = "comparisons";
pub const DEFAULT_WORKERS: usize = 4;

/// Produces a scan report for a directory tree.
pub trait Analyzer: Send + Sync {
    fn scan(&self, root: &Path) -> Result<ScanReport>;
}

/// Literal-pattern analyzer over the tree's text files.
pub struct ToyAnalyzer {
    rules: Vec<ToyRule>,
    mode: Mode,
}

impl ToyAnalyzer {
    pub fn new(rules: Vec<ToyRule>) -> Self {
        ToyAnalyzer {
            rules,
            mode: Mode::default(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn load_rules(path: &Path) -> Result<Vec<ToyRule>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Analyzer for ToyAnalyzer {
    fn scan(&self, root: &Path) -> Result<ScanReport> {
        toy_scan_with(root, &self.rules, self.mode).map_err(|e| Error::Analyzer {
            root: root.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Reads externally produced reports: `<dir>/<tree name>.csv` or `.json`.
pub struct ReportLoader {
    reports_dir: PathBuf,
}

impl ReportLoader {
    pub fn new(reports_dir: impl Into<PathBuf>) -> Self {
        ReportLoader {
            reports_dir: reports_dir.into(),
        }
    }
}

impl Analyzer for ReportLoader {
    fn scan(&self, root: &Path) -> Result<ScanReport> {
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let candidates = ["csv", "json"].map(|ext| self.reports_dir.join(format!("{name}.{ext}")));
        let Some(path) = candidates.iter().find(|p| p.is_file()) else {
            return Err(Error::Analyzer {
                root: root.to_path_buf(),
                reason: format!(
                    "no report named {name}.csv or {name}.json in {}",
                    self.reports_dir.display()
                ),
            });
        };
        let mut report = load_report(path)?;
        report.scanned_root = root.to_path_buf();
        Ok(report)
    }
}

/// Rewrites locations carrying a leading project directory (`EIS/src/a.js`)
/// to be relative to `root` when only the stripped form exists.
pub fn rebase_report(report: &ScanReport, root: &Path) -> ScanReport {
    let issues = report
        .issues
        .iter()
        .map(|issue| {
            if root.join(&issue.file_location).is_file() {
                return issue.clone();
            }
            match issue.file_location.split_once('/') {
                Some((_, rest)) if root.join(rest).is_file() => Issue {
                    file_location: rest.to_string(),
                    ..issue.clone()
                },
                _ => issue.clone(),
            }
        })
        .collect();
    ScanReport {
        source_label: report.source_label.clone(),
        scanned_root: report.scanned_root.clone(),
        issues,
    }
}

/// Resolved fraction of issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub resolved: u64,
    pub of: u64,
}

impl SuccessRate {
    pub fn rate(&self) -> Rate {
        Rate::new(self.resolved, self.of)
    }

    pub fn percent(&self, decimals: u32) -> String {
        format_percent(&self.rate(), decimals)
    }
}

/// `(before - after) / before`; `None` when `before` is zero.
pub fn compute_success(before: u64, after: u64) -> Result<Option<SuccessRate>> {
    if after > before {
        return Err(Error::IssueCountIncreased { before, after });
    }
    Ok((before > 0).then_some(SuccessRate {
        resolved: before - after,
        of: before,
    }))
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    pub tiers: Vec<TierRef>,
    pub rag: bool,
    pub k: usize,
    pub context_budget: usize,
    pub window: u32,
    pub workers: usize,
    pub output_root_template: String,
    pub retry: RetryPolicy,
    pub mode: Mode,
}

impl PipelineConfig {
    pub fn new(strategy: Strategy, tiers: Vec<TierRef>) -> Self {
        PipelineConfig {
            strategy,
            tiers,
            rag: true,
            k: DEFAULT_K,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            window: crate::compare::DEFAULT_WINDOW,
            workers: DEFAULT_WORKERS,
            output_root_template: DEFAULT_OUTPUT_TEMPLATE.to_string(),
            retry: RetryPolicy::default(),
            mode: Mode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub strategy: Strategy,
    pub rag: bool,
    pub k: usize,
    pub window: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierOutcome {
    pub tier: TierRef,
    pub files_attempted: usize,
    pub files_revised: usize,
    pub issues_before: u64,
    pub issues_after: u64,
    /// Directory name under the run's output directory.
    pub output_root: String,
    pub ledger: Vec<CostRecord>,
    /// `None` when nothing was open or the count went up.
    pub success: Option<SuccessRate>,
    /// Set when the re-scan found more issues than the tier started with.
    pub regression: bool,
    pub warnings: Vec<String>,
}

impl TierOutcome {
    pub fn cost(&self) -> Money {
        self.ledger.iter().map(|r| &r.cost).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAverages {
    pub files: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub file_location: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    pub label: String,
    pub category: Option<IssueCategory>,
    pub initial_issues: u64,
    pub final_issues: u64,
    pub tiers: Vec<TierOutcome>,
    pub cumulative: Option<SuccessRate>,
    /// Last tier's output tree, or `None` when no tier ran.
    pub final_root: Option<String>,
    pub comparisons_file: Option<String>,
    pub comparisons: Vec<ComparisonSummary>,
    pub averages: Option<MetricAverages>,
}

impl LegReport {
    pub fn cost(&self) -> Money {
        self.tiers.iter().map(TierOutcome::cost).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub root_name: String,
    pub plan_file: String,
    pub settings: RunSettings,
    pub legs: Vec<LegReport>,
    pub total_cost: Money,
    /// Set when the run stopped early; the legs hold what completed.
    pub aborted: Option<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run report serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: RunReport,
    pub plan: RevisionPlan,
    /// Full comparison reports per leg label, in leg order.
    pub comparisons: Vec<(String, Vec<ComparisonReport>)>,
    pub report_path: PathBuf,
}

/// Result of a single tier, including the scan that feeds the next one.
#[derive(Debug, Clone)]
pub struct TierRun {
    pub outcome: TierOutcome,
    pub rescan: ScanReport,
    pub revised_files: Vec<String>,
}

struct FileResult {
    revised: bool,
    record: Option<CostRecord>,
    warnings: Vec<String>,
}

pub struct Pipeline<'a> {
    pub analyzer: &'a dyn Analyzer,
    pub gateway: &'a Gateway,
    pub bank: &'a ExampleBank,
    pub retriever: Option<&'a Retriever>,
    pub config: PipelineConfig,
}

impl<'a> Pipeline<'a> {
    /// Revises `sub_plan`'s files from `input_root` into `output_root`.
    pub fn run_tier(
        &self,
        sub_plan: &SubPlan,
        tier: &TierRef,
        input_root: &Path,
        output_root: &Path,
    ) -> Result<TierRun> {
        mirror_tree(input_root, output_root)?;
        let issues_before = sub_plan.issue_count() as u64;

        let results = par::with_workers(self.config.mode, self.config.workers, || {
            par::map(self.config.mode, &sub_plan.file_sets, |set| {
                self.revise_file(set, tier, input_root, output_root)
            })
        });

        let mut ledger = Vec::new();
        let mut warnings = Vec::new();
        let mut revised_files = Vec::new();
        for (set, result) in sub_plan.file_sets.iter().zip(results) {
            if let Some(record) = result.record {
                self.gateway.ledger().append(record.clone());
                ledger.push(record);
            }
            if result.revised {
                revised_files.push(set.file_location.clone());
            }
            warnings.extend(result.warnings);
        }

        let rescan = rebase_report(&self.analyzer.scan(output_root)?, output_root)
            .filtered(sub_plan.category);
        let issues_after = rescan.issues.len() as u64;
        let (success, regression) = match compute_success(issues_before, issues_after) {
            Ok(rate) => (rate, false),
            Err(e) => {
                tracing::warn!(tier = %tier.name, label = %sub_plan.label, "{e}; possible regression introduced by revisions");
                warnings.push(e.to_string());
                (None, true)
            }
        };

        Ok(TierRun {
            outcome: TierOutcome {
                tier: tier.clone(),
                files_attempted: sub_plan.file_sets.len(),
                files_revised: revised_files.len(),
                issues_before,
                issues_after,
                output_root: output_root
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                ledger,
                success,
                regression,
                warnings,
            },
            rescan,
            revised_files,
        })
    }

    /// Anchors `set` against `content`, retrieves context when RAG is on and
    /// builds the file's prompt. Non-fatal problems go to `warnings`.
    pub fn file_prompt(
        &self,
        set: &FileIssueSet,
        content: &str,
        warnings: &mut Vec<String>,
    ) -> Result<Prompt> {
        let (set, anchor_warnings) = anchor_lines(set, content);
        warnings.extend(anchor_warnings.into_iter().map(|w| {
            format!(
                "{}:{}: {} ({} lines)",
                w.file_location, w.line, w.message, w.line_count
            )
        }));

        let context = match self.retriever.filter(|_| self.config.rag) {
            Some(retriever) => {
                let mut candidates = Vec::new();
                for issue in &set.issues {
                    match formulate_query(issue) {
                        Ok(query) => {
                            let found = retriever.retrieve(&query);
                            candidates.extend(found.candidates);
                            warnings.extend(found.failures);
                        }
                        Err(e) => {
                            warnings.push(format!("{}:{}: {e}", set.file_location, issue.line))
                        }
                    }
                }
                rank(&candidates, self.config.k)
            }
            None => RetrievedContext::empty(),
        };

        build_prompt_with_budget(
            content,
            &set,
            &context,
            self.bank,
            language_tag(&set.file_location),
            self.config.context_budget,
        )
    }

    fn revise_file(
        &self,
        set: &FileIssueSet,
        tier: &TierRef,
        input_root: &Path,
        output_root: &Path,
    ) -> FileResult {
        let mut out = FileResult {
            revised: false,
            record: None,
            warnings: Vec::new(),
        };
        let source = input_root.join(&set.file_location);
        let content = match fs::read_to_string(&source) {
            Ok(c) => c,
            Err(e) => {
                out.warnings.push(format!("{}: {e}", set.file_location));
                return out;
            }
        };
        let prompt = match self.file_prompt(set, &content, &mut out.warnings) {
            Ok(p) => p,
            Err(e) => {
                out.warnings.push(format!("{}: {e}", set.file_location));
                return out;
            }
        };

        match self.gateway.submit(&prompt, tier, &self.config.retry) {
            Ok(response) => {
                out.record = Some(crate::gateway::record_cost(
                    response.usage,
                    tier,
                    &set.file_location,
                ));
                let revised = restore_edges(&content, &response.extracted_code);
                let target = output_root.join(&set.file_location);
                match fs::write(&target, revised) {
                    Ok(()) => out.revised = true,
                    Err(e) => out.warnings.push(format!("{}: {e}", target.display())),
                }
            }
            Err(e) => {
                if let Some(usage) = e.usage() {
                    out.record = Some(crate::gateway::record_cost(usage, tier, &set.file_location));
                }
                tracing::warn!("{e}");
                out.warnings.push(e.to_string());
            }
        }
        out
    }

    /// Plans `report` over `root` and runs every sub-plan through the tier
    /// schedule, writing trees and reports under `out_dir`.
    pub fn run(&self, report: &ScanReport, root: &Path, out_dir: &Path) -> Result<PipelineOutput> {
        check_out_dir(root, out_dir)?;
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let root_name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| {
                Error::Validation(format!("root {} has no directory name", root.display()))
            })?;

        let report = rebase_report(report, root);
        let mut plan = plan(&report, self.config.strategy, &self.config.tiers)?;
        plan.output_root_template = self.config.output_root_template.clone();
        write_file(&out_dir.join(PLAN_FILE), &plan.to_json())?;

        let mut run = RunReport {
            root_name: root_name.clone(),
            plan_file: PLAN_FILE.to_string(),
            settings: RunSettings {
                strategy: self.config.strategy,
                rag: self.config.rag,
                k: self.config.k,
                window: self.config.window,
            },
            legs: Vec::new(),
            total_cost: Money::zero(),
            aborted: None,
        };
        let report_path = out_dir.join(RUN_REPORT_FILE);
        let mut comparisons = Vec::new();

        for sub_plan in &plan.sub_plans {
            run.legs.push(LegReport {
                label: sub_plan.label.clone(),
                category: sub_plan.category,
                initial_issues: sub_plan.issue_count() as u64,
                final_issues: sub_plan.issue_count() as u64,
                tiers: Vec::new(),
                cumulative: None,
                final_root: None,
                comparisons_file: None,
                comparisons: Vec::new(),
                averages: None,
            });
            match self.run_leg(
                &plan,
                sub_plan,
                root,
                &root_name,
                out_dir,
                &mut run,
                &report_path,
            ) {
                Ok(leg_comparisons) => comparisons.push((sub_plan.label.clone(), leg_comparisons)),
                Err(e) => {
                    run.aborted = Some(e.to_string());
                    run.total_cost = run.legs.iter().map(LegReport::cost).sum();
                    write_file(&report_path, &run.to_json())?;
                    return Err(e);
                }
            }
        }

        run.total_cost = run.legs.iter().map(LegReport::cost).sum();
        write_file(&report_path, &run.to_json())?;
        Ok(PipelineOutput {
            report: run,
            plan,
            comparisons,
            report_path,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn run_leg(
        &self,
        plan: &RevisionPlan,
        sub_plan: &SubPlan,
        root: &Path,
        root_name: &str,
        out_dir: &Path,
        run: &mut RunReport,
        report_path: &Path,
    ) -> Result<Vec<ComparisonReport>> {
        let initial = sub_plan.issue_count() as u64;
        let mut current = sub_plan.clone();
        let mut input_root = root.to_path_buf();
        let mut revised: BTreeSet<String> = BTreeSet::new();

        for (idx, tier) in plan.tier_schedule.iter().enumerate() {
            if current.issue_count() == 0 {
                break;
            }
            let output_root =
                out_dir.join(plan.output_root_name(root_name, &sub_plan.label, idx + 1));
            let tier_run = self.run_tier(&current, tier, &input_root, &output_root)?;
            revised.extend(tier_run.revised_files.iter().cloned());

            let leg = run.legs.last_mut().expect("leg pushed by caller");
            leg.final_issues = tier_run.outcome.issues_after;
            leg.final_root = Some(tier_run.outcome.output_root.clone());
            leg.tiers.push(tier_run.outcome);
            run.total_cost = run.legs.iter().map(LegReport::cost).sum();
            write_file(report_path, &run.to_json())?;

            current = SubPlan {
                label: sub_plan.label.clone(),
                category: sub_plan.category,
                file_sets: group_by_file(&tier_run.rescan),
            };
            input_root = output_root;
        }

        let leg = run.legs.last_mut().expect("leg pushed by caller");
        leg.cumulative = compute_success(initial, leg.final_issues).ok().flatten();

        let Some(final_root) = leg.final_root.clone() else {
            return Ok(Vec::new());
        };
        let final_root = out_dir.join(final_root);
        let revised: Vec<&FileIssueSet> = sub_plan
            .file_sets
            .iter()
            .filter(|s| revised.contains(&s.file_location))
            .collect();
        let window = self.config.window;
        let reports: Vec<Result<ComparisonReport>> = par::map(self.config.mode, &revised, |set| {
            let original = read_text(&root.join(&set.file_location))?;
            let revised = read_text(&final_root.join(&set.file_location))?;
            Ok(build_comparison(&original, &revised, set, window))
        });
        let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;

        let dir = out_dir.join(COMPARISONS_DIR);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let name = format!("{COMPARISONS_DIR}/{}.json", sub_plan.label);
        write_file(
            &out_dir.join(&name),
            &serde_json::to_string_pretty(&reports)?,
        )?;

        leg.comparisons = reports
            .iter()
            .map(|r| ComparisonSummary {
                file_location: r.file_location.clone(),
                precision: r.metrics.precision(),
                recall: r.metrics.recall(),
                f1: r.metrics.f1(),
                flags: r.flags.len(),
            })
            .collect();
        leg.averages = average(&leg.comparisons);
        leg.comparisons_file = Some(name);
        write_file(report_path, &run.to_json())?;
        Ok(reports)
    }
}

/// Wraps the revised body in the original's leading and trailing blank
/// lines, which extraction trims.
pub fn restore_edges(original: &str, revised: &str) -> String {
    let (head, tail) = blank_edges(original);
    let (r_head, r_tail) = blank_edges(revised);
    let core = &revised[r_head.len()..revised.len() - r_tail.len()];
    if core.is_empty() {
        return revised.to_string();
    }
    format!("{head}{core}{tail}")
}

/// Leading whitespace-only lines, and everything after the last
/// non-blank line's content (its line break included).
fn blank_edges(text: &str) -> (&str, &str) {
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let Some(first) = lines.iter().position(|l| !l.trim().is_empty()) else {
        return (text, "");
    };
    let last = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .expect("a non-blank line exists");
    let head_len: usize = lines[..first].iter().map(|l| l.len()).sum();
    let before_last: usize = lines[..last].iter().map(|l| l.len()).sum();
    let last_line = lines[last];
    let content_len = last_line.trim_end_matches(['\n', '\r']).len();
    (&text[..head_len], &text[before_last + content_len..])
}

fn average(rows: &[ComparisonSummary]) -> Option<MetricAverages> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    Some(MetricAverages {
        files: rows.len(),
        precision: rows.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
        f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
    })
}

fn check_out_dir(root: &Path, out_dir: &Path) -> Result<()> {
    let root = root.canonicalize().map_err(|e| Error::io(root, e))?;
    if !root.is_dir() {
        return Err(Error::Validation(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    if absolute(out_dir)?.starts_with(&root) {
        return Err(Error::Validation(format!(
            "output directory {} must not be inside the project root",
            out_dir.display()
        )));
    }
    Ok(())
}

/// Canonical form of a path that may not exist yet.
fn absolute(path: &Path) -> Result<PathBuf> {
    let mut existing = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    let mut rest = Vec::new();
    while !existing.exists() {
        match (
            existing.file_name().map(|n| n.to_os_string()),
            existing.parent(),
        ) {
            (Some(name), Some(parent)) => {
                rest.push(name);
                existing = parent.to_path_buf();
            }
            _ => break,
        }
    }
    let mut out = existing
        .canonicalize()
        .map_err(|e| Error::io(&existing, e))?;
    out.extend(rest.iter().rev());
    Ok(out)
}

/// Replaces `dst` with a byte copy of every file under `src`.
pub fn mirror_tree(src: &Path, dst: &Path) -> Result<()> {
    if dst.exists() {
        fs::remove_dir_all(dst).map_err(|e| Error::io(dst, e))?;
    }
    fs::create_dir_all(dst).map_err(|e| Error::io(dst, e))?;
    for rel in list_files(src)? {
        let target = dst.join(&rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::copy(src.join(&rel), &target).map_err(|e| Error::io(&target, e))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
