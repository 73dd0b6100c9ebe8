//! Static-analysis report ingestion.
//!
//! Reports arrive either as comma-separated text with the header
//! `File_Location,File_Name,Line,Message,Type[,Suggested_Solution]` or as a
//! JSON array of objects carrying the same fields in lowercase. Both decode to
//! a [`ScanReport`]. The toy analyzer in this module produces the same shape
//! from literal substring rules so the re-scan loop can run without an
//! external tool.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IssueCategory {
    Bug,
    Vulnerability,
    CodeSmell,
}

impl IssueCategory {
    pub const ALL: [IssueCategory; 3] = [
        IssueCategory::Bug,
        IssueCategory::Vulnerability,
        IssueCategory::CodeSmell,
    ];

    /// Report spelling, e.g. `CODE_SMELL`.
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCategory::Bug => "BUG",
            IssueCategory::Vulnerability => "VULNERABILITY",
            IssueCategory::CodeSmell => "CODE_SMELL",
        }
    }

    /// Lowercase label used for sub-plan and output tree names.
    pub fn label(self) -> &'static str {
        match self {
            IssueCategory::Bug => "bug",
            IssueCategory::Vulnerability => "vulnerability",
            IssueCategory::CodeSmell => "code_smell",
        }
    }
}

impl fmt::Display for IssueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IssueCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "BUG" => Ok(IssueCategory::Bug),
            "VULNERABILITY" => Ok(IssueCategory::Vulnerability),
            "CODE_SMELL" => Ok(IssueCategory::CodeSmell),
            other => Err(Error::UnknownCategory(other.to_string())),
        }
    }
}

impl Serialize for IssueCategory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for IssueCategory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// One detected problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub file_location: String,
    pub file_name: String,
    pub line: u32,
    pub message: String,
    #[serde(rename = "type")]
    pub category: IssueCategory,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggested_solution: Option<String>,
}

impl Issue {
    /// Builds a validated issue. `file_location` is normalized to forward
    /// slashes; an empty suggested solution is treated as absent.
    pub fn new(
        file_location: &str,
        file_name: &str,
        line: u32,
        message: &str,
        category: IssueCategory,
        suggested_solution: Option<String>,
    ) -> Result<Self> {
        let file_location = normalize_location(file_location)?;
        let leaf = file_location.rsplit('/').next().unwrap_or_default();
        let file_name = file_name.trim();
        // Exports sometimes prefix the leaf (`Revised.vehicleMarkers.jsx`).
        let leaf_matches = file_name == leaf
            || file_name
                .strip_suffix(leaf)
                .is_some_and(|prefix| prefix.ends_with('.'));
        if !leaf_matches {
            return Err(Error::InvalidIssue(format!(
                "file name {file_name:?} does not match location leaf {leaf:?}"
            )));
        }
        if line < 1 {
            return Err(Error::InvalidIssue("line must be >= 1".into()));
        }
        if message.trim().is_empty() {
            return Err(Error::InvalidIssue("empty message".into()));
        }
        Ok(Issue {
            file_location,
            file_name: file_name.to_string(),
            line,
            message: message.to_string(),
            category,
            suggested_solution: suggested_solution.filter(|s| !s.is_empty()),
        })
    }
}

impl<'de> Deserialize<'de> for Issue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            file_location: String,
            file_name: String,
            line: u32,
            message: String,
            #[serde(rename = "type")]
            category: IssueCategory,
            #[serde(default)]
            suggested_solution: Option<String>,
        }
        let r = Raw::deserialize(d)?;
        Issue::new(
            &r.file_location,
            &r.file_name,
            r.line,
            &r.message,
            r.category,
            r.suggested_solution,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Canonical relative form: forward slashes, no `./` or empty segments.
pub fn normalize_location(raw: &str) -> Result<String> {
    let slashed = raw.trim().replace('\\', "/");
    let bytes = slashed.as_bytes();
    let has_drive = bytes.len() >= 2 && bytes[1] == b':' && bytes[0].is_ascii_alphabetic();
    if slashed.starts_with('/') || has_drive {
        return Err(Error::InvalidIssue(format!(
            "file location {raw:?} must be relative"
        )));
    }
    let parts: Vec<&str> = slashed
        .split('/')
        .filter(|p| !p.is_empty() && *p != ".")
        .collect();
    if parts.is_empty() {
        return Err(Error::InvalidIssue("empty file location".into()));
    }
    if parts.contains(&"..") {
        return Err(Error::InvalidIssue(format!(
            "file location {raw:?} escapes the project root"
        )));
    }
    Ok(parts.join("/"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub source_label: String,
    pub scanned_root: PathBuf,
    pub issues: Vec<Issue>,
}

impl ScanReport {
    pub fn count(&self, category: IssueCategory) -> usize {
        self.issues
            .iter()
            .filter(|i| i.category == category)
            .count()
    }

    /// Keeps only issues of `category`, preserving order.
    pub fn filtered(&self, category: Option<IssueCategory>) -> ScanReport {
        ScanReport {
            source_label: self.source_label.clone(),
            scanned_root: self.scanned_root.clone(),
            issues: self
                .issues
                .iter()
                .filter(|i| category.is_none_or(|c| i.category == c))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Delimited,
    Structured,
}

impl ReportFormat {
    /// `.json` selects the structured format; anything else is delimited.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ReportFormat::Structured,
            _ => ReportFormat::Delimited,
        }
    }
}

const COLUMNS: [&str; 5] = ["file_location", "file_name", "line", "message", "type"];
const SOLUTION_COLUMN: &str = "suggested_solution";

pub fn parse_report(bytes: &[u8], format: ReportFormat) -> Result<ScanReport> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::NotUtf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let issues = match format {
        ReportFormat::Delimited => parse_delimited(text)?,
        ReportFormat::Structured => parse_structured(text)?,
    };
    Ok(ScanReport {
        source_label: match format {
            ReportFormat::Delimited => "delimited".into(),
            ReportFormat::Structured => "structured".into(),
        },
        scanned_root: PathBuf::new(),
        issues,
    })
}

/// Reads a report file, choosing the format by extension.
pub fn load_report(path: &Path) -> Result<ScanReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut report = parse_report(&bytes, ReportFormat::from_path(path))?;
    report.source_label = path.display().to_string();
    Ok(report)
}

fn parse_delimited(text: &str) -> Result<Vec<Issue>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::BadHeader(e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::BadHeader("missing header row".into()));
    }
    let lowered: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
    let find = |name: &str| lowered.iter().position(|h| h == name);
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = find(name).ok_or_else(|| Error::BadHeader(format!("missing column {name}")))?;
    }
    let solution_idx = find(SOLUTION_COLUMN);

    let mut issues = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected {} columns, found {}", headers.len(), record.len()),
            });
        }
        let field = |k: usize| record.get(idx[k]).unwrap_or_default();
        let line_raw = field(2).trim();
        let line: u32 = line_raw.parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("line {line_raw:?} is not an integer"),
        })?;
        let category: IssueCategory = field(4).parse()?;
        let solution = solution_idx
            .and_then(|k| record.get(k))
            .map(|s| s.to_string());
        let issue =
            Issue::new(field(0), field(1), line, field(3), category, solution).map_err(|e| {
                Error::MalformedRow {
                    row,
                    reason: e.to_string(),
                }
            })?;
        issues.push(issue);
    }
    Ok(issues)
}

#[derive(Deserialize)]
struct StructuredIssue {
    file_location: String,
    file_name: String,
    line: i64,
    message: String,
    #[serde(rename = "type")]
    category: String,
    #[serde(default)]
    suggested_solution: Option<String>,
}

fn parse_structured(text: &str) -> Result<Vec<Issue>> {
    let raw: Vec<StructuredIssue> = serde_json::from_str(text)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            let line = u32::try_from(r.line).map_err(|_| Error::MalformedRow {
                row,
                reason: format!("line {} out of range", r.line),
            })?;
            let category: IssueCategory = r.category.parse()?;
            Issue::new(
                &r.file_location,
                &r.file_name,
                line,
                &r.message,
                category,
                r.suggested_solution,
            )
            .map_err(|e| Error::MalformedRow {
                row,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Renders a report in the delimited format (always with the solution column).
pub fn write_delimited(report: &ScanReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "File_Location",
            "File_Name",
            "Line",
            "Message",
            "Type",
            "Suggested_Solution",
        ])
        .expect("in-memory write");
    for issue in &report.issues {
        writer
            .write_record([
                issue.file_location.as_str(),
                issue.file_name.as_str(),
                &issue.line.to_string(),
                issue.message.as_str(),
                issue.category.as_str(),
                issue.suggested_solution.as_deref().unwrap_or(""),
            ])
            .expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// All issues reported against one file, ascending by line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileIssueSet {
    pub file_location: String,
    pub issues: Vec<Issue>,
}

impl FileIssueSet {
    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    /// Distinct categories present, in canonical order.
    pub fn categories(&self) -> Vec<IssueCategory> {
        IssueCategory::ALL
            .into_iter()
            .filter(|c| self.issues.iter().any(|i| i.category == *c))
            .collect()
    }
}

pub fn group_by_file(report: &ScanReport) -> Vec<FileIssueSet> {
    let mut groups: BTreeMap<&str, Vec<Issue>> = BTreeMap::new();
    for issue in &report.issues {
        groups
            .entry(issue.file_location.as_str())
            .or_default()
            .push(issue.clone());
    }
    groups
        .into_iter()
        .map(|(location, mut issues)| {
            issues.sort_by_key(|i| i.line);
            FileIssueSet {
                file_location: location.to_string(),
                issues,
            }
        })
        .collect()
}

/// A literal-substring rule for the toy analyzer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyRule {
    pub category: IssueCategory,
    pub pattern: String,
    /// May contain `{file_name}` and `{line}` placeholders.
    pub message: String,
}

impl ToyRule {
    pub fn new(category: IssueCategory, pattern: &str, message: &str) -> Self {
        ToyRule {
            category,
            pattern: pattern.to_string(),
            message: message.to_string(),
        }
    }

    fn render(&self, file_name: &str, line: usize) -> String {
        self.message
            .replace("{file_name}", file_name)
            .replace("{line}", &line.to_string())
    }
}

/// Every regular file under `root`, as sorted root-relative forward-slash paths.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.into());
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root");
        let rel: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        files.push(rel.join("/"));
    }
    files.sort();
    Ok(files)
}

pub fn toy_scan(root: &Path, rules: &[ToyRule]) -> Result<ScanReport> {
    toy_scan_with(root, rules, Mode::default())
}

/// [`toy_scan`] with an explicit execution mode. Files that are not valid
/// UTF-8 are skipped.
pub fn toy_scan_with(root: &Path, rules: &[ToyRule], mode: Mode) -> Result<ScanReport> {
    let files = list_files(root)?;
    let per_file = par::map(mode, &files, |rel| scan_file(root, rel, rules));
    let mut issues = Vec::new();
    for found in per_file {
        issues.extend(found?);
    }
    Ok(ScanReport {
        source_label: "toy".into(),
        scanned_root: root.to_path_buf(),
        issues,
    })
}

fn scan_file(root: &Path, rel: &str, rules: &[ToyRule]) -> Result<Vec<Issue>> {
    let path = root.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let Ok(text) = String::from_utf8(bytes) else {
        tracing::debug!(path = %path.display(), "skipping non-UTF-8 file");
        return Ok(Vec::new());
    };
    let file_name = rel.rsplit('/').next().unwrap_or(rel);
    let mut found = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        for rule in rules {
            if !rule.pattern.is_empty() && line.contains(&rule.pattern) {
                found.push(Issue {
                    file_location: rel.to_string(),
                    file_name: file_name.to_string(),
                    line: (idx + 1) as u32,
                    message: rule.render(file_name, idx + 1),
                    category: rule.category,
                    suggested_solution: None,
                });
            }
        }
    }
    Ok(found)
}
