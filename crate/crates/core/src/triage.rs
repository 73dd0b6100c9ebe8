//! Revision planning: split a scan report into sub-plans by strategy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::TierRef;
use crate::ingest::{group_by_file, FileIssueSet, IssueCategory, ScanReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One sub-plan per issue category present.
    Divided,
    /// A single sub-plan holding every issue.
    Comprehensive,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Divided => "divided",
            Strategy::Comprehensive => "comprehensive",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "divided" => Ok(Strategy::Divided),
            "comprehensive" => Ok(Strategy::Comprehensive),
            other => Err(Error::Validation(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Label of the comprehensive sub-plan.
pub const ALL_LABEL: &str = "all";

/// Mirrored output tree naming: `<root>.rev.<label>.<tier-index>`.
pub const DEFAULT_OUTPUT_TEMPLATE: &str = "{root}.rev.{label}.{tier}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubPlan {
    pub label: String,
    /// Category the sub-plan is restricted to; `None` for comprehensive.
    pub category: Option<IssueCategory>,
    pub file_sets: Vec<FileIssueSet>,
}

impl SubPlan {
    pub fn issue_count(&self) -> usize {
        self.file_sets.iter().map(FileIssueSet::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionPlan {
    pub strategy: Strategy,
    pub sub_plans: Vec<SubPlan>,
    pub tier_schedule: Vec<TierRef>,
    pub output_root_template: String,
}

impl RevisionPlan {
    /// Directory name for `label`'s output tree at 1-based `tier_index`.
    pub fn output_root_name(&self, root_name: &str, label: &str, tier_index: usize) -> String {
        self.output_root_template
            .replace("{root}", root_name)
            .replace("{label}", label)
            .replace("{tier}", &tier_index.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

pub fn plan(report: &ScanReport, strategy: Strategy, tiers: &[TierRef]) -> Result<RevisionPlan> {
    let tier_schedule = TierRef::schedule(tiers)?;
    let sub_plans = match strategy {
        Strategy::Divided => IssueCategory::ALL
            .into_iter()
            .filter(|c| report.count(*c) > 0)
            .map(|c| SubPlan {
                label: c.label().to_string(),
                category: Some(c),
                file_sets: group_by_file(&report.filtered(Some(c))),
            })
            .collect(),
        Strategy::Comprehensive => vec![SubPlan {
            label: ALL_LABEL.to_string(),
            category: None,
            file_sets: group_by_file(report),
        }],
    };
    Ok(RevisionPlan {
        strategy,
        sub_plans,
        tier_schedule,
        output_root_template: DEFAULT_OUTPUT_TEMPLATE.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorWarning {
    pub file_location: String,
    pub line: u32,
    pub line_count: usize,
    pub message: String,
}

/// Checks issue lines against `content`. Out-of-range issues are kept and
/// reported as warnings.
pub fn anchor_lines(set: &FileIssueSet, content: &str) -> (FileIssueSet, Vec<AnchorWarning>) {
    let line_count = content.lines().count();
    let warnings = set
        .issues
        .iter()
        .filter(|i| i.line as usize > line_count)
        .map(|i| AnchorWarning {
            file_location: set.file_location.clone(),
            line: i.line,
            line_count,
            message: "line out of range".into(),
        })
        .collect();
    (set.clone(), warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Issue;
    use crate::numeric::Money;
    use std::path::PathBuf;

    fn tiers() -> Vec<TierRef> {
        vec![TierRef::new(
            "gpt-3.5-turbo",
            "mock",
            Money::zero(),
            Money::zero(),
            0,
        )]
    }

    fn report_with(counts: &[(IssueCategory, usize)]) -> ScanReport {
        let mut issues = Vec::new();
        for (c, n) in counts {
            for i in 0..*n {
                let loc = format!("src/f{}.js", i % 37);
                let leaf = loc.rsplit('/').next().unwrap().to_string();
                issues.push(Issue::new(&loc, &leaf, (i + 1) as u32, "m", *c, None).unwrap());
            }
        }
        ScanReport {
            source_label: "t".into(),
            scanned_root: PathBuf::new(),
            issues,
        }
    }

    #[test]
    fn divided_matches_table_counts() {
        let report = report_with(&[
            (IssueCategory::Bug, 234),
            (IssueCategory::Vulnerability, 61),
            (IssueCategory::CodeSmell, 7304),
        ]);
        let p = plan(&report, Strategy::Divided, &tiers()).unwrap();
        let sizes: Vec<usize> = p.sub_plans.iter().map(SubPlan::issue_count).collect();
        assert_eq!(sizes, vec![234, 61, 7304]);
        let labels: Vec<&str> = p.sub_plans.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["bug", "vulnerability", "code_smell"]);

        let c = plan(&report, Strategy::Comprehensive, &tiers()).unwrap();
        assert_eq!(c.sub_plans.len(), 1);
        assert_eq!(c.sub_plans[0].issue_count(), 7599);
    }

    #[test]
    fn empty_report_plans() {
        let report = report_with(&[]);
        assert!(plan(&report, Strategy::Divided, &tiers())
            .unwrap()
            .sub_plans
            .is_empty());
        let c = plan(&report, Strategy::Comprehensive, &tiers()).unwrap();
        assert_eq!(c.sub_plans.len(), 1);
        assert_eq!(c.sub_plans[0].issue_count(), 0);
    }

    #[test]
    fn empty_tiers_rejected() {
        let report = report_with(&[(IssueCategory::Bug, 1)]);
        assert!(matches!(
            plan(&report, Strategy::Divided, &[]),
            Err(Error::EmptyTiers)
        ));
    }

    #[test]
    fn output_names() {
        let p = plan(&report_with(&[]), Strategy::Divided, &tiers()).unwrap();
        assert_eq!(p.output_root_name("eis", "bug", 2), "eis.rev.bug.2");
    }

    #[test]
    fn anchor_warnings() {
        let content: String = (1..=300).map(|i| format!("line {i}\n")).collect();
        let mk = |line| Issue::new("a.jsx", "a.jsx", line, "m", IssueCategory::Bug, None).unwrap();
        let in_range = FileIssueSet {
            file_location: "a.jsx".into(),
            issues: vec![mk(16)],
        };
        assert!(anchor_lines(&in_range, &content).1.is_empty());

        let out = FileIssueSet {
            file_location: "a.jsx".into(),
            issues: vec![mk(409)],
        };
        let (_, w) = anchor_lines(&out, &content);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].message, "line out of range");

        let mixed = FileIssueSet {
            file_location: "a.jsx".into(),
            issues: vec![mk(16), mk(409)],
        };
        let (kept, w) = anchor_lines(&mixed, &content);
        assert_eq!(kept, mixed);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].line, 409);
    }
}
