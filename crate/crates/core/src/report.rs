//! Tabular summaries of revision runs.
//!
//! The revision table has one column per leg and rows for issue counts,
//! per-tier and total success rates, average metrics over revised files,
//! and costs. Input is either a [`RunReport`] or a [`SyntheticLedger`]
//! of externally recorded counts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Money;
use crate::orchestrator::{compute_success, LegReport, RunReport, SuccessRate};

pub const RATE_DECIMALS: u32 = 2;
pub const COST_DECIMALS: u32 = 2;
pub const PER_ISSUE_DECIMALS: u32 = 3;

const NOT_APPLICABLE: &str = "n/a";
const ABSENT: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierColumn {
    pub name: String,
    pub before: u64,
    pub after: u64,
    pub cost: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegSummary {
    pub label: String,
    pub initial: u64,
    pub tiers: Vec<TierColumn>,
    pub averages: Option<Averages>,
}

impl LegSummary {
    pub fn final_count(&self) -> u64 {
        self.tiers.last().map_or(self.initial, |t| t.after)
    }

    pub fn total_cost(&self) -> Money {
        self.tiers.iter().map(|t| &t.cost).sum()
    }

    pub fn cumulative(&self) -> Result<Option<SuccessRate>> {
        compute_success(self.initial, self.final_count())
    }
}

impl From<&LegReport> for LegSummary {
    fn from(leg: &LegReport) -> Self {
        LegSummary {
            label: leg.label.clone(),
            initial: leg.initial_issues,
            tiers: leg
                .tiers
                .iter()
                .map(|t| TierColumn {
                    name: t.tier.name.clone(),
                    before: t.issues_before,
                    after: t.issues_after,
                    cost: t.cost(),
                })
                .collect(),
            averages: leg.averages.as_ref().map(|a| Averages {
                precision: a.precision,
                recall: a.recall,
                f1: a.f1,
            }),
        }
    }
}

pub fn summarize_run(run: &RunReport) -> Vec<LegSummary> {
    run.legs.iter().map(LegSummary::from).collect()
}

/// Counts and costs recorded outside this tool, e.g. from a published run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLedger {
    pub legs: Vec<SyntheticLeg>,
    #[serde(default)]
    pub cost_samples: Vec<CostSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLeg {
    pub label: String,
    pub initial: u64,
    pub tiers: Vec<SyntheticTier>,
    #[serde(default)]
    pub averages: Option<Averages>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticTier {
    pub name: String,
    /// Issues still open after this tier.
    pub remaining: u64,
    #[serde(default)]
    pub cost: Money,
}

/// Cost of a batch of revisions on one tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSample {
    pub tier: String,
    pub category: String,
    pub cost: Money,
    pub revisions: u64,
}

impl CostSample {
    pub fn per_issue(&self) -> Option<Money> {
        self.cost.per(self.revisions)
    }
}

impl SyntheticLedger {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn summaries(&self) -> Vec<LegSummary> {
        self.legs
            .iter()
            .map(|leg| {
                let mut before = leg.initial;
                let tiers = leg
                    .tiers
                    .iter()
                    .map(|t| {
                        let col = TierColumn {
                            name: t.name.clone(),
                            before,
                            after: t.remaining,
                            cost: t.cost.clone(),
                        };
                        before = t.remaining;
                        col
                    })
                    .collect();
                LegSummary {
                    label: leg.label.clone(),
                    initial: leg.initial,
                    tiers,
                    averages: leg.averages.clone(),
                }
            })
            .collect()
    }
}

/// A labelled grid of text cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Row cells by label, excluding the label itself.
    pub fn row(&self, label: &str) -> Option<&[String]> {
        self.rows
            .iter()
            .find(|r| r.first().is_some_and(|l| l == label))
            .map(|r| &r[1..])
    }

    pub fn render(&self) -> String {
        let cols = self.header.len();
        let mut widths = vec![0usize; cols];
        for row in std::iter::once(&self.header).chain(&self.rows) {
            for (i, cell) in row.iter().enumerate().take(cols) {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let line = |row: &[String]| {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            format!("| {} |\n", cells.join(" | "))
        };
        let rule: String = format!(
            "|{}|\n",
            widths
                .iter()
                .map(|w| "-".repeat(w + 2))
                .collect::<Vec<_>>()
                .join("|")
        );
        let mut out = line(&self.header);
        out.push_str(&rule);
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}

fn tier_names(legs: &[LegSummary]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for leg in legs {
        for t in &leg.tiers {
            if !names.contains(&t.name) {
                names.push(t.name.clone());
            }
        }
    }
    names
}

fn rate_cell(rate: Result<Option<SuccessRate>>) -> String {
    match rate {
        Ok(Some(r)) => r.percent(RATE_DECIMALS),
        Ok(None) => NOT_APPLICABLE.into(),
        Err(_) => "regression".into(),
    }
}

fn percent_cell(value: Option<f64>) -> String {
    value.map_or(NOT_APPLICABLE.into(), |v| format!("{:.2}%", v * 100.0))
}

/// Revision outcome table, one column per leg.
pub fn revision_table(legs: &[LegSummary]) -> Table {
    let tiers = tier_names(legs);
    let mut header = vec!["Metric".to_string()];
    header.extend(legs.iter().map(|l| l.label.clone()));

    let mut rows = Vec::new();
    let mut push = |label: String, cell: &dyn Fn(&LegSummary) -> String| {
        let mut row = vec![label];
        row.extend(legs.iter().map(cell));
        rows.push(row);
    };
    let tier_of = |leg: &LegSummary, name: &str| leg.tiers.iter().find(|t| t.name == name).cloned();

    push("Total issues".into(), &|l| l.initial.to_string());
    for name in &tiers {
        push(format!("Resolved by {name}"), &|l| {
            tier_of(l, name).map_or(ABSENT.into(), |t| {
                t.before.saturating_sub(t.after).to_string()
            })
        });
    }
    push("Resolved (all tiers)".into(), &|l| {
        l.initial.saturating_sub(l.final_count()).to_string()
    });
    for name in &tiers {
        push(format!("{name} success rate"), &|l| {
            tier_of(l, name).map_or(ABSENT.into(), |t| {
                rate_cell(compute_success(t.before, t.after))
            })
        });
    }
    push("Total success rate".into(), &|l| rate_cell(l.cumulative()));
    push("Avg. precision in revised files".into(), &|l| {
        percent_cell(l.averages.as_ref().map(|a| a.precision))
    });
    push("Avg. recall in revised files".into(), &|l| {
        percent_cell(l.averages.as_ref().map(|a| a.recall))
    });
    push("Avg. F1 in revised files".into(), &|l| {
        percent_cell(l.averages.as_ref().map(|a| a.f1))
    });
    for name in &tiers {
        push(format!("{name} cost (USD)"), &|l| {
            tier_of(l, name).map_or(ABSENT.into(), |t| {
                format!("${}", t.cost.round_to(COST_DECIMALS))
            })
        });
    }
    push("Total cost (USD)".into(), &|l| {
        format!("${}", l.total_cost().round_to(COST_DECIMALS))
    });

    Table { header, rows }
}

/// Cost per revised issue, one column per category.
pub fn cost_table(samples: &[CostSample]) -> Table {
    let mut categories: Vec<&str> = Vec::new();
    let mut tiers: Vec<&str> = Vec::new();
    for s in samples {
        if !categories.contains(&s.category.as_str()) {
            categories.push(&s.category);
        }
        if !tiers.contains(&s.tier.as_str()) {
            tiers.push(&s.tier);
        }
    }
    let find = |tier: &str, cat: &str| samples.iter().find(|s| s.tier == tier && s.category == cat);

    let mut header = vec!["Metric".to_string()];
    header.extend(categories.iter().map(|c| c.to_string()));
    let mut rows = Vec::new();
    for tier in &tiers {
        let mut row = vec![format!("{tier} cost (USD)")];
        row.extend(categories.iter().map(|c| {
            find(tier, c).map_or(ABSENT.into(), |s| {
                format!(
                    "${} ({} revisions)",
                    s.cost.round_to(COST_DECIMALS),
                    s.revisions
                )
            })
        }));
        rows.push(row);
    }
    for tier in &tiers {
        let mut row = vec![format!("{tier} cost per issue (USD)")];
        row.extend(categories.iter().map(|c| {
            find(tier, c)
                .and_then(CostSample::per_issue)
                .map_or(ABSENT.into(), |m| {
                    format!("${}", m.round_to(PER_ISSUE_DECIMALS))
                })
        }));
        rows.push(row);
    }
    Table { header, rows }
}
