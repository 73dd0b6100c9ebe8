//! Line-level comparison of an original file against its revision.
//!
//! Lines are compared after stripping trailing whitespace. Hunks keep the
//! raw text of the lines they remove and add.

mod myers;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ingest::FileIssueSet;

use myers::Run;

/// Default half-width, in lines, of the window around each issue line.
pub const DEFAULT_WINDOW: u32 = 5;

/// 1-based inclusive line range. Empty ranges have `end == start - 1` and
/// mark the position after line `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn len(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HunkKind {
    Insert,
    Delete,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffHunk {
    pub kind: HunkKind,
    pub original_range: LineRange,
    pub revised_range: LineRange,
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LineDiff {
    pub hunks: Vec<DiffHunk>,
    /// Lines common to both files: the LCS length.
    pub matched: usize,
    pub original_lines: usize,
    pub revised_lines: usize,
}

fn normalize(line: &str) -> &str {
    line.trim_end()
}

pub fn diff_lines(original: &str, revised: &str) -> LineDiff {
    let a: Vec<&str> = original.lines().collect();
    let b: Vec<&str> = revised.lines().collect();
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let mut a_ids = Vec::with_capacity(a.len());
    let mut b_ids = Vec::with_capacity(b.len());
    for (lines, out) in [(&a, &mut a_ids), (&b, &mut b_ids)] {
        for line in lines.iter() {
            let next = ids.len() as u32;
            out.push(*ids.entry(normalize(line)).or_insert(next));
        }
    }

    let runs = myers::diff(&a_ids, &b_ids);
    let mut hunks = Vec::new();
    let (mut i, mut j, mut matched) = (0usize, 0usize, 0usize);
    let mut pending: Option<(usize, usize, usize, usize)> = None;

    let flush = |pending: &mut Option<(usize, usize, usize, usize)>, hunks: &mut Vec<DiffHunk>| {
        if let Some((i0, j0, dels, ins)) = pending.take() {
            let kind = match (dels > 0, ins > 0) {
                (true, true) => HunkKind::Replace,
                (true, false) => HunkKind::Delete,
                _ => HunkKind::Insert,
            };
            hunks.push(DiffHunk {
                kind,
                original_range: LineRange {
                    start: i0 + 1,
                    end: i0 + dels,
                },
                revised_range: LineRange {
                    start: j0 + 1,
                    end: j0 + ins,
                },
                removed: a[i0..i0 + dels].iter().map(|s| s.to_string()).collect(),
                added: b[j0..j0 + ins].iter().map(|s| s.to_string()).collect(),
            });
        }
    };

    for run in runs {
        match run {
            Run::Equal(n) => {
                flush(&mut pending, &mut hunks);
                i += n;
                j += n;
                matched += n;
            }
            Run::Delete(n) => {
                pending.get_or_insert((i, j, 0, 0)).2 += n;
                i += n;
            }
            Run::Insert(n) => {
                pending.get_or_insert((i, j, 0, 0)).3 += n;
                j += n;
            }
        }
    }
    flush(&mut pending, &mut hunks);

    LineDiff {
        hunks,
        matched,
        original_lines: a.len(),
        revised_lines: b.len(),
    }
}

/// Rebuilds the revised line sequence from the original and the hunks.
pub fn apply_hunks(original: &str, hunks: &[DiffHunk]) -> Vec<String> {
    let lines: Vec<&str> = original.lines().collect();
    let mut out = Vec::new();
    let mut cursor = 0;
    for h in hunks {
        let before = h.original_range.start - 1;
        out.extend(lines[cursor..before].iter().map(|s| s.to_string()));
        out.extend(h.added.iter().cloned());
        cursor = before + h.original_range.len();
    }
    out.extend(lines[cursor..].iter().map(|s| s.to_string()));
    out
}

/// Line-overlap precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    pub matched: usize,
    pub original_lines: usize,
    pub revised_lines: usize,
}

impl Metrics {
    fn both_empty(&self) -> bool {
        self.original_lines == 0 && self.revised_lines == 0
    }

    pub fn precision(&self) -> f64 {
        self.ratio(self.matched, self.revised_lines)
    }

    pub fn recall(&self) -> f64 {
        self.ratio(self.matched, self.original_lines)
    }

    /// `2PR / (P + R)`, computed as `2m / (o + r)`.
    pub fn f1(&self) -> f64 {
        self.ratio(2 * self.matched, self.original_lines + self.revised_lines)
    }

    /// 1 when both files are empty, 0 when only the denominator side is.
    fn ratio(&self, num: usize, den: usize) -> f64 {
        match den {
            0 if self.both_empty() => 1.0,
            0 => 0.0,
            _ => num as f64 / den as f64,
        }
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl From<&LineDiff> for Metrics {
    fn from(d: &LineDiff) -> Self {
        Metrics {
            matched: d.matched,
            original_lines: d.original_lines,
            revised_lines: d.revised_lines,
        }
    }
}

impl Serialize for Metrics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            matched: usize,
            original_lines: usize,
            revised_lines: usize,
            precision: f64,
            recall: f64,
            f1: f64,
        }
        Wire {
            matched: self.matched,
            original_lines: self.original_lines,
            revised_lines: self.revised_lines,
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Metrics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            matched: usize,
            original_lines: usize,
            revised_lines: usize,
        }
        let w = Wire::deserialize(d)?;
        Ok(Metrics {
            matched: w.matched,
            original_lines: w.original_lines,
            revised_lines: w.revised_lines,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallucinationFlag {
    pub hunk_index: usize,
    /// `None` when the file had no issues to anchor to.
    pub nearest_issue_line: Option<u32>,
    /// Lines between the hunk and the nearest issue window.
    pub distance: Option<u64>,
}

/// Flags hunks whose original-side span misses every issue window
/// `[line - window, line + window]`. An insertion after line `e` spans
/// `[e, e + 1]`.
pub fn flag_hallucinations(
    hunks: &[DiffHunk],
    issue_lines: &[u32],
    window: u32,
) -> Vec<HallucinationFlag> {
    let w = window as i64;
    hunks
        .iter()
        .enumerate()
        .filter_map(|(idx, h)| {
            let r = h.original_range;
            let (lo, hi) = if r.is_empty() {
                (r.end as i64, r.end as i64 + 1)
            } else {
                (r.start as i64, r.end as i64)
            };
            let mut nearest: Option<(u64, u32)> = None;
            for &line in issue_lines {
                let (wl, wh) = (line as i64 - w, line as i64 + w);
                let dist = if lo <= wh && hi >= wl {
                    0
                } else if hi < wl {
                    (wl - hi) as u64
                } else {
                    (lo - wh) as u64
                };
                if dist == 0 {
                    return None;
                }
                if nearest.is_none_or(|(d, l)| (dist, line) < (d, l)) {
                    nearest = Some((dist, line));
                }
            }
            Some(HallucinationFlag {
                hunk_index: idx,
                nearest_issue_line: nearest.map(|(_, l)| l),
                distance: nearest.map(|(d, _)| d),
            })
        })
        .collect()
}

/// Reviewer decision on one compared file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    #[default]
    Pending,
    Accepted,
    Rejected,
    Edited {
        content: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub file_location: String,
    pub hunks: Vec<DiffHunk>,
    pub metrics: Metrics,
    pub flags: Vec<HallucinationFlag>,
    pub window: u32,
    pub decision: Decision,
}

impl ComparisonReport {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

pub fn build_comparison(
    original: &str,
    revised: &str,
    issues: &FileIssueSet,
    window: u32,
) -> ComparisonReport {
    let diff = diff_lines(original, revised);
    let lines: Vec<u32> = issues.issues.iter().map(|i| i.line).collect();
    let flags = flag_hallucinations(&diff.hunks, &lines, window);
    ComparisonReport {
        file_location: issues.file_location.clone(),
        metrics: Metrics::from(&diff),
        hunks: diff.hunks,
        flags,
        window,
        decision: Decision::Pending,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("line {i}\n")).collect()
    }

    #[test]
    fn identical_files() {
        let s = numbered(10);
        let d = diff_lines(&s, &s);
        assert!(d.hunks.is_empty());
        let m = Metrics::from(&d);
        assert_eq!((m.precision(), m.recall(), m.f1()), (1.0, 1.0, 1.0));
        let e = Metrics::from(&diff_lines("", ""));
        assert_eq!((e.precision(), e.recall(), e.f1()), (1.0, 1.0, 1.0));
        let gone = Metrics::from(&diff_lines("a\n", ""));
        assert_eq!(
            (gone.precision(), gone.recall(), gone.f1()),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn one_line_replaced_in_66() {
        let a = numbered(66);
        let b = a.replace("line 33\n", "changed\n");
        let m = Metrics::from(&diff_lines(&a, &b));
        assert_eq!(m.matched, 65);
        assert!((m.f1() - 0.9848).abs() < 0.0005);
        assert!((f1_score(m.precision(), m.recall()) - m.f1()).abs() < 1e-12);
    }

    #[test]
    fn trailing_whitespace_ignored() {
        let d = diff_lines("a  \nb\n", "a\nb\t\n");
        assert!(d.hunks.is_empty());
        assert_eq!(d.matched, 2);
    }

    #[test]
    fn hunk_shapes() {
        let d = diff_lines("a\nb\nc\n", "a\nx\nc\nd\n");
        assert_eq!(d.hunks.len(), 2);
        assert_eq!(d.hunks[0].kind, HunkKind::Replace);
        assert_eq!(d.hunks[0].original_range, LineRange { start: 2, end: 2 });
        assert_eq!(d.hunks[1].kind, HunkKind::Insert);
        assert_eq!(d.hunks[1].original_range, LineRange { start: 4, end: 3 });
        assert_eq!(apply_hunks("a\nb\nc\n", &d.hunks), vec!["a", "x", "c", "d"]);

        let del = diff_lines("a\nb\n", "b\n");
        assert_eq!(del.hunks[0].kind, HunkKind::Delete);
        assert!(del.hunks[0].revised_range.is_empty());
    }

    fn hunk_at(start: usize, end: usize) -> DiffHunk {
        DiffHunk {
            kind: HunkKind::Replace,
            original_range: LineRange { start, end },
            revised_range: LineRange { start, end },
            removed: vec![],
            added: vec![],
        }
    }

    #[test]
    fn flags_far_hunks() {
        let near = flag_hallucinations(&[hunk_at(408, 410)], &[409], 5);
        assert!(near.is_empty());

        let far = flag_hallucinations(&[hunk_at(50, 50)], &[409], 5);
        assert_eq!(far.len(), 1);
        assert_eq!(far[0].nearest_issue_line, Some(409));
        assert_eq!(far[0].distance, Some(354));

        assert!(flag_hallucinations(&[hunk_at(404, 404)], &[409], 5).is_empty());
        assert_eq!(
            flag_hallucinations(&[hunk_at(403, 403)], &[409], 5)[0].distance,
            Some(1)
        );

        let none = flag_hallucinations(&[hunk_at(1, 1)], &[], 5);
        assert_eq!(none[0].nearest_issue_line, None);
    }

    #[test]
    fn insertion_point_touches_window() {
        let ins = DiffHunk {
            kind: HunkKind::Insert,
            original_range: LineRange {
                start: 404,
                end: 403,
            },
            revised_range: LineRange {
                start: 404,
                end: 404,
            },
            removed: vec![],
            added: vec!["x".into()],
        };
        assert!(flag_hallucinations(&[ins], &[409], 5).is_empty());
    }

    #[test]
    fn decision_wire_format() {
        let d = Decision::Edited {
            content: "x".into(),
        };
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"status":"EDITED","content":"x"}"#
        );
        assert_eq!(
            serde_json::to_string(&Decision::Pending).unwrap(),
            r#"{"status":"PENDING"}"#
        );
    }
}
