//! Engineered revision prompts.
//!
//! One prompt per file carries every planned issue of that file. The user
//! message has a fixed section order: language declaration, task list,
//! few-shot examples, per-issue blocks, retrieved context, final
//! instructions, and the complete original file.

mod bank;
mod language;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use bank::{select_examples, Example, ExampleBank};
pub use language::{language_tag, UNKNOWN_LANGUAGE};

use crate::error::{Error, Result};
use crate::ingest::{FileIssueSet, IssueCategory};
use crate::rag::{assemble_context, RetrievedContext, DEFAULT_CONTEXT_BUDGET};

pub const SYSTEM_TEXT: &str = "You are a senior software engineer who revises source files to resolve issues reported by a static analyzer. You change only what the fixes require, keep the file's language, style and formatting, and reply with the complete revised file and nothing else.";

const FILE_BEGIN: &str = "--- BEGIN ORIGINAL FILE: ";
const FILE_END: &str = "--- END ORIGINAL FILE ---";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMetadata {
    pub file_location: String,
    pub language: String,
    pub issue_count: usize,
    pub categories: Vec<IssueCategory>,
    pub context_included: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
    pub metadata: PromptMetadata,
}

impl Prompt {
    /// Both messages in one text, as written by `plan --emit-prompts`.
    pub fn transcript(&self) -> String {
        format!(
            "[system]\n{}\n\n[user]\n{}",
            self.system_text, self.user_text
        )
    }
}

pub fn build_prompt(
    file_content: &str,
    set: &FileIssueSet,
    context: &RetrievedContext,
    bank: &ExampleBank,
    language: &str,
) -> Result<Prompt> {
    build_prompt_with_budget(
        file_content,
        set,
        context,
        bank,
        language,
        DEFAULT_CONTEXT_BUDGET,
    )
}

pub fn build_prompt_with_budget(
    file_content: &str,
    set: &FileIssueSet,
    context: &RetrievedContext,
    bank: &ExampleBank,
    language: &str,
    context_budget: usize,
) -> Result<Prompt> {
    if set.is_empty() {
        return Err(Error::NothingToRevise(set.file_location.clone()));
    }
    let categories = set.categories();
    let mut issues = set.issues.clone();
    issues.sort_by_key(|i| i.line);

    let mut u = String::new();
    // Writes into a String cannot fail.
    let _ = writeln!(u, "Language: {language}\n");

    u.push_str("Tasks:\n");
    let _ = writeln!(
        u,
        "1. The file below is written in {language}. Revise it so that every issue listed under \"Issues\" is resolved."
    );
    u.push_str("2. Fix each issue at its reported line, guided by its description and any suggested solution.\n");
    u.push_str("3. Follow the examples: change only the code the fix requires.\n");
    u.push_str("4. Keep the original format of the corrected code, including indentation and the lines you do not touch.\n\n");

    u.push_str("Examples:\n");
    for (n, ex) in bank
        .select_examples(&categories, language)
        .iter()
        .enumerate()
    {
        let _ = writeln!(
            u,
            "Example {n} ({cat}, {lang}): {desc}\nRationale: {why}\nOriginal:\n{orig}\nCorrected:\n{fixed}\n",
            n = n + 1,
            cat = ex.category,
            lang = ex.language,
            desc = ex.description,
            why = ex.rationale,
            orig = ex.original,
            fixed = ex.corrected,
        );
    }

    u.push_str("Issues:\n");
    for (n, issue) in issues.iter().enumerate() {
        let _ = writeln!(
            u,
            "Issue {n}: The detected {cat} issue reported by the analyzer is on line: {line}. Description: {msg}",
            n = n + 1,
            cat = issue.category,
            line = issue.line,
            msg = issue.message,
        );
        if let Some(solution) = &issue.suggested_solution {
            let _ = writeln!(u, "Suggested solution: {solution}");
        }
    }
    u.push('\n');

    let assembled = assemble_context(context, context_budget);
    u.push_str("Retrieved context:\n");
    u.push_str(&assembled.text);
    u.push('\n');

    u.push_str("Final instructions:\n");
    u.push_str("If similar issues are present on other lines, fix those as well, using the retrieved context where it applies.\n");
    u.push_str("Reply with the complete corrected file in its original format without additional comments, in a single code block, so the whole file is returned in one response.\n\n");

    let _ = writeln!(u, "{FILE_BEGIN}{} ---", set.file_location);
    u.push_str(file_content);
    if !file_content.is_empty() && !file_content.ends_with('\n') {
        u.push('\n');
    }
    u.push_str(FILE_END);
    u.push('\n');

    Ok(Prompt {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: u,
        metadata: PromptMetadata {
            file_location: set.file_location.clone(),
            language: language.to_string(),
            issue_count: issues.len(),
            categories,
            context_included: assembled.included > 0,
        },
    })
}

/// The original file embedded in a prompt's user text.
pub fn embedded_file(user_text: &str) -> Option<&str> {
    let start = user_text.find(FILE_BEGIN)?;
    let body_start = start + user_text[start..].find('\n')? + 1;
    let end = user_text.rfind(FILE_END)?;
    (end >= body_start).then(|| &user_text[body_start..end])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSize {
    pub chars: usize,
    /// `ceil(chars / 4)`; a rough estimate, not a tokenizer count.
    pub approx_tokens: usize,
}

pub fn estimate_size(prompt: &Prompt) -> PromptSize {
    size_of_chars(prompt.system_text.chars().count() + prompt.user_text.chars().count())
}

pub(crate) fn size_of_chars(chars: usize) -> PromptSize {
    PromptSize {
        chars,
        approx_tokens: chars.div_ceil(4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Issue;
    use crate::rag::{rank, Candidate, SourceTier};

    fn vehicle_markers() -> (String, FileIssueSet) {
        let content: String = (1..=420)
            .map(|i| {
                if i == 409 {
                    "      <div onClick={handleClick}>\n".to_string()
                } else {
                    format!("  const v{i} = {i};\n")
                }
            })
            .collect();
        let set = FileIssueSet {
            file_location: "client/src/components/BaseMap/vehicleMarkers.jsx".into(),
            issues: vec![Issue::new(
                "client/src/components/BaseMap/vehicleMarkers.jsx",
                "vehicleMarkers.jsx",
                409,
                "Visible, non-interactive elements with click handlers must have at least one keyboard listener.",
                IssueCategory::Bug,
                None,
            )
            .unwrap()],
        };
        (content, set)
    }

    #[test]
    fn single_bug_prompt() {
        let (content, set) = vehicle_markers();
        let bank = ExampleBank::builtin();
        let p = build_prompt(&content, &set, &RetrievedContext::empty(), &bank, "jsx").unwrap();
        assert_eq!(
            p.user_text
                .matches("issue reported by the analyzer is on line: 409.")
                .count(),
            1
        );
        assert_eq!(p.user_text.matches("Example ").count(), 1);
        assert!(p.user_text.contains("Example 1 (BUG, jsx)"));
        assert!(p.user_text.contains(crate::rag::NO_CONTEXT_SENTINEL));
        assert_eq!(p.user_text.matches(content.as_str()).count(), 1);
        assert_eq!(embedded_file(&p.user_text), Some(content.as_str()));
        assert!(!p.metadata.context_included);
        assert_eq!(p.metadata.issue_count, 1);

        let again = build_prompt(&content, &set, &RetrievedContext::empty(), &bank, "jsx").unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn three_categories_with_context() {
        let mk =
            |line, msg: &str, c| Issue::new("app/main.js", "main.js", line, msg, c, None).unwrap();
        let set = FileIssueSet {
            file_location: "app/main.js".into(),
            issues: vec![
                mk(2, "Use strict equality.", IssueCategory::Bug),
                mk(5, "Avoid plain http.", IssueCategory::Vulnerability),
                mk(9, "Remove the TODO.", IssueCategory::CodeSmell),
            ],
        };
        let c = |tier, url: &str, snippet: &str| Candidate {
            source_tier: tier,
            url: url.into(),
            snippet: snippet.into(),
            retrieval_rank: 0,
        };
        let ctx = rank(
            &[
                c(SourceTier::CodeHost, "https://gh/a", "use ==="),
                c(SourceTier::QaForum, "https://so/b", "prefer https"),
            ],
            3,
        );
        let content = "a\nb\nc\n";
        let p = build_prompt(content, &set, &ctx, &ExampleBank::builtin(), "javascript").unwrap();
        assert_eq!(p.user_text.matches("\nIssue ").count(), 3);
        assert_eq!(p.user_text.matches("\nExample ").count(), 3);
        assert_eq!(p.user_text.matches("] Source: ").count(), 2);
        assert!(p.metadata.context_included);

        let order = [
            "Language:",
            "Tasks:",
            "Examples:",
            "Issues:",
            "Retrieved context:",
            "Final instructions:",
            FILE_BEGIN,
        ];
        let positions: Vec<usize> = order.iter().map(|s| p.user_text.find(s).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_set_rejected() {
        let set = FileIssueSet {
            file_location: "a.js".into(),
            issues: vec![],
        };
        let err = build_prompt(
            "",
            &set,
            &RetrievedContext::empty(),
            &ExampleBank::builtin(),
            "code",
        )
        .unwrap_err();
        assert!(err.to_string().contains("nothing to revise"));
    }

    #[test]
    fn size_estimates() {
        let mk = |n: usize| Prompt {
            system_text: String::new(),
            user_text: "x".repeat(n),
            metadata: PromptMetadata {
                file_location: String::new(),
                language: String::new(),
                issue_count: 0,
                categories: vec![],
                context_included: false,
            },
        };
        assert_eq!(
            estimate_size(&mk(0)),
            PromptSize {
                chars: 0,
                approx_tokens: 0
            }
        );
        assert_eq!(
            estimate_size(&mk(400)),
            PromptSize {
                chars: 400,
                approx_tokens: 100
            }
        );
        assert_eq!(
            estimate_size(&mk(401)),
            PromptSize {
                chars: 401,
                approx_tokens: 101
            }
        );
    }
}
