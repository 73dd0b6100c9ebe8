use super::rank::RetrievedContext;

pub const DEFAULT_CONTEXT_BUDGET: usize = 4000;

/// Emitted when no external solution made it into the prompt.
pub const NO_CONTEXT_SENTINEL: &str =
    "No external solutions were found for these issues. Resolve them from your own knowledge of the language and the analyzer rules.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledContext {
    pub text: String,
    /// Number of solutions that fit the budget.
    pub included: usize,
}

/// Renders solutions in rank order as attributed blocks. Whole blocks are
/// dropped once the next one would push the block total past `budget`
/// characters; the header line is not counted.
pub fn assemble_context(ranked: &RetrievedContext, budget: usize) -> AssembledContext {
    let mut blocks = Vec::new();
    let mut used = 0usize;
    for (i, solution) in ranked.solutions.iter().enumerate() {
        let c = &solution.candidate;
        let block = format!(
            "[{n}] Source: {tier} ({url})\n{snippet}\n",
            n = i + 1,
            tier = c.source_tier.describe(),
            url = c.url,
            snippet = c.snippet.trim_end(),
        );
        let size = block.chars().count();
        if used + size > budget {
            break;
        }
        used += size;
        blocks.push(block);
    }
    if blocks.is_empty() {
        return AssembledContext {
            text: format!("{NO_CONTEXT_SENTINEL}\n"),
            included: 0,
        };
    }
    AssembledContext {
        text: format!(
            "Solutions retrieved from external sources, most credible first:\n{}",
            blocks.concat()
        ),
        included: blocks.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rag::{rank, Candidate, SourceTier};

    fn three() -> RetrievedContext {
        let c = |tier, url: &str, snippet: &str| Candidate {
            source_tier: tier,
            url: url.into(),
            snippet: snippet.into(),
            retrieval_rank: 0,
        };
        rank(
            &[
                c(SourceTier::QaForum, "https://so/1", "answer from forum"),
                c(SourceTier::CodeHost, "https://gh/1", "patch from code host"),
                c(
                    SourceTier::AnalyzerCommunity,
                    "https://community/1",
                    "rule docs",
                ),
            ],
            3,
        )
    }

    #[test]
    fn empty_gives_sentinel() {
        let out = assemble_context(&RetrievedContext::empty(), 100);
        assert_eq!(out.text, format!("{NO_CONTEXT_SENTINEL}\n"));
        assert_eq!(out.included, 0);
    }

    #[test]
    fn generous_budget_keeps_order() {
        let out = assemble_context(&three(), 10_000);
        assert_eq!(out.included, 3);
        let gh = out.text.find("https://gh/1").unwrap();
        let community = out.text.find("https://community/1").unwrap();
        let so = out.text.find("https://so/1").unwrap();
        assert!(gh < community && community < so);
        assert!(out
            .text
            .contains("[1] Source: code host (https://gh/1)\npatch from code host\n"));
    }

    #[test]
    fn tight_budget_drops_whole_blocks() {
        let first = "[1] Source: code host (https://gh/1)\npatch from code host\n";
        let out = assemble_context(&three(), first.chars().count() + 5);
        assert_eq!(out.included, 1);
        assert!(out.text.ends_with(first));
        assert!(!out.text.contains("rule docs"));
    }
}
