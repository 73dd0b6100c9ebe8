use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Issue, IssueCategory};

pub const MAX_QUERY_TERMS: usize = 12;
pub const STOPWORDS_VERSION: &str = "v1";

const STOPWORDS_V1: &str = include_str!("../../data/stopwords-v1.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_V1
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(term: &str) -> bool {
    stopwords().contains(term)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchQuery {
    pub terms: Vec<String>,
    pub category: IssueCategory,
}

/// Key terms of the issue message: lowercased word tokens with stopwords
/// removed, in message order, capped at [`MAX_QUERY_TERMS`]. Source code never
/// enters the query.
pub fn formulate_query(issue: &Issue) -> Result<SearchQuery> {
    let terms: Vec<String> = issue
        .message
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !is_stopword(t))
        .take(MAX_QUERY_TERMS)
        .collect();
    if terms.is_empty() {
        return Err(Error::UnqueryableIssue(issue.message.clone()));
    }
    Ok(SearchQuery {
        terms,
        category: issue.category,
    })
}
