use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::query::SearchQuery;
use crate::error::{Error, Result};
use crate::ingest::IssueCategory;
use crate::par::{self, Mode};

/// Web search results kept when every dedicated source came back empty.
pub const WEB_RESULT_LIMIT: usize = 3;

/// Source credibility; the discriminant is the ranking weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SourceTier {
    WebSearch = 1,
    QaForum = 2,
    AnalyzerCommunity = 3,
    CodeHost = 4,
}

impl SourceTier {
    pub fn weight(self) -> u32 {
        self as u32
    }

    pub fn is_dedicated(self) -> bool {
        self != SourceTier::WebSearch
    }

    pub fn describe(self) -> &'static str {
        match self {
            SourceTier::CodeHost => "code host",
            SourceTier::AnalyzerCommunity => "analyzer community",
            SourceTier::QaForum => "Q&A forum",
            SourceTier::WebSearch => "web search",
        }
    }
}

impl fmt::Display for SourceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceHit {
    pub url: String,
    pub snippet: String,
}

impl SourceHit {
    pub fn new(url: &str, snippet: &str) -> Self {
        SourceHit {
            url: url.to_string(),
            snippet: snippet.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub source_tier: SourceTier,
    pub url: String,
    pub snippet: String,
    /// Position within the originating source's result list.
    pub retrieval_rank: u32,
}

#[derive(Debug, Clone, Error)]
#[error("source {source_name}: {message}")]
pub struct SourceError {
    pub source_name: String,
    pub message: String,
}

/// Adapter contract: query terms and category in, ordered hits out.
pub trait SourceClient: Send + Sync {
    fn name(&self) -> &str;
    fn tier(&self) -> SourceTier;
    fn search(&self, query: &SearchQuery) -> std::result::Result<Vec<SourceHit>, SourceError>;
}

/// Returns the same hits for every query.
pub struct StaticSource {
    name: String,
    tier: SourceTier,
    hits: Vec<SourceHit>,
}

impl StaticSource {
    pub fn new(name: &str, tier: SourceTier, hits: Vec<SourceHit>) -> Self {
        StaticSource {
            name: name.to_string(),
            tier,
            hits,
        }
    }
}

impl SourceClient for StaticSource {
    fn name(&self) -> &str {
        &self.name
    }
    fn tier(&self) -> SourceTier {
        self.tier
    }
    fn search(&self, _: &SearchQuery) -> std::result::Result<Vec<SourceHit>, SourceError> {
        Ok(self.hits.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    /// Every keyword must appear among the query terms.
    pub keywords: Vec<String>,
    #[serde(default)]
    pub category: Option<IssueCategory>,
    pub hits: Vec<SourceHit>,
}

/// Fixture-backed stub: answers from keyword-matched entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureSource {
    pub name: String,
    pub tier: SourceTier,
    pub entries: Vec<FixtureEntry>,
}

impl SourceClient for FixtureSource {
    fn name(&self) -> &str {
        &self.name
    }
    fn tier(&self) -> SourceTier {
        self.tier
    }
    fn search(&self, query: &SearchQuery) -> std::result::Result<Vec<SourceHit>, SourceError> {
        Ok(self
            .entries
            .iter()
            .filter(|e| e.category.is_none_or(|c| c == query.category))
            .filter(|e| {
                e.keywords
                    .iter()
                    .all(|k| query.terms.iter().any(|t| t.eq_ignore_ascii_case(k)))
            })
            .flat_map(|e| e.hits.iter().cloned())
            .collect())
    }
}

#[derive(Deserialize)]
struct FixtureFile {
    sources: Vec<FixtureSource>,
}

/// Loads `{"sources": [{"name", "tier", "entries": [...]}]}`.
pub fn load_fixture_sources(path: &Path) -> Result<Vec<Arc<dyn SourceClient>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: FixtureFile = serde_json::from_str(&text)?;
    Ok(file
        .sources
        .into_iter()
        .map(|s| Arc::new(s) as Arc<dyn SourceClient>)
        .collect())
}

/// JSON-over-HTTP source adapter.
///
/// POSTs `{"terms": [...], "category": "BUG"}` and expects
/// `[{"url": "...", "snippet": "..."}]` back.
pub struct HttpSource {
    name: String,
    tier: SourceTier,
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpSource {
    pub fn new(name: &str, tier: SourceTier, endpoint: &str) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| Error::Validation(format!("http client: {e}")))?;
        Ok(HttpSource {
            name: name.to_string(),
            tier,
            endpoint: endpoint.to_string(),
            client,
        })
    }
}

impl SourceClient for HttpSource {
    fn name(&self) -> &str {
        &self.name
    }
    fn tier(&self) -> SourceTier {
        self.tier
    }
    fn search(&self, query: &SearchQuery) -> std::result::Result<Vec<SourceHit>, SourceError> {
        let fail = |message: String| SourceError {
            source_name: self.name.clone(),
            message,
        };
        let response = self
            .client
            .post(&self.endpoint)
            .json(query)
            .send()
            .map_err(|e| fail(e.to_string()))?;
        if !response.status().is_success() {
            return Err(fail(format!("status {}", response.status())));
        }
        response.json().map_err(|e| fail(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retrieval {
    pub candidates: Vec<Candidate>,
    /// Source failures, recorded and treated as empty results.
    pub failures: Vec<String>,
}

/// Queries sources in credibility order with a per-(query, source) cache.
pub struct Retriever {
    sources: Vec<Arc<dyn SourceClient>>,
    cache: Mutex<BTreeMap<String, Vec<SourceHit>>>,
    mode: Mode,
}

impl Retriever {
    /// Sources are ordered by descending tier; equal tiers keep their order.
    pub fn new(mut sources: Vec<Arc<dyn SourceClient>>) -> Self {
        sources.sort_by_key(|s| std::cmp::Reverse(s.tier()));
        Retriever {
            sources,
            cache: Mutex::new(BTreeMap::new()),
            mode: Mode::default(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    /// Stable cache key over (terms, category, source).
    pub fn cache_key(query: &SearchQuery, source: &str) -> String {
        let mut hasher = Sha256::new();
        for term in &query.terms {
            hasher.update(term.as_bytes());
            hasher.update([0x1f]);
        }
        hasher.update([0x1e]);
        hasher.update(query.category.as_str().as_bytes());
        hasher.update([0x1e]);
        hasher.update(source.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn retrieve(&self, query: &SearchQuery) -> Retrieval {
        let (dedicated, web): (Vec<_>, Vec<_>) =
            self.sources.iter().partition(|s| s.tier().is_dedicated());

        let mut out = Retrieval::default();
        let results = par::map(self.mode, &dedicated, |s| {
            self.query_source(s.as_ref(), query)
        });
        for (source, result) in dedicated.iter().zip(results) {
            collect(&mut out, source.tier(), result, usize::MAX);
        }
        if out.candidates.is_empty() {
            for source in web {
                let result = self.query_source(source.as_ref(), query);
                collect(&mut out, source.tier(), result, WEB_RESULT_LIMIT);
            }
        }
        out
    }

    fn query_source(
        &self,
        source: &dyn SourceClient,
        query: &SearchQuery,
    ) -> std::result::Result<Vec<SourceHit>, SourceError> {
        let key = Self::cache_key(query, source.name());
        if let Some(hits) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hits.clone());
        }
        let hits = source.search(query)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, hits.clone());
        Ok(hits)
    }

    pub fn load_cache(&self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Ok(());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: BTreeMap<String, Vec<SourceHit>> = serde_json::from_str(&text)?;
        self.cache.lock().expect("cache lock").extend(entries);
        Ok(())
    }

    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&*self.cache.lock().expect("cache lock"))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn collect(
    out: &mut Retrieval,
    tier: SourceTier,
    result: std::result::Result<Vec<SourceHit>, SourceError>,
    limit: usize,
) {
    match result {
        Ok(hits) => out.candidates.extend(
            hits.into_iter()
                .filter(|h| !h.snippet.trim().is_empty())
                .take(limit)
                .enumerate()
                .map(|(rank, h)| Candidate {
                    source_tier: tier,
                    url: h.url,
                    snippet: h.snippet,
                    retrieval_rank: rank as u32,
                }),
        ),
        Err(e) => {
            tracing::warn!(error = %e, "retrieval source failed");
            out.failures.push(e.to_string());
        }
    }
}
