//! Retrieval of external solutions for an issue.
//!
//! A query is built from the issue message alone, sent to credibility-tiered
//! sources (dedicated sources first, web search only as a fallback), and the
//! candidates are merged, scored and cut down to a bounded prompt block.

mod context;
mod query;
mod rank;
mod source;

pub use context::{
    assemble_context, AssembledContext, DEFAULT_CONTEXT_BUDGET, NO_CONTEXT_SENTINEL,
};
pub use query::{formulate_query, is_stopword, SearchQuery, MAX_QUERY_TERMS, STOPWORDS_VERSION};
pub use rank::{normalize_snippet, rank, RankedSolution, RetrievedContext, DEFAULT_K};
pub use source::{
    load_fixture_sources, Candidate, FixtureEntry, FixtureSource, HttpSource, Retrieval, Retriever,
    SourceClient, SourceError, SourceHit, SourceTier, StaticSource, WEB_RESULT_LIMIT,
};
