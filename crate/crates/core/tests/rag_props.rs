use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use issuefix_core::ingest::load_report;
use issuefix_core::rag::{
    formulate_query, load_fixture_sources, normalize_snippet, rank, Candidate, Retriever,
    SearchQuery, SourceClient, SourceError, SourceHit, SourceTier,
};
use proptest::prelude::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn tier() -> impl Strategy<Value = SourceTier> {
    prop_oneof![
        Just(SourceTier::WebSearch),
        Just(SourceTier::QaForum),
        Just(SourceTier::AnalyzerCommunity),
        Just(SourceTier::CodeHost),
    ]
}

/// Small snippet alphabet so near-duplicates actually occur.
fn candidate() -> impl Strategy<Value = Candidate> {
    (
        tier(),
        prop::sample::select(vec!["u1", "u2", "u3", "u4"]),
        prop::sample::select(vec![
            "fix a", "Fix  A", "fix b", "use ===", "use  ===", "drop it", " ",
        ]),
        0u32..5,
    )
        .prop_map(|(source_tier, url, snippet, retrieval_rank)| Candidate {
            source_tier,
            url: url.into(),
            snippet: snippet.into(),
            retrieval_rank,
        })
}

proptest! {
    #[test]
    fn output_is_drawn_from_input(cands in prop::collection::vec(candidate(), 0..20), k in 1usize..6) {
        let ctx = rank(&cands, k);
        prop_assert!(ctx.solutions.len() <= k);
        prop_assert_eq!(ctx.empty_marker, ctx.solutions.is_empty());
        let mut keys = Vec::new();
        for s in &ctx.solutions {
            prop_assert!(cands.contains(&s.candidate));
            keys.push(normalize_snippet(&s.candidate.snippet));
        }
        let n = keys.len();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), n, "merged groups appear once");
    }

    #[test]
    fn higher_tier_never_ranks_below_at_equal_redundancy(cands in prop::collection::vec(candidate(), 0..20)) {
        let ctx = rank(&cands, usize::MAX);
        for (i, a) in ctx.solutions.iter().enumerate() {
            for b in &ctx.solutions[i + 1..] {
                if a.redundancy == b.redundancy {
                    prop_assert!(a.candidate.source_tier >= b.candidate.source_tier);
                }
            }
        }
        for w in ctx.solutions.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn ranking_ignores_input_order(cands in prop::collection::vec(candidate(), 0..20), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = cands.clone();
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        prop_assert_eq!(rank(&cands, 3), rank(&shuffled, 3));
    }
}

struct Counting {
    name: &'static str,
    tier: SourceTier,
    hits: Vec<SourceHit>,
    calls: AtomicUsize,
}

impl SourceClient for Counting {
    fn name(&self) -> &str {
        self.name
    }
    fn tier(&self) -> SourceTier {
        self.tier
    }
    fn search(&self, _: &SearchQuery) -> Result<Vec<SourceHit>, SourceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.hits.clone())
    }
}

#[test]
fn second_identical_retrieval_hits_the_cache() {
    let sources: Vec<Arc<Counting>> = vec![
        Arc::new(Counting {
            name: "forum",
            tier: SourceTier::QaForum,
            hits: vec![SourceHit::new("f", "answer")],
            calls: AtomicUsize::new(0),
        }),
        Arc::new(Counting {
            name: "web",
            tier: SourceTier::WebSearch,
            hits: vec![SourceHit::new("w", "page")],
            calls: AtomicUsize::new(0),
        }),
    ];
    let retriever = Retriever::new(
        sources
            .iter()
            .map(|s| s.clone() as Arc<dyn SourceClient>)
            .collect(),
    );
    let q = SearchQuery {
        terms: vec!["strict".into(), "equality".into()],
        category: issuefix_core::ingest::IssueCategory::CodeSmell,
    };
    let first = retriever.retrieve(&q);
    let calls_after_first: usize = sources.iter().map(|s| s.calls.load(Ordering::SeqCst)).sum();
    let second = retriever.retrieve(&q);
    let calls_after_second: usize = sources.iter().map(|s| s.calls.load(Ordering::SeqCst)).sum();
    assert_eq!(first, second);
    // Web search is skipped because the forum answered.
    assert_eq!(calls_after_first, 1);
    assert_eq!(calls_after_second, calls_after_first);
}

#[test]
fn cache_survives_a_save_and_load() {
    let tmp = tempfile::tempdir().unwrap();
    let counting = Arc::new(Counting {
        name: "forum",
        tier: SourceTier::QaForum,
        hits: vec![SourceHit::new("f", "answer")],
        calls: AtomicUsize::new(0),
    });
    let q = SearchQuery {
        terms: vec!["todo".into()],
        category: issuefix_core::ingest::IssueCategory::CodeSmell,
    };
    let a = Retriever::new(vec![counting.clone() as Arc<dyn SourceClient>]);
    a.retrieve(&q);
    a.save_cache(&tmp.path().join("cache.json")).unwrap();
    let b = Retriever::new(vec![counting.clone() as Arc<dyn SourceClient>]);
    b.load_cache(&tmp.path().join("cache.json")).unwrap();
    let hit = b.retrieve(&q);
    assert_eq!(counting.calls.load(Ordering::SeqCst), 1);
    assert_eq!(hit.candidates.len(), 1);
}

/// Queries carry message tokens only, never file content.
#[test]
fn queries_do_not_leak_source_code() {
    let report = load_report(&fixtures().join("eis.csv")).unwrap();
    for issue in &report.issues {
        let q = formulate_query(issue).unwrap();
        let message = issue.message.to_lowercase();
        for term in &q.terms {
            assert!(message.contains(term.as_str()), "{term} not in {message}");
        }
        let content =
            std::fs::read_to_string(fixtures().join("eis").join(&issue.file_location)).unwrap();
        let line = content
            .lines()
            .nth(issue.line as usize - 1)
            .unwrap()
            .trim()
            .to_lowercase();
        let joined = q.terms.join(" ");
        if line.len() > 12 {
            assert!(
                !joined.contains(&line),
                "query {joined:?} embeds code {line:?}"
            );
        }
    }
}

#[test]
fn fixture_sources_cover_both_paths() {
    let retriever = Retriever::new(load_fixture_sources(&fixtures().join("sources.json")).unwrap());
    let report = load_report(&fixtures().join("eis.csv")).unwrap();
    let (mut answered, mut empty) = (0, 0);
    for issue in &report.issues {
        let got = retriever.retrieve(&formulate_query(issue).unwrap());
        if got.candidates.is_empty() {
            empty += 1;
        } else {
            answered += 1;
        }
    }
    assert!(
        answered > 0 && empty > 0,
        "answered {answered}, empty {empty}"
    );
}
