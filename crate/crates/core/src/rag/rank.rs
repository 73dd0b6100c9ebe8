use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};

use super::source::{Candidate, SourceTier};

/// Solutions kept per prompt unless configured otherwise.
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedSolution {
    pub candidate: Candidate,
    /// `tier_weight + (redundancy - 1) / 2`.
    #[serde(serialize_with = "ratio_as_f64", deserialize_with = "ratio_from_f64")]
    pub score: Ratio<u32>,
    /// Distinct source tiers carrying a near-duplicate snippet.
    pub redundancy: u32,
}

fn ratio_as_f64<S: Serializer>(r: &Ratio<u32>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(*r.numer() as f64 / *r.denom() as f64)
}

fn ratio_from_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Ratio<u32>, D::Error> {
    // Scores are always multiples of one half.
    let v = f64::deserialize(d)?;
    Ok(Ratio::new((v * 2.0).round() as u32, 2))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub solutions: Vec<RankedSolution>,
    pub empty_marker: bool,
}

impl RetrievedContext {
    pub fn empty() -> Self {
        RetrievedContext {
            solutions: Vec::new(),
            empty_marker: true,
        }
    }
}

/// Near-duplicate key: whitespace runs collapsed, lowercased.
pub fn normalize_snippet(snippet: &str) -> String {
    snippet
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn tie_break(a: &Candidate, b: &Candidate) -> Ordering {
    Reverse(a.source_tier)
        .cmp(&Reverse(b.source_tier))
        .then(a.retrieval_rank.cmp(&b.retrieval_rank))
        .then(a.snippet.len().cmp(&b.snippet.len()))
        .then_with(|| a.url.cmp(&b.url))
        .then_with(|| a.snippet.cmp(&b.snippet))
}

/// Merges near-duplicates, scores, orders and keeps the top `k`.
pub fn rank(candidates: &[Candidate], k: usize) -> RetrievedContext {
    let mut groups: BTreeMap<String, Vec<&Candidate>> = BTreeMap::new();
    for c in candidates.iter().filter(|c| !c.snippet.trim().is_empty()) {
        groups
            .entry(normalize_snippet(&c.snippet))
            .or_default()
            .push(c);
    }

    let mut solutions: Vec<RankedSolution> = groups
        .into_values()
        .map(|group| {
            let tiers: BTreeSet<SourceTier> = group.iter().map(|c| c.source_tier).collect();
            let redundancy = tiers.len() as u32;
            let best = group
                .into_iter()
                .min_by(|a, b| tie_break(a, b))
                .expect("groups are non-empty");
            RankedSolution {
                score: Ratio::new(2 * best.source_tier.weight() + redundancy - 1, 2),
                candidate: best.clone(),
                redundancy,
            }
        })
        .collect();

    solutions.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then_with(|| tie_break(&a.candidate, &b.candidate))
    });
    solutions.truncate(k);
    RetrievedContext {
        empty_marker: solutions.is_empty(),
        solutions,
    }
}
