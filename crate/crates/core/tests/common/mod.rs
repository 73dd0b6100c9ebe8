#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use issuefix_core::gateway::{Gateway, MockProvider, TierRef};
use issuefix_core::numeric::Money;
use issuefix_core::orchestrator::ToyAnalyzer;
use issuefix_core::rag::{load_fixture_sources, Retriever};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// The fixture schedule: prices per 1,000 tokens.
pub fn tiers() -> Vec<TierRef> {
    vec![
        TierRef::new(
            "gpt-3.5-turbo",
            "mock",
            "0.0005".parse().unwrap(),
            "0.0015".parse().unwrap(),
            0,
        ),
        TierRef::new(
            "gpt-4o",
            "mock",
            "0.005".parse().unwrap(),
            "0.015".parse().unwrap(),
            1,
        ),
    ]
}

pub fn money(s: &str) -> Money {
    s.parse().unwrap()
}

pub fn toy_analyzer() -> ToyAnalyzer {
    ToyAnalyzer::new(ToyAnalyzer::load_rules(&fixtures().join("toy_rules.json")).unwrap())
}

pub fn retriever() -> Retriever {
    Retriever::new(load_fixture_sources(&fixtures().join("sources.json")).unwrap())
}

pub fn mock_gateway() -> Gateway {
    let mut g = Gateway::new();
    g.register(
        "mock",
        Arc::new(MockProvider::load(&fixtures().join("mock")).unwrap()),
        None,
    );
    g
}
