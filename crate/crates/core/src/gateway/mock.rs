//! Deterministic provider for hermetic runs.
//!
//! Fixtures live in `<dir>/mock.json`:
//!
//! ```json
//! {
//!   "responses": { "<fixture id>": { "text": "...", "input_tokens": 1, "output_tokens": 2 } },
//!   "models": {
//!     "gpt-3.5-turbo": [
//!       { "requires": "issue message", "find": "old", "replace": "new" },
//!       { "requires": "issue message", "delete_lines_containing": "// TODO" }
//!     ]
//!   }
//! }
//! ```
//!
//! A request whose fixture id (see [`MockProvider::fixture_id`]) is listed
//! under `responses` gets that reply verbatim. Otherwise the model's rewrite
//! script is applied to the file embedded in the prompt: a rule fires only
//! when its `requires` text appears in the prompt's issue list. Usage is
//! `ceil(chars / 4)` of prompt and reply.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::provider::{Provider, ProviderError, ProviderReply, ProviderRequest};
use crate::error::{Error, Result};
use crate::prompt::embedded_file;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    #[serde(default)]
    pub requires: Option<String>,
    #[serde(default)]
    pub find: Option<String>,
    #[serde(default)]
    pub replace: Option<String>,
    #[serde(default)]
    pub delete_lines_containing: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockFixtures {
    #[serde(default)]
    pub responses: BTreeMap<String, ProviderReply>,
    #[serde(default)]
    pub models: BTreeMap<String, Vec<Rewrite>>,
}

#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    fixtures: MockFixtures,
}

impl MockProvider {
    pub fn new(fixtures: MockFixtures) -> Self {
        MockProvider { fixtures }
    }

    /// Reads `<dir>/mock.json`.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("mock.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(MockProvider::new(serde_json::from_str(&text)?))
    }

    /// SHA-256 over model, system and user text.
    pub fn fixture_id(request: &ProviderRequest) -> String {
        let mut hasher = Sha256::new();
        for part in [&request.model, &request.system, &request.user] {
            hasher.update(part.as_bytes());
            hasher.update([0]);
        }
        hex::encode(hasher.finalize())
    }
}

fn issue_section(user: &str) -> &str {
    let start = user.find("\nIssues:\n").map_or(0, |i| i + 1);
    let end = user[start..]
        .find("\nRetrieved context:\n")
        .map_or(user.len(), |i| start + i);
    &user[start..end]
}

fn apply(rule: &Rewrite, text: String) -> String {
    let mut text = match (&rule.find, &rule.replace) {
        (Some(find), replace) if !find.is_empty() => {
            text.replace(find.as_str(), replace.as_deref().unwrap_or(""))
        }
        _ => text,
    };
    if let Some(needle) = rule
        .delete_lines_containing
        .as_deref()
        .filter(|n| !n.is_empty())
    {
        text = text
            .split_inclusive('\n')
            .filter(|line| !line.contains(needle))
            .collect();
    }
    text
}

impl Provider for MockProvider {
    fn complete(
        &self,
        request: &ProviderRequest,
    ) -> std::result::Result<ProviderReply, ProviderError> {
        let id = Self::fixture_id(request);
        if let Some(reply) = self.fixtures.responses.get(&id) {
            return Ok(reply.clone());
        }
        let rules = self.fixtures.models.get(&request.model).ok_or_else(|| {
            ProviderError::Fatal(format!(
                "no fixture {id} and no script for model {}",
                request.model
            ))
        })?;
        let original = embedded_file(&request.user)
            .ok_or_else(|| ProviderError::Fatal("prompt carries no original file".into()))?;
        let issues = issue_section(&request.user);
        let revised = rules
            .iter()
            .filter(|r| r.requires.as_deref().is_none_or(|m| issues.contains(m)))
            .fold(original.to_string(), |text, rule| apply(rule, text));
        let language = request
            .user
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("Language: "))
            .unwrap_or("");
        let text = format!("```{language}\n{revised}```\n");
        let prompt_chars = request.system.chars().count() + request.user.chars().count();
        Ok(ProviderReply {
            input_tokens: prompt_chars.div_ceil(4) as u64,
            output_tokens: text.chars().count().div_ceil(4) as u64,
            text,
        })
    }
}
