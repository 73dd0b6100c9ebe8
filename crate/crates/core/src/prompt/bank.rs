use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::IssueCategory;

const BUILTIN: &str = include_str!("../../data/example_bank.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub category: IssueCategory,
    pub language: String,
    pub description: String,
    pub rationale: String,
    pub original: String,
    pub corrected: String,
}

/// Worked fixes keyed by (category, language tag).
///
/// File schema: `{"default_language": "code", "entries": [Example...]}`.
/// Every category needs at least one entry under the default language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleBank {
    pub default_language: String,
    pub entries: Vec<Example>,
}

impl ExampleBank {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("built-in example bank is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: ExampleBank =
            serde_json::from_str(text).map_err(|e| Error::ExampleBank(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let missing: Vec<&str> = IssueCategory::ALL
            .into_iter()
            .filter(|c| self.find(*c, &self.default_language).is_none())
            .map(IssueCategory::as_str)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::ExampleBank(format!(
                "no {} example for {}",
                self.default_language,
                missing.join(", ")
            )))
        }
    }

    fn find(&self, category: IssueCategory, language: &str) -> Option<&Example> {
        self.entries
            .iter()
            .find(|e| e.category == category && e.language == language)
    }

    /// One example per category, preferring `language` and falling back to
    /// the default language. Categories come out in canonical order.
    pub fn select_examples(&self, categories: &[IssueCategory], language: &str) -> Vec<&Example> {
        IssueCategory::ALL
            .into_iter()
            .filter(|c| categories.contains(c))
            .filter_map(|c| {
                self.find(c, language)
                    .or_else(|| self.find(c, &self.default_language))
            })
            .collect()
    }
}

/// Free-function form of [`ExampleBank::select_examples`].
pub fn select_examples<'a>(
    categories: &[IssueCategory],
    language: &str,
    bank: &'a ExampleBank,
) -> Vec<&'a Example> {
    bank.select_examples(categories, language)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_is_valid() {
        ExampleBank::builtin().validate().unwrap();
    }

    #[test]
    fn selection_counts() {
        let bank = ExampleBank::builtin();
        assert_eq!(
            select_examples(&[IssueCategory::Bug], "jsx", &bank).len(),
            1
        );
        let all = select_examples(&IssueCategory::ALL, "jsx", &bank);
        assert_eq!(all.len(), 3);
        assert_eq!(all[0].language, "jsx");
        assert_eq!(all[1].language, "code");
    }

    #[test]
    fn falls_back_to_default_language() {
        let mut bank = ExampleBank::builtin();
        bank.entries.retain(|e| e.language == "code");
        let picked = select_examples(&[IssueCategory::Vulnerability], "yaml", &bank);
        assert_eq!(picked.len(), 1);
        assert_eq!(picked[0].language, "code");
    }

    #[test]
    fn rejects_incomplete_bank() {
        let text = r#"{"default_language":"code","entries":[]}"#;
        let err = ExampleBank::from_json(text).unwrap_err();
        assert!(err.to_string().contains("BUG"));
    }
}
