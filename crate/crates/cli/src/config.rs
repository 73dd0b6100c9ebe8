//! Run configuration: a TOML file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use issuefix_core::gateway::TierRef;
use issuefix_core::numeric::Money;
use issuefix_core::triage::{Strategy, DEFAULT_OUTPUT_TEMPLATE};
use issuefix_core::Error;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub root: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub reports_dir: Option<PathBuf>,
    pub strategy: Option<String>,
    pub rag: Option<bool>,
    pub k: Option<usize>,
    pub window: Option<u32>,
    pub workers: Option<usize>,
    pub output_root_template: Option<String>,
    pub providers: Option<String>,
    /// Fixture directory for `providers = "mock"`.
    pub mock_dir: Option<PathBuf>,
    pub sources: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub review_all: Option<bool>,
    pub http: Option<HttpConfig>,
    #[serde(default)]
    pub tiers: Vec<TierConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierConfig {
    pub name: String,
    pub input_price: String,
    pub output_price: String,
    pub requests_per_minute: Option<u32>,
}

impl FileConfig {
    /// Reads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.root,
            &mut cfg.report,
            &mut cfg.rules,
            &mut cfg.reports_dir,
            &mut cfg.mock_dir,
            &mut cfg.sources,
            &mut cfg.examples,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Providers {
    /// Scripted provider reading `<dir>/mock.json`.
    Mock(PathBuf),
    Http {
        endpoint: String,
        api_key_env: Option<String>,
    },
}

pub const MOCK_PROVIDER: &str = "mock";
pub const HTTP_PROVIDER: &str = "http";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub root: PathBuf,
    pub report: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub reports_dir: Option<PathBuf>,
    pub strategy: Strategy,
    pub rag: bool,
    pub k: usize,
    pub window: u32,
    pub workers: usize,
    pub output_root_template: String,
    pub providers: Providers,
    pub sources: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub out: PathBuf,
    pub review_all: bool,
    pub tiers: Vec<TierRef>,
    pub requests_per_minute: Vec<Option<u32>>,
}

/// Flag values; `None` defers to the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub root: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub reports_dir: Option<PathBuf>,
    pub strategy: Option<String>,
    pub rag: Option<bool>,
    pub k: Option<usize>,
    pub window: Option<u32>,
    pub workers: Option<usize>,
    pub providers: Option<String>,
    pub sources: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub review_all: Option<bool>,
}

fn default_tiers() -> Vec<TierConfig> {
    vec![
        TierConfig {
            name: "gpt-3.5-turbo".into(),
            input_price: "0.0005".into(),
            output_price: "0.0015".into(),
            requests_per_minute: None,
        },
        TierConfig {
            name: "gpt-4o".into(),
            input_price: "0.005".into(),
            output_price: "0.015".into(),
            requests_per_minute: None,
        },
    ]
}

impl RunConfig {
    /// Merges file and flags, collecting every problem into one error.
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self, Error> {
        let mut problems = Vec::new();

        let root = flags.root.or(file.root);
        let root = match root {
            Some(r) if r.is_dir() => r,
            Some(r) => {
                problems.push(format!("root {} is not a directory", r.display()));
                r
            }
            None => {
                problems.push("no project root given (--root)".into());
                PathBuf::new()
            }
        };
        let report = flags.report.or(file.report);
        if let Some(r) = &report {
            if !r.is_file() {
                problems.push(format!("report {} does not exist", r.display()));
            }
        }
        let rules = flags.rules.or(file.rules);
        let reports_dir = flags.reports_dir.or(file.reports_dir);
        if rules.is_none() && reports_dir.is_none() {
            problems.push("no analyzer for re-scans: give --rules or --reports-dir".into());
        }
        for (what, p) in [("rules", &rules), ("reports dir", &reports_dir)] {
            if let Some(p) = p {
                if !p.exists() {
                    problems.push(format!("{what} {} does not exist", p.display()));
                }
            }
        }

        let strategy = flags
            .strategy
            .or(file.strategy)
            .unwrap_or_else(|| "divided".into());
        let strategy = strategy.parse::<Strategy>().unwrap_or_else(|e| {
            problems.push(e.to_string());
            Strategy::Divided
        });

        let k = flags.k.or(file.k).unwrap_or(issuefix_core::rag::DEFAULT_K);
        if k == 0 {
            problems.push("k must be at least 1".into());
        }
        let workers = flags
            .workers
            .or(file.workers)
            .unwrap_or(issuefix_core::orchestrator::DEFAULT_WORKERS);
        if workers == 0 {
            problems.push("workers must be at least 1".into());
        }
        let output_root_template = file
            .output_root_template
            .unwrap_or_else(|| DEFAULT_OUTPUT_TEMPLATE.to_string());
        for placeholder in ["{root}", "{label}", "{tier}"] {
            if !output_root_template.contains(placeholder) {
                problems.push(format!("output_root_template lacks {placeholder}"));
            }
        }

        let providers = match flags.providers.or(file.providers).as_deref() {
            None | Some("mock") => Providers::Mock(
                file.mock_dir
                    .clone()
                    .unwrap_or_else(|| PathBuf::from("mock")),
            ),
            Some(s) if s.starts_with("mock=") => {
                Providers::Mock(PathBuf::from(&s["mock=".len()..]))
            }
            Some("http") => match &file.http {
                Some(h) => Providers::Http {
                    endpoint: h.endpoint.clone(),
                    api_key_env: h.api_key_env.clone(),
                },
                None => {
                    problems.push(
                        "--providers http needs an [http] endpoint in the config file".into(),
                    );
                    Providers::Mock(PathBuf::new())
                }
            },
            Some(other) => {
                problems.push(format!(
                    "unknown providers {other:?}; use mock, mock=DIR or http"
                ));
                Providers::Mock(PathBuf::new())
            }
        };
        if let Providers::Mock(dir) = &providers {
            if !dir.as_os_str().is_empty() && !dir.join("mock.json").is_file() {
                problems.push(format!(
                    "mock fixtures {} not found",
                    dir.join("mock.json").display()
                ));
            }
        }
        let provider_id = match providers {
            Providers::Mock(_) => MOCK_PROVIDER,
            Providers::Http { .. } => HTTP_PROVIDER,
        };

        let tier_configs = if file.tiers.is_empty() {
            default_tiers()
        } else {
            file.tiers
        };
        let mut tiers = Vec::new();
        let mut requests_per_minute = Vec::new();
        for (i, t) in tier_configs.iter().enumerate() {
            let price = |label: &str, raw: &str, problems: &mut Vec<String>| {
                raw.parse::<Money>().unwrap_or_else(|e| {
                    problems.push(format!("tier {}: {label}: {e}", t.name));
                    Money::zero()
                })
            };
            let input = price("input_price", &t.input_price, &mut problems);
            let output = price("output_price", &t.output_price, &mut problems);
            tiers.push(TierRef::new(&t.name, provider_id, input, output, i as u32));
            requests_per_minute.push(t.requests_per_minute);
        }
        if let Err(e) = TierRef::schedule(&tiers) {
            problems.push(e.to_string());
        }

        let sources = flags.sources.or(file.sources);
        if let Some(s) = &sources {
            if !s.is_file() {
                problems.push(format!("sources {} does not exist", s.display()));
            }
        }
        let examples = flags.examples.or(file.examples);
        if let Some(e) = &examples {
            if !e.is_file() {
                problems.push(format!("examples {} does not exist", e.display()));
            }
        }

        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(RunConfig {
            root,
            report,
            rules,
            reports_dir,
            strategy,
            rag: flags.rag.or(file.rag).unwrap_or(true),
            k,
            window: flags
                .window
                .or(file.window)
                .unwrap_or(issuefix_core::compare::DEFAULT_WINDOW),
            workers,
            output_root_template,
            providers,
            sources,
            examples,
            out: flags
                .out
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            review_all: flags.review_all.or(file.review_all).unwrap_or(false),
            tiers,
            requests_per_minute,
        })
    }
}
