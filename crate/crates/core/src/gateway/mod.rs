//! Provider-agnostic prompt submission, reply extraction and cost ledgering.

mod extract;
mod limiter;
mod mock;
mod provider;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::extract_code;
pub use limiter::{RateLimiter, DEFAULT_REQUESTS_PER_MINUTE};
pub use mock::{MockFixtures, MockProvider, Rewrite};
pub use provider::{HttpProvider, Provider, ProviderError, ProviderReply, ProviderRequest};

use crate::error::{Error, Result};
use crate::numeric::Money;
use crate::prompt::Prompt;

/// One model in the escalation schedule. Prices are per 1,000 tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TierRef {
    pub name: String,
    pub provider_id: String,
    pub input_price: Money,
    pub output_price: Money,
    pub order_index: u32,
}

impl TierRef {
    pub fn new(
        name: &str,
        provider_id: &str,
        input_price: Money,
        output_price: Money,
        order_index: u32,
    ) -> Self {
        TierRef {
            name: name.to_string(),
            provider_id: provider_id.to_string(),
            input_price,
            output_price,
            order_index,
        }
    }

    /// Validates a schedule and returns it ordered by `order_index`.
    pub fn schedule(tiers: &[TierRef]) -> Result<Vec<TierRef>> {
        if tiers.is_empty() {
            return Err(Error::EmptyTiers);
        }
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for t in tiers {
            if t.input_price.is_negative() || t.output_price.is_negative() {
                problems.push(format!("tier {} has a negative price", t.name));
            }
            if !seen.insert(t.order_index) {
                problems.push(format!("order_index {} is used twice", t.order_index));
            }
            if t.name.trim().is_empty() {
                problems.push("tier with empty name".to_string());
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidTier(problems.join("; ")));
        }
        let mut sorted = tiers.to_vec();
        sorted.sort_by_key(|t| t.order_index);
        Ok(sorted)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionResponse {
    pub raw_text: String,
    pub extracted_code: String,
    pub usage: Usage,
    pub tier: TierRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub file_location: String,
    pub tier: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: Money,
}

/// `in/1000 × input_price + out/1000 × output_price`, exactly.
pub fn cost_of(usage: Usage, tier: &TierRef) -> Money {
    let input = tier.input_price.times(usage.input_tokens);
    let output = tier.output_price.times(usage.output_tokens);
    (input + output).per(1000).expect("non-zero divisor")
}

pub fn record_cost(usage: Usage, tier: &TierRef, file_location: &str) -> CostRecord {
    CostRecord {
        file_location: file_location.to_string(),
        tier: tier.name.clone(),
        input_tokens: usage.input_tokens,
        output_tokens: usage.output_tokens,
        cost: cost_of(usage, tier),
    }
}

/// Append-only, thread-safe list of cost records.
#[derive(Debug, Default)]
pub struct Ledger {
    records: Mutex<Vec<CostRecord>>,
}

impl Ledger {
    pub fn append(&self, record: CostRecord) {
        self.records.lock().expect("ledger lock").push(record);
    }

    pub fn records(&self) -> Vec<CostRecord> {
        self.records.lock().expect("ledger lock").clone()
    }

    pub fn total(&self) -> Money {
        self.records
            .lock()
            .expect("ledger lock")
            .iter()
            .map(|r| &r.cost)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `attempt` (0-based): `base × 2^attempt`, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("no provider registered for {0:?}")]
    UnknownProvider(String),
    #[error("tier {tier}, file {file}: gave up after {attempts} attempts: {last}")]
    RetriesExhausted {
        tier: String,
        file: String,
        attempts: u32,
        last: String,
    },
    #[error("tier {tier}, file {file}: provider error: {message}")]
    Provider {
        tier: String,
        file: String,
        message: String,
    },
    #[error("tier {tier}, file {file}: unusable response: {reason}")]
    Unusable {
        tier: String,
        file: String,
        reason: String,
        usage: Usage,
    },
}

impl GatewayError {
    /// Tokens consumed before the failure, if the provider replied.
    pub fn usage(&self) -> Option<Usage> {
        match self {
            GatewayError::Unusable { usage, .. } => Some(*usage),
            _ => None,
        }
    }
}

struct Registered {
    provider: Arc<dyn Provider>,
    limiter: Option<Arc<RateLimiter>>,
}

/// Registry of providers keyed by provider id, plus the run ledger.
#[derive(Default)]
pub struct Gateway {
    providers: HashMap<String, Registered>,
    ledger: Ledger,
}

impl Gateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `provider`; `requests_per_minute` of `None` disables throttling.
    pub fn register(
        &mut self,
        provider_id: &str,
        provider: Arc<dyn Provider>,
        requests_per_minute: Option<u32>,
    ) {
        self.providers.insert(
            provider_id.to_string(),
            Registered {
                provider,
                limiter: requests_per_minute.map(|rpm| Arc::new(RateLimiter::new(rpm))),
            },
        );
    }

    pub fn has_provider(&self, provider_id: &str) -> bool {
        self.providers.contains_key(provider_id)
    }

    pub fn submit(
        &self,
        prompt: &Prompt,
        tier: &TierRef,
        policy: &RetryPolicy,
    ) -> std::result::Result<RevisionResponse, GatewayError> {
        let file = prompt.metadata.file_location.clone();
        let registered = self
            .providers
            .get(&tier.provider_id)
            .ok_or_else(|| GatewayError::UnknownProvider(tier.provider_id.clone()))?;
        let request = ProviderRequest {
            model: tier.name.clone(),
            system: prompt.system_text.clone(),
            user: prompt.user_text.clone(),
        };

        let mut attempt = 0u32;
        let reply = loop {
            if let Some(limiter) = &registered.limiter {
                limiter.acquire();
            }
            match registered.provider.complete(&request) {
                Ok(reply) => break reply,
                Err(ProviderError::Transient(message)) => {
                    if attempt >= policy.max_retries {
                        return Err(GatewayError::RetriesExhausted {
                            tier: tier.name.clone(),
                            file,
                            attempts: attempt + 1,
                            last: message,
                        });
                    }
                    tracing::debug!(tier = %tier.name, %file, attempt, "transient provider failure");
                    std::thread::sleep(policy.backoff(attempt));
                    attempt += 1;
                }
                Err(ProviderError::Malformed(reason)) => {
                    return Err(GatewayError::Unusable {
                        tier: tier.name.clone(),
                        file,
                        reason,
                        usage: Usage::default(),
                    })
                }
                Err(ProviderError::Fatal(message)) => {
                    return Err(GatewayError::Provider {
                        tier: tier.name.clone(),
                        file,
                        message,
                    })
                }
            }
        };

        let usage = Usage {
            input_tokens: reply.input_tokens,
            output_tokens: reply.output_tokens,
        };
        let unusable = |reason: String| GatewayError::Unusable {
            tier: tier.name.clone(),
            file: file.clone(),
            reason,
            usage,
        };
        let extracted = extract_code(&reply.text).map_err(|e| unusable(e.to_string()))?;
        if extracted.trim().is_empty() {
            return Err(unusable("empty payload".into()));
        }
        Ok(RevisionResponse {
            raw_text: reply.text,
            extracted_code: extracted,
            usage,
            tier: tier.clone(),
        })
    }

    /// Prices `usage` and appends the record to this gateway's ledger.
    pub fn record_cost(&self, usage: Usage, tier: &TierRef, file_location: &str) -> CostRecord {
        let record = record_cost(usage, tier, file_location);
        self.ledger.append(record.clone());
        record
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::PromptMetadata;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    impl Provider for Flaky {
        fn complete(
            &self,
            _: &ProviderRequest,
        ) -> std::result::Result<ProviderReply, ProviderError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(ProviderError::Transient("503".into()))
            } else {
                Ok(ProviderReply {
                    text: "```\nok\n```".into(),
                    input_tokens: 10,
                    output_tokens: 2,
                })
            }
        }
    }

    struct Fixed(&'static str);

    impl Provider for Fixed {
        fn complete(
            &self,
            _: &ProviderRequest,
        ) -> std::result::Result<ProviderReply, ProviderError> {
            Ok(ProviderReply {
                text: self.0.into(),
                input_tokens: 5,
                output_tokens: 5,
            })
        }
    }

    fn prompt() -> Prompt {
        Prompt {
            system_text: "s".into(),
            user_text: "u".into(),
            metadata: PromptMetadata {
                file_location: "a.js".into(),
                language: "javascript".into(),
                issue_count: 1,
                categories: vec![],
                context_included: false,
            },
        }
    }

    fn tier(provider: &str) -> TierRef {
        TierRef::new(
            "cheap",
            provider,
            "0.5".parse().unwrap(),
            "1.5".parse().unwrap(),
            0,
        )
    }

    fn gateway_with(provider: Arc<dyn Provider>) -> Gateway {
        let mut g = Gateway::new();
        g.register("p", provider, None);
        g
    }

    #[test]
    fn retries_then_succeeds() {
        let flaky = Arc::new(Flaky {
            failures: 2,
            calls: AtomicU32::new(0),
        });
        let g = gateway_with(flaky.clone());
        let r = g
            .submit(&prompt(), &tier("p"), &RetryPolicy::immediate(3))
            .unwrap();
        assert_eq!(r.extracted_code, "ok");
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retries_exhausted() {
        let flaky = Arc::new(Flaky {
            failures: 4,
            calls: AtomicU32::new(0),
        });
        let g = gateway_with(flaky.clone());
        let err = g
            .submit(&prompt(), &tier("p"), &RetryPolicy::immediate(3))
            .unwrap_err();
        assert!(matches!(
            err,
            GatewayError::RetriesExhausted { attempts: 4, .. }
        ));
        assert!(err.to_string().contains("a.js") && err.to_string().contains("cheap"));
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn unusable_reply() {
        let g = gateway_with(Arc::new(Fixed("```\na\n```\n```\nb\n```")));
        let err = g
            .submit(&prompt(), &tier("p"), &RetryPolicy::immediate(0))
            .unwrap_err();
        assert!(err.to_string().contains("unusable response"));
        assert_eq!(
            err.usage(),
            Some(Usage {
                input_tokens: 5,
                output_tokens: 5
            })
        );
        let g = gateway_with(Arc::new(Fixed("   ")));
        assert!(g
            .submit(&prompt(), &tier("p"), &RetryPolicy::immediate(0))
            .is_err());
    }

    #[test]
    fn unknown_provider() {
        let g = Gateway::new();
        assert!(matches!(
            g.submit(&prompt(), &tier("nope"), &RetryPolicy::default()),
            Err(GatewayError::UnknownProvider(_))
        ));
    }

    #[test]
    fn cost_formula() {
        let t = tier("p");
        assert_eq!(cost_of(Usage::default(), &t), Money::zero());
        let c = cost_of(
            Usage {
                input_tokens: 1000,
                output_tokens: 1000,
            },
            &t,
        );
        assert_eq!(c, "2".parse().unwrap());
    }

    #[test]
    fn ledger_is_additive() {
        let g = Gateway::new();
        let t = tier("p");
        let a = g.record_cost(
            Usage {
                input_tokens: 3,
                output_tokens: 7,
            },
            &t,
            "a",
        );
        let b = g.record_cost(
            Usage {
                input_tokens: 11,
                output_tokens: 0,
            },
            &t,
            "b",
        );
        assert_eq!(g.ledger().total(), a.cost.clone() + b.cost.clone());
        assert_eq!(g.ledger().records().len(), 2);
    }

    #[test]
    fn schedule_validation() {
        let mut a = tier("p");
        let mut b = tier("p");
        b.name = "strong".into();
        b.order_index = 1;
        let sorted = TierRef::schedule(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(sorted[0].name, "cheap");
        a.order_index = 1;
        assert!(TierRef::schedule(&[a.clone(), b.clone()]).is_err());
        a.order_index = 0;
        a.input_price = "-1".parse().unwrap();
        assert!(TierRef::schedule(&[a]).is_err());
        assert!(matches!(TierRef::schedule(&[]), Err(Error::EmptyTiers)));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(350),
        };
        assert_eq!(p.backoff(0), Duration::from_millis(100));
        assert_eq!(p.backoff(1), Duration::from_millis(200));
        assert_eq!(p.backoff(2), Duration::from_millis(350));
        assert_eq!(p.backoff(40), Duration::from_millis(350));
    }
}
