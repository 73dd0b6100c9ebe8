//! Static-analysis issue revision pipeline.
//!
//! Scan reports are ingested, planned into per-category or comprehensive
//! sub-plans, revised file by file through tiered language models with
//! optional retrieved context, compared against the originals and handed
//! to human review.

pub mod compare;
pub mod error;
pub mod gateway;
pub mod ingest;
pub mod numeric;
pub mod orchestrator;
pub mod par;
pub mod prompt;
pub mod rag;
pub mod report;
pub mod review;
pub mod triage;

pub use error::{Error, Result};
