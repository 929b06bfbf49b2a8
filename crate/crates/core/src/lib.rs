//! Hybrid spam filtering for mobile message centers.
//!
//! A content-based filter scores every message with `κ = Pr(normal | message)`.
//! Two thresholds `h1 ≤ h2` split the score range into three regions:
//!
//! ```text
//!   0 ─────────── h1 ─────────────── h2 ─────────── 1
//!   │    Spam      │    Uncertain     │    Normal    │
//!   │ dropped at B │ challenge sender │ delivered    │
//! ```
//!
//! Messages in the uncertain band are resolved by a challenge-response round
//! trip between the sender (A) and the message center (B) before they may
//! reach the receiver (C). The crate provides:
//!
//! - [`corpus`]: synthetic corpora from a class-conditional beta mixture.
//! - [`classifier`]: binary and ternary threshold classification, region
//!   tabulation and confusion accounting.
//! - [`challenge`]: the four challenge-response protocols as state machines
//!   over a pluggable crypto provider, plus a scripted trace suite.
//! - [`simnet`]: an A/B/C hop-counting simulation of the hybrid pipeline.
//! - [`traffic`]: closed-form traffic accounting and an analytic oracle.
//! - [`experiments`]: threshold and spam-proportion sweeps with CSV/JSON
//!   reports.
//!
//! Runnable walkthroughs live in `crates/core/examples/`; the `hybridspam`
//! binary is a thin command-line wrapper over the same API.

pub mod challenge;
pub mod classifier;
pub mod corpus;
pub mod experiments;
pub mod rng;
pub mod simnet;
pub mod special;
pub mod traffic;

mod error;

pub use error::{Error, Result};

pub use classifier::{
    accuracy, classify_binary, classify_ternary, confusion_filtering, expected_confusion_hybrid,
    partition_corpus, ConfusionMatrix, Region, RegionCounts, ThresholdPair,
};
pub use corpus::{generate_corpus, ClassLabel, Corpus, Kappa, Message, MixtureParams, SenderKind};
pub use simnet::{run_corpus, run_message, Pathway, SimPolicy, SimReport};
pub use traffic::{
    analytic_expected_traffic, traffic_filtering_only, traffic_hybrid_expected, traffic_ratio,
    Accounting, TrafficBreakdown,
};
