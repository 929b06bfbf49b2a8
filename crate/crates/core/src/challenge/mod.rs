//! Challenge-response protocols between a sender and its message center.
//!
//! Every variant runs the same three messages:
//!
//! ```text
//!   S ── M1: S, R, P ─────────────▶ M
//!   S ◀────────────── M2: challenge ── M
//!   S ── M3: response ────────────▶ M ──▶ R
//! ```
//!
//! The challenge carries a session key `K_ms` sealed under the public CAPTCHA
//! key `K_c`; only a sender able to solve the CAPTCHA recovers it. Variants
//! differ in whether the center keeps per-session state (P1, P3) or hands out
//! signed tokens (P2, P4), and whether challenges are signed (P3, P4).
//!
//! [`center::MessageCenter`] and [`sender::SenderAgent`] are pure state
//! machines over a [`crypto::CryptoProvider`]; [`trace`] drives them through
//! scripted scenarios and records every wire message.

pub mod center;
pub mod crypto;
pub mod sender;
pub mod trace;
pub mod wire;

pub use center::{
    CaptchaKey, CenterConfig, CenterDecision, Delivery, MessageCenter, RejectReason, SessionRecord,
    SubmitOutcome,
};
pub use crypto::{CryptoProvider, FaultyProvider, SignatureFault, ToyProvider};
pub use sender::{AbortReason, Credentials, SenderAgent, SenderReply, StoredSubmission};
pub use trace::{verify_protocols, Harness, Outcome, ProtocolReport, ScenarioResult, TraceEvent};
pub use wire::{AuthToken, PrincipalId, Protocol, TokenKey, WireError, WireMessage};
