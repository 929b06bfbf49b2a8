//! Scripted protocol runs with a full wire trace.
//!
//! [`Harness`] pushes every message through `encode`/`decode` before the
//! receiving side sees it, stamps it with a logical clock that advances by
//! one per wire message, and records it as a [`TraceEvent`].
//! [`verify_protocols`] runs the scenario suite over all four protocols.

use serde::{Deserialize, Serialize};

use super::center::{
    decode_captcha_nonce, decode_hash_nonce, decode_key, encode_hash_nonce, encode_nonce, CenterConfig,
    CenterDecision, MessageCenter, RejectReason, SubmitOutcome,
};
use super::crypto::{CryptoProvider, FaultyProvider, KeyId, SignatureFault, ToyProvider, VerifyKey};
use super::sender::{AbortReason, Credentials, SenderAgent, StoredSubmission};
use super::wire::{PrincipalId, Protocol, TokenKey, WireMessage};
use crate::corpus::SenderKind;

pub const CENTER: PrincipalId = PrincipalId(1);
pub const SENDER: PrincipalId = PrincipalId(100);
pub const RECIPIENT: PrincipalId = PrincipalId(200);
pub const OTHER_RECIPIENT: PrincipalId = PrincipalId(201);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    SenderToCenter,
    CenterToSender,
    CenterToRecipient,
    /// Local decision with nothing on the wire.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: u64,
    pub direction: Direction,
    pub protocol: Protocol,
    /// `M1`, `M2`, `M3`, `deliver`, `reject` or `abort`.
    pub msg: String,
    /// Hex of the encoded frame, for wire messages.
    pub wire: Option<String>,
    pub fields: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Delivered {
        #[serde(with = "hex::serde")]
        payload: Vec<u8>,
    },
    Rejected {
        reason: RejectReason,
    },
    Aborted {
        reason: AbortReason,
    },
    /// Exchange stopped after M2.
    Challenged,
}

impl Outcome {
    pub fn delivered(payload: &[u8]) -> Self {
        Outcome::Delivered {
            payload: payload.to_vec(),
        }
    }

    pub fn from_decision(d: CenterDecision) -> Self {
        match d {
            CenterDecision::Deliver(d) => Outcome::Delivered { payload: d.payload },
            CenterDecision::Reject(reason) => Outcome::Rejected { reason },
            CenterDecision::ChallengeSent => Outcome::Challenged,
        }
    }
}

/// One center and one sender-side provider sharing a key world.
pub struct Harness<C, S> {
    pub center: MessageCenter<C>,
    pub sender_crypto: S,
    pub now: u64,
    pub events: Vec<TraceEvent>,
    /// Hops so far: one per wire message plus one per delivery to R.
    pub hops: u32,
    /// When false, events are not recorded (hops still are).
    pub record: bool,
}

impl Harness<ToyProvider, ToyProvider> {
    pub fn toy(seed: u64, config: CenterConfig) -> Self {
        let world = ToyProvider::new(seed);
        Harness::new(world.clone(), world, config)
    }
}

impl<C: CryptoProvider, S: CryptoProvider> Harness<C, S> {
    pub fn new(center_crypto: C, sender_crypto: S, config: CenterConfig) -> Self {
        Harness {
            center: MessageCenter::new(CENTER, center_crypto, config),
            sender_crypto,
            now: 0,
            events: Vec::new(),
            hops: 0,
            record: true,
        }
    }

    /// A sender with `K_c` and `K_m` installed.
    pub fn agent(&self, kind: SenderKind) -> SenderAgent {
        SenderAgent::new(
            SENDER,
            kind,
            self.center.captcha_key(),
            Some(self.center.verify_key()),
        )
    }

    fn wire(&mut self, direction: Direction, msg: &WireMessage) -> WireMessage {
        let bytes = msg.encode();
        let decoded = WireMessage::decode(&bytes).expect("encoded frame decodes");
        debug_assert_eq!(&decoded, msg);
        self.hops += 1;
        if !self.record {
            self.now += 1;
            return decoded;
        }
        self.events.push(TraceEvent {
            time: self.now,
            direction,
            protocol: msg.protocol(),
            msg: format!("M{}", msg.index()),
            wire: Some(hex::encode(&bytes)),
            fields: serde_json::to_value(msg).expect("wire message serializes"),
        });
        self.now += 1;
        decoded
    }

    fn note(&mut self, direction: Direction, protocol: Protocol, msg: &str, fields: impl FnOnce() -> serde_json::Value) {
        if direction == Direction::CenterToRecipient {
            self.hops += 1;
        }
        if !self.record {
            return;
        }
        let fields = fields();
        self.events.push(TraceEvent {
            time: self.now,
            direction,
            protocol,
            msg: msg.to_string(),
            wire: None,
            fields,
        });
    }

    /// Sends M1 and, when the center answers with one, delivers M2.
    pub fn submit(&mut self, protocol: Protocol, agent: &SenderAgent, stored: &StoredSubmission) -> SubmitOutcome {
        let m1 = self.wire(Direction::SenderToCenter, &agent.submit(protocol, stored));
        self.submit_raw(protocol, &m1)
    }

    /// Hands an already-sent M1 to the center.
    pub fn submit_raw(&mut self, protocol: Protocol, m1: &WireMessage) -> SubmitOutcome {
        let outcome = self.center.on_submit(protocol, m1, self.now);
        match &outcome {
            SubmitOutcome::Challenge(m2) => {
                let m2 = self.wire(Direction::CenterToSender, m2);
                SubmitOutcome::Challenge(m2)
            }
            SubmitOutcome::Deliver(d) => {
                self.note(
                    Direction::CenterToRecipient,
                    protocol,
                    "deliver",
                    || serde_json::to_value(d).expect("delivery serializes"),
                );
                outcome
            }
            SubmitOutcome::Reject(r) => {
                self.note(Direction::Local, protocol, "reject", || serde_json::json!({ "reason": r }));
                outcome
            }
        }
    }

    /// Sends an M3 (or token resubmission) and records the center's decision.
    pub fn respond(&mut self, protocol: Protocol, m3: &WireMessage) -> CenterDecision {
        let m3 = self.wire(Direction::SenderToCenter, m3);
        let decision = self.center.on_response(protocol, &m3, self.now);
        match &decision {
            CenterDecision::Deliver(d) => self.note(
                Direction::CenterToRecipient,
                protocol,
                "deliver",
                || serde_json::to_value(d).expect("delivery serializes"),
            ),
            CenterDecision::Reject(r) => {
                self.note(Direction::Local, protocol, "reject", || serde_json::json!({ "reason": r }))
            }
            CenterDecision::ChallengeSent => {}
        }
        decision
    }

    /// Sender handles M2 and, unless it aborts, sends M3.
    pub fn answer(
        &mut self,
        protocol: Protocol,
        agent: &SenderAgent,
        challenge: &WireMessage,
        stored: &StoredSubmission,
        decoded: bool,
    ) -> (Outcome, Option<Credentials>) {
        match agent.on_challenge(&self.sender_crypto, challenge, stored, decoded) {
            Ok(reply) => {
                let d = self.respond(protocol, &reply.response);
                (Outcome::from_decision(d), reply.credentials)
            }
            Err(reason) => {
                self.note(Direction::Local, protocol, "abort", || serde_json::json!({ "reason": reason }));
                (Outcome::Aborted { reason }, None)
            }
        }
    }

    /// Full M1/M2/M3 round.
    pub fn exchange(
        &mut self,
        protocol: Protocol,
        agent: &SenderAgent,
        stored: &StoredSubmission,
        decoded: bool,
    ) -> (Outcome, Option<Credentials>) {
        match self.submit(protocol, agent, stored) {
            SubmitOutcome::Challenge(m2) => self.answer(protocol, agent, &m2, stored, decoded),
            SubmitOutcome::Deliver(d) => (Outcome::Delivered { payload: d.payload }, None),
            SubmitOutcome::Reject(reason) => (Outcome::Rejected { reason }, None),
        }
    }

    /// What a CAPTCHA solver learns from M2: `K_ms` and, for P1/P3, `N`.
    pub fn solve(&self, challenge: &WireMessage) -> Option<(KeyId, Option<u64>)> {
        let open = |env| {
            self.sender_crypto
                .decrypt(self.center.captcha_key().0, env)
                .and_then(|b| decode_key(&b))
        };
        match challenge {
            WireMessage::ChallengeP1 { captcha, body, .. } => {
                let k = open(captcha)?;
                let (_, n) = decode_hash_nonce(&self.sender_crypto.decrypt(k, body)?)?;
                Some((k, Some(n)))
            }
            WireMessage::ChallengeP2 { captcha, .. } => Some((open(captcha)?, None)),
            WireMessage::ChallengeP3 { signed, .. } => {
                let (captcha, n) = decode_captcha_nonce(&signed.body)?;
                Some((open(&captcha)?, Some(n)))
            }
            WireMessage::ChallengeP4 { token, .. } => match &token.key {
                TokenKey::Captcha(env) => Some((open(env)?, None)),
                TokenKey::Clear(_) => None,
            },
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub protocol: Protocol,
    pub passed: bool,
    pub expected: Outcome,
    pub actual: Outcome,
    /// Failed side condition, if any.
    pub note: Option<String>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub scenarios: Vec<ScenarioResult>,
}

impl ProtocolReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

struct Run {
    expected: Outcome,
    actual: Outcome,
    note: Option<String>,
    trace: Vec<TraceEvent>,
}

fn check(cond: bool, msg: &str) -> Option<String> {
    (!cond).then(|| msg.to_string())
}

const PAYLOAD: &[u8] = b"see you at eight";
const OTHER_PAYLOAD: &[u8] = b"buy cheap pills now";

fn stored(payload: &[u8]) -> StoredSubmission {
    StoredSubmission {
        recipient: RECIPIENT,
        payload: payload.to_vec(),
    }
}

fn expect_challenge(outcome: SubmitOutcome) -> WireMessage {
    match outcome {
        SubmitOutcome::Challenge(m2) => m2,
        other => panic!("expected a challenge, got {other:?}"),
    }
}

fn honest(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let (actual, _) = h.exchange(p, &agent, &stored(PAYLOAD), true);
    let note = check(
        h.center.sessions().is_empty() && h.center.pending_count() == 0,
        "center state not cleared after delivery",
    );
    Run {
        expected: Outcome::delivered(PAYLOAD),
        actual,
        note,
        trace: h.events,
    }
}

fn bot(p: Protocol, seed: u64) -> Run {
    let ttl = CenterConfig::default().ttl;
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Bot);
    let (actual, _) = h.exchange(p, &agent, &stored(OTHER_PAYLOAD), agent.can_decode(false));
    let delivered = h.events.iter().any(|e| e.msg == "deliver");
    let created = h.events[0].time + 1;
    let collected = h.center.session_gc(created + ttl + 1);
    let note = check(!delivered, "bot message delivered")
        .or_else(|| check(collected == 1, "stale session or challenge not collected"));
    Run {
        expected: Outcome::Aborted {
            reason: AbortReason::CannotDecode,
        },
        actual,
        note,
        trace: h.events,
    }
}

/// A third party submits `(S, R, P')` in S's name and substitutes the
/// resulting challenge for the one answering S's own submission.
fn tampered(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let forged = expect_challenge(h.submit(p, &agent, &stored(OTHER_PAYLOAD)));
    let _genuine = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    let (actual, _) = h.answer(p, &agent, &forged, &stored(PAYLOAD), true);
    Run {
        expected: Outcome::Aborted {
            reason: AbortReason::TamperedChallenge,
        },
        actual,
        note: None,
        trace: h.events,
    }
}

fn forged_challenge(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let mut m2 = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    match &mut m2 {
        WireMessage::ChallengeP3 { signed, .. } => signed.body[0] ^= 1,
        WireMessage::ChallengeP4 { signed_payload, .. } => signed_payload.body[0] ^= 1,
        _ => unreachable!("only signed challenges"),
    }
    let (actual, _) = h.answer(p, &agent, &m2, &stored(PAYLOAD), true);
    Run {
        expected: Outcome::Aborted {
            reason: AbortReason::UnknownSigner,
        },
        actual,
        note: None,
        trace: h.events,
    }
}

fn unknown_signer(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let mut agent = h.agent(SenderKind::Human);
    agent.center_key = Some(VerifyKey(h.center.verify_key().0 ^ 0x5eed));
    let (actual, _) = h.exchange(p, &agent, &stored(PAYLOAD), true);
    Run {
        expected: Outcome::Aborted {
            reason: AbortReason::UnknownSigner,
        },
        actual,
        note: None,
        trace: h.events,
    }
}

fn replayed_response(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let m2 = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    let reply = agent
        .on_challenge(&h.sender_crypto, &m2, &stored(PAYLOAD), true)
        .expect("honest challenge");
    let first = Outcome::from_decision(h.respond(p, &reply.response));
    let actual = Outcome::from_decision(h.respond(p, &reply.response));
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::UnknownSession,
        },
        actual,
        note: check(first == Outcome::delivered(PAYLOAD), "first response not delivered"),
        trace: h.events,
    }
}

fn duplicate_submit(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let a = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    let b = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    let records = h.center.sessions().len() + h.center.pending_count();
    let (actual, _) = h.answer(p, &agent, &b, &stored(PAYLOAD), true);
    let note = check(a == b, "duplicate M1 produced a different M2")
        .or_else(|| check(records == 1, "duplicate M1 created a second record"));
    Run {
        expected: Outcome::delivered(PAYLOAD),
        actual,
        note,
        trace: h.events,
    }
}

fn nonce_mismatch(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let m2 = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    let (key, nonce) = h.solve(&m2).expect("solvable challenge");
    let wrong = nonce.expect("stateful challenge carries a nonce").wrapping_add(2);
    let m3 = match p {
        Protocol::P1 => {
            let digest = super::center::submission_hash(&h.sender_crypto, SENDER, RECIPIENT, PAYLOAD);
            WireMessage::ResponseP1 {
                sender: SENDER,
                center: CENTER,
                body: h.sender_crypto.encrypt(key, &encode_hash_nonce(&digest, wrong)),
            }
        }
        _ => WireMessage::ResponseP3 {
            sender: SENDER,
            recipient: RECIPIENT,
            body: h.sender_crypto.encrypt(key, &encode_nonce(wrong)),
        },
    };
    let actual = Outcome::from_decision(h.respond(p, &m3));
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::NonceMismatch,
        },
        actual,
        note: None,
        trace: h.events,
    }
}

/// Answers so that M3 reaches the center `offset` ticks after the record
/// was created.
fn late_answer(p: Protocol, seed: u64, offset: u64) -> (Outcome, Vec<TraceEvent>) {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let m2 = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    let created = h.now - 1;
    h.now = created + offset - 1;
    let (actual, _) = h.answer(p, &agent, &m2, &stored(PAYLOAD), true);
    (actual, h.events)
}

fn session_boundary(p: Protocol, seed: u64) -> Run {
    let (actual, trace) = late_answer(p, seed, CenterConfig::default().ttl);
    Run {
        expected: Outcome::delivered(PAYLOAD),
        actual,
        note: None,
        trace,
    }
}

fn session_expired(p: Protocol, seed: u64) -> Run {
    let (actual, trace) = late_answer(p, seed, CenterConfig::default().ttl + 1);
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::UnknownSession,
        },
        actual,
        note: None,
        trace,
    }
}

/// Honest exchange, then a token-only resubmission processed `offset` ticks
/// after the token was issued, optionally altered first.
fn token_follow_up<C: CryptoProvider, S: CryptoProvider>(
    mut h: Harness<C, S>,
    p: Protocol,
    offset: u64,
    recipient: PrincipalId,
    alter: impl FnOnce(&mut Credentials),
) -> (Outcome, Option<String>, Vec<TraceEvent>) {
    let agent = h.agent(SenderKind::Human);
    let (first, creds) = h.exchange(p, &agent, &stored(PAYLOAD), true);
    let mut creds = creds.expect("token protocols hand out credentials");
    let issued = creds.token.issued_at;
    alter(&mut creds);
    h.now = issued + offset - 1;
    let m = agent.resubmit(&h.sender_crypto, p, &creds, recipient, OTHER_PAYLOAD);
    let actual = Outcome::from_decision(h.respond(p, &m));
    let note = check(first == Outcome::delivered(PAYLOAD), "initial exchange failed");
    (actual, note, h.events)
}

fn token_reuse_within_ttl(p: Protocol, seed: u64) -> Run {
    let h = Harness::toy(seed, CenterConfig::default());
    let (actual, note, trace) = token_follow_up(h, p, CenterConfig::default().ttl, RECIPIENT, |_| {});
    Run {
        expected: Outcome::delivered(OTHER_PAYLOAD),
        actual,
        note,
        trace,
    }
}

fn token_reuse_after_ttl(p: Protocol, seed: u64) -> Run {
    let h = Harness::toy(seed, CenterConfig::default());
    let (actual, note, trace) = token_follow_up(h, p, CenterConfig::default().ttl + 1, RECIPIENT, |_| {});
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::TokenExpired,
        },
        actual,
        note,
        trace,
    }
}

fn extend_token(c: &mut Credentials) {
    c.token.issued_at += 1000;
}

fn forged_token(p: Protocol, seed: u64) -> Run {
    let h = Harness::toy(seed, CenterConfig::default());
    let (actual, note, trace) = token_follow_up(h, p, 5, RECIPIENT, extend_token);
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::BadSignature,
        },
        actual,
        note,
        trace,
    }
}

fn token_wrong_pair(p: Protocol, seed: u64) -> Run {
    let h = Harness::toy(seed, CenterConfig::default());
    let (actual, note, trace) = token_follow_up(h, p, 5, OTHER_RECIPIENT, |_| {});
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::HashMismatch,
        },
        actual,
        note,
        trace,
    }
}

/// Fault injection: a center whose verifier accepts everything admits the
/// forged token that the honest center rejects.
fn fault_accept_all(p: Protocol, seed: u64) -> Run {
    let world = ToyProvider::new(seed);
    let h = Harness::new(
        FaultyProvider::new(world.clone(), SignatureFault::AcceptAll),
        world,
        CenterConfig::default(),
    );
    let (actual, note, trace) = token_follow_up(h, p, 5, RECIPIENT, extend_token);
    Run {
        expected: Outcome::delivered(OTHER_PAYLOAD),
        actual,
        note,
        trace,
    }
}

/// Fault injection: a handset whose verifier rejects everything refuses
/// every signed challenge.
fn fault_reject_all(p: Protocol, seed: u64) -> Run {
    let world = ToyProvider::new(seed);
    let mut h = Harness::new(
        world.clone(),
        FaultyProvider::new(world, SignatureFault::RejectAll),
        CenterConfig::default(),
    );
    let agent = h.agent(SenderKind::Human);
    let (actual, _) = h.exchange(p, &agent, &stored(PAYLOAD), true);
    Run {
        expected: Outcome::Aborted {
            reason: AbortReason::UnknownSigner,
        },
        actual,
        note: None,
        trace: h.events,
    }
}

/// First M3 carries a payload other than the one submitted in M1.
fn payload_swap(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let m2 = expect_challenge(h.submit(p, &agent, &stored(PAYLOAD)));
    let reply = agent
        .on_challenge(&h.sender_crypto, &m2, &stored(PAYLOAD), true)
        .expect("honest challenge");
    let creds = reply.credentials.expect("token protocols hand out credentials");
    let m3 = agent.resubmit(&h.sender_crypto, p, &creds, RECIPIENT, OTHER_PAYLOAD);
    let actual = Outcome::from_decision(h.respond(p, &m3));
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::HashMismatch,
        },
        actual,
        note: None,
        trace: h.events,
    }
}

fn overload(p: Protocol, seed: u64) -> Run {
    let config = CenterConfig {
        capacity: 1,
        ..CenterConfig::default()
    };
    let mut h = Harness::toy(seed, config);
    let agent = h.agent(SenderKind::Human);
    let first = h.submit(p, &agent, &stored(PAYLOAD));
    let actual = match h.submit(p, &agent, &stored(OTHER_PAYLOAD)) {
        SubmitOutcome::Reject(reason) => Outcome::Rejected { reason },
        other => Outcome::from_decision(other.decision()),
    };
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::Overload,
        },
        actual,
        note: check(matches!(first, SubmitOutcome::Challenge(_)), "first submission not challenged"),
        trace: h.events,
    }
}

fn wrong_protocol(p: Protocol, seed: u64) -> Run {
    let mut h = Harness::toy(seed, CenterConfig::default());
    let agent = h.agent(SenderKind::Human);
    let other = Protocol::ALL[(p.tag() as usize) % 4];
    let m1 = agent.submit(other, &stored(PAYLOAD));
    let actual = Outcome::from_decision(h.center.on_submit(p, &m1, h.now).decision());
    Run {
        expected: Outcome::Rejected {
            reason: RejectReason::ProtocolMismatch,
        },
        actual,
        note: None,
        trace: h.events,
    }
}

fn session_reuse(p: Protocol, seed: u64) -> Run {
    let config = CenterConfig {
        session_reuse: true,
        ..CenterConfig::default()
    };
    let mut h = Harness::toy(seed, config);
    let agent = h.agent(SenderKind::Human);
    let (first, _) = h.exchange(p, &agent, &stored(PAYLOAD), true);
    let actual = match h.submit(p, &agent, &stored(OTHER_PAYLOAD)) {
        SubmitOutcome::Deliver(d) => Outcome::Delivered { payload: d.payload },
        other => Outcome::from_decision(other.decision()),
    };
    Run {
        expected: Outcome::delivered(OTHER_PAYLOAD),
        actual,
        note: check(first == Outcome::delivered(PAYLOAD), "initial exchange failed"),
        trace: h.events,
    }
}

fn determinism(p: Protocol, seed: u64) -> Run {
    let a = honest(p, seed);
    let b = honest(p, seed);
    let wires = |r: &Run| r.trace.iter().map(|e| e.wire.clone()).collect::<Vec<_>>();
    let note = check(wires(&a) == wires(&b) && a.trace == b.trace, "traces differ between runs");
    Run {
        note: note.or(a.note),
        ..a
    }
}

type ScenarioFn = fn(Protocol, u64) -> Run;

const STATEFUL: &[Protocol] = &[Protocol::P1, Protocol::P3];
const TOKEN: &[Protocol] = &[Protocol::P2, Protocol::P4];
const SIGNED: &[Protocol] = &[Protocol::P3, Protocol::P4];
const ALL: &[Protocol] = &Protocol::ALL;

const SCENARIOS: &[(&str, &[Protocol], ScenarioFn)] = &[
    ("honest_human_delivers", ALL, honest),
    ("bot_cannot_decode", ALL, bot),
    (
        "tampered_challenge_detected",
        &[Protocol::P1, Protocol::P2, Protocol::P4],
        tampered,
    ),
    ("forged_challenge_signature", SIGNED, forged_challenge),
    ("unknown_signer", SIGNED, unknown_signer),
    ("replayed_response", STATEFUL, replayed_response),
    ("duplicate_submit_idempotent", ALL, duplicate_submit),
    ("nonce_mismatch", STATEFUL, nonce_mismatch),
    ("session_ttl_boundary_honored", STATEFUL, session_boundary),
    ("session_expired", STATEFUL, session_expired),
    ("token_reuse_within_ttl", TOKEN, token_reuse_within_ttl),
    ("token_reuse_after_ttl", TOKEN, token_reuse_after_ttl),
    ("forged_token", TOKEN, forged_token),
    ("token_wrong_pair", TOKEN, token_wrong_pair),
    ("payload_swap_in_response", TOKEN, payload_swap),
    ("overload", ALL, overload),
    ("wrong_protocol", ALL, wrong_protocol),
    ("session_reuse_skips_challenge", STATEFUL, session_reuse),
    ("fault_accept_all_admits_forgery", TOKEN, fault_accept_all),
    ("fault_reject_all_aborts", SIGNED, fault_reject_all),
    ("deterministic_trace", ALL, determinism),
];

/// Runs the scenario suite against the toy provider keyed by `seed`.
pub fn verify_protocols(seed: u64) -> ProtocolReport {
    verify_protocols_for(seed, ALL)
}

pub fn verify_protocols_for(seed: u64, protocols: &[Protocol]) -> ProtocolReport {
    let mut scenarios = Vec::new();
    for &(name, applies, run) in SCENARIOS {
        for &p in applies.iter().filter(|p| protocols.contains(p)) {
            let r = run(p, seed);
            scenarios.push(ScenarioResult {
                name: name.to_string(),
                protocol: p,
                passed: r.expected == r.actual && r.note.is_none(),
                expected: r.expected,
                actual: r.actual,
                note: r.note,
                trace: r.trace,
            });
        }
    }
    let passed = scenarios.iter().filter(|s| s.passed).count();
    ProtocolReport {
        seed,
        passed,
        failed: scenarios.len() - passed,
        scenarios,
    }
}
