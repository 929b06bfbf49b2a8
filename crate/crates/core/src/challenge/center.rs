//! Message-center side of the protocols.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::crypto::{CryptoProvider, Digest, KeyId, Sealed, SigningKey, VerifyKey};
use super::wire::{AuthToken, FieldReader, FieldWriter, PrincipalId, Protocol, TokenKey, WireMessage};

pub const DEFAULT_TTL: u64 = 100;
pub const DEFAULT_CAPACITY: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterConfig {
    /// Lifetime of sessions and tokens in logical time units. A record
    /// created at `t` is honored up to and including `t + ttl`.
    pub ttl: u64,
    /// Maximum number of outstanding sessions and pending challenges.
    pub capacity: usize,
    /// Keep P1/P3 sessions after a successful response so the same
    /// sender/recipient pair skips the challenge until the session expires.
    pub session_reuse: bool,
}

impl Default for CenterConfig {
    fn default() -> Self {
        CenterConfig {
            ttl: DEFAULT_TTL,
            capacity: DEFAULT_CAPACITY,
            session_reuse: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Overload,
    UnknownSession,
    NonceMismatch,
    HashMismatch,
    TokenExpired,
    BadSignature,
    /// Message belongs to another protocol or is addressed elsewhere.
    ProtocolMismatch,
    /// A ciphertext did not open under the key it claims.
    Undecryptable,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::Overload => "overload",
            RejectReason::UnknownSession => "unknown session",
            RejectReason::NonceMismatch => "nonce mismatch",
            RejectReason::HashMismatch => "hash mismatch",
            RejectReason::TokenExpired => "token expired",
            RejectReason::BadSignature => "bad signature",
            RejectReason::ProtocolMismatch => "protocol mismatch",
            RejectReason::Undecryptable => "undecryptable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub sender: PrincipalId,
    pub recipient: PrincipalId,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterDecision {
    Deliver(Delivery),
    Reject(RejectReason),
    ChallengeSent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmitOutcome {
    Challenge(WireMessage),
    /// Only with `session_reuse`: a verified session was still live.
    Deliver(Delivery),
    Reject(RejectReason),
}

impl SubmitOutcome {
    pub fn decision(&self) -> CenterDecision {
        match self {
            SubmitOutcome::Challenge(_) => CenterDecision::ChallengeSent,
            SubmitOutcome::Deliver(d) => CenterDecision::Deliver(d.clone()),
            SubmitOutcome::Reject(r) => CenterDecision::Reject(*r),
        }
    }
}

/// `(S, R, P, K_ms, N)` plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRecord {
    pub protocol: Protocol,
    pub sender: PrincipalId,
    pub recipient: PrincipalId,
    pub payload_hash: Digest,
    pub payload: Vec<u8>,
    pub session_key: KeyId,
    pub nonce: u64,
    pub created_at: u64,
    pub ttl: u64,
    /// Set once a response verified (only retained under `session_reuse`).
    pub verified: bool,
    challenge: WireMessage,
}

impl SessionRecord {
    pub fn is_live(&self, now: u64) -> bool {
        self.created_at.saturating_add(self.ttl) >= now
    }
}

/// Outstanding P2/P4 challenge, kept only until the first M3 arrives so the
/// center can check that `{P}_{K_ms}` carries the payload originally
/// submitted, and so duplicate submissions get the same challenge.
#[derive(Debug, Clone, PartialEq, Eq)]
struct PendingChallenge {
    sender: PrincipalId,
    recipient: PrincipalId,
    payload_hash: Digest,
    session_key: KeyId,
    created_at: u64,
    challenge: WireMessage,
}

/// `H(S, R, P)`.
pub fn submission_hash<P: CryptoProvider + ?Sized>(
    crypto: &P,
    sender: PrincipalId,
    recipient: PrincipalId,
    payload: &[u8],
) -> Digest {
    let mut w = FieldWriter::default();
    w.principal(sender);
    w.principal(recipient);
    w.field(payload);
    crypto.hash(&w.finish())
}

/// `H(S, R)`.
pub fn pair_hash<P: CryptoProvider + ?Sized>(crypto: &P, sender: PrincipalId, recipient: PrincipalId) -> Digest {
    let mut w = FieldWriter::default();
    w.principal(sender);
    w.principal(recipient);
    crypto.hash(&w.finish())
}

pub(crate) fn encode_key(key: KeyId) -> Vec<u8> {
    key.0.to_be_bytes().to_vec()
}

pub(crate) fn decode_key(bytes: &[u8]) -> Option<KeyId> {
    Some(KeyId(u64::from_be_bytes(bytes.try_into().ok()?)))
}

pub(crate) fn encode_hash_nonce(digest: &Digest, nonce: u64) -> Vec<u8> {
    let mut w = FieldWriter::default();
    w.field(&digest.0);
    w.u64(nonce);
    w.finish()
}

pub(crate) fn decode_hash_nonce(bytes: &[u8]) -> Option<(Digest, u64)> {
    let mut r = FieldReader::new(bytes);
    let out = (r.digest().ok()?, r.u64().ok()?);
    r.finish().ok()?;
    Some(out)
}

pub(crate) fn encode_hash(digest: &Digest) -> Vec<u8> {
    let mut w = FieldWriter::default();
    w.field(&digest.0);
    w.finish()
}

pub(crate) fn decode_hash(bytes: &[u8]) -> Option<Digest> {
    let mut r = FieldReader::new(bytes);
    let d = r.digest().ok()?;
    r.finish().ok()?;
    Some(d)
}

pub(crate) fn encode_nonce(nonce: u64) -> Vec<u8> {
    let mut w = FieldWriter::default();
    w.u64(nonce);
    w.finish()
}

pub(crate) fn decode_nonce(bytes: &[u8]) -> Option<u64> {
    let mut r = FieldReader::new(bytes);
    let n = r.u64().ok()?;
    r.finish().ok()?;
    Some(n)
}

pub(crate) fn encode_captcha_nonce(captcha: &Sealed, nonce: u64) -> Vec<u8> {
    let mut w = FieldWriter::default();
    w.field(&captcha.0);
    w.u64(nonce);
    w.finish()
}

pub(crate) fn decode_captcha_nonce(bytes: &[u8]) -> Option<(Sealed, u64)> {
    let mut r = FieldReader::new(bytes);
    let out = (r.sealed().ok()?, r.u64().ok()?);
    r.finish().ok()?;
    Some(out)
}

/// Public CAPTCHA key `K_c`. Everyone can see it; only agents able to solve
/// the puzzle can use it to open `{K_ms}_{K_c}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaptchaKey(pub KeyId);

/// The message center `M`.
///
/// Single-writer: every state change goes through `&mut self`.
#[derive(Debug)]
pub struct MessageCenter<P> {
    id: PrincipalId,
    crypto: P,
    signing: SigningKey,
    captcha: CaptchaKey,
    config: CenterConfig,
    sessions: Vec<SessionRecord>,
    pending: Vec<PendingChallenge>,
}

impl<P: CryptoProvider> MessageCenter<P> {
    pub fn new(id: PrincipalId, mut crypto: P, config: CenterConfig) -> Self {
        let signing = crypto.fresh_signing_key();
        let captcha = CaptchaKey(crypto.fresh_key());
        MessageCenter {
            id,
            crypto,
            signing,
            captcha,
            config,
            sessions: Vec::new(),
            pending: Vec::new(),
        }
    }

    pub fn id(&self) -> PrincipalId {
        self.id
    }

    pub fn crypto(&self) -> &P {
        &self.crypto
    }

    pub fn config(&self) -> &CenterConfig {
        &self.config
    }

    /// `K_m`, installed in handsets for P3/P4.
    pub fn verify_key(&self) -> VerifyKey {
        self.signing.verify_key()
    }

    pub fn captcha_key(&self) -> CaptchaKey {
        self.captcha
    }

    pub fn sessions(&self) -> &[SessionRecord] {
        &self.sessions
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    fn outstanding(&self) -> usize {
        self.sessions.len() + self.pending.len()
    }

    /// Handles M1.
    pub fn on_submit(&mut self, protocol: Protocol, msg: &WireMessage, now: u64) -> SubmitOutcome {
        let WireMessage::Submit {
            protocol: p,
            sender,
            recipient,
            payload,
        } = msg
        else {
            return SubmitOutcome::Reject(RejectReason::ProtocolMismatch);
        };
        if *p != protocol {
            return SubmitOutcome::Reject(RejectReason::ProtocolMismatch);
        }
        let (sender, recipient) = (*sender, *recipient);
        let digest = submission_hash(&self.crypto, sender, recipient, payload);

        if protocol.is_stateful() {
            if self.config.session_reuse
                && self.sessions.iter().any(|s| {
                    s.protocol == protocol
                        && s.verified
                        && s.sender == sender
                        && s.recipient == recipient
                        && s.is_live(now)
                })
            {
                return SubmitOutcome::Deliver(Delivery {
                    sender,
                    recipient,
                    payload: payload.clone(),
                });
            }
            if let Some(existing) = self.sessions.iter().find(|s| {
                s.protocol == protocol
                    && !s.verified
                    && s.sender == sender
                    && s.recipient == recipient
                    && s.payload_hash == digest
                    && s.is_live(now)
            }) {
                return SubmitOutcome::Challenge(existing.challenge.clone());
            }
        } else if let Some(existing) = self.pending.iter().find(|c| {
            c.challenge.protocol() == protocol
                && c.sender == sender
                && c.recipient == recipient
                && c.payload_hash == digest
                && c.created_at.saturating_add(self.config.ttl) >= now
        }) {
            return SubmitOutcome::Challenge(existing.challenge.clone());
        }

        if self.outstanding() >= self.config.capacity {
            return SubmitOutcome::Reject(RejectReason::Overload);
        }

        let session_key = self.crypto.fresh_key();
        let captcha = self.crypto.encrypt(self.captcha.0, &encode_key(session_key));
        let center = self.id;

        match protocol {
            Protocol::P1 | Protocol::P3 => {
                let nonce = self.crypto.fresh_nonce();
                let challenge = if protocol == Protocol::P1 {
                    WireMessage::ChallengeP1 {
                        center,
                        sender,
                        captcha,
                        body: self
                            .crypto
                            .encrypt(session_key, &encode_hash_nonce(&digest, nonce)),
                    }
                } else {
                    WireMessage::ChallengeP3 {
                        center,
                        sender,
                        signed: self
                            .crypto
                            .sign_body(&self.signing, encode_captcha_nonce(&captcha, nonce)),
                    }
                };
                self.sessions.push(SessionRecord {
                    protocol,
                    sender,
                    recipient,
                    payload_hash: digest,
                    payload: payload.clone(),
                    session_key,
                    nonce,
                    created_at: now,
                    ttl: self.config.ttl,
                    verified: false,
                    challenge: challenge.clone(),
                });
                SubmitOutcome::Challenge(challenge)
            }
            Protocol::P2 | Protocol::P4 => {
                let challenge = if protocol == Protocol::P2 {
                    WireMessage::ChallengeP2 {
                        center,
                        sender,
                        captcha,
                        body: self.crypto.encrypt(session_key, &encode_hash(&digest)),
                        token: self.token_issue(protocol, sender, recipient, session_key, now),
                    }
                } else {
                    WireMessage::ChallengeP4 {
                        center,
                        sender,
                        token: self.token_issue(protocol, sender, recipient, session_key, now),
                        signed_payload: self.crypto.sign_body(&self.signing, payload.clone()),
                    }
                };
                self.pending.push(PendingChallenge {
                    sender,
                    recipient,
                    payload_hash: digest,
                    session_key,
                    created_at: now,
                    challenge: challenge.clone(),
                });
                SubmitOutcome::Challenge(challenge)
            }
        }
    }

    /// Handles M3, and token-only resubmissions under P2/P4.
    pub fn on_response(&mut self, protocol: Protocol, msg: &WireMessage, now: u64) -> CenterDecision {
        if msg.protocol() != protocol || msg.index() != 3 {
            return CenterDecision::Reject(RejectReason::ProtocolMismatch);
        }
        let result = match msg {
            WireMessage::ResponseP1 {
                sender,
                center,
                body,
            } => {
                if *center != self.id {
                    Err(RejectReason::ProtocolMismatch)
                } else {
                    self.verify_session_response(protocol, *sender, None, body, now)
                }
            }
            WireMessage::ResponseP3 {
                sender,
                recipient,
                body,
            } => self.verify_session_response(protocol, *sender, Some(*recipient), body, now),
            WireMessage::TokenSubmit {
                sender,
                recipient,
                body,
                token,
                ..
            } => self.verify_token_submit(protocol, *sender, *recipient, body, token, now),
            _ => Err(RejectReason::ProtocolMismatch),
        };
        match result {
            Ok(d) => CenterDecision::Deliver(d),
            Err(r) => CenterDecision::Reject(r),
        }
    }

    fn verify_session_response(
        &mut self,
        protocol: Protocol,
        sender: PrincipalId,
        recipient: Option<PrincipalId>,
        body: &Sealed,
        now: u64,
    ) -> Result<Delivery, RejectReason> {
        // The response names only the sender (and for P3 the recipient); the
        // session it answers is the one whose key opens it.
        let found = self.sessions.iter().enumerate().find_map(|(i, s)| {
            let candidate = s.protocol == protocol
                && !s.verified
                && s.sender == sender
                && recipient.is_none_or(|r| r == s.recipient)
                && s.is_live(now);
            if !candidate {
                return None;
            }
            self.crypto.decrypt(s.session_key, body).map(|plain| (i, plain))
        });
        let (index, plain) = found.ok_or(RejectReason::UnknownSession)?;
        let record = &self.sessions[index];

        let nonce = match protocol {
            Protocol::P1 => {
                let (digest, nonce) = decode_hash_nonce(&plain).ok_or(RejectReason::Undecryptable)?;
                if digest != record.payload_hash {
                    return Err(RejectReason::HashMismatch);
                }
                nonce
            }
            _ => decode_nonce(&plain).ok_or(RejectReason::Undecryptable)?,
        };
        if Some(nonce) != record.nonce.checked_add(1) {
            return Err(RejectReason::NonceMismatch);
        }

        let delivery = Delivery {
            sender: record.sender,
            recipient: record.recipient,
            payload: record.payload.clone(),
        };
        if self.config.session_reuse {
            let record = &mut self.sessions[index];
            record.verified = true;
            record.created_at = now;
        } else {
            self.sessions.remove(index);
        }
        Ok(delivery)
    }

    fn verify_token_submit(
        &mut self,
        protocol: Protocol,
        sender: PrincipalId,
        recipient: PrincipalId,
        body: &Sealed,
        token: &AuthToken,
        now: u64,
    ) -> Result<Delivery, RejectReason> {
        self.check_token(token, sender, recipient, now)?;
        let session_key = match (&token.key, protocol) {
            (TokenKey::Clear(k), Protocol::P2) => *k,
            (TokenKey::Captcha(env), Protocol::P4) => self
                .crypto
                .decrypt(self.captcha.0, env)
                .and_then(|b| decode_key(&b))
                .ok_or(RejectReason::Undecryptable)?,
            _ => return Err(RejectReason::ProtocolMismatch),
        };
        let payload = self
            .crypto
            .decrypt(session_key, body)
            .ok_or(RejectReason::Undecryptable)?;

        if let Some(i) = self.pending.iter().position(|c| c.session_key == session_key) {
            let expected = self.pending[i].payload_hash;
            if submission_hash(&self.crypto, sender, recipient, &payload) != expected {
                return Err(RejectReason::HashMismatch);
            }
            self.pending.remove(i);
        }
        Ok(Delivery {
            sender,
            recipient,
            payload,
        })
    }

    /// Issues `{key, H(S,R), T}_{K_m⁻¹}`. Under P4 the session key travels
    /// inside the CAPTCHA envelope, under P2 in the clear.
    pub fn token_issue(
        &self,
        protocol: Protocol,
        sender: PrincipalId,
        recipient: PrincipalId,
        session_key: KeyId,
        now: u64,
    ) -> AuthToken {
        let key = match protocol {
            Protocol::P4 => TokenKey::Captcha(self.crypto.encrypt(self.captcha.0, &encode_key(session_key))),
            _ => TokenKey::Clear(session_key),
        };
        let pair_hash = pair_hash(&self.crypto, sender, recipient);
        let signature = self
            .crypto
            .sign(&self.signing, &AuthToken::signed_bytes(&key, &pair_hash, now));
        AuthToken {
            key,
            pair_hash,
            issued_at: now,
            signature,
        }
    }

    pub fn token_validate(&self, token: &AuthToken, sender: PrincipalId, recipient: PrincipalId, now: u64) -> bool {
        self.check_token(token, sender, recipient, now).is_ok()
    }

    fn check_token(
        &self,
        token: &AuthToken,
        sender: PrincipalId,
        recipient: PrincipalId,
        now: u64,
    ) -> Result<(), RejectReason> {
        let bytes = AuthToken::signed_bytes(&token.key, &token.pair_hash, token.issued_at);
        if !self.crypto.verify(self.verify_key(), &bytes, &token.signature) {
            return Err(RejectReason::BadSignature);
        }
        if token.pair_hash != pair_hash(&self.crypto, sender, recipient) {
            return Err(RejectReason::HashMismatch);
        }
        if token.issued_at.saturating_add(self.config.ttl) < now {
            return Err(RejectReason::TokenExpired);
        }
        Ok(())
    }

    /// Drops every session and pending challenge with `created_at + ttl < now`.
    pub fn session_gc(&mut self, now: u64) -> usize {
        let before = self.outstanding();
        let ttl = self.config.ttl;
        self.sessions.retain(|s| s.is_live(now));
        self.pending.retain(|c| c.created_at.saturating_add(ttl) >= now);
        before - self.outstanding()
    }
}
