//! Protocol messages and their byte encoding.
//!
//! Frame layout, all integers big-endian:
//!
//! ```text
//! +----------+---------+----------------------------------------------+
//! | protocol | message | fields...                                    |
//! |  u8 1-4  | u8 1-3  | each: u32 length ‖ bytes                     |
//! +----------+---------+----------------------------------------------+
//! ```
//!
//! Field order per `(protocol, message)`:
//!
//! | frame     | fields                                                   |
//! |-----------|----------------------------------------------------------|
//! | Pn / M1   | S, R, P                                                  |
//! | P1 / M2   | M, S, {K_ms}_{K_c}, {H(S,R,P), N}_{K_ms}                  |
//! | P2 / M2   | M, S, {K_ms}_{K_c}, {H(S,R,P)}_{K_ms}, token              |
//! | P3 / M2   | M, S, signed({K_ms}_{K_c}, N)                             |
//! | P4 / M2   | M, S, token, signed(P)                                    |
//! | P1 / M3   | S, M, {H(S,R,P), N+1}_{K_ms}                              |
//! | P3 / M3   | S, R, {N+1}_{K_ms}                                        |
//! | P2,P4 / M3| S, R, {P}_{K_ms}, token                                   |
//!
//! Principals are 4 bytes. A signed value is a nested field pair
//! `body ‖ signature`. A token is the nested fields
//! `key-tag(1) ‖ key ‖ H(S,R) ‖ T(8) ‖ signature`, key-tag 0 carrying a
//! cleartext `K_ms` (8 bytes) and key-tag 1 a CAPTCHA envelope.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::crypto::{Digest, KeyId, Sealed, Signature, Signed, DIGEST_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrincipalId(pub u32);

impl fmt::Display for PrincipalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sender,
    Center,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Principal {
    pub id: PrincipalId,
    pub role: Role,
}

/// The four challenge-response variants.
///
/// - P1: center keeps session state, no authenticated channel.
/// - P2: stateless center issuing authorization tokens.
/// - P3: like P1, but challenges are signed by the center.
/// - P4: like P2, with signed challenges and the session key wrapped in the
///   CAPTCHA envelope inside the token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    P1,
    P2,
    P3,
    P4,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::P1, Protocol::P2, Protocol::P3, Protocol::P4];

    pub fn tag(self) -> u8 {
        match self {
            Protocol::P1 => 1,
            Protocol::P2 => 2,
            Protocol::P3 => 3,
            Protocol::P4 => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Protocol::ALL.into_iter().find(|p| p.tag() == tag)
    }

    /// P1 and P3 keep session records at the center.
    pub fn is_stateful(self) -> bool {
        matches!(self, Protocol::P1 | Protocol::P3)
    }

    /// P3 and P4 assume handsets hold the center's verification key.
    pub fn has_authenticated_channel(self) -> bool {
        matches!(self, Protocol::P3 | Protocol::P4)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.tag())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "p1" | "1" => Ok(Protocol::P1),
            "p2" | "2" => Ok(Protocol::P2),
            "p3" | "3" => Ok(Protocol::P3),
            "p4" | "4" => Ok(Protocol::P4),
            _ => Err(format!("unknown protocol {s:?} (expected p1..p4)")),
        }
    }
}

/// Session-key material carried inside an authorization token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKey {
    /// P2: `K_ms` itself.
    Clear(KeyId),
    /// P4: `{K_ms}_{K_c}`.
    Captcha(Sealed),
}

/// `{key, H(S,R), T}_{K_m⁻¹}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuthToken {
    pub key: TokenKey,
    pub pair_hash: Digest,
    pub issued_at: u64,
    pub signature: Signature,
}

impl AuthToken {
    /// The byte string the center signs.
    pub fn signed_bytes(key: &TokenKey, pair_hash: &Digest, issued_at: u64) -> Vec<u8> {
        let mut w = FieldWriter::default();
        write_token_key(&mut w, key);
        w.field(&pair_hash.0);
        w.field(&issued_at.to_be_bytes());
        w.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireMessage {
    /// M1 of every protocol: `S, R, P`.
    Submit {
        protocol: Protocol,
        sender: PrincipalId,
        recipient: PrincipalId,
        #[serde(with = "hex::serde")]
        payload: Vec<u8>,
    },
    ChallengeP1 {
        center: PrincipalId,
        sender: PrincipalId,
        captcha: Sealed,
        body: Sealed,
    },
    ChallengeP2 {
        center: PrincipalId,
        sender: PrincipalId,
        captcha: Sealed,
        body: Sealed,
        token: AuthToken,
    },
    ChallengeP3 {
        center: PrincipalId,
        sender: PrincipalId,
        signed: Signed,
    },
    ChallengeP4 {
        center: PrincipalId,
        sender: PrincipalId,
        token: AuthToken,
        signed_payload: Signed,
    },
    ResponseP1 {
        sender: PrincipalId,
        center: PrincipalId,
        body: Sealed,
    },
    ResponseP3 {
        sender: PrincipalId,
        recipient: PrincipalId,
        body: Sealed,
    },
    /// M3 of P2/P4, and the token-only resubmission within the token's lifetime.
    TokenSubmit {
        protocol: Protocol,
        sender: PrincipalId,
        recipient: PrincipalId,
        body: Sealed,
        token: AuthToken,
    },
}

impl WireMessage {
    pub fn protocol(&self) -> Protocol {
        match self {
            WireMessage::Submit { protocol, .. } | WireMessage::TokenSubmit { protocol, .. } => *protocol,
            WireMessage::ChallengeP1 { .. } | WireMessage::ResponseP1 { .. } => Protocol::P1,
            WireMessage::ChallengeP2 { .. } => Protocol::P2,
            WireMessage::ChallengeP3 { .. } | WireMessage::ResponseP3 { .. } => Protocol::P3,
            WireMessage::ChallengeP4 { .. } => Protocol::P4,
        }
    }

    /// 1, 2 or 3 for M1, M2, M3.
    pub fn index(&self) -> u8 {
        match self {
            WireMessage::Submit { .. } => 1,
            WireMessage::ChallengeP1 { .. }
            | WireMessage::ChallengeP2 { .. }
            | WireMessage::ChallengeP3 { .. }
            | WireMessage::ChallengeP4 { .. } => 2,
            WireMessage::ResponseP1 { .. }
            | WireMessage::ResponseP3 { .. }
            | WireMessage::TokenSubmit { .. } => 3,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = FieldWriter::default();
        match self {
            WireMessage::Submit {
                sender,
                recipient,
                payload,
                ..
            } => {
                w.principal(*sender);
                w.principal(*recipient);
                w.field(payload);
            }
            WireMessage::ChallengeP1 {
                center,
                sender,
                captcha,
                body,
            } => {
                w.principal(*center);
                w.principal(*sender);
                w.field(&captcha.0);
                w.field(&body.0);
            }
            WireMessage::ChallengeP2 {
                center,
                sender,
                captcha,
                body,
                token,
            } => {
                w.principal(*center);
                w.principal(*sender);
                w.field(&captcha.0);
                w.field(&body.0);
                w.nested(|w| write_token(w, token));
            }
            WireMessage::ChallengeP3 {
                center,
                sender,
                signed,
            } => {
                w.principal(*center);
                w.principal(*sender);
                w.nested(|w| write_signed(w, signed));
            }
            WireMessage::ChallengeP4 {
                center,
                sender,
                token,
                signed_payload,
            } => {
                w.principal(*center);
                w.principal(*sender);
                w.nested(|w| write_token(w, token));
                w.nested(|w| write_signed(w, signed_payload));
            }
            WireMessage::ResponseP1 {
                sender,
                center,
                body,
            } => {
                w.principal(*sender);
                w.principal(*center);
                w.field(&body.0);
            }
            WireMessage::ResponseP3 {
                sender,
                recipient,
                body,
            } => {
                w.principal(*sender);
                w.principal(*recipient);
                w.field(&body.0);
            }
            WireMessage::TokenSubmit {
                sender,
                recipient,
                body,
                token,
                ..
            } => {
                w.principal(*sender);
                w.principal(*recipient);
                w.field(&body.0);
                w.nested(|w| write_token(w, token));
            }
        }
        let mut out = vec![self.protocol().tag(), self.index()];
        out.extend(w.finish());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let [tag, index, rest @ ..] = bytes else {
            return Err(WireError::Truncated);
        };
        let protocol = Protocol::from_tag(*tag).ok_or(WireError::UnknownProtocol(*tag))?;
        let mut r = FieldReader::new(rest);
        let msg = match (protocol, index) {
            (_, 1) => WireMessage::Submit {
                protocol,
                sender: r.principal()?,
                recipient: r.principal()?,
                payload: r.field()?.to_vec(),
            },
            (Protocol::P1, 2) => WireMessage::ChallengeP1 {
                center: r.principal()?,
                sender: r.principal()?,
                captcha: r.sealed()?,
                body: r.sealed()?,
            },
            (Protocol::P2, 2) => WireMessage::ChallengeP2 {
                center: r.principal()?,
                sender: r.principal()?,
                captcha: r.sealed()?,
                body: r.sealed()?,
                token: read_token(&mut FieldReader::new(r.field()?))?,
            },
            (Protocol::P3, 2) => WireMessage::ChallengeP3 {
                center: r.principal()?,
                sender: r.principal()?,
                signed: read_signed(&mut FieldReader::new(r.field()?))?,
            },
            (Protocol::P4, 2) => WireMessage::ChallengeP4 {
                center: r.principal()?,
                sender: r.principal()?,
                token: read_token(&mut FieldReader::new(r.field()?))?,
                signed_payload: read_signed(&mut FieldReader::new(r.field()?))?,
            },
            (Protocol::P1, 3) => WireMessage::ResponseP1 {
                sender: r.principal()?,
                center: r.principal()?,
                body: r.sealed()?,
            },
            (Protocol::P3, 3) => WireMessage::ResponseP3 {
                sender: r.principal()?,
                recipient: r.principal()?,
                body: r.sealed()?,
            },
            (Protocol::P2 | Protocol::P4, 3) => WireMessage::TokenSubmit {
                protocol,
                sender: r.principal()?,
                recipient: r.principal()?,
                body: r.sealed()?,
                token: read_token(&mut FieldReader::new(r.field()?))?,
            },
            (_, other) => return Err(WireError::UnknownMessage(*other)),
        };
        r.finish()?;
        Ok(msg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated frame")]
    Truncated,
    #[error("unknown protocol tag {0}")]
    UnknownProtocol(u8),
    #[error("unknown message index {0}")]
    UnknownMessage(u8),
    #[error("field has length {0}, expected {1}")]
    BadLength(usize, usize),
    #[error("unknown token key tag {0}")]
    UnknownKeyTag(u8),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

#[derive(Default)]
pub(crate) struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    pub(crate) fn field(&mut self, bytes: &[u8]) {
        let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
    }

    pub(crate) fn principal(&mut self, p: PrincipalId) {
        self.field(&p.0.to_be_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.field(&v.to_be_bytes());
    }

    fn nested(&mut self, f: impl FnOnce(&mut FieldWriter)) {
        let mut inner = FieldWriter::default();
        f(&mut inner);
        self.field(&inner.buf);
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct FieldReader<'a> {
    rest: &'a [u8],
}

impl<'a> FieldReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        FieldReader { rest: bytes }
    }

    pub(crate) fn field(&mut self) -> Result<&'a [u8], WireError> {
        if self.rest.len() < 4 {
            return Err(WireError::Truncated);
        }
        let (len, rest) = self.rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        if rest.len() < len {
            return Err(WireError::Truncated);
        }
        let (field, rest) = rest.split_at(len);
        self.rest = rest;
        Ok(field)
    }

    fn fixed<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let f = self.field()?;
        f.try_into().map_err(|_| WireError::BadLength(f.len(), N))
    }

    pub(crate) fn principal(&mut self) -> Result<PrincipalId, WireError> {
        Ok(PrincipalId(u32::from_be_bytes(self.fixed()?)))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.fixed()?))
    }

    pub(crate) fn digest(&mut self) -> Result<Digest, WireError> {
        Ok(Digest(self.fixed::<DIGEST_LEN>()?))
    }

    pub(crate) fn sealed(&mut self) -> Result<Sealed, WireError> {
        Ok(Sealed(self.field()?.to_vec()))
    }

    pub(crate) fn finish(self) -> Result<(), WireError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(WireError::Trailing(self.rest.len()))
        }
    }
}

fn write_token_key(w: &mut FieldWriter, key: &TokenKey) {
    match key {
        TokenKey::Clear(k) => {
            w.field(&[0]);
            w.u64(k.0);
        }
        TokenKey::Captcha(sealed) => {
            w.field(&[1]);
            w.field(&sealed.0);
        }
    }
}

fn write_token(w: &mut FieldWriter, token: &AuthToken) {
    write_token_key(w, &token.key);
    w.field(&token.pair_hash.0);
    w.field(&token.issued_at.to_be_bytes());
    w.field(&token.signature.0);
}

fn read_token(r: &mut FieldReader<'_>) -> Result<AuthToken, WireError> {
    let key = match r.fixed::<1>()? {
        [0] => TokenKey::Clear(KeyId(r.u64()?)),
        [1] => TokenKey::Captcha(r.sealed()?),
        [other] => return Err(WireError::UnknownKeyTag(other)),
    };
    let token = AuthToken {
        key,
        pair_hash: r.digest()?,
        issued_at: r.u64()?,
        signature: Signature(r.fixed()?),
    };
    Ok(token)
}

fn write_signed(w: &mut FieldWriter, signed: &Signed) {
    w.field(&signed.body);
    w.field(&signed.signature.0);
}

fn read_signed(r: &mut FieldReader<'_>) -> Result<Signed, WireError> {
    Ok(Signed {
        body: r.field()?.to_vec(),
        signature: Signature(r.fixed()?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn token(clear: bool) -> AuthToken {
        AuthToken {
            key: if clear {
                TokenKey::Clear(KeyId(9))
            } else {
                TokenKey::Captcha(Sealed(vec![1, 2, 3, 4, 5, 6, 7, 8, 9]))
            },
            pair_hash: Digest([7; DIGEST_LEN]),
            issued_at: 42,
            signature: Signature([3; DIGEST_LEN]),
        }
    }

    fn samples() -> Vec<WireMessage> {
        let s = PrincipalId(10);
        let r = PrincipalId(20);
        let m = PrincipalId(1);
        let sealed = |b: u8| Sealed(vec![b; 12]);
        vec![
            WireMessage::Submit {
                protocol: Protocol::P3,
                sender: s,
                recipient: r,
                payload: b"hi".to_vec(),
            },
            WireMessage::ChallengeP1 {
                center: m,
                sender: s,
                captcha: sealed(1),
                body: sealed(2),
            },
            WireMessage::ChallengeP2 {
                center: m,
                sender: s,
                captcha: sealed(1),
                body: sealed(2),
                token: token(true),
            },
            WireMessage::ChallengeP3 {
                center: m,
                sender: s,
                signed: Signed {
                    body: vec![5; 30],
                    signature: Signature([4; DIGEST_LEN]),
                },
            },
            WireMessage::ChallengeP4 {
                center: m,
                sender: s,
                token: token(false),
                signed_payload: Signed {
                    body: b"payload".to_vec(),
                    signature: Signature([4; DIGEST_LEN]),
                },
            },
            WireMessage::ResponseP1 {
                sender: s,
                center: m,
                body: sealed(3),
            },
            WireMessage::ResponseP3 {
                sender: s,
                recipient: r,
                body: sealed(3),
            },
            WireMessage::TokenSubmit {
                protocol: Protocol::P4,
                sender: s,
                recipient: r,
                body: sealed(4),
                token: token(false),
            },
        ]
    }

    #[test]
    fn every_variant_round_trips() {
        for msg in samples() {
            let bytes = msg.encode();
            assert_eq!(bytes[0], msg.protocol().tag());
            assert_eq!(bytes[1], msg.index());
            assert_eq!(WireMessage::decode(&bytes).unwrap(), msg);
            let json = serde_json::to_string(&msg).unwrap();
            assert_eq!(serde_json::from_str::<WireMessage>(&json).unwrap(), msg);
        }
    }

    #[test]
    fn submit_layout_is_fixed() {
        let msg = WireMessage::Submit {
            protocol: Protocol::P1,
            sender: PrincipalId(0x0A0B_0C0D),
            recipient: PrincipalId(2),
            payload: vec![0xFF],
        };
        assert_eq!(
            msg.encode(),
            vec![
                1, 1, // P1, M1
                0, 0, 0, 4, 0x0A, 0x0B, 0x0C, 0x0D, // S
                0, 0, 0, 4, 0, 0, 0, 2, // R
                0, 0, 0, 1, 0xFF, // P
            ]
        );
    }

    #[test]
    fn malformed_frames_are_rejected() {
        assert_eq!(WireMessage::decode(&[]), Err(WireError::Truncated));
        assert_eq!(WireMessage::decode(&[9, 1]), Err(WireError::UnknownProtocol(9)));
        assert_eq!(WireMessage::decode(&[1, 7]), Err(WireError::UnknownMessage(7)));
        let mut bytes = samples()[0].encode();
        bytes.push(0);
        assert_eq!(WireMessage::decode(&bytes), Err(WireError::Trailing(1)));
        let bytes = samples()[1].encode();
        assert_eq!(WireMessage::decode(&bytes[..bytes.len() - 1]), Err(WireError::Truncated));
    }

    proptest! {
        #[test]
        fn arbitrary_payloads_round_trip(
            tag in 1u8..=4,
            s in any::<u32>(),
            r in any::<u32>(),
            payload in proptest::collection::vec(any::<u8>(), 0..200),
            body in proptest::collection::vec(any::<u8>(), 0..64),
            issued_at in any::<u64>(),
        ) {
            let protocol = Protocol::from_tag(tag).unwrap();
            let submit = WireMessage::Submit { protocol, sender: PrincipalId(s), recipient: PrincipalId(r), payload };
            prop_assert_eq!(WireMessage::decode(&submit.encode()).unwrap(), submit);
            let resubmit = WireMessage::TokenSubmit {
                protocol: Protocol::P2,
                sender: PrincipalId(s),
                recipient: PrincipalId(r),
                body: Sealed(body),
                token: AuthToken { issued_at, ..token(true) },
            };
            prop_assert_eq!(WireMessage::decode(&resubmit.encode()).unwrap(), resubmit);
        }

        #[test]
        fn decoding_garbage_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..80)) {
            let _ = WireMessage::decode(&bytes);
        }
    }
}
