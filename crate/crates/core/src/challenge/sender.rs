//! Sender side of the protocols.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::center::{
    decode_captcha_nonce, decode_hash, decode_hash_nonce, decode_key, encode_hash_nonce, encode_nonce,
    submission_hash, CaptchaKey,
};
use super::crypto::{CryptoProvider, KeyId, Sealed, VerifyKey};
use super::wire::{AuthToken, PrincipalId, Protocol, TokenKey, WireMessage};
use crate::corpus::SenderKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    /// The challenge commits to a different `(S, R, P)` than was sent.
    TamperedChallenge,
    /// Signature does not verify under the installed center key.
    UnknownSigner,
    /// The CAPTCHA envelope could not be opened.
    CannotDecode,
    /// Not a challenge for this sender.
    Unexpected,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AbortReason::TamperedChallenge => "tampered challenge",
            AbortReason::UnknownSigner => "unknown signer",
            AbortReason::CannotDecode => "cannot decode",
            AbortReason::Unexpected => "unexpected message",
        };
        f.write_str(s)
    }
}

/// What a sender keeps from M1 to compare against the challenge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredSubmission {
    pub recipient: PrincipalId,
    pub payload: Vec<u8>,
}

/// Token and session key a P2/P4 sender may reuse for later messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub session_key: KeyId,
    pub token: AuthToken,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenderReply {
    pub response: WireMessage,
    pub credentials: Option<Credentials>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenderAgent {
    pub id: PrincipalId,
    pub kind: SenderKind,
    /// `K_m` as installed at manufacture; required for P3/P4.
    pub center_key: Option<VerifyKey>,
    pub captcha_key: CaptchaKey,
}

impl SenderAgent {
    pub fn new(id: PrincipalId, kind: SenderKind, captcha_key: CaptchaKey, center_key: Option<VerifyKey>) -> Self {
        SenderAgent {
            id,
            kind,
            center_key,
            captcha_key,
        }
    }

    /// Humans always solve the puzzle; a bot only through a lucky guess.
    pub fn can_decode(&self, bot_guess_succeeds: bool) -> bool {
        match self.kind {
            SenderKind::Human => true,
            SenderKind::Bot => bot_guess_succeeds,
        }
    }

    pub fn submit(&self, protocol: Protocol, stored: &StoredSubmission) -> WireMessage {
        WireMessage::Submit {
            protocol,
            sender: self.id,
            recipient: stored.recipient,
            payload: stored.payload.clone(),
        }
    }

    /// Token-only resubmission of a new payload under P2/P4.
    pub fn resubmit<P: CryptoProvider + ?Sized>(
        &self,
        crypto: &P,
        protocol: Protocol,
        credentials: &Credentials,
        recipient: PrincipalId,
        payload: &[u8],
    ) -> WireMessage {
        WireMessage::TokenSubmit {
            protocol,
            sender: self.id,
            recipient,
            body: crypto.encrypt(credentials.session_key, payload),
            token: credentials.token.clone(),
        }
    }

    fn open_captcha<P: CryptoProvider + ?Sized>(
        &self,
        crypto: &P,
        envelope: &Sealed,
        decoded: bool,
    ) -> Result<KeyId, AbortReason> {
        if !decoded {
            return Err(AbortReason::CannotDecode);
        }
        crypto
            .decrypt(self.captcha_key.0, envelope)
            .and_then(|b| decode_key(&b))
            .ok_or(AbortReason::CannotDecode)
    }

    fn check_signer<P: CryptoProvider + ?Sized>(
        &self,
        crypto: &P,
        body: &[u8],
        signature: &super::crypto::Signature,
    ) -> Result<(), AbortReason> {
        match self.center_key {
            Some(k) if crypto.verify(k, body, signature) => Ok(()),
            _ => Err(AbortReason::UnknownSigner),
        }
    }

    /// Handles M2. `decoded` says whether this agent solved the CAPTCHA for
    /// this particular challenge (see [`SenderAgent::can_decode`]).
    pub fn on_challenge<P: CryptoProvider + ?Sized>(
        &self,
        crypto: &P,
        challenge: &WireMessage,
        stored: &StoredSubmission,
        decoded: bool,
    ) -> Result<SenderReply, AbortReason> {
        let expected = submission_hash(crypto, self.id, stored.recipient, &stored.payload);
        match challenge {
            WireMessage::ChallengeP1 {
                center,
                sender,
                captcha,
                body,
            } if *sender == self.id => {
                let key = self.open_captcha(crypto, captcha, decoded)?;
                let (digest, nonce) = crypto
                    .decrypt(key, body)
                    .and_then(|b| decode_hash_nonce(&b))
                    .ok_or(AbortReason::TamperedChallenge)?;
                if digest != expected {
                    return Err(AbortReason::TamperedChallenge);
                }
                Ok(SenderReply {
                    response: WireMessage::ResponseP1 {
                        sender: self.id,
                        center: *center,
                        body: crypto.encrypt(key, &encode_hash_nonce(&expected, nonce.wrapping_add(1))),
                    },
                    credentials: None,
                })
            }
            WireMessage::ChallengeP2 {
                sender,
                captcha,
                body,
                token,
                ..
            } if *sender == self.id => {
                let key = self.open_captcha(crypto, captcha, decoded)?;
                let digest = crypto
                    .decrypt(key, body)
                    .and_then(|b| decode_hash(&b))
                    .ok_or(AbortReason::TamperedChallenge)?;
                if digest != expected {
                    return Err(AbortReason::TamperedChallenge);
                }
                let credentials = Credentials {
                    session_key: key,
                    token: token.clone(),
                };
                Ok(SenderReply {
                    response: self.resubmit(crypto, Protocol::P2, &credentials, stored.recipient, &stored.payload),
                    credentials: Some(credentials),
                })
            }
            WireMessage::ChallengeP3 { sender, signed, .. } if *sender == self.id => {
                self.check_signer(crypto, &signed.body, &signed.signature)?;
                let (captcha, nonce) = decode_captcha_nonce(&signed.body).ok_or(AbortReason::Unexpected)?;
                let key = self.open_captcha(crypto, &captcha, decoded)?;
                Ok(SenderReply {
                    response: WireMessage::ResponseP3 {
                        sender: self.id,
                        recipient: stored.recipient,
                        body: crypto.encrypt(key, &encode_nonce(nonce.wrapping_add(1))),
                    },
                    credentials: None,
                })
            }
            WireMessage::ChallengeP4 {
                sender,
                token,
                signed_payload,
                ..
            } if *sender == self.id => {
                let token_bytes = AuthToken::signed_bytes(&token.key, &token.pair_hash, token.issued_at);
                self.check_signer(crypto, &token_bytes, &token.signature)?;
                self.check_signer(crypto, &signed_payload.body, &signed_payload.signature)?;
                if signed_payload.body != stored.payload {
                    return Err(AbortReason::TamperedChallenge);
                }
                let TokenKey::Captcha(envelope) = &token.key else {
                    return Err(AbortReason::Unexpected);
                };
                let key = self.open_captcha(crypto, envelope, decoded)?;
                let credentials = Credentials {
                    session_key: key,
                    token: token.clone(),
                };
                Ok(SenderReply {
                    response: self.resubmit(crypto, Protocol::P4, &credentials, stored.recipient, &stored.payload),
                    credentials: Some(credentials),
                })
            }
            _ => Err(AbortReason::Unexpected),
        }
    }
}
