//! Abstract cryptographic capabilities used by the protocols.
//!
//! The protocols only need a one-way hash, authenticated symmetric
//! encryption, and signatures. [`ToyProvider`] implements all three with a
//! keyed 64-bit mixing function: fast, deterministic, and good enough to
//! exercise protocol logic. It offers no cryptographic strength.
//!
//! Signing authority is a capability: a [`SigningKey`] can only be minted by
//! a provider, so code that was never handed one cannot produce signatures
//! that verify under the matching [`VerifyKey`].

use serde::{Deserialize, Serialize};

use crate::rng::mix64;

pub const DIGEST_LEN: usize = 16;
pub const TAG_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest(#[serde(with = "hex::serde")] pub [u8; DIGEST_LEN]);

/// Symmetric key handle. Possession of the id is possession of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VerifyKey(pub u64);

/// Private half of a key pair. Deliberately neither `Clone` nor
/// constructible outside this module.
#[derive(Debug, PartialEq, Eq)]
pub struct SigningKey {
    id: u64,
}

impl SigningKey {
    pub fn verify_key(&self) -> VerifyKey {
        VerifyKey(self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature(#[serde(with = "hex::serde")] pub [u8; DIGEST_LEN]);

/// Ciphertext with an integrity tag: decrypting under the wrong key fails.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sealed(#[serde(with = "hex::serde")] pub Vec<u8>);

/// `{X}_{K⁻¹}`: a readable body together with a signature over it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signed {
    #[serde(with = "hex::serde")]
    pub body: Vec<u8>,
    pub signature: Signature,
}

pub trait CryptoProvider {
    fn hash(&self, data: &[u8]) -> Digest;
    fn encrypt(&self, key: KeyId, plaintext: &[u8]) -> Sealed;
    /// `None` when the tag does not verify under `key`.
    fn decrypt(&self, key: KeyId, sealed: &Sealed) -> Option<Vec<u8>>;
    fn sign(&self, key: &SigningKey, data: &[u8]) -> Signature;
    fn verify(&self, key: VerifyKey, data: &[u8], signature: &Signature) -> bool;
    /// Never repeats within one provider instance.
    fn fresh_nonce(&mut self) -> u64;
    fn fresh_key(&mut self) -> KeyId;
    fn fresh_signing_key(&mut self) -> SigningKey;

    fn sign_body(&self, key: &SigningKey, body: Vec<u8>) -> Signed {
        let signature = self.sign(key, &body);
        Signed { body, signature }
    }

    fn verify_signed(&self, key: VerifyKey, signed: &Signed) -> bool {
        self.verify(key, &signed.body, &signed.signature)
    }
}

const DOMAIN_HASH: u64 = 0x01;
const DOMAIN_KEY: u64 = 0x02;
const DOMAIN_STREAM: u64 = 0x03;
const DOMAIN_TAG: u64 = 0x04;
const DOMAIN_SIGN: u64 = 0x05;

/// Deterministic toy provider.
///
/// All key material derives from `root`, so two providers with the same root
/// live in the same "world" and interoperate: a sender holding a clone can
/// decrypt what the center encrypted under a key id it was told. Counters
/// for nonces and key ids are per instance.
#[derive(Debug, Clone)]
pub struct ToyProvider {
    root: u64,
    next_nonce: u64,
    next_key: u64,
}

impl ToyProvider {
    pub fn new(root: u64) -> Self {
        ToyProvider {
            root,
            next_nonce: 1,
            next_key: 1,
        }
    }

    /// Nonces are handed out sequentially starting at `first`.
    pub fn with_first_nonce(mut self, first: u64) -> Self {
        self.next_nonce = first;
        self
    }

    fn material(&self, domain: u64, id: u64) -> u64 {
        mix64(self.root ^ mix64(domain.rotate_left(56) ^ mix64(id)))
    }

    fn mac(&self, key: u64, domain: u64, data: &[u8]) -> [u8; DIGEST_LEN] {
        let mut a = mix64(key ^ domain);
        let mut b = mix64(a ^ 0xA5A5_A5A5_A5A5_A5A5);
        for chunk in data.chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            let w = u64::from_le_bytes(word);
            a = mix64(a ^ w);
            b = mix64(b.wrapping_add(w).rotate_left(17) ^ a);
        }
        a = mix64(a ^ data.len() as u64);
        b = mix64(b ^ a);
        let mut out = [0u8; DIGEST_LEN];
        out[..8].copy_from_slice(&a.to_le_bytes());
        out[8..].copy_from_slice(&b.to_le_bytes());
        out
    }

    fn keystream_xor(&self, key: u64, data: &mut [u8]) {
        for (i, chunk) in data.chunks_mut(8).enumerate() {
            let block = mix64(key ^ mix64(DOMAIN_STREAM ^ ((i as u64) << 8))).to_le_bytes();
            for (byte, k) in chunk.iter_mut().zip(block) {
                *byte ^= k;
            }
        }
    }
}

impl CryptoProvider for ToyProvider {
    fn hash(&self, data: &[u8]) -> Digest {
        Digest(self.mac(self.root, DOMAIN_HASH, data))
    }

    fn encrypt(&self, key: KeyId, plaintext: &[u8]) -> Sealed {
        let k = self.material(DOMAIN_KEY, key.0);
        let mut out = plaintext.to_vec();
        self.keystream_xor(k, &mut out);
        out.extend_from_slice(&self.mac(k, DOMAIN_TAG, plaintext)[..TAG_LEN]);
        Sealed(out)
    }

    fn decrypt(&self, key: KeyId, sealed: &Sealed) -> Option<Vec<u8>> {
        let bytes = &sealed.0;
        if bytes.len() < TAG_LEN {
            return None;
        }
        let (body, tag) = bytes.split_at(bytes.len() - TAG_LEN);
        let k = self.material(DOMAIN_KEY, key.0);
        let mut plain = body.to_vec();
        self.keystream_xor(k, &mut plain);
        (self.mac(k, DOMAIN_TAG, &plain)[..TAG_LEN] == *tag).then_some(plain)
    }

    fn sign(&self, key: &SigningKey, data: &[u8]) -> Signature {
        Signature(self.mac(self.material(DOMAIN_SIGN, key.id), DOMAIN_SIGN, data))
    }

    fn verify(&self, key: VerifyKey, data: &[u8], signature: &Signature) -> bool {
        self.mac(self.material(DOMAIN_SIGN, key.0), DOMAIN_SIGN, data) == signature.0
    }

    fn fresh_nonce(&mut self) -> u64 {
        let n = self.next_nonce;
        self.next_nonce += 1;
        n
    }

    fn fresh_key(&mut self) -> KeyId {
        let k = self.next_key;
        self.next_key += 1;
        KeyId(k)
    }

    fn fresh_signing_key(&mut self) -> SigningKey {
        let k = self.next_key;
        self.next_key += 1;
        SigningKey { id: k }
    }
}

/// Signature-verification faults for exercising the trace suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureFault {
    AcceptAll,
    RejectAll,
}

/// Wraps a provider and overrides signature verification.
#[derive(Debug, Clone)]
pub struct FaultyProvider<P> {
    inner: P,
    fault: SignatureFault,
}

impl<P> FaultyProvider<P> {
    pub fn new(inner: P, fault: SignatureFault) -> Self {
        FaultyProvider { inner, fault }
    }
}

impl<P: CryptoProvider> CryptoProvider for FaultyProvider<P> {
    fn hash(&self, data: &[u8]) -> Digest {
        self.inner.hash(data)
    }

    fn encrypt(&self, key: KeyId, plaintext: &[u8]) -> Sealed {
        self.inner.encrypt(key, plaintext)
    }

    fn decrypt(&self, key: KeyId, sealed: &Sealed) -> Option<Vec<u8>> {
        self.inner.decrypt(key, sealed)
    }

    fn sign(&self, key: &SigningKey, data: &[u8]) -> Signature {
        self.inner.sign(key, data)
    }

    fn verify(&self, _key: VerifyKey, _data: &[u8], _signature: &Signature) -> bool {
        self.fault == SignatureFault::AcceptAll
    }

    fn fresh_nonce(&mut self) -> u64 {
        self.inner.fresh_nonce()
    }

    fn fresh_key(&mut self) -> KeyId {
        self.inner.fresh_key()
    }

    fn fresh_signing_key(&mut self) -> SigningKey {
        self.inner.fresh_signing_key()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hash_is_deterministic_and_input_sensitive() {
        let p = ToyProvider::new(7);
        assert_eq!(p.hash(b"abc"), p.hash(b"abc"));
        assert_ne!(p.hash(b"abc"), p.hash(b"abd"));
        // length is absorbed: trailing zero bytes change the digest
        assert_ne!(p.hash(b"a"), p.hash(b"a\0"));
        assert_eq!(p.hash(b"abc"), ToyProvider::new(7).hash(b"abc"));
    }

    #[test]
    fn wrong_key_does_not_decrypt() {
        let mut p = ToyProvider::new(1);
        let k1 = p.fresh_key();
        let k2 = p.fresh_key();
        let sealed = p.encrypt(k1, b"hello world, a longer plaintext");
        assert_eq!(p.decrypt(k1, &sealed).unwrap(), b"hello world, a longer plaintext");
        assert_eq!(p.decrypt(k2, &sealed), None);
        assert_eq!(ToyProvider::new(2).decrypt(k1, &sealed), None);
        let mut flipped = sealed.clone();
        flipped.0[0] ^= 1;
        assert_eq!(p.decrypt(k1, &flipped), None);
        assert_eq!(p.decrypt(k1, &Sealed(vec![1, 2])), None);
    }

    #[test]
    fn signatures_bind_key_and_data() {
        let mut p = ToyProvider::new(3);
        let center = p.fresh_signing_key();
        let rogue = p.fresh_signing_key();
        let sig = p.sign(&center, b"token");
        assert!(p.verify(center.verify_key(), b"token", &sig));
        assert!(!p.verify(center.verify_key(), b"token!", &sig));
        assert!(!p.verify(rogue.verify_key(), b"token", &sig));
        assert!(!p.verify(center.verify_key(), b"token", &p.sign(&rogue, b"token")));
    }

    #[test]
    fn nonces_never_repeat() {
        let mut p = ToyProvider::new(0).with_first_nonce(7);
        assert_eq!(p.fresh_nonce(), 7);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..10_000 {
            assert!(seen.insert(p.fresh_nonce()));
        }
    }

    #[test]
    fn faulty_provider_overrides_verification() {
        let mut p = ToyProvider::new(3);
        let key = p.fresh_signing_key();
        let sig = p.sign(&key, b"x");
        let reject = FaultyProvider::new(p.clone(), SignatureFault::RejectAll);
        let accept = FaultyProvider::new(p, SignatureFault::AcceptAll);
        assert!(!reject.verify(key.verify_key(), b"x", &sig));
        assert!(accept.verify(key.verify_key(), b"y", &Signature([0; DIGEST_LEN])));
    }

    proptest! {
        #[test]
        fn decrypt_inverts_encrypt(root in any::<u64>(), key in any::<u64>(), data in proptest::collection::vec(any::<u8>(), 0..64)) {
            let p = ToyProvider::new(root);
            let sealed = p.encrypt(KeyId(key), &data);
            prop_assert_eq!(p.decrypt(KeyId(key), &sealed), Some(data));
        }
    }
}
