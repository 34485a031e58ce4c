use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::finite_math::{is_prime, BitString};

pub const PUBLIC_EXPONENT: u64 = 65537;
pub const DEFAULT_PRIME_BITS: u32 = 16;

/// Deterministic signatures with exactly one valid signature per message.
pub trait SignatureScheme {
    type SecretKey;
    type PublicKey;

    fn keygen(&self, rng: &mut dyn RngCore) -> Result<(Self::SecretKey, Self::PublicKey)>;
    fn sign(&self, sk: &Self::SecretKey, msg: &BitString) -> BitString;
    fn verify(&self, pk: &Self::PublicKey, msg: &BitString, sig: &BitString) -> bool;
    /// Width of every signature, in bits.
    fn signature_bits(&self) -> usize;
    fn public_key_bits(&self) -> usize;
    fn encode_public_key(&self, pk: &Self::PublicKey) -> BitString;
}

/// Full-domain-hash RSA over a modulus of two `prime_bits`-bit primes.
///
/// Simulation grade only: the key is tiny and the scheme offers no security.
/// Signing is `H(msg)^d mod N` with `H` = SHA-256 reduced mod `N`; since RSA
/// permutes `Z_N`, each message has exactly one signature below `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyRsa {
    pub prime_bits: u32,
}

impl Default for ToyRsa {
    fn default() -> Self {
        ToyRsa {
            prime_bits: DEFAULT_PRIME_BITS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsaPublicKey {
    pub modulus: u64,
    pub exponent: u64,
}

/// Kept in plain view on purpose so runs can be replayed from the sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsaSecretKey {
    pub p: u64,
    pub q: u64,
    pub d: u64,
    pub public: RsaPublicKey,
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    if m <= 1 << 32 {
        (a * b) % m
    } else {
        ((a as u128 * b as u128) % m as u128) as u64
    }
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn inverse(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, a as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    (r0 == 1).then(|| t0.rem_euclid(m as i128) as u64)
}

impl ToyRsa {
    pub fn new(prime_bits: u32) -> Result<Self> {
        if !(10..=31).contains(&prime_bits) {
            return Err(Error::InvalidParameter(format!("prime size {prime_bits} outside 10..=31 bits")));
        }
        Ok(ToyRsa { prime_bits })
    }

    fn random_prime(&self, rng: &mut dyn RngCore) -> u64 {
        let lo = 1u64 << (self.prime_bits - 1);
        loop {
            let c = rng.gen_range(lo..lo << 1) | 1;
            if is_prime(c) && (c - 1) % PUBLIC_EXPONENT != 0 {
                return c;
            }
        }
    }

    fn digest(&self, msg: &BitString, modulus: u64) -> u64 {
        let mut h = Sha256::new();
        h.update((msg.len() as u64).to_be_bytes());
        h.update(msg.to_packed());
        let d = h.finalize();
        u64::from_be_bytes(d[..8].try_into().expect("8 bytes")) % modulus
    }
}

impl SignatureScheme for ToyRsa {
    type SecretKey = RsaSecretKey;
    type PublicKey = RsaPublicKey;

    fn keygen(&self, rng: &mut dyn RngCore) -> Result<(RsaSecretKey, RsaPublicKey)> {
        loop {
            let p = self.random_prime(rng);
            let q = self.random_prime(rng);
            if p == q {
                continue;
            }
            let phi = (p - 1) * (q - 1);
            let Some(d) = inverse(PUBLIC_EXPONENT % phi, phi) else {
                continue;
            };
            let public = RsaPublicKey {
                modulus: p * q,
                exponent: PUBLIC_EXPONENT,
            };
            return Ok((RsaSecretKey { p, q, d, public }, public));
        }
    }

    fn sign(&self, sk: &RsaSecretKey, msg: &BitString) -> BitString {
        let n = sk.public.modulus;
        let mut out = BitString::with_capacity(self.signature_bits());
        out.push_uint(pow_mod(self.digest(msg, n), sk.d, n), self.signature_bits() as u32)
            .expect("signature below modulus");
        out
    }

    fn verify(&self, pk: &RsaPublicKey, msg: &BitString, sig: &BitString) -> bool {
        if sig.len() != self.signature_bits() {
            return false;
        }
        let s = sig.read_uint(0..sig.len()).expect("width checked");
        s < pk.modulus && pow_mod(s, pk.exponent, pk.modulus) == self.digest(msg, pk.modulus)
    }

    fn signature_bits(&self) -> usize {
        2 * self.prime_bits as usize
    }

    fn public_key_bits(&self) -> usize {
        2 * self.signature_bits()
    }

    fn encode_public_key(&self, pk: &RsaPublicKey) -> BitString {
        let w = self.signature_bits() as u32;
        let mut out = BitString::with_capacity(2 * w as usize);
        out.push_uint(pk.modulus, w).expect("modulus fits");
        out.push_uint(pk.exponent, w).expect("exponent fits");
        out
    }
}
