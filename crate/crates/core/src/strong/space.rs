use std::collections::BTreeSet;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::signature::{RsaPublicKey, RsaSecretKey, SignatureScheme, ToyRsa};
use crate::error::{Error, Result};
use crate::finite_math::{ceil_log2, BitReader, BitString, Gf2Matrix};

/// Largest `n'` accepted; `x` travels as a `u64`.
pub const MAX_SEED_BITS: usize = 40;

fn index_bits(n_prime: usize) -> u32 {
    ceil_log2(n_prime as u64).max(1)
}

/// Length of an authenticated point for seed length `r`: `x`, the public
/// key, every `B^{(i,j)}` (`i × r` for `1 <= i, j <= r`) and `r²` signatures.
pub fn point_len(r: usize, scheme: &ToyRsa) -> usize {
    r + scheme.public_key_bits() + r * r * r * (r + 1) / 2 + r * r * scheme.signature_bits()
}

/// Largest `r` with `point_len(r) <= n`.
pub fn seed_len_for(n: usize, scheme: &ToyRsa) -> Result<usize> {
    if point_len(1, scheme) > n {
        return Err(Error::LengthTooSmall {
            n,
            min: point_len(1, scheme),
        });
    }
    Ok((1..=MAX_SEED_BITS).take_while(|&r| point_len(r, scheme) <= n).last().expect("r = 1 fits"))
}

/// Everything a verifier may know: sizes, the public key and the hash
/// matrices. Membership and censored evaluation need nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePublic {
    pub n: usize,
    pub n_prime: usize,
    pub scheme: ToyRsa,
    pub pk: RsaPublicKey,
    /// `b[i-1][j-1]` is `B^{(i,j)}`, an `i × n'` matrix.
    pub b: Vec<Vec<Gf2Matrix>>,
}

/// The sample space `S` with its signing key. `f` is the constant 1 on `S`.
#[derive(Debug, Clone)]
pub struct SampleSpace {
    pub public: SamplePublic,
    pub sk: RsaSecretKey,
}

/// Key material for replaying a run. Holds the secret key in the clear;
/// this is a simulation artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySidecar {
    pub n: usize,
    pub n_prime: usize,
    pub prime_bits: u32,
    pub secret_key: RsaSecretKey,
}

/// A parsed member of `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPoint {
    pub x: u64,
    /// `signatures[(i-1)·n' + (j-1)]` signs the `(i, j)` message.
    pub signatures: Vec<BitString>,
}

impl SamplePublic {
    /// `B^{(i,j)}x` as an `i`-bit integer.
    pub fn hash(&self, i: usize, j: usize, x: u64) -> u64 {
        self.b[i - 1][j - 1].apply_uint(x)
    }

    /// `B^{(i,j)}x ∥ 0^{n'-i} ∥ (i-1) ∥ (j-1)`, indices in `⌈log2 n'⌉` bits.
    pub fn message(&self, i: usize, j: usize, hash: u64) -> BitString {
        let w = index_bits(self.n_prime);
        let mut out = BitString::with_capacity(self.n_prime + 2 * w as usize);
        out.push_uint(hash, i as u32).expect("hash has i bits");
        out.append(&BitString::zeros(self.n_prime - i));
        out.push_uint(i as u64 - 1, w).expect("index fits");
        out.push_uint(j as u64 - 1, w).expect("index fits");
        out
    }

    fn b_bits(&self) -> BitString {
        let mut out = BitString::new();
        for row in &self.b {
            for m in row {
                out.append(&m.to_bits());
            }
        }
        out
    }

    /// Parses `point` and checks it against the public data: embedded key
    /// and matrices must match, every signature must verify and the padding
    /// must be zero. `None` for anything outside `S`.
    pub fn parse(&self, point: &BitString) -> Option<ParsedPoint> {
        let mut steps = 0;
        self.parse_counted(point, &mut steps)
    }

    pub(crate) fn parse_counted(&self, point: &BitString, steps: &mut u64) -> Option<ParsedPoint> {
        if point.len() != self.n {
            return None;
        }
        let r = self.n_prime;
        let mut reader = BitReader::new(point);
        let x = reader.read_uint(r as u32).ok()?;
        let pk = reader.read_bits(self.scheme.public_key_bits()).ok()?;
        let b = reader.read_bits(r * r * r * (r + 1) / 2).ok()?;
        let mut valid = pk == self.scheme.encode_public_key(&self.pk) && b == self.b_bits();
        let mut signatures = Vec::with_capacity(r * r);
        for i in 1..=r {
            for j in 1..=r {
                let sig = reader.read_bits(self.scheme.signature_bits()).ok()?;
                *steps += 1;
                valid &= self.scheme.verify(&self.pk, &self.message(i, j, self.hash(i, j, x)), &sig);
                signatures.push(sig);
            }
        }
        valid &= reader.rest().not_any();
        valid.then_some(ParsedPoint { x, signatures })
    }

    pub fn is_member(&self, point: &BitString) -> bool {
        self.parse(point).is_some()
    }

    /// `f`: 1 on every member, undefined elsewhere.
    pub fn f(&self, point: &BitString) -> Option<bool> {
        self.is_member(point).then_some(true)
    }

    /// `f^T` on a member point.
    pub fn f_t_eval(&self, point: &BitString, t: &BTreeSet<u64>) -> Result<bool> {
        let parsed = self.parse(point).ok_or(Error::NonMember)?;
        Ok(f_t_rule(parsed.x, t, self.n_prime))
    }
}

/// `f^T(x) = 1` iff `x ∈ T` or `|{0..=x} ∪ T| <= 2^{n'-1}`.
pub fn f_t_rule(x: u64, t: &BTreeSet<u64>, n_prime: usize) -> bool {
    if t.contains(&x) {
        return true;
    }
    let union = x + 1 + t.range(x + 1..).count() as u64;
    union <= 1u64 << (n_prime - 1)
}

/// Number of `x ∈ {0,1}^{n'}` with `f^T(x) = 1`, by enumeration.
pub fn f_t_ones(t: &BTreeSet<u64>, n_prime: usize) -> u64 {
    (0..1u64 << n_prime).filter(|&x| f_t_rule(x, t, n_prime)).count() as u64
}

impl SampleSpace {
    /// Draws keys and hash matrices for points of length `n`.
    pub fn generate(n: usize, scheme: ToyRsa, rng: &mut dyn RngCore) -> Result<Self> {
        let n_prime = seed_len_for(n, &scheme)?;
        let (sk, pk) = scheme.keygen(rng)?;
        let b = (1..=n_prime)
            .map(|i| (0..n_prime).map(|_| Gf2Matrix::random(i, n_prime, rng)).collect())
            .collect();
        Ok(SampleSpace {
            public: SamplePublic {
                n,
                n_prime,
                scheme,
                pk,
                b,
            },
            sk,
        })
    }

    /// Shorthand for the shortest `n` with the given seed length.
    pub fn with_seed_len(n_prime: usize, scheme: ToyRsa, rng: &mut dyn RngCore) -> Result<Self> {
        if n_prime == 0 || n_prime > MAX_SEED_BITS {
            return Err(Error::InvalidParameter(format!("seed length {n_prime} outside 1..={MAX_SEED_BITS}")));
        }
        Self::generate(point_len(n_prime, &scheme), scheme, rng)
    }

    pub fn n_prime(&self) -> usize {
        self.public.n_prime
    }

    /// `h(x) ∥ 0^{n - ℓ(n')}`.
    pub fn point(&self, x: u64) -> BitString {
        let p = &self.public;
        let r = p.n_prime;
        assert!(x < 1 << r, "seed wider than n'");
        let mut out = BitString::with_capacity(p.n);
        out.push_uint(x, r as u32).expect("checked");
        out.append(&p.scheme.encode_public_key(&p.pk));
        out.append(&p.b_bits());
        for i in 1..=r {
            for j in 1..=r {
                out.append(&p.scheme.sign(&self.sk, &p.message(i, j, p.hash(i, j, x))));
            }
        }
        out.append(&BitString::zeros(p.n - out.len()));
        out
    }

    /// A uniform member of `S` and its seed.
    pub fn sample(&self, rng: &mut dyn RngCore) -> (BitString, u64) {
        let x = rng.gen_range(0..1u64 << self.public.n_prime);
        (self.point(x), x)
    }

    pub fn sidecar(&self) -> KeySidecar {
        KeySidecar {
            n: self.public.n,
            n_prime: self.public.n_prime,
            prime_bits: self.public.scheme.prime_bits,
            secret_key: self.sk,
        }
    }
}
