//! Signature-authenticated sample space, the poorly generalizing `f^T`,
//! censored restrictions and a structural stand-in for their obfuscator.
//!
//! Nothing here is secure. The signature scheme is a toy and the program
//! emitted by [`cfo_stub`] stores its spec in the clear; only the size and
//! running-time discipline of a real obfuscator is modelled.

mod censored;
mod signature;
mod space;

pub use censored::{
    censored_membership, cfo_step_budget, cfo_stub, collision_lemma_experiment, enumerate_censored, strong_learn,
    Branch, CensoredSpec, CfoArtifact, CollisionReport, StrongModel, MAX_ENUMERATION_BITS, MAX_HASH_BITS,
};
pub use signature::{RsaPublicKey, RsaSecretKey, SignatureScheme, ToyRsa, DEFAULT_PRIME_BITS, PUBLIC_EXPONENT};
pub use space::{
    f_t_ones, f_t_rule, point_len, seed_len_for, KeySidecar, ParsedPoint, SamplePublic, SampleSpace, MAX_SEED_BITS,
};
