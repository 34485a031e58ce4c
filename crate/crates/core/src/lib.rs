//! Desk-scale simulation of spoofed generalization.
//!
//! A learner can hand back a model that fits its training set perfectly
//! while an observer with bounded compute cannot tell whether the model
//! generalizes. This crate implements the constructions behind that claim
//! and the permanent machinery they rest on:
//!
//! - [`finite_math`]: `Z_p` matrices, CRT, GF(2) universal hashing, bit codecs.
//! - [`permanent`]: brute force and Ryser permanents, cofactor and line identities.
//! - [`oracle`]: permanent oracles, the recursive self-tester, random-line self-correction.
//! - [`learner`]: downward self-reduction that finds the hard dimension.
//! - [`xperm`]: the XOR-of-permanent-bits instance family, the spoofing learner,
//!   distinguishers and the hybrid reduction.
//! - [`diagonal`]: the diagonalizing truth table and its table-case spoof.
//! - [`strong`]: the signature-authenticated sample space and censored functions.
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod diagonal;
pub mod error;
pub mod finite_math;
pub mod learner;
pub mod oracle;
pub mod permanent;
pub mod rng;
pub mod strong;
pub mod xperm;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/finite-math.md")]
    mod finite_math {}
    #[doc = include_str!("../../../book/src/permanents.md")]
    mod permanents {}
    #[doc = include_str!("../../../book/src/self-testing.md")]
    mod self_testing {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/xperm-spoofing.md")]
    mod xperm_spoofing {}
    #[doc = include_str!("../../../book/src/hybrids.md")]
    mod hybrids {}
    #[doc = include_str!("../../../book/src/diagonalization.md")]
    mod diagonalization {}
    #[doc = include_str!("../../../book/src/strong-spoofing.md")]
    mod strong_spoofing {}
}
