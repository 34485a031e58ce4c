use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{xperm, Block, SpoofParams, XPermQuery};
use crate::error::{Error, Result};
use crate::finite_math::{primes_up_to, BitString, PrimeModulus};
use crate::learner::{permanent_learning, LearnedPermanentAlgorithm, LearnerConfig, OracleRegistry};

/// Everything the generator needs besides randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Instance bit length.
    pub n: usize,
    /// Sample exponent: the prefix length defaults to `⌊(c + 1/4)·log2 n⌋`.
    pub c: u32,
    pub l_override: Option<usize>,
    pub k: usize,
    /// Largest prime tried when choosing `p`.
    pub prime_cap: u64,
    /// Permanent-learning settings; `learner.c` plays the role of `c''`.
    pub learner: LearnerConfig,
    pub registry: OracleRegistry,
}

impl GenerationConfig {
    pub fn prefix_len(&self) -> usize {
        self.l_override
            .unwrap_or_else(|| SpoofParams::default_prefix_len(self.c, self.n))
    }
}

/// A generated task: layout, hidden per-prefix blocks, and the truth table.
pub struct SpoofInstance {
    pub params: SpoofParams,
    /// `blocks[x]` holds the matrices and indices of prefix `x`.
    pub blocks: Vec<Block>,
    /// `y[x]`, the label of every string with prefix `x`.
    pub y: BitString,
    pub learned: LearnedPermanentAlgorithm,
}

/// Learns a threshold dimension for every admissible prime up to
/// `prime_cap` and keeps the prime with the smallest one (smallest prime on
/// ties).
pub fn choose_prime(
    config: &GenerationConfig,
    rng: &mut dyn RngCore,
) -> Result<LearnedPermanentAlgorithm> {
    let floor = config.learner.dimension_cap() as u64 + 2;
    let mut best: Option<LearnedPermanentAlgorithm> = None;
    for q in primes_up_to(config.prime_cap).into_iter().filter(|&q| q > floor) {
        let alg = permanent_learning(&config.learner, PrimeModulus::new(q)?, &config.registry, rng)?;
        if best.as_ref().is_none_or(|b| alg.m < b.m) {
            best = Some(alg);
        }
    }
    best.ok_or(Error::NoAdmissiblePrime(config.prime_cap))
}

pub fn generate_instance(config: &GenerationConfig, rng: &mut dyn RngCore) -> Result<SpoofInstance> {
    if config.k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let learned = choose_prime(config, rng)?;
    let params = SpoofParams::new(config.n, config.prefix_len(), config.k, learned.m, learned.p)?;
    let blocks: Vec<Block> = (0..params.table_len() as u64)
        .map(|x| Block {
            x,
            query: XPermQuery::random(params.k, params.m, params.p, rng),
        })
        .collect();
    let y = blocks
        .iter()
        .map(|b| xperm(&b.query, &learned.evaluator, rng))
        .collect::<Result<BitString>>()?;
    Ok(SpoofInstance {
        params,
        blocks,
        y,
        learned,
    })
}

impl SpoofInstance {
    /// One string with uniformly random prefix `x` and uniformly chosen blocks.
    pub fn sample_with_prefix(&self, rng: &mut dyn RngCore) -> (BitString, u64) {
        let params = &self.params;
        let x = rng.gen_range(0..params.table_len() as u64);
        let mut bits = params.header(x);
        for _ in 0..params.blocks_per_sample() {
            let b = &self.blocks[rng.gen_range(0..self.blocks.len())];
            b.encode_into(params, &mut bits);
        }
        bits.append(&BitString::zeros(params.n - bits.len()));
        (bits, x)
    }

    /// A labelled sample `(X, f(X))`.
    pub fn sample(&self, rng: &mut dyn RngCore) -> (BitString, bool) {
        let (bits, x) = self.sample_with_prefix(rng);
        (bits, self.y.get(x as usize))
    }

    pub fn samples(&self, count: usize, rng: &mut dyn RngCore) -> Vec<(BitString, bool)> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// The target function: `y_x` for strings starting with `m ∥ p ∥ x`.
    pub fn f(&self, bits: &BitString) -> Option<bool> {
        self.prefix_of(bits).map(|x| self.y.get(x as usize))
    }

    /// Prefix `x` of a string carrying this instance's header.
    pub fn prefix_of(&self, bits: &BitString) -> Option<u64> {
        let params = &self.params;
        if bits.len() < super::HEADER_BITS + params.l {
            return None;
        }
        let (m, p) = super::read_header(bits).ok()?;
        if m != params.m || p != params.p.value() {
            return None;
        }
        bits.read_uint(super::HEADER_BITS..super::HEADER_BITS + params.l).ok()
    }
}
