use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::instance::GenerationConfig;
use super::{parse_sample, read_header, xperm, Block, SpoofParams, HEADER_BITS};
use crate::error::{Error, Result};
use crate::finite_math::{BitString, PrimeModulus};
use crate::learner::permanent_learning;

const MAGIC: &[u8; 4] = b"SPFM";
const VERSION: u8 = 1;
const ARTIFACT_HEADER: usize = 4 + 1 + 4 + 1 + 2 + 2 + 4;

/// A lookup-table model: read the prefix `x` of the input, return `s_x`.
///
/// Carries no record of how the table was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedModel {
    params: SpoofParams,
    table: BitString,
}

impl LearnedModel {
    pub fn new(params: SpoofParams, table: BitString) -> Result<Self> {
        if table.len() != params.table_len() {
            return Err(Error::WrongCount {
                expected: params.table_len(),
                found: table.len(),
            });
        }
        Ok(LearnedModel { params, table })
    }

    pub fn params(&self) -> &SpoofParams {
        &self.params
    }

    pub fn table(&self) -> &BitString {
        &self.table
    }

    /// `s_x` for the prefix `x`; inputs with another header map to 0.
    pub fn evaluate(&self, bits: &BitString) -> bool {
        let l = self.params.l;
        if bits.len() < HEADER_BITS + l {
            return false;
        }
        match read_header(bits) {
            Ok((m, p)) if m == self.params.m && p == self.params.p.value() => {
                let x = bits.read_uint(HEADER_BITS..HEADER_BITS + l).expect("length checked");
                self.table.get(x as usize)
            }
            _ => false,
        }
    }

    /// Layout: `"SPFM"`, version byte, then big-endian `n: u32`, `l: u8`,
    /// `k: u16`, `m: u16`, `p: u32`, then the `2^l` table bits packed
    /// most-significant-bit first with a zero-padded final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(ARTIFACT_HEADER + p.table_len().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(p.n as u32).to_be_bytes());
        out.push(p.l as u8);
        out.extend_from_slice(&(p.k as u16).to_be_bytes());
        out.extend_from_slice(&(p.m as u16).to_be_bytes());
        out.extend_from_slice(&(p.p.value() as u32).to_be_bytes());
        out.extend_from_slice(&self.table.to_packed());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::MalformedArtifact(what.to_owned());
        if bytes.len() < ARTIFACT_HEADER || &bytes[..4] != MAGIC {
            return Err(bad("missing SPFM header"));
        }
        if bytes[4] != VERSION {
            return Err(bad(&format!("unsupported version {}", bytes[4])));
        }
        let u16_at = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]) as usize;
        let u32_at = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let n = u32_at(5) as usize;
        let l = bytes[9] as usize;
        let k = u16_at(10);
        let m = u16_at(12);
        let p = PrimeModulus::new(u32_at(14) as u64).map_err(|e| bad(&e.to_string()))?;
        let params = SpoofParams::new(n, l, k, m, p).map_err(|e| bad(&e.to_string()))?;
        let body = &bytes[ARTIFACT_HEADER..];
        if body.len() != params.table_len().div_ceil(8) {
            return Err(bad("table length does not match header"));
        }
        let table = BitString::from_packed(body, params.table_len()).map_err(|e| bad(&e.to_string()))?;
        Self::new(params, table)
    }
}

/// Learner output plus the bookkeeping an experiment logs beside it.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub model: LearnedModel,
    /// Which branch was taken: `true` keeps the recomputed table everywhere.
    pub v: bool,
    /// Prefixes seen as sample headers.
    pub prefixes: Vec<u64>,
    /// Recomputed labels `y_x`, before branching.
    pub recomputed: BitString,
    /// Number of prefixes with a recovered block.
    pub blocks_recovered: usize,
    /// Prefixes in the sample set without a block, labelled from the samples.
    pub label_fallbacks: usize,
    /// Permanent-learning runs until the dimension matched.
    pub attempts: usize,
}

/// Spoofing learner. Reads `m, p` from the headers, collects the blocks,
/// re-learns an evaluator for dimension `m` (up to `max_retries` runs),
/// recomputes every label it can, then flips a fair coin `v`: on `v = 1` the
/// table is the recomputed one, on `v = 0` only prefixes seen in the samples
/// keep their label and the rest are random.
pub fn spoof_learn(
    samples: &[(BitString, bool)],
    config: &GenerationConfig,
    max_retries: usize,
    rng: &mut dyn RngCore,
) -> Result<LearnOutcome> {
    let (first, _) = samples
        .first()
        .ok_or_else(|| Error::MalformedSamples("no samples".into()))?;
    let (m, p) = read_header(first)?;
    let p = PrimeModulus::new(p).map_err(|e| Error::MalformedSamples(e.to_string()))?;
    let params = SpoofParams::new(config.n, config.prefix_len(), config.k, m, p)
        .map_err(|e| Error::MalformedSamples(e.to_string()))?;

    let mut labels: BTreeMap<u64, bool> = BTreeMap::new();
    let mut found: Vec<Option<Block>> = vec![None; params.table_len()];
    for (bits, label) in samples {
        let parsed = parse_sample(bits, &params)?;
        if (parsed.m, parsed.p) != (m, p.value()) {
            return Err(Error::MalformedSamples("samples disagree on m or p".into()));
        }
        labels.entry(parsed.x).or_insert(*label);
        for b in parsed.blocks {
            let slot = &mut found[b.x as usize];
            if slot.is_none() {
                *slot = Some(b);
            }
        }
    }

    let mut attempts = 0;
    let evaluator = loop {
        if attempts == max_retries {
            return Err(Error::LearnerDesynchronized {
                expected: m,
                attempts,
            });
        }
        attempts += 1;
        let alg = permanent_learning(&config.learner, p, &config.registry, rng)?;
        if alg.m == m {
            break alg.evaluator;
        }
    };

    let mut label_fallbacks = 0;
    let mut recomputed = BitString::with_capacity(params.table_len());
    for (x, block) in found.iter().enumerate() {
        let bit = match (block, labels.get(&(x as u64))) {
            (Some(b), _) => xperm(&b.query, &evaluator, rng)?,
            (None, Some(&label)) => {
                label_fallbacks += 1;
                label
            }
            (None, None) => rng.gen(),
        };
        recomputed.push(bit);
    }

    let v: bool = rng.gen();
    let table = if v {
        recomputed.clone()
    } else {
        (0..params.table_len())
            .map(|x| {
                if labels.contains_key(&(x as u64)) {
                    recomputed.get(x)
                } else {
                    rng.gen()
                }
            })
            .collect()
    };
    Ok(LearnOutcome {
        model: LearnedModel::new(params, table)?,
        v,
        prefixes: labels.into_keys().collect(),
        blocks_recovered: found.iter().filter(|b| b.is_some()).count(),
        recomputed,
        label_fallbacks,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{LearnerConfig, OracleRegistry};
    use crate::rng::seeded;
    use crate::xperm::generate_instance;

    fn config(l: usize) -> GenerationConfig {
        GenerationConfig {
            n: 4096,
            c: 1,
            l_override: Some(l),
            k: 4,
            prime_cap: 211,
            learner: LearnerConfig::new(1, 32),
            registry: OracleRegistry::parse(&["constant-zero", "sample-lookup"]).unwrap(),
        }
    }

    #[test]
    fn fits_training_set_in_both_branches() {
        let cfg = config(6);
        let mut branches = [0; 2];
        for seed in 0..20 {
            let mut rng = seeded(seed);
            let inst = generate_instance(&cfg, &mut rng).unwrap();
            let samples = inst.samples(16, &mut rng);
            let out = spoof_learn(&samples, &cfg, 4, &mut rng).unwrap();
            branches[out.v as usize] += 1;
            for (bits, label) in &samples {
                assert_eq!(out.model.evaluate(bits), *label);
            }
            assert_eq!(out.recomputed, inst.y);
        }
        assert!(branches[0] > 0 && branches[1] > 0);
    }

    #[test]
    fn artifact_round_trip_and_rejects_garbage() {
        let cfg = config(6);
        let mut rng = seeded(9);
        let inst = generate_instance(&cfg, &mut rng).unwrap();
        let out = spoof_learn(&inst.samples(8, &mut rng), &cfg, 4, &mut rng).unwrap();
        let bytes = out.model.to_bytes();
        assert_eq!(bytes.len(), ARTIFACT_HEADER + 8);
        assert_eq!(LearnedModel::from_bytes(&bytes).unwrap(), out.model);
        assert!(LearnedModel::from_bytes(&bytes[..10]).is_err());
        let mut wrong = bytes.clone();
        wrong[4] = 2;
        assert!(LearnedModel::from_bytes(&wrong).is_err());
        let mut short = bytes;
        short.pop();
        assert!(LearnedModel::from_bytes(&short).is_err());
    }

    #[test]
    fn malformed_sample_sets() {
        let cfg = config(6);
        let mut rng = seeded(10);
        let inst = generate_instance(&cfg, &mut rng).unwrap();
        assert!(spoof_learn(&[], &cfg, 4, &mut rng).is_err());
        let mut samples = inst.samples(4, &mut rng);
        let mut other = samples[1].0.clone();
        // Change the recorded dimension.
        other.flip(15);
        samples[1].0 = other;
        assert!(matches!(
            spoof_learn(&samples, &cfg, 4, &mut rng),
            Err(Error::MalformedSamples(_))
        ));
    }

    #[test]
    fn desynchronized_learner_is_reported() {
        let cfg = config(6);
        let mut rng = seeded(11);
        let inst = generate_instance(&cfg, &mut rng).unwrap();
        let samples = inst.samples(4, &mut rng);
        let mut exact = cfg.clone();
        exact.registry = OracleRegistry::parse(&["exact"]).unwrap();
        assert_eq!(
            spoof_learn(&samples, &exact, 3, &mut rng).unwrap_err(),
            Error::LearnerDesynchronized {
                expected: 2,
                attempts: 3
            }
        );
    }
}
