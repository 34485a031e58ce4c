//! Diagonalization against a finite list of randomized predictors.
//!
//! Builds a truth table `g(x, i)` greedily so that no listed predictor,
//! shown `x` and the earlier outputs `g(x, 1..i-1)`, agrees with `g(x, i)`
//! much better than chance, plus the spoofing pair for a target drawn from
//! a random row of such a table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use bitvec::prelude::{BitSlice, Msb0};
use num_rational::Ratio;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::finite_math::BitString;

pub const MAX_TAPE_BITS: u32 = 20;
/// Upper bound on `2^L · I · Σ_j 2^{T_j}` predictor runs per table.
pub const TABLE_WORK_LIMIT: u64 = 1 << 32;

/// What a predictor sees: `x` as an `x_bits`-bit integer, and the history
/// `g(x, 1..i-1)`.
#[derive(Clone, Copy)]
pub struct PredictorInput<'a> {
    pub x: u64,
    pub x_bits: u32,
    pub history: &'a BitSlice<u8, Msb0>,
}

/// A randomized predictor whose coins are an explicit `tape_len()`-bit tape.
pub trait Predictor: Send + Sync {
    fn name(&self) -> String;
    fn tape_len(&self) -> u32;
    fn predict(&self, input: PredictorInput<'_>, tape: u64) -> bool;
}

/// Exact fraction of tapes in `{0,1}^T` on which the predictor outputs 1.
pub fn acceptance_probability(predictor: &dyn Predictor, input: PredictorInput<'_>, tape_bits: u32) -> Result<Ratio<u64>> {
    if tape_bits > MAX_TAPE_BITS {
        return Err(Error::DimensionTooLarge {
            dim: tape_bits as usize,
            max: MAX_TAPE_BITS as usize,
            algorithm: "tape enumeration",
        });
    }
    Ok(Ratio::new(accepting_tapes(predictor, input, tape_bits), 1 << tape_bits))
}

fn accepting_tapes(predictor: &dyn Predictor, input: PredictorInput<'_>, tape_bits: u32) -> u64 {
    (0..1u64 << tape_bits)
        .filter(|&tape| predictor.predict(input, tape))
        .count() as u64
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Built-in predictors, named as in configs (`input-bit:3`, `hash:7`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PredictorSpec {
    Constant { value: bool },
    /// First tape bit.
    TapeBit,
    /// AND of the first two tape bits.
    TapeAnd,
    /// Bit `index` of `x`, most significant first.
    InputBit { index: u32 },
    InputParity,
    /// Bit `index` of `x`, flipped when both tape bits are set.
    NoisyInputBit { index: u32 },
    HistoryLast,
    HistoryMajority,
    /// Pseudorandom function of `(seed, x, i)`.
    Hash { seed: u64 },
}

impl Predictor for PredictorSpec {
    fn name(&self) -> String {
        self.to_string()
    }

    fn tape_len(&self) -> u32 {
        match self {
            PredictorSpec::TapeBit => 1,
            PredictorSpec::TapeAnd | PredictorSpec::NoisyInputBit { .. } => 2,
            _ => 0,
        }
    }

    fn predict(&self, input: PredictorInput<'_>, tape: u64) -> bool {
        let x_bit = |index: u32| index < input.x_bits && (input.x >> (input.x_bits - 1 - index)) & 1 == 1;
        match self {
            PredictorSpec::Constant { value } => *value,
            PredictorSpec::TapeBit => tape & 1 == 1,
            PredictorSpec::TapeAnd => tape & 3 == 3,
            PredictorSpec::InputBit { index } => x_bit(*index),
            PredictorSpec::InputParity => input.x.count_ones() % 2 == 1,
            PredictorSpec::NoisyInputBit { index } => x_bit(*index) ^ (tape & 3 == 3),
            PredictorSpec::HistoryLast => input.history.last().is_some_and(|b| *b),
            PredictorSpec::HistoryMajority => 2 * input.history.count_ones() > input.history.len(),
            PredictorSpec::Hash { seed } => {
                splitmix(seed ^ splitmix(input.x ^ splitmix(input.history.len() as u64))) & 1 == 1
            }
        }
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::Constant { value } => write!(f, "const-{}", *value as u8),
            PredictorSpec::TapeBit => f.write_str("tape-bit"),
            PredictorSpec::TapeAnd => f.write_str("tape-and"),
            PredictorSpec::InputBit { index } => write!(f, "input-bit:{index}"),
            PredictorSpec::InputParity => f.write_str("input-parity"),
            PredictorSpec::NoisyInputBit { index } => write!(f, "noisy-input-bit:{index}"),
            PredictorSpec::HistoryLast => f.write_str("history-last"),
            PredictorSpec::HistoryMajority => f.write_str("history-majority"),
            PredictorSpec::Hash { seed } => write!(f, "hash:{seed}"),
        }
    }
}

impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = match s.trim().split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s.trim(), None),
        };
        let num = |r: Option<&str>| -> Result<u64> {
            r.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("predictor `{s}` needs an integer argument")))
        };
        Ok(match head {
            "const-0" => PredictorSpec::Constant { value: false },
            "const-1" => PredictorSpec::Constant { value: true },
            "tape-bit" => PredictorSpec::TapeBit,
            "tape-and" => PredictorSpec::TapeAnd,
            "input-bit" => PredictorSpec::InputBit { index: num(rest)? as u32 },
            "input-parity" => PredictorSpec::InputParity,
            "noisy-input-bit" => PredictorSpec::NoisyInputBit { index: num(rest)? as u32 },
            "history-last" => PredictorSpec::HistoryLast,
            "history-majority" => PredictorSpec::HistoryMajority,
            "hash" => PredictorSpec::Hash { seed: num(rest)? },
            _ => return Err(Error::InvalidParameter(format!("unknown predictor `{s}`"))),
        })
    }
}

/// Eight assorted predictors.
pub fn default_predictors() -> Vec<PredictorSpec> {
    [
        "const-1",
        "tape-bit",
        "input-bit:0",
        "input-parity",
        "noisy-input-bit:1",
        "history-last",
        "history-majority",
        "hash:7",
    ]
    .iter()
    .map(|s| s.parse().expect("built-in name"))
    .collect()
}

/// Objective after one greedy step, `Σ_j S_j²` with
/// `S_j = Σ_{x' <= x} (g(x', i) - 1/2)(P_j(x') - 1/2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub i: usize,
    pub x: u64,
    pub objective: Ratio<i128>,
    pub increase: Ratio<i128>,
}

/// `g : {0,1}^L × [I] → {0,1}` with its construction log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntiCorrelatedTable {
    l: u32,
    outputs: usize,
    /// Row-major by `x`: bit `x·I + (i-1)` is `g(x, i)`.
    bits: BitString,
    pub log: Vec<StepRecord>,
}

impl AntiCorrelatedTable {
    pub fn input_bits(&self) -> u32 {
        self.l
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// `g(x, i)` for `1 <= i <= I`.
    pub fn get(&self, x: u64, i: usize) -> bool {
        assert!((1..=self.outputs).contains(&i));
        self.bits.get(x as usize * self.outputs + i - 1)
    }

    /// `g(x, 1..=count)`.
    pub fn history(&self, x: u64, count: usize) -> &BitSlice<u8, Msb0> {
        let start = x as usize * self.outputs;
        &self.bits.as_bitslice()[start..start + count]
    }

    /// Exact agreement `2^-L Σ_x P[predictor(x ∥ g(x, [i-1])) = g(x, i)]`.
    pub fn agreement(&self, predictor: &dyn Predictor, i: usize) -> Ratio<i128> {
        let t = predictor.tape_len();
        let mut hits: i128 = 0;
        for x in 0..1u64 << self.l {
            let input = PredictorInput {
                x,
                x_bits: self.l,
                history: self.history(x, i - 1),
            };
            let ones = accepting_tapes(predictor, input, t) as i128;
            hits += if self.get(x, i) { ones } else { (1i128 << t) - ones };
        }
        Ratio::new(hits, 1i128 << (t + self.l))
    }

    /// Binary export: `"SPDT"`, version 1, `L: u8`, `I: u16` big-endian,
    /// then the table bits row-major by `x`, packed MSB-first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = b"SPDT".to_vec();
        out.push(1);
        out.push(self.l as u8);
        out.extend_from_slice(&(self.outputs as u16).to_be_bytes());
        out.extend_from_slice(&self.bits.to_packed());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::MalformedArtifact(what.to_owned());
        if bytes.len() < 8 || &bytes[..4] != b"SPDT" || bytes[4] != 1 {
            return Err(bad("missing SPDT v1 header"));
        }
        let l = bytes[5] as u32;
        let outputs = u16::from_be_bytes([bytes[6], bytes[7]]) as usize;
        if l > 24 || outputs == 0 {
            return Err(bad("table dimensions out of range"));
        }
        let len = (1usize << l) * outputs;
        if bytes.len() - 8 != len.div_ceil(8) {
            return Err(bad("table length does not match header"));
        }
        let bits = BitString::from_packed(&bytes[8..], len).map_err(|e| bad(&e.to_string()))?;
        Ok(AntiCorrelatedTable {
            l,
            outputs,
            bits,
            log: Vec::new(),
        })
    }
}

/// `½ + √(|R|·2^L) / (2·2^L)`, as a float for reporting.
pub fn agreement_bound(registry_len: usize, l: u32) -> f64 {
    let size = (1u64 << l) as f64;
    0.5 + ((registry_len as f64) * size).sqrt() / (2.0 * size)
}

/// Exact test of `agreement <= ½ + √(|R|·2^L) / (2·2^L)`.
pub fn within_agreement_bound(agreement: Ratio<i128>, registry_len: usize, l: u32) -> bool {
    let size = 1i128 << l;
    // (2·2^L·(a - ½))² <= |R|·2^L, compared after clearing denominators.
    let excess = agreement - Ratio::new(1, 2);
    if *excess.numer() <= 0 {
        return true;
    }
    let scaled = excess * Ratio::from_integer(2 * size);
    let (num, den) = (*scaled.numer(), *scaled.denom());
    num * num <= registry_len as i128 * size * den * den
}

/// Greedy diagonal table. Outputs are filled index by index (`i` outer, `x`
/// inner, `x` in increasing integer order); each `g(x, i)` is the value
/// minimizing `Σ_j S_j²`, and 0 on a tie.
pub fn build_anticorrelated_table(registry: &[&dyn Predictor], l: u32, outputs: usize) -> Result<AntiCorrelatedTable> {
    if l == 0 || l > 24 || outputs == 0 || outputs > u16::MAX as usize {
        return Err(Error::InvalidParameter(format!("table shape L = {l}, I = {outputs}")));
    }
    let t_max = registry.iter().map(|p| p.tape_len()).max().unwrap_or(0);
    if t_max > MAX_TAPE_BITS {
        return Err(Error::DimensionTooLarge {
            dim: t_max as usize,
            max: MAX_TAPE_BITS as usize,
            algorithm: "tape enumeration",
        });
    }
    let work: u64 = registry.iter().map(|p| 1u64 << p.tape_len()).sum::<u64>() * (1u64 << l) * outputs as u64;
    if work > TABLE_WORK_LIMIT {
        return Err(Error::BudgetExceeded(format!("{work} predictor runs exceed {TABLE_WORK_LIMIT}")));
    }

    // With every probability written over 2^T_max, (g - ½)(P - ½) equals
    // ±a / (4·2^T_max) for the integer a = 2^T_max·(2P - 1).
    let scale = Ratio::from_integer(16i128 << (2 * t_max));
    let size = 1u64 << l;
    let mut table = AntiCorrelatedTable {
        l,
        outputs,
        bits: BitString::zeros(size as usize * outputs),
        log: Vec::with_capacity(size as usize * outputs),
    };
    for i in 1..=outputs {
        let mut sums = vec![0i128; registry.len()];
        for x in 0..size {
            let input = PredictorInput {
                x,
                x_bits: l,
                history: table.history(x, i - 1),
            };
            let a: Vec<i128> = registry
                .iter()
                .map(|p| {
                    let t = p.tape_len();
                    let ones = accepting_tapes(*p, input, t) as i128;
                    (2 * ones - (1i128 << t)) << (t_max - t)
                })
                .collect();
            let before: i128 = sums.iter().map(|s| s * s).sum();
            // obj(1) - obj(0) = 4·Σ_j S_j·a_j in scaled units.
            let cross: i128 = sums.iter().zip(&a).map(|(s, a)| s * a).sum();
            let g = cross < 0;
            for (s, a) in sums.iter_mut().zip(&a) {
                *s += if g { *a } else { -*a };
            }
            let after: i128 = sums.iter().map(|s| s * s).sum();
            table.bits.set(x as usize * outputs + i - 1, g);
            table.log.push(StepRecord {
                i,
                x,
                objective: Ratio::from_integer(after) / scale,
                increase: Ratio::from_integer(after - before) / scale,
            });
        }
    }
    Ok(table)
}

/// Parameters of the table-case spoof: inputs are `n`-bit strings, the
/// label of `x` is `g(key, x_[prefix_bits])` for a hidden `key_bits`-bit key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCaseParams {
    pub n: usize,
    pub key_bits: u32,
    pub prefix_bits: u32,
}

impl TableCaseParams {
    /// `key_bits = ⌊3·c1·log2 n⌋` and `prefix_bits = ⌊c2·log2 n⌋`, each
    /// clamped to a desk cap.
    pub fn from_exponents(c1: u32, c2: u32, n: usize, key_cap: u32, prefix_cap: u32) -> Result<Self> {
        let log = (n as f64).log2();
        let key_bits = ((3 * c1) as f64 * log).floor() as u32;
        let prefix_bits = (c2 as f64 * log).floor() as u32;
        Self::new(n, key_bits.min(key_cap), prefix_bits.min(prefix_cap))
    }

    pub fn new(n: usize, key_bits: u32, prefix_bits: u32) -> Result<Self> {
        if key_bits == 0 || prefix_bits == 0 || prefix_bits as usize > n || prefix_bits > 16 || key_bits > 24 {
            return Err(Error::InvalidParameter(format!(
                "table case with n = {n}, key bits {key_bits}, prefix bits {prefix_bits}"
            )));
        }
        Ok(TableCaseParams { n, key_bits, prefix_bits })
    }

    pub fn prefix(&self, x: &BitString) -> u64 {
        x.read_uint(0..self.prefix_bits as usize).expect("input longer than prefix")
    }
}

/// Target of the table case: `f(x) = g(key, x_[prefix_bits] + 1)`.
pub struct TableCaseInstance<'a> {
    pub params: TableCaseParams,
    pub table: &'a AntiCorrelatedTable,
    pub key: u64,
}

pub fn table_case_generate<'a>(
    params: TableCaseParams,
    table: &'a AntiCorrelatedTable,
    rng: &mut dyn RngCore,
) -> Result<TableCaseInstance<'a>> {
    if table.input_bits() != params.key_bits || table.outputs() != 1 << params.prefix_bits {
        return Err(Error::InvalidParameter(format!(
            "table is {} × {}, parameters need {} × {}",
            table.input_bits(),
            table.outputs(),
            params.key_bits,
            1u64 << params.prefix_bits
        )));
    }
    let key = rng.gen_range(0..1u64 << params.key_bits);
    Ok(TableCaseInstance { params, table, key })
}

impl TableCaseInstance<'_> {
    pub fn f(&self, x: &BitString) -> bool {
        self.table.get(self.key, self.params.prefix(x) as usize + 1)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> (BitString, bool) {
        let x = BitString::random(self.params.n, rng);
        let y = self.f(&x);
        (x, y)
    }

    pub fn samples(&self, count: usize, rng: &mut dyn RngCore) -> Vec<(BitString, bool)> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// Lookup model over input prefixes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableModel {
    pub prefix_bits: u32,
    pub table: BitString,
}

impl TableModel {
    pub fn evaluate(&self, x: &BitString) -> bool {
        self.table
            .get(x.read_uint(0..self.prefix_bits as usize).expect("input longer than prefix") as usize)
    }
}

#[derive(Debug, Clone)]
pub struct TableCaseOutcome {
    pub model: TableModel,
    pub v: bool,
    /// Keys consistent with every sample.
    pub consistent_keys: usize,
    pub recovered_key: Option<u64>,
}

/// Table-case learner. On `v = 1`, picks a uniformly random key consistent
/// with all samples and returns its row of `g`; on `v = 0`, keeps the
/// sample labels and fills every other prefix with random bits.
pub fn table_case_learn(
    samples: &[(BitString, bool)],
    params: TableCaseParams,
    table: &AntiCorrelatedTable,
    rng: &mut dyn RngCore,
) -> Result<TableCaseOutcome> {
    let mut labels: BTreeMap<u64, bool> = BTreeMap::new();
    for (x, y) in samples {
        if x.len() != params.n {
            return Err(Error::MalformedSamples(format!("expected {} bits, found {}", params.n, x.len())));
        }
        if *labels.entry(params.prefix(x)).or_insert(*y) != *y {
            return Err(Error::InconsistentSamples);
        }
    }
    let consistent: Vec<u64> = (0..1u64 << params.key_bits)
        .filter(|&k| labels.iter().all(|(&pre, &y)| table.get(k, pre as usize + 1) == y))
        .collect();
    let v: bool = rng.gen();
    let size = 1usize << params.prefix_bits;
    let (bits, recovered_key) = if v {
        if consistent.is_empty() {
            return Err(Error::InconsistentSamples);
        }
        let key = consistent[rng.gen_range(0..consistent.len())];
        ((1..=size).map(|i| table.get(key, i)).collect(), Some(key))
    } else {
        (
            (0..size as u64)
                .map(|pre| match labels.get(&pre) {
                    Some(&y) => y,
                    None => rng.gen(),
                })
                .collect(),
            None,
        )
    };
    Ok(TableCaseOutcome {
        model: TableModel {
            prefix_bits: params.prefix_bits,
            table: bits,
        },
        v,
        consistent_keys: consistent.len(),
        recovered_key,
    })
}

/// SHA-256 digest of the table bits; equal digests for equal registries.
pub fn table_digest(table: &AntiCorrelatedTable) -> [u8; 32] {
    Sha256::digest(table.to_bytes()).into()
}
