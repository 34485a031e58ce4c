//! The XOR-of-permanent-bits instance family and its spoofing learner.
//!
//! Each `x ∈ {0,1}^l` owns `k` random matrices and bit indices; the target
//! label of `x` is the XOR of the selected bits of their permanents. Samples
//! carry `m ∥ p ∥ x` followed by randomly chosen blocks
//! `x' ∥ M_1 ∥ i_1 ∥ … ∥ M_k ∥ i_k`, so a learner sees the matrices of most
//! prefixes but must still compute permanents to label them.

mod distinguish;
mod hybrid;
mod instance;
mod learn;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_math::{ceil_log2, BitReader, BitString, MatrixModP, PrimeModulus};
use crate::oracle::PermanentOracle;

pub use distinguish::{
    CallMeter, Distinguisher, DistinguisherSpec, DistinguisherView, Judgement, Outcome,
};
pub use hybrid::{hybrid_reduction, telescoping_advantage, HybridInstance, HybridOutcome, KnownBank};
pub use instance::{choose_prime, generate_instance, GenerationConfig, SpoofInstance};
pub use learn::{spoof_learn, LearnOutcome, LearnedModel};

/// Bits taken by `m ∥ p` at the start of every instance string.
pub const HEADER_BITS: usize = 48;

/// `k` matrices with one 1-based bit index each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XPermQuery {
    pub matrices: Vec<MatrixModP>,
    pub indices: Vec<u32>,
}

impl XPermQuery {
    pub fn new(matrices: Vec<MatrixModP>, indices: Vec<u32>) -> Result<Self> {
        if matrices.len() != indices.len() || matrices.is_empty() {
            return Err(Error::WrongCount {
                expected: matrices.len().max(1),
                found: indices.len(),
            });
        }
        let (dim, p) = (matrices[0].dim(), matrices[0].modulus());
        if let Some(bad) = matrices.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if matrices.iter().any(|m| m.modulus() != p) {
            return Err(Error::InvalidParameter("query matrices use different moduli".into()));
        }
        let w = p.bit_width() as usize;
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i as usize > w) {
            return Err(Error::IndexOutOfRange {
                index: bad as usize,
                max: w,
            });
        }
        Ok(XPermQuery { matrices, indices })
    }

    pub fn random<R: RngCore + ?Sized>(k: usize, dim: usize, p: PrimeModulus, rng: &mut R) -> Self {
        let w = p.bit_width();
        XPermQuery {
            matrices: (0..k).map(|_| MatrixModP::random(dim, p, rng)).collect(),
            indices: (0..k).map(|_| rng.gen_range(1..=w)).collect(),
        }
    }
}

/// Bit `index` (1-based, least significant first) of `value`.
pub fn permanent_bit(value: u64, index: u32) -> bool {
    (value >> (index - 1)) & 1 == 1
}

/// XOR over `j` of bit `indices[j]` of `perms[j]`.
pub fn xperm_from_perms(perms: &[u64], indices: &[u32]) -> bool {
    perms
        .iter()
        .zip(indices)
        .fold(false, |acc, (&v, &i)| acc ^ permanent_bit(v, i))
}

/// `xPerm`: XOR of the selected permanent bits, with permanents supplied by
/// `eval`.
pub fn xperm(q: &XPermQuery, eval: &dyn PermanentOracle, rng: &mut dyn RngCore) -> Result<bool> {
    let w = eval.modulus().bit_width() as usize;
    if let Some(&bad) = q.indices.iter().find(|&&i| i == 0 || i as usize > w) {
        return Err(Error::IndexOutOfRange {
            index: bad as usize,
            max: w,
        });
    }
    if let Some(bad) = q.matrices.iter().find(|m| m.dim() != eval.dim()) {
        return Err(Error::DimensionMismatch {
            expected: eval.dim(),
            found: bad.dim(),
        });
    }
    let perms: Vec<u64> = q.matrices.iter().map(|m| eval.evaluate(m, rng)).collect();
    Ok(xperm_from_perms(&perms, &q.indices))
}

/// Layout parameters shared by generator, learner and distinguishers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpoofParams {
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub m: usize,
    pub p: PrimeModulus,
}

impl SpoofParams {
    pub fn new(n: usize, l: usize, k: usize, m: usize, p: PrimeModulus) -> Result<Self> {
        if l == 0 || l > 24 {
            return Err(Error::InvalidParameter(format!("prefix length l = {l} outside 1..=24")));
        }
        if k == 0 || m == 0 || m >= 1 << 16 || k >= 1 << 16 {
            return Err(Error::InvalidParameter("k and m must be in 1..65536".into()));
        }
        let params = SpoofParams { n, l, k, m, p };
        let min = HEADER_BITS + l + params.block_bits();
        if n < min {
            return Err(Error::LengthTooSmall { n, min });
        }
        Ok(params)
    }

    /// `⌊(c + 1/4)·log2 n⌋`.
    pub fn default_prefix_len(c: u32, n: usize) -> usize {
        ((c as f64 + 0.25) * (n as f64).log2()).floor() as usize
    }

    pub fn entry_bits(&self) -> u32 {
        self.p.bit_width()
    }

    pub fn index_bits(&self) -> u32 {
        ceil_log2(self.p.bit_width() as u64)
    }

    /// `r = l + k·(m²·⌈log2 p⌉ + ⌈log2⌈log2 p⌉⌉)`.
    pub fn block_bits(&self) -> usize {
        self.l + self.k * (self.m * self.m * self.entry_bits() as usize + self.index_bits() as usize)
    }

    pub fn blocks_per_sample(&self) -> usize {
        (self.n - HEADER_BITS - self.l) / self.block_bits()
    }

    pub fn table_len(&self) -> usize {
        1 << self.l
    }

    pub fn header(&self, x: u64) -> BitString {
        let mut out = BitString::with_capacity(self.n);
        out.push_uint(self.m as u64, 16).expect("m < 2^16");
        out.push_uint(self.p.value(), 32).expect("p < 2^32");
        out.push_uint(x, self.l as u32).expect("x < 2^l");
        out
    }
}

/// `x ∥ M_1 ∥ (i_1 - 1) ∥ … ∥ M_k ∥ (i_k - 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub x: u64,
    pub query: XPermQuery,
}

impl Block {
    pub fn encode_into(&self, params: &SpoofParams, out: &mut BitString) {
        out.push_uint(self.x, params.l as u32).expect("x < 2^l");
        for (m, &i) in self.query.matrices.iter().zip(&self.query.indices) {
            for &e in m.entries() {
                out.push_uint(e, params.entry_bits()).expect("entry < p");
            }
            out.push_uint(i as u64 - 1, params.index_bits()).expect("index within width");
        }
    }

    pub fn decode(reader: &mut BitReader<'_>, params: &SpoofParams) -> Result<Self> {
        let x = reader.read_uint(params.l as u32)?;
        let mut matrices = Vec::with_capacity(params.k);
        let mut indices = Vec::with_capacity(params.k);
        for _ in 0..params.k {
            let entries = (0..params.m * params.m)
                .map(|_| {
                    let e = reader.read_uint(params.entry_bits())?;
                    if e >= params.p.value() {
                        return Err(Error::MalformedSamples(format!("entry {e} not reduced mod {}", params.p)));
                    }
                    Ok(e)
                })
                .collect::<Result<Vec<_>>>()?;
            matrices.push(MatrixModP::new(params.m, entries, params.p)?);
            indices.push(reader.read_uint(params.index_bits())? as u32 + 1);
        }
        let query = XPermQuery::new(matrices, indices).map_err(|e| Error::MalformedSamples(e.to_string()))?;
        Ok(Block { x, query })
    }
}

/// Header fields and blocks of one instance string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSample {
    pub m: usize,
    pub p: u64,
    pub x: u64,
    pub blocks: Vec<Block>,
}

/// Reads `m` and `p` from the first 48 bits.
pub fn read_header(bits: &BitString) -> Result<(usize, u64)> {
    if bits.len() < HEADER_BITS {
        return Err(Error::MalformedSamples("string shorter than header".into()));
    }
    Ok((bits.read_uint(0..16)? as usize, bits.read_uint(16..48)?))
}

pub fn parse_sample(bits: &BitString, params: &SpoofParams) -> Result<ParsedSample> {
    if bits.len() != params.n {
        return Err(Error::MalformedSamples(format!(
            "expected {} bits, found {}",
            params.n,
            bits.len()
        )));
    }
    let mut reader = BitReader::new(bits);
    let m = reader.read_uint(16)? as usize;
    let p = reader.read_uint(32)?;
    let x = reader.read_uint(params.l as u32)?;
    let blocks = (0..params.blocks_per_sample())
        .map(|_| Block::decode(&mut reader, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedSample { m, p, x, blocks })
}
