use std::collections::BTreeSet;

use rand::{Rng, RngCore};

use super::{xperm_from_perms, Block, Distinguisher, DistinguisherView, LearnedModel, SpoofParams, XPermQuery};
use crate::error::{Error, Result};
use crate::finite_math::{BitString, MatrixModP};
use crate::permanent::permanent_ryser;

/// Matrices whose permanents are already known, `k` per prefix.
#[derive(Debug, Clone)]
pub struct KnownBank {
    pub matrices: Vec<Vec<MatrixModP>>,
    pub perms: Vec<Vec<u64>>,
}

impl KnownBank {
    /// Draws a fresh bank and computes its permanents up front.
    pub fn random(params: &SpoofParams, rng: &mut dyn RngCore) -> Self {
        let matrices: Vec<Vec<MatrixModP>> = (0..params.table_len())
            .map(|_| (0..params.k).map(|_| MatrixModP::random(params.m, params.p, rng)).collect())
            .collect();
        let perms = matrices
            .iter()
            .map(|row| row.iter().map(|m| permanent_ryser(m).expect("desk dimension")).collect())
            .collect();
        KnownBank { matrices, perms }
    }

    fn validate(&self, params: &SpoofParams) -> Result<()> {
        let n = params.table_len();
        if self.matrices.len() != n || self.perms.len() != n {
            return Err(Error::BankIncomplete(format!(
                "{} of {n} prefixes covered",
                self.matrices.len().min(self.perms.len())
            )));
        }
        for (x, (ms, ps)) in self.matrices.iter().zip(&self.perms).enumerate() {
            if ms.len() != params.k || ps.len() != params.k {
                return Err(Error::BankIncomplete(format!("prefix {x} lacks {} matrices", params.k)));
            }
            if ms.iter().any(|m| m.dim() != params.m || m.modulus() != params.p) {
                return Err(Error::BankIncomplete(format!("prefix {x} has matrices of the wrong shape")));
            }
        }
        Ok(())
    }
}

/// One hybrid: prefixes below `t` or seen in the samples are labelled
/// correctly from the bank, the target query sits at `t`, and everything
/// else is labelled by the random string `s'`.
pub struct HybridInstance {
    pub params: SpoofParams,
    pub t: usize,
    pub sample_prefixes: Vec<u64>,
    pub seen: BTreeSet<u64>,
    pub blocks: Vec<Block>,
    pub s_prime: BitString,
    pub samples: Vec<(BitString, bool)>,
    pub model: LearnedModel,
}

impl HybridInstance {
    /// Builds the hybrid for `t` (uniform in `[0, 2^l)` unless forced; a
    /// forced `t` may also be `2^l`, the all-correct end of the chain).
    /// Never computes a permanent: every correct label comes from the bank.
    pub fn build(
        target: &XPermQuery,
        bank: &KnownBank,
        params: &SpoofParams,
        n_samples: usize,
        forced_t: Option<usize>,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        bank.validate(params)?;
        let size = params.table_len();
        if target.matrices.len() != params.k
            || target.matrices.iter().any(|m| m.dim() != params.m || m.modulus() != params.p)
        {
            return Err(Error::InvalidParameter("target query does not match the layout".into()));
        }
        let t = match forced_t {
            Some(t) if t <= size => t,
            Some(t) => {
                return Err(Error::IndexOutOfRange { index: t, max: size });
            }
            None => rng.gen_range(0..size),
        };
        let sample_prefixes: Vec<u64> = (0..n_samples).map(|_| rng.gen_range(0..size as u64)).collect();
        let seen: BTreeSet<u64> = sample_prefixes.iter().copied().collect();
        let known = |x: usize| seen.contains(&(x as u64)) || x < t;

        let w = params.p.bit_width();
        let mut blocks = Vec::with_capacity(size);
        let mut s = BitString::with_capacity(size);
        let s_prime = BitString::random(size, rng);
        for x in 0..size {
            let matrices = if known(x) {
                bank.matrices[x].clone()
            } else if x == t {
                target.matrices.clone()
            } else {
                (0..params.k).map(|_| MatrixModP::random(params.m, params.p, rng)).collect()
            };
            let indices: Vec<u32> = if x == t {
                target.indices.clone()
            } else {
                (0..params.k).map(|_| rng.gen_range(1..=w)).collect()
            };
            s.push(if known(x) {
                xperm_from_perms(&bank.perms[x], &indices)
            } else {
                s_prime.get(x)
            });
            blocks.push(Block {
                x: x as u64,
                query: XPermQuery::new(matrices, indices)?,
            });
        }

        let samples = sample_prefixes
            .iter()
            .map(|&x| {
                let mut bits = params.header(x);
                for _ in 0..params.blocks_per_sample() {
                    blocks[rng.gen_range(0..size)].encode_into(params, &mut bits);
                }
                bits.append(&BitString::zeros(params.n - bits.len()));
                (bits, s.get(x as usize))
            })
            .collect();
        Ok(HybridInstance {
            params: *params,
            t,
            sample_prefixes,
            seen,
            blocks,
            s_prime,
            samples,
            model: LearnedModel::new(*params, s)?,
        })
    }

    /// The correct label of every prefix, by exact permanents. Used only as
    /// a side channel for planted distinguishers and for measurements.
    pub fn true_table(&self) -> BitString {
        self.blocks
            .iter()
            .map(|b| {
                let perms: Vec<u64> = b
                    .query
                    .matrices
                    .iter()
                    .map(|m| permanent_ryser(m).expect("desk dimension"))
                    .collect();
                xperm_from_perms(&perms, &b.query.indices)
            })
            .collect()
    }

    /// Number of prefixes where the model's table is correct.
    pub fn table_agreement(&self) -> usize {
        let truth = self.true_table();
        let s = self.model.table();
        (0..s.len()).filter(|&x| s.get(x) == truth.get(x)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridOutcome {
    pub t: usize,
    pub t_in_samples: bool,
    /// The distinguisher said the model generalizes.
    pub z: bool,
    pub abstained: bool,
    pub calls: u64,
    /// `s'_t` when `Z = 1`, its negation otherwise; absent at `t = 2^l`.
    pub prediction: Option<bool>,
}

/// Predicts `xPerm(target)` with a distinguisher: build a hybrid, ask the
/// distinguisher whether the model generalizes, and trust `s'_t` exactly
/// when it says yes.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_reduction(
    target: &XPermQuery,
    bank: &KnownBank,
    distinguisher: &dyn Distinguisher,
    budget: Option<u64>,
    params: &SpoofParams,
    n_samples: usize,
    forced_t: Option<usize>,
    side_channel: bool,
    rng: &mut dyn RngCore,
) -> Result<HybridOutcome> {
    let hybrid = HybridInstance::build(target, bank, params, n_samples, forced_t, rng)?;
    let truth = side_channel.then(|| hybrid.true_table());
    let view = DistinguisherView {
        samples: &hybrid.samples,
        model: &hybrid.model,
        side_channel: truth.as_ref(),
    };
    let (outcome, calls) = distinguisher.run(&view, budget, rng)?;
    let z = outcome.says_generalizes();
    let t = hybrid.t;
    let prediction = (t < params.table_len()).then(|| {
        let s = hybrid.s_prime.get(t);
        if z {
            s
        } else {
            !s
        }
    });
    Ok(HybridOutcome {
        t,
        t_in_samples: hybrid.seen.contains(&(t as u64)),
        z,
        abstained: matches!(outcome, super::Outcome::Abstained),
        calls,
        prediction,
    })
}

/// `1/2 + (rate[0] - rate[2^l]) / 2^l`, where `rate[t]` estimates
/// `P[Z = 0 | t]`.
pub fn telescoping_advantage(rates: &[f64], l: usize) -> Result<f64> {
    let size = 1usize << l;
    if rates.len() != size + 1 {
        return Err(Error::WrongCount {
            expected: size + 1,
            found: rates.len(),
        });
    }
    if let Some(&bad) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::RateOutOfRange(bad));
    }
    Ok(0.5 + (rates[0] - rates[size]) / size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_math::PrimeModulus;
    use crate::rng::seeded;
    use crate::xperm::{xperm, DistinguisherSpec};
    use crate::oracle::ExactOracle;

    fn params() -> SpoofParams {
        SpoofParams::new(1024, 3, 4, 2, PrimeModulus::new(5).unwrap()).unwrap()
    }

    #[test]
    fn telescoping_formula() {
        assert_eq!(telescoping_advantage(&[0.3; 9], 3), Ok(0.5));
        let mut rates = vec![0.5; 9];
        rates[0] = 1.0;
        rates[8] = 0.0;
        assert_eq!(telescoping_advantage(&rates, 3), Ok(0.625));
        assert!(telescoping_advantage(&[0.5; 8], 3).is_err());
        rates[3] = 1.5;
        assert_eq!(telescoping_advantage(&rates, 3), Err(Error::RateOutOfRange(1.5)));
    }

    #[test]
    fn known_prefixes_are_labelled_correctly() {
        let p = params();
        let mut rng = seeded(1);
        for forced in 0..=8 {
            let bank = KnownBank::random(&p, &mut rng);
            let target = XPermQuery::random(4, 2, p.p, &mut rng);
            let h = HybridInstance::build(&target, &bank, &p, 2, Some(forced), &mut rng).unwrap();
            let truth = h.true_table();
            for x in 0..8usize {
                if x < forced || h.seen.contains(&(x as u64)) {
                    assert_eq!(h.model.table().get(x), truth.get(x));
                }
            }
            if forced < 8 && !h.seen.contains(&(forced as u64)) {
                assert_eq!(h.blocks[forced].query, target);
                let exact = ExactOracle::new(2, p.p);
                assert_eq!(truth.get(forced), xperm(&target, &exact, &mut rng).unwrap());
            }
            for (bits, label) in &h.samples {
                assert_eq!(h.model.evaluate(bits), *label);
            }
        }
    }

    #[test]
    fn end_of_chain_is_fully_correct() {
        let p = params();
        let mut rng = seeded(2);
        let bank = KnownBank::random(&p, &mut rng);
        let target = XPermQuery::random(4, 2, p.p, &mut rng);
        let h = HybridInstance::build(&target, &bank, &p, 2, Some(8), &mut rng).unwrap();
        assert_eq!(h.table_agreement(), 8);
        let planted = DistinguisherSpec::PlantedPerfect.build();
        let out = hybrid_reduction(&target, &bank, planted.as_ref(), None, &p, 2, Some(8), true, &mut rng).unwrap();
        assert!(out.z);
        assert_eq!(out.prediction, None);
    }

    #[test]
    fn incomplete_bank_is_rejected() {
        let p = params();
        let mut rng = seeded(3);
        let mut bank = KnownBank::random(&p, &mut rng);
        bank.matrices.pop();
        let target = XPermQuery::random(4, 2, p.p, &mut rng);
        assert!(matches!(
            HybridInstance::build(&target, &bank, &p, 2, None, &mut rng),
            Err(Error::BankIncomplete(_))
        ));
    }
}
