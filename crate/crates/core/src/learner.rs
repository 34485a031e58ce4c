//! Downward self-reduction search for the dimension at which no registered
//! candidate computes permanents, keeping an evaluator that still does.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_math::{MatrixModP, PrimeModulus};
use crate::oracle::{
    make_oracle, permanent_computation_test, FailureStage, OracleSpec, PermanentOracle, SelfCorrected, Truncated,
};
use crate::permanent::cofactor_expand;

/// Ordered list of candidate oracle constructions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OracleRegistry {
    entries: Vec<OracleSpec>,
}

impl OracleRegistry {
    pub fn new(entries: Vec<OracleSpec>) -> Self {
        OracleRegistry { entries }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Parses a list of oracle names such as `["exact", "epsilon-faulty:0.1"]`.
    pub fn parse<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        names
            .iter()
            .map(|n| n.as_ref().parse())
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn entries(&self) -> &[OracleSpec] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Exponent `c`: `n_param^c` samples per trial, truncation at `n_param^(c+1)` steps.
    pub c: u32,
    pub n_param: u64,
    pub trials_per_dim: usize,
    pub sample_cap: usize,
}

impl LearnerConfig {
    pub fn new(c: u32, n_param: u64) -> Self {
        LearnerConfig {
            c,
            n_param,
            trials_per_dim: 3,
            sample_cap: 256,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.n_param.saturating_pow(self.c) as usize).min(self.sample_cap)
    }

    pub fn step_budget(&self) -> u64 {
        self.n_param.saturating_pow(self.c + 1)
    }

    /// Largest dimension the search may stop below: `⌈n_param^(1/5)⌉`.
    pub fn dimension_cap(&self) -> usize {
        fifth_root_ceil(self.n_param) as usize
    }
}

/// Smallest `r` with `r^5 >= n`.
pub fn fifth_root_ceil(n: u64) -> u64 {
    let mut r = 0u64;
    while r.saturating_pow(5) < n {
        r += 1;
    }
    r
}

/// The evaluator returned by [`permanent_learning`] for one dimension.
#[derive(Clone)]
pub enum LearnedEvaluator {
    /// `1 × 1` matrices: return the entry.
    Identity { p: PrimeModulus },
    /// A tester-accepted candidate behind random-line self-correction.
    Corrected {
        candidate: String,
        oracle: Arc<SelfCorrected<Arc<dyn PermanentOracle>>>,
    },
    /// First-row cofactor expansion over the evaluator one dimension down.
    Cofactor { dim: usize, lower: Arc<LearnedEvaluator> },
}

impl fmt::Debug for LearnedEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnedEvaluator::Identity { p } => write!(f, "Identity(mod {p})"),
            LearnedEvaluator::Corrected { candidate, oracle } => {
                write!(f, "Corrected({candidate}, dim {})", oracle.dim())
            }
            LearnedEvaluator::Cofactor { dim, lower } => write!(f, "Cofactor(dim {dim}, {lower:?})"),
        }
    }
}

impl LearnedEvaluator {
    pub fn is_fallback(&self) -> bool {
        matches!(self, LearnedEvaluator::Cofactor { .. })
    }
}

impl PermanentOracle for LearnedEvaluator {
    fn dim(&self) -> usize {
        match self {
            LearnedEvaluator::Identity { .. } => 1,
            LearnedEvaluator::Corrected { oracle, .. } => oracle.dim(),
            LearnedEvaluator::Cofactor { dim, .. } => *dim,
        }
    }

    fn modulus(&self) -> PrimeModulus {
        match self {
            LearnedEvaluator::Identity { p } => *p,
            LearnedEvaluator::Corrected { oracle, .. } => oracle.modulus(),
            LearnedEvaluator::Cofactor { lower, .. } => lower.modulus(),
        }
    }

    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        match self {
            LearnedEvaluator::Identity { p } => p.reduce(m.get(0, 0)),
            LearnedEvaluator::Corrected { oracle, .. } => oracle.evaluate(m, rng),
            LearnedEvaluator::Cofactor { lower, .. } => cofactor_via(lower.as_ref(), m, rng),
        }
    }

    fn step_cost(&self) -> u64 {
        match self {
            LearnedEvaluator::Identity { .. } => 1,
            LearnedEvaluator::Corrected { oracle, .. } => oracle.step_cost(),
            LearnedEvaluator::Cofactor { dim, lower } => *dim as u64 * lower.step_cost(),
        }
    }
}

fn cofactor_via(lower: &dyn PermanentOracle, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
    let minors: Vec<u64> = (1..=m.dim())
        .map(|i| lower.evaluate(&m.first_row_minor(i), rng))
        .collect();
    cofactor_expand(m, &minors).expect("one minor per column")
}

/// One candidate test during the search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub dim: usize,
    pub trial: usize,
    pub candidate: String,
    /// Dimension of the evaluator that produced the sample permanents.
    pub samples_from_dim: usize,
    pub accepted: bool,
    pub calls_made: u64,
    pub failure_stage: FailureStage,
}

#[derive(Debug, Clone)]
pub struct LearnedPermanentAlgorithm {
    pub m: usize,
    pub p: PrimeModulus,
    pub evaluator: LearnedEvaluator,
    pub provenance: Vec<ProvenanceEntry>,
    /// True when the search stopped because `m` passed the dimension cap.
    pub capped: bool,
}

/// Searches upward from `m = 1` for the first dimension at which no
/// registry candidate passes the self-tester.
///
/// At each dimension, up to `trials_per_dim` fresh sample sets are drawn,
/// their permanents computed by cofactor expansion over the evaluator one
/// dimension down, and every candidate is built on that context, truncated
/// to the step budget and tested. The first accepted candidate is installed
/// behind self-correction. With none accepted, the dimension is returned
/// with the cofactor fallback; past the cap, the search stops.
pub fn permanent_learning(
    config: &LearnerConfig,
    p: PrimeModulus,
    registry: &OracleRegistry,
    rng: &mut dyn RngCore,
) -> Result<LearnedPermanentAlgorithm> {
    if config.n_param == 0 || config.trials_per_dim == 0 {
        return Err(Error::InvalidParameter("n_param and trials_per_dim must be positive".into()));
    }
    let cap = config.dimension_cap();
    if p.value() <= cap as u64 + 2 {
        return Err(Error::ModulusTooSmall {
            p: p.value(),
            min: cap as u64 + 2,
        });
    }
    let mut provenance = Vec::new();
    let mut current = Arc::new(LearnedEvaluator::Identity { p });
    let mut m = 1;
    loop {
        m += 1;
        let mut installed = None;
        'trials: for trial in 0..config.trials_per_dim {
            let context: Vec<(MatrixModP, u64)> = (0..config.sample_count())
                .map(|_| {
                    let x = MatrixModP::random(m, p, rng);
                    let v = cofactor_via(current.as_ref(), &x, rng);
                    (x, v)
                })
                .collect();
            for spec in registry.entries() {
                let built = make_oracle(spec, m, p, &context)?;
                let candidate: Arc<dyn PermanentOracle> = Arc::new(Truncated::new(built, config.step_budget()));
                let verdict = permanent_computation_test(m, config.n_param, p, candidate.as_ref(), rng)?;
                provenance.push(ProvenanceEntry {
                    dim: m,
                    trial,
                    candidate: spec.to_string(),
                    samples_from_dim: m - 1,
                    accepted: verdict.accepted,
                    calls_made: verdict.calls_made,
                    failure_stage: verdict.failure_stage,
                });
                if verdict.accepted {
                    installed = Some(LearnedEvaluator::Corrected {
                        candidate: spec.to_string(),
                        oracle: Arc::new(SelfCorrected::new(candidate, config.n_param)?),
                    });
                    break 'trials;
                }
            }
        }
        match installed {
            None => {
                return Ok(LearnedPermanentAlgorithm {
                    m,
                    p,
                    evaluator: LearnedEvaluator::Cofactor { dim: m, lower: current },
                    provenance,
                    capped: false,
                })
            }
            Some(evaluator) => current = Arc::new(evaluator),
        }
        if m > cap {
            let evaluator = Arc::try_unwrap(current).unwrap_or_else(|shared| (*shared).clone());
            return Ok(LearnedPermanentAlgorithm {
                m,
                p,
                evaluator,
                provenance,
                capped: true,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permanent::permanent_ryser;
    use crate::rng::seeded;

    fn p(v: u64) -> PrimeModulus {
        PrimeModulus::new(v).unwrap()
    }

    fn agreement(alg: &LearnedPermanentAlgorithm, trials: usize, seed: u64) -> usize {
        let mut rng = seeded(seed);
        (0..trials)
            .filter(|_| {
                let x = MatrixModP::random(alg.m, alg.p, &mut rng);
                alg.evaluator.evaluate(&x, &mut rng) == permanent_ryser(&x).unwrap()
            })
            .count()
    }

    #[test]
    fn fifth_roots() {
        assert_eq!(fifth_root_ceil(1), 1);
        assert_eq!(fifth_root_ceil(32), 2);
        assert_eq!(fifth_root_ceil(33), 3);
        assert_eq!(fifth_root_ceil(243), 3);
    }

    #[test]
    fn empty_registry_falls_back_at_two() {
        let cfg = LearnerConfig::new(1, 32);
        let alg = permanent_learning(&cfg, p(101), &OracleRegistry::empty(), &mut seeded(1)).unwrap();
        assert_eq!(alg.m, 2);
        assert!(alg.evaluator.is_fallback());
        assert!(alg.provenance.is_empty());
        assert_eq!(agreement(&alg, 500, 2), 500);
    }

    #[test]
    fn exact_registry_runs_to_the_cap() {
        let cfg = LearnerConfig::new(1, 32);
        let registry = OracleRegistry::parse(&["exact"]).unwrap();
        let alg = permanent_learning(&cfg, p(101), &registry, &mut seeded(3)).unwrap();
        assert_eq!(alg.m, 3);
        assert!(alg.capped);
        assert!(!alg.evaluator.is_fallback());
        assert_eq!(agreement(&alg, 200, 4), 200);
    }

    #[test]
    fn modulus_must_clear_the_cap() {
        let cfg = LearnerConfig::new(1, 32);
        assert_eq!(
            permanent_learning(&cfg, p(3), &OracleRegistry::empty(), &mut seeded(0)).unwrap_err(),
            Error::ModulusTooSmall { p: 3, min: 4 }
        );
    }

    #[test]
    fn broken_candidates_never_install() {
        let cfg = LearnerConfig::new(1, 32);
        let registry = OracleRegistry::parse(&["constant-zero", "epsilon-faulty:0.3", "sample-lookup"]).unwrap();
        let alg = permanent_learning(&cfg, p(5), &registry, &mut seeded(5)).unwrap();
        assert_eq!(alg.m, 2);
        assert!(alg.evaluator.is_fallback());
        assert_eq!(alg.provenance.len(), 9);
        assert!(alg.provenance.iter().all(|e| !e.accepted && e.samples_from_dim == 1));
    }
}
