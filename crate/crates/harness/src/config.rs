//! Experiment configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! seed = 42
//! trials = 400
//!
//! [experiment]
//! kind = "weak-perm"
//! l = 8
//! distinguishers = ["coin-flip", "exact-recompute:unbounded"]
//! ```
//!
//! Every experiment table field has a desk-scale default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spoofsim_core::diagonal::{PredictorSpec, TableCaseParams};
use spoofsim_core::finite_math::{is_prime, PrimeModulus};
use spoofsim_core::learner::{LearnerConfig, OracleRegistry};
use spoofsim_core::oracle::OracleSpec;
use spoofsim_core::xperm::{DistinguisherSpec, GenerationConfig, SpoofParams};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_TRIALS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Worker threads; 0 picks one per core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiment: Experiment,
}

fn default_trials() -> usize {
    100
}

/// Bands standing in for the asymptotic `1 - o(1)` and `1/2 ± o(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub v1_min: f64,
    pub v0_center: f64,
    pub v0_band: f64,
    /// A distinguisher beats the spoof when its accuracy is confidently above this.
    pub defeat_threshold: f64,
    /// Normal quantile for the two-sided intervals.
    pub z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            v1_min: 0.99,
            v0_center: 0.5,
            v0_band: 0.05,
            defeat_threshold: 2.0 / 3.0,
            z: 1.959_963_984_540_054,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    WeakPerm(WeakPermParams),
    WeakTable(WeakTableParams),
    StrongSim(StrongSimParams),
    OracleTest(OracleTestParams),
    PermLearn(PermLearnParams),
    Diagonalize(DiagonalizeParams),
    Hybrid(HybridParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::WeakPerm(_) => "weak-perm",
            Experiment::WeakTable(_) => "weak-table",
            Experiment::StrongSim(_) => "strong-sim",
            Experiment::OracleTest(_) => "oracle-test",
            Experiment::PermLearn(_) => "perm-learn",
            Experiment::Diagonalize(_) => "diagonalize",
            Experiment::Hybrid(_) => "hybrid",
        }
    }

    /// The default experiment of a kind.
    pub fn default_for(kind: &str) -> Option<Self> {
        Some(match kind {
            "weak-perm" => Experiment::WeakPerm(Default::default()),
            "weak-table" => Experiment::WeakTable(Default::default()),
            "strong-sim" => Experiment::StrongSim(Default::default()),
            "oracle-test" => Experiment::OracleTest(Default::default()),
            "perm-learn" => Experiment::PermLearn(Default::default()),
            "diagonalize" => Experiment::Diagonalize(Default::default()),
            "hybrid" => Experiment::Hybrid(Default::default()),
            _ => return None,
        })
    }
}

/// xPerm spoofing trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakPermParams {
    pub n: usize,
    pub c: u32,
    /// Prefix length; `⌊(c + 1/4)·log2 n⌋` when absent.
    pub l: Option<usize>,
    pub k: usize,
    pub prime_cap: u64,
    pub n_param: u64,
    /// Exponent of the permanent learner's sample count and step budget.
    pub learner_c: u32,
    /// Training samples; `2^(l-2)` when absent.
    pub samples: Option<usize>,
    pub fresh: usize,
    pub max_retries: usize,
    pub registry: Vec<String>,
    pub distinguishers: Vec<String>,
}

impl Default for WeakPermParams {
    fn default() -> Self {
        WeakPermParams {
            n: 4096,
            c: 1,
            l: Some(8),
            k: 4,
            prime_cap: 211,
            n_param: 32,
            learner_c: 1,
            samples: None,
            fresh: 10_000,
            max_retries: 4,
            registry: vec!["constant-zero".into(), "sample-lookup".into()],
            distinguishers: vec![
                "coin-flip".into(),
                "table-entropy".into(),
                "sample-replay".into(),
                "block-consistency:4096".into(),
                "exact-recompute:unbounded".into(),
            ],
        }
    }
}

impl WeakPermParams {
    pub fn generation(&self) -> Result<GenerationConfig, HarnessError> {
        Ok(GenerationConfig {
            n: self.n,
            c: self.c,
            l_override: self.l,
            k: self.k,
            prime_cap: self.prime_cap,
            learner: LearnerConfig::new(self.learner_c, self.n_param),
            registry: OracleRegistry::parse(&self.registry)?,
        })
    }

    pub fn prefix_len(&self) -> usize {
        self.l.unwrap_or_else(|| SpoofParams::default_prefix_len(self.c, self.n))
    }

    pub fn sample_count(&self) -> usize {
        self.samples.unwrap_or(1 << self.prefix_len().saturating_sub(2))
    }

    pub fn distinguisher_specs(&self) -> Result<Vec<DistinguisherSpec>, HarnessError> {
        parse_distinguishers(&self.distinguishers)
    }
}

fn parse_distinguishers(names: &[String]) -> Result<Vec<DistinguisherSpec>, HarnessError> {
    Ok(names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?)
}

/// Table-case spoofing trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakTableParams {
    pub n: usize,
    /// Key length exponent: `⌊3·c1·log2 n⌋` key bits before the cap.
    pub c1: u32,
    /// Prefix exponent: `⌊c2·log2 n⌋` prefix bits before the cap.
    pub c2: u32,
    pub key_cap: u32,
    pub prefix_cap: u32,
    /// Training samples; `n` when absent.
    pub samples: Option<usize>,
    pub fresh: usize,
    pub predictors: Vec<String>,
}

impl Default for WeakTableParams {
    fn default() -> Self {
        WeakTableParams {
            n: 64,
            c1: 1,
            c2: 2,
            key_cap: 6,
            prefix_cap: 12,
            samples: None,
            fresh: 10_000,
            predictors: default_predictor_names(),
        }
    }
}

fn default_predictor_names() -> Vec<String> {
    spoofsim_core::diagonal::default_predictors()
        .iter()
        .map(|p| p.to_string())
        .collect()
}

impl WeakTableParams {
    pub fn table_params(&self) -> Result<TableCaseParams, HarnessError> {
        Ok(TableCaseParams::from_exponents(self.c1, self.c2, self.n, self.key_cap, self.prefix_cap)?)
    }

    pub fn sample_count(&self) -> usize {
        self.samples.unwrap_or(self.n)
    }
}

/// Structural checks of the authenticated sample space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongSimParams {
    pub n_prime: usize,
    pub prime_bits: u32,
    /// Sample-set sizes for the exact `f^T` agreement count.
    pub t_sizes: Vec<usize>,
    /// `|T|` and hash width for the collision check; width defaults to `⌈log2 |T|⌉ + 2`.
    pub collision_t: usize,
    pub collision_m: Option<usize>,
    /// Signed messages per trial for the round-trip and tamper checks.
    pub signature_checks: usize,
    /// Points evaluated per trial through the emitted programs.
    pub cfo_points: usize,
    /// Training samples handed to the strong learner.
    pub learner_samples: usize,
}

impl Default for StrongSimParams {
    fn default() -> Self {
        StrongSimParams {
            n_prime: 10,
            prime_bits: 16,
            t_sizes: vec![1, 4, 16],
            collision_t: 4,
            collision_m: None,
            signature_checks: 20,
            cfo_points: 8,
            learner_samples: 4,
        }
    }
}

/// Self-tester runs against a list of oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleTestParams {
    pub m: usize,
    pub n_param: u64,
    pub p: u64,
    pub oracles: Vec<String>,
    /// Also measure random-line self-correction on this many queries.
    pub correction_queries: usize,
    pub correction_lines: u64,
}

impl Default for OracleTestParams {
    fn default() -> Self {
        OracleTestParams {
            m: 3,
            n_param: 20,
            p: 101,
            oracles: vec!["exact".into(), "epsilon-faulty:0.2".into()],
            correction_queries: 0,
            correction_lines: 30,
        }
    }
}

impl OracleTestParams {
    pub fn oracle_specs(&self) -> Result<Vec<OracleSpec>, HarnessError> {
        Ok(self.oracles.iter().map(|s| s.parse()).collect::<Result<_, _>>()?)
    }
}

/// Permanent-learning runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermLearnParams {
    pub c: u32,
    pub n_param: u64,
    pub primes: Vec<u64>,
    pub registry: Vec<String>,
}

impl Default for PermLearnParams {
    fn default() -> Self {
        PermLearnParams {
            c: 1,
            n_param: 32,
            primes: vec![5, 7, 101],
            registry: vec!["constant-zero".into(), "sample-lookup".into(), "sample-interpolation".into()],
        }
    }
}

/// One greedy diagonal table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagonalizeParams {
    pub l: u32,
    pub outputs: usize,
    pub predictors: Vec<String>,
}

impl Default for DiagonalizeParams {
    fn default() -> Self {
        DiagonalizeParams {
            l: 10,
            outputs: 4,
            predictors: default_predictor_names(),
        }
    }
}

impl DiagonalizeParams {
    pub fn predictor_specs(&self) -> Result<Vec<PredictorSpec>, HarnessError> {
        parse_predictors(&self.predictors)
    }
}

pub(crate) fn parse_predictors(names: &[String]) -> Result<Vec<PredictorSpec>, HarnessError> {
    Ok(names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?)
}

/// Hybrid-reduction trials: `t` cycles through `0..=2^l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridParams {
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub m: usize,
    pub p: u64,
    /// Samples per hybrid; `2^(l-2)` when absent.
    pub samples: Option<usize>,
    pub distinguisher: String,
    /// Also compare the end hybrids with real learner runs on this many instances.
    pub pairing_trials: usize,
}

impl Default for HybridParams {
    fn default() -> Self {
        HybridParams {
            n: 4096,
            l: 3,
            k: 4,
            m: 2,
            p: 5,
            samples: None,
            distinguisher: "planted-perfect".into(),
            pairing_trials: 0,
        }
    }
}

impl HybridParams {
    pub fn spoof_params(&self) -> Result<SpoofParams, HarnessError> {
        Ok(SpoofParams::new(self.n, self.l, self.k, self.m, PrimeModulus::new(self.p)?)?)
    }

    pub fn sample_count(&self) -> usize {
        self.samples.unwrap_or(1 << self.l.saturating_sub(2))
    }
}

impl ExperimentConfig {
    pub fn new(seed: u64, trials: usize, experiment: Experiment) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed,
            trials,
            jobs: 0,
            output: None,
            tolerances: Tolerances::default(),
            experiment,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the documented desk bounds.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.trials == 0 || self.trials > MAX_TRIALS {
            return bad(format!("trials must be in 1..={MAX_TRIALS}"));
        }
        let t = &self.tolerances;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(t.v1_min) || !unit(t.v0_center) || !unit(t.v0_band) || !unit(t.defeat_threshold) || t.z <= 0.0 {
            return bad("tolerances must lie in [0, 1] and z must be positive".into());
        }
        match &self.experiment {
            Experiment::WeakPerm(p) => {
                if p.n > 1 << 16 || p.k == 0 || p.k > 16 || p.prime_cap > 1 << 16 || p.n_param > 1 << 12 {
                    return bad("weak-perm parameters outside desk bounds (n <= 65536, 1 <= k <= 16, prime_cap <= 65536, n_param <= 4096)".into());
                }
                if p.prefix_len() == 0 || p.prefix_len() > 16 || p.sample_count() == 0 || p.max_retries == 0 {
                    return bad("weak-perm needs 1 <= l <= 16, at least one sample and one retry".into());
                }
                p.generation()?;
                p.distinguisher_specs()?;
            }
            Experiment::WeakTable(p) => {
                p.table_params()?;
                parse_predictors(&p.predictors)?;
                if p.sample_count() == 0 || p.n > 1 << 12 {
                    return bad("weak-table needs samples and n <= 4096".into());
                }
            }
            Experiment::StrongSim(p) => {
                if p.n_prime == 0 || p.n_prime > 14 {
                    return bad("strong-sim needs 1 <= n_prime <= 14 for enumeration".into());
                }
                spoofsim_core::strong::ToyRsa::new(p.prime_bits)?;
                if p.t_sizes.iter().chain([&p.collision_t]).any(|&t| t == 0 || t > 1 << (p.n_prime - 1)) {
                    return bad("sample-set sizes must lie in 1..=2^(n_prime-1)".into());
                }
                if p.learner_samples == 0 {
                    return bad("strong-sim needs at least one learner sample".into());
                }
            }
            Experiment::OracleTest(p) => {
                if p.m == 0 || p.m > 8 || p.n_param == 0 || p.n_param > 1 << 10 {
                    return bad("oracle-test needs 1 <= m <= 8 and 1 <= n_param <= 1024".into());
                }
                PrimeModulus::new(p.p)?;
                p.oracle_specs()?;
            }
            Experiment::PermLearn(p) => {
                if p.primes.is_empty() || p.primes.iter().any(|&q| !is_prime(q)) {
                    return bad("perm-learn needs a list of primes".into());
                }
                OracleRegistry::parse(&p.registry)?;
            }
            Experiment::Diagonalize(p) => {
                if p.l == 0 || p.l > 16 || p.outputs == 0 || p.outputs > 1 << 12 {
                    return bad("diagonalize needs 1 <= l <= 16 and 1 <= outputs <= 4096".into());
                }
                p.predictor_specs()?;
            }
            Experiment::Hybrid(p) => {
                p.spoof_params()?;
                if p.l > 8 {
                    return bad("hybrid experiments need l <= 8".into());
                }
                p.distinguisher.parse::<DistinguisherSpec>()?;
            }
        }
        Ok(())
    }
}
