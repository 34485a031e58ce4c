//! Permanent oracles: programs that claim to compute `Perm mod p`, possibly
//! wrongly. Includes a corpus of faulty and adversarial kinds, the recursive
//! self-tester and random-line self-correction.

mod interpolation;
mod pipe;
mod tester;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_math::{MatrixModP, PrimeModulus};
use crate::permanent::permanent_ryser;

pub use interpolation::{monomial_count, InterpolationOracle};
pub use pipe::{format_request, parse_request, serve_exact, PipeOracle};
pub use tester::{
    max_tester_calls, permanent_computation_test, self_correct, FailureStage, OracleVerdict,
    SelfCorrected,
};

/// `(matrix, claimed permanent)` pairs handed to candidates during learning.
pub type SampleContext = [(MatrixModP, u64)];

/// A program claiming to compute permanents of `dim × dim` matrices mod `p`.
///
/// `evaluate` must return a value in `[0, p)` and may use `rng`.
pub trait PermanentOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn modulus(&self) -> PrimeModulus;
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64;

    /// Abstract step count of one evaluation, used by truncation wrappers.
    fn step_cost(&self) -> u64 {
        1
    }
}

impl<T: PermanentOracle + ?Sized> PermanentOracle for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn modulus(&self) -> PrimeModulus {
        (**self).modulus()
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        (**self).evaluate(m, rng)
    }
    fn step_cost(&self) -> u64 {
        (**self).step_cost()
    }
}

impl<T: PermanentOracle + ?Sized> PermanentOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn modulus(&self) -> PrimeModulus {
        (**self).modulus()
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        (**self).evaluate(m, rng)
    }
    fn step_cost(&self) -> u64 {
        (**self).step_cost()
    }
}

/// Declarative description of an oracle, as written in configs and on the
/// command line (`exact`, `epsilon-faulty:0.2`, `truncated:1024:exact`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleSpec {
    Exact,
    /// Wrong with probability `epsilon`, shifted by a uniform nonzero offset.
    EpsilonFaulty { epsilon: f64 },
    /// Off by one exactly when the top-left entry is below `cutoff`.
    PlantedRegion { cutoff: u64 },
    ConstantZero,
    /// Answers from the sample context when the query appears there, else guesses.
    SampleLookup,
    /// Fits a homogeneous degree-`m` polynomial to the sample context.
    SampleInterpolation,
    /// Runs `inner`, but outputs 0 when it would take more than `budget_steps`.
    TimeoutTruncated {
        budget_steps: u64,
        inner: Box<OracleSpec>,
    },
    /// External process speaking the `EVAL` line protocol.
    Pipe { command: Vec<String>, timeout_ms: u64 },
}

impl OracleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OracleSpec::Exact => "exact",
            OracleSpec::EpsilonFaulty { .. } => "epsilon-faulty",
            OracleSpec::PlantedRegion { .. } => "planted-region",
            OracleSpec::ConstantZero => "constant-zero",
            OracleSpec::SampleLookup => "sample-lookup",
            OracleSpec::SampleInterpolation => "sample-interpolation",
            OracleSpec::TimeoutTruncated { .. } => "truncated",
            OracleSpec::Pipe { .. } => "pipe",
        }
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::EpsilonFaulty { epsilon } => write!(f, "epsilon-faulty:{epsilon}"),
            OracleSpec::PlantedRegion { cutoff } => write!(f, "planted-region:{cutoff}"),
            OracleSpec::TimeoutTruncated {
                budget_steps,
                inner,
            } => write!(f, "truncated:{budget_steps}:{inner}"),
            OracleSpec::Pipe {
                command,
                timeout_ms,
            } => write!(f, "pipe:{timeout_ms}:{}", command.join(" ")),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for OracleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let bad = |what: &str| Error::InvalidParameter(format!("oracle `{s}`: {what}"));
        let spec = match (head, rest) {
            ("exact", None) => OracleSpec::Exact,
            ("constant-zero", None) => OracleSpec::ConstantZero,
            ("sample-lookup", None) => OracleSpec::SampleLookup,
            ("sample-interpolation", None) => OracleSpec::SampleInterpolation,
            ("epsilon-faulty", Some(r)) => OracleSpec::EpsilonFaulty {
                epsilon: r.parse().map_err(|_| bad("epsilon must be a number"))?,
            },
            ("planted-region", Some(r)) => OracleSpec::PlantedRegion {
                cutoff: r.parse().map_err(|_| bad("cutoff must be an integer"))?,
            },
            ("truncated", Some(r)) => {
                let (budget, inner) = r.split_once(':').ok_or_else(|| bad("expected truncated:<steps>:<inner>"))?;
                OracleSpec::TimeoutTruncated {
                    budget_steps: budget.parse().map_err(|_| bad("step budget must be an integer"))?,
                    inner: Box::new(inner.parse()?),
                }
            }
            ("pipe", Some(r)) => {
                let (timeout, cmd) = r.split_once(':').ok_or_else(|| bad("expected pipe:<ms>:<command>"))?;
                let command: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
                if command.is_empty() {
                    return Err(bad("empty command"));
                }
                OracleSpec::Pipe {
                    command,
                    timeout_ms: timeout.parse().map_err(|_| bad("timeout must be an integer"))?,
                }
            }
            _ => return Err(Error::UnknownOracle(s.to_owned())),
        };
        Ok(spec)
    }
}

/// Builds the oracle described by `spec` for `dim × dim` matrices mod `p`.
/// `context` is only consulted by the sample-driven kinds.
pub fn make_oracle(
    spec: &OracleSpec,
    dim: usize,
    p: PrimeModulus,
    context: &SampleContext,
) -> Result<Box<dyn PermanentOracle>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("oracle dimension must be at least 1".into()));
    }
    Ok(match spec {
        OracleSpec::Exact => Box::new(ExactOracle::new(dim, p)),
        OracleSpec::EpsilonFaulty { epsilon } => {
            if !(0.0..=1.0).contains(epsilon) {
                return Err(Error::RateOutOfRange(*epsilon));
            }
            Box::new(FaultyOracle {
                exact: ExactOracle::new(dim, p),
                epsilon: *epsilon,
            })
        }
        OracleSpec::PlantedRegion { cutoff } => Box::new(PlantedRegionOracle {
            exact: ExactOracle::new(dim, p),
            cutoff: *cutoff,
        }),
        OracleSpec::ConstantZero => Box::new(ConstantZeroOracle { dim, p }),
        OracleSpec::SampleLookup => Box::new(LookupOracle::new(dim, p, context)),
        OracleSpec::SampleInterpolation => Box::new(InterpolationOracle::fit(dim, p, context)),
        OracleSpec::TimeoutTruncated {
            budget_steps,
            inner,
        } => Box::new(Truncated::new(make_oracle(inner, dim, p, context)?, *budget_steps)),
        OracleSpec::Pipe {
            command,
            timeout_ms,
        } => Box::new(PipeOracle::spawn(command, dim, p, *timeout_ms)?),
    })
}

/// Ground truth: Ryser's formula.
#[derive(Debug, Clone, Copy)]
pub struct ExactOracle {
    dim: usize,
    p: PrimeModulus,
}

impl ExactOracle {
    pub fn new(dim: usize, p: PrimeModulus) -> Self {
        ExactOracle { dim, p }
    }
}

impl PermanentOracle for ExactOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.p
    }
    fn evaluate(&self, m: &MatrixModP, _rng: &mut dyn RngCore) -> u64 {
        permanent_ryser(m).expect("oracle dimension within Ryser bound")
    }
    fn step_cost(&self) -> u64 {
        (1u64 << self.dim) * self.dim as u64
    }
}

struct FaultyOracle {
    exact: ExactOracle,
    epsilon: f64,
}

impl PermanentOracle for FaultyOracle {
    fn dim(&self) -> usize {
        self.exact.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.exact.p
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        let truth = self.exact.evaluate(m, rng);
        if self.epsilon > 0.0 && rng.gen_bool(self.epsilon) {
            let p = self.exact.p;
            let shift = rng.gen_range(1..p.value());
            p.add(truth, shift)
        } else {
            truth
        }
    }
    fn step_cost(&self) -> u64 {
        self.exact.step_cost()
    }
}

struct PlantedRegionOracle {
    exact: ExactOracle,
    cutoff: u64,
}

impl PermanentOracle for PlantedRegionOracle {
    fn dim(&self) -> usize {
        self.exact.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.exact.p
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        let truth = self.exact.evaluate(m, rng);
        if m.get(0, 0) < self.cutoff {
            self.exact.p.add(truth, 1)
        } else {
            truth
        }
    }
    fn step_cost(&self) -> u64 {
        self.exact.step_cost()
    }
}

struct ConstantZeroOracle {
    dim: usize,
    p: PrimeModulus,
}

impl PermanentOracle for ConstantZeroOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.p
    }
    fn evaluate(&self, _m: &MatrixModP, _rng: &mut dyn RngCore) -> u64 {
        0
    }
}

struct LookupOracle {
    dim: usize,
    p: PrimeModulus,
    table: HashMap<Vec<u64>, u64>,
}

impl LookupOracle {
    fn new(dim: usize, p: PrimeModulus, context: &SampleContext) -> Self {
        let table = context
            .iter()
            .filter(|(m, _)| m.dim() == dim)
            .map(|(m, v)| (m.entries().to_vec(), p.reduce(*v)))
            .collect();
        LookupOracle { dim, p, table }
    }
}

impl PermanentOracle for LookupOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.p
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        match self.table.get(m.entries()) {
            Some(&v) => v,
            None => self.p.random_element(rng),
        }
    }
    fn step_cost(&self) -> u64 {
        (self.dim * self.dim) as u64
    }
}

/// Wraps an oracle so that evaluations whose step cost exceeds the budget
/// stop early and output 0.
pub struct Truncated<O> {
    inner: O,
    budget_steps: u64,
}

impl<O: PermanentOracle> Truncated<O> {
    pub fn new(inner: O, budget_steps: u64) -> Self {
        Truncated {
            inner,
            budget_steps,
        }
    }

    pub fn exceeds_budget(&self) -> bool {
        self.inner.step_cost() > self.budget_steps
    }
}

impl<O: PermanentOracle> PermanentOracle for Truncated<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn modulus(&self) -> PrimeModulus {
        self.inner.modulus()
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        if self.exceeds_budget() {
            0
        } else {
            self.inner.evaluate(m, rng)
        }
    }
    fn step_cost(&self) -> u64 {
        self.inner.step_cost().min(self.budget_steps)
    }
}

/// Restricts an oracle to `(m-1) × (m-1)` inputs by padding with an
/// identity block, which leaves the permanent unchanged.
pub struct Embedded<'a> {
    inner: &'a dyn PermanentOracle,
    dim: usize,
}

impl<'a> Embedded<'a> {
    pub fn new(inner: &'a dyn PermanentOracle, dim: usize) -> Self {
        assert!(dim >= 1 && dim <= inner.dim());
        Embedded { inner, dim }
    }
}

impl PermanentOracle for Embedded<'_> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.inner.modulus()
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        self.inner.evaluate(&m.pad_identity(self.inner.dim()), rng)
    }
    fn step_cost(&self) -> u64 {
        self.inner.step_cost()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn p(v: u64) -> PrimeModulus {
        PrimeModulus::new(v).unwrap()
    }

    #[test]
    fn exact_oracle_example() {
        let m = MatrixModP::from_rows(&[vec![1, 2], vec![3, 4]], p(101)).unwrap();
        let o = make_oracle(&OracleSpec::Exact, 2, p(101), &[]).unwrap();
        assert_eq!(o.evaluate(&m, &mut seeded(0)), 10);
    }

    #[test]
    fn fully_faulty_oracle_is_always_wrong() {
        let q = p(7);
        let o = make_oracle(&OracleSpec::EpsilonFaulty { epsilon: 1.0 }, 3, q, &[]).unwrap();
        let mut rng = seeded(1);
        for _ in 0..2000 {
            let m = MatrixModP::random(3, q, &mut rng);
            let v = o.evaluate(&m, &mut rng);
            assert!(v < 7);
            assert_ne!(v, permanent_ryser(&m).unwrap());
        }
    }

    #[test]
    fn faulty_rate_is_calibrated() {
        let q = p(101);
        let o = make_oracle(&OracleSpec::EpsilonFaulty { epsilon: 0.2 }, 3, q, &[]).unwrap();
        let mut rng = seeded(2);
        let wrong = (0..10_000)
            .filter(|_| {
                let m = MatrixModP::random(3, q, &mut rng);
                o.evaluate(&m, &mut rng) != permanent_ryser(&m).unwrap()
            })
            .count();
        let rate = wrong as f64 / 10_000.0;
        assert!((0.17..=0.23).contains(&rate), "rate {rate}");
    }

    #[test]
    fn epsilon_must_be_a_probability() {
        for eps in [-0.1, 1.5, f64::NAN] {
            assert!(make_oracle(&OracleSpec::EpsilonFaulty { epsilon: eps }, 2, p(5), &[]).is_err());
        }
    }

    #[test]
    fn planted_region_and_constant() {
        let q = p(11);
        let planted = make_oracle(&OracleSpec::PlantedRegion { cutoff: 3 }, 2, q, &[]).unwrap();
        let zero = make_oracle(&OracleSpec::ConstantZero, 2, q, &[]).unwrap();
        let mut rng = seeded(3);
        for _ in 0..500 {
            let m = MatrixModP::random(2, q, &mut rng);
            let truth = permanent_ryser(&m).unwrap();
            let got = planted.evaluate(&m, &mut rng);
            assert_eq!(got != truth, m.get(0, 0) < 3);
            assert_eq!(zero.evaluate(&m, &mut rng), 0);
        }
    }

    #[test]
    fn lookup_answers_context_exactly() {
        let q = p(101);
        let mut rng = seeded(4);
        let context: Vec<(MatrixModP, u64)> = (0..20)
            .map(|_| {
                let m = MatrixModP::random(3, q, &mut rng);
                let v = permanent_ryser(&m).unwrap();
                (m, v)
            })
            .collect();
        let o = make_oracle(&OracleSpec::SampleLookup, 3, q, &context).unwrap();
        for (m, v) in &context {
            assert_eq!(o.evaluate(m, &mut rng), *v);
        }
    }

    #[test]
    fn truncation_zeroes_expensive_oracles() {
        let q = p(101);
        let m = MatrixModP::from_rows(&[vec![1, 2], vec![3, 4]], q).unwrap();
        let cheap = Truncated::new(ExactOracle::new(2, q), 8);
        let starved = Truncated::new(ExactOracle::new(2, q), 7);
        assert_eq!(cheap.evaluate(&m, &mut seeded(0)), 10);
        assert_eq!(starved.evaluate(&m, &mut seeded(0)), 0);
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "exact",
            "constant-zero",
            "sample-lookup",
            "sample-interpolation",
            "epsilon-faulty:0.2",
            "planted-region:5",
            "truncated:64:epsilon-faulty:0.5",
            "pipe:250:spoofsim-pipe-oracle --flag",
        ] {
            let spec: OracleSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!(
            "magic".parse::<OracleSpec>(),
            Err(Error::UnknownOracle("magic".into()))
        );
    }

    #[test]
    fn embedding_preserves_permanent() {
        let q = p(101);
        let exact = ExactOracle::new(4, q);
        let restricted = Embedded::new(&exact, 2);
        let m = MatrixModP::from_rows(&[vec![1, 2], vec![3, 4]], q).unwrap();
        assert_eq!(restricted.evaluate(&m, &mut seeded(0)), 10);
    }
}
