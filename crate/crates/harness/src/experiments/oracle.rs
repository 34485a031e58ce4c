use serde::{Deserialize, Serialize};
use spoofsim_core::finite_math::{MatrixModP, PrimeModulus};
use spoofsim_core::learner::{permanent_learning, LearnerConfig, OracleRegistry};
use spoofsim_core::oracle::{make_oracle, permanent_computation_test, self_correct};
use spoofsim_core::permanent::permanent_ryser;

use super::{run_trials, TrialFailure};
use crate::config::{OracleTestParams, PermLearnParams};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub oracle: String,
    pub accepted: bool,
    pub calls: u64,
    pub failure_stage: String,
    pub failed_dim: Option<usize>,
    /// Agreement of the self-corrected oracle with exact permanents.
    pub corrected_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTrial {
    pub trial: usize,
    pub results: Vec<OracleResult>,
}

pub fn run_oracle_test(
    params: &OracleTestParams,
    seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<(Vec<OracleTrial>, Vec<TrialFailure>), HarnessError> {
    let p = PrimeModulus::new(params.p)?;
    let specs = params.oracle_specs()?;
    run_trials(seed, trials, jobs, |trial, rng| {
        let results = specs
            .iter()
            .map(|spec| {
                let oracle = make_oracle(spec, params.m, p, &[])?;
                let verdict = permanent_computation_test(params.m, params.n_param, p, oracle.as_ref(), rng)?;
                let corrected_agreement = if params.correction_queries > 0 {
                    let mut hits = 0;
                    for _ in 0..params.correction_queries {
                        let x = MatrixModP::random(params.m, p, rng);
                        let got = self_correct(oracle.as_ref(), &x, params.correction_lines, rng)?;
                        hits += (got == permanent_ryser(&x)?) as usize;
                    }
                    Some(hits as f64 / params.correction_queries as f64)
                } else {
                    None
                };
                Ok(OracleResult {
                    oracle: spec.to_string(),
                    accepted: verdict.accepted,
                    calls: verdict.calls_made,
                    failure_stage: format!("{:?}", verdict.failure_stage),
                    failed_dim: verdict.failed_dim,
                    corrected_agreement,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(OracleTrial { trial, results })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnRun {
    pub p: u64,
    pub m: usize,
    pub capped: bool,
    pub fallback: bool,
    /// `dim:candidate` for every accepted candidate, lowest dimension first.
    pub installed: Vec<String>,
    pub candidates_tested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermLearnTrial {
    pub trial: usize,
    pub runs: Vec<LearnRun>,
}

pub fn run_perm_learn(
    params: &PermLearnParams,
    seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<(Vec<PermLearnTrial>, Vec<TrialFailure>), HarnessError> {
    let config = LearnerConfig::new(params.c, params.n_param);
    let registry = OracleRegistry::parse(&params.registry)?;
    run_trials(seed, trials, jobs, |trial, rng| {
        let runs = params
            .primes
            .iter()
            .map(|&q| {
                let alg = permanent_learning(&config, PrimeModulus::new(q)?, &registry, rng)?;
                let installed = alg
                    .provenance
                    .iter()
                    .filter(|e| e.accepted)
                    .map(|e| format!("{}:{}", e.dim, e.candidate))
                    .collect();
                Ok(LearnRun {
                    p: q,
                    m: alg.m,
                    capped: alg.capped,
                    fallback: alg.evaluator.is_fallback(),
                    installed,
                    candidates_tested: alg.provenance.len(),
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(PermLearnTrial { trial, runs })
    })
}
