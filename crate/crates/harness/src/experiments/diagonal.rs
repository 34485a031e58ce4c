use serde::{Deserialize, Serialize};
use spoofsim_core::diagonal::{
    agreement_bound, build_anticorrelated_table, table_digest, within_agreement_bound, AntiCorrelatedTable, Predictor,
};

use crate::config::DiagonalizeParams;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorAgreement {
    pub predictor: String,
    /// 1-based output index.
    pub output: usize,
    /// Exact agreement as `numerator/denominator`.
    pub agreement: String,
    pub agreement_value: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalRecords {
    pub rows: Vec<PredictorAgreement>,
    /// Largest single-step increase of the greedy objective.
    pub max_step_increase: f64,
    pub table_sha256: String,
}

pub fn build_table(params: &DiagonalizeParams) -> Result<AntiCorrelatedTable, HarnessError> {
    let specs = params.predictor_specs()?;
    let refs: Vec<&dyn Predictor> = specs.iter().map(|p| p as &dyn Predictor).collect();
    Ok(build_anticorrelated_table(&refs, params.l, params.outputs)?)
}

/// Deterministic: builds the table once and measures every predictor
/// against every output index in exact arithmetic.
pub fn run_diagonalize(params: &DiagonalizeParams) -> Result<DiagonalRecords, HarnessError> {
    let specs = params.predictor_specs()?;
    let table = build_table(params)?;
    let mut rows = Vec::new();
    for spec in &specs {
        for i in 1..=params.outputs {
            let a = table.agreement(spec, i);
            rows.push(PredictorAgreement {
                predictor: spec.to_string(),
                output: i,
                agreement: a.to_string(),
                agreement_value: *a.numer() as f64 / *a.denom() as f64,
                within_bound: within_agreement_bound(a, specs.len(), params.l),
            });
        }
    }
    let max_step_increase = table
        .log
        .iter()
        .map(|s| *s.increase.numer() as f64 / *s.increase.denom() as f64)
        .fold(0.0, f64::max);
    Ok(DiagonalRecords {
        rows,
        max_step_increase,
        table_sha256: hex::encode(table_digest(&table)),
    })
}

/// `½ + √(|R|·2^L)/(2·2^L)` for the configured registry.
pub fn bound(params: &DiagonalizeParams) -> f64 {
    agreement_bound(params.predictors.len(), params.l)
}
