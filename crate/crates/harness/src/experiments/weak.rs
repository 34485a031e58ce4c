use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use spoofsim_core::diagonal::{build_anticorrelated_table, table_case_generate, table_case_learn, Predictor};
use spoofsim_core::rng::SimRng;
use spoofsim_core::xperm::{generate_instance, spoof_learn, DistinguisherView, Outcome, Judgement};

use super::{run_trials, TrialFailure};
use crate::config::{parse_predictors, WeakPermParams, WeakTableParams};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherRecord {
    pub name: String,
    /// `generalizes`, `memorized` or `abstained`.
    pub outcome: String,
    pub correct: bool,
    pub calls: u64,
}

pub fn outcome_name(o: &Outcome) -> &'static str {
    match o {
        Outcome::Verdict(Judgement::Generalizes) => "generalizes",
        Outcome::Verdict(Judgement::Memorized) => "memorized",
        Outcome::Abstained => "abstained",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakPermTrial {
    pub trial: usize,
    pub v: bool,
    pub m: usize,
    pub p: u64,
    pub training_consistent: bool,
    /// Agreement with `f` on fresh draws.
    pub fresh_agreement: f64,
    /// The same, restricted to fresh draws whose prefix no sample had.
    pub out_of_sample_agreement: Option<f64>,
    pub distinct_prefixes: usize,
    pub label_fallbacks: usize,
    pub learner_attempts: usize,
    pub distinguishers: Vec<DistinguisherRecord>,
}

/// Fraction of `fresh` uniform prefixes where `model` and `truth` agree,
/// overall and on prefixes outside `seen`.
fn prefix_agreement(
    fresh: usize,
    size: usize,
    seen: &BTreeSet<u64>,
    agrees: impl Fn(u64) -> bool,
    rng: &mut SimRng,
) -> (f64, Option<f64>) {
    let (mut hit, mut out, mut out_hit) = (0usize, 0usize, 0usize);
    for _ in 0..fresh {
        let x = rng.gen_range(0..size as u64);
        let a = agrees(x);
        hit += a as usize;
        if !seen.contains(&x) {
            out += 1;
            out_hit += a as usize;
        }
    }
    (hit as f64 / fresh.max(1) as f64, (out > 0).then(|| out_hit as f64 / out as f64))
}

pub fn run_weak_perm(
    params: &WeakPermParams,
    seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<(Vec<WeakPermTrial>, Vec<TrialFailure>), HarnessError> {
    let generation = params.generation()?;
    let specs = params.distinguisher_specs()?;
    let samples = params.sample_count();
    run_trials(seed, trials, jobs, |trial, rng| {
        let inst = generate_instance(&generation, rng)?;
        let training = inst.samples(samples, rng);
        let out = spoof_learn(&training, &generation, params.max_retries, rng)?;
        let training_consistent = training.iter().all(|(bits, y)| out.model.evaluate(bits) == *y);
        let seen: BTreeSet<u64> = out.prefixes.iter().copied().collect();
        // Both f and the model read only the prefix, so fresh draws of the
        // prefix measure agreement on the full sample distribution.
        let table = out.model.table();
        let (fresh_agreement, out_of_sample_agreement) = prefix_agreement(
            params.fresh,
            inst.params.table_len(),
            &seen,
            |x| table.get(x as usize) == inst.y.get(x as usize),
            rng,
        );
        let view = DistinguisherView {
            samples: &training,
            model: &out.model,
            side_channel: None,
        };
        let distinguishers = specs
            .iter()
            .map(|spec| {
                let (outcome, calls) = spec.build().run(&view, spec.budget(), rng)?;
                Ok(DistinguisherRecord {
                    name: spec.to_string(),
                    outcome: outcome_name(&outcome).into(),
                    correct: outcome.is_correct(out.v),
                    calls,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(WeakPermTrial {
            trial,
            v: out.v,
            m: inst.params.m,
            p: inst.params.p.value(),
            training_consistent,
            fresh_agreement,
            out_of_sample_agreement,
            distinct_prefixes: seen.len(),
            label_fallbacks: out.label_fallbacks,
            learner_attempts: out.attempts,
            distinguishers,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTableTrial {
    pub trial: usize,
    pub v: bool,
    pub key: u64,
    pub recovered_key: Option<u64>,
    pub consistent_keys: usize,
    pub training_consistent: bool,
    pub fresh_agreement: f64,
    pub out_of_sample_agreement: Option<f64>,
}

pub fn run_weak_table(
    params: &WeakTableParams,
    seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<(Vec<WeakTableTrial>, Vec<TrialFailure>), HarnessError> {
    let shape = params.table_params()?;
    let predictors = parse_predictors(&params.predictors)?;
    let refs: Vec<&dyn Predictor> = predictors.iter().map(|p| p as &dyn Predictor).collect();
    let table = build_anticorrelated_table(&refs, shape.key_bits, 1 << shape.prefix_bits)?;
    let samples = params.sample_count();
    run_trials(seed, trials, jobs, |trial, rng| {
        let inst = table_case_generate(shape, &table, rng)?;
        let training = inst.samples(samples, rng);
        let out = table_case_learn(&training, shape, &table, rng)?;
        let training_consistent = training.iter().all(|(x, y)| out.model.evaluate(x) == *y);
        let seen: BTreeSet<u64> = training.iter().map(|(x, _)| shape.prefix(x)).collect();
        let (mut hit, mut out_n, mut out_hit) = (0usize, 0usize, 0usize);
        for _ in 0..params.fresh {
            let (x, y) = inst.sample(rng);
            let a = out.model.evaluate(&x) == y;
            hit += a as usize;
            if !seen.contains(&shape.prefix(&x)) {
                out_n += 1;
                out_hit += a as usize;
            }
        }
        Ok(WeakTableTrial {
            trial,
            v: out.v,
            key: inst.key,
            recovered_key: out.recovered_key,
            consistent_keys: out.consistent_keys,
            training_consistent,
            fresh_agreement: hit as f64 / params.fresh.max(1) as f64,
            out_of_sample_agreement: (out_n > 0).then(|| out_hit as f64 / out_n as f64),
        })
    })
}
