use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use spoofsim_core::finite_math::BitString;
use spoofsim_core::strong::{
    censored_membership, cfo_stub, collision_lemma_experiment, f_t_ones, strong_learn, CensoredSpec, SampleSpace,
    SignatureScheme, StrongModel, ToyRsa, Branch,
};

use super::{run_trials, TrialFailure};
use crate::config::StrongSimParams;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtCount {
    pub t_size: usize,
    /// Seeds with `f^T = 1`, out of `2^{n'}`.
    pub ones: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongTrial {
    pub trial: usize,
    pub signatures_checked: usize,
    pub roundtrips_ok: usize,
    pub tampers_rejected: usize,
    pub f_t: Vec<FtCount>,
    pub collision_exact: bool,
    pub cfo_lengths: Vec<usize>,
    pub cfo_steps: Vec<u64>,
    pub cfo_matches_direct: bool,
    /// `None` when the learner fell back to the constant 1.
    pub learner_v: Option<bool>,
    pub learner_training_consistent: bool,
    /// Fraction of sampled members where the learned model equals `f = 1`.
    pub learner_agreement: f64,
}

/// Points of `S` evaluated through the learned model per trial.
const LEARNER_POINTS: usize = 64;

pub fn run_strong(
    params: &StrongSimParams,
    seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<(Vec<StrongTrial>, Vec<TrialFailure>), HarnessError> {
    let scheme = ToyRsa::new(params.prime_bits)?;
    let n_prime = params.n_prime;
    run_trials(seed, trials, jobs, |trial, rng| {
        let space = SampleSpace::with_seed_len(n_prime, scheme, rng)?;
        let public = &space.public;

        let (mut roundtrips_ok, mut tampers_rejected) = (0, 0);
        for _ in 0..params.signature_checks {
            let msg = BitString::random(rng.gen_range(1..=2 * n_prime + 8), rng);
            let sig = scheme.sign(&space.sk, &msg);
            roundtrips_ok += scheme.verify(&public.pk, &msg, &sig) as usize;
            let mut bad = sig.clone();
            bad.flip(rng.gen_range(0..sig.len()));
            tampers_rejected += !scheme.verify(&public.pk, &msg, &bad) as usize;
        }

        let f_t = params
            .t_sizes
            .iter()
            .map(|&t_size| {
                let t: BTreeSet<u64> = index::sample(rng, 1 << n_prime, t_size)
                    .into_iter()
                    .map(|x| x as u64)
                    .collect();
                FtCount {
                    t_size,
                    ones: f_t_ones(&t, n_prime),
                    total: 1 << n_prime,
                }
            })
            .collect();

        let collision = collision_lemma_experiment(n_prime, params.collision_t, params.collision_m, 1, rng)?;

        // Three specs sharing (n, m), compiled and compared with direct evaluation.
        let m = collision.m;
        let t: BTreeSet<u64> = index::sample(rng, 1 << n_prime, params.collision_t.min(1 << m))
            .into_iter()
            .map(|x| x as u64)
            .collect();
        let specs = [
            CensoredSpec::full(t.clone(), m, n_prime, true),
            CensoredSpec::from_sample_hashes(public, t.clone(), m, false),
            CensoredSpec {
                branch: Some(Branch {
                    i: rng.gen_range(1..=n_prime),
                    h: rng.gen_range(0..1 << m),
                    j: rng.gen_range(1..=scheme.signature_bits()),
                }),
                ..CensoredSpec::from_sample_hashes(public, t.clone(), m, true)
            },
        ];
        let artifacts = specs.iter().map(|s| cfo_stub(public, s)).collect::<Result<Vec<_>, _>>()?;
        let mut cfo_steps = Vec::new();
        let mut cfo_matches_direct = true;
        for _ in 0..params.cfo_points {
            let point = if rng.gen_bool(0.5) {
                space.point(*t.iter().next().expect("T nonempty"))
            } else {
                space.sample(rng).0
            };
            for (spec, art) in specs.iter().zip(&artifacts) {
                let (value, steps) = art.evaluate(&point)?;
                cfo_matches_direct &= value == censored_membership(public, &point, spec);
                cfo_steps.push(steps);
            }
        }

        let training: Vec<(BitString, bool)> = (0..params.learner_samples).map(|_| (space.sample(rng).0, true)).collect();
        let model = strong_learn(public, &training, rng)?;
        let learner_training_consistent = training
            .iter()
            .map(|(p, y)| model.evaluate(p).map(|v| v == Some(*y)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .all(|ok| ok);
        let mut agree = 0;
        for _ in 0..LEARNER_POINTS {
            let (point, _) = space.sample(rng);
            agree += (model.evaluate(&point)? == public.f(&point)) as usize;
        }
        Ok(StrongTrial {
            trial,
            signatures_checked: params.signature_checks,
            roundtrips_ok,
            tampers_rejected,
            f_t,
            collision_exact: collision.exact == 1,
            cfo_lengths: artifacts.iter().map(|a| a.bytes.len()).collect(),
            cfo_steps,
            cfo_matches_direct,
            learner_v: match &model {
                StrongModel::ConstantOne => None,
                StrongModel::Program { v, .. } => Some(*v),
            },
            learner_training_consistent,
            learner_agreement: agree as f64 / LEARNER_POINTS as f64,
        })
    })
}
