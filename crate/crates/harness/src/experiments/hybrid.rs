use serde::{Deserialize, Serialize};
use spoofsim_core::learner::{LearnerConfig, OracleRegistry};
use spoofsim_core::oracle::ExactOracle;
use spoofsim_core::xperm::{
    generate_instance, hybrid_reduction, spoof_learn, xperm, DistinguisherSpec, GenerationConfig, HybridInstance,
    KnownBank, XPermQuery,
};

use super::{run_trials, TrialFailure};
use crate::config::HybridParams;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTrial {
    pub trial: usize,
    pub t: usize,
    pub t_in_samples: bool,
    pub z: bool,
    pub abstained: bool,
    pub calls: u64,
    pub truth: bool,
    pub prediction: Option<bool>,
    /// Prefixes where the hybrid's table is correct.
    pub table_agreement: usize,
}

/// Table agreement of a real learner run, for comparison with the end hybrids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingRecord {
    pub index: usize,
    pub v: bool,
    pub table_agreement: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridRecords {
    pub trials: Vec<HybridTrial>,
    pub pairing: Vec<PairingRecord>,
}

/// Seed offset separating the pairing runs from the hybrid trials.
const PAIRING_STREAM: u64 = 0x7061_6972;

/// Trial `i` uses hybrid `t = i mod (2^l + 1)`, so every hybrid of the
/// chain, including the all-correct end `t = 2^l`, gets an equal share.
pub fn run_hybrid(
    params: &HybridParams,
    seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<(HybridRecords, Vec<TrialFailure>), HarnessError> {
    let layout = params.spoof_params()?;
    let spec: DistinguisherSpec = params.distinguisher.parse()?;
    let side_channel = spec == DistinguisherSpec::PlantedPerfect;
    let samples = params.sample_count();
    let chain = layout.table_len() + 1;
    let (records, mut failures) = run_trials(seed, trials, jobs, |trial, rng| {
        let distinguisher = spec.build();
        let bank = KnownBank::random(&layout, rng);
        let target = XPermQuery::random(layout.k, layout.m, layout.p, rng);
        let truth = xperm(&target, &ExactOracle::new(layout.m, layout.p), rng)?;
        let t = trial % chain;
        // The reduction and a twin hybrid built from a forked stream: the
        // twin only feeds the table-agreement histogram.
        let mut twin = spoofsim_core::rng::fork(rng);
        let out = hybrid_reduction(
            &target,
            &bank,
            distinguisher.as_ref(),
            spec.budget(),
            &layout,
            samples,
            Some(t),
            side_channel,
            rng,
        )?;
        let table_agreement = HybridInstance::build(&target, &bank, &layout, samples, Some(t), &mut twin)?.table_agreement();
        Ok(HybridTrial {
            trial,
            t: out.t,
            t_in_samples: out.t_in_samples,
            z: out.z,
            abstained: out.abstained,
            calls: out.calls,
            truth,
            prediction: out.prediction,
            table_agreement,
        })
    })?;

    let generation = GenerationConfig {
        n: params.n,
        c: 1,
        l_override: Some(params.l),
        k: params.k,
        prime_cap: params.p,
        learner: LearnerConfig::new(1, 32),
        registry: OracleRegistry::parse(&["constant-zero", "sample-lookup"])?,
    };
    let (pairing, pairing_failures) = run_trials(seed ^ PAIRING_STREAM, params.pairing_trials, jobs, |index, rng| {
        let inst = generate_instance(&generation, rng)?;
        if (inst.params.m, inst.params.p.value()) != (params.m, params.p) {
            return Err(HarnessError::Config(format!(
                "pairing instance has m = {}, p = {}; the hybrids use m = {}, p = {}",
                inst.params.m, inst.params.p, params.m, params.p
            )));
        }
        let training = inst.samples(samples, rng);
        let out = spoof_learn(&training, &generation, 4, rng)?;
        let table = out.model.table();
        let table_agreement = (0..table.len()).filter(|&x| table.get(x) == inst.y.get(x)).count();
        Ok(PairingRecord {
            index,
            v: out.v,
            table_agreement,
        })
    })?;
    failures.extend(pairing_failures.into_iter().map(|f| TrialFailure {
        trial: trials + f.trial,
        message: format!("pairing run: {}", f.message),
    }));
    Ok((HybridRecords { trials: records, pairing }, failures))
}
