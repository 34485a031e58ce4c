//! Trial execution. Trial `i` draws from the stream derived from
//! `(seed, i)`, so results do not depend on scheduling.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spoofsim_core::rng::{derive, SimRng};

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{aggregate, ExperimentReport, TrialRecords};
use crate::HarnessError;

pub mod diagonal;
pub mod hybrid;
pub mod oracle;
pub mod strong;
pub mod weak;

/// A trial that errored or panicked; the rest of the run continues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub message: String,
}

/// Runs `trials` independent trials on a pool of `jobs` threads (0 = one
/// per core), in trial order.
pub fn run_trials<T, F>(seed: u64, trials: usize, jobs: usize, f: F) -> Result<(Vec<T>, Vec<TrialFailure>), HarnessError>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> Result<T, HarnessError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<T, TrialFailure>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = derive(seed, i as u64);
                match catch_unwind(AssertUnwindSafe(|| f(i, &mut rng))) {
                    Ok(Ok(t)) => Ok(t),
                    Ok(Err(e)) => Err(TrialFailure {
                        trial: i,
                        message: e.to_string(),
                    }),
                    Err(panic) => Err(TrialFailure {
                        trial: i,
                        message: panic
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| panic.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "panic".into()),
                    }),
                }
            })
            .collect()
    });
    let mut records = Vec::with_capacity(trials);
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => records.push(t),
            Err(f) => failures.push(f),
        }
    }
    Ok((records, failures))
}

/// Validates `config`, runs every trial and assembles the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let (seed, trials, jobs) = (config.seed, config.trials, config.jobs);
    let (records, failures) = match &config.experiment {
        Experiment::WeakPerm(p) => {
            let (r, f) = weak::run_weak_perm(p, seed, trials, jobs)?;
            (TrialRecords::WeakPerm(r), f)
        }
        Experiment::WeakTable(p) => {
            let (r, f) = weak::run_weak_table(p, seed, trials, jobs)?;
            (TrialRecords::WeakTable(r), f)
        }
        Experiment::StrongSim(p) => {
            let (r, f) = strong::run_strong(p, seed, trials, jobs)?;
            (TrialRecords::StrongSim(r), f)
        }
        Experiment::OracleTest(p) => {
            let (r, f) = oracle::run_oracle_test(p, seed, trials, jobs)?;
            (TrialRecords::OracleTest(r), f)
        }
        Experiment::PermLearn(p) => {
            let (r, f) = oracle::run_perm_learn(p, seed, trials, jobs)?;
            (TrialRecords::PermLearn(r), f)
        }
        Experiment::Diagonalize(p) => (TrialRecords::Diagonalize(diagonal::run_diagonalize(p)?), Vec::new()),
        Experiment::Hybrid(p) => {
            let (r, f) = hybrid::run_hybrid(p, seed, trials, jobs)?;
            (TrialRecords::Hybrid(r), f)
        }
    };
    let aggregates = aggregate(config, &records);
    Ok(ExperimentReport {
        schema_version: crate::config::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config: config.clone(),
        records,
        failures,
        aggregates,
        wall_clock_ms: Some(start.elapsed().as_millis() as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn trials_are_ordered_and_independent_of_threads() {
        let f = |i: usize, rng: &mut SimRng| -> Result<(usize, u64), HarnessError> { Ok((i, rng.gen())) };
        let (a, _) = run_trials(5, 50, 1, f).unwrap();
        let (b, _) = run_trials(5, 50, 4, f).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, r)| r.0 == i));
    }

    #[test]
    fn panics_are_quarantined() {
        let (ok, failed) = run_trials(1, 10, 2, |i, _| {
            if i == 3 {
                panic!("trial three");
            }
            Ok(i)
        })
        .unwrap();
        assert_eq!(ok.len(), 9);
        assert_eq!(failed, vec![TrialFailure { trial: 3, message: "trial three".into() }]);
    }
}
