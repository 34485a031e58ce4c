//! Reports: per-trial records, aggregates recomputable from them, the
//! verdict rubric and CSV export.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, Tolerances};
use crate::experiments::diagonal::{self, DiagonalRecords};
use crate::experiments::hybrid::HybridRecords;
use crate::experiments::oracle::{OracleTrial, PermLearnTrial};
use crate::experiments::strong::StrongTrial;
use crate::experiments::weak::{DistinguisherRecord, WeakPermTrial, WeakTableTrial};
use crate::experiments::TrialFailure;
use crate::stats::{total_variation, wilson_interval, MeanSummary};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "trials", rename_all = "kebab-case")]
pub enum TrialRecords {
    WeakPerm(Vec<WeakPermTrial>),
    WeakTable(Vec<WeakTableTrial>),
    StrongSim(Vec<StrongTrial>),
    OracleTest(Vec<OracleTrial>),
    PermLearn(Vec<PermLearnTrial>),
    Diagonalize(DiagonalRecords),
    Hybrid(HybridRecords),
}

impl TrialRecords {
    pub fn len(&self) -> usize {
        match self {
            TrialRecords::WeakPerm(r) => r.len(),
            TrialRecords::WeakTable(r) => r.len(),
            TrialRecords::StrongSim(r) => r.len(),
            TrialRecords::OracleTest(r) => r.len(),
            TrialRecords::PermLearn(r) => r.len(),
            TrialRecords::Diagonalize(_) => 1,
            TrialRecords::Hybrid(r) => r.trials.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherSummary {
    pub name: String,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `|P[correct | v=1] + P[correct | v=0] - 1|`.
    pub advantage: f64,
    pub abstentions: usize,
    pub mean_calls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakAggregates {
    pub trials: usize,
    pub training_consistency: f64,
    pub v1_fresh: MeanSummary,
    pub v0_fresh: MeanSummary,
    pub v0_out_of_sample: MeanSummary,
    pub distinguishers: Vec<DistinguisherSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtSummary {
    pub t_size: usize,
    /// Smallest and largest observed fraction of seeds with `f^T = 1`.
    pub min_fraction: f64,
    pub max_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongAggregates {
    pub trials: usize,
    pub roundtrip_rate: f64,
    pub tamper_rejection_rate: f64,
    pub f_t: Vec<FtSummary>,
    pub collision_rate: f64,
    pub cfo_length_constant: bool,
    pub cfo_steps_constant: bool,
    pub cfo_matches_direct: bool,
    pub learner_training_consistency: f64,
    pub learner_v1_agreement: MeanSummary,
    pub learner_v0_agreement: MeanSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub oracle: String,
    pub runs: usize,
    pub acceptance_rate: f64,
    pub mean_calls: f64,
    pub corrected_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnSummary {
    pub p: u64,
    pub runs: usize,
    /// Count of runs per returned dimension.
    pub dimensions: BTreeMap<usize, usize>,
    pub capped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalAggregates {
    pub bound: f64,
    pub max_agreement: f64,
    pub all_within_bound: bool,
    pub max_step_increase: f64,
    /// `|R|/16`.
    pub step_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridAggregates {
    /// Non-abstaining predictions from hybrids `t < 2^l`.
    pub predictions: usize,
    pub accuracy: f64,
    pub sigma: f64,
    /// `1/2 + 1/(2·2^l)`.
    pub reference: f64,
    /// `P[Z = 0]` for each `t` in `0..=2^l`.
    pub rates: Vec<f64>,
    pub telescoping_advantage: f64,
    /// Total-variation distance between table-agreement counts of the
    /// `t = 0` hybrid and learner runs with `v = 0`.
    pub tv_t0_vs_v0: Option<f64>,
    /// The same for the `t = 2^l` hybrid against `v = 1`.
    pub tv_end_vs_v1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Aggregates {
    WeakPerm(WeakAggregates),
    WeakTable(WeakAggregates),
    StrongSim(StrongAggregates),
    OracleTest { oracles: Vec<OracleSummary> },
    PermLearn { primes: Vec<LearnSummary> },
    Diagonalize(DiagonalAggregates),
    Hybrid(HybridAggregates),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub records: TrialRecords,
    pub failures: Vec<TrialFailure>,
    pub aggregates: Aggregates,
    /// The only field that differs between replays.
    pub wall_clock_ms: Option<u64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    /// JSON with the wall-clock field cleared; equal for equal configs.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_clock_ms = None;
        copy.to_json()
    }

    /// Writes the agreement table (weak kinds) as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        #[derive(Serialize)]
        struct Row {
            trial: usize,
            v: bool,
            training_consistent: bool,
            fresh_agreement: f64,
            out_of_sample_agreement: Option<f64>,
        }
        let rows: Vec<Row> = match &self.records {
            TrialRecords::WeakPerm(r) => r
                .iter()
                .map(|t| Row {
                    trial: t.trial,
                    v: t.v,
                    training_consistent: t.training_consistent,
                    fresh_agreement: t.fresh_agreement,
                    out_of_sample_agreement: t.out_of_sample_agreement,
                })
                .collect(),
            TrialRecords::WeakTable(r) => r
                .iter()
                .map(|t| Row {
                    trial: t.trial,
                    v: t.v,
                    training_consistent: t.training_consistent,
                    fresh_agreement: t.fresh_agreement,
                    out_of_sample_agreement: t.out_of_sample_agreement,
                })
                .collect(),
            _ => {
                return Err(HarnessError::IncompleteReport(
                    "CSV export covers weak-perm and weak-table reports".into(),
                ))
            }
        };
        let mut w = csv::Writer::from_writer(out);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

struct WeakRow<'a> {
    v: bool,
    consistent: bool,
    fresh: f64,
    out_of_sample: Option<f64>,
    distinguishers: &'a [DistinguisherRecord],
}

fn weak_aggregates(rows: &[WeakRow<'_>], tol: &Tolerances) -> WeakAggregates {
    let pick = |v: bool| rows.iter().filter(|r| r.v == v).map(|r| r.fresh).collect::<Vec<_>>();
    let oos: Vec<f64> = rows.iter().filter(|r| !r.v).filter_map(|r| r.out_of_sample).collect();
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        for d in r.distinguishers {
            if !names.contains(&d.name) {
                names.push(d.name.clone());
            }
        }
    }
    let distinguishers = names
        .into_iter()
        .map(|name| {
            let runs: Vec<(bool, &DistinguisherRecord)> = rows
                .iter()
                .flat_map(|r| r.distinguishers.iter().filter(|d| d.name == name).map(move |d| (r.v, d)))
                .collect();
            let correct = runs.iter().filter(|(_, d)| d.correct).count();
            let rate = |v: bool| {
                let sel: Vec<_> = runs.iter().filter(|(rv, _)| *rv == v).collect();
                if sel.is_empty() {
                    0.5
                } else {
                    sel.iter().filter(|(_, d)| d.correct).count() as f64 / sel.len() as f64
                }
            };
            let (ci_low, ci_high) = wilson_interval(correct, runs.len(), tol.z);
            DistinguisherSummary {
                trials: runs.len(),
                correct,
                accuracy: correct as f64 / runs.len().max(1) as f64,
                ci_low,
                ci_high,
                advantage: (rate(true) + rate(false) - 1.0).abs(),
                abstentions: runs.iter().filter(|(_, d)| d.outcome == "abstained").count(),
                mean_calls: mean(runs.iter().map(|(_, d)| d.calls as f64)),
                name,
            }
        })
        .collect();
    WeakAggregates {
        trials: rows.len(),
        training_consistency: mean(rows.iter().map(|r| r.consistent as u8 as f64)),
        v1_fresh: MeanSummary::of(&pick(true), tol.z),
        v0_fresh: MeanSummary::of(&pick(false), tol.z),
        v0_out_of_sample: MeanSummary::of(&oos, tol.z),
        distinguishers,
    }
}

/// Aggregates are a pure function of the config and the records.
pub fn aggregate(config: &ExperimentConfig, records: &TrialRecords) -> Aggregates {
    let tol = &config.tolerances;
    match records {
        TrialRecords::WeakPerm(r) => {
            let rows: Vec<WeakRow> = r
                .iter()
                .map(|t| WeakRow {
                    v: t.v,
                    consistent: t.training_consistent,
                    fresh: t.fresh_agreement,
                    out_of_sample: t.out_of_sample_agreement,
                    distinguishers: &t.distinguishers,
                })
                .collect();
            Aggregates::WeakPerm(weak_aggregates(&rows, tol))
        }
        TrialRecords::WeakTable(r) => {
            let rows: Vec<WeakRow> = r
                .iter()
                .map(|t| WeakRow {
                    v: t.v,
                    consistent: t.training_consistent,
                    fresh: t.fresh_agreement,
                    out_of_sample: t.out_of_sample_agreement,
                    distinguishers: &[],
                })
                .collect();
            Aggregates::WeakTable(weak_aggregates(&rows, tol))
        }
        TrialRecords::StrongSim(r) => {
            let checked: usize = r.iter().map(|t| t.signatures_checked).sum();
            let mut sizes: Vec<usize> = r.iter().flat_map(|t| t.f_t.iter().map(|c| c.t_size)).collect();
            sizes.sort_unstable();
            sizes.dedup();
            let f_t = sizes
                .into_iter()
                .map(|t_size| {
                    let fr: Vec<f64> = r
                        .iter()
                        .flat_map(|t| t.f_t.iter().filter(|c| c.t_size == t_size))
                        .map(|c| c.ones as f64 / c.total as f64)
                        .collect();
                    FtSummary {
                        t_size,
                        min_fraction: fr.iter().copied().fold(f64::INFINITY, f64::min),
                        max_fraction: fr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    }
                })
                .collect();
            let all_equal = |xs: Vec<u64>| xs.windows(2).all(|w| w[0] == w[1]);
            let agreement = |v: bool| {
                r.iter()
                    .filter(|t| t.learner_v == Some(v))
                    .map(|t| t.learner_agreement)
                    .collect::<Vec<_>>()
            };
            Aggregates::StrongSim(StrongAggregates {
                trials: r.len(),
                roundtrip_rate: r.iter().map(|t| t.roundtrips_ok).sum::<usize>() as f64 / checked.max(1) as f64,
                tamper_rejection_rate: r.iter().map(|t| t.tampers_rejected).sum::<usize>() as f64
                    / checked.max(1) as f64,
                f_t,
                collision_rate: mean(r.iter().map(|t| t.collision_exact as u8 as f64)),
                cfo_length_constant: all_equal(r.iter().flat_map(|t| t.cfo_lengths.iter().map(|&l| l as u64)).collect()),
                cfo_steps_constant: all_equal(r.iter().flat_map(|t| t.cfo_steps.iter().copied()).collect()),
                cfo_matches_direct: r.iter().all(|t| t.cfo_matches_direct),
                learner_training_consistency: mean(r.iter().map(|t| t.learner_training_consistent as u8 as f64)),
                learner_v1_agreement: MeanSummary::of(&agreement(true), tol.z),
                learner_v0_agreement: MeanSummary::of(&agreement(false), tol.z),
            })
        }
        TrialRecords::OracleTest(r) => {
            let mut names: Vec<String> = Vec::new();
            for t in r {
                for o in &t.results {
                    if !names.contains(&o.oracle) {
                        names.push(o.oracle.clone());
                    }
                }
            }
            let oracles = names
                .into_iter()
                .map(|oracle| {
                    let runs: Vec<_> = r.iter().flat_map(|t| t.results.iter().filter(|o| o.oracle == oracle)).collect();
                    let corrected: Vec<f64> = runs.iter().filter_map(|o| o.corrected_agreement).collect();
                    OracleSummary {
                        runs: runs.len(),
                        acceptance_rate: mean(runs.iter().map(|o| o.accepted as u8 as f64)),
                        mean_calls: mean(runs.iter().map(|o| o.calls as f64)),
                        corrected_agreement: (!corrected.is_empty()).then(|| mean(corrected.into_iter())),
                        oracle,
                    }
                })
                .collect();
            Aggregates::OracleTest { oracles }
        }
        TrialRecords::PermLearn(r) => {
            let mut by_prime: BTreeMap<u64, LearnSummary> = BTreeMap::new();
            for run in r.iter().flat_map(|t| &t.runs) {
                let s = by_prime.entry(run.p).or_insert_with(|| LearnSummary {
                    p: run.p,
                    runs: 0,
                    dimensions: BTreeMap::new(),
                    capped: 0,
                });
                s.runs += 1;
                *s.dimensions.entry(run.m).or_default() += 1;
                s.capped += run.capped as usize;
            }
            Aggregates::PermLearn {
                primes: by_prime.into_values().collect(),
            }
        }
        TrialRecords::Diagonalize(d) => {
            let (bound, registry) = match &config.experiment {
                Experiment::Diagonalize(p) => (diagonal::bound(p), p.predictors.len()),
                _ => (f64::NAN, 0),
            };
            Aggregates::Diagonalize(DiagonalAggregates {
                bound,
                max_agreement: d.rows.iter().map(|r| r.agreement_value).fold(0.0, f64::max),
                all_within_bound: d.rows.iter().all(|r| r.within_bound),
                max_step_increase: d.max_step_increase,
                step_cap: registry as f64 / 16.0,
            })
        }
        TrialRecords::Hybrid(h) => {
            let l = match &config.experiment {
                Experiment::Hybrid(p) => p.l,
                _ => 0,
            };
            let size = 1usize << l;
            let predictions: Vec<bool> = h
                .trials
                .iter()
                .filter(|t| t.t < size)
                .filter_map(|t| t.prediction.map(|p| p == t.truth))
                .collect();
            let accuracy = mean(predictions.iter().map(|&c| c as u8 as f64));
            let rates: Vec<f64> = (0..=size)
                .map(|t| mean(h.trials.iter().filter(|r| r.t == t).map(|r| !r.z as u8 as f64)))
                .collect();
            let agreements = |t: usize| -> Vec<usize> {
                h.trials.iter().filter(|r| r.t == t).map(|r| r.table_agreement).collect()
            };
            let learner = |v: bool| -> Vec<usize> {
                h.pairing.iter().filter(|r| r.v == v).map(|r| r.table_agreement).collect()
            };
            let tv = |a: Vec<usize>, b: Vec<usize>| (!a.is_empty() && !b.is_empty()).then(|| total_variation(&a, &b));
            Aggregates::Hybrid(HybridAggregates {
                predictions: predictions.len(),
                accuracy,
                sigma: (accuracy * (1.0 - accuracy) / predictions.len().max(1) as f64).sqrt(),
                reference: 0.5 + 1.0 / (2.0 * size as f64),
                telescoping_advantage: 0.5 + (rates[0] - rates[size]) / size as f64,
                rates,
                tv_t0_vs_v0: tv(agreements(0), learner(false)),
                tv_end_vs_v1: tv(agreements(size), learner(true)),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherVerdict {
    pub name: String,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The distinguisher beats the spoof at this scale.
    pub defeated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub conditions: Vec<ConditionCheck>,
    pub distinguishers: Vec<DistinguisherVerdict>,
}

impl Verdict {
    pub fn conditions_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }
}

/// Conditions 1 to 3 (training consistency, `v = 1` agreement, `v = 0`
/// agreement) against the configured bands, and the accuracy rubric per
/// distinguisher: defeated iff the lower confidence bound exceeds the
/// threshold.
pub fn verdict(report: &ExperimentReport) -> Result<Verdict, HarnessError> {
    let tol = &report.config.tolerances;
    let agg = match &report.aggregates {
        Aggregates::WeakPerm(a) | Aggregates::WeakTable(a) => a,
        _ => {
            return Err(HarnessError::IncompleteReport(format!(
                "a {} report carries no spoofing conditions",
                report.config.experiment.kind()
            )))
        }
    };
    if agg.trials == 0 || agg.v1_fresh.count == 0 || agg.v0_fresh.count == 0 {
        return Err(HarnessError::IncompleteReport(
            "need trials from both branches of the learner's coin".into(),
        ));
    }
    let conditions = vec![
        ConditionCheck {
            name: "training consistency".into(),
            value: agg.training_consistency,
            passed: agg.training_consistency == 1.0,
        },
        ConditionCheck {
            name: "v=1 fresh agreement".into(),
            value: agg.v1_fresh.mean,
            passed: agg.v1_fresh.mean >= tol.v1_min,
        },
        ConditionCheck {
            name: "v=0 fresh agreement".into(),
            value: agg.v0_fresh.mean,
            passed: (agg.v0_fresh.mean - tol.v0_center).abs() <= tol.v0_band,
        },
    ];
    let distinguishers = agg
        .distinguishers
        .iter()
        .map(|d| DistinguisherVerdict {
            name: d.name.clone(),
            accuracy: d.accuracy,
            ci_low: d.ci_low,
            ci_high: d.ci_high,
            defeated: d.ci_low > tol.defeat_threshold,
        })
        .collect();
    Ok(Verdict {
        conditions,
        distinguishers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WeakTableParams;

    fn record(name: &str, correct: bool) -> DistinguisherRecord {
        DistinguisherRecord {
            name: name.into(),
            outcome: "memorized".into(),
            correct,
            calls: 1,
        }
    }

    fn fake_report(accuracy_hits: usize, trials: usize) -> ExperimentReport {
        let config = ExperimentConfig::new(1, trials, Experiment::WeakTable(WeakTableParams::default()));
        let rows: Vec<WeakPermTrial> = (0..trials)
            .map(|i| WeakPermTrial {
                trial: i,
                v: i % 2 == 0,
                m: 2,
                p: 5,
                training_consistent: true,
                fresh_agreement: if i % 2 == 0 { 1.0 } else { 0.5 },
                out_of_sample_agreement: Some(0.5),
                distinct_prefixes: 1,
                label_fallbacks: 0,
                learner_attempts: 1,
                distinguishers: vec![record("d", i < accuracy_hits)],
            })
            .collect();
        let records = TrialRecords::WeakPerm(rows);
        ExperimentReport {
            schema_version: 1,
            tool_version: "test".into(),
            aggregates: aggregate(&config, &records),
            config,
            records,
            failures: vec![],
            wall_clock_ms: None,
        }
    }

    #[test]
    fn rubric_arithmetic() {
        let strong = verdict(&fake_report(360, 400)).unwrap();
        assert!(strong.conditions_pass());
        assert!(strong.distinguishers[0].defeated);
        let weak = verdict(&fake_report(220, 400)).unwrap();
        assert!(!weak.distinguishers[0].defeated);
    }

    #[test]
    fn json_round_trip_and_csv() {
        let r = fake_report(10, 20);
        assert_eq!(ExperimentReport::from_json(&r.to_json()).unwrap(), r);
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(text.starts_with("trial,v,training_consistent"));
    }
}
