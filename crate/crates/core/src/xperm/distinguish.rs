use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{parse_sample, xperm, LearnedModel, HEADER_BITS};
use crate::error::{Error, Result};
use crate::finite_math::BitString;
use crate::oracle::{ExactOracle, PermanentOracle};
use crate::permanent::cofactor_expand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Judgement {
    /// The model is claimed to agree with the target almost everywhere.
    Generalizes,
    /// The model is claimed to be right only on the sample prefixes.
    Memorized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Verdict(Judgement),
    /// The distinguisher ran out of budget before deciding.
    Abstained,
}

impl Outcome {
    /// Scored against the learner's branch; abstentions are never correct.
    pub fn is_correct(&self, v: bool) -> bool {
        match self {
            Outcome::Verdict(Judgement::Generalizes) => v,
            Outcome::Verdict(Judgement::Memorized) => !v,
            Outcome::Abstained => false,
        }
    }

    pub fn says_generalizes(&self) -> bool {
        matches!(self, Outcome::Verdict(Judgement::Generalizes))
    }
}

/// Counts model evaluations and permanent-oracle calls against a budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallMeter {
    budget: Option<u64>,
    used: u64,
}

impl CallMeter {
    pub fn new(budget: Option<u64>) -> Self {
        CallMeter { budget, used: 0 }
    }

    pub fn unbounded() -> Self {
        Self::new(None)
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> Option<u64> {
        self.budget.map(|b| b - self.used)
    }

    pub fn can_afford(&self, calls: u64) -> bool {
        self.remaining().is_none_or(|r| calls <= r)
    }

    pub fn charge(&mut self, calls: u64) -> Result<()> {
        if !self.can_afford(calls) {
            return Err(Error::BudgetExceeded(format!(
                "{} + {calls} calls exceeds budget {}",
                self.used,
                self.budget.unwrap_or(u64::MAX)
            )));
        }
        self.used += calls;
        Ok(())
    }
}

/// What a distinguisher may look at: the labelled samples and the model.
/// `side_channel` carries the full correct table and is only populated for
/// planted distinguishers in reduction experiments.
pub struct DistinguisherView<'a> {
    pub samples: &'a [(BitString, bool)],
    pub model: &'a LearnedModel,
    pub side_channel: Option<&'a BitString>,
}

impl DistinguisherView<'_> {
    /// Runs the model on a synthetic input with prefix `x`, charging one call.
    pub fn query_model(&self, x: u64, meter: &mut CallMeter) -> Result<bool> {
        meter.charge(1)?;
        let params = self.model.params();
        let mut bits = params.header(x);
        bits.append(&BitString::zeros(params.n - bits.len()));
        Ok(self.model.evaluate(&bits))
    }

    pub fn sample_prefixes(&self) -> BTreeSet<u64> {
        let l = self.model.params().l;
        self.samples
            .iter()
            .filter_map(|(bits, _)| bits.read_uint(HEADER_BITS..HEADER_BITS + l).ok())
            .collect()
    }
}

pub trait Distinguisher: Send + Sync {
    fn name(&self) -> String;

    /// Errors with [`Error::BudgetExceeded`] when the meter runs dry.
    fn judge(&self, view: &DistinguisherView<'_>, meter: &mut CallMeter, rng: &mut dyn RngCore) -> Result<Judgement>;

    /// Runs [`Distinguisher::judge`], turning budget exhaustion into an abstention.
    fn run(&self, view: &DistinguisherView<'_>, budget: Option<u64>, rng: &mut dyn RngCore) -> Result<(Outcome, u64)> {
        let mut meter = CallMeter::new(budget);
        match self.judge(view, &mut meter, rng) {
            Ok(j) => Ok((Outcome::Verdict(j), meter.used())),
            Err(Error::BudgetExceeded(_)) => Ok((Outcome::Abstained, meter.used())),
            Err(e) => Err(e),
        }
    }
}

/// The shipped distinguisher library.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistinguisherSpec {
    CoinFlip,
    TableEntropy,
    SampleReplay,
    BlockConsistency { budget: Option<u64> },
    ExactRecompute { budget: Option<u64> },
    PlantedPerfect,
}

impl DistinguisherSpec {
    pub fn budget(&self) -> Option<u64> {
        match self {
            DistinguisherSpec::BlockConsistency { budget } | DistinguisherSpec::ExactRecompute { budget } => *budget,
            _ => None,
        }
    }

    pub fn build(&self) -> Box<dyn Distinguisher> {
        match self {
            DistinguisherSpec::CoinFlip => Box::new(CoinFlip),
            DistinguisherSpec::TableEntropy => Box::new(TableEntropy),
            DistinguisherSpec::SampleReplay => Box::new(SampleReplay),
            DistinguisherSpec::BlockConsistency { .. } => Box::new(BlockConsistency),
            DistinguisherSpec::ExactRecompute { .. } => Box::new(ExactRecompute),
            DistinguisherSpec::PlantedPerfect => Box::new(PlantedPerfect),
        }
    }
}

impl fmt::Display for DistinguisherSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let budget = |b: &Option<u64>| b.map_or_else(|| "unbounded".to_owned(), |b| b.to_string());
        match self {
            DistinguisherSpec::CoinFlip => f.write_str("coin-flip"),
            DistinguisherSpec::TableEntropy => f.write_str("table-entropy"),
            DistinguisherSpec::SampleReplay => f.write_str("sample-replay"),
            DistinguisherSpec::BlockConsistency { budget: b } => write!(f, "block-consistency:{}", budget(b)),
            DistinguisherSpec::ExactRecompute { budget: b } => write!(f, "exact-recompute:{}", budget(b)),
            DistinguisherSpec::PlantedPerfect => f.write_str("planted-perfect"),
        }
    }
}

impl FromStr for DistinguisherSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = match s.trim().split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s.trim(), None),
        };
        let budget = |r: Option<&str>| -> Result<Option<u64>> {
            match r {
                None | Some("unbounded") => Ok(None),
                Some(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::InvalidParameter(format!("distinguisher `{s}`: bad budget"))),
            }
        };
        Ok(match (head, rest) {
            ("coin-flip", None) => DistinguisherSpec::CoinFlip,
            ("table-entropy", None) => DistinguisherSpec::TableEntropy,
            ("sample-replay", None) => DistinguisherSpec::SampleReplay,
            ("planted-perfect", None) => DistinguisherSpec::PlantedPerfect,
            ("block-consistency", r) => DistinguisherSpec::BlockConsistency { budget: budget(r)? },
            ("exact-recompute", r) => DistinguisherSpec::ExactRecompute { budget: budget(r)? },
            _ => return Err(Error::InvalidParameter(format!("unknown distinguisher `{s}`"))),
        })
    }
}

/// Guesses.
pub struct CoinFlip;

impl Distinguisher for CoinFlip {
    fn name(&self) -> String {
        "coin-flip".into()
    }
    fn judge(&self, _: &DistinguisherView<'_>, _: &mut CallMeter, rng: &mut dyn RngCore) -> Result<Judgement> {
        Ok(if rng.gen() {
            Judgement::Generalizes
        } else {
            Judgement::Memorized
        })
    }
}

/// Reads the table off the model and calls it memorized when the entries
/// outside the sample prefixes look biased (binary entropy below 0.9 bits).
pub struct TableEntropy;

impl Distinguisher for TableEntropy {
    fn name(&self) -> String {
        "table-entropy".into()
    }
    fn judge(&self, view: &DistinguisherView<'_>, meter: &mut CallMeter, _: &mut dyn RngCore) -> Result<Judgement> {
        let seen = view.sample_prefixes();
        let mut ones = 0usize;
        let mut total = 0usize;
        for x in 0..view.model.params().table_len() as u64 {
            if !seen.contains(&x) {
                ones += view.query_model(x, meter)? as usize;
                total += 1;
            }
        }
        if total == 0 {
            return Ok(Judgement::Generalizes);
        }
        let q = ones as f64 / total as f64;
        let h = |v: f64| if v <= 0.0 { 0.0 } else { -v * v.log2() };
        Ok(if h(q) + h(1.0 - q) < 0.9 {
            Judgement::Memorized
        } else {
            Judgement::Generalizes
        })
    }
}

/// Checks the model against every training label.
pub struct SampleReplay;

impl Distinguisher for SampleReplay {
    fn name(&self) -> String {
        "sample-replay".into()
    }
    fn judge(&self, view: &DistinguisherView<'_>, meter: &mut CallMeter, _: &mut dyn RngCore) -> Result<Judgement> {
        for (bits, label) in view.samples {
            meter.charge(1)?;
            if view.model.evaluate(bits) != *label {
                return Ok(Judgement::Memorized);
            }
        }
        Ok(Judgement::Generalizes)
    }
}

/// Blocks carried by the samples, first occurrence per prefix.
fn collected_blocks(view: &DistinguisherView<'_>) -> Result<Vec<super::Block>> {
    let params = view.model.params();
    let mut slots: Vec<Option<super::Block>> = vec![None; params.table_len()];
    for (bits, _) in view.samples {
        for b in parse_sample(bits, params)?.blocks {
            let x = b.x as usize;
            if slots[x].is_none() {
                slots[x] = Some(b);
            }
        }
    }
    Ok(slots.into_iter().flatten().collect())
}

/// Recomputes labels of unseen prefixes from sample blocks, with each
/// `m × m` permanent expanded over a dimension `m - 1` oracle (`m` calls per
/// permanent), until the budget runs out.
pub struct BlockConsistency;

impl Distinguisher for BlockConsistency {
    fn name(&self) -> String {
        "block-consistency".into()
    }
    fn judge(&self, view: &DistinguisherView<'_>, meter: &mut CallMeter, rng: &mut dyn RngCore) -> Result<Judgement> {
        let params = view.model.params();
        let seen = view.sample_prefixes();
        let lower = ExactOracle::new(params.m.saturating_sub(1).max(1), params.p);
        let per_perm = params.m as u64;
        let per_prefix = params.k as u64 * per_perm + 1;
        let mut checked = 0;
        let candidates: Vec<_> = collected_blocks(view)?
            .into_iter()
            .filter(|b| !seen.contains(&b.x))
            .collect();
        for block in &candidates {
            if !meter.can_afford(per_prefix) {
                break;
            }
            meter.charge(per_prefix - 1)?;
            let perms: Vec<u64> = block
                .query
                .matrices
                .iter()
                .map(|m| {
                    if m.dim() == 1 {
                        return m.get(0, 0);
                    }
                    let minors: Vec<u64> = (1..=m.dim())
                        .map(|i| lower.evaluate(&m.first_row_minor(i), rng))
                        .collect();
                    cofactor_expand(m, &minors).expect("one minor per column")
                })
                .collect();
            let expected = super::xperm_from_perms(&perms, &block.query.indices);
            checked += 1;
            if view.query_model(block.x, meter)? != expected {
                return Ok(Judgement::Memorized);
            }
        }
        if checked == 0 && !candidates.is_empty() {
            return Err(Error::BudgetExceeded("no prefix could be checked".into()));
        }
        Ok(Judgement::Generalizes)
    }
}

/// Recomputes the label of every prefix with a block using exact
/// permanents (one call each) and compares with the model. Abstains unless
/// the whole recomputation fits in the budget.
pub struct ExactRecompute;

impl Distinguisher for ExactRecompute {
    fn name(&self) -> String {
        "exact-recompute".into()
    }
    fn judge(&self, view: &DistinguisherView<'_>, meter: &mut CallMeter, rng: &mut dyn RngCore) -> Result<Judgement> {
        let params = view.model.params();
        let blocks = collected_blocks(view)?;
        meter.charge(blocks.len() as u64 * (params.k as u64 + 1))?;
        let exact = ExactOracle::new(params.m, params.p);
        let mut agrees = true;
        for block in &blocks {
            let mut probe = params.header(block.x);
            probe.append(&BitString::zeros(params.n - probe.len()));
            if view.model.evaluate(&probe) != xperm(&block.query, &exact, rng)? {
                agrees = false;
            }
        }
        Ok(if agrees {
            Judgement::Generalizes
        } else {
            Judgement::Memorized
        })
    }
}

/// Compares the model with the full correct table handed over by the
/// experiment; only meaningful inside reduction experiments.
pub struct PlantedPerfect;

impl Distinguisher for PlantedPerfect {
    fn name(&self) -> String {
        "planted-perfect".into()
    }
    fn judge(&self, view: &DistinguisherView<'_>, meter: &mut CallMeter, _: &mut dyn RngCore) -> Result<Judgement> {
        let truth = view
            .side_channel
            .ok_or_else(|| Error::InvalidParameter("planted distinguisher needs the side channel".into()))?;
        for x in 0..view.model.params().table_len() as u64 {
            if view.query_model(x, meter)? != truth.get(x as usize) {
                return Ok(Judgement::Memorized);
            }
        }
        Ok(Judgement::Generalizes)
    }
}
