use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::PermanentOracle;
use crate::error::{Error, Result};
use crate::finite_math::{MatrixModP, PrimeModulus};
use crate::permanent::{cofactor_expand, line_identity_coefficients, line_identity_residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureStage {
    /// A `1 × 1` query did not return its entry.
    BaseCase,
    /// A cofactor or line check failed at some dimension below the top.
    Recursion,
    Cofactor,
    LineIdentity,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub accepted: bool,
    pub calls_made: u64,
    pub failure_stage: FailureStage,
    /// Dimension at which the failing check ran.
    pub failed_dim: Option<usize>,
}

/// Upper bound on oracle calls made by [`permanent_computation_test`].
pub fn max_tester_calls(m: usize, n_param: u64) -> u64 {
    let mut total = 24 * n_param;
    for d in 2..=m as u64 {
        total += 6 * d * n_param * (d + 1) + 48 * d * d * n_param * (d + 2);
    }
    total
}

struct Run<'a> {
    oracle: &'a dyn PermanentOracle,
    p: PrimeModulus,
    n_param: u64,
    calls: u64,
}

impl Run<'_> {
    /// The oracle restricted to `dim × dim` inputs by identity padding.
    fn eval(&mut self, x: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        self.calls += 1;
        let top = self.oracle.dim();
        let v = if x.dim() == top {
            self.oracle.evaluate(x, rng)
        } else {
            self.oracle.evaluate(&x.pad_identity(top), rng)
        };
        self.p.reduce(v)
    }

    /// Returns the failing `(dimension, stage)` or `None` when every check passed.
    fn level(&mut self, dim: usize, rng: &mut dyn RngCore) -> Option<(usize, FailureStage)> {
        let p = self.p;
        if dim == 1 {
            for _ in 0..24 * self.n_param {
                let x = p.random_element(rng);
                let scalar = MatrixModP::new(1, vec![x], p).expect("valid scalar");
                if self.eval(&scalar, rng) != x {
                    return Some((1, FailureStage::BaseCase));
                }
            }
            return None;
        }
        if let Some(failure) = self.level(dim - 1, rng) {
            return Some(failure);
        }
        for _ in 0..6 * dim as u64 * self.n_param {
            let m = MatrixModP::random(dim, p, rng);
            let claimed = self.eval(&m, rng);
            let minors: Vec<u64> = (1..=dim)
                .map(|i| self.eval(&m.first_row_minor(i), rng))
                .collect();
            if cofactor_expand(&m, &minors).expect("one minor per column") != claimed {
                return Some((dim, FailureStage::Cofactor));
            }
        }
        for _ in 0..48 * (dim * dim) as u64 * self.n_param {
            let m = MatrixModP::random(dim, p, rng);
            let d = MatrixModP::random(dim, p, rng);
            let values: Vec<u64> = (0..=dim as u64 + 1)
                .map(|i| self.eval(&m.add_scaled(&d, i), rng))
                .collect();
            if line_identity_residual(&m, &d, &values).expect("p checked") != 0 {
                return Some((dim, FailureStage::LineIdentity));
            }
        }
        None
    }
}

/// Recursive self-test of an oracle for `m × m` permanents mod `p`.
///
/// Tests the identity-padded restriction to `(m-1) × (m-1)` first, then runs
/// `6·m·n_param` cofactor checks and `48·m²·n_param` line checks, stopping at
/// the first failed check.
pub fn permanent_computation_test(
    m: usize,
    n_param: u64,
    p: PrimeModulus,
    oracle: &dyn PermanentOracle,
    rng: &mut dyn RngCore,
) -> Result<OracleVerdict> {
    if m == 0 || n_param == 0 {
        return Err(Error::InvalidParameter("m and n_param must be positive".into()));
    }
    if p.value() <= m as u64 + 1 {
        return Err(Error::ModulusTooSmall {
            p: p.value(),
            min: m as u64 + 1,
        });
    }
    if oracle.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: oracle.dim(),
        });
    }
    if oracle.modulus() != p {
        return Err(Error::InvalidParameter(format!(
            "oracle works mod {}, test runs mod {p}",
            oracle.modulus()
        )));
    }
    let mut run = Run {
        oracle,
        p,
        n_param,
        calls: 0,
    };
    let failure = run.level(m, rng);
    let (failure_stage, failed_dim) = match failure {
        None => (FailureStage::None, None),
        Some((1, _)) => (FailureStage::BaseCase, Some(1)),
        Some((d, _)) if d < m => (FailureStage::Recursion, Some(d)),
        Some((d, stage)) => (stage, Some(d)),
    };
    Ok(OracleVerdict {
        accepted: failure.is_none(),
        calls_made: run.calls,
        failure_stage,
        failed_dim,
    })
}

/// Random-line self-correction: for each of `lines` random directions `X'`,
/// computes `-Σ_{j=1}^{m+1} (-1)^j C(m+1,j) A(X + jX')` and returns the most
/// common value, smallest value on ties.
pub fn self_correct(
    oracle: &dyn PermanentOracle,
    x: &MatrixModP,
    lines: u64,
    rng: &mut dyn RngCore,
) -> Result<u64> {
    if lines == 0 {
        return Err(Error::InvalidParameter("self-correction needs at least one line".into()));
    }
    let p = x.modulus();
    let dim = x.dim();
    let coeffs = line_identity_coefficients(dim, p)?;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..lines {
        let dir = MatrixModP::random(dim, p, rng);
        let mut sum = 0;
        for (j, &c) in coeffs.iter().enumerate().skip(1) {
            let v = p.reduce(oracle.evaluate(&x.add_scaled(&dir, j as u64), rng));
            sum = p.add(sum, p.mul(c, v));
        }
        *counts.entry(p.neg(sum)).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    Ok(counts
        .into_iter()
        .find(|&(_, c)| c == best)
        .map(|(v, _)| v)
        .expect("at least one line"))
}

/// An oracle answering through [`self_correct`] on top of another one.
pub struct SelfCorrected<O> {
    inner: O,
    lines: u64,
}

impl<O: PermanentOracle> SelfCorrected<O> {
    pub fn new(inner: O, lines: u64) -> Result<Self> {
        let dim = inner.dim();
        line_identity_coefficients(dim, inner.modulus())?;
        if lines == 0 {
            return Err(Error::InvalidParameter("self-correction needs at least one line".into()));
        }
        Ok(SelfCorrected { inner, lines })
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: PermanentOracle> PermanentOracle for SelfCorrected<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn modulus(&self) -> PrimeModulus {
        self.inner.modulus()
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        self_correct(&self.inner, m, self.lines, rng).expect("validated at construction")
    }
    fn step_cost(&self) -> u64 {
        self.lines * (self.dim() as u64 + 1) * self.inner.step_cost()
    }
}
