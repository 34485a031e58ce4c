use rand::RngCore;

use super::{PermanentOracle, SampleContext};
use crate::finite_math::{MatrixModP, PrimeModulus};

const MAX_MONOMIALS: usize = 4096;

/// Number of degree-`dim` monomials in `dim²` variables, `C(dim² + dim - 1, dim)`.
pub fn monomial_count(dim: usize) -> usize {
    let vars = dim * dim;
    let mut c: u128 = 1;
    for i in 0..dim as u128 {
        c = c * (vars as u128 + i) / (i + 1);
    }
    c.min(usize::MAX as u128) as usize
}

/// Nondecreasing index tuples of length `degree` over `vars` variables.
fn monomials(vars: usize, degree: usize) -> Vec<Vec<usize>> {
    fn extend(vars: usize, degree: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == degree {
            out.push(cur.clone());
            return;
        }
        for v in start..vars {
            cur.push(v);
            extend(vars, degree, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(vars, degree, 0, &mut Vec::with_capacity(degree), &mut out);
    out
}

fn monomial_values(m: &MatrixModP, monos: &[Vec<usize>]) -> Vec<u64> {
    let p = m.modulus();
    let e = m.entries();
    monos
        .iter()
        .map(|mono| mono.iter().fold(1 % p.value(), |acc, &v| p.mul(acc, e[v])))
        .collect()
}

/// Solves `rows · coeffs = rhs` mod `p`; `None` unless the solution is unique.
fn solve_unique(mut rows: Vec<Vec<u64>>, p: PrimeModulus, unknowns: usize) -> Option<Vec<u64>> {
    let mut pivot_row = 0;
    let mut pivots = Vec::with_capacity(unknowns);
    for col in 0..unknowns {
        let found = (pivot_row..rows.len()).find(|&r| rows[r][col] != 0)?;
        rows.swap(pivot_row, found);
        let inv = p.inv(rows[pivot_row][col]).expect("nonzero mod prime");
        for v in rows[pivot_row].iter_mut() {
            *v = p.mul(*v, inv);
        }
        let pivot = rows[pivot_row].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pivot_row && row[col] != 0 {
                let f = row[col];
                for (a, &b) in row.iter_mut().zip(&pivot) {
                    *a = p.sub(*a, p.mul(f, b));
                }
            }
        }
        pivots.push(pivot_row);
        pivot_row += 1;
    }
    // Any leftover row with a nonzero right-hand side means the samples
    // are inconsistent with every polynomial of this shape.
    if rows[pivot_row..].iter().any(|r| r[unknowns] != 0) {
        return None;
    }
    Some(pivots.iter().map(|&r| rows[r][unknowns]).collect())
}

/// Learns `Perm` as an unknown homogeneous polynomial of degree `dim` from
/// the sample context. Succeeds exactly when the samples pin down all
/// `monomial_count(dim)` coefficients; otherwise it guesses uniformly.
pub struct InterpolationOracle {
    dim: usize,
    p: PrimeModulus,
    monomials: Vec<Vec<usize>>,
    coefficients: Option<Vec<u64>>,
}

impl InterpolationOracle {
    pub fn fit(dim: usize, p: PrimeModulus, context: &SampleContext) -> Self {
        let samples: Vec<_> = context.iter().filter(|(m, _)| m.dim() == dim).collect();
        let count = monomial_count(dim);
        let mut oracle = InterpolationOracle {
            dim,
            p,
            monomials: Vec::new(),
            coefficients: None,
        };
        if count > MAX_MONOMIALS || samples.len() < count {
            return oracle;
        }
        oracle.monomials = monomials(dim * dim, dim);
        let rows = samples
            .iter()
            .map(|(m, v)| {
                let mut row = monomial_values(m, &oracle.monomials);
                row.push(p.reduce(*v));
                row
            })
            .collect();
        oracle.coefficients = solve_unique(rows, p, count);
        oracle
    }

    pub fn is_fitted(&self) -> bool {
        self.coefficients.is_some()
    }
}

impl PermanentOracle for InterpolationOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.p
    }
    fn evaluate(&self, m: &MatrixModP, rng: &mut dyn RngCore) -> u64 {
        match &self.coefficients {
            Some(coeffs) => monomial_values(m, &self.monomials)
                .iter()
                .zip(coeffs)
                .fold(0, |acc, (&x, &c)| self.p.add(acc, self.p.mul(x, c))),
            None => self.p.random_element(rng),
        }
    }
    fn step_cost(&self) -> u64 {
        (self.monomials.len().max(1) * self.dim) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permanent::permanent_ryser;
    use crate::rng::seeded;

    fn context(dim: usize, p: PrimeModulus, count: usize, seed: u64) -> Vec<(MatrixModP, u64)> {
        let mut rng = seeded(seed);
        (0..count)
            .map(|_| {
                let m = MatrixModP::random(dim, p, &mut rng);
                let v = permanent_ryser(&m).unwrap();
                (m, v)
            })
            .collect()
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomial_count(1), 1);
        assert_eq!(monomial_count(2), 10);
        assert_eq!(monomial_count(3), 165);
        assert_eq!(monomials(4, 2).len(), 10);
        assert_eq!(monomials(9, 3).len(), 165);
    }

    #[test]
    fn recovers_two_by_two_permanent_from_enough_samples() {
        let p = PrimeModulus::new(101).unwrap();
        let oracle = InterpolationOracle::fit(2, p, &context(2, p, 32, 1));
        assert!(oracle.is_fitted());
        let mut rng = seeded(2);
        for _ in 0..200 {
            let m = MatrixModP::random(2, p, &mut rng);
            assert_eq!(oracle.evaluate(&m, &mut rng), permanent_ryser(&m).unwrap());
        }
    }

    #[test]
    fn too_few_samples_leave_it_guessing() {
        let p = PrimeModulus::new(101).unwrap();
        assert!(!InterpolationOracle::fit(3, p, &context(3, p, 32, 3)).is_fitted());
        assert!(!InterpolationOracle::fit(2, p, &context(2, p, 9, 4)).is_fitted());
    }

    #[test]
    fn inconsistent_samples_are_rejected() {
        let p = PrimeModulus::new(101).unwrap();
        let mut ctx = context(2, p, 40, 5);
        ctx[0].1 = p.add(ctx[0].1, 1);
        assert!(!InterpolationOracle::fit(2, p, &ctx).is_fitted());
    }
}
