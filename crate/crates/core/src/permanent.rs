//! Exact permanents and the two identities the self-tester checks.
//!
//! `Perm(M) = Σ_σ Π_i M[i][σ(i)]`. Two independent algorithms are kept:
//! plain enumeration of permutations (reference for `m <= 10`) and Ryser's
//! inclusion–exclusion formula with Gray-code subset order (`m <= 24`),
//! which the rest of the crate treats as ground truth.

use crate::error::{Error, Result};
use crate::finite_math::{crt_reconstruct, IntMatrix, MatrixModP, PrimeModulus};

pub const BRUTE_FORCE_MAX_DIM: usize = 10;
pub const RYSER_MAX_DIM: usize = 24;

/// Commutative ring used by the generic permanent kernels. Integer
/// arithmetic is checked, so every operation may fail on overflow.
trait Ring {
    type E: Copy;
    fn zero(&self) -> Self::E;
    fn one(&self) -> Self::E;
    fn add(&self, a: Self::E, b: Self::E) -> Option<Self::E>;
    fn sub(&self, a: Self::E, b: Self::E) -> Option<Self::E>;
    fn mul(&self, a: Self::E, b: Self::E) -> Option<Self::E>;
}

impl Ring for PrimeModulus {
    type E = u64;
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.value()
    }
    fn add(&self, a: u64, b: u64) -> Option<u64> {
        Some(PrimeModulus::add(self, a, b))
    }
    fn sub(&self, a: u64, b: u64) -> Option<u64> {
        Some(PrimeModulus::sub(self, a, b))
    }
    fn mul(&self, a: u64, b: u64) -> Option<u64> {
        Some(PrimeModulus::mul(self, a, b))
    }
}

struct Integers;

impl Ring for Integers {
    type E = i128;
    fn zero(&self) -> i128 {
        0
    }
    fn one(&self) -> i128 {
        1
    }
    fn add(&self, a: i128, b: i128) -> Option<i128> {
        a.checked_add(b)
    }
    fn sub(&self, a: i128, b: i128) -> Option<i128> {
        a.checked_sub(b)
    }
    fn mul(&self, a: i128, b: i128) -> Option<i128> {
        a.checked_mul(b)
    }
}

fn overflow() -> Error {
    Error::InvalidParameter("integer permanent overflows 128 bits".into())
}

fn check_dim(dim: usize, max: usize, algorithm: &'static str) -> Result<()> {
    if dim > max {
        return Err(Error::DimensionTooLarge { dim, max, algorithm });
    }
    Ok(())
}

/// Sum over permutations by depth-first extension of partial products.
fn brute_force<R: Ring>(ring: &R, dim: usize, entry: impl Fn(usize, usize) -> R::E) -> Option<R::E> {
    fn extend<R: Ring>(
        ring: &R,
        dim: usize,
        row: usize,
        used: u32,
        partial: R::E,
        entry: &dyn Fn(usize, usize) -> R::E,
    ) -> Option<R::E> {
        if row == dim {
            return Some(partial);
        }
        let mut total = ring.zero();
        for col in 0..dim {
            if used & (1 << col) == 0 {
                let next = ring.mul(partial, entry(row, col))?;
                let sub = extend(ring, dim, row + 1, used | (1 << col), next, entry)?;
                total = ring.add(total, sub)?;
            }
        }
        Some(total)
    }
    extend(ring, dim, 0, 0, ring.one(), &entry)
}

/// Ryser: `Perm(M) = (-1)^m Σ_{S ⊆ cols} (-1)^{|S|} Π_i Σ_{j ∈ S} M[i][j]`,
/// visiting subsets in Gray-code order so each step touches one column.
fn ryser<R: Ring>(ring: &R, dim: usize, entry: impl Fn(usize, usize) -> R::E) -> Option<R::E> {
    let mut row_sums = vec![ring.zero(); dim];
    let mut positive = ring.zero();
    let mut negative = ring.zero();
    let mut prev_gray: u32 = 0;
    for k in 1u32..(1u32 << dim) {
        let gray = k ^ (k >> 1);
        let col = (gray ^ prev_gray).trailing_zeros() as usize;
        let adding = gray & (1 << col) != 0;
        for (i, sum) in row_sums.iter_mut().enumerate() {
            *sum = if adding {
                ring.add(*sum, entry(i, col))?
            } else {
                ring.sub(*sum, entry(i, col))?
            };
        }
        prev_gray = gray;
        let mut prod = ring.one();
        for &s in &row_sums {
            prod = ring.mul(prod, s)?;
        }
        // Sign (-1)^{m - |S|}.
        if (dim as u32 - gray.count_ones()).is_multiple_of(2) {
            positive = ring.add(positive, prod)?;
        } else {
            negative = ring.add(negative, prod)?;
        }
    }
    ring.sub(positive, negative)
}

/// Permanent mod `p` by enumerating all `m!` permutations.
pub fn permanent_bruteforce(m: &MatrixModP) -> Result<u64> {
    check_dim(m.dim(), BRUTE_FORCE_MAX_DIM, "brute-force")?;
    let p = m.modulus();
    Ok(brute_force(&p, m.dim(), |r, c| m.get(r, c)).expect("modular arithmetic is total"))
}

/// Integer permanent by enumerating all `m!` permutations.
pub fn permanent_bruteforce_int(m: &IntMatrix) -> Result<i128> {
    check_dim(m.dim(), BRUTE_FORCE_MAX_DIM, "brute-force")?;
    brute_force(&Integers, m.dim(), |r, c| m.get(r, c) as i128).ok_or_else(overflow)
}

/// Permanent mod `p` by Ryser's formula in `O(2^m · m)`.
pub fn permanent_ryser(m: &MatrixModP) -> Result<u64> {
    check_dim(m.dim(), RYSER_MAX_DIM, "Ryser")?;
    let p = m.modulus();
    Ok(ryser(&p, m.dim(), |r, c| m.get(r, c)).expect("modular arithmetic is total"))
}

/// Integer permanent by Ryser's formula.
pub fn permanent_ryser_int(m: &IntMatrix) -> Result<i128> {
    check_dim(m.dim(), RYSER_MAX_DIM, "Ryser")?;
    ryser(&Integers, m.dim(), |r, c| m.get(r, c) as i128).ok_or_else(overflow)
}

/// First-row cofactor expansion `Σ_i M[1][i] · Perm(M_{-1,-i})` given the
/// claimed minor permanents, `minor_perms[i-1]` for deleted column `i`.
pub fn cofactor_expand(m: &MatrixModP, minor_perms: &[u64]) -> Result<u64> {
    if minor_perms.len() != m.dim() {
        return Err(Error::WrongCount {
            expected: m.dim(),
            found: minor_perms.len(),
        });
    }
    let p = m.modulus();
    Ok(m.row(0)
        .iter()
        .zip(minor_perms)
        .fold(0, |acc, (&a, &v)| p.add(acc, p.mul(a, p.reduce(v)))))
}

/// Coefficients `(-1)^i C(m+1, i) mod p` for `i = 0..=m+1`. Any polynomial
/// of degree at most `m` evaluated at `0..=m+1` is annihilated by them.
pub fn line_identity_coefficients(dim: usize, p: PrimeModulus) -> Result<Vec<u64>> {
    let min = dim as u64 + 1;
    if p.value() <= min {
        return Err(Error::ModulusTooSmall { p: p.value(), min });
    }
    Ok((0..=min)
        .map(|i| {
            let c = p.binomial(min, i);
            if i % 2 == 0 {
                c
            } else {
                p.neg(c)
            }
        })
        .collect())
}

/// `Σ_{i=0}^{m+1} (-1)^i C(m+1,i) · values[i] mod p`, where `values[i]` is
/// the claimed `Perm(M + i·M')`. Zero whenever the claims are true.
pub fn line_identity_residual(m: &MatrixModP, m_dir: &MatrixModP, values: &[u64]) -> Result<u64> {
    if m.dim() != m_dir.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: m_dir.dim(),
        });
    }
    let p = m.modulus();
    let coeffs = line_identity_coefficients(m.dim(), p)?;
    if values.len() != coeffs.len() {
        return Err(Error::WrongCount {
            expected: coeffs.len(),
            found: values.len(),
        });
    }
    Ok(coeffs
        .iter()
        .zip(values)
        .fold(0, |acc, (&c, &v)| p.add(acc, p.mul(c, p.reduce(v)))))
}

/// Integer permanent from its residues modulo `primes`, reconstructed as the
/// smallest-magnitude integer consistent with all of them.
pub fn permanent_integer_via_crt(m: &IntMatrix, primes: &[u64]) -> Result<i128> {
    let factorial: u128 = (1..=m.dim() as u128).product();
    let bound = (m.max_abs() as u128)
        .checked_pow(m.dim() as u32)
        .and_then(|v| v.checked_mul(factorial))
        .ok_or_else(overflow)?;
    let residues = primes
        .iter()
        .map(|&q| {
            let modulus = PrimeModulus::new(q)?;
            Ok((permanent_ryser(&m.reduce_mod(modulus))?, q))
        })
        .collect::<Result<Vec<_>>>()?;
    crt_reconstruct(&residues, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn p(v: u64) -> PrimeModulus {
        PrimeModulus::new(v).unwrap()
    }

    fn int(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn hand_checked_permanents() {
        let m = int(&[vec![1, 2], vec![3, 4]]);
        assert_eq!(permanent_bruteforce_int(&m), Ok(10));
        assert_eq!(permanent_ryser_int(&m), Ok(10));
        let id = int(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(permanent_bruteforce_int(&id), Ok(1));
        let ones = int(&[vec![1; 3], vec![1; 3], vec![1; 3]]);
        assert_eq!(permanent_bruteforce_int(&ones), Ok(6));
        assert_eq!(permanent_ryser_int(&ones), Ok(6));
        let scalar = MatrixModP::new(1, vec![42], p(101)).unwrap();
        assert_eq!(permanent_ryser(&scalar), Ok(42));
        assert_eq!(permanent_bruteforce(&scalar), Ok(42));
    }

    #[test]
    fn dimension_bounds() {
        let big = MatrixModP::zeros(11, p(7));
        assert!(matches!(
            permanent_bruteforce(&big),
            Err(Error::DimensionTooLarge { dim: 11, max: 10, .. })
        ));
        assert!(permanent_ryser(&MatrixModP::zeros(25, p(7))).is_err());
        // Ryser still handles what brute force refuses.
        let ones = MatrixModP::new(11, vec![1; 121], p(65537)).unwrap();
        // 11! = 39916800 = 609 * 65537 + 5967
        assert_eq!(permanent_ryser(&ones), Ok(39_916_800 % 65537));
    }

    #[test]
    fn exhaustive_small_agreement() {
        for q in [2u64, 3] {
            let modulus = p(q);
            for dim in 1..=3usize {
                let cells = dim * dim;
                let total = q.pow(cells as u32);
                for code in 0..total {
                    let mut c = code;
                    let entries = (0..cells)
                        .map(|_| {
                            let v = c % q;
                            c /= q;
                            v
                        })
                        .collect();
                    let m = MatrixModP::new(dim, entries, modulus).unwrap();
                    assert_eq!(permanent_bruteforce(&m), permanent_ryser(&m), "{m}");
                }
            }
        }
    }

    #[test]
    fn cofactor_examples() {
        let m = MatrixModP::from_rows(&[vec![1, 2], vec![3, 4]], p(101)).unwrap();
        assert_eq!(cofactor_expand(&m, &[4, 3]), Ok(10));
        assert_eq!(
            cofactor_expand(&m, &[4]),
            Err(Error::WrongCount { expected: 2, found: 1 })
        );
        let id = MatrixModP::identity(3, p(101));
        let minors: Vec<u64> = (1..=3)
            .map(|i| permanent_ryser(&id.first_row_minor(i)).unwrap())
            .collect();
        assert_eq!(cofactor_expand(&id, &minors), Ok(1));
    }

    #[test]
    fn cofactor_matches_ryser_on_random_matrices() {
        let mut rng = seeded(11);
        for _ in 0..1000 {
            let m = MatrixModP::random(5, p(101), &mut rng);
            let minors: Vec<u64> = (1..=5)
                .map(|i| permanent_ryser(&m.first_row_minor(i)).unwrap())
                .collect();
            assert_eq!(cofactor_expand(&m, &minors), permanent_ryser(&m));
        }
    }

    #[test]
    fn line_identity_examples() {
        let q = p(5);
        let id = MatrixModP::identity(2, q);
        // Perm((1+i) I_2) = (1+i)^2 for i = 0..3: 1, 4, 9, 16.
        let values = [1u64, 4, 9, 16];
        assert_eq!(line_identity_residual(&id, &id, &values), Ok(0));
        assert_eq!(
            line_identity_residual(&id, &id, &values[..3]),
            Err(Error::WrongCount { expected: 4, found: 3 })
        );
        assert_eq!(
            line_identity_residual(&id, &id, &[0; 4][..]).map(|_| ()),
            Ok(())
        );
        let tight = MatrixModP::identity(2, p(3));
        assert_eq!(
            line_identity_residual(&tight, &tight, &[0; 4]),
            Err(Error::ModulusTooSmall { p: 3, min: 3 })
        );
    }

    #[test]
    fn line_identity_on_true_values_and_single_corruptions() {
        let q = p(101);
        let mut rng = seeded(12);
        for trial in 0..1000 {
            let dim = 1 + trial % 5;
            let m = MatrixModP::random(dim, q, &mut rng);
            let d = MatrixModP::random(dim, q, &mut rng);
            let mut values: Vec<u64> = (0..=dim as u64 + 1)
                .map(|i| permanent_ryser(&m.add_scaled(&d, i)).unwrap())
                .collect();
            assert_eq!(line_identity_residual(&m, &d, &values), Ok(0));
            let i = trial % values.len();
            values[i] = q.add(values[i], 1);
            let expected = line_identity_coefficients(dim, q).unwrap()[i];
            let residual = line_identity_residual(&m, &d, &values).unwrap();
            assert_ne!(residual, 0);
            assert_eq!(residual, expected);
        }
    }

    #[test]
    fn crt_examples() {
        let primes = [2, 3, 5];
        assert_eq!(permanent_integer_via_crt(&int(&[vec![2, 1], vec![1, 2]]), &primes), Ok(5));
        assert_eq!(permanent_integer_via_crt(&int(&[vec![1, -1], vec![1, 1]]), &primes), Ok(0));
        assert!(matches!(
            permanent_integer_via_crt(&int(&[vec![8, 8], vec![8, 8]]), &primes),
            Err(Error::InsufficientModuli { .. })
        ));
    }

    proptest! {
        #[test]
        fn permanent_is_multilinear_in_first_row(
            seed in any::<u64>(), a in 0u64..101, dim in 1usize..6
        ) {
            let q = p(101);
            let mut rng = seeded(seed);
            let base = MatrixModP::random(dim, q, &mut rng);
            let u = MatrixModP::random(dim, q, &mut rng);
            let v = MatrixModP::random(dim, q, &mut rng);
            let with_row = |row: Vec<u64>| {
                let mut m = base.clone();
                for (c, x) in row.into_iter().enumerate() {
                    m.set(0, c, x);
                }
                permanent_ryser(&m).unwrap()
            };
            let combined: Vec<u64> = (0..dim)
                .map(|c| q.add(q.mul(a, u.get(0, c)), v.get(0, c)))
                .collect();
            let lhs = with_row(combined);
            let rhs = q.add(q.mul(a, with_row(u.row(0).to_vec())), with_row(v.row(0).to_vec()));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn crt_route_matches_integer_brute_force(
            dim in 1usize..=4,
            raw in proptest::collection::vec(-8i64..=8, 16)
        ) {
            let m = IntMatrix::new(dim, raw[..dim * dim].to_vec()).unwrap();
            let primes = [2, 3, 5, 7, 11, 13, 17];
            prop_assert_eq!(permanent_integer_via_crt(&m, &primes), permanent_bruteforce_int(&m));
        }
    }
}
