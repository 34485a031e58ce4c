use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest modulus accepted; keeps every product of two residues inside `u64`
/// and lets `p` travel in a 32-bit header field.
pub const MAX_MODULUS: u64 = u32::MAX as u64;

/// Deterministic trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) || n.is_multiple_of(3) {
        return false;
    }
    let mut d = 5u64;
    while d * d <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// All primes `<= bound`, ascending.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    (2..=bound).filter(|&n| is_prime(n)).collect()
}

/// `⌈log2 v⌉` for `v >= 1`.
pub fn ceil_log2(v: u64) -> u32 {
    assert!(v >= 1, "ceil_log2 of zero");
    if v == 1 {
        0
    } else {
        64 - (v - 1).leading_zeros()
    }
}

/// A prime modulus `p` together with its bit width `⌈log2 p⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeModulus {
    p: u64,
    bit_width: u32,
}

impl TryFrom<u64> for PrimeModulus {
    type Error = Error;

    fn try_from(p: u64) -> Result<Self> {
        PrimeModulus::new(p)
    }
}

impl From<PrimeModulus> for u64 {
    fn from(m: PrimeModulus) -> u64 {
        m.p
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.p)
    }
}

impl PrimeModulus {
    pub fn new(p: u64) -> Result<Self> {
        if p > MAX_MODULUS {
            return Err(Error::InvalidParameter(format!(
                "modulus {p} exceeds {MAX_MODULUS}"
            )));
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeModulus {
            p,
            bit_width: ceil_log2(p),
        })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.p
    }

    /// Number of bits used to write a residue, `⌈log2 p⌉`.
    #[inline]
    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> u64 {
        v % self.p
    }

    #[inline]
    pub fn reduce_signed(&self, v: i128) -> u64 {
        v.rem_euclid(self.p as i128) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.p;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let a = a % self.p;
        (a != 0).then(|| self.pow(a, self.p - 2))
    }

    /// `C(n, k) mod p`, computed over the integers first so it is exact even
    /// when `n >= p`.
    pub fn binomial(&self, n: u64, k: u64) -> u64 {
        if k > n {
            return 0;
        }
        let k = k.min(n - k);
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        (acc % self.p as u128) as u64
    }

    pub fn random_element<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.p)
    }
}

/// Square matrix over `Z_p` stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatrixModP {
    dim: usize,
    entries: Vec<u64>,
    modulus: PrimeModulus,
}

impl MatrixModP {
    /// Builds a matrix from row-major entries, reducing each mod `p`.
    pub fn new(dim: usize, entries: Vec<u64>, modulus: PrimeModulus) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let entries = entries.into_iter().map(|v| modulus.reduce(v)).collect();
        Ok(MatrixModP {
            dim,
            entries,
            modulus,
        })
    }

    pub fn from_rows(rows: &[Vec<u64>], modulus: PrimeModulus) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        Self::new(dim, rows.concat(), modulus)
    }

    pub fn random<R: RngCore + ?Sized>(dim: usize, modulus: PrimeModulus, rng: &mut R) -> Self {
        assert!(dim >= 1);
        let entries = (0..dim * dim).map(|_| modulus.random_element(rng)).collect();
        MatrixModP {
            dim,
            entries,
            modulus,
        }
    }

    pub fn zeros(dim: usize, modulus: PrimeModulus) -> Self {
        assert!(dim >= 1);
        MatrixModP {
            dim,
            entries: vec![0; dim * dim],
            modulus,
        }
    }

    pub fn identity(dim: usize, modulus: PrimeModulus) -> Self {
        let mut m = Self::zeros(dim, modulus);
        for i in 0..dim {
            m.entries[i * dim + i] = 1 % modulus.value();
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u64) {
        self.entries[row * self.dim + col] = self.modulus.reduce(value);
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn row(&self, row: usize) -> &[u64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    /// The matrix with row `row` and column `col` removed (0-based).
    pub fn minor(&self, row: usize, col: usize) -> MatrixModP {
        assert!(self.dim >= 2, "minor of a 1x1 matrix");
        let d = self.dim - 1;
        let mut entries = Vec::with_capacity(d * d);
        for r in (0..self.dim).filter(|&r| r != row) {
            for c in (0..self.dim).filter(|&c| c != col) {
                entries.push(self.get(r, c));
            }
        }
        MatrixModP {
            dim: d,
            entries,
            modulus: self.modulus,
        }
    }

    /// `M_{-1,-i}`: first row and column `i` removed, `i` counted from 1.
    pub fn first_row_minor(&self, i: usize) -> MatrixModP {
        assert!((1..=self.dim).contains(&i), "column index {i} out of 1..={}", self.dim);
        self.minor(0, i - 1)
    }

    /// `self + k * other`.
    pub fn add_scaled(&self, other: &MatrixModP, k: u64) -> MatrixModP {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.modulus, other.modulus);
        let p = self.modulus;
        let k = p.reduce(k);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| p.add(a, p.mul(k, b)))
            .collect();
        MatrixModP {
            dim: self.dim,
            entries,
            modulus: p,
        }
    }

    /// Embeds `self` into the top-left corner of a `target`-dimensional
    /// matrix whose remaining diagonal entries are 1 and off-diagonal 0.
    /// The permanent is unchanged.
    pub fn pad_identity(&self, target: usize) -> MatrixModP {
        assert!(target >= self.dim);
        if target == self.dim {
            return self.clone();
        }
        let mut out = MatrixModP::identity(target, self.modulus);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.entries[r * target + c] = self.get(r, c);
            }
        }
        out
    }
}

impl fmt::Display for MatrixModP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.dim {
            if r > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}", self.row(r))?;
        }
        write!(f, "] mod {}", self.modulus)
    }
}

/// Square integer matrix, the input to the CRT permanent route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    dim: usize,
    entries: Vec<i64>,
}

impl IntMatrix {
    pub fn new(dim: usize, entries: Vec<i64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(IntMatrix { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        Self::new(dim, rows.concat())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn max_abs(&self) -> u64 {
        self.entries.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn reduce_mod(&self, modulus: PrimeModulus) -> MatrixModP {
        let entries = self
            .entries
            .iter()
            .map(|&v| modulus.reduce_signed(v as i128))
            .collect();
        MatrixModP {
            dim: self.dim,
            entries,
            modulus,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_by_trial_division() {
        let small: Vec<u64> = (0..40).filter(|&n| is_prime(n)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]);
        assert!(is_prime(65537));
        assert!(!is_prime(65535));
        assert!(is_prime(999_983));
        assert!(!is_prime(1_000_000));
    }

    #[test]
    fn modulus_rejects_composites() {
        assert_eq!(PrimeModulus::new(15), Err(Error::NotPrime(15)));
        assert_eq!(PrimeModulus::new(1), Err(Error::NotPrime(1)));
        let p = PrimeModulus::new(101).unwrap();
        assert_eq!(p.bit_width(), 7);
        assert_eq!(PrimeModulus::new(2).unwrap().bit_width(), 1);
        assert_eq!(PrimeModulus::new(5).unwrap().bit_width(), 3);
        assert_eq!(PrimeModulus::new(65537).unwrap().bit_width(), 17);
    }

    #[test]
    fn field_arithmetic() {
        let p = PrimeModulus::new(101).unwrap();
        assert_eq!(p.add(100, 5), 4);
        assert_eq!(p.sub(3, 5), 99);
        assert_eq!(p.neg(0), 0);
        assert_eq!(p.mul(50, 3), 49);
        for a in 1..101 {
            assert_eq!(p.mul(a, p.inv(a).unwrap()), 1);
        }
        assert_eq!(p.inv(0), None);
        assert_eq!(p.binomial(5, 2), 10);
        assert_eq!(p.binomial(200, 1), 200 % 101);
        assert_eq!(p.reduce_signed(-1), 100);
    }

    #[test]
    fn minors_and_padding() {
        let p = PrimeModulus::new(101).unwrap();
        let m = MatrixModP::from_rows(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]], p).unwrap();
        assert_eq!(m.first_row_minor(1).entries(), &[5, 6, 8, 9]);
        assert_eq!(m.first_row_minor(3).entries(), &[4, 5, 7, 8]);
        let padded = m.first_row_minor(2).pad_identity(4);
        assert_eq!(padded.row(0), &[4, 6, 0, 0]);
        assert_eq!(padded.row(2), &[0, 0, 1, 0]);
        assert_eq!(padded.row(3), &[0, 0, 0, 1]);
    }

    #[test]
    fn construction_validates_shape() {
        let p = PrimeModulus::new(7).unwrap();
        assert!(MatrixModP::new(2, vec![1, 2, 3], p).is_err());
        assert!(MatrixModP::from_rows(&[vec![1, 2], vec![3]], p).is_err());
        let m = MatrixModP::new(1, vec![9], p).unwrap();
        assert_eq!(m.get(0, 0), 2);
    }
}
