use rand::RngCore;

use super::bits::{BitReader, BitString};
use crate::error::{Error, Result};

/// A `rows × cols` matrix over GF(2). `x ↦ Bx` for uniform `B` is a
/// universal hash family from `{0,1}^cols` to `{0,1}^rows`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    data: Vec<BitString>,
    // Row masks as big-endian integers, present when cols <= 64.
    masks: Option<Vec<u64>>,
}

impl Gf2Matrix {
    pub fn from_rows(data: Vec<BitString>) -> Result<Self> {
        let rows = data.len();
        if rows == 0 {
            return Err(Error::InvalidParameter("GF(2) matrix needs at least one row".into()));
        }
        let cols = data[0].len();
        if cols == 0 {
            return Err(Error::InvalidParameter("GF(2) matrix needs at least one column".into()));
        }
        if let Some(bad) = data.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        let masks = (cols <= 64).then(|| {
            data.iter()
                .map(|r| r.read_uint(0..cols).expect("row width checked"))
                .collect()
        });
        Ok(Gf2Matrix {
            rows,
            cols,
            data,
            masks,
        })
    }

    pub fn random<R: RngCore + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows).map(|_| BitString::random(cols, rng)).collect();
        Self::from_rows(data).expect("positive dimensions")
    }

    pub fn identity(n: usize) -> Self {
        let data = (0..n)
            .map(|i| {
                let mut r = BitString::zeros(n);
                r.set(i, true);
                r
            })
            .collect();
        Self::from_rows(data).expect("positive dimensions")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &BitString {
        &self.data[i]
    }

    /// Row-major bit serialization, `rows * cols` bits.
    pub fn to_bits(&self) -> BitString {
        let mut out = BitString::with_capacity(self.rows * self.cols);
        for r in &self.data {
            out.append(r);
        }
        out
    }

    pub fn read_from(reader: &mut BitReader<'_>, rows: usize, cols: usize) -> Result<Self> {
        let data = (0..rows)
            .map(|_| reader.read_bits(cols))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(data)
    }

    /// Fast path of [`gf2_hash`] for inputs written as `cols`-bit big-endian
    /// integers; the result is a `rows`-bit big-endian integer.
    pub fn apply_uint(&self, x: u64) -> u64 {
        let masks = self
            .masks
            .as_ref()
            .expect("apply_uint requires at most 64 columns");
        assert!(self.rows <= 64);
        masks
            .iter()
            .fold(0u64, |acc, &m| (acc << 1) | ((m & x).count_ones() as u64 & 1))
    }
}

/// `B·x` over GF(2).
pub fn gf2_hash(b: &Gf2Matrix, x: &BitString) -> Result<BitString> {
    if x.len() != b.cols {
        return Err(Error::DimensionMismatch {
            expected: b.cols,
            found: x.len(),
        });
    }
    Ok(b.data
        .iter()
        .map(|row| {
            row.as_bitslice()
                .iter_ones()
                .fold(false, |acc, c| acc ^ x.get(c))
        })
        .collect())
}
