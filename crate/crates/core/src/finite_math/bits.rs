use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use bitvec::prelude::*;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// An ordered sequence of bits. Packing to bytes is big-endian within each
/// byte (first bit is the most significant bit of byte 0), with the final
/// byte zero-padded.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: BitVec<u8, Msb0>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            bits: BitVec::with_capacity(bits),
        }
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            bits: bitvec![u8, Msb0; 0; len],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        BitString {
            bits: bits.iter().copied().collect(),
        }
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        Self::from_packed(&bytes, len).expect("length within packed bytes")
    }

    /// Rebuilds a string of `len` bits from its packed form. Trailing pad
    /// bits must be zero.
    pub fn from_packed(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(Error::WrongCount {
                expected: len.div_ceil(8),
                found: bytes.len(),
            });
        }
        let mut bits: BitVec<u8, Msb0> = BitVec::from_slice(bytes);
        bits.truncate(len);
        Ok(BitString { bits })
    }

    /// Packed bytes, zero-padded to a whole byte.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut bits = self.bits.clone();
        bits.set_uninitialized(false);
        bits.into_vec()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits.set(i, value);
    }

    pub fn flip(&mut self, i: usize) {
        let v = self.bits[i];
        self.bits.set(i, !v);
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends `other` in place (`self ∥ other`).
    pub fn append(&mut self, other: &BitString) {
        self.bits.extend_from_bitslice(&other.bits);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = BitString::with_capacity(self.len() + other.len());
        out.append(self);
        out.append(other);
        out
    }

    pub fn slice(&self, range: Range<usize>) -> BitString {
        BitString {
            bits: self.bits[range].to_bitvec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().by_vals()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn all_zero(&self) -> bool {
        self.bits.not_any()
    }

    /// Bitwise XOR of equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let mut bits = self.bits.clone();
        bits ^= other.bits.as_bitslice();
        Ok(BitString { bits })
    }

    pub fn as_bitslice(&self) -> &BitSlice<u8, Msb0> {
        &self.bits
    }

    /// Reads the big-endian unsigned integer stored in `range`.
    pub fn read_uint(&self, range: Range<usize>) -> Result<u64> {
        let width = range.len();
        if width > 64 {
            return Err(Error::InvalidParameter(format!("field of {width} bits exceeds 64")));
        }
        if range.end > self.len() {
            return Err(Error::DimensionMismatch {
                expected: range.end,
                found: self.len(),
            });
        }
        Ok(self.bits[range]
            .iter()
            .by_vals()
            .fold(0u64, |acc, b| (acc << 1) | b as u64))
    }

    /// Appends `value` as a big-endian field of `width` bits.
    pub fn push_uint(&mut self, value: u64, width: u32) -> Result<()> {
        check_width(value, width)?;
        for shift in (0..width).rev() {
            self.bits.push((value >> shift) & 1 == 1);
        }
        Ok(())
    }
}

fn check_width(value: u64, width: u32) -> Result<()> {
    if width > 64 || (width < 64 && value >> width != 0) {
        return Err(Error::ValueExceedsWidth { value, width });
    }
    Ok(())
}

/// Big-endian fixed-width encoding of `value`.
pub fn encode_uint(value: u64, width: u32) -> Result<BitString> {
    let mut out = BitString::with_capacity(width as usize);
    out.push_uint(value, width)?;
    Ok(out)
}

/// Inverse of [`encode_uint`]; the width is the string length.
pub fn decode_uint(bits: &BitString) -> Result<u64> {
    bits.read_uint(0..bits.len())
}

/// Sequential big-endian field reader over a bit string.
pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        BitReader { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_uint(&mut self, width: u32) -> Result<u64> {
        let end = self.pos + width as usize;
        let v = self.bits.read_uint(self.pos..end)?;
        self.pos = end;
        Ok(v)
    }

    pub fn read_bits(&mut self, len: usize) -> Result<BitString> {
        let end = self.pos + len;
        if end > self.bits.len() {
            return Err(Error::DimensionMismatch {
                expected: end,
                found: self.bits.len(),
            });
        }
        let out = self.bits.slice(self.pos..end);
        self.pos = end;
        Ok(out)
    }

    pub fn skip(&mut self, len: usize) -> Result<()> {
        if self.pos + len > self.bits.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pos + len,
                found: self.bits.len(),
            });
        }
        self.pos += len;
        Ok(())
    }

    pub fn rest(&self) -> &BitSlice<u8, Msb0> {
        &self.bits.as_bitslice()[self.pos..]
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitString::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => out.push(false),
                '1' => out.push(true),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "`{other}` is not a bit"
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString {
            bits: iter.into_iter().collect(),
        }
    }
}

/// Draws a uniform `width`-bit value.
pub fn random_uint<R: RngCore + ?Sized>(width: u32, rng: &mut R) -> u64 {
    match width {
        0 => 0,
        64 => rng.next_u64(),
        w => rng.gen_range(0..(1u64 << w)),
    }
}
