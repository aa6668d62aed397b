//! Packed bit strings.
//!
//! Bit `0` is the first (leftmost) bit of the string. When a string is read
//! as an integer it is big-endian: bit `0` is the most significant.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

const WORD: usize = 64;

/// A fixed-length string over {0,1}, stored in 64-bit words.
///
/// Bits past `len` in the final word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

impl BitString {
    /// Default upper bound on lengths accepted by the checked constructors.
    pub const MAX_LEN: usize = 1 << 20;

    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = BitString {
            words: vec![u64::MAX; words_for(len)],
            len,
        };
        s.clear_tail();
        s
    }

    /// Builds a string from 0/1 values; any other value is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() > Self::MAX_LEN {
            return Err(Error::TooLarge(format!(
                "bit string of length {} exceeds {}",
                bits.len(),
                Self::MAX_LEN
            )));
        }
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => s.set(i, true),
                other => return Err(Error::Domain(format!("bit {i} has value {other}, expected 0 or 1"))),
            }
        }
        Ok(s)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.set(i, true);
            }
        }
        s
    }

    /// Uniformly random string of the given length.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = BitString {
            words: (0..words_for(len)).map(|_| rng.random::<u64>()).collect(),
            len,
        };
        s.clear_tail();
        s
    }

    /// Reads the low `len` bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut s = Self::zeros(len);
        for i in 0..len {
            if (value >> (len - 1 - i)) & 1 == 1 {
                s.set(i, true);
            }
        }
        s
    }

    /// Inverse of [`BitString::from_u64`].
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        (0..self.len).fold(0u64, |acc, i| (acc << 1) | self.get(i) as u64)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let v = self.get(i);
        self.set(i, !v);
    }

    /// Copy of `self` with bit `i` set to `value`.
    pub fn with_bit(&self, i: usize, value: bool) -> Self {
        let mut s = self.clone();
        s.set(i, value);
        s
    }

    pub fn complement(&self) -> Self {
        let mut s = BitString {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        s.clear_tail();
        s
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of positions where the two strings differ.
    pub fn hamming(&self, other: &BitString) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &BitString) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// The first `len` bits.
    pub fn prefix(&self, len: usize) -> Self {
        assert!(len <= self.len);
        let mut s = BitString {
            words: self.words[..words_for(len)].to_vec(),
            len,
        };
        s.clear_tail();
        s
    }

    /// Appends a single bit.
    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Bitwise combination `(self & !mask) | (values & mask)`.
    pub(crate) fn overlay(&self, mask: &BitString, values: &BitString) -> Self {
        debug_assert!(self.len == mask.len && self.len == values.len);
        BitString {
            words: self
                .words
                .iter()
                .zip(&mask.words)
                .zip(&values.words)
                .map(|((w, m), v)| (w & !m) | (v & m))
                .collect(),
            len: self.len,
        }
    }

    pub(crate) fn xor(&self, other: &BitString) -> Self {
        debug_assert_eq!(self.len, other.len);
        BitString {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
            len: self.len,
        }
    }

    /// Writes the bits as 0.0/1.0 into `out`.
    pub fn write_f64(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.len);
        for (i, o) in out.iter_mut().enumerate() {
            *o = if self.get(i) { 1.0 } else { 0.0 };
        }
    }

    /// Compares the strings as big-endian unsigned integers.
    pub fn cmp_big_endian(&self, other: &BitString) -> Result<Ordering> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        for i in 0..self.len {
            match (self.get(i), other.get(i)) {
                (true, false) => return Ok(Ordering::Greater),
                (false, true) => return Ok(Ordering::Less),
                _ => {}
            }
        }
        Ok(Ordering::Equal)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
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
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::Domain(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn hamming_small_cases() {
        let a: BitString = "0011".parse().unwrap();
        let b: BitString = "0101".parse().unwrap();
        assert_eq!(a.hamming(&b).unwrap(), 2);
        assert_eq!(a.hamming(&a).unwrap(), 0);
        assert_eq!(a.hamming(&a.complement()).unwrap(), 4);
    }

    #[test]
    fn hamming_rejects_mismatched_lengths() {
        let a = BitString::zeros(5);
        let b = BitString::zeros(6);
        assert!(matches!(
            a.hamming(&b),
            Err(Error::LengthMismatch { expected: 5, found: 6 })
        ));
    }

    #[test]
    fn complement_keeps_tail_clear() {
        let mut rng = RngStream::new(1, 0);
        for len in [0, 1, 63, 64, 65, 130] {
            let x = BitString::random(len, &mut rng);
            let c = x.complement();
            assert_eq!(c.count_ones(), len - x.count_ones());
            assert_eq!(x.hamming(&c).unwrap(), len);
        }
    }

    #[test]
    fn rejects_non_binary_values() {
        assert!(BitString::from_bits(&[0, 1, 2]).is_err());
        assert!("01x".parse::<BitString>().is_err());
    }

    #[test]
    fn prefix_and_push() {
        let x: BitString = "1011001".parse().unwrap();
        let mut p = x.prefix(3);
        assert_eq!(p.to_string(), "101");
        p.push(true);
        assert_eq!(p.to_string(), "1011");
        assert_eq!(x.prefix(0).len(), 0);
    }

    #[test]
    fn big_endian_order() {
        let c: BitString = "1001011".parse().unwrap();
        let z: BitString = "1001100".parse().unwrap();
        assert_eq!(c.cmp_big_endian(&z).unwrap(), Ordering::Less);
        assert_eq!(
            BitString::from_u64(75, 7)
                .cmp_big_endian(&BitString::from_u64(76, 7))
                .unwrap(),
            Ordering::Less
        );
        assert_eq!(BitString::from_u64(75, 7), c);
        assert_eq!(c.to_u64(), 75);
    }
}
