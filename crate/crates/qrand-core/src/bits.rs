//! Packed bit strings and the shared raw-bit file format.
//!
//! Bits are stored most-significant-bit first: bit `i` of a [`BitString`]
//! lives in word `i / 64` at position `63 - i % 64`, and files serialize the
//! same order byte by byte (bit 0 is the top bit of byte 0). Trailing bits in
//! the final byte of a file are zero padding.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;

/// A packed string of bits with MSB-first addressing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    /// All-zero string of the given length.
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Parse from a `"0101"`-style string; any other character is rejected.
    pub fn from_bit_str(text: &str) -> Option<Self> {
        let mut s = Self::zeros(text.len());
        for (i, ch) in text.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => s.set(i, true),
                _ => return None,
            }
        }
        Some(s)
    }

    /// Interpret `len` bits from MSB-first packed bytes.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(len <= bytes.len() * 8, "length exceeds provided bytes");
        let mut s = Self::zeros(len);
        for i in 0..len {
            if bytes[i / 8] >> (7 - i % 8) & 1 == 1 {
                s.set(i, true);
            }
        }
        s
    }

    /// Uniformly random bits from the supplied generator.
    pub fn random<R: Rng>(rng: &mut R, len: usize) -> Self {
        let mut s = Self::zeros(len);
        for w in s.words.iter_mut() {
            *w = rng.random();
        }
        s.mask_tail();
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (63 - i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (63 - i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    /// Append all bits of `other`.
    pub fn extend(&mut self, other: &BitString) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    /// The 64 bits starting at bit `offset`; positions past the end read 0.
    #[inline]
    pub fn word_at(&self, offset: usize) -> u64 {
        let w = offset / 64;
        let shift = offset % 64;
        let lo = self.words.get(w).copied().unwrap_or(0);
        if shift == 0 {
            lo
        } else {
            let hi = self.words.get(w + 1).copied().unwrap_or(0);
            lo << shift | hi >> (64 - shift)
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// XOR with a same-length string.
    pub fn xor_assign(&mut self, other: &BitString) {
        assert_eq!(self.len, other.len, "xor requires equal lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Copy of bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len, "slice out of range");
        let mut out = BitString::zeros(len);
        let mut i = 0;
        while i < len {
            let take = (len - i).min(64);
            let word = self.word_at(start + i);
            let shifted = if take == 64 { word } else { word >> (64 - take) << (64 - take) };
            out.words[i / 64] = shifted;
            i += take;
        }
        out.mask_tail();
        out
    }

    /// Parity of the AND with a same-length string (the GF(2) inner product).
    pub fn and_parity(&self, other: &BitString) -> bool {
        debug_assert_eq!(self.len, other.len);
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() % 2 == 1
    }

    /// MSB-first packed bytes; the last byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n_bytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n_bytes);
        for chunk in 0..n_bytes {
            let word = self.words[chunk / 8];
            out.push((word >> (56 - 8 * (chunk % 8))) as u8);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    fn mask_tail(&mut self) {
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= u64::MAX << (64 - tail);
            }
        }
        debug_assert_eq!(self.words.len(), self.len.div_ceil(64));
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Write a bit string in the shared packed format (MSB-first within bytes).
pub fn write_bits_file(path: &Path, bits: &BitString) -> io::Result<()> {
    fs::write(path, bits.to_bytes())
}

/// Read a packed bit file; the length is eight times the file size.
pub fn read_bits_file(path: &Path) -> io::Result<BitString> {
    let bytes = fs::read(path)?;
    Ok(BitString::from_bytes(&bytes, bytes.len() * 8))
}
