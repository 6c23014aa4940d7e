//! Immutable packed bit sequences.
//!
//! Bits are stored MSB-first: bit 0 of the sequence is the most significant
//! bit of the first storage word, which also makes byte import/export read
//! left to right the way hex dumps do.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

const WORD_BITS: usize = 64;

#[derive(Debug, Error)]
pub enum BitSeqError {
    #[error("input contains no bits")]
    EmptyInput,
    #[error("invalid character {found:?} at position {position}")]
    InvalidCharacter { position: usize, found: char },
    #[error("requested {requested} bits but only {available} are available")]
    LengthMismatch { requested: usize, available: usize },
    #[error("window [{start}, {start}+{width}) out of range for length {len}")]
    OutOfRange { start: usize, width: usize, len: usize },
    #[error("malformed length sidecar {path}: {reason}")]
    BadSidecar { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A binary sequence of `len() >= 1` bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitSequence {
    len: usize,
    words: Vec<u64>,
}

impl BitSequence {
    /// Parses a string of `'0'`/`'1'` characters; whitespace is skipped.
    pub fn from_ascii01(text: &str) -> Result<Self, BitSeqError> {
        let mut builder = Builder::with_capacity(text.len());
        for (position, ch) in text.chars().enumerate() {
            match ch {
                '0' => builder.push(false),
                '1' => builder.push(true),
                c if c.is_whitespace() => {}
                found => return Err(BitSeqError::InvalidCharacter { position, found }),
            }
        }
        builder.finish()
    }

    /// Takes the first `nbits` bits of `data`, most significant bit of each byte first.
    pub fn from_bytes(data: &[u8], nbits: usize) -> Result<Self, BitSeqError> {
        let available = data.len() * 8;
        if nbits > available {
            return Err(BitSeqError::LengthMismatch { requested: nbits, available });
        }
        if nbits == 0 {
            return Err(BitSeqError::EmptyInput);
        }
        let nbytes = nbits.div_ceil(8);
        let words = data[..nbytes]
            .chunks(8)
            .map(|chunk| {
                let mut buf = [0u8; 8];
                buf[..chunk.len()].copy_from_slice(chunk);
                u64::from_be_bytes(buf)
            })
            .collect();
        Ok(Self::from_words(words, nbits))
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self, BitSeqError> {
        let mut builder = Builder::with_capacity(0);
        for b in bits {
            builder.push(b);
        }
        builder.finish()
    }

    /// Builds from MSB-first words; bits past `len` are cleared.
    pub(crate) fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        debug_assert!(len >= 1);
        words.truncate(len.div_ceil(WORD_BITS));
        debug_assert_eq!(words.len(), len.div_ceil(WORD_BITS));
        let tail = len % WORD_BITS;
        if tail != 0 {
            if let Some(last) = words.last_mut() {
                *last &= !0u64 << (WORD_BITS - tail);
            }
        }
        Self { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit `i` as 0 or 1. Panics when `i >= len()`.
    #[inline]
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        ((self.words[i / WORD_BITS] >> (WORD_BITS - 1 - i % WORD_BITS)) & 1) as u8
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.bit(i) == 1)
    }

    pub fn ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn zeros(&self) -> usize {
        self.len - self.ones()
    }

    /// The `width` bits starting at `start`, first bit most significant.
    pub fn slice_window(&self, start: usize, width: usize) -> Result<u32, BitSeqError> {
        if width > 32 || start.checked_add(width).is_none_or(|end| end > self.len) {
            return Err(BitSeqError::OutOfRange { start, width, len: self.len });
        }
        if width == 0 {
            return Ok(0);
        }
        let w = start / WORD_BITS;
        let off = start % WORD_BITS;
        let hi = u128::from(self.words[w]) << 64;
        let lo = self.words.get(w + 1).copied().map_or(0, u128::from);
        let joined = (hi | lo) << off;
        Ok((joined >> (128 - width)) as u32)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bit(i) == 1)
    }

    /// One byte (0 or 1) per bit.
    pub fn unpacked(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len);
        for (k, &word) in self.words.iter().enumerate() {
            let take = (self.len - k * WORD_BITS).min(WORD_BITS);
            out.extend((0..take).map(|j| ((word >> (WORD_BITS - 1 - j)) & 1) as u8));
        }
        out
    }

    /// Packs to bytes MSB-first; the final byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_be_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn to_ascii01(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 64;
        let head: String = self
            .iter()
            .take(SHOWN)
            .map(|b| if b { '1' } else { '0' })
            .collect();
        let more = if self.len > SHOWN { "..." } else { "" };
        write!(f, "BitSequence(len={}, {head}{more})", self.len)
    }
}

struct Builder {
    len: usize,
    words: Vec<u64>,
    cur: u64,
}

impl Builder {
    fn with_capacity(bits: usize) -> Self {
        Self { len: 0, words: Vec::with_capacity(bits.div_ceil(WORD_BITS)), cur: 0 }
    }

    fn push(&mut self, bit: bool) {
        let pos = self.len % WORD_BITS;
        if bit {
            self.cur |= 1u64 << (WORD_BITS - 1 - pos);
        }
        self.len += 1;
        if pos == WORD_BITS - 1 {
            self.words.push(self.cur);
            self.cur = 0;
        }
    }

    fn finish(mut self) -> Result<BitSequence, BitSeqError> {
        if self.len == 0 {
            return Err(BitSeqError::EmptyInput);
        }
        if self.len % WORD_BITS != 0 {
            self.words.push(self.cur);
        }
        Ok(BitSequence::from_words(self.words, self.len))
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".len");
    PathBuf::from(name)
}

/// Reads a sequence file: `.txt` as ASCII `0`/`1`, anything else as packed
/// MSB-first binary whose bit length comes from the `<file>.len` sidecar
/// (defaulting to every bit in the file when the sidecar is absent).
pub fn read_sequence(path: &Path) -> Result<BitSequence, BitSeqError> {
    if path.extension().is_some_and(|e| e == "txt") {
        return BitSequence::from_ascii01(&fs::read_to_string(path)?);
    }
    let data = fs::read(path)?;
    let side = sidecar_path(path);
    let nbits = if side.exists() {
        let text = fs::read_to_string(&side)?;
        text.trim().parse::<usize>().map_err(|e| BitSeqError::BadSidecar {
            path: side.clone(),
            reason: e.to_string(),
        })?
    } else {
        data.len() * 8
    };
    BitSequence::from_bytes(&data, nbits)
}

/// Writes packed bytes plus a `<file>.len` sidecar holding the bit count.
pub fn write_bin(path: &Path, seq: &BitSequence) -> Result<(), BitSeqError> {
    fs::write(path, seq.to_bytes())?;
    fs::write(sidecar_path(path), format!("{}\n", seq.len()))?;
    Ok(())
}

pub fn write_ascii(path: &Path, seq: &BitSequence) -> Result<(), BitSeqError> {
    let mut text = seq.to_ascii01();
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> BitSequence {
        BitSequence::from_ascii01(s).unwrap()
    }

    #[test]
    fn ascii_construction() {
        let s = seq("0110");
        assert_eq!((s.len(), s.ones()), (4, 2));
        let s = seq("1");
        assert_eq!((s.len(), s.ones()), (1, 1));
        let s = seq("01\n1 0\t1");
        assert_eq!(s.to_ascii01(), "01101");
    }

    #[test]
    fn ascii_errors() {
        assert!(matches!(BitSequence::from_ascii01(""), Err(BitSeqError::EmptyInput)));
        assert!(matches!(BitSequence::from_ascii01(" \n"), Err(BitSeqError::EmptyInput)));
        assert!(matches!(
            BitSequence::from_ascii01("0120"),
            Err(BitSeqError::InvalidCharacter { position: 2, found: '2' })
        ));
    }

    #[test]
    fn pi_prefix_ones() {
        let text = include_str!("../tests/data/pi_head.txt");
        let digits: String = text.chars().filter(|c| !c.is_whitespace()).take(100).collect();
        let s = BitSequence::from_ascii01(&digits).unwrap();
        assert_eq!(s.len(), 100);
        // 42 ones: S_100 = -16 in the frequency worked example
        assert_eq!(s.ones(), 42);
    }

    #[test]
    fn bytes_msb_first() {
        assert_eq!(BitSequence::from_bytes(&[0x80], 1).unwrap().to_ascii01(), "1");
        assert_eq!(BitSequence::from_bytes(&[0xA5], 8).unwrap().to_ascii01(), "10100101");
        assert_eq!(
            BitSequence::from_bytes(&[0xFF, 0x00], 12).unwrap().to_ascii01(),
            "111111110000"
        );
        assert!(matches!(
            BitSequence::from_bytes(&[0xFF], 9),
            Err(BitSeqError::LengthMismatch { requested: 9, available: 8 })
        ));
    }

    #[test]
    fn padding_is_invisible() {
        let a = BitSequence::from_bytes(&[0xFF], 3).unwrap();
        let b = seq("111");
        assert_eq!(a, b);
        assert_eq!(a.ones(), 3);
        assert_eq!(a.to_bytes(), vec![0xE0]);
    }

    #[test]
    fn windows() {
        let s = seq("10100101");
        assert_eq!(s.slice_window(0, 3).unwrap(), 5);
        assert_eq!(s.slice_window(5, 3).unwrap(), 5);
        assert_eq!(s.slice_window(4, 4).unwrap(), 5);
        assert!(matches!(s.slice_window(6, 3), Err(BitSeqError::OutOfRange { .. })));
        let long = BitSequence::from_bits((0..100).map(|i| i % 3 == 0)).unwrap();
        assert!(long.slice_window(0, 33).is_err());
        assert!(long.slice_window(60, 32).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = BitSequence::from_bits((0..77).map(|i| i % 5 < 2)).unwrap();
        let bin = dir.path().join("x.bin");
        write_bin(&bin, &s).unwrap();
        assert_eq!(read_sequence(&bin).unwrap(), s);
        let txt = dir.path().join("x.txt");
        write_ascii(&txt, &s).unwrap();
        assert_eq!(read_sequence(&txt).unwrap(), s);
    }

    fn arb_seq() -> impl Strategy<Value = BitSequence> {
        prop::collection::vec(any::<bool>(), 1..300)
            .prop_map(|bits| BitSequence::from_bits(bits).unwrap())
    }

    proptest! {
        #[test]
        fn round_trips(s in arb_seq()) {
            prop_assert_eq!(BitSequence::from_bytes(&s.to_bytes(), s.len()).unwrap(), s.clone());
            prop_assert_eq!(BitSequence::from_ascii01(&s.to_ascii01()).unwrap(), s.clone());
            prop_assert_eq!(s.ones() + s.zeros(), s.len());
            prop_assert_eq!(s.unpacked().len(), s.len());
        }

        #[test]
        fn window_matches_per_bit(s in arb_seq(), start in 0usize..300, width in 0usize..=32) {
            let got = s.slice_window(start, width);
            if start + width <= s.len() {
                let expect = (start..start + width).fold(0u32, |acc, i| (acc << 1) | u32::from(s.bit(i)));
                prop_assert_eq!(got.unwrap(), expect);
            } else {
                prop_assert!(got.is_err());
            }
        }
    }
}
