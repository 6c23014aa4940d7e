//! Deterministic bit generators: MT19937 and AES-128-CTR.
//!
//! A set of `m` sequences of `n` bits is cut from one generator stream as
//! consecutive disjoint blocks: sequence `j` (0-based) is stream bits
//! `[j*n, (j+1)*n)`.

mod aes_ctr;
mod mt19937;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bitseq::BitSequence;

pub use aes_ctr::Aes128Ctr;
pub use mt19937::{Mt19937, DEFAULT_SEED};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid 128-bit hex value {0:?} (expected 32 hex digits)")]
    BadHex(String),
    #[error("unknown generator kind {0:?} (expected mt19937 or aes128-ctr)")]
    UnknownKind(String),
    #[error("sequence length and count must be at least 1")]
    EmptyRequest,
}

/// 128 bits shown and parsed as 32 hex digits.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct Block128(pub [u8; 16]);

impl fmt::Display for Block128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Block128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block128({self})")
    }
}

impl FromStr for Block128 {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches("0x");
        if t.len() != 32 || !t.is_ascii() {
            return Err(GenError::BadHex(s.to_string()));
        }
        let mut out = [0u8; 16];
        for (i, b) in out.iter_mut().enumerate() {
            *b = u8::from_str_radix(&t[2 * i..2 * i + 2], 16)
                .map_err(|_| GenError::BadHex(s.to_string()))?;
        }
        Ok(Self(out))
    }
}

impl Serialize for Block128 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Block128 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Mt19937 { seed: u32 },
    #[serde(rename = "aes128-ctr")]
    Aes128Ctr { key: Block128, counter0: Block128 },
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::Mt19937 { seed: DEFAULT_SEED }
    }
}

impl GeneratorSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GeneratorSpec::Mt19937 { .. } => "mt19937",
            GeneratorSpec::Aes128Ctr { .. } => "aes128-ctr",
        }
    }

    /// The raw generator stream from its first output.
    pub fn stream(&self) -> BitStream {
        let source = match *self {
            GeneratorSpec::Mt19937 { seed } => Source::Mt(Box::new(Mt19937::new(seed))),
            GeneratorSpec::Aes128Ctr { key, counter0 } => Source::Aes {
                ctr: Aes128Ctr::new(key.0, counter0.0),
                pending: None,
            },
        };
        BitStream { source, buf: 0, avail: 0 }
    }

    /// The stream positioned at bit `offset`, jumping counters (CTR) or
    /// discarding whole outputs (MT) before discarding the remaining bits.
    pub fn stream_at(&self, offset: u64) -> BitStream {
        let mut stream = self.stream();
        let rem = match &mut stream.source {
            Source::Mt(mt) => {
                mt.discard(offset / 32);
                offset % 32
            }
            Source::Aes { ctr, .. } => {
                ctr.skip_blocks(u128::from(offset / 128));
                offset % 128
            }
        };
        stream.skip_bits(rem);
        stream
    }

    /// Sequence `index` (0-based) of length `n`: stream bits `[index*n, (index+1)*n)`.
    pub fn sequence(&self, index: u64, n: usize) -> BitSequence {
        self.stream_at(index * n as u64).take(n)
    }
}

enum Source {
    Mt(Box<Mt19937>),
    Aes { ctr: Aes128Ctr, pending: Option<u64> },
}

impl Source {
    fn next_u64(&mut self) -> u64 {
        match self {
            Source::Mt(mt) => {
                let hi = u64::from(mt.next_u32());
                let lo = u64::from(mt.next_u32());
                (hi << 32) | lo
            }
            Source::Aes { ctr, pending } => {
                if let Some(lo) = pending.take() {
                    return lo;
                }
                let block = u128::from_be_bytes(ctr.next_block());
                *pending = Some(block as u64);
                (block >> 64) as u64
            }
        }
    }
}

/// MSB-first bit stream over a generator.
pub struct BitStream {
    source: Source,
    buf: u64,
    avail: u32,
}

impl BitStream {
    /// Next `k` bits (1..=64), left-aligned in the returned word.
    fn next_bits(&mut self, k: u32) -> u64 {
        debug_assert!((1..=64).contains(&k));
        let mask = !0u64 << (64 - k);
        if self.avail >= k {
            let out = self.buf & mask;
            self.buf = self.buf.checked_shl(k).unwrap_or(0);
            self.avail -= k;
            return out;
        }
        let have = self.avail;
        let next = self.source.next_u64();
        let need = k - have;
        let out = (self.buf | (next >> have)) & mask;
        self.buf = next.checked_shl(need).unwrap_or(0);
        self.avail = 64 - need;
        out
    }

    fn skip_bits(&mut self, mut count: u64) {
        while count > 0 {
            let k = count.min(64) as u32;
            self.next_bits(k);
            count -= u64::from(k);
        }
    }

    /// The next `n >= 1` bits as a sequence.
    pub fn take(&mut self, n: usize) -> BitSequence {
        assert!(n >= 1, "sequence length must be positive");
        let mut words = Vec::with_capacity(n.div_ceil(64));
        for _ in 0..n / 64 {
            words.push(self.next_bits(64));
        }
        let tail = (n % 64) as u32;
        if tail > 0 {
            words.push(self.next_bits(tail));
        }
        BitSequence::from_words(words, n)
    }

    /// Consecutive `n`-bit sequences, lazily.
    pub fn sequences(self, n: usize) -> impl Iterator<Item = BitSequence> {
        let mut stream = self;
        std::iter::repeat_with(move || stream.take(n))
    }
}

/// Runs MT19937 from `seed`, discards `skip` outputs, then emits `nbits` bits.
pub fn mt19937_bits(seed: u32, skip: u64, nbits: usize) -> BitSequence {
    let spec = GeneratorSpec::Mt19937 { seed };
    spec.stream_at(skip * 32).take(nbits)
}

pub fn aes128_ctr_bits(key: [u8; 16], counter0: [u8; 16], nbits: usize) -> BitSequence {
    let spec = GeneratorSpec::Aes128Ctr { key: Block128(key), counter0: Block128(counter0) };
    spec.stream().take(nbits)
}

/// The first `m` consecutive `n`-bit blocks of the generator stream.
pub fn make_sequence_set(
    spec: &GeneratorSpec,
    m: usize,
    n: usize,
) -> Result<Vec<BitSequence>, GenError> {
    if m == 0 || n == 0 {
        return Err(GenError::EmptyRequest);
    }
    Ok(spec.stream().sequences(n).take(m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fips_spec() -> GeneratorSpec {
        GeneratorSpec::Aes128Ctr {
            key: "000102030405060708090a0b0c0d0e0f".parse().unwrap(),
            counter0: "00112233445566778899aabbccddeeff".parse().unwrap(),
        }
    }

    #[test]
    fn mt_words_msb_first() {
        let s = mt19937_bits(DEFAULT_SEED, 0, 32);
        assert_eq!(s.slice_window(0, 32).unwrap(), 3_499_211_612);
        let s = mt19937_bits(DEFAULT_SEED, 9999, 40);
        assert_eq!(s.slice_window(0, 32).unwrap(), 4_123_659_995);
        assert_ne!(mt19937_bits(0, 0, 128), mt19937_bits(1, 0, 128));
    }

    #[test]
    fn aes_known_block_and_truncation() {
        let key: Block128 = "000102030405060708090a0b0c0d0e0f".parse().unwrap();
        let c0: Block128 = "00112233445566778899aabbccddeeff".parse().unwrap();
        let s = aes128_ctr_bits(key.0, c0.0, 128);
        assert_eq!(s.to_bytes(), "69c4e0d86a7b0430d8cdb78070b4c55a".parse::<Block128>().unwrap().0);
        let one = aes128_ctr_bits(key.0, c0.0, 1);
        assert_eq!(one.bit(0), s.bit(0));
    }

    #[test]
    fn aes_consecutive_blocks() {
        let key = [3u8; 16];
        let c0 = [0u8, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 0xff];
        let mut c1 = c0;
        c1[15] = 0;
        c1[14] += 1;
        let both = aes128_ctr_bits(key, c0, 256);
        let mut joined = aes128_ctr_bits(key, c0, 128).to_bytes();
        joined.extend(aes128_ctr_bits(key, c1, 128).to_bytes());
        assert_eq!(both.to_bytes(), joined);
    }

    #[test]
    fn sequence_set_is_blocked_stream() {
        for spec in [GeneratorSpec::default(), fips_spec()] {
            let set = make_sequence_set(&spec, 2, 64).unwrap();
            let raw = spec.stream().take(128);
            assert_eq!(set[1].to_ascii01(), raw.to_ascii01()[64..]);

            let n = 1000;
            let set = make_sequence_set(&spec, 5, n).unwrap();
            let raw = spec.stream().take(5 * n).to_ascii01();
            let cat: String = set.iter().map(BitSequence::to_ascii01).collect();
            assert_eq!(cat, raw);
            for (j, s) in set.iter().enumerate() {
                assert_eq!(&spec.sequence(j as u64, n), s);
            }
            assert_eq!(set, make_sequence_set(&spec, 5, n).unwrap());
        }
        let single = make_sequence_set(&fips_spec(), 1, 128).unwrap();
        let key: Block128 = "000102030405060708090a0b0c0d0e0f".parse().unwrap();
        let c0: Block128 = "00112233445566778899aabbccddeeff".parse().unwrap();
        assert_eq!(single[0], aes128_ctr_bits(key.0, c0.0, 128));
        assert!(make_sequence_set(&fips_spec(), 0, 8).is_err());
    }

    #[test]
    fn spec_serde() {
        let json = serde_json::to_string(&fips_spec()).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"aes128-ctr","key":"000102030405060708090a0b0c0d0e0f","counter0":"00112233445566778899aabbccddeeff"}"#
        );
        let back: GeneratorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fips_spec());
        let mt: GeneratorSpec = serde_json::from_str(r#"{"kind":"mt19937","seed":5489}"#).unwrap();
        assert_eq!(mt, GeneratorSpec::default());
    }
}
