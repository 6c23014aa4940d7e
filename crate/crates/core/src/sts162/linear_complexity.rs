//! Linear complexity test, with a word-packed Berlekamp-Massey.

use super::{checked_p, BatteryError};
use crate::special::igamc;

const PI: [f64; 7] = [0.01047, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833];

/// Bits LSB-first in u64 words.
struct Packed {
    words: Vec<u64>,
}

impl Packed {
    fn zeros(nbits: usize) -> Self {
        Self { words: vec![0; nbits / 64 + 2] }
    }

    /// 64 bits starting at `off`, zero past the end.
    #[inline]
    fn window(&self, off: usize) -> u64 {
        let (w, b) = (off / 64, off % 64);
        let lo = self.words.get(w).copied().unwrap_or(0) >> b;
        if b == 0 {
            lo
        } else {
            lo | self.words.get(w + 1).copied().unwrap_or(0) << (64 - b)
        }
    }

    /// `self ^= other << shift` for the first `words` words of `other`,
    /// dropping bits past the end.
    fn xor_shifted(&mut self, other: &Packed, shift: usize, words: usize) {
        let (ws, bs) = (shift / 64, shift % 64);
        let len = self.words.len();
        for (i, &v) in other.words.iter().take(words).enumerate() {
            if v == 0 || i + ws >= len {
                continue;
            }
            self.words[i + ws] ^= v << bs;
            if bs > 0 && i + ws + 1 < len {
                self.words[i + ws + 1] ^= v >> (64 - bs);
            }
        }
    }
}

/// Length of the shortest LFSR generating `bits` (each 0 or 1).
pub fn berlekamp_massey(bits: &[u8]) -> usize {
    let n = bits.len();
    // reversed[k] = bits[n - 1 - k], so the taps for step t line up with
    // the window starting at n - 1 - t
    let mut reversed = Packed::zeros(n);
    for (k, &b) in bits.iter().rev().enumerate() {
        if b != 0 {
            reversed.words[k / 64] |= 1 << (k % 64);
        }
    }
    let mut c = Packed::zeros(n);
    let mut b = Packed::zeros(n);
    let mut prev = Packed::zeros(n);
    c.words[0] = 1;
    b.words[0] = 1;
    let mut l = 0usize;
    let mut last_change: isize = -1;
    for t in 0..n {
        let base = n - 1 - t;
        let mut acc = 0u64;
        for w in 0..=l / 64 {
            let mut cw = c.words[w];
            if w == l / 64 {
                let keep = l % 64 + 1;
                if keep < 64 {
                    cw &= (1u64 << keep) - 1;
                }
            }
            acc ^= cw & reversed.window(base + 64 * w);
        }
        if acc.count_ones() & 1 == 1 {
            let shift = (t as isize - last_change) as usize;
            // deg b <= l, so only its low words carry taps
            let active = l / 64 + 1;
            if 2 * l <= t {
                prev.words.copy_from_slice(&c.words);
                c.xor_shifted(&b, shift, active);
                l = t + 1 - l;
                last_change = t as isize;
                std::mem::swap(&mut b, &mut prev);
            } else {
                c.xor_shifted(&b, shift, active);
            }
        }
    }
    l
}

pub(crate) fn linear_complexity(bits: &[u8], m: usize) -> Result<f64, BatteryError> {
    let blocks = bits.len() / m;
    let mf = m as f64;
    let alt = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let mean = mf / 2.0 + (9.0 + alt) / 36.0 - (mf / 3.0 + 2.0 / 9.0) / 2f64.powf(mf);
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mut nu = [0u64; 7];
    for block in bits.chunks_exact(m).take(blocks) {
        let l = berlekamp_massey(block) as f64;
        let t = sign * (l - mean) + 2.0 / 9.0;
        let bin = match t {
            t if t <= -2.5 => 0,
            t if t <= -1.5 => 1,
            t if t <= -0.5 => 2,
            t if t <= 0.5 => 3,
            t if t <= 1.5 => 4,
            t if t <= 2.5 => 5,
            _ => 6,
        };
        nu[bin] += 1;
    }
    let nb = blocks as f64;
    let chi2: f64 = nu
        .iter()
        .zip(PI)
        .map(|(&o, p)| (o as f64 - nb * p).powi(2) / (nb * p))
        .sum();
    let p = igamc(3.0, chi2 / 2.0).map_err(|e| BatteryError::numerical("linear-complexity", e))?;
    checked_p("linear-complexity", p)
}
