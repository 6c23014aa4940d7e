//! Frequency (monobit) and frequency-within-a-block.

use std::f64::consts::SQRT_2;

use super::{checked_p, BatteryError};
use crate::special::{erfc, igamc};

pub(crate) fn frequency(bits: &[u8]) -> Result<f64, BatteryError> {
    let n = bits.len() as f64;
    let ones = bits.iter().map(|&b| i64::from(b)).sum::<i64>();
    let sum = 2 * ones - bits.len() as i64;
    let s_obs = (sum as f64).abs() / n.sqrt();
    checked_p("frequency", erfc(s_obs / SQRT_2))
}

pub(crate) fn block_frequency(bits: &[u8], block_len: usize) -> Result<f64, BatteryError> {
    let blocks = bits.len() / block_len;
    let mut sum = 0.0;
    for block in bits.chunks_exact(block_len).take(blocks) {
        let ones = block.iter().map(|&b| u32::from(b)).sum::<u32>();
        let pi = f64::from(ones) / block_len as f64 - 0.5;
        sum += pi * pi;
    }
    let chi2 = 4.0 * block_len as f64 * sum;
    let p = igamc(blocks as f64 / 2.0, chi2 / 2.0)
        .map_err(|e| BatteryError::numerical("block-frequency", e))?;
    checked_p("block-frequency", p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|c| c - b'0').collect()
    }

    const PI100: &str = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";

    #[test]
    fn monobit_examples() {
        assert!((frequency(&bits("1011010101")).unwrap() - 0.527089).abs() < 1e-6);
        assert!((frequency(&bits(PI100)).unwrap() - 0.109599).abs() < 1e-6);
        let zeros = vec![0u8; 100];
        let p = frequency(&zeros).unwrap();
        assert!((p - erfc(10.0 / SQRT_2)).abs() < 1e-30 && p < 1e-20);
        let alt: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        assert_eq!(frequency(&alt).unwrap(), 1.0);
    }

    #[test]
    fn block_examples() {
        assert!((block_frequency(&bits("0110011010"), 3).unwrap() - 0.801252).abs() < 1e-6);
        assert!((block_frequency(&bits(PI100), 10).unwrap() - 0.706438).abs() < 1e-6);
    }
}
