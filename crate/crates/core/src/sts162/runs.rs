//! Runs and longest-run-of-ones.

use super::{checked_p, BatteryError};
use crate::special::{erfc, igamc};

pub(crate) fn runs(bits: &[u8]) -> Result<f64, BatteryError> {
    let n = bits.len() as f64;
    let ones = bits.iter().map(|&b| u64::from(b)).sum::<u64>();
    let pi = ones as f64 / n;
    // frequency prerequisite: the reference reports 0 when it fails
    if (pi - 0.5).abs() > 2.0 / n.sqrt() {
        return Ok(0.0);
    }
    let v_obs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let arg = (v_obs as f64 - 2.0 * n * pi * (1.0 - pi)).abs()
        / (2.0 * pi * (1.0 - pi) * (2.0 * n).sqrt());
    checked_p("runs", erfc(arg))
}

/// Block size the reference picks for the longest-run test.
pub(crate) fn select_longest_run_block(n: usize) -> usize {
    if n < 6272 {
        8
    } else if n < 750_000 {
        128
    } else {
        10_000
    }
}

struct LongestRunTable {
    /// Run lengths of the inner categories; shorter runs fold into the first,
    /// longer ones into the last.
    v: &'static [usize],
    pi: &'static [f64],
}

fn table(block_len: usize) -> LongestRunTable {
    match block_len {
        8 => LongestRunTable {
            v: &[1, 2, 3, 4],
            pi: &[0.21484375, 0.3671875, 0.23046875, 0.1875],
        },
        128 => LongestRunTable {
            v: &[4, 5, 6, 7, 8, 9],
            pi: &[0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847],
        },
        _ => LongestRunTable {
            v: &[10, 11, 12, 13, 14, 15, 16],
            pi: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
        },
    }
}

pub(crate) fn longest_run(bits: &[u8], block_len: usize) -> Result<f64, BatteryError> {
    let t = table(block_len);
    let k = t.v.len() - 1;
    let blocks = bits.len() / block_len;
    let mut nu = vec![0u64; k + 1];
    for block in bits.chunks_exact(block_len).take(blocks) {
        let (mut run, mut longest) = (0usize, 0usize);
        for &b in block {
            if b == 1 {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        let idx = t.v.iter().position(|&v| v == longest).unwrap_or(if longest < t.v[0] { 0 } else { k });
        nu[idx] += 1;
    }
    let nf = blocks as f64;
    let chi2: f64 = nu
        .iter()
        .zip(t.pi)
        .map(|(&o, &p)| {
            let e = nf * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let p = igamc(k as f64 / 2.0, chi2 / 2.0).map_err(|e| BatteryError::numerical("longest-run", e))?;
    checked_p("longest-run", p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|c| c - b'0').collect()
    }

    #[test]
    fn runs_examples() {
        assert!((runs(&bits("1001101011")).unwrap() - 0.147232).abs() < 1e-6);
        let pi100 = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";
        assert!((runs(&bits(pi100)).unwrap() - 0.500798).abs() < 1e-6);
        assert_eq!(runs(&[1u8; 100]).unwrap(), 0.0);
    }

    #[test]
    fn longest_run_example() {
        let s = "11001100000101010110110001001100111000000000001001001101010100010001001111010110100000001101011111001100111001101101100010110010";
        let p = longest_run(&bits(s), select_longest_run_block(128)).unwrap();
        assert!((p - 0.180609).abs() < 1e-6, "{p}");
    }

    #[test]
    fn category_tables_sum_to_one() {
        for m in [8, 128, 10_000] {
            let s: f64 = table(m).pi.iter().sum();
            assert!((s - 1.0).abs() < 1e-3, "{m}: {s}");
        }
    }
}
