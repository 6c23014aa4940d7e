//! Maurer's universal statistical test.

use super::{checked_p, BatteryError};
use crate::special::erfc;

/// Expected value and variance of the statistic for L = 1..=16. Entries 6..=16
/// are the reference table; 1..=5 come from Maurer's original table.
const EXPECTED: [(f64, f64); 17] = [
    (0.0, 0.0),
    (0.7326495, 0.690),
    (1.5374383, 1.338),
    (2.4016068, 1.901),
    (3.3112247, 2.358),
    (4.2534266, 2.705),
    (5.2177052, 2.954),
    (6.1962507, 3.125),
    (7.1836656, 3.238),
    (8.1764248, 3.311),
    (9.1723243, 3.356),
    (10.170032, 3.384),
    (11.168765, 3.401),
    (12.168070, 3.410),
    (13.167693, 3.416),
    (14.167488, 3.419),
    (15.167379, 3.421),
];

/// Largest L in 1..=16 with `n >= 1010 * L * 2^L`; 1 if none qualifies.
///
/// For L >= 6 this reproduces the reference length thresholds
/// (387840, 904960, ...).
pub fn select_block_len(n: usize) -> usize {
    (1..=16usize)
        .rev()
        .find(|&l| n as u128 >= 1010 * l as u128 * (1u128 << l))
        .unwrap_or(1)
}

/// Shortest sequence that leaves at least one test block after `q` init blocks.
pub fn minimum_length(l: usize, q: usize) -> usize {
    (q + 1) * l
}

/// Mean log2 distance between repeated blocks, and the number of test blocks.
fn statistic(bits: &[u8], l: usize, q: usize) -> Result<(f64, usize), BatteryError> {
    assert!((1..=16).contains(&l));
    let blocks = bits.len() / l;
    if blocks <= q {
        return Err(BatteryError::SequenceTooShort {
            kind: "universal",
            minimum: minimum_length(l, q),
            actual: bits.len(),
        });
    }
    let k = blocks - q;
    let mut last = vec![0usize; 1 << l];
    let block_value = |i: usize| {
        bits[i * l..(i + 1) * l].iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    };
    for i in 1..=q {
        last[block_value(i - 1)] = i;
    }
    let mut sum = 0.0;
    for i in q + 1..=q + k {
        let v = block_value(i - 1);
        sum += ((i - last[v]) as f64).log2();
        last[v] = i;
    }
    Ok((sum / k as f64, k))
}

pub(crate) fn universal(bits: &[u8], l: usize, q: usize) -> Result<f64, BatteryError> {
    let (phi, k) = statistic(bits, l, q)?;
    let lf = l as f64;
    let (expected, variance) = EXPECTED[l];
    let c = 0.7 - 0.8 / lf + (4.0 + 32.0 / lf) * (k as f64).powf(-3.0 / lf) / 15.0;
    let sigma = c * (variance / k as f64).sqrt();
    let p = erfc((phi - expected).abs() / (std::f64::consts::SQRT_2 * sigma));
    checked_p("universal", p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_len_thresholds() {
        let table = [
            (387_840, 6),
            (904_960, 7),
            (2_068_480, 8),
            (4_654_080, 9),
            (10_342_400, 10),
            (22_753_280, 11),
            (49_643_520, 12),
            (107_560_960, 13),
            (231_669_760, 14),
            (496_435_200, 15),
            (1_059_061_760, 16),
        ];
        for (n, l) in table {
            assert_eq!(select_block_len(n), l, "n={n}");
            assert_eq!(select_block_len(n - 1), l - 1, "n={}", n - 1);
        }
        assert_eq!(select_block_len(1_000_000), 7);
        assert_eq!(select_block_len(100_000), 4);
        assert_eq!(select_block_len(10_000), 2);
        assert_eq!(select_block_len(10), 1);
    }

    #[test]
    fn worked_example() {
        // L=2, Q=4 over "01011010011101010111"
        let b: Vec<u8> = "01011010011101010111".bytes().map(|c| c - b'0').collect();
        let (phi, k) = statistic(&b, 2, 4).unwrap();
        assert_eq!(k, 6);
        assert!((phi - 1.1949875).abs() < 1e-6, "{phi}");
        let p = universal(&b, 2, 4).unwrap();
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        assert!(universal(&b, 2, 10).is_err());
    }
}
