//! Template matching: non-overlapping (aperiodic templates) and overlapping (all ones).

use super::{checked_p, BatteryError};
use crate::special::{igamc, ln_gamma};

/// True when no proper prefix of the `len`-bit template equals the suffix of
/// the same length, i.e. the pattern cannot overlap a shifted copy of itself.
pub(crate) fn is_aperiodic(template: u32, len: usize) -> bool {
    (1..len).all(|shift| {
        let keep = len - shift;
        let prefix = template >> shift;
        let suffix = template & ((1u32 << keep) - 1);
        prefix != suffix
    })
}

/// All aperiodic templates of `len` bits, ascending as integers.
pub fn aperiodic_templates(len: usize) -> Vec<u16> {
    assert!((1..=16).contains(&len));
    (0..1u32 << len)
        .filter(|&t| is_aperiodic(t, len))
        .map(|t| t as u16)
        .collect()
}

/// Histogram of `len`-bit windows starting at positions `0..=block.len()-len`.
fn window_counts(block: &[u8], len: usize, counts: &mut [u32]) {
    counts.iter_mut().for_each(|c| *c = 0);
    if block.len() < len {
        return;
    }
    let mask = (1u32 << len) - 1;
    let mut w = block[..len - 1].iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
    for &b in &block[len - 1..] {
        w = ((w << 1) | u32::from(b)) & mask;
        counts[w as usize] += 1;
    }
}

/// p-values for each template, in the order given.
///
/// An aperiodic template never overlaps itself, so the reference's
/// scan-and-skip count equals the plain occurrence count; one window
/// histogram per block serves every template.
pub(crate) fn non_overlapping(
    bits: &[u8],
    templates: &[u16],
    len: usize,
    blocks: usize,
) -> Result<Vec<f64>, BatteryError> {
    let block_len = bits.len() / blocks;
    let m = len as f64;
    let lambda = (block_len as f64 - m + 1.0) / 2f64.powf(m);
    let var = block_len as f64 * (1.0 / 2f64.powf(m) - (2.0 * m - 1.0) / 2f64.powf(2.0 * m));
    let mut counts = vec![vec![0u32; 1 << len]; blocks];
    for (j, c) in counts.iter_mut().enumerate() {
        window_counts(&bits[j * block_len..(j + 1) * block_len], len, c);
    }
    templates
        .iter()
        .map(|&t| {
            debug_assert!(is_aperiodic(u32::from(t), len));
            let chi2: f64 = counts
                .iter()
                .map(|c| (f64::from(c[t as usize]) - lambda).powi(2) / var)
                .sum();
            let p = igamc(blocks as f64 / 2.0, chi2 / 2.0)
                .map_err(|e| BatteryError::numerical("nonoverlap", e))?;
            checked_p("nonoverlap", p)
        })
        .collect()
}

/// Probability of `u` overlapping occurrences of an all-ones template in a
/// block, with `eta` = half the expected count; the reference's closed form.
fn occurrence_probability(u: usize, eta: f64) -> f64 {
    if u == 0 {
        return (-eta).exp();
    }
    let uf = u as f64;
    (1..=u)
        .map(|l| {
            let lf = l as f64;
            (-eta - uf * std::f64::consts::LN_2 + lf * eta.ln() - ln_gamma(lf + 1.0)
                + ln_gamma(uf)
                - ln_gamma(lf)
                - ln_gamma(uf - lf + 1.0))
            .exp()
        })
        .sum()
}

pub(crate) fn overlapping(bits: &[u8], len: usize, block_len: usize) -> Result<f64, BatteryError> {
    const K: usize = 5;
    let blocks = bits.len() / block_len;
    let m = len as f64;
    let lambda = (block_len as f64 - m + 1.0) / 2f64.powf(m);
    let eta = lambda / 2.0;
    let mut pi = [0.0; K + 1];
    for (u, p) in pi.iter_mut().enumerate().take(K) {
        *p = occurrence_probability(u, eta);
    }
    pi[K] = 1.0 - pi[..K].iter().sum::<f64>();

    let ones = (1u32 << len) - 1;
    let mut nu = [0u64; K + 1];
    let mut counts = vec![0u32; 1 << len];
    for j in 0..blocks {
        window_counts(&bits[j * block_len..(j + 1) * block_len], len, &mut counts);
        let hits = counts[ones as usize] as usize;
        nu[hits.min(K)] += 1;
    }
    let n = blocks as f64;
    let chi2: f64 = nu
        .iter()
        .zip(pi)
        .map(|(&o, p)| (o as f64 - n * p).powi(2) / (n * p))
        .sum();
    let p = igamc(K as f64 / 2.0, chi2 / 2.0).map_err(|e| BatteryError::numerical("overlap", e))?;
    checked_p("overlap", p)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Occurrences found by the reference's scan: advance past a match, else by one.
    fn scan_and_skip(block: &[u8], template: &[u8]) -> u32 {
        let m = template.len();
        let mut count = 0;
        let mut j = 0;
        while j + m <= block.len() {
            if &block[j..j + m] == template {
                count += 1;
                j += m;
            } else {
                j += 1;
            }
        }
        count
    }

    fn brute_force_aperiodic(len: usize) -> Vec<u32> {
        (0..1u32 << len)
            .filter(|&t| {
                let s: Vec<u32> = (0..len).rev().map(|i| (t >> i) & 1).collect();
                (1..len).all(|shift| s[shift..] != s[..len - shift])
            })
            .collect()
    }

    #[test]
    fn aperiodic_counts() {
        assert_eq!(aperiodic_templates(9).len(), 148);
        for len in 2..=10 {
            let fast: Vec<u32> = aperiodic_templates(len).into_iter().map(u32::from).collect();
            assert_eq!(fast, brute_force_aperiodic(len), "len {len}");
        }
        let t9 = aperiodic_templates(9);
        assert_eq!(&t9[..4], &[0b000000001, 0b000000011, 0b000000101, 0b000000111]);
        assert_eq!(*t9.last().unwrap(), 0b111111110);
    }

    #[test]
    fn histogram_count_equals_scan_for_aperiodic() {
        let bits: Vec<u8> = (0..5000u32).map(|i| ((i.wrapping_mul(2_654_435_761) >> 13) & 1) as u8).collect();
        let mut counts = vec![0u32; 512];
        window_counts(&bits, 9, &mut counts);
        for t in aperiodic_templates(9) {
            let pat: Vec<u8> = (0..9).rev().map(|i| ((t >> i) & 1) as u8).collect();
            assert_eq!(counts[t as usize], scan_and_skip(&bits, &pat), "template {t:09b}");
        }
    }

    #[test]
    fn nonoverlap_worked_example() {
        // template 001, two blocks of 10 bits
        let bits: Vec<u8> = "10100100101110010110".bytes().map(|c| c - b'0').collect();
        let p = non_overlapping(&bits, &[0b001], 3, 2).unwrap()[0];
        assert!((p - 0.344154).abs() < 1e-6, "{p}");
    }

    #[test]
    fn occurrence_probabilities_form_a_distribution() {
        let eta = (1032.0 - 9.0 + 1.0) / 512.0 / 2.0;
        assert!((occurrence_probability(0, eta) - (-1.0f64).exp()).abs() < 1e-15);
        // Pr(1) = eta e^-eta / 2
        assert!((occurrence_probability(1, eta) - eta * (-eta).exp() / 2.0).abs() < 1e-12);
        let total: f64 = (0..300).map(|u| occurrence_probability(u, eta)).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }
}
