//! Approximate entropy and serial tests over cyclic pattern counts.

use super::{checked_p, BatteryError};
use crate::special::igamc;

/// Counts of every `w`-bit pattern over the `n` cyclic windows of a sequence,
/// for each width `w` from 0 up to the width it was built at.
#[derive(Clone, Debug)]
pub struct CyclicCounts {
    n: usize,
    /// `levels[w]` has `2^w` entries.
    levels: Vec<Vec<u32>>,
}

impl CyclicCounts {
    /// Counts at `width`, then each narrower width by summing over the last bit.
    pub fn new(bits: &[u8], width: usize) -> Self {
        assert!(width <= 24, "pattern width {width} too large");
        let n = bits.len();
        let mut top = vec![0u32; 1 << width];
        if n > 0 && width > 0 {
            let mask = (1u32 << width) - 1;
            let mut w = 0u32;
            for k in 0..width - 1 {
                w = (w << 1) | u32::from(bits[k % n]);
            }
            for i in 0..n {
                w = ((w << 1) | u32::from(bits[(i + width - 1) % n])) & mask;
                top[w as usize] += 1;
            }
        } else {
            top[0] = n as u32;
        }
        let mut levels = vec![top];
        for _ in 0..width {
            let wider = levels.last().unwrap();
            let narrower = wider.chunks_exact(2).map(|pair| pair[0] + pair[1]).collect();
            levels.push(narrower);
        }
        levels.reverse();
        Self { n, levels }
    }

    pub fn max_width(&self) -> usize {
        self.levels.len() - 1
    }

    #[cfg(test)]
    fn counts(&self, width: usize) -> &[u32] {
        &self.levels[width]
    }

    /// `(2^w / n) * sum(count^2) - n`, zero for width 0.
    pub fn psi_squared(&self, width: usize) -> f64 {
        if width == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        let sum: f64 = self.levels[width].iter().map(|&c| f64::from(c).powi(2)).sum();
        sum * (1u64 << width) as f64 / n - n
    }

    /// `sum(c/n * ln(c/n))` over observed patterns, zero for width 0.
    pub fn phi(&self, width: usize) -> f64 {
        if width == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        self.levels[width]
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let f = f64::from(c) / n;
                f * f.ln()
            })
            .sum()
    }
}

pub(crate) fn approximate_entropy(counts: &CyclicCounts, m: usize) -> Result<f64, BatteryError> {
    assert!(counts.max_width() > m);
    let n = counts.n as f64;
    let apen = counts.phi(m) - counts.phi(m + 1);
    let chi2 = 2.0 * n * (std::f64::consts::LN_2 - apen);
    let dof = 2f64.powi(m as i32 - 1);
    let p = igamc(dof, chi2 / 2.0).map_err(|e| BatteryError::numerical("approx-entropy", e))?;
    checked_p("approx-entropy", p)
}

/// The two serial p-values, from the first and second differences of psi^2.
pub(crate) fn serial(counts: &CyclicCounts, m: usize) -> Result<(f64, f64), BatteryError> {
    assert!(m >= 2 && counts.max_width() >= m);
    let psi = [counts.psi_squared(m), counts.psi_squared(m - 1), counts.psi_squared(m - 2)];
    let del1 = psi[0] - psi[1];
    let del2 = psi[0] - 2.0 * psi[1] + psi[2];
    let err = |e| BatteryError::numerical("serial", e);
    let p1 = igamc(2f64.powi(m as i32 - 2), del1 / 2.0).map_err(err)?;
    let p2 = igamc(2f64.powi(m as i32 - 3), del2 / 2.0).map_err(err)?;
    Ok((checked_p("serial", p1)?, checked_p("serial", p2)?))
}
