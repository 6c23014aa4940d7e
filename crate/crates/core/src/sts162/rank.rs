//! Binary matrix rank over disjoint 32x32 matrices.

use super::{checked_p, BatteryError};

const DIM: usize = 32;

/// Rank over GF(2) of a matrix given as row bitmasks.
pub(crate) fn gf2_rank(rows: &mut [u32]) -> usize {
    let mut rank = 0;
    for col in (0..DIM).rev() {
        let bit = 1u32 << col;
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row & bit != 0 {
                *row ^= p;
            }
        }
        rank += 1;
    }
    rank
}

/// Probability that a random 32x32 binary matrix has rank `r`.
fn rank_probability(r: i32) -> f64 {
    let m = DIM as i32;
    let mut product = 1.0;
    for i in 0..r {
        let a = 1.0 - 2f64.powi(i - m);
        product *= a * a / (1.0 - 2f64.powi(i - r));
    }
    2f64.powi(r * (2 * m - r) - m * m) * product
}

pub(crate) fn rank(bits: &[u8]) -> Result<f64, BatteryError> {
    let matrices = bits.len() / (DIM * DIM);
    let p32 = rank_probability(32);
    let p31 = rank_probability(31);
    let p30 = 1.0 - (p32 + p31);
    let (mut f32_, mut f31) = (0u64, 0u64);
    let mut rows = [0u32; DIM];
    for k in 0..matrices {
        let base = k * DIM * DIM;
        for (i, row) in rows.iter_mut().enumerate() {
            let start = base + i * DIM;
            *row = bits[start..start + DIM].iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
        }
        match gf2_rank(&mut rows) {
            32 => f32_ += 1,
            31 => f31 += 1,
            _ => {}
        }
    }
    let n = matrices as f64;
    let f30 = n - (f32_ + f31) as f64;
    let chi2 = (f32_ as f64 - n * p32).powi(2) / (n * p32)
        + (f31 as f64 - n * p31).powi(2) / (n * p31)
        + (f30 - n * p30).powi(2) / (n * p30);
    checked_p("rank", (-chi2 / 2.0).exp())
}
