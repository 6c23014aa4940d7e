//! Cumulative sums, forward and reverse, from one pass over the walk.

use super::{checked_p, BatteryError};
use crate::special::normal_cdf;

/// (forward, reverse) p-values.
pub(crate) fn cumulative_sums(bits: &[u8]) -> Result<(f64, f64), BatteryError> {
    let n = bits.len() as i64;
    let (mut s, mut sup, mut inf) = (0i64, 0i64, 0i64);
    for &b in bits {
        s += if b == 1 { 1 } else { -1 };
        sup = sup.max(s);
        inf = inf.min(s);
    }
    let z_fwd = sup.max(-inf);
    let z_rev = (sup - s).max(s - inf);
    Ok((
        checked_p("cusum", excursion_p(n, z_fwd))?,
        checked_p("cusum", excursion_p(n, z_rev))?,
    ))
}

/// P-value of a maximal partial-sum excursion `z` over a walk of `n` steps.
/// Loop bounds use truncating integer division, as the reference does.
fn excursion_p(n: i64, z: i64) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    let mut sum1 = 0.0;
    let mut k = (-n / z + 1) / 4;
    while k <= (n / z - 1) / 4 {
        sum1 += normal_cdf((4 * k + 1) as f64 * zf / sqrt_n);
        sum1 -= normal_cdf((4 * k - 1) as f64 * zf / sqrt_n);
        k += 1;
    }
    let mut sum2 = 0.0;
    let mut k = (-n / z - 3) / 4;
    while k <= (n / z - 1) / 4 {
        sum2 += normal_cdf((4 * k + 3) as f64 * zf / sqrt_n);
        sum2 -= normal_cdf((4 * k + 1) as f64 * zf / sqrt_n);
        k += 1;
    }
    1.0 - sum1 + sum2
}
