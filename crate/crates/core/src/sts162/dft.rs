//! Discrete Fourier transform (spectral) test.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{checked_p, BatteryError};
use crate::special::erfc;

/// FFT plan for one sequence length.
pub(crate) struct DftPlan {
    fft: Arc<dyn Fft<f64>>,
    n: usize,
    corrected_variance: bool,
}

impl fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DftPlan(n={})", self.n)
    }
}

impl DftPlan {
    pub(crate) fn new(n: usize, corrected_variance: bool) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n.max(1));
        Self { fft, n, corrected_variance }
    }

    pub(crate) fn p_value(&self, bits: &[u8]) -> Result<f64, BatteryError> {
        debug_assert_eq!(bits.len(), self.n);
        let n = self.n as f64;
        let mut buf: Vec<Complex<f64>> = bits
            .iter()
            .map(|&b| Complex::new(if b == 1 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        self.fft.process(&mut buf);
        // 95% peak-height threshold sqrt(ln(1/0.05) n), constant as in the reference code
        let threshold = (2.995732274 * n).sqrt();
        let below = buf[..self.n / 2].iter().filter(|c| (c.re * c.re + c.im * c.im).sqrt() < threshold).count();
        let expected = 0.95 * n / 2.0;
        let divisor = if self.corrected_variance { 3.8 } else { 4.0 };
        let d = (below as f64 - expected) / (n * 0.95 * 0.05 / divisor).sqrt();
        checked_p("dft", erfc(d.abs() / SQRT_2))
    }
}
