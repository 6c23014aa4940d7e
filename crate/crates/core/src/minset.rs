//! Greedy removal of items to bring the indicator I down toward 1, and the
//! hypergeometric baseline for comparing two selected sets.
//!
//! With C the sample covariance of the p-value columns, the variance of q
//! over an active set A is `sum_{a,b in A} C_ab / k^2`, so
//! `I(A) = sqrt(12 k S) / k` with `S = sum_{a,b in A} C_ab`. Removing item x
//! turns S into `S - 2 r_x + C_xx`, where `r_x` is x's row sum over A.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::depscope::{ActiveSet, DepError};
use crate::pmatrix::PValueMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum MinsetError {
    #[error("need at least 2 rows for a covariance, got {0}")]
    DegenerateSample(usize),
    #[error("active set has {0} items; a greedy step needs at least 2")]
    ActiveSetTooSmall(usize),
    #[error("sets have different sizes ({a} vs {b})")]
    SizeMismatch { a: usize, b: usize },
    #[error("set size {k} exceeds universe {universe}")]
    SetLargerThanUniverse { k: usize, universe: usize },
    #[error("invalid stop rule: {0}")]
    InvalidStop(String),
    #[error(transparent)]
    Active(#[from] DepError),
}

/// Column means and the sample covariance (denominator m - 1) of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSummary {
    pub item_ids: Vec<String>,
    pub col_means: Vec<f64>,
    /// Row-major k x k, symmetric.
    pub cov: Vec<f64>,
    pub m: usize,
}

pub fn covariance_summary(mat: &PValueMatrix) -> Result<CovarianceSummary, MinsetError> {
    let (m, k) = (mat.m(), mat.k());
    if m < 2 {
        return Err(MinsetError::DegenerateSample(m));
    }
    let mut col_means = vec![0.0; k];
    for row in mat.rows() {
        for (acc, v) in col_means.iter_mut().zip(row) {
            *acc += v;
        }
    }
    col_means.iter_mut().for_each(|s| *s /= m as f64);
    let mut upper = vec![0.0; k * k];
    let mut centered = vec![0.0; k];
    for row in mat.rows() {
        for ((d, v), mu) in centered.iter_mut().zip(row).zip(&col_means) {
            *d = v - mu;
        }
        for a in 0..k {
            let da = centered[a];
            let line = &mut upper[a * k..(a + 1) * k];
            for b in a..k {
                line[b] += da * centered[b];
            }
        }
    }
    let denom = (m - 1) as f64;
    let mut cov = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let c = upper[a * k + b] / denom;
            cov[a * k + b] = c;
            cov[b * k + a] = c;
        }
    }
    Ok(CovarianceSummary { item_ids: mat.item_ids().to_vec(), col_means, cov, m })
}

impl CovarianceSummary {
    pub fn k(&self) -> usize {
        self.item_ids.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.cov[a * self.k() + b]
    }

    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        self.get(a, b) / (self.get(a, a) * self.get(b, b)).sqrt()
    }

    fn check(&self, active: &ActiveSet) -> Result<(), MinsetError> {
        if active.universe() != self.k() {
            return Err(DepError::UniverseMismatch { set: active.universe(), matrix: self.k() }.into());
        }
        Ok(())
    }

    /// Sum of `C_ab` over the active rows `a` for each column `b`.
    fn row_sums(&self, active: &ActiveSet) -> Vec<f64> {
        let k = self.k();
        let mut sums = vec![0.0; k];
        for &a in active.members() {
            let line = &self.cov[a * k..(a + 1) * k];
            for &b in active.members() {
                sums[b] += line[b];
            }
        }
        sums
    }

    /// I of the active set through the covariance identity.
    pub fn indicator(&self, active: &ActiveSet) -> Result<f64, MinsetError> {
        self.check(active)?;
        let sums = self.row_sums(active);
        let s: f64 = active.members().iter().map(|&a| sums[a]).sum();
        Ok(indicator_from_sum(s, active.k()))
    }
}

fn indicator_from_sum(s: f64, k: usize) -> f64 {
    let k = k as f64;
    (12.0 * k * s.max(0.0)).sqrt() / k
}

/// The item whose removal minimizes I, and the resulting I. Ties go to the
/// lowest item index.
pub fn greedy_step(cov: &CovarianceSummary, active: &ActiveSet) -> Result<(usize, f64), MinsetError> {
    cov.check(active)?;
    let k = active.k();
    if k < 2 {
        return Err(MinsetError::ActiveSetTooSmall(k));
    }
    let sums = cov.row_sums(active);
    let s: f64 = active.members().iter().map(|&a| sums[a]).sum();
    let mut best: Option<(usize, f64)> = None;
    for &x in active.members() {
        let after = s - 2.0 * sums[x] + cov.get(x, x);
        if best.is_none_or(|(_, b)| after < b) {
            best = Some((x, after));
        }
    }
    let (x, after) = best.expect("k >= 2");
    Ok((x, indicator_from_sum(after, k - 1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop at the first step with I <= 1 + delta.
    Threshold { delta: f64 },
    /// Stop once k_min items remain.
    KMin { k_min: usize },
    /// Continue down to a single item.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreedyConfig {
    pub stop: StopRule,
    /// The selected set is the first point on the trajectory with I <= 1 + delta.
    pub delta: f64,
}

pub const DEFAULT_DELTA: f64 = 0.01;

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { stop: StopRule::Full, delta: DEFAULT_DELTA }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyStep {
    /// 1-based step number.
    pub step: usize,
    pub removed_index: usize,
    pub removed_item: String,
    /// Items remaining after this removal.
    pub k: usize,
    pub indicator: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyTrajectory {
    pub item_ids: Vec<String>,
    pub config: GreedyConfig,
    pub initial_indicator: f64,
    pub steps: Vec<GreedyStep>,
    /// Number of removals at the first point with I <= 1 + delta (0 means
    /// the full set already qualifies); `None` if never reached.
    pub selected_after: Option<usize>,
}

impl GreedyTrajectory {
    /// Active set after the first `removals` steps.
    pub fn active_after(&self, removals: usize) -> ActiveSet {
        assert!(removals <= self.steps.len());
        let removed: Vec<usize> = self.steps[..removals].iter().map(|s| s.removed_index).collect();
        ActiveSet::from_indices(
            (0..self.item_ids.len()).filter(|i| !removed.contains(i)),
            self.item_ids.len(),
        )
        .expect("a trajectory never removes every item")
    }

    pub fn final_active(&self) -> ActiveSet {
        self.active_after(self.steps.len())
    }

    pub fn selected_set(&self) -> Option<ActiveSet> {
        self.selected_after.map(|r| self.active_after(r))
    }

    /// The surviving items when exactly `k` remain, if the run got that far.
    pub fn survivors(&self, k: usize) -> Option<ActiveSet> {
        let total = self.item_ids.len();
        if k == 0 || k > total || total - k > self.steps.len() {
            return None;
        }
        Some(self.active_after(total - k))
    }

    /// Indicator after `removals` steps.
    pub fn indicator_after(&self, removals: usize) -> f64 {
        if removals == 0 {
            self.initial_indicator
        } else {
            self.steps[removals - 1].indicator
        }
    }

    /// `step,removed_item,k,I`, one line per removal.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        writeln!(w, "# initial I {:.12e} at k={}", self.initial_indicator, self.item_ids.len())?;
        writeln!(w, "step,removed_item,k,I")?;
        for s in &self.steps {
            writeln!(w, "{},{},{},{:.12e}", s.step, s.removed_item, s.k, s.indicator)?;
        }
        Ok(())
    }
}

/// Greedy removal from the full item set of `mat`.
pub fn greedy_run(mat: &PValueMatrix, config: GreedyConfig) -> Result<GreedyTrajectory, MinsetError> {
    let cov = covariance_summary(mat)?;
    greedy_run_cov(&cov, config)
}

pub fn greedy_run_cov(
    cov: &CovarianceSummary,
    config: GreedyConfig,
) -> Result<GreedyTrajectory, MinsetError> {
    let total = cov.k();
    match config.stop {
        StopRule::KMin { k_min } if k_min == 0 || k_min > total => {
            return Err(MinsetError::InvalidStop(format!("k_min {k_min} outside 1..={total}")));
        }
        StopRule::Threshold { delta } if !(delta >= 0.0) => {
            return Err(MinsetError::InvalidStop(format!("delta {delta} must be >= 0")));
        }
        _ => {}
    }
    if !(config.delta >= 0.0) {
        return Err(MinsetError::InvalidStop(format!("delta {} must be >= 0", config.delta)));
    }
    let mut active = ActiveSet::full(total)?;
    let initial = cov.indicator(&active)?;
    let reached = |i: f64, delta: f64| i <= 1.0 + delta;
    let mut selected_after = reached(initial, config.delta).then_some(0);
    let done = |k: usize, i: f64| match config.stop {
        StopRule::Full => k <= 1,
        StopRule::KMin { k_min } => k <= k_min,
        StopRule::Threshold { delta } => k <= 1 || reached(i, delta),
    };
    let mut steps = Vec::new();
    let mut current = initial;
    while !done(active.k(), current) {
        let (x, i) = greedy_step(cov, &active)?;
        active = active.without(x).expect("k >= 2");
        steps.push(GreedyStep {
            step: steps.len() + 1,
            removed_index: x,
            removed_item: cov.item_ids[x].clone(),
            k: active.k(),
            indicator: i,
        });
        if selected_after.is_none() && reached(i, config.delta) {
            selected_after = Some(steps.len());
        }
        current = i;
    }
    Ok(GreedyTrajectory {
        item_ids: cov.item_ids.clone(),
        config,
        initial_indicator: initial,
        steps,
        selected_after,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapStats {
    pub observed: usize,
    pub k: usize,
    pub universe: usize,
    pub expected: f64,
    pub sd: f64,
    /// `(observed - expected) / sd`; absent when sd is 0.
    pub z: Option<f64>,
}

/// Mean and sd of |A n B| for two independent uniform K-subsets of an N-set.
pub fn hypergeometric_overlap(universe: usize, k: usize) -> (f64, f64) {
    let (n, k) = (universe as f64, k as f64);
    let expected = k * k / n;
    let var = if universe > 1 { k * (k / n) * ((n - k) / n) * ((n - k) / (n - 1.0)) } else { 0.0 };
    (expected, var.max(0.0).sqrt())
}

pub fn overlap_stats(a: &ActiveSet, b: &ActiveSet, universe: usize) -> Result<OverlapStats, MinsetError> {
    if a.k() != b.k() {
        return Err(MinsetError::SizeMismatch { a: a.k(), b: b.k() });
    }
    if a.k() > universe {
        return Err(MinsetError::SetLargerThanUniverse { k: a.k(), universe });
    }
    let observed = a.intersection_len(b);
    let (expected, sd) = hypergeometric_overlap(universe, a.k());
    let z = (sd > 0.0).then(|| (observed as f64 - expected) / sd);
    Ok(OverlapStats { observed, k: a.k(), universe, expected, sd, z })
}
