//! Per-sequence mean p-value `q`, its scrambled control, histograms against
//! the independent-items normal reference, and the indicator I.
//!
//! Every reduction runs in a fixed order (rows ascending, items ascending),
//! so results are bit-stable.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::pmatrix::PValueMatrix;
use crate::special::{igamc, normal_cdf};

#[derive(Debug, Error, PartialEq)]
pub enum DepError {
    #[error("active set is empty")]
    EmptyActiveSet,
    #[error("need at least 2 values for a sample standard deviation, got {0}")]
    DegenerateSample(usize),
    #[error("item index {index} outside 0..{universe}")]
    InvalidIndex { index: usize, universe: usize },
    #[error("item index {0} listed twice")]
    DuplicateIndex(usize),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("active set has universe {set} but the matrix has {matrix} items")]
    UniverseMismatch { set: usize, matrix: usize },
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("chi-square evaluation failed: {0}")]
    Numerical(String),
}

/// A non-empty set of item (column) indices, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ActiveSet {
    members: Vec<usize>,
    universe: usize,
}

impl ActiveSet {
    pub fn full(universe: usize) -> Result<Self, DepError> {
        if universe == 0 {
            return Err(DepError::EmptyActiveSet);
        }
        Ok(Self { members: (0..universe).collect(), universe })
    }

    pub fn from_indices(
        indices: impl IntoIterator<Item = usize>,
        universe: usize,
    ) -> Result<Self, DepError> {
        let mut members: Vec<usize> = indices.into_iter().collect();
        members.sort_unstable();
        for w in members.windows(2) {
            if w[0] == w[1] {
                return Err(DepError::DuplicateIndex(w[0]));
            }
        }
        if let Some(&index) = members.iter().find(|&&i| i >= universe) {
            return Err(DepError::InvalidIndex { index, universe });
        }
        if members.is_empty() {
            return Err(DepError::EmptyActiveSet);
        }
        Ok(Self { members, universe })
    }

    /// Resolves item ids against the columns of `mat`.
    pub fn from_ids<S: AsRef<str>>(mat: &PValueMatrix, ids: &[S]) -> Result<Self, DepError> {
        Self::from_ids_in(mat.item_ids(), ids)
    }

    /// Resolves item ids against an explicit id list.
    pub fn from_ids_in<S: AsRef<str>>(universe_ids: &[String], ids: &[S]) -> Result<Self, DepError> {
        let idx = ids
            .iter()
            .map(|id| {
                let id = id.as_ref();
                universe_ids
                    .iter()
                    .position(|u| u == id)
                    .ok_or_else(|| DepError::UnknownItem(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_indices(idx, universe_ids.len())
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    /// This set minus `index`; `None` if that would leave it empty or
    /// `index` is not a member.
    pub fn without(&self, index: usize) -> Option<Self> {
        let pos = self.members.binary_search(&index).ok()?;
        if self.members.len() == 1 {
            return None;
        }
        let mut members = self.members.clone();
        members.remove(pos);
        Some(Self { members, universe: self.universe })
    }

    pub fn intersection_len(&self, other: &ActiveSet) -> usize {
        self.members.iter().filter(|&&i| other.contains(i)).count()
    }

    pub fn ids<'a>(&self, universe_ids: &'a [String]) -> Vec<&'a str> {
        self.members.iter().map(|&i| universe_ids[i].as_str()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QMode {
    Plain,
    Scrambled,
}

impl QMode {
    pub fn name(self) -> &'static str {
        match self {
            QMode::Plain => "plain",
            QMode::Scrambled => "scrambled",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QSample {
    pub values: Vec<f64>,
    pub mode: QMode,
    pub active: ActiveSet,
}

fn check_universe(mat: &PValueMatrix, active: &ActiveSet) -> Result<(), DepError> {
    if active.universe() != mat.k() {
        return Err(DepError::UniverseMismatch { set: active.universe(), matrix: mat.k() });
    }
    Ok(())
}

/// q_j: the mean p-value of row j over the active items.
pub fn q_stat(mat: &PValueMatrix, active: &ActiveSet) -> Result<QSample, DepError> {
    check_universe(mat, active)?;
    let k = active.k() as f64;
    let values = mat
        .rows()
        .map(|row| active.members().iter().map(|&i| row[i]).sum::<f64>() / k)
        .collect();
    Ok(QSample { values, mode: QMode::Plain, active: active.clone() })
}

/// Scrambled q: item column `c` (0-based) is read `c + 1` rows further down,
/// wrapping, so the items averaged into one value come from different
/// sequences while each column keeps its values.
pub fn scrambled_q(mat: &PValueMatrix, active: &ActiveSet) -> Result<QSample, DepError> {
    check_universe(mat, active)?;
    let m = mat.m();
    let k = active.k() as f64;
    let values = (0..m)
        .map(|j| {
            active
                .members()
                .iter()
                .map(|&c| mat.get((j + c + 1) % m, c))
                .sum::<f64>()
                / k
        })
        .collect();
    Ok(QSample { values, mode: QMode::Scrambled, active: active.clone() })
}

/// Standard deviation of the mean of `k` independent uniform p-values.
pub fn theoretical_sd(k: usize) -> Result<f64, DepError> {
    if k == 0 {
        return Err(DepError::EmptyActiveSet);
    }
    Ok(1.0 / (12.0 * k as f64).sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation, (m - 1) denominator, two-pass.
pub fn sample_sd(values: &[f64]) -> Result<f64, DepError> {
    if values.len() < 2 {
        return Err(DepError::DegenerateSample(values.len()));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Sample sd of q over its theoretical sd under independence.
pub fn indicator_i(q: &QSample) -> Result<f64, DepError> {
    Ok(sample_sd(&q.values)? / theoretical_sd(q.active.k())?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramSummary {
    pub m: usize,
    pub k: usize,
    pub mode: QMode,
    pub mean: f64,
    pub sample_sd: f64,
    pub theoretical_sd: f64,
    pub indicator: f64,
}

/// Equal-width bins over 1/2 +- 8 theoretical sd, plus an underflow and an
/// overflow bin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramData {
    /// `bins + 1` edges of the interior bins.
    pub bin_edges: Vec<f64>,
    /// Interior bin counts.
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    /// Expected count per interior bin from the normal density at its center.
    pub overlay: Vec<f64>,
    pub summary: HistogramSummary,
}

/// Half-width of the histogram window in theoretical standard deviations.
pub const HIST_SPAN_SDS: f64 = 8.0;
pub const DEFAULT_BINS: usize = 201;

fn normal_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn histogram(q: &QSample, bins: usize) -> Result<HistogramData, DepError> {
    if bins < 2 {
        return Err(DepError::TooFewBins(bins));
    }
    let m = q.values.len();
    let k = q.active.k();
    let sd0 = theoretical_sd(k)?;
    let lo = 0.5 - HIST_SPAN_SDS * sd0;
    let width = 2.0 * HIST_SPAN_SDS * sd0 / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    let (mut underflow, mut overflow) = (0, 0);
    for &v in &q.values {
        let pos = ((v - lo) / width).floor();
        if pos < 0.0 {
            underflow += 1;
        } else if pos >= bins as f64 {
            overflow += 1;
        } else {
            counts[pos as usize] += 1;
        }
    }
    let overlay = (0..bins)
        .map(|b| m as f64 * width * normal_pdf(lo + (b as f64 + 0.5) * width, 0.5, sd0))
        .collect();
    let sample_sd = sample_sd(&q.values)?;
    let summary = HistogramSummary {
        m,
        k,
        mode: q.mode,
        mean: mean(&q.values),
        sample_sd,
        theoretical_sd: sd0,
        indicator: sample_sd / sd0,
    };
    Ok(HistogramData { bin_edges, counts, underflow, overflow, overlay, summary })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: usize,
}

impl HistogramData {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        0.5 * (self.bin_edges[b] + self.bin_edges[b + 1])
    }

    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.counts.iter().sum::<u64>()
    }

    /// Chi-square test of the counts (tails included) against the normal
    /// reference, using exact cell probabilities and pooling adjacent cells
    /// left to right until each expects at least 5.
    pub fn chi_square_gof(&self) -> Result<GoodnessOfFit, DepError> {
        let m = self.summary.m as f64;
        let sd0 = self.summary.theoretical_sd;
        let cdf = |x: f64| normal_cdf((x - 0.5) / sd0);
        let n_edges = self.bin_edges.len();
        let mut cells: Vec<(f64, f64)> = Vec::with_capacity(self.bins() + 2);
        cells.push((self.underflow as f64, m * cdf(self.bin_edges[0])));
        for b in 0..self.bins() {
            let p = cdf(self.bin_edges[b + 1]) - cdf(self.bin_edges[b]);
            cells.push((self.counts[b] as f64, m * p));
        }
        cells.push((self.overflow as f64, m * (1.0 - cdf(self.bin_edges[n_edges - 1]))));

        let mut pooled: Vec<(f64, f64)> = Vec::new();
        let mut acc = (0.0, 0.0);
        for (o, e) in cells {
            acc.0 += o;
            acc.1 += e;
            if acc.1 >= 5.0 {
                pooled.push(acc);
                acc = (0.0, 0.0);
            }
        }
        if acc.1 > 0.0 || acc.0 > 0.0 {
            match pooled.last_mut() {
                Some(last) => {
                    last.0 += acc.0;
                    last.1 += acc.1;
                }
                None => pooled.push(acc),
            }
        }
        if pooled.len() < 2 {
            return Err(DepError::Numerical("fewer than 2 cells after pooling".into()));
        }
        let statistic: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
        let dof = pooled.len() - 1;
        let p_value = igamc(dof as f64 / 2.0, statistic / 2.0)
            .map_err(|e| DepError::Numerical(e.to_string()))?;
        Ok(GoodnessOfFit { statistic, dof, p_value, cells: pooled.len() })
    }

    /// One row per bin: `bin,lower,upper,bin_center,count,overlay`. The tail
    /// rows carry their expected counts in `overlay` and no center.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        let m = self.summary.m as f64;
        let sd0 = self.summary.theoretical_sd;
        let lo = self.bin_edges[0];
        let hi = *self.bin_edges.last().unwrap();
        writeln!(w, "bin,lower,upper,bin_center,count,overlay")?;
        writeln!(w, "underflow,,{lo:.12e},,{},{:.12e}", self.underflow, m * normal_cdf((lo - 0.5) / sd0))?;
        for b in 0..self.bins() {
            writeln!(
                w,
                "{b},{:.12e},{:.12e},{:.12e},{},{:.12e}",
                self.bin_edges[b],
                self.bin_edges[b + 1],
                self.bin_center(b),
                self.counts[b],
                self.overlay[b]
            )?;
        }
        writeln!(
            w,
            "overflow,{hi:.12e},,,{},{:.12e}",
            self.overflow,
            m * (1.0 - normal_cdf((hi - 0.5) / sd0))
        )?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub mode: QMode,
    pub sample_sd: f64,
    pub theoretical_sd: f64,
    pub indicator: f64,
}

/// One row per `(n, matrix)` pair, using every column of each matrix.
pub fn sd_scaling_report(
    matrices: &[(usize, &PValueMatrix)],
    mode: QMode,
) -> Result<Vec<ScalingRow>, DepError> {
    matrices
        .iter()
        .map(|&(n, mat)| {
            let active = ActiveSet::full(mat.k())?;
            let q = match mode {
                QMode::Plain => q_stat(mat, &active)?,
                QMode::Scrambled => scrambled_q(mat, &active)?,
            };
            let sample_sd = sample_sd(&q.values)?;
            let theoretical_sd = theoretical_sd(active.k())?;
            Ok(ScalingRow {
                n,
                m: mat.m(),
                k: active.k(),
                mode,
                sample_sd,
                theoretical_sd,
                indicator: sample_sd / theoretical_sd,
            })
        })
        .collect()
}

pub fn write_scaling_csv<W: Write>(
    rows: &[ScalingRow],
    mut w: W,
    comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "n,m,k,mode,sample_sd,theoretical_sd,I")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.12e},{:.12e},{:.12e}",
            r.n,
            r.m,
            r.k,
            r.mode.name(),
            r.sample_sd,
            r.theoretical_sd,
            r.indicator
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmatrix::Provenance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn matrix(rows: &[Vec<f64>]) -> PValueMatrix {
        PValueMatrix::from_rows(ids(rows[0].len()), rows, Provenance::synthetic("test")).unwrap()
    }

    fn uniform_matrix(m: usize, k: usize, seed: u64) -> PValueMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..m * k).map(|_| rng.gen::<f64>()).collect();
        PValueMatrix::new(ids(k), values, Provenance::synthetic("uniform")).unwrap()
    }

    #[test]
    fn active_set_rules() {
        assert!(ActiveSet::from_indices([3, 1, 2], 4).unwrap().members() == [1, 2, 3]);
        assert_eq!(ActiveSet::from_indices([1, 1], 4), Err(DepError::DuplicateIndex(1)));
        assert_eq!(ActiveSet::from_indices([], 4), Err(DepError::EmptyActiveSet));
        assert_eq!(ActiveSet::from_indices([4], 4), Err(DepError::InvalidIndex { index: 4, universe: 4 }));
        let s = ActiveSet::from_indices([0, 2], 3).unwrap();
        assert_eq!(s.without(2).unwrap().members(), [0]);
        assert!(s.without(1).is_none());
        assert!(s.without(0).unwrap().without(2).is_none());
        let u = ids(3);
        assert_eq!(ActiveSet::from_ids_in(&u, &["c2", "c0"]).unwrap(), s);
        assert_eq!(ActiveSet::from_ids_in(&u, &["zz"]), Err(DepError::UnknownItem("zz".into())));
    }

    #[test]
    fn q_examples() {
        let mat = matrix(&[vec![0.5, 0.5, 0.5], vec![0.2, 0.6, 0.9]]);
        let all = ActiveSet::full(3).unwrap();
        let q = q_stat(&mat, &all).unwrap();
        assert_eq!(q.values[0], 0.5);
        let two = ActiveSet::from_indices([0, 1], 3).unwrap();
        let q = q_stat(&mat, &two).unwrap();
        assert!((q.values[1] - 0.4).abs() < 1e-15);
        assert!(q_stat(&mat, &ActiveSet::full(4).unwrap()).is_err());
    }

    #[test]
    fn scramble_shifts_each_column_by_its_position() {
        let rows: Vec<Vec<f64>> = (0..5).map(|j| (0..3).map(|i| (10 * j + i) as f64 / 100.0).collect()).collect();
        let mat = matrix(&rows);
        // single item at 0-based position 2: rows read 3 further down
        let one = ActiveSet::from_indices([2], 3).unwrap();
        let q = scrambled_q(&mat, &one).unwrap();
        let expect: Vec<f64> = (0..5).map(|j| mat.get((j + 3) % 5, 2)).collect();
        assert_eq!(q.values, expect);
        let mut a = q.values.clone();
        let mut b = mat.column(2);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);

        let single = matrix(&[vec![0.1, 0.7, 0.4]]);
        let all = ActiveSet::full(3).unwrap();
        assert_eq!(scrambled_q(&single, &all).unwrap().values, q_stat(&single, &all).unwrap().values);
    }

    #[test]
    fn theoretical_sd_values() {
        assert!((theoretical_sd(162).unwrap() - 0.022_680_460_581_325_3).abs() < 1e-15);
        assert!((theoretical_sd(1).unwrap() - 0.288_675_134_594_812_9).abs() < 1e-15);
        assert!((theoretical_sd(12).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(theoretical_sd(0).is_err());
    }

    #[test]
    fn indicator_examples() {
        let active = ActiveSet::full(1).unwrap();
        let q = QSample { values: vec![0.3; 10], mode: QMode::Plain, active: active.clone() };
        assert_eq!(indicator_i(&q).unwrap(), 0.0);
        let q = QSample { values: vec![0.3], mode: QMode::Plain, active: active.clone() };
        assert_eq!(indicator_i(&q), Err(DepError::DegenerateSample(1)));
        // two values at 1/2 +- s have sample sd s*sqrt(2)
        let s = theoretical_sd(1).unwrap() / 2f64.sqrt();
        let q = QSample { values: vec![0.5 - s, 0.5 + s], mode: QMode::Plain, active };
        assert!((indicator_i(&q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_gives_root_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..100_000)
            .map(|_| {
                let u: f64 = rng.gen();
                vec![u, u]
            })
            .collect();
        let mat = matrix(&rows);
        let i = indicator_i(&q_stat(&mat, &ActiveSet::full(2).unwrap()).unwrap()).unwrap();
        assert!((i / 2f64.sqrt() - 1.0).abs() < 0.02, "{i}");
    }

    #[test]
    fn independent_uniform_matrix() {
        let m = 10_000;
        let mat = uniform_matrix(m, 162, 5);
        let all = ActiveSet::full(162).unwrap();
        let q = q_stat(&mat, &all).unwrap();
        assert!((mean(&q.values) - 0.5).abs() < 3.0 * theoretical_sd(162).unwrap() / (m as f64).sqrt() * 1.5);
        let i = indicator_i(&q).unwrap();
        assert!((i - 1.0).abs() <= 3.0 / (2.0 * m as f64).sqrt(), "{i}");
        let h = histogram(&q, DEFAULT_BINS).unwrap();
        let gof = h.chi_square_gof().unwrap();
        assert!(gof.p_value > 0.01, "{gof:?}");
        let sq = scrambled_q(&mat, &all).unwrap();
        assert!((mean(&sq.values) - mean(&q.values)).abs() < 1e-12);
    }

    #[test]
    fn histogram_contracts() {
        let active = ActiveSet::full(162).unwrap();
        let q = QSample { values: vec![0.5; 40], mode: QMode::Plain, active: active.clone() };
        let h = histogram(&q, 201).unwrap();
        assert_eq!(h.counts[100], 40);
        assert_eq!(h.total(), 40);
        assert_eq!(h.bin_edges.len(), 202);
        let q = QSample { values: vec![0.0, 1.0, 0.5, 0.49], mode: QMode::Plain, active };
        let h = histogram(&q, 10).unwrap();
        assert_eq!((h.underflow, h.overflow, h.total()), (1, 1, 4));
        let mut out = Vec::new();
        h.write_csv(&mut out, Some("cfg")).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 1 + 10 + 2);
        assert!(histogram(&q_stat(&matrix(&[vec![0.5], vec![0.5]]), &ActiveSet::full(1).unwrap()).unwrap(), 1).is_err());
    }

    #[test]
    fn scaling_report_matches_indicator() {
        let mat = uniform_matrix(500, 20, 2);
        let rows = sd_scaling_report(&[(1000, &mat)], QMode::Plain).unwrap();
        assert_eq!(rows.len(), 1);
        let i = indicator_i(&q_stat(&mat, &ActiveSet::full(20).unwrap()).unwrap()).unwrap();
        assert_eq!(rows[0].indicator, i);
    }

    proptest! {
        #[test]
        fn scramble_preserves_mean(rows in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 6), 1..30),
                                   pick in proptest::collection::btree_set(0usize..6, 1..6)) {
            let mat = matrix(&rows);
            let active = ActiveSet::from_indices(pick, 6).unwrap();
            let q = q_stat(&mat, &active).unwrap();
            let s = scrambled_q(&mat, &active).unwrap();
            prop_assert!((mean(&q.values) - mean(&s.values)).abs() < 1e-12);
            prop_assert!(q.values.iter().chain(&s.values).all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn histogram_conserves_count(values in proptest::collection::vec(0.0f64..=1.0, 2..200), bins in 2usize..300) {
            let q = QSample { values, mode: QMode::Plain, active: ActiveSet::full(7).unwrap() };
            let h = histogram(&q, bins).unwrap();
            prop_assert_eq!(h.total() as usize, q.values.len());
        }
    }
}
