//! The 13-kind, 162-item SP800-22 battery.
//!
//! Random Excursions and Random Excursions Variant are not part of the
//! battery. Every item yields one p-value per sequence; cumulative sums and
//! serial each contribute two items from a single pass, and the
//! non-overlapping template kind contributes one item per 9-bit aperiodic
//! template (148 of them).
//!
//! Statistics, constants and parameter selection follow the reference STS
//! code so p-values agree with it to well under 1e-4.

mod cusum;
mod dft;
mod frequency;
mod linear_complexity;
mod rank;
mod runs;
mod serial;
mod templates;
mod universal;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitseq::BitSequence;
use crate::special::SpecialError;

pub use linear_complexity::berlekamp_massey;
pub use templates::aperiodic_templates;

/// Number of items in the battery.
pub const ITEM_COUNT: usize = 162;
/// Template length shared by the two template-matching kinds.
pub const TEMPLATE_LEN: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("invalid battery parameters: {0}")]
    InvalidParams(String),
    #[error("{kind} needs at least {minimum} bits (got {actual})")]
    SequenceTooShort { kind: &'static str, minimum: usize, actual: usize },
    #[error("sequence has {actual} bits but parameters are for n={expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("numerical failure in {kind}: {detail}")]
    NumericalFailure { kind: &'static str, detail: String },
    #[error("item list does not match the canonical battery order")]
    ItemMismatch,
    #[error("item {item_id}: {source}")]
    Item {
        item_id: String,
        #[source]
        source: Box<BatteryError>,
    },
}

impl BatteryError {
    pub(crate) fn numerical(kind: &'static str, err: SpecialError) -> Self {
        BatteryError::NumericalFailure { kind, detail: err.to_string() }
    }

    /// True when the root cause is a numerical failure.
    pub fn is_numerical(&self) -> bool {
        match self {
            BatteryError::NumericalFailure { .. } => true,
            BatteryError::Item { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemKind {
    Frequency,
    BlockFrequency,
    CusumForward,
    CusumReverse,
    Runs,
    LongestRun,
    Rank,
    Dft,
    /// Non-overlapping template matching for one 9-bit aperiodic template
    /// (first template bit is the most significant).
    NonOverlapping(u16),
    Overlapping,
    Universal,
    ApproxEntropy,
    Serial1,
    Serial2,
    LinearComplexity,
}

impl ItemKind {
    /// Name of the test kind this item belongs to (two items share `cusum` and `serial`).
    pub fn kind_name(self) -> &'static str {
        match self {
            ItemKind::Frequency => "frequency",
            ItemKind::BlockFrequency => "block-frequency",
            ItemKind::CusumForward | ItemKind::CusumReverse => "cusum",
            ItemKind::Runs => "runs",
            ItemKind::LongestRun => "longest-run",
            ItemKind::Rank => "rank",
            ItemKind::Dft => "dft",
            ItemKind::NonOverlapping(_) => "nonoverlap",
            ItemKind::Overlapping => "overlap",
            ItemKind::Universal => "universal",
            ItemKind::ApproxEntropy => "approx-entropy",
            ItemKind::Serial1 | ItemKind::Serial2 => "serial",
            ItemKind::LinearComplexity => "linear-complexity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TestItem {
    id: String,
    kind: ItemKind,
}

impl TestItem {
    fn new(kind: ItemKind) -> Self {
        let id = match kind {
            ItemKind::Frequency => "frequency".to_string(),
            ItemKind::BlockFrequency => "block-frequency".to_string(),
            ItemKind::CusumForward => "cusum-fwd".to_string(),
            ItemKind::CusumReverse => "cusum-rev".to_string(),
            ItemKind::Runs => "runs".to_string(),
            ItemKind::LongestRun => "longest-run".to_string(),
            ItemKind::Rank => "rank".to_string(),
            ItemKind::Dft => "dft".to_string(),
            ItemKind::NonOverlapping(t) => format!("nonoverlap-{t:0w$b}", w = TEMPLATE_LEN),
            ItemKind::Overlapping => "overlap".to_string(),
            ItemKind::Universal => "universal".to_string(),
            ItemKind::ApproxEntropy => "approx-entropy".to_string(),
            ItemKind::Serial1 => "serial-1".to_string(),
            ItemKind::Serial2 => "serial-2".to_string(),
            ItemKind::LinearComplexity => "linear-complexity".to_string(),
        };
        Self { id, kind }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> ItemKind {
        self.kind
    }

    /// Looks up a battery item by its stable id.
    pub fn from_id(id: &str) -> Option<TestItem> {
        canonical_items().iter().find(|it| it.id == id).cloned()
    }
}

impl fmt::Display for TestItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

fn canonical_items() -> &'static [TestItem] {
    static ITEMS: std::sync::OnceLock<Vec<TestItem>> = std::sync::OnceLock::new();
    ITEMS.get_or_init(|| {
        let mut kinds = vec![
            ItemKind::Frequency,
            ItemKind::BlockFrequency,
            ItemKind::CusumForward,
            ItemKind::CusumReverse,
            ItemKind::Runs,
            ItemKind::LongestRun,
            ItemKind::Rank,
            ItemKind::Dft,
        ];
        kinds.extend(aperiodic_templates(TEMPLATE_LEN).into_iter().map(ItemKind::NonOverlapping));
        kinds.extend([
            ItemKind::Overlapping,
            ItemKind::Universal,
            ItemKind::ApproxEntropy,
            ItemKind::Serial1,
            ItemKind::Serial2,
            ItemKind::LinearComplexity,
        ]);
        kinds.into_iter().map(TestItem::new).collect()
    })
}

/// Ids of all 162 items in canonical order.
pub fn item_ids() -> Vec<String> {
    canonical_items().iter().map(|it| it.id.clone()).collect()
}

/// Per-kind parameters for sequences of length `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub n: usize,
    pub block_frequency_m: usize,
    pub template_len: usize,
    pub nonoverlap_blocks: usize,
    pub overlap_block_len: usize,
    pub longest_run_m: usize,
    pub universal_l: usize,
    pub universal_q: usize,
    pub approx_entropy_m: usize,
    pub serial_m: usize,
    pub linear_complexity_m: usize,
    /// Opt-in corrected variance for the DFT statistic; off keeps reference behavior.
    #[serde(default)]
    pub dft_corrected_variance: bool,
}

impl BatteryParams {
    /// Reference defaults: block-frequency M=128, templates of 9 bits,
    /// approximate entropy m=10, serial m=16, linear complexity M=500;
    /// longest-run block size and Maurer's L chosen from `n`.
    pub fn for_length(n: usize) -> Self {
        let universal_l = universal::select_block_len(n);
        Self {
            n,
            block_frequency_m: 128,
            template_len: TEMPLATE_LEN,
            nonoverlap_blocks: 8,
            overlap_block_len: 1032,
            longest_run_m: runs::select_longest_run_block(n),
            universal_l,
            universal_q: 10 << universal_l,
            approx_entropy_m: 10,
            serial_m: 16,
            linear_complexity_m: 500,
            dft_corrected_variance: false,
        }
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        let bad = |msg: String| Err(BatteryError::InvalidParams(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.template_len != TEMPLATE_LEN {
            return bad(format!("template length is fixed at {TEMPLATE_LEN}"));
        }
        for (name, v) in [
            ("block_frequency_m", self.block_frequency_m),
            ("nonoverlap_blocks", self.nonoverlap_blocks),
            ("overlap_block_len", self.overlap_block_len),
            ("linear_complexity_m", self.linear_complexity_m),
            ("approx_entropy_m", self.approx_entropy_m),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if ![8, 128, 10_000].contains(&self.longest_run_m) {
            return bad(format!("longest_run_m must be 8, 128 or 10000 (got {})", self.longest_run_m));
        }
        if !(1..=16).contains(&self.universal_l) {
            return bad(format!("universal_l must be in 1..=16 (got {})", self.universal_l));
        }
        if self.universal_q < (1 << self.universal_l) {
            return bad("universal_q must be at least 2^L".into());
        }
        if !(2..=24).contains(&self.serial_m) {
            return bad(format!("serial_m must be in 2..=24 (got {})", self.serial_m));
        }
        if self.approx_entropy_m + 1 > 24 {
            return bad("approx_entropy_m must be at most 23".into());
        }
        Ok(())
    }

    /// Hard minimum length for each kind under these parameters.
    pub fn minimum_lengths(&self) -> Vec<(&'static str, usize)> {
        let t = self.template_len;
        vec![
            ("frequency", 1),
            ("block-frequency", self.block_frequency_m),
            ("cusum", 1),
            ("runs", 2),
            ("longest-run", 128),
            ("rank", 1024),
            ("dft", 2),
            ("nonoverlap", self.nonoverlap_blocks * t),
            ("overlap", self.overlap_block_len.max(t)),
            ("universal", universal::minimum_length(self.universal_l, self.universal_q)),
            ("approx-entropy", self.approx_entropy_m + 2),
            ("serial", self.serial_m),
            ("linear-complexity", self.linear_complexity_m),
        ]
    }

    /// Kinds whose parameters fall below the reference recommendations at this n.
    /// These still run; the notes travel with any matrix computed from them.
    pub fn warnings(&self) -> Vec<String> {
        let n = self.n;
        let mut out = Vec::new();
        let log2n = (n as f64).log2().floor() as usize;
        if n < 100 {
            out.push(format!("frequency/runs/cusum: n={n} below recommended 100"));
        }
        if n < 1000 {
            out.push(format!("dft: n={n} below recommended 1000"));
        }
        if n / 1024 < 38 {
            out.push(format!("rank: {} matrices below recommended 38", n / 1024));
        }
        if n / self.overlap_block_len.max(1) < 100 {
            out.push(format!(
                "overlap: {} blocks of {} bits below recommended 100",
                n / self.overlap_block_len.max(1),
                self.overlap_block_len
            ));
        }
        if self.universal_l < 6 {
            out.push(format!(
                "universal: n={n} below recommended 387840; L={} from the extended threshold table",
                self.universal_l
            ));
        }
        if self.approx_entropy_m + 5 > log2n {
            out.push(format!(
                "approx-entropy: m={} exceeds recommended {} for n={n}",
                self.approx_entropy_m,
                log2n.saturating_sub(5)
            ));
        }
        if self.serial_m + 2 > log2n {
            out.push(format!(
                "serial: m={} exceeds recommended {} for n={n}",
                self.serial_m,
                log2n.saturating_sub(2)
            ));
        }
        if n / self.linear_complexity_m.max(1) < 200 {
            out.push(format!(
                "linear-complexity: {} blocks below recommended 200",
                n / self.linear_complexity_m.max(1)
            ));
        }
        out
    }
}

/// All 162 items in canonical order.
pub fn enumerate_items(params: &BatteryParams) -> Result<Vec<TestItem>, BatteryError> {
    params.validate()?;
    Ok(canonical_items().to_vec())
}

/// A battery prepared for one parameter set; reusable across sequences and threads.
#[derive(Clone)]
pub struct Battery {
    params: BatteryParams,
    templates: Vec<u16>,
    dft: Arc<dft::DftPlan>,
}

impl fmt::Debug for Battery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Battery").field("params", &self.params).finish_non_exhaustive()
    }
}

impl Battery {
    pub fn new(params: BatteryParams) -> Result<Self, BatteryError> {
        params.validate()?;
        let dft = Arc::new(dft::DftPlan::new(params.n, params.dft_corrected_variance));
        Ok(Self { templates: aperiodic_templates(params.template_len), params, dft })
    }

    pub fn params(&self) -> &BatteryParams {
        &self.params
    }

    pub fn items(&self) -> &'static [TestItem] {
        canonical_items()
    }

    fn check_len(&self, s: &BitSequence) -> Result<(), BatteryError> {
        if s.len() != self.params.n {
            return Err(BatteryError::LengthMismatch { expected: self.params.n, actual: s.len() });
        }
        Ok(())
    }

    /// Fails when `n` is below the hard minimum of `kind` (or of any kind when `None`).
    pub fn check_minimums(&self, kind: Option<&str>) -> Result<(), BatteryError> {
        let n = self.params.n;
        for (name, minimum) in self.params.minimum_lengths() {
            if kind.is_none_or(|k| k == name) && n < minimum {
                return Err(BatteryError::SequenceTooShort { kind: name, minimum, actual: n });
            }
        }
        Ok(())
    }

    /// p-values for all 162 items in canonical order.
    pub fn run(&self, s: &BitSequence) -> Result<Vec<f64>, BatteryError> {
        self.check_len(s)?;
        self.check_minimums(None)?;
        let bits = s.unpacked();
        let p = &self.params;
        let mut row = Vec::with_capacity(ITEM_COUNT);
        let items = canonical_items();

        let push = |row: &mut Vec<f64>, r: Result<f64, BatteryError>| -> Result<(), BatteryError> {
            let v = r.map_err(|e| annotate(&items[row.len()], e))?;
            row.push(v);
            Ok(())
        };

        push(&mut row, frequency::frequency(&bits))?;
        push(&mut row, frequency::block_frequency(&bits, p.block_frequency_m))?;
        let (fwd, rev) = match cusum::cumulative_sums(&bits) {
            Ok(pair) => (Ok(pair.0), Ok(pair.1)),
            Err(e) => (Err(e.clone()), Err(e)),
        };
        push(&mut row, fwd)?;
        push(&mut row, rev)?;
        push(&mut row, runs::runs(&bits))?;
        push(&mut row, runs::longest_run(&bits, p.longest_run_m))?;
        push(&mut row, rank::rank(&bits))?;
        push(&mut row, self.dft.p_value(&bits))?;
        let nonoverlap = templates::non_overlapping(
            &bits,
            &self.templates,
            p.template_len,
            p.nonoverlap_blocks,
        );
        match nonoverlap {
            Ok(ps) => {
                for v in ps {
                    push(&mut row, Ok(v))?;
                }
            }
            Err(e) => push(&mut row, Err(e))?,
        }
        push(&mut row, templates::overlapping(&bits, p.template_len, p.overlap_block_len))?;
        push(&mut row, universal::universal(&bits, p.universal_l, p.universal_q))?;
        let counts = serial::CyclicCounts::new(&bits, p.serial_m.max(p.approx_entropy_m + 1));
        push(&mut row, serial::approximate_entropy(&counts, p.approx_entropy_m))?;
        let (s1, s2) = match serial::serial(&counts, p.serial_m) {
            Ok(pair) => (Ok(pair.0), Ok(pair.1)),
            Err(e) => (Err(e.clone()), Err(e)),
        };
        push(&mut row, s1)?;
        push(&mut row, s2)?;
        push(&mut row, linear_complexity::linear_complexity(&bits, p.linear_complexity_m))?;
        debug_assert_eq!(row.len(), ITEM_COUNT);
        Ok(row)
    }

    /// p-value of a single item.
    pub fn apply(&self, s: &BitSequence, item: &TestItem) -> Result<f64, BatteryError> {
        self.check_len(s)?;
        self.check_minimums(Some(item.kind.kind_name()))
            .map_err(|e| annotate(item, e))?;
        let bits = s.unpacked();
        let p = &self.params;
        let r = match item.kind {
            ItemKind::Frequency => frequency::frequency(&bits),
            ItemKind::BlockFrequency => frequency::block_frequency(&bits, p.block_frequency_m),
            ItemKind::CusumForward => cusum::cumulative_sums(&bits).map(|c| c.0),
            ItemKind::CusumReverse => cusum::cumulative_sums(&bits).map(|c| c.1),
            ItemKind::Runs => runs::runs(&bits),
            ItemKind::LongestRun => runs::longest_run(&bits, p.longest_run_m),
            ItemKind::Rank => rank::rank(&bits),
            ItemKind::Dft => self.dft.p_value(&bits),
            ItemKind::NonOverlapping(t) => {
                templates::non_overlapping(&bits, &[t], p.template_len, p.nonoverlap_blocks)
                    .map(|v| v[0])
            }
            ItemKind::Overlapping => templates::overlapping(&bits, p.template_len, p.overlap_block_len),
            ItemKind::Universal => universal::universal(&bits, p.universal_l, p.universal_q),
            ItemKind::ApproxEntropy => {
                let counts = serial::CyclicCounts::new(&bits, p.approx_entropy_m + 1);
                serial::approximate_entropy(&counts, p.approx_entropy_m)
            }
            ItemKind::Serial1 | ItemKind::Serial2 => {
                let counts = serial::CyclicCounts::new(&bits, p.serial_m);
                serial::serial(&counts, p.serial_m)
                    .map(|(a, b)| if item.kind == ItemKind::Serial1 { a } else { b })
            }
            ItemKind::LinearComplexity => {
                linear_complexity::linear_complexity(&bits, p.linear_complexity_m)
            }
        };
        r.map_err(|e| annotate(item, e))
    }
}

fn annotate(item: &TestItem, err: BatteryError) -> BatteryError {
    BatteryError::Item { item_id: item.id.clone(), source: Box::new(err) }
}

/// p-value of one item for one sequence.
pub fn apply_item(
    s: &BitSequence,
    item: &TestItem,
    params: &BatteryParams,
) -> Result<f64, BatteryError> {
    Battery::new(params.clone())?.apply(s, item)
}

/// p-values of all items for one sequence; `items` must be the canonical list.
pub fn run_row(
    s: &BitSequence,
    items: &[TestItem],
    params: &BatteryParams,
) -> Result<Vec<f64>, BatteryError> {
    if items != canonical_items() {
        return Err(BatteryError::ItemMismatch);
    }
    Battery::new(params.clone())?.run(s)
}

/// Rejects NaN/inf, folds rounding excursions within 1e-12 back into [0, 1].
pub(crate) fn checked_p(kind: &'static str, p: f64) -> Result<f64, BatteryError> {
    const SLACK: f64 = 1e-12;
    if !p.is_finite() || !(-SLACK..=1.0 + SLACK).contains(&p) {
        return Err(BatteryError::NumericalFailure {
            kind,
            detail: format!("p-value {p} outside [0, 1]"),
        });
    }
    Ok(p.clamp(0.0, 1.0))
}
