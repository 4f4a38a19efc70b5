//! Calibration and value metrics for gated deployments.
//!
//! Two families live here:
//!
//! * **Distributional calibration** — reliability tables and expected
//!   calibration error (ECE), computed under a pluggable binning strategy
//!   (`equal_width` or `equal_mass`, selected by name).
//! * **Value alignment** — metrics that score confidences by what they do to
//!   deployment value rather than by binned frequency matching:
//!   [`value_gap`] (expected-vs-realized value difference at a threshold),
//!   [`empirical_threshold`] (the cutoff that actually maximizes realized
//!   value), and [`threshold_divergence`] (how far that cutoff sits from the
//!   analytic optimum).
//!
//! The two families can disagree, by design: a model can carry a large ECE
//! that is confined to confidences the gate rejects anyway (harmless), or a
//! small ECE concentrated right at the threshold (costly). The value metrics
//! are the ones that price this correctly.
//!
//! Realized deployment value as a function of the threshold is a step
//! function: it only changes when the threshold crosses an observed
//! confidence. The candidate set `{0.0} ∪ {distinct confidences} ∪
//! {REJECT_ALL}` therefore contains a global maximizer, and
//! [`empirical_threshold`] searches it exhaustively in one sorted sweep.

use serde::{Deserialize, Serialize};

use crate::cost::{deployed_value, expected_value, CostModel, Dataset, Threshold};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Binning strategies
// ---------------------------------------------------------------------------

/// A named way of partitioning confidences into reliability bins.
///
/// Implementations are stateless; they are registered in
/// [`BINNING_STRATEGIES`] and selected at runtime by name through
/// [`binning_strategy`].
pub trait BinningStrategy: Send + Sync {
    /// Registry key (`equal_width`, `equal_mass`, ...).
    fn name(&self) -> &'static str;

    /// Partitions a non-empty dataset into `bins >= 1` rows.
    fn rows(&self, d: &Dataset, bins: usize) -> Vec<BinRow>;
}

/// Fixed-width bins over `[0, 1]`; a confidence of exactly 1.0 lands in the
/// last bin. Bins that receive no records are emitted with `count = 0` and
/// undefined statistics.
pub struct EqualWidth;

/// Equal-count bins over the sorted sample. With more bins than records this
/// degrades to one record per bin; empty bins are never emitted.
pub struct EqualMass;

impl BinningStrategy for EqualWidth {
    fn name(&self) -> &'static str {
        "equal_width"
    }

    fn rows(&self, d: &Dataset, bins: usize) -> Vec<BinRow> {
        let mut counts = vec![0usize; bins];
        let mut conf_sums = vec![0.0f64; bins];
        let mut correct_counts = vec![0usize; bins];
        for r in d.records() {
            let idx = ((r.confidence * bins as f64) as usize).min(bins - 1);
            counts[idx] += 1;
            conf_sums[idx] += r.confidence;
            correct_counts[idx] += r.correct as usize;
        }
        (0..bins)
            .map(|i| BinRow {
                lower: i as f64 / bins as f64,
                upper: (i + 1) as f64 / bins as f64,
                count: counts[i],
                mean_confidence: (counts[i] > 0).then(|| conf_sums[i] / counts[i] as f64),
                accuracy: (counts[i] > 0).then(|| correct_counts[i] as f64 / counts[i] as f64),
            })
            .collect()
    }
}

impl BinningStrategy for EqualMass {
    fn name(&self) -> &'static str {
        "equal_mass"
    }

    fn rows(&self, d: &Dataset, bins: usize) -> Vec<BinRow> {
        let mut items: Vec<(f64, bool)> = d
            .records()
            .iter()
            .map(|r| (r.confidence, r.correct))
            .collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = items.len();
        let groups = bins.min(n);
        (0..groups)
            .map(|g| {
                let start = g * n / groups;
                let end = (g + 1) * n / groups;
                let members = &items[start..end];
                let count = members.len();
                let conf_sum: f64 = members.iter().map(|m| m.0).sum();
                let correct = members.iter().filter(|m| m.1).count();
                BinRow {
                    lower: members[0].0,
                    upper: members[count - 1].0,
                    count,
                    mean_confidence: Some(conf_sum / count as f64),
                    accuracy: Some(correct as f64 / count as f64),
                }
            })
            .collect()
    }
}

/// All registered binning strategies, keyed by [`BinningStrategy::name`].
pub const BINNING_STRATEGIES: &[&dyn BinningStrategy] = &[&EqualWidth, &EqualMass];

/// Looks a strategy up by name.
pub fn binning_strategy(name: &str) -> Result<&'static dyn BinningStrategy> {
    BINNING_STRATEGIES
        .iter()
        .copied()
        .find(|s| s.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            family: "binning scheme",
            name: name.to_string(),
            known: binning_strategy_names().join(", "),
        })
}

/// Names of every registered strategy, in registry order.
pub fn binning_strategy_names() -> Vec<&'static str> {
    BINNING_STRATEGIES.iter().map(|s| s.name()).collect()
}

/// A binning configuration: a registered strategy name plus a bin count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    /// Strategy name, resolved through the registry at use time.
    pub kind: String,
    /// Number of bins (>= 1).
    pub bins: usize,
}

impl BinningScheme {
    /// Validating constructor; rejects unregistered names and zero bins.
    pub fn new(kind: &str, bins: usize) -> Result<Self> {
        binning_strategy(kind)?;
        if bins == 0 {
            return Err(Error::InvalidBinning("bins must be >= 1".into()));
        }
        Ok(BinningScheme {
            kind: kind.to_string(),
            bins,
        })
    }

    /// Fixed-width bins.
    pub fn equal_width(bins: usize) -> Result<Self> {
        BinningScheme::new("equal_width", bins)
    }

    /// Equal-count bins.
    pub fn equal_mass(bins: usize) -> Result<Self> {
        BinningScheme::new("equal_mass", bins)
    }

    /// Resolves the configured strategy, re-validating the configuration
    /// (schemes can arrive through deserialization).
    pub fn resolve(&self) -> Result<&'static dyn BinningStrategy> {
        if self.bins == 0 {
            return Err(Error::InvalidBinning("bins must be >= 1".into()));
        }
        binning_strategy(&self.kind)
    }
}

impl Default for BinningScheme {
    /// 15 fixed-width bins — small enough to keep per-bin counts meaningful
    /// at moderate sample sizes, fine enough to localize miscalibration.
    fn default() -> Self {
        BinningScheme {
            kind: "equal_width".to_string(),
            bins: 15,
        }
    }
}

// ---------------------------------------------------------------------------
// Reliability tables and ECE
// ---------------------------------------------------------------------------

/// One reliability bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    /// Lower edge (interval edge for `equal_width`, smallest member
    /// confidence for `equal_mass`).
    pub lower: f64,
    /// Upper edge (interval edge / largest member confidence).
    pub upper: f64,
    /// Records in the bin.
    pub count: usize,
    /// Mean member confidence; `None` for an empty bin.
    pub mean_confidence: Option<f64>,
    /// Fraction of members correct; `None` for an empty bin.
    pub accuracy: Option<f64>,
}

/// A binned confidence-vs-accuracy table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTable {
    /// Bin rows in ascending confidence order.
    pub rows: Vec<BinRow>,
}

impl ReliabilityTable {
    /// Total record count across bins.
    pub fn total_count(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }
}

/// Bins a dataset under the given scheme.
pub fn reliability_table(d: &Dataset, scheme: &BinningScheme) -> Result<ReliabilityTable> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let strategy = scheme.resolve()?;
    Ok(ReliabilityTable {
        rows: strategy.rows(d, scheme.bins),
    })
}

/// Expected calibration error: the count-weighted mean absolute gap between
/// each bin's accuracy and its mean confidence. Empty bins contribute zero.
pub fn ece(d: &Dataset, scheme: &BinningScheme) -> Result<f64> {
    let table = reliability_table(d, scheme)?;
    let n = table.total_count() as f64;
    let mut sum = 0.0;
    for row in &table.rows {
        if let (Some(acc), Some(conf)) = (row.accuracy, row.mean_confidence) {
            sum += row.count as f64 / n * (acc - conf).abs();
        }
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// Candidate-threshold sweep
// ---------------------------------------------------------------------------

/// Deployment statistics at one candidate threshold.
struct SweepPoint {
    threshold: Threshold,
    total_value: f64,
    total_expected: f64,
    accepted: usize,
}

/// Evaluates every candidate threshold (`0.0`, each distinct confidence,
/// `REJECT_ALL`) in ascending order via suffix aggregation — O(n log n)
/// total, rather than O(n) per candidate.
fn sweep(d: &Dataset, cost: &CostModel) -> Vec<SweepPoint> {
    let mut items: Vec<(f64, bool)> = d
        .records()
        .iter()
        .map(|r| (r.confidence, r.correct))
        .collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = items.len();

    // suffix_correct[i] counts correct items at sorted positions >= i, etc.
    let mut suffix_correct = vec![0usize; n + 1];
    let mut suffix_wrong = vec![0usize; n + 1];
    let mut suffix_conf = vec![0.0f64; n + 1];
    for i in (0..n).rev() {
        suffix_correct[i] = suffix_correct[i + 1] + items[i].1 as usize;
        suffix_wrong[i] = suffix_wrong[i + 1] + !items[i].1 as usize;
        suffix_conf[i] = suffix_conf[i + 1] + items[i].0;
    }

    // Candidate thresholds with the sorted position of their first accepted
    // record. Accepting at a distinct confidence c accepts exactly the sorted
    // suffix starting at c's first occurrence.
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    if items[0].0 > 0.0 {
        candidates.push((0.0, 0));
    }
    for i in 0..n {
        if i == 0 || items[i].0 != items[i - 1].0 {
            candidates.push((items[i].0, i));
        }
    }

    let (v, c_d, c_w) = (cost.v(), cost.c_d(), cost.c_w());
    let mut points: Vec<SweepPoint> = candidates
        .into_iter()
        .map(|(t, start)| {
            let correct = suffix_correct[start] as f64;
            let wrong = suffix_wrong[start] as f64;
            let below = start as f64;
            SweepPoint {
                threshold: Threshold::Value(t),
                total_value: correct * v + wrong * c_w + below * c_d,
                total_expected: (v - c_w) * suffix_conf[start]
                    + (correct + wrong) * c_w
                    + below * c_d,
                accepted: n - start,
            }
        })
        .collect();
    points.push(SweepPoint {
        threshold: Threshold::RejectAll,
        total_value: n as f64 * c_d,
        total_expected: n as f64 * c_d,
        accepted: 0,
    });
    points
}

/// The candidate threshold that maximizes realized deployment value, with
/// the mean value it achieves.
///
/// Ties resolve toward the smallest threshold, with `REJECT_ALL` treated as
/// the largest candidate.
pub fn empirical_threshold(d: &Dataset, cost: &CostModel) -> Result<(Threshold, f64)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let points = sweep(d, cost);
    let n = d.len() as f64;
    // Candidates are scanned in ascending order; only a strict improvement
    // moves the incumbent, which implements the smallest-threshold tie-break.
    let mut best = &points[0];
    for p in &points[1..] {
        if p.total_value > best.total_value {
            best = p;
        }
    }
    Ok((best.threshold, best.total_value / n))
}

/// Expected-vs-realized value difference at a threshold:
/// `|mean_expected - mean_value|`.
///
/// Zero means the model's confidences price the gate's outcomes correctly
/// *at this operating point*; on calibrated data the gap is pure sampling
/// error.
pub fn value_gap(d: &Dataset, cost: &CostModel, threshold: Threshold) -> Result<f64> {
    let realized = deployed_value(d, cost, threshold)?;
    let expected = expected_value(d, cost, threshold)?;
    Ok((expected.mean_expected - realized.mean_value).abs())
}

/// Distance between the analytic optimal threshold and the empirically best
/// one, with `REJECT_ALL` sitting at 1.0.
///
/// Grows as miscalibration moves the value-maximizing cutoff away from where
/// the cost model says it should be.
pub fn threshold_divergence(d: &Dataset, cost: &CostModel) -> Result<f64> {
    let analytic = cost.optimal_threshold();
    let (empirical, _) = empirical_threshold(d, cost)?;
    Ok((analytic.divergence_point() - empirical.divergence_point()).abs())
}

/// One row of a value curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// Candidate threshold.
    pub threshold: Threshold,
    /// Mean realized value at this candidate.
    pub deployed_mean_value: f64,
    /// Mean model-expected value at this candidate.
    pub expected_mean_value: f64,
    /// Fraction of records accepted at this candidate.
    pub acceptance_rate: f64,
}

/// Deployment value across every candidate threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueCurve {
    /// Rows in ascending threshold order, `REJECT_ALL` last.
    pub rows: Vec<CurveRow>,
}

/// Evaluates realized value, expected value, and acceptance at every
/// candidate threshold.
pub fn value_curve(d: &Dataset, cost: &CostModel) -> Result<ValueCurve> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.len() as f64;
    let rows = sweep(d, cost)
        .into_iter()
        .map(|p| CurveRow {
            threshold: p.threshold,
            deployed_mean_value: p.total_value / n,
            expected_mean_value: p.total_expected / n,
            acceptance_rate: p.accepted as f64 / n,
        })
        .collect();
    Ok(ValueCurve { rows })
}

// ---------------------------------------------------------------------------
// Combined report
// ---------------------------------------------------------------------------

/// Every calibration metric for one dataset under one cost model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Expected calibration error under `scheme`.
    pub ece: f64,
    /// The binning configuration `ece` was computed with.
    pub scheme: BinningScheme,
    /// Expected-vs-realized gap at the analytic threshold.
    pub value_gap: f64,
    /// The cost model's optimal threshold.
    pub t_analytic: Threshold,
    /// The realized-value-maximizing candidate threshold.
    pub t_empirical: Threshold,
    /// `|t_analytic - t_empirical|` (REJECT_ALL at 1.0).
    pub threshold_divergence: f64,
    /// Mean realized value at `t_analytic`.
    pub value_at_t_analytic: f64,
    /// Mean realized value at `t_empirical`.
    pub value_at_t_empirical: f64,
}

/// Computes the full metric set in one pass.
pub fn full_report(d: &Dataset, cost: &CostModel, scheme: &BinningScheme) -> Result<CalibrationReport> {
    let t_analytic = cost.optimal_threshold();
    let (t_empirical, value_at_t_empirical) = empirical_threshold(d, cost)?;
    Ok(CalibrationReport {
        ece: ece(d, scheme)?,
        scheme: scheme.clone(),
        value_gap: value_gap(d, cost, t_analytic)?,
        t_analytic,
        t_empirical,
        threshold_divergence: (t_analytic.divergence_point() - t_empirical.divergence_point())
            .abs(),
        value_at_t_analytic: deployed_value(d, cost, t_analytic)?.mean_value,
        value_at_t_empirical,
    })
}
