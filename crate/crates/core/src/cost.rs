//! Value accounting for a classifier deployed behind a rejection gate.
//!
//! The deployment model: each prediction arrives with a confidence in
//! `[0, 1]`. The gate accepts it when the confidence reaches a threshold,
//! otherwise the item falls through to a default path (human review, a
//! fallback system, ...). Every outcome has a business value:
//!
//! * an accepted **correct** prediction earns `v`,
//! * an accepted **wrong** prediction costs `c_w`,
//! * a **rejected** item costs `c_d` (the default path).
//!
//! In the normalized form used throughout the docs, `v = 1`, `c_d = -1`, and
//! `c_w = -k` where `k > 0` scales how much worse a wrong answer is than the
//! default path.
//!
//! Accepting an item with confidence `c` is worth `c·v + (1 - c)·c_w` in
//! expectation, which beats the default path exactly when
//!
//! ```text
//! c > (c_d - c_w) / (v - c_w)        (normalized: (k - 1) / (k + 1))
//! ```
//!
//! so that ratio, clamped to `[0, 1]`, is the value-optimal gate threshold
//! (`optimal_threshold`). [`deployed_value`] scores realized outcomes;
//! [`expected_value`] scores the same gate using the model's own confidences
//! as outcome probabilities. On well-calibrated data the two agree up to
//! sampling error; the gap between them is the basis of the calibration
//! metrics in [`crate::metrics`].

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

/// The three outcome values of a gated deployment.
///
/// Invariants (enforced at construction): `v > c_d` and `c_w < v`. Note that
/// `c_w <= c_d` is *not* required — a deployment may price a wrong answer
/// cheaper than the default path, in which case the optimal threshold clamps
/// to 0 (always accept).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Value of an accepted correct prediction.
    v: f64,
    /// Value (typically negative) of routing an item down the default path.
    c_d: f64,
    /// Value (typically negative) of an accepted wrong prediction.
    c_w: f64,
}

impl CostModel {
    /// General constructor from an explicit value triple.
    pub fn new(v: f64, c_d: f64, c_w: f64) -> Result<Self> {
        if !(v.is_finite() && c_d.is_finite() && c_w.is_finite()) {
            return Err(Error::InvalidCostModel(format!(
                "values must be finite (got v={v}, c_d={c_d}, c_w={c_w})"
            )));
        }
        if v <= c_d {
            return Err(Error::InvalidCostModel(format!(
                "v ({v}) must exceed c_d ({c_d}); otherwise the gate should never accept"
            )));
        }
        if c_w >= v {
            return Err(Error::InvalidCostModel(format!(
                "c_w ({c_w}) must be below v ({v}); otherwise correctness is worthless"
            )));
        }
        Ok(CostModel { v, c_d, c_w })
    }

    /// Normalized constructor: `v = 1`, `c_d = -1`, `c_w = -k`, requiring `k > 0`.
    pub fn from_severity(k: f64) -> Result<Self> {
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::InvalidCostModel(format!(
                "severity k must be finite and > 0 (got {k})"
            )));
        }
        CostModel::new(1.0, -1.0, -k)
    }

    /// Value of an accepted correct prediction.
    pub fn v(&self) -> f64 {
        self.v
    }

    /// Value of the default path.
    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    /// Value of an accepted wrong prediction.
    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    /// Severity ratio `c_w / c_d`; for a normalized model this is exactly `k`.
    ///
    /// `None` when `c_d == 0` (the ratio is meaningless there).
    pub fn severity_ratio(&self) -> Option<f64> {
        if self.c_d == 0.0 {
            None
        } else {
            Some(self.c_w / self.c_d)
        }
    }

    /// The value-optimal gate threshold `(c_d - c_w) / (v - c_w)`, clamped to
    /// `[0, 1]`.
    ///
    /// An item at exactly this confidence is worth `c_d` whether accepted or
    /// rejected, so clamping at 0 means "always accept" is optimal (wrong
    /// answers are no worse than the default path).
    pub fn optimal_threshold(&self) -> Threshold {
        let raw = (self.c_d - self.c_w) / (self.v - self.c_w);
        Threshold::Value(raw.clamp(0.0, 1.0))
    }

    /// Realized value of a single gated prediction.
    pub fn item_value(&self, record: &PredictionRecord, threshold: Threshold) -> f64 {
        if !threshold.accepts(record.confidence) {
            self.c_d
        } else if record.correct {
            self.v
        } else {
            self.c_w
        }
    }

    /// Expected value of gating an item with the given confidence, treating
    /// the confidence as the true probability of correctness.
    pub fn item_expected_value(&self, confidence: f64, threshold: Threshold) -> f64 {
        if !threshold.accepts(confidence) {
            self.c_d
        } else {
            confidence * self.v + (1.0 - confidence) * self.c_w
        }
    }
}

// ---------------------------------------------------------------------------
// Thresholds
// ---------------------------------------------------------------------------

/// A gate threshold: a confidence cutoff in `[0, 1]`, or the sentinel that
/// rejects everything.
///
/// The decision rule is *accept iff confidence >= threshold* (ties accept),
/// so `Value(0.0)` accepts every record — which is why [`Threshold::RejectAll`]
/// exists as a distinct point rather than being spelled as some cutoff above 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// Accept records whose confidence reaches this cutoff.
    Value(f64),
    /// Reject every record, including confidence 1.0.
    RejectAll,
}

impl Threshold {
    /// Validating constructor for a numeric cutoff.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Threshold::Value(value))
        } else {
            Err(Error::InvalidThreshold(value))
        }
    }

    /// The gate decision for one confidence.
    pub fn accepts(&self, confidence: f64) -> bool {
        match *self {
            Threshold::Value(t) => confidence >= t,
            Threshold::RejectAll => false,
        }
    }

    /// The point this threshold occupies when measuring distances between
    /// thresholds: `RejectAll` sits at 1.0, the far end of the scale.
    pub fn divergence_point(&self) -> f64 {
        match *self {
            Threshold::Value(t) => t,
            Threshold::RejectAll => 1.0,
        }
    }

    /// Total order: numeric cutoffs by value, `RejectAll` above all of them.
    pub fn total_cmp(&self, other: &Threshold) -> Ordering {
        match (self, other) {
            (Threshold::RejectAll, Threshold::RejectAll) => Ordering::Equal,
            (Threshold::RejectAll, _) => Ordering::Greater,
            (_, Threshold::RejectAll) => Ordering::Less,
            (Threshold::Value(a), Threshold::Value(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Threshold::Value(t) => write!(f, "{t}"),
            Threshold::RejectAll => write!(f, "REJECT_ALL"),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Threshold::Value(t) => serializer.serialize_f64(t),
            Threshold::RejectAll => serializer.serialize_str("REJECT_ALL"),
        }
    }
}

struct ThresholdVisitor;

impl Visitor<'_> for ThresholdVisitor {
    type Value = Threshold;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number in [0, 1] or the string \"REJECT_ALL\"")
    }

    fn visit_f64<E: de::Error>(self, value: f64) -> std::result::Result<Threshold, E> {
        Threshold::new(value).map_err(|e| E::custom(e.to_string()))
    }

    fn visit_u64<E: de::Error>(self, value: u64) -> std::result::Result<Threshold, E> {
        self.visit_f64(value as f64)
    }

    fn visit_i64<E: de::Error>(self, value: i64) -> std::result::Result<Threshold, E> {
        self.visit_f64(value as f64)
    }

    fn visit_str<E: de::Error>(self, value: &str) -> std::result::Result<Threshold, E> {
        if value == "REJECT_ALL" {
            Ok(Threshold::RejectAll)
        } else {
            Err(E::custom(format!(
                "expected \"REJECT_ALL\" or a number, got {value:?}"
            )))
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_any(ThresholdVisitor)
    }
}

// ---------------------------------------------------------------------------
// Records and datasets
// ---------------------------------------------------------------------------

/// One scored prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    /// Opaque identifier, preserved through every transformation.
    pub id: String,
    /// The model's reported probability of being correct, in `[0, 1]`.
    pub confidence: f64,
    /// Whether the prediction was actually correct.
    pub correct: bool,
    /// Optional group tag (segment, source, cohort, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Optional pre-sigmoid score; required only for temperature fitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logit: Option<f64>,
}

impl PredictionRecord {
    /// Convenience constructor for the common id/confidence/correct triple.
    pub fn new(id: impl Into<String>, confidence: f64, correct: bool) -> Self {
        PredictionRecord {
            id: id.into(),
            confidence,
            correct,
            group: None,
            logit: None,
        }
    }
}

/// An immutable collection of [`PredictionRecord`]s with validated confidences.
///
/// Construction checks every confidence (and any logit) so downstream math can
/// assume `[0, 1]` without re-validating. An empty dataset is representable —
/// metric operations reject it at call time with [`Error::EmptyDataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<PredictionRecord>,
}

impl Dataset {
    /// Validates and wraps a record collection.
    pub fn from_records(records: Vec<PredictionRecord>) -> Result<Self> {
        for (index, r) in records.iter().enumerate() {
            if !r.confidence.is_finite() || !(0.0..=1.0).contains(&r.confidence) {
                return Err(Error::ConfidenceOutOfRange {
                    index,
                    confidence: r.confidence,
                });
            }
            if let Some(logit) = r.logit {
                if !logit.is_finite() {
                    return Err(Error::LogitNotFinite { index, logit });
                }
            }
        }
        Ok(Dataset { records })
    }

    /// The validated records.
    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    /// Consumes the dataset, returning its records for transformation.
    pub fn into_records(self) -> Vec<PredictionRecord> {
        self.records
    }

    /// Number of records.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when there are no records.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Fraction of records marked correct; `None` for an empty dataset.
    pub fn accuracy(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let correct = self.records.iter().filter(|r| r.correct).count();
        Some(correct as f64 / self.records.len() as f64)
    }
}

// ---------------------------------------------------------------------------
// Gate accounting
// ---------------------------------------------------------------------------

/// Realized outcome totals for one dataset under one gate threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    /// Sum of per-item realized values.
    pub total_value: f64,
    /// `total_value / n`.
    pub mean_value: f64,
    /// Fraction of records the gate accepted.
    pub acceptance_rate: f64,
    /// Accepted records that were correct.
    pub accepted_correct: usize,
    /// Accepted records that were wrong.
    pub accepted_wrong: usize,
    /// Records routed down the default path.
    pub rejected: usize,
}

/// Model-expected totals for one dataset under one gate threshold, treating
/// each reported confidence as the true probability of correctness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValueReport {
    /// Sum of per-item expected values.
    pub total_expected: f64,
    /// `total_expected / n`.
    pub mean_expected: f64,
    /// Fraction of records below the threshold (1.0 under `RejectAll`).
    pub rho_t: f64,
}

/// Scores realized outcomes: each accepted record contributes `v` or `c_w`
/// according to its recorded correctness, each rejected record contributes
/// `c_d`.
pub fn deployed_value(d: &Dataset, cost: &CostModel, threshold: Threshold) -> Result<ValueReport> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut accepted_correct = 0usize;
    let mut accepted_wrong = 0usize;
    let mut rejected = 0usize;
    for r in d.records() {
        total += cost.item_value(r, threshold);
        if !threshold.accepts(r.confidence) {
            rejected += 1;
        } else if r.correct {
            accepted_correct += 1;
        } else {
            accepted_wrong += 1;
        }
    }
    let n = d.len() as f64;
    Ok(ValueReport {
        total_value: total,
        mean_value: total / n,
        acceptance_rate: (accepted_correct + accepted_wrong) as f64 / n,
        accepted_correct,
        accepted_wrong,
        rejected,
    })
}

/// Scores the gate against the model's own confidences: each accepted record
/// contributes `c·v + (1 - c)·c_w`, each rejected record contributes `c_d`.
pub fn expected_value(
    d: &Dataset,
    cost: &CostModel,
    threshold: Threshold,
) -> Result<ExpectedValueReport> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut below = 0usize;
    for r in d.records() {
        total += cost.item_expected_value(r.confidence, threshold);
        if !threshold.accepts(r.confidence) {
            below += 1;
        }
    }
    let n = d.len() as f64;
    Ok(ExpectedValueReport {
        total_expected: total,
        mean_expected: total / n,
        rho_t: below as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsupport::{d4, k3};

    // -- CostModel construction ---------------------------------------------

    #[test]
    fn from_severity_normalizes() {
        let m = k3();
        assert_eq!(m.v(), 1.0);
        assert_eq!(m.c_d(), -1.0);
        assert_eq!(m.c_w(), -3.0);
    }

    #[test]
    fn severity_round_trips() {
        for k in [0.25, 0.5, 1.0, 3.0, 9.0, 123.456] {
            let m = CostModel::from_severity(k).unwrap();
            assert!((m.severity_ratio().unwrap() - k).abs() <= 1e-12);
        }
    }

    #[test]
    fn invalid_severity_rejected() {
        for k in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(CostModel::from_severity(k).is_err(), "k={k} should fail");
        }
    }

    #[test]
    fn general_constructor_checks_ordering() {
        // v must beat the default path.
        assert!(CostModel::new(-1.0, -1.0, -3.0).is_err());
        assert!(CostModel::new(-2.0, -1.0, -3.0).is_err());
        // Correctness must beat being wrong.
        assert!(CostModel::new(1.0, -1.0, 1.0).is_err());
        assert!(CostModel::new(1.0, -1.0, 2.0).is_err());
        // c_w > c_d is allowed (wrong answers cheaper than the default path).
        let m = CostModel::new(1.0, -1.0, -0.5).unwrap();
        assert_eq!(m.c_w(), -0.5);
    }

    #[test]
    fn severity_ratio_undefined_for_zero_default() {
        let m = CostModel::new(1.0, 0.0, -1.0).unwrap();
        assert_eq!(m.severity_ratio(), None);
    }

    // -- Optimal threshold --------------------------------------------------

    #[test]
    fn optimal_threshold_normalized_cases() {
        // (k - 1) / (k + 1): k=3 -> 0.5, k=1 -> 0, k=9 -> 0.8.
        let t = |k: f64| CostModel::from_severity(k).unwrap().optimal_threshold();
        assert_eq!(t(3.0), Threshold::Value(0.5));
        assert_eq!(t(1.0), Threshold::Value(0.0));
        assert_eq!(t(9.0), Threshold::Value(0.8));
    }

    #[test]
    fn optimal_threshold_clamps_at_zero() {
        // k = 0.5: raw (k-1)/(k+1) = -1/3, so clamp to 0 (always accept).
        let m = CostModel::from_severity(0.5).unwrap();
        assert_eq!(m.optimal_threshold(), Threshold::Value(0.0));
    }

    #[test]
    fn optimal_threshold_general_triple() {
        // (c_d - c_w) / (v - c_w) = (-1 - -3) / (2 - -3) = 2/5.
        let m = CostModel::new(2.0, -1.0, -3.0).unwrap();
        assert_eq!(m.optimal_threshold(), Threshold::Value(0.4));
    }

    #[test]
    fn indifference_at_unclamped_optimum() {
        // At the unclamped optimal threshold, accepting is worth exactly c_d.
        for k in [1.5, 2.0, 3.0, 9.0] {
            let m = CostModel::from_severity(k).unwrap();
            let t = m.optimal_threshold();
            let at = t.divergence_point();
            let accept_value = m.item_expected_value(at, Threshold::Value(0.0));
            assert!(
                (accept_value - m.c_d()).abs() < 1e-12,
                "k={k}: {accept_value} vs {}",
                m.c_d()
            );
        }
    }

    // -- Threshold semantics ------------------------------------------------

    #[test]
    fn tie_accepts() {
        let t = Threshold::new(0.5).unwrap();
        assert!(t.accepts(0.5));
        assert!(t.accepts(0.50000001));
        assert!(!t.accepts(0.49999999));
    }

    #[test]
    fn reject_all_rejects_certainty() {
        assert!(!Threshold::RejectAll.accepts(1.0));
        assert!(!Threshold::RejectAll.accepts(0.0));
    }

    #[test]
    fn zero_threshold_accepts_everything() {
        let t = Threshold::new(0.0).unwrap();
        assert!(t.accepts(0.0));
        assert!(t.accepts(1.0));
    }

    #[test]
    fn threshold_bounds_validated() {
        assert!(Threshold::new(-0.1).is_err());
        assert!(Threshold::new(1.1).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
        assert!(Threshold::new(1.0).is_ok());
    }

    #[test]
    fn threshold_ordering_puts_reject_all_last() {
        let mut ts = vec![
            Threshold::RejectAll,
            Threshold::Value(0.7),
            Threshold::Value(0.0),
        ];
        ts.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(
            ts,
            vec![
                Threshold::Value(0.0),
                Threshold::Value(0.7),
                Threshold::RejectAll
            ]
        );
    }

    #[test]
    fn threshold_serde_forms() {
        let v = serde_json::to_string(&Threshold::Value(0.7)).unwrap();
        assert_eq!(v, "0.7");
        let r = serde_json::to_string(&Threshold::RejectAll).unwrap();
        assert_eq!(r, "\"REJECT_ALL\"");
        assert_eq!(
            serde_json::from_str::<Threshold>("0.7").unwrap(),
            Threshold::Value(0.7)
        );
        assert_eq!(
            serde_json::from_str::<Threshold>("0").unwrap(),
            Threshold::Value(0.0)
        );
        assert_eq!(
            serde_json::from_str::<Threshold>("\"REJECT_ALL\"").unwrap(),
            Threshold::RejectAll
        );
        assert!(serde_json::from_str::<Threshold>("1.5").is_err());
        assert!(serde_json::from_str::<Threshold>("\"sometimes\"").is_err());
    }

    // -- Dataset validation -------------------------------------------------

    #[test]
    fn dataset_rejects_bad_confidence() {
        let err = Dataset::from_records(vec![
            PredictionRecord::new("a", 0.5, true),
            PredictionRecord::new("b", 1.2, false),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("record 1"), "{err}");
    }

    #[test]
    fn dataset_rejects_nonfinite_logit() {
        let mut r = PredictionRecord::new("a", 0.5, true);
        r.logit = Some(f64::INFINITY);
        assert!(Dataset::from_records(vec![r]).is_err());
    }

    #[test]
    fn accuracy_counts_correct_fraction() {
        assert_eq!(d4().accuracy(), Some(0.5));
        assert_eq!(Dataset::from_records(vec![]).unwrap().accuracy(), None);
    }

    // -- Item-level values --------------------------------------------------

    #[test]
    fn item_value_cases() {
        let m = k3();
        let t = Threshold::Value(0.5);
        assert_eq!(m.item_value(&PredictionRecord::new("x", 0.9, true), t), 1.0);
        assert_eq!(
            m.item_value(&PredictionRecord::new("x", 0.9, false), t),
            -3.0
        );
        assert_eq!(
            m.item_value(&PredictionRecord::new("x", 0.2, true), t),
            -1.0
        );
        // Tie accepts.
        assert_eq!(m.item_value(&PredictionRecord::new("x", 0.5, true), t), 1.0);
        // RejectAll rejects even certainty.
        assert_eq!(
            m.item_value(&PredictionRecord::new("x", 1.0, true), Threshold::RejectAll),
            -1.0
        );
    }

    #[test]
    fn item_expected_value_cases() {
        let m = k3();
        let t = Threshold::Value(0.5);
        // 0.9 * 4 - 3 = 0.6
        assert!((m.item_expected_value(0.9, t) - 0.6).abs() < 1e-12);
        // Below threshold: c_d.
        assert_eq!(m.item_expected_value(0.2, t), -1.0);
        // At the boundary the accepted expectation equals c_d exactly.
        assert!((m.item_expected_value(0.5, t) - -1.0).abs() < 1e-12);
    }

    // -- Dataset-level accounting -------------------------------------------

    #[test]
    fn deployed_value_reference_dataset() {
        // k=3, t=0.5 over d4: +1 (0.9 correct) - 3 (0.6 wrong) + 1 (0.7
        // correct) - 1 (0.2 rejected) = -2.
        let report = deployed_value(&d4(), &k3(), Threshold::Value(0.5)).unwrap();
        assert_eq!(report.total_value, -2.0);
        assert_eq!(report.mean_value, -0.5);
        assert_eq!(report.acceptance_rate, 0.75);
        assert_eq!(report.accepted_correct, 2);
        assert_eq!(report.accepted_wrong, 1);
        assert_eq!(report.rejected, 1);
    }

    #[test]
    fn deployed_value_reject_all() {
        let report = deployed_value(&d4(), &k3(), Threshold::RejectAll).unwrap();
        assert_eq!(report.total_value, -4.0);
        assert_eq!(report.acceptance_rate, 0.0);
        assert_eq!(report.rejected, 4);
    }

    #[test]
    fn deployed_value_single_confident_record() {
        let d = Dataset::from_records(vec![PredictionRecord::new("a", 1.0, true)]).unwrap();
        let report = deployed_value(&d, &k3(), Threshold::Value(0.0)).unwrap();
        assert_eq!(report.total_value, 1.0);
        assert_eq!(report.acceptance_rate, 1.0);
    }

    #[test]
    fn deployed_value_empty_dataset_errors() {
        let d = Dataset::from_records(vec![]).unwrap();
        let err = deployed_value(&d, &k3(), Threshold::Value(0.5)).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn expected_value_reference_dataset() {
        // 0.6 - 0.6 - 0.2 - 1 = -1.2; one of four records below 0.5.
        let report = expected_value(&d4(), &k3(), Threshold::Value(0.5)).unwrap();
        assert!((report.total_expected - -1.2).abs() < 1e-12);
        assert!((report.mean_expected - -0.3).abs() < 1e-12);
        assert_eq!(report.rho_t, 0.25);
    }

    #[test]
    fn expected_value_all_certain() {
        let d = Dataset::from_records(vec![
            PredictionRecord::new("a", 1.0, true),
            PredictionRecord::new("b", 1.0, false),
        ])
        .unwrap();
        let report = expected_value(&d, &k3(), Threshold::Value(0.5)).unwrap();
        assert_eq!(report.mean_expected, 1.0);
        assert_eq!(report.rho_t, 0.0);
    }

    #[test]
    fn expected_value_reject_all() {
        let report = expected_value(&d4(), &k3(), Threshold::RejectAll).unwrap();
        assert_eq!(report.mean_expected, -1.0);
        assert_eq!(report.rho_t, 1.0);
    }

    #[test]
    fn expected_value_empty_dataset_errors() {
        let d = Dataset::from_records(vec![]).unwrap();
        assert!(expected_value(&d, &k3(), Threshold::RejectAll).is_err());
    }
}
