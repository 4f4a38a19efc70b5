//! Deployable rejection policies: fitting, serialization, and evaluation.
//!
//! A *rejector* is the artifact that actually ships: given a prediction
//! record, it answers accept or reject. Three kinds are registered:
//!
//! * `global` — one threshold for every record.
//! * `per_group` — a threshold per group tag, fitted on that group's
//!   records; groups too small to fit reliably fall back to the global
//!   threshold, and records with no tag are rejected outright.
//! * `trusted_subset` — the conservative variant for the regime where some
//!   groups' confidences cannot be taken at face value: only groups whose
//!   reported confidences demonstrably track value (small value gap on the
//!   fit data) are ever accepted, each with its own fitted threshold.
//!   Everything else — untrusted groups, unseen groups, untagged records —
//!   is rejected.
//!
//! Every fitted policy round-trips through [`RejectorSpec`], a plain data
//! description (JSON-friendly, ordered maps so serialization is
//! deterministic). [`RejectorSpec::compile`] turns a spec back into a
//! decision procedure via the kind registry, so a spec written by hand or
//! by an older fit is as good as a fresh one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, Dataset, PredictionRecord, Threshold, ValueReport};
use crate::error::{Error, Result};
use crate::metrics::{empirical_threshold, value_gap};

// ---------------------------------------------------------------------------
// Decisions and specs
// ---------------------------------------------------------------------------

/// The output of a rejection policy for one record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Act on the model's prediction.
    Accept,
    /// Route the item down the default path.
    Reject,
}

/// Registry kind of the single-threshold policy.
pub const KIND_GLOBAL: &str = "global";
/// Registry kind of the per-group policy.
pub const KIND_PER_GROUP: &str = "per_group";
/// Registry kind of the trusted-subset policy.
pub const KIND_TRUSTED_SUBSET: &str = "trusted_subset";

/// Default value-gap tolerance for trusting a group.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default minimum records for a group to get its own threshold.
pub const DEFAULT_MIN_GROUP_SIZE: usize = 30;

/// How a spec was fitted, carried along for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    /// Records in the fit dataset.
    pub dataset_size: usize,
    /// Value-gap tolerance used by a trusted-subset fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Group-size floor used by grouped fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_group_size: Option<usize>,
    /// True when a trusted-subset fit found no trustworthy group at all —
    /// the policy is then reject-everything, which is worth flagging.
    #[serde(default)]
    pub degenerate: bool,
}

impl FitMetadata {
    fn global(dataset_size: usize) -> Self {
        FitMetadata {
            dataset_size,
            epsilon: None,
            min_group_size: None,
            degenerate: false,
        }
    }
}

/// Serializable description of a rejection policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectorSpec {
    /// Policy kind; must match a registry entry (see [`policy_kinds`]).
    pub kind: String,
    /// The fallback threshold: the only threshold for `global`, the
    /// small/unseen-group fallback for `per_group`, and unused (kept at
    /// reject-all) for `trusted_subset`.
    pub global_threshold: Threshold,
    /// Per-group thresholds, for the grouped kinds.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub group_thresholds: BTreeMap<String, Threshold>,
    /// Groups a trusted-subset policy will accept from.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub trusted_groups: BTreeSet<String>,
    /// Severity ratio of the cost model used to fit, when it had one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_k: Option<f64>,
    /// Fit provenance.
    pub fit_metadata: FitMetadata,
}

impl RejectorSpec {
    /// Compiles the spec into a decision procedure via the kind registry.
    pub fn compile(&self) -> Result<Box<dyn RejectPolicy>> {
        for (kind, builder) in POLICY_REGISTRY {
            if *kind == self.kind {
                return builder(self);
            }
        }
        Err(Error::UnknownStrategy {
            family: "rejector kind",
            name: self.kind.clone(),
            known: policy_kinds().join(", "),
        })
    }

    /// Whether decisions depend on group tags.
    pub fn requires_groups(&self) -> bool {
        self.kind != KIND_GLOBAL
    }
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// A compiled accept/reject rule.
pub trait RejectPolicy: Send + Sync {
    /// Registry kind this policy was built from.
    fn kind(&self) -> &'static str;

    /// The decision for one record.
    fn decide(&self, record: &PredictionRecord) -> Decision;
}

fn gate(threshold: Threshold, confidence: f64) -> Decision {
    if threshold.accepts(confidence) {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

struct GlobalPolicy {
    threshold: Threshold,
}

impl RejectPolicy for GlobalPolicy {
    fn kind(&self) -> &'static str {
        KIND_GLOBAL
    }

    fn decide(&self, record: &PredictionRecord) -> Decision {
        gate(self.threshold, record.confidence)
    }
}

struct PerGroupPolicy {
    thresholds: BTreeMap<String, Threshold>,
    fallback: Threshold,
}

impl RejectPolicy for PerGroupPolicy {
    fn kind(&self) -> &'static str {
        KIND_PER_GROUP
    }

    fn decide(&self, record: &PredictionRecord) -> Decision {
        match &record.group {
            // A grouped policy cannot vouch for a record it cannot place.
            None => Decision::Reject,
            Some(g) => {
                let t = self.thresholds.get(g).copied().unwrap_or(self.fallback);
                gate(t, record.confidence)
            }
        }
    }
}

struct TrustedSubsetPolicy {
    /// Thresholds for the trusted groups only.
    thresholds: BTreeMap<String, Threshold>,
}

impl RejectPolicy for TrustedSubsetPolicy {
    fn kind(&self) -> &'static str {
        KIND_TRUSTED_SUBSET
    }

    fn decide(&self, record: &PredictionRecord) -> Decision {
        match &record.group {
            None => Decision::Reject,
            Some(g) => match self.thresholds.get(g) {
                // Untrusted or never-seen groups are rejected outright.
                None => Decision::Reject,
                Some(t) => gate(*t, record.confidence),
            },
        }
    }
}

type PolicyBuilder = fn(&RejectorSpec) -> Result<Box<dyn RejectPolicy>>;

fn build_global(spec: &RejectorSpec) -> Result<Box<dyn RejectPolicy>> {
    Ok(Box::new(GlobalPolicy {
        threshold: spec.global_threshold,
    }))
}

fn build_per_group(spec: &RejectorSpec) -> Result<Box<dyn RejectPolicy>> {
    Ok(Box::new(PerGroupPolicy {
        thresholds: spec.group_thresholds.clone(),
        fallback: spec.global_threshold,
    }))
}

fn build_trusted_subset(spec: &RejectorSpec) -> Result<Box<dyn RejectPolicy>> {
    let thresholds = spec
        .trusted_groups
        .iter()
        .map(|g| {
            let t = spec
                .group_thresholds
                .get(g)
                .copied()
                .unwrap_or(spec.global_threshold);
            (g.clone(), t)
        })
        .collect();
    Ok(Box::new(TrustedSubsetPolicy { thresholds }))
}

/// All registered policy kinds with their builders.
pub const POLICY_REGISTRY: &[(&str, PolicyBuilder)] = &[
    (KIND_GLOBAL, build_global),
    (KIND_PER_GROUP, build_per_group),
    (KIND_TRUSTED_SUBSET, build_trusted_subset),
];

/// Names of every registered policy kind, in registry order.
pub fn policy_kinds() -> Vec<&'static str> {
    POLICY_REGISTRY.iter().map(|(k, _)| *k).collect()
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Record indices per group tag; errors on the first untagged record.
fn group_index(d: &Dataset) -> Result<BTreeMap<String, Vec<usize>>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in d.records().iter().enumerate() {
        match &r.group {
            Some(g) => groups.entry(g.clone()).or_default().push(i),
            None => {
                return Err(Error::GroupingRequired {
                    index: i,
                    id: r.id.clone(),
                })
            }
        }
    }
    Ok(groups)
}

fn subset(d: &Dataset, indices: &[usize]) -> Dataset {
    let records = indices.iter().map(|&i| d.records()[i].clone()).collect();
    Dataset::from_records(records).expect("records were validated by the parent dataset")
}

/// Fits a single-threshold policy: the empirical value-optimal threshold on
/// the whole dataset.
pub fn fit_global(d: &Dataset, cost: &CostModel) -> Result<RejectorSpec> {
    let (threshold, _) = empirical_threshold(d, cost)?;
    Ok(RejectorSpec {
        kind: KIND_GLOBAL.to_string(),
        global_threshold: threshold,
        group_thresholds: BTreeMap::new(),
        trusted_groups: BTreeSet::new(),
        cost_k: cost.severity_ratio(),
        fit_metadata: FitMetadata::global(d.len()),
    })
}

/// Fits a per-group policy.
///
/// Every record must carry a group tag. Groups with at least
/// `min_group_size` records get their own empirically fitted threshold;
/// smaller groups are left out of the map and fall back to the global
/// threshold (fitted on the full dataset) at decision time.
pub fn fit_per_group(
    d: &Dataset,
    cost: &CostModel,
    min_group_size: usize,
) -> Result<RejectorSpec> {
    let groups = group_index(d)?;
    let (fallback, _) = empirical_threshold(d, cost)?;
    let mut group_thresholds = BTreeMap::new();
    for (tag, indices) in &groups {
        if indices.len() >= min_group_size {
            let (t, _) = empirical_threshold(&subset(d, indices), cost)?;
            group_thresholds.insert(tag.clone(), t);
        }
    }
    Ok(RejectorSpec {
        kind: KIND_PER_GROUP.to_string(),
        global_threshold: fallback,
        group_thresholds,
        trusted_groups: BTreeSet::new(),
        cost_k: cost.severity_ratio(),
        fit_metadata: FitMetadata {
            dataset_size: d.len(),
            epsilon: None,
            min_group_size: Some(min_group_size),
            degenerate: false,
        },
    })
}

/// One group's audit row in a [`GroupReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    /// Group tag.
    pub group: String,
    /// Records in the group.
    pub count: usize,
    /// Gap between confidence-implied expected value and realized value at
    /// the analytic threshold, per record; near zero means the reported
    /// confidences can be taken at face value.
    pub value_gap: f64,
    /// The group's empirically best threshold.
    pub best_threshold: Threshold,
    /// Mean value per record at that threshold.
    pub best_mean_value: f64,
    /// Whether the group passed both the gap and the size test.
    pub trusted: bool,
}

/// Per-group calibration audit, rows sorted by group tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// Value-gap tolerance applied.
    pub epsilon: f64,
    /// Group-size floor applied.
    pub min_group_size: usize,
    /// One row per group, lexicographically by tag.
    pub rows: Vec<GroupRow>,
}

impl GroupReport {
    /// Tags of the trusted groups, in row order.
    pub fn trusted_groups(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| r.trusted)
            .map(|r| r.group.as_str())
            .collect()
    }
}

/// Audits every group: a group is trusted when its value gap at the
/// analytic threshold is at most `epsilon` *and* it has at least
/// `min_group_size` records.
///
/// The value gap compares what the group's confidences *promise* the gate
/// will earn at the cost-model's analytic threshold with what it actually
/// earns there — near zero when confidences mean what they say, large when
/// a group's confidences are distorted.
pub fn identify_trusted_subsets(
    d: &Dataset,
    cost: &CostModel,
    epsilon: f64,
    min_group_size: usize,
) -> Result<GroupReport> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be finite and >= 0 (got {epsilon})"
        )));
    }
    let groups = group_index(d)?;
    if groups.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (tag, indices) in &groups {
        let group_data = subset(d, indices);
        let gap = value_gap(&group_data, cost, cost.optimal_threshold())?;
        let (best_threshold, best_mean_value) = empirical_threshold(&group_data, cost)?;
        rows.push(GroupRow {
            group: tag.clone(),
            count: indices.len(),
            value_gap: gap,
            best_threshold,
            best_mean_value,
            trusted: gap <= epsilon && indices.len() >= min_group_size,
        });
    }
    Ok(GroupReport {
        epsilon,
        min_group_size,
        rows,
    })
}

/// Fits a trusted-subset policy: audits the groups with
/// [`identify_trusted_subsets`], then accepts only from the trusted ones,
/// each at its own empirically best threshold.
///
/// When no group earns trust the fit still succeeds — the policy rejects
/// everything — but `fit_metadata.degenerate` is set so callers can warn.
pub fn fit_trusted_subset(
    d: &Dataset,
    cost: &CostModel,
    epsilon: f64,
    min_group_size: usize,
) -> Result<RejectorSpec> {
    let report = identify_trusted_subsets(d, cost, epsilon, min_group_size)?;
    let mut group_thresholds = BTreeMap::new();
    let mut trusted_groups = BTreeSet::new();
    for row in &report.rows {
        if row.trusted {
            trusted_groups.insert(row.group.clone());
            group_thresholds.insert(row.group.clone(), row.best_threshold);
        }
    }
    let degenerate = trusted_groups.is_empty();
    Ok(RejectorSpec {
        kind: KIND_TRUSTED_SUBSET.to_string(),
        // Nothing outside the trusted set is ever accepted.
        global_threshold: Threshold::RejectAll,
        group_thresholds,
        trusted_groups,
        cost_k: cost.severity_ratio(),
        fit_metadata: FitMetadata {
            dataset_size: d.len(),
            epsilon: Some(epsilon),
            min_group_size: Some(min_group_size),
            degenerate,
        },
    })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Deploys a spec over a dataset and scores it under the cost model:
/// accepted records earn `v` or `c_w` by their recorded correctness,
/// rejected records earn `c_d`.
pub fn evaluate(spec: &RejectorSpec, d: &Dataset, cost: &CostModel) -> Result<ValueReport> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let policy = spec.compile()?;
    let mut total = 0.0;
    let mut accepted_correct = 0usize;
    let mut accepted_wrong = 0usize;
    let mut rejected = 0usize;
    for r in d.records() {
        match policy.decide(r) {
            Decision::Reject => {
                rejected += 1;
                total += cost.c_d();
            }
            Decision::Accept => {
                if r.correct {
                    accepted_correct += 1;
                    total += cost.v();
                } else {
                    accepted_wrong += 1;
                    total += cost.c_w();
                }
            }
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
