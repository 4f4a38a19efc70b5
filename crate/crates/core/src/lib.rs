//! Value-based evaluation and policy construction for classifiers deployed
//! behind a confidence-threshold rejection gate.
//!
//! A gated deployment accepts a prediction when its confidence reaches a
//! threshold and routes it to a default path otherwise. Each outcome has a
//! business value (correct `v`, wrong `c_w`, default path `c_d`), and the
//! right question about a confidence model is not "are its probabilities
//! frequency-matched?" but "how much value does deploying it produce, and is
//! the value-optimal threshold where the cost model says it should be?".
//!
//! The crate is organized around that question:
//!
//! * [`cost`] — cost models, gate thresholds, datasets, and realized /
//!   expected value accounting.
//! * [`metrics`] — ECE and reliability tables (binning-strategy registry),
//!   plus the value-aligned metrics: value gap, empirical threshold, threshold
//!   divergence, value curves.
//! * [`calibrate`] — single-parameter temperature scaling on stored logits.
//! * [`rejector`] — serializable rejection policies (global, per-group,
//!   trusted-subset) behind a name-keyed policy registry.
//! * [`simulate`] — deterministic synthetic-data generators (again a named
//!   registry) and a Monte Carlo deployment workflow.
//! * [`dataio`] — CSV/JSONL dataset ingestion and report / curve / rejector
//!   document emission.

pub mod calibrate;
pub mod cost;
pub mod dataio;
pub mod error;
pub mod metrics;
pub mod rejector;
pub mod simulate;

pub use cost::{
    deployed_value, expected_value, CostModel, Dataset, ExpectedValueReport, PredictionRecord,
    Threshold, ValueReport,
};
pub use error::{Error, Result};
