//! Temperature scaling: post-hoc recalibration of reported confidences.
//!
//! A single temperature `tau > 0` rescales the model's logits: the
//! recalibrated confidence of a record with logit `z` is
//! `sigmoid(z / tau)`. `tau > 1` softens overconfident models, `tau < 1`
//! sharpens underconfident ones, and `tau = 1` is the identity. The fit
//! minimizes mean negative log-likelihood (NLL) of the recorded correctness,
//! searched by golden-section over `ln tau` — NLL is unimodal in the
//! temperature for this one-parameter family, so no gradient machinery is
//! needed.
//!
//! Because the map `z -> sigmoid(z / tau)` is strictly increasing, applying
//! a temperature never reorders records by confidence: any gate threshold
//! has an exactly equivalent threshold on the recalibrated scale. What
//! recalibration changes is *where* the value-optimal threshold lands and
//! how trustworthy the reported confidences are as probabilities.

use serde::{Deserialize, Serialize};

use crate::cost::Dataset;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Elementary maps
// ---------------------------------------------------------------------------

/// The logistic function `1 / (1 + e^-x)`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The inverse of [`sigmoid`]: `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// ---------------------------------------------------------------------------
// Negative log-likelihood
// ---------------------------------------------------------------------------

/// Probability clamp applied before taking logs, so certain-but-wrong
/// records yield a large finite penalty instead of an infinite one.
const NLL_CLAMP: f64 = 1e-12;

fn nll_of(p: f64, correct: bool) -> f64 {
    let p = p.clamp(NLL_CLAMP, 1.0 - NLL_CLAMP);
    if correct {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean negative log-likelihood of the recorded correctness under the
/// recorded confidences.
pub fn nll(d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = d
        .records()
        .iter()
        .map(|r| nll_of(r.confidence, r.correct))
        .sum();
    Ok(total / d.len() as f64)
}

/// Mean NLL after rescaling every logit by `1 / tau`.
///
/// Requires logits on every record (same contract as [`fit_temperature`]).
pub fn nll_at_temperature(d: &Dataset, tau: f64) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (i, r) in d.records().iter().enumerate() {
        let z = r.logit.ok_or_else(|| Error::LogitsRequired {
            index: i,
            id: r.id.clone(),
        })?;
        total += nll_of(sigmoid(z / tau), r.correct);
    }
    Ok(total / d.len() as f64)
}

// ---------------------------------------------------------------------------
// Golden-section search
// ---------------------------------------------------------------------------

/// `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes a unimodal function on `[a, b]`; returns `(x, f(x), iters)`.
fn golden_section_minimize(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iters: usize,
) -> (f64, f64, usize) {
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a) > tol && iters < max_iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d);
        }
        iters += 1;
    }
    let x = 0.5 * (a + b);
    (x, f(x), iters)
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Default search range for the temperature.
pub const TAU_MIN: f64 = 0.05;
/// Upper end of the default search range.
pub const TAU_MAX: f64 = 20.0;
/// Absolute convergence tolerance on `ln tau`.
const LN_TAU_TOL: f64 = 1e-4;
/// Iteration cap for the golden-section search.
const MAX_ITERS: usize = 200;

/// A fitted temperature-scaling model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureModel {
    /// The fitted temperature.
    pub temperature: f64,
    /// Mean NLL of the dataset at the fitted temperature.
    pub fit_nll: f64,
    /// Golden-section iterations performed.
    pub iterations: usize,
}

/// Fits a temperature over the default range `[TAU_MIN, TAU_MAX]`.
///
/// Every record must carry a logit, and the labels must contain at least one
/// correct and one wrong record (otherwise NLL is minimized by running the
/// temperature to a search bound, which says nothing about calibration).
/// The returned model's NLL is never worse than the identity temperature:
/// if the search bracket somehow disfavors `tau = 1`, the identity is
/// returned instead.
pub fn fit_temperature(d: &Dataset) -> Result<TemperatureModel> {
    fit_temperature_with(d, TAU_MIN, TAU_MAX)
}

/// [`fit_temperature`] with an explicit search range `[tau_min, tau_max]`
/// (both positive; must bracket 1 so the identity guard stays meaningful).
pub fn fit_temperature_with(d: &Dataset, tau_min: f64, tau_max: f64) -> Result<TemperatureModel> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(tau_min.is_finite() && tau_max.is_finite() && 0.0 < tau_min && tau_min < tau_max) {
        return Err(Error::InvalidConfig(format!(
            "temperature range must satisfy 0 < tau_min < tau_max (got [{tau_min}, {tau_max}])"
        )));
    }
    if !(tau_min <= 1.0 && 1.0 <= tau_max) {
        return Err(Error::InvalidConfig(format!(
            "temperature range must bracket 1 (got [{tau_min}, {tau_max}])"
        )));
    }
    for (i, r) in d.records().iter().enumerate() {
        if r.logit.is_none() {
            return Err(Error::LogitsRequired {
                index: i,
                id: r.id.clone(),
            });
        }
    }
    let any_correct = d.records().iter().any(|r| r.correct);
    let any_wrong = d.records().iter().any(|r| !r.correct);
    if !any_correct {
        return Err(Error::DegenerateLabels("all-wrong"));
    }
    if !any_wrong {
        return Err(Error::DegenerateLabels("all-correct"));
    }

    let objective = |ln_tau: f64| {
        nll_at_temperature(d, ln_tau.exp()).expect("logits checked above")
    };
    let (ln_tau, fit_nll, iterations) =
        golden_section_minimize(objective, tau_min.ln(), tau_max.ln(), LN_TAU_TOL, MAX_ITERS);
    let identity_nll = objective(0.0);
    if identity_nll < fit_nll {
        // Numerical guard: never hand back a model worse than doing nothing.
        return Ok(TemperatureModel {
            temperature: 1.0,
            fit_nll: identity_nll,
            iterations,
        });
    }
    Ok(TemperatureModel {
        temperature: ln_tau.exp(),
        fit_nll,
        iterations,
    })
}

/// Rewrites every confidence as `sigmoid(logit / tau)`.
///
/// Ids, correctness, groups, and the stored logits are untouched; only the
/// confidence field changes. Errors if any record lacks a logit.
pub fn apply_temperature(d: &Dataset, model: &TemperatureModel) -> Result<Dataset> {
    let mut records = Vec::with_capacity(d.len());
    for (i, r) in d.records().iter().enumerate() {
        let z = r.logit.ok_or_else(|| Error::LogitsRequired {
            index: i,
            id: r.id.clone(),
        })?;
        let mut out = r.clone();
        out.confidence = sigmoid(z / model.temperature);
        records.push(out);
    }
    Dataset::from_records(records)
}

/// Before/after summary of a recalibration, for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationSummary {
    /// Mean NLL of the dataset as loaded.
    pub nll_before: f64,
    /// Mean NLL at the fitted temperature.
    pub nll_after: f64,
    /// Value gap (|expected − realized| at the analytic threshold) before.
    pub value_gap_before: f64,
    /// Value gap after recalibration.
    pub value_gap_after: f64,
}
