//! Deterministic synthetic-data generation and Monte Carlo deployment
//! simulation.
//!
//! Everything here is driven by [`CounterRng`], a counter-based generator:
//! each random draw is a pure function of `(seed, stream, slot)`, with one
//! stream per item index. That makes generation order-independent and
//! bit-reproducible across platforms — the same config always yields the
//! same dataset, byte for byte.
//!
//! Three generators are registered by name (see [`build_generator`]):
//!
//! * `calibrated` — confidence `c ~ Beta(alpha, beta)`, correctness
//!   `~ Bernoulli(c)`. The reported confidence *is* the true probability.
//! * `distorted` — the true probability `p` is drawn as above and decides
//!   correctness, but the *reported* confidence is pushed through a logit
//!   warp `sigmoid(gamma * logit(p) + delta)`. `gamma > 1` sharpens
//!   (overconfidence at the extremes), `delta` shifts (global over/under
//!   confidence). The warped logit is stored on the record.
//! * `rare_high_confidence` — with probability `hc` an item reports
//!   `high_conf` (default 0.99); otherwise its confidence is a Beta draw
//!   rescaled into `[0, 0.5]`. Correctness is `Bernoulli(confidence)`, so
//!   the model is calibrated but almost always unsure — the regime where a
//!   gated deployment beats its dismal top-line accuracy.
//!
//! Beta sampling inverts the regularized incomplete beta CDF to an absolute
//! tolerance of 1e-10 (bracketed Newton), rather than using rejection
//! sampling, so each item consumes a fixed number of counter draws.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::calibrate::{logit, sigmoid};
use crate::cost::{CostModel, Dataset, PredictionRecord, Threshold};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Counter-based RNG
// ---------------------------------------------------------------------------

/// Weyl increment used by the splitmix64 state advance.
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output function applied to an advanced state word.
fn splitmix(state: u64) -> u64 {
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A counter-based pseudo-random generator.
///
/// `draw(stream, slot)` is a pure function of the seed and its two indices:
/// two chained splitmix64 rounds, the first keying the stream off the seed,
/// the second indexing the slot within the stream. Item `i` of a generated
/// dataset reads only stream `i`, so datasets are reproducible regardless of
/// evaluation order, and growing `n` never perturbs earlier items.
///
/// This is a simulation-grade generator (64-bit avalanche mixing), not a
/// cryptographic one.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    /// A generator rooted at the given seed.
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    /// The raw 64-bit draw for `(stream, slot)`.
    pub fn draw(&self, stream: u64, slot: u64) -> u64 {
        let stream_key = splitmix(
            self.seed
                .wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN)),
        );
        splitmix(stream_key.wrapping_add(slot.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// A uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn unit(&self, stream: u64, slot: u64) -> f64 {
        (self.draw(stream, slot) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// A child generator for an independent purpose (e.g. one per Monte
    /// Carlo replication), keyed far away from the item streams.
    pub fn derive(&self, label: u64) -> CounterRng {
        CounterRng {
            seed: self.draw(u64::MAX, label),
        }
    }
}

// ---------------------------------------------------------------------------
// Beta sampling
// ---------------------------------------------------------------------------

/// Tolerance on the CDF residual of the inverted quantile.
const BETA_INV_TOL: f64 = 1e-10;

/// Inverts the regularized incomplete beta CDF: returns `x` with
/// `|I_x(alpha, beta) - u| <= BETA_INV_TOL` (or `x` exact to one ULP when
/// the CDF's own rounding prevents that).
///
/// Newton steps use the Beta density as the derivative, with a maintained
/// bisection bracket as the safety net. Converging on the CDF residual
/// rather than on `x` keeps the inversion accurate where the density blows
/// up (shape parameters below 1 near the edges).
pub fn beta_inverse_cdf(alpha: f64, beta: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let ln_norm = ln_beta(alpha, beta);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = alpha / (alpha + beta);
    for _ in 0..500 {
        let f = beta_reg(alpha, beta, x) - u;
        if f.abs() <= BETA_INV_TOL {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // The bracket has collapsed to adjacent floats.
            return mid;
        }
        let density = ((alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_norm).exp();
        let newton = x - f / density;
        x = if density.is_finite() && density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            mid
        };
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Shared configuration for the synthetic generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of records to generate (>= 1).
    pub n: usize,
    /// Beta shape `alpha` (> 0) of the confidence / true-probability draw.
    pub alpha: f64,
    /// Beta shape `beta` (> 0).
    pub beta: f64,
    /// Root seed for the counter-based generator.
    pub seed: u64,
    /// Rare-high-confidence mixture weight in `[0, 1]`; only the
    /// `rare_high_confidence` generator reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc: Option<f64>,
    /// Confidence reported by the rare slice.
    pub high_conf: f64,
}

impl SyntheticConfig {
    /// Config with the default 0.99 rare-slice confidence and no rare slice.
    pub fn new(n: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        SyntheticConfig {
            n,
            alpha,
            beta,
            seed,
            hc: None,
            high_conf: 0.99,
        }
    }

    /// Adds a rare high-confidence slice.
    pub fn with_rare_slice(mut self, hc: f64, high_conf: f64) -> Self {
        self.hc = Some(hc);
        self.high_conf = high_conf;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.beta.is_finite() && self.beta > 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "Beta shapes must be finite and > 0 (got alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if let Some(hc) = self.hc {
            if !hc.is_finite() || !(0.0..=1.0).contains(&hc) {
                return Err(Error::InvalidConfig(format!(
                    "hc must lie in [0, 1] (got {hc})"
                )));
            }
        }
        if !self.high_conf.is_finite() || !(0.0..=1.0).contains(&self.high_conf) {
            return Err(Error::InvalidConfig(format!(
                "high_conf must lie in [0, 1] (got {})",
                self.high_conf
            )));
        }
        Ok(())
    }
}

/// Logit-affine confidence warp for the `distorted` generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    /// Logit slope (> 0): above 1 sharpens confidences toward the extremes.
    pub gamma: f64,
    /// Logit intercept: positive shifts every confidence upward.
    pub delta: f64,
}

impl Default for DistortionParams {
    /// The identity warp.
    fn default() -> Self {
        DistortionParams {
            gamma: 1.0,
            delta: 0.0,
        }
    }
}

impl DistortionParams {
    fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "distortion gamma must be finite and > 0 (got {})",
                self.gamma
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "distortion delta must be finite (got {})",
                self.delta
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Probability floor keeping the logit of a true probability finite.
const P_CLAMP: f64 = 1e-9;

/// A named synthetic-data source.
///
/// Implementations are registered in [`GENERATOR_REGISTRY`] and selected at
/// runtime by name through [`build_generator`].
pub trait Generator: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    /// Generates a dataset from the config, deterministically in
    /// `cfg.seed`.
    fn generate(&self, cfg: &SyntheticConfig) -> Result<Dataset>;
}

/// `c ~ Beta(alpha, beta)`, `correct ~ Bernoulli(c)`.
pub struct CalibratedGenerator;

/// Calibrated truth with a logit-warped reported confidence.
pub struct DistortedGenerator {
    /// The warp applied to reported confidences.
    pub distortion: DistortionParams,
}

/// Mostly-unsure model with a rare calibrated high-confidence slice.
pub struct RareHighConfidenceGenerator;

impl Generator for CalibratedGenerator {
    fn name(&self) -> &'static str {
        "calibrated"
    }

    fn generate(&self, cfg: &SyntheticConfig) -> Result<Dataset> {
        cfg.validate()?;
        let rng = CounterRng::new(cfg.seed);
        let records = (0..cfg.n)
            .map(|i| {
                let stream = i as u64;
                let confidence = beta_inverse_cdf(cfg.alpha, cfg.beta, rng.unit(stream, 0));
                let correct = rng.unit(stream, 1) < confidence;
                PredictionRecord::new(format!("s{i}"), confidence, correct)
            })
            .collect();
        Dataset::from_records(records)
    }
}

impl Generator for DistortedGenerator {
    fn name(&self) -> &'static str {
        "distorted"
    }

    fn generate(&self, cfg: &SyntheticConfig) -> Result<Dataset> {
        cfg.validate()?;
        self.distortion.validate()?;
        let rng = CounterRng::new(cfg.seed);
        let records = (0..cfg.n)
            .map(|i| {
                let stream = i as u64;
                let p = beta_inverse_cdf(cfg.alpha, cfg.beta, rng.unit(stream, 0));
                let correct = rng.unit(stream, 1) < p;
                let warped_logit =
                    self.distortion.gamma * logit(p.clamp(P_CLAMP, 1.0 - P_CLAMP))
                        + self.distortion.delta;
                let mut r =
                    PredictionRecord::new(format!("s{i}"), sigmoid(warped_logit), correct);
                r.logit = Some(warped_logit);
                r
            })
            .collect();
        Dataset::from_records(records)
    }
}

impl Generator for RareHighConfidenceGenerator {
    fn name(&self) -> &'static str {
        "rare_high_confidence"
    }

    fn generate(&self, cfg: &SyntheticConfig) -> Result<Dataset> {
        cfg.validate()?;
        let hc = cfg
            .hc
            .ok_or_else(|| Error::InvalidConfig("hc missing: rare_high_confidence needs it".into()))?;
        let rng = CounterRng::new(cfg.seed);
        let records = (0..cfg.n)
            .map(|i| {
                let stream = i as u64;
                let confidence = if rng.unit(stream, 0) < hc {
                    cfg.high_conf
                } else {
                    0.5 * beta_inverse_cdf(cfg.alpha, cfg.beta, rng.unit(stream, 1))
                };
                let correct = rng.unit(stream, 2) < confidence;
                PredictionRecord::new(format!("s{i}"), confidence, correct)
            })
            .collect();
        Dataset::from_records(records)
    }
}

type GeneratorBuilder = fn(Option<DistortionParams>) -> Result<Box<dyn Generator>>;

fn build_calibrated(distortion: Option<DistortionParams>) -> Result<Box<dyn Generator>> {
    if distortion.is_some() {
        return Err(Error::InvalidConfig(
            "generator `calibrated` takes no distortion parameters".into(),
        ));
    }
    Ok(Box::new(CalibratedGenerator))
}

fn build_distorted(distortion: Option<DistortionParams>) -> Result<Box<dyn Generator>> {
    let distortion = distortion.unwrap_or_default();
    distortion.validate()?;
    Ok(Box::new(DistortedGenerator { distortion }))
}

fn build_rare(distortion: Option<DistortionParams>) -> Result<Box<dyn Generator>> {
    if distortion.is_some() {
        return Err(Error::InvalidConfig(
            "generator `rare_high_confidence` takes no distortion parameters".into(),
        ));
    }
    Ok(Box::new(RareHighConfidenceGenerator))
}

/// All registered generators, keyed by [`Generator::name`].
pub const GENERATOR_REGISTRY: &[(&str, GeneratorBuilder)] = &[
    ("calibrated", build_calibrated),
    ("distorted", build_distorted),
    ("rare_high_confidence", build_rare),
];

/// Instantiates a generator by registry name.
pub fn build_generator(
    name: &str,
    distortion: Option<DistortionParams>,
) -> Result<Box<dyn Generator>> {
    for (key, builder) in GENERATOR_REGISTRY {
        if *key == name {
            return builder(distortion);
        }
    }
    Err(Error::UnknownStrategy {
        family: "generator",
        name: name.to_string(),
        known: generator_names().join(", "),
    })
}

/// Names of every registered generator, in registry order.
pub fn generator_names() -> Vec<&'static str> {
    GENERATOR_REGISTRY.iter().map(|(k, _)| *k).collect()
}

/// Convenience for [`CalibratedGenerator`].
pub fn generate_calibrated(cfg: &SyntheticConfig) -> Result<Dataset> {
    CalibratedGenerator.generate(cfg)
}

/// Convenience for [`DistortedGenerator`].
pub fn generate_distorted(cfg: &SyntheticConfig, distortion: DistortionParams) -> Result<Dataset> {
    DistortedGenerator { distortion }.generate(cfg)
}

/// Convenience for [`RareHighConfidenceGenerator`].
pub fn generate_rare_high_confidence(cfg: &SyntheticConfig) -> Result<Dataset> {
    RareHighConfidenceGenerator.generate(cfg)
}

// ---------------------------------------------------------------------------
// Monte Carlo workflow
// ---------------------------------------------------------------------------

/// Replicated deployment totals for one dataset under one gate threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// Records per replication.
    pub items: usize,
    /// Number of replications.
    pub replications: usize,
    /// The gate threshold simulated.
    pub threshold: Threshold,
    /// Mean of the per-replication total values.
    pub mean_total_value: f64,
    /// Population standard deviation of the per-replication totals.
    pub std_total_value: f64,
    /// Total value of routing every item down the default path (`n * c_d`).
    pub baseline_value: f64,
    /// `mean_total_value - baseline_value`.
    pub mean_advantage: f64,
    /// Every replication's total value, in replication order.
    pub per_replication_total: Vec<f64>,
}

/// Simulates deploying the gate over the dataset.
///
/// Each replication walks the records: a rejected item scores `c_d`; an
/// accepted item scores `v` or `c_w` according to a fresh correctness draw
/// `~ Bernoulli(confidence)` (stream = item index within the replication's
/// derived generator). With `resample = false` the recorded correctness is
/// used instead, so one replication reproduces [`deployed_value`] exactly.
pub fn run_workflow(
    d: &Dataset,
    cost: &CostModel,
    threshold: Threshold,
    replications: usize,
    seed: u64,
    resample: bool,
) -> Result<SimulationResult> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    let root = CounterRng::new(seed);
    let mut totals = Vec::with_capacity(replications);
    for rep in 0..replications {
        let rng = root.derive(rep as u64);
        let mut total = 0.0;
        for (i, r) in d.records().iter().enumerate() {
            if !threshold.accepts(r.confidence) {
                total += cost.c_d();
                continue;
            }
            let correct = if resample {
                rng.unit(i as u64, 0) < r.confidence
            } else {
                r.correct
            };
            total += if correct { cost.v() } else { cost.c_w() };
        }
        totals.push(total);
    }
    let reps = replications as f64;
    let mean = totals.iter().sum::<f64>() / reps;
    let variance = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / reps;
    let baseline = d.len() as f64 * cost.c_d();
    Ok(SimulationResult {
        items: d.len(),
        replications,
        threshold,
        mean_total_value: mean,
        std_total_value: variance.sqrt(),
        baseline_value: baseline,
        mean_advantage: mean - baseline,
        per_replication_total: totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::deployed_value;
    use crate::metrics::{reliability_table, BinningScheme};
    use crate::testsupport::{d4, k3};

    // -- CounterRng ----------------------------------------------------------

    #[test]
    fn rng_is_a_pure_function_of_indices() {
        let a = CounterRng::new(42);
        let b = CounterRng::new(42);
        assert_eq!(a.draw(3, 7), b.draw(3, 7));
        assert_eq!(a.unit(1000, 2), b.unit(1000, 2));
    }

    #[test]
    fn rng_streams_and_slots_differ() {
        let rng = CounterRng::new(7);
        assert_ne!(rng.draw(0, 0), rng.draw(0, 1));
        assert_ne!(rng.draw(0, 0), rng.draw(1, 0));
        assert_ne!(CounterRng::new(7).draw(5, 5), CounterRng::new(8).draw(5, 5));
    }

    #[test]
    fn rng_units_are_uniform_ish() {
        let rng = CounterRng::new(123);
        let n = 20_000u64;
        let mean: f64 = (0..n).map(|i| rng.unit(i, 0)).sum::<f64>() / n as f64;
        // se = 1/sqrt(12 n) ~ 0.002; allow 5 se.
        assert!((mean - 0.5).abs() < 0.011, "{mean}");
        assert!((0..n).all(|i| (0.0..1.0).contains(&rng.unit(i, 0))));
    }

    #[test]
    fn rng_derive_decouples() {
        let rng = CounterRng::new(9);
        let a = rng.derive(0);
        let b = rng.derive(1);
        assert_ne!(a.draw(0, 0), b.draw(0, 0));
        // Deterministic too.
        assert_eq!(a.draw(0, 0), CounterRng::new(9).derive(0).draw(0, 0));
    }

    // -- Beta inversion ------------------------------------------------------

    #[test]
    fn beta_inverse_round_trips_through_cdf() {
        for &(a, b) in &[(2.0, 2.0), (2.0, 5.0), (0.5, 0.5), (1.0, 1.0), (7.5, 1.2)] {
            for &u in &[1e-6, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0 - 1e-6] {
                let x = beta_inverse_cdf(a, b, u);
                let back = beta_reg(a, b, x);
                assert!(
                    (back - u).abs() < 1e-8,
                    "Beta({a},{b}) at u={u}: x={x}, I_x={back}"
                );
            }
        }
    }

    #[test]
    fn beta_inverse_uniform_case_is_identity() {
        for &u in &[0.1, 0.5, 0.9] {
            assert!((beta_inverse_cdf(1.0, 1.0, u) - u).abs() < 1e-9);
        }
    }

    #[test]
    fn beta_inverse_edges() {
        assert_eq!(beta_inverse_cdf(2.0, 2.0, 0.0), 0.0);
        assert_eq!(beta_inverse_cdf(2.0, 2.0, 1.0), 1.0);
    }

    #[test]
    fn beta_inverse_monotone() {
        let mut last = 0.0;
        for i in 1..100 {
            let x = beta_inverse_cdf(2.0, 5.0, i as f64 / 100.0);
            assert!(x >= last);
            last = x;
        }
    }

    // -- Generators ----------------------------------------------------------

    #[test]
    fn calibrated_is_deterministic() {
        let cfg = SyntheticConfig::new(500, 2.0, 2.0, 77);
        let a = generate_calibrated(&cfg).unwrap();
        let b = generate_calibrated(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_calibrated(&SyntheticConfig::new(500, 2.0, 2.0, 78)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn calibrated_matches_beta_mean() {
        let cfg = SyntheticConfig::new(20_000, 2.0, 6.0, 11);
        let d = generate_calibrated(&cfg).unwrap();
        let mean: f64 =
            d.records().iter().map(|r| r.confidence).sum::<f64>() / d.len() as f64;
        // Beta(2,6) mean 0.25, sd ~ 0.144, se ~ 0.001; allow 5 se.
        assert!((mean - 0.25).abs() < 0.006, "{mean}");
    }

    #[test]
    fn calibrated_reliability_is_tight() {
        let cfg = SyntheticConfig::new(100_000, 2.0, 2.0, 5);
        let d = generate_calibrated(&cfg).unwrap();
        let table = reliability_table(&d, &BinningScheme::equal_mass(20).unwrap()).unwrap();
        for row in &table.rows {
            let gap = (row.accuracy.unwrap() - row.mean_confidence.unwrap()).abs();
            assert!(gap <= 0.03, "bin [{}, {}] gap {gap}", row.lower, row.upper);
        }
    }

    #[test]
    fn config_validation() {
        assert!(generate_calibrated(&SyntheticConfig::new(0, 2.0, 2.0, 1)).is_err());
        assert!(generate_calibrated(&SyntheticConfig::new(10, 0.0, 2.0, 1)).is_err());
        assert!(generate_calibrated(&SyntheticConfig::new(10, 2.0, -1.0, 1)).is_err());
        let bad_hc = SyntheticConfig::new(10, 2.0, 2.0, 1).with_rare_slice(1.5, 0.99);
        assert!(generate_rare_high_confidence(&bad_hc).is_err());
    }

    #[test]
    fn identity_distortion_reproduces_calibrated() {
        let cfg = SyntheticConfig::new(2_000, 2.0, 2.0, 21);
        let cal = generate_calibrated(&cfg).unwrap();
        let dist = generate_distorted(&cfg, DistortionParams::default()).unwrap();
        for (a, b) in cal.records().iter().zip(dist.records()) {
            assert!((a.confidence - b.confidence).abs() <= 1e-9);
            assert_eq!(a.correct, b.correct);
        }
    }

    #[test]
    fn distorted_stores_warped_logit() {
        let cfg = SyntheticConfig::new(200, 2.0, 2.0, 3);
        let dist = DistortionParams {
            gamma: 2.0,
            delta: 0.5,
        };
        let d = generate_distorted(&cfg, dist).unwrap();
        for r in d.records() {
            let l = r.logit.expect("distorted records carry logits");
            assert!((sigmoid(l) - r.confidence).abs() <= 1e-12);
        }
    }

    #[test]
    fn positive_delta_inflates_confidence() {
        let cfg = SyntheticConfig::new(4_000, 2.0, 2.0, 13);
        let cal = generate_calibrated(&cfg).unwrap();
        let dist = generate_distorted(
            &cfg,
            DistortionParams {
                gamma: 1.0,
                delta: 2.0,
            },
        )
        .unwrap();
        let median = |d: &Dataset| {
            let mut cs: Vec<f64> = d.records().iter().map(|r| r.confidence).collect();
            cs.sort_by(f64::total_cmp);
            cs[cs.len() / 2]
        };
        assert!(median(&dist) > median(&cal) + 0.1);
    }

    #[test]
    fn distortion_validation() {
        let cfg = SyntheticConfig::new(10, 2.0, 2.0, 1);
        assert!(generate_distorted(
            &cfg,
            DistortionParams {
                gamma: 0.0,
                delta: 0.0
            }
        )
        .is_err());
        assert!(generate_distorted(
            &cfg,
            DistortionParams {
                gamma: 1.0,
                delta: f64::NAN
            }
        )
        .is_err());
    }

    #[test]
    fn rare_requires_hc() {
        let err =
            generate_rare_high_confidence(&SyntheticConfig::new(10, 2.0, 2.0, 1)).unwrap_err();
        assert!(err.to_string().contains("hc missing"), "{err}");
    }

    #[test]
    fn rare_with_zero_hc_stays_below_half() {
        let cfg = SyntheticConfig::new(2_000, 2.0, 2.0, 17).with_rare_slice(0.0, 0.99);
        let d = generate_rare_high_confidence(&cfg).unwrap();
        assert!(d.records().iter().all(|r| r.confidence < 0.5));
        // At the k=3 threshold of 0.5 everything is rejected.
        let report = deployed_value(&d, &k3(), Threshold::Value(0.5)).unwrap();
        assert_eq!(report.total_value, -(d.len() as f64));
    }

    #[test]
    fn rare_slice_value_matches_mixture_formula() {
        // Mean item value at t=0.5, k=3: -(1 - hc) + hc * (0.99 * 4 - 3)
        // = -0.9 + 0.096 = -0.804 at hc = 0.1.
        let cfg = SyntheticConfig::new(20_000, 2.0, 2.0, 29).with_rare_slice(0.1, 0.99);
        let d = generate_rare_high_confidence(&cfg).unwrap();
        let report = deployed_value(&d, &k3(), Threshold::Value(0.5)).unwrap();
        assert!(
            (report.mean_value - -0.804).abs() < 0.02,
            "{}",
            report.mean_value
        );
    }

    #[test]
    fn generator_registry_lookup() {
        assert_eq!(
            generator_names(),
            vec!["calibrated", "distorted", "rare_high_confidence"]
        );
        assert!(build_generator("calibrated", None).is_ok());
        assert!(build_generator("distorted", None).is_ok());
        assert!(build_generator("calibrated", Some(DistortionParams::default())).is_err());
        let err = build_generator("gaussian", None).err().expect("unknown generator");
        assert!(err.to_string().contains("calibrated"), "{err}");
    }

    // -- Workflow ------------------------------------------------------------

    #[test]
    fn reject_all_workflow_is_exactly_baseline() {
        let result = run_workflow(&d4(), &k3(), Threshold::RejectAll, 5, 1, true).unwrap();
        assert_eq!(result.mean_total_value, result.baseline_value);
        assert_eq!(result.std_total_value, 0.0);
        assert_eq!(result.mean_advantage, 0.0);
    }

    #[test]
    fn single_replication_without_resampling_reduces_to_deployed_value() {
        let d = d4();
        let m = k3();
        let t = Threshold::Value(0.5);
        let result = run_workflow(&d, &m, t, 1, 99, false).unwrap();
        let direct = deployed_value(&d, &m, t).unwrap();
        assert_eq!(result.mean_total_value, direct.total_value);
        assert_eq!(result.std_total_value, 0.0);
    }

    #[test]
    fn workflow_is_deterministic() {
        let d = generate_calibrated(&SyntheticConfig::new(500, 2.0, 2.0, 4)).unwrap();
        let a = run_workflow(&d, &k3(), Threshold::Value(0.5), 7, 123, true).unwrap();
        let b = run_workflow(&d, &k3(), Threshold::Value(0.5), 7, 123, true).unwrap();
        assert_eq!(a, b);
        let c = run_workflow(&d, &k3(), Threshold::Value(0.5), 7, 124, true).unwrap();
        assert_ne!(a.per_replication_total, c.per_replication_total);
    }

    #[test]
    fn workflow_validates_inputs() {
        let empty = Dataset::from_records(vec![]).unwrap();
        assert!(run_workflow(&empty, &k3(), Threshold::RejectAll, 1, 0, true).is_err());
        assert!(run_workflow(&d4(), &k3(), Threshold::RejectAll, 0, 0, true).is_err());
    }

    #[test]
    fn calibrated_beta22_value_matches_closed_form() {
        // E[value] at k=3, t=0.5 over Beta(2,2):
        // P(c < 0.5) * -1 + ∫_{0.5}^{1} (4c - 3) 6c(1-c) dc = -0.5 - 0.125
        // = -0.625.
        let d = generate_calibrated(&SyntheticConfig::new(100_000, 2.0, 2.0, 31)).unwrap();
        let result = run_workflow(&d, &k3(), Threshold::Value(0.5), 20, 7, true).unwrap();
        let mean_per_item = result.mean_total_value / result.items as f64;
        assert!((mean_per_item - -0.625).abs() <= 0.02, "{mean_per_item}");
    }
}
