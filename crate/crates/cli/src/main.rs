//! `reject-gate`: evaluate and optimize a classifier deployed behind a
//! confidence-threshold rejection gate.
//!
//! Machine-readable artifacts (reports, curves, specs, decisions) go to
//! stdout, or to `--output` when given; diagnostics go to stderr. Exit
//! codes are a stable contract for scripting: 0 success, 1 data/runtime
//! error, 2 usage error.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use reject_gate::calibrate::{apply_temperature, fit_temperature, nll, RecalibrationSummary};
use reject_gate::cost::{deployed_value, expected_value, CostModel, Dataset, Threshold};
use reject_gate::dataio::{
    curve_to_csv, load_dataset_with, load_rejector, render_report, rejector_to_json,
    save_rejector, write_curve, write_dataset, write_report, DataFormat, InputProvenance,
    LoadOptions, LoadedDataset, ReportDocument, ReportFormat,
};
use reject_gate::error::Error;
use reject_gate::metrics::{empirical_threshold, full_report, value_curve, value_gap, BinningScheme};
use reject_gate::rejector::{
    evaluate, fit_global, fit_per_group, fit_trusted_subset, identify_trusted_subsets, Decision,
    RejectorSpec, DEFAULT_EPSILON, DEFAULT_MIN_GROUP_SIZE,
};
use reject_gate::simulate::{build_generator, run_workflow, DistortionParams, SyntheticConfig};
use serde::Serialize;
use serde_json::json;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 for errors caused by flag values, 1 for data/runtime failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidCostModel(_)
            | Error::InvalidThreshold(_)
            | Error::InvalidConfig(_)
            | Error::InvalidBinning(_)
            | Error::UnknownStrategy { .. },
        ) => 2,
        _ => 1,
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Threshold(args) => cmd_threshold(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Reject(cmd) => match cmd {
            RejectCmd::Fit(args) => cmd_reject_fit(args),
            RejectCmd::FitPerGroup(args) => cmd_reject_fit_per_group(args),
            RejectCmd::Trust(args) => cmd_reject_trust(args),
            RejectCmd::Apply(args) => cmd_reject_apply(args),
            RejectCmd::Eval(args) => cmd_reject_eval(args),
        },
        Command::Simulate(args) => cmd_simulate(args),
    }
}

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "reject-gate",
    version,
    about = "Evaluate and optimize a classifier behind a confidence-threshold rejection gate",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the analytic rejection threshold for a cost model
    Threshold(ThresholdCmd),
    /// Analyze a dataset: calibration, value, and threshold diagnostics
    Analyze(AnalyzeCmd),
    /// Emit deployed/expected value at every candidate threshold as CSV
    Sweep(SweepCmd),
    /// Fit temperature scaling on logits and summarize the improvement
    Calibrate(CalibrateCmd),
    /// Fit, audit, apply, and evaluate rejection policies
    #[command(subcommand)]
    Reject(RejectCmd),
    /// Generate synthetic data and Monte Carlo a gated deployment
    Simulate(SimulateCmd),
}

/// Cost model flags: either a severity ratio for the normalized model or
/// an explicit value triple.
#[derive(Args, Debug)]
struct CostArgs {
    /// Severity ratio k for the normalized cost model (v=1, c_d=-1, c_w=-k)
    #[arg(long, default_value_t = 3.0, help_heading = "Cost model")]
    k: f64,
    /// Value of an accepted correct answer (with --cd and --cw)
    #[arg(long, conflicts_with = "k", allow_negative_numbers = true, help_heading = "Cost model")]
    v: Option<f64>,
    /// Value of a rejected item (with --v and --cw)
    #[arg(long, conflicts_with = "k", allow_negative_numbers = true, help_heading = "Cost model")]
    cd: Option<f64>,
    /// Value of an accepted wrong answer (with --v and --cd)
    #[arg(long, conflicts_with = "k", allow_negative_numbers = true, help_heading = "Cost model")]
    cw: Option<f64>,
}

impl CostArgs {
    fn model(&self) -> Result<CostModel, Error> {
        match (self.v, self.cd, self.cw) {
            (None, None, None) => CostModel::from_severity(self.k),
            (Some(v), Some(cd), Some(cw)) => CostModel::new(v, cd, cw),
            _ => Err(Error::InvalidConfig(
                "--v, --cd, and --cw must be given together".into(),
            )),
        }
    }
}

/// How the gate threshold is chosen.
#[derive(Clone, Copy, Debug)]
enum ThresholdMode {
    /// The analytic optimum of the cost model.
    Auto,
    /// The empirically best threshold on the input data.
    Fit,
    /// A fixed confidence cutoff.
    Fixed(f64),
}

impl FromStr for ThresholdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<ThresholdMode, String> {
        match s {
            "auto" => Ok(ThresholdMode::Auto),
            "fit" => Ok(ThresholdMode::Fit),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && (0.0..=1.0).contains(x))
                .map(ThresholdMode::Fixed)
                .ok_or_else(|| {
                    format!("expected `auto`, `fit`, or a decimal in [0, 1], got `{other}`")
                }),
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Auto => write!(f, "auto"),
            ThresholdMode::Fit => write!(f, "fit"),
            ThresholdMode::Fixed(x) => write!(f, "{x}"),
        }
    }
}

fn resolve_threshold(
    mode: ThresholdMode,
    cost: &CostModel,
    d: &Dataset,
) -> anyhow::Result<Threshold> {
    Ok(match mode {
        ThresholdMode::Auto => cost.optimal_threshold(),
        ThresholdMode::Fixed(x) => Threshold::Value(x),
        ThresholdMode::Fit => empirical_threshold(d, cost)?.0,
    })
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Dataset file (.csv, .jsonl, .ndjson)
    #[arg(long, value_name = "PATH", help_heading = "Input")]
    input: PathBuf,
    /// Input format override (inferred from the extension by default)
    #[arg(long, value_name = "csv|jsonl", help_heading = "Input")]
    input_format: Option<DataFormat>,
    /// Column (CSV) or key (JSONL) carrying group tags [default: group]
    #[arg(long, value_name = "NAME", help_heading = "Input")]
    group_col: Option<String>,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<LoadedDataset> {
        let options = LoadOptions {
            format: self.input_format,
            group_column: self.group_col.clone(),
        };
        load_dataset_with(&self.input, &options)
            .with_context(|| format!("failed to load {}", self.input.display()))
    }
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Write the artifact here instead of stdout
    #[arg(long, value_name = "PATH", help_heading = "Output")]
    output: Option<PathBuf>,
    /// Report rendering
    #[arg(
        long,
        default_value = "json",
        value_name = "json|markdown",
        help_heading = "Output"
    )]
    format: ReportFormat,
    /// Omit the timestamp so identical runs emit identical bytes
    #[arg(long, help_heading = "Output")]
    deterministic: bool,
}

impl ReportArgs {
    fn emit(&self, doc: &ReportDocument) -> anyhow::Result<()> {
        match &self.output {
            Some(path) => write_report(doc, path, self.format)?,
            None => print!("{}", render_report(doc, self.format)),
        }
        Ok(())
    }
}

fn cost_parameters(cost: &CostModel) -> serde_json::Value {
    json!({
        "v": cost.v(),
        "c_d": cost.c_d(),
        "c_w": cost.c_w(),
        "severity_ratio": cost.severity_ratio(),
    })
}

fn provenance_of(loaded: &LoadedDataset) -> InputProvenance {
    InputProvenance {
        path: loaded.path.clone(),
        sha256: loaded.sha256.clone(),
    }
}

// ---------------------------------------------------------------------------
// threshold
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ThresholdCmd {
    #[command(flatten)]
    cost: CostArgs,
}

fn cmd_threshold(args: ThresholdCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    println!("{}", cost.optimal_threshold());
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Args)]
struct AnalyzeCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cost: CostArgs,
    /// Gate threshold: `auto` (analytic), `fit` (empirical), or a decimal
    #[arg(long, default_value = "auto")]
    threshold: ThresholdMode,
    /// Number of reliability bins
    #[arg(long, default_value_t = 15)]
    bins: usize,
    /// Binning scheme: equal_width or equal_mass
    #[arg(long, default_value = "equal_width")]
    scheme: String,
    #[command(flatten)]
    report: ReportArgs,
}

fn cmd_analyze(args: AnalyzeCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let scheme = BinningScheme::new(&args.scheme, args.bins)?;
    let loaded = args.input.load()?;
    let d = &loaded.dataset;
    let threshold = resolve_threshold(args.threshold, &cost, d)?;
    let mut doc = ReportDocument::new(
        json!({
            "command": "analyze",
            "cost": cost_parameters(&cost),
            "threshold_mode": args.threshold.to_string(),
            "threshold": threshold,
            "bins": args.bins,
            "scheme": args.scheme,
        }),
        args.report.deterministic,
    );
    doc.input = Some(provenance_of(&loaded));
    doc.calibration = Some(full_report(d, &cost, &scheme)?);
    doc.deployed = Some(deployed_value(d, &cost, threshold)?);
    doc.expected = Some(expected_value(d, &cost, threshold)?);
    args.report.emit(&doc)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cost: CostArgs,
    /// Write the curve CSV here instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn cmd_sweep(args: SweepCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let loaded = args.input.load()?;
    let curve = value_curve(&loaded.dataset, &cost)?;
    match &args.output {
        Some(path) => write_curve(&curve, path)?,
        None => print!("{}", curve_to_csv(&curve)),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CalibrateCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cost: CostArgs,
    /// Threshold at which the before/after value gap is measured
    #[arg(long, default_value = "auto")]
    threshold: ThresholdMode,
    /// Also write the recalibrated dataset (format by extension)
    #[arg(long, value_name = "PATH")]
    emit_recalibrated: Option<PathBuf>,
    #[command(flatten)]
    report: ReportArgs,
}

fn cmd_calibrate(args: CalibrateCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let loaded = args.input.load()?;
    let d = &loaded.dataset;
    let temp = fit_temperature(d)?;
    let recalibrated = apply_temperature(d, &temp)?;
    let threshold = resolve_threshold(args.threshold, &cost, d)?;
    let summary = RecalibrationSummary {
        nll_before: nll(d)?,
        nll_after: temp.fit_nll,
        value_gap_before: value_gap(d, &cost, threshold)?,
        value_gap_after: value_gap(&recalibrated, &cost, threshold)?,
    };
    if let Some(path) = &args.emit_recalibrated {
        let format = DataFormat::infer(path)?;
        let provenance = format!(
            "recalibrated from {} at temperature {}",
            loaded.path, temp.temperature
        );
        write_dataset(&recalibrated, path, format, Some(&provenance))?;
    }
    let mut doc = ReportDocument::new(
        json!({
            "command": "calibrate",
            "cost": cost_parameters(&cost),
            "threshold_mode": args.threshold.to_string(),
            "threshold": threshold,
        }),
        args.report.deterministic,
    );
    doc.input = Some(provenance_of(&loaded));
    doc.temperature = Some(temp);
    doc.recalibration = Some(summary);
    args.report.emit(&doc)
}

// ---------------------------------------------------------------------------
// reject
// ---------------------------------------------------------------------------

#[derive(Subcommand)]
enum RejectCmd {
    /// Fit a single global threshold
    Fit(RejectFitCmd),
    /// Fit per-group thresholds with a global fallback
    FitPerGroup(RejectFitPerGroupCmd),
    /// Audit per-group trustworthiness and report value gaps
    Trust(RejectTrustCmd),
    /// Apply a saved rejector, emitting one decision row per record
    Apply(RejectApplyCmd),
    /// Evaluate a saved rejector's deployed value on a dataset
    Eval(RejectEvalCmd),
}

fn emit_rejector(spec: &RejectorSpec, output: Option<&PathBuf>) -> anyhow::Result<()> {
    match output {
        Some(path) => save_rejector(spec, path)?,
        None => print!("{}", rejector_to_json(spec)),
    }
    Ok(())
}

#[derive(Args)]
struct RejectFitCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cost: CostArgs,
    /// Write the rejector spec here instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn cmd_reject_fit(args: RejectFitCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let loaded = args.input.load()?;
    let spec = fit_global(&loaded.dataset, &cost)?;
    emit_rejector(&spec, args.output.as_ref())
}

#[derive(Args)]
struct RejectFitPerGroupCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cost: CostArgs,
    /// Smallest group that gets its own threshold
    #[arg(long, default_value_t = DEFAULT_MIN_GROUP_SIZE)]
    min_group_size: usize,
    /// Write the rejector spec here instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn cmd_reject_fit_per_group(args: RejectFitPerGroupCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let loaded = args.input.load()?;
    let spec = fit_per_group(&loaded.dataset, &cost, args.min_group_size)?;
    emit_rejector(&spec, args.output.as_ref())
}

#[derive(Args)]
struct RejectTrustCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cost: CostArgs,
    /// Value-gap tolerance for trusting a group
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Smallest group eligible for trust
    #[arg(long, default_value_t = DEFAULT_MIN_GROUP_SIZE)]
    min_group_size: usize,
    /// Also write a fitted trusted-subset rejector spec
    #[arg(long, value_name = "PATH")]
    spec_out: Option<PathBuf>,
    #[command(flatten)]
    report: ReportArgs,
}

fn cmd_reject_trust(args: RejectTrustCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let loaded = args.input.load()?;
    let d = &loaded.dataset;
    let groups = identify_trusted_subsets(d, &cost, args.epsilon, args.min_group_size)?;
    if let Some(path) = &args.spec_out {
        let spec = fit_trusted_subset(d, &cost, args.epsilon, args.min_group_size)?;
        save_rejector(&spec, path)?;
    }
    let mut doc = ReportDocument::new(
        json!({
            "command": "reject trust",
            "cost": cost_parameters(&cost),
            "epsilon": args.epsilon,
            "min_group_size": args.min_group_size,
        }),
        args.report.deterministic,
    );
    doc.input = Some(provenance_of(&loaded));
    doc.groups = Some(groups);
    args.report.emit(&doc)
}

#[derive(Args)]
struct RejectApplyCmd {
    /// Rejector spec file (from `reject fit`/`fit-per-group`/`trust --spec-out`)
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Write decision rows (JSONL) here instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

/// One emitted decision: the record's identity plus the gate's verdict.
#[derive(Serialize)]
struct DecisionRow<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<&'a str>,
    confidence: f64,
    decision: Decision,
}

fn cmd_reject_apply(args: RejectApplyCmd) -> anyhow::Result<()> {
    let spec = load_rejector(&args.spec)?;
    let policy = spec.compile()?;
    let loaded = args.input.load()?;
    let mut out = String::new();
    for r in loaded.dataset.records() {
        let row = DecisionRow {
            id: &r.id,
            group: r.group.as_deref(),
            confidence: r.confidence,
            decision: policy.decide(r),
        };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    match &args.output {
        Some(path) => std::fs::write(path, &out)
            .map_err(|e| Error::io(path.display().to_string(), e))?,
        None => print!("{out}"),
    }
    Ok(())
}

#[derive(Args)]
struct RejectEvalCmd {
    /// Rejector spec file to evaluate
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    report: ReportArgs,
}

fn cmd_reject_eval(args: RejectEvalCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let spec = load_rejector(&args.spec)?;
    let loaded = args.input.load()?;
    let d = &loaded.dataset;
    let value = evaluate(&spec, d, &cost)?;
    // Grouped policies reject records without a tag; surface how many that hit.
    let untagged = if spec.requires_groups() {
        d.records().iter().filter(|r| r.group.is_none()).count()
    } else {
        0
    };
    let mut doc = ReportDocument::new(
        json!({
            "command": "reject eval",
            "cost": cost_parameters(&cost),
            "spec_path": args.spec.display().to_string(),
            "spec_kind": spec.kind,
            "records_without_group": untagged,
        }),
        args.report.deterministic,
    );
    doc.input = Some(provenance_of(&loaded));
    doc.deployed = Some(value);
    args.report.emit(&doc)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SimulateCmd {
    /// Number of records to generate
    #[arg(long, default_value_t = 10_000, help_heading = "Generator")]
    n: usize,
    /// Beta shape alpha of the confidence distribution
    #[arg(long, default_value_t = 2.0, help_heading = "Generator")]
    alpha: f64,
    /// Beta shape beta of the confidence distribution
    #[arg(long, default_value_t = 2.0, help_heading = "Generator")]
    beta: f64,
    /// RNG seed
    #[arg(long, env = "REJECT_GATE_SEED", default_value_t = 0, help_heading = "Generator")]
    seed: u64,
    /// Generator name (inferred from --gamma/--delta/--hc when omitted)
    #[arg(long, value_name = "NAME", help_heading = "Generator")]
    generator: Option<String>,
    /// Logit-scale sharpening of reported confidences (distorted)
    #[arg(long, allow_negative_numbers = true, help_heading = "Generator")]
    gamma: Option<f64>,
    /// Logit-scale shift of reported confidences (distorted)
    #[arg(long, allow_negative_numbers = true, help_heading = "Generator")]
    delta: Option<f64>,
    /// Fraction of records in the high-confidence slice (rare_high_confidence)
    #[arg(long, help_heading = "Generator")]
    hc: Option<f64>,
    /// Confidence of the rare slice
    #[arg(long, default_value_t = 0.99, requires = "hc", help_heading = "Generator")]
    high_conf: f64,
    #[command(flatten)]
    cost: CostArgs,
    /// Gate threshold: `auto`, `fit`, or a decimal
    #[arg(long, default_value = "auto")]
    threshold: ThresholdMode,
    /// Monte Carlo replications of the deployment
    #[arg(long, default_value_t = 1)]
    replications: usize,
    /// Score accepted items by recorded correctness instead of fresh draws
    #[arg(long)]
    no_resample: bool,
    /// Also write the generated dataset (format by extension)
    #[arg(long, value_name = "PATH")]
    emit_dataset: Option<PathBuf>,
    #[command(flatten)]
    report: ReportArgs,
}

fn cmd_simulate(args: SimulateCmd) -> anyhow::Result<()> {
    let cost = args.cost.model()?;
    let generator_name = match &args.generator {
        Some(name) => name.clone(),
        None if args.hc.is_some() => "rare_high_confidence".to_string(),
        None if args.gamma.is_some() || args.delta.is_some() => "distorted".to_string(),
        None => "calibrated".to_string(),
    };
    let distortion = if args.gamma.is_some() || args.delta.is_some() {
        Some(DistortionParams {
            gamma: args.gamma.unwrap_or(1.0),
            delta: args.delta.unwrap_or(0.0),
        })
    } else {
        None
    };
    let generator = build_generator(&generator_name, distortion)?;
    let mut cfg = SyntheticConfig::new(args.n, args.alpha, args.beta, args.seed);
    if let Some(hc) = args.hc {
        cfg = cfg.with_rare_slice(hc, args.high_conf);
    }
    let d = generator.generate(&cfg)?;
    if let Some(path) = &args.emit_dataset {
        let format = DataFormat::infer(path)?;
        let mut provenance = format!(
            "reject-gate simulate: generator={generator_name} n={} alpha={} beta={} seed={}",
            args.n, args.alpha, args.beta, args.seed
        );
        if let Some(p) = &distortion {
            provenance.push_str(&format!(" gamma={} delta={}", p.gamma, p.delta));
        }
        if let Some(hc) = args.hc {
            provenance.push_str(&format!(" hc={hc} high_conf={}", args.high_conf));
        }
        write_dataset(&d, path, format, Some(&provenance))?;
    }
    let threshold = resolve_threshold(args.threshold, &cost, &d)?;
    let sim = run_workflow(
        &d,
        &cost,
        threshold,
        args.replications,
        args.seed,
        !args.no_resample,
    )?;
    let mut doc = ReportDocument::new(
        json!({
            "command": "simulate",
            "generator": generator_name,
            "n": args.n,
            "alpha": args.alpha,
            "beta": args.beta,
            "seed": args.seed,
            "gamma": args.gamma,
            "delta": args.delta,
            "hc": args.hc,
            "high_conf": args.hc.map(|_| args.high_conf),
            "cost": cost_parameters(&cost),
            "threshold_mode": args.threshold.to_string(),
            "threshold": threshold,
            "replications": args.replications,
            "resample": !args.no_resample,
        }),
        args.report.deterministic,
    );
    doc.simulation = Some(sim);
    args.report.emit(&doc)
}
