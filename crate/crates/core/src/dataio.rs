//! File formats: dataset loading/writing, report documents, value-curve
//! CSVs, and rejector persistence.
//!
//! Datasets travel as CSV or JSONL with columns/keys `id`, `confidence`,
//! `correct` (required) and `group`, `logit` (optional; the group column
//! can be renamed via [`LoadOptions`]). Lines starting with `#` are
//! comments in both formats, so written files can carry a provenance
//! header and still round-trip. `correct` accepts exactly `true`, `false`,
//! `1`, `0`. Unknown columns are preserved in
//! [`LoadedDataset::extra_columns`] rather than rejected, and every parse
//! error names the file and 1-based row that caused it.
//!
//! Reports are a single [`ReportDocument`] envelope with optional sections,
//! emitted as pretty JSON or as markdown. The markdown renderer walks the
//! *serialized JSON tree* of the document rather than the typed struct, so
//! every field present in the JSON appears in the markdown by
//! construction. JSON and CSV artifacts carry full-precision floats;
//! markdown rounds to six significant digits for reading.
//!
//! All writes go through a same-directory temp file renamed into place, so
//! a crash never leaves a half-written artifact at the target path.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::calibrate::{RecalibrationSummary, TemperatureModel};
use crate::cost::{Dataset, ExpectedValueReport, PredictionRecord, ValueReport};
use crate::error::{Error, Result};
use crate::metrics::{CalibrationReport, ValueCurve};
use crate::rejector::{GroupReport, RejectorSpec};
use crate::simulate::SimulationResult;

// ---------------------------------------------------------------------------
// Formats and options
// ---------------------------------------------------------------------------

/// On-disk dataset encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    /// Comma-separated values with a header row.
    Csv,
    /// One JSON object per line.
    Jsonl,
}

impl DataFormat {
    /// Infers the format from a path's extension (`.csv`, `.jsonl`,
    /// `.ndjson`).
    pub fn infer(path: &Path) -> Result<DataFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(DataFormat::Csv),
            Some("jsonl") | Some("ndjson") => Ok(DataFormat::Jsonl),
            other => Err(Error::InvalidConfig(format!(
                "cannot infer data format from extension {:?} of {}; expected .csv or .jsonl",
                other.unwrap_or(""),
                path.display()
            ))),
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<DataFormat> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "jsonl" | "ndjson" => Ok(DataFormat::Jsonl),
            other => Err(Error::InvalidConfig(format!(
                "unknown data format `{other}`; expected csv or jsonl"
            ))),
        }
    }
}

/// Report rendering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// Pretty-printed JSON, full float precision.
    Json,
    /// Human-readable markdown, six significant digits.
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<ReportFormat> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidConfig(format!(
                "unknown report format `{other}`; expected json or markdown"
            ))),
        }
    }
}

/// Knobs for [`load_dataset_with`].
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Explicit format; inferred from the extension when `None`.
    pub format: Option<DataFormat>,
    /// Column/key to read group tags from (default `group`).
    pub group_column: Option<String>,
}

/// A dataset plus provenance of the file it came from.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    /// The validated records.
    pub dataset: Dataset,
    /// The path the data was read from, as given.
    pub path: String,
    /// Lowercase hex SHA-256 of the raw file bytes.
    pub sha256: String,
    /// Columns (CSV) or keys (JSONL) present in the file but not consumed.
    pub extra_columns: Vec<String>,
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

fn parse_correct_text(s: &str) -> Option<bool> {
    match s {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

fn check_confidence(c: f64) -> std::result::Result<f64, String> {
    if c.is_finite() && (0.0..=1.0).contains(&c) {
        Ok(c)
    } else {
        Err(format!("confidence {c} outside [0, 1]"))
    }
}

/// Loads a dataset, inferring the format from the extension.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadedDataset> {
    load_dataset_with(path, &LoadOptions::default())
}

/// Loads a dataset with explicit options.
pub fn load_dataset_with(path: impl AsRef<Path>, options: &LoadOptions) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let format = match options.format {
        Some(f) => f,
        None => DataFormat::infer(path)?,
    };
    let bytes = std::fs::read(path).map_err(|e| Error::io(&path_str, e))?;
    let sha256 = sha256_hex(&bytes);
    let group_column = options.group_column.as_deref().unwrap_or("group");
    let (records, extra_columns) = match format {
        DataFormat::Csv => parse_csv(&bytes, &path_str, group_column)?,
        DataFormat::Jsonl => parse_jsonl(&bytes, &path_str, group_column)?,
    };
    Ok(LoadedDataset {
        dataset: Dataset::from_records(records)?,
        path: path_str,
        sha256,
        extra_columns,
    })
}

fn parse_csv(
    bytes: &[u8],
    path: &str,
    group_column: &str,
) -> Result<(Vec<PredictionRecord>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, &e))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let id_idx = find("id").ok_or_else(|| missing_column(path, "id"))?;
    let conf_idx = find("confidence").ok_or_else(|| missing_column(path, "confidence"))?;
    let correct_idx = find("correct").ok_or_else(|| missing_column(path, "correct"))?;
    let group_idx = find(group_column);
    let logit_idx = find("logit");
    let consumed: Vec<usize> = [Some(id_idx), Some(conf_idx), Some(correct_idx), group_idx, logit_idx]
        .into_iter()
        .flatten()
        .collect();
    let extra_columns = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !consumed.contains(i))
        .map(|(_, h)| h.to_string())
        .collect();

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, &e))?;
        let line = row
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(i + 2);
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let parse_err = |message: String| Error::Parse {
            path: path.to_string(),
            row: line,
            message,
        };
        let confidence = field(conf_idx)
            .parse::<f64>()
            .map_err(|_| parse_err(format!("invalid confidence {:?}", field(conf_idx))))
            .and_then(|c| check_confidence(c).map_err(parse_err))?;
        let correct = parse_correct_text(field(correct_idx)).ok_or_else(|| {
            parse_err(format!(
                "invalid correct value {:?}; expected true, false, 1, or 0",
                field(correct_idx)
            ))
        })?;
        let mut record = PredictionRecord::new(field(id_idx), confidence, correct);
        if let Some(gi) = group_idx {
            let g = field(gi);
            if !g.is_empty() {
                record.group = Some(g.to_string());
            }
        }
        if let Some(li) = logit_idx {
            let l = field(li);
            if !l.is_empty() {
                record.logit = Some(
                    l.parse::<f64>()
                        .map_err(|_| parse_err(format!("invalid logit {l:?}")))?,
                );
            }
        }
        records.push(record);
    }
    Ok((records, extra_columns))
}

fn parse_jsonl(
    bytes: &[u8],
    path: &str,
    group_column: &str,
) -> Result<(Vec<PredictionRecord>, Vec<String>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_string(),
        row: 0,
        message: format!("file is not valid UTF-8: {e}"),
    })?;
    let known = ["id", "confidence", "correct", "logit", group_column];
    let mut records = Vec::new();
    let mut extra: BTreeSet<String> = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_string(),
            row,
            message,
        };
        let value: Value =
            serde_json::from_str(trimmed).map_err(|e| parse_err(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err("expected a JSON object".to_string()))?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| parse_err("missing or non-string key `id`".to_string()))?;
        let confidence = obj
            .get("confidence")
            .and_then(Value::as_f64)
            .ok_or_else(|| parse_err("missing or non-numeric key `confidence`".to_string()))
            .and_then(|c| check_confidence(c).map_err(parse_err))?;
        let correct = match obj.get("correct") {
            Some(Value::Bool(b)) => *b,
            Some(Value::Number(n)) if n.as_f64() == Some(1.0) => true,
            Some(Value::Number(n)) if n.as_f64() == Some(0.0) => false,
            Some(Value::String(s)) if parse_correct_text(s).is_some() => {
                parse_correct_text(s).unwrap()
            }
            _ => {
                return Err(parse_err(
                    "missing or invalid key `correct`; expected true, false, 1, or 0"
                        .to_string(),
                ))
            }
        };
        let mut record = PredictionRecord::new(id, confidence, correct);
        match obj.get(group_column) {
            None | Some(Value::Null) => {}
            Some(Value::String(s)) if s.is_empty() => {}
            Some(Value::String(s)) => record.group = Some(s.clone()),
            Some(_) => return Err(parse_err(format!("non-string group key `{group_column}`"))),
        }
        match obj.get("logit") {
            None | Some(Value::Null) => {}
            Some(Value::Number(n)) => record.logit = n.as_f64(),
            Some(_) => return Err(parse_err("non-numeric key `logit`".to_string())),
        }
        for key in obj.keys() {
            if !known.contains(&key.as_str()) {
                extra.insert(key.clone());
            }
        }
        records.push(record);
    }
    Ok((records, extra.into_iter().collect()))
}

fn csv_error(path: &str, e: &csv::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        row: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: e.to_string(),
    }
}

fn missing_column(path: &str, column: &str) -> Error {
    Error::MissingColumn {
        path: path.to_string(),
        column: column.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Dataset writing
// ---------------------------------------------------------------------------

/// Writes a dataset, optionally preceded by a `#`-comment provenance line
/// (newlines in it are flattened to keep the comment a single line).
pub fn write_dataset(
    d: &Dataset,
    path: impl AsRef<Path>,
    format: DataFormat,
    provenance: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    if let Some(p) = provenance {
        let flat = p.replace(['\n', '\r'], " ");
        bytes.extend_from_slice(format!("# {flat}\n").as_bytes());
    }
    match format {
        DataFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut bytes);
            w.write_record(["id", "confidence", "correct", "group", "logit"])
                .map_err(|e| csv_error(&path.display().to_string(), &e))?;
            for r in d.records() {
                w.write_record([
                    r.id.as_str(),
                    &r.confidence.to_string(),
                    if r.correct { "true" } else { "false" },
                    r.group.as_deref().unwrap_or(""),
                    &r.logit.map(|l| l.to_string()).unwrap_or_default(),
                ])
                .map_err(|e| csv_error(&path.display().to_string(), &e))?;
            }
            w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
            drop(w);
        }
        DataFormat::Jsonl => {
            for r in d.records() {
                let line = serde_json::to_string(r).expect("records serialize");
                bytes.extend_from_slice(line.as_bytes());
                bytes.push(b'\n');
            }
        }
    }
    atomic_write(path, &bytes)
}

/// Writes bytes via a same-directory temp file renamed into place.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let path_str = path.display().to_string();
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(&path_str, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(&path_str, e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(&path_str, e.error))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Report documents
// ---------------------------------------------------------------------------

/// Version of the report JSON layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Where a report's input data came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputProvenance {
    /// Path as given on the command line.
    pub path: String,
    /// SHA-256 of the raw input bytes.
    pub sha256: String,
}

/// The single envelope every report is emitted in. Sections are optional;
/// a command fills in the ones it computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    /// Layout version ([`REPORT_SCHEMA_VERSION`]).
    pub schema_version: u32,
    /// Version of the library that wrote the report.
    pub tool_version: String,
    /// Unix seconds at generation; omitted in deterministic mode so equal
    /// runs produce byte-identical reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    /// Input data provenance, when the run read a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputProvenance>,
    /// Echo of the run's parameters (cost model, threshold mode, seeds, ...).
    pub parameters: Value,
    /// Calibration analysis section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationReport>,
    /// Realized deployment value section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deployed: Option<ValueReport>,
    /// Confidence-implied expected value section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<ExpectedValueReport>,
    /// Fitted temperature section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<TemperatureModel>,
    /// Before/after recalibration comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recalibration: Option<RecalibrationSummary>,
    /// Per-group trust audit section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupReport>,
    /// Monte Carlo simulation section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationResult>,
}

impl ReportDocument {
    /// An empty report carrying the given parameter echo. `deterministic`
    /// suppresses the timestamp.
    pub fn new(parameters: Value, deterministic: bool) -> Self {
        let generated_at_unix = if deterministic {
            None
        } else {
            Some(
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .unwrap_or_default()
                    .as_secs(),
            )
        };
        ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at_unix,
            input: None,
            parameters,
            calibration: None,
            deployed: None,
            expected: None,
            temperature: None,
            recalibration: None,
            groups: None,
            simulation: None,
        }
    }
}

/// Pretty JSON rendering, trailing newline included.
pub fn report_to_json(doc: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}

/// Markdown rendering.
///
/// Walks the serialized JSON tree of the document, so every field present
/// in the JSON output appears here too: scalars become bullets, nested
/// objects become sections, and arrays of flat objects become tables.
pub fn report_to_markdown(doc: &ReportDocument) -> String {
    let value = serde_json::to_value(doc).expect("report serializes");
    let mut out = String::from("# Rejection-gate report\n");
    render_object(
        &mut out,
        value.as_object().expect("report is a JSON object"),
        2,
    );
    out
}

/// Renders a report in the requested format.
pub fn render_report(doc: &ReportDocument, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report_to_json(doc),
        ReportFormat::Markdown => report_to_markdown(doc),
    }
}

/// Writes a rendered report atomically.
pub fn write_report(
    doc: &ReportDocument,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    atomic_write(path.as_ref(), render_report(doc, format).as_bytes())
}

fn render_object(out: &mut String, map: &serde_json::Map<String, Value>, level: usize) {
    // Scalar fields (and scalar arrays) first, as bullets...
    for (key, value) in map {
        match value {
            Value::Object(_) => {}
            Value::Array(items) if is_table(items) => {}
            Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(format_scalar)
                    .collect::<Vec<_>>()
                    .join(", ");
                let _ = writeln!(
                    out,
                    "- {key}: {}",
                    if items.is_empty() { "(none)" } else { &joined }
                );
            }
            _ => {
                let _ = writeln!(out, "- {key}: {}", format_scalar(value));
            }
        }
    }
    // ...then nested sections and tables under their own headings.
    for (key, value) in map {
        match value {
            Value::Object(inner) => {
                let _ = writeln!(out, "\n{} {key}\n", "#".repeat(level));
                render_object(out, inner, level + 1);
            }
            Value::Array(items) if is_table(items) => {
                let _ = writeln!(out, "\n{} {key}\n", "#".repeat(level));
                render_table(out, items);
            }
            _ => {}
        }
    }
}

/// An array renders as a table when every element is an object of scalars
/// with the same keys.
fn is_table(items: &[Value]) -> bool {
    let Some(first) = items.first().and_then(Value::as_object) else {
        return false;
    };
    let keys: Vec<&String> = first.keys().collect();
    items.iter().all(|item| {
        item.as_object().is_some_and(|obj| {
            obj.keys().collect::<Vec<_>>() == keys
                && obj.values().all(|v| !matches!(v, Value::Object(_) | Value::Array(_)))
        })
    })
}

fn render_table(out: &mut String, items: &[Value]) {
    let first = items[0].as_object().expect("checked by is_table");
    let keys: Vec<&String> = first.keys().collect();
    let _ = writeln!(
        out,
        "| {} |",
        keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(" | ")
    );
    let _ = writeln!(out, "|{}", " --- |".repeat(keys.len()));
    for item in items {
        let obj = item.as_object().expect("checked by is_table");
        let cells: Vec<String> = keys.iter().map(|k| format_scalar(&obj[*k])).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
}

fn format_scalar(value: &Value) -> String {
    match value {
        Value::Null => "null".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if n.is_f64() {
                significant(n.as_f64().unwrap_or(f64::NAN))
            } else {
                n.to_string()
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Six significant digits, rendered minimally (`-0.3`, not `-3.00000e-1`).
fn significant(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    rounded.to_string()
}

// ---------------------------------------------------------------------------
// Value-curve CSV
// ---------------------------------------------------------------------------

/// Renders a value curve as CSV: one row per candidate threshold, the
/// reject-all row last with the literal threshold `REJECT_ALL`.
pub fn curve_to_csv(curve: &ValueCurve) -> String {
    let mut out = String::from("threshold,deployed_mean_value,expected_mean_value,acceptance_rate\n");
    for row in &curve.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.threshold, row.deployed_mean_value, row.expected_mean_value, row.acceptance_rate
        );
    }
    out
}

/// Writes a value curve atomically.
pub fn write_curve(curve: &ValueCurve, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), curve_to_csv(curve).as_bytes())
}

// ---------------------------------------------------------------------------
// Rejector persistence
// ---------------------------------------------------------------------------

/// Discriminator string in a rejector document.
pub const REJECTOR_FORMAT: &str = "reject-gate/rejector";
/// Version of the rejector document layout.
pub const REJECTOR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RejectorDocument {
    format: String,
    version: u32,
    spec: RejectorSpec,
}

/// JSON rendering of a rejector spec in its document envelope.
pub fn rejector_to_json(spec: &RejectorSpec) -> String {
    let doc = RejectorDocument {
        format: REJECTOR_FORMAT.to_string(),
        version: REJECTOR_VERSION,
        spec: spec.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("spec serializes");
    s.push('\n');
    s
}

/// Saves a rejector spec atomically.
pub fn save_rejector(spec: &RejectorSpec, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), rejector_to_json(spec).as_bytes())
}

/// Loads a rejector spec, checking the document discriminator and version.
pub fn load_rejector(path: impl AsRef<Path>) -> Result<RejectorSpec> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&path_str, e))?;
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path_str.clone(),
        row,
        message,
    };
    let value: Value =
        serde_json::from_str(&text).map_err(|e| parse_err(e.line(), e.to_string()))?;
    let format = value.get("format").and_then(Value::as_str).unwrap_or("");
    if format != REJECTOR_FORMAT {
        return Err(parse_err(
            1,
            format!("not a rejector document (format {format:?}, expected {REJECTOR_FORMAT:?})"),
        ));
    }
    let version = value
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| parse_err(1, "missing or non-integer key `version`".to_string()))?;
    if version != REJECTOR_VERSION as u64 {
        return Err(Error::UnsupportedSpecVersion(
            version as u32,
            REJECTOR_VERSION,
        ));
    }
    let spec = value
        .get("spec")
        .cloned()
        .ok_or_else(|| parse_err(1, "missing key `spec`".to_string()))?;
    serde_json::from_value(spec).map_err(|e| parse_err(1, e.to_string()))
}
