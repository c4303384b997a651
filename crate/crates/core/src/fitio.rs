//! Trace files: lock-in dI/dV and IV data as comma-separated text.
//!
//! Format: UTF-8 lines of `value,value`; `#` starts a comment. One comment
//! line declares the columns, e.g. `# bias_uV, didv_uS` or
//! `# bias_mV, current_nA`. Optional comments `# label: ...` and
//! `# manifest: ...` are recognised.
//!
//! Conductance is stored in μS, so with voltages in μV and currents in nA
//! `dI/dV [μS] = 1000 · dI [nA] / dV [μV]`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::types::{ConductanceCurve, IVCurve, InvalidCurve};
use crate::units::{unit_convert, Dimension, Unit, UnitError};

/// μS per (nA/μV).
pub const MICROSIEMENS_PER_NA_PER_UV: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalKind {
    Conductance,
    Current,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Conductance => "didv",
            SignalKind::Current => "current",
        }
    }

    fn dimension(self) -> Dimension {
        match self {
            SignalKind::Conductance => Dimension::Conductance,
            SignalKind::Current => Dimension::Current,
        }
    }
}

/// Where to read a trace from and how to interpret its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub path: PathBuf,
    pub bias_column: usize,
    pub signal_column: usize,
    /// Overrides the units declared in the header.
    pub units: Option<(Unit, Unit)>,
    /// Multiplies the signal column (e.g. lock-in sensitivity).
    pub gain: f64,
}

impl TraceFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            bias_column: 0,
            signal_column: 1,
            units: None,
            gain: 1.0,
        }
    }

    pub fn with_columns(mut self, bias: usize, signal: usize) -> Self {
        self.bias_column = bias;
        self.signal_column = signal;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn with_units(mut self, bias: Unit, signal: Unit) -> Self {
        self.units = Some((bias, signal));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Conductance(ConductanceCurve),
    Iv(IVCurve),
}

impl Trace {
    pub fn kind(&self) -> SignalKind {
        match self {
            Trace::Conductance(_) => SignalKind::Conductance,
            Trace::Iv(_) => SignalKind::Current,
        }
    }

    pub fn bias(&self) -> &[f64] {
        match self {
            Trace::Conductance(c) => c.bias(),
            Trace::Iv(c) => c.bias(),
        }
    }

    pub fn signal(&self) -> &[f64] {
        match self {
            Trace::Conductance(c) => c.didv(),
            Trace::Iv(c) => c.current(),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Trace::Conductance(c) => c.label(),
            Trace::Iv(c) => c.label(),
        }
    }

    /// IV representation, integrating a conductance trace from `I(0) = 0`.
    pub fn into_iv(self) -> Result<IVCurve, FitIoError> {
        match self {
            Trace::Iv(iv) => Ok(iv),
            Trace::Conductance(g) => integrate_conductance(&g, (0.0, 0.0)),
        }
    }
}

#[derive(Debug, Error)]
pub enum FitIoError {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid trace configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Curve(#[from] InvalidCurve),
    #[error("anchor bias {anchor} uV lies outside the trace range [{low}, {high}] uV")]
    AnchorOutOfRange { anchor: f64, low: f64, high: f64 },
    #[error("differentiation needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
}

impl FitIoError {
    /// 1-based line number of a parse error.
    pub fn line(&self) -> Option<usize> {
        match self {
            FitIoError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

struct Header {
    columns: Vec<(String, Unit)>,
}

fn parse_header(text: &str) -> Result<Option<Header>, String> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if !fields.first().is_some_and(|f| f.starts_with("bias_")) {
        return Ok(None);
    }
    let mut columns = Vec::with_capacity(fields.len());
    for field in fields {
        let (name, tag) = field
            .rsplit_once('_')
            .ok_or_else(|| format!("header column `{field}` lacks a _<unit> suffix"))?;
        let unit: Unit = tag.parse().map_err(|e: UnitError| e.to_string())?;
        columns.push((name.to_string(), unit));
    }
    Ok(Some(Header { columns }))
}

/// Reads and normalizes a trace file.
pub fn load_trace(file: &TraceFile) -> Result<Trace, FitIoError> {
    let text = std::fs::read_to_string(&file.path).map_err(|source| FitIoError::Io {
        path: file.path.clone(),
        source,
    })?;
    parse_trace(&text, file, &file.path.display().to_string())
}

/// Parses trace text; `source_name` only decorates error messages.
pub fn parse_trace(text: &str, file: &TraceFile, source_name: &str) -> Result<Trace, FitIoError> {
    if file.bias_column == file.signal_column {
        return Err(FitIoError::Config(format!(
            "bias and signal both map to column {}",
            file.bias_column
        )));
    }
    if !(file.gain.is_finite() && file.gain > 0.0) {
        return Err(FitIoError::Config(format!(
            "gain {} violates gain > 0",
            file.gain
        )));
    }
    let parse_err = |line: usize, message: String| FitIoError::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };

    let mut header: Option<Header> = None;
    let mut label = String::new();
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let needed = file.bias_column.max(file.signal_column) + 1;
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(l) = comment.strip_prefix("label:") {
                label = l.trim().to_string();
            } else if header.is_none() {
                header = parse_header(comment).map_err(|m| parse_err(line_no, m))?;
            }
            continue;
        }
        if header.is_none() {
            return Err(parse_err(
                line_no,
                "data before the `# bias_<unit>, <signal>_<unit>` header".to_string(),
            ));
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < needed {
            return Err(parse_err(
                line_no,
                format!("expected at least {needed} columns, found {}", fields.len()),
            ));
        }
        let value = |col: usize| -> Result<f64, FitIoError> {
            let v: f64 = fields[col].parse().map_err(|_| {
                parse_err(
                    line_no,
                    format!("column {}: `{}` is not a number", col + 1, fields[col]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line_no,
                    format!("column {}: non-finite value", col + 1),
                ));
            }
            Ok(v)
        };
        rows.push((value(file.bias_column)?, value(file.signal_column)?));
    }
    let header = header.ok_or_else(|| {
        parse_err(
            0,
            "missing `# bias_<unit>, <signal>_<unit>` header".to_string(),
        )
    })?;
    let column = |col: usize| {
        header
            .columns
            .get(col)
            .cloned()
            .ok_or_else(|| parse_err(0, format!("header declares no column {}", col + 1)))
    };
    let (bias_name, bias_unit) = column(file.bias_column)?;
    let (signal_name, signal_unit) = column(file.signal_column)?;
    if bias_name != "bias" {
        return Err(parse_err(
            0,
            format!(
                "column {} is `{bias_name}`, expected `bias`",
                file.bias_column + 1
            ),
        ));
    }
    let kind = match signal_name.as_str() {
        "didv" => SignalKind::Conductance,
        "current" => SignalKind::Current,
        other => {
            return Err(parse_err(
                0,
                format!("unknown signal `{other}` (expected didv or current)"),
            ))
        }
    };
    let (bias_unit, signal_unit) = file.units.unwrap_or((bias_unit, signal_unit));
    let bias_internal = Unit::internal(Dimension::Voltage);
    let signal_internal = Unit::internal(kind.dimension());

    let mut converted = Vec::with_capacity(rows.len());
    for (v, s) in rows {
        converted.push((
            unit_convert(v, bias_unit, bias_internal)?,
            unit_convert(s * file.gain, signal_unit, signal_internal)?,
        ));
    }
    let (bias, signal) = sort_and_merge(converted);
    Ok(match kind {
        SignalKind::Conductance => Trace::Conductance(ConductanceCurve::new(bias, signal, label)?),
        SignalKind::Current => Trace::Iv(IVCurve::new(bias, signal, label)?),
    })
}

/// Sorts by bias and averages the signal of rows with identical bias.
fn sort_and_merge(mut rows: Vec<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bias = Vec::with_capacity(rows.len());
    let mut signal = Vec::with_capacity(rows.len());
    let mut i = 0;
    while i < rows.len() {
        let v = rows[i].0;
        let mut j = i;
        let mut sum = 0.0;
        while j < rows.len() && rows[j].0 == v {
            sum += rows[j].1;
            j += 1;
        }
        bias.push(v);
        signal.push(sum / (j - i) as f64);
        i = j;
    }
    (bias, signal)
}

/// Cumulative trapezoid integral of `g`, shifted so that `I(anchor.0) = anchor.1`.
pub fn integrate_conductance(
    g: &ConductanceCurve,
    anchor: (f64, f64),
) -> Result<IVCurve, FitIoError> {
    let (v, y) = (g.bias(), g.didv());
    let (low, high) = (v[0], v[v.len() - 1]);
    let (v0, i0) = anchor;
    if !(v0 >= low && v0 <= high) {
        return Err(FitIoError::AnchorOutOfRange {
            anchor: v0,
            low,
            high,
        });
    }
    let scale = 1.0 / MICROSIEMENS_PER_NA_PER_UV;
    let mut cumulative = Vec::with_capacity(v.len());
    cumulative.push(0.0);
    for k in 1..v.len() {
        let prev = cumulative[k - 1];
        cumulative.push(prev + 0.5 * (y[k] + y[k - 1]) * (v[k] - v[k - 1]) * scale);
    }
    // integral up to the anchor, trapezoid on the linearly interpolated conductance
    let k = v.partition_point(|&x| x <= v0).saturating_sub(1);
    let at_anchor = if v[k] == v0 || k + 1 == v.len() {
        cumulative[k]
    } else {
        let t = (v0 - v[k]) / (v[k + 1] - v[k]);
        let g0 = y[k] + t * (y[k + 1] - y[k]);
        cumulative[k] + 0.5 * (y[k] + g0) * (v0 - v[k]) * scale
    };
    let current = cumulative.iter().map(|c| c - at_anchor + i0).collect();
    Ok(IVCurve::new(v.to_vec(), current, g.label())?)
}

/// Second-order finite differences: central on the interior (non-uniform
/// grids allowed) and three-point one-sided at both ends.
pub fn differentiate_iv(iv: &IVCurve) -> Result<ConductanceCurve, FitIoError> {
    let didv = derivative(iv.bias(), iv.current())?
        .into_iter()
        .map(|d| d * MICROSIEMENS_PER_NA_PER_UV)
        .collect();
    Ok(ConductanceCurve::new(iv.bias().to_vec(), didv, iv.label())?)
}

/// `dy/dx` on the grid `x` (same formulas as [`differentiate_iv`], no unit scaling).
pub fn derivative(x: &[f64], y: &[f64]) -> Result<Vec<f64>, FitIoError> {
    let n = x.len();
    if n < 3 {
        return Err(FitIoError::TooFewSamples(n));
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = x[i] - x[i - 1];
        let h2 = x[i + 1] - x[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1]
            + (h2 - h1) / (h1 * h2) * y[i]
            + h1 / (h2 * (h1 + h2)) * y[i + 1];
    }
    let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1]
        - h1 / (h2 * (h1 + h2)) * y[2];
    let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    d[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2]
        + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
    Ok(d)
}

/// Serializes a trace in the input format (internal units, shortest
/// round-trip float formatting).
pub fn write_trace(trace: &Trace, manifest: Option<&Path>) -> String {
    let mut out = String::new();
    if let Some(m) = manifest {
        let _ = writeln!(out, "# manifest: {}", m.display());
    }
    if !trace.label().is_empty() {
        let _ = writeln!(out, "# label: {}", trace.label());
    }
    let kind = trace.kind();
    let _ = writeln!(
        out,
        "# bias_{}, {}_{}",
        Unit::internal(Dimension::Voltage).tag(),
        kind.name(),
        Unit::internal(kind.dimension()).tag()
    );
    for (v, s) in trace.bias().iter().zip(trace.signal()) {
        let _ = writeln!(out, "{v},{s}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Trace, FitIoError> {
        parse_trace(text, &TraceFile::new("mem.csv"), "mem.csv")
    }

    #[test]
    fn constant_conductance_file() {
        let t = parse("# bias_uV, didv_uS\n0,1\n1,1\n2,1\n").unwrap();
        match t {
            Trace::Conductance(g) => {
                assert_eq!(g.bias(), &[0.0, 1.0, 2.0]);
                assert_eq!(g.didv(), &[1.0, 1.0, 1.0]);
            }
            Trace::Iv(_) => panic!("expected conductance"),
        }
    }

    #[test]
    fn duplicates_are_averaged() {
        let t = parse("# bias_uV, current_nA\n0,0\n1.0,1\n1.0,3\n2,4\n").unwrap();
        assert_eq!(t.bias(), &[0.0, 1.0, 2.0]);
        assert_eq!(t.signal(), &[0.0, 2.0, 4.0]);
    }

    #[test]
    fn shuffled_rows_sort() {
        let sorted = parse("# bias_uV, current_nA\n-1,-2\n0,0\n1,2\n2,4\n").unwrap();
        let shuffled = parse("# bias_uV, current_nA\n1,2\n-1,-2\n2,4\n0,0\n").unwrap();
        assert_eq!(sorted, shuffled);
    }

    #[test]
    fn units_and_gain_are_applied() {
        let file = TraceFile::new("x").with_gain(2.0);
        let t = parse_trace("# bias_mV, current_uA\n0.1,0.001\n0.2,0.002\n", &file, "x").unwrap();
        assert_eq!(t.kind(), SignalKind::Current);
        assert!((t.bias()[0] - 100.0).abs() < 1e-12);
        assert!((t.signal()[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("# bias_uV, didv_uS\n0,1\n1,x\n").unwrap_err();
        assert_eq!(err.line(), Some(3));
        assert!(err.to_string().contains("mem.csv:3"));
        let err = parse("0,1\n").unwrap_err();
        assert_eq!(err.line(), Some(1));
        let err = parse("# bias_uV, didv_furlong\n0,1\n").unwrap_err();
        assert_eq!(err.line(), Some(1));
        assert!(parse("# bias_uV, didv_nA\n0,1\n1,2\n").is_err());
        assert!(parse("# bias_uV, didv_uS\n0,inf\n").is_err());
    }

    #[test]
    fn columns_must_differ() {
        let file = TraceFile::new("x").with_columns(1, 1);
        assert!(matches!(
            parse_trace("# bias_uV, didv_uS\n0,1\n", &file, "x"),
            Err(FitIoError::Config(_))
        ));
    }

    #[test]
    fn write_parse_round_trip() {
        let iv =
            IVCurve::new(vec![-1.5, 0.1, 2.0 / 3.0], vec![-0.1, 1e-20, 7.25], "run 7").unwrap();
        let text = write_trace(&Trace::Iv(iv.clone()), Some(Path::new("out.csv.manifest")));
        assert!(text.starts_with("# manifest: out.csv.manifest\n"));
        assert_eq!(parse(&text).unwrap(), Trace::Iv(iv));
    }

    #[test]
    fn constant_conductance_integrates_to_line() {
        let rn = 18.6;
        let bias: Vec<f64> = (-50..=50).map(|k| 8.0 * k as f64).collect();
        let g = ConductanceCurve::new(bias.clone(), vec![1000.0 / rn; bias.len()], "").unwrap();
        let iv = integrate_conductance(&g, (0.0, 0.0)).unwrap();
        for (v, i) in iv.samples() {
            assert!((i - v / rn).abs() < 1e-11, "{v} {i}");
        }
        let shifted = integrate_conductance(&g, (4.0, 1.0)).unwrap();
        assert!((shifted.current()[50] - (1.0 - 4.0 / rn)).abs() < 1e-12);
        assert!(matches!(
            integrate_conductance(&g, (401.0, 0.0)),
            Err(FitIoError::AnchorOutOfRange { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let x: Vec<f64> = vec![0.0, 0.5, 1.5, 1.75, 3.0, 4.0];
        let line: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        for d in derivative(&x, &line).unwrap() {
            assert!((d - 3.0).abs() < 1e-12);
        }
        // three-point formulas are exact for quadratics, also on uneven grids
        let parabola: Vec<f64> = x.iter().map(|v| 0.7 * v * v).collect();
        for (d, v) in derivative(&x, &parabola).unwrap().iter().zip(&x) {
            assert!((d - 1.4 * v).abs() < 1e-12);
        }
        let iv = IVCurve::new(vec![0.0, 1.0], vec![0.0, 1.0], "").unwrap();
        assert!(matches!(
            differentiate_iv(&iv),
            Err(FitIoError::TooFewSamples(2))
        ));
    }

    #[test]
    fn grids_are_preserved() {
        let bias = vec![-3.0, -1.0, 0.5, 2.0];
        let iv = IVCurve::new(bias.clone(), vec![1.0, 2.0, 0.0, 5.0], "").unwrap();
        let g = differentiate_iv(&iv).unwrap();
        assert_eq!(g.bias(), &bias[..]);
        assert_eq!(
            integrate_conductance(&g, (0.0, 0.0)).unwrap().bias(),
            &bias[..]
        );
    }
}
