use std::fmt::Write as _;
use std::path::Path;

use junctionlab_core::fitio::{integrate_conductance, load_trace, Trace, TraceFile};
use junctionlab_core::fitting::{
    estimate_initial, fit_iv, report_table, simulate_composite, EstimateOptions, FitConfig,
    FitError, FitMethod, Param,
};
use junctionlab_core::{IVCurve, KvBlock, ToKv, Unit};

use crate::config::{Config, MAR_KEYS};
use crate::error::CliError;
use crate::manifest::{write_file, RunManifest};
use crate::svg::{plot, Series};

const DATA_KEYS: &[&str] = &[
    "data.bias_column",
    "data.signal_column",
    "data.gain",
    "data.bias_unit",
    "data.signal_unit",
    "data.anchor_bias",
    "data.anchor_current",
    "data.label",
];

const FIT_KEYS: &[&str] = &[
    "fit.free",
    "fit.objective",
    "fit.method",
    "fit.max_evals",
    "fit.seed",
    "fit.estimate",
];

/// Line that opens the key = value block of a fit report.
pub const REPORT_BLOCK_MARKER: &str = "# result";

fn fit_param_key(key: &str) -> bool {
    ["fit.bounds.", "fit.fixed.", "fit.start."].iter().any(|p| {
        key.strip_prefix(p)
            .is_some_and(|name| name.parse::<Param>().is_ok())
    })
}

fn trace_file(cfg: &Config, data: &Path) -> Result<TraceFile, CliError> {
    let mut file = TraceFile::new(data);
    if let Some(c) = cfg.optional::<usize>("data.bias_column")? {
        file.bias_column = c;
    }
    if let Some(c) = cfg.optional::<usize>("data.signal_column")? {
        file.signal_column = c;
    }
    if let Some(g) = cfg.optional::<f64>("data.gain")? {
        file.gain = g;
    }
    match (
        cfg.optional::<Unit>("data.bias_unit")?,
        cfg.optional::<Unit>("data.signal_unit")?,
    ) {
        (Some(b), Some(s)) => file.units = Some((b, s)),
        (None, None) => {}
        _ => {
            return Err(cfg.reject(
                "data.bias_unit",
                "give both data.bias_unit and data.signal_unit",
            ))
        }
    }
    Ok(file)
}

/// IV curve from a trace; conductance is integrated from `anchor`.
pub(crate) fn trace_to_iv(trace: Trace, anchor: (f64, f64)) -> Result<IVCurve, CliError> {
    match trace {
        Trace::Iv(iv) => Ok(iv),
        Trace::Conductance(g) => Ok(integrate_conductance(&g, anchor)?),
    }
}

fn fit_error(cfg: &Config, e: FitError) -> CliError {
    match e {
        FitError::InvalidConfig(m) => cfg.reject("fit.free", m),
        other => CliError::numerical(other),
    }
}

/// Fits the composite model to a trace and writes a report: a table
/// followed by a key = value block.
pub fn cmd_fit(
    data: &Path,
    config_path: &Path,
    out: &Path,
    svg: Option<&Path>,
) -> Result<String, CliError> {
    let cfg = Config::load(config_path)?;
    let mar_keys: Vec<&str> = MAR_KEYS
        .iter()
        .copied()
        .filter(|k| *k != "mar.base_scale")
        .collect();
    cfg.check_keys(&[DATA_KEYS, FIT_KEYS, &mar_keys], fit_param_key)?;
    let file = trace_file(&cfg, data)?;
    let anchor = (
        cfg.optional("data.anchor_bias")?.unwrap_or(0.0),
        cfg.optional("data.anchor_current")?.unwrap_or(0.0),
    );
    let trace = load_trace(&file)?;
    let kind = trace.kind();
    let mut iv = trace_to_iv(trace, anchor)?;
    if let Some(label) = cfg.optional::<String>("data.label")? {
        iv = iv.with_label(label);
    }
    let label = if iv.label().is_empty() {
        data.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        iv.label().to_string()
    };

    let mut fit_cfg: FitConfig = cfg.read("fit")?;
    fit_cfg.mar = cfg.mar()?;
    let use_estimate = cfg.optional::<bool>("fit.estimate")?.unwrap_or(true);
    if use_estimate && fit_cfg.method == FitMethod::FullCurve {
        let est = estimate_initial(&iv, &EstimateOptions::from_config(&fit_cfg))
            .map_err(CliError::numerical)?;
        let mut seeded = fit_cfg.values;
        est.apply(&mut seeded);
        // only free parameters without an explicit start take the estimate
        for &p in &fit_cfg.free {
            if !cfg.block.contains(&format!("fit.start.{}", p.key())) {
                fit_cfg.values.set(p, seeded.get(p));
            }
        }
    }
    let result = fit_iv(&iv, &fit_cfg).map_err(|e| fit_error(&cfg, e))?;

    let mut resolved = KvBlock::new();
    fit_cfg.write_kv("fit", &mut resolved);
    fit_cfg.mar.write_kv("mar", &mut resolved);
    resolved.insert("fit.estimate", use_estimate);
    resolved.insert("data.kind", kind.name());
    resolved.insert("data.anchor_bias", anchor.0);
    resolved.insert("data.anchor_current", anchor.1);
    resolved.insert("data.gain", file.gain);
    let mut manifest = RunManifest::new("fit", resolved);
    manifest.add_input(data)?;
    manifest.add_input(config_path)?;
    let manifest_path = manifest.write_for(out)?;

    let table = report_table(
        std::slice::from_ref(&result),
        &[label],
        result.get(Param::Delta1),
    );
    let mut block = KvBlock::new();
    result.write_kv("result", &mut block);
    let mut report = String::new();
    let _ = writeln!(report, "# manifest: {}", manifest_path.display());
    let _ = writeln!(report, "# data: {}", data.display());
    report.push_str(&table);
    let _ = writeln!(report);
    let _ = writeln!(report, "{REPORT_BLOCK_MARKER}");
    let _ = write!(report, "{block}");
    write_file(out, &report)?;

    if let Some(svg_path) = svg {
        let model = simulate_composite(&result.values, &fit_cfg.mar, iv.bias())
            .map_err(CliError::numerical)?;
        let series = [
            Series::new("data", iv.bias(), iv.current()),
            Series::new("fit", iv.bias(), &model).dashed(),
        ];
        write_file(svg_path, &plot(&series, "V (uV)", "I (nA)"))?;
    }

    let summary = format!("{table}manifest: {}\n", manifest_path.display());
    if !result.converged {
        return Err(CliError::Numerical(format!(
            "{summary}fit did not converge within {} evaluations per start; report written to {}",
            fit_cfg.max_evals,
            out.display()
        )));
    }
    Ok(summary)
}

/// The key = value block of a report written by [`cmd_fit`].
pub fn parse_report(text: &str) -> Result<KvBlock, CliError> {
    let start = text
        .lines()
        .position(|l| l.trim() == REPORT_BLOCK_MARKER)
        .ok_or_else(|| CliError::Input(format!("no `{REPORT_BLOCK_MARKER}` block in report")))?;
    let body: Vec<&str> = text.lines().skip(start + 1).collect();
    KvBlock::parse(&body.join("\n")).map_err(|e| CliError::Input(e.to_string()))
}
