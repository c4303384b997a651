//! Plain-text table of fit results.

use std::fmt::Write as _;

use super::{FitResult, Param};

/// One row per result: label, Δ₂ (μeV, integer), Rₙ (kΩ, one decimal), D,
/// residual rms and the route that produced Δ₂; the footer states the
/// bottom-electrode gap assumed for every row.
pub fn report_table(results: &[FitResult], labels: &[String], delta1: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:>9} {:>8} {:>7} {:>12}  method",
        "label", "Δ₂ (μeV)", "Rₙ (kΩ)", "D", "rms"
    );
    let _ = writeln!(out, "{}", "-".repeat(76));
    for (i, r) in results.iter().enumerate() {
        let label = labels.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            out,
            "{:<28} {:>9.0} {:>8.1} {:>7.3} {:>9.4} {:<2}  {}",
            label,
            r.get(Param::Delta2),
            r.get(Param::Rn),
            r.get(Param::Transparency),
            r.rms,
            r.objective.unit(),
            r.method.name()
        );
    }
    let _ = writeln!(out, "{}", "-".repeat(76));
    let _ = writeln!(
        out,
        "Δ₂ extracted assuming the bottom electrode Δ₁ = {delta1:.0} μeV."
    );
    out
}
