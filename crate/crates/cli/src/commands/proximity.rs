use std::fmt::Write as _;
use std::path::Path;

use junctionlab_core::proximity::{
    calibrate_coupling, cooper_limit_gap, BilayerSpec, ProximityError,
};

use crate::config::Config;
use crate::error::CliError;

const KEYS: &[&str] = &[
    "bilayer.layer_a.gap0",
    "bilayer.layer_a.dynes",
    "bilayer.layer_a.n0",
    "bilayer.layer_a.thickness",
    "bilayer.layer_b.gap0",
    "bilayer.layer_b.dynes",
    "bilayer.layer_b.n0",
    "bilayer.layer_b.thickness",
    "bilayer.coupling",
    "measured_gap",
];

/// Effective bilayer gap, or the coupling that reproduces `measured_gap`.
pub fn cmd_proximity(config_path: &Path) -> Result<String, CliError> {
    let cfg = Config::load(config_path)?;
    cfg.check_keys(&[KEYS], |_| false)?;
    let spec: BilayerSpec = cfg.read("bilayer")?;
    let mut out = String::new();
    match cfg.optional::<f64>("measured_gap")? {
        None => {
            let _ = writeln!(out, "delta_eff = {} ueV", cooper_limit_gap(&spec));
            let _ = writeln!(out, "coupling = {}", spec.coupling());
        }
        Some(measured) => {
            let tau = calibrate_coupling(&spec, measured).map_err(|e| match e {
                ProximityError::OutOfRange { .. } => cfg.reject("measured_gap", e.to_string()),
            })?;
            let calibrated = spec
                .with_coupling(tau)
                .map_err(|e| cfg.reject("measured_gap", e.message))?;
            let _ = writeln!(out, "coupling = {tau}");
            let _ = writeln!(out, "delta_eff = {} ueV", cooper_limit_gap(&calibrated));
            let _ = writeln!(out, "measured_gap = {measured} ueV");
        }
    }
    let _ = writeln!(out, "fully_coupled_gap = {} ueV", spec.fully_coupled_gap());
    Ok(out)
}
