use std::fmt::Write as _;
use std::path::Path;

use junctionlab_core::qubit::t1_vs_temperature;
use junctionlab_core::tunneling::OccupationMode;
use junctionlab_core::{Junction, KvBlock, ToKv, TransmonParams};

use crate::config::{Config, JUNCTION_KEYS};
use crate::error::CliError;
use crate::manifest::{write_file, RunManifest};

const KEYS: &[&str] = &[
    "transmon.ec",
    "transmon.ec_mhz",
    "transmon.fge",
    "n_neq_total",
    "temperatures_mk",
    "occupation",
];

pub const T1_HEADER: &str = "# T_mK, T1_us, gamma_per_s, i_fwd_nA, i_bwd_nA";

/// T1 over the configured temperatures, one CSV row per temperature.
pub fn cmd_t1(config_path: &Path, out: &Path) -> Result<String, CliError> {
    let cfg = Config::load(config_path)?;
    cfg.check_keys(&[JUNCTION_KEYS, KEYS], |_| false)?;
    let junction: Junction = cfg.read("junction")?;
    let transmon: TransmonParams = cfg.read("transmon")?;
    let n_neq = cfg.n_neq_total()?;
    let mode = cfg.occupation(OccupationMode::NonequilibriumDensity)?;
    let temps_mk: Vec<f64> = cfg
        .list("temperatures_mk")?
        .ok_or_else(|| cfg.err(junctionlab_core::KvError::Missing("temperatures_mk".into())))?;
    if temps_mk.is_empty() {
        return Err(cfg.reject("temperatures_mk", "empty temperature list"));
    }
    let temps: Vec<f64> = temps_mk.iter().map(|mk| mk * 1e-3).collect();
    let rows =
        t1_vs_temperature(&transmon, &junction, n_neq, &temps, mode).map_err(|e| match e {
            junctionlab_core::qubit::QubitError::BadTemperatureList { index, value } => cfg.reject(
                "temperatures_mk",
                format!(
                    "entry {index} ({} mK) must be positive and above the previous one",
                    value * 1e3
                ),
            ),
            other => CliError::numerical(other),
        })?;

    let mut resolved = KvBlock::new();
    junction.write_kv("junction", &mut resolved);
    transmon.write_kv("transmon", &mut resolved);
    resolved.insert("n_neq_total", n_neq);
    resolved.insert(
        "occupation",
        match mode {
            OccupationMode::Thermal => "thermal",
            OccupationMode::NonequilibriumDensity => "nonequilibrium",
        },
    );
    resolved.insert(
        "temperatures_mk",
        cfg.block.get("temperatures_mk").unwrap_or_default(),
    );
    let mut manifest = RunManifest::new("t1", resolved);
    manifest.add_input(config_path)?;
    let manifest_path = manifest.write_for(out)?;

    let mut text = String::new();
    let _ = writeln!(text, "# manifest: {}", manifest_path.display());
    let _ = writeln!(text, "{T1_HEADER}");
    for ((_, r), mk) in rows.iter().zip(&temps_mk) {
        let t1 = r.t1.map_or_else(|| "inf".to_string(), |v| v.to_string());
        let _ = writeln!(text, "{mk},{t1},{},{},{}", r.gamma, r.i_fwd, r.i_bwd);
    }
    write_file(out, &text)?;
    Ok(format!(
        "wrote {} temperatures to {}\nmanifest: {}\n",
        rows.len(),
        out.display(),
        manifest_path.display()
    ))
}
