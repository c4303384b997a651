use std::path::Path;

use junctionlab_core::fitio::{write_trace, Trace};
use junctionlab_core::fitting::add_noise;
use junctionlab_core::mar::{calibrate_base_scale, MarModel};
use junctionlab_core::tunneling::OccupationMode;
use junctionlab_core::{IVCurve, Junction, KvBlock, ToKv};

use super::{occupation_model, tunneling_model};
use crate::config::{Config, JUNCTION_KEYS, MAR_KEYS};
use crate::error::CliError;
use crate::manifest::{write_file, RunManifest};
use crate::svg::{plot, Series};

const KEYS: &[&str] = &[
    "bias.start",
    "bias.stop",
    "bias.step",
    "temperature_mk",
    "occupation",
    "n_neq_total",
    "mar.rise",
    "mar.rise_low",
    "mar.rise_high",
    "noise.rel",
    "noise.seed",
    "label",
];

/// Simulates an IV curve (tunneling plus MAR steps, optional noise) and writes it as a trace.
pub fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    svg: Option<&Path>,
) -> Result<String, CliError> {
    let cfg = Config::load(config_path)?;
    cfg.check_keys(&[JUNCTION_KEYS, MAR_KEYS, KEYS], |_| false)?;
    let junction: Junction = cfg.read("junction")?;
    let t = cfg.temperature(20.0)?;
    let mode = cfg.occupation(OccupationMode::Thermal)?;
    let n_neq = cfg.n_neq_total()?;
    let bias = cfg.bias_grid()?;
    let mut mar = cfg.mar()?;
    let noise_rel = cfg.optional::<f64>("noise.rel")?.unwrap_or(0.0);
    if !(noise_rel.is_finite() && noise_rel >= 0.0) {
        return Err(cfg.reject("noise.rel", format!("{noise_rel} violates noise.rel >= 0")));
    }
    let noise_seed = cfg.optional::<u64>("noise.seed")?.unwrap_or(0);
    let label = cfg
        .optional::<String>("label")?
        .unwrap_or_else(|| "simulated".to_string());

    let occ = occupation_model(&cfg, &junction, t, mode, n_neq)?;
    let qp = tunneling_model(&cfg, &junction, t, &occ)?;

    if let Some(rise) = cfg.optional::<f64>("mar.rise")? {
        if cfg.block.contains("mar.base_scale") {
            return Err(cfg.reject("mar.rise", "give either mar.rise or mar.base_scale"));
        }
        let lo = cfg.optional("mar.rise_low")?.unwrap_or(100.0);
        let hi = cfg.optional("mar.rise_high")?.unwrap_or(300.0);
        if !(lo < hi) {
            return Err(cfg.reject(
                "mar.rise_high",
                format!("{hi} must exceed mar.rise_low {lo}"),
            ));
        }
        if junction.transparency() == 0.0 {
            return Err(cfg.reject(
                "mar.rise",
                "calibrating the MAR rise needs junction.transparency > 0",
            ));
        }
        let base_rise = qp.current(hi).map_err(CliError::numerical)?
            - qp.current(lo).map_err(CliError::numerical)?;
        let base = calibrate_base_scale(&junction, &mar, base_rise, lo, hi, rise)
            .map_err(|e| cfg.reject("mar.rise", e.message))?;
        mar = mar
            .with_base_scale(base)
            .map_err(|e| cfg.reject("mar.rise", e.message))?;
    }

    let qp_current = qp.sweep(&bias).map_err(CliError::numerical)?;
    let steps = MarModel::new(&junction, &mar);
    let clean: Vec<f64> = bias
        .iter()
        .zip(&qp_current)
        .map(|(&v, i)| i + steps.current(v))
        .collect();
    let current = add_noise(&clean, noise_rel, noise_seed);
    let curve =
        IVCurve::new(bias.clone(), current.clone(), label.clone()).map_err(CliError::numerical)?;

    let mut resolved = KvBlock::new();
    junction.write_kv("junction", &mut resolved);
    mar.write_kv("mar", &mut resolved);
    for key in ["bias.start", "bias.stop", "bias.step"] {
        resolved.insert(key, cfg.block.get(key).unwrap_or_default());
    }
    resolved.insert("temperature_mk", t * 1e3);
    resolved.insert(
        "occupation",
        match mode {
            OccupationMode::Thermal => "thermal",
            OccupationMode::NonequilibriumDensity => "nonequilibrium",
        },
    );
    resolved.insert("n_neq_total", n_neq);
    resolved.insert("noise.rel", noise_rel);
    resolved.insert("noise.seed", noise_seed);
    resolved.insert("label", &label);
    let mut manifest = RunManifest::new("simulate", resolved);
    manifest.add_input(config_path)?;
    let manifest_path = manifest.write_for(out)?;
    write_file(out, &write_trace(&Trace::Iv(curve), Some(&manifest_path)))?;

    if let Some(svg_path) = svg {
        let mut series = vec![Series::new("I (total)", &bias, &current)];
        if steps.saturation() > 0.0 {
            series.push(Series::new("quasiparticle only", &bias, &qp_current).dashed());
        }
        write_file(svg_path, &plot(&series, "V (uV)", "I (nA)"))?;
    }
    Ok(format!(
        "wrote {} points to {}\nmanifest: {}\nmar.base_scale = {} nA\n",
        bias.len(),
        out.display(),
        manifest_path.display(),
        mar.base_scale()
    ))
}
