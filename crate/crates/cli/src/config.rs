//! Config files: key = value blocks with a fixed key set per subcommand.

use std::path::Path;

use junctionlab_core::mar::MarParams;
use junctionlab_core::tunneling::OccupationMode;
use junctionlab_core::{FromKv, KvBlock, KvError};

use crate::error::CliError;

/// Largest bias grid a config may request.
pub const MAX_GRID_POINTS: usize = 1_000_000;

pub const JUNCTION_KEYS: &[&str] = &[
    "junction.electrode1.gap0",
    "junction.electrode1.dynes",
    "junction.electrode1.n0",
    "junction.electrode1.thickness",
    "junction.electrode2.gap0",
    "junction.electrode2.dynes",
    "junction.electrode2.n0",
    "junction.electrode2.thickness",
    "junction.rn",
    "junction.transparency",
];

pub const MAR_KEYS: &[&str] = &["mar.n_max", "mar.step_width", "mar.base_scale"];

/// A parsed config file that remembers where it came from for error messages.
#[derive(Debug, Clone)]
pub struct Config {
    pub path: String,
    pub block: KvBlock,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        let block = KvBlock::parse(text).map_err(|source| CliError::Config {
            path: path.to_string(),
            source,
        })?;
        Ok(Self {
            path: path.to_string(),
            block,
        })
    }

    pub fn err(&self, source: KvError) -> CliError {
        CliError::Config {
            path: self.path.clone(),
            source,
        }
    }

    pub fn reject(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::config(&self.path, key, message)
    }

    /// Fails on the first key that is neither listed nor accepted by `extra`.
    pub fn check_keys(
        &self,
        allowed: &[&[&str]],
        extra: impl Fn(&str) -> bool,
    ) -> Result<(), CliError> {
        for (k, _) in self.block.iter() {
            if !allowed.iter().any(|set| set.contains(&k)) && !extra(k) {
                return Err(self.reject(k, "unknown key"));
            }
        }
        Ok(())
    }

    pub fn read<T: FromKv>(&self, prefix: &str) -> Result<T, CliError> {
        T::read_kv(&self.block, prefix).map_err(|e| self.err(e))
    }

    pub fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.block.optional(key).map_err(|e| self.err(e))
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.block.require(key).map_err(|e| self.err(e))
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.block.list(key).map_err(|e| self.err(e))
    }

    /// `temperature_mk`, converted to K.
    pub fn temperature(&self, default_mk: f64) -> Result<f64, CliError> {
        let mk = self
            .optional::<f64>("temperature_mk")?
            .unwrap_or(default_mk);
        if !(mk.is_finite() && mk > 0.0) {
            return Err(self.reject("temperature_mk", format!("{mk} violates temperature > 0")));
        }
        Ok(mk * 1e-3)
    }

    pub fn occupation(&self, default: OccupationMode) -> Result<OccupationMode, CliError> {
        match self.optional::<String>("occupation")?.as_deref() {
            None => Ok(default),
            Some("thermal") => Ok(OccupationMode::Thermal),
            Some("nonequilibrium") => Ok(OccupationMode::NonequilibriumDensity),
            Some(other) => Err(self.reject(
                "occupation",
                format!("unknown mode `{other}` (thermal | nonequilibrium)"),
            )),
        }
    }

    pub fn n_neq_total(&self) -> Result<f64, CliError> {
        let n = self.optional::<f64>("n_neq_total")?.unwrap_or(0.0);
        if !(n.is_finite() && n >= 0.0) {
            return Err(self.reject("n_neq_total", format!("{n} violates n_neq_total >= 0")));
        }
        Ok(n)
    }

    pub fn mar(&self) -> Result<MarParams, CliError> {
        self.read("mar")
    }

    /// `bias.start`, `bias.stop`, `bias.step` (μV); both ends included.
    pub fn bias_grid(&self) -> Result<Vec<f64>, CliError> {
        let start: f64 = self.require("bias.start")?;
        let stop: f64 = self.require("bias.stop")?;
        let step: f64 = self.require("bias.step")?;
        if !(step.is_finite() && step > 0.0) {
            return Err(self.reject("bias.step", format!("{step} violates step > 0")));
        }
        if !(start.is_finite() && stop.is_finite() && stop > start) {
            return Err(self.reject(
                "bias.stop",
                format!("empty bias grid: stop {stop} must exceed start {start}"),
            ));
        }
        let intervals = ((stop - start) / step * (1.0 + 1e-12)).floor();
        if intervals + 1.0 > MAX_GRID_POINTS as f64 {
            return Err(self.reject(
                "bias.step",
                format!("grid of {intervals} intervals exceeds {MAX_GRID_POINTS} points"),
            ));
        }
        if intervals < 2.0 {
            return Err(self.reject("bias.step", "bias grid needs at least 3 points"));
        }
        Ok((0..=intervals as usize)
            .map(|k| start + step * k as f64)
            .collect())
    }
}
