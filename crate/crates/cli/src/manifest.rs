//! Run manifests written next to every output file.

use std::path::{Path, PathBuf};

use junctionlab_core::KvBlock;
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Subcommand, resolved configuration, input digests, tool version and time of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: KvBlock,
    /// `(path, sha256 hex)` of every input file.
    pub inputs: Vec<(String, String)>,
    pub version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: KvBlock) -> Self {
        let timestamp = OffsetDateTime::now_utc()
            .format(&Rfc3339)
            .unwrap_or_else(|_| "unknown".to_string());
        Self {
            subcommand: subcommand.to_string(),
            config,
            inputs: Vec::new(),
            version: VERSION.to_string(),
            timestamp,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push((
            path.display().to_string(),
            hex::encode(Sha256::digest(&bytes)),
        ));
        Ok(())
    }

    /// Manifest location for an output file: `<out>.manifest`.
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest");
        PathBuf::from(name)
    }

    pub fn render(&self) -> String {
        let mut head = KvBlock::new();
        for (i, (path, digest)) in self.inputs.iter().enumerate() {
            head.insert(format!("input.{i}.path"), path);
            head.insert(format!("input.{i}.sha256"), digest);
        }
        let mut config = KvBlock::new();
        config.merge_prefixed("config", &self.config);
        format!(
            "# junctionlab run manifest\nsubcommand = {}\nversion = {}\ntimestamp = {}\n{head}{config}",
            self.subcommand, self.version, self.timestamp
        )
    }

    /// Writes the manifest for `out` and returns its path.
    pub fn write_for(&self, out: &Path) -> Result<PathBuf, CliError> {
        let path = Self::path_for(out);
        write_file(&path, &self.render())?;
        Ok(path)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            RunManifest::path_for(Path::new("out/iv.csv")),
            PathBuf::from("out/iv.csv.manifest")
        );
    }

    #[test]
    fn render_lists_config_and_inputs() {
        let mut cfg = KvBlock::new();
        cfg.insert("junction.rn", 18.6);
        let mut m = RunManifest::new("simulate", cfg);
        m.inputs.push(("a.csv".into(), "00ff".into()));
        let text = m.render();
        let block = KvBlock::parse(&text).unwrap();
        assert_eq!(block.get("config.junction.rn"), Some("18.6"));
        assert_eq!(block.get("input.0.sha256"), Some("00ff"));
        assert_eq!(block.get("subcommand"), Some("simulate"));
        assert_eq!(block.get("version"), Some(VERSION));
    }
}
