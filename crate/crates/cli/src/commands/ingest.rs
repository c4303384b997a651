use std::path::Path;
use std::str::FromStr;

use junctionlab_core::fitio::{differentiate_iv, load_trace, write_trace, Trace, TraceFile};
use junctionlab_core::{KvBlock, Unit};

use super::fit::trace_to_iv;
use crate::error::CliError;
use crate::manifest::{write_file, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestTarget {
    Iv,
    Conductance,
}

impl FromStr for IngestTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iv" => Ok(IngestTarget::Iv),
            "conductance" => Ok(IngestTarget::Conductance),
            other => Err(format!("unknown target `{other}` (iv | conductance)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub to: IngestTarget,
    /// `(bias μV, current nA)` the integrated IV passes through.
    pub anchor: (f64, f64),
    pub gain: f64,
    pub units: Option<(Unit, Unit)>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            to: IngestTarget::Iv,
            anchor: (0.0, 0.0),
            gain: 1.0,
            units: None,
        }
    }
}

/// Converts a trace between the conductance and IV representations.
pub fn cmd_ingest(data: &Path, opts: &IngestOptions, out: &Path) -> Result<String, CliError> {
    let mut file = TraceFile::new(data).with_gain(opts.gain);
    file.units = opts.units;
    let trace = load_trace(&file)?;
    let from = trace.kind();
    let converted = match opts.to {
        IngestTarget::Iv => Trace::Iv(trace_to_iv(trace, opts.anchor)?),
        IngestTarget::Conductance => match trace {
            Trace::Conductance(g) => Trace::Conductance(g),
            Trace::Iv(iv) => Trace::Conductance(differentiate_iv(&iv)?),
        },
    };

    let mut resolved = KvBlock::new();
    resolved.insert("from", from.name());
    resolved.insert("to", converted.kind().name());
    resolved.insert("anchor_bias", opts.anchor.0);
    resolved.insert("anchor_current", opts.anchor.1);
    resolved.insert("gain", opts.gain);
    if let Some((b, s)) = opts.units {
        resolved.insert("bias_unit", b.tag());
        resolved.insert("signal_unit", s.tag());
    }
    let mut manifest = RunManifest::new("ingest", resolved);
    manifest.add_input(data)?;
    let manifest_path = manifest.write_for(out)?;
    write_file(out, &write_trace(&converted, Some(&manifest_path)))?;
    Ok(format!(
        "wrote {} {} samples to {}\nmanifest: {}\n",
        converted.bias().len(),
        converted.kind().name(),
        out.display(),
        manifest_path.display()
    ))
}
