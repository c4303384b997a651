//! Subcommand implementations. Each returns the text to print on success.

mod fit;
mod ingest;
mod proximity;
mod simulate;
mod t1;

pub use fit::{cmd_fit, parse_report, REPORT_BLOCK_MARKER};
pub use ingest::{cmd_ingest, IngestOptions, IngestTarget};
pub use proximity::cmd_proximity;
pub use simulate::cmd_simulate;
pub use t1::cmd_t1;

use junctionlab_core::qubit::quasiparticle_state;
use junctionlab_core::tunneling::{
    OccupationMode, OccupationModel, TunnelingError, TunnelingModel,
};
use junctionlab_core::Junction;

use crate::config::Config;
use crate::error::CliError;

/// Occupation model for `mode`, with `n_neq_total` split between the electrodes.
fn occupation_model(
    cfg: &Config,
    junction: &Junction,
    t: f64,
    mode: OccupationMode,
    n_neq_total: f64,
) -> Result<OccupationModel, CliError> {
    match mode {
        OccupationMode::Thermal => Ok(OccupationModel::Thermal),
        OccupationMode::NonequilibriumDensity => {
            let state = quasiparticle_state(junction, n_neq_total, t)
                .map_err(|e| cfg.reject("n_neq_total", e.to_string()))?;
            OccupationModel::nonequilibrium(state.n1(), state.n2())
                .map_err(|e| cfg.reject("n_neq_total", e.to_string()))
        }
    }
}

fn tunneling_model(
    cfg: &Config,
    junction: &Junction,
    t: f64,
    occ: &OccupationModel,
) -> Result<TunnelingModel, CliError> {
    TunnelingModel::new(junction, t, occ).map_err(|e| match e {
        TunnelingError::NonNormalizable { .. } => cfg.reject("n_neq_total", e.to_string()),
        TunnelingError::Invalid(p) => {
            cfg.reject(format!("junction ({})", p.field).as_str(), p.message)
        }
        other => CliError::numerical(other),
    })
}
