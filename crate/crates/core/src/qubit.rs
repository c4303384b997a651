//! Transmon relaxation from quasiparticle tunneling.
//!
//! The decay rate is the quasiparticle current in both directions at a static
//! bias equal to the qubit photon energy:
//!
//! ```text
//! Γ = (E_C / h·f_ge) · (I_fwd + I_bwd) / e,      T1 = 1 / Γ
//! ```

use rayon::prelude::*;
use thiserror::Error;

use crate::bcs::thermal_qp_density;
use crate::tunneling::{
    partition_nonequilibrium, OccupationMode, OccupationModel, TunnelingError, TunnelingModel,
};
use crate::types::{InvalidParameter, Junction, QuasiparticleState, TransmonParams};
use crate::units::{electrons_per_second, ELEMENTARY_CHARGE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QubitError {
    #[error(transparent)]
    Tunneling(#[from] TunnelingError),
    #[error(transparent)]
    Invalid(#[from] InvalidParameter),
    #[error("at T = {temperature} K: {source}")]
    AtTemperature {
        temperature: f64,
        #[source]
        source: Box<QubitError>,
    },
    #[error("temperatures must be positive and strictly increasing (entry {index}: {value} K)")]
    BadTemperatureList { index: usize, value: f64 },
}

/// Decay rate (s⁻¹), T1 (μs) and the directional currents (nA) behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayResult {
    pub gamma: f64,
    /// `None` when no quasiparticle current flows (T1 = ∞).
    pub t1: Option<f64>,
    pub i_fwd: f64,
    pub i_bwd: f64,
}

impl DecayResult {
    /// Builds the result from the summed current; panics if the two unit
    /// paths for Γ disagree, which would indicate a broken unit convention.
    fn from_currents(q: &TransmonParams, i_fwd: f64, i_bwd: f64) -> Self {
        let ratio = q.ec() / q.photon_energy();
        let gamma = ratio * electrons_per_second(i_fwd + i_bwd);
        let audit = q.ec() * ((i_fwd + i_bwd) * 1e-9) / (q.photon_energy() * ELEMENTARY_CHARGE);
        assert!(
            (gamma - audit).abs() <= 1e-12 * gamma.abs().max(f64::MIN_POSITIVE),
            "unit audit failed: {gamma} s^-1 vs {audit} s^-1"
        );
        let t1 = (gamma > 0.0).then(|| 1e6 / gamma);
        Self {
            gamma,
            t1,
            i_fwd,
            i_bwd,
        }
    }

    /// T1 in μs with `f64::INFINITY` for a vanishing rate.
    pub fn t1_or_inf(&self) -> f64 {
        self.t1.unwrap_or(f64::INFINITY)
    }
}

/// Γ and T1 from directional currents (nA) already at hand.
pub fn decay_from_currents(q: &TransmonParams, i_fwd: f64, i_bwd: f64) -> DecayResult {
    DecayResult::from_currents(q, i_fwd, i_bwd)
}

/// Per-electrode quasiparticle densities at `t`: thermal population plus the
/// partitioned share of `n_neq_total`.
pub fn quasiparticle_state(
    junction: &Junction,
    n_neq_total: f64,
    t: f64,
) -> Result<QuasiparticleState, InvalidParameter> {
    let (p1, p2) = partition_nonequilibrium(junction, n_neq_total, t);
    let n1 = thermal_qp_density(junction.electrode1(), t) + p1;
    let n2 = thermal_qp_density(junction.electrode2(), t) + p2;
    QuasiparticleState::new(t, n_neq_total, n1, n2)
}

/// Γ_{e→g} at `state.temperature()`; in nonequilibrium mode the electrodes
/// carry the densities `state.n1()`, `state.n2()`.
pub fn qp_decay_rate(
    q: &TransmonParams,
    junction: &Junction,
    state: &QuasiparticleState,
    mode: OccupationMode,
) -> Result<DecayResult, QubitError> {
    let occ = match mode {
        OccupationMode::Thermal => OccupationModel::Thermal,
        OccupationMode::NonequilibriumDensity => {
            OccupationModel::nonequilibrium(state.n1(), state.n2())?
        }
    };
    let model = TunnelingModel::new(junction, state.temperature(), &occ)?;
    let currents = model.directional(q.photon_energy())?;
    Ok(DecayResult::from_currents(
        q,
        currents.forward,
        currents.backward,
    ))
}

/// T1 over a temperature list (K), evaluated in parallel and returned in input order.
pub fn t1_vs_temperature(
    q: &TransmonParams,
    junction: &Junction,
    n_neq_total: f64,
    temperatures: &[f64],
    mode: OccupationMode,
) -> Result<Vec<(f64, DecayResult)>, QubitError> {
    for (index, &value) in temperatures.iter().enumerate() {
        let increasing = index == 0 || value > temperatures[index - 1];
        if !(value.is_finite() && value > 0.0 && increasing) {
            return Err(QubitError::BadTemperatureList { index, value });
        }
    }
    temperatures
        .par_iter()
        .map(|&t| {
            quasiparticle_state(junction, n_neq_total, t)
                .map_err(QubitError::from)
                .and_then(|state| qp_decay_rate(q, junction, &state, mode))
                .map(|r| (t, r))
                .map_err(|e| QubitError::AtTemperature {
                    temperature: t,
                    source: Box::new(e),
                })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
