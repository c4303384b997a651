//! BCS primitives: Dynes-broadened density of states, Fermi occupation,
//! temperature dependence of the gap and the thermal quasiparticle density.

use num_complex::Complex64;
use thiserror::Error;

use crate::types::{Electrode, InvalidParameter};
use crate::units::K_B;

/// Ratio Δ₀ / (k_B·T_c) of weak-coupling BCS theory.
pub const BCS_GAP_RATIO: f64 = 1.764;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BcsError {
    #[error("density of states is singular at |E| = gap = {gap} with zero broadening")]
    DegenerateProfile { gap: f64 },
}

/// Gap and Dynes broadening (both μeV) at the evaluation temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DosProfile {
    gap: f64,
    dynes: f64,
}

impl DosProfile {
    pub fn new(gap: f64, dynes: f64) -> Result<Self, InvalidParameter> {
        if !(gap.is_finite() && gap >= 0.0) {
            return Err(InvalidParameter {
                field: "gap",
                message: format!("{gap} violates gap >= 0"),
            });
        }
        if !(dynes.is_finite() && dynes >= 0.0) {
            return Err(InvalidParameter {
                field: "dynes",
                message: format!("{dynes} violates dynes >= 0"),
            });
        }
        Ok(Self { gap, dynes })
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn dynes(&self) -> f64 {
        self.dynes
    }
}

/// Reduced density of states `|Re[(E − iΓ)/sqrt((E − iΓ)² − Δ²)]|`.
///
/// Evaluated at `|E|`, so the result is exactly even in `E`. A vanishing gap
/// gives the normal-metal value 1. With `Γ = 0` the result is exactly zero
/// inside the gap and infinite at `|E| = Δ`; see [`checked_dos`].
#[inline]
pub fn dos(energy: f64, profile: &DosProfile) -> f64 {
    let delta = profile.gap;
    if delta == 0.0 {
        return 1.0;
    }
    let e = energy.abs();
    let gamma = profile.dynes;
    if gamma == 0.0 {
        return if e <= delta {
            if e == delta {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            e / ((e - delta) * (e + delta)).sqrt()
        };
    }
    let z = Complex64::new(e, -gamma);
    let root = (z * z - delta * delta).sqrt();
    (z / root).re.abs()
}

/// [`dos`] that reports the zero-broadening edge singularity as an error.
pub fn checked_dos(energy: f64, profile: &DosProfile) -> Result<f64, BcsError> {
    if profile.gap > 0.0 && profile.dynes == 0.0 && energy.abs() == profile.gap {
        return Err(BcsError::DegenerateProfile { gap: profile.gap });
    }
    Ok(dos(energy, profile))
}

/// Fermi function `1 / (1 + exp(E / k_B T))`, safe for any finite argument.
#[inline]
pub fn fermi(energy: f64, temperature: f64) -> f64 {
    let x = energy / (K_B * temperature);
    if x >= 0.0 {
        let t = (-x).exp();
        t / (1.0 + t)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Critical temperature (K) from the zero-temperature gap (μeV).
pub fn tc_from_gap(gap0: f64) -> f64 {
    gap0 / (BCS_GAP_RATIO * K_B)
}

/// Gap at temperature `T` from the interpolation `Δ₀·tanh(1.74·sqrt(T_c/T − 1))`.
pub fn gap_at_temperature(gap0: f64, temperature: f64) -> f64 {
    if gap0 <= 0.0 {
        return 0.0;
    }
    if temperature <= 0.0 {
        return gap0;
    }
    let tc = tc_from_gap(gap0);
    if temperature >= tc {
        return 0.0;
    }
    gap0 * (1.74 * (tc / temperature - 1.0).sqrt()).tanh()
}

/// Equilibrium quasiparticle density (μm⁻³),
/// `2·n0·sqrt(2π·k_B·T·Δ(T))·exp(−Δ(T)/k_B·T)`.
pub fn thermal_qp_density(electrode: &Electrode, temperature: f64) -> f64 {
    let kt = K_B * temperature;
    let gap = gap_at_temperature(electrode.gap0(), temperature);
    2.0 * electrode.n0() * (2.0 * std::f64::consts::PI * kt * gap).sqrt() * (-gap / kt).exp()
}
