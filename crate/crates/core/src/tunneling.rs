//! Quasiparticle tunneling across an asymmetric-gap SIS junction.
//!
//! Currents are evaluated in the semiconductor picture:
//!
//! ```text
//! I(V)   = (1/Rn) ∫ n₁(E) n₂(E+eV) [f₁(E)(1 − f₂(E+eV)) − (1 − f₁(E)) f₂(E+eV)] dE
//! I_fwd  = (1/Rn) ∫ n₁(E) n₂(E+eV) f₁(E)(1 − f₂(E+eV)) dE
//! I_bwd  = (1/Rn) ∫ n₁(E) n₂(E+eV) (1 − f₁(E)) f₂(E+eV) dE
//! ```
//!
//! with `f` the occupation of a state and `1 − f` computed directly (not by
//! subtraction) so that deep-tail occupations keep full relative precision.

use rayon::prelude::*;
use thiserror::Error;

use crate::bcs::{dos, gap_at_temperature, DosProfile};
use crate::quad::{build_panels, integrate, Panel, QuadError, QuadSettings};
use crate::types::{ElectrodeIndex, InvalidParameter, Junction, DYNES_FLOOR_FRACTION};
use crate::units::K_B;

/// Truncation half-width of the energy integral in units of the largest gap.
const GAP_SPAN: f64 = 32.0;
/// Thermal margin added to the truncation, in units of k_B·T.
const THERMAL_SPAN: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TunnelingError {
    #[error("quadrature failed at bias {bias} uV: {source}")]
    QuadratureFailure {
        bias: f64,
        #[source]
        source: QuadError,
    },
    #[error("electrode {electrode}: density {density} um^-3 needs an occupation above 1 at the gap edge (scale {scale:e})")]
    NonNormalizable {
        electrode: u8,
        density: f64,
        scale: f64,
    },
    #[error(transparent)]
    Invalid(#[from] InvalidParameter),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OccupationMode {
    Thermal,
    NonequilibriumDensity,
}

/// How the electrodes' quasiparticle states are occupied.
///
/// `NonequilibriumDensity` keeps the thermal shape above the gap but rescales
/// it by one scalar per electrode so the quasiparticle density equals the
/// requested value. Subgap (Dynes) states keep their thermal occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OccupationModel {
    Thermal,
    NonequilibriumDensity { n1: f64, n2: f64 },
}

impl OccupationModel {
    pub fn nonequilibrium(n1: f64, n2: f64) -> Result<Self, InvalidParameter> {
        for (field, n) in [("n1", n1), ("n2", n2)] {
            if !(n.is_finite() && n >= 0.0) {
                return Err(InvalidParameter {
                    field,
                    message: format!("{n} violates density >= 0"),
                });
            }
        }
        Ok(OccupationModel::NonequilibriumDensity { n1, n2 })
    }

    pub fn mode(&self) -> OccupationMode {
        match self {
            OccupationModel::Thermal => OccupationMode::Thermal,
            OccupationModel::NonequilibriumDensity { .. } => OccupationMode::NonequilibriumDensity,
        }
    }
}

/// Occupation function of one electrode, ready for the integrands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElectrodeOccupation {
    Thermal {
        kt: f64,
    },
    /// Above the gap: `a·fermi(E)`, stored as `a·exp(−Δ/k_BT)` to stay finite at mK temperatures.
    Scaled {
        kt: f64,
        gap: f64,
        reduced_scale: f64,
    },
}

impl ElectrodeOccupation {
    /// `(f, 1 − f)` at energy `e` (μeV), both to full relative precision.
    #[inline]
    pub fn filled_empty(&self, e: f64) -> (f64, f64) {
        match *self {
            ElectrodeOccupation::Thermal { kt } => thermal_pair(e, kt),
            ElectrodeOccupation::Scaled {
                kt,
                gap,
                reduced_scale,
            } => {
                let ae = e.abs();
                if ae < gap {
                    return thermal_pair(e, kt);
                }
                let q = reduced_scale * (-(ae - gap) / kt).exp() / (1.0 + (-ae / kt).exp());
                if e >= 0.0 {
                    (q, 1.0 - q)
                } else {
                    (1.0 - q, q)
                }
            }
        }
    }

    /// The scalar `a` multiplying the thermal shape (1 in thermal mode; may overflow to ∞).
    pub fn scale(&self) -> f64 {
        match *self {
            ElectrodeOccupation::Thermal { .. } => 1.0,
            ElectrodeOccupation::Scaled {
                kt,
                gap,
                reduced_scale,
            } => reduced_scale * (gap / kt).exp(),
        }
    }
}

#[inline]
fn thermal_pair(e: f64, kt: f64) -> (f64, f64) {
    let x = e / kt;
    let t = (-x.abs()).exp();
    let big = 1.0 / (1.0 + t);
    let small = t / (1.0 + t);
    if x >= 0.0 {
        (small, big)
    } else {
        (big, small)
    }
}

/// `∫_Δ^∞ n_BCS(E)·fermi(E)·exp(Δ/k_BT) dE` with the sharp BCS density of states.
fn reduced_thermal_integral(gap: f64, kt: f64) -> Result<f64, QuadError> {
    let panels = [Panel {
        lo: gap,
        hi: gap + 80.0 * kt,
        singular_lo: true,
        singular_hi: false,
    }];
    let sharp = DosProfile::new(gap, 0.0).expect("gap at temperature is finite and non-negative");
    let r = integrate(
        |e| [dos(e, &sharp) * (-(e - gap) / kt).exp() / (1.0 + (-e / kt).exp())],
        &panels,
        &QuadSettings {
            rel_tol: 1e-10,
            ..QuadSettings::default()
        },
    )?;
    Ok(r.value[0])
}

/// Resolves the occupation of one electrode at temperature `t` (K).
///
/// In nonequilibrium mode the scale `a` satisfies
/// `4·n0·∫_Δ^∞ n_BCS(E)·a·fermi(E) dE = n_i`, the same counting that yields
/// the closed-form thermal density, and must keep `a·fermi(Δ) ≤ 1`.
pub fn resolve_occupation(
    junction: &Junction,
    index: ElectrodeIndex,
    t: f64,
    occ: &OccupationModel,
) -> Result<ElectrodeOccupation, TunnelingError> {
    let kt = K_B * t;
    let density = match (*occ, index) {
        (OccupationModel::Thermal, _) => return Ok(ElectrodeOccupation::Thermal { kt }),
        (OccupationModel::NonequilibriumDensity { n1, .. }, ElectrodeIndex::Bottom) => n1,
        (OccupationModel::NonequilibriumDensity { n2, .. }, ElectrodeIndex::Counter) => n2,
    };
    let electrode = junction.electrode(index);
    let gap = gap_at_temperature(electrode.gap0(), t);
    let integral =
        reduced_thermal_integral(gap, kt).map_err(|source| TunnelingError::QuadratureFailure {
            bias: f64::NAN,
            source,
        })?;
    let reduced_scale = if density == 0.0 {
        0.0
    } else {
        density / (4.0 * electrode.n0() * integral)
    };
    let edge_occupation = reduced_scale / (1.0 + (-gap / kt).exp());
    if !(edge_occupation <= 1.0) {
        return Err(TunnelingError::NonNormalizable {
            electrode: index.number(),
            density,
            scale: reduced_scale * (gap / kt).exp(),
        });
    }
    Ok(ElectrodeOccupation::Scaled {
        kt,
        gap,
        reduced_scale,
    })
}

/// Occupation of electrode `index` at energy `e` (μeV).
pub fn occupation_at(
    junction: &Junction,
    index: ElectrodeIndex,
    e: f64,
    t: f64,
    occ: &OccupationModel,
) -> Result<f64, TunnelingError> {
    Ok(resolve_occupation(junction, index, t, occ)?
        .filled_empty(e)
        .0)
}

/// Splits a total nonequilibrium density between the electrodes in proportion
/// to `n0_i·sqrt(k_BT·Δ_i(T))·exp(−Δ_i(T)/k_BT)`; `n1 + n2 == n_total` exactly.
pub fn partition_nonequilibrium(junction: &Junction, n_total: f64, t: f64) -> (f64, f64) {
    if n_total == 0.0 {
        return (0.0, 0.0);
    }
    let kt = K_B * t;
    let log_weight = |index: ElectrodeIndex| {
        let e = junction.electrode(index);
        let gap = gap_at_temperature(e.gap0(), t);
        if gap == 0.0 {
            // normal electrode: flat occupation, weight ~ n0·k_BT
            e.n0().ln() + kt.ln()
        } else {
            e.n0().ln() + 0.5 * (kt * gap).ln() - gap / kt
        }
    };
    let (l1, l2) = (
        log_weight(ElectrodeIndex::Bottom),
        log_weight(ElectrodeIndex::Counter),
    );
    let n1 = n_total / (1.0 + (l2 - l1).exp());
    (n1, n_total - n1)
}

/// Forward and backward quasiparticle currents (nA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalCurrents {
    pub forward: f64,
    pub backward: f64,
}

impl DirectionalCurrents {
    pub fn sum(&self) -> f64 {
        self.forward + self.backward
    }

    pub fn net(&self) -> f64 {
        self.forward - self.backward
    }
}

/// A junction at fixed temperature and occupation, resolved once and then
/// evaluated at many biases.
#[derive(Debug, Clone)]
pub struct TunnelingModel {
    profile1: DosProfile,
    profile2: DosProfile,
    occ1: ElectrodeOccupation,
    occ2: ElectrodeOccupation,
    rn: f64,
    kt: f64,
    settings: QuadSettings,
}

impl TunnelingModel {
    pub fn new(junction: &Junction, t: f64, occ: &OccupationModel) -> Result<Self, TunnelingError> {
        Self::with_settings(junction, t, occ, QuadSettings::default())
    }

    pub fn with_settings(
        junction: &Junction,
        t: f64,
        occ: &OccupationModel,
        settings: QuadSettings,
    ) -> Result<Self, TunnelingError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(InvalidParameter {
                field: "temperature",
                message: format!("{t} violates temperature > 0"),
            }
            .into());
        }
        let profile = |index: ElectrodeIndex| {
            let e = junction.electrode(index);
            let gap = gap_at_temperature(e.gap0(), t);
            DosProfile::new(gap, e.dynes().max(DYNES_FLOOR_FRACTION * gap))
        };
        Ok(Self {
            profile1: profile(ElectrodeIndex::Bottom)?,
            profile2: profile(ElectrodeIndex::Counter)?,
            occ1: resolve_occupation(junction, ElectrodeIndex::Bottom, t, occ)?,
            occ2: resolve_occupation(junction, ElectrodeIndex::Counter, t, occ)?,
            rn: junction.rn(),
            kt: K_B * t,
            settings,
        })
    }

    /// Effective density-of-states profiles (gap at T, floored Dynes width).
    pub fn profiles(&self) -> (DosProfile, DosProfile) {
        (self.profile1, self.profile2)
    }

    pub fn occupations(&self) -> (ElectrodeOccupation, ElectrodeOccupation) {
        (self.occ1, self.occ2)
    }

    /// Integration panels for bias energy `ev`: DOS edges are singular
    /// points, Fermi steps and ±40·k_BT around every feature are breaks.
    pub fn panels(&self, ev: f64) -> Vec<Panel> {
        let (g1, g2) = (self.profile1.gap(), self.profile2.gap());
        let span = (GAP_SPAN * g1.max(g2) + THERMAL_SPAN * self.kt).max(1.0);
        let lo = -span - ev.max(0.0);
        let hi = span + (-ev).max(0.0);
        let mut edges = Vec::with_capacity(4);
        if g1 > 0.0 {
            edges.extend([-g1, g1]);
        }
        if g2 > 0.0 {
            edges.extend([-g2 - ev, g2 - ev]);
        }
        let margin = THERMAL_SPAN * self.kt;
        let mut breaks = vec![0.0, -ev];
        for &p in edges.iter().chain([0.0, -ev].iter()) {
            breaks.push(p - margin);
            breaks.push(p + margin);
        }
        build_panels(lo, hi, &edges, &breaks)
    }

    #[inline]
    fn weights(&self, e: f64, ev: f64) -> (f64, (f64, f64), (f64, f64)) {
        let d = dos(e, &self.profile1) * dos(e + ev, &self.profile2);
        (d, self.occ1.filled_empty(e), self.occ2.filled_empty(e + ev))
    }

    /// Net quasiparticle current (nA) at bias `v` (μV).
    pub fn current(&self, v: f64) -> Result<f64, TunnelingError> {
        let panels = self.panels(v);
        let r = integrate(
            |e| {
                let (d, (f1, e1), (f2, e2)) = self.weights(e, v);
                [d * (f1 * e2 - e1 * f2)]
            },
            &panels,
            &self.settings,
        )
        .map_err(|source| TunnelingError::QuadratureFailure { bias: v, source })?;
        Ok(r.value[0] / self.rn)
    }

    /// Forward and backward currents (nA) at bias `v` (μV), integrated on a
    /// common mesh together with the net current.
    pub fn directional(&self, v: f64) -> Result<DirectionalCurrents, TunnelingError> {
        let panels = self.panels(v);
        let r = integrate(
            |e| {
                let (d, (f1, e1), (f2, e2)) = self.weights(e, v);
                let fwd = d * f1 * e2;
                let bwd = d * e1 * f2;
                [fwd, bwd, d * (f1 * e2 - e1 * f2)]
            },
            &panels,
            &self.settings,
        )
        .map_err(|source| TunnelingError::QuadratureFailure { bias: v, source })?;
        Ok(DirectionalCurrents {
            forward: r.value[0] / self.rn,
            backward: r.value[1] / self.rn,
        })
    }

    /// Net current over a bias grid; evaluated in parallel, ordered as the input.
    pub fn sweep(&self, biases: &[f64]) -> Result<Vec<f64>, TunnelingError> {
        biases
            .par_iter()
            .map(|&v| self.current(v))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }
}

/// Net quasiparticle current (nA) at bias `v` (μV) and temperature `t` (K).
pub fn qp_current(
    junction: &Junction,
    v: f64,
    t: f64,
    occ: &OccupationModel,
) -> Result<f64, TunnelingError> {
    TunnelingModel::new(junction, t, occ)?.current(v)
}

/// Forward/backward decomposition of [`qp_current`].
pub fn directional_currents(
    junction: &Junction,
    v: f64,
    t: f64,
    occ: &OccupationModel,
) -> Result<DirectionalCurrents, TunnelingError> {
    TunnelingModel::new(junction, t, occ)?.directional(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcs::{fermi, thermal_qp_density};
    use crate::types::{Electrode, N0_ALUMINUM};

    fn junction(g1: f64, g2: f64, dyn_frac: f64, rn: f64) -> Junction {
        let e1 = Electrode::new(g1, dyn_frac * g1, N0_ALUMINUM, 30.0).unwrap();
        let e2 = Electrode::new(g2, dyn_frac * g2, N0_ALUMINUM, 30.0).unwrap();
        Junction::new(e1, e2, rn, 0.0).unwrap()
    }

    #[test]
    fn hard_gap_blocks_subgap_current() {
        let j = junction(190.0, 190.0, 0.0, 18.6);
        let i = qp_current(&j, 190.0, 0.02, &OccupationModel::Thermal).unwrap();
        assert!(i.abs() < 1e-3, "{i}");
    }

    #[test]
    fn zero_bias_detailed_balance() {
        let j = junction(190.0, 190.0, 1e-3, 10.0);
        let d = directional_currents(&j, 0.0, 0.05, &OccupationModel::Thermal).unwrap();
        assert_eq!(d.forward, d.backward);
        let i = qp_current(&j, 0.0, 0.05, &OccupationModel::Thermal).unwrap();
        assert_eq!(i, 0.0);
    }

    #[test]
    fn directional_currents_are_nonnegative_and_consistent() {
        let j = junction(190.0, 120.0, 1e-3, 7.0);
        for &(v, t) in &[(21.1, 0.02), (150.0, 0.1), (-300.0, 0.05), (400.0, 0.2)] {
            let d = directional_currents(&j, v, t, &OccupationModel::Thermal).unwrap();
            let i = qp_current(&j, v, t, &OccupationModel::Thermal).unwrap();
            assert!(d.forward >= 0.0 && d.backward >= 0.0);
            assert!(
                (d.net() - i).abs() <= 1e-5 * i.abs(),
                "v={v}: {} vs {i}",
                d.net()
            );
        }
    }

    #[test]
    fn partition_examples() {
        let sym = junction(190.0, 190.0, 1e-3, 10.0);
        assert_eq!(partition_nonequilibrium(&sym, 1.0, 0.05), (0.5, 0.5));
        assert_eq!(partition_nonequilibrium(&sym, 0.0, 0.05), (0.0, 0.0));
        let asym = junction(190.0, 110.0, 1e-3, 10.0);
        let (n1, n2) = partition_nonequilibrium(&asym, 1.0, 0.02);
        assert_eq!(n1 + n2, 1.0);
        // weight ratio exp(-(190 - 110)/k_B·0.02 K) ≈ e^-46
        assert!(n2 > 1.0 - 1e-6);
        assert!(n1 < 1e-19 && n1 > 0.0);
    }

    #[test]
    fn partition_conserves_and_is_continuous() {
        let j = junction(190.0, 150.0, 1e-3, 10.0);
        let mut prev = partition_nonequilibrium(&j, 0.7, 0.02);
        let mut t = 0.02;
        while t < 0.6 {
            t += 1e-4;
            let cur = partition_nonequilibrium(&j, 0.7, t);
            assert_eq!(cur.0 + cur.1, 0.7);
            assert!((cur.0 - prev.0).abs() < 2e-3);
            prev = cur;
        }
    }

    #[test]
    fn thermal_occupation_is_fermi() {
        let j = junction(190.0, 190.0, 1e-3, 10.0);
        for e in [-300.0, -5.0, 0.0, 3.0, 250.0] {
            let f = occupation_at(
                &j,
                ElectrodeIndex::Bottom,
                e,
                0.05,
                &OccupationModel::Thermal,
            )
            .unwrap();
            assert!((f - fermi(e, 0.05)).abs() <= 1e-16);
        }
    }

    #[test]
    fn occupation_scale_matches_thermal_density() {
        let j = junction(190.0, 190.0, 1e-3, 10.0);
        for t in [0.02, 0.03, 0.05] {
            let n = thermal_qp_density(j.electrode1(), t);
            let occ = OccupationModel::nonequilibrium(n, n).unwrap();
            let resolved = resolve_occupation(&j, ElectrodeIndex::Bottom, t, &occ).unwrap();
            // asymptotic closed form vs exact Bessel-type integral: K1 correction ≈ 3k_BT/8Δ
            assert!(
                (resolved.scale() - 1.0).abs() < 1e-2,
                "T={t}: a = {}",
                resolved.scale()
            );
        }
    }

    #[test]
    fn empty_nonequilibrium_electrode() {
        let j = junction(190.0, 110.0, 1e-3, 10.0);
        let occ = OccupationModel::nonequilibrium(0.0, 1.0).unwrap();
        for e in [190.0, 200.0, 400.0, -250.0] {
            let f = occupation_at(&j, ElectrodeIndex::Bottom, e, 0.02, &occ).unwrap();
            assert_eq!(f, if e > 0.0 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn overfull_density_is_rejected() {
        let j = junction(190.0, 110.0, 1e-3, 10.0);
        let occ = OccupationModel::nonequilibrium(1e9, 0.0).unwrap();
        let err = resolve_occupation(&j, ElectrodeIndex::Bottom, 0.02, &occ).unwrap_err();
        assert!(matches!(
            err,
            TunnelingError::NonNormalizable { electrode: 1, .. }
        ));
        assert!(OccupationModel::nonequilibrium(-1.0, 0.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_temperature() {
        let j = junction(190.0, 110.0, 1e-3, 10.0);
        assert!(qp_current(&j, 10.0, 0.0, &OccupationModel::Thermal).is_err());
    }
}
