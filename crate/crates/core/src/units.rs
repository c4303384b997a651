//! Physical constants and the fixed unit-tag set.
//!
//! Internal convention: energies in μeV, voltages in μV, currents in nA,
//! temperatures in K, resistances in kΩ, conductances in μS and densities
//! in μm⁻³. A bias of 1 μV is identified with an energy of 1 μeV, so
//! `I[nA] = (1 / Rn[kΩ]) · ∫ (...) dE[μeV]` holds without extra factors.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Boltzmann constant in μeV/K (exact SI value).
pub const K_B: f64 = 86.173_332_621_451_77;

/// Planck constant in μeV/GHz (exact SI value).
pub const PLANCK: f64 = 4.135_667_696_923_859;

/// Elementary charge in coulomb (exact SI value).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Read-only bundle of the constants in the internal unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    e: f64,
    h: f64,
    k_b: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        e: ELEMENTARY_CHARGE,
        h: PLANCK,
        k_b: K_B,
    };

    /// Elementary charge, C.
    pub fn e(&self) -> f64 {
        self.e
    }

    /// Planck constant, μeV/GHz.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Boltzmann constant, μeV/K.
    pub fn k_b(&self) -> f64 {
        self.k_b
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// Number of electrons per second carried by a current of 1 nA.
pub fn electrons_per_second(current_na: f64) -> f64 {
    current_na * 1e-9 / ELEMENTARY_CHARGE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Voltage,
    Current,
    Energy,
    Temperature,
    Resistance,
    Conductance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    MicroVolt,
    MilliVolt,
    Volt,
    NanoAmp,
    MicroAmp,
    MicroElectronVolt,
    MilliElectronVolt,
    Kelvin,
    MilliKelvin,
    KiloOhm,
    Ohm,
    MicroSiemens,
    Siemens,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("cannot convert {from} to {to}: dimension mismatch")]
    DimensionMismatch { from: Unit, to: Unit },
    #[error("unknown unit tag `{0}`")]
    UnknownTag(String),
}

impl Unit {
    pub const ALL: [Unit; 13] = [
        Unit::MicroVolt,
        Unit::MilliVolt,
        Unit::Volt,
        Unit::NanoAmp,
        Unit::MicroAmp,
        Unit::MicroElectronVolt,
        Unit::MilliElectronVolt,
        Unit::Kelvin,
        Unit::MilliKelvin,
        Unit::KiloOhm,
        Unit::Ohm,
        Unit::MicroSiemens,
        Unit::Siemens,
    ];

    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            MicroVolt | MilliVolt | Volt => Dimension::Voltage,
            NanoAmp | MicroAmp => Dimension::Current,
            MicroElectronVolt | MilliElectronVolt => Dimension::Energy,
            Kelvin | MilliKelvin => Dimension::Temperature,
            KiloOhm | Ohm => Dimension::Resistance,
            MicroSiemens | Siemens => Dimension::Conductance,
        }
    }

    /// Power of ten of this unit relative to the SI base unit.
    fn exponent(self) -> i32 {
        use Unit::*;
        match self {
            MicroVolt | MicroAmp | MicroElectronVolt | MicroSiemens => -6,
            MilliVolt | MilliElectronVolt | MilliKelvin => -3,
            Volt | Kelvin | Ohm | Siemens => 0,
            NanoAmp => -9,
            KiloOhm => 3,
        }
    }

    /// ASCII tag used in file headers (`uV`, `nA`, ...).
    pub fn tag(self) -> &'static str {
        use Unit::*;
        match self {
            MicroVolt => "uV",
            MilliVolt => "mV",
            Volt => "V",
            NanoAmp => "nA",
            MicroAmp => "uA",
            MicroElectronVolt => "ueV",
            MilliElectronVolt => "meV",
            Kelvin => "K",
            MilliKelvin => "mK",
            KiloOhm => "kOhm",
            Ohm => "Ohm",
            MicroSiemens => "uS",
            Siemens => "S",
        }
    }

    /// The unit every value of this dimension is stored in internally.
    pub fn internal(dimension: Dimension) -> Unit {
        match dimension {
            Dimension::Voltage => Unit::MicroVolt,
            Dimension::Current => Unit::NanoAmp,
            Dimension::Energy => Unit::MicroElectronVolt,
            Dimension::Temperature => Unit::Kelvin,
            Dimension::Resistance => Unit::KiloOhm,
            Dimension::Conductance => Unit::MicroSiemens,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Unit {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Unit::*;
        let unit = match s.trim() {
            "uV" | "μV" | "µV" => MicroVolt,
            "mV" => MilliVolt,
            "V" => Volt,
            "nA" => NanoAmp,
            "uA" | "μA" | "µA" => MicroAmp,
            "ueV" | "μeV" | "µeV" => MicroElectronVolt,
            "meV" => MilliElectronVolt,
            "K" => Kelvin,
            "mK" => MilliKelvin,
            "kOhm" | "kΩ" => KiloOhm,
            "Ohm" | "Ω" => Ohm,
            "uS" | "μS" | "µS" => MicroSiemens,
            "S" => Siemens,
            other => return Err(UnitError::UnknownTag(other.to_string())),
        };
        Ok(unit)
    }
}

/// Rescales `value` from one unit to another of the same dimension.
///
/// The scale factor is an exact power of ten and is applied with a single
/// correctly rounded multiplication or division.
pub fn unit_convert(value: f64, from: Unit, to: Unit) -> Result<f64, UnitError> {
    if from.dimension() != to.dimension() {
        return Err(UnitError::DimensionMismatch { from, to });
    }
    let shift = from.exponent() - to.exponent();
    let factor = 10f64.powi(shift.abs());
    Ok(match shift.signum() {
        0 => value,
        1 => value * factor,
        _ => value / factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_of_ten_examples() {
        assert_eq!(
            unit_convert(380.0, Unit::MicroVolt, Unit::MilliVolt).unwrap(),
            0.38
        );
        assert_eq!(
            unit_convert(190.0, Unit::MicroElectronVolt, Unit::MicroElectronVolt).unwrap(),
            190.0
        );
        assert_eq!(
            unit_convert(18.6, Unit::KiloOhm, Unit::Ohm).unwrap(),
            18600.0
        );
        assert_eq!(
            unit_convert(20.0, Unit::MilliKelvin, Unit::Kelvin).unwrap(),
            0.02
        );
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let err = unit_convert(1.0, Unit::MicroVolt, Unit::NanoAmp).unwrap_err();
        assert!(matches!(err, UnitError::DimensionMismatch { .. }));
    }

    #[test]
    fn tags_parse_back() {
        for unit in Unit::ALL {
            assert_eq!(unit.tag().parse::<Unit>().unwrap(), unit);
        }
        assert_eq!("μV".parse::<Unit>().unwrap(), Unit::MicroVolt);
        assert!("furlong".parse::<Unit>().is_err());
    }

    #[test]
    fn constants_in_internal_units() {
        // 5.1 GHz qubit photon
        assert!((PLANCK * 5.1 - 21.0919).abs() < 1e-4);
        assert!((K_B * 0.05 - 4.3087).abs() < 1e-4);
        assert_eq!(PhysicalConstants::default().k_b(), K_B);
    }

    fn ulps_apart(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    fn same_dimension_pair() -> impl Strategy<Value = (Unit, Unit)> {
        let pairs: Vec<(Unit, Unit)> = Unit::ALL
            .iter()
            .flat_map(|&a| Unit::ALL.iter().map(move |&b| (a, b)))
            .filter(|(a, b)| a.dimension() == b.dimension())
            .collect();
        proptest::sample::select(pairs)
    }

    proptest! {
        #[test]
        fn round_trip_within_one_ulp(x in -1e12f64..1e12, (from, to) in same_dimension_pair()) {
            let there = unit_convert(x, from, to).unwrap();
            let back = unit_convert(there, to, from).unwrap();
            prop_assert!(ulps_apart(back, x) <= 1, "{x} -> {there} -> {back}");
        }

        #[test]
        fn integers_round_trip_exactly_via_smaller_unit(
            n in -1_000_000i64..1_000_000,
            (from, to) in same_dimension_pair(),
        ) {
            // scaling an integer up by 10^k stays exact below 2^53, so the way back is exact too
            let (from, to) = if from.exponent() >= to.exponent() { (from, to) } else { (to, from) };
            let x = n as f64;
            let back = unit_convert(unit_convert(x, from, to).unwrap(), to, from).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
