//! Shared value types. Constructors enforce the field invariants, so any
//! value that exists is valid.

use std::fmt;

use thiserror::Error;

use crate::kv::{key, FromKv, KvBlock, KvError, ToKv};

/// Single-spin density of states at the Fermi level of Al, μeV⁻¹·μm⁻³.
pub const N0_ALUMINUM: f64 = 1.72e4;
/// Ti single-spin density of states, taken as 2.7× the Al value.
pub const N0_TITANIUM: f64 = 2.7 * N0_ALUMINUM;
/// Default Dynes broadening as a fraction of the gap.
pub const DEFAULT_DYNES_FRACTION: f64 = 1e-3;
/// Lower bound on the Dynes broadening used in simulation, as a fraction of the gap.
pub const DYNES_FLOOR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid {field}: {message}")]
pub struct InvalidParameter {
    pub field: &'static str,
    pub message: String,
}

impl InvalidParameter {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

fn check(field: &'static str, value: f64, ok: bool, rule: &str) -> Result<(), InvalidParameter> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(InvalidParameter::new(
            field,
            format!("{value} violates {rule}"),
        ))
    }
}

/// One superconducting film (or effective bilayer).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Electrode {
    gap0: f64,
    dynes: f64,
    n0: f64,
    thickness: f64,
}

impl Electrode {
    /// `gap0` and `dynes` in μeV, `n0` in μeV⁻¹·μm⁻³, `thickness` in nm.
    pub fn new(gap0: f64, dynes: f64, n0: f64, thickness: f64) -> Result<Self, InvalidParameter> {
        check("gap0", gap0, gap0 >= 0.0, "gap0 >= 0")?;
        check("dynes", dynes, dynes >= 0.0, "dynes >= 0")?;
        check("n0", n0, n0 > 0.0, "n0 > 0")?;
        check("thickness", thickness, thickness > 0.0, "thickness > 0")?;
        Ok(Self {
            gap0,
            dynes,
            n0,
            thickness,
        })
    }

    /// Al film with the default Dynes broadening and a 30 nm thickness.
    pub fn aluminum(gap0: f64) -> Result<Self, InvalidParameter> {
        Self::new(gap0, DEFAULT_DYNES_FRACTION * gap0, N0_ALUMINUM, 30.0)
    }

    pub fn gap0(&self) -> f64 {
        self.gap0
    }

    pub fn dynes(&self) -> f64 {
        self.dynes
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn with_gap0(self, gap0: f64) -> Result<Self, InvalidParameter> {
        Self::new(gap0, self.dynes, self.n0, self.thickness)
    }

    pub fn with_dynes(self, dynes: f64) -> Result<Self, InvalidParameter> {
        Self::new(self.gap0, dynes, self.n0, self.thickness)
    }

    pub fn with_n0(self, n0: f64) -> Result<Self, InvalidParameter> {
        Self::new(self.gap0, self.dynes, n0, self.thickness)
    }

    pub fn with_thickness(self, thickness: f64) -> Result<Self, InvalidParameter> {
        Self::new(self.gap0, self.dynes, self.n0, thickness)
    }
}

/// SIS junction: bottom electrode, counter-electrode, Rₙ (kΩ) and barrier transparency D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    electrode1: Electrode,
    electrode2: Electrode,
    rn: f64,
    transparency: f64,
}

impl Junction {
    pub fn new(
        electrode1: Electrode,
        electrode2: Electrode,
        rn: f64,
        transparency: f64,
    ) -> Result<Self, InvalidParameter> {
        check("rn", rn, rn > 0.0, "rn > 0")?;
        check(
            "transparency",
            transparency,
            (0.0..=1.0).contains(&transparency),
            "0 <= transparency <= 1",
        )?;
        Ok(Self {
            electrode1,
            electrode2,
            rn,
            transparency,
        })
    }

    /// Convenience constructor for two Al-like electrodes with default broadening.
    pub fn symmetric_al(gap1: f64, gap2: f64, rn: f64) -> Result<Self, InvalidParameter> {
        Self::new(
            Electrode::aluminum(gap1)?,
            Electrode::aluminum(gap2)?,
            rn,
            0.0,
        )
    }

    pub fn electrode1(&self) -> &Electrode {
        &self.electrode1
    }

    pub fn electrode2(&self) -> &Electrode {
        &self.electrode2
    }

    /// Electrode selected by position (bottom or counter).
    pub fn electrode(&self, index: ElectrodeIndex) -> &Electrode {
        match index {
            ElectrodeIndex::Bottom => &self.electrode1,
            ElectrodeIndex::Counter => &self.electrode2,
        }
    }

    pub fn rn(&self) -> f64 {
        self.rn
    }

    pub fn transparency(&self) -> f64 {
        self.transparency
    }

    pub fn with_rn(self, rn: f64) -> Result<Self, InvalidParameter> {
        Self::new(self.electrode1, self.electrode2, rn, self.transparency)
    }

    pub fn with_transparency(self, transparency: f64) -> Result<Self, InvalidParameter> {
        Self::new(self.electrode1, self.electrode2, self.rn, transparency)
    }

    pub fn with_electrodes(self, electrode1: Electrode, electrode2: Electrode) -> Self {
        Self {
            electrode1,
            electrode2,
            ..self
        }
    }

    /// Gap sum Δ₁ + Δ₂ at zero temperature, μeV.
    pub fn gap_sum(&self) -> f64 {
        self.electrode1.gap0 + self.electrode2.gap0
    }
}

/// Selects electrode 1 (bottom) or 2 (counter-electrode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElectrodeIndex {
    Bottom,
    Counter,
}

impl ElectrodeIndex {
    pub fn number(self) -> u8 {
        match self {
            ElectrodeIndex::Bottom => 1,
            ElectrodeIndex::Counter => 2,
        }
    }
}

/// Temperature plus per-electrode quasiparticle densities (μm⁻³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiparticleState {
    temperature: f64,
    n_neq_total: f64,
    n1: f64,
    n2: f64,
}

impl QuasiparticleState {
    pub fn new(
        temperature: f64,
        n_neq_total: f64,
        n1: f64,
        n2: f64,
    ) -> Result<Self, InvalidParameter> {
        check(
            "temperature",
            temperature,
            temperature > 0.0,
            "temperature > 0",
        )?;
        check(
            "n_neq_total",
            n_neq_total,
            n_neq_total >= 0.0,
            "n_neq_total >= 0",
        )?;
        check("n1", n1, n1 >= 0.0, "n1 >= 0")?;
        check("n2", n2, n2 >= 0.0, "n2 >= 0")?;
        Ok(Self {
            temperature,
            n_neq_total,
            n1,
            n2,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn n_neq_total(&self) -> f64 {
        self.n_neq_total
    }

    pub fn n1(&self) -> f64 {
        self.n1
    }

    pub fn n2(&self) -> f64 {
        self.n2
    }
}

/// Transmon charging energy (μeV) and transition frequency (GHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmonParams {
    ec: f64,
    fge: f64,
}

impl TransmonParams {
    pub fn new(ec: f64, fge: f64) -> Result<Self, InvalidParameter> {
        check("ec", ec, ec > 0.0, "ec > 0")?;
        check("fge", fge, fge > 0.0, "fge > 0")?;
        Ok(Self { ec, fge })
    }

    /// Builds the parameters from E_C/h given in MHz.
    pub fn from_ec_mhz(ec_mhz: f64, fge: f64) -> Result<Self, InvalidParameter> {
        Self::new(ec_mhz * 1e-3 * crate::units::PLANCK, fge)
    }

    pub fn ec(&self) -> f64 {
        self.ec
    }

    pub fn fge(&self) -> f64 {
        self.fge
    }

    /// Photon energy h·f_ge in μeV.
    pub fn photon_energy(&self) -> f64 {
        crate::units::PLANCK * self.fge
    }
}

/// A single invariant violation found in a sampled curve.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch { bias: usize, signal: usize },
    NonStrictMonotonicity { index: usize },
    NonFinite { column: &'static str, index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { bias, signal } => {
                write!(
                    f,
                    "length mismatch: {bias} bias samples, {signal} signal samples"
                )
            }
            Violation::NonStrictMonotonicity { index } => {
                write!(f, "bias not strictly increasing at sample {index}")
            }
            Violation::NonFinite { column, index } => {
                write!(f, "non-finite {column} at sample {index}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid curve: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidCurve(pub Vec<Violation>);

/// Collects every invariant violation of a bias/signal pair.
pub fn validate_samples(
    bias: &[f64],
    signal: &[f64],
    signal_name: &'static str,
) -> Result<(), Vec<Violation>> {
    let mut found = Vec::new();
    if bias.len() != signal.len() {
        found.push(Violation::LengthMismatch {
            bias: bias.len(),
            signal: signal.len(),
        });
    }
    for (i, v) in bias.iter().enumerate() {
        if !v.is_finite() {
            found.push(Violation::NonFinite {
                column: "bias",
                index: i,
            });
        }
    }
    for (i, v) in signal.iter().enumerate() {
        if !v.is_finite() {
            found.push(Violation::NonFinite {
                column: signal_name,
                index: i,
            });
        }
    }
    for (i, pair) in bias.windows(2).enumerate() {
        // NaN comparisons are false, so NaNs are reported only once above
        if pair[1] <= pair[0] {
            found.push(Violation::NonStrictMonotonicity { index: i + 1 });
        }
    }
    if found.is_empty() {
        Ok(())
    } else {
        Err(found)
    }
}

/// Checks an IV trace (bias μV, current nA) against the curve invariants.
pub fn validate_iv(bias: &[f64], current: &[f64]) -> Result<(), Vec<Violation>> {
    validate_samples(bias, current, "current")
}

/// Bias (μV) / current (nA) trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IVCurve {
    bias: Vec<f64>,
    current: Vec<f64>,
    label: String,
}

impl IVCurve {
    pub fn new(
        bias: Vec<f64>,
        current: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, InvalidCurve> {
        validate_iv(&bias, &current).map_err(InvalidCurve)?;
        Ok(Self {
            bias,
            current,
            label: label.into(),
        })
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bias.is_empty()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.bias.iter().copied().zip(self.current.iter().copied())
    }
}

/// Bias (μV) / differential conductance (μS) trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceCurve {
    bias: Vec<f64>,
    didv: Vec<f64>,
    label: String,
}

impl ConductanceCurve {
    pub fn new(
        bias: Vec<f64>,
        didv: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, InvalidCurve> {
        validate_samples(&bias, &didv, "didv").map_err(InvalidCurve)?;
        Ok(Self {
            bias,
            didv,
            label: label.into(),
        })
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn didv(&self) -> &[f64] {
        &self.didv
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bias.is_empty()
    }
}

fn rejected(prefix: &str, err: InvalidParameter) -> KvError {
    KvError::Rejected {
        key: key(prefix, err.field),
        message: err.message,
    }
}

impl ToKv for Electrode {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        out.insert(key(prefix, "gap0"), self.gap0);
        out.insert(key(prefix, "dynes"), self.dynes);
        out.insert(key(prefix, "n0"), self.n0);
        out.insert(key(prefix, "thickness"), self.thickness);
    }
}

impl FromKv for Electrode {
    /// `dynes` defaults to 10⁻³·gap0, `n0` to the Al value, `thickness` to 30 nm.
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let gap0: f64 = block.require(&key(prefix, "gap0"))?;
        let dynes = block
            .optional(&key(prefix, "dynes"))?
            .unwrap_or(DEFAULT_DYNES_FRACTION * gap0);
        let n0 = block.optional(&key(prefix, "n0"))?.unwrap_or(N0_ALUMINUM);
        let thickness = block.optional(&key(prefix, "thickness"))?.unwrap_or(30.0);
        Electrode::new(gap0, dynes, n0, thickness).map_err(|e| rejected(prefix, e))
    }
}

impl ToKv for Junction {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        self.electrode1.write_kv(&key(prefix, "electrode1"), out);
        self.electrode2.write_kv(&key(prefix, "electrode2"), out);
        out.insert(key(prefix, "rn"), self.rn);
        out.insert(key(prefix, "transparency"), self.transparency);
    }
}

impl FromKv for Junction {
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let e1 = Electrode::read_kv(block, &key(prefix, "electrode1"))?;
        let e2 = Electrode::read_kv(block, &key(prefix, "electrode2"))?;
        let rn = block.require(&key(prefix, "rn"))?;
        let transparency = block.optional(&key(prefix, "transparency"))?.unwrap_or(0.0);
        Junction::new(e1, e2, rn, transparency).map_err(|e| rejected(prefix, e))
    }
}

impl ToKv for QuasiparticleState {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        out.insert(key(prefix, "temperature"), self.temperature);
        out.insert(key(prefix, "n_neq_total"), self.n_neq_total);
        out.insert(key(prefix, "n1"), self.n1);
        out.insert(key(prefix, "n2"), self.n2);
    }
}

impl FromKv for QuasiparticleState {
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        QuasiparticleState::new(
            block.require(&key(prefix, "temperature"))?,
            block.require(&key(prefix, "n_neq_total"))?,
            block.require(&key(prefix, "n1"))?,
            block.require(&key(prefix, "n2"))?,
        )
        .map_err(|e| rejected(prefix, e))
    }
}

impl ToKv for TransmonParams {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        out.insert(key(prefix, "ec"), self.ec);
        out.insert(key(prefix, "fge"), self.fge);
    }
}

impl FromKv for TransmonParams {
    /// Accepts `ec` (μeV) or `ec_mhz` (E_C/h in MHz).
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let fge = block.require(&key(prefix, "fge"))?;
        let params = match block.optional::<f64>(&key(prefix, "ec"))? {
            Some(ec) => TransmonParams::new(ec, fge),
            None => TransmonParams::from_ec_mhz(block.require(&key(prefix, "ec_mhz"))?, fge),
        };
        params.map_err(|e| rejected(prefix, e))
    }
}

fn write_series(prefix: &str, name: &str, values: &[f64], out: &mut KvBlock) {
    let joined = values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    out.insert(key(prefix, name), joined);
}

fn curve_error(prefix: &str, err: InvalidCurve) -> KvError {
    KvError::Rejected {
        key: key(prefix, "bias"),
        message: err.to_string(),
    }
}

impl ToKv for IVCurve {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        write_series(prefix, "bias", &self.bias, out);
        write_series(prefix, "current", &self.current, out);
        out.insert(key(prefix, "label"), &self.label);
    }
}

impl FromKv for IVCurve {
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let bias = block.list(&key(prefix, "bias"))?.unwrap_or_default();
        let current = block.list(&key(prefix, "current"))?.unwrap_or_default();
        let label = block
            .get(&key(prefix, "label"))
            .unwrap_or_default()
            .to_string();
        IVCurve::new(bias, current, label).map_err(|e| curve_error(prefix, e))
    }
}

impl ToKv for ConductanceCurve {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        write_series(prefix, "bias", &self.bias, out);
        write_series(prefix, "didv", &self.didv, out);
        out.insert(key(prefix, "label"), &self.label);
    }
}

impl FromKv for ConductanceCurve {
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let bias = block.list(&key(prefix, "bias"))?.unwrap_or_default();
        let didv = block.list(&key(prefix, "didv"))?.unwrap_or_default();
        let label = block
            .get(&key(prefix, "label"))
            .unwrap_or_default()
            .to_string();
        ConductanceCurve::new(bias, didv, label).map_err(|e| curve_error(prefix, e))
    }
}
