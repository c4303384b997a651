//! Effective gap of a thin superconducting bilayer in the Cooper limit.
//!
//! With full interface coupling the bilayer gap is the DOS-thickness weighted
//! average `(n0_a·d_a·Δ_a + n0_b·d_b·Δ_b)/(n0_a·d_a + n0_b·d_b)`. A coupling
//! `τ ∈ [0, 1]` interpolates linearly between the decoupled layer `a` (τ = 0)
//! and that average (τ = 1), standing in for a disordered interface barrier.

use thiserror::Error;

use crate::kv::{key, FromKv, KvBlock, KvError, ToKv};
use crate::types::{Electrode, InvalidParameter, N0_TITANIUM};

/// Zero-temperature Ti gap (μeV), from T_c ≈ 0.39 K via the BCS ratio.
pub const TITANIUM_GAP0: f64 = 59.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilayerSpec {
    layer_a: Electrode,
    layer_b: Electrode,
    coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProximityError {
    #[error("measured gap {measured} ueV lies outside the attainable range [{low}, {high}] ueV")]
    OutOfRange { measured: f64, low: f64, high: f64 },
}

impl BilayerSpec {
    pub fn new(
        layer_a: Electrode,
        layer_b: Electrode,
        coupling: f64,
    ) -> Result<Self, InvalidParameter> {
        if !(0.0..=1.0).contains(&coupling) {
            return Err(InvalidParameter {
                field: "coupling",
                message: format!("{coupling} violates 0 <= coupling <= 1"),
            });
        }
        Ok(Self {
            layer_a,
            layer_b,
            coupling,
        })
    }

    /// Layer `a` capped with a Ti film of thickness `ti_thickness` (nm).
    pub fn with_titanium_cap(
        layer_a: Electrode,
        ti_thickness: f64,
        coupling: f64,
    ) -> Result<Self, InvalidParameter> {
        let ti = Electrode::new(TITANIUM_GAP0, 0.0, N0_TITANIUM, ti_thickness)?;
        Self::new(layer_a, ti, coupling)
    }

    pub fn layer_a(&self) -> &Electrode {
        &self.layer_a
    }

    pub fn layer_b(&self) -> &Electrode {
        &self.layer_b
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn with_coupling(self, coupling: f64) -> Result<Self, InvalidParameter> {
        Self::new(self.layer_a, self.layer_b, coupling)
    }

    pub fn with_layer_b(self, layer_b: Electrode) -> Self {
        Self { layer_b, ..self }
    }

    /// Weighted-average gap at full coupling.
    pub fn fully_coupled_gap(&self) -> f64 {
        let (a, b) = (&self.layer_a, &self.layer_b);
        let wa = a.n0() * a.thickness();
        let wb = b.n0() * b.thickness();
        (wa * a.gap0() + wb * b.gap0()) / (wa + wb)
    }
}

/// Effective gap (μeV) `(1 − τ)·Δ_a + τ·Δ_eff(1)`.
pub fn cooper_limit_gap(spec: &BilayerSpec) -> f64 {
    let tau = spec.coupling;
    (1.0 - tau) * spec.layer_a.gap0() + tau * spec.fully_coupled_gap()
}

/// Coupling τ that reproduces `measured_gap` (μeV).
pub fn calibrate_coupling(spec: &BilayerSpec, measured_gap: f64) -> Result<f64, ProximityError> {
    let gap_a = spec.layer_a.gap0();
    let full = spec.fully_coupled_gap();
    let (low, high) = if full <= gap_a {
        (full, gap_a)
    } else {
        (gap_a, full)
    };
    if !(measured_gap >= low && measured_gap <= high) {
        return Err(ProximityError::OutOfRange {
            measured: measured_gap,
            low,
            high,
        });
    }
    if full == gap_a {
        return Ok(0.0);
    }
    Ok(((gap_a - measured_gap) / (gap_a - full)).clamp(0.0, 1.0))
}

impl ToKv for BilayerSpec {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        self.layer_a.write_kv(&key(prefix, "layer_a"), out);
        self.layer_b.write_kv(&key(prefix, "layer_b"), out);
        out.insert(key(prefix, "coupling"), self.coupling);
    }
}

impl FromKv for BilayerSpec {
    /// `layer_b.gap0` defaults to the Ti value and `layer_b.n0` to the Ti density of states.
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let layer_a = Electrode::read_kv(block, &key(prefix, "layer_a"))?;
        let b = key(prefix, "layer_b");
        let gap0 = block.optional(&key(&b, "gap0"))?.unwrap_or(TITANIUM_GAP0);
        let dynes = block.optional(&key(&b, "dynes"))?.unwrap_or(0.0);
        let n0 = block.optional(&key(&b, "n0"))?.unwrap_or(N0_TITANIUM);
        let thickness = block.require(&key(&b, "thickness"))?;
        let layer_b =
            Electrode::new(gap0, dynes, n0, thickness).map_err(|e| KvError::Rejected {
                key: key(&b, e.field),
                message: e.message,
            })?;
        let coupling = block.optional(&key(prefix, "coupling"))?.unwrap_or(1.0);
        BilayerSpec::new(layer_a, layer_b, coupling).map_err(|e| KvError::Rejected {
            key: key(prefix, e.field),
            message: e.message,
        })
    }
}
