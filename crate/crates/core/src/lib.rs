//! Models for asymmetric-gap superconducting tunnel junctions and the
//! transmon qubits built from them.
//!
//! * [`bcs`]: Dynes density of states, Fermi occupation, Δ(T), thermal quasiparticle density.
//! * [`tunneling`]: quasiparticle current and its forward/backward decomposition.
//! * [`mar`]: phenomenological multiple-Andreev-reflection steps and excess current.
//! * [`proximity`]: Cooper-limit effective gap of a bilayer counter-electrode.
//! * [`qubit`]: quasiparticle-induced T1 of a transmon.
//! * [`fitio`]: trace files, conductance integration and differentiation.
//! * [`fitting`]: initial estimates, bounded simplex fits and tabulated reports.
//!
//! Units throughout: μeV, μV, nA, K, kΩ, μS, μm⁻³.

// `!(x > 0.0)` is the NaN-rejecting form used in validation; quadrature
// nodes are kept at their published precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bcs;
pub mod fitio;
pub mod fitting;
pub mod kv;
pub mod mar;
pub mod proximity;
pub mod quad;
pub mod qubit;
pub mod tunneling;
pub mod types;
pub mod units;

pub use kv::{FromKv, KvBlock, KvError, ToKv};
pub use types::{
    validate_iv, ConductanceCurve, Electrode, ElectrodeIndex, IVCurve, InvalidCurve,
    InvalidParameter, Junction, QuasiparticleState, TransmonParams, Violation,
};
pub use units::{unit_convert, PhysicalConstants, Unit};
