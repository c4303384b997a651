//! Junction parameter extraction from IV data.
//!
//! The composite model is
//! `I(V) = I_qp(V − V_off) + I_MAR(V − V_off) + I_off`, compared with the data
//! either directly (current space) or after numerical differentiation
//! (conductance space). Free parameters are searched with a bounded simplex
//! from several seeded starts.

mod report;
pub mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::fitio::{derivative, MICROSIEMENS_PER_NA_PER_UV};
use crate::kv::{key, FromKv, KvBlock, KvError, ToKv};
use crate::mar::{linear_fit, subgap_onsets, MarModel, MarParams};
use crate::tunneling::{OccupationModel, TunnelingError, TunnelingModel};
use crate::types::{
    Electrode, IVCurve, InvalidParameter, Junction, DEFAULT_DYNES_FRACTION, N0_ALUMINUM,
};

pub use report::report_table;
use simplex::{minimize, SimplexOptions};

/// Number of simplex starts: the configured point plus seed-perturbed copies.
pub const RESTARTS: usize = 3;
/// Standard deviation of the start perturbation on the normalized [0, 1] scale.
const START_SPREAD: f64 = 0.15;
/// Bottom-electrode gap (μeV) assumed when none is configured.
pub const DEFAULT_DELTA1: f64 = 190.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Delta1,
    Delta2,
    Rn,
    Transparency,
    Dynes1,
    Dynes2,
    Temperature,
    VOffset,
    IOffset,
    MarBaseScale,
}

impl Param {
    pub const ALL: [Param; 10] = [
        Param::Delta1,
        Param::Delta2,
        Param::Rn,
        Param::Transparency,
        Param::Dynes1,
        Param::Dynes2,
        Param::Temperature,
        Param::VOffset,
        Param::IOffset,
        Param::MarBaseScale,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Param::Delta1 => "delta1",
            Param::Delta2 => "delta2",
            Param::Rn => "rn",
            Param::Transparency => "transparency",
            Param::Dynes1 => "dynes1",
            Param::Dynes2 => "dynes2",
            Param::Temperature => "temperature",
            Param::VOffset => "v_offset",
            Param::IOffset => "i_offset",
            Param::MarBaseScale => "mar.base_scale",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Param::Delta1 | Param::Delta2 | Param::Dynes1 | Param::Dynes2 => "ueV",
            Param::Rn => "kOhm",
            Param::Transparency => "",
            Param::Temperature => "K",
            Param::VOffset => "uV",
            Param::IOffset | Param::MarBaseScale => "nA",
        }
    }

    /// Searched on a logarithmic scale between its bounds.
    fn log_scaled(self) -> bool {
        matches!(self, Param::Rn)
    }

    fn index(self) -> usize {
        self as usize
    }

    fn default_bounds(self) -> (f64, f64) {
        match self {
            Param::Delta1 | Param::Delta2 => (20.0, 400.0),
            Param::Rn => (0.1, 1000.0),
            Param::Transparency => (0.0, 1.0),
            Param::Dynes1 | Param::Dynes2 => (1e-3, 20.0),
            Param::Temperature => (0.005, 1.0),
            Param::VOffset => (-50.0, 50.0),
            Param::IOffset => (-10.0, 10.0),
            Param::MarBaseScale => (0.0, 1000.0),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Param::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| format!("unknown fit parameter `{s}`"))
    }
}

/// One value for every model parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamValues([f64; 10]);

impl ParamValues {
    pub fn get(&self, p: Param) -> f64 {
        self.0[p.index()]
    }

    pub fn set(&mut self, p: Param, value: f64) {
        self.0[p.index()] = value;
    }

    pub fn with(mut self, p: Param, value: f64) -> Self {
        self.set(p, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, f64)> + '_ {
        Param::ALL.into_iter().map(|p| (p, self.get(p)))
    }
}

impl Default for ParamValues {
    fn default() -> Self {
        let mut v = ParamValues([0.0; 10]);
        v.set(Param::Delta1, DEFAULT_DELTA1);
        v.set(Param::Delta2, DEFAULT_DELTA1);
        v.set(Param::Rn, 10.0);
        v.set(Param::Dynes1, DEFAULT_DYNES_FRACTION * DEFAULT_DELTA1);
        v.set(Param::Dynes2, DEFAULT_DYNES_FRACTION * DEFAULT_DELTA1);
        v.set(Param::Temperature, 0.02);
        v
    }
}

impl fmt::Display for ParamValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(p, v)| format!("{p}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    CurrentSpace,
    ConductanceSpace,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::CurrentSpace => "current",
            Objective::ConductanceSpace => "conductance",
        }
    }

    /// Unit of the residual rms.
    pub fn unit(self) -> &'static str {
        match self {
            Objective::CurrentSpace => "nA",
            Objective::ConductanceSpace => "uS",
        }
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "current" => Ok(Objective::CurrentSpace),
            "conductance" => Ok(Objective::ConductanceSpace),
            other => Err(format!(
                "unknown objective `{other}` (current | conductance)"
            )),
        }
    }
}

/// Which route produced Δ₂: the conductance peak alone, or a full-curve fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMethod {
    PeakPosition,
    FullCurve,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::PeakPosition => "peak",
            FitMethod::FullCurve => "full",
        }
    }
}

impl FromStr for FitMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "peak" => Ok(FitMethod::PeakPosition),
            "full" => Ok(FitMethod::FullCurve),
            other => Err(format!("unknown fit method `{other}` (peak | full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Free parameters, in search order.
    pub free: Vec<Param>,
    pub bounds: BTreeMap<Param, (f64, f64)>,
    /// Fixed values and the starting point of the free parameters.
    pub values: ParamValues,
    pub objective: Objective,
    pub method: FitMethod,
    /// Objective evaluations allowed per simplex start.
    pub max_evals: usize,
    pub seed: u64,
    /// MAR step shape; the step scale lives in `values` as `mar.base_scale`.
    pub mar: MarParams,
}

impl Default for FitConfig {
    /// Δ₂, Rₙ and D free; Δ₁ fixed at 190 μeV.
    fn default() -> Self {
        Self {
            free: vec![Param::Delta2, Param::Rn, Param::Transparency],
            bounds: Param::ALL
                .into_iter()
                .map(|p| (p, p.default_bounds()))
                .collect(),
            values: ParamValues::default(),
            objective: Objective::CurrentSpace,
            method: FitMethod::FullCurve,
            max_evals: 600,
            seed: 0,
            mar: MarParams::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let invalid = |m: String| Err(FitError::InvalidConfig(m));
        for (i, p) in self.free.iter().enumerate() {
            if self.free[..i].contains(p) {
                return invalid(format!("parameter `{p}` listed twice in the free set"));
            }
            match self.bounds.get(p) {
                None => return invalid(format!("free parameter `{p}` has no bounds")),
                Some(&(lo, hi)) if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                    return invalid(format!(
                        "bounds [{lo}, {hi}] of `{p}` need finite low < high"
                    ));
                }
                _ => {}
            }
        }
        if self.max_evals == 0 {
            return invalid("max_evals must be positive".to_string());
        }
        for (p, v) in self.values.iter() {
            if !v.is_finite() {
                return invalid(format!("value of `{p}` is not finite"));
            }
        }
        Ok(())
    }

    /// Starting values clamped into the bounds of the free parameters.
    fn clamped_start(&self) -> ParamValues {
        let mut v = self.values;
        for &p in &self.free {
            let (lo, hi) = self.bounds[&p];
            v.set(p, v.get(p).clamp(lo, hi));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub values: ParamValues,
    pub free: Vec<Param>,
    pub rms: f64,
    pub initial_rms: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Finite-difference curvature of the residual sum of squares per free parameter.
    pub sensitivity: Vec<(Param, f64)>,
    /// One-sigma estimate `sqrt(2·s²/curvature)` with `s²` the residual variance.
    pub uncertainty: Vec<(Param, f64)>,
    pub objective: Objective,
    pub method: FitMethod,
    pub points: usize,
}

impl FitResult {
    pub fn get(&self, p: Param) -> f64 {
        self.values.get(p)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("no conductance peak found: {0}")]
    PeakNotFound(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("model evaluation failed at [{point}]: {source}")]
    ModelEvaluation {
        point: Box<ParamValues>,
        #[source]
        source: TunnelingError,
    },
    #[error("model parameters rejected at [{point}]: {source}")]
    InvalidPoint {
        point: Box<ParamValues>,
        #[source]
        source: InvalidParameter,
    },
}

/// Composite tunneling + MAR current at one parameter point.
#[derive(Debug, Clone)]
pub struct CompositeModel {
    qp: TunnelingModel,
    mar: MarModel,
    v_offset: f64,
    i_offset: f64,
}

impl CompositeModel {
    pub fn new(values: &ParamValues, mar: &MarParams) -> Result<Self, FitError> {
        let invalid = |source| FitError::InvalidPoint {
            point: Box::new(*values),
            source,
        };
        let junction = model_junction(values).map_err(invalid)?;
        let qp = TunnelingModel::new(
            &junction,
            values.get(Param::Temperature),
            &OccupationModel::Thermal,
        )
        .map_err(|source| match source {
            TunnelingError::Invalid(e) => invalid(e),
            source => FitError::ModelEvaluation {
                point: Box::new(*values),
                source,
            },
        })?;
        let mar_params = mar
            .with_base_scale(values.get(Param::MarBaseScale))
            .map_err(invalid)?;
        Ok(Self {
            qp,
            mar: MarModel::new(&junction, &mar_params),
            v_offset: values.get(Param::VOffset),
            i_offset: values.get(Param::IOffset),
        })
    }

    pub fn current(&self, v: f64) -> Result<f64, TunnelingError> {
        let shifted = v - self.v_offset;
        Ok(self.qp.current(shifted)? + self.mar.current(shifted) + self.i_offset)
    }
}

/// Junction described by a parameter point (Al-like electrodes).
pub fn model_junction(values: &ParamValues) -> Result<Junction, InvalidParameter> {
    let e1 = Electrode::new(
        values.get(Param::Delta1),
        values.get(Param::Dynes1),
        N0_ALUMINUM,
        30.0,
    )?;
    let e2 = Electrode::new(
        values.get(Param::Delta2),
        values.get(Param::Dynes2),
        N0_ALUMINUM,
        30.0,
    )?;
    Junction::new(
        e1,
        e2,
        values.get(Param::Rn),
        values.get(Param::Transparency),
    )
}

/// Composite model current (nA) on a bias grid.
pub fn simulate_composite(
    values: &ParamValues,
    mar: &MarParams,
    bias: &[f64],
) -> Result<Vec<f64>, FitError> {
    let model = CompositeModel::new(values, mar)?;
    bias.iter()
        .map(|&v| {
            model
                .current(v)
                .map_err(|source| FitError::ModelEvaluation {
                    point: Box::new(*values),
                    source,
                })
        })
        .collect()
}

/// Adds Gaussian noise with standard deviation `rel · max|I|` (seeded).
pub fn add_noise(current: &[f64], rel: f64, seed: u64) -> Vec<f64> {
    let full_scale = current.iter().fold(0.0f64, |m, i| m.max(i.abs()));
    let sigma = rel * full_scale;
    if !(sigma > 0.0) {
        return current.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    current
        .iter()
        .map(|i| i + normal.sample(&mut rng))
        .collect()
}

struct Problem<'a> {
    bias: &'a [f64],
    target: Vec<f64>,
    objective: Objective,
    mar: MarParams,
    evaluations: usize,
}

impl<'a> Problem<'a> {
    fn new(data: &'a IVCurve, cfg: &FitConfig) -> Result<Self, FitError> {
        let target = match cfg.objective {
            Objective::CurrentSpace => data.current().to_vec(),
            Objective::ConductanceSpace => conductance(data.bias(), data.current())?,
        };
        Ok(Self {
            bias: data.bias(),
            target,
            objective: cfg.objective,
            mar: cfg.mar,
            evaluations: 0,
        })
    }

    /// Residual sum of squares at `values`.
    fn ssr(&mut self, values: &ParamValues) -> Result<f64, FitError> {
        self.evaluations += 1;
        let mut model = simulate_composite(values, &self.mar, self.bias)?;
        if self.objective == Objective::ConductanceSpace {
            model = conductance(self.bias, &model)?;
        }
        Ok(model
            .iter()
            .zip(&self.target)
            .map(|(m, d)| (m - d) * (m - d))
            .sum())
    }

    fn rms(&self, ssr: f64) -> f64 {
        (ssr / self.bias.len() as f64).sqrt()
    }
}

fn conductance(bias: &[f64], current: &[f64]) -> Result<Vec<f64>, FitError> {
    let d = derivative(bias, current).map_err(|e| FitError::InsufficientData(e.to_string()))?;
    Ok(d.into_iter()
        .map(|g| g * MICROSIEMENS_PER_NA_PER_UV)
        .collect())
}

fn to_physical(cfg: &FitConfig, base: &ParamValues, u: &[f64]) -> ParamValues {
    let mut v = *base;
    for (&p, &x) in cfg.free.iter().zip(u) {
        let (lo, hi) = cfg.bounds[&p];
        let value = if p.log_scaled() && lo > 0.0 {
            lo * (hi / lo).powf(x)
        } else {
            lo + x * (hi - lo)
        };
        v.set(p, value.clamp(lo, hi));
    }
    v
}

fn to_unit(cfg: &FitConfig, values: &ParamValues) -> Vec<f64> {
    cfg.free
        .iter()
        .map(|&p| {
            let (lo, hi) = cfg.bounds[&p];
            let x = values.get(p);
            let u = if p.log_scaled() && lo > 0.0 {
                (x / lo).ln() / (hi / lo).ln()
            } else {
                (x - lo) / (hi - lo)
            };
            u.clamp(0.0, 1.0)
        })
        .collect()
}

/// Fits the composite model to `data`.
///
/// With [`FitMethod::FullCurve`] the free parameters are searched from the
/// configured start and from `RESTARTS − 1` starts perturbed with generators
/// seeded by `seed + r`; the lowest residual wins, earlier starts winning ties.
/// With [`FitMethod::PeakPosition`] Δ₂, Rₙ and the offsets come from
/// [`estimate_initial`] and only the residual is evaluated.
pub fn fit_iv(data: &IVCurve, cfg: &FitConfig) -> Result<FitResult, FitError> {
    cfg.validate()?;
    let mut problem = Problem::new(data, cfg)?;
    let start = cfg.clamped_start();

    if cfg.method == FitMethod::PeakPosition {
        let est = estimate_initial(data, &EstimateOptions::from_config(cfg))?;
        let mut values = start;
        est.apply(&mut values);
        let ssr = problem.ssr(&values)?;
        let initial_ssr = problem.ssr(&start)?;
        return Ok(FitResult {
            values,
            free: vec![Param::Delta2, Param::Rn],
            rms: problem.rms(ssr),
            initial_rms: problem.rms(initial_ssr),
            evaluations: problem.evaluations,
            converged: true,
            sensitivity: Vec::new(),
            uncertainty: Vec::new(),
            objective: cfg.objective,
            method: cfg.method,
            points: data.len(),
        });
    }

    let u0 = to_unit(cfg, &start);
    let mut best: Option<simplex::SimplexOutcome> = None;
    let mut initial = None;
    let restarts = if cfg.free.is_empty() { 1 } else { RESTARTS };
    for r in 0..restarts {
        let x0 = if r == 0 {
            u0.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            let normal = Normal::new(0.0, START_SPREAD).expect("positive spread");
            u0.iter()
                .map(|x| (x + normal.sample(&mut rng)).clamp(0.0, 1.0))
                .collect()
        };
        let opts = SimplexOptions {
            max_evals: cfg.max_evals,
            ..SimplexOptions::default()
        };
        let outcome = minimize(
            |u| {
                let ssr = problem.ssr(&to_physical(cfg, &start, u))?;
                // the simplex evaluates its start first
                initial.get_or_insert(ssr);
                Ok(ssr)
            },
            &x0,
            &opts,
        )?;
        if best.as_ref().is_none_or(|b| outcome.f < b.f) {
            best = Some(outcome);
        }
    }
    let outcome = best.expect("at least one start");
    let initial = initial.expect("at least one evaluation");
    let values = to_physical(cfg, &start, &outcome.x);
    let (sensitivity, uncertainty) = curvature(&mut problem, cfg, &values, outcome.f)?;
    Ok(FitResult {
        values,
        free: cfg.free.clone(),
        rms: problem.rms(outcome.f),
        initial_rms: problem.rms(initial),
        evaluations: problem.evaluations,
        converged: outcome.converged,
        sensitivity,
        uncertainty,
        objective: cfg.objective,
        method: cfg.method,
        points: data.len(),
    })
}

type Diagonal = Vec<(Param, f64)>;

/// Central second differences of the residual sum of squares along each free axis.
fn curvature(
    problem: &mut Problem<'_>,
    cfg: &FitConfig,
    at: &ParamValues,
    ssr0: f64,
) -> Result<(Diagonal, Diagonal), FitError> {
    let dof = problem.bias.len().saturating_sub(cfg.free.len()).max(1) as f64;
    let variance = ssr0 / dof;
    let mut sens = Vec::with_capacity(cfg.free.len());
    let mut unc = Vec::with_capacity(cfg.free.len());
    for &p in &cfg.free {
        let (lo, hi) = cfg.bounds[&p];
        let h = 1e-3 * (hi - lo);
        let x = at.get(p);
        // shift the stencil inward at a bound, keeping three equally spaced points
        let centre = x.clamp(lo + h, hi - h);
        let f = |problem: &mut Problem<'_>, v: f64| problem.ssr(&at.with(p, v));
        let fm = f(problem, centre - h)?;
        let fc = if centre == x {
            ssr0
        } else {
            f(problem, centre)?
        };
        let fp = f(problem, centre + h)?;
        let c = (fp - 2.0 * fc + fm) / (h * h);
        sens.push((p, c));
        unc.push((
            p,
            if c > 0.0 {
                (2.0 * variance / c).sqrt()
            } else {
                f64::INFINITY
            },
        ));
    }
    Ok((sens, unc))
}

/// Inputs of [`estimate_initial`] that are not in the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub delta1: f64,
    pub temperature: f64,
    pub mar: MarParams,
}

impl EstimateOptions {
    pub fn from_config(cfg: &FitConfig) -> Self {
        Self {
            delta1: cfg.values.get(Param::Delta1),
            temperature: cfg.values.get(Param::Temperature),
            mar: cfg
                .mar
                .with_base_scale(cfg.values.get(Param::MarBaseScale))
                .unwrap_or(cfg.mar),
        }
    }
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            delta1: DEFAULT_DELTA1,
            temperature: 0.02,
            mar: MarParams::default(),
        }
    }
}

/// Starting values read off the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialEstimate {
    pub rn: f64,
    /// Bias (μV) of the largest conductance peak, offset removed.
    pub gap_sum: f64,
    pub delta2: f64,
    pub transparency: f64,
    pub excess_current: f64,
    pub v_offset: f64,
    pub i_offset: f64,
}

impl InitialEstimate {
    pub fn apply(&self, values: &mut ParamValues) {
        values.set(Param::Rn, self.rn);
        values.set(Param::Delta2, self.delta2);
        values.set(Param::Transparency, self.transparency);
        values.set(Param::VOffset, self.v_offset);
        values.set(Param::IOffset, self.i_offset);
    }
}

/// Fraction of the largest |bias| treated as the ohmic window.
const OHMIC_FRACTION: f64 = 0.8;
/// A conductance peak must exceed the normal-state conductance by this factor.
const PEAK_PROMINENCE: f64 = 1.2;

/// Heuristic initial values: Rₙ from the ohmic slope over the top 20 % of
/// |bias|, the gap sum from the conductance maximum, Δ₂ = gap sum − Δ₁, D from
/// the excess current left after removing the quasiparticle contribution, and
/// offsets from the midpoint of the two conductance peaks.
pub fn estimate_initial(iv: &IVCurve, opts: &EstimateOptions) -> Result<InitialEstimate, FitError> {
    let (bias, current) = (iv.bias(), iv.current());
    let vmax = bias.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let window = OHMIC_FRACTION * vmax;
    let side = |positive: bool| -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = iv
            .samples()
            .filter(|&(v, _)| if positive { v >= window } else { v <= -window })
            .collect();
        if pts.len() < 3 {
            return None;
        }
        linear_fit(&pts)
    };
    let (pos, neg) = (side(true), side(false));
    let slopes: Vec<f64> = [pos, neg].iter().flatten().map(|l| l.0).collect();
    if slopes.is_empty() {
        return Err(FitError::InsufficientData(format!(
            "fewer than 3 samples with |bias| >= {window} uV"
        )));
    }
    let slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    if !(slope > 0.0) {
        return Err(FitError::PeakNotFound(format!(
            "non-positive ohmic slope {slope} nA/uV"
        )));
    }
    let rn = 1.0 / slope;

    let g = derivative(bias, current).map_err(|e| FitError::InsufficientData(e.to_string()))?;
    let peak = |positive: bool| -> Result<Option<f64>, FitError> {
        let idx: Vec<usize> = (0..bias.len())
            .filter(|&i| {
                if positive {
                    bias[i] > 0.0
                } else {
                    bias[i] < 0.0
                }
            })
            .collect();
        if idx.len() < 3 {
            return Ok(None);
        }
        let mut best = idx[0];
        for &i in &idx {
            if g[i] > g[best] {
                best = i;
            }
        }
        let at_end = best == idx[0] || best == idx[idx.len() - 1];
        if at_end {
            return Err(FitError::PeakNotFound(format!(
                "conductance maximum sits at the end of the {} bias range",
                if positive { "positive" } else { "negative" }
            )));
        }
        if g[best] < PEAK_PROMINENCE * slope {
            return Err(FitError::PeakNotFound(format!(
                "largest conductance {} uS is below {PEAK_PROMINENCE} x the normal-state value {} uS",
                g[best] * MICROSIEMENS_PER_NA_PER_UV,
                slope * MICROSIEMENS_PER_NA_PER_UV
            )));
        }
        Ok(Some(bias[best]))
    };
    let vp = peak(true)?;
    let vn = peak(false)?;
    let (gap_sum, v_offset) = match (vp, vn) {
        (Some(p), Some(n)) => (0.5 * (p - n), 0.5 * (p + n)),
        (Some(p), None) => (p, 0.0),
        (None, Some(n)) => (-n, 0.0),
        (None, None) => {
            return Err(FitError::PeakNotFound(
                "too few samples on either polarity".to_string(),
            ))
        }
    };
    let delta2 = (gap_sum - opts.delta1).max(0.0);

    let (excess, i_offset) = match (pos, neg) {
        (Some(p), Some(n)) => (0.5 * (p.1 - n.1), 0.5 * (p.1 + n.1) + v_offset * slope),
        (Some(p), None) => (p.1, 0.0),
        (None, Some(n)) => (-n.1, 0.0),
        (None, None) => unreachable!("slope exists"),
    };

    let transparency = transparency_from_excess(iv, opts, rn, delta2, v_offset, window, excess)?;
    Ok(InitialEstimate {
        rn,
        gap_sum,
        delta2,
        transparency,
        excess_current: excess,
        v_offset,
        i_offset,
    })
}

/// Solves `base_scale·Σ D^order = I_exc − I_exc,qp` for D ∈ [0, 1], where
/// `I_exc,qp` is the intercept the quasiparticle current alone produces over
/// the same window.
fn transparency_from_excess(
    iv: &IVCurve,
    opts: &EstimateOptions,
    rn: f64,
    delta2: f64,
    v_offset: f64,
    window: f64,
    excess: f64,
) -> Result<f64, FitError> {
    let base = opts.mar.base_scale();
    if base <= 0.0 {
        return Ok(0.0);
    }
    let values = ParamValues::default()
        .with(Param::Delta1, opts.delta1)
        .with(Param::Delta2, delta2)
        .with(Param::Dynes1, DEFAULT_DYNES_FRACTION * opts.delta1)
        .with(Param::Dynes2, DEFAULT_DYNES_FRACTION * delta2)
        .with(Param::Rn, rn)
        .with(Param::Temperature, opts.temperature);
    let qp_only =
        MarParams::new(opts.mar.n_max(), opts.mar.step_width(), 0.0).expect("valid shape");
    let window_bias: Vec<f64> = iv.bias().iter().copied().filter(|&v| v >= window).collect();
    let reference = if window_bias.len() >= 3 {
        let shifted: Vec<f64> = window_bias.iter().map(|v| v - v_offset).collect();
        let i = simulate_composite(&values, &qp_only, &shifted)?;
        let pts: Vec<(f64, f64)> = shifted.into_iter().zip(i).collect();
        linear_fit(&pts).map_or(0.0, |l| l.1)
    } else {
        0.0
    };
    let target = excess - reference;
    if target <= 0.0 {
        return Ok(0.0);
    }
    let orders: Vec<i32> = subgap_onsets(opts.delta1, delta2, opts.mar.n_max())
        .iter()
        .map(|o| o.order as i32)
        .collect();
    let saturation = |d: f64| base * orders.iter().map(|&n| d.powi(n)).sum::<f64>();
    if saturation(1.0) <= target {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if saturation(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn rejected(key_name: String, message: impl Into<String>) -> KvError {
    KvError::Rejected {
        key: key_name,
        message: message.into(),
    }
}

impl FromKv for FitConfig {
    /// Keys below `prefix`: `free` (comma list), `bounds.<param> = lo, hi`,
    /// `fixed.<param>` / `start.<param>`, `objective`, `method`, `max_evals`, `seed`.
    /// The MAR shape is not read here.
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let mut cfg = FitConfig::default();
        if let Some(names) = block.list::<String>(&key(prefix, "free"))? {
            let mut free = Vec::new();
            for n in names.iter().filter(|n| !n.is_empty()) {
                free.push(
                    n.parse::<Param>()
                        .map_err(|m| rejected(key(prefix, "free"), m))?,
                );
            }
            cfg.free = free;
        }
        for p in Param::ALL {
            let bkey = key(prefix, &format!("bounds.{}", p.key()));
            if let Some(b) = block.list::<f64>(&bkey)? {
                if b.len() != 2 {
                    return Err(rejected(bkey, "expected `low, high`"));
                }
                cfg.bounds.insert(p, (b[0], b[1]));
            }
            let fkey = key(prefix, &format!("fixed.{}", p.key()));
            if let Some(v) = block.optional::<f64>(&fkey)? {
                if cfg.free.contains(&p) {
                    return Err(rejected(fkey, "parameter is also listed as free"));
                }
                cfg.values.set(p, v);
            }
            if let Some(v) = block.optional::<f64>(&key(prefix, &format!("start.{}", p.key())))? {
                cfg.values.set(p, v);
            }
        }
        if let Some(o) = block.optional::<String>(&key(prefix, "objective"))? {
            cfg.objective = o
                .parse()
                .map_err(|m: String| rejected(key(prefix, "objective"), m))?;
        }
        if let Some(m) = block.optional::<String>(&key(prefix, "method"))? {
            cfg.method = m
                .parse()
                .map_err(|m: String| rejected(key(prefix, "method"), m))?;
        }
        if let Some(n) = block.optional(&key(prefix, "max_evals"))? {
            cfg.max_evals = n;
        }
        if let Some(s) = block.optional(&key(prefix, "seed"))? {
            cfg.seed = s;
        }
        cfg.validate()
            .map_err(|e| rejected(key(prefix, "free"), e.to_string()))?;
        Ok(cfg)
    }
}

impl ToKv for FitConfig {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        let free: Vec<&str> = self.free.iter().map(|p| p.key()).collect();
        out.insert(key(prefix, "free"), free.join(", "));
        for (p, (lo, hi)) in &self.bounds {
            out.insert(
                key(prefix, &format!("bounds.{}", p.key())),
                format!("{lo}, {hi}"),
            );
        }
        for (p, v) in self.values.iter() {
            let group = if self.free.contains(&p) {
                "start"
            } else {
                "fixed"
            };
            out.insert(key(prefix, &format!("{group}.{}", p.key())), v);
        }
        out.insert(key(prefix, "objective"), self.objective.name());
        out.insert(key(prefix, "method"), self.method.name());
        out.insert(key(prefix, "max_evals"), self.max_evals);
        out.insert(key(prefix, "seed"), self.seed);
    }
}

impl ToKv for FitResult {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        for (p, v) in self.values.iter() {
            out.insert(key(prefix, p.key()), v);
        }
        let free: Vec<&str> = self.free.iter().map(|p| p.key()).collect();
        out.insert(key(prefix, "free"), free.join(", "));
        out.insert(key(prefix, "rms"), self.rms);
        out.insert(key(prefix, "rms_unit"), self.objective.unit());
        out.insert(key(prefix, "initial_rms"), self.initial_rms);
        out.insert(key(prefix, "evaluations"), self.evaluations);
        out.insert(key(prefix, "converged"), self.converged);
        out.insert(key(prefix, "objective"), self.objective.name());
        out.insert(key(prefix, "method"), self.method.name());
        out.insert(key(prefix, "points"), self.points);
        for (p, c) in &self.sensitivity {
            out.insert(key(prefix, &format!("sensitivity.{}", p.key())), c);
        }
        for (p, s) in &self.uncertainty {
            out.insert(key(prefix, &format!("uncertainty.{}", p.key())), s);
        }
    }
}
