//! Phenomenological multiple-Andreev-reflection (MAR) subgap current.
//!
//! Each onset at `V_n` of reflection order `n` contributes a logistic step of
//! height `base_scale·D^n`. Onsets come in three families: `Δ₁/n`, `Δ₂/n` and
//! `(Δ₁+Δ₂)/n`.

use std::fmt;

use thiserror::Error;

use crate::kv::{key, FromKv, KvBlock, KvError, ToKv};
use crate::types::{IVCurve, InvalidParameter, Junction};

/// Onsets closer than this (μV) are merged into one.
pub const ONSET_MERGE_TOL: f64 = 0.01;
/// Default logistic step width (μV).
pub const DEFAULT_STEP_WIDTH: f64 = 4.0;
/// Minimum number of samples in the ohmic window of [`excess_current`].
pub const MIN_WINDOW_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OnsetFamily {
    Gap1,
    Gap2,
    Sum,
}

impl fmt::Display for OnsetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OnsetFamily::Gap1 => "gap1",
            OnsetFamily::Gap2 => "gap2",
            OnsetFamily::Sum => "sum",
        })
    }
}

/// One step position. Merged onsets keep every contributing family and the
/// lowest contributing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Onset {
    pub voltage: f64,
    pub order: u32,
    pub families: Vec<OnsetFamily>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarParams {
    n_max: u32,
    step_width: f64,
    base_scale: f64,
}

impl MarParams {
    pub fn new(n_max: u32, step_width: f64, base_scale: f64) -> Result<Self, InvalidParameter> {
        if n_max < 1 {
            return Err(InvalidParameter {
                field: "n_max",
                message: format!("{n_max} violates n_max >= 1"),
            });
        }
        if !(step_width.is_finite() && step_width > 0.0) {
            return Err(InvalidParameter {
                field: "step_width",
                message: format!("{step_width} violates step_width > 0"),
            });
        }
        if !(base_scale.is_finite() && base_scale >= 0.0) {
            return Err(InvalidParameter {
                field: "base_scale",
                message: format!("{base_scale} violates base_scale >= 0"),
            });
        }
        Ok(Self {
            n_max,
            step_width,
            base_scale,
        })
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn step_width(&self) -> f64 {
        self.step_width
    }

    pub fn base_scale(&self) -> f64 {
        self.base_scale
    }

    pub fn with_base_scale(self, base_scale: f64) -> Result<Self, InvalidParameter> {
        Self::new(self.n_max, self.step_width, base_scale)
    }
}

impl Default for MarParams {
    fn default() -> Self {
        Self {
            n_max: 3,
            step_width: DEFAULT_STEP_WIDTH,
            base_scale: 0.0,
        }
    }
}

/// Step positions `Δ₁/n`, `Δ₂/n`, `(Δ₁+Δ₂)/n` for `n = 1..=n_max`, ascending.
pub fn subgap_onsets(gap1: f64, gap2: f64, n_max: u32) -> Vec<Onset> {
    let mut raw: Vec<(f64, u32, OnsetFamily)> = Vec::with_capacity(3 * n_max as usize);
    for n in 1..=n_max {
        let nf = n as f64;
        for (gap, family) in [
            (gap1, OnsetFamily::Gap1),
            (gap2, OnsetFamily::Gap2),
            (gap1 + gap2, OnsetFamily::Sum),
        ] {
            if gap > 0.0 {
                raw.push((gap / nf, n, family));
            }
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut merged: Vec<Onset> = Vec::with_capacity(raw.len());
    for (voltage, order, family) in raw {
        match merged.last_mut() {
            Some(last) if voltage - last.voltage <= ONSET_MERGE_TOL => {
                last.order = last.order.min(order);
                if !last.families.contains(&family) {
                    last.families.push(family);
                    last.families.sort();
                }
            }
            _ => merged.push(Onset {
                voltage,
                order,
                families: vec![family],
            }),
        }
    }
    merged
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let t = x.exp();
        t / (1.0 + t)
    }
}

/// Precomputed step set for repeated evaluation.
#[derive(Debug, Clone)]
pub struct MarModel {
    steps: Vec<(f64, f64)>,
    width: f64,
}

impl MarModel {
    pub fn new(junction: &Junction, params: &MarParams) -> Self {
        let d = junction.transparency();
        let steps = subgap_onsets(
            junction.electrode1().gap0(),
            junction.electrode2().gap0(),
            params.n_max,
        )
        .into_iter()
        .map(|o| (o.voltage, params.base_scale * d.powi(o.order as i32)))
        .filter(|&(_, h)| h > 0.0)
        .collect();
        Self {
            steps,
            width: params.step_width,
        }
    }

    /// Height sum reached far above every onset.
    pub fn saturation(&self) -> f64 {
        self.steps.iter().map(|s| s.1).sum()
    }

    /// Current (nA) at bias `v` (μV); odd in `v`.
    pub fn current(&self, v: f64) -> f64 {
        let a = v.abs();
        let mut sum = 0.0;
        for &(von, h) in &self.steps {
            sum += h * logistic((a - von) / self.width);
        }
        if v < 0.0 {
            -sum
        } else {
            sum
        }
    }
}

/// Subgap MAR current (nA) at bias `v` (μV).
pub fn mar_current(junction: &Junction, v: f64, params: &MarParams) -> f64 {
    MarModel::new(junction, params).current(v)
}

/// `base_scale` (nA) for which `composite(hi) − composite(lo)` equals `target_rise`,
/// where `composite = base_current + mar_current`. The MAR current is linear in
/// `base_scale`, so this is a single linear solve.
pub fn calibrate_base_scale(
    junction: &Junction,
    params: &MarParams,
    base_rise: f64,
    lo: f64,
    hi: f64,
    target_rise: f64,
) -> Result<f64, InvalidParameter> {
    let unit = MarModel::new(junction, &params.with_base_scale(1.0)?);
    let per_unit = unit.current(hi) - unit.current(lo);
    let scale = (target_rise - base_rise) / per_unit;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(InvalidParameter {
            field: "base_scale",
            message: format!(
                "a rise of {target_rise} nA between {lo} and {hi} uV is not reachable (tunneling alone gives {base_rise} nA, unit step rise {per_unit} nA)"
            ),
        });
    }
    Ok(scale)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarError {
    #[error("ohmic window above {window_low} uV holds {found} samples, need at least {MIN_WINDOW_SAMPLES}")]
    InsufficientData { window_low: f64, found: usize },
    #[error("ohmic window above {0} uV has no slope")]
    FlatWindow(f64),
}

/// Least-squares line `I = V/Rn + I_exc` over `bias >= window_low`.
/// Returns `(I_exc, Rn)` in nA and kΩ.
pub fn excess_current(iv: &IVCurve, window_low: f64) -> Result<(f64, f64), MarError> {
    let pts: Vec<(f64, f64)> = iv.samples().filter(|&(v, _)| v >= window_low).collect();
    if pts.len() < MIN_WINDOW_SAMPLES {
        return Err(MarError::InsufficientData {
            window_low,
            found: pts.len(),
        });
    }
    let (slope, intercept) = linear_fit(&pts).ok_or(MarError::FlatWindow(window_low))?;
    if slope <= 0.0 {
        return Err(MarError::FlatWindow(window_low));
    }
    Ok((intercept, 1.0 / slope))
}

/// Ordinary least squares `y = slope·x + intercept` (centered sums).
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

impl ToKv for MarParams {
    fn write_kv(&self, prefix: &str, out: &mut KvBlock) {
        out.insert(key(prefix, "n_max"), self.n_max.to_string());
        out.insert(key(prefix, "step_width"), self.step_width.to_string());
        out.insert(key(prefix, "base_scale"), self.base_scale.to_string());
    }
}

impl FromKv for MarParams {
    fn read_kv(block: &KvBlock, prefix: &str) -> Result<Self, KvError> {
        let d = MarParams::default();
        let n_max = block.optional(&key(prefix, "n_max"))?.unwrap_or(d.n_max);
        let step_width = block
            .optional(&key(prefix, "step_width"))?
            .unwrap_or(d.step_width);
        let base_scale = block
            .optional(&key(prefix, "base_scale"))?
            .unwrap_or(d.base_scale);
        MarParams::new(n_max, step_width, base_scale).map_err(|e| KvError::Rejected {
            key: key(prefix, e.field),
            message: e.message,
        })
    }
}
