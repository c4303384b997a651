//! Globally adaptive Gauss–Kronrod (10/21) quadrature for vector-valued
//! integrands over a set of panels.
//!
//! Panel endpoints flagged as singular are treated with the substitution
//! `x = a + w·t²`, which removes inverse-square-root edge singularities of
//! the BCS density of states. Panels are then bisected by largest error
//! until every component meets its tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_478_160,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 0.0,
            max_segments: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("adaptive quadrature did not reach relative tolerance {rel_tol:e} within {segments} segments (error estimate {error:e}, value {value:e})")]
    Budget {
        rel_tol: f64,
        segments: usize,
        value: f64,
        error: f64,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

/// Integration interval; singular ends receive the square-root substitution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub lo: f64,
    pub hi: f64,
    pub singular_lo: bool,
    pub singular_hi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

/// Splits `[lo, hi]` at the given edge (singular) and break (regular) points.
///
/// Points outside the open interval are ignored and coincident points are
/// merged; a panel that would have two singular ends is split at its midpoint.
pub fn build_panels(lo: f64, hi: f64, edges: &[f64], breaks: &[f64]) -> Vec<Panel> {
    assert!(lo < hi, "empty integration interval [{lo}, {hi}]");
    let merge_tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
    let mut points: Vec<(f64, bool)> = vec![(lo, false), (hi, false)];
    for &e in edges {
        if e >= lo && e <= hi {
            points.push((e, true));
        }
    }
    for &b in breaks {
        if b > lo && b < hi {
            points.push((b, false));
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(points.len());
    for (x, singular) in points {
        match merged.last_mut() {
            Some(last) if x - last.0 <= merge_tol => last.1 |= singular,
            _ => merged.push((x, singular)),
        }
    }
    let mut panels = Vec::with_capacity(merged.len());
    for pair in merged.windows(2) {
        let (a, sa) = pair[0];
        let (b, sb) = pair[1];
        if sa && sb {
            let mid = 0.5 * (a + b);
            panels.push(Panel {
                lo: a,
                hi: mid,
                singular_lo: true,
                singular_hi: false,
            });
            panels.push(Panel {
                lo: mid,
                hi: b,
                singular_lo: false,
                singular_hi: true,
            });
        } else {
            panels.push(Panel {
                lo: a,
                hi: b,
                singular_lo: sa,
                singular_hi: sb,
            });
        }
    }
    panels
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    // x = a + w t², t in [0, 1]
    FromLo { a: f64, w: f64 },
    // x = b - w t², t in [0, 1]
    FromHi { b: f64, w: f64 },
}

impl Map {
    fn for_panel(p: &Panel) -> (Map, f64, f64) {
        let w = p.hi - p.lo;
        if p.singular_lo {
            (Map::FromLo { a: p.lo, w }, 0.0, 1.0)
        } else if p.singular_hi {
            (Map::FromHi { b: p.hi, w }, 0.0, 1.0)
        } else {
            (Map::Identity, p.lo, p.hi)
        }
    }

    #[inline]
    fn apply(self, s: f64) -> (f64, f64) {
        match self {
            Map::Identity => (s, 1.0),
            Map::FromLo { a, w } => (a + w * s * s, 2.0 * w * s),
            Map::FromHi { b, w } => (b - w * s * s, 2.0 * w * s),
        }
    }
}

struct Segment<const N: usize> {
    map: Map,
    lo: f64,
    hi: f64,
    value: [f64; N],
    error: [f64; N],
    abs: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority.total_cmp(&other.priority) == Ordering::Equal
    }
}

impl<const N: usize> Eq for Segment<N> {}

impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// Kronrod estimate, Gauss estimate and |f| integral over one panel.
type RuleEstimates<const N: usize> = ([f64; N], [f64; N], [f64; N]);

fn gauss_kronrod<const N: usize, F>(
    f: &F,
    map: Map,
    lo: f64,
    hi: f64,
) -> Result<RuleEstimates<N>, QuadError>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |s: f64| -> Result<[f64; N], QuadError> {
        let (x, jac) = map.apply(s);
        let mut y = f(x);
        for v in y.iter_mut() {
            *v *= jac;
            if !v.is_finite() {
                return Err(QuadError::NonFinite(x));
            }
        }
        Ok(y)
    };

    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let mut abs = [0.0; N];
    let mut samples = [[0.0; N]; 21];

    let fc = eval(center)?;
    samples[20] = fc;
    for k in 0..N {
        kron[k] = WGK[10] * fc[k];
        abs[k] = WGK[10] * fc[k].abs();
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        samples[2 * j] = f1;
        samples[2 * j + 1] = f2;
        for k in 0..N {
            kron[k] += WGK[j] * (f1[k] + f2[k]);
            abs[k] += WGK[j] * (f1[k].abs() + f2[k].abs());
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * (f1[k] + f2[k]);
            }
        }
    }

    let mut error = [0.0; N];
    for k in 0..N {
        let mean = 0.5 * kron[k];
        let mut asc = WGK[10] * (samples[20][k] - mean).abs();
        for j in 0..10 {
            asc +=
                WGK[j] * ((samples[2 * j][k] - mean).abs() + (samples[2 * j + 1][k] - mean).abs());
        }
        let asc = asc * half.abs();
        let diff = ((kron[k] - gauss[k]) * half).abs();
        let mut err = diff;
        if asc != 0.0 && diff != 0.0 {
            err = asc * (200.0 * diff / asc).powf(1.5).min(1.0);
        }
        let roundoff = 50.0 * f64::EPSILON * abs[k] * half.abs();
        if roundoff > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(roundoff);
        }
        error[k] = err;
        kron[k] *= half;
        abs[k] *= half.abs();
    }
    Ok((kron, error, abs))
}

/// Integrates `f` over the union of `panels`.
///
/// Converges when, for every component, the summed error estimate is below
/// `max(rel_tol·|value|, abs_tol, 50·ε·∫|f|)`.
pub fn integrate<const N: usize, F>(
    f: F,
    panels: &[Panel],
    settings: &QuadSettings,
) -> Result<QuadResult<N>, QuadError>
where
    F: Fn(f64) -> [f64; N],
{
    let mut heap: BinaryHeap<Segment<N>> = BinaryHeap::with_capacity(2 * panels.len() + 64);
    let mut frozen: Vec<Segment<N>> = Vec::new();
    let mut total = [0.0; N];
    let mut total_err = [0.0; N];
    let mut total_abs = [0.0; N];
    let mut evaluations = 0usize;

    let mut raw = Vec::with_capacity(panels.len());
    for p in panels {
        if p.hi <= p.lo {
            continue;
        }
        let (map, lo, hi) = Map::for_panel(p);
        let (value, error, abs) = gauss_kronrod(&f, map, lo, hi)?;
        evaluations += 21;
        for k in 0..N {
            total[k] += value[k];
            total_err[k] += error[k];
            total_abs[k] += abs[k];
        }
        raw.push((map, lo, hi, value, error, abs));
    }

    let scale = |total: &[f64; N], total_abs: &[f64; N], k: usize| -> f64 {
        (settings.rel_tol * total[k].abs())
            .max(settings.abs_tol)
            .max(50.0 * f64::EPSILON * total_abs[k])
    };
    let priority = |error: &[f64; N], total: &[f64; N], total_abs: &[f64; N]| -> f64 {
        (0..N)
            .map(|k| {
                let s = scale(total, total_abs, k);
                if s > 0.0 {
                    error[k] / s
                } else if error[k] > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    };

    for (map, lo, hi, value, error, abs) in raw {
        heap.push(Segment {
            map,
            lo,
            hi,
            value,
            error,
            abs,
            priority: priority(&error, &total, &total_abs),
        });
    }

    let converged = |total: &[f64; N], total_err: &[f64; N], total_abs: &[f64; N]| {
        (0..N).all(|k| total_err[k] <= scale(total, total_abs, k))
    };

    loop {
        if converged(&total, &total_err, &total_abs) {
            break;
        }
        if heap.len() + frozen.len() >= settings.max_segments {
            return Err(budget_error(
                settings,
                heap.len() + frozen.len(),
                &total,
                &total_err,
            ));
        }
        let Some(seg) = heap.pop() else {
            return Err(budget_error(settings, frozen.len(), &total, &total_err));
        };
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo
            || mid >= seg.hi
            || (seg.hi - seg.lo) < 1e-14 * seg.lo.abs().max(seg.hi.abs())
        {
            frozen.push(seg);
            continue;
        }
        let (v1, e1, a1) = gauss_kronrod(&f, seg.map, seg.lo, mid)?;
        let (v2, e2, a2) = gauss_kronrod(&f, seg.map, mid, seg.hi)?;
        evaluations += 42;
        for k in 0..N {
            total[k] += v1[k] + v2[k] - seg.value[k];
            total_err[k] += e1[k] + e2[k] - seg.error[k];
            total_abs[k] += a1[k] + a2[k] - seg.abs[k];
        }
        for (lo, hi, value, error, abs) in [(seg.lo, mid, v1, e1, a1), (mid, seg.hi, v2, e2, a2)] {
            heap.push(Segment {
                map: seg.map,
                lo,
                hi,
                value,
                error,
                abs,
                priority: priority(&error, &total, &total_abs),
            });
        }
    }

    // resum to drop the drift of the incremental updates
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for seg in heap.iter().chain(frozen.iter()) {
        for k in 0..N {
            value[k] += seg.value[k];
            error[k] += seg.error[k];
        }
    }
    Ok(QuadResult {
        value,
        error,
        evaluations,
    })
}

fn budget_error<const N: usize>(
    settings: &QuadSettings,
    segments: usize,
    total: &[f64; N],
    err: &[f64; N],
) -> QuadError {
    let k = (0..N)
        .max_by(|&a, &b| {
            let ra = err[a] / total[a].abs().max(f64::MIN_POSITIVE);
            let rb = err[b] / total[b].abs().max(f64::MIN_POSITIVE);
            ra.total_cmp(&rb)
        })
        .unwrap_or(0);
    QuadError::Budget {
        rel_tol: settings.rel_tol,
        segments,
        value: total.get(k).copied().unwrap_or(0.0),
        error: err.get(k).copied().unwrap_or(0.0),
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(
    f: F,
    panels: &[Panel],
    settings: &QuadSettings,
) -> Result<(f64, f64), QuadError>
where
    F: Fn(f64) -> f64,
{
    let r = integrate(|x| [f(x)], panels, settings)?;
    Ok((r.value[0], r.error[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_panel(lo: f64, hi: f64) -> Vec<Panel> {
        build_panels(lo, hi, &[], &[])
    }

    #[test]
    fn polynomials_are_exact() {
        let (v, _) = integrate_scalar(
            |x| 3.0 * x * x + 1.0,
            &one_panel(0.0, 2.0),
            &QuadSettings::default(),
        )
        .unwrap();
        assert!((v - 10.0).abs() < 1e-13);
    }

    #[test]
    fn smooth_oscillatory() {
        let (v, _) = integrate_scalar(
            f64::sin,
            &one_panel(0.0, std::f64::consts::PI),
            &QuadSettings::default(),
        )
        .unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_edge_singularities() {
        // ∫_1^2 x / sqrt(x² - 1) dx = sqrt(3)
        let panels = build_panels(1.0, 2.0, &[1.0], &[]);
        assert!(panels[0].singular_lo);
        let (v, _) = integrate_scalar(
            |x| x / (x * x - 1.0).sqrt(),
            &panels,
            &QuadSettings::default(),
        )
        .unwrap();
        assert!((v - 3f64.sqrt()).abs() < 1e-9, "{v}");

        // both ends singular: ∫_{-1}^{1} 1/sqrt(1-x²) = π
        let panels = build_panels(-1.0, 1.0, &[-1.0, 1.0], &[]);
        assert_eq!(panels.len(), 2);
        let (v, _) = integrate_scalar(
            |x| 1.0 / (1.0 - x * x).sqrt(),
            &panels,
            &QuadSettings::default(),
        )
        .unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-9, "{v}");
    }

    #[test]
    fn sharp_interior_feature_with_break() {
        let w = 1e-3;
        let lorentz = |x: f64| w / std::f64::consts::PI / ((x - 0.3) * (x - 0.3) + w * w);
        let panels = build_panels(-10.0, 10.0, &[], &[0.3]);
        let (v, _) = integrate_scalar(lorentz, &panels, &QuadSettings::default()).unwrap();
        let exact = ((10.0 - 0.3) / w).atan() / std::f64::consts::PI
            + ((10.0 + 0.3) / w).atan() / std::f64::consts::PI;
        assert!((v - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn vector_components_share_the_mesh() {
        let panels = build_panels(0.0, 1.0, &[], &[0.5]);
        let r = integrate(|x| [x, x * x, 0.0], &panels, &QuadSettings::default()).unwrap();
        assert!((r.value[0] - 0.5).abs() < 1e-14);
        assert!((r.value[1] - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(r.value[2], 0.0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let settings = QuadSettings {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_segments: 3,
        };
        let panels = build_panels(0.0, 1.0, &[], &[]);
        let err = integrate_scalar(|x| (1.0 / (x + 1e-9)).sin(), &panels, &settings).unwrap_err();
        assert!(matches!(err, QuadError::Budget { .. }));
    }

    #[test]
    fn panels_merge_coincident_points() {
        let panels = build_panels(-1.0, 1.0, &[0.0, 0.0, 5.0], &[0.0, -1.0]);
        assert_eq!(panels.len(), 2);
        assert!(panels[0].singular_hi && panels[1].singular_lo);
    }
}
