use junctionlab_core::fitio::{
    differentiate_iv, integrate_conductance, parse_trace, write_trace, Trace, TraceFile,
};
use junctionlab_core::types::{ConductanceCurve, IVCurve};
use proptest::prelude::*;

/// Smooth stand-in for a broadened gap edge (nA at μV).
fn current(v: f64) -> f64 {
    v / 10.0 + 8.0 * ((v - 120.0) / 25.0).tanh() + 8.0 * ((v + 120.0) / 25.0).tanh()
}

fn grid(step: f64) -> Vec<f64> {
    let n = (800.0 / step).round() as usize;
    (0..=n).map(|k| -400.0 + step * k as f64).collect()
}

/// Max error of IV → conductance → IV, anchored at zero bias.
fn round_trip_error(step: f64) -> f64 {
    let bias = grid(step);
    let i: Vec<f64> = bias.iter().map(|&v| current(v)).collect();
    let iv = IVCurve::new(bias.clone(), i.clone(), "").unwrap();
    let g = differentiate_iv(&iv).unwrap();
    let back = integrate_conductance(&g, (0.0, current(0.0))).unwrap();
    back.current()
        .iter()
        .zip(&i)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn round_trip_error_is_second_order() {
    let errors: Vec<f64> = [8.0, 4.0, 2.0, 1.0]
        .iter()
        .map(|&h| round_trip_error(h))
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn constant_conductance_integrates_to_a_line() {
    let bias = grid(5.0);
    let g = ConductanceCurve::new(bias.clone(), vec![117.647; bias.len()], "").unwrap();
    let iv = integrate_conductance(&g, (0.0, 0.0)).unwrap();
    for (v, i) in iv.samples() {
        assert!((i - 0.117647 * v).abs() < 1e-9, "{v}: {i}");
    }
}

#[test]
fn written_traces_parse_back_exactly() {
    let bias = grid(3.0);
    let i: Vec<f64> = bias.iter().map(|&v| current(v) / 3.0).collect();
    let trace = Trace::Iv(IVCurve::new(bias, i, "draw 7").unwrap());
    let text = write_trace(&trace, None);
    let back = parse_trace(&text, &TraceFile::new("mem.csv"), "mem.csv").unwrap();
    assert_eq!(back, trace);
}

proptest! {
    #[test]
    fn any_finite_samples_survive_serialization(
        mut bias in prop::collection::vec(-1e4..1e4f64, 3..40),
        seed in prop::collection::vec(-1e6..1e6f64, 40),
    ) {
        bias.sort_by(f64::total_cmp);
        bias.dedup();
        prop_assume!(bias.len() >= 3);
        let g: Vec<f64> = seed[..bias.len()].to_vec();
        let trace = Trace::Conductance(ConductanceCurve::new(bias, g, "").unwrap());
        let back = parse_trace(&write_trace(&trace, None), &TraceFile::new("p"), "p").unwrap();
        prop_assert_eq!(back, trace);
    }
}
