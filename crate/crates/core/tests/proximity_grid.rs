use junctionlab_core::proximity::{calibrate_coupling, cooper_limit_gap, BilayerSpec};
use junctionlab_core::types::{Electrode, N0_ALUMINUM};

fn spec(tau: f64, d_b: f64) -> BilayerSpec {
    let al = Electrode::new(230.0, 0.0, N0_ALUMINUM, 40.0).unwrap();
    BilayerSpec::with_titanium_cap(al, d_b, tau).unwrap()
}

/// 10 × 10 grid of coupling τ ∈ [0, 1] and Ti thickness d_b ∈ [1, 50] nm.
fn grid() -> Vec<(f64, f64)> {
    let taus: Vec<f64> = (0..10).map(|k| k as f64 / 9.0).collect();
    let ds: Vec<f64> = (0..10).map(|k| 1.0 + 49.0 * k as f64 / 9.0).collect();
    taus.iter()
        .flat_map(|&t| ds.iter().map(move |&d| (t, d)))
        .collect()
}

#[test]
fn bounded_and_monotone_on_the_grid() {
    for (tau, d) in grid() {
        let s = spec(tau, d);
        let gap = cooper_limit_gap(&s);
        assert!(
            gap <= 230.0 + 1e-12 && gap >= s.fully_coupled_gap() - 1e-12,
            "τ={tau} d={d}: {gap}"
        );
        if tau == 0.0 {
            assert_eq!(gap, 230.0);
        }
        let thicker = cooper_limit_gap(&spec(tau, d + 1.0));
        let stronger = cooper_limit_gap(&spec((tau + 0.05).min(1.0), d));
        assert!(thicker <= gap && stronger <= gap);
    }
}

#[test]
fn calibration_inverts_on_the_grid() {
    for (tau, d) in grid().into_iter().filter(|&(t, _)| t > 0.0) {
        let s = spec(tau, d);
        let recovered = calibrate_coupling(&s, cooper_limit_gap(&s)).unwrap();
        assert!(
            (recovered - tau).abs() < 1e-10,
            "τ={tau} d={d}: {recovered}"
        );
    }
}

#[test]
fn out_of_range_measurements_are_rejected() {
    let s = spec(0.5, 20.0);
    assert!(calibrate_coupling(&s, 231.0).is_err());
    assert!(calibrate_coupling(&s, s.fully_coupled_gap() - 1.0).is_err());
}
