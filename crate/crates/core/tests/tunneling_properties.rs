use junctionlab_core::fitio::derivative;
use junctionlab_core::tunneling::{partition_nonequilibrium, OccupationModel, TunnelingModel};
use junctionlab_core::types::{Electrode, Junction, N0_ALUMINUM};
use proptest::prelude::*;

fn junction(g1: f64, g2: f64, dynes_frac: f64, rn: f64) -> Junction {
    let e1 = Electrode::new(g1, dynes_frac * g1, N0_ALUMINUM, 30.0).unwrap();
    let e2 = Electrode::new(g2, dynes_frac * g2, N0_ALUMINUM, 30.0).unwrap();
    Junction::new(e1, e2, rn, 0.0).unwrap()
}

fn thermal(j: &Junction, t: f64) -> TunnelingModel {
    TunnelingModel::new(j, t, &OccupationModel::Thermal).unwrap()
}

fn peak_bias(m: &TunnelingModel, lo: f64, hi: f64, step: f64) -> f64 {
    let bias: Vec<f64> = (0..=((hi - lo) / step).round() as usize)
        .map(|k| lo + step * k as f64)
        .collect();
    let g = derivative(&bias, &m.sweep(&bias).unwrap()).unwrap();
    let k = (0..g.len()).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
    bias[k]
}

#[test]
fn onset_sits_at_gap_sum() {
    let m = thermal(&junction(190.0, 190.0, 1e-3, 18.6), 0.02);
    assert!((peak_bias(&m, 300.0, 460.0, 0.5) - 380.0).abs() <= 1.0);
    let m = thermal(&junction(190.0, 120.0, 1e-3, 18.6), 0.02);
    assert!((peak_bias(&m, 250.0, 380.0, 0.5) - 310.0).abs() <= 1.0);
}

#[test]
fn ohmic_far_above_the_gap() {
    let j = junction(190.0, 120.0, 1e-3, 8.5);
    let m = thermal(&j, 0.02);
    for v in [4.0 * 310.0, 8.0 * 310.0] {
        let i = m.current(v).unwrap();
        assert!((i * 8.5 / v - 1.0).abs() < 0.03, "V = {v}: I = {i}");
    }
    // approached from below, as −(Δ₁² + Δ₂²)/(2·V·Rn)
    let v = 6000.0;
    let deficit = (m.current(v).unwrap() - v / 8.5) * v * 8.5;
    let expected = -(190.0f64.powi(2) + 120.0f64.powi(2)) / 2.0;
    assert!((deficit / expected - 1.0).abs() < 0.02, "{deficit}");
}

#[test]
fn hard_gap_below_onset() {
    // Dynes width at the floor; leakage stays below 1 pA up to half the gap sum
    let m = thermal(&junction(190.0, 190.0, 0.0, 18.6), 0.02);
    for v in [20.0, 100.0, 150.0, 190.0] {
        assert!(m.current(v).unwrap().abs() < 1e-3, "V = {v}");
    }
}

#[test]
fn subgap_current_is_thermally_activated() {
    // below ~100 mK the Dynes leakage dominates, so start above it
    let j = junction(190.0, 120.0, 1e-4, 10.0);
    let mut last = 0.0;
    for t in [0.15, 0.2, 0.25, 0.3, 0.35] {
        let i = thermal(&j, t).current(155.0).unwrap();
        assert!(i > last, "T = {t}: {i} <= {last}");
        last = i;
    }
}

#[test]
fn excess_quasiparticles_flow_downhill_at_photon_energy() {
    // 5.1 GHz photon, quasiparticles placed in the low-gap electrode
    let j = junction(190.0, 110.0, 1e-4, 10.0);
    let (n1, n2) = partition_nonequilibrium(&j, 1.0, 0.02);
    let occ = OccupationModel::nonequilibrium(n1, n2).unwrap();
    let m = TunnelingModel::new(&j, 0.02, &occ).unwrap();
    let d = m.directional(21.09).unwrap();
    assert!(d.forward >= 0.0 && d.backward >= 0.0);
    assert!(d.sum() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn odd_in_bias(g1 in 100.0..250.0f64, g2 in 60.0..250.0f64, t in 0.02..0.3f64, v in 1.0..900.0f64) {
        let m = thermal(&junction(g1, g2, 1e-3, 10.0), t);
        let (a, b) = (m.current(v).unwrap(), m.current(-v).unwrap());
        prop_assert!((a + b).abs() <= 1e-5 * a.abs().max(1e-12), "{a} vs {b}");
    }

    #[test]
    fn directional_parts_add_up(g1 in 100.0..250.0f64, g2 in 60.0..250.0f64, t in 0.02..0.3f64, v in -900.0..900.0f64) {
        let m = thermal(&junction(g1, g2, 1e-3, 10.0), t);
        let d = m.directional(v).unwrap();
        let i = m.current(v).unwrap();
        prop_assert!(d.forward >= 0.0 && d.backward >= 0.0);
        prop_assert!((d.net() - i).abs() <= 1e-5 * i.abs().max(d.sum() * 1e-6), "{:?} vs {i}", d);
    }

    #[test]
    fn current_follows_bias_sign(g in 100.0..250.0f64, v in 1.0..1200.0f64) {
        let m = thermal(&junction(g, 0.8 * g, 1e-3, 10.0), 0.05);
        prop_assert!(m.current(v).unwrap() > 0.0);
    }
}
