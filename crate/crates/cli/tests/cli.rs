use std::path::{Path, PathBuf};
use std::process::Command;

use junctionlab_core::fitio::{derivative, parse_trace, Trace, TraceFile};
use junctionlab_core::KvBlock;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn junctionlab(args: &[&str], envs: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_junctionlab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn run(args: &[&str]) -> Run {
    junctionlab(args, &[])
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn out_path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn read_trace(path: &str) -> Trace {
    let text = std::fs::read_to_string(path).unwrap();
    parse_trace(&text, &TraceFile::new(path), path).unwrap()
}

/// Checks the first line points at an existing manifest and returns its block.
fn manifest_of(path: &str) -> KvBlock {
    let text = std::fs::read_to_string(path).unwrap();
    let first = text.lines().next().unwrap();
    let m = first
        .strip_prefix("# manifest: ")
        .expect("manifest reference");
    assert_eq!(PathBuf::from(m), PathBuf::from(format!("{path}.manifest")));
    KvBlock::parse(&std::fs::read_to_string(m).unwrap()).unwrap()
}

const SYMMETRIC: &str = "\
junction.electrode1.gap0 = 190
junction.electrode2.gap0 = 190
junction.rn = 18.6
bias.start = -800
bias.stop = 800
bias.step = 1
temperature_mk = 20
";

fn peak(trace: &Trace, lo: f64, hi: f64) -> f64 {
    let g = derivative(trace.bias(), trace.signal()).unwrap();
    let idx = (0..g.len())
        .filter(|&i| trace.bias()[i] > lo && trace.bias()[i] < hi)
        .max_by(|&a, &b| g[a].total_cmp(&g[b]))
        .unwrap();
    trace.bias()[idx]
}

#[test]
fn simulate_symmetric_onset_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sym.conf", SYMMETRIC);
    let out = out_path(&dir, "sym.csv");
    let svg = out_path(&dir, "sym.svg");
    let r = run(&["simulate", &cfg, "--out", &out, "--svg", &svg]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let trace = read_trace(&out);
    assert_eq!(trace.bias().len(), 1601);
    assert!((peak(&trace, 0.0, 800.0) - 380.0).abs() <= 1.0);
    let m = manifest_of(&out);
    assert_eq!(m.get("subcommand"), Some("simulate"));
    assert_eq!(m.get("config.junction.rn"), Some("18.6"));
    assert_eq!(m.get("input.0.path"), Some(cfg.as_str()));
    assert_eq!(m.get("input.0.sha256").map(str::len), Some(64));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn simulate_al_ti_onset_and_subgap_rise() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "alti.conf",
        "junction.electrode1.gap0 = 190\njunction.electrode2.gap0 = 120\njunction.rn = 8.5\n\
         junction.transparency = 0.05\nmar.rise = 15\nbias.start = -600\nbias.stop = 600\nbias.step = 2\n",
    );
    let out = out_path(&dir, "alti.csv");
    let r = run(&["simulate", &cfg, "--out", &out]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let trace = read_trace(&out);
    assert!((peak(&trace, 250.0, 600.0) - 310.0).abs() <= 2.0);
    let at = |v: f64| {
        let k = trace.bias().iter().position(|&b| b == v).unwrap();
        trace.signal()[k]
    };
    assert!((at(300.0) - at(100.0) - 15.0).abs() < 1e-9);
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "n.conf",
        &format!("{SYMMETRIC}noise.rel = 0.01\nnoise.seed = 9\n"),
    );
    let (a, b) = (out_path(&dir, "a.csv"), out_path(&dir, "b.csv"));
    assert_eq!(run(&["simulate", &cfg, "--out", &a]).code, 0);
    assert_eq!(run(&["simulate", &cfg, "--out", &b]).code, 0);
    let body = |p: &str| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body(&a), body(&b));
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "x.csv");
    let zero = write(
        &dir,
        "zero.conf",
        &SYMMETRIC.replace("bias.stop = 800", "bias.stop = -800"),
    );
    let r = run(&["simulate", &zero, "--out", &out]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bias.stop"), "{}", r.stderr);

    let typo = write(
        &dir,
        "typo.conf",
        &format!("{SYMMETRIC}junction.transparancy = 0.1\n"),
    );
    let r = run(&["simulate", &typo, "--out", &out]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("junction.transparancy"));

    let missing = write(
        &dir,
        "missing.conf",
        &SYMMETRIC.replace("junction.rn = 18.6\n", ""),
    );
    let r = run(&["simulate", &missing, "--out", &out]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("junction.rn"));

    assert_eq!(
        run(&["simulate", "/nonexistent.conf", "--out", &out]).code,
        2
    );
    assert_eq!(run(&["simulate"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sym.conf", SYMMETRIC);
    let out = out_path(&dir, "t.csv");
    assert_eq!(
        junctionlab(
            &["simulate", &cfg, "--out", &out],
            &[("JUNCTIONLAB_THREADS", "2")]
        )
        .code,
        0
    );
    let r = junctionlab(
        &["simulate", &cfg, "--out", &out],
        &[("JUNCTIONLAB_THREADS", "many")],
    );
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("JUNCTIONLAB_THREADS"));
}

const PEAK_FIT: &str = "fit.free = delta2, rn\nfit.method = peak\nfit.fixed.delta1 = 190\n";

#[test]
fn conductance_input_matches_integrated_iv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "peak.conf", PEAK_FIT);
    let iv = out_path(&dir, "ti.iv.csv");
    let r = run(&[
        "ingest",
        &fixture("ti.didv.csv"),
        "--to",
        "iv",
        "--out",
        &iv,
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (a, b) = (out_path(&dir, "a.report"), out_path(&dir, "b.report"));
    let ra = run(&["fit", &fixture("ti.didv.csv"), &cfg, "--out", &a]);
    let rb = run(&["fit", &iv, &cfg, "--out", &b]);
    assert_eq!((ra.code, rb.code), (0, 0), "{} {}", ra.stderr, rb.stderr);
    let block =
        |p: &str| junctionlab_cli::parse_report(&std::fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(block(&a), block(&b));
    let delta2: f64 = block(&a).require("result.delta2").unwrap();
    assert!((delta2 - 110.0).abs() <= 6.0, "{delta2}");
    assert!(ra.stdout.contains("Δ₁ = 190 μeV"));
    assert!(ra.stdout.contains("manifest: "));
}

#[test]
fn fit_failures() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "peak.conf", PEAK_FIT);
    let out = out_path(&dir, "r.report");
    assert_eq!(
        run(&["fit", "/no/such/file.csv", &cfg, "--out", &out]).code,
        2
    );

    let ohmic: String = (0..=100)
        .map(|k| {
            let v = -500.0 + 10.0 * k as f64;
            format!("{v},{}\n", v / 10.0)
        })
        .collect();
    let data = write(
        &dir,
        "ohmic.csv",
        &format!("# bias_uV, current_nA\n{ohmic}"),
    );
    let full = write(&dir, "full.conf", "fit.free = delta2, rn\n");
    let r = run(&["fit", &data, &full, "--out", &out]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("peak"), "{}", r.stderr);

    let bad = write(&dir, "bad.conf", "fit.free = delta2, gap3\n");
    let r = run(&["fit", &data, &bad, "--out", &out]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("fit.free"));
}

#[test]
fn t1_sweeps() {
    let dir = TempDir::new().unwrap();
    let near = out_path(&dir, "near.csv");
    let far = out_path(&dir, "far.csv");
    assert_eq!(
        run(&["t1", &fixture("qubit_near_symmetric.conf"), "--out", &near]).code,
        0
    );
    assert_eq!(
        run(&["t1", &fixture("qubit_asymmetric.conf"), "--out", &far]).code,
        0
    );
    let rows = |p: &str| -> Vec<Vec<f64>> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect()
    };
    assert!(std::fs::read_to_string(&near)
        .unwrap()
        .contains("# T_mK, T1_us, gamma_per_s, i_fwd_nA, i_bwd_nA"));
    let n = rows(&near);
    assert_eq!(n.len(), 19);
    let best = (0..n.len())
        .max_by(|&a, &b| n[a][1].total_cmp(&n[b][1]))
        .unwrap();
    assert!(best > 0 && best < n.len() - 1);
    assert!(rows(&far)[0][1] > n[0][1]);
    manifest_of(&near);

    let text = std::fs::read_to_string(fixture("qubit_near_symmetric.conf")).unwrap();
    let single = write(
        &dir,
        "one.conf",
        &text
            .replace("temperatures_mk = 20, 30,", "temperatures_mk = 20 #")
            .lines()
            .map(|l| l.split(" #").next().unwrap().to_string() + "\n")
            .collect::<String>(),
    );
    let one = out_path(&dir, "one.csv");
    assert_eq!(run(&["t1", &single, "--out", &one]).code, 0);
    assert_eq!(rows(&one).len(), 1);

    let unsorted = write(
        &dir,
        "uns.conf",
        &text.replace("temperatures_mk = 20, 30,", "temperatures_mk = 30, 20,"),
    );
    let r = run(&["t1", &unsorted, "--out", &one]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("temperatures_mk"));
}

#[test]
fn proximity_outputs() {
    let dir = TempDir::new().unwrap();
    let base = std::fs::read_to_string(fixture("bilayer.conf")).unwrap();
    let decoupled = write(
        &dir,
        "d.conf",
        &base.replace("bilayer.coupling = 1", "bilayer.coupling = 0"),
    );
    let r = run(&["proximity", &decoupled]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("delta_eff = 230 ueV"), "{}", r.stdout);

    let measured = write(&dir, "m.conf", &format!("{base}measured_gap = 110\n"));
    let r = run(&["proximity", &measured]);
    assert_eq!(r.code, 0);
    let block = KvBlock::parse(&r.stdout.replace(" ueV", "")).unwrap();
    let tau: f64 = block.require("coupling").unwrap();
    assert!(tau > 0.0 && tau <= 1.0);
    let gap: f64 = block.require("delta_eff").unwrap();
    assert!((gap - 110.0).abs() < 1e-8);

    let above = write(&dir, "a.conf", &format!("{base}measured_gap = 240\n"));
    let r = run(&["proximity", &above]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("measured_gap"));
}

#[test]
fn ingest_conversions() {
    let dir = TempDir::new().unwrap();
    let flat: String = (0..=40)
        .map(|k| format!("{},{}\n", -200.0 + 10.0 * k as f64, 50.0))
        .collect();
    let g = write(&dir, "flat.csv", &format!("# bias_uV, didv_uS\n{flat}"));
    let iv = out_path(&dir, "flat.iv.csv");
    assert_eq!(run(&["ingest", &g, "--to", "iv", "--out", &iv]).code, 0);
    let t = read_trace(&iv);
    for (v, i) in t.bias().iter().zip(t.signal()) {
        assert!((i - 0.05 * v).abs() < 1e-9);
    }
    manifest_of(&iv);

    // IV -> conductance -> IV on a simulated trace whose gap edge the grid resolves
    let cfg = write(
        &dir,
        "broad.conf",
        &SYMMETRIC.replace("bias.step = 1", "bias.step = 2").replace(
            "junction.rn = 18.6",
            "junction.rn = 18.6\njunction.electrode1.dynes = 4\njunction.electrode2.dynes = 4",
        ),
    );
    let sim = out_path(&dir, "broad.iv.csv");
    let didv = out_path(&dir, "broad.didv.csv");
    let back = out_path(&dir, "broad.back.csv");
    assert_eq!(run(&["simulate", &cfg, "--out", &sim]).code, 0);
    assert_eq!(
        run(&["ingest", &sim, "--to", "conductance", "--out", &didv]).code,
        0
    );
    let orig = read_trace(&sim);
    let r = run(&["ingest", &didv, "--to", "iv", "--out", &back]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let round = read_trace(&back);
    let scale = orig.signal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n = orig.bias().len();
    for k in n / 20..n - n / 20 {
        let err = (round.signal()[k] - orig.signal()[k]).abs();
        assert!(err <= 0.01 * scale, "V = {}: {err}", orig.bias()[k]);
    }

    let bad = write(&dir, "bad.csv", "# bias_uV, current_nA\n1,2\n2,3\n3,x\n");
    let r = run(&["ingest", &bad, "--to", "conductance", "--out", &didv]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains(":4:"), "{}", r.stderr);

    // header says V and uA; the flags reinterpret the columns as mV and nA
    let mv = write(&dir, "mv.csv", "# bias_V, current_uA\n-1,-2\n0,0\n1,2\n");
    let r = run(&[
        "ingest",
        &mv,
        "--to",
        "iv",
        "--bias-unit",
        "mV",
        "--signal-unit",
        "nA",
        "--out",
        &iv,
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = read_trace(&iv);
    assert_eq!(t.bias(), &[-1000.0, 0.0, 1000.0]);
    assert_eq!(t.signal(), &[-2.0, 0.0, 2.0]);
}
