use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lpns_core::io::{encode_snapshot, write_snapshot, SnapshotMeta};
use lpns_core::spectral::{make_taylor_green, GridSpec, PhysicalVelocity};
use serde_json::Value;

fn lpns(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpns"))
        .args(args)
        .current_dir(dir)
        .env_remove("LPNS_THREADS")
        .output()
        .expect("spawn lpns")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(o)))
}

const TG_CONFIG: &str = "\
# Taylor-Green, short run
n = 16
nu = 0.1
dt = 0.01
t_end = 0.1
initial = taylor_green
amplitude = 1.0
snapshot_every = 5
";

#[test]
fn simulate_writes_csv_manifest_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tg.cfg"), TG_CONFIG).unwrap();
    let o = lpns(&["simulate", "--config", "tg.cfg", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(dir.path().join("run/diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,E,enstrophy,H1,H32,y,riccati_lhs,riccati_rhs,A,B,C,flux_sum,Eq0,Eq1,Eq2,Eq3,Eq4"
    );
    assert_eq!(lines.count(), 11);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["nu"], 0.1);
    assert_eq!(manifest["config"]["initial"]["kind"], "taylor_green");
    assert_eq!(manifest["steps"], 10);
    assert!(manifest["psi_profile"].as_str().unwrap().starts_with("exp-ratio"));
    assert!(manifest["version"].is_string());
    let snaps = manifest["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 3);
    for s in snaps {
        let path = dir.path().join("run").join(s.as_str().unwrap());
        assert!(path.exists());
        assert!(path.with_extension("json").exists());
    }
}

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n = 16\nnu = 0.05\ndt = 0.005\nt_end = 0.05\ninitial = random\nseed = 3\nspectrum = 0:1.0, 1:0.5\n";
    fs::write(dir.path().join("r.cfg"), cfg).unwrap();
    let mut outputs = Vec::new();
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let o = Command::new(env!("CARGO_BIN_EXE_lpns"))
            .args(["simulate", "--config", "r.cfg", "--out", out])
            .current_dir(dir.path())
            .env("LPNS_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push((
            fs::read(dir.path().join(out).join("diagnostics.csv")).unwrap(),
            fs::read(dir.path().join(out).join("manifest.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("no_nu.cfg", "n = 16\ndt = 0.01\nt_end = 0.1\n"),
        ("unknown.cfg", "n = 16\nnu = 0.1\ndt = 0.01\nt_end = 0.1\nreynolds = 100\n"),
        ("grid.cfg", "n = 12\nnu = 0.1\ndt = 0.01\nt_end = 0.1\n"),
        ("snap.cfg", "n = 16\nnu = 0.1\ndt = 0.01\nt_end = 0.1\ninitial = snapshot\nsnapshot = missing.lpns\n"),
    ] {
        fs::write(dir.path().join(name), text).unwrap();
        let o = lpns(&["simulate", "--config", name], dir.path());
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
    }
    let o = lpns(&["simulate", "--config", "absent.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&lpns(&["simulate", "--config", "no_nu.cfg"], dir.path())).contains("nu"));
}

#[test]
fn cfl_violation_reports_the_admissible_step() {
    let dir = tempfile::tempdir().unwrap();
    let amplitude = 5.0;
    let cfg = format!("n = 16\nnu = 0.1\ndt = 0.05\nt_end = 1\namplitude = {amplitude}\n");
    fs::write(dir.path().join("cfl.cfg"), cfg).unwrap();
    let o = lpns(&["simulate", "--config", "cfl.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("admissible dt"), "{err}");

    // Taylor-Green has max |u| = amplitude, so the limit is 0.5 (2π/n) / amplitude.
    let expected = 0.5 * (std::f64::consts::TAU / 16.0) / amplitude;
    let reported: f64 = err
        .rsplit("<= ")
        .next()
        .unwrap()
        .trim()
        .parse()
        .unwrap_or_else(|_| panic!("no number in {err}"));
    assert!((reported - expected).abs() < 1e-12 * expected, "{reported} vs {expected}");
    assert!(!dir.path().join("run").exists());
}

#[test]
fn analyze_taylor_green_has_two_nonzero_shells() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::new(16).unwrap();
    let u = make_taylor_green(grid, 1.0).unwrap();
    let path = dir.path().join("tg.lpns");
    write_snapshot(&path, &u, &SnapshotMeta::new(grid, 0.0, "taylor_green")).unwrap();

    let o = lpns(&["analyze", "tg.lpns", "--s", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&o);
    let energies: Vec<f64> = report["report"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["energy"].as_f64().unwrap())
        .collect();
    let nonzero = energies.iter().filter(|&&e| e > 1e-12).count();
    assert_eq!(nonzero, 2, "{energies:?}");
    let total = std::f64::consts::PI.powi(3) * 2.0;
    assert!((report["energy"].as_f64().unwrap() - total).abs() < 1e-10 * total);
    assert_eq!(report["nu"], 1.0);
}

#[test]
fn analyze_zero_field_reports_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::new(16).unwrap();
    fs::write(dir.path().join("zero.lpns"), encode_snapshot(&PhysicalVelocity::zeros(grid), 0.0)).unwrap();
    let o = lpns(&["analyze", "zero.lpns"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&o);
    assert_eq!(report["energy"], 0.0);
    assert_eq!(report["sobolev_norm"], 0.0);
    for row in report["report"]["rows"].as_array().unwrap() {
        for key in ["energy", "transfer", "partition_flux", "lemma1_lhs", "remainder_l2"] {
            assert_eq!(row[key], 0.0, "{key}");
        }
    }
    assert_eq!(report["report"]["riccati"]["y"], 0.0);
}

#[test]
fn analyze_rejects_damaged_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::new(16).unwrap();
    let good = encode_snapshot(&PhysicalVelocity::zeros(grid), 0.0);
    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"NOPE");
    let mut version = good.clone();
    version[4] = 9;
    for (name, bytes) in [
        ("trunc.lpns", &good[..good.len() / 2]),
        ("magic.lpns", &magic[..]),
        ("version.lpns", &version[..]),
    ] {
        fs::write(dir.path().join(name), bytes).unwrap();
        let o = lpns(&["analyze", name], dir.path());
        assert_eq!(o.status.code(), Some(2), "{name}");
    }
}

#[test]
fn verify_partition_passes() {
    let dir = tempfile::tempdir().unwrap();
    for n in ["16", "32"] {
        let o = lpns(&["verify", "--suite", "partition", "--n", n], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).contains("PASS partition_of_unity"));
    }
}

#[test]
fn verify_tensor_passes_at_16() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpns(&["verify", "--suite", "tensor", "--n", "16", "--seed", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn verify_nlt_detects_a_gradient_component() {
    let dir = tempfile::tempdir().unwrap();
    let clean = lpns(&["verify", "--suite", "nlt", "--n", "16"], dir.path());
    assert_eq!(clean.status.code(), Some(0), "{}", stdout(&clean));
    let o = lpns(&["verify", "--suite", "nlt", "--n", "16", "--inject-nonsolenoidal"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let line = out
        .lines()
        .find(|l| l.starts_with("FAIL partition_flux_sum_rel"))
        .unwrap_or_else(|| panic!("{out}"));
    let value: f64 = line.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(value > 1e-6, "{line}");
}

#[test]
fn verify_rejects_unknown_suite() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lpns(&["verify", "--suite", "everything"], dir.path()).status.code(), Some(2));
}

#[test]
fn bounds_recovers_riccati_blowup_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,y\n");
    for i in 0..20 {
        let t = 0.045 * i as f64;
        csv += &format!("{t:.17e},{:.17e}\n", 1.0 / (1.0 - t));
    }
    fs::write(dir.path().join("ric.csv"), csv).unwrap();
    let o = lpns(&["bounds", "ric.csv", "--c", "1", "--kinds", "main_h32,giga_hs=1.2,lp=4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&o);
    let floor = report["blowup_floor"].as_f64().unwrap();
    assert!((floor - 1.0).abs() < 1e-9, "{floor}");
    assert!((report["fit_rate"]["alpha"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let bounds = report["bounds"].as_array().unwrap();
    assert_eq!(bounds.len(), 3);
    assert_eq!(bounds[1]["kind"], "giga_hs");
    assert!((bounds[1]["rate"].as_f64().unwrap() - 0.35).abs() < 1e-15);
    let env = bounds[0]["envelope"].as_array().unwrap();
    assert_eq!(env.len(), 20);
    let t = env[4]["t"].as_f64().unwrap();
    assert!((env[4]["bound"].as_f64().unwrap() - (1.0 - t).powf(-0.5)).abs() < 1e-9);
}

#[test]
fn bounds_flags_a_decaying_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tg.cfg"), TG_CONFIG).unwrap();
    assert_eq!(
        lpns(&["simulate", "--config", "tg.cfg", "--out", "run"], dir.path()).status.code(),
        Some(0)
    );
    let o = lpns(&["bounds", "run/diagnostics.csv", "--s", "1.5", "--c", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&o);
    assert!(report["blowup_floor"].as_f64().unwrap() > report["t_end"].as_f64().unwrap());
    assert_eq!(report["no_blowup_signal"], true);
    assert!(stderr(&o).contains("no blow-up signal"));
}

#[test]
fn bounds_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("noy.csv"), "t,E\n0,1\n1,2\n").unwrap();
    fs::write(dir.path().join("ok.csv"), "t,y\n0,1\n1,2\n").unwrap();
    fs::write(dir.path().join("back.csv"), "t,y\n1,1\n0,2\n").unwrap();
    for args in [
        &["bounds", "noy.csv"][..],
        &["bounds", "absent.csv"],
        &["bounds", "back.csv"],
        &["bounds", "ok.csv", "--kinds", "warp_drive"],
        &["bounds", "ok.csv", "--kinds", "lp=2"],
        &["bounds", "ok.csv", "--c", "-1"],
    ] {
        let o = lpns(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}
