use std::path::Path;
use std::process::{Command, Output};

use giant_eit::cli::{OUT_DIR_ENV, SPECTRUM_HEADER};

fn giant_eit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_giant-eit"))
        .args(args)
        .env_remove(OUT_DIR_ENV)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn uncoupled_spectrum_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[coupling_a]\nn_points = 3\ntau = 1.0\ngamma_31 = 0.0\n[drive]\nomega_c = 0.4\n[probe]\npoints = 101\n",
    );
    let out = giant_eit(dir.path(), &["spectrum", "--config", &cfg, "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path().join("o/giant_eit_spectrum.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SPECTRUM_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 101);
    for row in rows {
        let t: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(t, 1.0);
    }
}

#[test]
fn oracle_check_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = giant_eit(
            dir.path(),
            &["oracle-check", "--seed", "42", "--draws", "200", "--out-dir", sub],
        );
        assert!(out.status.success());
        std::fs::read(dir.path().join(sub).join("giant_eit_oracle_check.json")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(report["max_dev_t"].as_f64().unwrap() < 1e-9);
    assert!(report["max_dev_e3"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    let bad = write(p, "bad.toml", "[atom]\nomega_21 = \n");
    let out = giant_eit(p, &["spectrum", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let invalid = write(p, "invalid.toml", "[coupling_a]\nn_points = 0\n");
    let out = giant_eit(p, &["spectrum", "--config", &invalid]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_points must be >= 1"));

    let degenerate = write(
        p,
        "degenerate.toml",
        "[coupling_a]\nn_points = 2\n[probe]\ndegeneracy_eps = 10.0\n",
    );
    let out = giant_eit(p, &["spectrum", "--config", &degenerate]);
    assert_eq!(out.status.code(), Some(3));

    let stalled = write(
        p,
        "stalled.toml",
        "[coupling_a]\nn_points = 2\ntau = 0.05\n[drive]\nomega_c = 0.1\n\
         [probe]\ndelta_31 = 0.5\n[dde]\ndt = 0.0025\nsettle = 0.0\ndemod_window = 20.0\ndemod_tol = 1e-12\n",
    );
    let out = giant_eit(p, &["dde", "--config", &stalled]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!p.join("giant_eit_dde.json").exists());
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let env_dir = p.join("from_env");
    let run = |extra: &[&str]| {
        let mut args = vec!["eliminate"];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_giant-eit"))
            .args(&args)
            .env(OUT_DIR_ENV, &env_dir)
            .current_dir(p)
            .output()
            .unwrap()
    };
    assert!(run(&[]).status.success());
    assert!(env_dir.join("giant_eit_eliminate.json").exists());
    assert!(run(&["--out-dir", "from_flag"]).status.success());
    assert!(p.join("from_flag/giant_eit_eliminate.json").exists());
}

#[test]
fn fig3_writes_every_panel() {
    let dir = tempfile::tempdir().unwrap();
    let out = giant_eit(dir.path(), &["fig3", "--out-dir", "."]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("giant_eit_fig3.json"))).unwrap();
    let entries = manifest.as_array().unwrap();
    let panels: Vec<&str> = entries.iter().map(|e| e["panel"].as_str().unwrap()).collect();
    for panel in ["a", "b", "c", "d"] {
        assert!(panels.contains(&panel));
    }
    for e in entries {
        let csv = read(dir.path().join(e["file"].as_str().unwrap()));
        assert!(csv.starts_with(SPECTRUM_HEADER));
        let rows = csv.lines().count() - 1;
        assert_eq!(rows as u64, e["grid"]["count"].as_u64().unwrap());
    }
    let a = &entries[0];
    assert_eq!(a["params"]["coupling_a"]["tau"].as_f64(), Some(0.05));
    assert_eq!(a["params"]["drive"]["delta_32"].as_f64(), Some(0.0));
}

#[test]
fn run_uses_task_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "task = \"df-points\"\n[coupling_a]\nn_points = 2\ntau = 10.0\nphi = 628.3185307179587\n\
         [output]\nstem = \"long\"\n",
    );
    let out = giant_eit(dir.path(), &["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("long_df_points.json"))).unwrap();
    assert_eq!(report["points"].as_array().unwrap().len(), 6);
    assert_eq!(report["whole_axis"], false);
}

#[test]
fn window_and_resonance_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[coupling_a]\nn_points = 2\ntau = 0.05\n[drive]\nomega_c = 0.1\n\
         [probe]\ndelta_min = -0.5\ndelta_max = 0.5\npoints = 20001\n",
    );
    let out = giant_eit(dir.path(), &["window", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let w: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("giant_eit_window.json"))).unwrap();
    assert_eq!(w["regime"], "EIT");
    let ratio = w["window"]["half_width"].as_f64().unwrap() / w["window"]["predicted"].as_f64().unwrap();
    assert!((0.8..1.2).contains(&ratio));

    let out = giant_eit(dir.path(), &["resonances", "--config", &cfg]);
    assert!(out.status.success());
    let r: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("giant_eit_resonances.json"))).unwrap();
    assert_eq!(r["resonances"].as_array().unwrap().len(), 1);
}

#[test]
fn dde_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[coupling_a]\nn_points = 2\ntau = 0.5\nphi = 0.3\n[drive]\nomega_c = 0.3\n\
         [probe]\ndelta_31 = 0.4\nomega_p = 0.01\n\
         [dde]\ndt = 0.01\nsettle = 200.0\ndemod_window = 100.0\nrecord_stride = 50\n",
    );
    let out = giant_eit(dir.path(), &["dde", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path().join("giant_eit_trajectory.csv"));
    let header = csv.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 19);
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("giant_eit_dde.json"))).unwrap();
    let re = report["rho31"][0].as_f64().unwrap();
    let im = report["rho31"][1].as_f64().unwrap();
    let are = report["analytic"][0].as_f64().unwrap();
    let aim = report["analytic"][1].as_f64().unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    let rel = ((re - two_pi * are).powi(2) + (im - two_pi * aim).powi(2)).sqrt()
        / (two_pi * (are * are + aim * aim).sqrt());
    assert!(rel < 1e-2, "relative deviation {rel}");
}
