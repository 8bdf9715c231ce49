//! End-to-end checks of the command-line interface: file formats,
//! determinism, and exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainbath"))
}

const SMALL_MODEL: &str = "model.n_ions = 40\nmodel.mass_ratio = 0.5\nmodel.kappa = 1.0\nmodel.gamma = 0.1\ntemperature = 1e-5\n";

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(&path, format!("{SMALL_MODEL}{extra}")).unwrap();
    path
}

#[test]
fn single_run_is_deterministic_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "squeeze1.r = -0.02634\nsqueeze2.r = -0.02634\ntime_grid.t_max = 40\ntime_grid.n_samples = 64\n",
    );
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["single", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(out)
            .arg("--workers")
            .arg("2")
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out1.join("series.csv")).unwrap();
    let b = std::fs::read(out2.join("series.csv")).unwrap();
    assert_eq!(a, b, "reruns must be byte-identical");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,dx_plus_var,dp_plus_var,script_e,e_n"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 64);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        let e_n: f64 = fields[4].parse().unwrap();
        assert!(e_n >= 0.0);
    }
    // sidecar present and echoes the resolved model
    let sidecar = std::fs::read_to_string(out1.join("resolved_config.txt")).unwrap();
    assert!(sidecar.contains("model.n_ions = 40"));
    assert!(sidecar.contains("time_grid.n_samples = 64"));
}

#[test]
fn config_errors_use_exit_code_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();

    // missing required key
    let partial = dir.path().join("partial.conf");
    std::fs::write(&partial, "model.n_ions = 10\n").unwrap();
    let out = bin()
        .args(["single", "--config"])
        .arg(&partial)
        .arg("--output")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.mass_ratio"));

    // zero-length time grid
    let bad = write_config(dir.path(), "time_grid.t_max = 0\n");
    let out = bin()
        .args(["single", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_max"));

    // unreadable config path
    let out = bin()
        .args(["single", "--config", "/nonexistent/run.conf"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // contour without scan grids
    let plain = write_config(dir.path(), "");
    let out = bin()
        .args(["contour", "--config"])
        .arg(&plain)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scan.r_values"));
}

#[test]
fn contour_fast_and_exact_paths_agree_on_phases() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "scan.r_values = 0.0001,0.005\nscan.temperature_values = 1e-5,0.01\n",
    );
    let fast_dir = dir.path().join("fast");
    let exact_dir = dir.path().join("exact");
    let status = bin()
        .args(["contour", "--fast-steady", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&fast_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .args(["contour", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&exact_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let parse_phases = |path: &Path| -> Vec<String> {
        let text = std::fs::read_to_string(path.join("contour.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("r,temperature,e_min,e_max,e_n_envelope_mid,phase")
        );
        lines
            .map(|l| l.rsplit(',').next().unwrap().to_string())
            .collect()
    };
    let fast = parse_phases(&fast_dir);
    let exact = parse_phases(&exact_dir);
    assert_eq!(fast.len(), 4);
    assert_eq!(fast, exact, "fast and exact plateau paths disagree");
    for phase in &fast {
        assert!(matches!(phase.as_str(), "SD" | "SDR" | "NSD"), "{phase}");
    }
}

#[test]
fn spectral_and_boundary_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "scan.gamma_values = 0.1,0.8\nscan.kappa_values = 0.1,1.0\nspectral.n_omega = 200\nspectral.n_t = 100\n",
    );
    let out = dir.path().join("spec");
    let status = bin()
        .args(["spectral", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "dispersion.csv",
        "spectral_density.csv",
        "kernel.csv",
        "isolated.csv",
        "resolved_config.txt",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let dispersion = std::fs::read_to_string(out.join("dispersion.csv")).unwrap();
    assert_eq!(dispersion.lines().count(), 41); // header + one row per mode
    let first = dispersion.lines().nth(1).unwrap();
    let fields: Vec<f64> = first
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert_eq!(fields[0] as usize, 1);
    assert!((fields[1] - fields[2]).abs() < 1e-3); // gamma=0.1 barely shifts

    let bout = dir.path().join("bnd");
    let status = bin()
        .args(["boundary", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(&bout)
        .status()
        .unwrap();
    assert!(status.success());
    let boundary = std::fs::read_to_string(bout.join("boundary.csv")).unwrap();
    let rows: Vec<&str> = boundary.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    // gamma=0.8, kappa=0.1 lies in the isolated region; gamma=0.1, kappa=1 does not
    let value = |g: &str, k: &str| -> f64 {
        rows.iter()
            .find(|r| r.starts_with(&format!("{g},{k}")) || {
                let f: Vec<&str> = r.split(',').collect();
                f[0].parse::<f64>().unwrap() == g.parse::<f64>().unwrap()
                    && f[1].parse::<f64>().unwrap() == k.parse::<f64>().unwrap()
            })
            .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
            .unwrap()
    };
    assert_eq!(value("0.1", "1.0"), 0.0);
    assert!(value("0.8", "0.1") > 0.0);
}
