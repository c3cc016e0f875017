use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn sce(sub: &str, config: &str, extra: &[&str]) -> (i32, TempDir, String) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sce"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(extra)
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    (out.status.code().unwrap_or(-1), dir, stderr)
}

/// Data rows of a CSV as `column -> value` lookups.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head = lines.next().unwrap().split(',').map(str::to_string).collect();
    (head, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn column(path: &Path, name: &str) -> Vec<Option<f64>> {
    let (head, rows) = table(path);
    let k = head.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k].parse().ok()).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn mw_verify_examples_and_random() {
    let (code, dir, err) = sce("mw-verify", "[mw_verify]\ncount = 3\n", &[]);
    assert_eq!(code, 0, "{err}");
    let path = dir.path().join("out/mw_verify.csv");
    let (_, rows) = table(&path);
    assert_eq!(rows[0][0], "minus_identity");
    assert_eq!(rows[1][0], "j");
    for e in column(&path, "rel_err") {
        assert!(e.unwrap() < 1e-2);
    }
    assert_eq!(rows.len(), 5);
}

#[test]
fn mw_verify_rejects_eigenvalue_one() {
    let (code, _, err) = sce("mw-verify", "[mw_verify]\ncount = 0\nmatrices = [[1.0, 1.0, 0.0, 1.0]]\n", &[]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn malformed_configs_exit_2() {
    assert_eq!(sce("mw-verify", "[mw_verify\n", &[]).0, 2);
    assert_eq!(sce("mw-verify", "[mw_verify]\ncuont = 3\n", &[]).0, 2);
    assert_eq!(sce("floquet", "seed = 1\n", &[]).0, 2);
    let missing_v = "[hamiltonian]\nkind = \"harmonic\"\n[times]\nend = 1.0\npoints = 5\n[fidelity]\nenergy = 1.0\nhbars = [0.1]\nx_min = -4.0\nx_max = 4.0\n";
    assert_eq!(sce("fidelity-lr", missing_v, &[]).0, 2);
    let decreasing = "[hamiltonian]\nkind = \"free\"\n[state]\nalpha = [0.0, 1.0]\nhbar = 0.1\n[times]\nvalues = [0.0, 2.0, 1.0]\n[revival]\n";
    assert_eq!(sce("revival-scan", decreasing, &[]).0, 2);
}

#[test]
fn header_embeds_resolved_config() {
    let (code, dir, _) = sce("mw-verify", "seed = 4\n[mw_verify]\ncount = 1\n", &[]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("out/mw_verify.csv")).unwrap();
    assert!(text.starts_with("# sce "));
    assert!(text.contains("# seed: 4"));
    assert!(text.contains("#   min_det = 0.1"));
}

fn revival_config(kind: &str, alpha: &str, end: f64, points: usize) -> String {
    format!(
        "[hamiltonian]\n{kind}\n[state]\nalpha = {alpha}\nhbar = 0.05\n[times]\nend = {end}\npoints = {points}\n[revival]\n"
    )
}

#[test]
fn revival_harmonic_flags_full_period() {
    let cfg = revival_config("kind = \"harmonic\"", "[1.0, 0.0]", 3.0 * PI, 301);
    let (code, dir, err) = sce("revival-scan", &cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let times = json(&dir.path().join("out/revival_scan.json"))["revival_times"].clone();
    let times: Vec<f64> = serde_json::from_value(times).unwrap();
    assert_eq!(times.len(), 1);
    assert!((times[0] - 2.0 * PI).abs() < 1e-6);
}

#[test]
fn revival_dilation_flags_period() {
    let cfg = revival_config("kind = \"dilation\"\ng = { sin = [0.8], omega = 1.0 }", "[0.7, -0.4]", 2.5 * PI, 251);
    let (code, dir, err) = sce("revival-scan", &cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let times: Vec<f64> =
        serde_json::from_value(json(&dir.path().join("out/revival_scan.json"))["revival_times"].clone()).unwrap();
    assert_eq!(times.len(), 1);
    assert!((times[0] - 2.0 * PI).abs() < 1e-6);
}

#[test]
fn revival_free_particle_flags_none() {
    let cfg = revival_config("kind = \"free\"", "[0.0, 1.0]", 10.0, 101);
    let (code, dir, _) = sce("revival-scan", &cfg, &[]);
    assert_eq!(code, 0);
    let j = json(&dir.path().join("out/revival_scan.json"));
    assert!(j["revival_times"].as_array().unwrap().is_empty());
}

#[test]
fn revival_oracle_matches_and_resolution_is_checked() {
    let mut cfg = revival_config("kind = \"harmonic\"", "[1.0, 0.5]", 2.0 * PI, 41);
    cfg.push_str("[revival.oracle]\nx_min = -8.0\nx_max = 8.0\npoints = 1024\ndt = 1e-3\n");
    let (code, dir, err) = sce("revival-scan", &cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let path = dir.path().join("out/revival_scan.csv");
    for (a, b) in column(&path, "R_semiclassical").iter().zip(column(&path, "R_oracle")) {
        assert!((a.unwrap() - b.unwrap()).abs() < 1e-6);
    }
    let coarse = cfg.replace("points = 1024", "points = 256").replace("x_min = -8.0\nx_max = 8.0", "x_min = -40.0\nx_max = 40.0");
    assert_eq!(sce("revival-scan", &coarse, &[]).0, 4);
}

#[test]
fn floquet_constant_coefficient_resonance() {
    // lambda = 0: |tr M| = |2 cos(2 pi sqrt(mu)/omega)| touches 2 at mu = (k omega/2)^2
    let cfg = "[floquet]\nomega = 2.0\nlambda = { start = 0.0 }\nmu = { start = 0.25, end = 0.81, points = 8 }\n";
    let (code, dir, err) = sce("floquet", cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let path = dir.path().join("out/floquet.csv");
    let mus = column(&path, "mu");
    let rho = column(&path, "rho");
    let trace = column(&path, "trace");
    for k in 0..mus.len() {
        let mu = mus[k].unwrap();
        assert!((rho[k].unwrap() - 2.0 * mu.sqrt() / 2.0).abs() < 1e-6);
        assert!((trace[k].unwrap() - 2.0 * (PI * mu.sqrt()).cos()).abs() < 1e-8);
    }
}

#[test]
fn floquet_flags_unstable_and_traces_boundary() {
    let cfg = "[floquet]\nomega = 2.0\nlambda = { start = 0.8 }\nmu = { start = 1.0 }\n[floquet.boundary]\nlambda = { start = 0.4 }\nmu_lo = -0.5\nmu_hi = 0.5\n";
    let (code, dir, err) = sce("floquet", cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let (head, rows) = table(&dir.path().join("out/floquet.csv"));
    let k = head.iter().position(|h| h == "stable").unwrap();
    assert_eq!(rows[0][k], "false");
    let b = column(&dir.path().join("out/floquet_boundary.csv"), "mu_boundary");
    // Mathieu a0(q) = -q^2/2 + 7 q^4/128 with q = lambda/2
    assert!((b[0].unwrap() - (-0.02 + 7.0 * 0.0016 / 128.0)).abs() < 1e-5);
}

#[test]
fn fidelity_zero_coupling_gives_ones() {
    let cfg = "seed = 2\n[hamiltonian]\nkind = \"harmonic\"\n[times]\nend = 3.0\npoints = 31\n[fidelity]\nenergy = 1.0\nhbars = [0.1]\nperturbation = [0.0, 1.0]\nlambda = 0.0\nsamples = 64\nx_min = -5.0\nx_max = 5.0\n";
    let (code, dir, err) = sce("fidelity-lr", cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let path = dir.path().join("out/fidelity_lr.csv");
    for name in ["F_quantum_avg", "F_classical"] {
        assert!(column(&path, name).iter().all(|v| *v == Some(1.0)));
    }
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("# note: quantum side averages every eigenstate"));
}

#[test]
fn fidelity_mandelstam_tamm_table() {
    let cfg = "[hamiltonian]\nkind = \"harmonic\"\n[times]\nend = 2.0\npoints = 21\n[fidelity]\nenergy = 1.0\nhbars = [0.1]\nperturbation = [0.0, 1.0]\nsamples = 64\nx_min = -5.0\nx_max = 5.0\n[fidelity.mandelstam_tamm]\nalpha = [1.0, 0.5]\nhbar = 0.5\ngrid = { x_min = -10.0, x_max = 10.0, points = 1024 }\n";
    let (code, dir, err) = sce("fidelity-lr", cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let path = dir.path().join("out/mandelstam_tamm.csv");
    let (head, rows) = table(&path);
    let valid = head.iter().position(|h| h == "valid").unwrap();
    let ov = column(&path, "overlap_sq");
    let bound = column(&path, "bound");
    for (k, r) in rows.iter().enumerate() {
        if r[valid] == "true" {
            assert!(ov[k].unwrap() >= bound[k].unwrap() - 1e-8);
        }
    }
}

#[test]
fn singular_constant_frequency() {
    let cfg = "[hamiltonian]\nkind = \"singular\"\ng = 1.0\nf = { mean = 1.0 }\n[times]\nend = 12.566370614359172\npoints = 5\n[singular]\nn = 0\n";
    let (code, dir, err) = sce("singular", cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let path = dir.path().join("out/singular.csv");
    for v in column(&path, "norm") {
        assert!((v.unwrap() - 1.0).abs() < 1e-8);
    }
    for v in column(&path, "eq_residual") {
        assert!(v.unwrap().abs() < 1e-6);
    }
    let ov = column(&path, "overlap_formula");
    assert!((ov[2].unwrap() - 1.0).abs() < 1e-6 && (ov[4].unwrap() - 1.0).abs() < 1e-6);
    let bad = cfg.replace("kind = \"singular\"\ng = 1.0\nf = { mean = 1.0 }", "kind = \"harmonic\"");
    assert_eq!(sce("singular", &bad, &[]).0, 2);
}

#[test]
fn seed_flag_overrides_scenario() {
    let (_, a, _) = sce("mw-verify", "seed = 1\n[mw_verify]\ncount = 2\ninclude_examples = false\n", &["--seed", "9"]);
    let (_, b, _) = sce("mw-verify", "seed = 9\n[mw_verify]\ncount = 2\ninclude_examples = false\n", &[]);
    let strip = |d: &TempDir| {
        fs::read_to_string(d.path().join("out/mw_verify.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}
