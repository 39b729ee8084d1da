use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bfstar_cli::config::{RunConfig, SweepParameter, SweepSpec};
use bfstar_cli::output::PROFILE_FILE;
use bfstar_cli::{run_single, run_sweep};

fn bfstar(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfstar"))
        .args(args)
        .env("BFSTAR_OUT", out)
        .output()
        .expect("binary runs")
}

fn small(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.numerics.n = 512;
    cfg.output.directory = dir.to_path_buf();
    cfg
}

#[test]
fn solve_writes_artifacts_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bfstar(&["solve", "--n", "512", "--emit-plots"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("R_s = 1.160"), "{stdout}");

    let profile = fs::read_to_string(tmp.path().join(PROFILE_FILE)).unwrap();
    let header: Vec<&str> = profile.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(header.iter().any(|l| l.starts_with("# sigma_c = 0.8")));
    assert!(header.iter().any(|l| l.starts_with("# omega_scaled = ")));
    let mut body = profile.lines().skip(header.len());
    assert_eq!(body.next(), Some("x\tnu\tphi\tsigma\tmu\texp_lambda"));
    let rows: Vec<Vec<f64>> = body.map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 513);
    assert!(rows.iter().all(|r| r.len() == 6));
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[0][4], 1.0);
    assert_eq!(rows[0][5], 1.0);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["converged"], true);
    assert_eq!(report["config"]["numerics"]["n"], 512);
    assert!(tmp.path().join("profile.gp").exists());
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(bfstar(&["solve", "--n", "256"], d.path()).status.code(), Some(0));
    }
    for name in [PROFILE_FILE, "report.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        if name == "report.json" {
            // only the output directory differs
            let strip = |v: &[u8]| {
                let mut j: serde_json::Value = serde_json::from_slice(v).unwrap();
                j["config"]["output"]["directory"] = serde_json::Value::Null;
                j
            };
            assert_eq!(strip(&x), strip(&y));
        } else {
            assert_eq!(x, y, "{name} differs between identical runs");
        }
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bfstar(&["solve", "--sigma-c", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma_c = 0"));

    assert_eq!(bfstar(&["solve", "--n", "256", "--max-iter", "1"], tmp.path()).status.code(), Some(2));
    assert_eq!(bfstar(&["solve", "--frobnicate"], tmp.path()).status.code(), Some(3));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = bfstar(&["solve", "--n", "256", "--out", blocker.join("sub").to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn malformed_config_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[physics]\nsigma_c = 0.8\n\n[numerics]\nn = \"many\"\n").unwrap();
    let out = bfstar(&["solve", "-c", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 5"), "{msg}");
    assert!(msg.contains("bad.toml"), "{msg}");
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, "[physics]\nsigma_c = 0.5\n[numerics]\nn = 128\nx_inf = 32.0\n").unwrap();
    let out = bfstar(&["solve", "-c", path.to_str().unwrap(), "--sigma-c", "0.8", "--n", "256"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["physics"]["sigma_c"], 0.8);
    assert_eq!(report["config"]["numerics"]["n"], 256);
    assert_eq!(report["config"]["numerics"]["x_inf"], 32.0);
}

#[test]
fn single_point_sweep_matches_single_solve() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small(a.path());
    let single = run_single(&cfg).unwrap();

    let mut swept = small(b.path());
    swept.sweep = Some(SweepSpec::new(SweepParameter::SigmaC, 0.8, 0.8, 0.1));
    swept.output.sweep_profiles = true;
    let out = run_sweep(&swept).unwrap();
    assert_eq!(out.rows.len(), 1);
    assert_eq!(out.rows[0].r_s, single.record.r_s);
    assert_eq!(out.rows[0].omega, single.record.omega);
    assert_eq!(out.rows[0].iterations, single.record.iterations);

    let p1 = fs::read(a.path().join(PROFILE_FILE)).unwrap();
    let p2 = fs::read(b.path().join("point_000").join(PROFILE_FILE)).unwrap();
    assert_eq!(p1, p2);
}

#[test]
fn sweep_summary_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bfstar(
        &[
            "sweep", "--sigma-c", "0.3", "--mu-c", "0.5", "--lambda", "10", "--gamma", "10", "--n", "512",
            "--sweep", "sigma_c:0.3:0.4:0.05", "--emit-plots",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("sweep.tsv")).unwrap();
    let mut lines = table.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        lines.next(),
        Some("sigma_c\tconverged\tr_s\tomega\tnu_0\tnu_1\tphi_0\tomega_scaled\titerations")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    let r_s: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(r_s.windows(2).all(|w| w[1] < w[0]), "{r_s:?}");
    assert!(rows.iter().all(|r| r[1] == "true"));
    assert!(tmp.path().join("sweep.gp").exists());
    assert!(tmp.path().join("sweep.json").exists());
}

#[test]
fn parallel_cold_sweep_agrees_with_continuation() {
    let a = tempfile::tempdir().unwrap();
    let mut cfg = small(a.path());
    // cold starts at intermediate values may settle on another branch
    cfg.sweep = Some(SweepSpec::new(SweepParameter::Lambda, 0.01, 0.03, 0.02));
    let warm = run_sweep(&cfg).unwrap();
    cfg.sweep.as_mut().unwrap().parallel = true;
    let cold = run_sweep(&cfg).unwrap();
    assert!(warm.all_converged() && cold.all_converged());
    for (w, c) in warm.rows.iter().zip(&cold.rows) {
        assert_eq!(w.value, c.value);
        assert!((w.r_s - c.r_s).abs() < 1e-8, "{} vs {}", w.r_s, c.r_s);
        assert!((w.omega - c.omega).abs() < 1e-8);
    }
}

#[test]
fn sweep_direction_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let mut cfg = small(a.path());
    cfg.sweep = Some(SweepSpec::new(SweepParameter::Lambda, 0.01, 0.03, 0.01));
    let up = run_sweep(&cfg).unwrap();
    cfg.physics.lambda = 0.03;
    cfg.sweep = Some(SweepSpec::new(SweepParameter::Lambda, 0.03, 0.01, 0.01));
    let down = run_sweep(&cfg).unwrap();
    assert!(up.all_converged() && down.all_converged());
    assert_eq!(up.rows.len(), 3);
    for (u, d) in up.rows.iter().zip(down.rows.iter().rev()) {
        assert!((u.value - d.value).abs() < 1e-12);
        assert!((u.r_s - d.r_s).abs() < 1e-8, "{} vs {}", u.r_s, d.r_s);
        assert!((u.omega - d.omega).abs() < 1e-8);
    }
}

#[test]
fn verify_subcommand_passes_on_graded_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bfstar(&["verify", "--n", "1024", "--grading", "surface", "--x-inf", "32"], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("jacobian audit"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["farfield"]["x_inf"], serde_json::json!([8.0, 16.0, 32.0, 64.0]));
    assert_eq!(report["jacobian"]["pass"], true);
    assert!(report["first_integral"].as_f64().unwrap() <= 1e-12);
}
