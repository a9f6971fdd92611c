use std::process::{Command, Output};

fn specdens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specdens"))
        .args(args)
        .env_remove("SPECDENS_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn moments_table_contains_the_exact_hermite_row() {
    let o = specdens(&["moments", "--weight", "hermite", "--N", "100", "--kmax", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("N,k,finite,limit,abs_error\n"));
    assert!(text.lines().any(|l| l == "100,2,0.25,0.25,0.0"), "{text}");
}

#[test]
fn density_limit_column_at_origin_is_two_over_pi() {
    let o = specdens(&["density", "--weight", "hermite", "--N", "200", "--grid", "512"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,sigma,sigma_limit"));
    let row = lines.find(|l| l.starts_with("0.0,")).expect("grid contains 0");
    let limit: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((limit - 0.6366198).abs() < 5e-8);
    assert!((limit - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    // every emitted density is non-negative
    for l in text.lines().skip(1) {
        for v in l.split(',').skip(1) {
            assert!(v.parse::<f64>().unwrap() >= 0.0, "{l}");
        }
    }
}

#[test]
fn validate_passes_for_laguerre() {
    let o = specdens(&["validate", "--weight", "laguerre", "--alpha", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "hankel: PASS (n<=6)"), "{text}");
    assert!(text.lines().all(|l| l.contains(": PASS") || l.contains(": SKIP")));
}

#[test]
fn outputs_are_deterministic_and_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = specdens(&[
            "density", "--weight", "laguerre", "--alpha", "0.5", "--N", "80", "--grid", "300", "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // only the two outputs remain: no temporary files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);

    let threaded = Command::new(env!("CARGO_BIN_EXE_specdens"))
        .args(["density", "--weight", "laguerre", "--alpha", "0.5", "--N", "80", "--grid", "300"])
        .env("SPECDENS_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(threaded.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    std::fs::write(
        &cfg,
        r#"{"command": "converge", "weight": {"family": "jacobi", "alpha": 0.0, "beta": 0.0},
            "N_list": [10, 20], "k_max": 4, "format": "json"}"#,
    )
    .unwrap();
    let o = specdens(&["--config", cfg.to_str().unwrap(), "--kmax", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["N"], 10);
    assert_eq!(rows[5]["k"], 2);
}

#[test]
fn perturb_reports_theta() {
    let o = specdens(&["perturb", "--weight", "hermite", "--p", "0,1", "--N-list", "10,20,40", "--kmax", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("N,k,M_hat,M,theta,M_limit,gap_hat,gap\n"));
    let thetas: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("2"))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    for (t, expected) in thetas.iter().zip([0.05, 0.025, 0.0125]) {
        assert!((t - expected).abs() < 1e-12, "{thetas:?}");
    }
}

#[test]
fn ode_check_passes_on_the_semicircle() {
    let o = specdens(&["ode-check", "--weight", "hermite", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn exit_codes() {
    // usage and configuration errors
    assert_eq!(specdens(&["moments", "--weight", "hermite"]).status.code(), Some(1));
    assert_eq!(specdens(&["moments", "--weight", "hermite", "--N", "5", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(specdens(&["--config", "/nonexistent/job.json"]).status.code(), Some(1));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_specdens"))
        .args(["moments", "--weight", "hermite", "--N", "5"])
        .env("SPECDENS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
    // a failed invariant check
    let strict = specdens(&["ode-check", "--weight", "hermite", "--tol", "1e-20"]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(!strict.stderr.is_empty());
    // numerical failure: the discretization cannot resolve this heavy tail
    let heavy = specdens(&["moments", "--weight", "genhermite", "--alpha", "0.3", "--N", "150", "--kmax", "2"]);
    assert_eq!(heavy.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&heavy.stderr).contains("did not converge"));
}
