mod common;

use common::*;

fn run(dir: &std::path::Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec!["diffuse", "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = xtal(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn zero_samples_give_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "out", &["--n", "0"]);
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("# config "));
    assert_eq!(lines[1], "x0,x1");
    assert_eq!(read_json(&out.join("diagnostics.json"))["diagnostics"]["n"], 0);
}

#[test]
fn em_and_ode_both_recover_the_two_modes() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["em", "ode", "churn"] {
        let out = run(dir.path(), method, &["--n", "20000", "--method", method, "--seed", "3"]);
        let d = read_json(&out.join("diagnostics.json"));
        let diag = &d["diagnostics"];
        assert_eq!(diag["n"], 20000);
        for (k, want) in [-10.0, 10.0].iter().enumerate() {
            let w = diag["component_weights"][k].as_f64().unwrap();
            assert!((w - 0.5).abs() < 0.02, "{method}: weight {w}");
            for i in 0..2 {
                let m = diag["component_means"][k][i].as_f64().unwrap();
                assert!((m - want).abs() < 0.05, "{method}: mean {m}");
            }
        }
        let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2 + 20000);
    }
}

#[test]
fn samples_are_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), "a", &["--n", "500", "--parallelism", "1"]);
    let b = run(dir.path(), "b", &["--n", "500", "--parallelism", "8"]);
    assert_eq!(snapshot(&a), snapshot(&b));
    let c = run(dir.path(), "c", &["--n", "500", "--seed", "1"]);
    assert_ne!(snapshot(&a)["samples.csv"], snapshot(&c)["samples.csv"]);
}

#[test]
fn custom_mixture_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let gmm = dir.path().join("gmm.json");
    std::fs::write(&gmm, r#"[{"weight": 1.0, "mean": [3.0, -1.0, 0.5], "std": 0.2}]"#).unwrap();
    let out = run(dir.path(), "out", &["--gmm", p(&gmm), "--n", "4000", "--steps", "400", "--sigma-max", "20"]);
    let d = read_json(&out.join("diagnostics.json"));
    assert_eq!(d["config"]["params"]["steps"], 400);
    assert_eq!(d["config"]["params"]["sigma_max"], 20.0);
    let mean: Vec<f64> = d["diagnostics"]["mean"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (m, want) in mean.iter().zip([3.0, -1.0, 0.5]) {
        assert!((m - want).abs() < 0.02, "{mean:?}");
    }
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("x0,x1,x2"));

    let toml = dir.path().join("gmm.toml");
    std::fs::write(&toml, "[[mixture]]\nweight = 1.0\nmean = [0.0]\nstd = 1.0\n").unwrap();
    run(dir.path(), "toml", &["--gmm", p(&toml), "--n", "3"]);
}

#[test]
fn invalid_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let never = dir.path().join("never");
    let gmm = dir.path().join("gmm.json");
    std::fs::write(&gmm, r#"[{"weight": 0.4, "mean": [0.0], "std": 1.0}]"#).unwrap();
    for args in [
        vec!["--sigma-min", "100"],
        vec!["--steps", "0"],
        vec!["--method", "heun"],
        vec!["--gmm", p(&gmm)],
        vec!["--rho", "-2"],
    ] {
        let mut full = vec!["diffuse", "--out", p(&never)];
        full.extend(args.iter().copied());
        assert_eq!(code(&xtal(&full)), 2, "{args:?}");
    }
    assert!(!never.exists());
}
