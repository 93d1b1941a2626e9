use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freelimit::{Atom, Measure};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freelimit"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn freelimit")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_measure(p: &Path) -> Measure {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn freeconv_of_point_masses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let d0 = configs().join("delta0.json");
    let o = run(&["freeconv", s(&d0), s(&d0), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_measure(&out), Measure::dirac(0.0));

    let o = run(&["freeconv", s(&d0), s(&d0), "--shift", "-1.5", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_measure(&out), Measure::dirac(-1.5));
}

#[test]
fn classical_bernoulli_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let b = configs().join("bernoulli.json");
    let o = run(&["classical", s(&b), s(&b), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_measure(&out);
    let want = [(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)];
    assert_eq!(m.atoms().len(), 3);
    for (a, (x, w)) in m.atoms().iter().zip(want) {
        assert!((a.x - x).abs() < 1e-12 && (a.w - w).abs() < 1e-12, "{a:?}");
    }
}

#[test]
fn lh_semicircle_density_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sc.json");
    let d0 = configs().join("delta0.json");
    let o = run(&[
        "lh",
        "--gamma",
        "0",
        "--sigma",
        s(&d0),
        "--law",
        "free",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_measure(&out);
    let rho0 = m.density().unwrap().value_at(0.0);
    assert!((rho0 - std::f64::consts::FRAC_1_PI).abs() < 5e-3, "rho(0) = {rho0}");
}

#[test]
fn lh_classical_poisson_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = dir.path().join("sigma.json");
    let out = dir.path().join("p.json");
    let m = Measure::finite(vec![Atom { x: 1.0, w: 0.5 }], None).unwrap();
    fs::write(&sigma, serde_json::to_string(&m).unwrap()).unwrap();
    let o = run(&[
        "lh",
        "--gamma",
        "0.5",
        "--sigma",
        s(&sigma),
        "--law",
        "classical",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = read_measure(&out);
    // Poisson(1): mass e^{-1} at 0
    let a0 = p.atoms().iter().find(|a| a.x.abs() < 1e-9).unwrap();
    assert!((a0.w - (-1.0f64).exp()).abs() < 1e-6);
}

#[test]
fn transform_json() {
    let d0 = configs().join("delta0.json");
    let o = run(&[
        "transform",
        "--measure",
        s(&d0),
        "--which",
        "cauchy",
        "--points",
        "1i,2+1i",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let evals = v["evaluations"].as_array().unwrap();
    assert_eq!(evals.len(), 2);
    // G_{δ0}(i) = -i
    let g = &evals[0]["value"];
    assert!(g[0].as_f64().unwrap().abs() < 1e-15);
    assert!((g[1].as_f64().unwrap() + 1.0).abs() < 1e-15);

    let o = run(&["transform", "--measure", s(&d0), "--which", "phi", "--points", "3i"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["evaluations"][0]["value"][0].as_f64().unwrap().abs() < 1e-12);
}

fn free_dist(csv: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "free_dist").unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn limit_free_clt_decreases_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg = configs().join("free_clt.json");
    let o = run(&["limit", "--config", s(&cfg), "--out-csv", s(&a)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["--threads", "1", "limit", "--config", s(&cfg), "--out-csv", s(&b)]);
    assert_eq!(code(&o), 0);

    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with(
        "n,free_dist,classical_dist,sigma_dist,gamma_err,max_a,max_tail,max_v,lemma31_viol1,lemma31_viol2,lemma32_gap\n"
    ));
    let d = free_dist(&text);
    assert_eq!(d.len(), 4);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn check_suites_pass() {
    let cfg = configs().join("free_clt.json");
    for suite in ["lemma31", "prop23", "phi-additivity"] {
        let o = run(&["check", "--suite", suite, "--config", s(&cfg)]);
        assert_eq!(code(&o), 0, "{suite}: {}", String::from_utf8_lossy(&o.stdout));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["passed"], serde_json::Value::Bool(true));
    }
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&run(&["freeconv", s(&missing), "--out", s(&out)])), 2);
    assert_eq!(
        code(&run(&["lh", "--gamma", "0", "--law", "free", "--out", s(&out)])),
        2
    );

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"atoms":[{"x":0.0,"w":-1.0}]}"#).unwrap();
    assert_eq!(code(&run(&["freeconv", s(&bad), "--out", s(&out)])), 2);

    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"array":{"kind":"iid_scaled_bernoulli"},"limit":{"gamma":0,"sigma":{}},"bogus":1}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["limit", "--config", s(&cfg)])), 2);

    let d0 = configs().join("delta0.json");
    assert_eq!(
        code(&run(&[
            "transform",
            "--measure",
            s(&d0),
            "--which",
            "f",
            "--points",
            "-1i"
        ])),
        2
    );
}

#[test]
fn exit_code_for_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let wide = dir.path().join("wide.json");
    fs::write(&wide, r#"{"density":{"lo":-50,"hi":50,"values":[1,1]}}"#).unwrap();
    // far below the invertibility region of a wide uniform law
    let o = run(&[
        "transform",
        "--measure",
        s(&wide),
        "--which",
        "phi",
        "--points",
        "0.01i",
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invert_f"));
}
