use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lyapdisp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyapdisp")).args(args).output().expect("binary runs")
}

fn json_of(args: &[&str], dir: &Path) -> (Output, Value) {
    let path = dir.join("out.json");
    let mut all = args.to_vec();
    let p = path.to_str().unwrap();
    all.extend(["--json", p]);
    let out = lyapdisp(&all);
    let v = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    (out, v)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn binomial_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let (out, v) = json_of(&["exponents", "--family", "g1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let ln2 = std::f64::consts::LN_2;
    assert!((v["lambda"]["accel"].as_f64().unwrap() - ln2 / 2.0).abs() < 1e-10);
    assert!((v["sigma2"]["accel"].as_f64().unwrap() - ln2 * ln2 / 4.0).abs() < 1e-10);
    assert_eq!(v["schema_version"], 1);
    assert!(stdout(&out).contains("lambda   0.346573590279972"));
}

#[test]
fn lt_of_binomial_at_two() {
    let dir = tempfile::tempdir().unwrap();
    let (out, v) = json_of(&["lt", "--family", "binomial", "--t", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let l = v["L_samples"][0]["value"].as_f64().unwrap();
    assert!((l - 2.5f64.ln()).abs() < 1e-10, "{l}");
}

#[test]
fn verify_quadrinomial_has_theorem_row() {
    let out = lyapdisp(&["verify", "--family", "g3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = text.lines().find(|l| l.contains("sigma2/ln2 vs ln(2)/4")).expect("row present");
    assert!(row.ends_with("PASS"), "{row}");
}

#[test]
fn shallow_verify_fails_with_code_three() {
    let out = lyapdisp(&["verify", "--family", "g2", "--max-len", "8"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["frobnicate"][..],
        &["exponents"],
        &["exponents", "--family", "g9"],
        &["replica", "--family", "g2", "--t", "0"],
        &["lt", "--family", "g1", "--t", "1", "--tol", "0"],
        &["digits", "--a", "2", "--b", "2"],
        &["lt", "--family", "g1", "--t", "1", "--max-len", "4"],
    ] {
        let out = lyapdisp(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn computation_errors_exit_one() {
    let out = lyapdisp(&["exponents", "--family", "@/nonexistent/family.json"]);
    assert_eq!(out.status.code(), Some(1));
    // 8^5 exceeds the Kronecker cap
    let out = lyapdisp(&["replica", "--family", "h4", "--t", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn family_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g2.json");
    let out = lyapdisp(&["catalog", "--family", "g2", "--json", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let arg = format!("@{}", path.display());
    let (out, v) = json_of(&["exponents", "--family", &arg, "--max-len", "20"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!((v["lambda"]["accel"].as_f64().unwrap() - 0.429_947_433_342_452_7).abs() < 1e-6);
}

#[test]
fn simulation_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let p = dir.path().join(name);
        let out = lyapdisp(&[
            "simulate", "--family", "g2", "--k", "32", "--trials", "500", "--seed", "7", "--threads", threads, "--json",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(p).unwrap()
    };
    let a = run("1", "a.json");
    let b = run("3", "b.json");
    assert_eq!(a, b);
    assert_eq!(a, run("1", "c.json"));
}

#[test]
fn csv_emitters_have_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    let hist = dir.path().join("h.csv");
    let c = csv.to_str().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["exponents", "--family", "g1", "--max-len", "12"], "len,words,Slambda,Skappa,Smu"),
        (&["phi", "--jmin", "4", "--jmax", "8", "--samples", "64", "--hist", hist.to_str().unwrap()], "n,x,value"),
        (&["dispersion", "--family", "g1", "--jmax", "12"], "j,var,var_ln,var_ratio,var_ln_diff"),
        (&["simulate", "--family", "g1", "--k", "8", "--trials", "10"], "trial,log_norm_half,log_norm"),
    ];
    for (args, header) in cases {
        let mut all = args.to_vec();
        all.extend(["--csv", c]);
        assert_eq!(lyapdisp(&all).status.code(), Some(0), "{args:?}");
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{args:?}");
    }
    let text = std::fs::read_to_string(&hist).unwrap();
    assert_eq!(text.lines().next(), Some("bin_lo,bin_hi,mass"));
}

#[test]
fn regroup_check_passes() {
    let out = lyapdisp(&["regroup-check"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).matches("PASS").count(), 5);
}

#[test]
fn fit_and_digits_run() {
    let out = lyapdisp(&["fit", "--family", "g1", "--n-check", "64"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("u = [1]"));
    let dir = tempfile::tempdir().unwrap();
    let (out, v) = json_of(&["digits", "--a", "1", "--b", "0", "--jmax", "10", "--samples", "1024"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["ks_distance"].as_f64(), Some(0.0));
}

#[test]
fn catalog_lists_eight_families() {
    let out = lyapdisp(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 8);
}
