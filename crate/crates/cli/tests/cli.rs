use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn run(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_atomsys"))
        .args(args)
        .args(["--output", "json"])
        .output()
        .expect("binary runs");
    let report = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().expect("exit code"), report)
}

fn c(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn validate_exit_codes() {
    let (code, r) = run(&["validate", &data("example_m1.json")]);
    assert_eq!((code, r["status"].as_str()), (0, Some("ok")));
    for bad in ["identity_j.json", "psd_violation.json"] {
        let (code, r) = run(&["validate", &data(bad)]);
        assert_eq!(code, 2, "{bad}");
        assert_eq!(r["results"]["passed"], false);
        assert!(!r["results"]["violations"].as_array().unwrap().is_empty());
    }
    let (code, r) = run(&["validate", &data("malformed.json")]);
    assert_eq!((code, r["status"].as_str()), (2, Some("input_error")));
    let (code, _) = run(&["validate", &data("two_atoms.json"), "--builtin", "example"]);
    assert_eq!(code, 2);
}

#[test]
fn solve_kernel_dimensions() {
    // one atom: the kernel is always n-dimensional, even where both jump matrices are singular
    for lam in ["0.3,0", "0,0", "-2,1.5"] {
        let (code, r) = run(&["solve", &data("single_atom.json"), "--lambda", lam]);
        assert_eq!(code, 0);
        assert_eq!(r["results"]["kernel_dim"], 2, "lambda {lam}");
    }
    let (code, r) = run(&["solve", &data("two_atoms.json"), "--seed", "5"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["kernel_dim"], 3);
    assert!(r["results"]["kernel_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn engineered_rhs_is_obstructed() {
    let (code, r) = run(&["solve", &data("unsolvable.json"), "--lambda", "1.8659321210971278,0"]);
    assert_eq!(code, 1);
    assert_eq!(r["status"], "obstruction");
    assert_eq!(r["error"]["kind"], "Unsolvable");
    assert!(!r["error"]["witness"].as_array().unwrap().is_empty());
    assert!(r["error"]["max_pairing"].as_f64().unwrap() > 1e-3);
}

#[test]
fn deficiency_reports() {
    let (code, r) = run(&["deficiency", &data("two_atoms.json")]);
    assert_eq!(code, 0);
    let res = &r["results"];
    assert_eq!((res["n_plus"].as_u64(), res["n_minus"].as_u64()), (Some(2), Some(2)));
    assert_eq!(res["l0_dim"], 1);
    assert_eq!(res["n_tilde"], 2);

    let (code, r) = run(&["deficiency", &data("no_atoms.json")]);
    assert_eq!(code, 0);
    for key in ["n_plus", "n_minus", "l0_dim", "n_tilde"] {
        assert_eq!(r["results"][key], 0, "{key}");
    }

    for m in 1..=3u64 {
        let (code, r) = run(&["deficiency", "--builtin", "example", "--M", &m.to_string()]);
        assert_eq!(code, 0);
        let res = &r["results"];
        assert_eq!(res["n_plus"], res["n_minus"]);
        // gaps (2k, 2k + 1) meeting the window (1/2, 4M + 1/2): k = 0, …, 2M
        assert_eq!(res["l0_dim"].as_u64(), Some(2 * m + 1));
    }
}

#[test]
fn greens_table_matches_closed_form() {
    let (code, r) = run(&["greens", "--builtin", "example", "--M", "2", "--lambda", "0,2", "--points", "3.25,3.5,5.75"]);
    assert_eq!(code, 0);
    let k = &r["results"]["kernel"];
    assert_eq!(c(&k["lambda"]), (0.0, 2.0));
    let atoms: Vec<f64> = k["atoms"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let inv = -1.0 / 2.0; // −1/λ = i/2 for λ = 2i
    for (p, &x) in [3.25f64, 3.5, 5.75].iter().enumerate() {
        let odd = x.floor();
        for (a, &y) in atoms.iter().enumerate() {
            let blk = &k["K"][p][a];
            // a unit load e₁ at the odd atom gives (−1/λ, −1/2) on (odd, odd + 1), at the even atom (−1/λ, 1/2)
            let (first, second) = if y == odd {
                ((0.0, -inv), (-0.5, 0.0))
            } else if y == odd + 1.0 {
                ((0.0, -inv), (0.5, 0.0))
            } else {
                ((0.0, 0.0), (0.0, 0.0))
            };
            let (a0, b0) = c(&blk[0][0]);
            let (a1, b1) = c(&blk[1][0]);
            assert!((a0 - first.0).abs() < 1e-9 && (b0 - first.1).abs() < 1e-9, "x {x} y {y}");
            assert!((a1 - second.0).abs() < 1e-9 && (b1 - second.1).abs() < 1e-9, "x {x} y {y}");
            assert!(c(&blk[0][1]).0.abs() < 1e-9 && c(&blk[1][1]).0.abs() < 1e-9);
        }
    }
}

#[test]
fn greens_edge_cases() {
    let (code, r) = run(&["greens", "--builtin", "example", "--lambda", "0,0", "--points", "1.5"]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "NotInResolventSet");
    let (code, r) = run(&["greens", "--builtin", "example", "--points", ""]);
    assert_eq!(code, 0);
    assert!(r["results"]["kernel"]["K"].as_array().unwrap().is_empty());
    let (code, _) = run(&["greens", "--builtin", "example", "--points", "9.0"]);
    assert_eq!(code, 2);
}

#[test]
fn greens_with_boundary_file() {
    // U = I on the two-atom system, written out explicitly
    let dir = std::env::temp_dir().join(format!("atomsys-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("boundary.json");
    std::fs::write(&path, "[[[1,0],[0,0],[1,0],[0,0]], [[0,0],[1,0],[0,0],[1,0]]]").unwrap();
    let (code, with_file) = run(&["greens", &data("two_atoms.json"), "--points", "1.5", "--boundary", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (_, default) = run(&["greens", &data("two_atoms.json"), "--points", "1.5"]);
    assert_eq!(with_file["results"], default["results"]);
    std::fs::write(&path, "[[[1,0],[0,0],[0,0],[0,0]], [[0,0],[1,0],[0,0],[0,0]]]").unwrap();
    let (code, r) = run(&["greens", &data("two_atoms.json"), "--points", "1.5", "--boundary", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "NotSelfAdjoint");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_builtin_and_edge_cases() {
    let (code, r) = run(&["verify", "--builtin", "example", "--M", "2", "--seed", "7"]);
    assert_eq!(code, 0);
    let checks = r["results"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 15);
    assert!(checks.iter().all(|c| c["passed"] == true));

    let (code, r) = run(&["verify", "--builtin", "example", "--trials", "0"]);
    assert_eq!(code, 0);
    assert!(r["results"]["checks"].as_array().unwrap().is_empty());
    assert_eq!(r["results"]["warnings"].as_array().unwrap().len(), 1);

    let (code, r) = run(&["verify", &data("psd_violation.json")]);
    assert_eq!(code, 2);
    assert_eq!(r["error"]["kind"], "Invalid");
    assert!(r["results"].is_null());
}

#[test]
fn reports_are_deterministic() {
    let args = ["verify", "--builtin", "example", "--M", "1", "--seed", "11", "--trials", "4"];
    let a = Command::new(env!("CARGO_BIN_EXE_atomsys")).args(args).args(["--output", "json"]).output().unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_atomsys")).args(args).args(["--output", "json"]).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let (_, r) = run(&["deficiency", &data("two_atoms.json"), "--tol", "1e-8"]);
    assert_eq!(r["tolerances"]["rank"], 1e-8);
    for key in ["command", "inputs", "results", "tolerances", "status"] {
        assert!(r.get(key).is_some(), "{key}");
    }
}

#[test]
fn text_output_is_default() {
    let out = Command::new(env!("CARGO_BIN_EXE_atomsys"))
        .args(["deficiency", &data("two_atoms.json")])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("command: deficiency\nstatus:  ok\n"));
    assert!(text.contains("n_plus"));
}
