use daesemi::generators::{make_weierstrass, DEFAULT_SEED};
use daesemi::io::PencilFile;
use daesemi::{CVec, Complex64, Signal};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn daesemi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daesemi"))
        .current_dir(dir)
        .env_remove("DAESEMI_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = daesemi(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    daesemi(dir, args).status.code().unwrap()
}

fn weierstrass(dir: &TempDir, extra: &[&str]) -> PathBuf {
    let mut args = vec!["example", "weierstrass", "--ns", "1", "--nn", "1", "--k", "1", "-o", "p.json"];
    args.extend_from_slice(extra);
    ok(dir.path(), &args);
    dir.path().join("p.json")
}

/// Rows of a trajectory CSV as (t, [re, im, re, im, …]).
fn rows(csv: &str) -> Vec<(f64, Vec<f64>)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1..].to_vec())
        })
        .collect()
}

#[test]
fn analyze_reports_constructed_index() {
    let dir = TempDir::new().unwrap();
    weierstrass(&dir, &[]);
    let r: Value = serde_json::from_str(&ok(dir.path(), &["analyze", "p.json"])).unwrap();
    assert_eq!(r["index"]["p_res"], 1);
    assert_eq!(r["chain_index"], 1);
    assert_eq!(r["decomposition"]["disjointness"]["disjoint_ran_e"], true);
    let with_mu: Value = serde_json::from_str(&ok(dir.path(), &["analyze", "p.json", "--mu", "2.5,0"])).unwrap();
    assert_eq!(with_mu["decomposition"]["mu"][0], 2.5);
}

#[test]
fn lemma29_suite_passes() {
    let dir = TempDir::new().unwrap();
    weierstrass(&dir, &[]);
    let r: Value = serde_json::from_str(&ok(dir.path(), &["verify", "p.json", "--suite", "lemma29"])).unwrap();
    let entries = r["properties"]["lemma29"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 8);
    assert!(entries.iter().all(|e| e["pass"] == true), "{entries:?}");
    for suite in ["thm43", "laplace"] {
        assert_eq!(code(dir.path(), &["verify", "p.json", "--suite", suite]), 0, "{suite}");
    }
}

#[test]
fn solve_diag_pencil_decays() {
    let dir = TempDir::new().unwrap();
    weierstrass(&dir, &["--identity", "--eig=-1"]);
    let csv = ok(dir.path(), &["solve", "p.json", "--x0", "1,0", "--t0", "0", "--t1", "5", "--steps", "100", "--json", "traj.json"]);
    assert!(csv.starts_with("t,x_0_re,x_0_im,x_1_re,x_1_im\n"));
    let rows = rows(&csv);
    assert_eq!(rows.len(), 101);
    for (t, x) in &rows {
        assert!((x[0] - (-t).exp()).abs() <= 1e-12, "t = {t}");
        assert!(x[1].abs() + x[2].abs() + x[3].abs() <= 1e-14);
    }
    let traj: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("traj.json")).unwrap()).unwrap();
    assert_eq!(traj["classification"], "classical");
    assert!(traj["residuals"]["classical"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn solve_transformed_pencil_matches_oracle() {
    let dir = TempDir::new().unwrap();
    weierstrass(&dir, &[]);
    let (_, oracle) = make_weierstrass(1, 1, 1, DEFAULT_SEED).unwrap();
    let x0 = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let want = oracle.solution(&x0, &Signal::zero(2)).unwrap();
    for method in ["decomp", "contour", "auto"] {
        let csv = ok(dir.path(), &["solve", "p.json", "--x0", "1,0", "--t1", "5", "--steps", "20", "--method", method]);
        for (t, x) in rows(&csv).iter().skip(1) {
            let w = want.eval(*t);
            for i in 0..2 {
                let got = Complex64::new(x[2 * i], x[2 * i + 1]);
                assert!((got - w[i]).norm() <= 1e-7 * (1.0 + w.norm()), "{method} t = {t}");
            }
        }
    }
}

#[test]
fn solve_with_signal_file() {
    let dir = TempDir::new().unwrap();
    weierstrass(&dir, &["--identity", "--eig=-1"]);
    std::fs::write(dir.path().join("f.json"), r#"{"terms":[{"coeff":[[0,0],[1,0]],"power":0,"rate":[1,0]}]}"#).unwrap();
    let csv = ok(dir.path(), &["solve", "p.json", "--x0", "1,-1", "--signal", "f.json", "--t1", "2", "--steps", "10"]);
    for (t, x) in rows(&csv) {
        assert!((x[2] + t.exp()).abs() <= 1e-10 * t.exp(), "t = {t}");
        assert!((x[0] - (-t).exp()).abs() <= 1e-12);
    }
    assert_eq!(code(dir.path(), &["solve", "p.json", "--x0", "1,-1", "--signal", "f.json", "--t1", "2", "--method", "contour"]), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    weierstrass(&dir, &[]);
    assert_eq!(code(dir.path(), &["solve", "p.json", "--x0", "1,2,3", "--t1", "1"]), 2);
    assert_eq!(code(dir.path(), &["solve", "p.json", "--x0", "1,0", "--t0", "2", "--t1", "1"]), 2);
    assert_eq!(code(dir.path(), &["analyze", "missing.json"]), 2);
    assert_eq!(code(dir.path(), &["verify", "p.json", "--suite", "nope"]), 2);
    assert_eq!(code(dir.path(), &["frobnicate"]), 2);
    std::fs::write(dir.path().join("bad.json"), r#"{"n_x":2,"n_z":2,"E":[[1,0]],"A":[]}"#).unwrap();
    assert_eq!(code(dir.path(), &["analyze", "bad.json"]), 2);
    // E = A = 0 has no regular point
    let zero = r#"{"n_x":1,"n_z":1,"E":[[0,0]],"A":[[0,0]]}"#;
    std::fs::write(dir.path().join("zero.json"), zero).unwrap();
    assert_eq!(code(dir.path(), &["analyze", "zero.json"]), 3);
}

#[test]
fn seeds_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let run = |seed: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_daesemi"))
            .current_dir(dir.path())
            .env("DAESEMI_SEED", seed)
            .args(["example", "hamiltonian", "--n", "6", "--rank", "3", "-o", out])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let a = run("11", "a.json");
    assert_eq!(a, run("11", "b.json"));
    assert_ne!(a, run("12", "c.json"));
    ok(dir.path(), &["example", "hamiltonian", "--n", "6", "--rank", "3", "--seed", "11", "-o", "d.json"]);
    assert_eq!(a, std::fs::read(dir.path().join("d.json")).unwrap());
}

#[test]
fn written_files_round_trip() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["example", "transport", "--n", "4", "--m", "3", "-o", "t.json"]);
    let text = std::fs::read_to_string(dir.path().join("t.json")).unwrap();
    let f = PencilFile::from_json(&text).unwrap();
    assert_eq!((f.n_x, f.n_z), (7, 9));
    assert_eq!(f.to_json(), text);
}
