use std::io::Write;
use std::process::{Command, Output, Stdio};

use cqlf_core::numerics::companion_matrix;
use cqlf_core::selftest::{random_fattened_case, rng_for};
use cqlf_core::{verify_witness, Matrix, ToleranceConfig, Vector};
use serde_json::{json, Value};
use tempfile::NamedTempFile;

const YES: &str = r#"{"A": [[0, 1], [-1, -2]], "B": [[0, 1], [-2, -3]]}"#;
const NO: &str = r#"{"A": [[0, 1], [-1, -2]], "B": [[0, 1], [-9, -2]]}"#;

fn cqlf(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_cqlf"))
        .args(args)
        .env_remove("CQLF_TOL")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn file(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector(v: &Value) -> Vector {
    Vector::from_vec(
        v.as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect(),
    )
}

#[test]
fn decide_then_verify_round_trips() {
    let input = file(YES);
    let out = cqlf(&["decide", input.path().to_str().unwrap()], None);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["verdict"], "cqlf");
    let margins = r["certificate"]["margins"].as_array().unwrap();
    assert!(margins[1].as_f64().unwrap() < 0.0 && margins[2].as_f64().unwrap() < 0.0);

    let text = String::from_utf8(out.stdout).unwrap();
    let back = cqlf(&["verify", "-"], Some(&text));
    assert_eq!(code(&back), 0);
    assert_eq!(report(&back)["verified"], true);
}

#[test]
fn no_cqlf_gives_verified_witness() {
    let out = cqlf(&["decide", "-"], Some(NO));
    assert_eq!(code(&out), 3);
    let r = report(&out);
    assert_eq!(r["verdict"], "no-cqlf");
    assert!(r["certificate"]["residual"].as_f64().unwrap() <= 1e-10);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(code(&cqlf(&["verify", "-"], Some(&text))), 0);
}

#[test]
fn reports_are_byte_identical() {
    let a = cqlf(&["decide", "-"], Some(YES));
    let b = cqlf(&["decide", "-"], Some(YES));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn no_certificate_reports_verdict_only() {
    let out = cqlf(&["decide", "-", "--no-certificate"], Some(NO));
    assert_eq!(code(&out), 3);
    assert!(report(&out)["certificate"].is_null());
}

#[test]
fn corrupted_certificate_is_rejected() {
    let out = cqlf(&["decide", "-"], Some(YES));
    let mut r = report(&out);
    // A single off-diagonal entry breaks symmetry.
    let p = r["certificate"]["P"][0][1].as_f64().unwrap();
    r["certificate"]["P"][0][1] = json!(p * 1.1);
    assert_ne!(code(&cqlf(&["verify", "-"], Some(&r.to_string()))), 0);

    let mut r = report(&cqlf(&["decide", "-"], Some(NO)));
    r["certificate"]["v"][0] = json!(r["certificate"]["v"][0].as_f64().unwrap() * 1.1);
    assert_eq!(code(&cqlf(&["verify", "-"], Some(&r.to_string()))), 4);
}

#[test]
fn zero_witness_is_an_input_error() {
    let doc = json!({
        "A": [[0, 1], [-1, -2]],
        "B": [[0, 1], [-9, -2]],
        "certificate": {"v": [0, 0], "w": [0, 0]}
    });
    assert_eq!(code(&cqlf(&["verify", "-"], Some(&doc.to_string()))), 2);
    let missing = json!({"A": [[0, 1], [-1, -2]], "B": [[0, 1], [-9, -2]]});
    assert_eq!(code(&cqlf(&["verify", "-"], Some(&missing.to_string()))), 2);
}

#[test]
fn malformed_inputs_exit_two() {
    for doc in [
        "not json",
        r#"{"A": [[0, 1, 2], [-1, -2, 0]], "B": [[0, 1], [-2, -3]]}"#,
        r#"{"A": [[0, 1], [-1, -2]], "B": [[-1, 0, 0], [0, -1, 0], [0, 0, -1]]}"#,
        r#"{"A": [[0, 1], [1, -2]], "B": [[0, 1], [-2, -3]]}"#,
        r#"{"A": [[0, 1], [-1, -2]]}"#,
    ] {
        let out = cqlf(&["decide", "-"], Some(doc));
        assert_eq!(code(&out), 2, "{doc}");
        assert_eq!(report(&out)["verdict"], "error");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn tolerance_flag_beats_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_cqlf"))
        .args(["selftest", "--cases", "0", "--tol", "1e-8"])
        .env("CQLF_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(
        report(&out)["tolerances"]["residual_tol"].as_f64(),
        Some(1e-8)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_cqlf"))
        .args(["selftest", "--cases", "0"])
        .env("CQLF_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(
        report(&out)["tolerances"]["residual_tol"].as_f64(),
        Some(1e-6)
    );
}

#[test]
fn moment_examples() {
    let out = cqlf(&["moment", "-"], Some(r#"{"z": [5, 14, 50, 194, 770]}"#));
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let nodes = vector(&r["nodes"]);
    let weights = vector(&r["weights"]);
    assert_eq!(nodes.len(), 2);
    assert!((nodes[0] - 1.0).abs() < 1e-8 && (nodes[1] - 4.0).abs() < 1e-8);
    assert!((weights[0] - 2.0).abs() < 1e-8 && (weights[1] - 3.0).abs() < 1e-8);

    let r = report(&cqlf(&["moment", "-"], Some(r#"{"z": [1, 0, 0]}"#)));
    assert_eq!(vector(&r["nodes"]).as_slice(), &[0.0]);
    assert!((vector(&r["weights"])[0] - 1.0).abs() < 1e-12);

    let out = cqlf(&["moment", "-"], Some(r#"{"z": [0, 1, 0]}"#));
    assert_eq!(code(&out), 2);
    assert!(report(&out)["min_eigenvalue"].as_f64().unwrap() < 0.0);
}

fn extraction_doc(a: &Matrix, b: &Matrix, x: &Matrix, y: &Matrix) -> String {
    json!({"A": rows(a), "B": rows(b), "X": rows(x), "Y": rows(y)}).to_string()
}

#[test]
fn extraction_in_companion_and_other_coordinates() {
    let cfg = ToleranceConfig::default();
    let mut rng = rng_for(5, 50);
    let case = loop {
        if let Some(c) = random_fattened_case(&mut rng, 4, &cfg).unwrap() {
            break c;
        }
    };
    let a = companion_matrix(&case.h);
    let b = companion_matrix(&case.k);
    let out = cqlf(
        &["extract", "-"],
        Some(&extraction_doc(&a, &b, &case.x, &case.y)),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(verify_witness(&a, &b, &vector(&r["v"]), &vector(&r["w"]), &cfg).unwrap() <= 1e-9);
    assert!(r["trace"]["selected_node"].is_number());

    let t = Matrix::from_fn(4, 4, |i, j| {
        if i == j {
            1.0
        } else {
            0.1 * (i as f64 - j as f64)
        }
    });
    let t_inv = t.clone().lu().try_inverse().unwrap();
    let (at, bt) = (&t * &a * &t_inv, &t * &b * &t_inv);
    let (xt, yt) = (&t * &case.x * t.transpose(), &t * &case.y * t.transpose());
    let out = cqlf(&["extract", "-"], Some(&extraction_doc(&at, &bt, &xt, &yt)));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let (v, w) = (vector(&r["v"]), vector(&r["w"]));
    assert!(verify_witness(&at, &bt, &v, &w, &cfg).unwrap() <= 1e-9);
}

#[test]
fn extraction_rejects_zero_solution() {
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
    let b = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -9.0, -2.0]);
    let z = Matrix::zeros(2, 2);
    let out = cqlf(&["extract", "-"], Some(&extraction_doc(&a, &b, &z, &z)));
    assert_eq!(code(&out), 2);
    assert_eq!(report(&out)["verdict"], "error");
}

#[test]
fn selftest_is_deterministic() {
    let a = cqlf(&["selftest", "--cases", "30", "--seed", "7"], None);
    let b = cqlf(&["selftest", "--cases", "30", "--seed", "7"], None);
    assert_eq!(a.stdout, b.stdout);
    let r = report(&a);
    assert_eq!(r["suites"].as_array().unwrap().len(), 6);

    let zero = cqlf(&["selftest", "--cases", "0"], None);
    assert_eq!(code(&zero), 0);
    assert!(String::from_utf8_lossy(&zero.stderr).contains("zero cases"));
}

#[test]
fn text_format_is_readable() {
    let out = cqlf(&["decide", "-", "--format", "text"], Some(YES));
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("verdict: cqlf\n"));
}
