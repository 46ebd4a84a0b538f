//! End-to-end runs of the `squac` executable.

use std::fs;
use std::process::{Command, Output};

fn squac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_squac"))
        .args(args)
        .output()
        .expect("spawn squac")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_diagnostic(out: &Output, code: i32, kind: &str) {
    assert_eq!(out.status.code(), Some(code), "{}", stderr(out));
    let err = stderr(out);
    let line = err.lines().last().unwrap_or("");
    assert!(line.starts_with(&format!("error[{kind}]: ")), "{err}");
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let args = [
            "simulate",
            "--scenario",
            "SE1",
            "--n",
            "120",
            "--p",
            "45",
            "--reps",
            "1",
            "--seed",
            "7",
        ];
        let out = squac(
            &[
                &args[..],
                &["--out", path.to_str().unwrap(), "--format", "csv"],
            ]
            .concat(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        fs::read(path).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("method,SE1 FDR,SE1 FN\n"), "{text}");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn infer_writes_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let mut text = String::from("age,g1,g2,g3\n");
    for k in 0..120 {
        let a = (k as f64 * 0.37).sin();
        let b = (k as f64 * 1.91).cos();
        text.push_str(&format!("{},{},{},{}\n", k % 7, a, a + 0.1 * b, b));
    }
    fs::write(&data, text).unwrap();
    let out = squac(&[
        "infer",
        "--data",
        data.to_str().unwrap(),
        "--covariates",
        "age",
        "--d",
        "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "i\tj\tT\tsurrogate_p\trejected");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("g1\tg2\t"), "{stdout}");
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = squac(&["simulate", "--scenario", "SE9"]);
    assert_diagnostic(&out, 2, "usage");
    assert!(stderr(&out).contains("SE1, SE2, SE3, SE4, SE5, SE6"));

    assert_diagnostic(&squac(&["infer", "--bogus"]), 2, "usage");
    assert_diagnostic(
        &squac(&["simulate", "--scenario", "SE1", "--method", "pearson"]),
        2,
        "usage",
    );
    assert_diagnostic(
        &squac(&["infer", "--data", "x.csv", "--taus", "0.7,0.3"]),
        2,
        "usage",
    );

    let missing = dir.path().join("none.csv");
    assert_diagnostic(
        &squac(&["infer", "--data", missing.to_str().unwrap()]),
        3,
        "data",
    );

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "g1,g2\n1,2\n2,1\n3,3\n").unwrap();
    fs::write(&b, "g1,g3\n1,2\n2,1\n3,3\n").unwrap();
    let out = squac(&[
        "diff",
        "--data",
        a.to_str().unwrap(),
        "--data-b",
        b.to_str().unwrap(),
    ]);
    assert_diagnostic(&out, 3, "data");

    let help = squac(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
}
