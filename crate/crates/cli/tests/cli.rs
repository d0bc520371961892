// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::process::{Command, Output, Stdio};

fn privdecay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privdecay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_privdecay"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_is_deterministic_in_seed() {
    let args = ["run", "--W", "16", "--T", "200", "--seed", "5"];
    let a = privdecay(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, privdecay(&args).stdout);
    let other = privdecay(&["run", "--W", "16", "--T", "200", "--seed", "6"]);
    assert_ne!(a.stdout, other.stdout);
    assert_eq!(stdout(&a).lines().count(), 201);
}

#[test]
fn noiseless_exponential_is_the_closed_form() {
    let o = privdecay(&["run", "--alpha", "0.9", "--stream", "ones", "--T", "50", "--no-noise", "--with-exact"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("NOT differentially private"));
    for (k, line) in stdout(&o).lines().skip(1).enumerate() {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let closed = (1.0 - 0.9f64.powi(k as i32 + 1)) / 0.1;
        assert!((cols[1] - closed).abs() < 1e-9, "step {}: {}", k + 1, cols[1]);
        assert!(cols[3] < 1e-9);
    }
}

#[test]
fn unaligned_window_is_refused_with_a_pointer() {
    let o = privdecay(&["run", "--mech", "window", "--W", "6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("allwindow"), "{}", stderr(&o));
}

#[test]
fn bad_data_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.txt");
    std::fs::write(&path, "0\n1\n\n0.5\n1.5\n").unwrap();
    let o = privdecay(&["run", "--W", "4", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));

    let o = with_stdin(&["run", "--W", "4", "--input", "-"], "0\nabc\n");
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(privdecay(&["bench", "--W", "8", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(privdecay(&["bench", "--W", "8", "--trials", "5"]).status.code(), Some(2));
    assert_eq!(privdecay(&["run", "--W", "8", "--alpha", "0.9"]).status.code(), Some(2));
    assert_eq!(privdecay(&["run", "--alpha", "0.5"]).status.code(), Some(2));
    assert_eq!(privdecay(&["run", "--W", "8", "--histogram"]).status.code(), Some(2));
    assert_eq!(privdecay(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bound_reports_window_sensitivity_and_scale() {
    let o = privdecay(&["bound", "--W", "128", "--eps", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("lambda"), "8");
    assert_eq!(col("counter_scale"), "8");
    assert_eq!(col("branch"), "interior");

    let o = privdecay(&["bound", "--alpha", "0.9", "--format", "ndjson"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"mech\":\"exp\""), "{}", stdout(&o));
}

#[test]
fn lbverify_exit_status_follows_verdict() {
    let ok = privdecay(&["lbverify", "--W", "8", "--q", "8", "--D", "8", "--delta", "3.5"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("verdict,PASS"));
    let bad = privdecay(&["lbverify", "--W", "8", "--q", "8", "--D", "8", "--delta", "7"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("verdict,FAIL"));
    let grid = privdecay(&["lbverify", "--c", "2", "--q", "4", "--D", "32", "--delta", "0.5", "--eps", "0.5,1,2"]);
    assert_eq!(grid.status.code(), Some(0));
    let text = stdout(&grid);
    let table: Vec<&str> = text
        .lines()
        .skip_while(|l| *l != "eps,threshold_d")
        .skip(1)
        .take_while(|l| !l.starts_with("verdict"))
        .collect();
    assert_eq!(table.len(), 3);
    assert!(table[0].starts_with("0.5,") && table[2].starts_with("2,"));
}

#[test]
fn histogram_keeps_keys_apart() {
    let o = with_stdin(
        &["run", "--W", "4", "--histogram", "--input", "-", "--no-noise"],
        "a,1\nb,0\na,1\nkey,with,comma,1\n",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "t,key,estimate\n1,a,1\n2,b,0\n3,a,2\n4,\"key,with,comma\",1\n");
}

#[test]
fn ndjson_output_is_one_object_per_step() {
    let o = privdecay(&["run", "--c", "2", "--T", "20", "--format", "ndjson", "--with-exact"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 20);
    assert!(text.lines().all(|l| l.starts_with("{\"t\":") && l.contains("\"abs_error\":")));
}

#[test]
fn bench_is_thread_independent() {
    let args = ["bench", "--W", "32", "--T", "256", "--trials", "40", "--seed", "3"];
    let one = privdecay(&[&args[..], &["--threads", "1"]].concat());
    let four = privdecay(&[&args[..], &["--threads", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    let text = stdout(&one);
    assert!(text.starts_with("estimator,j,mean_error,std_error,quantile,theory_delta,lower_bound_ref\n"));
    assert!(text.lines().any(|l| l.starts_with("window,256,")));
    assert!(text.lines().any(|l| l.starts_with("strawman,256,")));
}
