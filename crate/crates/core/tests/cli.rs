use std::fs;
use std::path::Path;
use std::process::Command;

use ompb::bounds::{required_snr, BoundRule};
use ompb::cli::{run_command, CommandResult};
use ompb::infotheory::{feasibility_rho_max, necessary_snr};
use tempfile::TempDir;

fn run(args: &[&str]) -> CommandResult {
    let mut argv = vec!["ompb"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn identity4(dir: &Path) -> String {
    write(dir, "identity4.csv", "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n")
}

fn assert_failure(r: &CommandResult, code: i32) {
    assert_eq!(r.exit_code, code, "{r:?}");
    assert!(r.stdout.is_empty());
    assert_eq!(r.stderr.lines().count(), 1, "{:?}", r.stderr);
}

#[test]
fn bounds_corollary3_example() {
    let r = run(&[
        "bounds",
        "--rule",
        "corollary3",
        "--delta",
        "0.5",
        "--rho0",
        "0.1",
        "--MAR",
        "1",
    ]);
    assert_eq!(r.exit_code, 0);
    assert!(r.stdout.contains("required snr: 80\n"), "{}", r.stdout);
}

#[test]
fn bounds_csv_round_trips() {
    let r = run(&[
        "bounds",
        "--rule",
        "theorem1",
        "--theta1",
        "0.3",
        "--delta",
        "0.2",
        "--rho0",
        "0.25",
        "--mar-ratio",
        "1.5",
        "--csv",
    ]);
    assert_eq!(r.exit_code, 0, "{r:?}");
    let row: Vec<&str> = r.stdout.lines().nth(1).unwrap().split(',').collect();
    let num = |i: usize| row[i].parse::<f64>().unwrap();
    let rule = BoundRule::Theorem1 {
        theta1: 0.3,
        theta2: f64::INFINITY,
        tau: 1.0,
    };
    let req = required_snr(rule, num(1), num(2), num(3)).unwrap();
    assert_eq!(req.snr, num(4));
    assert_eq!(req.error_bound, num(5));
    assert_eq!(num(3), 1.0 / 2.25);
}

#[test]
fn ric_identity_example() {
    let dir = TempDir::new().unwrap();
    let m = identity4(dir.path());
    let r = run(&["ric", "--matrix", &m, "--order", "2"]);
    assert_eq!(r.exit_code, 0);
    assert_eq!(r.stdout, "2,0,true,0 1\n");
    let r = run(&[
        "ric",
        "--matrix",
        &m,
        "--order",
        "2",
        "--samples",
        "3",
        "--seed",
        "1",
        "--csv",
    ]);
    let row: Vec<&str> = r.stdout.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[2], "false");
}

#[test]
fn ric_cap_is_exit_three() {
    let dir = TempDir::new().unwrap();
    let m = identity4(dir.path());
    assert_failure(
        &run(&["ric", "--matrix", &m, "--order", "2", "--cap", "5"]),
        3,
    );
}

#[test]
fn omp_identity_example() {
    let dir = TempDir::new().unwrap();
    let m = identity4(dir.path());
    let y = write(dir.path(), "y.txt", "0\n2\n0\n-1\n");
    let trace = dir.path().join("trace.csv");
    let r = run(&[
        "omp",
        "--matrix",
        &m,
        "--measurements",
        &y,
        "--sparsity",
        "2",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(r.exit_code, 0);
    assert!(r.stdout.starts_with("support: 1 3\n"), "{}", r.stdout);
    let t = fs::read_to_string(&trace).unwrap();
    assert_eq!(
        t,
        "k,chosen_index,max_abs_correlation,residual_norm_sq\n1,1,2,1\n2,3,1,0\n"
    );

    let r = run(&[
        "omp",
        "--matrix",
        &m,
        "--measurements",
        &y,
        "--sparsity",
        "2",
        "--csv",
    ]);
    assert_eq!(r.stdout, "index,value\n1,2\n3,-1\n");
}

#[test]
fn omp_rejects_bad_sparsity() {
    let dir = TempDir::new().unwrap();
    let m = identity4(dir.path());
    let y = write(dir.path(), "y.txt", "0\n2\n0\n-1\n");
    assert_failure(
        &run(&[
            "omp",
            "--matrix",
            &m,
            "--measurements",
            &y,
            "--sparsity",
            "5",
        ]),
        2,
    );
    let bad = write(dir.path(), "bad.csv", "1,0\n0,x\n");
    assert_failure(
        &run(&[
            "omp",
            "--matrix",
            &bad,
            "--measurements",
            &y,
            "--sparsity",
            "1",
        ]),
        2,
    );
}

#[test]
fn curve_file_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.csv");
    let r = run(&[
        "curve",
        "--rule",
        "corollary2",
        "--rho0",
        "0.3",
        "--delta-min",
        "0.05",
        "--delta-max",
        "0.95",
        "--steps",
        "19",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.exit_code, 0, "{r:?}");
    let body = fs::read_to_string(&out).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("delta,required_snr"));
    let mut n = 0;
    for line in lines {
        let (d, s) = line.split_once(',').unwrap();
        let d: f64 = d.parse().unwrap();
        let s: f64 = s.parse().unwrap();
        assert_eq!(
            required_snr(BoundRule::Corollary2, d, 0.3, 1.0)
                .unwrap()
                .snr,
            s
        );
        n += 1;
    }
    assert_eq!(n, 19);
}

#[test]
fn feasibility_report() {
    let r = run(&[
        "feasibility",
        "--n",
        "100",
        "--m",
        "50",
        "--K",
        "10",
        "--rho0",
        "0.5",
        "--snr",
        "40",
    ]);
    assert_eq!(r.exit_code, 0);
    assert!(r.stdout.contains("13.8103024359"), "{}", r.stdout);
    assert!(r.stdout.contains("threshold below 4: false"));

    let r = run(&[
        "feasibility",
        "--n",
        "100",
        "--m",
        "50",
        "--K",
        "10",
        "--rho0",
        "0.5",
        "--snr",
        "40",
        "--csv",
    ]);
    let row: Vec<&str> = r.stdout.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(
        row[5].parse::<f64>().unwrap(),
        necessary_snr(100, 50, 10, 0.5).unwrap()
    );
    assert_eq!(
        row[7].parse::<f64>().unwrap(),
        feasibility_rho_max(100, 50, 10).unwrap()
    );

    assert_failure(
        &run(&[
            "feasibility",
            "--n",
            "100",
            "--m",
            "50",
            "--K",
            "60",
            "--rho0",
            "0.5",
            "--snr",
            "4",
        ]),
        2,
    );
}

#[test]
fn usage_errors() {
    assert_failure(&run(&["frobnicate"]), 1);
    assert_failure(
        &run(&["bounds", "--delta", "0.5", "--rho0", "0.1", "--bogus"]),
        1,
    );
    assert_failure(&run(&["bounds", "--delta", "0.5"]), 1);
    assert_failure(
        &run(&[
            "bounds",
            "--delta",
            "0.5",
            "--rho0",
            "0.1",
            "--MAR",
            "1",
            "--mar-ratio",
            "1",
        ]),
        1,
    );
    assert_failure(&run(&[]), 1);
}

#[test]
fn domain_errors() {
    assert_failure(&run(&["bounds", "--delta", "1.2", "--rho0", "0.1"]), 2);
    assert_failure(
        &run(&[
            "bounds",
            "--rule",
            "corollary9",
            "--delta",
            "0.2",
            "--rho0",
            "0.1",
        ]),
        2,
    );
    assert_failure(
        &run(&[
            "bounds",
            "--rule",
            "corollary1",
            "--tau",
            "0.5",
            "--delta",
            "0.2",
            "--rho0",
            "0.1",
        ]),
        2,
    );
}

#[test]
fn help_succeeds() {
    let r = run(&["--help"]);
    assert_eq!(r.exit_code, 0);
    assert!(r.stdout.contains("0-based"));
    assert_eq!(run(&["sweep", "--help"]).exit_code, 0);
}

#[test]
fn sweep_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"m": 10, "n": 16, "K": 2, "ensemble": "gaussian", "normalize_columns": true,
            "signal_profile": "equal", "snr_mode": {"fixed": {"snr": 20.0, "rule": "corollary3"}},
            "delta_source": {"provided": 0.3}, "trials": 20, "seed": 5, "tau": 1.0}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = run(&["sweep", "--config", &cfg, "--out-dir", a.to_str().unwrap()]);
    assert_eq!(ra.exit_code, 0, "{ra:?}");
    let rb = run(&["sweep", "--config", &cfg, "--out-dir", b.to_str().unwrap()]);
    let records = fs::read_to_string(a.join("records.csv")).unwrap();
    assert_eq!(records, fs::read_to_string(b.join("records.csv")).unwrap());
    assert_eq!(records.lines().count(), 21);
    assert!(records.starts_with("trial_index,matrix_seed,signal_seed,noise_seed,delta_used,snr_target,snr_realized,mar_ratio,rho_error,bound_headline,violated\n"));
    assert_eq!(
        fs::read_to_string(a.join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
    assert!(fs::read_to_string(a.join("summary.txt"))
        .unwrap()
        .contains("trials run:"));
    assert_eq!(ra.stdout.replace("/a/", "/"), rb.stdout.replace("/b/", "/"));

    let bad = write(dir.path(), "bad.json", r#"{"m": 10}"#);
    assert_failure(
        &run(&["sweep", "--config", &bad, "--out-dir", a.to_str().unwrap()]),
        2,
    );
}

#[test]
fn identical_argv_identical_output() {
    let args = [
        "bounds",
        "--delta",
        "0.3",
        "--rho0",
        "0.2",
        "--mar-ratio",
        "2",
    ];
    assert_eq!(run(&args), run(&args));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ompb");
    let out = Command::new(bin)
        .args([
            "bounds",
            "--rule",
            "corollary3",
            "--delta",
            "0.5",
            "--rho0",
            "0.1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("required snr: 80"));
    let out = Command::new(bin)
        .args(["bounds", "--delta", "2", "--rho0", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let out = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
