//! End-to-end binary tests: determinism of output files across reruns and
//! worker counts, verb smoke coverage, and error-path exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riskcomb"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

const OUTPUT_FILES: [&str; 4] = [
    "forecasts.csv",
    "ssm_membership.csv",
    "report.json",
    "summary_table.csv",
];

/// Two identical-seed runs — one single-threaded, one with four workers —
/// must produce byte-identical output files; a standalone `evaluate` on the
/// stored forecasts must reproduce the run's own summary table.
#[test]
fn outputs_are_byte_identical_across_reruns_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    run_ok(bin().args([
        "simulate",
        "--n",
        "450",
        "--seed",
        "5",
        "--taus",
        "0.025",
        "--out",
        data_dir.to_str().unwrap(),
    ]));
    let series = data_dir.join("simulated.csv");
    assert!(series.is_file());

    let out_dir = tmp.path().join("run");
    let run_args = |workers: &str| {
        vec![
            "run".to_string(),
            "--workers".to_string(),
            workers.to_string(),
            "--set".to_string(),
            "seed=11".to_string(),
            "--set".to_string(),
            format!("data.file={}", series.display()),
            "--set".to_string(),
            "models.enabled=RM-N,RM-t,HS-100".to_string(),
            "--set".to_string(),
            "models.t_in=300".to_string(),
            "--set".to_string(),
            "models.taus=0.025".to_string(),
            "--set".to_string(),
            "mcs.training_b=200".to_string(),
            "--set".to_string(),
            "mcs.eval_b=500".to_string(),
            "--set".to_string(),
            "backtest.burn_in=30".to_string(),
            "--out".to_string(),
            out_dir.display().to_string(),
        ]
    };

    run_ok(bin().args(run_args("1")));
    let first: Vec<Vec<u8>> = OUTPUT_FILES.iter().map(|f| read(&out_dir.join(f))).collect();

    run_ok(bin().args(run_args("4")));
    for (i, name) in OUTPUT_FILES.iter().enumerate() {
        let again = read(&out_dir.join(name));
        assert!(
            first[i] == again,
            "{name} differs between --workers 1 and --workers 4 runs"
        );
    }

    // Standalone evaluation of the stored forecasts with the same seed and
    // burn-in reproduces the run's summary table byte for byte.
    let eval_dir = tmp.path().join("eval");
    run_ok(bin().args([
        "evaluate",
        "--forecasts",
        out_dir.join("forecasts.csv").to_str().unwrap(),
        "--set",
        "seed=11",
        "--set",
        &format!("data.file={}", series.display()),
        "--set",
        "mcs.eval_b=500",
        "--set",
        "backtest.burn_in=30",
        "--out",
        eval_dir.to_str().unwrap(),
    ]));
    let run_summary = read(&out_dir.join("summary_table.csv"));
    let eval_summary = read(&eval_dir.join("summary_table.csv"));
    assert!(
        run_summary == eval_summary,
        "evaluate verb summary differs from the run's own evaluation"
    );
}

#[test]
fn mcs_verb_keeps_identical_columns_with_p_one() {
    let tmp = tempfile::tempdir().unwrap();
    let losses = tmp.path().join("losses.csv");
    let mut text = String::from("date,A,B\n");
    let mut state = 88172645463325252u64;
    let mut day = chrono_date(2020, 1, 1);
    for _ in 0..60 {
        // xorshift for arbitrary but fixed loss values
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let v = (state >> 11) as f64 / (1u64 << 53) as f64;
        text.push_str(&format!("{day},{v},{v}\n"));
        day = day.succ_opt().unwrap();
    }
    std::fs::write(&losses, text).unwrap();
    let out = run_ok(bin().args([
        "mcs",
        "--input",
        losses.to_str().unwrap(),
        "--set",
        "seed=3",
        "--set",
        "mcs.eval_b=200",
        "--out",
        tmp.path().join("mcs").to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("2 of 2 models survive"), "stdout: {stdout}");
    assert!(stdout.contains("A: p=1"), "stdout: {stdout}");
    let json = read(&tmp.path().join("mcs").join("mcs.json"));
    let parsed: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(parsed["survivors"].as_array().unwrap().len(), 2);
}

fn chrono_date(y: i32, m: u32, d: u32) -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

#[test]
fn config_errors_exit_with_code_two() {
    let out = bin()
        .args(["run", "--set", "bogus.key=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown config key"), "stderr: {stderr}");
    assert!(stderr.contains("error[config]"), "stderr: {stderr}");

    let out = bin()
        .args(["run", "--set", "data.file=x.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed is required"), "stderr: {stderr}");

    let out = bin()
        .args(["run", "--set", "seed=1", "--set", "combine.lambda=1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("lambda must lie in (0,1)"), "stderr: {stderr}");

    // Missing input file surfaces as an i/o-category failure (exit 3).
    let out = bin()
        .args([
            "run",
            "--set",
            "seed=1",
            "--set",
            "data.file=/nonexistent/series.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_enumerates_every_config_key_with_default() {
    let out = run_ok(bin().arg("--help"));
    let text = String::from_utf8_lossy(&out.stdout);
    for key in [
        "seed",
        "data.file",
        "data.files",
        "data.date_column",
        "data.return_column",
        "data.price_column",
        "data.exog",
        "models.enabled",
        "models.t_in",
        "models.taus",
        "mcs.training_alpha",
        "mcs.eval_alpha",
        "mcs.training_b",
        "mcs.eval_b",
        "mcs.mean_block",
        "combine.lambda",
        "backtest.burn_in",
        "output.dir",
    ] {
        assert!(text.contains(key), "--help missing config key {key}");
    }
    for default in ["[1000]", "[0.025,0.01]", "[0.06]", "[0.25]", "[5000]", "[t_in/2]"] {
        assert!(text.contains(default), "--help missing default {default}");
    }
}
