//! End-to-end tests of the `mdls` binary: exit codes, CSV schemas,
//! determinism, and the documented example runs.

use std::process::Command;

fn mdls(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mdls")).args(args).output().expect("binary runs")
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("UTF-8 output")
}

/// The rows of one section of the stdout report ("# stages", ...).
fn section<'a>(text: &'a str, name: &str) -> Vec<&'a str> {
    let mut rows = Vec::new();
    let mut inside = false;
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("# ") {
            inside = h == name;
            continue;
        }
        if inside && !line.is_empty() {
            rows.push(line);
        }
    }
    rows
}

#[test]
fn bs_example_residual_within_qd_level() {
    // documented example: mode=bs, qd, N=8, n=16, seed=7
    let out = mdls(&[
        "--mode", "bs", "--precision", "qd", "--tiles", "8", "--tile-size", "16", "--rows",
        "128", "--seed", "7",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let summary = section(&text, "summary");
    assert_eq!(summary[0], "qr_kernel_ms,qr_wall_ms,bs_kernel_ms,bs_wall_ms,qr_flops,bs_flops,total_flops,residual");
    let residual: f64 = summary[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!(residual <= 1e-58, "bs residual {residual:e}");
    assert!(text.contains("residual"), "human residual line present");
}

#[test]
fn qr_example_emits_nine_stage_rows() {
    // documented example: mode=qr, dd, 256x256, 2x128
    let out = mdls(&[
        "--mode", "qr", "--precision", "dd", "--rows", "256", "--tiles", "2", "--tile-size",
        "128",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let stages = section(&text, "stages");
    assert_eq!(stages[0], "stage,precision,time_ms,md_add,md_mul,md_div,flops,gigaflops,intensity");
    let labels: Vec<&str> =
        stages[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(
        labels,
        ["beta_v", "betaRTv", "update_R", "compute_W", "YWT", "QWYT", "YWTC", "Q_plus_QWY",
         "R_plus_YWTC"]
    );
}

#[test]
fn same_config_is_deterministic_modulo_timings() {
    let args = [
        "--mode", "solve", "--precision", "dd", "--rows", "48", "--tiles", "2", "--tile-size",
        "16", "--seed", "3",
    ];
    let strip_timings = |text: &str| -> Vec<String> {
        // drop time/rate columns from stage rows, keep counts and flops
        let mut kept = Vec::new();
        for row in section(text, "stages").iter().skip(1) {
            let c: Vec<&str> = row.split(',').collect();
            kept.push(format!("{},{},{},{},{},{}", c[0], c[1], c[3], c[4], c[5], c[6]));
        }
        for row in section(text, "summary").iter().skip(1) {
            let c: Vec<&str> = row.split(',').collect();
            kept.push(format!("{},{},{},{}", c[4], c[5], c[6], c[7]));
        }
        kept
    };
    let a = mdls(&args);
    let b = mdls(&args);
    assert!(a.status.success() && b.status.success());
    assert_eq!(strip_timings(&stdout(&a)), strip_timings(&stdout(&b)));
}

#[test]
fn backends_agree_through_the_cli() {
    let run = |backend: &str| {
        let out = mdls(&[
            "--mode", "solve", "--precision", "qd", "--rows", "32", "--tiles", "2",
            "--tile-size", "16", "--seed", "11", "--backend", backend, "--workers", "3",
        ]);
        assert!(out.status.success());
        let text = stdout(&out);
        section(&text, "summary")[1].rsplit(',').next().unwrap().to_string()
    };
    assert_eq!(run("serial"), run("parallel"));
}

#[test]
fn out_prefix_writes_three_csv_files() {
    let dir = std::env::temp_dir().join("mdls_cli_out_test");
    std::fs::create_dir_all(&dir).unwrap();
    let prefix = dir.join("run").to_str().unwrap().to_string();
    let out = mdls(&[
        "--mode", "bs", "--precision", "dd", "--tiles", "2", "--tile-size", "8", "--rows",
        "16", "--out", &prefix,
    ]);
    assert!(out.status.success());
    for suffix in ["stages", "trace", "summary"] {
        let path = format!("{prefix}.{suffix}.csv");
        let text = std::fs::read_to_string(&path).expect("file written");
        assert!(text.lines().count() >= 2, "{path} has header and rows");
    }
    let trace = std::fs::read_to_string(format!("{prefix}.trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "stage,blocks,threads,time_ms,flops");
    // launch-count law visible in the trace: 1 + 2*3/2 = 4 rows
    assert_eq!(trace.lines().count() - 1, 4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_dims_emits_one_summary_row_per_dim() {
    let out = mdls(&[
        "--mode", "solve", "--precision", "dd", "--tiles", "2", "--sweep-dims", "8,16",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(section(&text, "summary").len(), 3); // header + 2 rows
}

#[test]
fn usage_errors_exit_2() {
    // unknown flag (clap)
    let out = mdls(&["--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(2));
    // config validation: rows below tiles x tile-size
    let out = mdls(&["--rows", "10", "--tiles", "4", "--tile-size", "64"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rows"));
    // sweep dimension not divisible by tiles
    let out = mdls(&["--tiles", "3", "--sweep-dims", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn double_precision_is_labeled_reference_only() {
    let out = mdls(&[
        "--mode", "bs", "--precision", "d", "--tiles", "2", "--tile-size", "4", "--rows", "8",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("reference only"));
}
