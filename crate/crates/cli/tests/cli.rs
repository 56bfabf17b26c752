//! End-to-end runs of the `fracopt` binary: exit codes, CSV schemas,
//! determinism and config precedence.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracopt_cli::diagnose::{EIG_COLUMNS, SYMBOL_COLUMNS};
use fracopt_cli::dump::{decode, Field};
use fracopt_cli::report::SUMMARY_COLUMNS;
use tempfile::tempdir;

fn fracopt(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracopt"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FRACOPT_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const BOX_N8: &[&str] = &[
    "solve", "--n", "8", "--delta", "2", "--ylo", "-4", "--yhi", "4", "--ulo", "-350", "--uhi", "350",
];

#[test]
fn solve_writes_stable_summary_row() {
    let dir = tempdir().unwrap();
    let o = fracopt(BOX_N8, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("solve.csv"));
    assert_eq!(header, SUMMARY_COLUMNS);
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row[0], "8");
    assert_eq!(row[1], "512");
    assert_eq!(row[13], "converged");
    let e: f64 = row[8].parse().unwrap();
    assert!((e - 0.387).abs() <= 0.1 * 0.387, "E_l2 {e}");
    // stdout carries the same row
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains(&row[8]));
}

#[test]
fn identical_runs_differ_only_in_wall_time() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(fracopt(BOX_N8, d.path()).status.code(), Some(0));
    }
    let (_, ra) = read_csv(&a.path().join("solve.csv"));
    let (_, rb) = read_csv(&b.path().join("solve.csv"));
    let wall = SUMMARY_COLUMNS.iter().position(|c| *c == "wall_seconds").unwrap();
    for (i, (x, y)) in ra[0].iter().zip(&rb[0]).enumerate() {
        if i != wall {
            assert_eq!(x, y, "column {}", SUMMARY_COLUMNS[i]);
        }
    }
}

#[test]
fn invalid_order_exits_one_with_range_message() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["solve", "--beta1", "2.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("outside (1, 2)"), "{}", stderr(&o));
}

#[test]
fn iteration_cap_exits_two() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["solve", "--n", "4", "--max-outer", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("solve.csv"));
    assert_eq!(rows[0][13], "iteration_limit");
    assert_eq!(rows[0][11], "3");
}

#[test]
fn unbounded_solve_converges() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["solve", "--n", "8", "--ylo", "-inf", "--yhi", "inf"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# baseline with a smaller grid\nn = 4\nalpha = 0.3 # trailing comment\ndelta = 10\n").unwrap();
    let o = fracopt(&["solve", "--config", cfg.to_str().unwrap(), "--alpha", "0.9"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("solve.csv"));
    assert_eq!(rows[0][0], "4");
    assert_eq!(rows[0][2], "0.9");
    assert_eq!(rows[0][6], "10");
}

#[test]
fn unknown_config_key_lists_valid_keys() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "delat = 2\n").unwrap();
    let o = fracopt(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("delat") && msg.contains("delta_sweep") && msg.contains("uhi"), "{msg}");
}

#[test]
fn type_mismatch_names_the_key() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["solve", "--set", "max_outer=many"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`max_outer`"), "{}", stderr(&o));
}

#[test]
fn sweep_keeps_listed_order_with_workers() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["sweep", "--n", "4", "--deltas", "10,0.4,2", "--workers", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, SUMMARY_COLUMNS);
    let deltas: Vec<&str> = rows.iter().map(|r| r[6].as_str()).collect();
    assert_eq!(deltas, ["10", "0.4", "2"]);
}

#[test]
fn sweep_grid_sizes_with_box_constraints() {
    let dir = tempdir().unwrap();
    let o = fracopt(
        &["sweep", "--ns", "8,16", "--delta", "2", "--ylo", "-4", "--yhi", "4", "--ulo", "-350", "--uhi", "350"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("sweep.csv"));
    let e: Vec<f64> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    assert!(e[0] < e[1], "{e:?}");
    assert!((e[1] - 0.502).abs() <= 0.1 * 0.502, "{e:?}");
}

#[test]
fn sweep_failing_point_is_recorded() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["sweep", "--n", "4", "--betas", "1.3,2.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows[0][13], "converged");
    assert_eq!(rows[1][13], "error");
    assert_eq!(rows[1][3], "2.5");
}

#[test]
fn sweep_with_all_points_failing_exits_one() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["sweep", "--n", "4", "--alphas", "1.5,2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn empty_sweep_is_usage_error() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["sweep", "--deltas", ""], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
    let o = fracopt(&["sweep"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_exit_codes() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["validate"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8(o.stdout).unwrap();
    for name in ["apply_B", "apply_S", "precond_solve", "admm_5_iterations", "tchan_optimality"] {
        assert!(table.contains(name), "{table}");
    }

    let o = fracopt(&["validate", "--cap", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));

    let o = fracopt(&["validate", "--cap", "2", "--inject-fault", "1e-3"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let table = String::from_utf8(o.stdout).unwrap();
    let line = table.lines().find(|l| l.starts_with("apply_B ")).unwrap();
    assert!(line.ends_with("FAIL"), "{line}");

    let o = fracopt(&["validate", "--cap", "7"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn diagnose_writes_symbol_and_spectra() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["diagnose", "--n", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, sym) = read_csv(&dir.path().join("symbol.csv"));
    assert_eq!(h, SYMBOL_COLUMNS);
    assert_eq!(sym.len(), 4913);
    let (h, eigs) = read_csv(&dir.path().join("clustering.csv"));
    assert_eq!(h, EIG_COLUMNS);
    assert_eq!(eigs.len(), 64);
    assert!(eigs.iter().all(|r| r[1].parse::<f64>().unwrap() > 0.0));
    let (_, circ) = read_csv(&dir.path().join("circulant_eigs.csv"));
    assert_eq!(circ.len(), 64);

    let stdout = String::from_utf8(o.stdout).unwrap();
    let wiener = stdout.lines().find(|l| l.starts_with("wiener:")).unwrap();
    assert!(wiener.ends_with("(holds)"), "{wiener}");
}

#[test]
fn diagnose_above_dense_cap_skips_clustering() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["diagnose", "--n", "8", "--set", "symbol_points=5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("skipped"));
    assert!(!dir.path().join("clustering.csv").exists());
    let (_, sym) = read_csv(&dir.path().join("symbol.csv"));
    assert_eq!(sym.len(), 125);
}

#[test]
fn dump_round_trips_and_iterate_log_matches() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["solve", "--n", "4", "--dump", "--log"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (n, field, y) = decode(&fs::read(dir.path().join("y.bin")).unwrap()).unwrap();
    assert_eq!((n, field, y.len()), (4, Field::State, 64));
    assert!(y.iter().all(|v| v.is_finite()));
    let manifest = fs::read_to_string(dir.path().join("solution.manifest")).unwrap();
    assert!(manifest.contains("u.bin, u, 2"));

    let (_, summary) = read_csv(&dir.path().join("solve.csv"));
    let (_, log) = read_csv(&dir.path().join("iterations.csv"));
    assert_eq!(log.len().to_string(), summary[0][11]);
    assert!(log.iter().all(|r| r[7] == "true"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_fracopt"))
        .args(["solve", "--n", "3"])
        .env("FRACOPT_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(target.join("solve.csv").exists());
}

#[test]
fn bench_reports_timings_and_memory() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["bench", "--sizes", "4,8", "--reps", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("bench.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "512");
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempdir().unwrap();
    let o = fracopt(&["solve", "--gamm", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
