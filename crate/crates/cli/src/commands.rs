use std::fs;
use std::io::Write;

use fracopt::{desired_state, AdmmProblem, SolveResult, SolveStatus};
use rayon::prelude::*;

use crate::bench::{peak_rss_kib, time_kernels, BENCH_COLUMNS};
use crate::checks::{run_checks, Fault};
use crate::config::RunConfig;
use crate::diagnose::diagnose;
use crate::dump::write_solution;
use crate::error::{exit, CliError, CliResult};
use crate::report::{iteration_fields, print_summary, write_csv, SummaryRow, ITERATION_COLUMNS, SUMMARY_COLUMNS};

fn solve_point(cfg: &RunConfig) -> CliResult<SolveResult> {
    let spec = cfg.problem_spec();
    let prob = AdmmProblem::new(&spec, &cfg.admm_config())?;
    Ok(prob.solve()?)
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<i32> {
    let res = solve_point(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    let row = SummaryRow::from_result(cfg, &res);
    write_csv(&cfg.out.join("solve.csv"), &SUMMARY_COLUMNS, [row.fields()])?;
    if cfg.log {
        write_csv(&cfg.out.join("iterations.csv"), &ITERATION_COLUMNS, res.history.iter().map(iteration_fields))?;
    }
    if cfg.dump {
        let ybar = desired_state(&cfg.problem_spec().grid());
        write_solution(&cfg.out, cfg.n, &res, &ybar)?;
    }
    print_summary(cfg.format, &[row])?;
    Ok(match res.status {
        SolveStatus::Converged => exit::OK,
        SolveStatus::IterationLimit => exit::ITERATION_CAP,
    })
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<i32> {
    let points = cfg.sweep_points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cfg.workers)))?;
    // collect keeps listed order whatever order the points finish in
    let outcomes: Vec<CliResult<SolveResult>> = pool.install(|| points.par_iter().map(solve_point).collect());

    let mut rows = Vec::with_capacity(points.len());
    let mut failures = 0;
    for (i, (point, outcome)) in points.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(res) => rows.push(SummaryRow::from_result(point, &res)),
            Err(e) => {
                failures += 1;
                eprintln!("sweep point {i} (n={}, delta={}, alpha={}): {e}", point.n, point.delta, point.alpha);
                rows.push(SummaryRow::failed(point));
            }
        }
    }
    fs::create_dir_all(&cfg.out)?;
    write_csv(&cfg.out.join("sweep.csv"), &SUMMARY_COLUMNS, rows.iter().map(SummaryRow::fields))?;
    print_summary(cfg.format, &rows)?;
    Ok(if failures == rows.len() { exit::ERROR } else { exit::OK })
}

pub fn cmd_validate(cfg: &RunConfig, fault: Fault) -> CliResult<i32> {
    let rows = run_checks(cfg.cap, cfg.seed, fault)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{:<20} {:>12} {:>12}  result", "check", "max_error", "threshold")?;
    for r in &rows {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        writeln!(out, "{:<20} {:>12.3e} {:>12.1e}  {verdict}", r.name, r.max_error, r.threshold)?;
    }
    let failed = rows.iter().filter(|r| !r.passed()).count();
    writeln!(out, "{} checks, {failed} failed, grid sizes 1..={}", rows.len(), cfg.cap)?;
    Ok(if failed == 0 { exit::OK } else { exit::VALIDATION })
}

pub fn cmd_diagnose(cfg: &RunConfig) -> CliResult<i32> {
    fs::create_dir_all(&cfg.out)?;
    let d = diagnose(cfg, &cfg.out)?;
    if d.clustering.is_none() {
        eprintln!("notice: clustering report skipped for n = {}", cfg.n);
    }
    for line in d.summary() {
        println!("{line}");
    }
    Ok(exit::OK)
}

pub fn cmd_bench(cfg: &RunConfig, sizes: &[usize]) -> CliResult<i32> {
    if sizes.is_empty() {
        return Err(CliError::Usage("bench needs at least one size".into()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let t = time_kernels(cfg, n, cfg.reps)?;
        let rss = peak_rss_kib().map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
        rows.push(vec![
            n.to_string(),
            (n * n * n).to_string(),
            t.apply_b_seconds.to_string(),
            t.precond_solve_seconds.to_string(),
            t.admm_step_seconds.to_string(),
            rss,
        ]);
    }
    fs::create_dir_all(&cfg.out)?;
    write_csv(&cfg.out.join("bench.csv"), &BENCH_COLUMNS, rows.clone())?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(BENCH_COLUMNS)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(exit::OK)
}
