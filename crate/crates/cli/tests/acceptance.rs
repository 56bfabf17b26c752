//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p fracopt-cli --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::Instant;

use fracopt::oracle::DenseProblem;
use fracopt::{
    frac_coeffs, scaling, solve, wiener_check, AdmmConfig, Bounds, IterationRecord, ProblemSpec, SolveResult,
    SolveStatus,
};
use fracopt_cli::bench::{time_kernels, BENCH_COLUMNS};
use fracopt_cli::checks::{run_checks, Fault};
use fracopt_cli::config::RunConfig;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

/// Every solve made by the suite, for the feasibility invariant.
#[derive(Default)]
struct Runs {
    all: Vec<(String, SolveResult)>,
}

impl Runs {
    fn solve(&mut self, label: String, spec: &ProblemSpec, cfg: &AdmmConfig) -> Result<&SolveResult, String> {
        let res = solve(spec, cfg).map_err(|e| format!("{label}: {e}"))?;
        self.all.push((label, res));
        Ok(&self.all.last().unwrap().1)
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn box_spec(n: usize) -> ProblemSpec {
    ProblemSpec {
        alpha: 0.7,
        beta1: 1.3,
        beta2: 1.3,
        gamma: 1e-4,
        n,
        y_bounds: Bounds::symmetric(4.0),
        u_bounds: Bounds::symmetric(350.0),
    }
}

const REFERENCE_RUNS: [(usize, f64, f64, usize, f64); 3] =
    [(8, 2.0, 0.387, 86, 12.0), (16, 2.0, 0.502, 58, 13.0), (32, 0.4, 0.609, 62, 16.0)];

fn criterion_1_and_2(runs: &mut Runs) -> [Verdict; 2] {
    let mut pass1 = true;
    let mut parts = Vec::new();
    let mut pcg = Vec::new();
    for (n, delta, e_ref, admm_ref, pcg_ref) in REFERENCE_RUNS {
        let cfg = AdmmConfig { delta, rho: 1.618, tol_primal: 1e-4, ..Default::default() };
        let t = Instant::now();
        match runs.solve(format!("box n={n}"), &box_spec(n), &cfg) {
            Ok(r) => {
                let ok = r.status == SolveStatus::Converged
                    && within(r.misfit, e_ref, 0.10)
                    && within(r.admm_iterations as f64, admm_ref as f64, 0.40)
                    && within(r.pcg_avg, pcg_ref, 0.50);
                pass1 &= ok;
                pcg.push(r.pcg_avg);
                parts.push(format!(
                    "n={n}: E={:.4} (ref {e_ref}) admm={} (ref {admm_ref}) pcg={:.1} (ref {pcg_ref}) {:.1}s",
                    r.misfit,
                    r.admm_iterations,
                    r.pcg_avg,
                    t.elapsed().as_secs_f64()
                ));
            }
            Err(e) => {
                pass1 = false;
                parts.push(e);
            }
        }
    }
    let c2 = if pcg.len() == 3 {
        let hi = pcg.iter().copied().fold(f64::MIN, f64::max);
        let lo = pcg.iter().copied().fold(f64::MAX, f64::min);
        Verdict { id: 2, pass: hi / lo <= 2.0, detail: format!("pcg averages {pcg:.1?}, max/min {:.2} (limit 2)", hi / lo) }
    } else {
        Verdict { id: 2, pass: false, detail: "a criterion-1 run failed".into() }
    };
    [Verdict { id: 1, pass: pass1, detail: parts.join("; ") }, c2]
}

fn criterion_3() -> Verdict {
    let t = Instant::now();
    let rows = match run_checks(4, 0, Fault::default()) {
        Ok(rows) => rows,
        Err(e) => return Verdict { id: 3, pass: false, detail: e.to_string() },
    };
    let failed: Vec<_> = rows.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    let worst = rows.iter().filter(|r| r.name != "tchan_optimality").map(|r| r.max_error).fold(0.0, f64::max);
    let tchan = rows.iter().any(|r| r.name == "tchan_optimality");
    let bin = Command::new(env!("CARGO_BIN_EXE_fracopt")).args(["validate", "--cap", "4"]).output();
    let bin_ok = matches!(&bin, Ok(o) if o.status.code() == Some(0));
    Verdict {
        id: 3,
        pass: failed.is_empty() && tchan && worst <= 1e-10 && bin_ok,
        detail: format!(
            "{} checks up to n=4, worst dense error {worst:.2e} (limit 1e-10), failed {failed:?}, validate exit {:?}, {:.1}s",
            rows.len(),
            bin.as_ref().ok().and_then(|o| o.status.code()),
            t.elapsed().as_secs_f64()
        ),
    }
}

fn bench_rss(n: usize) -> Result<f64, String> {
    let dir = std::env::temp_dir().join(format!("fracopt-acceptance-{}-{n}", std::process::id()));
    let o = Command::new(env!("CARGO_BIN_EXE_fracopt"))
        .args(["bench", "--sizes", &n.to_string(), "--reps", "1", "--out"])
        .arg(&dir)
        .output()
        .map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&o.stdout);
    let col = BENCH_COLUMNS.iter().position(|c| *c == "peak_rss_kib").unwrap();
    let row = text.lines().nth(1).ok_or("bench printed no row")?;
    row.split(',').nth(col).and_then(|v| v.parse().ok()).ok_or_else(|| format!("no peak memory in {row:?}"))
}

fn criterion_4() -> Verdict {
    let t = Instant::now();
    let cfg = RunConfig::default();
    // interleave the two sizes so a slow spell on the machine hits both
    let (mut a32, mut s32, mut a64, mut s64) = (f64::MAX, f64::MAX, f64::MAX, f64::MAX);
    for _ in 0..4 {
        match (time_kernels(&cfg, 32, 5), time_kernels(&cfg, 64, 3)) {
            (Ok(small), Ok(big)) => {
                a32 = a32.min(small.apply_b_seconds);
                s32 = s32.min(small.precond_solve_seconds);
                a64 = a64.min(big.apply_b_seconds);
                s64 = s64.min(big.precond_solve_seconds);
            }
            (Err(e), _) | (_, Err(e)) => return Verdict { id: 4, pass: false, detail: e.to_string() },
        }
    }
    let (ra, rs) = (a64 / a32, s64 / s32);
    let mem = bench_rss(16).and_then(|m16| bench_rss(64).map(|m64| (m16, m64)));
    let (mem_ok, mem_text) = match mem {
        Ok((m16, m64)) => (m64 / m16 < 40.0, format!("peak RSS {m16} KiB -> {m64} KiB, ratio {:.1} (limit 40)", m64 / m16)),
        Err(e) => (false, format!("memory: {e}")),
    };
    Verdict {
        id: 4,
        pass: ra <= 12.0 && rs <= 12.0 && mem_ok,
        detail: format!(
            "apply_B {:.3}ms -> {:.3}ms ratio {ra:.2}; precond_solve {:.3}ms -> {:.3}ms ratio {rs:.2} (limit 12); {mem_text}; {:.1}s",
            a32 * 1e3,
            a64 * 1e3,
            s32 * 1e3,
            s64 * 1e3,
            t.elapsed().as_secs_f64()
        ),
    }
}

fn time_coefficients_ok(alpha: f64) -> bool {
    let Ok(g) = frac_coeffs(alpha, 10_001) else { return false };
    let mut partial = 0.0;
    g[0] > 0.0
        && g.iter().enumerate().all(|(k, &gk)| {
            partial += gk;
            (k == 0 || gk < 0.0) && partial > 0.0
        })
}

fn space_coefficients_ok(beta: f64) -> bool {
    let Ok(g) = frac_coeffs(beta, 10_001) else { return false };
    let decreasing = g[2..].windows(2).all(|w| w[0] > w[1]);
    let positive = g[2..].iter().all(|&v| v > 0.0);
    let mut partial = g[0];
    let partial_negative = g[1..].iter().all(|&v| {
        partial += v;
        partial < 0.0
    });
    g[0] == 1.0 && (g[1] + beta).abs() < 1e-15 && positive && decreasing && partial_negative
}

fn criterion_5() -> Verdict {
    let orders: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let bad_time: Vec<f64> = orders.iter().copied().filter(|&a| !time_coefficients_ok(a)).collect();
    let bad_space: Vec<f64> = orders.iter().map(|a| 1.0 + a).filter(|&b| !space_coefficients_ok(b)).collect();
    let mut wiener_fail = Vec::new();
    let mut worst = 0.0f64;
    for &alpha in &orders {
        for &beta in &orders {
            let (b1, b2) = (1.0 + beta, 2.0 - beta);
            let spec = ProblemSpec { alpha, beta1: b1, beta2: b2, n: 16, ..Default::default() };
            let w = spec
                .validate()
                .and_then(|_| scaling(&spec, &spec.grid()))
                .and_then(|s| wiener_check(&s, alpha, b1, b2, 10_000));
            match w {
                Ok(w) if w.holds() => worst = worst.max(w.abs_sum / w.bound),
                _ => wiener_fail.push((alpha, b1, b2)),
            }
        }
    }
    Verdict {
        id: 5,
        pass: bad_time.is_empty() && bad_space.is_empty() && wiener_fail.is_empty(),
        detail: format!(
            "10001 coefficients per order; failing alpha {bad_time:?}, failing beta {bad_space:?}; Wiener bound at K=1e4 over 81 order triples, failing {wiener_fail:?}, largest sum/bound {worst:.3}"
        ),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_6(runs: &mut Runs) -> Verdict {
    let cfg = AdmmConfig { delta: 10.0, ..Default::default() };
    let free = ProblemSpec { n: 4, ..box_spec(4) };
    let free = ProblemSpec { y_bounds: Bounds::UNBOUNDED, u_bounds: Bounds::UNBOUNDED, ..free };
    let (y0, u0, kkt) = match runs.solve("unconstrained n=4".into(), &free, &cfg) {
        Ok(r) => {
            let kkt = DenseProblem::standard(&free, &cfg).and_then(|d| d.kkt_residual(&r.state)).map(|k| k.max());
            (r.y.clone(), r.u.clone(), kkt)
        }
        Err(e) => return Verdict { id: 6, pass: false, detail: e },
    };
    let kkt = match kkt {
        Ok(k) => k,
        Err(e) => return Verdict { id: 6, pass: false, detail: e.to_string() },
    };

    // loosen the box by decades until no copy touches it
    let mut loosened = None;
    let mut c = 1.0;
    while c <= 1e6 && loosened.is_none() {
        let spec = ProblemSpec { y_bounds: Bounds::symmetric(c), u_bounds: Bounds::symmetric(c), ..free.clone() };
        let Ok(r) = runs.solve(format!("box +-{c} n=4"), &spec, &cfg) else { break };
        let inactive = r.z_y.iter().chain(&r.z_u).all(|v| v.abs() < c);
        if inactive {
            loosened = Some((c, max_abs_diff(&r.y, &y0).max(max_abs_diff(&r.u, &u0))));
        }
        c *= 10.0;
    }
    let (same, loose_text) = match loosened {
        Some((c, d)) => (d <= 1e-6, format!("bounds inactive from +-{c}, distance to unconstrained {d:.2e} (limit 1e-6)")),
        None => (false, "bounds still active at +-1e6".into()),
    };
    Verdict { id: 6, pass: kkt <= 1e-3 && same, detail: format!("KKT residual {kkt:.2e} (limit 1e-3); {loose_text}") }
}

fn criterion_7(runs: &Runs) -> Verdict {
    let mut bad = Vec::new();
    let mut iterations = 0;
    for (label, r) in &runs.all {
        iterations += r.history.len();
        if !r.history.iter().all(|h: &IterationRecord| h.copies_feasible) {
            bad.push(format!("{label}: copy outside box"));
        }
        if r.status == SolveStatus::Converged && r.residuals.max() > 1e-4 {
            bad.push(format!("{label}: final residual {:.2e}", r.residuals.max()));
        }
    }
    Verdict {
        id: 7,
        pass: bad.is_empty() && !runs.all.is_empty(),
        detail: format!("{} runs, {iterations} iterations checked; {bad:?}", runs.all.len()),
    }
}

fn main() -> ExitCode {
    let mut runs = Runs::default();
    let mut verdicts = Vec::new();
    verdicts.extend(criterion_1_and_2(&mut runs));
    verdicts.push(criterion_3());
    verdicts.push(criterion_4());
    verdicts.push(criterion_5());
    verdicts.push(criterion_6(&mut runs));
    verdicts.push(criterion_7(&runs));

    for v in &verdicts {
        println!("criterion {}: {} - {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
