//! Kernel timings and process peak memory for `fracopt bench`.

use std::time::Instant;

use fracopt::{assemble_precond, AdmmProblem, AdmmState, ConstraintOperator};

use crate::config::RunConfig;
use crate::error::CliResult;

pub const BENCH_COLUMNS: [&str; 6] =
    ["n", "N", "apply_b_seconds", "precond_solve_seconds", "admm_step_seconds", "peak_rss_kib"];

/// Inner tolerance for the timed ADMM steps.
const STEP_INNER_TOL: f64 = 1e-6;
/// Timed ADMM steps per size.
const STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTiming {
    pub n: usize,
    /// Fastest of the repetitions; timer noise on a shared machine only
    /// ever adds time.
    pub apply_b_seconds: f64,
    pub precond_solve_seconds: f64,
    /// One full ADMM iteration from a zero start, set-up excluded.
    pub admm_step_seconds: f64,
}

fn fastest(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Best wall time of one `B x` and one preconditioner solve, workspaces
/// reused across repetitions, then of a full ADMM step.
pub fn time_kernels(cfg: &RunConfig, n: usize, reps: usize) -> CliResult<KernelTiming> {
    let spec = fracopt::ProblemSpec { n, ..cfg.problem_spec() };
    let op = ConstraintOperator::new(&spec)?;
    let pc = assemble_precond(&op, cfg.rho, cfg.delta, spec.gamma)?;
    let len = op.len();
    let x: Vec<f64> = (0..len).map(|i| ((i % 97) as f64 * 0.37).sin()).collect();
    let mut out = vec![0.0; len];
    let mut op_ws = op.workspace();
    let mut pc_ws = pc.workspace();

    // one untimed pass of each to settle the FFT planners and page in buffers
    op.apply_into(&x, &mut out, false, &mut op_ws)?;
    pc.solve_into(&x, &mut out, &mut pc_ws)?;

    let reps = reps.max(1);
    let mut apply = Vec::with_capacity(reps);
    let mut solve = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        op.apply_into(&x, &mut out, false, &mut op_ws)?;
        apply.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        pc.solve_into(&x, &mut out, &mut pc_ws)?;
        solve.push(t.elapsed().as_secs_f64());
    }
    drop((op_ws, pc_ws, out));

    // the solver footprint: problem data, workspace and a couple of steps
    let prob = AdmmProblem::from_operator(op, &spec, &cfg.admm_config(), fracopt::desired_state(&spec.grid()), vec![0.0; len])?;
    let mut ws = prob.workspace();
    let mut state = AdmmState::zeros(len);
    let mut step = Vec::with_capacity(STEPS);
    for _ in 0..STEPS {
        let t = Instant::now();
        prob.step(&mut state, STEP_INNER_TOL, &mut ws)?;
        step.push(t.elapsed().as_secs_f64());
    }
    Ok(KernelTiming {
        n,
        apply_b_seconds: fastest(&apply),
        precond_solve_seconds: fastest(&solve),
        admm_step_seconds: fastest(&step),
    })
}

/// Peak resident set size of this process in KiB (`VmHWM`), where the
/// platform exposes it.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|rest| rest.trim().trim_end_matches("kB").trim().parse().ok())
}
