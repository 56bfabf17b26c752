//! Oracle equivalence checks behind `fracopt validate`.

use fracopt::oracle::{
    dense_constraint_from_spec, dense_normal_matrix, dense_precond_matrix, embedded_3d_apply, lu_solve, mat_vec,
    DenseProblem, DENSE_CAP,
};
use fracopt::{
    tchan, AdmmConfig, AdmmProblem, AdmmState, Bounds, ConstraintOperator, ProblemSpec, ToeplitzSpec1D,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

pub const EQUIVALENCE_TOL: f64 = 1e-10;

/// One line of the validation table; `max_error` is the worst case over all
/// grid sizes up to the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub max_error: f64,
    pub threshold: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.max_error <= self.threshold
    }
}

/// Test hook: corrupts one Caputo coefficient of the structured operator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Fault {
    pub perturb_caputo: f64,
}

fn inf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_state(rng: &mut ChaCha8Rng, len: usize) -> AdmmState {
    AdmmState {
        y: random_vec(rng, len),
        v: random_vec(rng, len),
        z_y: random_vec(rng, len),
        z_v: random_vec(rng, len),
        p: random_vec(rng, len),
        w_y: random_vec(rng, len),
        w_v: random_vec(rng, len),
        iteration: 0,
    }
}

fn structured_operator(spec: &ProblemSpec, fault: Fault) -> CliResult<ConstraintOperator> {
    let op = ConstraintOperator::new(spec)?;
    if fault.perturb_caputo == 0.0 {
        return Ok(op);
    }
    let mut col = op.caputo().col.clone();
    let mut row = op.caputo().row.clone();
    // first subdiagonal, or the only entry when n = 1
    let k = col.len().min(2) - 1;
    col[k] += fault.perturb_caputo;
    row[0] = col[0];
    let caputo = ToeplitzSpec1D::new(col, row)?;
    Ok(ConstraintOperator::from_parts(caputo, op.riesz1().clone(), op.riesz2().clone(), op.psi())?)
}

/// Frobenius distance between the circulant with first column `c` and `t`.
fn frobenius_gap(c: &[f64], t: &ToeplitzSpec1D) -> f64 {
    let n = c.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = c[(i + n - j) % n] - t.coeff(i as isize - j as isize);
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Largest amount by which the T. Chan circulant loses to a random
/// circulant, over 50 random Toeplitz instances of size up to 8 with 200
/// competitors each. Zero when T. Chan always wins.
pub fn tchan_excess(seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7c4a);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let col = random_vec(&mut rng, n);
        let mut row = random_vec(&mut rng, n);
        row[0] = col[0];
        let t = ToeplitzSpec1D::new(col, row)?;
        let best = frobenius_gap(&tchan(&t).first_col, &t);
        for _ in 0..200 {
            let other = random_vec(&mut rng, n);
            worst = worst.max(best - frobenius_gap(&other, &t));
        }
    }
    Ok(worst)
}

/// Runs every equivalence check for grid sizes `1..=cap`.
pub fn run_checks(cap: usize, seed: u64, fault: Fault) -> CliResult<Vec<CheckRow>> {
    if cap == 0 || cap > DENSE_CAP {
        return Err(CliError::Usage(format!("validate cap must be in 1..={DENSE_CAP}, got {cap}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = [
        "apply_B",
        "apply_B_adjoint",
        "embedded_3d",
        "apply_S",
        "precond_solve",
        "admm_5_iterations",
        "kkt_exact_solution",
    ];
    let mut worst = [0.0f64; 7];
    for n in 1..=cap {
        let spec = ProblemSpec {
            n,
            y_bounds: Bounds::symmetric(1.5),
            u_bounds: Bounds::symmetric(40.0),
            ..Default::default()
        };
        let len = n * n * n;
        let cfg = AdmmConfig { delta: 2.0, max_inner: 2000, ..Default::default() };

        let op = structured_operator(&spec, fault)?;
        let b = dense_constraint_from_spec(&spec)?;
        let bt = b.transpose();
        let x = random_vec(&mut rng, len);
        worst[0] = worst[0].max(inf_diff(&op.apply(&x, false)?, &mat_vec(&b, &x)));
        worst[1] = worst[1].max(inf_diff(&op.apply(&x, true)?, &mat_vec(&bt, &x)));
        for adjoint in [false, true] {
            worst[2] = worst[2].max(inf_diff(&embedded_3d_apply(&op, &x, adjoint)?, &op.apply(&x, adjoint)?));
        }

        let prob = AdmmProblem::new(&spec, &cfg)?;
        let s = dense_normal_matrix(&prob.op, &prob.weights, cfg.rho, cfg.delta)?;
        worst[3] = worst[3].max(inf_diff(&prob.apply_s(&x)?, &mat_vec(&s, &x)));
        let s_tilde = dense_precond_matrix(&prob.op, cfg.rho, cfg.delta, spec.gamma)?;
        worst[4] = worst[4].max(inf_diff(&prob.pc.solve(&x)?, &lu_solve(&s_tilde, &x)?));

        let dense = DenseProblem::standard(&spec, &cfg)?;
        let mut ws = prob.workspace();
        let mut a = random_state(&mut rng, len);
        let mut d = a.clone();
        for _ in 0..5 {
            prob.step(&mut a, 1e-14, &mut ws)?;
            d = dense.admm_step(&d)?;
            for (p, q) in [(&a.y, &d.y), (&a.v, &d.v), (&a.z_y, &d.z_y), (&a.z_v, &d.z_v), (&a.p, &d.p)] {
                worst[5] = worst[5].max(inf_diff(p, q));
            }
            for (p, q) in [(&a.w_y, &d.w_y), (&a.w_v, &d.w_v)] {
                worst[5] = worst[5].max(inf_diff(p, q));
            }
        }

        let (y, v, p) = dense.kkt_solve()?;
        let exact = AdmmState {
            z_y: y.clone(),
            z_v: v.clone(),
            y,
            v,
            p,
            w_y: vec![0.0; len],
            w_v: vec![0.0; len],
            iteration: 0,
        };
        let scale = dense.ybar.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let r = dense.kkt_residual(&exact)?;
        // bounds and complementarity do not apply to the box-free solution
        let eq = r.stationarity_y.max(r.stationarity_v).max(r.primal).max(r.copy);
        worst[6] = worst[6].max(eq / scale);
    }
    let mut rows: Vec<CheckRow> = names
        .iter()
        .zip(worst)
        .map(|(&name, max_error)| CheckRow { name, max_error, threshold: EQUIVALENCE_TOL })
        .collect();
    rows.push(CheckRow { name: "tchan_optimality", max_error: tchan_excess(seed)?, threshold: 1e-12 });
    Ok(rows)
}
