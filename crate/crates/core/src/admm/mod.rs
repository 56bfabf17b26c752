//! Two-block ADMM with the `(y, v = psi u, p)` subproblem reduced to the
//! normal equations in `y` and solved by circulant-preconditioned CG.
//!
//! Internally the control is carried as `v = psi u`, so the constraint reads
//! `B y + v = psi g`, the control weight becomes `J2 = (gamma / psi^2) J`
//! and the control box is `psi [u_lo, u_hi]`. Reported controls are `v / psi`.

mod pcg;

use std::time::Instant;

pub use pcg::{pcg, PcgOutcome};

use crate::circulant::{assemble_precond, CirculantPreconditioner, PrecondWorkspace};
use crate::error::{check_len, Error, Result};
use crate::problem::{desired_state, l2_misfit, objective_weights, Bounds, Grid, ObjectiveWeights, ProblemSpec};
use crate::structured::{ApplyWorkspace, ConstraintOperator};

/// Upper limit (exclusive) of the ADMM step length.
pub const RHO_MAX: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// Penalty parameter.
    pub delta: f64,
    /// Dual step length in `(0, (1 + sqrt 5) / 2)`.
    pub rho: f64,
    /// Infinity-norm tolerance on the three primal residuals.
    pub tol_primal: f64,
    pub max_outer: usize,
    pub inner_tol_floor: f64,
    pub inner_tol_factor: f64,
    pub max_inner: usize,
    /// Start each inner solve from the previous state instead of zero.
    pub warm_start: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            delta: 0.4,
            rho: 1.618,
            tol_primal: 1e-4,
            max_outer: 2000,
            inner_tol_floor: 1e-4,
            inner_tol_factor: 0.05,
            max_inner: 500,
            warm_start: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < RHO_MAX) {
            return Err(Error::Parameter { name: "rho", reason: format!("{} is outside (0, {RHO_MAX})", self.rho) });
        }
        let positive = [
            ("delta", self.delta),
            ("tol_primal", self.tol_primal),
            ("inner_tol_floor", self.inner_tol_floor),
            ("inner_tol_factor", self.inner_tol_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter { name, reason: format!("{v} must be positive") });
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Parameter { name: "max_outer", reason: "iteration caps must be positive".into() });
        }
        Ok(())
    }
}

/// Primal, copy and dual iterates in scaled-control variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub z_y: Vec<f64>,
    pub z_v: Vec<f64>,
    pub p: Vec<f64>,
    pub w_y: Vec<f64>,
    pub w_v: Vec<f64>,
    pub iteration: usize,
}

impl AdmmState {
    pub fn zeros(len: usize) -> Self {
        let z = vec![0.0; len];
        AdmmState {
            y: z.clone(),
            v: z.clone(),
            z_y: z.clone(),
            z_v: z.clone(),
            p: z.clone(),
            w_y: z.clone(),
            w_v: z,
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn check(&self, len: usize) -> Result<()> {
        for v in [&self.y, &self.v, &self.z_y, &self.z_v, &self.p, &self.w_y, &self.w_v] {
            check_len(len, v.len())?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        [&self.y, &self.v, &self.z_y, &self.z_v, &self.p, &self.w_y, &self.w_v]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Primal residuals in the unscaled form used for termination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `||B y + psi (u - g)||_inf`.
    pub r_eq: f64,
    /// `||y - z_y||_inf`.
    pub r_y: f64,
    /// `||u - z_u||_inf`.
    pub r_u: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.r_eq.max(self.r_y).max(self.r_u)
    }

    pub fn min(&self) -> f64 {
        self.r_eq.min(self.r_y).min(self.r_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Termination {
    pub converged: bool,
    pub inner_tol: f64,
    pub residuals: Residuals,
    pub dual_inf: f64,
}

/// One row of the per-iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residuals: Residuals,
    pub dual_inf: f64,
    pub inner_iterations: usize,
    /// Tolerance the inner solve of this iteration ran with.
    pub inner_tol: f64,
    /// Whether both copies lay inside their boxes after the z-update.
    pub copies_feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    /// Unscaled control `v / psi`.
    pub u: Vec<f64>,
    pub z_y: Vec<f64>,
    /// Unscaled control copy `z_v / psi`.
    pub z_u: Vec<f64>,
    pub state: AdmmState,
    pub admm_iterations: usize,
    pub pcg_iterations: usize,
    pub pcg_avg: f64,
    pub misfit: f64,
    pub residuals: Residuals,
    pub dual_inf: f64,
    pub wall_seconds: f64,
    pub history: Vec<IterationRecord>,
}

/// Everything fixed during one solve: operator, preconditioner and the
/// diagonal factors of the normal equations.
#[derive(Debug, Clone)]
pub struct AdmmProblem {
    pub op: ConstraintOperator,
    pub pc: CirculantPreconditioner,
    pub cfg: AdmmConfig,
    pub weights: ObjectiveWeights,
    pub ybar: Vec<f64>,
    /// Scaled source term `psi g`.
    pub psi_g: Vec<f64>,
    pub y_bounds: Bounds,
    /// Control box in scaled variables, `psi [u_lo, u_hi]`.
    pub v_bounds: Bounds,
    j1: Vec<f64>,
    /// `rho (J1 + I / delta)`.
    m1: Vec<f64>,
    /// `rho (J2 + I / delta)` with `J2 = (gamma / psi^2) J`.
    mv: Vec<f64>,
    /// `M2^{-1}` with `M2 = (rho (J2 + I / delta))^{-1} + (delta / rho) I`.
    m2_inv: Vec<f64>,
    j2: Vec<f64>,
}

/// Scratch vectors for the structured kernels.
#[derive(Debug, Clone)]
pub struct Workspace {
    apply: ApplyWorkspace,
    precond: PrecondWorkspace,
    tmp: Vec<f64>,
}

impl AdmmProblem {
    /// Problem with the built-in desired state and `g = 0`.
    pub fn new(spec: &ProblemSpec, cfg: &AdmmConfig) -> Result<Self> {
        let grid = spec.grid();
        Self::with_data(spec, cfg, desired_state(&grid), vec![0.0; grid.len()])
    }

    /// Problem with explicit desired state and source term `g` (unscaled).
    pub fn with_data(spec: &ProblemSpec, cfg: &AdmmConfig, ybar: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let op = ConstraintOperator::new(spec)?;
        Self::from_operator(op, spec, cfg, ybar, g)
    }

    pub fn from_operator(
        op: ConstraintOperator,
        spec: &ProblemSpec,
        cfg: &AdmmConfig,
        ybar: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self> {
        cfg.validate()?;
        let grid = op.grid();
        check_len(grid.len(), ybar.len())?;
        check_len(grid.len(), g.len())?;
        let psi = op.psi();
        let pc = assemble_precond(&op, cfg.rho, cfg.delta, spec.gamma)?;
        let weights = objective_weights(&grid, spec.gamma)?;
        let (rho, delta) = (cfg.rho, cfg.delta);
        let j1: Vec<f64> = weights.j1().collect();
        let j2: Vec<f64> = weights.j2().map(|w| w / (psi * psi)).collect();
        let m1 = j1.iter().map(|j| rho * (j + 1.0 / delta)).collect();
        let mv: Vec<f64> = j2.iter().map(|j| rho * (j + 1.0 / delta)).collect();
        let m2_inv = mv.iter().map(|m| 1.0 / (1.0 / m + delta / rho)).collect();
        Ok(AdmmProblem {
            pc,
            cfg: cfg.clone(),
            weights,
            ybar,
            psi_g: g.iter().map(|v| psi * v).collect(),
            y_bounds: spec.y_bounds,
            v_bounds: spec.u_bounds.scaled(psi),
            j1,
            m1,
            mv,
            m2_inv,
            j2,
            op,
        })
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    pub fn psi(&self) -> f64 {
        self.op.psi()
    }

    pub fn grid(&self) -> Grid {
        self.op.grid()
    }

    /// Diagonal of `J2 = (gamma / psi^2) J` in scaled variables.
    pub fn j2_scaled(&self) -> &[f64] {
        &self.j2
    }

    pub fn j1(&self) -> &[f64] {
        &self.j1
    }

    pub fn workspace(&self) -> Workspace {
        Workspace { apply: self.op.workspace(), precond: self.pc.workspace(), tmp: vec![0.0; self.len()] }
    }

    /// `out = S x` with `S = rho (J1 + I/delta) + B^T M2^{-1} B`.
    pub fn apply_s_into(&self, x: &[f64], out: &mut [f64], ws: &mut Workspace) -> Result<()> {
        check_len(self.len(), x.len())?;
        self.op.apply_into(x, &mut ws.tmp, false, &mut ws.apply)?;
        ws.tmp.iter_mut().zip(&self.m2_inv).for_each(|(t, m)| *t *= m);
        self.op.apply_into(&ws.tmp, out, true, &mut ws.apply)?;
        out.iter_mut().zip(&self.m1).zip(x).for_each(|((o, m), xi)| *o += m * xi);
        Ok(())
    }

    pub fn apply_s(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.apply_s_into(x, &mut out, &mut self.workspace())?;
        Ok(out)
    }

    /// The control-block right-hand side `rho (-w_v + z_v / delta) + (1 - rho) p`.
    fn control_rhs(&self, state: &AdmmState) -> Vec<f64> {
        let (rho, delta) = (self.cfg.rho, self.cfg.delta);
        state
            .w_v
            .iter()
            .zip(&state.z_v)
            .zip(&state.p)
            .map(|((w, z), p)| rho * (-w + z / delta) + (1.0 - rho) * p)
            .collect()
    }

    /// Normal-equations right-hand side and the auxiliary vector
    /// `r = -psi g + (delta / rho) p + (rho (J2 + I/delta))^{-1} a2`.
    pub fn build_rhs(&self, state: &AdmmState, ws: &mut Workspace) -> Result<(Vec<f64>, Vec<f64>)> {
        state.check(self.len())?;
        let (rho, delta) = (self.cfg.rho, self.cfg.delta);
        let a2 = self.control_rhs(state);
        let r: Vec<f64> = (0..self.len())
            .map(|i| -self.psi_g[i] + delta / rho * state.p[i] + a2[i] / self.mv[i])
            .collect();
        // B^T ((1 - rho) p - M2^{-1} r) in one adjoint product
        let combined: Vec<f64> = (0..self.len()).map(|i| (1.0 - rho) * state.p[i] - self.m2_inv[i] * r[i]).collect();
        let mut rhs = vec![0.0; self.len()];
        self.op.apply_into(&combined, &mut rhs, true, &mut ws.apply)?;
        for i in 0..self.len() {
            rhs[i] += rho * (self.j1[i] * self.ybar[i] - state.w_y[i] + state.z_y[i] / delta);
        }
        Ok((rhs, r))
    }

    /// Recovers `(v, p)` from `y`, the cached `B y` and the vector `r` of
    /// [`build_rhs`](Self::build_rhs).
    pub fn recover_vp(&self, by: &[f64], r: &[f64], state: &AdmmState) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.len(), by.len())?;
        check_len(self.len(), r.len())?;
        let a2 = self.control_rhs(state);
        let p: Vec<f64> = (0..self.len()).map(|i| self.m2_inv[i] * (by[i] + r[i])).collect();
        let v = (0..self.len()).map(|i| (a2[i] - p[i]) / self.mv[i]).collect();
        Ok((v, p))
    }

    /// Projects `y + delta w_y` and `v + delta w_v` onto the boxes.
    pub fn z_update(&self, state: &mut AdmmState) {
        z_update(state, self.cfg.delta, &self.y_bounds, &self.v_bounds);
    }

    /// Dual ascent on all three multipliers using the cached `B y`.
    pub fn dual_update(&self, state: &mut AdmmState, by: &[f64]) {
        let step = self.cfg.rho / self.cfg.delta;
        for i in 0..self.len() {
            state.p[i] += step * (by[i] + state.v[i] - self.psi_g[i]);
            state.w_y[i] += step * (state.y[i] - state.z_y[i]);
            state.w_v[i] += step * (state.v[i] - state.z_v[i]);
        }
    }

    pub fn residuals(&self, state: &AdmmState, by: &[f64]) -> Residuals {
        let psi = self.psi();
        let mut res = Residuals { r_eq: 0.0, r_y: 0.0, r_u: 0.0 };
        for i in 0..self.len() {
            res.r_eq = res.r_eq.max((by[i] + state.v[i] - self.psi_g[i]).abs());
            res.r_y = res.r_y.max((state.y[i] - state.z_y[i]).abs());
            res.r_u = res.r_u.max((state.v[i] - state.z_v[i]).abs() / psi);
        }
        res
    }

    /// `max(||J1 (y - ybar) + B^T p + w_y||_inf, ||J2 v + p + w_v||_inf)`.
    pub fn dual_infeasibility(&self, state: &AdmmState, ws: &mut Workspace) -> Result<f64> {
        let mut btp = vec![0.0; self.len()];
        self.op.apply_into(&state.p, &mut btp, true, &mut ws.apply)?;
        let mut out = 0.0f64;
        for i in 0..self.len() {
            let s1 = self.j1[i] * (state.y[i] - self.ybar[i]) + btp[i] + state.w_y[i];
            let s2 = self.j2[i] * state.v[i] + state.p[i] + state.w_v[i];
            out = out.max(s1.abs()).max(s2.abs());
        }
        Ok(out)
    }

    pub fn check_termination(&self, state: &AdmmState, by: &[f64], ws: &mut Workspace) -> Result<Termination> {
        let residuals = self.residuals(state, by);
        let (converged, inner_tol) = termination_rule(&residuals, &self.cfg);
        let dual_inf = self.dual_infeasibility(state, ws)?;
        Ok(Termination { converged, inner_tol, residuals, dual_inf })
    }

    /// One ADMM iteration in place. Returns `(B y, inner outcome)`.
    pub fn step(&self, state: &mut AdmmState, inner_tol: f64, ws: &mut Workspace) -> Result<(Vec<f64>, PcgOutcome)> {
        let (rhs, r) = self.build_rhs(state, ws)?;
        let x0 = if self.cfg.warm_start { Some(state.y.as_slice()) } else { None };
        let outcome = self.solve_normal(&rhs, x0, inner_tol, ws)?;
        let mut by = vec![0.0; self.len()];
        self.op.apply_into(&outcome.x, &mut by, false, &mut ws.apply)?;
        let (v, _) = self.recover_vp(&by, &r, state)?;
        state.y.copy_from_slice(&outcome.x);
        state.v = v;
        self.z_update(state);
        self.dual_update(state, &by);
        state.iteration += 1;
        Ok((by, outcome))
    }

    /// PCG on the normal equations with the circulant preconditioner.
    pub fn solve_normal(&self, rhs: &[f64], x0: Option<&[f64]>, tol: f64, ws: &mut Workspace) -> Result<PcgOutcome> {
        let Workspace { apply, precond, tmp } = ws;
        let op = &self.op;
        let pc = &self.pc;
        pcg(
            |x, out| {
                op.apply_into(x, tmp, false, apply)?;
                tmp.iter_mut().zip(&self.m2_inv).for_each(|(t, m)| *t *= m);
                op.apply_into(tmp, out, true, apply)?;
                out.iter_mut().zip(&self.m1).zip(x).for_each(|((o, m), xi)| *o += m * xi);
                Ok(())
            },
            |r, out| pc.solve_into(r, out, precond),
            rhs,
            x0,
            tol,
            self.cfg.max_inner,
        )
    }

    pub fn solve(&self) -> Result<SolveResult> {
        self.solve_with(|_| {})
    }

    /// Runs ADMM from the zero state, reporting every iteration to `observer`.
    pub fn solve_with<F: FnMut(&IterationRecord)>(&self, mut observer: F) -> Result<SolveResult> {
        let start = Instant::now();
        let mut ws = self.workspace();
        let mut state = AdmmState::zeros(self.len());
        let mut inner_tol = self.cfg.inner_tol_factor * self.cfg.inner_tol_floor;
        let mut history = Vec::new();
        let mut pcg_total = 0;
        let mut capped_in_row = 0;
        let mut status = SolveStatus::IterationLimit;
        let mut last: Option<Termination> = None;

        for _ in 0..self.cfg.max_outer {
            let (by, outcome) = self.step(&mut state, inner_tol, &mut ws)?;
            if !state.is_finite() {
                return Err(Error::Numerical(format!("non-finite iterate at ADMM iteration {}", state.iteration)));
            }
            pcg_total += outcome.iterations;
            capped_in_row = if outcome.converged { 0 } else { capped_in_row + 1 };
            if capped_in_row >= 3 {
                return Err(Error::Solver(format!(
                    "PCG hit the cap of {} iterations in {capped_in_row} consecutive ADMM iterations (last relative residual {:e}, tolerance {inner_tol:e})",
                    self.cfg.max_inner, outcome.rel_residual
                )));
            }
            let copies_feasible = state.z_y.iter().all(|&z| self.y_bounds.contains(z))
                && state.z_v.iter().all(|&z| self.v_bounds.contains(z));
            let term = self.check_termination(&state, &by, &mut ws)?;
            let record = IterationRecord {
                iteration: state.iteration,
                residuals: term.residuals,
                dual_inf: term.dual_inf,
                inner_iterations: outcome.iterations,
                inner_tol,
                copies_feasible,
            };
            observer(&record);
            history.push(record);
            inner_tol = term.inner_tol;
            last = Some(term);
            if term.converged {
                status = SolveStatus::Converged;
                break;
            }
        }

        let term = last.expect("max_outer is positive");
        let psi = self.psi();
        let grid = self.grid();
        let misfit = l2_misfit(&state.y, &crate::problem::desired_state_fn, &grid)?;
        let iterations = state.iteration;
        Ok(SolveResult {
            status,
            y: state.y.clone(),
            u: state.v.iter().map(|v| v / psi).collect(),
            z_y: state.z_y.clone(),
            z_u: state.z_v.iter().map(|v| v / psi).collect(),
            admm_iterations: iterations,
            pcg_iterations: pcg_total,
            pcg_avg: pcg_total as f64 / iterations.max(1) as f64,
            misfit,
            residuals: term.residuals,
            dual_inf: term.dual_inf,
            wall_seconds: start.elapsed().as_secs_f64(),
            history,
            state,
        })
    }
}

/// Convergence flag and next inner tolerance from the three residuals:
/// `factor * max(min(residuals), floor)`.
pub fn termination_rule(res: &Residuals, cfg: &AdmmConfig) -> (bool, f64) {
    let converged = res.r_eq <= cfg.tol_primal && res.r_y <= cfg.tol_primal && res.r_u <= cfg.tol_primal;
    let inner_tol = cfg.inner_tol_factor * res.min().max(cfg.inner_tol_floor);
    (converged, inner_tol)
}

/// `z_y = clamp(y + delta w_y)`, `z_v = clamp(v + delta w_v)`.
pub fn z_update(state: &mut AdmmState, delta: f64, y_bounds: &Bounds, v_bounds: &Bounds) {
    for i in 0..state.y.len() {
        state.z_y[i] = y_bounds.clamp(state.y[i] + delta * state.w_y[i]);
        state.z_v[i] = v_bounds.clamp(state.v[i] + delta * state.w_v[i]);
    }
}

/// Solves one problem end to end with the built-in desired state and `g = 0`.
pub fn solve(spec: &ProblemSpec, cfg: &AdmmConfig) -> Result<SolveResult> {
    AdmmProblem::new(spec, cfg)?.solve()
}
