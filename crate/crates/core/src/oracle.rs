//! Dense reference implementations for small grids.
//!
//! Everything here assembles explicit matrices with Kronecker products and
//! solves with LU or Cholesky. It shares no code path with the FFT kernels
//! and exists to check them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::admm::{AdmmConfig, AdmmState};
use crate::circulant::tchan;
use crate::error::{check_len, Error, Result};
use crate::fft::Fft3;
use crate::problem::{desired_state, objective_weights, scaling, Bounds, ObjectiveWeights, ProblemSpec};
use crate::structured::{build_caputo, build_riesz, ConstraintOperator, ToeplitzSpec1D};

/// Largest `n` for which dense `n^3 x n^3` matrices are built.
pub const DENSE_CAP: usize = 6;

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        Err(Error::TooLarge { n, cap: DENSE_CAP })
    } else {
        Ok(())
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Dense `m x` for a slice.
pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).iter().copied().collect()
}

/// Dense solve `m z = r` by LU.
pub fn lu_solve(m: &DMatrix<f64>, r: &[f64]) -> Result<Vec<f64>> {
    m.clone()
        .lu()
        .solve(&DVector::from_column_slice(r))
        .map(|z| z.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("singular dense system".into()))
}

/// `a (x) b (x) c`, first factor outermost.
pub fn kron3(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b).kronecker(c)
}

fn assemble_b(caputo: DMatrix<f64>, r1: DMatrix<f64>, r2: DMatrix<f64>, psi: f64) -> DMatrix<f64> {
    let eye = DMatrix::<f64>::identity(caputo.nrows(), caputo.nrows());
    (kron3(&caputo, &eye, &eye) - kron3(&eye, &r1, &eye) - kron3(&eye, &eye, &r2)) * psi
}

/// Dense `B = psi (C (x) I (x) I - I (x) L1 (x) I - I (x) I (x) L2)`.
pub fn dense_constraint(op: &ConstraintOperator) -> Result<DMatrix<f64>> {
    check_cap(op.n())?;
    Ok(assemble_b(
        to_matrix(&op.caputo().dense()),
        to_matrix(&op.riesz1().dense()),
        to_matrix(&op.riesz2().dense()),
        op.psi(),
    ))
}

/// Dense `B` built straight from the problem parameters.
pub fn dense_constraint_from_spec(spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_cap(spec.n)?;
    let grid = spec.grid();
    let psi = scaling(spec, &grid)?.psi;
    Ok(assemble_b(
        to_matrix(&build_caputo(spec.alpha, grid.n, grid.h_t)?.dense()),
        to_matrix(&build_riesz(spec.beta1, grid.n, grid.h_x)?.dense()),
        to_matrix(&build_riesz(spec.beta2, grid.n, grid.h_x)?.dense()),
        psi,
    ))
}

/// Dense 3-level circulant `C3(B)` from the T. Chan approximations of the factors.
pub fn dense_circulant_constraint(op: &ConstraintOperator) -> Result<DMatrix<f64>> {
    check_cap(op.n())?;
    Ok(assemble_b(
        to_matrix(&tchan(op.caputo()).dense()),
        to_matrix(&tchan(op.riesz1()).dense()),
        to_matrix(&tchan(op.riesz2()).dense()),
        op.psi(),
    ))
}

/// Diagonal weights in scaled-control variables: `(J1, gamma / psi^2 J)`.
fn scaled_diagonals(weights: &ObjectiveWeights, psi: f64) -> (Vec<f64>, Vec<f64>) {
    let j1 = weights.j1().collect();
    let j2 = weights.j2().map(|w| w / (psi * psi)).collect();
    (j1, j2)
}

/// Dense normal-equations matrix
/// `rho (J1 + I/delta) + B^T ((rho (J2 + I/delta))^{-1} + (delta/rho) I)^{-1} B`.
pub fn dense_normal_matrix(op: &ConstraintOperator, weights: &ObjectiveWeights, rho: f64, delta: f64) -> Result<DMatrix<f64>> {
    let b = dense_constraint(op)?;
    check_len(b.nrows(), weights.diag_j.len())?;
    let (j1, j2) = scaled_diagonals(weights, op.psi());
    let m2_inv = DVector::from_iterator(j2.len(), j2.iter().map(|j| {
        let mv = rho * (j + 1.0 / delta);
        1.0 / (1.0 / mv + delta / rho)
    }));
    let mut s = b.transpose() * DMatrix::from_diagonal(&m2_inv) * &b;
    for (i, j) in j1.iter().enumerate() {
        s[(i, i)] += rho * (j + 1.0 / delta);
    }
    Ok(s)
}

/// Dense preconditioner `rho (1 + 1/delta) I + C3(B)^T C3(B) / m2` with
/// `m2 = (rho (gamma/psi^2 + 1/delta))^{-1} + delta/rho`.
pub fn dense_precond_matrix(op: &ConstraintOperator, rho: f64, delta: f64, gamma: f64) -> Result<DMatrix<f64>> {
    let c = dense_circulant_constraint(op)?;
    let psi = op.psi();
    let m2 = 1.0 / (rho * (gamma / (psi * psi) + 1.0 / delta)) + delta / rho;
    let mut s = c.transpose() * &c / m2;
    for i in 0..s.nrows() {
        s[(i, i)] += rho * (1.0 + 1.0 / delta);
    }
    Ok(s)
}

/// Eigenvalues of the pencil `(a, b)` with `a` symmetric and `b` SPD,
/// ascending. Computed as the spectrum of `L^{-1} a L^{-T}` with `b = L L^T`.
pub fn generalized_sym_eigs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_len(a.nrows(), b.nrows())?;
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("preconditioner matrix is not positive definite".into()))?;
    let l = chol.l();
    let left = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let m = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let sym = (&m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// A fully assembled small problem in scaled-control variables.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub b: DMatrix<f64>,
    pub j1: Vec<f64>,
    /// `gamma / psi^2` times the trapezoidal diagonal.
    pub j2: Vec<f64>,
    pub ybar: Vec<f64>,
    pub psi_g: Vec<f64>,
    pub psi: f64,
    pub y_bounds: Bounds,
    pub v_bounds: Bounds,
    pub delta: f64,
    pub rho: f64,
}

impl DenseProblem {
    pub fn new(spec: &ProblemSpec, cfg: &AdmmConfig, ybar: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let b = dense_constraint_from_spec(spec)?;
        let grid = spec.grid();
        check_len(grid.len(), ybar.len())?;
        check_len(grid.len(), g.len())?;
        let psi = scaling(spec, &grid)?.psi;
        let weights = objective_weights(&grid, spec.gamma)?;
        let (j1, j2) = scaled_diagonals(&weights, psi);
        Ok(DenseProblem {
            b,
            j1,
            j2,
            ybar,
            psi_g: g.iter().map(|v| psi * v).collect(),
            psi,
            y_bounds: spec.y_bounds,
            v_bounds: spec.u_bounds.scaled(psi),
            delta: cfg.delta,
            rho: cfg.rho,
        })
    }

    /// Built-in desired state and `g = 0`.
    pub fn standard(spec: &ProblemSpec, cfg: &AdmmConfig) -> Result<Self> {
        let grid = spec.grid();
        Self::new(spec, cfg, desired_state(&grid), vec![0.0; grid.len()])
    }

    pub fn len(&self) -> usize {
        self.j1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j1.is_empty()
    }

    /// One ADMM iteration: the joint `(y, v)` minimization of the augmented
    /// Lagrangian solved by LU on its `2N` optimality system, then the box
    /// projection and the three multiplier updates.
    pub fn admm_step(&self, state: &AdmmState) -> Result<AdmmState> {
        let n = self.len();
        let d = self.delta;
        let b = &self.b;
        let bt = b.transpose();
        let mut k = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let btb = &bt * b / d;
        k.view_mut((0, 0), (n, n)).copy_from(&btb);
        k.view_mut((0, n), (n, n)).copy_from(&(&bt / d));
        k.view_mut((n, 0), (n, n)).copy_from(&(b / d));
        for i in 0..n {
            k[(i, i)] += self.j1[i] + 1.0 / d;
            k[(n + i, n + i)] += self.j2[i] + 2.0 / d;
        }
        let p = DVector::from_column_slice(&state.p);
        let g = DVector::from_column_slice(&self.psi_g);
        let btp = &bt * &p;
        let btg = &bt * &g;
        let mut rhs = DVector::<f64>::zeros(2 * n);
        for i in 0..n {
            rhs[i] = self.j1[i] * self.ybar[i] - btp[i] - state.w_y[i] + (btg[i] + state.z_y[i]) / d;
            rhs[n + i] = -state.p[i] - state.w_v[i] + (self.psi_g[i] + state.z_v[i]) / d;
        }
        let sol = k
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular ADMM subproblem".into()))?;
        let y: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let v: Vec<f64> = sol.rows(n, n).iter().copied().collect();

        let mut next = state.clone();
        for i in 0..n {
            next.z_y[i] = self.y_bounds.clamp(y[i] + d * state.w_y[i]);
            next.z_v[i] = self.v_bounds.clamp(v[i] + d * state.w_v[i]);
        }
        let by = b * DVector::from_column_slice(&y);
        let step = self.rho / d;
        for i in 0..n {
            next.p[i] += step * (by[i] + v[i] - self.psi_g[i]);
            next.w_y[i] += step * (y[i] - next.z_y[i]);
            next.w_v[i] += step * (v[i] - next.z_v[i]);
        }
        next.y = y;
        next.v = v;
        next.iteration += 1;
        Ok(next)
    }

    /// Solution `(y, v, p)` of the equality-constrained problem without boxes:
    /// `[J1 0 B^T; 0 J2 I; B I 0] [y; v; p] = [J1 ybar; 0; psi g]`.
    pub fn kkt_solve(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.len();
        let mut k = DMatrix::<f64>::zeros(3 * n, 3 * n);
        k.view_mut((0, 2 * n), (n, n)).copy_from(&self.b.transpose());
        k.view_mut((2 * n, 0), (n, n)).copy_from(&self.b);
        let mut rhs = DVector::<f64>::zeros(3 * n);
        for i in 0..n {
            k[(i, i)] = self.j1[i];
            k[(n + i, n + i)] = self.j2[i];
            k[(n + i, 2 * n + i)] = 1.0;
            k[(2 * n + i, n + i)] = 1.0;
            rhs[i] = self.j1[i] * self.ybar[i];
            rhs[2 * n + i] = self.psi_g[i];
        }
        let sol = k
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular KKT system".into()))?;
        let part = |o: usize| sol.rows(o, n).iter().copied().collect();
        Ok((part(0), part(n), part(2 * n)))
    }

    /// KKT residuals of a candidate in scaled variables. Bound feasibility
    /// and complementarity are measured on the copies `(z_y, z_v)` with the
    /// multipliers `(w_y, w_v)`.
    pub fn kkt_residual(&self, state: &AdmmState) -> Result<KktResidual> {
        let n = self.len();
        check_len(n, state.y.len())?;
        let y = DVector::from_column_slice(&state.y);
        let p = DVector::from_column_slice(&state.p);
        let by = &self.b * &y;
        let btp = self.b.transpose() * &p;
        let mut out = KktResidual::default();
        for i in 0..n {
            let s1 = self.j1[i] * (state.y[i] - self.ybar[i]) + btp[i] + state.w_y[i];
            let s2 = self.j2[i] * state.v[i] + state.p[i] + state.w_v[i];
            out.stationarity_y = out.stationarity_y.max(s1.abs());
            out.stationarity_v = out.stationarity_v.max(s2.abs());
            out.primal = out.primal.max((by[i] + state.v[i] - self.psi_g[i]).abs());
            out.copy = out.copy.max((state.y[i] - state.z_y[i]).abs()).max((state.v[i] - state.z_v[i]).abs());
            for (z, w, b) in [(state.z_y[i], state.w_y[i], &self.y_bounds), (state.z_v[i], state.w_v[i], &self.v_bounds)] {
                out.bounds = out.bounds.max(bound_violation(z, b));
                out.complementarity = out.complementarity.max(complementarity(z, w, b));
            }
        }
        Ok(out)
    }
}

/// Infinity norms of the KKT conditions of the box-constrained problem.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktResidual {
    /// `||J1 (y - ybar) + B^T p + w_y||`.
    pub stationarity_y: f64,
    /// `||J2 v + p + w_v||`.
    pub stationarity_v: f64,
    /// `||B y + v - psi g||`.
    pub primal: f64,
    /// `max(||y - z_y||, ||v - z_v||)`.
    pub copy: f64,
    /// Distance of the copies outside their boxes.
    pub bounds: f64,
    /// `max(w+ (hi - z), w- (z - lo))`, or `|w|` where the bound is absent.
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        [self.stationarity_y, self.stationarity_v, self.primal, self.copy, self.bounds, self.complementarity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn bound_violation(z: f64, b: &Bounds) -> f64 {
    let below = b.lower.map_or(0.0, |lo| (lo - z).max(0.0));
    let above = b.upper.map_or(0.0, |hi| (z - hi).max(0.0));
    below.max(above)
}

fn complementarity(z: f64, w: f64, b: &Bounds) -> f64 {
    if w > 0.0 {
        b.upper.map_or(w, |hi| w * (hi - z).abs())
    } else if w < 0.0 {
        b.lower.map_or(-w, |lo| -w * (z - lo).abs())
    } else {
        0.0
    }
}

/// Applies a 3-level Toeplitz-sum operator through one `(2n)^3` circulant
/// tensor embedding and a full 3-D FFT. Independent of the mode-wise path.
pub fn embedded_3d_apply(op: &ConstraintOperator, x: &[f64], adjoint: bool) -> Result<Vec<f64>> {
    let n = op.n();
    check_len(n * n * n, x.len())?;
    let m = 2 * n;
    let pick = |t: &ToeplitzSpec1D| if adjoint { t.transposed() } else { t.clone() };
    let embed = |t: &ToeplitzSpec1D| -> Vec<f64> {
        let mut c = vec![0.0; m];
        for k in 0..n {
            c[k] = t.coeff(k as isize);
        }
        for k in 1..n {
            c[m - k] = t.coeff(-(k as isize));
        }
        c
    };
    let (ca, c1, c2) = (embed(&pick(op.caputo())), embed(&pick(op.riesz1())), embed(&pick(op.riesz2())));
    let psi = op.psi();
    let at = |a: usize, b: usize, c: usize| (a * m + b) * m + c;
    let mut kernel = vec![Complex64::default(); m * m * m];
    for k in 0..m {
        kernel[at(k, 0, 0)] += psi * ca[k];
        kernel[at(0, k, 0)] -= psi * c1[k];
        kernel[at(0, 0, k)] -= psi * c2[k];
    }
    let mut data = vec![Complex64::default(); m * m * m];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                data[at(k, i, j)] = Complex64::new(x[(k * n + i) * n + j], 0.0);
            }
        }
    }
    let fft = Fft3::new(m);
    let mut ws = fft.workspace();
    fft.forward(&mut kernel, &mut ws);
    fft.forward(&mut data, &mut ws);
    data.iter_mut().zip(&kernel).for_each(|(d, k)| *d *= k);
    fft.inverse(&mut data, &mut ws);
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                out[(k * n + i) * n + j] = data[at(k, i, j)].re;
            }
        }
    }
    Ok(out)
}
