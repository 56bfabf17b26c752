//! T. Chan circulant approximations and the 3-level circulant Schur
//! complement preconditioner.
//!
//! Eigenvalues follow the convention `lambda_j = sum_k c_k exp(-2 pi i j k / n)`,
//! for which `C x_j = lambda_j x_j` with Fourier vectors `x_j[k] = exp(2 pi i j k / n)`.
//! Multilevel spectra use the canonical layout `[time, x1, x2]`.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::fft::{dft, gather_strip, scatter_strip, Fft3, Fft3Workspace, STRIP};
use crate::problem::{frac_coeffs, ScalingConstants};
use crate::structured::{ConstraintOperator, ToeplitzSpec1D};

/// A circulant matrix `C[i][j] = c_{(i - j) mod n}` with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantSpec1D {
    pub first_col: Vec<f64>,
    pub eigs: Vec<Complex64>,
}

impl CirculantSpec1D {
    pub fn len(&self) -> usize {
        self.first_col.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_col.is_empty()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.first_col[(i + n - j) % n]).collect())
            .collect()
    }
}

/// Frobenius-optimal circulant approximation of a Toeplitz matrix:
/// `c_i = ((n - i) t_i + i t_{i-n}) / n`.
pub fn tchan(spec: &ToeplitzSpec1D) -> CirculantSpec1D {
    let n = spec.len();
    let nf = n as f64;
    let first_col: Vec<f64> = (0..n)
        .map(|i| {
            let wrapped = if i == 0 { 0.0 } else { spec.row[n - i] };
            ((nf - i as f64) * spec.col[i] + i as f64 * wrapped) / nf
        })
        .collect();
    let eigs = circulant_eigs(&first_col);
    CirculantSpec1D { first_col, eigs }
}

pub fn circulant_eigs(first_col: &[f64]) -> Vec<Complex64> {
    let c: Vec<Complex64> = first_col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft(&c)
}

/// Spectrum of `S~ = rho (1 + 1/delta) I + C3(B)^T C3(B) / m2` in Fourier space.
#[derive(Debug, Clone)]
pub struct CirculantPreconditioner {
    n: usize,
    pub lam_b: Vec<Complex64>,
    pub lam_s: Vec<f64>,
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
    pub psi: f64,
    /// `1 / (N lam_s)`, the inverse transform's normalization folded in.
    inv_lam: Vec<f64>,
    fft: Fft3,
}

/// Per-call buffers for [`CirculantPreconditioner::solve_into`].
#[derive(Debug, Clone)]
pub struct PrecondWorkspace {
    buf: Vec<Complex64>,
    fft: Fft3Workspace,
}

/// The scalar `m2 = (rho (gamma / psi^2 + 1/delta))^{-1} + delta / rho`.
pub fn schur_middle_scalar(rho: f64, delta: f64, gamma: f64, psi: f64) -> f64 {
    1.0 / (rho * (gamma / (psi * psi) + 1.0 / delta)) + delta / rho
}

/// Eigenvalues of `C3(B)` from the three unilevel spectra.
pub fn multilevel_eigs(
    lam_alpha: &[Complex64],
    lam_beta1: &[Complex64],
    lam_beta2: &[Complex64],
    psi: f64,
) -> Vec<Complex64> {
    let n = lam_alpha.len();
    let mut out = Vec::with_capacity(n * n * n);
    for la in lam_alpha {
        for l1 in lam_beta1 {
            for l2 in lam_beta2 {
                out.push(psi * la - psi * (l1 + l2));
            }
        }
    }
    out
}

pub fn assemble_precond(op: &ConstraintOperator, rho: f64, delta: f64, gamma: f64) -> Result<CirculantPreconditioner> {
    for (name, v) in [("rho", rho), ("delta", delta), ("gamma", gamma)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter { name, reason: format!("{v} must be positive") });
        }
    }
    let psi = op.psi();
    let lam_b = multilevel_eigs(
        &tchan(op.caputo()).eigs,
        &tchan(op.riesz1()).eigs,
        &tchan(op.riesz2()).eigs,
        psi,
    );
    CirculantPreconditioner::from_lam_b(op.n(), lam_b, rho, delta, gamma, psi)
}

fn schur_eigs(lam_b: &[Complex64], rho: f64, delta: f64, gamma: f64, psi: f64) -> Vec<f64> {
    let m2 = schur_middle_scalar(rho, delta, gamma, psi);
    let base = rho * (1.0 + 1.0 / delta);
    lam_b.iter().map(|l| base + l.norm_sqr() / m2).collect()
}

fn inverse_scaled(lam_s: &[f64]) -> Vec<f64> {
    let len = lam_s.len() as f64;
    lam_s.iter().map(|l| 1.0 / (len * l)).collect()
}

impl CirculantPreconditioner {
    /// Builds a preconditioner from an explicit `C3(B)` spectrum.
    pub fn from_lam_b(n: usize, lam_b: Vec<Complex64>, rho: f64, delta: f64, gamma: f64, psi: f64) -> Result<Self> {
        check_len(n * n * n, lam_b.len())?;
        let lam_s = schur_eigs(&lam_b, rho, delta, gamma, psi);
        let inv_lam = inverse_scaled(&lam_s);
        Ok(CirculantPreconditioner { n, lam_b, lam_s, rho, delta, gamma, psi, inv_lam, fft: Fft3::new(n) })
    }

    /// Builds a preconditioner directly from the `S~` spectrum.
    pub fn from_lam_s(n: usize, lam_s: Vec<f64>) -> Result<Self> {
        check_len(n * n * n, lam_s.len())?;
        if lam_s.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Parameter { name: "lam_s", reason: "eigenvalues must be positive".into() });
        }
        let lam_b = vec![Complex64::default(); lam_s.len()];
        Ok(CirculantPreconditioner {
            n,
            lam_b,
            inv_lam: inverse_scaled(&lam_s),
            lam_s,
            rho: f64::NAN,
            delta: f64::NAN,
            gamma: f64::NAN,
            psi: f64::NAN,
            fft: Fft3::new(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.lam_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lam_s.is_empty()
    }

    pub fn workspace(&self) -> PrecondWorkspace {
        PrecondWorkspace { buf: vec![Complex64::default(); self.len()], fft: self.fft.workspace() }
    }

    /// `out = S~^{-1} r`.
    pub fn solve_into(&self, r: &[f64], out: &mut [f64], ws: &mut PrecondWorkspace) -> Result<()> {
        check_len(self.len(), r.len())?;
        check_len(self.len(), out.len())?;
        let n = self.n;
        let n2 = n * n;
        let plans = self.fft.plans();
        let PrecondWorkspace { buf, fft: Fft3Workspace { strip, scratch } } = ws;
        // Three sweeps over memory. Time lines first, gathered straight from
        // the real input; then each time slab goes through both space axes,
        // the spectral division and back while it sits in cache; then the
        // inverse time lines, written out as reals.
        for i in 0..n {
            for j0 in (0..n).step_by(STRIP) {
                let w = STRIP.min(n - j0);
                let lines = &mut strip[..w * n];
                let at = i * n + j0;
                gather_strip(&r[at..], n2, w, n, lines, |d, s| *d = Complex64::new(s, 0.0));
                plans.forward.process_with_scratch(lines, scratch);
                scatter_strip(lines, w, n, &mut buf[at..], n2, |d, s| *d = s);
            }
        }
        for (k, slab) in buf.chunks_exact_mut(n2).enumerate() {
            plans.forward.process_with_scratch(slab, scratch);
            let inv = &self.inv_lam[k * n2..(k + 1) * n2];
            for j0 in (0..n).step_by(STRIP) {
                let w = STRIP.min(n - j0);
                let lines = &mut strip[..w * n];
                gather_strip(&slab[j0..], n, w, n, lines, |d, s| *d = s);
                plans.forward.process_with_scratch(lines, scratch);
                // line c of the strip runs over x1 at x2 index j0 + c
                for i in 0..n {
                    for (c, v) in inv[i * n + j0..i * n + j0 + w].iter().enumerate() {
                        lines[c * n + i] *= v;
                    }
                }
                plans.inverse.process_with_scratch(lines, scratch);
                scatter_strip(lines, w, n, &mut slab[j0..], n, |d, s| *d = s);
            }
            plans.inverse.process_with_scratch(slab, scratch);
        }
        for i in 0..n {
            for j0 in (0..n).step_by(STRIP) {
                let w = STRIP.min(n - j0);
                let lines = &mut strip[..w * n];
                let at = i * n + j0;
                gather_strip(&buf[at..], n2, w, n, lines, |d, s| *d = s);
                plans.inverse.process_with_scratch(lines, scratch);
                scatter_strip(lines, w, n, &mut out[at..], n2, |d, s: Complex64| *d = s.re);
            }
        }
        Ok(())
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.solve_into(r, &mut out, &mut self.workspace())?;
        Ok(out)
    }
}

/// Free-function form of [`CirculantPreconditioner::solve`].
pub fn precond_solve(pc: &CirculantPreconditioner, r: &[f64]) -> Result<Vec<f64>> {
    pc.solve(r)
}

/// Fourier coefficients of the truncated symbol of `B`, split by axis.
///
/// `time[k]` multiplies `exp(i k theta3)` for `k >= 1`; `space[a][m]`
/// multiplies `exp(i (m - (K - 1)) theta_{a+1})` for the non-zero offsets;
/// `origin` is the combined constant coefficient.
#[derive(Debug, Clone)]
struct SymbolCoefficients {
    origin: f64,
    time: Vec<f64>,
    space: [Vec<(isize, f64)>; 2],
}

fn riesz_scale(nu: f64, beta: f64) -> f64 {
    -nu / (2.0 * (beta * std::f64::consts::FRAC_PI_2).cos())
}

fn symbol_coefficients(
    scals: &ScalingConstants,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    terms: usize,
) -> Result<SymbolCoefficients> {
    if terms < 2 {
        return Err(Error::Parameter { name: "K", reason: format!("truncation length {terms} must be at least 2") });
    }
    let ga = frac_coeffs(alpha, terms)?;
    let mut origin = scals.nu3 * ga[0];
    let time: Vec<f64> = ga.iter().skip(1).map(|g| scals.nu3 * g).collect();
    let mut space: [Vec<(isize, f64)>; 2] = [Vec::new(), Vec::new()];
    for (axis, (nu, beta)) in [(scals.nu1, beta1), (scals.nu2, beta2)].into_iter().enumerate() {
        let gb = frac_coeffs(beta, terms)?;
        let s = riesz_scale(nu, beta);
        // truncated series: k = -1 ..= K - 2, each term g_{k+1} (e^{ik} + e^{-ik})
        let g_at = |k: isize| -> f64 {
            if (-1..=terms as isize - 2).contains(&k) {
                gb[(k + 1) as usize]
            } else {
                0.0
            }
        };
        origin -= s * 2.0 * g_at(0);
        let reach = terms as isize - 1;
        for m in -reach..=reach {
            if m != 0 {
                space[axis].push((m, -s * (g_at(m) + g_at(-m))));
            }
        }
    }
    Ok(SymbolCoefficients { origin, time, space })
}

/// Truncated generating symbol of `B` at `theta = (theta1, theta2, theta3)`,
/// with both series cut at `terms` terms.
pub fn symbol_eval(
    theta: [f64; 3],
    scals: &ScalingConstants,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    terms: usize,
) -> Result<Complex64> {
    let c = symbol_coefficients(scals, alpha, beta1, beta2, terms)?;
    let mut v = Complex64::new(c.origin, 0.0);
    for (k, a) in c.time.iter().enumerate() {
        v += a * Complex64::from_polar(1.0, (k + 1) as f64 * theta[2]);
    }
    for (axis, coeffs) in c.space.iter().enumerate() {
        for &(m, a) in coeffs {
            v += a * Complex64::from_polar(1.0, m as f64 * theta[axis]);
        }
    }
    Ok(v)
}

/// Absolute coefficient sum of the truncated symbol next to the closed-form
/// Wiener-class bound `2 nu3 g0 + 2 nu1 beta1 / |cos| + 2 nu2 beta2 / |cos|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerCheck {
    pub abs_sum: f64,
    pub bound: f64,
}

impl WienerCheck {
    pub fn holds(&self) -> bool {
        self.abs_sum <= self.bound
    }
}

pub fn wiener_check(scals: &ScalingConstants, alpha: f64, beta1: f64, beta2: f64, terms: usize) -> Result<WienerCheck> {
    let c = symbol_coefficients(scals, alpha, beta1, beta2, terms)?;
    let abs_sum = c.origin.abs()
        + c.time.iter().map(|v| v.abs()).sum::<f64>()
        + c.space.iter().flatten().map(|(_, v)| v.abs()).sum::<f64>();
    let cos = |b: f64| (b * std::f64::consts::FRAC_PI_2).cos().abs();
    let bound = 2.0 * scals.nu3 + 2.0 * scals.nu1 * beta1 / cos(beta1) + 2.0 * scals.nu2 * beta2 / cos(beta2);
    Ok(WienerCheck { abs_sum, bound })
}

/// Spectrum summary of the preconditioned normal-equations matrix.
#[derive(Debug, Clone)]
pub struct ClusteringReport {
    pub n: usize,
    /// Ascending eigenvalues of `S~^{-1} S`.
    pub eigenvalues: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `(eps, fraction of eigenvalues in [1 - eps, 1 + eps])`.
    pub fractions: Vec<(f64, f64)>,
}

impl ClusteringReport {
    pub fn all_positive(&self) -> bool {
        self.eigenvalues.iter().all(|&v| v > 0.0)
    }
}

/// Default largest grid size for dense clustering diagnostics.
pub const CLUSTERING_CAP: usize = 6;

/// Dense eigen-analysis of `S~^{-1} S` for the objective weights of the
/// grid. Observational only.
pub fn clustering_report(
    op: &ConstraintOperator,
    pc: &CirculantPreconditioner,
    gamma: f64,
    n_max: usize,
) -> Result<ClusteringReport> {
    let n = op.n();
    if n > n_max || n > crate::oracle::DENSE_CAP {
        return Err(Error::TooLarge { n, cap: n_max.min(crate::oracle::DENSE_CAP) });
    }
    let weights = crate::problem::objective_weights(&op.grid(), gamma)?;
    let s = crate::oracle::dense_normal_matrix(op, &weights, pc.rho, pc.delta)?;
    let s_tilde = crate::oracle::dense_precond_matrix(op, pc.rho, pc.delta, gamma)?;
    let eigenvalues = crate::oracle::generalized_sym_eigs(&s, &s_tilde)?;
    let len = eigenvalues.len() as f64;
    let fractions = [0.1, 0.3]
        .into_iter()
        .map(|eps| {
            let inside = eigenvalues.iter().filter(|&&v| (v - 1.0).abs() <= eps).count();
            (eps, inside as f64 / len)
        })
        .collect();
    Ok(ClusteringReport {
        n,
        min: eigenvalues.first().copied().unwrap_or(f64::NAN),
        max: eigenvalues.last().copied().unwrap_or(f64::NAN),
        eigenvalues,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structured::build_caputo;

    #[test]
    fn tchan_examples() {
        let c = tchan(&ToeplitzSpec1D::identity(5));
        assert_eq!(c.first_col, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(c.eigs.iter().all(|e| (e - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let c = tchan(&build_caputo(0.5, 3, 1.0).unwrap());
        assert_eq!(c.first_col[0], 1.0);
        assert!((c.first_col[1] + 1.0 / 3.0).abs() < 1e-15);
        assert!((c.first_col[2] + 0.125 / 3.0).abs() < 1e-15);

        let t = ToeplitzSpec1D::new(vec![2.0, 5.0], vec![2.0, -1.0]).unwrap();
        assert_eq!(tchan(&t).first_col, vec![2.0, 2.0]);
    }

    #[test]
    fn eig_examples() {
        let ones = circulant_eigs(&[1.0, 0.0, 0.0, 0.0]);
        assert!(ones.iter().all(|e| (e - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let shift = circulant_eigs(&[0.0, 1.0, 0.0, 0.0]);
        let expect = [(1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 1.0)];
        for (e, (re, im)) in shift.iter().zip(expect) {
            assert!((e - Complex64::new(re, im)).norm() < 1e-15);
        }
        let a = 0.7;
        let flat = circulant_eigs(&[a; 4]);
        assert!((flat[0] - Complex64::new(4.0 * a, 0.0)).norm() < 1e-15);
        assert!(flat[1..].iter().all(|e| e.norm() < 1e-15));
    }

    #[test]
    fn zero_operator_schur() {
        let lam_b = vec![Complex64::default(); 8];
        let pc = CirculantPreconditioner::from_lam_b(2, lam_b, 1.618, 2.0, 1e-4, 0.1).unwrap();
        assert!(pc.lam_s.iter().all(|&v| (v - 1.618 * 1.5).abs() < 1e-15));
    }

    #[test]
    fn solve_with_flat_spectrum() {
        let r: Vec<f64> = (0..27).map(|i| (i as f64).sin()).collect();
        let pc = CirculantPreconditioner::from_lam_s(3, vec![1.0; 27]).unwrap();
        let z = pc.solve(&r).unwrap();
        assert!(z.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-14));
        let pc = CirculantPreconditioner::from_lam_s(3, vec![4.0; 27]).unwrap();
        let z = pc.solve(&r).unwrap();
        assert!(z.iter().zip(&r).all(|(a, b)| (a - b / 4.0).abs() < 1e-14));
        assert!(pc.solve(&r[1..]).is_err());
    }

    #[test]
    fn symbol_needs_two_terms() {
        let s = ScalingConstants { psi: 1.0, nu1: 1.0, nu2: 1.0, nu3: 1.0 };
        assert!(symbol_eval([0.0; 3], &s, 0.5, 1.5, 1.5, 1).is_err());
    }
}
