//! Matrix-free Toeplitz operators.
//!
//! A unilevel Toeplitz matrix is applied through its circulant embedding of
//! length `2n`; the 3-level constraint operator
//! `B = psi (C_alpha (x) I (x) I - I (x) L_beta1 (x) I - I (x) I (x) L_beta2)`
//! is applied mode-wise, one batch of 1-D Toeplitz products per axis.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::fft::{gather_strip, scatter_strip, FftPair, STRIP};
use crate::problem::{frac_coeffs, scaling, Grid, ProblemSpec};

/// Smallest accepted `|cos(beta pi / 2)|` for a Riesz order.
pub const RIESZ_COS_FLOOR: f64 = 1e-6;

/// Unilevel Toeplitz matrix `T[i][j] = t_{i-j}` given by its first column
/// `(t_0, t_1, ...)` and first row `(t_0, t_{-1}, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSpec1D {
    pub col: Vec<f64>,
    pub row: Vec<f64>,
}

impl ToeplitzSpec1D {
    pub fn new(col: Vec<f64>, row: Vec<f64>) -> Result<Self> {
        check_len(col.len(), row.len())?;
        if col.is_empty() {
            return Err(Error::Parameter { name: "col", reason: "empty Toeplitz spec".into() });
        }
        if col[0] != row[0] {
            return Err(Error::Parameter {
                name: "row",
                reason: format!("diagonal mismatch: col[0] = {} but row[0] = {}", col[0], row[0]),
            });
        }
        Ok(ToeplitzSpec1D { col, row })
    }

    pub fn identity(n: usize) -> Self {
        let mut col = vec![0.0; n];
        col[0] = 1.0;
        ToeplitzSpec1D { row: col.clone(), col }
    }

    pub fn len(&self) -> usize {
        self.col.len()
    }

    pub fn is_empty(&self) -> bool {
        self.col.is_empty()
    }

    /// Coefficient `t_k` for `-(n-1) <= k <= n-1`.
    pub fn coeff(&self, k: isize) -> f64 {
        if k >= 0 {
            self.col[k as usize]
        } else {
            self.row[(-k) as usize]
        }
    }

    pub fn transposed(&self) -> Self {
        ToeplitzSpec1D { col: self.row.clone(), row: self.col.clone() }
    }

    /// Row-major dense copy.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.coeff(i as isize - j as isize)).collect())
            .collect()
    }
}

/// Caputo matrix: lower-triangular Toeplitz with first column `g_k^alpha / h_t^alpha`.
pub fn build_caputo(alpha: f64, n: usize, h_t: f64) -> Result<ToeplitzSpec1D> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter { name: "alpha", reason: format!("{alpha} is outside (0, 1)") });
    }
    check_step(n, h_t)?;
    let scale = h_t.powf(-alpha);
    let col: Vec<f64> = frac_coeffs(alpha, n)?.into_iter().map(|g| g * scale).collect();
    let mut row = vec![0.0; n];
    row[0] = col[0];
    Ok(ToeplitzSpec1D { col, row })
}

/// Symmetrized Riesz matrix
/// `-(L + L^T) / (2 cos(beta pi / 2))`, where `L` is the 1-shifted
/// Grünwald–Letnikov matrix with first column `(g_1, ..., g_n) / h^beta`
/// and first row `(g_1, g_0, 0, ...) / h^beta`.
pub fn build_riesz(beta: f64, n: usize, h_x: f64) -> Result<ToeplitzSpec1D> {
    if !(beta > 1.0 && beta < 2.0) {
        return Err(Error::Parameter { name: "beta", reason: format!("{beta} is outside (1, 2)") });
    }
    check_step(n, h_x)?;
    let cos = (beta * std::f64::consts::FRAC_PI_2).cos();
    if cos.abs() < RIESZ_COS_FLOOR {
        return Err(Error::IllConditioned { beta, cos, floor: RIESZ_COS_FLOOR });
    }
    let factor = -1.0 / (2.0 * cos) / h_x.powf(beta);
    let g = frac_coeffs(beta, n + 1)?;
    // left-sided matrix: t_k = g_{k+1} for k >= -1
    let left = |k: isize| -> f64 {
        if k >= -1 {
            g[(k + 1) as usize]
        } else {
            0.0
        }
    };
    let col: Vec<f64> = (0..n as isize).map(|k| factor * (left(k) + left(-k))).collect();
    Ok(ToeplitzSpec1D { row: col.clone(), col })
}

fn check_step(n: usize, h: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter { name: "n", reason: "must be at least 1".into() });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter { name: "h", reason: format!("{h} must be positive") });
    }
    Ok(())
}

/// A Toeplitz matrix with the spectra of its `2n` circulant embedding and of
/// the embedding of its transpose precomputed.
#[derive(Debug, Clone)]
pub struct EmbeddedToeplitz {
    spec: ToeplitzSpec1D,
    plans: FftPair,
    eig: Vec<Complex64>,
    eig_t: Vec<Complex64>,
}

/// Per-call buffers for [`EmbeddedToeplitz`] products.
#[derive(Debug, Clone)]
pub struct LineWorkspace {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl EmbeddedToeplitz {
    pub fn new(spec: ToeplitzSpec1D) -> Self {
        let n = spec.len();
        let m = 2 * n;
        let plans = FftPair::new(m);
        let embed = |s: &ToeplitzSpec1D| {
            // (t_0, ..., t_{n-1}, 0, t_{-(n-1)}, ..., t_{-1})
            let mut c = vec![Complex64::default(); m];
            for k in 0..n {
                c[k] = Complex64::new(s.col[k], 0.0);
            }
            for k in 1..n {
                c[m - k] = Complex64::new(s.row[k], 0.0);
            }
            plans.forward.process(&mut c);
            // fold in the inverse normalization once
            let inv = 1.0 / m as f64;
            c.iter_mut().for_each(|v| *v *= inv);
            c
        };
        let eig = embed(&spec);
        let eig_t = embed(&spec.transposed());
        EmbeddedToeplitz { spec, plans, eig, eig_t }
    }

    pub fn spec(&self) -> &ToeplitzSpec1D {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    pub fn workspace(&self) -> LineWorkspace {
        LineWorkspace {
            buf: vec![Complex64::default(); self.plans.len],
            scratch: vec![Complex64::default(); self.plans.scratch_len()],
        }
    }

    /// Applies `T` (or `T^T`) to the real and imaginary parts of `ws.buf[..n]`
    /// simultaneously; entries `n..2n` are overwritten.
    fn apply_packed(&self, ws: &mut LineWorkspace, transpose: bool) {
        let n = self.len();
        ws.buf[n..].iter_mut().for_each(|v| *v = Complex64::default());
        self.plans.forward.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        let eig = if transpose { &self.eig_t } else { &self.eig };
        ws.buf.iter_mut().zip(eig).for_each(|(v, e)| *v *= e);
        self.plans.inverse.process_with_scratch(&mut ws.buf, &mut ws.scratch);
    }

    /// `out = T x` (or `T^T x`). Returns the largest imaginary residue left
    /// by the transform pair, relative to the largest output magnitude.
    pub fn matvec_into(
        &self,
        x: &[f64],
        out: &mut [f64],
        transpose: bool,
        ws: &mut LineWorkspace,
    ) -> Result<f64> {
        let n = self.len();
        check_len(n, x.len())?;
        check_len(n, out.len())?;
        for (b, &v) in ws.buf.iter_mut().zip(x) {
            *b = Complex64::new(v, 0.0);
        }
        self.apply_packed(ws, transpose);
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for (o, b) in out.iter_mut().zip(&ws.buf) {
            *o = b.re;
            max_re = max_re.max(b.re.abs());
            max_im = max_im.max(b.im.abs());
        }
        Ok(if max_re > 0.0 { max_im / max_re } else { max_im })
    }

    /// Accumulates `coef * T` (or `T^T`) applied to every length-`n` row of
    /// `x` into the matching row of `out`. Two rows share one complex
    /// transform.
    fn accumulate_rows(&self, x: &[f64], out: &mut [f64], coef: f64, transpose: bool, ws: &mut LineWorkspace) {
        let n = self.len();
        let mut xs = x.chunks_exact(n);
        let mut outs = out.chunks_exact_mut(n);
        while let (Some(a), Some(oa)) = (xs.next(), outs.next()) {
            let b = xs.next();
            for m in 0..n {
                ws.buf[m] = Complex64::new(a[m], b.map_or(0.0, |b| b[m]));
            }
            self.apply_packed(ws, transpose);
            for (o, v) in oa.iter_mut().zip(&ws.buf) {
                *o += coef * v.re;
            }
            if b.is_some() {
                let ob = outs.next().expect("rows of x and out pair up");
                for (o, v) in ob.iter_mut().zip(&ws.buf) {
                    *o += coef * v.im;
                }
            }
        }
    }
}

/// Dense-free `T x` for a single Toeplitz spec.
pub fn toeplitz_matvec(spec: &ToeplitzSpec1D, x: &[f64], transpose: bool) -> Result<Vec<f64>> {
    let op = EmbeddedToeplitz::new(spec.clone());
    let mut ws = op.workspace();
    let mut out = vec![0.0; spec.len()];
    op.matvec_into(x, &mut out, transpose, &mut ws)?;
    Ok(out)
}

/// The scaled FDE constraint operator `B = psi D`.
#[derive(Debug, Clone)]
pub struct ConstraintOperator {
    n: usize,
    psi: f64,
    caputo: EmbeddedToeplitz,
    riesz1: EmbeddedToeplitz,
    riesz2: EmbeddedToeplitz,
}

/// Scratch space for [`ConstraintOperator::apply_into`].
#[derive(Debug, Clone)]
pub struct ApplyWorkspace {
    line: LineWorkspace,
    /// Strips of lines gathered from the non-contiguous axes.
    strip_in: Vec<f64>,
    strip_out: Vec<f64>,
}

impl ConstraintOperator {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let grid = spec.grid();
        let scals = scaling(spec, &grid)?;
        let caputo = build_caputo(spec.alpha, grid.n, grid.h_t)?;
        let riesz1 = build_riesz(spec.beta1, grid.n, grid.h_x)?;
        let riesz2 = build_riesz(spec.beta2, grid.n, grid.h_x)?;
        Self::from_parts(caputo, riesz1, riesz2, scals.psi)
    }

    /// Assembles from explicit 1-D factors; all three must share one size.
    pub fn from_parts(
        caputo: ToeplitzSpec1D,
        riesz1: ToeplitzSpec1D,
        riesz2: ToeplitzSpec1D,
        psi: f64,
    ) -> Result<Self> {
        let n = caputo.len();
        check_len(n, riesz1.len())?;
        check_len(n, riesz2.len())?;
        Ok(ConstraintOperator {
            n,
            psi,
            caputo: EmbeddedToeplitz::new(caputo),
            riesz1: EmbeddedToeplitz::new(riesz1),
            riesz2: EmbeddedToeplitz::new(riesz2),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n)
    }

    pub fn caputo(&self) -> &ToeplitzSpec1D {
        self.caputo.spec()
    }

    pub fn riesz1(&self) -> &ToeplitzSpec1D {
        self.riesz1.spec()
    }

    pub fn riesz2(&self) -> &ToeplitzSpec1D {
        self.riesz2.spec()
    }

    pub fn workspace(&self) -> ApplyWorkspace {
        let mut line = self.caputo.workspace();
        let scratch = [&self.riesz1, &self.riesz2]
            .iter()
            .map(|op| op.plans.scratch_len())
            .fold(line.scratch.len(), usize::max);
        line.scratch.resize(scratch, Complex64::default());
        let len = STRIP * self.n;
        ApplyWorkspace { line, strip_in: vec![0.0; len], strip_out: vec![0.0; len] }
    }

    /// `out = B x`, or `B^T x` when `adjoint` is set.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64], adjoint: bool, ws: &mut ApplyWorkspace) -> Result<()> {
        let len = self.len();
        check_len(len, x.len())?;
        check_len(len, out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        let psi = self.psi;
        let n = self.n;
        let n2 = n * n;
        // x2 lines are the contiguous rows of the cube
        self.riesz2.accumulate_rows(x, out, -psi, adjoint, &mut ws.line);
        // x1 lines sit n apart within a slab, time lines n^2 apart; both are
        // gathered a strip of adjacent lines at a time
        for (op, stride, coef) in [(&self.riesz1, n, -psi), (&self.caputo, n2, psi)] {
            for o in 0..n {
                let base = if stride == n { o * n2 } else { o * n };
                for j0 in (0..n).step_by(STRIP) {
                    let w = STRIP.min(n - j0);
                    let (lines, acc) = (&mut ws.strip_in[..w * n], &mut ws.strip_out[..w * n]);
                    gather_strip(&x[base + j0..], stride, w, n, lines, |d, s| *d = s);
                    acc.iter_mut().for_each(|v| *v = 0.0);
                    op.accumulate_rows(lines, acc, coef, adjoint, &mut ws.line);
                    scatter_strip(acc, w, n, &mut out[base + j0..], stride, |d, s| *d += s);
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64], adjoint: bool) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(x, &mut out, adjoint, &mut self.workspace())?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn caputo_examples() {
        let c = build_caputo(0.5, 3, 1.0).unwrap();
        assert!(close(&c.col, &[1.0, -0.5, -0.125], 1e-15));
        assert_eq!(c.row, vec![1.0, 0.0, 0.0]);
        let c = build_caputo(0.3, 1, 0.25).unwrap();
        assert!((c.col[0] - 0.25f64.powf(-0.3)).abs() < 1e-15);
        let c = build_caputo(0.7, 2, 0.5).unwrap();
        let s = 2f64.powf(0.7);
        assert!(close(&c.col, &[s, -0.7 * s], 1e-14));
        assert!((c.col[0] - 1.624_50).abs() < 1e-5 && (c.col[1] + 1.137_15).abs() < 1e-5);
        assert!(build_caputo(1.2, 3, 1.0).is_err());
    }

    #[test]
    fn riesz_examples() {
        let r = build_riesz(1.3, 1, 1.0).unwrap();
        let expect = 1.3 / (0.65 * std::f64::consts::PI).cos();
        assert!((r.col[0] - expect).abs() < 1e-14);
        assert!((r.col[0] + 2.8635).abs() < 1e-4);

        // hand-assembled 2x2: L = [[-1.5, 1], [0.375, -1.5]], factor 1/sqrt(2)
        let r = build_riesz(1.5, 2, 1.0).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&r.col, &[-3.0 * f, 1.375 * f], 1e-14));
        assert!((r.col[0] + 2.121_32).abs() < 1e-5 && (r.col[1] - 0.972_27).abs() < 1e-5);

        for n in 1..10 {
            let r = build_riesz(1.7, n, 0.1).unwrap();
            assert_eq!(r.col, r.row);
        }
    }

    #[test]
    fn riesz_near_one_rejected() {
        assert!(matches!(build_riesz(1.0 + 1e-8, 4, 0.1), Err(Error::IllConditioned { .. })));
        assert!(build_riesz(1.0, 4, 0.1).is_err());
        assert!(build_riesz(1.05, 4, 0.1).is_ok());
    }

    #[test]
    fn matvec_examples() {
        let x = [0.3, -1.2, 4.0, 2.5];
        assert!(close(&toeplitz_matvec(&ToeplitzSpec1D::identity(4), &x, false).unwrap(), &x, 1e-15));
        let t = ToeplitzSpec1D::new(vec![2.0, 1.0], vec![2.0, 3.0]).unwrap();
        assert!(close(&toeplitz_matvec(&t, &[1.0, 1.0], false).unwrap(), &[5.0, 3.0], 1e-14));
        assert!(close(&toeplitz_matvec(&t, &[1.0, 1.0], true).unwrap(), &[3.0, 5.0], 1e-14));
        assert!(toeplitz_matvec(&t, &[1.0], false).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ToeplitzSpec1D::new(vec![1.0, 2.0], vec![1.5, 0.0]).is_err());
        assert!(ToeplitzSpec1D::new(vec![1.0], vec![1.0, 0.0]).is_err());
        assert!(ToeplitzSpec1D::new(vec![], vec![]).is_err());
    }

    #[test]
    fn scalar_operator() {
        let spec = ProblemSpec { n: 1, ..Default::default() };
        let op = ConstraintOperator::new(&spec).unwrap();
        let h = 0.5;
        let psi = scaling(&spec, &spec.grid()).unwrap().psi;
        let l = build_riesz(1.3, 1, h).unwrap().col[0];
        let expect = psi * (h.powf(-0.7) - 2.0 * l);
        let got = op.apply(&[1.0], false).unwrap()[0];
        assert!((got - expect).abs() < 1e-14 * expect.abs());
    }
}
