use crate::error::{check_len, Error, Result};

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||rhs - A x||_2 / ||rhs||_2` at exit (recursively updated residual).
    pub rel_residual: f64,
    /// False when the iteration cap was reached first.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for an SPD operator.
///
/// `apply(x, out)` writes `A x`, `precond(r, out)` writes `M^{-1} r`. Starts
/// from `x0` when given. Stops once the relative residual is at most `tol`
/// or after `max_iter` iterations.
pub fn pcg<A, P>(
    mut apply: A,
    mut precond: P,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let len = rhs.len();
    let rhs_norm = dot(rhs, rhs).sqrt();
    if !rhs_norm.is_finite() {
        return Err(Error::Numerical("non-finite right-hand side".into()));
    }
    if rhs_norm == 0.0 {
        return Ok(PcgOutcome { x: vec![0.0; len], iterations: 0, rel_residual: 0.0, converged: true });
    }

    let mut x = match x0 {
        Some(x0) => {
            check_len(len, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; len],
    };
    let mut r = rhs.to_vec();
    let mut q = vec![0.0; len];
    if x0.is_some() {
        apply(&x, &mut q)?;
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= qi);
    }
    let mut res = dot(&r, &r).sqrt() / rhs_norm;
    if res <= tol {
        return Ok(PcgOutcome { x, iterations: 0, rel_residual: res, converged: true });
    }

    let mut z = vec![0.0; len];
    precond(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < max_iter {
        apply(&p, &mut q)?;
        let pq = dot(&p, &q);
        if !(pq.is_finite() && rz.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value in PCG at iteration {iterations}")));
        }
        if pq <= 0.0 {
            return Err(Error::Numerical(format!("operator not positive definite (p'Ap = {pq:e})")));
        }
        let step = rz / pq;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= step * qi);
        iterations += 1;
        res = dot(&r, &r).sqrt() / rhs_norm;
        if !res.is_finite() {
            return Err(Error::Numerical("non-finite PCG residual".into()));
        }
        if res <= tol {
            return Ok(PcgOutcome { x, iterations, rel_residual: res, converged: true });
        }
        precond(&r, &mut z)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok(PcgOutcome { x, iterations, rel_residual: res, converged: false })
}
