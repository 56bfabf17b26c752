//! Discretized problem data: grid, Grünwald–Letnikov coefficients, scaling
//! constants, trapezoidal objective weights, the desired state and the
//! misfit metric.
//!
//! All fields share one lexicographic layout: time is the outermost index,
//! then `x1`, then `x2` (innermost). Node `(k, i, j)` with `k, i, j` in
//! `0..n` lives at `k * n * n + i * n + j` and sits at
//! `(t, x1, x2) = ((k + 1) h, (i + 1) h, (j + 1) h)`.

use crate::error::{Error, Result};

/// A closed interval whose ends may be absent (unbounded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds { lower: None, upper: None };

    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Self {
        Bounds { lower, upper }
    }

    /// Symmetric box `[-c, c]`.
    pub fn symmetric(c: f64) -> Self {
        Bounds { lower: Some(-c), upper: Some(c) }
    }

    /// Builds bounds from floats, mapping infinities to "unbounded".
    pub fn from_f64(lower: f64, upper: f64) -> Self {
        let lo = if lower == f64::NEG_INFINITY { None } else { Some(lower) };
        let hi = if upper == f64::INFINITY { None } else { Some(upper) };
        Bounds { lower: lo, upper: hi }
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }

    /// Projection onto the interval. Values equal to a bound map to the bound.
    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        let mut v = x;
        if let Some(lo) = self.lower {
            if v <= lo {
                v = lo;
            }
        }
        if let Some(hi) = self.upper {
            if v >= hi {
                v = hi;
            }
        }
        v
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower.map_or(true, |lo| x >= lo) && self.upper.map_or(true, |hi| x <= hi)
    }

    /// Multiplies both ends by a positive factor.
    pub fn scaled(&self, factor: f64) -> Bounds {
        debug_assert!(factor > 0.0);
        Bounds {
            lower: self.lower.map(|v| v * factor),
            upper: self.upper.map(|v| v * factor),
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        for v in [self.lower, self.upper].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Parameter {
                    name,
                    reason: format!("bound {v} must be finite or absent"),
                });
            }
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if !(lo < hi) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("lower bound {lo} must be below upper bound {hi}"),
                });
            }
        }
        Ok(())
    }
}

/// Continuous problem parameters on `(0,1)^2 x (0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Time-fractional (Caputo) order, in `(0, 1)`.
    pub alpha: f64,
    /// Space-fractional (Riesz) order along `x1`, in `(1, 2)`.
    pub beta1: f64,
    /// Space-fractional (Riesz) order along `x2`, in `(1, 2)`.
    pub beta2: f64,
    /// Control regularization weight.
    pub gamma: f64,
    /// Grid points per dimension (space and time).
    pub n: usize,
    pub y_bounds: Bounds,
    pub u_bounds: Bounds,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            alpha: 0.7,
            beta1: 1.3,
            beta2: 1.3,
            gamma: 1e-4,
            n: 8,
            y_bounds: Bounds::UNBOUNDED,
            u_bounds: Bounds::UNBOUNDED,
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter {
                name: "alpha",
                reason: format!("{} is outside (0, 1)", self.alpha),
            });
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(beta > 1.0 && beta < 2.0) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("{beta} is outside (1, 2)"),
                });
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter {
                name: "gamma",
                reason: format!("{} must be positive", self.gamma),
            });
        }
        if self.n == 0 {
            return Err(Error::Parameter { name: "n", reason: "must be at least 1".into() });
        }
        self.y_bounds.validate("y_bounds")?;
        self.u_bounds.validate("u_bounds")?;
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n)
    }
}

/// Uniform space-time grid with `n` interior points per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h_x: f64,
    pub h_t: f64,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        let h = 1.0 / (n as f64 + 1.0);
        Grid { n, h_x: h, h_t: h }
    }

    /// Unknowns per field, `n^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.n + i) * self.n + j
    }

    /// `(t, x1, x2)` of the node stored at `idx`.
    pub fn coords(&self, idx: usize) -> (f64, f64, f64) {
        let n = self.n;
        let j = idx % n;
        let i = (idx / n) % n;
        let k = idx / (n * n);
        (
            (k + 1) as f64 * self.h_t,
            (i + 1) as f64 * self.h_x,
            (j + 1) as f64 * self.h_x,
        )
    }
}

/// Constants of the `psi`-scaled constraint `B = psi * D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConstants {
    pub psi: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
}

/// Diagonal trapezoidal weights of the discretized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveWeights {
    pub diag_j: Vec<f64>,
    pub j1_scale: f64,
    pub j2_scale: f64,
}

impl ObjectiveWeights {
    /// Diagonal of `J1 = J`.
    pub fn j1(&self) -> impl Iterator<Item = f64> + '_ {
        self.diag_j.iter().map(move |&w| w * self.j1_scale)
    }

    /// Diagonal of `J2 = gamma J`.
    pub fn j2(&self) -> impl Iterator<Item = f64> + '_ {
        self.diag_j.iter().map(move |&w| w * self.j2_scale)
    }
}

fn check_fractional_order(order: f64) -> Result<()> {
    let ok = (order > 0.0 && order < 1.0) || (order > 1.0 && order < 2.0);
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter {
            name: "order",
            reason: format!("{order} is outside (0,1) U (1,2)"),
        })
    }
}

/// Grünwald–Letnikov weights `g_0, ..., g_{count-1}` of a fractional order,
/// generated by `g_k = (1 - (order + 1) / k) g_{k-1}`, `g_0 = 1`.
pub fn frac_coeffs(order: f64, count: usize) -> Result<Vec<f64>> {
    check_fractional_order(order)?;
    if count == 0 {
        return Err(Error::Parameter { name: "count", reason: "must be at least 1".into() });
    }
    let mut g = Vec::with_capacity(count);
    g.push(1.0);
    for k in 1..count {
        let prev = g[k - 1];
        g.push((1.0 - (order + 1.0) / k as f64) * prev);
    }
    Ok(g)
}

pub fn scaling(spec: &ProblemSpec, grid: &Grid) -> Result<ScalingConstants> {
    spec.validate()?;
    let ht_a = grid.h_t.powf(spec.alpha);
    let hx_b1 = grid.h_x.powf(spec.beta1);
    let hx_b2 = grid.h_x.powf(spec.beta2);
    let psi = ht_a.min(hx_b1).min(hx_b2);
    Ok(ScalingConstants {
        psi,
        nu1: psi / hx_b1,
        nu2: psi / hx_b2,
        nu3: psi / ht_a,
    })
}

/// The built-in desired state `10 cos(10 x1) sin(x1 x2) (1 - exp(-5 t))`.
pub fn desired_state_fn(x1: f64, x2: f64, t: f64) -> f64 {
    10.0 * (10.0 * x1).cos() * (x1 * x2).sin() * (1.0 - (-5.0 * t).exp())
}

/// Samples the built-in desired state on the grid.
pub fn desired_state(grid: &Grid) -> Vec<f64> {
    sample(grid, &desired_state_fn)
}

/// Samples `f(x1, x2, t)` at every grid node.
pub fn sample(grid: &Grid, f: &dyn Fn(f64, f64, f64) -> f64) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let (t, x1, x2) = grid.coords(idx);
            f(x1, x2, t)
        })
        .collect()
}

pub fn objective_weights(grid: &Grid, gamma: f64) -> Result<ObjectiveWeights> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter { name: "gamma", reason: format!("{gamma} must be positive") });
    }
    let n = grid.n;
    let plane = n * n;
    let mut diag_j = vec![1.0; grid.len()];
    if n > 0 {
        let last = (n - 1) * plane;
        diag_j[last..].iter_mut().for_each(|w| *w = 0.5);
    }
    Ok(ObjectiveWeights { diag_j, j1_scale: 1.0, j2_scale: gamma })
}

/// Discrete approximation of `||y - ybar||_{L2}` over `[0,1]^2 x [0,1]`.
///
/// The mismatch is measured only where the state is computed: the
/// trapezoidal rule on the closed grid with the integrand taken as zero on
/// every boundary node, which reduces to `sqrt(h_x^2 h_t sum (y - ybar)^2)`
/// over the `n^3` interior nodes.
pub fn l2_misfit(y: &[f64], ybar: &dyn Fn(f64, f64, f64) -> f64, grid: &Grid) -> Result<f64> {
    crate::error::check_len(grid.len(), y.len())?;
    let acc: f64 = y
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let (t, x1, x2) = grid.coords(idx);
            let d = v - ybar(x1, x2, t);
            d * d
        })
        .sum();
    Ok((acc * grid.h_x * grid.h_x * grid.h_t).sqrt())
}
