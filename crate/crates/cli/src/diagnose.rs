//! Symbol samples, circulant spectra and clustering of the preconditioned
//! normal equations.

use std::f64::consts::PI;
use std::path::Path;

use fracopt::circulant::CLUSTERING_CAP;
use fracopt::{
    assemble_precond, clustering_report, scaling, symbol_eval, wiener_check, ClusteringReport, ConstraintOperator,
    WienerCheck,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::write_csv;

pub const SYMBOL_COLUMNS: [&str; 5] = ["theta1", "theta2", "theta3", "value_re", "value_im"];
pub const EIG_COLUMNS: [&str; 3] = ["eig_index", "value_re", "value_im"];

/// Terms of the truncated series for the Wiener line.
pub const WIENER_TERMS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct Diagnosis {
    pub symbol_rows: usize,
    pub circulant_eigs: usize,
    /// `None` when the grid is above the dense cap.
    pub clustering: Option<ClusteringReport>,
    pub wiener: WienerCheck,
}

impl Diagnosis {
    pub fn summary(&self) -> Vec<String> {
        let mut lines = vec![
            format!("symbol samples: {}", self.symbol_rows),
            format!("circulant eigenvalues: {}", self.circulant_eigs),
        ];
        match &self.clustering {
            Some(c) => {
                lines.push(format!(
                    "preconditioned spectrum: {} eigenvalues in [{:.6e}, {:.6e}]",
                    c.eigenvalues.len(),
                    c.min,
                    c.max
                ));
                for (eps, frac) in &c.fractions {
                    lines.push(format!("  fraction within {eps} of 1: {frac:.4}"));
                }
            }
            None => lines.push(format!("clustering skipped: n above dense cap {CLUSTERING_CAP}")),
        }
        lines.push(format!(
            "wiener: truncated sum {:.6e} <= bound {:.6e} ({})",
            self.wiener.abs_sum,
            self.wiener.bound,
            if self.wiener.holds() { "holds" } else { "VIOLATED" }
        ));
        lines
    }
}

/// Evenly spaced points on `[-pi, pi]`, both ends included.
fn angles(points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        m => (0..m).map(|i| -PI + 2.0 * PI * i as f64 / (m - 1) as f64).collect(),
    }
}

pub fn diagnose(cfg: &RunConfig, out: &Path) -> CliResult<Diagnosis> {
    let spec = cfg.problem_spec();
    spec.validate()?;
    if cfg.symbol_points == 0 || cfg.symbol_terms == 0 {
        return Err(CliError::Usage("symbol_points and symbol_terms must be positive".into()));
    }
    let grid = spec.grid();
    let scals = scaling(&spec, &grid)?;

    let thetas = angles(cfg.symbol_points);
    let mut symbol = Vec::with_capacity(thetas.len().pow(3));
    for &t1 in &thetas {
        for &t2 in &thetas {
            for &t3 in &thetas {
                let v = symbol_eval([t1, t2, t3], &scals, spec.alpha, spec.beta1, spec.beta2, cfg.symbol_terms)?;
                symbol.push(vec![t1.to_string(), t2.to_string(), t3.to_string(), v.re.to_string(), v.im.to_string()]);
            }
        }
    }
    let symbol_rows = symbol.len();
    write_csv(&out.join("symbol.csv"), &SYMBOL_COLUMNS, symbol)?;

    let op = ConstraintOperator::new(&spec)?;
    let pc = assemble_precond(&op, cfg.rho, cfg.delta, spec.gamma)?;
    let eigs = pc.lam_b.iter().enumerate().map(|(i, z)| vec![i.to_string(), z.re.to_string(), z.im.to_string()]);
    write_csv(&out.join("circulant_eigs.csv"), &EIG_COLUMNS, eigs)?;

    let clustering = if spec.n <= CLUSTERING_CAP {
        let report = clustering_report(&op, &pc, spec.gamma, CLUSTERING_CAP)?;
        let rows = report.eigenvalues.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string(), "0".into()]);
        write_csv(&out.join("clustering.csv"), &EIG_COLUMNS, rows)?;
        Some(report)
    } else {
        None
    };

    let wiener = wiener_check(&scals, spec.alpha, spec.beta1, spec.beta2, WIENER_TERMS)?;
    Ok(Diagnosis { symbol_rows, circulant_eigs: pc.lam_b.len(), clustering, wiener })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_grid_covers_both_ends() {
        let a = angles(17);
        assert_eq!(a.len(), 17);
        assert_eq!(a[0], -PI);
        assert!((a[16] - PI).abs() < 1e-15);
        assert!(a[8].abs() < 1e-15);
    }
}
