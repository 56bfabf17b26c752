//! CSV schemas and row formatting. Floats use Rust's shortest round-trip
//! representation, so parsing a field back gives the identical value.

use std::io::Write;
use std::path::Path;

use fracopt::{IterationRecord, SolveResult};

use crate::config::{Format, RunConfig};
use crate::error::CliResult;

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "n",
    "N",
    "alpha",
    "beta1",
    "beta2",
    "gamma",
    "delta",
    "rho",
    "E_l2",
    "dual_inf",
    "pcg_avg",
    "admm_iters",
    "wall_seconds",
    "status",
];

pub const ITERATION_COLUMNS: [&str; 8] =
    ["iteration", "r_eq", "r_y", "r_u", "dual_inf", "inner_iterations", "inner_tol", "copies_feasible"];

/// One summary row. Failed points keep their parameters and carry NaN
/// metrics with status `error`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub rho: f64,
    pub e_l2: f64,
    pub dual_inf: f64,
    pub pcg_avg: f64,
    pub admm_iters: usize,
    pub wall_seconds: f64,
    pub status: String,
}

impl SummaryRow {
    pub fn from_result(cfg: &RunConfig, res: &SolveResult) -> Self {
        SummaryRow {
            e_l2: res.misfit,
            dual_inf: res.dual_inf,
            pcg_avg: res.pcg_avg,
            admm_iters: res.admm_iterations,
            wall_seconds: res.wall_seconds,
            status: res.status.as_str().to_string(),
            ..SummaryRow::failed(cfg)
        }
    }

    pub fn failed(cfg: &RunConfig) -> Self {
        SummaryRow {
            n: cfg.n,
            alpha: cfg.alpha,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            gamma: cfg.gamma,
            delta: cfg.delta,
            rho: cfg.rho,
            e_l2: f64::NAN,
            dual_inf: f64::NAN,
            pcg_avg: f64::NAN,
            admm_iters: 0,
            wall_seconds: 0.0,
            status: "error".into(),
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            (self.n * self.n * self.n).to_string(),
            self.alpha.to_string(),
            self.beta1.to_string(),
            self.beta2.to_string(),
            self.gamma.to_string(),
            self.delta.to_string(),
            self.rho.to_string(),
            self.e_l2.to_string(),
            self.dual_inf.to_string(),
            self.pcg_avg.to_string(),
            self.admm_iters.to_string(),
            self.wall_seconds.to_string(),
            self.status.clone(),
        ]
    }
}

pub fn iteration_fields(r: &IterationRecord) -> Vec<String> {
    vec![
        r.iteration.to_string(),
        r.residuals.r_eq.to_string(),
        r.residuals.r_y.to_string(),
        r.residuals.r_u.to_string(),
        r.dual_inf.to_string(),
        r.inner_iterations.to_string(),
        r.inner_tol.to_string(),
        r.copies_feasible.to_string(),
    ]
}

/// Writes a header and rows to `path`.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Prints summary rows to stdout in the configured format.
pub fn print_summary(format: Format, rows: &[SummaryRow]) -> CliResult<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(SUMMARY_COLUMNS)?;
            for row in rows {
                w.write_record(row.fields())?;
            }
            w.flush()?;
        }
        Format::Plain => {
            for row in rows {
                let fields = row.fields();
                let width = SUMMARY_COLUMNS.iter().map(|c| c.len()).max().unwrap_or(0);
                for (name, value) in SUMMARY_COLUMNS.iter().zip(&fields) {
                    writeln!(out, "{name:>width$}  {value}")?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}
