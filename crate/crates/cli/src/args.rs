use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Box-constrained optimal control of a space-time fractional diffusion
/// equation by ADMM with circulant-preconditioned inner solves.
#[derive(Parser, Debug)]
#[command(name = "fracopt", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one problem and write a summary row
    Solve,
    /// Solve every point of the sweep lists, one row per point in listed order
    Sweep(SweepArgs),
    /// Compare structured kernels against dense references on small grids
    Validate(ValidateArgs),
    /// Write symbol samples, circulant eigenvalues and the clustering report
    Diagnose,
    /// Time apply_B and the preconditioner solve and report peak memory
    Bench(BenchArgs),
}

/// Flags shared by every subcommand. Each one overrides the matching config
/// file key.
#[derive(Args, Debug, Default)]
pub struct Common {
    /// Config file of `key = value` lines
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory [env: FRACOPT_OUT]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Grid points per dimension
    #[arg(long, global = true)]
    pub n: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    #[arg(long, global = true)]
    pub beta1: Option<String>,
    #[arg(long, global = true)]
    pub beta2: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    #[arg(long, global = true)]
    pub delta: Option<String>,
    #[arg(long, global = true)]
    pub rho: Option<String>,
    /// State lower bound (`-inf` for none)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub ylo: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub yhi: Option<String>,
    /// Control lower bound (`-inf` for none)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub ulo: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub uhi: Option<String>,
    /// Primal residual tolerance
    #[arg(long, global = true)]
    pub tol: Option<String>,
    #[arg(long, global = true)]
    pub max_outer: Option<String>,
    /// Concurrent sweep points
    #[arg(long, global = true)]
    pub workers: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Write binary solution dumps
    #[arg(long, global = true)]
    pub dump: bool,
    /// Write the per-iteration log
    #[arg(long, global = true)]
    pub log: bool,
    /// Report format on stdout: csv or plain
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Any config key, as KEY=VALUE; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", allow_hyphen_values = true)]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    /// Comma-separated delta values
    #[arg(long)]
    pub deltas: Option<String>,
    /// Comma-separated grid sizes
    #[arg(long)]
    pub ns: Option<String>,
    /// Comma-separated Caputo orders
    #[arg(long)]
    pub alphas: Option<String>,
    /// Comma-separated Riesz orders, applied to both directions
    #[arg(long)]
    pub betas: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct ValidateArgs {
    /// Largest grid size checked (at most 6)
    #[arg(long)]
    pub cap: Option<String>,
    /// Test hook: add this amount to one Caputo coefficient
    #[arg(long, hide = true, allow_hyphen_values = true)]
    pub inject_fault: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct BenchArgs {
    /// Comma-separated grid sizes; defaults to n
    #[arg(long)]
    pub sizes: Option<String>,
    /// Timed repetitions per kernel
    #[arg(long)]
    pub reps: Option<String>,
}

impl Common {
    /// Flag values as `(key, value)` overrides, in a fixed order.
    pub fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        };
        push("out", &self.out.as_ref().map(|p| p.display().to_string()));
        push("n", &self.n);
        push("alpha", &self.alpha);
        push("beta1", &self.beta1);
        push("beta2", &self.beta2);
        push("gamma", &self.gamma);
        push("delta", &self.delta);
        push("rho", &self.rho);
        push("ylo", &self.ylo);
        push("yhi", &self.yhi);
        push("ulo", &self.ulo);
        push("uhi", &self.uhi);
        push("tol", &self.tol);
        push("max_outer", &self.max_outer);
        push("workers", &self.workers);
        push("seed", &self.seed);
        push("format", &self.format);
        if self.dump {
            out.push(("dump".into(), "true".into()));
        }
        if self.log {
            out.push(("log".into(), "true".into()));
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            out.push((k.trim().to_string(), v.to_string()));
        }
        Ok(out)
    }
}
