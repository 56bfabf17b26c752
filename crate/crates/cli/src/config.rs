//! Run configuration: flat `key = value` files plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fracopt::{AdmmConfig, Bounds, ProblemSpec};

use crate::error::CliError;

/// Default output directory when neither `out` nor the environment sets one.
pub const DEFAULT_OUT: &str = "fracopt-out";
/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "FRACOPT_OUT";

/// Every key accepted in a config file or via `--set`.
pub const KEYS: &[&str] = &[
    "n",
    "alpha",
    "beta1",
    "beta2",
    "gamma",
    "delta",
    "rho",
    "tol",
    "max_outer",
    "max_inner",
    "inner_tol_factor",
    "inner_tol_floor",
    "warm_start",
    "ylo",
    "yhi",
    "ulo",
    "uhi",
    "out",
    "format",
    "delta_sweep",
    "n_sweep",
    "alpha_sweep",
    "beta_sweep",
    "workers",
    "seed",
    "dump",
    "log",
    "cap",
    "symbol_points",
    "symbol_terms",
    "reps",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Plain,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "plain" => Ok(Format::Plain),
            _ => Err("expected csv or plain".into()),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Plain => "plain",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner_tol_factor: f64,
    pub inner_tol_floor: f64,
    pub warm_start: bool,
    pub ylo: f64,
    pub yhi: f64,
    pub ulo: f64,
    pub uhi: f64,
    pub out: PathBuf,
    pub format: Format,
    /// `None` means "not given"; `Some(vec![])` is an explicit empty list.
    pub delta_sweep: Option<Vec<f64>>,
    pub n_sweep: Option<Vec<usize>>,
    pub alpha_sweep: Option<Vec<f64>>,
    /// Sets both spatial orders.
    pub beta_sweep: Option<Vec<f64>>,
    pub workers: usize,
    pub seed: u64,
    pub dump: bool,
    pub log: bool,
    /// Largest grid size for `validate`.
    pub cap: usize,
    pub symbol_points: usize,
    pub symbol_terms: usize,
    pub reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = ProblemSpec::default();
        let admm = AdmmConfig::default();
        RunConfig {
            n: spec.n,
            alpha: spec.alpha,
            beta1: spec.beta1,
            beta2: spec.beta2,
            gamma: spec.gamma,
            delta: admm.delta,
            rho: admm.rho,
            tol: admm.tol_primal,
            max_outer: admm.max_outer,
            max_inner: admm.max_inner,
            inner_tol_factor: admm.inner_tol_factor,
            inner_tol_floor: admm.inner_tol_floor,
            warm_start: admm.warm_start,
            ylo: f64::NEG_INFINITY,
            yhi: f64::INFINITY,
            ulo: f64::NEG_INFINITY,
            uhi: f64::INFINITY,
            out: PathBuf::from(DEFAULT_OUT),
            format: Format::Csv,
            delta_sweep: None,
            n_sweep: None,
            alpha_sweep: None,
            beta_sweep: None,
            workers: 1,
            seed: 0,
            dump: false,
            log: false,
            cap: 4,
            symbol_points: 17,
            symbol_terms: 256,
            reps: 5,
        }
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Config {
        key: key.to_string(),
        reason: format!("cannot parse {value:?}"),
    })
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

fn flag(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(CliError::Config { key: key.into(), reason: format!("expected a boolean, got {other:?}") }),
    }
}

impl RunConfig {
    /// Defaults with the output directory taken from `FRACOPT_OUT` if set.
    pub fn from_env() -> Self {
        let mut cfg = RunConfig::default();
        if let Some(dir) = std::env::var_os(OUT_ENV) {
            cfg.out = PathBuf::from(dir);
        }
        cfg
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value;
        match key {
            "n" => self.n = scalar(key, v)?,
            "alpha" => self.alpha = scalar(key, v)?,
            "beta1" => self.beta1 = scalar(key, v)?,
            "beta2" => self.beta2 = scalar(key, v)?,
            "gamma" => self.gamma = scalar(key, v)?,
            "delta" => self.delta = scalar(key, v)?,
            "rho" => self.rho = scalar(key, v)?,
            "tol" => self.tol = scalar(key, v)?,
            "max_outer" => self.max_outer = scalar(key, v)?,
            "max_inner" => self.max_inner = scalar(key, v)?,
            "inner_tol_factor" => self.inner_tol_factor = scalar(key, v)?,
            "inner_tol_floor" => self.inner_tol_floor = scalar(key, v)?,
            "warm_start" => self.warm_start = flag(key, v)?,
            "ylo" => self.ylo = scalar(key, v)?,
            "yhi" => self.yhi = scalar(key, v)?,
            "ulo" => self.ulo = scalar(key, v)?,
            "uhi" => self.uhi = scalar(key, v)?,
            "out" => self.out = PathBuf::from(v.trim()),
            "format" => {
                self.format = v.trim().parse().map_err(|reason| CliError::Config { key: key.into(), reason })?
            }
            "delta_sweep" => self.delta_sweep = Some(list(key, v)?),
            "n_sweep" => self.n_sweep = Some(list(key, v)?),
            "alpha_sweep" => self.alpha_sweep = Some(list(key, v)?),
            "beta_sweep" => self.beta_sweep = Some(list(key, v)?),
            "workers" => self.workers = scalar(key, v)?,
            "seed" => self.seed = scalar(key, v)?,
            "dump" => self.dump = flag(key, v)?,
            "log" => self.log = flag(key, v)?,
            "cap" => self.cap = scalar(key, v)?,
            "symbol_points" => self.symbol_points = scalar(key, v)?,
            "symbol_terms" => self.symbol_terms = scalar(key, v)?,
            "reps" => self.reps = scalar(key, v)?,
            _ => return Err(CliError::UnknownKey { key: key.to_string(), valid: KEYS.join(", ") }),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Usage(format!(
                "config line {}: expected `key = value`, got {raw:?}",
                lineno + 1
            )))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Resolves file values first, then overrides in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::from_env();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec {
            alpha: self.alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            gamma: self.gamma,
            n: self.n,
            y_bounds: Bounds::from_f64(self.ylo, self.yhi),
            u_bounds: Bounds::from_f64(self.ulo, self.uhi),
        }
    }

    pub fn admm_config(&self) -> AdmmConfig {
        AdmmConfig {
            delta: self.delta,
            rho: self.rho,
            tol_primal: self.tol,
            max_outer: self.max_outer,
            inner_tol_floor: self.inner_tol_floor,
            inner_tol_factor: self.inner_tol_factor,
            max_inner: self.max_inner,
            warm_start: self.warm_start,
        }
    }

    /// Sweep points in listed order: grid size outermost, then delta, alpha
    /// and beta. Lists that were never given use the scalar value.
    pub fn sweep_points(&self) -> Result<Vec<RunConfig>, CliError> {
        let given = [
            ("n_sweep", self.n_sweep.as_ref().map(Vec::len)),
            ("delta_sweep", self.delta_sweep.as_ref().map(Vec::len)),
            ("alpha_sweep", self.alpha_sweep.as_ref().map(Vec::len)),
            ("beta_sweep", self.beta_sweep.as_ref().map(Vec::len)),
        ];
        if given.iter().all(|(_, len)| len.is_none()) {
            return Err(CliError::Usage(
                "sweep needs at least one of n_sweep, delta_sweep, alpha_sweep, beta_sweep".into(),
            ));
        }
        if let Some((key, _)) = given.iter().find(|(_, len)| *len == Some(0)) {
            return Err(CliError::Usage(format!("sweep list {key} is empty")));
        }
        let ns = self.n_sweep.clone().unwrap_or_else(|| vec![self.n]);
        let deltas = self.delta_sweep.clone().unwrap_or_else(|| vec![self.delta]);
        let alphas = self.alpha_sweep.clone().unwrap_or_else(|| vec![self.alpha]);
        let betas = self.beta_sweep.clone();
        let mut points = Vec::new();
        for &n in &ns {
            for &delta in &deltas {
                for &alpha in &alphas {
                    let beta_list: Vec<(f64, f64)> = match &betas {
                        Some(b) => b.iter().map(|&b| (b, b)).collect(),
                        None => vec![(self.beta1, self.beta2)],
                    };
                    for (beta1, beta2) in beta_list {
                        points.push(RunConfig { n, delta, alpha, beta1, beta2, ..self.clone() });
                    }
                }
            }
        }
        Ok(points)
    }
}
