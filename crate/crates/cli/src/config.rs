//! Flat `key = value` experiment configuration with CLI flag overrides.

use crate::{CliError, CliResult};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// All experiment parameters. Every field has a default; a config file
/// and then CLI flags override it.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub kappa: f64,
    pub mu: f64,
    pub nu: f64,
    pub cp: f64,
    pub cq: f64,
    pub eps: f64,
    /// Gradient cut `T` of the regularization.
    pub t_cut: f64,
    pub lambda_list: Vec<f64>,
    pub h: f64,
    /// Grid half-width.
    pub radius: f64,
    pub tol: f64,
    pub seed: u64,
    pub k0: f64,
    /// Constant forcing added in the iteration study.
    pub f_const: f64,
    /// Amplitude of the Gaussian forcing bump in the Lipschitz study.
    pub f_amp: f64,
    pub eps_list: Vec<f64>,
    /// Truncation levels for the forcing in the regularization study.
    pub m_list: Vec<f64>,
    pub threads: usize,
    /// Input CSV for the `lorentz` subcommand.
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 3,
            p: 2.0,
            q: 2.0,
            kappa: 0.25,
            mu: 1.0,
            nu: 1.0,
            cp: 1.0,
            cq: 1.0,
            eps: 1e-12,
            t_cut: 1.0,
            lambda_list: vec![10.0, 100.0, 1000.0],
            h: 1.0 / 12.0,
            radius: 1.0,
            tol: 1e-8,
            seed: 7,
            k0: 0.0,
            f_const: 0.0,
            f_amp: 0.0,
            eps_list: vec![0.5, 0.25, 0.125, 0.0625],
            m_list: vec![5.0, 10.0, 20.0, 40.0],
            threads: 1,
            input: None,
            out: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_list(key: &str, value: &str) -> CliResult<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse_num(key, s))
        .collect::<CliResult<Vec<f64>>>()
}

impl ExperimentConfig {
    /// Parse a flat `key = value` file: UTF-8, `#` comments, blank lines
    /// ignored, list values comma-separated.
    pub fn from_file(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in &map {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Apply one `key = value` override; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "n" => self.n = parse_num(key, value)?,
            "p" => self.p = parse_num(key, value)?,
            "q" => self.q = parse_num(key, value)?,
            "kappa" => self.kappa = parse_num(key, value)?,
            "mu" => self.mu = parse_num(key, value)?,
            "nu" => self.nu = parse_num(key, value)?,
            "cp" => self.cp = parse_num(key, value)?,
            "cq" => self.cq = parse_num(key, value)?,
            "eps" => self.eps = parse_num(key, value)?,
            "T" | "t_cut" => self.t_cut = parse_num(key, value)?,
            "lambda_list" | "lambda" => self.lambda_list = parse_list(key, value)?,
            "h" => self.h = parse_num(key, value)?,
            "radius" => self.radius = parse_num(key, value)?,
            "tol" => self.tol = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "k0" => self.k0 = parse_num(key, value)?,
            "f_const" => self.f_const = parse_num(key, value)?,
            "f_amp" => self.f_amp = parse_num(key, value)?,
            "eps_list" => self.eps_list = parse_list(key, value)?,
            "m_list" => self.m_list = parse_list(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Validate cross-field invariants shared by all experiments.
    pub fn validate(&self) -> CliResult<()> {
        if self.lambda_list.is_empty() {
            return Err(CliError::Config("lambda_list must be non-empty".into()));
        }
        if self.lambda_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "lambda_list must be strictly increasing".into(),
            ));
        }
        if !(self.h > 0.0 && self.radius > 0.0 && self.tol > 0.0) {
            return Err(CliError::Config(format!(
                "need h, radius, tol > 0, got h = {}, radius = {}, tol = {}",
                self.h, self.radius, self.tol
            )));
        }
        if !(1.0 < self.p && self.p <= self.q) {
            return Err(CliError::Config(format!(
                "need 1 < p <= q, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        if !(0.0 < self.kappa && self.kappa < 0.5) {
            return Err(CliError::Config(format!(
                "need kappa in (0, 1/2), got {}",
                self.kappa
            )));
        }
        if self.threads == 0 {
            return Err(CliError::Config("threads must be >= 1".into()));
        }
        Ok(())
    }
}
