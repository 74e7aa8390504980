//! Line-oriented `key=value` scenario files.
//!
//! Keys: name, coeffs (comma list, u(ψ) = Σ a_j cosʲψ), grid_n, eps (scalar
//! or comma list), dt_safety, t_max, residual_tol. Unknown keys are errors.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config field '{field}': {msg}")]
    Validation { field: &'static str, msg: String },
}

/// A named experiment: initial data, grid, ε values and flow overrides.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: String,
    /// u(ψ) = Σ_j coeffs[j]·(cos ψ)^j, degree ≤ 12.
    pub coeffs: Vec<f64>,
    /// Power of two ≥ 16, so refinement studies can halve cleanly.
    pub grid_n: usize,
    pub eps_list: Vec<f64>,
    pub dt_safety: f64,
    pub t_max: f64,
    pub residual_tol: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            coeffs: vec![0.0],
            grid_n: 256,
            eps_list: vec![0.05],
            dt_safety: 0.4,
            t_max: 200.0,
            residual_tol: 1e-7,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.coeffs.is_empty() || self.coeffs.len() > 13 {
            return Err(ConfigError::Validation {
                field: "coeffs",
                msg: format!("degree must be ≤ 12, got {} coefficients", self.coeffs.len()),
            });
        }
        if self.grid_n < 16 || !self.grid_n.is_power_of_two() {
            return Err(ConfigError::Validation {
                field: "grid_n",
                msg: format!("must be a power of two ≥ 16, got {}", self.grid_n),
            });
        }
        if self.eps_list.is_empty() {
            return Err(ConfigError::Validation { field: "eps", msg: "empty".into() });
        }
        for &e in &self.eps_list {
            if !(e > 0.0 && e < 1.0) {
                return Err(ConfigError::Validation {
                    field: "eps",
                    msg: format!("{e} outside (0, 1)"),
                });
            }
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(ConfigError::Validation {
                field: "dt_safety",
                msg: format!("{} outside (0, 1]", self.dt_safety),
            });
        }
        if !(self.t_max > 0.0) {
            return Err(ConfigError::Validation {
                field: "t_max",
                msg: format!("{} not positive", self.t_max),
            });
        }
        if !(self.residual_tol > 0.0) {
            return Err(ConfigError::Validation {
                field: "residual_tol",
                msg: format!("{} not positive", self.residual_tol),
            });
        }
        Ok(())
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("bad number '{v}' for {key}"),
    })
}

fn parse_f64_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',').map(|t| parse_f64(line, key, t)).collect()
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let mut sc = Scenario::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
            line: lineno,
            msg: "expected key=value".into(),
        })?;
        let key = key.trim();
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::Parse { line: lineno, msg: format!("duplicate key '{key}'") });
        }
        seen.push(key.to_string());
        match key {
            "name" => sc.name = value.trim().to_string(),
            "coeffs" => sc.coeffs = parse_f64_list(lineno, key, value)?,
            "grid_n" => {
                sc.grid_n = value.trim().parse().map_err(|_| ConfigError::Parse {
                    line: lineno,
                    msg: format!("bad integer '{value}' for grid_n"),
                })?
            }
            "eps" => sc.eps_list = parse_f64_list(lineno, key, value)?,
            "dt_safety" => sc.dt_safety = parse_f64(lineno, key, value)?,
            "t_max" => sc.t_max = parse_f64(lineno, key, value)?,
            "residual_tol" => sc.residual_tol = parse_f64(lineno, key, value)?,
            other => {
                return Err(ConfigError::Parse {
                    line: lineno,
                    msg: format!("unknown key '{other}'"),
                })
            }
        }
    }
    sc.validate()?;
    Ok(sc)
}
