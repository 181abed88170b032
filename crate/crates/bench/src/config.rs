//! Run settings from a `key = value` file, overridden by command line flags.

use std::path::PathBuf;

use combworks::optim::OptimizerConfig;

use crate::error::{BenchError, Result};
use crate::report::Format;
use crate::scenarios::{EnvInit, ScenarioParams};

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub energy: f64,
    pub temperature: f64,
    pub steps: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub format: Format,
    pub ancilla_dim: Option<usize>,
    pub out: Option<PathBuf>,
    pub sys_dim: usize,
    pub env_dim: usize,
    pub env_init: EnvInit,
}

impl Default for Settings {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        let params = ScenarioParams::default();
        Self {
            energy: params.energy,
            temperature: params.temperature,
            steps: params.steps,
            seed: params.seed,
            restarts: opt.restarts,
            max_iters: opt.max_iters,
            tol: opt.tol,
            format: Format::Json,
            ancilla_dim: None,
            out: None,
            sys_dim: 2,
            env_dim: 2,
            env_init: EnvInit::Random,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| BenchError::Config(format!("invalid value {value:?} for {key}")))
}

impl Settings {
    /// Sets one key; accepts both `ancilla-dim` and `ancilla_dim` spellings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "energy" => self.energy = parse(&key, value)?,
            "temperature" => self.temperature = parse(&key, value)?,
            "steps" => self.steps = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "restarts" => self.restarts = parse(&key, value)?,
            "max_iters" => self.max_iters = parse(&key, value)?,
            "tol" => self.tol = parse(&key, value)?,
            "format" => self.format = value.parse().map_err(BenchError::Config)?,
            "ancilla_dim" => self.ancilla_dim = Some(parse(&key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "sys_dim" => self.sys_dim = parse(&key, value)?,
            "env_dim" => self.env_dim = parse(&key, value)?,
            "env_init" => {
                self.env_init = match value {
                    "random" => EnvInit::Random,
                    "thermal" => EnvInit::Thermal,
                    other => return Err(BenchError::Config(format!("unknown env_init {other:?}"))),
                }
            }
            other => return Err(BenchError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a config file body; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("line {}: expected key = value", no + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy.is_finite() && self.energy > 0.0) {
            return Err(BenchError::Config("energy must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(BenchError::Config("temperature must be positive".into()));
        }
        if self.steps == 0 || self.restarts == 0 || self.max_iters == 0 {
            return Err(BenchError::Config(
                "steps, restarts and max_iters must be at least 1".into(),
            ));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(BenchError::Config("tol must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> ScenarioParams {
        ScenarioParams {
            energy: self.energy,
            temperature: self.temperature,
            steps: self.steps,
            seed: self.seed,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            seed: self.seed,
            tol: self.tol,
            ancilla_dim: self.ancilla_dim,
        }
    }

    /// Canonical `key=value` text, used in record digests.
    pub fn canonical(&self) -> String {
        format!(
            "energy={:?}\ntemperature={:?}\nsteps={}\nseed={}\nrestarts={}\nmax_iters={}\ntol={:?}\nancilla_dim={:?}\n",
            self.energy, self.temperature, self.steps, self.seed, self.restarts, self.max_iters, self.tol, self.ancilla_dim
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_comments() {
        let mut s = Settings::default();
        s.apply_file(
            "# run\nenergy = 2.5\nancilla-dim=4  # inline\n\nformat=csv\nenv_init = thermal\n",
        )
        .unwrap();
        assert_eq!(s.energy, 2.5);
        assert_eq!(s.ancilla_dim, Some(4));
        assert_eq!(s.format, Format::Csv);
        assert_eq!(s.env_init, EnvInit::Thermal);
        assert_eq!(s.steps, 2);
    }

    #[test]
    fn later_values_override() {
        let mut s = Settings::default();
        s.apply_file("restarts=4").unwrap();
        s.set("restarts", "9").unwrap();
        assert_eq!(s.optimizer().restarts, 9);
    }

    #[test]
    fn bad_input_is_rejected() {
        let mut s = Settings::default();
        assert!(s.apply_file("energy").is_err());
        assert!(s.set("colour", "red").is_err());
        assert!(s.set("steps", "two").is_err());
        s.set("temperature", "0").unwrap();
        assert!(s.validate().is_err());
        assert!(Settings::default().validate().is_ok());
    }

    #[test]
    fn canonical_text_tracks_optimizer_settings() {
        let a = Settings::default();
        let mut b = a.clone();
        b.set("seed", "7").unwrap();
        assert_ne!(a.canonical(), b.canonical());
        b.set("seed", "42").unwrap();
        b.set("format", "csv").unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }
}
