//! Command line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use combworks::io::serialize_process;
use combworks::nonmarkov::nm_bracket;
use combworks::protocols::{analyze, ALL_STRATEGIES};

use crate::config::Settings;
use crate::error::{BenchError, Result};
use crate::report::{all_pass, emit_report, emit_values};
use crate::scenarios::{random_process, scenario, Scenario};
use crate::verify::{ladder_context, metadata, nm_rows, resolve_target, verify_suite, work_rows};

#[derive(Debug, Parser)]
#[command(
    name = "combworks",
    version,
    about = "Work extraction and non-Markovianity for multitime quantum processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sequential, joint, global and comb work with the gap report.
    Work { target: String },
    /// Non-Markovianity bracket.
    Nm { target: String },
    /// Verification records; `all` runs every reference scenario.
    Verify {
        target: String,
        /// Comma-separated check id prefixes to keep.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
    },
    /// Writes a random dilation process.
    Random,
    /// Writes a named scenario as a process file.
    Export { scenario: String },
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub energy: Option<f64>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// json or csv.
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub ancilla_dim: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sys_dim: Option<usize>,
    #[arg(long, global = true)]
    pub env_dim: Option<usize>,
    /// random or thermal.
    #[arg(long, global = true)]
    pub env_init: Option<String>,
}

impl Flags {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_file(&std::fs::read_to_string(path)?)?;
        }
        let pairs: [(&str, Option<String>); 13] = [
            ("energy", self.energy.map(|v| v.to_string())),
            ("temperature", self.temperature.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("restarts", self.restarts.map(|v| v.to_string())),
            ("max_iters", self.max_iters.map(|v| v.to_string())),
            ("tol", self.tol.map(|v| v.to_string())),
            ("format", self.format.clone()),
            ("ancilla_dim", self.ancilla_dim.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("sys_dim", self.sys_dim.map(|v| v.to_string())),
            ("env_dim", self.env_dim.map(|v| v.to_string())),
            ("env_init", self.env_init.clone()),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, &v)?;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

fn write_output(settings: &Settings, bytes: &[u8]) -> Result<()> {
    match &settings.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// Sizes the global rayon pool from `COMBWORKS_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("COMBWORKS_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            BenchError::Config(format!("COMBWORKS_THREADS must be a count, got {v:?}"))
        })?;
        // A pool that is already built keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Runs a parsed command and returns the process exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    let settings = cli.flags.settings()?;
    let opt = settings.optimizer();
    match &cli.command {
        Command::Work { target } => {
            let s = resolve_target(target, &settings)?;
            let report = analyze(&s.process, &s.ctx, &opt, &ALL_STRATEGIES)?;
            write_output(
                &settings,
                &emit_values(&s.name, &work_rows(&s, &report), settings.format),
            )?;
            Ok(0)
        }
        Command::Nm { target } => {
            let s = resolve_target(target, &settings)?;
            let nm = nm_bracket(&s.process, &s.ctx, &opt)?;
            write_output(
                &settings,
                &emit_values(&s.name, &nm_rows(&s, &nm), settings.format),
            )?;
            Ok(0)
        }
        Command::Verify { target, checks } => {
            let records = verify_suite(target, &settings, checks.as_deref())?;
            write_output(&settings, &emit_report(&records, settings.format))?;
            Ok(if all_pass(&records) { 0 } else { 1 })
        }
        Command::Random => {
            let process = random_process(
                settings.steps,
                settings.sys_dim,
                settings.env_dim,
                settings.seed,
                settings.env_init,
                &settings.params(),
            )?;
            let s = Scenario {
                name: format!("random-{}", settings.seed),
                process,
                ctx: ladder_context(settings.sys_dim, settings.energy, settings.temperature)?,
                expected: vec![],
                notes: "random dilation",
            };
            write_output(&settings, &serialize_process(&s.process, &metadata(&s)))?;
            Ok(0)
        }
        Command::Export { scenario: name } => {
            let s = scenario(name, &settings.params())?;
            write_output(&settings, &serialize_process(&s.process, &metadata(&s)))?;
            Ok(0)
        }
    }
}
