//! The `qheat` command-line driver.
//!
//! A run is described by a flat `key=value` configuration (file plus
//! `--set` overrides), validated in full before anything is computed, and
//! produces one CSV table and a one-line summary.

mod catalog;
mod selftest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qcore::QParams;

pub use catalog::{scenarios, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SelfTest,
    Forward,
    InverseSource,
    InverseInitial,
}

impl Command {
    pub const ALL: [Command; 4] = [
        Command::SelfTest,
        Command::Forward,
        Command::InverseSource,
        Command::InverseInitial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SelfTest => "selftest",
            Command::Forward => "forward",
            Command::InverseSource => "inverse-source",
            Command::InverseInitial => "inverse-initial",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "key `command`: unknown command `{s}` (expected selftest, forward, inverse-source or inverse-initial)"
                ))
            })
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub q: f64,
    pub horizon: f64,
    pub k: usize,
    pub k_reg: usize,
    pub m_max: usize,
    pub tail_tol: f64,
    pub scenario: Option<String>,
    pub alpha: f64,
    /// Observation time; `T` when unset.
    pub xi0: Option<f64>,
    /// Relative perturbation applied to the measured data.
    pub noise: Option<f64>,
    /// Seed of the noise generator.
    pub seed: u64,
    /// Bound on the inverse q-mean of the source shape.
    pub m1: f64,
    pub out_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ctx = QParams::default();
        Self {
            command: None,
            q: ctx.q(),
            horizon: 1.0,
            k: 6,
            k_reg: 2,
            m_max: ctx.m_max(),
            tail_tol: ctx.tail_tol(),
            scenario: None,
            alpha: 0.0,
            xi0: None,
            noise: None,
            seed: 0,
            m1: 100.0,
            out_path: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}`")))
}

fn invalid(key: &str, reason: impl fmt::Display) -> Error {
    Error::Config(format!("key `{key}`: {reason}"))
}

impl RunConfig {
    pub const KEYS: [&'static str; 14] = [
        "command", "q", "T", "K", "K_reg", "m_max", "tail_tol", "scenario", "alpha", "xi0",
        "noise", "seed", "M1", "out",
    ];

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "command" => self.command = Some(value.parse()?),
            "q" => self.q = parse(key, value)?,
            "T" => self.horizon = parse(key, value)?,
            "K" => self.k = parse(key, value)?,
            "K_reg" => self.k_reg = parse(key, value)?,
            "m_max" => self.m_max = parse(key, value)?,
            "tail_tol" => self.tail_tol = parse(key, value)?,
            "scenario" => self.scenario = Some(value.to_string()),
            "alpha" => self.alpha = parse(key, value)?,
            "xi0" => self.xi0 = Some(parse(key, value)?),
            "noise" => self.noise = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "M1" => self.m1 = parse(key, value)?,
            "out" => self.out_path = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(key, value)
    }

    /// Reads `key=value` lines; blank lines and `#` comments are skipped.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.merge_str(&text)
    }

    pub fn xi0(&self) -> f64 {
        self.xi0.unwrap_or(self.horizon)
    }

    pub fn scenario_name(&self) -> Result<&str> {
        let command = self.command()?;
        Ok(self
            .scenario
            .as_deref()
            .unwrap_or_else(|| catalog::default_scenario(command)))
    }

    pub fn command(&self) -> Result<Command> {
        self.command
            .ok_or_else(|| Error::Config("key `command`: no command given".into()))
    }

    /// Checks every key and returns the numerical context.
    pub fn validate(&self) -> Result<QParams> {
        let command = self.command()?;
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(invalid("q", format!("must lie in (0, 1), got {}", self.q)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(
                "T",
                format!("must be positive, got {}", self.horizon),
            ));
        }
        if self.k == 0 {
            return Err(invalid("K", "must be at least 1"));
        }
        if self.k_reg == 0 || self.k_reg > self.k {
            return Err(invalid(
                "K_reg",
                format!("must lie in 1..={}, got {}", self.k, self.k_reg),
            ));
        }
        if self.m_max == 0 {
            return Err(invalid("m_max", "must be at least 1"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(invalid(
                "tail_tol",
                format!("must lie in (0, 1), got {}", self.tail_tol),
            ));
        }
        if !(self.alpha.abs() <= 1.0) {
            return Err(invalid(
                "alpha",
                format!("need |alpha| <= 1, got {}", self.alpha),
            ));
        }
        let xi0 = self.xi0();
        if !(xi0 > 0.0 && xi0 <= self.horizon) {
            return Err(invalid("xi0", format!("must lie in (0, T], got {xi0}")));
        }
        if let Some(noise) = self.noise {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(invalid(
                    "noise",
                    format!("must be non-negative, got {noise}"),
                ));
            }
        }
        if !(self.m1 > 0.0) {
            return Err(invalid("M1", format!("must be positive, got {}", self.m1)));
        }
        let name = self.scenario_name()?;
        if catalog::lookup(command, name).is_none() {
            let known: Vec<&str> = scenarios(command).iter().map(|s| s.name).collect();
            return Err(invalid(
                "scenario",
                format!(
                    "`{name}` is not a {command} scenario (known: {})",
                    known.join(", ")
                ),
            ));
        }
        QParams::new(
            self.q,
            self.tail_tol,
            self.m_max,
            self.k.max(QParams::default().k_max()),
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    /// Where the CSV goes: `out`, or `qheat-<command>.csv`.
    pub fn out_path(&self) -> Result<PathBuf> {
        let command = self.command()?;
        Ok(self
            .out_path
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("qheat-{command}.csv"))))
    }
}

/// A CSV table with pre-formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `table` as UTF-8 CSV with LF line endings.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    writer.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        writer.write_record(row).map_err(io)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Result of a successful computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub command: Command,
    pub table: Table,
    pub max_err: f64,
    /// `(passed, total)` for the self-test.
    pub checks: Option<(usize, usize)>,
}

impl Outcome {
    pub fn succeeded(&self) -> bool {
        self.checks.is_none_or(|(passed, total)| passed == total)
    }

    pub fn summary(&self) -> String {
        let status = if self.succeeded() { "ok" } else { "failed" };
        let mut line = format!("{} {status} max_err={:e}", self.command, self.max_err);
        if let Some((passed, total)) = self.checks {
            line.push_str(&format!(" checks={passed}/{total}"));
        }
        line
    }
}

/// Validates `config` and computes the table.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    let ctx = config.validate()?;
    let command = config.command()?;
    let scenario = catalog::lookup(command, config.scenario_name()?)
        .ok_or_else(|| invalid("scenario", "unknown"))?;
    match command {
        Command::SelfTest => selftest::run(config, &ctx),
        Command::Forward => catalog::run_forward(scenario, config, &ctx),
        Command::InverseSource => catalog::run_inverse_source(scenario, config, &ctx),
        Command::InverseInitial => catalog::run_inverse_initial(scenario, config, &ctx),
    }
}

/// Runs, writes the CSV, prints the summary and returns the exit code.
pub fn execute(config: &RunConfig) -> i32 {
    let result = config.out_path().and_then(|path| {
        let outcome = run(config)?;
        emit_csv(&outcome.table, &path)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary());
            if outcome.succeeded() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
