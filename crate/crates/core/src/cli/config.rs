//! Run configuration: a TOML file, optionally layered on a shipped scenario, with
//! command-line overrides on top.
//!
//! Shared keys (`seed`, `particles`, `steps`, `horizon`, `tol`, `out`, `scenario`,
//! `command`, `description`, `budget_seconds`) sit at the top level next to the
//! keys of the chosen command. Unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::cli::scenarios;
use crate::error::{Error, Result};
use crate::grid_paths::{GridPath, PiecewiseSpec, TimeGrid};
use crate::mean_map::{HKind, MeanConstraintFunction};
use crate::sde::{ClaimSpec, InvestmentParams, SdeTerm, SimulationConfig, X0Sampler};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_PARTICLES: usize = 1000;
pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Deterministic Skorokhod problem.
    Sp,
    /// Skorokhod problem with mean reflection for a given ensemble of paths.
    MeanSp,
    /// Euler particle scheme for the mean-reflected SDE.
    Simulate,
    /// Picard construction, cross-checked against the Euler scheme.
    Picard,
    /// Grid-refinement study.
    Converge,
    /// Investment example with a mean risk constraint.
    Invest,
    /// Minimality and constraint checks of a solution CSV.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sp => "sp",
            Command::MeanSp => "mean-sp",
            Command::Simulate => "simulate",
            Command::Picard => "picard",
            Command::Converge => "converge",
            Command::Invest => "invest",
            Command::Verify => "verify",
        }
    }
}

/// Values given on the command line; they beat the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub particles: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A path on the run's grid: a constant, explicit grid values or a piecewise-linear
/// spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathInput {
    Constant(f64),
    Values(GridValues),
    Piecewise(PiecewiseSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridValues {
    pub values: Vec<f64>,
}

impl PathInput {
    pub fn on(&self, grid: &TimeGrid) -> Result<GridPath> {
        match self {
            PathInput::Constant(c) => Ok(GridPath::constant(grid, *c)),
            PathInput::Values(v) => GridPath::new(grid.clone(), v.values.clone()),
            PathInput::Piecewise(spec) => {
                spec.validate()?;
                Ok(GridPath::sample(grid, spec))
            }
        }
    }
}

/// A barrier of an SDE model: a constant or a piecewise-linear spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BarrierInput {
    Constant(f64),
    Piecewise(PiecewiseSpec),
}

impl BarrierInput {
    fn spec(&self, horizon: f64) -> PiecewiseSpec {
        match self {
            BarrierInput::Constant(c) => PiecewiseSpec::constant(*c, horizon),
            BarrierInput::Piecewise(s) => s.clone(),
        }
    }
}

fn identity_h() -> HKind {
    HKind::Identity
}

fn zero_offsets() -> X0Sampler {
    X0Sampler::Constant { value: 0.0 }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpMethod {
    /// Clamp recursion.
    #[default]
    Recursion,
    /// Running form of the explicit inf/sup formula.
    Formula,
    /// The explicit formula evaluated term by term, quadratic in the grid size.
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpSpec {
    pub y: PathInput,
    #[serde(default)]
    pub l: Option<PathInput>,
    #[serde(default)]
    pub u: Option<PathInput>,
    #[serde(default)]
    pub method: SpMethod,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSolver {
    #[default]
    Recursion,
    Lower,
    Upper,
    /// The discretized scheme on the run grid.
    Scheme,
}

/// Ensemble `Y_i(t) = base(t) + offset_i + noise W_i(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSpSpec {
    pub base: PathInput,
    #[serde(default = "zero_offsets")]
    pub offsets: X0Sampler,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "identity_h")]
    pub h: HKind,
    #[serde(default)]
    pub l: Option<PathInput>,
    #[serde(default)]
    pub u: Option<PathInput>,
    #[serde(default)]
    pub solver: MeanSolver,
}

/// The mean-reflected SDE shared by `simulate`, `picard` and `converge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub x0: X0Sampler,
    #[serde(default)]
    pub terms: Vec<SdeTerm>,
    #[serde(default = "identity_h")]
    pub h: HKind,
    #[serde(default)]
    pub lower: Option<BarrierInput>,
    #[serde(default)]
    pub upper: Option<BarrierInput>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_picard_tol() -> f64 {
    1e-9
}

fn default_max_iterations() -> usize {
    100
}

fn default_max_ratio() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateExtras {
    /// Build each step's noise from this many finer increments.
    #[serde(default = "one")]
    pub refine: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardExtras {
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Also run the Euler scheme and report `sup |k_picard - k_euler|`.
    #[serde(default = "yes")]
    pub compare_euler: bool,
    /// Largest accepted ratio of successive Picard distances (theory: 1/2).
    #[serde(default = "default_max_ratio")]
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeExtras {
    pub n_list: Vec<usize>,
    pub reference_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestSpec {
    pub x0: f64,
    pub b: f64,
    pub sigma: f64,
    #[serde(default = "unit")]
    pub s0: f64,
    #[serde(default)]
    pub premium: f64,
    #[serde(default)]
    pub claims: Option<ClaimSpec>,
    pub h: HKind,
    #[serde(default)]
    pub lower: Option<BarrierInput>,
    #[serde(default)]
    pub upper: Option<BarrierInput>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// A `solution.csv` written by `mean-sp`, `simulate`, `picard` or `invest`.
    pub solution: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Job {
    Sp(SpSpec),
    MeanSp(MeanSpSpec),
    Simulate { model: ModelSpec, extras: SimulateExtras },
    Picard { model: ModelSpec, extras: PicardExtras },
    Converge { model: ModelSpec, extras: ConvergeExtras },
    Invest(InvestSpec),
    Verify(VerifySpec),
}

/// Fully resolved configuration. Its serialization identifies the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub scenario: Option<String>,
    pub seed: u64,
    pub particles: usize,
    pub steps: usize,
    pub horizon: f64,
    pub tol: f64,
    pub job: Job,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub budget_seconds: Option<f64>,
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.steps, self.horizon)
    }

    /// The SDE of a `simulate`, `picard` or `converge` run.
    pub fn simulation(&self, model: &ModelSpec) -> SimulationConfig {
        SimulationConfig {
            seed: self.seed,
            particles: self.particles,
            steps: self.steps,
            horizon: self.horizon,
            tol: self.tol,
            x0: model.x0.clone(),
            terms: model.terms.clone(),
            h: model.h.clone(),
            lower: model.lower.as_ref().map(|b| b.spec(self.horizon)),
            upper: model.upper.as_ref().map(|b| b.spec(self.horizon)),
        }
    }

    pub fn investment(&self, spec: &InvestSpec) -> InvestmentParams {
        InvestmentParams {
            x0: spec.x0,
            b: spec.b,
            sigma: spec.sigma,
            s0: spec.s0,
            premium: spec.premium,
            claims: spec.claims.clone(),
            h: spec.h.clone(),
            lower: spec.lower.as_ref().map(|b| b.spec(self.horizon)),
            upper: spec.upper.as_ref().map(|b| b.spec(self.horizon)),
            seed: self.seed,
            particles: self.particles,
            steps: self.steps,
            horizon: self.horizon,
            tol: self.tol,
        }
    }

    /// Checks everything that can be checked without running the solver.
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("`particles` must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("`steps` must be at least 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("`horizon` must be positive and finite, got {}", self.horizon)));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(Error::Config(format!("`tol` must lie in (0, 0.01), got {}", self.tol)));
        }
        let grid = self.grid()?;
        let h = |kind: &HKind| MeanConstraintFunction::new(kind.clone(), self.horizon);
        match &self.job {
            Job::Sp(s) => {
                s.y.on(&grid)?;
                if s.l.is_none() && s.u.is_none() {
                    return Err(Error::Config("`sp` needs at least one of `l` and `u`".into()));
                }
                for side in [&s.l, &s.u].into_iter().flatten() {
                    side.on(&grid)?;
                }
            }
            Job::MeanSp(s) => {
                s.base.on(&grid)?;
                s.offsets.validate()?;
                h(&s.h)?;
                if !(s.noise >= 0.0 && s.noise.is_finite()) {
                    return Err(Error::Config(format!("`noise` must be non-negative, got {}", s.noise)));
                }
                for side in [&s.l, &s.u].into_iter().flatten() {
                    side.on(&grid)?;
                }
            }
            Job::Simulate { model, extras } => {
                let sim = self.simulation(model);
                sim.validate()?;
                sim.h_fn()?;
                sim.barriers(&grid)?;
                if extras.refine == 0 {
                    return Err(Error::Config("`refine` must be at least 1".into()));
                }
            }
            Job::Picard { model, extras } => {
                let sim = self.simulation(model);
                sim.validate()?;
                sim.h_fn()?;
                sim.barriers(&grid)?;
                if !(extras.picard_tol > 0.0) || extras.max_iterations == 0 {
                    return Err(Error::Config("`picard_tol` and `max_iterations` must be positive".into()));
                }
            }
            Job::Converge { model, extras } => {
                let sim = self.simulation(model);
                sim.validate()?;
                sim.h_fn()?;
                if extras.n_list.is_empty() {
                    return Err(Error::Config("`n_list` is empty".into()));
                }
                if let Some(n) = extras.n_list.iter().find(|&&n| n == 0 || extras.reference_n % n != 0 || n >= extras.reference_n) {
                    return Err(Error::Config(format!(
                        "`n_list` entry {n} must be below and divide `reference_n` = {}",
                        extras.reference_n
                    )));
                }
            }
            Job::Invest(spec) => {
                let kind = h(&spec.h)?;
                if !kind.is_concave() {
                    return Err(Error::Config(format!("`h` = {} is not concave", kind.name())));
                }
                self.investment(spec).simulation_config().validate()?;
            }
            Job::Verify(_) => {}
        }
        Ok(())
    }
}

const SHARED_KEYS: [&str; 10] =
    ["command", "scenario", "description", "budget_seconds", "seed", "particles", "steps", "horizon", "tol", "out"];

fn parse_table(text: &str, origin: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// Removes `key` from `table` and deserializes it.
fn take<T: DeserializeOwned>(table: &mut Table, key: &str) -> Result<Option<T>> {
    match table.remove(key) {
        None => Ok(None),
        Some(v) => v.try_into().map(Some).map_err(|e| Error::Config(format!("key `{key}`: {e}"))),
    }
}

/// Moves the listed keys into their own table and deserializes it.
fn take_section<T: DeserializeOwned>(table: &mut Table, keys: &[&str], what: &str) -> Result<T> {
    let mut section = Table::new();
    for k in keys {
        if let Some(v) = table.remove(*k) {
            section.insert((*k).to_string(), v);
        }
    }
    Value::Table(section).try_into().map_err(|e| Error::Config(format!("{what}: {e}")))
}

fn body<T: DeserializeOwned>(table: Table, command: Command) -> Result<T> {
    Value::Table(table).try_into().map_err(|e| Error::Config(format!("`{}` config: {e}", command.name())))
}

/// Reads `file` (if any) and resolves it against the shipped scenario and `overrides`.
pub fn parse_config(command: Command, file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let text = match file {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let origin = file.map_or_else(|| "config".to_string(), |p| p.display().to_string());
    resolve(command, text.as_deref(), &origin, overrides)
}

/// Precedence: flags, then the file, then the named scenario, then defaults.
pub fn resolve(command: Command, text: Option<&str>, origin: &str, overrides: &Overrides) -> Result<RunConfig> {
    let file = match text {
        Some(t) => parse_table(t, origin)?,
        None => Table::new(),
    };
    let scenario = match &overrides.scenario {
        Some(s) => Some(s.clone()),
        None => match file.get("scenario") {
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => return Err(Error::Config(format!("key `scenario`: expected a string, found {other}"))),
            None => None,
        },
    };
    let mut table = match &scenario {
        Some(name) => {
            let text = scenarios::lookup(name).ok_or_else(|| {
                Error::Config(format!("unknown scenario `{name}`; shipped: {}", scenarios::names().collect::<Vec<_>>().join(", ")))
            })?;
            parse_table(text, &format!("scenario {name}"))?
        }
        None => Table::new(),
    };
    for (k, v) in file {
        table.insert(k, v);
    }

    if let Some(declared) = take::<Command>(&mut table, "command")? {
        if declared != command {
            return Err(Error::Config(format!(
                "configuration is for `{}` but the command is `{}`",
                declared.name(),
                command.name()
            )));
        }
    }
    table.remove("scenario");
    let _: Option<String> = take(&mut table, "description")?;
    let budget_seconds = take::<f64>(&mut table, "budget_seconds")?;
    let seed = overrides.seed.or(take(&mut table, "seed")?).unwrap_or(DEFAULT_SEED);
    let particles = overrides.particles.or(take(&mut table, "particles")?).unwrap_or(DEFAULT_PARTICLES);
    let steps = overrides.steps.or(take(&mut table, "steps")?).unwrap_or(DEFAULT_STEPS);
    let horizon = overrides.horizon.or(take(&mut table, "horizon")?).unwrap_or(DEFAULT_HORIZON);
    let tol = overrides.tol.or(take(&mut table, "tol")?).unwrap_or(DEFAULT_TOL);
    let out = overrides.out.clone().or(take(&mut table, "out")?).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    for k in SHARED_KEYS {
        table.remove(k);
    }

    let job = match command {
        Command::Sp => Job::Sp(body(table, command)?),
        Command::MeanSp => Job::MeanSp(body(table, command)?),
        Command::Simulate => {
            let extras = take_section(&mut table, &["refine"], "simulate options")?;
            Job::Simulate { model: body(table, command)?, extras }
        }
        Command::Picard => {
            let extras = take_section(
                &mut table,
                &["picard_tol", "max_iterations", "compare_euler", "max_ratio"],
                "picard options",
            )?;
            Job::Picard { model: body(table, command)?, extras }
        }
        Command::Converge => {
            let extras = take_section(&mut table, &["n_list", "reference_n"], "converge options")?;
            Job::Converge { model: body(table, command)?, extras }
        }
        Command::Invest => Job::Invest(body(table, command)?),
        Command::Verify => Job::Verify(body(table, command)?),
    };
    let cfg = RunConfig { command, scenario, seed, particles, steps, horizon, tol, job, out, budget_seconds };
    cfg.validate()?;
    Ok(cfg)
}
