//! SDEs with mean reflection,
//!
//! ```text
//! X_t = X_0 + ∫ f(s, X_{s-}) dM_s + ∫ g(s, X_{s-}) dV_s + k_t,   E h(t, X_t) ∈ [l_t, u_t],
//! ```
//!
//! simulated with interacting particles. Several driving terms `(f_i, g_i, M_i, V_i)`
//! may be summed; each gets its own random channel.

mod coefficients;
mod convergence;
mod driver;
mod euler;
mod invest;
mod picard;
pub mod rng;

use serde::{Deserialize, Serialize};

pub use coefficients::{audit_pair, CoefFn};
pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable, NOISE_ALLOWANCE, REQUIRED_REDUCTION};
pub use driver::{characteristic_audit, martingale_sup_estimate, CharacteristicAudit, Driver, JumpLaw, MartingaleEstimate};
pub use euler::{euler_mean_reflected, euler_unreflected, euler_with, EulerRun, RunOptions};
pub use invest::{investment_scenario, ClaimSpec, InvestmentParams, InvestmentReport, InvestmentRun};
pub use picard::{contraction_intervals, picard_solve, IntervalLog, PicardOptions, PicardRun};

use crate::error::{Error, Result};
use crate::grid_paths::{BarrierPair, GridPath, PiecewiseSpec, TimeGrid};
use crate::mean_map::{Ensemble, HKind, MeanConstraintFunction};
use crate::par;
use rand_distr::{Distribution, StandardNormal};
use rand::Rng;

/// One driving term `∫ f dM + ∫ g dV`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeTerm {
    #[serde(default = "zero_coef")]
    pub f: CoefFn,
    #[serde(default = "zero_coef")]
    pub g: CoefFn,
    pub driver: Driver,
    /// Declared Lipschitz constant of `(f, g)`; derived from the registry when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

fn zero_coef() -> CoefFn {
    CoefFn::Zero
}

impl SdeTerm {
    pub fn new(f: CoefFn, g: CoefFn, driver: Driver) -> Self {
        SdeTerm { f, g, driver, lipschitz: None }
    }

    /// Lipschitz constant `c` of `|f(x) - f(y)| + |g(x) - g(y)| <= c |x - y|`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz.unwrap_or(self.f.lipschitz() + self.g.lipschitz())
    }

    /// Growth constant `μ` of `|f(x)| + |g(x)| <= μ (1 + |x|)`.
    pub fn growth(&self) -> f64 {
        self.f.growth() + self.g.growth()
    }

    fn is_inert(&self) -> bool {
        (self.f.is_zero() && self.g.is_zero()) || matches!(self.driver, Driver::Zero)
    }
}

/// Law of `X_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Sampler {
    Constant { value: f64 },
    Uniform { a: f64, b: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl X0Sampler {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            X0Sampler::Constant { value } => value.is_finite(),
            X0Sampler::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            X0Sampler::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
        };
        if ok { Ok(()) } else { Err(Error::invalid(format!("invalid initial law {self:?}"))) }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            X0Sampler::Constant { value } => value,
            X0Sampler::Uniform { a, b } => 0.5 * (a + b),
            X0Sampler::Gaussian { mean, .. } => mean,
        }
    }

    pub fn sample(&self, seed: u64, particles: usize) -> Vec<f64> {
        par::map_range(particles, |i| match *self {
            X0Sampler::Constant { value } => value,
            X0Sampler::Uniform { a, b } => rng::stream(seed, rng::INITIAL_CHANNEL, 0, i as u64).random_range(a..b),
            X0Sampler::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(&mut rng::stream(seed, rng::INITIAL_CHANNEL, 0, i as u64));
                mean + std * z
            }
        })
    }
}

/// Everything a particle simulation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub particles: usize,
    /// Steps per unit time; the grid is `{j / steps : j / steps <= horizon}`.
    pub steps: usize,
    pub horizon: f64,
    pub tol: f64,
    pub x0: X0Sampler,
    pub terms: Vec<SdeTerm>,
    pub h: HKind,
    pub lower: Option<PiecewiseSpec>,
    pub upper: Option<PiecewiseSpec>,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("root tolerance must be positive, got {}", self.tol)));
        }
        self.x0.validate()?;
        for term in &self.terms {
            term.f.validate()?;
            term.g.validate()?;
            term.driver.validate()?;
        }
        for spec in [&self.lower, &self.upper].into_iter().flatten() {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.steps, self.horizon)
    }

    pub fn h_fn(&self) -> Result<MeanConstraintFunction> {
        MeanConstraintFunction::new(self.h.clone(), self.horizon)
    }

    pub fn barriers(&self, grid: &TimeGrid) -> Result<BarrierPair> {
        let side = |s: &Option<PiecewiseSpec>| s.as_ref().map(|s| GridPath::sample(grid, s));
        BarrierPair::new(side(&self.lower), side(&self.upper))
    }

    /// Sum over terms of the Lipschitz constants.
    pub fn lipschitz(&self) -> f64 {
        self.terms.iter().map(SdeTerm::lipschitz).sum()
    }

    pub fn growth(&self) -> f64 {
        self.terms.iter().map(SdeTerm::growth).sum()
    }
}

/// Increment of one particle over step `step` given its left state `x`, with the
/// coefficients evaluated at the right time `t1`.
#[inline]
pub(crate) fn particle_increment(
    cfg: &SimulationConfig,
    particle: usize,
    step: usize,
    refine: usize,
    t1: f64,
    x: f64,
) -> f64 {
    let mut d = 0.0;
    for (c, term) in cfg.terms.iter().enumerate() {
        if term.is_inert() {
            continue;
        }
        let (dm, dv) = term.driver.increment(cfg.seed, c as u64, particle as u64, step as u64, cfg.steps, refine);
        d += term.f.eval(t1, x) * dm + term.g.eval(t1, x) * dv;
    }
    d
}

/// Checks `l_0 <= E h(0, X_0) <= u_0`: exactly for a point mass or an affine `h`
/// (the law's mean is known), otherwise on the sample with slack `3 σ̂ / sqrt(N)`.
pub(crate) fn check_initial(
    cfg: &SimulationConfig,
    h: &MeanConstraintFunction,
    ens: &Ensemble,
    barriers: &BarrierPair,
) -> Result<()> {
    let (l0, u0) = (barriers.lower_at(0), barriers.upper_at(0));
    let slack = 2.0 * cfg.tol;
    let (value, extra) = match (&cfg.x0, h.affine_in_x()) {
        (X0Sampler::Constant { value }, _) => (h.eval(0.0, *value), 0.0),
        (x0, Some((a, b))) => (a * x0.mean() + b, 0.0),
        _ => {
            let eh = ens.mean_h(h, 0.0);
            let var = par::mean_map(ens.particles(), |x| (h.eval(0.0, x) - eh).powi(2));
            (eh, 3.0 * (var / ens.len() as f64).sqrt())
        }
    };
    if value < l0 - slack - extra || value > u0 + slack + extra {
        return Err(Error::ConstraintViolation {
            time: 0.0,
            detail: format!("E h(0, X_0) = {value} outside [{l0}, {u0}]"),
        });
    }
    Ok(())
}

/// Tags a numerical failure with the step at which it happened.
pub(crate) fn at_step(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NumericalFailure { detail, residual } => Error::NumericalFailure {
            detail: format!("step {step}: {detail}"),
            residual,
        },
        other => other,
    }
}
