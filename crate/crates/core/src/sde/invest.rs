//! Insurance company investing its risk reserve under a mean risk constraint.
//!
//! The amount in stock `X = π S` solves
//! `X_t = x + ∫ X b ds + ∫ X σ dW + J_t + k_t` with `l_t <= E h(t, X_t) <= u_t`,
//! where `J` is the reserve (premium drift plus bounded claims) and `-k` the bank
//! account. The stock `S` is simulated on the same Brownian increments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_paths::PiecewiseSpec;
use crate::mean_map::{h_inverse, HKind};
use crate::mean_sp::{write_float, MeanSkorokhodSolution};
use crate::par;
use crate::sde::{euler_with, CoefFn, Driver, JumpLaw, RunOptions, SdeTerm, SimulationConfig, X0Sampler};

/// Claims of the reserve process: compound Poisson with bounded jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSpec {
    pub rate: f64,
    pub jump: JumpLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestmentParams {
    /// Initial capital, all in stock.
    pub x0: f64,
    pub b: f64,
    pub sigma: f64,
    pub s0: f64,
    /// Premium income rate of the reserve.
    pub premium: f64,
    #[serde(default)]
    pub claims: Option<ClaimSpec>,
    /// Must be concave in `x`.
    pub h: HKind,
    pub lower: Option<PiecewiseSpec>,
    pub upper: Option<PiecewiseSpec>,
    pub seed: u64,
    pub particles: usize,
    pub steps: usize,
    pub horizon: f64,
    pub tol: f64,
}

impl InvestmentParams {
    /// The mean-reflected SDE: `σ x dW`, `b x dt` and the reserve `J` split into
    /// its mean and a martingale.
    pub fn simulation_config(&self) -> SimulationConfig {
        let mut terms = vec![
            SdeTerm::new(CoefFn::Affine { slope: self.sigma, intercept: 0.0 }, CoefFn::Zero, Driver::Brownian { scale: 1.0 }),
            SdeTerm::new(CoefFn::Zero, CoefFn::Affine { slope: self.b, intercept: 0.0 }, Driver::Clock { rate: 1.0 }),
        ];
        let (rate, jump) = match &self.claims {
            Some(c) => (c.rate, c.jump.clone()),
            None => (0.0, JumpLaw::Fixed { size: 0.0 }),
        };
        terms.push(SdeTerm::new(
            CoefFn::Const { value: 1.0 },
            CoefFn::Const { value: 1.0 },
            Driver::PiiDecomposed { drift: self.premium, scale: 0.0, rate, jump },
        ));
        SimulationConfig {
            seed: self.seed,
            particles: self.particles,
            steps: self.steps,
            horizon: self.horizon,
            tol: self.tol,
            x0: X0Sampler::Constant { value: self.x0 },
            terms,
            h: self.h.clone(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvestmentReport {
    /// `max_{t, i} |π_t S_t - X_t|` relative to `max(1, |X_t|)`.
    pub max_replication_error: f64,
    /// `max_t L_t(X_t)`; admissible when `<= 0` up to the root tolerance.
    pub max_lower_risk: f64,
    /// `min_t U_t(X_t)`; admissible when `>= 0` up to the root tolerance.
    pub min_upper_risk: f64,
    /// Largest violation of `l_t - 2 tol <= E h(t, X_t) <= u_t + 2 tol`.
    pub constraint_excess: f64,
    /// `E sup_t |V_t - x - ∫ π dS - J_t|`, the time-discretization gap of self-financing.
    pub self_financing_gap: f64,
    pub admissible: bool,
    pub replication_ok: bool,
}

#[derive(Debug, Clone)]
pub struct InvestmentRun {
    pub solution: MeanSkorokhodSolution,
    /// Mean and standard deviation over particles of `S`, `π` and the wealth `V = -k + π S`.
    pub s_mean: Vec<f64>,
    pub pi_mean: Vec<f64>,
    pub pi_std: Vec<f64>,
    pub wealth_mean: Vec<f64>,
    pub wealth_std: Vec<f64>,
    pub report: InvestmentReport,
}

impl InvestmentRun {
    pub fn strategy_csv(&self) -> String {
        let mut out = String::from("t,k,s_mean,pi_mean,pi_std,wealth_mean,wealth_std\n");
        for (j, &t) in self.solution.grid.points().iter().enumerate() {
            let row = [
                t,
                self.solution.k.at(j),
                self.s_mean[j],
                self.pi_mean[j],
                self.pi_std[j],
                self.wealth_mean[j],
                self.wealth_std[j],
            ];
            for (c, v) in row.into_iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                write_float(&mut out, v);
            }
            out.push('\n');
        }
        out
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = par::mean_map(xs, |v| v);
    (m, par::mean_map(xs, |v| (v - m) * (v - m)).sqrt())
}

pub fn investment_scenario(p: &InvestmentParams) -> Result<InvestmentRun> {
    if !(p.sigma > 0.0 && p.s0 > 0.0 && p.x0.is_finite() && p.b.is_finite() && p.premium.is_finite()) {
        return Err(Error::invalid("investment needs sigma > 0, s0 > 0 and finite x0, b, premium"));
    }
    if let Some(c) = &p.claims {
        if !c.jump.bound().is_finite() {
            return Err(Error::invalid("claim sizes must be bounded"));
        }
    }
    let cfg = p.simulation_config();
    let h = cfg.h_fn()?;
    if !h.is_concave() {
        return Err(Error::invalid(format!("risk function {} is not concave", h.name())));
    }
    let run = euler_with(&cfg, RunOptions { keep_particles: true, refine: 1 })?;
    let sol = run.solution;
    let laws = sol.x.as_ref().expect("particles kept");
    let grid = &sol.grid;
    let pts = grid.points();
    let n = grid.len();
    let dt = 1.0 / p.steps as f64;
    let brownian = &cfg.terms[0].driver;
    let reserve = &cfg.terms[2].driver;
    let barriers = cfg.barriers(grid)?;

    let mut s = vec![p.s0; p.particles];
    let mut s_mean = vec![p.s0];
    let (pi0, pi0_std) = mean_std(&par::map_range(p.particles, |i| laws[0].particles()[i] / s[i]));
    let mut pi_mean = vec![pi0];
    let mut pi_std = vec![pi0_std];
    let mut wealth_mean = vec![p.x0];
    let mut wealth_std = vec![0.0];
    // Per particle: wealth minus x + ∫ π dS + J, and the running sup of its modulus.
    let mut gap = vec![0.0_f64; p.particles];
    let mut sup_gap = vec![0.0_f64; p.particles];
    let mut max_rep: f64 = 0.0;
    let mut max_lower = f64::NEG_INFINITY;
    let mut min_upper = f64::INFINITY;
    let mut excess: f64 = 0.0;

    for j in 0..n {
        let x = &laws[j];
        if j > 0 {
            let k_jump = sol.k.at(j) - sol.k.at(j - 1);
            let prev = &laws[j - 1];
            let drift = (p.b - 0.5 * p.sigma * p.sigma) * dt;
            let step = (j - 1) as u64;
            let mut stats = vec![(0.0, 0.0); p.particles];
            par::for_each_indexed(&mut stats, |i, out| {
                let (dw, _) = brownian.increment(p.seed, 0, i as u64, step, p.steps, 1);
                let (dm, dv) = reserve.increment(p.seed, 2, i as u64, step, p.steps, 1);
                let s_new = s[i] * (drift + p.sigma * dw).exp();
                let pi_prev = prev.particles()[i] / s[i];
                // Change in V = -k + X minus the self-financing increment π dS + dJ.
                let dv_wealth = (x.particles()[i] - prev.particles()[i]) - k_jump;
                *out = (s_new, dv_wealth - pi_prev * (s_new - s[i]) - (dm + dv));
            });
            for (i, &(s_new, d)) in stats.iter().enumerate() {
                s[i] = s_new;
                gap[i] += d;
                sup_gap[i] = sup_gap[i].max(gap[i].abs());
            }
        }
        let k = sol.k.at(j);
        let pi: Vec<f64> = par::map_range(p.particles, |i| x.particles()[i] / s[i]);
        let rep = par::max_index(p.particles, |i| (pi[i] * s[i] - x.particles()[i]).abs() / x.particles()[i].abs().max(1.0));
        max_rep = max_rep.max(rep);
        if j > 0 {
            s_mean.push(par::mean_map(&s, |v| v));
            let (pm, ps) = mean_std(&pi);
            pi_mean.push(pm);
            pi_std.push(ps);
            let wealth: Vec<f64> = par::map_range(p.particles, |i| -k + pi[i] * s[i]);
            let (wm, ws) = mean_std(&wealth);
            wealth_mean.push(wm);
            wealth_std.push(ws);
        }

        let t = pts[j];
        let (l, u) = (barriers.lower_at(j), barriers.upper_at(j));
        let eh = x.mean_h(&h, t);
        excess = excess.max(l - 2.0 * cfg.tol - eh).max(eh - u - 2.0 * cfg.tol);
        if l.is_finite() {
            max_lower = max_lower.max(h_inverse(&h, t, l, x, cfg.tol)? - x.mean());
        }
        if u.is_finite() {
            min_upper = min_upper.min(h_inverse(&h, t, u, x, cfg.tol)? - x.mean());
        }
    }

    let c = h.constants().c_lower;
    let slack = 2.0 * cfg.tol / c;
    let report = InvestmentReport {
        max_replication_error: max_rep,
        max_lower_risk: max_lower,
        min_upper_risk: min_upper,
        constraint_excess: excess.max(0.0),
        self_financing_gap: par::mean_map(&sup_gap, |v| v),
        admissible: excess <= 0.0 && max_lower <= slack && min_upper >= -slack,
        replication_ok: max_rep <= 4.0 * f64::EPSILON,
    };
    Ok(InvestmentRun { solution: sol, s_mean, pi_mean, pi_std, wealth_mean, wealth_std, report })
}
