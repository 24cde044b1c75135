//! The Euler-type particle scheme.
//!
//! Per step: every particle moves by `f(t_{j+1}, X_j) ΔM + g(t_{j+1}, X_j) ΔV`
//! (coefficients at the right time, state at the left point), the barriers are
//! transformed on the new `Y` ensemble, `k` takes one clamp step and `X = Y + k`.

use std::time::Instant;

use crate::error::Result;
use crate::mean_map::{transform_point, Ensemble, MeanConstraintFunction};
use crate::mean_sp::{MeanSkorokhodSolution, XSummary};
use crate::par;
use crate::sde::{at_step, check_initial, particle_increment, SimulationConfig};
use crate::skorokhod_det::clamp_step;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Keep the law of `X` at every grid time in the solution.
    pub keep_particles: bool,
    /// Each step's increments are the sum of `refine` finer increments.
    pub refine: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { keep_particles: false, refine: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct EulerRun {
    pub solution: MeanSkorokhodSolution,
    /// Wall time of every step, in seconds.
    pub step_seconds: Vec<f64>,
}

pub fn euler_mean_reflected(cfg: &SimulationConfig) -> Result<EulerRun> {
    euler_with(cfg, RunOptions::default())
}

/// Summary of `X = Y + k` without materialising `X`.
fn summary_shifted(h: &MeanConstraintFunction, t: f64, y: &[f64], k: f64) -> XSummary {
    let mean = par::mean_map(y, |v| v + k);
    XSummary {
        eh: par::mean_map(y, |v| h.eval(t, v + k)),
        mean,
        std: par::mean_map(y, |v| (v + k - mean) * (v + k - mean)).sqrt(),
    }
}

pub fn euler_with(cfg: &SimulationConfig, opts: RunOptions) -> Result<EulerRun> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let h = cfg.h_fn()?;
    let barriers = cfg.barriers(&grid)?;
    let pts = grid.points();
    let n = grid.len();
    let (has_l, has_u) = (barriers.lower.is_some(), barriers.upper.is_some());

    let ens = Ensemble::new(cfg.x0.sample(cfg.seed, cfg.particles))?;
    check_initial(cfg, &h, &ens, &barriers)?;

    let mut ys = Vec::with_capacity(n);
    let mut ks = Vec::with_capacity(n);
    let mut lbar = Vec::with_capacity(if has_l { n } else { 0 });
    let mut ubar = Vec::with_capacity(if has_u { n } else { 0 });
    let mut summaries = Vec::with_capacity(n);
    let mut kept = opts.keep_particles.then(|| Vec::with_capacity(n));
    let mut step_seconds = Vec::with_capacity(n - 1);

    let (lb, ub) = transform_point(&h, 0.0, barriers.lower_at(0), barriers.upper_at(0), &ens, cfg.tol).map_err(at_step(0))?;
    let mut k = 0.0;
    ys.push(ens.mean());
    ks.push(k);
    lbar.push(lb);
    ubar.push(ub);
    summaries.push(summary_shifted(&h, 0.0, ens.particles(), k));
    if let Some(v) = kept.as_mut() {
        v.push(ens.clone());
    }
    let mut y = ens.into_particles();

    for j in 0..n - 1 {
        let clock = Instant::now();
        let t1 = pts[j + 1];
        let k_prev = k;
        par::for_each_indexed(&mut y, |i, yi| {
            *yi += particle_increment(cfg, i, j, opts.refine, t1, *yi + k_prev);
        });
        let ens = Ensemble::new(std::mem::take(&mut y))?;
        let (lb, ub) = transform_point(&h, t1, barriers.lower_at(j + 1), barriers.upper_at(j + 1), &ens, cfg.tol)
            .map_err(at_step(j + 1))?;
        k = clamp_step(k, ens.mean(), has_l.then_some(lb), has_u.then_some(ub));
        ys.push(ens.mean());
        ks.push(k);
        lbar.push(lb);
        ubar.push(ub);
        summaries.push(summary_shifted(&h, t1, ens.particles(), k));
        if let Some(v) = kept.as_mut() {
            v.push(ens.shifted(k));
        }
        y = ens.into_particles();
        step_seconds.push(clock.elapsed().as_secs_f64());
    }

    let solution = MeanSkorokhodSolution::from_parts(
        grid,
        ys,
        ks,
        barriers,
        has_l.then_some(lbar),
        has_u.then_some(ubar),
        summaries,
        kept,
    );
    Ok(EulerRun { solution, step_seconds })
}

/// The same scheme without reflection: `X_{j+1} = X_j + f ΔM + g ΔV`. Returns the
/// particle values at every grid time.
pub fn euler_unreflected(cfg: &SimulationConfig, opts: RunOptions) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let pts = grid.points();
    let mut x = cfg.x0.sample(cfg.seed, cfg.particles);
    let mut out = Vec::with_capacity(grid.len());
    out.push(x.clone());
    for j in 0..grid.len() - 1 {
        let t1 = pts[j + 1];
        par::for_each_indexed(&mut x, |i, xi| {
            *xi += particle_increment(cfg, i, j, opts.refine, t1, *xi);
        });
        out.push(x.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{PiecewiseSpec, Segment};
    use crate::mean_map::HKind;
    use crate::sde::{CoefFn, Driver, SdeTerm, X0Sampler};

    fn base(particles: usize, steps: usize, horizon: f64) -> SimulationConfig {
        SimulationConfig {
            seed: 17,
            particles,
            steps,
            horizon,
            tol: 1e-10,
            x0: X0Sampler::Constant { value: 0.0 },
            terms: Vec::new(),
            h: HKind::Identity,
            lower: None,
            upper: None,
        }
    }

    #[test]
    fn nothing_moves() {
        let mut cfg = base(3, 10, 1.0);
        cfg.terms.push(SdeTerm::new(CoefFn::Zero, CoefFn::Zero, Driver::Brownian { scale: 1.0 }));
        cfg.lower = Some(PiecewiseSpec::constant(-1.0, 1.0));
        cfg.upper = Some(PiecewiseSpec::constant(1.0, 1.0));
        let run = euler_with(&cfg, RunOptions { keep_particles: true, refine: 1 }).unwrap();
        assert!(run.solution.k.values().iter().all(|&k| k == 0.0));
        for e in run.solution.x.unwrap() {
            assert!(e.particles().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn deterministic_drift_closed_form() {
        let mut cfg = base(1, 50, 2.0);
        cfg.x0 = X0Sampler::Constant { value: 1.0 };
        cfg.terms.push(SdeTerm::new(CoefFn::Zero, CoefFn::Const { value: -1.0 }, Driver::Clock { rate: 1.0 }));
        cfg.lower = Some(PiecewiseSpec::constant(0.0, 2.0));
        let run = euler_mean_reflected(&cfg).unwrap();
        for (j, &t) in run.solution.grid.points().iter().enumerate() {
            assert!((run.solution.k.at(j) - (t - 1.0f64).max(0.0)).abs() <= 1e-12);
            assert!((run.solution.x_mean.at(j) - (1.0 - t).max(0.0)).abs() <= 1e-12);
        }
        assert_eq!(run.step_seconds.len(), 100);
    }

    #[test]
    fn no_barriers_equals_unreflected_bitwise() {
        let mut cfg = base(200, 20, 1.0);
        cfg.x0 = X0Sampler::Gaussian { mean: 0.3, std: 0.5 };
        cfg.terms.push(SdeTerm::new(CoefFn::Sin { amp: 0.4, freq: 1.0, offset: 0.2 }, CoefFn::Affine { slope: -1.0, intercept: 0.0 }, Driver::Brownian { scale: 1.0 }));
        cfg.terms.push(SdeTerm::new(CoefFn::Zero, CoefFn::Affine { slope: -1.0, intercept: 0.5 }, Driver::Clock { rate: 1.0 }));
        let run = euler_with(&cfg, RunOptions { keep_particles: true, refine: 1 }).unwrap();
        let plain = euler_unreflected(&cfg, RunOptions::default()).unwrap();
        for (e, p) in run.solution.x.unwrap().iter().zip(&plain) {
            assert_eq!(e.particles(), &p[..]);
        }
    }

    #[test]
    fn rising_floor_with_noise() {
        let mut cfg = base(4000, 50, 2.0);
        cfg.x0 = X0Sampler::Constant { value: 1.0 };
        cfg.terms.push(SdeTerm::new(CoefFn::Const { value: 0.5 }, CoefFn::Zero, Driver::Brownian { scale: 1.0 }));
        cfg.lower = Some(PiecewiseSpec {
            segments: vec![Segment { from: 0.0, to: 2.0, value: Some(1.0), slope: Some(0.5) }],
            jumps: Vec::new(),
        });
        let sol = euler_mean_reflected(&cfg).unwrap().solution;
        for (j, &t) in sol.grid.points().iter().enumerate() {
            let band = 4.0 * sol.x_std.at(j) / (cfg.particles as f64).sqrt();
            assert!((sol.k.at(j) - t / 2.0).abs() <= band + 1e-12, "t = {t}");
        }
    }

    #[test]
    fn particle_count_changes_only_added_particles() {
        let mut cfg = base(50, 10, 1.0);
        cfg.terms.push(SdeTerm::new(CoefFn::Const { value: 1.0 }, CoefFn::Zero, Driver::Brownian { scale: 1.0 }));
        let small = euler_unreflected(&cfg, RunOptions::default()).unwrap();
        cfg.particles = 80;
        let large = euler_unreflected(&cfg, RunOptions::default()).unwrap();
        for (a, b) in small.iter().zip(&large) {
            assert_eq!(&a[..], &b[..50]);
        }
    }
}
