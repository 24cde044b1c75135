//! Picard construction of the mean-reflected solution on contraction intervals.
//!
//! `[0, q]` is cut at grid times `t_0 = 0 < t_1 < ...` where
//! `(C_h + 1) Σ_i c_i max(m̂_i, 3 m̂_i^{1/2})` first exceeds `1/2`, with `m̂_i` the
//! increment of term `i`'s characteristic bound since the interval start. On each
//! interval the map
//!
//! ```text
//! Φ(X) = first component of the mean Skorokhod solution driven by
//!        Z = X_{t_k} + Σ_i ∫ f_i(s, X_{s-}) dM_i + ∫ g_i(s, X_{s-}) dV_i
//! ```
//!
//! is iterated from the frozen path `X ≡ X_{t_k}` until `E sup |Φ(X) - X|` drops
//! below the Picard tolerance. The interval is then closed by the jump
//! `k_{t_{k+1}} = max(min(k_{t_{k+1}-}, ū - EY), l̄ - EY)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_paths::{BarrierPair, TimeGrid};
use crate::mean_map::{transform_point, Ensemble, MeanConstraintFunction};
use crate::mean_sp::{summarize, MeanSkorokhodSolution, XSummary};
use crate::par;
use crate::sde::{at_step, check_initial, SimulationConfig};
use crate::skorokhod_det::clamp_step;

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    /// Stop when `E sup |X^{(j+1)} - X^{(j)}|` is at most this.
    pub picard_tol: f64,
    pub max_iterations: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { picard_tol: 1e-9, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalLog {
    pub start: f64,
    pub end: f64,
    pub start_index: usize,
    pub end_index: usize,
    /// Applications of `Φ`, including the one that met the tolerance (0 for a single-step interval).
    pub iterations: usize,
    /// `E sup |X^{(j+1)} - X^{(j)}|` for `j = 0, 1, ...`
    pub distances: Vec<f64>,
    /// Largest ratio of successive distances.
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PicardRun {
    pub solution: MeanSkorokhodSolution,
    pub intervals: Vec<IntervalLog>,
    /// Stability constant of the mean Skorokhod map used for the intervals.
    pub c_h: f64,
}

/// Contraction intervals as `(start, end)` grid index pairs.
pub fn contraction_intervals(grid: &TimeGrid, cfg: &SimulationConfig, c_h: f64) -> Vec<(usize, usize)> {
    let pts = grid.points();
    let last = grid.len() - 1;
    let theta = |dt: f64| -> f64 {
        (c_h + 1.0)
            * cfg
                .terms
                .iter()
                .map(|term| {
                    let m = term.driver.m_rate() * dt;
                    term.lipschitz() * m.max(3.0 * m.sqrt())
                })
                .sum::<f64>()
    };
    let mut out = Vec::new();
    let mut s = 0;
    while s < last {
        let e = (s + 1..=last).find(|&e| theta(pts[e] - pts[s]) > 0.5).unwrap_or(last);
        out.push((s, e));
        s = e;
    }
    out
}

struct State<'a> {
    cfg: &'a SimulationConfig,
    h: MeanConstraintFunction,
    barriers: BarrierPair,
    pts: &'a [f64],
}

impl State<'_> {
    /// Transformed barriers at grid index `j` on the law `ens`, and the clamp step of `k`.
    fn clamp(&self, j: usize, k_prev: f64, ens: &Ensemble) -> Result<(f64, f64, f64)> {
        let (lb, ub) = transform_point(
            &self.h,
            self.pts[j],
            self.barriers.lower_at(j),
            self.barriers.upper_at(j),
            ens,
            self.cfg.tol,
        )
        .map_err(at_step(j))?;
        let k = clamp_step(
            k_prev,
            ens.mean(),
            self.barriers.lower.is_some().then_some(lb),
            self.barriers.upper.is_some().then_some(ub),
        );
        Ok((k, lb, ub))
    }
}

/// The raw `(ΔM_i, ΔV_i)` of every term for one step, per particle. They are reused
/// by every Picard iterate.
fn raw_increments(cfg: &SimulationConfig, step: usize) -> Vec<Vec<(f64, f64)>> {
    par::map_range(cfg.particles, |i| {
        cfg.terms
            .iter()
            .enumerate()
            .map(|(c, term)| term.driver.increment(cfg.seed, c as u64, i as u64, step as u64, cfg.steps, 1))
            .collect()
    })
}

fn apply(cfg: &SimulationConfig, t1: f64, x: f64, raw: &[(f64, f64)]) -> f64 {
    cfg.terms
        .iter()
        .zip(raw)
        .fold(0.0, |acc, (term, (dm, dv))| acc + term.f.eval(t1, x) * dm + term.g.eval(t1, x) * dv)
}

/// One interval's iterate: per-step laws plus the relative compensator and barriers.
struct Iterate {
    x: Vec<Vec<f64>>,
    z_means: Vec<f64>,
    k_rel: Vec<f64>,
    lbar: Vec<f64>,
    ubar: Vec<f64>,
}

pub fn picard_solve(cfg: &SimulationConfig, opts: PicardOptions) -> Result<PicardRun> {
    cfg.validate()?;
    if !(opts.picard_tol > 0.0) {
        return Err(Error::invalid("Picard tolerance must be positive"));
    }
    let grid = cfg.grid()?;
    let h = cfg.h_fn()?;
    let barriers = cfg.barriers(&grid)?;
    let c_h = MeanConstraintFunction::stability_constant(&h, &h);
    let intervals = contraction_intervals(&grid, cfg, c_h);
    let st = State { cfg, h, barriers, pts: grid.points() };
    let n = grid.len();
    let (has_l, has_u) = (st.barriers.lower.is_some(), st.barriers.upper.is_some());

    let ens0 = Ensemble::new(cfg.x0.sample(cfg.seed, cfg.particles))?;
    check_initial(cfg, &st.h, &ens0, &st.barriers)?;
    let (_, lb0, ub0) = st.clamp(0, 0.0, &ens0)?;

    let mut ys = vec![ens0.mean()];
    let mut ks = vec![0.0];
    let mut lbar = vec![lb0];
    let mut ubar = vec![ub0];
    let mut summaries: Vec<XSummary> = vec![summarize(&st.h, 0.0, &ens0)];
    let mut x_start = ens0.into_particles();
    let mut logs = Vec::with_capacity(intervals.len());

    for &(s, e) in &intervals {
        let len = e - 1 - s;
        let k_s = *ks.last().expect("k starts at 0");
        let mut log = IntervalLog {
            start: st.pts[s],
            end: st.pts[e],
            start_index: s,
            end_index: e,
            iterations: 0,
            distances: Vec::new(),
            max_ratio: None,
        };
        let mut current = Iterate {
            x: vec![x_start.clone(); len + 1],
            z_means: vec![par::mean_map(&x_start, |v| v)],
            k_rel: vec![0.0],
            lbar: Vec::new(),
            ubar: Vec::new(),
        };
        if len > 0 {
            let raw: Vec<_> = (s..e - 1).map(|j| raw_increments(cfg, j)).collect();
            let mut high_ratio_run = 0;
            loop {
                let next = phi(&st, s, &x_start, &current.x, &raw)?;
                let d = par::mean_index(cfg.particles, |i| {
                    (0..=len).fold(0.0_f64, |m, p| m.max((next.x[p][i] - current.x[p][i]).abs()))
                });
                if let Some(&prev) = log.distances.last() {
                    let ratio = d / prev;
                    log.max_ratio = Some(log.max_ratio.map_or(ratio, |r: f64| r.max(ratio)));
                    high_ratio_run = if ratio > 0.9 { high_ratio_run + 1 } else { 0 };
                }
                log.distances.push(d);
                log.iterations += 1;
                current = next;
                if d <= opts.picard_tol {
                    break;
                }
                if high_ratio_run >= 3 {
                    return Err(Error::numerical(
                        format!(
                            "Picard map is not contracting on [{}, {}]: distances {:?}",
                            log.start, log.end, log.distances
                        ),
                        d,
                    ));
                }
                if log.iterations >= opts.max_iterations {
                    return Err(Error::numerical(
                        format!("Picard iteration on [{}, {}] hit the iteration cap", log.start, log.end),
                        d,
                    ));
                }
            }
            for p in 1..=len {
                let j = s + p;
                let k = k_s + current.k_rel[p];
                ks.push(k);
                ys.push(current.z_means[p] - k_s);
                // `Z = Y + k_s`, and the transformed barriers move with the law.
                lbar.push(current.lbar[p - 1] - k_s);
                ubar.push(current.ubar[p - 1] - k_s);
                let x = Ensemble::new(std::mem::take(&mut current.x[p]))?;
                summaries.push(summarize(&st.h, st.pts[j], &x));
                current.x[p] = x.into_particles();
            }
        }

        // Close the interval with the jump at its right end.
        let x_left = std::mem::take(&mut current.x[len]);
        let j = e - 1;
        let t1 = st.pts[e];
        let raw = raw_increments(cfg, j);
        let w: Vec<f64> = par::map_range(cfg.particles, |i| x_left[i] + apply(cfg, t1, x_left[i], &raw[i]));
        let w = Ensemble::new(w)?;
        let k_left = *ks.last().expect("non-empty");
        let (delta, lb, ub) = st.clamp(e, 0.0, &w)?;
        let k = k_left + delta;
        ks.push(k);
        ys.push(w.mean() - k_left);
        lbar.push(lb - k_left);
        ubar.push(ub - k_left);
        let x_end = w.shifted(delta);
        summaries.push(summarize(&st.h, t1, &x_end));
        x_start = x_end.into_particles();
        logs.push(log);
    }
    debug_assert_eq!(ks.len(), n);

    let solution = MeanSkorokhodSolution::from_parts(
        grid.clone(),
        ys,
        ks,
        st.barriers.clone(),
        has_l.then_some(lbar),
        has_u.then_some(ubar),
        summaries,
        None,
    );
    Ok(PicardRun { solution, intervals: logs, c_h })
}

/// `Φ` on the open part of an interval starting at grid index `s`.
fn phi(st: &State<'_>, s: usize, x_start: &[f64], x_prev: &[Vec<f64>], raw: &[Vec<Vec<(f64, f64)>>]) -> Result<Iterate> {
    let cfg = st.cfg;
    let len = x_prev.len() - 1;
    let mut z = x_start.to_vec();
    let mut out = Iterate {
        x: Vec::with_capacity(len + 1),
        z_means: Vec::with_capacity(len + 1),
        k_rel: Vec::with_capacity(len + 1),
        lbar: Vec::with_capacity(len),
        ubar: Vec::with_capacity(len),
    };
    out.x.push(x_start.to_vec());
    out.z_means.push(par::mean_map(x_start, |v| v));
    out.k_rel.push(0.0);
    for p in 1..=len {
        let j = s + p;
        let t1 = st.pts[j];
        let xp = &x_prev[p - 1];
        let rp = &raw[p - 1];
        par::for_each_indexed(&mut z, |i, zi| *zi += apply(cfg, t1, xp[i], &rp[i]));
        let ens = Ensemble::new(std::mem::take(&mut z))?;
        let (k, lb, ub) = st.clamp(j, out.k_rel[p - 1], &ens)?;
        out.k_rel.push(k);
        out.z_means.push(ens.mean());
        out.lbar.push(lb);
        out.ubar.push(ub);
        z = ens.into_particles();
        out.x.push(z.iter().map(|v| v + k).collect());
    }
    Ok(out)
}
