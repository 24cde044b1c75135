//! The Skorokhod problem with mean minimality condition.
//!
//! The reflection constrains `E h(t, X_t)` to `[l_t, u_t]` instead of each path, so
//! the compensator `k` is a deterministic function. It is obtained by transforming
//! the barriers with `H⁻¹` on the law of `Y`, solving the deterministic two-barrier
//! problem for `(EY, l̄, ū)` and shifting every particle by `k_t`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_paths::{BarrierPair, GridPath, TimeGrid};
use crate::mean_map::{sup_norm_difference, transform_point, Ensemble, MeanConstraintFunction};
use crate::par;
use crate::skorokhod_det::{clamp_recursion, clamp_step, formula_running, variation_bound};

/// Agreement required between the clamp recursion and the explicit formula.
pub const CROSS_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MeanSkorokhodProblem {
    pub grid: TimeGrid,
    /// Law of `Y_t` at every grid time.
    pub ensembles: Vec<Ensemble>,
    pub h: MeanConstraintFunction,
    pub barriers: BarrierPair,
    /// Residual tolerance of `H⁻¹`.
    pub tol: f64,
}

impl MeanSkorokhodProblem {
    /// Validates shapes and admissibility `l_0 <= E h(0, Y_0) <= u_0` (slack `2 tol`).
    pub fn new(
        grid: TimeGrid,
        ensembles: Vec<Ensemble>,
        h: MeanConstraintFunction,
        barriers: BarrierPair,
        tol: f64,
    ) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("root tolerance must be positive, got {tol}")));
        }
        if ensembles.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} ensembles for {} grid points",
                ensembles.len(),
                grid.len()
            )));
        }
        barriers.check_grid(&grid)?;
        let p = MeanSkorokhodProblem { grid, ensembles, h, barriers, tol };
        check_admissible(&p.h, &p.ensembles[0], &p.barriers, tol)?;
        Ok(p)
    }

    /// Builds the problem from per-particle paths, `paths[i][j]` = particle `i` at grid time `j`.
    pub fn from_particle_paths(
        grid: TimeGrid,
        paths: &[Vec<f64>],
        h: MeanConstraintFunction,
        barriers: BarrierPair,
        tol: f64,
    ) -> Result<Self> {
        if let Some(p) = paths.iter().find(|p| p.len() != grid.len()) {
            return Err(Error::invalid(format!(
                "particle path of length {} on a grid of {} points",
                p.len(),
                grid.len()
            )));
        }
        let ensembles = (0..grid.len())
            .map(|j| Ensemble::new(paths.iter().map(|p| p[j]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, ensembles, h, barriers, tol)
    }

    /// `t -> EY_t` on the grid.
    pub fn mean_path(&self) -> GridPath {
        let means = self.ensembles.iter().map(Ensemble::mean).collect();
        GridPath::new(self.grid.clone(), means).expect("one ensemble per grid point")
    }

    /// The problem seen through `ρⁿ`: everything is sampled at the last grid time
    /// `<= k/n` on the uniform grid `{k/n <= q}`.
    pub fn discretize(&self, n: usize, q: f64) -> Result<MeanSkorokhodProblem> {
        if q > self.grid.horizon() + crate::grid_paths::TIME_EPS {
            return Err(Error::invalid(format!(
                "horizon {q} beyond the problem horizon {}",
                self.grid.horizon()
            )));
        }
        let grid = TimeGrid::uniform(n, q)?;
        let idx: Vec<usize> = grid.points().iter().map(|&t| self.grid.index_at(t)).collect();
        let ensembles = idx.iter().map(|&j| self.ensembles[j].clone()).collect();
        let side = |p: &Option<GridPath>| {
            p.as_ref().map(|p| {
                GridPath::new(grid.clone(), idx.iter().map(|&j| p.at(j)).collect()).expect("grid length")
            })
        };
        let barriers = BarrierPair::new(side(&self.barriers.lower), side(&self.barriers.upper))?;
        Self::new(grid, ensembles, self.h.clone(), barriers, self.tol)
    }
}

/// Checks `l_0 - 2 tol <= E h(0, Y_0) <= u_0 + 2 tol`.
pub fn check_admissible(
    h: &MeanConstraintFunction,
    ens0: &Ensemble,
    barriers: &BarrierPair,
    tol: f64,
) -> Result<()> {
    let eh0 = ens0.mean_h(h, 0.0);
    let (l0, u0) = (barriers.lower_at(0), barriers.upper_at(0));
    if eh0 < l0 - 2.0 * tol || eh0 > u0 + 2.0 * tol {
        return Err(Error::ConstraintViolation {
            time: 0.0,
            detail: format!("E h(0, Y_0) = {eh0} outside [{l0}, {u0}]"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MeanSkorokhodSolution {
    pub grid: TimeGrid,
    /// Empirical `EY`.
    pub y: GridPath,
    pub k: GridPath,
    pub barriers: BarrierPair,
    pub lbar: Option<GridPath>,
    pub ubar: Option<GridPath>,
    /// Empirical `E h(t, X_t)`.
    pub eh: GridPath,
    pub x_mean: GridPath,
    pub x_std: GridPath,
    /// Law of `X_t` per grid time; dropped by simulations that only keep summaries.
    pub x: Option<Vec<Ensemble>>,
}

/// Per-time summaries of `X = Y + k` for one grid time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct XSummary {
    pub eh: f64,
    pub mean: f64,
    pub std: f64,
}

pub(crate) fn summarize(h: &MeanConstraintFunction, t: f64, x: &Ensemble) -> XSummary {
    XSummary { eh: x.mean_h(h, t), mean: x.mean(), std: x.std() }
}

impl MeanSkorokhodSolution {
    /// Assembles a solution from per-time summaries.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        grid: TimeGrid,
        y: Vec<f64>,
        k: Vec<f64>,
        barriers: BarrierPair,
        lbar: Option<Vec<f64>>,
        ubar: Option<Vec<f64>>,
        summaries: Vec<XSummary>,
        x: Option<Vec<Ensemble>>,
    ) -> Self {
        let path = |v: Vec<f64>| GridPath::new(grid.clone(), v).expect("grid length");
        MeanSkorokhodSolution {
            y: path(y),
            k: path(k),
            barriers,
            lbar: lbar.map(path),
            ubar: ubar.map(path),
            eh: path(summaries.iter().map(|s| s.eh).collect()),
            x_mean: path(summaries.iter().map(|s| s.mean).collect()),
            x_std: path(summaries.iter().map(|s| s.std).collect()),
            x,
            grid,
        }
    }

    /// The transformed barriers as a pair.
    pub fn transformed_barriers(&self) -> BarrierPair {
        BarrierPair { lower: self.lbar.clone(), upper: self.ubar.clone() }
    }

    /// Largest amount by which `E h(t, X_t)` leaves `[l_t, u_t]`.
    pub fn constraint_excess(&self) -> f64 {
        (0..self.grid.len())
            .map(|j| {
                let e = self.eh.at(j);
                (self.barriers.lower_at(j) - e).max(e - self.barriers.upper_at(j))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns `t,y,l,u,lbar,ubar,k,eh,x_mean,x_std`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,y,l,u,lbar,ubar,k,eh,x_mean,x_std\n");
        let side = |p: &Option<GridPath>, j: usize, absent: f64| p.as_ref().map_or(absent, |p| p.at(j));
        for (j, &t) in self.grid.points().iter().enumerate() {
            let row = [
                t,
                self.y.at(j),
                self.barriers.lower_at(j),
                self.barriers.upper_at(j),
                side(&self.lbar, j, f64::NEG_INFINITY),
                side(&self.ubar, j, f64::INFINITY),
                self.k.at(j),
                self.eh.at(j),
                self.x_mean.at(j),
                self.x_std.at(j),
            ];
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_float(&mut out, *v);
            }
            out.push('\n');
        }
        out
    }
}

impl MeanSkorokhodSolution {
    /// Reads the output of [`MeanSkorokhodSolution::to_csv`]. A barrier column that is
    /// entirely `-inf` (resp. `inf`) is an absent side.
    pub fn from_csv(text: &str) -> Result<Self> {
        const HEADER: &str = "t,y,l,u,lbar,ubar,k,eh,x_mean,x_std";
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HEADER) {
            return Err(Error::invalid(format!("solution CSV must start with the header `{HEADER}`")));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 10];
        for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(Error::invalid(format!("row {}: expected 10 fields, found {}", row + 2, fields.len())));
            }
            for (c, f) in fields.iter().enumerate() {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("row {}: cannot parse `{f}`", row + 2)))?;
                if v.is_nan() {
                    return Err(Error::invalid(format!("row {}: NaN", row + 2)));
                }
                cols[c].push(v);
            }
        }
        let grid = TimeGrid::new(std::mem::take(&mut cols[0]))?;
        let path = |v: &[f64]| GridPath::new(grid.clone(), v.to_vec());
        let side = |v: &[f64], absent: f64| -> Result<Option<GridPath>> {
            if v.iter().all(|&x| x == absent) { Ok(None) } else { path(v).map(Some) }
        };
        let barriers = BarrierPair::new(side(&cols[2], f64::NEG_INFINITY)?, side(&cols[3], f64::INFINITY)?)?;
        Ok(MeanSkorokhodSolution {
            y: path(&cols[1])?,
            lbar: side(&cols[4], f64::NEG_INFINITY)?,
            ubar: side(&cols[5], f64::INFINITY)?,
            k: path(&cols[6])?,
            eh: path(&cols[7])?,
            x_mean: path(&cols[8])?,
            x_std: path(&cols[9])?,
            barriers,
            x: None,
            grid,
        })
    }
}

/// Writes `v` with 17 significant digits; infinities as `inf`/`-inf`.
pub fn write_float(out: &mut String, v: f64) {
    if v.is_infinite() {
        out.push_str(if v > 0.0 { "inf" } else { "-inf" });
    } else {
        write!(out, "{v:.16e}").expect("writing to a String");
    }
}

fn shift_ensembles(p: &MeanSkorokhodProblem, k: &[f64]) -> Vec<Ensemble> {
    par::map_range(p.grid.len(), |j| p.ensembles[j].shifted(k[j]))
}

fn finish(p: &MeanSkorokhodProblem, y: Vec<f64>, k: Vec<f64>, lbar: Option<Vec<f64>>, ubar: Option<Vec<f64>>) -> MeanSkorokhodSolution {
    let x = shift_ensembles(p, &k);
    let pts = p.grid.points();
    let summaries = x.iter().enumerate().map(|(j, e)| summarize(&p.h, pts[j], e)).collect();
    MeanSkorokhodSolution::from_parts(p.grid.clone(), y, k, p.barriers.clone(), lbar, ubar, summaries, Some(x))
}

/// Mean path and transformed barriers, with absent sides kept absent.
type Transformed = (Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>);

fn transform(p: &MeanSkorokhodProblem) -> Result<Transformed> {
    let pts = p.grid.points();
    let pairs = par::try_map_range(p.grid.len(), |j| {
        transform_point(&p.h, pts[j], p.barriers.lower_at(j), p.barriers.upper_at(j), &p.ensembles[j], p.tol)
    })?;
    let y = p.ensembles.iter().map(Ensemble::mean).collect();
    let lbar = p.barriers.lower.as_ref().map(|_| pairs.iter().map(|q| q.0).collect());
    let ubar = p.barriers.upper.as_ref().map(|_| pairs.iter().map(|q| q.1).collect());
    Ok((y, lbar, ubar))
}

fn pair_on(grid: &TimeGrid, lbar: &Option<Vec<f64>>, ubar: &Option<Vec<f64>>) -> BarrierPair {
    let path = |v: &Vec<f64>| GridPath::new(grid.clone(), v.clone()).expect("grid length");
    BarrierPair { lower: lbar.as_ref().map(path), upper: ubar.as_ref().map(path) }
}

/// Two-barrier solver: clamp recursion on `(EY, l̄, ū)`, cross-checked against the
/// explicit formula.
pub fn solve_mean_two_barrier(p: &MeanSkorokhodProblem) -> Result<MeanSkorokhodSolution> {
    let (y, lbar, ubar) = transform(p)?;
    let bbar = pair_on(&p.grid, &lbar, &ubar);
    let k = clamp_recursion(&y, &bbar);
    let check = formula_running(&y, &bbar);
    let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let gap = k.iter().zip(&check).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > CROSS_CHECK_TOL * scale {
        return Err(Error::numerical("clamp recursion and explicit formula disagree", gap));
    }
    Ok(finish(p, y, k, lbar, ubar))
}

/// Lower barrier only: `k_t = sup_{s<=t} (l̄_s - EY_s)^+`.
pub fn solve_mean_lower(p: &MeanSkorokhodProblem) -> Result<MeanSkorokhodSolution> {
    if p.barriers.lower.is_none() || p.barriers.upper.is_some() {
        return Err(Error::invalid("the lower-barrier solver needs exactly a lower barrier"));
    }
    let (y, lbar, ubar) = transform(p)?;
    let lb = lbar.as_ref().expect("lower side present");
    let mut run: f64 = 0.0;
    let k = y
        .iter()
        .zip(lb)
        .enumerate()
        .map(|(j, (yv, l))| {
            if j > 0 {
                run = run.max(l - yv);
            }
            run
        })
        .collect();
    Ok(finish(p, y, k, lbar, ubar))
}

/// Upper barrier only: `k_t = -sup_{s<=t} (EY_s - ū_s)^+`.
pub fn solve_mean_upper(p: &MeanSkorokhodProblem) -> Result<MeanSkorokhodSolution> {
    if p.barriers.upper.is_none() || p.barriers.lower.is_some() {
        return Err(Error::invalid("the upper-barrier solver needs exactly an upper barrier"));
    }
    let (y, lbar, ubar) = transform(p)?;
    let ub = ubar.as_ref().expect("upper side present");
    let mut run: f64 = 0.0;
    let k = y
        .iter()
        .zip(ub)
        .enumerate()
        .map(|(j, (yv, u))| {
            if j > 0 {
                run = run.max(yv - u);
            }
            -run
        })
        .collect();
    Ok(finish(p, y, k, lbar, ubar))
}

/// Runs the discretized recursion step by step: at each grid time the barriers are
/// transformed on the current ensemble and `k` takes one clamp step.
pub fn discretized_scheme(p: &MeanSkorokhodProblem) -> Result<MeanSkorokhodSolution> {
    let pts = p.grid.points();
    let n = p.grid.len();
    let mut y = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut lbar = p.barriers.lower.as_ref().map(|_| Vec::with_capacity(n));
    let mut ubar = p.barriers.upper.as_ref().map(|_| Vec::with_capacity(n));
    for j in 0..n {
        let ens = &p.ensembles[j];
        let (lb, ub) = transform_point(&p.h, pts[j], p.barriers.lower_at(j), p.barriers.upper_at(j), ens, p.tol)?;
        let kj = if j == 0 {
            0.0
        } else {
            clamp_step(
                k[j - 1],
                ens.mean(),
                lbar.is_some().then_some(lb),
                ubar.is_some().then_some(ub),
            )
        };
        y.push(ens.mean());
        k.push(kj);
        if let Some(v) = lbar.as_mut() {
            v.push(lb);
        }
        if let Some(v) = ubar.as_mut() {
            v.push(ub);
        }
    }
    Ok(finish(p, y, k, lbar, ubar))
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalityReport {
    /// Steps where `k` rose while `E h` stayed above `l + ε` on both ends.
    pub sign_violations_up: Vec<usize>,
    /// Steps where `k` fell while `E h` stayed below `u - ε` on both ends.
    pub sign_violations_down: Vec<usize>,
    /// Largest `∫_{[t,q]} (E h - l) dk` over windows with positive band width.
    pub max_integral_lower: f64,
    /// Largest `∫_{[t,q]} (E h - u) dk` over the same windows.
    pub max_integral_upper: f64,
    /// Allowed value of either integral, `2 tol |k|_q` plus rounding.
    pub integral_tolerance: f64,
    /// Steps with `Δk > 0` but `|E h - l| > 2 tol`.
    pub complementarity_up: Vec<usize>,
    /// Steps with `Δk < 0` but `|E h - u| > 2 tol`.
    pub complementarity_down: Vec<usize>,
    pub constraint_excess: f64,
    pub k_start: f64,
    pub passed: bool,
}

/// Checks the minimality conditions of a solution against its own `E h` path.
pub fn verify_minimality(sol: &MeanSkorokhodSolution, tol: f64) -> MinimalityReport {
    let eps = 2.0 * tol;
    let (k, eh) = (sol.k.values(), sol.eh.values());
    let b = &sol.barriers;
    let n = k.len();
    let above_lower = |j: usize| eh[j] > b.lower_at(j) + eps;
    let below_upper = |j: usize| eh[j] < b.upper_at(j) - eps;

    let mut rep = MinimalityReport {
        sign_violations_up: Vec::new(),
        sign_violations_down: Vec::new(),
        max_integral_lower: 0.0,
        max_integral_upper: 0.0,
        integral_tolerance: 0.0,
        complementarity_up: Vec::new(),
        complementarity_down: Vec::new(),
        constraint_excess: sol.constraint_excess(),
        k_start: k[0],
        passed: false,
    };
    let mut variation = 0.0;
    let mut scale: f64 = 0.0;
    for j in 1..n {
        let dk = k[j] - k[j - 1];
        variation += dk.abs();
        if dk > 0.0 && above_lower(j - 1) && above_lower(j) {
            rep.sign_violations_up.push(j);
        }
        if dk < 0.0 && below_upper(j - 1) && below_upper(j) {
            rep.sign_violations_down.push(j);
        }
        if dk > 0.0 && (eh[j] - b.lower_at(j)).abs() > eps {
            rep.complementarity_up.push(j);
        }
        if dk < 0.0 && (eh[j] - b.upper_at(j)).abs() > eps {
            rep.complementarity_down.push(j);
        }
        scale = scale.max(eh[j].abs());
    }

    // Stieltjes sums over every window inside a run of positive band width: the
    // largest window sum is a maximum-subarray problem on the step contributions.
    let mut best_l: f64 = 0.0;
    let mut best_u: f64 = 0.0;
    let (mut run_l, mut run_u) = (0.0_f64, 0.0_f64);
    for j in 1..n {
        let width = b.upper_at(j) - b.lower_at(j);
        if !(width > 0.0) {
            run_l = 0.0;
            run_u = 0.0;
            continue;
        }
        let dk = k[j] - k[j - 1];
        let term = |level: f64| if dk == 0.0 || level.is_infinite() { 0.0 } else { (eh[j] - level) * dk };
        run_l = (run_l + term(b.lower_at(j))).max(term(b.lower_at(j)));
        run_u = (run_u + term(b.upper_at(j))).max(term(b.upper_at(j)));
        best_l = best_l.max(run_l);
        best_u = best_u.max(run_u);
    }
    rep.max_integral_lower = best_l;
    rep.max_integral_upper = best_u;
    rep.integral_tolerance = (eps + 1e-14 * (1.0 + scale)) * variation;

    rep.passed = rep.sign_violations_up.is_empty()
        && rep.sign_violations_down.is_empty()
        && rep.complementarity_up.is_empty()
        && rep.complementarity_down.is_empty()
        && rep.max_integral_lower <= rep.integral_tolerance
        && rep.max_integral_upper <= rep.integral_tolerance
        && rep.constraint_excess <= eps
        && rep.k_start == 0.0;
    rep
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub lhs_k: f64,
    pub lhs_x: f64,
    /// `‖h¹ - h²‖` on `[0, q] x R`.
    pub h_distance: f64,
    pub h_distance_exact: bool,
    /// `sup_t E|Y¹_t - Y²_t|`
    pub sup_mean_abs_dy: f64,
    /// `E sup_t |Y¹_t - Y²_t|`
    pub mean_sup_abs_dy: f64,
    pub barrier_distance: f64,
    /// Constant used in the bounds (upper Lipschitz constant reading).
    pub c_h: f64,
    /// The constant with the second constant read as lower / upper constant of `h²`.
    pub c_h_lower_reading: f64,
    pub c_h_upper_reading: f64,
    pub rhs_k: f64,
    pub rhs_x: f64,
    pub holds_k: bool,
    pub holds_x: bool,
}

/// Slack covering the root tolerance of the four barrier transforms.
fn root_slack(h1: &MeanConstraintFunction, h2: &MeanConstraintFunction, tol: f64) -> f64 {
    let c = h1.constants().c_lower.min(h2.constants().c_lower);
    4.0 * tol / c + 1e-12
}

/// Solves both problems and compares the sup-distance of `k` and the mean sup-distance
/// of `X` against the stability bounds. The problems must share the grid and pair
/// particle `i` of one with particle `i` of the other (common randomness).
pub fn stability_report(p1: &MeanSkorokhodProblem, p2: &MeanSkorokhodProblem, q: f64) -> Result<StabilityReport> {
    if p1.grid != p2.grid {
        return Err(Error::invalid("stability comparison needs a common grid"));
    }
    if p1.ensembles[0].len() != p2.ensembles[0].len() {
        return Err(Error::invalid("stability comparison needs paired particles"));
    }
    let last = p1.grid.index_until(q)?;
    let s1 = solve_mean_two_barrier(p1)?;
    let s2 = solve_mean_two_barrier(p2)?;
    let n_part = p1.ensembles[0].len();

    let lhs_k = s1.k.sup_distance(&s2.k, q)?;
    let (x1, x2) = (s1.x.as_ref().expect("solver keeps particles"), s2.x.as_ref().expect("solver keeps particles"));
    let lhs_x = par::mean_index(n_part, |i| {
        (0..=last).fold(0.0_f64, |m, j| m.max((x1[j].particles()[i] - x2[j].particles()[i]).abs()))
    });
    let sup_mean_abs_dy = (0..=last)
        .map(|j| {
            let (a, b) = (p1.ensembles[j].particles(), p2.ensembles[j].particles());
            par::mean_index(n_part, |i| (a[i] - b[i]).abs())
        })
        .fold(0.0_f64, f64::max);
    let mean_sup_abs_dy = par::mean_index(n_part, |i| {
        (0..=last).fold(0.0_f64, |m, j| {
            m.max((p1.ensembles[j].particles()[i] - p2.ensembles[j].particles()[i]).abs())
        })
    });
    let (h_distance, h_distance_exact) = sup_norm_difference(&p1.h, &p2.h, q, 200, 2001);
    let barrier_distance = p1.barriers.sup_distance(&p2.barriers, q)?;
    let c_h = MeanConstraintFunction::stability_constant(&p1.h, &p2.h);
    let (c_h_lower_reading, c_h_upper_reading) = MeanConstraintFunction::stability_constant_readings(&p1.h, &p2.h);
    let slack = root_slack(&p1.h, &p2.h, p1.tol.max(p2.tol));
    let rhs_k = c_h * (h_distance + sup_mean_abs_dy + barrier_distance);
    let rhs_x = (c_h + 1.0) * mean_sup_abs_dy + c_h * (h_distance + barrier_distance);
    Ok(StabilityReport {
        lhs_k,
        lhs_x,
        h_distance,
        h_distance_exact,
        sup_mean_abs_dy,
        mean_sup_abs_dy,
        barrier_distance,
        c_h,
        c_h_lower_reading,
        c_h_upper_reading,
        rhs_k,
        rhs_x,
        holds_k: lhs_k <= rhs_k + slack,
        holds_x: lhs_x <= rhs_x + slack,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusReport {
    pub lhs_k: f64,
    pub lhs_x: f64,
    /// `sup_{t<=s<=q} E|Y_s - Y_t|`
    pub sup_mean_abs_dy: f64,
    /// `E sup_{t<=s<=q} |Y_s - Y_t|`
    pub mean_sup_abs_dy: f64,
    pub time_term: f64,
    pub barrier_modulus: f64,
    pub c_h: f64,
    pub rhs_k: f64,
    pub rhs_x: f64,
    pub holds_k: bool,
    pub holds_x: bool,
}

/// Modulus of continuity of `k` and `X` on `[t, q]` against the bounds driven by
/// the increments of `Y`, the time dependence of `h` and the barrier moduli.
pub fn modulus_report(p: &MeanSkorokhodProblem, t: f64, q: f64) -> Result<ModulusReport> {
    if t > q {
        return Err(Error::invalid(format!("modulus window [{t}, {q}] is empty")));
    }
    let i0 = p.grid.index_until(t)?;
    let i1 = p.grid.index_until(q)?;
    let sol = solve_mean_two_barrier(p)?;
    let n_part = p.ensembles[0].len();
    let k = sol.k.values();
    let lhs_k = (i0..=i1).fold(0.0_f64, |m, j| m.max((k[j] - k[i0]).abs()));
    let xs = sol.x.as_ref().expect("solver keeps particles");
    let lhs_x = par::mean_index(n_part, |i| {
        let base = xs[i0].particles()[i];
        (i0..=i1).fold(0.0_f64, |m, j| m.max((xs[j].particles()[i] - base).abs()))
    });
    let ys = &p.ensembles;
    let sup_mean_abs_dy = (i0..=i1)
        .map(|j| par::mean_index(n_part, |i| (ys[j].particles()[i] - ys[i0].particles()[i]).abs()))
        .fold(0.0_f64, f64::max);
    let mean_sup_abs_dy = par::mean_index(n_part, |i| {
        let base = ys[i0].particles()[i];
        (i0..=i1).fold(0.0_f64, |m, j| m.max((ys[j].particles()[i] - base).abs()))
    });
    let pts = p.grid.points();
    let time_term = p.h.constants().lambda_h * (pts[i1] - pts[i0]);
    let barrier_modulus = p.barriers.modulus(t, q)?;
    let c_h = MeanConstraintFunction::stability_constant(&p.h, &p.h);
    let slack = root_slack(&p.h, &p.h, p.tol);
    let rhs_k = c_h * (sup_mean_abs_dy + time_term + barrier_modulus);
    let rhs_x = (c_h + 1.0) * mean_sup_abs_dy + c_h * (time_term + barrier_modulus);
    Ok(ModulusReport {
        lhs_k,
        lhs_x,
        sup_mean_abs_dy,
        mean_sup_abs_dy,
        time_term,
        barrier_modulus,
        c_h,
        rhs_k,
        rhs_x,
        holds_k: lhs_k <= rhs_k + slack,
        holds_x: lhs_x <= rhs_x + slack,
    })
}

/// Variation bound on `|k|_q` from the η-oscillations of `EY`, `l̄` and `ū`; the band
/// precondition is tested on the transformed barriers.
pub fn mean_variation_bound(sol: &MeanSkorokhodSolution, eta: f64, q: f64) -> Result<f64> {
    variation_bound(&sol.y, &sol.transformed_barriers(), eta, q)
}
