//! Acceptance run: one PASS/FAIL line per criterion, with its wall time and limit.
//! Exits non-zero when any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use mean_reflect::cli::config::Job;
use mean_reflect::cli::{execute, parse_config, Command, Overrides, RunConfig};
use mean_reflect::grid_paths::{total_variation, BarrierPair, GridPath, TimeGrid};
use mean_reflect::mean_map::{h_forward, h_inverse, Ensemble, HKind, MeanConstraintFunction};
use mean_reflect::mean_sp::{
    discretized_scheme, mean_variation_bound, solve_mean_lower, solve_mean_two_barrier, solve_mean_upper,
    stability_report, MeanSkorokhodProblem, MeanSkorokhodSolution,
};
use mean_reflect::sde::{
    convergence_study, euler_mean_reflected, investment_scenario, picard_solve, PicardOptions, NOISE_ALLOWANCE,
    REQUIRED_REDUCTION,
};
use mean_reflect::skorokhod_det::{
    check_axioms, solve_lower, solve_two_barrier_formula, solve_two_barrier_formula_naive,
    solve_two_barrier_recursive, solve_upper, stability_bound_check, variation_bound,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(20_240_601);
    r.set_stream(stream);
    r
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn scenario(command: Command, name: &str) -> RunConfig {
    let overrides = Overrides { scenario: Some(name.into()), ..Default::default() };
    parse_config(command, None, &overrides).unwrap_or_else(|e| panic!("scenario {name}: {e}"))
}

/// Random walk with occasional jumps, `len` points.
fn walk(r: &mut ChaCha8Rng, start: f64, len: usize, scale: f64, jump_prob: f64) -> Vec<f64> {
    let step = scale / (len as f64).sqrt();
    let mut v = start;
    let mut out = Vec::with_capacity(len);
    out.push(v);
    for _ in 1..len {
        v += step * normal(r);
        if r.random::<f64>() < jump_prob {
            v += r.random_range(-1.0..1.0);
        }
        out.push(v);
    }
    out
}

/// Wavy lower barrier with a possible jump and an upper barrier `width(t)` above it.
fn band(r: &mut ChaCha8Rng, grid: &TimeGrid, min_width: f64, max_width: f64) -> (Vec<f64>, Vec<f64>) {
    let (amp, freq, phase) = (r.random_range(0.0..0.8), r.random_range(0.5..6.0), r.random_range(0.0..6.3));
    let jump_at = r.random_range(0.0..grid.horizon());
    let jump = r.random_range(-0.5..0.5);
    let (w0, w1) = (r.random_range(min_width..max_width), r.random_range(min_width..max_width));
    let q = grid.horizon();
    let mut l = Vec::with_capacity(grid.len());
    let mut u = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let lv = amp * (freq * t + phase).sin() + if t >= jump_at { jump } else { 0.0 };
        let w = w0 + (w1 - w0) * t / q;
        l.push(lv);
        u.push(lv + w);
    }
    (l, u)
}

fn det_instance(r: &mut ChaCha8Rng, max_points: usize) -> (GridPath, BarrierPair) {
    let len = r.random_range(2..=max_points);
    let grid = TimeGrid::uniform(len - 1, 1.0).unwrap();
    let (l, u) = band(r, &grid, 0.0, 1.5);
    let start = l[0] + r.random::<f64>() * (u[0] - l[0]);
    let scale = r.random_range(0.2..5.0);
    let y = walk(r, start, grid.len(), scale, 0.002);
    let y = GridPath::new(grid.clone(), y).unwrap();
    let b = BarrierPair::two_sided(GridPath::new(grid.clone(), l).unwrap(), GridPath::new(grid, u).unwrap()).unwrap();
    (y, b)
}

fn registry_h(r: &mut ChaCha8Rng, horizon: f64) -> MeanConstraintFunction {
    let kind = match r.random_range(0..6) {
        0 => HKind::Identity,
        1 => HKind::Affine { a: r.random_range(0.2..3.0), b: r.random_range(-1.0..1.0) },
        2 => HKind::Soft { beta: r.random_range(0.0..0.95) },
        3 => HKind::TimeTilt { gamma: r.random_range(0.0..1.5) },
        4 => HKind::Concave { beta: r.random_range(0.0..2.0) },
        _ => HKind::Kinked { neg_slope: r.random_range(0.3..3.0), pos_slope: r.random_range(0.3..3.0) },
    };
    MeanConstraintFunction::new(kind, horizon).unwrap()
}

/// Per-particle paths `paths[i][j]` on `grid`.
fn particle_paths(r: &mut ChaCha8Rng, grid: &TimeGrid, particles: usize, scale: f64) -> Vec<Vec<f64>> {
    let drift = r.random_range(-2.0..2.0);
    (0..particles)
        .map(|_| {
            let x0 = r.random_range(-0.5..0.5);
            let mut p = walk(r, x0, grid.len(), scale, 0.01);
            for (v, &t) in p.iter_mut().zip(grid.points()) {
                *v += drift * t;
            }
            p
        })
        .collect()
}

/// Moves time 0 of every path so that `E h(0, Y_0)` sits at `target`.
fn admit(paths: &mut [Vec<f64>], h: &MeanConstraintFunction, target: f64) {
    let e0 = Ensemble::new(paths.iter().map(|p| p[0]).collect()).unwrap();
    let shift = h_inverse(h, 0.0, target, &e0, 1e-13).unwrap() - e0.mean();
    for p in paths.iter_mut() {
        p[0] += shift;
    }
}

struct MeanInstance {
    problem: MeanSkorokhodProblem,
    paths: Vec<Vec<f64>>,
    l: Vec<f64>,
    u: Vec<f64>,
}

fn mean_instance(r: &mut ChaCha8Rng, tol: f64, min_width: f64) -> MeanInstance {
    let steps = r.random_range(10..150);
    let horizon = r.random_range(0.5..2.0);
    let grid = TimeGrid::uniform(steps, horizon).unwrap();
    let h = registry_h(r, horizon);
    let (l, u) = band(r, &grid, min_width, min_width + 1.5);
    let particles = r.random_range(1..300);
    let scale = r.random_range(0.3..3.0);
    let mut paths = particle_paths(r, &grid, particles, scale);
    admit(&mut paths, &h, l[0] + r.random::<f64>() * (u[0] - l[0]));
    let b = BarrierPair::two_sided(GridPath::new(grid.clone(), l.clone()).unwrap(), GridPath::new(grid.clone(), u.clone()).unwrap())
        .unwrap();
    let problem = MeanSkorokhodProblem::from_particle_paths(grid, &paths, h, b, tol).unwrap();
    MeanInstance { problem, paths, l, u }
}

fn formula_vs_recursion() -> Outcome {
    let mut r = rng(1);
    let (mut worst, mut worst_naive, mut naive_runs) = (0.0_f64, 0.0_f64, 0);
    for _ in 0..1000 {
        let (y, b) = det_instance(&mut r, 10_001);
        let rec = solve_two_barrier_recursive(&y, &b).map_err(|e| e.to_string())?;
        let fml = solve_two_barrier_formula(&y, &b).map_err(|e| e.to_string())?;
        worst = worst.max(rec.k.sup_distance(&fml.k, 1.0).unwrap());
        if y.len() <= 1500 {
            let naive = solve_two_barrier_formula_naive(&y, &b).map_err(|e| e.to_string())?;
            worst_naive = worst_naive.max(rec.k.sup_distance(&naive.k, 1.0).unwrap());
            naive_runs += 1;
        }
    }
    let detail = format!("max |k_formula - k_recursion| = {worst:.2e}, quadratic form on {naive_runs}: {worst_naive:.2e}");
    if worst <= 1e-10 && worst_naive <= 1e-10 { Ok(detail) } else { Err(detail) }
}

fn axioms() -> Outcome {
    let mut r = rng(1);
    let (mut band_excess, mut sign_failures, mut one_sided_mismatch) = (0.0_f64, 0, 0);
    for _ in 0..1000 {
        let (y, b) = det_instance(&mut r, 10_001);
        let sol = solve_two_barrier_recursive(&y, &b).map_err(|e| e.to_string())?;
        let rep = check_axioms(&y, &b, &sol, 1e-12);
        band_excess = band_excess.max(rep.band_excess);
        if !rep.passed(1e-12) {
            sign_failures += 1;
        }
        let (l, u) = (b.lower.clone().unwrap(), b.upper.clone().unwrap());
        let far = 1e6 + y.sup_abs(1.0).unwrap();
        let grid = y.grid().clone();
        let lower_only = solve_lower(&y, &l).map_err(|e| e.to_string())?;
        let sentinel_up = BarrierPair::two_sided(l.clone(), GridPath::constant(&grid, far)).unwrap();
        let upper_only = solve_upper(&y, &u).map_err(|e| e.to_string())?;
        let sentinel_down = BarrierPair::two_sided(GridPath::constant(&grid, -far), u.clone()).unwrap();
        if lower_only.k != solve_two_barrier_recursive(&y, &sentinel_up).unwrap().k
            || upper_only.k != solve_two_barrier_recursive(&y, &sentinel_down).unwrap().k
        {
            one_sided_mismatch += 1;
        }
    }
    let detail = format!(
        "band excess {band_excess:.1e}, axiom failures {sign_failures}, one-barrier mismatches {one_sided_mismatch}"
    );
    if band_excess <= 1e-12 && sign_failures == 0 && one_sided_mismatch == 0 { Ok(detail) } else { Err(detail) }
}

fn lipschitz_bounds() -> Outcome {
    let mut r = rng(3);
    let mut det_violations = 0;
    for _ in 0..1000 {
        let (y1, b1) = det_instance(&mut r, 2000);
        let grid = y1.grid().clone();
        let eps = r.random_range(0.0..0.3);
        let dy = walk(&mut r, 0.0, grid.len(), eps, 0.01);
        let y2 = y1.zip_with(&GridPath::new(grid.clone(), dy).unwrap(), |a, b| a + b).unwrap();
        let (dl, du) = (r.random_range(-eps..=eps), r.random_range(-eps..=eps));
        let l2 = b1.lower.as_ref().unwrap().map(|v| v + dl);
        let u2 = b1.upper.as_ref().unwrap().zip_with(&l2, |v, l| (v + du).max(l)).unwrap();
        let b2 = BarrierPair::two_sided(l2, u2).unwrap();
        // start y2 inside its band
        let (lo, hi) = (b2.lower_at(0), b2.upper_at(0));
        let mut v = y2.into_values();
        v[0] = v[0].clamp(lo, hi);
        let y2 = GridPath::new(grid.clone(), v).unwrap();
        let rep = stability_bound_check(&y1, &y2, &b1, &b2, 1.0).map_err(|e| e.to_string())?;
        if !rep.holds() {
            det_violations += 1;
        }
    }
    let mut mean_violations = 0;
    for _ in 0..200 {
        let tol = 1e-11;
        let a = mean_instance(&mut r, tol, 0.0);
        let grid = a.problem.grid.clone();
        let q = grid.horizon();
        let h2 = if r.random::<f64>() < 0.5 { a.problem.h.clone() } else { registry_h(&mut r, q) };
        let eps = r.random_range(0.0..0.3);
        let mut paths2: Vec<Vec<f64>> = a
            .paths
            .iter()
            .map(|p| {
                let d = walk(&mut r, 0.0, p.len(), eps, 0.0);
                p.iter().zip(&d).map(|(x, e)| x + e).collect()
            })
            .collect();
        let (dl, du) = (r.random_range(-eps..=eps), r.random_range(-eps..=eps));
        let l2: Vec<f64> = a.l.iter().map(|v| v + dl).collect();
        let u2: Vec<f64> = a.u.iter().zip(&l2).map(|(v, l)| (v + du).max(*l)).collect();
        admit(&mut paths2, &h2, 0.5 * (l2[0] + u2[0]));
        let b2 = BarrierPair::two_sided(GridPath::new(grid.clone(), l2).unwrap(), GridPath::new(grid.clone(), u2).unwrap())
            .unwrap();
        let p2 = MeanSkorokhodProblem::from_particle_paths(grid, &paths2, h2, b2, tol).map_err(|e| e.to_string())?;
        let rep = stability_report(&a.problem, &p2, q).map_err(|e| e.to_string())?;
        if !(rep.holds_k && rep.holds_x) {
            mean_violations += 1;
        }
    }
    let detail = format!("violations: {det_violations}/1000 deterministic, {mean_violations}/200 mean");
    if det_violations == 0 && mean_violations == 0 { Ok(detail) } else { Err(detail) }
}

fn variation_bounds() -> Outcome {
    let mut r = rng(4);
    let (mut det_checked, mut det_violations) = (0, 0);
    for _ in 0..800 {
        let len = r.random_range(10..3000);
        let grid = TimeGrid::uniform(len, 1.0).unwrap();
        let (l, u) = band(&mut r, &grid, 0.3, 2.0);
        let start = l[0] + r.random::<f64>() * (u[0] - l[0]);
        let scale = r.random_range(0.2..4.0);
        let y = GridPath::new(grid.clone(), walk(&mut r, start, grid.len(), scale, 0.003)).unwrap();
        let b = BarrierPair::two_sided(GridPath::new(grid.clone(), l).unwrap(), GridPath::new(grid, u).unwrap()).unwrap();
        let eta = r.random_range(0.01..=1.0) * b.min_width(1.0).unwrap() / 6.0;
        let Ok(bound) = variation_bound(&y, &b, eta, 1.0) else { continue };
        det_checked += 1;
        let k = solve_two_barrier_recursive(&y, &b).map_err(|e| e.to_string())?.k;
        if total_variation(&k, 1.0).unwrap() > bound {
            det_violations += 1;
        }
    }
    let (mut mean_checked, mut mean_violations) = (0, 0);
    for _ in 0..800 {
        let inst = mean_instance(&mut r, 1e-11, 0.5);
        let q = inst.problem.grid.horizon();
        let sol = solve_mean_two_barrier(&inst.problem).map_err(|e| e.to_string())?;
        let width = sol.transformed_barriers().min_width(q).unwrap();
        let eta = r.random_range(0.01..=1.0) * width / 6.0;
        let Ok(bound) = mean_variation_bound(&sol, eta, q) else { continue };
        mean_checked += 1;
        if total_variation(&sol.k, q).unwrap() > bound {
            mean_violations += 1;
        }
    }
    let detail = format!(
        "deterministic {det_violations} violations on {det_checked}, mean {mean_violations} violations on {mean_checked}"
    );
    if det_checked >= 500 && mean_checked >= 500 && det_violations == 0 && mean_violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn h_round_trip() -> Outcome {
    let mut r = rng(5);
    let (mut worst, mut identity_mismatch) = (0.0_f64, 0);
    for _ in 0..1000 {
        let h = registry_h(&mut r, 2.0);
        let n = r.random_range(1..=1000);
        let (centre, spread) = (r.random_range(-3.0..3.0), r.random_range(0.0..3.0));
        let ens = Ensemble::new((0..n).map(|_| centre + spread * normal(&mut r)).collect()).unwrap();
        let t = r.random_range(0.0..=2.0);
        let w = r.random_range(-6.0..6.0);
        let z = h_inverse(&h, t, w, &ens, 1e-10).map_err(|e| e.to_string())?;
        worst = worst.max((h_forward(&h, t, z, &ens) - w).abs());
        let id = MeanConstraintFunction::identity();
        if h_inverse(&id, t, w, &ens, 1e-10).map_err(|e| e.to_string())? != w {
            identity_mismatch += 1;
        }
    }
    let detail = format!("max |H(H^-1(w)) - w| = {worst:.2e}, identity mismatches {identity_mismatch}");
    if worst <= 1e-10 && identity_mismatch == 0 { Ok(detail) } else { Err(detail) }
}

fn constraint_and_equivariance() -> Outcome {
    let mut r = rng(6);
    let tol = 1e-10;
    let mut excess = f64::NEG_INFINITY;
    let mut track = |sol: &MeanSkorokhodSolution| excess = excess.max(sol.constraint_excess());
    for _ in 0..300 {
        let inst = mean_instance(&mut r, tol, 0.0);
        let p = &inst.problem;
        track(&solve_mean_two_barrier(p).map_err(|e| e.to_string())?);
        track(&discretized_scheme(p).map_err(|e| e.to_string())?);
        let lower = MeanSkorokhodProblem::new(
            p.grid.clone(),
            p.ensembles.clone(),
            p.h.clone(),
            BarrierPair::lower_only(p.barriers.lower.clone().unwrap()),
            tol,
        )
        .map_err(|e| e.to_string())?;
        track(&solve_mean_lower(&lower).map_err(|e| e.to_string())?);
        let upper = MeanSkorokhodProblem::new(
            p.grid.clone(),
            p.ensembles.clone(),
            p.h.clone(),
            BarrierPair::upper_only(p.barriers.upper.clone().unwrap()),
            tol,
        )
        .map_err(|e| e.to_string())?;
        track(&solve_mean_upper(&upper).map_err(|e| e.to_string())?);
    }
    for name in ["closed-form", "picard-soft", "picard-kinked"] {
        let cfg = scenario(if name == "closed-form" { Command::Simulate } else { Command::Picard }, name);
        let (Job::Simulate { model, .. } | Job::Picard { model, .. }) = &cfg.job else { unreachable!() };
        let sim = cfg.simulation(model);
        track(&euler_mean_reflected(&sim).map_err(|e| e.to_string())?.solution);
        if name != "closed-form" {
            track(&picard_solve(&sim, PicardOptions::default()).map_err(|e| e.to_string())?.solution);
        }
    }

    let mut worst_affine = 0.0_f64;
    for _ in 0..300 {
        let steps = r.random_range(5..200);
        let grid = TimeGrid::uniform(steps, 1.0).unwrap();
        let (l, u) = band(&mut r, &grid, 0.0, 1.5);
        let (particles, scale) = (r.random_range(1..100), r.random_range(0.3..3.0));
        let mut paths = particle_paths(&mut r, &grid, particles, scale);
        let id = MeanConstraintFunction::identity();
        admit(&mut paths, &id, l[0] + r.random::<f64>() * (u[0] - l[0]));
        let (a, b, c) = (r.random_range(0.2..4.0), r.random_range(-2.0..2.0), r.random_range(-3.0..3.0));
        let gp = |v: Vec<f64>| GridPath::new(grid.clone(), v).unwrap();
        let base = MeanSkorokhodProblem::from_particle_paths(
            grid.clone(),
            &paths,
            id.clone(),
            BarrierPair::two_sided(gp(l.clone()), gp(u.clone())).unwrap(),
            tol,
        )
        .map_err(|e| e.to_string())?;
        let aff = MeanConstraintFunction::new(HKind::Affine { a, b }, 1.0).unwrap();
        let scaled = MeanSkorokhodProblem::from_particle_paths(
            grid.clone(),
            &paths,
            aff,
            BarrierPair::two_sided(gp(l.iter().map(|v| a * v + b).collect()), gp(u.iter().map(|v| a * v + b).collect()))
                .unwrap(),
            tol,
        )
        .map_err(|e| e.to_string())?;
        let shifted_paths: Vec<Vec<f64>> = paths.iter().map(|p| p.iter().map(|v| v + c).collect()).collect();
        let shifted = MeanSkorokhodProblem::from_particle_paths(
            grid.clone(),
            &shifted_paths,
            id,
            BarrierPair::two_sided(gp(l.iter().map(|v| v + c).collect()), gp(u.iter().map(|v| v + c).collect()))
                .unwrap(),
            tol,
        )
        .map_err(|e| e.to_string())?;
        let k0 = solve_mean_two_barrier(&base).map_err(|e| e.to_string())?.k;
        for other in [&scaled, &shifted] {
            let k = solve_mean_two_barrier(other).map_err(|e| e.to_string())?.k;
            worst_affine = worst_affine.max(k.sup_distance(&k0, 1.0).unwrap());
        }
    }
    let detail = format!("max constraint excess {excess:.1e} (allowed {:.0e}), affine equivariance {worst_affine:.1e}", 2.0 * tol);
    if excess <= 2.0 * tol && worst_affine <= 1e-10 { Ok(detail) } else { Err(detail) }
}

fn closed_form() -> Outcome {
    let cfg = scenario(Command::Simulate, "closed-form");
    let Job::Simulate { model, .. } = &cfg.job else { unreachable!() };
    let sol = euler_mean_reflected(&cfg.simulation(model)).map_err(|e| e.to_string())?.solution;
    let exact_err = sol
        .grid
        .points()
        .iter()
        .enumerate()
        .map(|(j, &t)| (sol.k.at(j) - (t - 1.0).max(0.0)).abs())
        .fold(0.0, f64::max);

    let cfg = scenario(Command::Simulate, "rising-floor");
    let Job::Simulate { model, .. } = &cfg.job else { unreachable!() };
    let (n, steps, q) = (cfg.particles, cfg.steps, cfg.horizon);
    let sol = euler_mean_reflected(&cfg.simulation(model)).map_err(|e| e.to_string())?.solution;
    let mut worst_z = 0.0_f64;
    let mut outside = 0;
    for (j, &t) in sol.grid.points().iter().enumerate() {
        let dev = (sol.k.at(j) - 0.5 * t).abs();
        let band = 4.0 * sol.x_std.at(j) / (n as f64).sqrt();
        if dev > band {
            outside += 1;
        }
        if band > 0.0 {
            worst_z = worst_z.max(4.0 * dev / band);
        }
    }
    let detail = format!(
        "max |k - (t-1)+| = {exact_err:.1e}; rising floor N = {n}, n = {steps}, q = {q}: {outside} points outside 4 sd/sqrt(N), max z {worst_z:.2}"
    );
    if exact_err <= 1e-12 && outside == 0 && n == 100_000 && steps == 200 && q == 2.0 { Ok(detail) } else { Err(detail) }
}

fn picard_vs_euler() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in mean_reflect::cli::scenarios::PICARD {
        let cfg = scenario(Command::Picard, name);
        let Job::Picard { model, extras } = &cfg.job else { unreachable!() };
        let sim = cfg.simulation(model);
        let opts = PicardOptions { picard_tol: extras.picard_tol, max_iterations: extras.max_iterations };
        let run = picard_solve(&sim, opts).map_err(|e| format!("{name}: {e}"))?;
        let euler = euler_mean_reflected(&sim).map_err(|e| format!("{name}: {e}"))?;
        let dist = run.solution.k.sup_distance(&euler.solution.k, cfg.horizon).unwrap();
        let ratio = run.intervals.iter().filter_map(|i| i.max_ratio).fold(0.0, f64::max);
        let bound = extras.picard_tol + 10.0 * cfg.tol;
        ok &= cfg.steps == 1024 && dist <= bound && ratio <= 0.6;
        parts.push(format!("{name}: {dist:.1e} (ratio {ratio:.2e}, {} intervals)", run.intervals.len()));
    }
    let detail = parts.join("; ");
    if ok { Ok(detail) } else { Err(detail) }
}

fn convergence() -> Outcome {
    let cfg = scenario(Command::Converge, "smooth-brownian");
    let Job::Converge { model, extras } = &cfg.job else { unreachable!() };
    let table = convergence_study(&cfg.simulation(model), &extras.n_list, extras.reference_n).map_err(|e| e.to_string())?;
    let errs: Vec<String> = table.rows.iter().map(|row| format!("{}: {:.2e}", row.n, row.err_k)).collect();
    let detail = format!(
        "err_k vs n = {} reference: {}; reduction x{:.1}, monotone within {:.0}%: {}",
        table.reference_n,
        errs.join(", "),
        table.reduction,
        NOISE_ALLOWANCE * 100.0,
        table.monotone
    );
    let expected_grid = extras.n_list == [50, 100, 200, 400, 800] && extras.reference_n == 3200;
    if expected_grid && table.monotone && table.reduction >= REQUIRED_REDUCTION { Ok(detail) } else { Err(detail) }
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "timing.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let mut compared = 0;
    for (command, name) in [(Command::MeanSp, "mean-sp-soft"), (Command::Picard, "picard-poisson"), (Command::Invest, "investment")] {
        let mut runs = Vec::new();
        for threads in [1, 4] {
            let out = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = scenario(command, name);
            cfg.out = out.path().to_path_buf();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
            let outcome = pool.install(|| execute(&cfg)).map_err(|e| format!("{name}: {e}"))?;
            runs.push((outcome.run_id.clone(), artifacts(&outcome.run_dir)));
        }
        if runs[0] != runs[1] {
            return Err(format!("{name}: artifacts differ between 1 and 4 workers"));
        }
        compared += runs[0].1.len();
    }
    Ok(format!("{compared} artifacts byte-identical across 1 and 4 workers"))
}

fn investment() -> Outcome {
    let cfg = scenario(Command::Invest, "investment");
    let Job::Invest(spec) = &cfg.job else { unreachable!() };
    let run = investment_scenario(&cfg.investment(spec)).map_err(|e| e.to_string())?;
    let rep = &run.report;
    let excess = run.solution.constraint_excess();
    let detail = format!(
        "constraint excess {excess:.1e}, max L {:.1e}, min U {:.2e}, replication error {:.1e}",
        rep.max_lower_risk, rep.min_upper_risk, rep.max_replication_error
    );
    if rep.admissible && rep.replication_ok && excess <= 2.0 * cfg.tol { Ok(detail) } else { Err(detail) }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("formula matches recursion", 60.0, formula_vs_recursion),
        ("deterministic axioms", 60.0, axioms),
        ("Lipschitz bounds", 300.0, lipschitz_bounds),
        ("variation bounds", 60.0, variation_bounds),
        ("H inverse round trip", 30.0, h_round_trip),
        ("mean constraint and equivariance", 120.0, constraint_and_equivariance),
        ("closed-form SDE", 120.0, closed_form),
        ("Picard against Euler", 300.0, picard_vs_euler),
        ("grid refinement", 300.0, convergence),
        ("determinism", 60.0, determinism),
        ("investment example", 120.0, investment),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = check();
        let secs = clock.elapsed().as_secs_f64();
        let (verdict, detail) = match outcome {
            Ok(d) if secs <= *limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the time limit")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!("{verdict} {:>2} {name} [{secs:.1} s / {limit:.0} s]: {detail}", i + 1);
    }
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
