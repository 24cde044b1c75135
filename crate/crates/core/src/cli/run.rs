//! Runs a resolved configuration and writes its artifacts to `<out>/<run-id>/`.
//!
//! Everything except `timing.json` is a function of the configuration alone, so two
//! runs of the same configuration produce byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cli::config::{Job, MeanSolver, ModelSpec, PathInput, RunConfig, SpMethod};
use crate::error::{Error, Result};
use crate::grid_paths::{total_variation, BarrierPair};
use crate::mean_map::MeanConstraintFunction;
use crate::mean_sp::{
    discretized_scheme, solve_mean_lower, solve_mean_two_barrier, solve_mean_upper, verify_minimality, write_float,
    MeanSkorokhodProblem, MeanSkorokhodSolution,
};
use crate::par;
use crate::sde::{
    convergence_study, euler_mean_reflected, euler_with, investment_scenario, picard_solve, Driver, PicardOptions,
    RunOptions, SimulationConfig, REQUIRED_REDUCTION,
};
use crate::skorokhod_det::{
    check_axioms, solve_two_barrier_formula, solve_two_barrier_formula_naive, solve_two_barrier_recursive, CONTACT_TOL,
};

/// Files of one run, in writing order, plus the verdict.
#[derive(Debug, Clone)]
pub struct Produced {
    pub files: Vec<(String, Vec<u8>)>,
    pub passed: bool,
    pub summary: String,
    /// Timing details that are not reproducible and go to `timing.json` only.
    pub timing: Value,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub passed: bool,
    pub summary: String,
    pub wall_seconds: f64,
}

/// `<command>-<first 12 hex digits of the SHA-256 of the resolved configuration>`.
pub fn run_id(cfg: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let digest = Sha256::digest(&bytes);
    Ok(format!("{}-{}", cfg.command.name(), &hex::encode(digest)[..12]))
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable report");
    out.push(b'\n');
    out
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let clock = Instant::now();
    let produced = produce(cfg)?;
    let wall_seconds = clock.elapsed().as_secs_f64();
    let run_id = run_id(cfg)?;
    let run_dir = cfg.out.join(&run_id);
    fs::create_dir_all(&run_dir)?;
    for (name, bytes) in &produced.files {
        write_atomic(&run_dir, name, bytes)?;
    }
    let timing = json!({
        "wall_seconds": wall_seconds,
        "budget_seconds": cfg.budget_seconds,
        "within_budget": cfg.budget_seconds.map(|b| wall_seconds <= b),
        "details": produced.timing,
    });
    write_atomic(&run_dir, "timing.json", &to_json(&timing))?;
    Ok(Outcome { run_id, run_dir, passed: produced.passed, summary: produced.summary, wall_seconds })
}

fn meta(cfg: &RunConfig, model: Value) -> Result<Vec<u8>> {
    Ok(to_json(&json!({
        "run_id": run_id(cfg)?,
        "command": cfg.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "particles": cfg.particles,
        "steps": cfg.steps,
        "horizon": cfg.horizon,
        "tol": cfg.tol,
        "config": cfg,
        "model": model,
    })))
}

fn h_meta(h: &MeanConstraintFunction) -> Value {
    let (c_lower_reading, c_upper_reading) = MeanConstraintFunction::stability_constant_readings(h, h);
    json!({
        "name": h.name(),
        "kind": h.kind(),
        "constants": h.constants(),
        "c_h": MeanConstraintFunction::stability_constant(h, h),
        "c_h_readings": [c_lower_reading, c_upper_reading],
    })
}

fn sde_meta(sim: &SimulationConfig, h: &MeanConstraintFunction) -> Value {
    let terms: Vec<Value> = sim
        .terms
        .iter()
        .map(|t| {
            json!({
                "driver": t.driver,
                "f": t.f,
                "g": t.g,
                "lipschitz": t.lipschitz(),
                "growth": t.growth(),
                "bracket_rate": t.driver.bracket_rate(),
                "variation_rate": t.driver.variation_rate(),
                "m_rate": t.driver.m_rate(),
            })
        })
        .collect();
    json!({ "h": h_meta(h), "terms": terms, "lipschitz": sim.lipschitz(), "growth": sim.growth(), "x0": sim.x0 })
}

fn path_csv(grid_points: &[f64], columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from("t");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (j, &t) in grid_points.iter().enumerate() {
        write_float(&mut out, t);
        for (_, col) in columns {
            out.push(',');
            write_float(&mut out, col[j]);
        }
        out.push('\n');
    }
    out
}

/// Computes every artifact of a run without touching the file system (except to
/// read the input of `verify`).
pub fn produce(cfg: &RunConfig) -> Result<Produced> {
    cfg.validate()?;
    match &cfg.job {
        Job::Sp(spec) => {
            let grid = cfg.grid()?;
            let y = spec.y.on(&grid)?;
            let side = |s: &Option<PathInput>| s.as_ref().map(|p| p.on(&grid)).transpose();
            let barriers = BarrierPair::new(side(&spec.l)?, side(&spec.u)?)?;
            let sol = match spec.method {
                SpMethod::Recursion => solve_two_barrier_recursive(&y, &barriers)?,
                SpMethod::Formula => solve_two_barrier_formula(&y, &barriers)?,
                SpMethod::Naive => solve_two_barrier_formula_naive(&y, &barriers)?,
            };
            let scale = 1.0 + y.sup_abs(grid.horizon())?;
            let tol = CONTACT_TOL * scale;
            let axioms = check_axioms(&y, &barriers, &sol, tol);
            let passed = axioms.passed(tol);
            let l: Vec<f64> = (0..grid.len()).map(|j| barriers.lower_at(j)).collect();
            let u: Vec<f64> = (0..grid.len()).map(|j| barriers.upper_at(j)).collect();
            let csv = path_csv(
                grid.points(),
                &[("y", y.values()), ("l", &l), ("u", &u), ("k", sol.k.values()), ("x", sol.x.values())],
            );
            let report = json!({ "method": spec.method, "axioms": axioms, "tolerance": tol, "passed": passed });
            Ok(Produced {
                files: vec![
                    ("solution.csv".into(), csv.into_bytes()),
                    ("meta.json".into(), meta(cfg, json!({}))?),
                    ("report.json".into(), to_json(&report)),
                ],
                passed,
                summary: format!("k_q = {:e}, axioms {}", sol.k.at(grid.len() - 1), verdict(passed)),
                timing: Value::Null,
            })
        }
        Job::MeanSp(spec) => {
            let grid = cfg.grid()?;
            let h = MeanConstraintFunction::new(spec.h.clone(), cfg.horizon)?;
            let base = spec.base.on(&grid)?;
            let offsets = spec.offsets.sample(cfg.seed, cfg.particles);
            let noise = Driver::Brownian { scale: spec.noise };
            let paths = par::map_range(cfg.particles, |i| {
                let mut w = 0.0;
                (0..grid.len())
                    .map(|j| {
                        if j > 0 && spec.noise > 0.0 {
                            w += noise.increment(cfg.seed, 0, i as u64, (j - 1) as u64, cfg.steps, 1).0;
                        }
                        base.at(j) + offsets[i] + w
                    })
                    .collect::<Vec<f64>>()
            });
            let side = |s: &Option<PathInput>| s.as_ref().map(|p| p.on(&grid)).transpose();
            let barriers = BarrierPair::new(side(&spec.l)?, side(&spec.u)?)?;
            let problem = MeanSkorokhodProblem::from_particle_paths(grid, &paths, h.clone(), barriers, cfg.tol)?;
            let sol = match spec.solver {
                MeanSolver::Recursion => solve_mean_two_barrier(&problem)?,
                MeanSolver::Lower => solve_mean_lower(&problem)?,
                MeanSolver::Upper => solve_mean_upper(&problem)?,
                MeanSolver::Scheme => discretized_scheme(&problem)?,
            };
            solution_outputs(cfg, &sol, json!({ "h": h_meta(&h) }), json!({ "solver": spec.solver }), Value::Null)
        }
        Job::Simulate { model, extras } => {
            let (sim, h) = simulation(cfg, model)?;
            let run = euler_with(&sim, RunOptions { keep_particles: false, refine: extras.refine })?;
            let total: f64 = run.step_seconds.iter().sum();
            let slowest = run.step_seconds.iter().copied().fold(0.0, f64::max);
            let timing = json!({ "steps_seconds": total, "slowest_step_seconds": slowest });
            let extra = json!({ "refine": extras.refine });
            solution_outputs(cfg, &run.solution, sde_meta(&sim, &h), extra, timing)
        }
        Job::Picard { model, extras } => {
            let (sim, h) = simulation(cfg, model)?;
            let opts = PicardOptions { picard_tol: extras.picard_tol, max_iterations: extras.max_iterations };
            let run = picard_solve(&sim, opts)?;
            let max_ratio = run.intervals.iter().filter_map(|i| i.max_ratio).fold(0.0, f64::max);
            let bound = extras.picard_tol + 10.0 * cfg.tol;
            let euler_distance = if extras.compare_euler {
                let e = euler_mean_reflected(&sim)?;
                Some(run.solution.k.sup_distance(&e.solution.k, cfg.horizon)?)
            } else {
                None
            };
            let agrees = euler_distance.is_none_or(|d| d <= bound);
            let contracting = max_ratio <= extras.max_ratio;
            let extra = json!({
                "c_h": run.c_h,
                "intervals": run.intervals,
                "max_ratio": max_ratio,
                "max_ratio_allowed": extras.max_ratio,
                "euler_k_distance": euler_distance,
                "euler_k_bound": bound,
                "contracting": contracting,
                "agrees_with_euler": agrees,
            });
            let mut produced = solution_outputs(cfg, &run.solution, sde_meta(&sim, &h), extra, Value::Null)?;
            produced.passed &= agrees && contracting;
            produced.summary = format!(
                "{} intervals, max ratio {max_ratio:.3e}, |k_picard - k_euler| = {}; {}",
                run.intervals.len(),
                euler_distance.map_or("n/a".into(), |d| format!("{d:.3e}")),
                verdict(produced.passed)
            );
            Ok(produced)
        }
        Job::Converge { model, extras } => {
            let (sim, h) = simulation(cfg, model)?;
            let table = convergence_study(&sim, &extras.n_list, extras.reference_n)?;
            let passed = table.monotone && table.reduction >= REQUIRED_REDUCTION;
            let report = json!({ "table": table, "required_reduction": REQUIRED_REDUCTION, "passed": passed });
            Ok(Produced {
                files: vec![
                    ("convergence.csv".into(), table.to_csv().into_bytes()),
                    ("meta.json".into(), meta(cfg, sde_meta(&sim, &h))?),
                    ("report.json".into(), to_json(&report)),
                ],
                passed,
                summary: format!(
                    "err_k {:.3e} -> {:.3e} (x{:.1}), monotone: {}; {}",
                    table.rows[0].err_k,
                    table.rows[table.rows.len() - 1].err_k,
                    table.reduction,
                    table.monotone,
                    verdict(passed)
                ),
                timing: Value::Null,
            })
        }
        Job::Invest(spec) => {
            let params = cfg.investment(spec);
            let sim = params.simulation_config();
            let h = sim.h_fn()?;
            let run = investment_scenario(&params)?;
            let r = &run.report;
            let passed = r.admissible && r.replication_ok;
            let minimality = verify_minimality(&run.solution, cfg.tol);
            let report = json!({ "investment": r, "minimality": minimality, "passed": passed });
            Ok(Produced {
                files: vec![
                    ("solution.csv".into(), run.solution.to_csv().into_bytes()),
                    ("strategy.csv".into(), run.strategy_csv().into_bytes()),
                    ("meta.json".into(), meta(cfg, sde_meta(&sim, &h))?),
                    ("report.json".into(), to_json(&report)),
                ],
                passed,
                summary: format!(
                    "max L = {:.3e}, min U = {:.3e}, replication error {:.1e}; {}",
                    r.max_lower_risk,
                    r.min_upper_risk,
                    r.max_replication_error,
                    verdict(passed)
                ),
                timing: Value::Null,
            })
        }
        Job::Verify(spec) => {
            let text = fs::read_to_string(&spec.solution)
                .map_err(|e| Error::Config(format!("{}: {e}", spec.solution.display())))?;
            let sol = MeanSkorokhodSolution::from_csv(&text)?;
            let rep = verify_minimality(&sol, cfg.tol);
            let passed = rep.passed;
            let summary = serde_json::to_string_pretty(&rep).expect("serializable report");
            Ok(Produced {
                files: vec![
                    ("meta.json".into(), meta(cfg, json!({ "points": sol.grid.len() }))?),
                    ("report.json".into(), to_json(&json!({ "minimality": rep, "passed": passed }))),
                ],
                passed,
                summary,
                timing: Value::Null,
            })
        }
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed { "PASS" } else { "FAIL" }
}

fn simulation(cfg: &RunConfig, model: &ModelSpec) -> Result<(SimulationConfig, MeanConstraintFunction)> {
    let sim = cfg.simulation(model);
    let h = sim.h_fn()?;
    Ok((sim, h))
}

/// `solution.csv`, `meta.json` and a `report.json` with the minimality checks.
fn solution_outputs(
    cfg: &RunConfig,
    sol: &MeanSkorokhodSolution,
    model: Value,
    extra: Value,
    timing: Value,
) -> Result<Produced> {
    let rep = verify_minimality(sol, cfg.tol);
    let passed = rep.passed;
    let k_end = sol.k.at(sol.grid.len() - 1);
    let report = json!({
        "minimality": rep,
        "constraint_excess": sol.constraint_excess(),
        "k_total_variation": total_variation(&sol.k, sol.grid.horizon())?,
        "details": extra,
        "passed": passed,
    });
    Ok(Produced {
        files: vec![
            ("solution.csv".into(), sol.to_csv().into_bytes()),
            ("meta.json".into(), meta(cfg, model)?),
            ("report.json".into(), to_json(&report)),
        ],
        passed,
        summary: format!("k_q = {k_end:e}, constraint excess {:.1e}; {}", sol.constraint_excess(), verdict(passed)),
        timing,
    })
}
