//! Grid refinement against a fine reference run driven by the same noise.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mean_sp::write_float;
use crate::par;
use crate::sde::{euler_with, RunOptions, SimulationConfig};

/// Allowed growth of `err_k` from one resolution to the next.
pub const NOISE_ALLOWANCE: f64 = 0.2;

/// Required ratio of `err_k` at the coarsest to `err_k` at the finest resolution.
pub const REQUIRED_REDUCTION: f64 = 4.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `max_j |k^n_{t_j} - k^ref_{t_j}|` over the coarse grid.
    pub err_k: f64,
    /// `E max_j |X^n_{t_j} - X^ref_{t_j}|` over particles.
    pub err_x: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub reference_n: usize,
    pub rows: Vec<ConvergenceRow>,
    /// `err_k` non-increasing within the noise allowance.
    pub monotone: bool,
    /// `err_k` at the coarsest over `err_k` at the finest resolution.
    pub reduction: f64,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,err_k,err_x\n");
        for row in &self.rows {
            out.push_str(&row.n.to_string());
            out.push(',');
            write_float(&mut out, row.err_k);
            out.push(',');
            write_float(&mut out, row.err_x);
            out.push('\n');
        }
        out
    }
}

/// Runs the Euler scheme at `steps = n` for every `n` in `n_list` and compares with
/// the run at `reference_n`. Each coarse increment is the sum of the reference
/// increments it covers, so the comparison is pathwise.
pub fn convergence_study(cfg: &SimulationConfig, n_list: &[usize], reference_n: usize) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(Error::invalid("empty resolution list"));
    }
    if let Some(&bad) = n_list.iter().find(|&&n| n == 0 || !reference_n.is_multiple_of(n) || n >= reference_n) {
        return Err(Error::invalid(format!("resolution {bad} must be below and divide the reference {reference_n}")));
    }
    let keep = RunOptions { keep_particles: true, refine: 1 };
    let mut reference_cfg = cfg.clone();
    reference_cfg.steps = reference_n;
    let reference = euler_with(&reference_cfg, keep)?.solution;
    let ref_laws = reference.x.as_ref().expect("particles kept");

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let refine = reference_n / n;
        let mut coarse_cfg = cfg.clone();
        coarse_cfg.steps = n;
        let coarse = euler_with(&coarse_cfg, RunOptions { keep_particles: true, refine })?.solution;
        let laws = coarse.x.as_ref().expect("particles kept");
        let err_k = (0..coarse.grid.len())
            .map(|j| (coarse.k.at(j) - reference.k.at(j * refine)).abs())
            .fold(0.0, f64::max);
        let err_x = par::mean_index(cfg.particles, |i| {
            (0..laws.len()).fold(0.0_f64, |m, j| m.max((laws[j].particles()[i] - ref_laws[j * refine].particles()[i]).abs()))
        });
        rows.push(ConvergenceRow { n, err_k, err_x });
    }
    let monotone = rows.windows(2).all(|w| w[1].err_k <= (1.0 + NOISE_ALLOWANCE) * w[0].err_k);
    let last = rows.last().expect("non-empty").err_k;
    let reduction = if last > 0.0 { rows[0].err_k / last } else { f64::INFINITY };
    Ok(ConvergenceTable { reference_n, rows, monotone, reduction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::PiecewiseSpec;
    use crate::mean_map::HKind;
    use crate::sde::{CoefFn, Driver, SdeTerm, X0Sampler};

    #[test]
    fn errors_shrink_on_smooth_problem() {
        let cfg = SimulationConfig {
            seed: 3,
            particles: 200,
            steps: 10,
            horizon: 1.0,
            tol: 1e-11,
            x0: X0Sampler::Constant { value: 1.0 },
            terms: vec![
                SdeTerm::new(CoefFn::Const { value: 0.5 }, CoefFn::Zero, Driver::Brownian { scale: 1.0 }),
                SdeTerm::new(CoefFn::Zero, CoefFn::Affine { slope: -1.0, intercept: 0.0 }, Driver::Clock { rate: 1.0 }),
            ],
            h: HKind::Soft { beta: 0.3 },
            lower: Some(PiecewiseSpec::constant(0.8, 1.0)),
            upper: None,
        };
        let table = convergence_study(&cfg, &[10, 20, 40, 80], 640).unwrap();
        assert!(table.monotone, "{table:?}");
        assert!(table.reduction >= REQUIRED_REDUCTION, "{table:?}");
        assert!(table.rows.iter().all(|r| r.err_x.is_finite()));
        assert_eq!(table.to_csv().lines().count(), 5);
    }

    #[test]
    fn rejects_non_dividing_resolution() {
        let cfg = SimulationConfig {
            seed: 0,
            particles: 1,
            steps: 1,
            horizon: 1.0,
            tol: 1e-10,
            x0: X0Sampler::Constant { value: 0.0 },
            terms: Vec::new(),
            h: HKind::Identity,
            lower: None,
            upper: None,
        };
        assert!(convergence_study(&cfg, &[30], 100).is_err());
    }
}
