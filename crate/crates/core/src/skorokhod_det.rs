//! The deterministic Skorokhod problem with two time-dependent barriers.
//!
//! Given `y` and barriers `l <= u` on a common grid with `l_0 <= y_0 <= u_0`, find
//! `x = y + k` with `k_0 = 0`, `x` confined to `[l, u]`, and `k` increasing only while
//! `x` sits on `l` and decreasing only while it sits on `u`.
//!
//! The production solver is the one-pass clamp recursion
//! `k_{j+1} = max(min(k_j, u_{j+1} - y_{j+1}), l_{j+1} - y_{j+1})`. The explicit
//! max/inf/sup formula
//!
//! ```text
//! k_t = -max( 0 ∧ inf_{u<=t}(y_u - l_u),  sup_{s<=t} [ (y_s - u_s) ∧ inf_{s<=u<=t}(y_u - l_u) ] )
//! ```
//!
//! is kept as an independent cross-check, both in an O(n) running form and in the
//! O(n²) backward-scan form used as an oracle on small grids.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_paths::{count_oscillations, BarrierPair, GridPath};

/// Absolute tolerance for boundary-contact tests.
pub const CONTACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SkorokhodSolution {
    pub x: GridPath,
    pub k: GridPath,
}

/// One clamp step; an absent side drops its branch.
#[inline]
pub fn clamp_step(k_prev: f64, y: f64, lower: Option<f64>, upper: Option<f64>) -> f64 {
    let mut k = k_prev;
    if let Some(u) = upper {
        k = k.min(u - y);
    }
    if let Some(l) = lower {
        k = k.max(l - y);
    }
    k
}

/// Runs the clamp recursion from `k_0 = 0` without checking the start condition.
pub(crate) fn clamp_recursion(y: &[f64], barriers: &BarrierPair) -> Vec<f64> {
    let lower = barriers.lower.as_ref().map(GridPath::values);
    let upper = barriers.upper.as_ref().map(GridPath::values);
    let mut k = Vec::with_capacity(y.len());
    k.push(0.0);
    for j in 1..y.len() {
        let prev = k[j - 1];
        k.push(clamp_step(
            prev,
            y[j],
            lower.map(|l| l[j]),
            upper.map(|u| u[j]),
        ));
    }
    k
}

/// The explicit formula in running form.
///
/// With `m_t = y_t - l_t` and `d_t = y_t - u_t`, the sup term obeys
/// `A_{t+1} = min(max(A_t, d_{t+1}), m_{t+1})` because taking `∧ m_{t+1}` commutes with
/// the supremum over `s`. Absent barriers enter as `±∞`, which only ever meet `min`/`max`.
pub(crate) fn formula_running(y: &[f64], barriers: &BarrierPair) -> Vec<f64> {
    let mut inf_term: f64 = 0.0;
    let mut sup_term = f64::NEG_INFINITY;
    (0..y.len())
        .map(|j| {
            let m = y[j] - barriers.lower_at(j);
            let d = y[j] - barriers.upper_at(j);
            inf_term = inf_term.min(m);
            sup_term = sup_term.max(d).min(m);
            -inf_term.max(sup_term)
        })
        .map(|k| if k == 0.0 { 0.0 } else { k })
        .collect()
}

fn check_problem(y: &GridPath, barriers: &BarrierPair) -> Result<()> {
    barriers.check_grid(y.grid())?;
    let (l0, u0, y0) = (barriers.lower_at(0), barriers.upper_at(0), y.at(0));
    if !(l0 <= y0 && y0 <= u0) {
        return Err(Error::ConstraintViolation {
            time: 0.0,
            detail: format!("starting point {y0} outside [{l0}, {u0}]"),
        });
    }
    Ok(())
}

fn assemble(y: &GridPath, k: Vec<f64>) -> SkorokhodSolution {
    let grid = y.grid().clone();
    let x = y.values().iter().zip(&k).map(|(a, b)| a + b).collect();
    SkorokhodSolution {
        x: GridPath::new(grid.clone(), x).expect("same length"),
        k: GridPath::new(grid, k).expect("same length"),
    }
}

pub fn solve_two_barrier_recursive(y: &GridPath, barriers: &BarrierPair) -> Result<SkorokhodSolution> {
    check_problem(y, barriers)?;
    Ok(assemble(y, clamp_recursion(y.values(), barriers)))
}

pub fn solve_two_barrier_formula(y: &GridPath, barriers: &BarrierPair) -> Result<SkorokhodSolution> {
    check_problem(y, barriers)?;
    Ok(assemble(y, formula_running(y.values(), barriers)))
}

/// The explicit formula evaluated literally: for each `t`, a backward scan over `s` maintains
/// `inf_{s<=u<=t}(y_u - l_u)`. O(n²); intended for grids of a few hundred points.
pub fn solve_two_barrier_formula_naive(
    y: &GridPath,
    barriers: &BarrierPair,
) -> Result<SkorokhodSolution> {
    check_problem(y, barriers)?;
    let yv = y.values();
    let m = |j: usize| yv[j] - barriers.lower_at(j);
    let d = |j: usize| yv[j] - barriers.upper_at(j);
    let k = (0..yv.len())
        .map(|t| {
            let head = (0..=t).map(m).fold(0.0_f64, f64::min);
            let mut inner = f64::INFINITY;
            let mut sup = f64::NEG_INFINITY;
            for s in (0..=t).rev() {
                inner = inner.min(m(s));
                sup = sup.max(d(s).min(inner));
            }
            let k = -head.max(sup);
            if k == 0.0 { 0.0 } else { k }
        })
        .collect();
    Ok(assemble(y, k))
}

/// Lower barrier only: `k_t = sup_{s<=t} (l_s - y_s)^+`.
pub fn solve_lower(y: &GridPath, l: &GridPath) -> Result<SkorokhodSolution> {
    y.check_same_grid(l)?;
    if y.at(0) < l.at(0) {
        return Err(Error::ConstraintViolation {
            time: 0.0,
            detail: format!("starting point {} below lower barrier {}", y.at(0), l.at(0)),
        });
    }
    let mut run: f64 = 0.0;
    let k = y
        .values()
        .iter()
        .zip(l.values())
        .map(|(&yv, &lv)| {
            run = run.max(lv - yv);
            run
        })
        .collect();
    Ok(assemble(y, k))
}

/// Upper barrier only: `k_t = -sup_{s<=t} (y_s - u_s)^+`.
pub fn solve_upper(y: &GridPath, u: &GridPath) -> Result<SkorokhodSolution> {
    y.check_same_grid(u)?;
    if y.at(0) > u.at(0) {
        return Err(Error::ConstraintViolation {
            time: 0.0,
            detail: format!("starting point {} above upper barrier {}", y.at(0), u.at(0)),
        });
    }
    let mut run: f64 = 0.0;
    let k = y
        .values()
        .iter()
        .zip(u.values())
        .map(|(&yv, &uv)| {
            run = run.max(yv - uv);
            if run == 0.0 { 0.0 } else { -run }
        })
        .collect();
    Ok(assemble(y, k))
}

/// Checks `0 < 2 eta <= inf_{t<=q}(u_t - l_t) / 3`.
pub(crate) fn check_band_separation(barriers: &BarrierPair, eta: f64, q: f64) -> Result<()> {
    if barriers.lower.is_none() || barriers.upper.is_none() {
        return Err(Error::invalid("the variation bound needs both barriers"));
    }
    let width = barriers.min_width(q)?;
    if !(eta > 0.0) || 2.0 * eta > width / 3.0 {
        return Err(Error::invalid(format!(
            "eta = {eta} violates 0 < 2 eta <= inf(u - l)/3 with minimal band width {width}"
        )));
    }
    Ok(())
}

/// Upper bound on `|k|_q` from the η-oscillation counts of `y`, `l` and `u`.
pub fn variation_bound(y: &GridPath, barriers: &BarrierPair, eta: f64, q: f64) -> Result<f64> {
    check_band_separation(barriers, eta, q)?;
    let l = barriers.lower.as_ref().expect("checked");
    let u = barriers.upper.as_ref().expect("checked");
    let count = count_oscillations(y, eta, q)?
        + count_oscillations(l, eta, q)?
        + count_oscillations(u, eta, q)?
        + 1;
    let scale = y.sup_abs(q)? + l.sup_abs(q)?.max(u.sup_abs(q)?);
    Ok(6.0 * count as f64 * scale)
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub lhs_k: f64,
    pub lhs_x: f64,
    pub rhs_k: f64,
    pub rhs_x: f64,
    pub holds_k: bool,
    pub holds_x: bool,
}

impl LipschitzReport {
    pub fn holds(&self) -> bool {
        self.holds_k && self.holds_x
    }
}

/// Solves both problems and compares `sup|k¹ - k²|`, `sup|x¹ - x²|` against the
/// sup-norm Lipschitz bounds of the two-barrier map.
pub fn stability_bound_check(
    y1: &GridPath,
    y2: &GridPath,
    b1: &BarrierPair,
    b2: &BarrierPair,
    q: f64,
) -> Result<LipschitzReport> {
    let s1 = solve_two_barrier_recursive(y1, b1)?;
    let s2 = solve_two_barrier_recursive(y2, b2)?;
    let dy = y1.sup_distance(y2, q)?;
    let db = b1.sup_distance(b2, q)?;
    let lhs_k = s1.k.sup_distance(&s2.k, q)?;
    let lhs_x = s1.x.sup_distance(&s2.x, q)?;
    let rhs_k = dy + db;
    let rhs_x = 2.0 * dy + db;
    Ok(LipschitzReport {
        lhs_k,
        lhs_x,
        rhs_k,
        rhs_x,
        holds_k: lhs_k <= rhs_k + CONTACT_TOL,
        holds_x: lhs_x <= rhs_x + CONTACT_TOL,
    })
}

/// Outcome of checking a solution against the defining conditions.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AxiomReport {
    /// Largest distance by which `x` leaves `[l, u]`.
    pub band_excess: f64,
    /// Largest `|x - (y + k)|`.
    pub decomposition_error: f64,
    /// Grid indices where `k` rose although `x` was off the lower barrier.
    pub up_off_lower: Vec<usize>,
    /// Grid indices where `k` fell although `x` was off the upper barrier.
    pub down_off_upper: Vec<usize>,
    pub k_start: f64,
}

impl AxiomReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.band_excess <= tol
            && self.decomposition_error <= tol
            && self.up_off_lower.is_empty()
            && self.down_off_upper.is_empty()
            && self.k_start == 0.0
    }
}

/// Checks containment, `x = y + k`, `k_0 = 0` and the complementarity of signed
/// increments (which on a grid is the same as the interval sign conditions).
pub fn check_axioms(
    y: &GridPath,
    barriers: &BarrierPair,
    sol: &SkorokhodSolution,
    tol: f64,
) -> AxiomReport {
    let (x, k) = (sol.x.values(), sol.k.values());
    let mut rep = AxiomReport {
        k_start: k[0],
        ..Default::default()
    };
    for j in 0..x.len() {
        let (l, u) = (barriers.lower_at(j), barriers.upper_at(j));
        rep.band_excess = rep.band_excess.max(l - x[j]).max(x[j] - u);
        rep.decomposition_error = rep.decomposition_error.max((x[j] - y.at(j) - k[j]).abs());
        if j > 0 {
            let dk = k[j] - k[j - 1];
            if dk > 0.0 && (x[j] - l).abs() > tol {
                rep.up_off_lower.push(j);
            }
            if dk < 0.0 && (x[j] - u).abs() > tol {
                rep.down_off_upper.push(j);
            }
        }
    }
    rep
}
