//! The constraint function `h`, particle ensembles, and the monotone map
//! `H(t, z, Y) = E h(t, Y - EY + z)` together with its inverse.
//!
//! Laws are represented by finite particle ensembles, so every expectation is an
//! empirical mean computed with the fixed-shape reduction of [`crate::par`].

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_paths::{BarrierPair, GridPath, TimeGrid};
use crate::par;

/// Default residual tolerance for `H⁻¹`.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Hard cap on bracket expansions plus bisection steps.
pub const MAX_ROOT_ITERATIONS: usize = 200;

/// Registry of shipped constraint functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HKind {
    /// `h(t, x) = x`
    Identity,
    /// `h(t, x) = a x + b`, `a > 0`
    Affine { a: f64, b: f64 },
    /// `h(t, x) = x + beta tanh(x)`, `0 <= beta < 1`
    Soft { beta: f64 },
    /// `h(t, x) = x + gamma t arctan(x)`, `gamma >= 0`
    TimeTilt { gamma: f64 },
    /// `h(t, x) = (1 + beta) x - beta softplus(x)`: smooth, concave, `beta >= 0`
    Concave { beta: f64 },
    /// `h(t, x) = neg_slope x` for `x < 0`, `pos_slope x` for `x >= 0`
    Kinked { neg_slope: f64, pos_slope: f64 },
}

/// Declared constants of `h` on `[0, horizon] x R`: Lipschitz in `t`, bi-Lipschitz in `x`, linear growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HConstants {
    /// Time-Lipschitz constant.
    pub lambda_h: f64,
    /// Lower space-Lipschitz constant.
    pub c_lower: f64,
    /// Upper space-Lipschitz constant.
    pub c_upper: f64,
    /// Linear-growth constant.
    pub m_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanConstraintFunction {
    kind: HKind,
    horizon: f64,
    constants: HConstants,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl MeanConstraintFunction {
    /// Validates the parameters and attaches the declared constants for `t <= horizon`.
    pub fn new(kind: HKind, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::invalid("h needs a positive horizon"));
        }
        let constants = match kind {
            HKind::Identity => HConstants { lambda_h: 0.0, c_lower: 1.0, c_upper: 1.0, m_h: 1.0 },
            HKind::Affine { a, b } => {
                if !(a > 0.0) || !b.is_finite() {
                    return Err(Error::invalid(format!("affine h needs a > 0, got a = {a}")));
                }
                HConstants { lambda_h: 0.0, c_lower: a, c_upper: a, m_h: a.max(b.abs()) }
            }
            HKind::Soft { beta } => {
                if !(0.0..1.0).contains(&beta) {
                    return Err(Error::invalid(format!("soft h needs 0 <= beta < 1, got {beta}")));
                }
                HConstants { lambda_h: 0.0, c_lower: 1.0, c_upper: 1.0 + beta, m_h: 1.0 + beta }
            }
            HKind::TimeTilt { gamma } => {
                if !(gamma >= 0.0) || !gamma.is_finite() {
                    return Err(Error::invalid(format!("time_tilt h needs gamma >= 0, got {gamma}")));
                }
                HConstants {
                    lambda_h: gamma * FRAC_PI_2,
                    c_lower: 1.0,
                    c_upper: 1.0 + gamma * horizon,
                    m_h: 1.0 + gamma * horizon * FRAC_PI_2,
                }
            }
            HKind::Concave { beta } => {
                if !(beta >= 0.0) || !beta.is_finite() {
                    return Err(Error::invalid(format!("concave h needs beta >= 0, got {beta}")));
                }
                HConstants { lambda_h: 0.0, c_lower: 1.0, c_upper: 1.0 + beta, m_h: 1.0 + 2.0 * beta }
            }
            HKind::Kinked { neg_slope, pos_slope } => {
                if !(neg_slope > 0.0) || !(pos_slope > 0.0) {
                    return Err(Error::invalid("kinked h needs positive slopes"));
                }
                HConstants {
                    lambda_h: 0.0,
                    c_lower: neg_slope.min(pos_slope),
                    c_upper: neg_slope.max(pos_slope),
                    m_h: neg_slope.max(pos_slope),
                }
            }
        };
        Ok(MeanConstraintFunction { kind, horizon, constants })
    }

    pub fn identity() -> Self {
        Self::new(HKind::Identity, 1.0).expect("identity is valid")
    }

    pub fn kind(&self) -> &HKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn constants(&self) -> HConstants {
        self.constants
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            HKind::Identity => "identity",
            HKind::Affine { .. } => "affine",
            HKind::Soft { .. } => "soft",
            HKind::TimeTilt { .. } => "time_tilt",
            HKind::Concave { .. } => "concave",
            HKind::Kinked { .. } => "kinked",
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self.kind {
            HKind::Identity => x,
            HKind::Affine { a, b } => a * x + b,
            HKind::Soft { beta } => x + beta * x.tanh(),
            HKind::TimeTilt { gamma } => x + gamma * t * x.atan(),
            HKind::Concave { beta } => (1.0 + beta) * x - beta * softplus(x),
            HKind::Kinked { neg_slope, pos_slope } => {
                if x < 0.0 {
                    neg_slope * x
                } else {
                    pos_slope * x
                }
            }
        }
    }

    /// `Some((a, b))` when `x -> h(t, x)` is `a x + b`; `H` then has a closed form.
    pub fn affine_in_x(&self) -> Option<(f64, f64)> {
        match self.kind {
            HKind::Identity => Some((1.0, 0.0)),
            HKind::Affine { a, b } => Some((a, b)),
            _ => None,
        }
    }

    pub fn is_concave(&self) -> bool {
        match self.kind {
            HKind::Identity | HKind::Affine { .. } | HKind::Concave { .. } => true,
            HKind::Kinked { neg_slope, pos_slope } => pos_slope <= neg_slope,
            HKind::Soft { beta } => beta == 0.0,
            HKind::TimeTilt { gamma } => gamma == 0.0,
        }
    }

    /// Stability constant of the mean Skorokhod map for a pair of constraint
    /// functions, `max(1/c, 2 C/c + 1)` taken with the smallest lower and largest
    /// upper Lipschitz constant of the two, so it is valid whichever index the
    /// constants are attached to.
    pub fn stability_constant(h1: &Self, h2: &Self) -> f64 {
        let c = h1.constants.c_lower.min(h2.constants.c_lower);
        let big = h1.constants.c_upper.max(h2.constants.c_upper);
        (1.0 / c).max(2.0 * big / c + 1.0)
    }

    /// The two readings of the pair constant with the constants attached literally
    /// (`c¹` lower of `h¹`; `c²` read as lower or as upper constant of `h²`).
    pub fn stability_constant_readings(h1: &Self, h2: &Self) -> (f64, f64) {
        let c1 = h1.constants.c_lower;
        let lower_reading = (1.0 / c1).max(2.0 * h2.constants.c_lower / c1 + 1.0);
        let upper_reading = (1.0 / c1).max(2.0 * h2.constants.c_upper / c1 + 1.0);
        (lower_reading, upper_reading)
    }

    /// Checks the declared constants on a lattice of `points` space points in
    /// `[-10, 10]` and `times` time points in `[0, horizon]`.
    pub fn audit(&self, points: usize, times: usize) -> HAudit {
        let c = self.constants;
        let xs: Vec<f64> = (0..points)
            .map(|i| -10.0 + 20.0 * i as f64 / (points - 1) as f64)
            .collect();
        let ts: Vec<f64> = (0..times)
            .map(|i| self.horizon * i as f64 / (times - 1).max(1) as f64)
            .collect();
        let mut rep = HAudit {
            min_slope: f64::INFINITY,
            max_slope: f64::NEG_INFINITY,
            max_growth_ratio: 0.0,
            max_time_ratio: 0.0,
            strictly_increasing: true,
            passed: false,
        };
        for (ti, &t) in ts.iter().enumerate() {
            for w in xs.windows(2) {
                let (h0, h1) = (self.eval(t, w[0]), self.eval(t, w[1]));
                let slope = (h1 - h0) / (w[1] - w[0]);
                rep.min_slope = rep.min_slope.min(slope);
                rep.max_slope = rep.max_slope.max(slope);
                rep.strictly_increasing &= h1 > h0;
            }
            for &x in &xs {
                let growth = self.eval(t, x).abs() / (1.0 + x.abs());
                rep.max_growth_ratio = rep.max_growth_ratio.max(growth / c.m_h);
                if ti > 0 {
                    let s = ts[ti - 1];
                    let dh = (self.eval(t, x) - self.eval(s, x)).abs();
                    let allowed = c.lambda_h * (t - s);
                    let ratio = if allowed > 0.0 { dh / allowed } else if dh > 1e-14 { f64::INFINITY } else { 0.0 };
                    rep.max_time_ratio = rep.max_time_ratio.max(ratio);
                }
            }
        }
        rep.passed = rep.strictly_increasing
            && rep.min_slope >= c.c_lower * (1.0 - 1e-6)
            && rep.max_slope <= c.c_upper * (1.0 + 1e-6)
            && rep.max_growth_ratio <= 1.0 + 1e-9
            && rep.max_time_ratio <= 1.0 + 1e-6;
        rep
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HAudit {
    pub min_slope: f64,
    pub max_slope: f64,
    /// `max |h| / (M_h (1 + |x|))`
    pub max_growth_ratio: f64,
    /// `max |h(t, x) - h(s, x)| / (Λ_h |t - s|)`
    pub max_time_ratio: f64,
    pub strictly_increasing: bool,
    pub passed: bool,
}

/// `sup_{(t, x) in [0, q] x R} |h1(t, x) - h2(t, x)|` and whether the value is exact.
///
/// Registry pairs with a known supremum are computed in closed form; any other pair
/// is estimated on a `times x points` lattice over `[0, q] x [-10, 10]`.
pub fn sup_norm_difference(
    h1: &MeanConstraintFunction,
    h2: &MeanConstraintFunction,
    q: f64,
    times: usize,
    points: usize,
) -> (f64, bool) {
    use HKind::*;
    if h1.kind == h2.kind {
        return (0.0, true);
    }
    if let (Some((a1, b1)), Some((a2, b2))) = (h1.affine_in_x(), h2.affine_in_x()) {
        return if a1 == a2 { ((b1 - b2).abs(), true) } else { (f64::INFINITY, true) };
    }
    let bounded_part = |k: &HKind| -> Option<f64> {
        // h = x + bounded part, with the sup of |bounded part| over [0, q] x R
        match *k {
            Identity => Some(0.0),
            Soft { beta } => Some(beta),
            TimeTilt { gamma } => Some(gamma * q * FRAC_PI_2),
            _ => None,
        }
    };
    match (&h1.kind, &h2.kind) {
        (Soft { beta: b1 }, Soft { beta: b2 }) => return ((b1 - b2).abs(), true),
        (TimeTilt { gamma: g1 }, TimeTilt { gamma: g2 }) => return ((g1 - g2).abs() * q * FRAC_PI_2, true),
        (Identity, other) | (other, Identity) => {
            if let Some(s) = bounded_part(other) {
                return (s, true);
            }
        }
        _ => {}
    }
    let mut sup: f64 = 0.0;
    for i in 0..times {
        let t = q * i as f64 / (times - 1).max(1) as f64;
        for j in 0..points {
            let x = -10.0 + 20.0 * j as f64 / (points - 1).max(1) as f64;
            sup = sup.max((h1.eval(t, x) - h2.eval(t, x)).abs());
        }
    }
    (sup, false)
}

/// Particle values of one random variable; the mean is computed once on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    particles: Vec<f64>,
    mean: f64,
}

impl Ensemble {
    pub fn new(particles: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid("an ensemble needs at least one particle"));
        }
        if let Some(v) = particles.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite particle value {v}")));
        }
        let mean = par::sum(&particles) / particles.len() as f64;
        Ok(Ensemble { particles, mean })
    }

    /// Point mass at `v`.
    pub fn point(v: f64) -> Self {
        Ensemble { particles: vec![v], mean: v }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn into_particles(self) -> Vec<f64> {
        self.particles
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean;
        par::mean_map(&self.particles, |x| (x - m) * (x - m)).sqrt()
    }

    pub fn shifted(&self, c: f64) -> Ensemble {
        Ensemble::new(self.particles.iter().map(|x| x + c).collect()).expect("finite shift")
    }

    /// Empirical `E h(t, Y)`.
    pub fn mean_h(&self, h: &MeanConstraintFunction, t: f64) -> f64 {
        par::mean_map(&self.particles, |y| h.eval(t, y))
    }
}

/// `H(t, z, Y) = E h(t, Y - EY + z)`.
pub fn h_forward(h: &MeanConstraintFunction, t: f64, z: f64, ens: &Ensemble) -> f64 {
    match h.affine_in_x() {
        Some((a, b)) if a == 1.0 && b == 0.0 => z,
        Some((a, b)) => a * z + b,
        None => {
            let m = ens.mean;
            par::mean_map(&ens.particles, |y| h.eval(t, y - m + z))
        }
    }
}

/// `H⁻¹(t, target, Y)`: the `z` with `|H(t, z, Y) - target| <= tol`.
///
/// Affine `h` is inverted in closed form. Otherwise a bracketing search runs on
/// `[z0 - r, z0 + r]` with `z0 = target` and `r = |H(z0) - target| / c_h`, a bracket
/// guaranteed by the lower Lipschitz bound; it is widened geometrically if rounding
/// makes an endpoint land on the wrong side.
pub fn h_inverse(
    h: &MeanConstraintFunction,
    t: f64,
    target: f64,
    ens: &Ensemble,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("root tolerance must be positive, got {tol}")));
    }
    if let Some((a, b)) = h.affine_in_x() {
        return Ok(if a == 1.0 && b == 0.0 { target } else { (target - b) / a });
    }
    let f = |z: f64| h_forward(h, t, z, ens) - target;
    let z0 = target;
    let f0 = f(z0);
    if f0.abs() <= tol {
        return Ok(z0);
    }
    let mut r = f0.abs() / h.constants.c_lower;
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    let mut iterations = 0;
    if f0 > 0.0 {
        hi = z0;
        f_hi = f0;
        loop {
            lo = z0 - r;
            f_lo = f(lo);
            iterations += 1;
            if f_lo <= 0.0 || iterations >= MAX_ROOT_ITERATIONS {
                break;
            }
            r *= 2.0;
        }
    } else {
        lo = z0;
        f_lo = f0;
        loop {
            hi = z0 + r;
            f_hi = f(hi);
            iterations += 1;
            if f_hi >= 0.0 || iterations >= MAX_ROOT_ITERATIONS {
                break;
            }
            r *= 2.0;
        }
    }
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(Error::numerical(
            format!("no sign change on bracket [{lo}, {hi}] for target {target} at t = {t}"),
            f_lo.abs().min(f_hi.abs()),
        ));
    }
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    if f_hi.abs() <= tol {
        return Ok(hi);
    }
    // Illinois false position: the bracket [lo, hi] always keeps a sign change, and
    // the endpoint that survives twice in a row gets its weight halved.
    let (mut w_lo, mut w_hi) = (f_lo, f_hi);
    let mut last_side = 0i8;
    while iterations < MAX_ROOT_ITERATIONS {
        let mut z = lo - w_lo * (hi - lo) / (w_hi - w_lo);
        if !(z > lo && z < hi) {
            z = 0.5 * (lo + hi);
            if z <= lo || z >= hi {
                break;
            }
        }
        let fz = f(z);
        iterations += 1;
        if fz.abs() <= tol {
            return Ok(z);
        }
        if fz < 0.0 {
            lo = z;
            f_lo = fz;
            w_lo = fz;
            if last_side == -1 {
                w_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = z;
            f_hi = fz;
            w_hi = fz;
            if last_side == 1 {
                w_lo *= 0.5;
            }
            last_side = 1;
        }
    }
    Err(Error::numerical(
        format!("root search for target {target} at t = {t} did not reach tolerance {tol}"),
        f_lo.abs().min(f_hi.abs()),
    ))
}

/// Transformed barriers `l̄_t = H⁻¹(t, l_t, Y_t)`, `ū_t = H⁻¹(t, u_t, Y_t)`.
///
/// Absent sides stay absent. Touching barriers (`l_t = u_t`) share one root so that
/// `l̄_t = ū_t`; otherwise `ū_t` is kept no smaller than `l̄_t`.
pub fn transform_barriers(
    h: &MeanConstraintFunction,
    grid: &TimeGrid,
    barriers: &BarrierPair,
    ensembles: &[Ensemble],
    tol: f64,
) -> Result<(Option<GridPath>, Option<GridPath>)> {
    if ensembles.len() != grid.len() {
        return Err(Error::invalid(format!(
            "{} ensembles for {} grid points",
            ensembles.len(),
            grid.len()
        )));
    }
    barriers.check_grid(grid)?;
    let pts = grid.points();
    let pairs = par::try_map_range(grid.len(), |j| -> Result<(f64, f64)> {
        transform_point(h, pts[j], barriers.lower_at(j), barriers.upper_at(j), &ensembles[j], tol)
    })?;
    let lower = barriers.lower.as_ref().map(|_| {
        GridPath::new(grid.clone(), pairs.iter().map(|p| p.0).collect()).expect("grid length")
    });
    let upper = barriers.upper.as_ref().map(|_| {
        GridPath::new(grid.clone(), pairs.iter().map(|p| p.1).collect()).expect("grid length")
    });
    Ok((lower, upper))
}

/// Transforms one barrier pair `(l, u)` at time `t`; infinite sides pass through.
pub(crate) fn transform_point(
    h: &MeanConstraintFunction,
    t: f64,
    l: f64,
    u: f64,
    ens: &Ensemble,
    tol: f64,
) -> Result<(f64, f64)> {
    let lb = if l.is_finite() { h_inverse(h, t, l, ens, tol)? } else { l };
    let ub = if u.is_finite() {
        if u == l { lb } else { h_inverse(h, t, u, ens, tol)?.max(lb) }
    } else {
        u
    };
    Ok((lb, ub))
}

/// `inf{x >= 0 : E h(t, Y + x) >= level}` by a direct monotone search on the
/// un-centred particles.
pub fn direct_lower_increment(
    h: &MeanConstraintFunction,
    t: f64,
    ens: &Ensemble,
    level: f64,
    tol: f64,
) -> f64 {
    let g = |x: f64| par::mean_map(ens.particles(), |y| h.eval(t, y + x)) - level;
    monotone_zero_crossing(g, tol)
}

/// `inf{x >= 0 : E h(t, Y - x) <= level}`.
pub fn direct_upper_decrement(
    h: &MeanConstraintFunction,
    t: f64,
    ens: &Ensemble,
    level: f64,
    tol: f64,
) -> f64 {
    let g = |x: f64| level - par::mean_map(ens.particles(), |y| h.eval(t, y - x));
    monotone_zero_crossing(g, tol)
}

/// Smallest `x >= 0` with `g(x) >= 0` for increasing `g`, to residual `tol`.
fn monotone_zero_crossing(g: impl Fn(f64) -> f64, tol: f64) -> f64 {
    if g(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..MAX_ROOT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= tol || mid <= lo || mid >= hi {
            return mid;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
