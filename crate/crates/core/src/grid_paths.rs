//! Time grids and càdlàg step paths.
//!
//! A [`GridPath`] holds one value per grid point and is evaluated by right-continuous
//! step interpolation: at time `t` it returns the value at the largest grid point `<= t`.
//! Every process in the crate (the input path `y`, barriers, the reflection `k`, ensemble
//! means) lives on a single shared [`TimeGrid`] per problem instance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing grid times.
pub(crate) const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a time grid needs at least 2 points"));
        }
        if points[0] != 0.0 {
            return Err(Error::invalid(format!("grid must start at 0, got {}", points[0])));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!(
                "grid points must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(TimeGrid { points })
    }

    /// The uniform grid `{k/n : k/n <= q}`.
    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("steps per unit time must be positive"));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {q}")));
        }
        let last = (q * n as f64 + 1e-9).floor() as usize;
        if last == 0 {
            return Err(Error::invalid(format!(
                "horizon {q} is shorter than one step of size 1/{n}"
            )));
        }
        Ok(TimeGrid {
            points: (0..=last).map(|k| k as f64 / n as f64).collect(),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid is never empty")
    }

    /// Index of the largest grid point `<= t` (times before 0 map to index 0).
    pub fn index_at(&self, t: f64) -> usize {
        match self
            .points
            .binary_search_by(|p| p.partial_cmp(&(t + TIME_EPS)).expect("finite grid"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// Index of the last grid point not after `q`; errors if `q` exceeds the horizon.
    pub fn index_until(&self, q: f64) -> Result<usize> {
        if q > self.horizon() + TIME_EPS {
            return Err(Error::invalid(format!(
                "time {q} is beyond the grid horizon {}",
                self.horizon()
            )));
        }
        if q < -TIME_EPS {
            return Err(Error::invalid(format!("time {q} is negative")));
        }
        Ok(self.index_at(q))
    }

    /// Sorted union of both grids' points.
    pub fn union(&self, other: &TimeGrid) -> TimeGrid {
        let mut points: Vec<f64> = self.points.iter().chain(&other.points).copied().collect();
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        points.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
        TimeGrid { points }
    }

    pub fn is_uniform(&self) -> bool {
        let dt = self.points[1] - self.points[0];
        self.points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1.0))
    }
}

/// Anything that can be sampled at a time.
pub trait PathSource {
    fn sample(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> PathSource for F {
    fn sample(&self, t: f64) -> f64 {
        self(t)
    }
}

/// A càdlàg step function sampled on a finite time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "path has {} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridPath { grid, values })
    }

    pub fn constant(grid: &TimeGrid, c: f64) -> Self {
        GridPath {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `source` at every grid point.
    pub fn sample<S: PathSource + ?Sized>(grid: &TimeGrid, source: &S) -> Self {
        GridPath {
            grid: grid.clone(),
            values: grid.points().iter().map(|&t| source.sample(t)).collect(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Right-continuous step evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.grid.index_at(t)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridPath {
        GridPath {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two paths on the same grid.
    pub fn zip_with(&self, other: &GridPath, f: impl Fn(f64, f64) -> f64) -> Result<GridPath> {
        self.check_same_grid(other)?;
        Ok(GridPath {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn neg(&self) -> GridPath {
        self.map(|v| -v)
    }

    pub fn check_same_grid(&self, other: &GridPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::invalid("paths live on different grids"));
        }
        Ok(())
    }

    /// Re-samples onto another grid (typically a refinement such as a union grid).
    pub fn resample(&self, grid: &TimeGrid) -> GridPath {
        GridPath::sample(grid, self)
    }

    /// `sup_{t <= q} |x_t|`.
    pub fn sup_abs(&self, q: f64) -> Result<f64> {
        let last = self.grid.index_until(q)?;
        Ok(self.values[..=last].iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// `sup_{t <= q} |x_t - other_t|`.
    pub fn sup_distance(&self, other: &GridPath, q: f64) -> Result<f64> {
        self.check_same_grid(other)?;
        let last = self.grid.index_until(q)?;
        Ok(self.values[..=last]
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl PathSource for GridPath {
    fn sample(&self, t: f64) -> f64 {
        self.eval(t)
    }
}

/// Lower and upper barriers; `None` marks an absent (unbounded) side.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPair {
    pub lower: Option<GridPath>,
    pub upper: Option<GridPath>,
}

impl BarrierPair {
    pub fn new(lower: Option<GridPath>, upper: Option<GridPath>) -> Result<Self> {
        if let (Some(l), Some(u)) = (&lower, &upper) {
            l.check_same_grid(u)?;
            if let Some(i) = (0..l.len()).find(|&i| l.at(i) > u.at(i)) {
                return Err(Error::ConstraintViolation {
                    time: l.grid().points()[i],
                    detail: format!("lower barrier {} above upper barrier {}", l.at(i), u.at(i)),
                });
            }
        }
        Ok(BarrierPair { lower, upper })
    }

    pub fn two_sided(lower: GridPath, upper: GridPath) -> Result<Self> {
        Self::new(Some(lower), Some(upper))
    }

    pub fn lower_only(lower: GridPath) -> Self {
        BarrierPair {
            lower: Some(lower),
            upper: None,
        }
    }

    pub fn upper_only(upper: GridPath) -> Self {
        BarrierPair {
            lower: None,
            upper: Some(upper),
        }
    }

    pub fn unbounded() -> Self {
        BarrierPair {
            lower: None,
            upper: None,
        }
    }

    pub fn lower_at(&self, i: usize) -> f64 {
        self.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l.at(i))
    }

    pub fn upper_at(&self, i: usize) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |u| u.at(i))
    }

    /// Grid of whichever side is present.
    pub fn grid(&self) -> Option<&TimeGrid> {
        self.lower
            .as_ref()
            .or(self.upper.as_ref())
            .map(GridPath::grid)
    }

    /// Checks that any present side lives on `grid`.
    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        for side in [&self.lower, &self.upper].into_iter().flatten() {
            if side.grid() != grid {
                return Err(Error::invalid("barrier lives on a different grid"));
            }
        }
        Ok(())
    }

    /// `sup_{t <= q} max(|l1 - l2|, |u1 - u2|)`; a side present in one pair and
    /// absent in the other is infinitely far away.
    pub fn sup_distance(&self, other: &BarrierPair, q: f64) -> Result<f64> {
        let side = |a: &Option<GridPath>, b: &Option<GridPath>| -> Result<f64> {
            match (a, b) {
                (None, None) => Ok(0.0),
                (Some(a), Some(b)) => a.sup_distance(b, q),
                _ => Ok(f64::INFINITY),
            }
        };
        Ok(side(&self.lower, &other.lower)?.max(side(&self.upper, &other.upper)?))
    }

    /// `sup_{t <= s <= q} max(|l_s - l_t|, |u_s - u_t|)`.
    pub fn modulus(&self, t: f64, q: f64) -> Result<f64> {
        let mut m: f64 = 0.0;
        for side in [&self.lower, &self.upper].into_iter().flatten() {
            let i0 = side.grid().index_until(t)?;
            let i1 = side.grid().index_until(q)?;
            let base = side.at(i0);
            m = side.values()[i0..=i1]
                .iter()
                .fold(m, |acc, v| acc.max((v - base).abs()));
        }
        Ok(m)
    }

    /// Smallest band width `inf_{t <= q} (u_t - l_t)`; infinite when a side is absent.
    pub fn min_width(&self, q: f64) -> Result<f64> {
        match (&self.lower, &self.upper) {
            (Some(l), Some(u)) => {
                let last = l.grid().index_until(q)?;
                Ok((0..=last).map(|i| u.at(i) - l.at(i)).fold(f64::INFINITY, f64::min))
            }
            _ => Ok(f64::INFINITY),
        }
    }

    pub fn negated_swap(&self) -> BarrierPair {
        BarrierPair {
            lower: self.upper.as_ref().map(GridPath::neg),
            upper: self.lower.as_ref().map(GridPath::neg),
        }
    }
}

/// Piecewise path description: contiguous segments starting at 0, each either constant
/// (`value`) or linear (`value` at `from` plus `slope`), and an optional jump list.
///
/// A segment without `value` continues from the left limit of the path at its start. A
/// jump resets the path to `to_value` at time `at` and keeps the current slope. After the
/// last segment the path holds its left limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSpec {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub jumps: Vec<Jump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jump {
    pub at: f64,
    pub to_value: f64,
}

impl PiecewiseSpec {
    pub fn constant(value: f64, until: f64) -> Self {
        PiecewiseSpec {
            segments: vec![Segment {
                from: 0.0,
                to: until,
                value: Some(value),
                slope: None,
            }],
            jumps: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .segments
            .first()
            .ok_or_else(|| Error::invalid("piecewise path needs at least one segment"))?;
        if first.from != 0.0 {
            return Err(Error::invalid("first segment must start at 0"));
        }
        for s in &self.segments {
            if !(s.to > s.from) {
                return Err(Error::invalid(format!(
                    "segment [{}, {}) is empty",
                    s.from, s.to
                )));
            }
        }
        for w in self.segments.windows(2) {
            if (w[1].from - w[0].to).abs() > TIME_EPS {
                return Err(Error::invalid(format!(
                    "segments must be contiguous: one ends at {}, the next starts at {}",
                    w[0].to, w[1].from
                )));
            }
        }
        if let Some(j) = self.jumps.iter().find(|j| j.at < 0.0) {
            return Err(Error::invalid(format!("jump at negative time {}", j.at)));
        }
        Ok(())
    }

    fn events(&self) -> Vec<(f64, Event)> {
        let mut ev: Vec<(f64, Event)> = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| (s.from, Event::Segment(i)))
            .chain(self.jumps.iter().map(|j| (j.at, Event::Jump(j.to_value))))
            .collect();
        if let Some(last) = self.segments.last() {
            ev.push((last.to, Event::End));
        }
        // Stable sort keeps segments ahead of jumps and the end marker at equal times.
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times").then(a.1.rank().cmp(&b.1.rank())));
        ev
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Segment(usize),
    Jump(f64),
    End,
}

impl Event {
    fn rank(&self) -> u8 {
        match self {
            Event::Segment(_) => 0,
            Event::End => 1,
            Event::Jump(_) => 2,
        }
    }
}

impl PathSource for PiecewiseSpec {
    fn sample(&self, t: f64) -> f64 {
        let (mut anchor, mut value, mut slope) = (0.0, 0.0, 0.0);
        for (at, ev) in self.events() {
            if at > t + TIME_EPS {
                break;
            }
            let left = value + slope * (at - anchor);
            match ev {
                Event::Segment(i) => {
                    let s = &self.segments[i];
                    value = s.value.unwrap_or(left);
                    slope = s.slope.unwrap_or(0.0);
                }
                Event::Jump(v) => value = v,
                Event::End => {
                    value = left;
                    slope = 0.0;
                }
            }
            anchor = at;
        }
        value + slope * (t - anchor)
    }
}

/// The ρⁿ-discretization `t -> source(⌊n t⌋ / n)` on the uniform grid `{k/n <= q}`.
pub fn discretize<S: PathSource + ?Sized>(source: &S, n: usize, q: f64) -> Result<GridPath> {
    let grid = TimeGrid::uniform(n, q)?;
    Ok(GridPath::sample(&grid, source))
}

/// Total variation of `k` over `[0, q]`.
pub fn total_variation(k: &GridPath, q: f64) -> Result<f64> {
    let last = k.grid().index_until(q)?;
    Ok(k.values()[..=last]
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum())
}

/// Number of η-oscillations of `x` on `[0, q]`.
///
/// Greedy sweep: keep the running range since the last cut; once it exceeds `eta`
/// close a pair at the current point and restart the window there.
pub fn count_oscillations(x: &GridPath, eta: f64, q: f64) -> Result<usize> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let last = x.grid().index_until(q)?;
    let vals = &x.values()[..=last];
    let (mut lo, mut hi) = (vals[0], vals[0]);
    let mut count = 0;
    for &v in &vals[1..] {
        lo = lo.min(v);
        hi = hi.max(v);
        if hi - lo > eta {
            count += 1;
            lo = v;
            hi = v;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(vals: &[f64]) -> GridPath {
        let grid = TimeGrid::new((0..vals.len()).map(|i| i as f64).collect()).unwrap();
        GridPath::new(grid, vals.to_vec()).unwrap()
    }

    /// Exhaustive search over all ordered time selections.
    fn brute_oscillations(v: &[f64], eta: f64) -> usize {
        fn best(v: &[f64], start: usize, eta: f64) -> usize {
            let mut m = 0;
            for a in start..v.len() {
                for b in a..v.len() {
                    if (v[a] - v[b]).abs() > eta {
                        m = m.max(1 + best(v, b, eta));
                    }
                }
            }
            m
        }
        best(v, 0, eta)
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::uniform(0, 1.0).is_err());
        assert!(TimeGrid::uniform(4, 0.0).is_err());
        assert!(TimeGrid::uniform(4, -1.0).is_err());
        let g = TimeGrid::uniform(10, 1.0).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.horizon(), 1.0);
    }

    #[test]
    fn evaluation_is_right_continuous() {
        let p = path(&[1.0, 2.0, 3.0]);
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(0.999), 1.0);
        assert_eq!(p.eval(1.0), 2.0);
        assert_eq!(p.eval(1.5), 2.0);
        assert_eq!(p.eval(7.0), 3.0);
    }

    #[test]
    fn discretize_constant() {
        let d = discretize(&|_t: f64| 2.5, 7, 1.3).unwrap();
        assert!(d.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn discretize_moves_jump_to_next_grid_point() {
        let src = PiecewiseSpec {
            segments: vec![Segment { from: 0.0, to: 1.0, value: Some(0.0), slope: None }],
            jumps: vec![Jump { at: 0.35, to_value: 1.0 }],
        };
        let d = discretize(&src, 10, 1.0).unwrap();
        assert_eq!(d.eval(0.3), 0.0);
        assert_eq!(d.eval(0.39), 0.0);
        assert_eq!(d.eval(0.4), 1.0);
    }

    #[test]
    fn discretize_identity() {
        let d = discretize(&|t: f64| t, 2, 1.0).unwrap();
        assert_eq!(d.grid().points(), &[0.0, 0.5, 1.0]);
        assert_eq!(d.values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn discretize_rejects_bad_arguments() {
        assert!(discretize(&|t: f64| t, 0, 1.0).is_err());
        assert!(discretize(&|t: f64| t, 3, 0.0).is_err());
    }

    #[test]
    fn piecewise_linear_and_continuation() {
        let spec = PiecewiseSpec {
            segments: vec![
                Segment { from: 0.0, to: 1.0, value: Some(1.0), slope: Some(2.0) },
                Segment { from: 1.0, to: 2.0, value: None, slope: Some(-1.0) },
                Segment { from: 2.0, to: 3.0, value: Some(5.0), slope: None },
            ],
            jumps: vec![Jump { at: 1.5, to_value: 0.0 }],
        };
        spec.validate().unwrap();
        assert_eq!(spec.sample(0.5), 2.0);
        assert_eq!(spec.sample(1.0), 3.0);
        assert_eq!(spec.sample(1.25), 2.75);
        assert_eq!(spec.sample(1.5), 0.0);
        assert_eq!(spec.sample(1.75), -0.25);
        assert_eq!(spec.sample(2.5), 5.0);
        assert_eq!(spec.sample(10.0), 5.0);
    }

    #[test]
    fn piecewise_validation() {
        let gap = PiecewiseSpec {
            segments: vec![
                Segment { from: 0.0, to: 1.0, value: Some(0.0), slope: None },
                Segment { from: 1.5, to: 2.0, value: Some(0.0), slope: None },
            ],
            jumps: vec![],
        };
        assert!(gap.validate().is_err());
        assert!(PiecewiseSpec { segments: vec![], jumps: vec![] }.validate().is_err());
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&path(&[0.0, -1.0, 1.0]), 2.0).unwrap(), 3.0);
        assert_eq!(total_variation(&path(&[4.0; 5]), 4.0).unwrap(), 0.0);
        assert_eq!(total_variation(&path(&[0.0, 1.0, 1.5, 4.0, 5.0]), 4.0).unwrap(), 5.0);
        assert_eq!(total_variation(&path(&[0.0, -1.0, 1.0]), 1.0).unwrap(), 1.0);
        assert!(total_variation(&path(&[0.0, 1.0]), 2.0).is_err());
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(count_oscillations(&path(&[3.0; 4]), 0.1, 3.0).unwrap(), 0);
        assert_eq!(count_oscillations(&path(&[0.0, 2.0, -1.0]), 1.0 / 6.0, 2.0).unwrap(), 2);
        assert_eq!(brute_oscillations(&[0.0, 2.0, -1.0], 1.0 / 6.0), 2);
        assert_eq!(count_oscillations(&path(&[0.0, 1.0]), 2.0, 1.0).unwrap(), 0);
        assert!(count_oscillations(&path(&[0.0, 1.0]), 0.0, 1.0).is_err());
    }

    #[test]
    fn barrier_pair_rejects_crossing() {
        let l = path(&[0.0, 2.0]);
        let u = path(&[1.0, 1.0]);
        assert!(matches!(
            BarrierPair::two_sided(l, u),
            Err(Error::ConstraintViolation { time, .. }) if time == 1.0
        ));
    }

    #[test]
    fn union_grid_refines_both() {
        let a = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let b = TimeGrid::new(vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(a.union(&b).points(), &[0.0, 0.25, 0.5, 1.0]);
        let p = GridPath::new(a.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.resample(&a.union(&b)).values(), &[1.0, 1.0, 2.0, 3.0]);
    }

    proptest! {
        #[test]
        fn greedy_matches_brute_force(
            v in prop::collection::vec(-3.0f64..3.0, 2..=8),
            eta in 0.05f64..3.0,
        ) {
            let p = path(&v);
            let q = (v.len() - 1) as f64;
            prop_assert_eq!(count_oscillations(&p, eta, q).unwrap(), brute_oscillations(&v, eta));
        }

        #[test]
        fn oscillations_non_increasing_in_eta(
            v in prop::collection::vec(-3.0f64..3.0, 2..40),
            eta in 0.01f64..2.0,
            factor in 1.0f64..4.0,
        ) {
            let p = path(&v);
            let q = (v.len() - 1) as f64;
            prop_assert!(
                count_oscillations(&p, eta * factor, q).unwrap() <= count_oscillations(&p, eta, q).unwrap()
            );
        }

        #[test]
        fn variation_subadditive(
            a in prop::collection::vec(-3.0f64..3.0, 2..30),
            b in prop::collection::vec(-3.0f64..3.0, 2..30),
        ) {
            let n = a.len().min(b.len());
            let (pa, pb) = (path(&a[..n]), path(&b[..n]));
            let q = (n - 1) as f64;
            let sum = pa.zip_with(&pb, |x, y| x + y).unwrap();
            let lhs = total_variation(&sum, q).unwrap();
            let rhs = total_variation(&pa, q).unwrap() + total_variation(&pb, q).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn variation_additive_for_comonotone(
            a in prop::collection::vec(0.0f64..1.0, 2..30),
            b in prop::collection::vec(0.0f64..1.0, 2..30),
        ) {
            let n = a.len().min(b.len());
            let cum = |v: &[f64]| v.iter().scan(0.0, |s, x| { *s += x; Some(*s) }).collect::<Vec<_>>();
            let (pa, pb) = (path(&cum(&a[..n])), path(&cum(&b[..n])));
            let q = (n - 1) as f64;
            let sum = pa.zip_with(&pb, |x, y| x + y).unwrap();
            let lhs = total_variation(&sum, q).unwrap();
            let rhs = total_variation(&pa, q).unwrap() + total_variation(&pb, q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9);
        }

        #[test]
        fn eval_between_points_returns_left_value(
            v in prop::collection::vec(-3.0f64..3.0, 2..20),
            frac in 0.0f64..0.999,
        ) {
            let p = path(&v);
            for (i, &vi) in v.iter().enumerate().take(v.len() - 1) {
                prop_assert_eq!(p.eval(i as f64 + frac), vi);
            }
        }
    }
}
