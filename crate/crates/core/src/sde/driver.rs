//! Driving processes `(M, V)` and their characteristic bound `m`.
//!
//! Every shipped driver has deterministic, linear characteristics, so the dominating
//! function is `m_t = m_rate * t` with `m_rate >= max(<M> rate, |V|~ rate)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_paths::TimeGrid;
use crate::par;
use crate::sde::rng::stream;

/// Bounded jump-size law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    Fixed { size: f64 },
    Uniform { a: f64, b: f64 },
    /// `a` with probability `p`, otherwise `b`.
    TwoPoint { a: f64, b: f64, p: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::Fixed { size } => size.is_finite(),
            JumpLaw::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            JumpLaw::TwoPoint { a, b, p } => a.is_finite() && b.is_finite() && (0.0..=1.0).contains(&p),
        };
        if ok { Ok(()) } else { Err(Error::invalid(format!("invalid jump law {self:?}"))) }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => size,
            JumpLaw::Uniform { a, b } => 0.5 * (a + b),
            JumpLaw::TwoPoint { a, b, p } => p * a + (1.0 - p) * b,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => size * size,
            JumpLaw::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
            JumpLaw::TwoPoint { a, b, p } => p * a * a + (1.0 - p) * b * b,
        }
    }

    pub fn mean_abs(&self) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => size.abs(),
            JumpLaw::Uniform { a, b } => {
                if a >= 0.0 || b <= 0.0 {
                    (0.5 * (a + b)).abs()
                } else {
                    (a * a + b * b) / (2.0 * (b - a))
                }
            }
            JumpLaw::TwoPoint { a, b, p } => p * a.abs() + (1.0 - p) * b.abs(),
        }
    }

    /// Largest possible jump size.
    pub fn bound(&self) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => size.abs(),
            JumpLaw::Uniform { a, b } | JumpLaw::TwoPoint { a, b, .. } => a.abs().max(b.abs()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => size,
            JumpLaw::Uniform { a, b } => rng.random_range(a..b),
            JumpLaw::TwoPoint { a, b, p } => {
                if rng.random::<f64>() < p { a } else { b }
            }
        }
    }
}

/// The pair `(M, V)`; `M` a square-integrable martingale, `V` of finite variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Driver {
    /// `M = scale W`, `V = 0`.
    Brownian { scale: f64 },
    /// `M = 0`, `V_t = rate t`.
    Clock { rate: f64 },
    /// `M` = compound Poisson minus its compensator, `V = 0`.
    CompensatedPoisson { rate: f64, jump: JumpLaw },
    /// `M = 0`, `V` = raw compound Poisson (finite variation).
    CompoundPoisson { rate: f64, jump: JumpLaw },
    /// `Z_t = drift t + scale W_t + compound Poisson`, split into its mean
    /// `V = EZ` and the martingale `M = Z - EZ`.
    PiiDecomposed { drift: f64, scale: f64, rate: f64, jump: JumpLaw },
    Zero,
}

impl Driver {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r >= 0.0 && r.is_finite();
        match self {
            Driver::Brownian { scale } if scale.is_finite() => Ok(()),
            Driver::Clock { rate } if rate.is_finite() => Ok(()),
            Driver::CompensatedPoisson { rate, jump } | Driver::CompoundPoisson { rate, jump } if rate_ok(*rate) => {
                jump.validate()
            }
            Driver::PiiDecomposed { drift, scale, rate, jump }
                if drift.is_finite() && scale.is_finite() && rate_ok(*rate) =>
            {
                jump.validate()
            }
            Driver::Zero => Ok(()),
            other => Err(Error::invalid(format!("invalid driver {other:?}"))),
        }
    }

    /// Rate of the predictable quadratic variation `<M>`.
    pub fn bracket_rate(&self) -> f64 {
        match self {
            Driver::Brownian { scale } => scale * scale,
            Driver::CompensatedPoisson { rate, jump } => rate * jump.second_moment(),
            Driver::PiiDecomposed { scale, rate, jump, .. } => scale * scale + rate * jump.second_moment(),
            Driver::Clock { .. } | Driver::CompoundPoisson { .. } | Driver::Zero => 0.0,
        }
    }

    /// Rate of the compensator of the total variation of `V`.
    pub fn variation_rate(&self) -> f64 {
        match self {
            Driver::Clock { rate } => rate.abs(),
            Driver::CompoundPoisson { rate, jump } => rate * jump.mean_abs(),
            Driver::PiiDecomposed { drift, rate, jump, .. } => (drift + rate * jump.mean()).abs(),
            Driver::Brownian { .. } | Driver::CompensatedPoisson { .. } | Driver::Zero => 0.0,
        }
    }

    /// `m_t = m_rate t` dominates `max(<M>_t, |V|~_t)`.
    pub fn m_rate(&self) -> f64 {
        self.bracket_rate().max(self.variation_rate())
    }

    pub fn has_martingale(&self) -> bool {
        self.bracket_rate() > 0.0
    }

    fn needs_rng(&self) -> bool {
        !matches!(self, Driver::Clock { .. } | Driver::Zero)
    }

    /// One increment `(ΔM, ΔV)` over a step of length `dt`.
    fn draw(&self, rng: Option<&mut ChaCha8Rng>, dt: f64) -> (f64, f64) {
        let compound = |rng: &mut ChaCha8Rng, rate: f64, jump: &JumpLaw| -> f64 {
            let lambda = rate * dt;
            if lambda <= 0.0 {
                return 0.0;
            }
            let count = Poisson::new(lambda).expect("positive intensity").sample(rng) as u64;
            (0..count).map(|_| jump.sample(rng)).sum()
        };
        match (self, rng) {
            (Driver::Zero, _) => (0.0, 0.0),
            (Driver::Clock { rate }, _) => (0.0, rate * dt),
            (Driver::Brownian { scale }, Some(rng)) => {
                let z: f64 = StandardNormal.sample(rng);
                (scale * dt.sqrt() * z, 0.0)
            }
            (Driver::CompensatedPoisson { rate, jump }, Some(rng)) => {
                (compound(rng, *rate, jump) - rate * jump.mean() * dt, 0.0)
            }
            (Driver::CompoundPoisson { rate, jump }, Some(rng)) => (0.0, compound(rng, *rate, jump)),
            (Driver::PiiDecomposed { drift, scale, rate, jump }, Some(rng)) => {
                let z: f64 = StandardNormal.sample(rng);
                let jumps = compound(rng, *rate, jump);
                let comp = rate * jump.mean() * dt;
                (scale * dt.sqrt() * z + jumps - comp, drift * dt + comp)
            }
            _ => unreachable!("random driver called without a generator"),
        }
    }

    /// Increment over coarse step `step` of a grid with `steps_per_unit` steps per unit
    /// time, built by summing `refine` fine increments addressed by fine step index.
    #[inline]
    pub fn increment(
        &self,
        seed: u64,
        channel: u64,
        particle: u64,
        step: u64,
        steps_per_unit: usize,
        refine: usize,
    ) -> (f64, f64) {
        let dt = 1.0 / (steps_per_unit * refine) as f64;
        let mut acc = (0.0, 0.0);
        for f in 0..refine as u64 {
            let fine = step * refine as u64 + f;
            let (dm, dv) = if self.needs_rng() {
                let mut rng = stream(seed, channel, fine, particle);
                self.draw(Some(&mut rng), dt)
            } else {
                self.draw(None, dt)
            };
            acc.0 += dm;
            acc.1 += dv;
        }
        acc
    }
}

/// Outcome of comparing the empirical quadratic variation of `M` with `m`.
#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicAudit {
    /// `max_t` of empirical `E [M]_t / m_t` over grid times with `m_t > 0`.
    pub max_ratio: f64,
    /// `max_t (E [M]_t - m_t) / se_t`, with `se_t` the sample standard error.
    pub max_z: f64,
    /// Allowed `max_z`.
    pub allowed: f64,
    /// `max_t (sum of per-step Var(ΔM)) - m_t`, the discretised bracket against `m`.
    pub discretized_excess: f64,
    pub passed: bool,
}

/// Averages `sum (ΔM)²` over `particles` simulated paths and compares it with `m`.
pub fn characteristic_audit(driver: &Driver, steps_per_unit: usize, horizon: f64, particles: usize, seed: u64) -> Result<CharacteristicAudit> {
    let grid = TimeGrid::uniform(steps_per_unit, horizon)?;
    let steps = grid.len() - 1;
    let m_rate = driver.m_rate();
    let per_particle = par::map_range(particles, |i| {
        let mut qv = 0.0;
        (0..steps)
            .map(|j| {
                let (dm, _) = driver.increment(seed, 0, i as u64, j as u64, steps_per_unit, 1);
                qv += dm * dm;
                qv
            })
            .collect::<Vec<f64>>()
    });
    let dt = 1.0 / steps_per_unit as f64;
    let mut max_ratio: f64 = 0.0;
    let mut max_z = f64::NEG_INFINITY;
    let mut discretized_excess = f64::NEG_INFINITY;
    let mut bracket = 0.0;
    for (j, &t) in grid.points()[1..=steps].iter().enumerate() {
        let m = m_rate * t;
        let qv = par::mean_index(particles, |i| per_particle[i][j]);
        let var = par::mean_index(particles, |i| (per_particle[i][j] - qv).powi(2));
        let se = (var / particles as f64).sqrt();
        if m > 0.0 {
            max_ratio = max_ratio.max(qv / m);
        } else if qv > 0.0 {
            max_ratio = f64::INFINITY;
        }
        let z = if se > 0.0 {
            (qv - m) / se
        } else if qv > m {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        max_z = max_z.max(z);
        bracket += driver.bracket_rate() * dt;
        discretized_excess = discretized_excess.max(bracket - m);
    }
    let allowed = 4.0;
    Ok(CharacteristicAudit {
        max_ratio,
        max_z,
        allowed,
        discretized_excess,
        passed: max_z <= allowed && discretized_excess <= 1e-12 * (1.0 + m_rate * horizon),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleEstimate {
    /// Monte Carlo estimate of `E sup_{s<t} |M_s|`.
    pub lhs: f64,
    /// Standard error of `lhs`.
    pub std_error: f64,
    /// `3 (<M>_{t-})^{1/2}`.
    pub rhs: f64,
    /// `lhs <= rhs + 3 std_error`.
    pub holds: bool,
}

/// Checks `E sup_{s<t} |M_s| <= 3 (<M>_{t-})^{1/2}` by simulation on a grid with
/// `steps_per_unit` steps per unit time.
pub fn martingale_sup_estimate(driver: &Driver, t: f64, steps_per_unit: usize, particles: usize, seed: u64) -> Result<MartingaleEstimate> {
    if particles == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let grid = TimeGrid::uniform(steps_per_unit, t)?;
    let steps = grid.len() - 1;
    let sups = par::map_range(particles, |i| {
        let mut m = 0.0_f64;
        let mut sup = 0.0_f64;
        // grid times strictly before t: the last increment is excluded
        for j in 0..steps.saturating_sub(1) {
            m += driver.increment(seed, 0, i as u64, j as u64, steps_per_unit, 1).0;
            sup = sup.max(m.abs());
        }
        sup
    });
    let lhs = par::sum(&sups) / particles as f64;
    let var = par::mean_map(&sups, |s| (s - lhs) * (s - lhs));
    let std_error = (var / particles as f64).sqrt();
    let rhs = 3.0 * (driver.bracket_rate() * grid.horizon()).sqrt();
    Ok(MartingaleEstimate { lhs, std_error, rhs, holds: lhs <= rhs + 3.0 * std_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn characteristics() {
        let jump = JumpLaw::Uniform { a: -1.0, b: 3.0 };
        assert_eq!(jump.mean(), 1.0);
        assert!((jump.second_moment() - 7.0 / 3.0).abs() < 1e-15);
        assert!((jump.mean_abs() - 10.0 / 8.0).abs() < 1e-15);
        assert_eq!(Driver::Brownian { scale: 2.0 }.m_rate(), 4.0);
        let cp = Driver::CompensatedPoisson { rate: 2.0, jump: JumpLaw::Fixed { size: 0.5 } };
        assert_eq!(cp.bracket_rate(), 0.5);
        let raw = Driver::CompoundPoisson { rate: 2.0, jump: JumpLaw::Fixed { size: -0.5 } };
        assert_eq!((raw.bracket_rate(), raw.variation_rate()), (0.0, 1.0));
    }

    #[test]
    fn refined_increments_aggregate() {
        let d = Driver::PiiDecomposed { drift: 0.3, scale: 0.7, rate: 4.0, jump: JumpLaw::TwoPoint { a: 1.0, b: -0.5, p: 0.3 } };
        let coarse = d.increment(5, 1, 9, 3, 10, 4);
        let mut sum = (0.0, 0.0);
        for f in 0..4 {
            let (a, b) = d.increment(5, 1, 9, 12 + f, 40, 1);
            sum.0 += a;
            sum.1 += b;
        }
        assert_eq!(coarse, sum);
    }

    #[test]
    fn compensated_drivers_have_zero_mean() {
        let d = Driver::CompensatedPoisson { rate: 3.0, jump: JumpLaw::Uniform { a: 0.0, b: 1.0 } };
        let n = 40_000;
        let xs: Vec<f64> = (0..n).map(|i| d.increment(1, 0, i, 0, 1, 1).0).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (d.bracket_rate() / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * sd, "mean {mean}");
    }

    #[test]
    fn characteristic_dominates_brackets() {
        let jump = JumpLaw::Uniform { a: -0.5, b: 1.0 };
        for d in [
            Driver::Brownian { scale: 1.0 },
            Driver::CompensatedPoisson { rate: 2.0, jump: jump.clone() },
            Driver::PiiDecomposed { drift: 0.1, scale: 0.5, rate: 1.0, jump },
        ] {
            let a = characteristic_audit(&d, 50, 1.0, 4000, 3).unwrap();
            assert!(a.passed, "{d:?}: {a:?}");
        }
    }

    #[test]
    fn martingale_estimate() {
        let zero = martingale_sup_estimate(&Driver::Zero, 1.0, 100, 10, 1).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
        assert!(zero.holds);
        let bm = martingale_sup_estimate(&Driver::Brownian { scale: 1.0 }, 1.0, 200, 2000, 1).unwrap();
        assert!(bm.holds && bm.rhs == 3.0);
        let cp = Driver::CompensatedPoisson { rate: 1.0, jump: JumpLaw::Fixed { size: 1.0 } };
        let r = martingale_sup_estimate(&cp, 1.0, 200, 2000, 1).unwrap();
        assert!(r.holds && r.rhs == 3.0);
    }
}
