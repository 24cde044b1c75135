//! Coefficient functions `f(t, x)`, `g(t, x)` with their growth and Lipschitz constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefFn {
    Zero,
    Const { value: f64 },
    /// `slope x + intercept`
    Affine { slope: f64, intercept: f64 },
    /// `offset + amp sin(freq x)`
    Sin { amp: f64, freq: f64, offset: f64 },
    /// `offset + amp tanh(x) cos(t)`
    TanhCos { amp: f64, offset: f64 },
}

impl CoefFn {
    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            CoefFn::Zero => true,
            CoefFn::Const { value } => value.is_finite(),
            CoefFn::Affine { slope, intercept } => slope.is_finite() && intercept.is_finite(),
            CoefFn::Sin { amp, freq, offset } => amp.is_finite() && freq.is_finite() && offset.is_finite(),
            CoefFn::TanhCos { amp, offset } => amp.is_finite() && offset.is_finite(),
        };
        if finite { Ok(()) } else { Err(Error::invalid(format!("non-finite coefficient {self:?}"))) }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match *self {
            CoefFn::Zero => 0.0,
            CoefFn::Const { value } => value,
            CoefFn::Affine { slope, intercept } => slope * x + intercept,
            CoefFn::Sin { amp, freq, offset } => offset + amp * (freq * x).sin(),
            CoefFn::TanhCos { amp, offset } => offset + amp * x.tanh() * t.cos(),
        }
    }

    /// Smallest `L` with `|f(t, x) - f(t, y)| <= L |x - y|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            CoefFn::Zero | CoefFn::Const { .. } => 0.0,
            CoefFn::Affine { slope, .. } => slope.abs(),
            CoefFn::Sin { amp, freq, .. } => (amp * freq).abs(),
            CoefFn::TanhCos { amp, .. } => amp.abs(),
        }
    }

    /// A `μ` with `|f(t, x)| <= μ (1 + |x|)`.
    pub fn growth(&self) -> f64 {
        match *self {
            CoefFn::Zero => 0.0,
            CoefFn::Const { value } => value.abs(),
            CoefFn::Affine { slope, intercept } => slope.abs().max(intercept.abs()),
            CoefFn::Sin { amp, offset, .. } | CoefFn::TanhCos { amp, offset } => amp.abs() + offset.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CoefFn::Zero)
    }
}

/// Lattice check of the growth and Lipschitz constants of a pair `(f, g)` on
/// `[0, horizon] x [-10, 10]`; returns the largest observed ratios to the
/// declared `(μ, c)`.
pub fn audit_pair(f: &CoefFn, g: &CoefFn, mu: f64, c: f64, horizon: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..2001).map(|i| -10.0 + 0.01 * i as f64).collect();
    let mut growth: f64 = 0.0;
    let mut lip: f64 = 0.0;
    for ti in 0..=20 {
        let t = horizon * ti as f64 / 20.0;
        for w in xs.windows(2) {
            let (x, y) = (w[0], w[1]);
            let size = f.eval(t, x).abs() + g.eval(t, x).abs();
            growth = growth.max(if mu > 0.0 { size / (mu * (1.0 + x.abs())) } else if size > 0.0 { f64::INFINITY } else { 0.0 });
            let diff = (f.eval(t, x) - f.eval(t, y)).abs() + (g.eval(t, x) - g.eval(t, y)).abs();
            let ratio = diff / (y - x);
            lip = lip.max(if c > 0.0 { ratio / c } else if ratio > 1e-12 { f64::INFINITY } else { 0.0 });
        }
    }
    (growth, lip)
}
