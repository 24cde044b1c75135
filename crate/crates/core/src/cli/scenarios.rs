//! Scenario files compiled into the binary. Each declares its `command` and a
//! `budget_seconds` wall-time budget.

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../scenarios/", $name, ".toml")))),*]
    };
}

pub const SHIPPED: &[(&str, &str)] = shipped![
    "sp-example",
    "mean-sp-soft",
    "closed-form",
    "rising-floor",
    "picard-soft",
    "picard-poisson",
    "picard-affine",
    "picard-tilt",
    "picard-kinked",
    "smooth-brownian",
    "investment",
];

/// The Picard scenarios cross-checked against the Euler scheme.
pub const PICARD: [&str; 5] = ["picard-soft", "picard-poisson", "picard-affine", "picard-tilt", "picard-kinked"];

pub fn lookup(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}
