use anyhow::{anyhow, Result};

use crate::config::Scenario;

const BUILTIN: &[(&str, &str)] = &[
    (
        "deterministic-smoke",
        include_str!("../scenarios/deterministic-smoke.toml"),
    ),
    (
        "thm31-positive-bd",
        include_str!("../scenarios/thm31-positive-bd.toml"),
    ),
    (
        "thm33-finite-horizon",
        include_str!("../scenarios/thm33-finite-horizon.toml"),
    ),
    (
        "thm25-sup-walk",
        include_str!("../scenarios/thm25-sup-walk.toml"),
    ),
    ("example-3-4", include_str!("../scenarios/example-3-4.toml")),
    (
        "bounded-example",
        include_str!("../scenarios/bounded-example.toml"),
    ),
    (
        "class-diagnostics",
        include_str!("../scenarios/class-diagnostics.toml"),
    ),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let src = builtin_source(name)
        .ok_or_else(|| anyhow!("no built-in scenario named {name:?} (see `slowtail list`)"))?;
    Scenario::parse(src)
}

pub fn catalog() -> Vec<Scenario> {
    builtin_names()
        .map(|n| builtin(n).expect("built-in scenarios parse"))
        .collect()
}

/// A path to a scenario file, or else a built-in name.
pub fn resolve(arg: &str) -> Result<Scenario> {
    let p = std::path::Path::new(arg);
    if p.exists() {
        Scenario::load(p)
    } else {
        builtin(arg)
    }
}
