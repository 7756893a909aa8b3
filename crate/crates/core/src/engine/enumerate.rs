use crate::distributions::{Family, Triple};
use crate::error::{Error, Result};
use crate::logreal::LogReal;
use crate::systems::LipschitzSystem;

/// Largest number of paths `s^n` the exact oracle will walk.
pub const ENUMERATION_BOUND: u64 = 10_000_000;

const MERGE_REL: f64 = 1e-12;

/// Exact law of `R_n` from `R_0 = r0` for a finitely supported input law,
/// as sorted `(value, probability)` pairs. Values within a relative `1e-12`
/// are merged.
pub fn enumerate_finite(system: &LipschitzSystem, r0: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let atoms: Vec<(Triple, f64)> = match &system.law.family {
        Family::DiscreteFinite { atoms } => atoms
            .iter()
            .map(|a| (Triple::from_f64(a.a, a.b, a.d), a.prob))
            .collect(),
        Family::Deterministic { a, b, d } => vec![(Triple::from_f64(*a, *b, *d), 1.0)],
        f => return Err(Error::NotFinite { family: f.name() }),
    };
    let paths = (atoms.len() as f64).powi(n as i32);
    if paths > ENUMERATION_BOUND as f64 {
        return Err(Error::EnumerationTooLarge {
            paths,
            bound: ENUMERATION_BOUND,
        });
    }
    let maps: Vec<_> = atoms
        .iter()
        .map(|(t, p)| (system.map_for(*t), *p))
        .collect();
    let mut dist = vec![(LogReal::from_f64(r0), 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(dist.len() * maps.len());
        for (x, p) in &dist {
            for (m, q) in &maps {
                next.push((m.apply(*x), p * q));
            }
        }
        dist = merge(next);
    }
    Ok(dist.into_iter().map(|(x, p)| (x.to_f64(), p)).collect())
}

fn merge(mut v: Vec<(LogReal, f64)>) -> Vec<(LogReal, f64)> {
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<(LogReal, f64)> = Vec::with_capacity(v.len());
    for (x, p) in v {
        if let Some(last) = out.last_mut() {
            let close = if last.0.is_zero() || x.is_zero() {
                last.0 == x
            } else {
                let gap = (x - last.0).abs().log_mag();
                gap <= x.abs().max(last.0.abs()).log_mag() + MERGE_REL.ln()
            };
            if close {
                last.1 += p;
                continue;
            }
        }
        out.push((x, p));
    }
    out
}
