use serde::Serialize;

use super::WalkStop;
use crate::asymptotics::IntegratedTail;
use crate::distributions::{InputLaw, TailKind};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupWalkSample {
    /// `sup_n ln Bbar_{n+1} + S_n` over the steps taken; always `>= 0`.
    pub m: f64,
    /// Number of draws consumed.
    pub stopped_at: usize,
    /// `n` attaining the maximum.
    pub record_index: usize,
    /// `S_n` at the stop.
    pub walk_at_stop: f64,
}

/// Supremum of the perturbed walk `ln Bbar_{n+1} + S_n`, `S_n = sum_{j<=n} ln A_j`.
pub fn sample_sup_walk(
    law: &InputLaw,
    rng: &mut RngStream,
    stop: &WalkStop,
) -> Result<SupWalkSample> {
    match law.log_pair() {
        // B > 0, D = 0: ln Bbar = (ln B)^+
        Some(lp) => walk(
            || {
                let (la, lb) = lp.draw(rng);
                Ok((la, lb.max(0.0)))
            },
            stop,
        ),
        None => walk(
            || {
                let t = law.sample(rng)?;
                Ok((t.a.log_mag(), t.b_bar().log_mag()))
            },
            stop,
        ),
    }
}

fn walk<F>(mut draw: F, stop: &WalkStop) -> Result<SupWalkSample>
where
    F: FnMut() -> Result<(f64, f64)>,
{
    let mut walk = 0.0f64;
    let mut m = f64::NEG_INFINITY;
    let mut rec = 0usize;
    let mut n = 0usize;
    loop {
        let (log_a, log_bbar) = draw()?;
        let level = log_bbar + walk;
        if level > m {
            m = level;
            rec = n;
        }
        walk += log_a;
        n += 1;
        if walk <= m - stop.guard_log && walk <= -stop.min_depth {
            return Ok(SupWalkSample {
                m,
                stopped_at: n,
                record_index: rec,
                walk_at_stop: walk,
            });
        }
        if n >= stop.max_steps {
            return Err(Error::WalkCap {
                steps: n,
                current_max: m,
            });
        }
    }
}

/// Approximate chance that a walk stopped at `walk_at_stop` below `u` would
/// still have crossed `u` later: `(1/mu) F_I(u - walk_at_stop)` for the
/// `A v Bbar` integrated tail. Reported as a bias diagnostic, not a bound.
pub fn late_record_bias(law: &InputLaw, u: f64, walk_at_stop: f64) -> Result<f64> {
    let it = IntegratedTail::new(law, TailKind::LogABar)?;
    Ok(it.eval(u - walk_at_stop)? / law.mu())
}
