use std::io::Write;

use serde::Serialize;

use super::{Method, StationarySample};
use crate::error::{Error, Result};
use crate::logreal::LogReal;
use crate::rng::RngStream;
use crate::systems::LipschitzSystem;

/// `R_0 = r0, R_1, ..., R_n` by forward iteration.
pub fn iterate_forward(
    system: &LipschitzSystem,
    r0: LogReal,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<LogReal>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = r0;
    out.push(x);
    for k in 0..n {
        x = system.draw(rng)?.apply(x);
        if !x.is_finite() {
            return Err(Error::Overflow { depth: k });
        }
        out.push(x);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingOptions {
    /// Two chains count as coupled once their gap is this many nats below
    /// their magnitude.
    pub couple_tol_log: f64,
    pub max_steps: usize,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions {
            couple_tol_log: 50.0,
            max_steps: 1_000_000,
        }
    }
}

fn gap_log(x: LogReal, y: LogReal) -> (f64, f64) {
    let gap = (x - y).abs().log_mag();
    let scale = x.abs().max(y.abs()).log_mag();
    (gap, scale)
}

/// Stationary draw by forward coupling of the chains started at 0 and 1.
///
/// With `tau` the first step at which the chains agree to `couple_tol_log`
/// nats, the chain is run `tau` further steps on fresh draws and `R_{2 tau}`
/// is returned. Stopping at `tau` itself would bias the draw toward the
/// contracting steps that caused the coupling.
pub fn sample_stationary_forward(
    system: &LipschitzSystem,
    rng: &mut RngStream,
    opt: &CouplingOptions,
) -> Result<StationarySample> {
    let mut x = LogReal::ZERO;
    let mut y = LogReal::ONE;
    let mut tau = 0usize;
    loop {
        let m = system.draw(rng)?;
        x = m.apply(x);
        y = m.apply(y);
        tau += 1;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Overflow { depth: tau });
        }
        let (g, s) = gap_log(x, y);
        if g == f64::NEG_INFINITY || g <= s - opt.couple_tol_log {
            break;
        }
        if 2 * tau >= opt.max_steps {
            return Err(Error::TruncationCap {
                terms: tau,
                log_scale: s,
                walk: g,
            });
        }
    }
    for k in 0..tau {
        let m = system.draw(rng)?;
        x = m.apply(x);
        y = m.apply(y);
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Overflow { depth: tau + k + 1 });
        }
    }
    let (g, _) = gap_log(x, y);
    Ok(StationarySample {
        value: x,
        terms_used: 2 * tau,
        residual_log_bound: g,
        method: Method::ForwardCoupling,
    })
}

/// Writes `step,sign,log_mag` rows.
pub fn write_trajectory_csv<W: Write>(traj: &[LogReal], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["step", "sign", "log_mag"])?;
    for (k, v) in traj.iter().enumerate() {
        wr.write_record([
            k.to_string(),
            v.sign().to_string(),
            format!("{:.17e}", v.log_mag()),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
