use super::{Method, StationarySample, Truncation};
use crate::distributions::InputLaw;
use crate::error::{Error, Result};
use crate::logreal::{LogReal, LogSum};
use crate::rng::RngStream;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Series {
    Plain,
    Upper,
    Lower,
}

/// Terms this far below the largest term so far are counted but not added.
/// With at most `max_terms` of them the neglected mass stays below
/// `max_terms * e^-(rel_tol_log + 20)` relative.
const SKIP_MARGIN: f64 = 20.0;

/// One step: `(ln A, term coefficient, ln of the envelope of the term)`.
type Step = (f64, LogReal, f64);

fn run_series<F>(
    mut draw: F,
    center: Option<LogReal>,
    trunc: &Truncation,
) -> Result<StationarySample>
where
    F: FnMut() -> Result<Step>,
{
    let skip = trunc.rel_tol_log + SKIP_MARGIN;
    let mut acc = LogSum::new();
    let mut scale = center.map_or(f64::NEG_INFINITY, |c| c.log_mag());
    let mut walk = 0.0f64;
    let mut env_max = f64::NEG_INFINITY;
    let mut n = 0usize;
    loop {
        let (log_a, b, env) = draw()?;
        env_max = env_max.max(env);
        if !b.is_zero() {
            let lm = b.log_mag() + walk;
            if lm > scale - skip {
                acc.push(b.scale_ln(walk));
            }
            if lm > scale {
                scale = lm;
            }
        }
        n += 1;
        walk += log_a;
        if !walk.is_finite() {
            return Err(Error::Overflow { depth: n });
        }
        let resid = env_max + walk;
        // an all-zero prefix is measured against 1
        let reference = if scale == f64::NEG_INFINITY {
            0.0
        } else {
            scale
        };
        let partial = n == trunc.max_terms && n == trunc.min_terms;
        if partial
            || resid <= reference - trunc.rel_tol_log
                && walk <= -trunc.min_depth
                && n >= trunc.min_terms
        {
            let mut value = acc.value();
            if let Some(c) = center {
                value = value + c;
            }
            return Ok(StationarySample {
                value,
                terms_used: n,
                residual_log_bound: resid,
                method: Method::BackwardSeries,
            });
        }
        if n >= trunc.max_terms {
            return Err(Error::TruncationCap {
                terms: n,
                log_scale: scale,
                walk,
            });
        }
    }
}

fn dispatch(
    law: &InputLaw,
    rng: &mut RngStream,
    trunc: &Truncation,
    series: Series,
) -> Result<StationarySample> {
    if let Some(lp) = law.log_pair() {
        // B > 0 and D = 0: Bbar = B v 1, B - D = B
        return match series {
            Series::Upper => run_series(
                || {
                    let (la, lb) = lp.draw(rng);
                    Ok((la, LogReal::from_ln(lb.max(0.0)), lb.max(0.0)))
                },
                None,
                trunc,
            ),
            Series::Plain | Series::Lower => run_series(
                || {
                    let (la, lb) = lp.draw(rng);
                    Ok((la, LogReal::from_ln(lb), lb.max(0.0)))
                },
                None,
                trunc,
            ),
        };
    }
    let center = if series == Series::Plain {
        law.centering()
    } else {
        None
    };
    run_series(
        || {
            let t = law.sample(rng)?;
            let b = match series {
                Series::Plain if center.is_some() => law.centered_b(&t),
                Series::Plain => t.b,
                Series::Upper => t.b_bar(),
                Series::Lower => t.b_lower(),
            };
            Ok((t.a.log_mag(), b, t.b_bar().max(t.b_lower().abs()).log_mag()))
        },
        center,
        trunc,
    )
}

/// `R = sum_{n>=0} B_{n+1} A_1 ... A_n`.
pub fn sample_perpetuity(
    law: &InputLaw,
    rng: &mut RngStream,
    trunc: &Truncation,
) -> Result<StationarySample> {
    dispatch(law, rng, trunc, Series::Plain)
}

/// The same series with `Bbar = (B^+ + D) v 1` in place of `B`; always `>= 1`.
pub fn sample_upper_perpetuity(
    law: &InputLaw,
    rng: &mut RngStream,
    trunc: &Truncation,
) -> Result<StationarySample> {
    dispatch(law, rng, trunc, Series::Upper)
}

/// The same series with `B - D` in place of `B`.
pub fn sample_lower_perpetuity(
    law: &InputLaw,
    rng: &mut RngStream,
    trunc: &Truncation,
) -> Result<StationarySample> {
    dispatch(law, rng, trunc, Series::Lower)
}
