//! Random Lipschitz maps with a registered envelope triple.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{InputLaw, Triple};
use crate::error::{EnvelopeSide, Error, Result};
use crate::logreal::LogReal;
use crate::rng::RngStream;

/// Relative rounding allowance for the envelope inequalities.
pub const ENVELOPE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// `A t + B`
    Affine,
    /// `A t^+ + B`
    AffinePositive,
    /// `A1 t^+ + sqrt(D + A2 (t^+)^2)`, with the law's `(a, b, d)` read as
    /// `(A1, A2, D)`.
    Arch1,
    Custom,
}

/// A map family supplied in code. The envelope is declared, never inferred;
/// [`envelope_check`] tests the declaration.
pub trait CustomMap: Send + Sync + fmt::Debug {
    fn apply(&self, draw: &Triple, t: LogReal) -> LogReal;
    /// Envelope triple for a draw. Defaults to the draw itself.
    fn envelope(&self, draw: &Triple) -> Triple {
        *draw
    }
    /// `ln` of a Lipschitz bound for the draw.
    fn log_lip(&self, draw: &Triple) -> f64;
}

#[derive(Clone, Debug)]
enum Form {
    Affine {
        a: LogReal,
        b: LogReal,
    },
    AffinePositive {
        a: LogReal,
        b: LogReal,
    },
    Arch1 {
        a1: LogReal,
        a2: LogReal,
        d: LogReal,
    },
    Custom {
        map: Arc<dyn CustomMap>,
        draw: Triple,
    },
}

/// One realized map with its envelope coefficients.
#[derive(Clone, Debug)]
pub struct MapDraw {
    form: Form,
    pub env: Triple,
    /// `ln Lip`; exact for the affine forms, an upper bound otherwise.
    pub log_lip: f64,
}

impl MapDraw {
    pub fn affine(a: LogReal, b: LogReal) -> Self {
        MapDraw {
            form: Form::Affine { a, b },
            env: Triple {
                a,
                b,
                d: LogReal::ZERO,
            },
            log_lip: a.log_mag(),
        }
    }

    pub fn affine_positive(a: LogReal, b: LogReal) -> Self {
        MapDraw {
            form: Form::AffinePositive { a, b },
            env: Triple {
                a,
                b,
                d: LogReal::ZERO,
            },
            log_lip: a.log_mag(),
        }
    }

    /// The ARCH(1)-type map. Registered envelope `(A1 + sqrt A2, 0, sqrt D)`.
    pub fn arch1(a1: f64, a2: f64, d: f64) -> Result<Self> {
        for (name, v) in [("A1", a1), ("A2", a2), ("D", d)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config {
                    family: "Arch1",
                    reason: format!("{name} must be >= 0, got {v}"),
                });
            }
        }
        Ok(Self::arch1_lr(
            LogReal::from_f64(a1),
            LogReal::from_f64(a2),
            LogReal::from_f64(d),
        ))
    }

    fn arch1_lr(a1: LogReal, a2: LogReal, d: LogReal) -> Self {
        let a = a1 + a2.sqrt();
        MapDraw {
            form: Form::Arch1 { a1, a2, d },
            env: Triple {
                a,
                b: LogReal::ZERO,
                d: d.sqrt(),
            },
            log_lip: a.log_mag(),
        }
    }

    pub fn custom(map: Arc<dyn CustomMap>, draw: Triple) -> Self {
        let env = map.envelope(&draw);
        let log_lip = map.log_lip(&draw);
        MapDraw {
            form: Form::Custom { map, draw },
            env,
            log_lip,
        }
    }

    pub fn lip(&self) -> f64 {
        self.log_lip.exp()
    }

    #[inline]
    pub fn apply(&self, t: LogReal) -> LogReal {
        match &self.form {
            Form::Affine { a, b } => *a * t + *b,
            Form::AffinePositive { a, b } => *a * t.pos_part() + *b,
            Form::Arch1 { a1, a2, d } => {
                let tp = t.pos_part();
                *a1 * tp + (*d + *a2 * tp * tp).sqrt()
            }
            Form::Custom { map, draw } => map.apply(draw, t),
        }
    }

    pub fn apply_f64(&self, t: f64) -> f64 {
        self.apply(LogReal::from_f64(t)).to_f64()
    }

    /// `A t + B - D`.
    #[inline]
    pub fn lower(&self, t: LogReal) -> LogReal {
        self.env.a * t + (self.env.b - self.env.d)
    }

    /// `A t^+ + B^+ + D`.
    #[inline]
    pub fn upper(&self, t: LogReal) -> LogReal {
        self.env.a * t.pos_part() + (self.env.b.pos_part() + self.env.d)
    }
}

#[derive(Clone, Debug)]
pub struct LipschitzSystem {
    pub kind: SystemKind,
    pub law: InputLaw,
    custom: Option<Arc<dyn CustomMap>>,
}

impl LipschitzSystem {
    pub fn affine(law: InputLaw) -> Self {
        LipschitzSystem {
            kind: SystemKind::Affine,
            law,
            custom: None,
        }
    }

    pub fn affine_positive(law: InputLaw) -> Self {
        LipschitzSystem {
            kind: SystemKind::AffinePositive,
            law,
            custom: None,
        }
    }

    /// ARCH(1)-type system; the law's triple supplies `(A1, A2, D)`.
    pub fn arch1(law: InputLaw) -> Self {
        LipschitzSystem {
            kind: SystemKind::Arch1,
            law,
            custom: None,
        }
    }

    pub fn custom(law: InputLaw, map: Arc<dyn CustomMap>) -> Self {
        LipschitzSystem {
            kind: SystemKind::Custom,
            law,
            custom: Some(map),
        }
    }

    pub fn new(kind: SystemKind, law: InputLaw) -> Result<Self> {
        match kind {
            SystemKind::Affine => Ok(Self::affine(law)),
            SystemKind::AffinePositive => Ok(Self::affine_positive(law)),
            SystemKind::Arch1 => Ok(Self::arch1(law)),
            SystemKind::Custom => Err(Error::Config {
                family: law.family.name(),
                reason: "custom maps are built in code with LipschitzSystem::custom".into(),
            }),
        }
    }

    /// Turns one draw of the law into a map.
    #[inline]
    pub fn map_for(&self, t: Triple) -> MapDraw {
        match self.kind {
            SystemKind::Affine => {
                let mut m = MapDraw::affine(t.a, t.b);
                m.env.d = t.d;
                m
            }
            SystemKind::AffinePositive => {
                let mut m = MapDraw::affine_positive(t.a, t.b);
                m.env.d = t.d;
                m
            }
            SystemKind::Arch1 => MapDraw::arch1_lr(t.a, t.b, t.d),
            SystemKind::Custom => {
                MapDraw::custom(self.custom.clone().expect("custom system without map"), t)
            }
        }
    }

    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> Result<MapDraw> {
        Ok(self.map_for(self.law.sample(rng)?))
    }

    /// Monte Carlo mean of `ln Lip` with a one-sided 99% upper bound.
    pub fn mean_log_lip(&self, n: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
        if n < 2 {
            return Err(Error::EmptySamples);
        }
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let l = self.draw(rng)?.log_lip;
            s += l;
            s2 += l * l;
        }
        let nf = n as f64;
        let mean = s / nf;
        let var = ((s2 - s * s / nf) / (nf - 1.0)).max(0.0);
        Ok((mean, mean + 2.326_347_874 * (var / nf).sqrt()))
    }
}

/// 41 points: 0 and `+-10^k` for 20 values of `k` evenly spaced in `[-3, 3]`.
pub fn standard_grid() -> Vec<LogReal> {
    let mut g = Vec::with_capacity(41);
    for i in 0..20 {
        let k = -3.0 + 6.0 * i as f64 / 19.0;
        let l = k * std::f64::consts::LN_10;
        g.push(LogReal::from_parts(-1, l));
        g.push(LogReal::from_ln(l));
    }
    g.push(LogReal::ZERO);
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub checks: usize,
    /// Smallest `psi(t) - lower(t)` seen.
    pub min_lower_slack: f64,
    /// Smallest `upper(t) - psi(t)` seen.
    pub min_upper_slack: f64,
}

fn excess(lhs: LogReal, rhs: LogReal) -> f64 {
    // how far lhs <= rhs fails, relative to the operands
    let diff = (lhs - rhs).to_f64();
    let scale = lhs.abs().max(rhs.abs()).to_f64().max(f64::MIN_POSITIVE);
    diff / scale
}

/// Checks `A t + B - D <= psi(t) <= A t^+ + B^+ + D` on every draw and grid
/// point. The first violation beyond [`ENVELOPE_TOL`] is returned as an error.
pub fn envelope_check(
    system: &LipschitzSystem,
    grid: &[LogReal],
    n_draws: usize,
    rng: &mut RngStream,
) -> Result<EnvelopeReport> {
    let mut rep = EnvelopeReport {
        checks: 0,
        min_lower_slack: f64::INFINITY,
        min_upper_slack: f64::INFINITY,
    };
    for draw in 0..n_draws {
        let m = system.draw(rng)?;
        for &t in grid {
            let psi = m.apply(t);
            let lo = m.lower(t);
            let hi = m.upper(t);
            let e_lo = excess(lo, psi);
            if e_lo > ENVELOPE_TOL || !psi.is_finite() {
                return Err(Error::EnvelopeViolation {
                    draw,
                    t: t.to_f64(),
                    side: EnvelopeSide::Lower,
                    excess: e_lo,
                });
            }
            let e_hi = excess(psi, hi);
            if e_hi > ENVELOPE_TOL {
                return Err(Error::EnvelopeViolation {
                    draw,
                    t: t.to_f64(),
                    side: EnvelopeSide::Upper,
                    excess: e_hi,
                });
            }
            rep.min_lower_slack = rep.min_lower_slack.min((psi - lo).to_f64());
            rep.min_upper_slack = rep.min_upper_slack.min((hi - psi).to_f64());
            rep.checks += 1;
        }
    }
    Ok(rep)
}

/// Which map of each draw to compose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Psi,
    Lower,
    Upper,
}

/// `Psi_1 o ... o Psi_n (t)`: the last draw is applied first. An empty list
/// returns `t`.
pub fn backward_compose(draws: &[MapDraw], t: LogReal) -> Result<LogReal> {
    backward_compose_with(draws, t, Branch::Psi)
}

pub fn backward_compose_with(draws: &[MapDraw], t: LogReal, branch: Branch) -> Result<LogReal> {
    let mut x = t;
    for (depth, m) in draws.iter().rev().enumerate() {
        x = match branch {
            Branch::Psi => m.apply(x),
            Branch::Lower => m.lower(x),
            Branch::Upper => m.upper(x),
        };
        if !x.is_finite() || x.log_mag() > 7.0e307 {
            return Err(Error::Overflow { depth: depth + 1 });
        }
    }
    Ok(x)
}
