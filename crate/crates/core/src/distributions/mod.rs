//! Input laws for the triple `(A, B, D)`.

pub mod diagnostics;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logreal::LogReal;
use crate::rng::RngStream;

/// Law of `log A` for the parametric families.
///
/// * `Pareto { alpha, shift }`: `P[log A > x] = (x + shift)^-alpha` for
///   `x >= 1 - shift`, so `log A + shift` is Pareto with minimum 1.
/// * `Weibull { beta, scale, shift }`: `P[log A > x] = exp(-((x + shift)/scale)^beta)`
///   for `x >= -shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Pareto { alpha: f64, shift: f64 },
    Weibull { beta: f64, scale: f64, shift: f64 },
}

impl Marginal {
    fn validate(&self, family: &'static str) -> Result<()> {
        let bad = |reason: String| Err(Error::Config { family, reason });
        match *self {
            Marginal::Pareto { alpha, shift } => {
                if !(alpha.is_finite() && alpha > 1.0) {
                    return bad(format!("alpha must be > 1 for a finite mean, got {alpha}"));
                }
                if !shift.is_finite() {
                    return bad("shift must be finite".into());
                }
            }
            Marginal::Weibull { beta, scale, shift } => {
                if !(beta.is_finite() && beta > 0.0) {
                    return bad(format!("beta must be positive, got {beta}"));
                }
                if !(scale.is_finite() && scale > 0.0) {
                    return bad(format!("scale must be positive, got {scale}"));
                }
                if !shift.is_finite() {
                    return bad("shift must be finite".into());
                }
            }
        }
        Ok(())
    }

    /// The parametric family with this marginal for `log A`.
    pub fn into_family(self) -> Family {
        match self {
            Marginal::Pareto { alpha, shift } => Family::ParetoLog { alpha, shift },
            Marginal::Weibull { beta, scale, shift } => Family::WeibullLog { beta, scale, shift },
        }
    }

    /// `P[log A > x]`.
    #[inline]
    pub fn tail(&self, x: f64) -> f64 {
        match *self {
            Marginal::Pareto { alpha, shift } => {
                let z = x + shift;
                if z <= 1.0 {
                    1.0
                } else {
                    z.powf(-alpha)
                }
            }
            Marginal::Weibull { beta, scale, shift } => {
                let z = x + shift;
                if z <= 0.0 {
                    1.0
                } else {
                    (-(z / scale).powf(beta)).exp()
                }
            }
        }
    }

    /// `E[log A]`.
    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Pareto { alpha, shift } => alpha / (alpha - 1.0) - shift,
            Marginal::Weibull { beta, scale, shift } => {
                scale * statrs::function::gamma::gamma(1.0 + 1.0 / beta) - shift
            }
        }
    }

    /// Left end of the support of `log A`.
    pub fn lower_end(&self) -> f64 {
        match *self {
            Marginal::Pareto { shift, .. } => 1.0 - shift,
            Marginal::Weibull { shift, .. } => -shift,
        }
    }

    /// Inverse-transform draw of `log A`.
    #[inline]
    pub fn sample_log(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        match *self {
            Marginal::Pareto { alpha, shift } => {
                let z = if alpha == 2.0 {
                    1.0 / u.sqrt()
                } else {
                    u.powf(-1.0 / alpha)
                };
                z - shift
            }
            Marginal::Weibull { beta, scale, shift } => {
                let e = -u.ln();
                let z = if beta == 0.5 {
                    e * e
                } else {
                    e.powf(1.0 / beta)
                };
                scale * z - shift
            }
        }
    }

    /// `int_x^inf P[log A > y] dy` where it has an elementary form.
    pub fn integrated_tail(&self, x: f64) -> Option<f64> {
        match *self {
            Marginal::Pareto { alpha, shift } => {
                let lo = 1.0 - shift;
                if x >= lo {
                    Some((x + shift).powf(1.0 - alpha) / (alpha - 1.0))
                } else {
                    Some(lo - x + 1.0 / (alpha - 1.0))
                }
            }
            Marginal::Weibull { .. } => None,
        }
    }
}

/// How `B` relates to `A` for the parametric families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    BEqualsA,
    Independent,
    /// The family itself specifies the joint law.
    Joint,
}

/// One support point of a finitely supported triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub d: f64,
    pub prob: f64,
}

/// A user-supplied joint law. Must describe itself completely: the library
/// samples it and queries its tails but never infers anything from draws.
pub trait CustomLaw: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn sample(&self, rng: &mut RngStream) -> Triple;
    /// `P[log A > x]`.
    fn log_a_tail(&self, x: f64) -> f64;
    /// `P[log(A v B) > x]`.
    fn log_ab_tail(&self, x: f64) -> f64;
    /// `P[B > e^x]`.
    fn log_b_tail(&self, x: f64) -> f64;
    /// `P[log(A v Bbar) > x]` with `Bbar = (B^+ + D) v 1`.
    fn log_abar_tail(&self, x: f64) -> f64;
    /// `E[log A]`, if known exactly.
    fn mean_log_a(&self) -> Option<f64>;
    fn flags(&self) -> LawFlags;
    fn dominance(&self) -> TailDominance {
        TailDominance::Unknown
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    ParetoLog {
        alpha: f64,
        shift: f64,
    },
    WeibullLog {
        beta: f64,
        scale: f64,
        shift: f64,
    },
    DiscreteFinite {
        atoms: Vec<Atom>,
    },
    Deterministic {
        a: f64,
        b: f64,
        d: f64,
    },
    /// `B = 1{A <= 1} - A`, `D = 0`; the perpetuity is bounded by 1.
    IndicatorCounter {
        base: Marginal,
    },
    Custom(Arc<dyn CustomLaw>),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::ParetoLog { .. } => "ParetoLog",
            Family::WeibullLog { .. } => "WeibullLog",
            Family::DiscreteFinite { .. } => "DiscreteFinite",
            Family::Deterministic { .. } => "Deterministic",
            Family::IndicatorCounter { .. } => "IndicatorCounter",
            Family::Custom(_) => "Custom",
        }
    }

    fn marginal(&self) -> Option<Marginal> {
        match *self {
            Family::ParetoLog { alpha, shift } => Some(Marginal::Pareto { alpha, shift }),
            Family::WeibullLog { beta, scale, shift } => {
                Some(Marginal::Weibull { beta, scale, shift })
            }
            Family::IndicatorCounter { base } => Some(base),
            _ => None,
        }
    }
}

/// One joint draw of the envelope coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triple {
    pub a: LogReal,
    pub b: LogReal,
    pub d: LogReal,
}

impl Triple {
    pub fn from_f64(a: f64, b: f64, d: f64) -> Self {
        Triple {
            a: LogReal::from_f64(a),
            b: LogReal::from_f64(b),
            d: LogReal::from_f64(d),
        }
    }

    /// `Bbar = (B^+ + D) v 1`.
    #[inline]
    pub fn b_bar(&self) -> LogReal {
        (self.b.pos_part() + self.d).max(LogReal::ONE)
    }

    /// `B - D`.
    #[inline]
    pub fn b_lower(&self) -> LogReal {
        self.b - self.d
    }
}

/// Log-scale sampler for the parametric families; see [`InputLaw::log_pair`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogPair {
    marginal: Marginal,
    independent: bool,
}

impl LogPair {
    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> (f64, f64) {
        let la = self.marginal.sample_log(rng);
        let lb = if self.independent {
            self.marginal.sample_log(rng)
        } else {
            la
        };
        (la, lb)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawFlags {
    pub d_is_zero: bool,
    pub b_minus_d_positive_as: bool,
    /// The two-part tail condition on `A v (B +- D)` and on
    /// `P[A > x, B - D <= -x]`.
    pub tail_condition_35_holds: bool,
}

/// Which of `P[A > x]`, `P[B > x]` is asymptotically negligible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDominance {
    /// Neither is negligible: `P[A > x] ~ c P[B > x]`.
    Comparable,
    /// `P[B > x] = o(P[A > x])`.
    ADominates,
    /// `P[A > x] = o(P[B > x])`.
    BDominates,
    /// Both tails vanish beyond a finite point.
    Bounded,
    Unknown,
}

/// Tail functions a law can be asked for, all on the log scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailKind {
    /// `P[log A > x]`
    LogA,
    /// `P[B > e^x]`
    LogB,
    /// `P[log^+ B > x]`
    LogBPos,
    /// `P[log(A v B) > x]`
    LogAB,
    /// `P[log(A v Bbar) > x]`
    LogABar,
}

#[derive(Clone, Debug)]
pub struct InputLaw {
    pub family: Family,
    pub coupling: Coupling,
    mu: f64,
    mu_estimated: bool,
    pub gamma: f64,
    pub flags: LawFlags,
}

fn ind(c: bool) -> f64 {
    if c {
        1.0
    } else {
        0.0
    }
}

/// `ln max(a, b)` for `a > 0` and real `b`.
fn log_max_pos(a: f64, b: f64) -> f64 {
    a.max(b).ln()
}

impl InputLaw {
    /// Validates the family and fills in `mu` and the flags.
    pub fn new(family: Family, coupling: Coupling) -> Result<Self> {
        let name = family.name();
        let cfg = |reason: String| Error::Config {
            family: name,
            reason,
        };
        if let Some(m) = family.marginal() {
            m.validate(name)?;
        }
        let parametric = matches!(family, Family::ParetoLog { .. } | Family::WeibullLog { .. });
        if parametric && coupling == Coupling::Joint {
            return Err(cfg(
                "parametric families need coupling b_equals_a or independent".into(),
            ));
        }
        if !parametric && !matches!(family, Family::Custom(_)) && coupling != Coupling::Joint {
            return Err(cfg(
                "this family fixes its own joint law; use coupling joint".into(),
            ));
        }

        let (mu, mu_estimated, flags, gamma) = match &family {
            Family::ParetoLog { alpha, .. } => {
                let m = family.marginal().unwrap();
                let flags = LawFlags {
                    d_is_zero: true,
                    b_minus_d_positive_as: true,
                    tail_condition_35_holds: true,
                };
                // E[(log^+ X)^(1+g)] < inf for any g < alpha - 1
                (-m.mean(), false, flags, ((alpha - 1.0) / 2.0).min(1.0))
            }
            Family::WeibullLog { .. } => {
                let m = family.marginal().unwrap();
                let flags = LawFlags {
                    d_is_zero: true,
                    b_minus_d_positive_as: true,
                    tail_condition_35_holds: true,
                };
                (-m.mean(), false, flags, 1.0)
            }
            Family::Deterministic { a, b, d } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(cfg(format!("A must be positive, got {a}")));
                }
                if !(d.is_finite() && *d >= 0.0) {
                    return Err(cfg(format!("D must be nonnegative, got {d}")));
                }
                if !b.is_finite() {
                    return Err(cfg("B must be finite".into()));
                }
                let flags = LawFlags {
                    d_is_zero: *d == 0.0,
                    b_minus_d_positive_as: b - d > 0.0,
                    tail_condition_35_holds: true,
                };
                (-a.ln(), false, flags, 1.0)
            }
            Family::DiscreteFinite { atoms } => {
                if atoms.is_empty() {
                    return Err(cfg("no atoms".into()));
                }
                let mut total = 0.0;
                let mut mean = 0.0;
                for at in atoms {
                    if !(at.a.is_finite() && at.a > 0.0) {
                        return Err(cfg(format!("A must be positive, got {}", at.a)));
                    }
                    if !(at.d.is_finite() && at.d >= 0.0) {
                        return Err(cfg(format!("D must be nonnegative, got {}", at.d)));
                    }
                    if !(at.b.is_finite() && at.prob.is_finite() && at.prob >= 0.0) {
                        return Err(cfg("atom fields must be finite with prob >= 0".into()));
                    }
                    total += at.prob;
                    mean += at.prob * at.a.ln();
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(cfg(format!("probabilities sum to {total}")));
                }
                let flags = LawFlags {
                    d_is_zero: atoms.iter().all(|at| at.d == 0.0 || at.prob == 0.0),
                    b_minus_d_positive_as: atoms
                        .iter()
                        .all(|at| at.b - at.d > 0.0 || at.prob == 0.0),
                    tail_condition_35_holds: true,
                };
                (-mean, false, flags, 1.0)
            }
            Family::IndicatorCounter { base } => {
                // P[A > x, B <= -x] = P[A > x] for x >= 1, so the second tail
                // condition fails; this is what keeps R bounded.
                let flags = LawFlags {
                    d_is_zero: true,
                    b_minus_d_positive_as: false,
                    tail_condition_35_holds: false,
                };
                (-base.mean(), false, flags, 1.0)
            }
            Family::Custom(c) => match c.mean_log_a() {
                Some(m) => (-m, false, c.flags(), 1.0),
                None => (f64::NAN, true, c.flags(), 1.0),
            },
        };
        let mut law = InputLaw {
            family,
            coupling,
            mu,
            mu_estimated,
            gamma,
            flags,
        };
        if law.mu_estimated {
            law.mu = law.estimate_mu(1_000_000, 0x5eed);
        }
        if !(law.mu.is_finite() && law.mu > 0.0) {
            return Err(Error::Config {
                family: name,
                reason: format!("need E[log A] in (-inf, 0), got mu = {}", law.mu),
            });
        }
        Ok(law)
    }

    pub fn pareto_log(alpha: f64, shift: f64, coupling: Coupling) -> Result<Self> {
        Self::new(Family::ParetoLog { alpha, shift }, coupling)
    }

    pub fn weibull_log(beta: f64, scale: f64, shift: f64, coupling: Coupling) -> Result<Self> {
        Self::new(Family::WeibullLog { beta, scale, shift }, coupling)
    }

    pub fn deterministic(a: f64, b: f64, d: f64) -> Result<Self> {
        Self::new(Family::Deterministic { a, b, d }, Coupling::Joint)
    }

    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(Family::DiscreteFinite { atoms }, Coupling::Joint)
    }

    pub fn indicator_counter(base: Marginal) -> Result<Self> {
        Self::new(Family::IndicatorCounter { base }, Coupling::Joint)
    }

    pub fn custom(law: Arc<dyn CustomLaw>) -> Result<Self> {
        Self::new(Family::Custom(law), Coupling::Joint)
    }

    /// `mu = -E[log A]`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// True when `mu` came from simulation rather than a formula.
    pub fn mu_is_estimated(&self) -> bool {
        self.mu_estimated
    }

    fn estimate_mu(&self, n: usize, seed: u64) -> f64 {
        let mut rng = RngStream::new(seed, 0);
        let mut s = 0.0;
        for _ in 0..n {
            s += self.sample_raw(&mut rng).a.log_mag();
        }
        -s / n as f64
    }

    pub fn dominance(&self) -> TailDominance {
        match &self.family {
            Family::ParetoLog { .. } | Family::WeibullLog { .. } => TailDominance::Comparable,
            Family::DiscreteFinite { .. } | Family::Deterministic { .. } => TailDominance::Bounded,
            // B < 1 always
            Family::IndicatorCounter { .. } => TailDominance::ADominates,
            Family::Custom(c) => c.dominance(),
        }
    }

    #[inline]
    fn sample_raw(&self, rng: &mut RngStream) -> Triple {
        match &self.family {
            Family::ParetoLog { alpha, shift } => {
                let m = Marginal::Pareto {
                    alpha: *alpha,
                    shift: *shift,
                };
                self.parametric_draw(m, rng)
            }
            Family::WeibullLog { beta, scale, shift } => {
                let m = Marginal::Weibull {
                    beta: *beta,
                    scale: *scale,
                    shift: *shift,
                };
                self.parametric_draw(m, rng)
            }
            Family::Deterministic { a, b, d } => Triple::from_f64(*a, *b, *d),
            Family::DiscreteFinite { atoms } => {
                let u = rng.uniform();
                let mut c = 0.0;
                let mut pick = &atoms[atoms.len() - 1];
                for at in atoms {
                    c += at.prob;
                    if u <= c {
                        pick = at;
                        break;
                    }
                }
                Triple::from_f64(pick.a, pick.b, pick.d)
            }
            Family::IndicatorCounter { base } => {
                let la = base.sample_log(rng);
                let a = LogReal::from_ln(la);
                let b = if la <= 0.0 { LogReal::ONE - a } else { -a };
                Triple {
                    a,
                    b,
                    d: LogReal::ZERO,
                }
            }
            Family::Custom(c) => c.sample(rng),
        }
    }

    #[inline]
    fn parametric_draw(&self, m: Marginal, rng: &mut RngStream) -> Triple {
        let a = LogReal::from_ln(m.sample_log(rng));
        let b = match self.coupling {
            Coupling::Independent => LogReal::from_ln(m.sample_log(rng)),
            _ => a,
        };
        Triple {
            a,
            b,
            d: LogReal::ZERO,
        }
    }

    /// Draws of `(ln A, ln B)` for the parametric families, where `B > 0`
    /// and `D = 0`. Consumes the stream exactly like [`InputLaw::sample`].
    pub fn log_pair(&self) -> Option<LogPair> {
        let marginal = match self.family {
            Family::ParetoLog { .. } | Family::WeibullLog { .. } => self.family.marginal()?,
            _ => return None,
        };
        Some(LogPair {
            marginal,
            independent: self.coupling == Coupling::Independent,
        })
    }

    /// One joint draw of `(A, B, D)`.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> Result<Triple> {
        let t = self.sample_raw(rng);
        if !t.a.is_positive()
            || t.d.sign() < 0
            || !t.a.is_finite()
            || !t.b.is_finite()
            || !t.d.is_finite()
        {
            return Err(self.bad_draw(&t));
        }
        Ok(t)
    }

    #[cold]
    #[inline(never)]
    fn bad_draw(&self, t: &Triple) -> Error {
        Error::Config {
            family: self.family.name(),
            reason: format!("sampler produced A = {}, D = {}", t.a, t.d),
        }
    }

    /// Constant `c` with `B = B' + c (1 - A)` where `B'` has one sign, so the
    /// perpetuity equals `c + sum B'_{n+1} A_1...A_n` without cancellation.
    pub fn centering(&self) -> Option<LogReal> {
        match self.family {
            Family::IndicatorCounter { .. } => Some(LogReal::ONE),
            _ => None,
        }
    }

    /// `B'` for a draw, exact when the family provides it.
    #[inline]
    pub fn centered_b(&self, t: &Triple) -> LogReal {
        match self.family {
            Family::IndicatorCounter { .. } => {
                if t.a.log_mag() <= 0.0 {
                    LogReal::ZERO
                } else {
                    -LogReal::ONE
                }
            }
            _ => match self.centering() {
                Some(c) => t.b - c * (LogReal::ONE - t.a),
                None => t.b,
            },
        }
    }

    /// `P[log A > x]`.
    pub fn log_a_tail(&self, x: f64) -> f64 {
        self.tail(TailKind::LogA, x)
    }

    /// `P[log(A v B) > x]`.
    pub fn log_ab_tail(&self, x: f64) -> f64 {
        self.tail(TailKind::LogAB, x)
    }

    pub fn tail(&self, kind: TailKind, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let ex = x.exp();
        match &self.family {
            Family::ParetoLog { .. } | Family::WeibullLog { .. } => {
                let m = self.family.marginal().unwrap();
                let g = m.tail(x);
                let indep = self.coupling == Coupling::Independent;
                match kind {
                    TailKind::LogA | TailKind::LogB => g,
                    TailKind::LogBPos => {
                        if x < 0.0 {
                            1.0
                        } else {
                            g
                        }
                    }
                    TailKind::LogAB | TailKind::LogABar => {
                        if kind == TailKind::LogABar && x < 0.0 {
                            1.0
                        } else if indep {
                            g * (2.0 - g)
                        } else {
                            g
                        }
                    }
                }
            }
            Family::Deterministic { a, b, d } => {
                let t = Triple::from_f64(*a, *b, *d);
                ind(Self::triple_level(&t, kind) > x)
            }
            Family::DiscreteFinite { atoms } => atoms
                .iter()
                .filter(|at| Self::triple_level(&Triple::from_f64(at.a, at.b, at.d), kind) > x)
                .map(|at| at.prob)
                .sum::<f64>()
                .min(1.0),
            Family::IndicatorCounter { base } => {
                let g = base.tail(x);
                match kind {
                    TailKind::LogA => g,
                    TailKind::LogB => {
                        if x < 0.0 {
                            1.0 - base.tail((1.0 - ex).ln())
                        } else {
                            0.0
                        }
                    }
                    TailKind::LogBPos => ind(x < 0.0),
                    TailKind::LogAB => {
                        if ex <= 0.5 {
                            // max(A, 1 - A) >= 1/2 on {A <= 1}
                            1.0
                        } else if x < 0.0 {
                            // A v B > e^x iff A > e^x or A < 1 - e^x
                            (g + 1.0 - base.tail((1.0 - ex).ln())).min(1.0)
                        } else {
                            g
                        }
                    }
                    TailKind::LogABar => {
                        if x < 0.0 {
                            1.0
                        } else {
                            g
                        }
                    }
                }
            }
            Family::Custom(c) => match kind {
                TailKind::LogA => c.log_a_tail(x),
                TailKind::LogB => c.log_b_tail(x),
                TailKind::LogBPos => {
                    if x < 0.0 {
                        1.0
                    } else {
                        c.log_b_tail(x)
                    }
                }
                TailKind::LogAB => c.log_ab_tail(x),
                TailKind::LogABar => c.log_abar_tail(x),
            },
        }
    }

    /// The random level whose exceedance a tail kind measures, for a single
    /// draw. Used for finite laws and for testing samplers.
    pub fn triple_level(t: &Triple, kind: TailKind) -> f64 {
        let a = t.a.to_f64();
        let b = t.b.to_f64();
        match kind {
            TailKind::LogA => t.a.log_mag(),
            TailKind::LogB => t.b.level(),
            TailKind::LogBPos => t.b.log_pos(),
            TailKind::LogAB => log_max_pos(a, b),
            TailKind::LogABar => t.a.max(t.b_bar()).log_mag(),
        }
    }

    /// `int_x^inf P[log(A v B) > y] dy` where this has an elementary form
    /// (clipping at 1 is left to the caller).
    pub fn closed_form_integral(&self, kind: TailKind, x: f64) -> Option<f64> {
        let Family::ParetoLog { alpha, shift } = self.family else {
            return match &self.family {
                Family::Deterministic { .. } | Family::DiscreteFinite { .. } => {
                    Some(self.finite_integral(kind, x))
                }
                _ => None,
            };
        };
        let m = Marginal::Pareto { alpha, shift };
        let base = m.integrated_tail(x)?;
        let indep = self.coupling == Coupling::Independent;
        let lo = 1.0 - shift;
        let clip0 = matches!(kind, TailKind::LogBPos | TailKind::LogABar);
        match kind {
            TailKind::LogA | TailKind::LogB => Some(base),
            TailKind::LogAB | TailKind::LogABar | TailKind::LogBPos => {
                let doubled = indep && matches!(kind, TailKind::LogAB | TailKind::LogABar);
                // int_x^inf (2G - G^2) with G = (y + m)^-a
                let tail_part = |x: f64| -> f64 {
                    let z = x + shift;
                    if doubled {
                        2.0 * z.powf(1.0 - alpha) / (alpha - 1.0)
                            - z.powf(1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
                    } else {
                        z.powf(1.0 - alpha) / (alpha - 1.0)
                    }
                };
                // the integrand equals 1 below the knee, which sits at
                // max(lo, 0) when the kind clips at 0
                let knee = if clip0 { lo.max(0.0) } else { lo };
                if x >= knee {
                    Some(tail_part(x))
                } else {
                    Some((knee - x) + tail_part(knee))
                }
            }
        }
    }

    fn finite_integral(&self, kind: TailKind, x: f64) -> f64 {
        let levels: Vec<(f64, f64)> = match &self.family {
            Family::Deterministic { a, b, d } => {
                vec![(Self::triple_level(&Triple::from_f64(*a, *b, *d), kind), 1.0)]
            }
            Family::DiscreteFinite { atoms } => atoms
                .iter()
                .map(|at| {
                    (
                        Self::triple_level(&Triple::from_f64(at.a, at.b, at.d), kind),
                        at.prob,
                    )
                })
                .collect(),
            _ => unreachable!(),
        };
        levels.iter().map(|&(l, p)| p * (l - x).max(0.0)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn canon() -> InputLaw {
        InputLaw::pareto_log(2.0, 4.0, Coupling::BEqualsA).unwrap()
    }

    #[test]
    fn deterministic_point_mass() {
        let law = InputLaw::deterministic(0.5, 1.0, 0.0).unwrap();
        let mut rng = RngStream::new(1, 1);
        for _ in 0..5 {
            let t = law.sample(&mut rng).unwrap();
            assert_eq!(t.a.to_f64(), 0.5);
            assert_eq!(t.b.to_f64(), 1.0);
            assert!(t.d.is_zero());
        }
        assert_relative_eq!(law.mu(), std::f64::consts::LN_2);
    }

    #[test]
    fn pareto_mu_and_support() {
        let law = canon();
        assert_relative_eq!(law.mu(), 2.0);
        assert_eq!(law.log_a_tail(-3.0), 1.0);
        assert_relative_eq!(law.log_a_tail(6.0), 0.01);
        let mut rng = RngStream::new(3, 0);
        for _ in 0..10_000 {
            let t = law.sample(&mut rng).unwrap();
            assert!(t.a.log_mag() >= -3.0);
            assert_eq!(t.a, t.b);
        }
    }

    #[test]
    fn indicator_counter_draws() {
        let law = InputLaw::indicator_counter(Marginal::Pareto {
            alpha: 2.0,
            shift: 4.0,
        })
        .unwrap();
        let mut rng = RngStream::new(9, 0);
        for _ in 0..10_000 {
            let t = law.sample(&mut rng).unwrap();
            let a = t.a.to_f64();
            let expect = if a <= 1.0 { 1.0 - a } else { -a };
            assert!((t.b.to_f64() - expect).abs() <= 1e-12 * a.max(1.0));
            assert!(t.d.is_zero());
        }
        assert!(!law.flags.tail_condition_35_holds);
        assert_eq!(law.dominance(), TailDominance::ADominates);
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(InputLaw::deterministic(-1.0, 1.0, 0.0).is_err());
        assert!(InputLaw::deterministic(0.5, 1.0, -1.0).is_err());
        assert!(InputLaw::deterministic(2.0, 1.0, 0.0).is_err());
        assert!(InputLaw::pareto_log(0.9, 4.0, Coupling::BEqualsA).is_err());
        // mean of log A is 2 - 1 = 1 > 0
        assert!(InputLaw::pareto_log(2.0, 1.0, Coupling::BEqualsA).is_err());
        assert!(InputLaw::pareto_log(2.0, 4.0, Coupling::Joint).is_err());
        let bad = vec![Atom {
            a: 0.5,
            b: 1.0,
            d: 0.0,
            prob: 0.7,
        }];
        assert!(InputLaw::discrete(bad).is_err());
    }

    #[test]
    fn error_names_family() {
        let e = InputLaw::deterministic(-1.0, 1.0, 0.0)
            .unwrap_err()
            .to_string();
        assert!(e.contains("Deterministic"), "{e}");
    }

    #[test]
    fn independent_tail_is_inclusion_exclusion() {
        let law = InputLaw::pareto_log(2.0, 4.0, Coupling::Independent).unwrap();
        for x in [0.0, 10.0, 1e4] {
            let g = (x + 4.0f64).powi(-2);
            assert_relative_eq!(
                law.log_ab_tail(x),
                1.0 - (1.0 - g) * (1.0 - g),
                max_relative = 1e-12
            );
        }
        let r = law.log_ab_tail(1e4) / law.log_a_tail(1e4);
        assert!((1.99..=2.01).contains(&r));
    }

    #[test]
    fn closed_form_integrals_match_pareto() {
        let law = canon();
        for x in [-10.0, -3.0, 0.0, 5.0, 96.0] {
            let fi = law
                .closed_form_integral(TailKind::LogAB, x)
                .unwrap()
                .min(1.0);
            let expect = if x <= -3.0 { 1.0 } else { 1.0 / (x + 4.0) };
            assert_relative_eq!(fi, expect, max_relative = 1e-14);
        }
        let ind = InputLaw::pareto_log(2.0, 4.0, Coupling::Independent).unwrap();
        let x = 50.0;
        let z: f64 = 54.0;
        assert_relative_eq!(
            ind.closed_form_integral(TailKind::LogAB, x).unwrap(),
            2.0 / z - z.powi(-3) / 3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn discrete_tails() {
        let law = InputLaw::discrete(vec![
            Atom {
                a: 0.5,
                b: 0.0,
                d: 0.0,
                prob: 0.5,
            },
            Atom {
                a: 0.5,
                b: 1.0,
                d: 0.0,
                prob: 0.5,
            },
        ])
        .unwrap();
        assert_eq!(law.log_ab_tail(-1.0), 1.0);
        assert_eq!(law.log_ab_tail(-0.5), 0.5);
        assert_eq!(law.log_ab_tail(0.0), 0.0);
        assert_eq!(law.tail(TailKind::LogB, -0.1), 0.5);
        assert!(law.flags.d_is_zero);
        assert!(!law.flags.b_minus_d_positive_as);
    }

    #[test]
    fn indicator_ab_tail_below_zero() {
        let base = Marginal::Pareto {
            alpha: 2.0,
            shift: 4.0,
        };
        let law = InputLaw::indicator_counter(base).unwrap();
        // A v B >= 1/2 always
        assert_eq!(law.log_ab_tail(-0.7), 1.0);
        let x = -0.2f64;
        let direct = base.tail(x) + 1.0 - base.tail((1.0 - x.exp()).ln());
        assert_relative_eq!(law.log_ab_tail(x), direct);
        assert_eq!(law.log_ab_tail(3.0), base.tail(3.0));
    }
}
