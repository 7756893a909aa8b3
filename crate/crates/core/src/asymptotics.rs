//! Integrated tails and first-order tail predictions.

use serde::{Deserialize, Serialize};

use crate::distributions::{Family, InputLaw, TailDominance, TailKind};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_to_inf, QuadOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSource {
    ClosedForm,
    Quadrature,
}

/// `x -> 1 ^ int_x^inf P[level > y] dy` for one of the law's tail kinds.
#[derive(Clone, Debug)]
pub struct IntegratedTail {
    law: InputLaw,
    kind: TailKind,
    source: TailSource,
    saturation_x: f64,
    breaks: Vec<f64>,
}

fn kinks(law: &InputLaw) -> Vec<f64> {
    let mut b = vec![0.0];
    match &law.family {
        Family::ParetoLog { shift, .. } => b.push(1.0 - shift),
        Family::WeibullLog { shift, .. } => b.push(-shift),
        Family::IndicatorCounter { base } => {
            b.push(base.lower_end());
            b.push(-std::f64::consts::LN_2);
        }
        Family::Deterministic { .. } | Family::DiscreteFinite { .. } | Family::Custom(_) => {}
    }
    b
}

impl IntegratedTail {
    pub fn new(law: &InputLaw, kind: TailKind) -> Result<Self> {
        let source = if law.closed_form_integral(kind, 0.0).is_some() {
            TailSource::ClosedForm
        } else {
            TailSource::Quadrature
        };
        let mut it = IntegratedTail {
            law: law.clone(),
            kind,
            source,
            saturation_x: f64::NEG_INFINITY,
            breaks: kinks(law),
        };
        it.saturation_x = it.find_saturation()?;
        Ok(it)
    }

    /// Forces the quadrature path even where a closed form exists.
    pub fn by_quadrature(law: &InputLaw, kind: TailKind) -> Result<Self> {
        let mut it = IntegratedTail {
            law: law.clone(),
            kind,
            source: TailSource::Quadrature,
            saturation_x: f64::NEG_INFINITY,
            breaks: kinks(law),
        };
        it.saturation_x = it.find_saturation()?;
        Ok(it)
    }

    pub fn source(&self) -> TailSource {
        self.source
    }

    pub fn kind(&self) -> TailKind {
        self.kind
    }

    /// Largest `x` with `F_I(x) = 1`.
    pub fn saturation_x(&self) -> f64 {
        self.saturation_x
    }

    /// The unclipped integral `int_x^inf P[level > y] dy`.
    pub fn raw(&self, x: f64) -> Result<f64> {
        match self.source {
            TailSource::ClosedForm => Ok(self.law.closed_form_integral(self.kind, x).unwrap()),
            TailSource::Quadrature => {
                let f = |y: f64| self.law.tail(self.kind, y);
                Ok(integrate_to_inf(&f, x, &self.breaks, QuadOptions::default())?.value)
            }
        }
    }

    /// `F_I(x)`, clipped at 1.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x <= self.saturation_x {
            return Ok(1.0);
        }
        Ok(self.raw(x)?.min(1.0))
    }

    fn find_saturation(&self) -> Result<f64> {
        // raw is nonincreasing; bracket the crossing of 1
        let mut hi = 1.0;
        let mut steps = 0;
        while self.raw(hi)? >= 1.0 {
            hi = if hi > 0.0 { hi * 2.0 } else { 1.0 };
            steps += 1;
            if steps > 60 {
                return Err(Error::NonIntegrable);
            }
        }
        let mut lo = -1.0;
        steps = 0;
        while self.raw(lo)? < 1.0 {
            lo *= 2.0;
            steps += 1;
            if steps > 40 {
                // the integral never reaches 1, e.g. a tail that is 0 on the line
                return Ok(f64::NEG_INFINITY);
            }
        }
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if self.raw(mid)? >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// The case split for stationary and finite-horizon predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GeneralBounds,
    #[serde(rename = "positive_bd")]
    PositiveBD,
    BDominates,
    ADominates,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::GeneralBounds => "general_bounds",
            Regime::PositiveBD => "positive_bd",
            Regime::BDominates => "b_dominates",
            Regime::ADominates => "a_dominates",
        }
    }

    /// The sharpest regime the law's flags and tail dominance support.
    pub fn auto(law: &InputLaw) -> Regime {
        if law.flags.b_minus_d_positive_as {
            Regime::PositiveBD
        } else {
            match law.dominance() {
                TailDominance::BDominates => Regime::BDominates,
                TailDominance::ADominates => Regime::ADominates,
                _ => Regime::GeneralBounds,
            }
        }
    }

    /// Whether the law satisfies the regime's hypotheses.
    pub fn check(self, law: &InputLaw) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::RegimeMismatch {
                regime: self.name(),
                reason: reason.into(),
            })
        };
        match self {
            Regime::GeneralBounds => Ok(()),
            Regime::PositiveBD => {
                if law.flags.b_minus_d_positive_as {
                    Ok(())
                } else {
                    bad("needs B - D > 0 almost surely")
                }
            }
            Regime::BDominates => {
                if law.dominance() == TailDominance::BDominates {
                    Ok(())
                } else {
                    bad("needs P[A > x] = o(P[B > x])")
                }
            }
            Regime::ADominates => {
                if law.dominance() == TailDominance::ADominates {
                    Ok(())
                } else {
                    bad("needs P[B > x] = o(P[A > x])")
                }
            }
        }
    }
}

/// A probability estimate with an interval, e.g. `P[R > 0]` from simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aux {
    pub est: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Aux {
    pub fn exact(p: f64) -> Self {
        Aux {
            est: p,
            lo: p,
            hi: p,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if ok(self.est) && ok(self.lo) && ok(self.hi) && self.lo <= self.est && self.est <= self.hi
        {
            Ok(())
        } else {
            Err(Error::RegimeMismatch {
                regime: "a_dominates",
                reason: format!("aux must satisfy 0 <= lo <= est <= hi <= 1, got {self:?}"),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub point: Option<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl Prediction {
    fn point(v: f64) -> Self {
        Prediction {
            point: Some(v),
            lower: v,
            upper: v,
        }
    }

    fn scaled(s: Aux, base: f64) -> Self {
        Prediction {
            point: Some(s.est * base),
            lower: s.lo * base,
            upper: s.hi * base,
        }
    }

    /// The point value, or the midpoint of the bounds.
    pub fn center(&self) -> f64 {
        self.point.unwrap_or(0.5 * (self.lower + self.upper))
    }
}

/// Stationary tail `P[R > e^u]` per regime, after checking the regime
/// against the law and `u` against the saturation point.
pub fn theory_tail_stationary(
    law: &InputLaw,
    regime: Regime,
    u: f64,
    aux: Option<Aux>,
) -> Result<Prediction> {
    regime.check(law)?;
    stationary_formula(law, regime, u, aux)
}

/// The stationary formulas without the regime check.
pub fn stationary_formula(
    law: &InputLaw,
    regime: Regime,
    u: f64,
    aux: Option<Aux>,
) -> Result<Prediction> {
    let fi = IntegratedTail::new(law, TailKind::LogAB)?;
    if u <= fi.saturation_x() {
        return Err(Error::BelowSaturation {
            u,
            saturation: fi.saturation_x(),
        });
    }
    let mu = law.mu();
    match regime {
        Regime::GeneralBounds => {
            let s = aux.ok_or(Error::MissingAux {
                regime: regime.name(),
                needed: 1,
                got: 0,
            })?;
            s.validate()?;
            let up = fi.eval(u)? / mu;
            Ok(Prediction {
                point: None,
                lower: s.lo * up,
                upper: up,
            })
        }
        Regime::PositiveBD => Ok(Prediction::point(fi.eval(u)? / mu)),
        Regime::BDominates => {
            let ib = IntegratedTail::new(law, TailKind::LogBPos)?;
            Ok(Prediction::point(ib.raw(u)? / mu))
        }
        Regime::ADominates => {
            let s = aux.ok_or(Error::MissingAux {
                regime: regime.name(),
                needed: 1,
                got: 0,
            })?;
            s.validate()?;
            let ia = IntegratedTail::new(law, TailKind::LogA)?;
            Ok(Prediction::scaled(s, ia.raw(u)? / mu))
        }
    }
}

/// Finite-horizon tail `P[R_n > e^u]` from `R_0` with `P[R_0 > x] ~ w P[A v B > x]`.
/// `r_pos[k]` estimates `P[R_k > 0]`.
pub fn theory_tail_finite(
    law: &InputLaw,
    n: usize,
    w: f64,
    regime: Regime,
    u: f64,
    r_pos: &[Aux],
) -> Result<Prediction> {
    regime.check(law)?;
    finite_formula(law, n, w, regime, u, r_pos)
}

pub fn finite_formula(
    law: &InputLaw,
    n: usize,
    w: f64,
    regime: Regime,
    u: f64,
    r_pos: &[Aux],
) -> Result<Prediction> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::RegimeMismatch {
            regime: regime.name(),
            reason: format!("w must be >= 0, got {w}"),
        });
    }
    let weight = w + n as f64;
    let sum_pos = || -> Result<Aux> {
        if r_pos.len() < n {
            return Err(Error::MissingAux {
                regime: regime.name(),
                needed: n,
                got: r_pos.len(),
            });
        }
        let mut s = Aux {
            est: w,
            lo: w,
            hi: w,
        };
        for a in &r_pos[..n] {
            a.validate()?;
            s.est += a.est;
            s.lo += a.lo;
            s.hi += a.hi;
        }
        Ok(s)
    };
    match regime {
        Regime::PositiveBD => Ok(Prediction::point(weight * law.tail(TailKind::LogAB, u))),
        Regime::BDominates => Ok(Prediction::point(weight * law.tail(TailKind::LogB, u))),
        Regime::ADominates => Ok(Prediction::scaled(sum_pos()?, law.tail(TailKind::LogA, u))),
        Regime::GeneralBounds => {
            let s = sum_pos()?;
            let f = law.tail(TailKind::LogAB, u);
            Ok(Prediction {
                point: None,
                lower: s.lo * f,
                upper: weight * f,
            })
        }
    }
}

/// `P[M > u] ~ (1/mu) int_u^inf P[log(A v Bbar) > y] dy`.
pub fn theory_sup_walk(law: &InputLaw, u: f64) -> Result<f64> {
    let it = IntegratedTail::new(law, TailKind::LogABar)?;
    if u <= it.saturation_x() {
        return Err(Error::BelowSaturation {
            u,
            saturation: it.saturation_x(),
        });
    }
    Ok(it.raw(u)? / law.mu())
}

/// `F(u) / F_I(u)`, which tends to 0 for subexponential `F_I`.
pub fn separation_ratio(law: &InputLaw, u: f64) -> Result<f64> {
    let fi = IntegratedTail::new(law, TailKind::LogAB)?;
    let d = fi.eval(u)?;
    if d == 0.0 {
        return Err(Error::ZeroTheory { u });
    }
    Ok(law.log_ab_tail(u) / d)
}

/// Integrals behind every stationary regime at one `u`, unclipped.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegimeIntegrals {
    pub ab: f64,
    pub a: f64,
    pub b_pos: f64,
}

pub fn regime_integrals(law: &InputLaw, u: f64) -> Result<RegimeIntegrals> {
    Ok(RegimeIntegrals {
        ab: IntegratedTail::new(law, TailKind::LogAB)?.raw(u)?,
        a: IntegratedTail::new(law, TailKind::LogA)?.raw(u)?,
        b_pos: IntegratedTail::new(law, TailKind::LogBPos)?.raw(u)?,
    })
}

/// Smallest walk depth `d` with `F_I(u + d) <= tol * F_I(u)` for the
/// `A v Bbar` integrated tail; 0 when the tail is bounded.
pub fn probe_depth(law: &InputLaw, u: f64, tol: f64) -> Result<f64> {
    let it = IntegratedTail::new(law, TailKind::LogABar)?;
    let base = it.eval(u)?;
    if base == 0.0 {
        return Ok(0.0);
    }
    let target = tol * base;
    let mut hi = 1.0;
    while it.eval(u + hi)? > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NonIntegrable);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if it.eval(u + mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Coupling, Marginal};
    use approx::assert_relative_eq;

    fn canon() -> InputLaw {
        InputLaw::pareto_log(2.0, 4.0, Coupling::BEqualsA).unwrap()
    }

    #[test]
    fn pareto_closed_form() {
        let fi = IntegratedTail::new(&canon(), TailKind::LogAB).unwrap();
        assert_eq!(fi.source(), TailSource::ClosedForm);
        assert!((fi.saturation_x() + 3.0).abs() < 1e-8);
        for x in [-2.5, 0.0, 46.0, 196.0] {
            assert_relative_eq!(fi.eval(x).unwrap(), 1.0 / (x + 4.0), max_relative = 1e-14);
        }
        assert_eq!(fi.eval(-10.0).unwrap(), 1.0);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for law in [
            canon(),
            InputLaw::pareto_log(2.0, 4.0, Coupling::Independent).unwrap(),
        ] {
            for kind in [
                TailKind::LogAB,
                TailKind::LogA,
                TailKind::LogBPos,
                TailKind::LogABar,
            ] {
                let c = IntegratedTail::new(&law, kind).unwrap();
                let q = IntegratedTail::by_quadrature(&law, kind).unwrap();
                for x in [-5.0, -1.0, 0.5, 25.0, 200.0] {
                    assert_relative_eq!(c.raw(x).unwrap(), q.raw(x).unwrap(), max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_tail_gives_zero() {
        // log(A v B) is at most 0 here
        let law = InputLaw::deterministic(0.5, 1.0, 0.0).unwrap();
        let fi = IntegratedTail::new(&law, TailKind::LogAB).unwrap();
        for x in [0.0, 1.0, 10.0] {
            assert_eq!(fi.eval(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn stationary_examples() {
        let law = canon();
        let p = theory_tail_stationary(&law, Regime::PositiveBD, 96.0, None).unwrap();
        assert_relative_eq!(p.point.unwrap(), 0.005, max_relative = 1e-14);
        let g = theory_tail_stationary(&law, Regime::GeneralBounds, 196.0, Some(Aux::exact(0.9)))
            .unwrap();
        assert_relative_eq!(g.lower, 2.25e-3, max_relative = 1e-14);
        assert_relative_eq!(g.upper, 2.5e-3, max_relative = 1e-14);
        assert!(g.point.is_none());
    }

    #[test]
    fn a_dominates_with_zero_aux() {
        let law = InputLaw::indicator_counter(Marginal::Pareto {
            alpha: 2.0,
            shift: 4.0,
        })
        .unwrap();
        let p =
            theory_tail_stationary(&law, Regime::ADominates, 50.0, Some(Aux::exact(0.0))).unwrap();
        assert_eq!(p.point, Some(0.0));
        assert!(matches!(
            theory_tail_stationary(&law, Regime::ADominates, 50.0, None),
            Err(Error::MissingAux { .. })
        ));
    }

    #[test]
    fn regime_mismatch() {
        let law = InputLaw::indicator_counter(Marginal::Pareto {
            alpha: 2.0,
            shift: 4.0,
        })
        .unwrap();
        assert!(matches!(
            theory_tail_stationary(&law, Regime::PositiveBD, 50.0, None),
            Err(Error::RegimeMismatch { .. })
        ));
        assert!(matches!(
            theory_tail_stationary(&canon(), Regime::BDominates, 50.0, None),
            Err(Error::RegimeMismatch { .. })
        ));
    }

    #[test]
    fn below_saturation_refused() {
        assert!(matches!(
            theory_tail_stationary(&canon(), Regime::PositiveBD, -4.0, None),
            Err(Error::BelowSaturation { .. })
        ));
    }

    #[test]
    fn finite_horizon_examples() {
        let law = canon();
        let p = theory_tail_finite(&law, 3, 0.0, Regime::PositiveBD, 60.0, &[]).unwrap();
        assert_relative_eq!(p.point.unwrap(), 7.32421875e-4, max_relative = 1e-14);
        let p0 = theory_tail_finite(&law, 0, 1.0, Regime::GeneralBounds, 60.0, &[]).unwrap();
        assert_relative_eq!(p0.lower, law.log_ab_tail(60.0));
        assert_relative_eq!(p0.upper, law.log_ab_tail(60.0));
        assert!(matches!(
            theory_tail_finite(
                &law,
                2,
                0.0,
                Regime::GeneralBounds,
                60.0,
                &[Aux::exact(1.0)]
            ),
            Err(Error::MissingAux {
                needed: 2,
                got: 1,
                ..
            })
        ));
    }

    #[test]
    fn sup_walk_examples() {
        assert_relative_eq!(
            theory_sup_walk(&canon(), 196.0).unwrap(),
            0.0025,
            max_relative = 1e-14
        );
        let det = InputLaw::deterministic(0.5, 1.0, 0.0).unwrap();
        assert_eq!(theory_sup_walk(&det, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn weibull_quadrature_against_incomplete_gamma() {
        use statrs::function::gamma::{gamma, gamma_ur};
        let (beta, scale, shift) = (0.5, 1.0, 4.0);
        let law = InputLaw::weibull_log(beta, scale, shift, Coupling::BEqualsA).unwrap();
        let fi = IntegratedTail::new(&law, TailKind::LogAB).unwrap();
        assert_eq!(fi.source(), TailSource::Quadrature);
        for x in [5.0, 20.0, 50.0] {
            // int_x^inf exp(-((y+m)/s)^b) dy = (s/b) Gamma(1/b, ((x+m)/s)^b)
            let z = ((x + shift) / scale).powf(beta);
            let oracle = scale / beta * gamma(1.0 / beta) * gamma_ur(1.0 / beta, z);
            assert_relative_eq!(fi.raw(x).unwrap(), oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn probe_depth_pareto() {
        // (u+4)/(u+4+d) = tol gives d = (u+4)(1/tol - 1)
        let d = probe_depth(&canon(), 196.0, 0.02).unwrap();
        assert_relative_eq!(d, 200.0 * 49.0, max_relative = 1e-5);
    }

    #[test]
    fn separation_is_one_over_u_plus_4() {
        for u in [25.0, 200.0] {
            assert_relative_eq!(
                separation_ratio(&canon(), u).unwrap(),
                1.0 / (u + 4.0),
                max_relative = 1e-14
            );
        }
    }
}
