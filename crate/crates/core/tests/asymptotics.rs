use std::sync::Arc;

use proptest::prelude::*;
use slowtail::asymptotics::*;
use slowtail::distributions::diagnostics::potter_check;
use slowtail::engine::enumerate_finite;
use slowtail::*;

/// `A = e^-1` fixed, `B` with `P[log B > x] = (x+4)^-2`: the B tail dominates.
#[derive(Debug)]
struct HeavyB;

impl CustomLaw for HeavyB {
    fn name(&self) -> &str {
        "heavy-b"
    }
    fn sample(&self, rng: &mut RngStream) -> Triple {
        let lb = Marginal::Pareto {
            alpha: 2.0,
            shift: 4.0,
        }
        .sample_log(rng);
        Triple {
            a: LogReal::from_ln(-1.0),
            b: LogReal::from_ln(lb),
            d: LogReal::ZERO,
        }
    }
    fn log_a_tail(&self, x: f64) -> f64 {
        if x < -1.0 {
            1.0
        } else {
            0.0
        }
    }
    fn log_ab_tail(&self, x: f64) -> f64 {
        if x < -1.0 {
            1.0
        } else {
            self.log_b_tail(x)
        }
    }
    fn log_b_tail(&self, x: f64) -> f64 {
        Marginal::Pareto {
            alpha: 2.0,
            shift: 4.0,
        }
        .tail(x)
    }
    fn log_abar_tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0
        } else {
            self.log_b_tail(x)
        }
    }
    fn mean_log_a(&self) -> Option<f64> {
        Some(-1.0)
    }
    fn flags(&self) -> LawFlags {
        LawFlags {
            d_is_zero: true,
            b_minus_d_positive_as: true,
            tail_condition_35_holds: true,
        }
    }
    fn dominance(&self) -> TailDominance {
        TailDominance::BDominates
    }
}

fn heavy_b() -> InputLaw {
    InputLaw::custom(Arc::new(HeavyB)).unwrap()
}

fn laws() -> Vec<InputLaw> {
    vec![
        InputLaw::pareto_log(2.0, 4.0, Coupling::BEqualsA).unwrap(),
        InputLaw::pareto_log(2.0, 4.0, Coupling::Independent).unwrap(),
        InputLaw::pareto_log(3.0, 2.5, Coupling::BEqualsA).unwrap(),
        InputLaw::weibull_log(0.5, 1.0, 4.0, Coupling::BEqualsA).unwrap(),
        InputLaw::indicator_counter(Marginal::Pareto {
            alpha: 2.0,
            shift: 4.0,
        })
        .unwrap(),
        heavy_b(),
    ]
}

#[test]
fn custom_b_dominated_law_predictions() {
    let law = heavy_b();
    assert_eq!(Regime::auto(&law), Regime::PositiveBD);
    assert!(Regime::BDominates.check(&law).is_ok());
    assert!(Regime::ADominates.check(&law).is_err());
    // with A fixed below 1 the A v B tail is the B tail above -1
    let b = theory_tail_stationary(&law, Regime::BDominates, 96.0, None).unwrap();
    let p = theory_tail_stationary(&law, Regime::PositiveBD, 96.0, None).unwrap();
    assert!((b.center() - 0.01).abs() < 1e-11, "{b:?}");
    assert!((p.center() - 0.01).abs() < 1e-11, "{p:?}");
    let it = IntegratedTail::new(&law, TailKind::LogAB).unwrap();
    // (-1 - x) + 1/3 = 1 at x = -5/3
    assert!(
        (it.saturation_x() + 5.0 / 3.0).abs() < 1e-6,
        "{}",
        it.saturation_x()
    );
}

fn aux() -> impl Strategy<Value = Aux> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c)| {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        Aux {
            lo: v[0],
            est: v[1],
            hi: v[2],
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dominated_predictions_never_exceed_the_positive_case(which in 0usize..6, u in 1.0f64..500.0, s in aux()) {
        let law = &laws()[which];
        let pos = stationary_formula(law, Regime::PositiveBD, u, None).unwrap().center();
        let a = stationary_formula(law, Regime::ADominates, u, Some(s)).unwrap();
        let b = stationary_formula(law, Regime::BDominates, u, None).unwrap().center();
        prop_assert!(a.upper <= pos * (1.0 + 1e-9), "A: {} > {pos}", a.upper);
        prop_assert!(b <= pos * (1.0 + 1e-9), "B: {b} > {pos}");
        let g = stationary_formula(law, Regime::GeneralBounds, u, Some(s)).unwrap();
        prop_assert!(g.lower <= g.upper && g.point.is_none());
        prop_assert!((g.upper - pos).abs() <= 1e-12 * pos);
    }

    #[test]
    fn applicable_point_prediction_inside_general_bounds(which in 0usize..6, u in 1.0f64..500.0, p in 0.0f64..=1.0) {
        let law = &laws()[which];
        let regime = Regime::auto(law);
        let s = Aux::exact(if regime == Regime::PositiveBD { 1.0 } else { p });
        let point = theory_tail_stationary(law, regime, u, Some(s)).unwrap().center();
        let g = stationary_formula(law, Regime::GeneralBounds, u, Some(s)).unwrap();
        prop_assert!(g.lower <= point * (1.0 + 1e-9) && point <= g.upper * (1.0 + 1e-9), "{} <= {point} <= {}", g.lower, g.upper);
    }

    #[test]
    fn integrated_tail_shape(which in 0usize..6, x in -10.0f64..400.0, dx in 0.0f64..50.0) {
        let law = &laws()[which];
        for kind in [TailKind::LogAB, TailKind::LogA, TailKind::LogABar] {
            let it = IntegratedTail::new(law, kind).unwrap();
            let (f1, f2) = (it.eval(x).unwrap(), it.eval(x + dx).unwrap());
            prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&f2));
            prop_assert!(f2 <= f1 * (1.0 + 1e-12));
            if x <= it.saturation_x() {
                prop_assert_eq!(f1, 1.0);
            }
        }
    }
}

#[test]
fn integrated_tail_is_continuous_at_saturation() {
    for law in laws() {
        let it = IntegratedTail::new(&law, TailKind::LogAB).unwrap();
        let s = it.saturation_x();
        for h in [1e-4, 1e-6] {
            let left = it.eval(s - h).unwrap();
            let right = it.eval(s + h).unwrap();
            assert_eq!(left, 1.0);
            assert!(
                1.0 - right < 10.0 * h,
                "{}: jump {} at {s}",
                law.family.name(),
                1.0 - right
            );
        }
    }
}

#[test]
fn separation_on_both_subexponential_families() {
    let families = [
        InputLaw::pareto_log(2.0, 4.0, Coupling::BEqualsA).unwrap(),
        InputLaw::weibull_log(0.5, 1.0, 4.0, Coupling::BEqualsA).unwrap(),
    ];
    for law in &families {
        let r25 = separation_ratio(law, 25.0).unwrap();
        let r200 = separation_ratio(law, 200.0).unwrap();
        assert!(r200 < 0.5 * r25, "{}: {r25} -> {r200}", law.family.name());
    }
    let p = &families[0];
    for u in [25.0, 50.0, 200.0] {
        let r = separation_ratio(p, u).unwrap();
        assert!((r - 1.0 / (u + 4.0)).abs() < 1e-12 * r);
    }
}

#[test]
fn finite_horizon_beyond_support_matches_enumeration() {
    let law = InputLaw::discrete(vec![
        Atom {
            a: 0.5,
            b: 1.0,
            d: 0.0,
            prob: 0.5,
        },
        Atom {
            a: 1.5,
            b: 2.0,
            d: 0.0,
            prob: 0.5,
        },
    ])
    .unwrap();
    let sys = LipschitzSystem::affine(law.clone());
    let exact = enumerate_finite(&sys, 0.0, 2).unwrap();
    let top = exact.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let u = top.ln() + 0.1;
    let p = theory_tail_finite(&law, 2, 0.0, Regime::PositiveBD, u, &[]).unwrap();
    assert_eq!(p.center(), 0.0);
    let tail: f64 = exact.iter().filter(|x| x.0 > u.exp()).map(|x| x.1).sum();
    assert_eq!(tail, 0.0);
    // inside the support the passthrough case n = 0, w = 1 is the input tail
    let p0 = theory_tail_finite(&law, 0, 1.0, Regime::PositiveBD, 0.5, &[]).unwrap();
    assert_eq!(p0.center(), law.log_ab_tail(0.5));
}

#[test]
fn weibull_sup_walk_against_reference_integral() {
    let law = InputLaw::weibull_log(0.5, 1.0, 4.0, Coupling::BEqualsA).unwrap();
    // int_u^inf exp(-sqrt(y + 4)) dy = 2 (s + 1) e^-s with s = sqrt(u + 4)
    let u = 50.0;
    let s: f64 = (u + 4.0f64).sqrt();
    let reference = 2.0 * (s + 1.0) * (-s).exp() / law.mu();
    let got = theory_sup_walk(&law, u).unwrap();
    assert!(
        (got - reference).abs() <= 1e-10 * reference,
        "{got} vs {reference}"
    );
}

#[test]
fn potter_bounds_on_the_workhorse_tail() {
    let law = InputLaw::pareto_log(2.0, 4.0, Coupling::BEqualsA).unwrap();
    let tail = |x: f64| law.log_ab_tail(x);
    let pairs: Vec<(f64, f64)> = (0..40)
        .flat_map(|i| {
            let x = 10.0 * 1.3f64.powi(i);
            [(x, x + 1.0), (x, 2.0 * x), (2.0 * x, x)]
        })
        .collect();
    let rep = potter_check(&tail, 2.0, 0.1, &pairs);
    assert!(rep.violations.is_empty());
    let gauss = |x: f64| (-x * x).exp();
    let rep = potter_check(&gauss, 2.0, 0.1, &pairs);
    assert!(rep.threshold.is_none());
}
