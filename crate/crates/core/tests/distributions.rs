use proptest::prelude::*;
use slowtail::distributions::diagnostics::{check_subexponential, GridDensity};
use slowtail::quadrature::{integrate, QuadOptions};
use slowtail::*;

fn ab_level(t: &Triple) -> f64 {
    t.a.max(t.b).level()
}

fn assert_tail_matches_sampler(law: &InputLaw, thresholds: &[f64], n: usize, seed: u64) {
    let mut rng = RngStream::new(seed, 0);
    let mut counts = vec![0u64; thresholds.len()];
    for _ in 0..n {
        let l = ab_level(&law.sample(&mut rng).unwrap());
        for (c, &x) in counts.iter_mut().zip(thresholds) {
            if l > x {
                *c += 1;
            }
        }
    }
    for (&c, &x) in counts.iter().zip(thresholds) {
        let p = law.log_ab_tail(x);
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
        let phat = c as f64 / n as f64;
        assert!(
            (phat - p).abs() <= 4.0 * se,
            "{} at x = {x}: empirical {phat} vs tail {p} (se {se})",
            law.family.name()
        );
    }
}

#[test]
fn sampler_matches_tail_functions() {
    let n = 1_000_000;
    let cases = [
        (
            InputLaw::pareto_log(2.0, 4.0, Coupling::BEqualsA).unwrap(),
            vec![-2.5, -1.0, 0.0, 3.0, 20.0],
        ),
        (
            InputLaw::pareto_log(2.0, 4.0, Coupling::Independent).unwrap(),
            vec![-2.5, -1.0, 0.0, 3.0, 20.0],
        ),
        (
            InputLaw::pareto_log(3.5, 2.0, Coupling::BEqualsA).unwrap(),
            vec![-0.9, -0.5, 0.0, 1.0, 4.0],
        ),
        (
            InputLaw::weibull_log(0.5, 1.0, 4.0, Coupling::BEqualsA).unwrap(),
            vec![-3.9, -2.0, 0.0, 10.0, 40.0],
        ),
        (
            InputLaw::weibull_log(0.7, 2.0, 3.0, Coupling::Independent).unwrap(),
            vec![-2.5, -1.0, 0.0, 5.0, 15.0],
        ),
        (
            InputLaw::deterministic(0.5, 3.0, 0.0).unwrap(),
            vec![-1.0, 0.0, 1.0, 1.2, 2.0],
        ),
        (
            InputLaw::discrete(vec![
                Atom {
                    a: 0.5,
                    b: 1.0,
                    d: 0.0,
                    prob: 0.25,
                },
                Atom {
                    a: 0.8,
                    b: -4.0,
                    d: 0.5,
                    prob: 0.5,
                },
                Atom {
                    a: 1.5,
                    b: 6.0,
                    d: 0.0,
                    prob: 0.25,
                },
            ])
            .unwrap(),
            vec![-1.0, -0.5, 0.1, 1.0, 2.0],
        ),
        (
            InputLaw::indicator_counter(Marginal::Pareto {
                alpha: 2.0,
                shift: 4.0,
            })
            .unwrap(),
            vec![-2.5, -0.9, -0.1, 0.5, 10.0],
        ),
    ];
    for (i, (law, xs)) in cases.iter().enumerate() {
        assert_tail_matches_sampler(law, xs, n, 100 + i as u64);
    }
}

#[test]
fn sampled_a_positive_and_d_nonnegative() {
    let laws = [
        InputLaw::pareto_log(1.5, 10.0, Coupling::Independent).unwrap(),
        InputLaw::weibull_log(0.3, 0.5, 20.0, Coupling::BEqualsA).unwrap(),
        InputLaw::indicator_counter(Marginal::Weibull {
            beta: 0.5,
            scale: 1.0,
            shift: 4.0,
        })
        .unwrap(),
    ];
    for law in &laws {
        let mut rng = RngStream::new(9, 9);
        for _ in 0..100_000 {
            let t = law.sample(&mut rng).unwrap();
            assert!(t.a.is_positive());
            assert!(t.d.sign() >= 0);
        }
    }
}

#[test]
fn independent_coupling_doubles_the_tail() {
    let one = InputLaw::pareto_log(2.0, 4.0, Coupling::BEqualsA).unwrap();
    let two = InputLaw::pareto_log(2.0, 4.0, Coupling::Independent).unwrap();
    for x in [-3.5, -1.0, 0.0, 7.0, 100.0, 1e4] {
        let f = one.log_a_tail(x);
        let expect = 1.0 - (1.0 - f) * (1.0 - f);
        assert!((two.log_ab_tail(x) - expect).abs() <= 1e-15);
        // closed form from inclusion-exclusion when x >= -3
        if x >= -3.0 {
            let z = x + 4.0;
            let cf = 2.0 * z.powi(-2) - z.powi(-4);
            assert!((two.log_ab_tail(x) - cf).abs() <= 1e-14 * cf);
        }
    }
    let r = two.log_ab_tail(1e4) / two.log_a_tail(1e4);
    assert!((1.99..=2.01).contains(&r), "{r}");
}

/// `P[X1 + X2 > x]` for `X` Pareto(2) on `[1, inf)`, by direct integration
/// over the first summand.
fn pareto_sum_tail(x: f64) -> f64 {
    let sf = |s: f64| if s < 1.0 { 1.0 } else { s.powi(-2) };
    let inner = |t: f64| 2.0 * t.powi(-3) * sf(x - t);
    let opt = QuadOptions {
        rel_tol: 1e-12,
        ..QuadOptions::default()
    };
    let mid = 0.5 * x;
    let a = integrate(&inner, 1.0, mid, opt).unwrap().value;
    let b = integrate(&inner, mid, x - 1.0, opt).unwrap().value;
    sf(x - 1.0) + a + b
}

#[test]
fn pareto_is_subexponential_against_direct_convolution() {
    // geometric nodes: x/2 is a node whenever x is
    let per_doubling = 1024;
    let r = 2f64.powf(1.0 / per_doubling as f64);
    let last = 20 * per_doubling;
    let nodes: Vec<f64> = (0..=last).map(|k| r.powi(k)).collect();
    let top = *nodes.last().unwrap();
    let sf = move |t: f64| {
        if t < 1.0 {
            1.0
        } else if t >= top {
            0.0
        } else {
            t.powi(-2)
        }
    };
    let d = GridDensity::from_tail(nodes, &sf).unwrap();
    let rep = check_subexponential(&d, top / 2.0, 40).unwrap();
    assert!(
        (1.9..=2.1).contains(&rep.terminal_ratio),
        "{}",
        rep.terminal_ratio
    );
    assert_eq!(rep.verdict(), "consistent with S");
    for p in rep.curve.iter().filter(|p| p.x >= 4.0 && p.x <= 1e5) {
        let oracle = pareto_sum_tail(p.x);
        assert!(
            p.conv_lo <= oracle * (1.0 + 1e-9) && oracle <= p.conv_hi * (1.0 + 1e-9),
            "x = {}: [{}, {}] vs {oracle}",
            p.x,
            p.conv_lo,
            p.conv_hi
        );
    }
}

#[test]
fn exponential_and_point_mass_verdicts() {
    let h = 2.5e-4;
    let nodes: Vec<f64> = (0..=180_000).map(|i| i as f64 * h).collect();
    let d = GridDensity::from_tail(nodes, &|t: f64| (-t).exp()).unwrap();
    let rep = check_subexponential(&d, 20.0, 40).unwrap();
    assert_eq!(rep.verdict(), "not consistent with S");
    assert!(matches!(
        check_subexponential(&GridDensity::point_mass(0.0), 10.0, 10),
        Err(Error::TailVanishes { .. })
    ));
}

fn arb_law() -> impl Strategy<Value = InputLaw> {
    let coupling = prop_oneof![Just(Coupling::BEqualsA), Just(Coupling::Independent)];
    prop_oneof![
        (1.1f64..6.0, 1.5f64..12.0, coupling.clone())
            .prop_filter_map("mu > 0", |(a, s, c)| InputLaw::pareto_log(a, s, c).ok()),
        (0.15f64..1.0, 0.3f64..3.0, 0.5f64..30.0, coupling)
            .prop_filter_map("mu > 0", |(b, sc, s, c)| InputLaw::weibull_log(b, sc, s, c)
                .ok()),
        (1.1f64..4.0, 1.5f64..8.0).prop_filter_map("mu > 0", |(a, s)| InputLaw::indicator_counter(
            Marginal::Pareto { alpha: a, shift: s }
        )
        .ok()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tails_are_monotone_and_ordered(law in arb_law(), start in -20.0f64..5.0, step in 0.01f64..20.0) {
        let mut prev_ab = f64::INFINITY;
        let mut prev_a = f64::INFINITY;
        for k in 0..100 {
            let x = start + step * k as f64;
            let fa = law.log_a_tail(x);
            let fab = law.log_ab_tail(x);
            prop_assert!((0.0..=1.0).contains(&fa) && (0.0..=1.0).contains(&fab));
            prop_assert!(fab >= fa, "x = {x}: {fab} < {fa}");
            prop_assert!(fab <= prev_ab && fa <= prev_a);
            prev_ab = fab;
            prev_a = fa;
        }
    }
}
