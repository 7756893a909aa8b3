use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use slowtail::asymptotics::separation_ratio;
use slowtail::distributions::diagnostics::{
    check_subexponential, potter_check, DiagRow, GridDensity,
};
use slowtail::engine::{
    late_record_bias, par_fold, sample_perpetuity, sample_sup_walk, ExceedanceCounts,
};
use slowtail::estimation::{
    attach_theory, compare_example_3_4, ratio_trend, sandwich_check, wilson, FactorCurve, Horizon,
    TailCurve, Z95,
};
use slowtail::{Aux, Family, InputLaw, LogReal, Marginal, Regime, RngStream, Truncation, WalkStop};

use crate::config::{LawSpec, Margins, Mode, RatioBand, Scenario};

/// A named pass/fail check with a human-readable detail line.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub mode: &'static str,
    pub theorem: String,
    pub criteria: Vec<u32>,
    pub seed: u64,
    pub workers: usize,
    pub n_samples: u64,
    pub grid: Vec<f64>,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: Value,
}

/// Everything a run produces, before anything touches the disk.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub curve: Option<TailCurve>,
    pub factors: Option<FactorCurve>,
    pub diagnostics: Vec<DiagRow>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.summary.checks.iter().find(|c| c.name == name)
    }
}

struct Parts {
    checks: Vec<Check>,
    details: Value,
    curve: Option<TailCurve>,
    factors: Option<FactorCurve>,
    diagnostics: Vec<DiagRow>,
}

impl Parts {
    fn curve(curve: TailCurve, checks: Vec<Check>, details: Value) -> Self {
        Parts {
            checks,
            details,
            curve: Some(curve),
            factors: None,
            diagnostics: Vec::new(),
        }
    }
}

pub fn run_scenario(sc: &Scenario) -> Result<Outcome> {
    sc.validate()?;
    let law = sc.law()?;
    let parts = match &sc.mode {
        Mode::Stationary {
            regime,
            bias_tol,
            sandwich,
            ratio_nondecreasing,
            expect_constant,
        } => stationary(
            sc,
            &law,
            *regime,
            *bias_tol,
            *sandwich,
            *ratio_nondecreasing,
            *expect_constant,
        ),
        Mode::FiniteHorizon {
            n,
            r0,
            w,
            regime,
            band,
        } => finite_horizon(sc, &law, *n, *r0, *w, *regime, *band),
        Mode::SupWalk {
            guard_log,
            bias_tol,
            band,
            trend_to_one,
        } => sup_walk(sc, &law, *guard_log, *bias_tol, *band, *trend_to_one),
        Mode::Diagnostics {
            doublings,
            nodes_per_doubling,
            subexp_band,
            extra_laws,
        } => diagnostics(
            sc,
            &law,
            *doublings,
            *nodes_per_doubling,
            *subexp_band,
            extra_laws,
        ),
        Mode::Example34 {
            bias_tol,
            terminal_within,
        } => example34(sc, &law, *bias_tol, *terminal_within),
        Mode::BoundedExample { bound, tol } => bounded(sc, &law, *bound, *tol),
    }
    .with_context(|| format!("stage {}", sc.mode.name()))?;
    let passed = parts.checks.iter().all(|c| c.passed);
    Ok(Outcome {
        summary: Summary {
            scenario: sc.name.clone(),
            mode: sc.mode.name(),
            theorem: sc.theorem.clone(),
            criteria: sc.criteria.clone(),
            seed: sc.seed,
            workers: sc.workers,
            n_samples: sc.n_samples,
            grid: sc.grid.clone(),
            passed,
            checks: parts.checks,
            details: parts.details,
        },
        curve: parts.curve,
        factors: parts.factors,
        diagnostics: parts.diagnostics,
    })
}

fn interval(k: u64, n: u64) -> Aux {
    let (lo, hi) = wilson(k, n, Z95);
    Aux {
        est: k as f64 / n as f64,
        lo,
        hi,
    }
}

/// Standard error of `p_hat[i] / theory[i]`.
fn ratio_se(c: &TailCurve, i: usize) -> f64 {
    let p = c.p_hat[i];
    (p * (1.0 - p) / c.n_samples as f64).sqrt() / c.theory[i]
}

fn band_check(c: &TailCurve, band: RatioBand) -> Check {
    let name = "ratio_band";
    let Some(i) = c.grid.iter().position(|&u| u == band.u) else {
        return Check::new(name, false, format!("u = {} is not on the grid", band.u));
    };
    let r = c.p_hat[i] / c.theory[i];
    let ok = (band.lo..=band.hi).contains(&r);
    Check::new(
        name,
        ok,
        format!(
            "p_hat/theory at u = {} is {r:.4} (s.e. {:.4}), band [{}, {}]",
            band.u,
            ratio_se(c, i),
            band.lo,
            band.hi
        ),
    )
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Clone)]
struct StationaryAcc {
    counts: ExceedanceCounts,
    positive: u64,
    min: f64,
    max: f64,
    terms: u64,
}

impl StationaryAcc {
    fn merge(&mut self, o: StationaryAcc) {
        self.counts.merge(o.counts);
        self.positive += o.positive;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
        self.terms += o.terms;
    }
}

fn stationary_acc(
    sc: &Scenario,
    law: &InputLaw,
    grid: &[f64],
    trunc: &Truncation,
) -> Result<StationaryAcc> {
    let empty = StationaryAcc {
        counts: ExceedanceCounts::new(grid)?,
        positive: 0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        terms: 0,
    };
    let acc = par_fold(
        sc.n_samples,
        sc.workers,
        || empty.clone(),
        |acc, i| {
            let s = sample_perpetuity(law, &mut RngStream::new(sc.seed, i), trunc)?;
            acc.counts.add(s.value.level());
            acc.positive += s.value.is_positive() as u64;
            let v = s.value.to_f64();
            acc.min = acc.min.min(v);
            acc.max = acc.max.max(v);
            acc.terms += s.terms_used as u64;
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    Ok(acc)
}

fn stationary(
    sc: &Scenario,
    law: &InputLaw,
    regime: Option<Regime>,
    bias_tol: f64,
    sandwich: Option<Margins>,
    ratio_nondecreasing: bool,
    expect_constant: Option<f64>,
) -> Result<Parts> {
    let regime = regime.unwrap_or_else(|| Regime::auto(law));
    let u_max = *sc.grid.last().expect("validated grid");
    let trunc = Truncation::for_probe(law, u_max, bias_tol)?;
    let acc = stationary_acc(sc, law, &sc.grid, &trunc).context("sampling")?;
    let aux = interval(acc.positive, acc.counts.n);
    let curve = TailCurve::from_counts(&acc.counts)?;
    let curve =
        attach_theory(curve, law, regime, &Horizon::Stationary, &[aux]).context("theory")?;
    let mut checks = Vec::new();
    if let Some(x) = expect_constant {
        let tol = 1e-12 * x.abs();
        let ok = (acc.min - x).abs() <= tol && (acc.max - x).abs() <= tol;
        checks.push(Check::new(
            "constant",
            ok,
            format!("samples in [{}, {}], expected {x}", acc.min, acc.max),
        ));
    }
    if let Some(m) = sandwich {
        let rep = sandwich_check(&curve, m.lo, m.hi)?;
        let detail = format!(
            "Wilson intervals meet [{}*lo, {}*hi] at {:?}",
            m.lo, m.hi, rep.hits
        );
        checks.push(Check::new("sandwich", rep.all_hit, detail));
    }
    let trend = if curve.theory.iter().all(|&t| t > 0.0) {
        Some(ratio_trend(&curve)?)
    } else {
        None
    };
    if ratio_nondecreasing {
        let r = curve.ratios();
        let ok = (1..r.len()).all(|i| r[i] >= r[i - 1] - ratio_se(&curve, i));
        checks.push(Check::new(
            "ratio_nondecreasing",
            ok,
            format!("ratios {} along u {}", fmt_list(&r), fmt_list(&curve.grid)),
        ));
    }
    let details = json!({
        "regime": regime.name(),
        "truncation": trunc,
        "mean_terms": acc.terms as f64 / acc.counts.n as f64,
        "p_positive": aux,
        "sample_min": acc.min,
        "sample_max": acc.max,
        "trend": trend,
    });
    Ok(Parts::curve(curve, checks, details))
}

fn finite_horizon(
    sc: &Scenario,
    law: &InputLaw,
    n: usize,
    r0: f64,
    w: f64,
    regime: Option<Regime>,
    band: Option<RatioBand>,
) -> Result<Parts> {
    let regime = regime.unwrap_or_else(|| Regime::auto(law));
    let sys = sc.system()?;
    let start = LogReal::from_f64(r0);
    let empty = (ExceedanceCounts::new(&sc.grid)?, vec![0u64; n]);
    let (counts, positive) = par_fold(
        sc.n_samples,
        sc.workers,
        || empty.clone(),
        |(c, pos), i| {
            let mut rng = RngStream::new(sc.seed, i);
            let mut x = start;
            for p in pos.iter_mut() {
                *p += x.is_positive() as u64;
                x = sys.draw(&mut rng)?.apply(x);
            }
            c.add(x.level());
            Ok(())
        },
        |(a, pa), (b, pb)| {
            a.merge(b);
            for (x, y) in pa.iter_mut().zip(pb) {
                *x += y;
            }
        },
    )
    .context("sampling")?;
    let aux: Vec<Aux> = positive
        .iter()
        .map(|&k| interval(k, sc.n_samples))
        .collect();
    let curve = TailCurve::from_counts(&counts)?;
    let curve =
        attach_theory(curve, law, regime, &Horizon::Finite { n, w }, &aux).context("theory")?;
    let checks = band.map(|b| band_check(&curve, b)).into_iter().collect();
    let details =
        json!({ "regime": regime.name(), "n": n, "r0": r0, "w": w, "ratios": curve.ratios() });
    Ok(Parts::curve(curve, checks, details))
}

fn sup_walk(
    sc: &Scenario,
    law: &InputLaw,
    guard_log: f64,
    bias_tol: f64,
    band: Option<RatioBand>,
    trend_to_one: bool,
) -> Result<Parts> {
    let u_max = *sc.grid.last().expect("validated grid");
    let stop = WalkStop {
        guard_log,
        ..WalkStop::for_probe(law, u_max, bias_tol)?
    };
    let empty = (ExceedanceCounts::new(&sc.grid)?, f64::NEG_INFINITY, 0u64);
    let (counts, shallowest, steps) = par_fold(
        sc.n_samples,
        sc.workers,
        || empty.clone(),
        |(c, sh, st), i| {
            let s = sample_sup_walk(law, &mut RngStream::new(sc.seed, i), &stop)?;
            c.add(s.m);
            *sh = sh.max(s.walk_at_stop);
            *st += s.stopped_at as u64;
            Ok(())
        },
        |(a, sa, ta), (b, sb, tb)| {
            a.merge(b);
            *sa = sa.max(sb);
            *ta += tb;
        },
    )
    .context("sampling")?;
    let curve = TailCurve::from_counts(&counts)?;
    let curve =
        attach_theory(curve, law, Regime::auto(law), &Horizon::SupWalk, &[]).context("theory")?;
    let bias: Vec<f64> = sc
        .grid
        .iter()
        .zip(&curve.theory)
        .map(|(&u, &t)| Ok(late_record_bias(law, u, shallowest)? / t))
        .collect::<slowtail::Result<_>>()?;
    let mut checks = Vec::new();
    if let Some(b) = band {
        checks.push(band_check(&curve, b));
    }
    if trend_to_one {
        let r = curve.ratios();
        let d: Vec<f64> = r.iter().map(|x| (x - 1.0).abs()).collect();
        let ok = (1..d.len()).all(|i| d[i] <= d[i - 1] + ratio_se(&curve, i));
        checks.push(Check::new(
            "trend_to_one",
            ok,
            format!(
                "|ratio - 1| = {} along u {}",
                fmt_list(&d),
                fmt_list(&curve.grid)
            ),
        ));
    }
    let details = json!({
        "stop": stop,
        "mean_steps": steps as f64 / sc.n_samples as f64,
        "shallowest_stop": shallowest,
        "late_record_bias_rel": bias,
        "ratios": curve.ratios(),
    });
    Ok(Parts::curve(curve, checks, details))
}

/// First `x` where `P[log(A v B) > x]` drops below 1.
fn lower_end(law: &InputLaw) -> Result<f64> {
    let (mut lo, mut hi) = (-1e6, 1e6);
    if law.log_ab_tail(lo) < 1.0 || law.log_ab_tail(hi) >= 1.0 {
        bail!("the law's A v B tail has no lower end in [-1e6, 1e6]");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if law.log_ab_tail(mid) < 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

fn potter_pairs() -> Vec<(f64, f64)> {
    (0..40)
        .flat_map(|i| {
            let x = 10.0 * 1.3f64.powi(i);
            [(x, x + 1.0), (x, 2.0 * x), (2.0 * x, x)]
        })
        .collect()
}

fn diagnostics(
    sc: &Scenario,
    law: &InputLaw,
    doublings: u32,
    per_doubling: u32,
    subexp_band: Option<[f64; 2]>,
    extra_laws: &[LawSpec],
) -> Result<Parts> {
    let mut checks = Vec::new();
    let mut rows = Vec::new();

    // log(A v B) moved so that its support starts at 1, on geometric nodes
    let x0 = lower_end(law)?;
    let r = 2f64.powf(1.0 / per_doubling as f64);
    let last = (doublings * per_doubling) as i32;
    let nodes: Vec<f64> = (0..=last).map(|k| r.powi(k)).collect();
    let top = *nodes.last().expect("nonempty");
    let sf = |t: f64| {
        if t >= top {
            0.0
        } else {
            law.log_ab_tail(t - 1.0 + x0)
        }
    };
    let grid = GridDensity::from_tail(nodes, &sf)?;
    let rep = check_subexponential(&grid, top / 2.0, 40).context("convolution check")?;
    rows.extend(rep.rows());
    let [blo, bhi] = subexp_band.unwrap_or([1.9, 2.1]);
    let ok = rep.verdict() == "consistent with S" && (blo..=bhi).contains(&rep.terminal_ratio);
    let detail = format!(
        "{}: terminal convolution ratio {:.4}, band [{blo}, {bhi}]",
        rep.verdict(),
        rep.terminal_ratio
    );
    checks.push(Check::new("subexponential", ok, detail));

    let h = 2.5e-4;
    let exp_nodes: Vec<f64> = (0..=180_000).map(|i| i as f64 * h).collect();
    let exp_grid = GridDensity::from_tail(exp_nodes, &|t: f64| (-t).exp())?;
    let exp_rep = check_subexponential(&exp_grid, 20.0, 40)?;
    let detail = format!(
        "exponential control: {} (ratio {:.4})",
        exp_rep.verdict(),
        exp_rep.terminal_ratio
    );
    checks.push(Check::new(
        "exponential_control",
        exp_rep.verdict() == "not consistent with S",
        detail,
    ));

    let pairs = potter_pairs();
    let p_law = potter_check(&|x| law.log_ab_tail(x), 2.0, 0.1, &pairs);
    let p_gauss = potter_check(&|x: f64| (-x * x).exp(), 2.0, 0.1, &pairs);
    let detail = format!(
        "law threshold {:?}, e^(-x^2) threshold {:?}",
        p_law.threshold, p_gauss.threshold
    );
    checks.push(Check::new(
        "potter",
        p_law.threshold.is_some() && p_gauss.threshold.is_none(),
        detail,
    ));
    rows.extend(p_law.violations);

    let (u_lo, u_hi) = (sc.grid[0], *sc.grid.last().expect("validated grid"));
    let mut laws = vec![(family_label(law), law.clone())];
    for spec in extra_laws {
        let l = spec.build()?;
        laws.push((family_label(&l), l));
    }
    let mut separation = Vec::new();
    for (name, l) in &laws {
        let (a, b) = (separation_ratio(l, u_lo)?, separation_ratio(l, u_hi)?);
        let ok = b < 0.5 * a;
        rows.push(DiagRow {
            x: u_lo,
            y: u_hi,
            value: b,
            bound: 0.5 * a,
            verdict: format!("separation {name}"),
        });
        separation
            .push(json!({ "law": name, "u_lo": u_lo, "ratio_lo": a, "u_hi": u_hi, "ratio_hi": b }));
        let detail = format!("{name}: F/F_I {a:.5} at u = {u_lo}, {b:.5} at u = {u_hi}");
        checks.push(Check::new(
            &format!("separation_{}", name.to_lowercase()),
            ok,
            detail,
        ));
    }

    let details = json!({
        "lower_end": x0,
        "subexp_terminal_ratio": rep.terminal_ratio,
        "exponential_terminal_ratio": exp_rep.terminal_ratio,
        "potter_threshold": p_law.threshold,
        "separation": separation,
    });
    Ok(Parts {
        checks,
        details,
        curve: None,
        factors: None,
        diagnostics: rows,
    })
}

fn family_label(law: &InputLaw) -> String {
    law.family.name().to_string()
}

fn base_marginal(law: &InputLaw) -> Result<Marginal> {
    match law.family {
        Family::ParetoLog { alpha, shift } => Ok(Marginal::Pareto { alpha, shift }),
        Family::WeibullLog { beta, scale, shift } => Ok(Marginal::Weibull { beta, scale, shift }),
        _ => bail!(
            "example34 needs a pareto_log or weibull_log law, got {}",
            law.family.name()
        ),
    }
}

fn example34(
    sc: &Scenario,
    law: &InputLaw,
    bias_tol: f64,
    within: Option<[f64; 2]>,
) -> Result<Parts> {
    let base = base_marginal(law)?;
    let f = compare_example_3_4(base, sc.seed, &sc.grid, sc.n_samples, sc.workers, bias_tol)
        .context("sampling")?;
    let mut checks = Vec::new();
    if let Some([lo, hi]) = within {
        let p = f.points.last().expect("validated grid");
        let (ok, detail) = match (p.factor, p.lo, p.hi) {
            (Some(r), Some(l), Some(h)) => (
                lo <= l && h <= hi,
                format!("factor at u = {} is {r:.4} with interval [{l:.4}, {h:.4}], required inside [{lo}, {hi}]", p.u),
            ),
            _ => (false, format!("no exceedances at u = {}", p.u)),
        };
        checks.push(Check::new("terminal_factor", ok, detail));
    }
    let factors: Vec<Option<f64>> = f.points.iter().map(|p| p.factor).collect();
    let details = json!({ "factors": factors, "truncation_1": f.truncation_1, "truncation_2": f.truncation_2 });
    Ok(Parts {
        checks,
        details,
        curve: None,
        factors: Some(f),
        diagnostics: Vec::new(),
    })
}

fn bounded(sc: &Scenario, law: &InputLaw, bound: f64, tol: f64) -> Result<Parts> {
    // a one-point grid when none is given, so counts still record P[R > 0]
    let grid = if sc.grid.is_empty() {
        vec![f64::MIN]
    } else {
        sc.grid.clone()
    };
    let acc = stationary_acc(sc, law, &grid, &Truncation::default()).context("sampling")?;
    let ok = acc.max <= bound + tol;
    let checks = vec![Check::new(
        "bounded",
        ok,
        format!("max sample {:.17} vs bound {bound} + {tol}", acc.max),
    )];
    let details = json!({
        "sample_min": acc.min,
        "sample_max": acc.max,
        "p_positive": interval(acc.positive, acc.counts.n),
        "mean_terms": acc.terms as f64 / acc.counts.n as f64,
    });
    let curve = if sc.grid.is_empty() {
        None
    } else {
        Some(TailCurve::from_counts(&acc.counts)?)
    };
    Ok(Parts {
        checks,
        details,
        curve,
        factors: None,
        diagnostics: Vec::new(),
    })
}

/// Predictions only, on the scenario's grid.
pub fn theory_only(sc: &Scenario) -> Result<TailCurve> {
    let law = sc.law()?;
    let blank = ExceedanceCounts {
        grid: sc.grid.clone(),
        counts: vec![0; sc.grid.len()],
        n: 1,
    };
    let curve = TailCurve::from_counts(&blank)?;
    let out = match &sc.mode {
        Mode::Stationary { regime, .. } => {
            let regime = regime.unwrap_or_else(|| Regime::auto(&law));
            attach_theory(
                curve,
                &law,
                regime,
                &Horizon::Stationary,
                &[Aux::exact(1.0)],
            )?
        }
        Mode::FiniteHorizon { n, w, regime, .. } => {
            let regime = regime.unwrap_or_else(|| Regime::auto(&law));
            attach_theory(
                curve,
                &law,
                regime,
                &Horizon::Finite { n: *n, w: *w },
                &vec![Aux::exact(1.0); *n],
            )?
        }
        Mode::SupWalk { .. } => {
            attach_theory(curve, &law, Regime::auto(&law), &Horizon::SupWalk, &[])?
        }
        m => bail!("mode {} has no tail prediction", m.name()),
    };
    Ok(out)
}
