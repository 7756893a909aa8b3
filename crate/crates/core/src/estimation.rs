//! Empirical tails with Wilson intervals, and their comparison with the
//! predicted curves.

use std::io::Write;

use serde::Serialize;

use crate::asymptotics::{finite_formula, stationary_formula, theory_sup_walk, Aux, Regime};
use crate::distributions::{Coupling, InputLaw, Marginal, TailKind};
use crate::engine::{count_exceedances, sample_perpetuity, ExceedanceCounts, Truncation};
use crate::error::{Error, Result};
use crate::logreal::LogReal;
use crate::rng::RngStream;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if k == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    // keep lo <= p <= hi under rounding
    (lo.min(p), hi.max(p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailCurve {
    pub grid: Vec<f64>,
    pub n_samples: u64,
    pub counts: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub theory: Vec<f64>,
    pub theory_lo: Vec<f64>,
    pub theory_hi: Vec<f64>,
    pub regime: Option<Regime>,
    /// `P[log(A v B) > u]`, filled with the theory.
    pub input_tail: Vec<f64>,
}

impl TailCurve {
    pub fn from_counts(c: &ExceedanceCounts) -> Result<Self> {
        if c.n == 0 {
            return Err(Error::EmptySamples);
        }
        let n = c.n;
        let p_hat = c.counts.iter().map(|&k| k as f64 / n as f64).collect();
        let (ci_lo, ci_hi) = c.counts.iter().map(|&k| wilson(k, n, Z95)).unzip();
        Ok(TailCurve {
            grid: c.grid.clone(),
            n_samples: n,
            counts: c.counts.clone(),
            p_hat,
            ci_lo,
            ci_hi,
            theory: Vec::new(),
            theory_lo: Vec::new(),
            theory_hi: Vec::new(),
            regime: None,
            input_tail: Vec::new(),
        })
    }

    pub fn has_theory(&self) -> bool {
        self.theory.len() == self.grid.len()
    }

    /// `p_hat / theory` per grid point; empty without theory.
    pub fn ratios(&self) -> Vec<f64> {
        if !self.has_theory() {
            return Vec::new();
        }
        self.p_hat
            .iter()
            .zip(&self.theory)
            .map(|(p, t)| p / t)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "u",
            "n_samples",
            "count",
            "p_hat",
            "ci_lo",
            "ci_hi",
            "theory",
            "theory_lo",
            "theory_hi",
            "ratio",
        ])?;
        let ratios = self.ratios();
        let opt = |v: &[f64], i: usize| v.get(i).map_or(String::new(), |x| format!("{x:.10e}"));
        for i in 0..self.grid.len() {
            wr.write_record([
                format!("{}", self.grid[i]),
                self.n_samples.to_string(),
                self.counts[i].to_string(),
                format!("{:.10e}", self.p_hat[i]),
                format!("{:.10e}", self.ci_lo[i]),
                format!("{:.10e}", self.ci_hi[i]),
                opt(&self.theory, i),
                opt(&self.theory_lo, i),
                opt(&self.theory_hi, i),
                opt(&ratios, i),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Exceedances of `e^u` (positive samples with `log_mag > u`).
pub fn empirical_tail(samples: &[LogReal], grid: &[f64]) -> Result<TailCurve> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut c = ExceedanceCounts::new(grid)?;
    for s in samples {
        c.add(s.level());
    }
    TailCurve::from_counts(&c)
}

/// Which prediction to attach.
#[derive(Clone, Debug, PartialEq)]
pub enum Horizon {
    Stationary,
    /// `n` steps from `R_0` with weight `w`.
    Finite {
        n: usize,
        w: f64,
    },
    SupWalk,
}

/// Fills the theory columns. `aux` holds `P[R > 0]` for the stationary
/// regimes that need it, or `P[R_k > 0]`, `k < n`, for finite horizons.
/// The regime's hypotheses are checked first.
pub fn attach_theory(
    mut curve: TailCurve,
    law: &InputLaw,
    regime: Regime,
    horizon: &Horizon,
    aux: &[Aux],
) -> Result<TailCurve> {
    if *horizon != Horizon::SupWalk {
        regime.check(law)?;
    }
    let mut th = Vec::with_capacity(curve.grid.len());
    let mut lo = Vec::with_capacity(curve.grid.len());
    let mut hi = Vec::with_capacity(curve.grid.len());
    for &u in &curve.grid {
        let p = match horizon {
            Horizon::Stationary => stationary_formula(law, regime, u, aux.first().copied())?,
            Horizon::Finite { n, w } => finite_formula(law, *n, *w, regime, u, aux)?,
            Horizon::SupWalk => {
                let v = theory_sup_walk(law, u)?;
                crate::asymptotics::Prediction {
                    point: Some(v),
                    lower: v,
                    upper: v,
                }
            }
        };
        th.push(p.center());
        lo.push(p.lower);
        hi.push(p.upper);
    }
    curve.input_tail = curve
        .grid
        .iter()
        .map(|&u| law.tail(TailKind::LogAB, u))
        .collect();
    curve.theory = th;
    curve.theory_lo = lo;
    curve.theory_hi = hi;
    curve.regime = Some(regime);
    Ok(curve)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Stable,
    Unstable,
    Diverging,
    NotDiverging,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Stable => "stable",
            Trend::Unstable => "unstable",
            Trend::Diverging => "diverging",
            Trend::NotDiverging => "not diverging",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioPoint {
    pub u: f64,
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioTrend {
    pub ratios: Vec<RatioPoint>,
    /// Interval overlap of the last three ratios.
    pub verdict: Trend,
    /// `p_hat / P[log(A v B) > u]`.
    pub companion: Vec<f64>,
    /// Monotone growth by at least 2x across the grid.
    pub companion_verdict: Trend,
}

fn overlap(a: &RatioPoint, b: &RatioPoint) -> bool {
    a.lo <= b.hi && b.lo <= a.hi
}

pub fn ratio_trend(curve: &TailCurve) -> Result<RatioTrend> {
    if !curve.has_theory() {
        return Err(Error::NoTheory);
    }
    let mut ratios = Vec::with_capacity(curve.grid.len());
    for i in 0..curve.grid.len() {
        let t = curve.theory[i];
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::ZeroTheory { u: curve.grid[i] });
        }
        let (tlo, thi) = (curve.theory_lo[i], curve.theory_hi[i]);
        let lo = if thi > 0.0 { curve.ci_lo[i] / thi } else { 0.0 };
        let hi = if tlo > 0.0 {
            curve.ci_hi[i] / tlo
        } else {
            f64::INFINITY
        };
        ratios.push(RatioPoint {
            u: curve.grid[i],
            ratio: curve.p_hat[i] / t,
            lo,
            hi,
        });
    }
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let stable = tail
        .iter()
        .enumerate()
        .all(|(i, a)| tail[i + 1..].iter().all(|b| overlap(a, b)));
    let companion: Vec<f64> = curve
        .p_hat
        .iter()
        .zip(&curve.input_tail)
        .map(|(p, f)| p / f)
        .collect();
    let grows = companion.len() >= 2
        && companion.windows(2).all(|w| w[1] >= w[0])
        && companion[companion.len() - 1] >= 2.0 * companion[0];
    Ok(RatioTrend {
        ratios,
        verdict: if stable {
            Trend::Stable
        } else {
            Trend::Unstable
        },
        companion,
        companion_verdict: if grows {
            Trend::Diverging
        } else {
            Trend::NotDiverging
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub lo_margin: f64,
    pub hi_margin: f64,
    /// Per grid point: the Wilson interval meets `[lo_margin * theory_lo, hi_margin * theory_hi]`.
    pub hits: Vec<bool>,
    pub all_hit: bool,
}

pub fn sandwich_check(curve: &TailCurve, lo_margin: f64, hi_margin: f64) -> Result<SandwichReport> {
    if !curve.has_theory() {
        return Err(Error::NoTheory);
    }
    let hits: Vec<bool> = (0..curve.grid.len())
        .map(|i| {
            curve.ci_hi[i] >= lo_margin * curve.theory_lo[i]
                && curve.ci_lo[i] <= hi_margin * curve.theory_hi[i]
        })
        .collect();
    let all_hit = hits.iter().all(|&h| h);
    Ok(SandwichReport {
        lo_margin,
        hi_margin,
        hits,
        all_hit,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FactorPoint {
    pub u: f64,
    pub count_1: u64,
    pub count_2: u64,
    /// `None` when either count is zero.
    pub factor: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorCurve {
    pub n_per_coupling: u64,
    pub points: Vec<FactorPoint>,
    pub truncation_1: Truncation,
    pub truncation_2: Truncation,
}

/// Ratio of two binomial proportions with a 95% interval on the log scale.
pub fn proportion_ratio(k2: u64, n2: u64, k1: u64, n1: u64) -> Option<(f64, f64, f64)> {
    if k1 == 0 || k2 == 0 {
        return None;
    }
    let r = (k2 as f64 / n2 as f64) / (k1 as f64 / n1 as f64);
    let se = (1.0 / k2 as f64 - 1.0 / n2 as f64 + 1.0 / k1 as f64 - 1.0 / n1 as f64)
        .max(0.0)
        .sqrt();
    Some((r, r * (-Z95 * se).exp(), r * (Z95 * se).exp()))
}

/// Stationary exceedance counts for a law, sample `i` drawn from stream
/// `stream_base + i`.
pub fn stationary_counts(
    law: &InputLaw,
    grid: &[f64],
    n: u64,
    seed: u64,
    stream_base: u64,
    workers: usize,
    trunc: &Truncation,
) -> Result<ExceedanceCounts> {
    count_exceedances(n, workers, grid, |i| {
        let mut rng = RngStream::new(seed, stream_base + i);
        Ok(sample_perpetuity(law, &mut rng, trunc)?.value.level())
    })
}

/// Samples the stationary tails under `B = A` (type 1) and under `B`
/// independent of `A` with the same law (type 2), and returns
/// `P[R2 > e^u] / P[R1 > e^u]` per grid point. Truncation depth is set from
/// the largest grid point at relative bias `bias_tol`.
pub fn compare_example_3_4(
    base: Marginal,
    seed: u64,
    grid: &[f64],
    n: u64,
    workers: usize,
    bias_tol: f64,
) -> Result<FactorCurve> {
    let u_max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let law1 = InputLaw::new(base.into_family(), Coupling::BEqualsA)?;
    let law2 = InputLaw::new(base.into_family(), Coupling::Independent)?;
    let t1 = Truncation::for_probe(&law1, u_max, bias_tol)?;
    let t2 = Truncation::for_probe(&law2, u_max, bias_tol)?;
    let c1 = stationary_counts(&law1, grid, n, seed, 0, workers, &t1)?;
    let c2 = stationary_counts(&law2, grid, n, seed, 1 << 40, workers, &t2)?;
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let r = proportion_ratio(c2.counts[i], n, c1.counts[i], n);
            FactorPoint {
                u,
                count_1: c1.counts[i],
                count_2: c2.counts[i],
                factor: r.map(|x| x.0),
                lo: r.map(|x| x.1),
                hi: r.map(|x| x.2),
            }
        })
        .collect();
    Ok(FactorCurve {
        n_per_coupling: n,
        points,
        truncation_1: t1,
        truncation_2: t2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples() {
        let s = vec![LogReal::from_f64(2.0); 10];
        let c = empirical_tail(&s, &[0.0, 1.0]).unwrap();
        assert_eq!(c.p_hat, vec![1.0, 0.0]);
        assert_eq!(c.counts, vec![10, 0]);
        assert!(empirical_tail(&[], &[0.0]).is_err());
    }

    #[test]
    fn negative_and_zero_never_exceed() {
        let s = [LogReal::ZERO, LogReal::from_f64(-1e9)];
        let c = empirical_tail(&s, &[-1e6]).unwrap();
        assert_eq!(c.counts, vec![0]);
    }

    #[test]
    fn wilson_edges() {
        assert_eq!(wilson(0, 100, Z95).0, 0.0);
        assert_eq!(wilson(100, 100, Z95).1, 1.0);
        let (lo, hi) = wilson(50, 100, Z95);
        // textbook value for 50/100
        assert!(
            (lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4,
            "{lo} {hi}"
        );
    }

    #[test]
    fn exact_theory_gives_unit_ratios() {
        let mut c = empirical_tail(&[LogReal::from_f64(5.0); 4], &[0.0, 1.0, 1.5]).unwrap();
        c.theory = c.p_hat.clone();
        c.theory_lo = c.p_hat.clone();
        c.theory_hi = c.p_hat.clone();
        c.input_tail = vec![1.0; 3];
        let t = ratio_trend(&c).unwrap();
        assert!(t.ratios.iter().all(|r| r.ratio == 1.0));
        assert_eq!(t.verdict, Trend::Stable);
        assert_eq!(t.companion_verdict, Trend::NotDiverging);
    }

    #[test]
    fn zero_theory_is_an_error() {
        let mut c = empirical_tail(&[LogReal::ONE], &[0.0]).unwrap();
        assert!(matches!(ratio_trend(&c), Err(Error::NoTheory)));
        c.theory = vec![0.0];
        c.theory_lo = vec![0.0];
        c.theory_hi = vec![0.0];
        c.input_tail = vec![1.0];
        assert!(matches!(ratio_trend(&c), Err(Error::ZeroTheory { .. })));
    }

    #[test]
    fn csv_columns() {
        let c = empirical_tail(&[LogReal::from_f64(2.0)], &[0.0]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(
            s.starts_with("u,n_samples,count,p_hat,ci_lo,ci_hi,theory,theory_lo,theory_hi,ratio\n")
        );
        assert!(s.lines().nth(1).unwrap().ends_with(",,,,"));
    }

    #[test]
    fn proportion_ratio_interval() {
        let (r, lo, hi) = proportion_ratio(200, 1000, 100, 1000).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        assert!(lo < 2.0 && hi > 2.0 && lo > 1.5 && hi < 2.6);
        assert!(proportion_ratio(0, 10, 5, 10).is_none());
    }
}
