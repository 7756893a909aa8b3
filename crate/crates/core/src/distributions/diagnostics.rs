//! Finite-range diagnostics for the classes L (long-tailed) and S
//! (subexponential). These are numerical evidence over a window, not proofs.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on `|ratio - 1|` at the largest grid point.
pub const LONG_TAIL_TOL: f64 = 0.05;
/// Terminal window for the convolution ratio.
pub const SUBEXP_BAND: (f64, f64) = (1.9, 2.1);
/// Allowed bracket width, relative to the tail at the evaluation point.
pub const BRACKET_REL: f64 = 0.01;

/// One line of a diagnostic table: `value` is the measured quantity at
/// `(x, y)`, `bound` what it is compared against.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DiagRow {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub bound: f64,
    pub verdict: String,
}

pub fn write_diag_csv<W: Write>(rows: &[DiagRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct LongTailReport {
    pub rows: Vec<DiagRow>,
    pub consistent_with_l: bool,
}

impl LongTailReport {
    pub fn verdict(&self) -> &'static str {
        if self.consistent_with_l {
            "consistent with L"
        } else {
            "not in L"
        }
    }
}

/// Tabulates `F(x+y)/F(x)` for every shift `y` and grid point `x`.
///
/// The verdict requires, for every shift, that `|ratio - 1|` never grows
/// along the grid and ends within [`LONG_TAIL_TOL`].
pub fn check_long_tailed(
    tail: &dyn Fn(f64) -> f64,
    shifts: &[f64],
    grid: &[f64],
) -> Result<LongTailReport> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadGrid);
    }
    let mut rows = Vec::with_capacity(shifts.len() * grid.len());
    let mut ok = true;
    for &y in shifts {
        let mut prev_dev = f64::INFINITY;
        for (i, &x) in grid.iter().enumerate() {
            let fx = tail(x);
            if !(fx > 0.0) {
                return Err(Error::TailVanishes { x });
            }
            let r = tail(x + y) / fx;
            let dev = (r - 1.0).abs();
            // allow rounding-level wiggle once the ratio has converged
            let monotone = dev <= prev_dev + 1e-12;
            let last = i + 1 == grid.len();
            let good = monotone && (!last || dev <= LONG_TAIL_TOL);
            ok &= good;
            prev_dev = dev;
            rows.push(DiagRow {
                x,
                y,
                value: r,
                bound: 1.0,
                verdict: if good { "ok".into() } else { "fail".into() },
            });
        }
    }
    Ok(LongTailReport {
        rows,
        consistent_with_l: ok,
    })
}

/// A distribution discretized on a grid: an atom at the first node plus
/// the mass of each cell `(t_i, t_{i+1}]`.
#[derive(Clone, Debug)]
pub struct GridDensity {
    nodes: Vec<f64>,
    atom: f64,
    cells: Vec<f64>,
    /// `P[X > t_i]` at each node, accumulated from the right.
    tail: Vec<f64>,
}

impl GridDensity {
    /// From CDF values at the nodes. `cdf(t_0)` is taken as an atom at `t_0`.
    pub fn from_cdf(nodes: Vec<f64>, cdf: &dyn Fn(f64) -> f64) -> Result<Self> {
        if nodes.is_empty() || nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadGrid);
        }
        let f: Vec<f64> = nodes.iter().map(|&t| cdf(t)).collect();
        let atom = f[0];
        let cells = f.windows(2).map(|w| w[1] - w[0]).collect();
        Self::build(nodes, atom, cells)
    }

    /// From survival values `P[X > t]` at the nodes; better conditioned than
    /// [`GridDensity::from_cdf`] deep in the tail.
    pub fn from_tail(nodes: Vec<f64>, sf: &dyn Fn(f64) -> f64) -> Result<Self> {
        if nodes.is_empty() || nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadGrid);
        }
        let g: Vec<f64> = nodes.iter().map(|&t| sf(t)).collect();
        let atom = 1.0 - g[0];
        let cells = g.windows(2).map(|w| w[0] - w[1]).collect();
        Self::build(nodes, atom, cells)
    }

    /// From density values at the nodes, integrated cell by cell with the
    /// trapezoid rule.
    pub fn from_density(nodes: Vec<f64>, density: &dyn Fn(f64) -> f64) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadGrid);
        }
        let d: Vec<f64> = nodes.iter().map(|&t| density(t)).collect();
        let cells = nodes
            .windows(2)
            .zip(d.windows(2))
            .map(|(t, f)| 0.5 * (f[0] + f[1]) * (t[1] - t[0]))
            .collect();
        Self::build(nodes, 0.0, cells)
    }

    pub fn point_mass(at: f64) -> Self {
        GridDensity {
            nodes: vec![at],
            atom: 1.0,
            cells: vec![],
            tail: vec![0.0],
        }
    }

    fn build(nodes: Vec<f64>, atom: f64, cells: Vec<f64>) -> Result<Self> {
        if atom < 0.0 || cells.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::MassNotNormalized { mass: f64::NAN });
        }
        let mass = atom + cells.iter().sum::<f64>();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::MassNotNormalized { mass });
        }
        let mut tail = vec![0.0; nodes.len()];
        let mut acc = 0.0;
        for i in (0..cells.len()).rev() {
            acc += cells[i];
            tail[i] = acc;
        }
        Ok(GridDensity {
            nodes,
            atom,
            cells,
            tail,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Exact `P[X > t_i]`.
    pub fn tail_at(&self, i: usize) -> f64 {
        self.tail[i]
    }

    /// `(lower, upper)` bounds on `P[X > y]` from the nodes around `y`.
    fn tail_bracket(&self, y: f64) -> (f64, f64) {
        let n = self.nodes.len();
        if y < self.nodes[0] {
            return (1.0, 1.0);
        }
        // first node >= y
        let hi_idx = self.nodes.partition_point(|&t| t < y);
        let lower = if hi_idx == n { 0.0 } else { self.tail[hi_idx] };
        if hi_idx < n && self.nodes[hi_idx] == y {
            return (lower, lower);
        }
        let upper = if hi_idx == 0 {
            1.0
        } else {
            self.tail[hi_idx - 1]
        };
        (lower, upper)
    }

    /// Bounds on `P[X1 + X2 > x]` when `x / 2` is node `k`, using
    /// `P[S > x] = 2 P[S > x, X1 <= x/2] + P[X > x/2]^2`.
    fn conv_bracket(&self, x: f64, k: usize) -> (f64, f64) {
        let (l0, u0) = self.tail_bracket(x - self.nodes[0]);
        let mut lo = self.atom * l0;
        let mut hi = self.atom * u0;
        for i in 0..k {
            let p = self.cells[i];
            if p == 0.0 {
                continue;
            }
            // X1 in (t_i, t_{i+1}] puts x - X1 in [x - t_{i+1}, x - t_i)
            let (l, _) = self.tail_bracket(x - self.nodes[i]);
            let (_, u) = self.tail_bracket(x - self.nodes[i + 1]);
            lo += p * l;
            hi += p * u;
        }
        let half = self.tail[k];
        (2.0 * lo + half * half, 2.0 * hi + half * half)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvPoint {
    pub x: f64,
    pub tail: f64,
    pub conv_lo: f64,
    pub conv_hi: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubexpReport {
    pub curve: Vec<ConvPoint>,
    pub terminal_ratio: f64,
    pub consistent_with_s: bool,
}

impl SubexpReport {
    pub fn verdict(&self) -> &'static str {
        if self.consistent_with_s {
            "consistent with S"
        } else {
            "not consistent with S"
        }
    }

    pub fn rows(&self) -> Vec<DiagRow> {
        let v = self.verdict();
        self.curve
            .iter()
            .map(|p| DiagRow {
                x: p.x,
                y: 0.0,
                value: p.ratio,
                bound: 2.0,
                verdict: v.into(),
            })
            .collect()
    }
}

/// Estimates `F*2(x)/F(x)` on `(0, x_max]`.
///
/// Evaluation points are nodes whose half is also a node, so both tails
/// there are exact sums of cell masses; the convolution itself is bracketed
/// by monotonicity and refused when the bracket is wider than
/// [`BRACKET_REL`] of the tail.
pub fn check_subexponential(dist: &GridDensity, x_max: f64, points: usize) -> Result<SubexpReport> {
    let nodes = &dist.nodes;
    let tol = |a: f64| 1e-12 * a.abs().max(1e-300);
    let end = nodes.partition_point(|&t| t <= x_max + tol(x_max));
    if end == 0 {
        return Err(Error::BadGrid);
    }
    let x_top = nodes[end - 1];
    if !(dist.tail[end - 1] > 0.0) {
        return Err(Error::TailVanishes { x: x_top });
    }
    // candidates (j, k) with t_j = 2 t_k, both positive
    let mut cand = Vec::new();
    for (j, &x) in nodes[..end].iter().enumerate() {
        if x <= 0.0 {
            continue;
        }
        let h = 0.5 * x;
        let k = nodes.partition_point(|&t| t < h - tol(h));
        if k < nodes.len() && (nodes[k] - h).abs() <= tol(h) {
            cand.push((j, k));
        }
    }
    if cand.is_empty() {
        return Err(Error::BadGrid);
    }
    let picks = thin_log(&cand, nodes, points.max(2));

    let mut curve = Vec::with_capacity(picks.len());
    let mut worst: Option<(f64, f64)> = None;
    for (j, k) in picks {
        let x = nodes[j];
        let f = dist.tail[j];
        if !(f > 0.0) {
            return Err(Error::TailVanishes { x });
        }
        let (lo, hi) = dist.conv_bracket(x, k);
        let width = hi - lo;
        let allowed = BRACKET_REL * f;
        if width > allowed {
            let w = worst.get_or_insert((width, allowed));
            if width / allowed > w.0 / w.1 {
                *w = (width, allowed);
            }
        }
        curve.push(ConvPoint {
            x,
            tail: f,
            conv_lo: lo,
            conv_hi: hi,
            ratio: 0.5 * (lo + hi) / f,
        });
    }
    if let Some((width, allowed)) = worst {
        return Err(Error::GridTooCoarse {
            width,
            allowed,
            refine: width / allowed,
        });
    }

    let terminal = curve.last().map(|p| p.ratio).unwrap_or(f64::NAN);
    let x_last = curve.last().unwrap().x;
    let decade: Vec<f64> = curve
        .iter()
        .filter(|p| p.x >= x_last / 10.0)
        .map(|p| p.ratio)
        .collect();
    let toward_two = decade
        .windows(2)
        .all(|w| (w[1] - 2.0).abs() <= (w[0] - 2.0).abs() + 1e-9);
    let in_band = (SUBEXP_BAND.0..=SUBEXP_BAND.1).contains(&terminal);
    Ok(SubexpReport {
        curve,
        terminal_ratio: terminal,
        consistent_with_s: in_band && toward_two,
    })
}

/// Picks about `want` entries spread evenly in `ln x`, always keeping the last.
fn thin_log(cand: &[(usize, usize)], nodes: &[f64], want: usize) -> Vec<(usize, usize)> {
    if cand.len() <= want {
        return cand.to_vec();
    }
    let lx = |c: &(usize, usize)| nodes[c.0].ln();
    let a = lx(&cand[0]);
    let b = lx(cand.last().unwrap());
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(want);
    let mut next = 0usize;
    for i in 0..want {
        let target = a + (b - a) * i as f64 / (want - 1) as f64;
        let pos = cand[next..]
            .iter()
            .position(|c| lx(c) >= target - 1e-12)
            .map(|p| p + next);
        if let Some(p) = pos {
            if out.last() != Some(&cand[p]) {
                out.push(cand[p]);
            }
            next = p;
        }
    }
    if out.last() != cand.last() {
        out.push(*cand.last().unwrap());
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PotterReport {
    /// Smallest tested value above which no pair violates the bound.
    pub threshold: Option<f64>,
    pub violations: Vec<DiagRow>,
}

/// Tests `F(x)/F(y) <= delta_cap * exp(delta_exp |x - y|)` on the given pairs.
pub fn potter_check(
    tail: &dyn Fn(f64) -> f64,
    delta_cap: f64,
    delta_exp: f64,
    pairs: &[(f64, f64)],
) -> PotterReport {
    let mut violations = Vec::new();
    let mut worst_min = f64::NEG_INFINITY;
    for &(x, y) in pairs {
        let bound = delta_cap * (delta_exp * (x - y).abs()).exp();
        let fy = tail(y);
        let r = if fy > 0.0 {
            tail(x) / fy
        } else if tail(x) > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        };
        // 0/0 counts as a failure: the bound cannot be checked
        if !(r <= bound) {
            worst_min = worst_min.max(x.min(y));
            violations.push(DiagRow {
                x,
                y,
                value: r,
                bound,
                verdict: "violation".into(),
            });
        }
    }
    let mut mins: Vec<f64> = pairs.iter().map(|&(x, y)| x.min(y)).collect();
    mins.sort_by(f64::total_cmp);
    let threshold = mins.into_iter().find(|&m| m > worst_min);
    PotterReport {
        threshold,
        violations,
    }
}

/// `(sum c_i) F(x)`: the tail of a convolution of laws with `G_i ~ c_i F`.
pub fn convolve_equiv_tails(
    components: &[(&dyn Fn(f64) -> f64, f64)],
    reference: &dyn Fn(f64) -> f64,
    x: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for &(_, c) in components {
        if c < 0.0 || !c.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        total += c;
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(total * reference(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn slow(x: f64) -> f64 {
        if x <= -3.0 {
            1.0
        } else {
            (1.0 / (x + 4.0)).min(1.0)
        }
    }

    #[test]
    fn slowly_varying_ratio_near_one() {
        let rep = check_long_tailed(&slow, &[1.0], &[1e6]).unwrap();
        assert!((rep.rows[0].value - 1.0).abs() < 1e-5);
        assert!(rep.consistent_with_l);
    }

    #[test]
    fn exponential_is_not_long_tailed() {
        let e = |x: f64| (-x).exp();
        let rep = check_long_tailed(&e, &[1.0], &[1.0, 5.0, 20.0]).unwrap();
        for r in &rep.rows {
            assert_relative_eq!(r.value, (-1.0f64).exp(), max_relative = 1e-12);
        }
        assert_eq!(rep.verdict(), "not in L");
    }

    #[test]
    fn pareto_log_is_long_tailed() {
        let f = |x: f64| (x + 4.0).powi(-2);
        let rep = check_long_tailed(&f, &[1.0, 5.0], &[1e2, 1e4, 1e6]).unwrap();
        for r in &rep.rows {
            let oracle = ((r.x + 4.0) / (r.x + r.y + 4.0)).powi(2);
            assert_relative_eq!(r.value, oracle, max_relative = 1e-12);
        }
        assert!(rep.consistent_with_l);
    }

    #[test]
    fn vanishing_tail_is_an_error() {
        let f = |x: f64| if x < 10.0 { 0.5 } else { 0.0 };
        let e = check_long_tailed(&f, &[1.0], &[1.0, 20.0]).unwrap_err();
        assert!(e.to_string().contains("tail vanishes"));
    }

    #[test]
    fn point_mass_has_no_tail() {
        let pm = GridDensity::point_mass(0.0);
        let e = check_subexponential(&pm, 10.0, 50).unwrap_err();
        assert!(matches!(e, Error::TailVanishes { .. }), "{e}");
    }

    #[test]
    fn exponential_ratio_grows() {
        // bracket width relative to the tail is about h * x here
        let h = 2.5e-4;
        let nodes: Vec<f64> = (0..=180_000).map(|i| i as f64 * h).collect();
        // mass beyond 45 is ~3e-20, far inside the 1e-8 normalization check
        let d = GridDensity::from_tail(nodes, &|t: f64| (-t).exp()).unwrap();
        let rep = check_subexponential(&d, 20.0, 60).unwrap();
        for p in rep.curve.iter().filter(|p| p.x >= 1.0) {
            assert_relative_eq!(p.ratio, 1.0 + p.x, max_relative = 3e-3);
        }
        assert!(rep.terminal_ratio > 2.1);
        assert_eq!(rep.verdict(), "not consistent with S");
    }

    #[test]
    fn coarse_grid_is_refused() {
        let nodes: Vec<f64> = (0..=32).map(|i| i as f64).collect();
        let d = GridDensity::from_cdf(nodes, &|t: f64| {
            if t >= 32.0 {
                1.0
            } else {
                1.0 - (-t).exp()
            }
        })
        .unwrap();
        match check_subexponential(&d, 30.0, 20) {
            Err(Error::GridTooCoarse { refine, .. }) => assert!(refine > 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mass_must_be_one() {
        let nodes = vec![0.0, 1.0, 2.0];
        let e = GridDensity::from_cdf(nodes, &|t: f64| t / 4.0).unwrap_err();
        assert!(matches!(e, Error::MassNotNormalized { .. }));
    }

    #[test]
    fn potter_on_slow_tail() {
        let mut pairs = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                pairs.push((10.0 + 5.0 * i as f64, 10.0 + 5.0 * j as f64));
            }
        }
        let rep = potter_check(&slow, 2.0, 0.1, &pairs);
        assert!(rep.violations.is_empty());
        assert_eq!(rep.threshold, Some(10.0));
        // analytic oracle: sup over y >= x of ((y+4)/(x+4)) e^{-0.1 (y-x)} is 1 for x >= 6
        for &(x, y) in &pairs {
            let r = slow(x) / slow(y);
            assert!(r <= 2.0 * (0.1 * (x - y).abs()).exp());
        }
    }

    #[test]
    fn potter_identity_pairs() {
        let rep = potter_check(
            &|x: f64| (-x * x).exp(),
            2.0,
            0.1,
            &[(1.0, 1.0), (3.0, 3.0)],
        );
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn potter_fails_for_gaussian_tail() {
        let g = |x: f64| (-x * x).exp();
        let pairs: Vec<(f64, f64)> = (1..200)
            .map(|i| (i as f64 * 0.5, i as f64 * 0.5 + 1.0))
            .collect();
        let rep = potter_check(&g, 2.0, 0.1, &pairs);
        assert_eq!(rep.threshold, None);
        for &(x, y) in &pairs {
            let oracle = (y * y - x * x).exp();
            assert!(oracle > 2.0 * (0.1f64).exp());
        }
        assert_eq!(rep.violations.len(), pairs.len());
    }

    #[test]
    fn convolution_equivalence() {
        let f = |x: f64| (1.0 / (x + 4.0)).min(1.0);
        let p = |x: f64| x.powi(-2);
        assert_relative_eq!(
            convolve_equiv_tails(&[(&f, 1.0)], &f, 10.0).unwrap(),
            f(10.0)
        );
        assert_relative_eq!(
            convolve_equiv_tails(&[(&p, 1.0), (&p, 1.0)], &p, 100.0).unwrap(),
            2e-4
        );
        assert_relative_eq!(
            convolve_equiv_tails(&[(&f, 1.0), (&f, 2.0)], &f, 96.0).unwrap(),
            0.03
        );
        assert!(matches!(
            convolve_equiv_tails(&[(&f, 0.0)], &f, 1.0),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn csv_columns() {
        let rows = vec![DiagRow {
            x: 1.0,
            y: 2.0,
            value: 0.5,
            bound: 1.0,
            verdict: "ok".into(),
        }];
        let mut buf = Vec::new();
        write_diag_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,y,value,bound,verdict\n"));
    }
}
