//! Minimal SVG plots: points with interval bars, an optional reference
//! curve and band. The x axis is `u = ln x`, so a log y axis gives log-log
//! axes in `x`.

use std::fmt::Write;

use slowtail::estimation::{FactorCurve, TailCurve};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: &[f64], ys: &[f64]) -> Self {
        let lo = |v: &[f64]| {
            v.iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::INFINITY, f64::min)
        };
        let hi = |v: &[f64]| {
            v.iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let (mut x0, mut x1, mut y0, mut y1) = (lo(xs), hi(xs), lo(ys), hi(ys));
        if !(x0 < x1) {
            x0 -= 1.0;
            x1 += 1.0;
        }
        if !(y0 < y1) {
            y0 -= 1.0;
            y1 += 1.0;
        }
        let (px, py) = (0.05 * (x1 - x0), 0.08 * (y1 - y0));
        Frame {
            x0: x0 - px,
            x1: x1 + px,
            y0: y0 - py,
            y1: y1 + py,
        }
    }

    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let v = v.clamp(self.y0, self.y1);
        H - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str, f: &Frame, xlabel: &str, ylabel: &str, log_y: bool) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for k in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let px = f.x(xv);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="black"/>"#,
            b + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{xv:.1}</text>"#,
            b + 18.0
        );
    }
    let ticks: Vec<f64> = if log_y {
        (f.y0.ceil() as i32..=f.y1.floor() as i32)
            .map(f64::from)
            .collect()
    } else {
        (0..=4)
            .map(|k| f.y0 + (f.y1 - f.y0) * k as f64 / 4.0)
            .collect()
    };
    for yv in ticks {
        let py = f.y(yv);
        let label = if log_y {
            format!("1e{yv}")
        } else {
            format!("{yv:.2}")
        };
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/>"#,
            l - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            l - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        H - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn points(out: &mut String, f: &Frame, xs: &[f64], mid: &[f64], lo: &[f64], hi: &[f64]) {
    for i in 0..xs.len() {
        if !mid[i].is_finite() {
            continue;
        }
        let px = f.x(xs[i]);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="steelblue" stroke-width="1.5"/>"#,
            f.y(lo[i]),
            f.y(hi[i])
        );
        let _ = writeln!(
            out,
            r#"<circle cx="{px:.2}" cy="{:.2}" r="3.5" fill="steelblue"/>"#,
            f.y(mid[i])
        );
    }
}

fn polyline(out: &mut String, f: &Frame, xs: &[f64], ys: &[f64], style: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(&x, &y)| format!("{:.2},{:.2}", f.x(x), f.y(y)))
        .collect();
    if pts.len() > 1 {
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" {style}/>"#,
            pts.join(" ")
        );
    }
}

fn log10s(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            if x > 0.0 {
                x.log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Empirical tail with Wilson bars, plus the theory curve and band when set.
pub fn tail_plot(c: &TailCurve, title: &str) -> String {
    let (p, lo, hi) = (log10s(&c.p_hat), log10s(&c.ci_lo), log10s(&c.ci_hi));
    let (t, tlo, thi) = (
        log10s(&c.theory),
        log10s(&c.theory_lo),
        log10s(&c.theory_hi),
    );
    let mut ys: Vec<f64> = p
        .iter()
        .chain(&hi)
        .chain(&t)
        .chain(&thi)
        .chain(&tlo)
        .copied()
        .collect();
    ys.extend(lo.iter().filter(|x| x.is_finite()));
    let f = Frame::new(&c.grid, &ys);
    let mut out = String::new();
    header(&mut out, title, &f, "u = ln x", "P[R > x]", true);
    if c.has_theory() {
        let mut band: Vec<String> = c
            .grid
            .iter()
            .zip(&thi)
            .map(|(&x, &y)| format!("{:.2},{:.2}", f.x(x), f.y(y)))
            .collect();
        band.extend(
            c.grid
                .iter()
                .zip(&tlo)
                .rev()
                .map(|(&x, &y)| format!("{:.2},{:.2}", f.x(x), f.y(y))),
        );
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="orange" fill-opacity="0.25" stroke="none"/>"#,
            band.join(" ")
        );
        polyline(
            &mut out,
            &f,
            &c.grid,
            &t,
            r#"stroke="darkorange" stroke-width="2""#,
        );
    }
    points(&mut out, &f, &c.grid, &p, &lo, &hi);
    out.push_str("</svg>\n");
    out
}

/// Factor estimates with intervals and the reference level 2.
pub fn factor_plot(fc: &FactorCurve, title: &str) -> String {
    let xs: Vec<f64> = fc.points.iter().map(|p| p.u).collect();
    let nan = f64::NAN;
    let mid: Vec<f64> = fc.points.iter().map(|p| p.factor.unwrap_or(nan)).collect();
    let lo: Vec<f64> = fc.points.iter().map(|p| p.lo.unwrap_or(nan)).collect();
    let hi: Vec<f64> = fc.points.iter().map(|p| p.hi.unwrap_or(nan)).collect();
    let mut ys: Vec<f64> = lo.iter().chain(&hi).copied().collect();
    ys.extend([1.0, 2.0]);
    let f = Frame::new(&xs, &ys);
    let mut out = String::new();
    header(
        &mut out,
        title,
        &f,
        "u = ln x",
        "P[R2 > x] / P[R1 > x]",
        false,
    );
    polyline(
        &mut out,
        &f,
        &[f.x0, f.x1],
        &[2.0, 2.0],
        r#"stroke="darkorange" stroke-dasharray="6 4""#,
    );
    points(&mut out, &f, &xs, &mid, &lo, &hi);
    out.push_str("</svg>\n");
    out
}
