//! Minimal SVG line charts for probe time histories.

use std::fmt::Write;

use crate::probes::{ProbeKind, ProbeSeries};
use crate::scenarios::{ritter_front, ReferenceCurve, ScenarioConfig};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];

#[derive(Clone, Debug)]
pub struct Curve {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub dashed: bool,
}

/// Tick positions covering `[lo, hi]` with a 1-2-5 step.
pub fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn bounds(curves: &[Curve]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for (&x, &y) in c.xs.iter().zip(&c.ys) {
            if x.is_finite() && y.is_finite() {
                b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
            }
        }
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let widen = |lo: f64, hi: f64| {
        if hi - lo > 0.0 {
            (lo, hi)
        } else {
            let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            (lo - d, hi + d)
        }
    };
    let (x0, x1) = widen(b.0, b.1);
    let (y0, y1) = widen(b.2, b.3);
    let pad = 0.05 * (y1 - y0);
    (x0, x1, y0 - pad, y1 + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `curves` as a standalone SVG document.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, curves: &[Curve]) -> String {
    let (x0, x1, y0, y1) = bounds(curves);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    for (k, c) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = c
            .xs
            .iter()
            .zip(&c.ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if c.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            LEFT + 10.0,
            LEFT + 35.0,
            LEFT + 40.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    let a = v.abs();
    if a != 0.0 && (a >= 1e4 || a < 1e-3) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

/// Plot of probe column `k`. With a `[nondim]` block the time axis is
/// `tau = t / T`; front probes are shown as `x / H` with the reference
/// curve overlaid when one is configured.
pub fn probe_plot(cfg: &ScenarioConfig, series: &ProbeSeries, k: usize) -> String {
    let header = &series.headers[k];
    let name = header.split(" [").next().unwrap_or(header);
    let kind = cfg.probes.get(k).map(|p| p.kind);
    let mut ys = series.column(k);
    let (xs, xlabel) = match &cfg.nondim {
        Some(nd) => (series.times.iter().map(|t| t / nd.time).collect::<Vec<_>>(), "tau = t / sqrt(H/g)".to_string()),
        None => (series.times.clone(), "t [s]".to_string()),
    };
    let mut ylabel = header.clone();
    let mut curves = Vec::new();
    if let (Some(nd), Some(ProbeKind::FrontPosition)) = (&cfg.nondim, kind) {
        ys.iter_mut().for_each(|y| *y /= nd.length);
        ylabel = "x / H".into();
        curves.push(Curve {
            label: "SPH".into(),
            xs: xs.clone(),
            ys,
            dashed: false,
        });
        if nd.reference == Some(ReferenceCurve::Ritter) {
            curves.push(Curve {
                label: "Ritter 1 + 2 tau".into(),
                ys: xs.iter().map(|&t| ritter_front(t)).collect(),
                xs,
                dashed: true,
            });
        }
    } else {
        curves.push(Curve {
            label: name.to_string(),
            xs,
            ys,
            dashed: false,
        });
    }
    line_chart(&format!("{} — {}", cfg.name, name), &xlabel, &ylabel, &curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::scenario_dam_break;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = nice_ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.len() >= 3 && t.len() <= 7);
        let t = nice_ticks(-0.013, 0.041);
        assert!(t.iter().all(|&v| (-0.013..=0.041).contains(&v)));
    }

    #[test]
    fn front_plot_overlays_ritter() {
        let cfg = scenario_dam_break(0.0029);
        let series = ProbeSeries {
            headers: vec!["front [m]".into()],
            times: vec![0.0, 0.05, 0.1],
            rows: vec![vec![0.057], vec![0.08], vec![0.12]],
        };
        let svg = probe_plot(&cfg, &series, 0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("x / H"));
        assert!(svg.contains("Ritter"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        let mut plain = cfg.clone();
        plain.nondim = None;
        let svg = probe_plot(&plain, &series, 0);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("t [s]"));
    }
}
