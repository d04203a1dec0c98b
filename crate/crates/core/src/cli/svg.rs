use std::fmt::Write;

use crate::oneway::MedianPoint;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const K_TICK: u32 = 25;

fn nice_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of `log₁₀(median F)` against `k`.
pub fn median_curve_svg(points: &[MedianPoint], title: &str) -> String {
    let k_min = points.first().map_or(1, |p| p.k);
    let k_max = points.last().map_or(1, |p| p.k).max(k_min + 1);
    let ys: Vec<f64> = points.iter().map(MedianPoint::median_log10_f).collect();
    let (mut y_lo, mut y_hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if !y_lo.is_finite() || y_hi - y_lo < 1e-12 {
        y_lo = if y_lo.is_finite() { y_lo - 1.0 } else { 0.0 };
        y_hi = y_lo + 2.0;
    }
    let step = nice_step(y_hi - y_lo);
    let y_lo = (y_lo / step).floor() * step;
    let y_hi = (y_hi / step).ceil() * step;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |k: f64| LEFT + (k - f64::from(k_min)) / f64::from(k_max - k_min) * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1" fill="none"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = TOP + plot_h,
        r = LEFT + plot_w
    );

    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="12" fill="black">"#);
    let first_tick = k_min.div_ceil(K_TICK) * K_TICK;
    let mut k = first_tick;
    while k <= k_max {
        let x = px(f64::from(k));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="black"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{k}</text>"#,
            y0 = TOP + plot_h,
            y1 = TOP + plot_h + 6.0,
            ty = TOP + plot_h + 22.0
        );
        k += K_TICK;
    }
    let ticks = ((y_hi - y_lo) / step).round() as i64;
    for i in 0..=ticks {
        let v = y_lo + i as f64 * step;
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{label}</text>"#,
            x0 = LEFT - 6.0,
            tx = LEFT - 10.0,
            ty = y + 4.0,
            label = format_tick(v, step)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">k (number of groups)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="24" y="{cy}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 24 {cy})">log10 median Bayes factor</text>"#,
        cy = TOP + plot_h / 2.0
    );

    let coords: Vec<String> = points
        .iter()
        .zip(&ys)
        .map(|(p, &y)| format!("{:.2},{:.2}", px(f64::from(p.k)), py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        coords.join(" ")
    );
    let _ = writeln!(s, "</svg>");
    s
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = (0..6)
        .find(|&d| {
            let scaled = step * 10f64.powi(d as i32);
            (scaled - scaled.round()).abs() < 1e-9
        })
        .unwrap_or(6);
    let out = format!("{v:.decimals$}");
    if out.starts_with('-') && out.trim_start_matches(['-', '0', '.']).is_empty() {
        out[1..].to_owned()
    } else {
        out
    }
}
