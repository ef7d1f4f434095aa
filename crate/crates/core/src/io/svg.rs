//! Minimal self-contained SVG charts: grouped bars, lines, and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn short(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

struct Frame {
    out: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut out = String::new();
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = write!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
        let _ = write!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
        let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
        let _ = write!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
        let _ = write!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 15.0,
            escape(x_label)
        );
        let _ = write!(
            out,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        let mut f = Self { out, x, y };
        for k in 0..=4 {
            let v = y.0 + (y.1 - y.0) * k as f64 / 4.0;
            let py = f.py(v);
            let _ = write!(f.out, r#"<line x1="{}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>"#, x0 - 4.0);
            let _ = write!(f.out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 6.0, py + 4.0, short(v));
        }
        f
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn x_ticks(&mut self) {
        for k in 0..=4 {
            let v = self.x.0 + (self.x.1 - self.x.0) * k as f64 / 4.0;
            let px = self.px(v);
            let y0 = H - BOTTOM;
            let _ = write!(self.out, r#"<line x1="{px}" y1="{y0}" x2="{px}" y2="{}" stroke="black"/>"#, y0 + 4.0);
            let _ = write!(self.out, r#"<text x="{px}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, short(v));
        }
    }

    fn legend(&mut self, names: &[&str]) {
        for (i, name) in names.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = W - RIGHT + 12.0;
            let _ = write!(self.out, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#, y - 10.0, PALETTE[i % PALETTE.len()]);
            let _ = write!(self.out, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(name));
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Grouped bars, one group per category and one bar per series.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[(String, Vec<f64>)]) -> String {
    let (lo, hi) = range(series.iter().flat_map(|s| s.1.iter().copied()).chain(std::iter::once(0.0)));
    let mut f = Frame::new(title, "", y_label, (0.0, categories.len().max(1) as f64), (lo.min(0.0), hi));
    let group = f.px(1.0) - f.px(0.0);
    let bar = 0.8 * group / series.len().max(1) as f64;
    for (c, name) in categories.iter().enumerate() {
        let gx = f.px(c as f64) + 0.1 * group;
        for (s, (_, vals)) in series.iter().enumerate() {
            let Some(&v) = vals.get(c) else { continue };
            let (y_top, y_base) = (f.py(v.max(0.0)), f.py(v.min(0.0)));
            let _ = write!(
                f.out,
                r#"<rect x="{}" y="{y_top}" width="{bar}" height="{}" fill="{}"/>"#,
                gx + bar * s as f64,
                (y_base - y_top).max(0.0),
                PALETTE[s % PALETTE.len()]
            );
        }
        let _ = write!(
            f.out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            f.px(c as f64 + 0.5),
            H - BOTTOM + 18.0,
            escape(name)
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.0.as_str()).collect();
    f.legend(&names);
    f.finish()
}

/// Polylines; a single-point series is drawn as a dot.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let xr = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let yr = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut f = Frame::new(title, x_label, y_label, xr, yr);
    f.x_ticks();
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let finite: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        if finite.len() == 1 {
            let _ = write!(f.out, r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#, f.px(finite[0].0), f.py(finite[0].1));
            continue;
        }
        let mut d = String::new();
        for (k, (x, y)) in finite.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, f.px(*x), f.py(*y));
        }
        if !d.is_empty() {
            let _ = write!(f.out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
        }
    }
    let names: Vec<&str> = series.iter().map(|s| s.0.as_str()).collect();
    f.legend(&names);
    f.finish()
}

fn ramp(t: f64) -> (u8, u8, u8) {
    ((255.0 * t) as u8, (80.0 + 100.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8, (255.0 * (1.0 - t)) as u8)
}

/// Heatmap of `values[iy][ix]` over the `xs × ys` grid.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], values: &[Vec<f64>]) -> String {
    let xr = range(xs.iter().copied());
    let yr = range(ys.iter().copied());
    let (vlo, vhi) = range(values.iter().flatten().copied());
    let mut f = Frame::new(title, x_label, y_label, xr, yr);
    f.x_ticks();
    let cw = (W - LEFT - RIGHT) / xs.len().max(1) as f64;
    let ch = (H - TOP - BOTTOM) / ys.len().max(1) as f64;
    for (iy, row) in values.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            let t = ((v - vlo) / (vhi - vlo)).clamp(0.0, 1.0);
            let (r, g, b) = ramp(t);
            let x = LEFT + cw * ix as f64;
            let y = H - BOTTOM - ch * (iy + 1) as f64;
            let _ = write!(f.out, r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#, cw + 0.3, ch + 0.3);
        }
    }
    let lx = W - RIGHT + 20.0;
    let steps = 10;
    let sh = (H - TOP - BOTTOM - 30.0) / steps as f64;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let (r, g, b) = ramp(t);
        let _ = write!(f.out, r#"<rect x="{lx}" y="{:.2}" width="14" height="{:.2}" fill="rgb({r},{g},{b})"/>"#, TOP + 16.0 + sh * k as f64, sh + 0.3);
    }
    let _ = write!(f.out, r#"<text x="{}" y="{}">{}</text>"#, lx + 18.0, TOP + 26.0, short(vhi));
    let _ = write!(f.out, r#"<text x="{}" y="{}">{}</text>"#, lx + 18.0, H - BOTTOM - 14.0, short(vlo));
    f.finish()
}
