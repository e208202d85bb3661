//! Minimal SVG bar charts with standard-deviation whiskers.

use std::fmt::Write as _;

pub const CHART_WIDTH: u32 = 640;
pub const CHART_HEIGHT: u32 = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct Bar {
    pub label: String,
    pub mean: f64,
    pub std: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one bar per entry; non-finite bars are drawn as empty slots.
pub fn bar_chart_svg(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let (w, h) = (CHART_WIDTH as f64, CHART_HEIGHT as f64);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 110.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let y_max = bars
        .iter()
        .filter(|b| b.mean.is_finite())
        .map(|b| b.mean + if b.std.is_finite() { b.std } else { 0.0 })
        .fold(0.0f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
    let y = |v: f64| top + plot_h * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_WIDTH}" height="{CHART_HEIGHT}" viewBox="0 0 {CHART_WIDTH} {CHART_HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            w - right,
            left - 4.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/><line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h,
        top + plot_h,
        w - right,
        top + plot_h
    );
    let slot = plot_w / bars.len().max(1) as f64;
    for (i, b) in bars.iter().enumerate() {
        let cx = left + slot * (i as f64 + 0.5);
        let bw = slot * 0.6;
        if b.mean.is_finite() {
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{:.1}" width="{bw:.1}" height="{:.1}" fill="#4e79a7"/>"##,
                cx - bw / 2.0,
                y(b.mean.max(0.0)),
                (y(0.0) - y(b.mean.max(0.0))).max(0.0)
            );
            if b.std.is_finite() && b.std > 0.0 {
                let (lo, hi) = (y((b.mean - b.std).max(0.0)), y(b.mean + b.std));
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx:.1}" y1="{lo:.1}" x2="{cx:.1}" y2="{hi:.1}" stroke="black"/><line x1="{:.1}" y1="{hi:.1}" x2="{:.1}" y2="{hi:.1}" stroke="black"/><line x1="{:.1}" y1="{lo:.1}" x2="{:.1}" y2="{lo:.1}" stroke="black"/>"#,
                    cx - 5.0,
                    cx + 5.0,
                    cx - 5.0,
                    cx + 5.0
                );
            }
        }
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-40 {cx:.1} {ly:.1})">{}</text>"#,
            escape(&b.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
