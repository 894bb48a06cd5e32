//! Static isoFLOP plot: metric against model size on a log axis, one
//! polyline per budget, and the baseline band when one is given.

use std::fmt::Write;

use scalefit_core::{BaselineStats, IsoFlopCurve};

use crate::report::sig4;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
            (lo - pad, hi + pad)
        };
        Axis { lo, hi, px_lo, px_hi }
    }

    fn px(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the curves. Output depends only on the inputs.
pub fn isoflop_svg(curves: &[IsoFlopCurve], baseline: Option<&BaselineStats>, title: &str) -> String {
    let points = curves.iter().flat_map(|c| c.points.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x_lo = x_lo.min(p.n.log10());
        x_hi = x_hi.max(p.n.log10());
        y_lo = y_lo.min(p.mean);
        y_hi = y_hi.max(p.mean);
    }
    if let Some(b) = baseline {
        y_lo = y_lo.min(b.mean - b.std);
        y_hi = y_hi.max(b.mean + b.std);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    let x_lo = x_lo.floor();
    let x_hi = x_hi.ceil().max(x_lo + 1.0);
    let pad = (y_hi - y_lo) * 0.05;
    let x = Axis::new(x_lo, x_hi, LEFT, WIDTH - RIGHT);
    let y = Axis::new(y_lo - pad, y_hi + pad, HEIGHT - BOTTOM, TOP);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));

    if let Some(b) = baseline {
        let top = y.px(b.mean + b.std);
        let bottom = y.px(b.mean - b.std);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#999999" fill-opacity="0.25"/>"##,
            x.px_lo,
            top,
            x.px_hi - x.px_lo,
            (bottom - top).max(0.5)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#666666" stroke-dasharray="4 3"/>"##,
            x.px_lo,
            y.px(b.mean),
            x.px_hi,
            y.px(b.mean)
        );
    }

    // Axes, decade ticks on x, five ticks on y.
    let _ = writeln!(
        s,
        r#"<path d="M{:.2},{:.2} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        x.px_lo,
        y.px_hi,
        y.px_lo,
        x.px_hi
    );
    let mut decade = x_lo as i32;
    while decade as f64 <= x_hi {
        let px = x.px(decade as f64);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y.px_lo, y.px_lo + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">1e{decade}</text>"#, y.px_lo + 19.0);
        decade += 1;
    }
    for i in 0..=4 {
        let v = y.lo + (y.hi - y.lo) * i as f64 / 4.0;
        let py = y.px(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black"/>"#, x.px_lo - 5.0, x.px_lo);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x.px_lo - 8.0, py + 4.0, sig4(v));
    }
    let metric = curves.first().map(|c| c.metric.as_str()).unwrap_or("metric");
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">model size N</text>"#,
        (x.px_lo + x.px_hi) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y.px_lo + y.px_hi) / 2.0,
        (y.px_lo + y.px_hi) / 2.0,
        escape(metric)
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .by_model_size()
            .iter()
            .map(|p| format!("{:.2},{:.2}", x.px(p.n.log10()), y.px(p.mean)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        for p in &pts {
            let (cx, cy) = p.split_once(',').expect("formatted above");
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
        }
        let ly = TOP + 16.0 * i as f64 + 8.0;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">C={}</text>"#, lx + 24.0, ly + 4.0, sig4(c.compute));
    }
    s.push_str("</svg>\n");
    s
}
