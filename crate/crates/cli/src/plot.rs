//! Minimal SVG plot emission: encoder overlays, decoder heatmaps, and
//! SNR-vs-CSNR curves. No display dependencies; each plot is one
//! self-contained SVG document.

use std::fmt::Write as _;

use zdsc_core::harness::SweepRecord;
use zdsc_core::{DecoderTable, StructuredEncoder, TabulatedEncoder};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    body: String,
}

impl Frame {
    fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            body: String::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * MARGIN)
    }

    fn polyline(&mut self, points: &[(f64, f64)], style: &str) {
        let mut d = String::new();
        for &(x, y) in points {
            let _ = write!(d, "{:.2},{:.2} ", self.px(x), self.py(y));
        }
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" points="{}" {} />"#,
            d.trim_end(),
            style
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}" fill-opacity="{:.2}"/>"#,
            self.px(x),
            self.py(y),
            r,
            fill,
            opacity
        );
    }

    fn raw_rect(&mut self, px: f64, py: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{px:.2}" y="{py:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn label(&mut self, px: f64, py: f64, anchor: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{px:.1}" y="{py:.1}" font-size="12" font-family="sans-serif" text-anchor="{anchor}">{text}</text>"#
        );
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let _ = writeln!(
            self.body,
            r##"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="#333" stroke-width="1"/>"##,
            m = MARGIN,
            w = WIDTH - 2.0 * MARGIN,
            h = HEIGHT - 2.0 * MARGIN
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x_lo + t * (self.x_hi - self.x_lo);
            let yv = self.y_lo + t * (self.y_hi - self.y_lo);
            self.label(self.px(xv), HEIGHT - MARGIN + 16.0, "middle", &format!("{xv:.3}"));
            self.label(MARGIN - 6.0, self.py(yv) + 4.0, "end", &format!("{yv:.3}"));
        }
        self.label(WIDTH / 2.0, HEIGHT - 12.0, "middle", x_label);
        let _ = writeln!(
            self.body,
            r#"<text x="14" y="{}" font-size="12" font-family="sans-serif" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            y_label
        );
    }

    fn render(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 1.0, c + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Encoder overlay: hardened mapping (solid black), association-averaged
/// mapping (gray), and for annealed runs each local model as a dotted line
/// with dots sized by the association probability.
pub fn encoder_svg(
    hardened: &TabulatedEncoder,
    averaged: Option<&TabulatedEncoder>,
    structured: Option<&StructuredEncoder>,
) -> String {
    let xs = hardened.x_grid().values();
    let (y_lo, y_hi) = range_of(
        hardened
            .g_values()
            .iter()
            .chain(averaged.map(|a| a.g_values()).unwrap_or(&[]).iter())
            .copied(),
    );
    let mut f = Frame::new(hardened.x_grid().lo(), hardened.x_grid().hi(), y_lo, y_hi);
    f.axes("x (source)", "g(x) (channel)");

    let palette = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    ];
    if let Some(s) = structured {
        for (k, m) in s.models().iter().enumerate() {
            let color = palette[k % palette.len()];
            let line: Vec<(f64, f64)> = xs
                .iter()
                .map(|&x| (x, (m.eval(x)).clamp(y_lo, y_hi)))
                .collect();
            f.polyline(
                &line,
                &format!(r#"stroke="{color}" stroke-width="1" stroke-dasharray="3 4""#),
            );
            for (i, &x) in xs.iter().enumerate().step_by(4) {
                let p = s.assoc()[[k, i]];
                if p > 1e-3 {
                    let g = m.eval(x);
                    if g >= y_lo && g <= y_hi {
                        f.circle(x, g, 1.0 + 3.0 * p, color, 0.55);
                    }
                }
            }
        }
    }
    if let Some(avg) = averaged {
        let pts: Vec<(f64, f64)> = xs.iter().zip(avg.g_values()).map(|(&x, &g)| (x, g)).collect();
        f.polyline(&pts, r##"stroke="#999999" stroke-width="1.5""##);
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(hardened.g_values())
        .map(|(&x, &g)| (x, g))
        .collect();
    f.polyline(&pts, r#"stroke="black" stroke-width="2""#);
    f.render()
}

fn heat_color(t: f64) -> String {
    // Blue -> white -> red diverging map on [0, 1].
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (
            (59.0 + u * (255.0 - 59.0)) as u8,
            (76.0 + u * (255.0 - 76.0)) as u8,
            (192.0 + u * (255.0 - 192.0)) as u8,
        )
    } else {
        let u = (t - 0.5) / 0.5;
        (
            255.0 as u8,
            (255.0 - u * (255.0 - 76.0)) as u8,
            (255.0 - u * (255.0 - 60.0)) as u8,
        )
    };
    format!("rgb({r},{g},{b})")
}

/// Decoder heatmap over (y, z), colored by the estimate.
pub fn decoder_svg(dec: &DecoderTable) -> String {
    let ys = dec.y_grid().values();
    let zs = dec.z_grid().values();
    let (v_lo, v_hi) = range_of(dec.xhat().iter().copied());
    let mut f = Frame::new(dec.y_grid().lo(), dec.y_grid().hi(), dec.z_grid().lo(), dec.z_grid().hi());
    let cell_w = (WIDTH - 2.0 * MARGIN) / (ys.len() - 1) as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / (zs.len() - 1) as f64;
    for j in 0..ys.len() - 1 {
        for m in 0..zs.len() - 1 {
            let v = dec.xhat()[[j, m]];
            let t = (v - v_lo) / (v_hi - v_lo);
            let px = f.px(ys[j]);
            let py = f.py(zs[m + 1]);
            f.raw_rect(px, py, cell_w + 0.5, cell_h + 0.5, &heat_color(t));
        }
    }
    f.axes("y (channel output)", "z (side information)");
    f.render()
}

/// SNR-vs-CSNR comparison: lines for the single-valued methods, scatter for
/// per-seed restarts.
pub fn curves_svg(records: &[SweepRecord]) -> String {
    let points: Vec<_> = records.iter().filter_map(|r| r.point.as_ref()).collect();
    let (x_lo, x_hi) = range_of(points.iter().map(|p| p.csnr_db));
    let (y_lo, y_hi) = range_of(points.iter().map(|p| p.snr_db));
    let mut f = Frame::new(x_lo, x_hi, y_lo, y_hi);
    f.axes("CSNR (dB)", "SNR (dB)");

    let style = |method: &str| -> (&'static str, bool) {
        match method {
            "opta" => ("#000000", true),
            "linear" => ("#7f7f7f", true),
            "da" => ("#d62728", true),
            "ncr" => ("#1f77b4", false),
            _ => ("#2ca02c", false),
        }
    };
    let mut methods: Vec<String> = points.iter().map(|p| p.method.clone()).collect();
    methods.sort();
    methods.dedup();
    for (mi, method) in methods.iter().enumerate() {
        let (color, as_line) = style(method);
        let mut pts: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| &p.method == method)
            .map(|p| (p.csnr_db, p.snr_db))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if as_line && pts.len() > 1 {
            f.polyline(&pts, &format!(r#"stroke="{color}" stroke-width="2""#));
        }
        for &(x, y) in &pts {
            f.circle(x, y, 3.5, color, 0.9);
        }
        let ly = MARGIN + 16.0 + 16.0 * mi as f64;
        f.raw_rect(WIDTH - MARGIN - 110.0, ly - 9.0, 10.0, 10.0, color);
        f.label(WIDTH - MARGIN - 94.0, ly, "start", method);
    }
    f.render()
}
