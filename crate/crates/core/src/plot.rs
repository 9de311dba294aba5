//! Self-contained SVG line plots and heatmaps.

use std::fmt::Write;

use crate::metrics::{BoundaryGrid, ReliabilityRow};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Optional symmetric error bars.
    pub err: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Draw the identity line (for reliability plots).
    pub diagonal: bool,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (W - RIGHT + LEFT) / 2.0,
        esc(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = write!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = write!(
            out,
            r#"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y1 + 4.0,
            y1 + 18.0,
            tick(xv)
        );
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        esc(x_label)
    );
    let _ = write!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn line_plot(plot: &LinePlot) -> String {
    let all_x = plot.series.iter().flat_map(|s| s.xs.iter().copied());
    let all_y = plot.series.iter().flat_map(|s| {
        let err = s.err.clone().unwrap_or_else(|| vec![0.0; s.ys.len()]);
        s.ys.iter()
            .zip(err)
            .flat_map(|(y, e)| [y - e, y + e])
            .collect::<Vec<_>>()
    });
    let (mut xb, mut yb) = (bounds(all_x), bounds(all_y));
    if plot.diagonal {
        xb = (xb.0.min(0.0), xb.1.max(1.0));
        yb = (yb.0.min(0.0), yb.1.max(1.0));
    }
    let f = Frame { x: xb, y: yb };
    let mut out = String::new();
    header(&mut out, &plot.title);
    axes(&mut out, &f, &plot.x_label, &plot.y_label);
    if plot.diagonal {
        let _ = write!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            f.px(0.0),
            f.py(0.0),
            f.px(1.0),
            f.py(1.0)
        );
    }
    for (k, s) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> =
            s.xs.iter()
                .zip(&s.ys)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                .collect();
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
            pts.join(" ")
        );
        if let Some(err) = &s.err {
            for ((&x, &y), &e) in s.xs.iter().zip(&s.ys).zip(err) {
                if e > 0.0 && y.is_finite() {
                    let _ = write!(
                        out,
                        r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}" stroke-opacity="0.4"/>"#,
                        f.px(x),
                        f.py(y - e),
                        f.py(y + e)
                    );
                }
            }
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = write!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            esc(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Reliability diagram: mean score against positive rate per populated bin.
pub fn reliability_plot(title: &str, curves: &[(String, Vec<ReliabilityRow>)]) -> String {
    let series = curves
        .iter()
        .map(|(name, rows)| {
            let (xs, ys) = rows
                .iter()
                .filter_map(|r| Some((r.mean_score?, r.positive_rate?)))
                .unzip();
            Series {
                name: name.clone(),
                xs,
                ys,
                err: None,
            }
        })
        .collect();
    line_plot(&LinePlot {
        title: title.into(),
        x_label: "mean predicted probability".into(),
        y_label: "observed positive rate".into(),
        series,
        diagonal: true,
    })
}

fn color(score: f64) -> String {
    // Blue (0) to white (0.5) to red (1).
    let s = score.clamp(0.0, 1.0);
    let (r, g, b) = if s < 0.5 {
        let t = s / 0.5;
        (40.0 + 215.0 * t, 90.0 + 165.0 * t, 200.0 + 55.0 * t)
    } else {
        let t = (s - 0.5) / 0.5;
        (255.0 - 35.0 * t, 255.0 - 195.0 * t, 255.0 - 205.0 * t)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Heatmap of a boundary grid with its 0.5 contour and optional labelled
/// points `(x, y, class)`.
pub fn boundary_plot(title: &str, grid: &BoundaryGrid, points: &[(f64, f64, usize)]) -> String {
    let nx = grid.xs.len();
    let ny = grid.ys.len();
    let half = |v: &[f64]| {
        if v.len() > 1 {
            (v[1] - v[0]) / 2.0
        } else {
            0.5
        }
    };
    let (hx, hy) = (half(&grid.xs), half(&grid.ys));
    let f = Frame {
        x: (grid.xs[0] - hx, grid.xs[nx - 1] + hx),
        y: (grid.ys[0] - hy, grid.ys[ny - 1] + hy),
    };
    let mut out = String::new();
    header(&mut out, title);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (grid.xs[i], grid.ys[j]);
            let (x0, x1) = (f.px(x - hx), f.px(x + hx));
            let (y0, y1) = (f.py(y + hy), f.py(y - hy));
            let _ = write!(
                out,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x1 - x0 + 0.3,
                y1 - y0 + 0.3,
                color(grid.at(i, j))
            );
        }
    }
    for seg in contour_segments(grid, 0.5) {
        let _ = write!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#,
            f.px(seg.0 .0),
            f.py(seg.0 .1),
            f.px(seg.1 .0),
            f.py(seg.1 .1)
        );
    }
    for &(x, y, c) in points {
        if x < f.x.0 || x > f.x.1 || y < f.y.0 || y > f.y.1 {
            continue;
        }
        let fill = if c == 1 { "#d62728" } else { "#1f77b4" };
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}" stroke="black" stroke-width="0.6"/>"#,
            f.px(x),
            f.py(y)
        );
    }
    axes(&mut out, &f, "x1", "x2");
    out.push_str("</svg>\n");
    out
}

type Segment = ((f64, f64), (f64, f64));

/// Marching-squares segments of the `level` set.
fn contour_segments(grid: &BoundaryGrid, level: f64) -> Vec<Segment> {
    let mut segs = Vec::new();
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let corners = [
                (grid.xs[i], grid.ys[j], grid.at(i, j)),
                (grid.xs[i + 1], grid.ys[j], grid.at(i + 1, j)),
                (grid.xs[i + 1], grid.ys[j + 1], grid.at(i + 1, j + 1)),
                (grid.xs[i], grid.ys[j + 1], grid.at(i, j + 1)),
            ];
            let mut hits = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                if (a.2 >= level) != (b.2 >= level) {
                    let t = (level - a.2) / (b.2 - a.2);
                    hits.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
                }
            }
            for pair in hits.chunks_exact(2) {
                segs.push((pair[0], pair[1]));
            }
        }
    }
    segs
}
