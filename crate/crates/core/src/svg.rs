//! Small deterministic SVG plotter for run artifacts.
//!
//! Renders line and bar panels into a fixed grid with axes, tick labels,
//! optional horizontal guides (confidence bands) and a legend. Output is a
//! pure function of the input — numbers are formatted with fixed precision,
//! so re-rendering the same data gives byte-identical files.

use std::fmt::Write;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const MARGIN_LEFT: f64 = 52.0;
const MARGIN_RIGHT: f64 = 12.0;
const MARGIN_TOP: f64 = 26.0;
const MARGIN_BOTTOM: f64 = 34.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelKind {
    Lines,
    Bars,
}

#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> PlotSeries {
        PlotSeries { label: label.into(), points }
    }
}

#[derive(Debug, Clone)]
pub struct PlotPanel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: PanelKind,
    pub series: Vec<PlotSeries>,
    /// Dashed horizontal guide lines (e.g. a confidence band at ±y).
    pub guides: Vec<f64>,
}

impl PlotPanel {
    pub fn lines(title: impl Into<String>) -> PlotPanel {
        PlotPanel {
            title: title.into(),
            x_label: String::new(),
            y_label: String::new(),
            kind: PanelKind::Lines,
            series: Vec::new(),
            guides: Vec::new(),
        }
    }

    pub fn bars(title: impl Into<String>) -> PlotPanel {
        PlotPanel { kind: PanelKind::Bars, ..PlotPanel::lines(title) }
    }

    pub fn with_axis_labels(mut self, x: impl Into<String>, y: impl Into<String>) -> PlotPanel {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    pub fn with_series(mut self, series: PlotSeries) -> PlotPanel {
        self.series.push(series);
        self
    }

    pub fn with_guides(mut self, guides: Vec<f64>) -> PlotPanel {
        self.guides = guides;
        self
    }

    fn finite_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    }
}

struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut r = Range { min: f64::INFINITY, max: f64::NEG_INFINITY };
        for v in values {
            r.min = r.min.min(v);
            r.max = r.max.max(v);
        }
        if !r.min.is_finite() || !r.max.is_finite() {
            return Range { min: 0.0, max: 1.0 };
        }
        if r.max - r.min < 1e-12 {
            r.min -= 1.0;
            r.max += 1.0;
        }
        r
    }

    fn padded(mut self, frac: f64) -> Range {
        let pad = (self.max - self.min) * frac;
        self.min -= pad;
        self.max += pad;
        self
    }

    fn map(&self, v: f64, lo_px: f64, hi_px: f64) -> f64 {
        lo_px + (v - self.min) / (self.max - self.min) * (hi_px - lo_px)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a < 0.01 || a >= 100_000.0) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn render_panel(out: &mut String, panel: &PlotPanel, width: f64, height: f64) {
    let x0 = MARGIN_LEFT;
    let x1 = width - MARGIN_RIGHT;
    let y0 = height - MARGIN_BOTTOM; // svg y grows downward; y0 = axis line
    let y1 = MARGIN_TOP;

    let xr = Range::of(panel.finite_points().map(|(x, _)| x)).padded(0.02);
    let mut yvals: Vec<f64> = panel.finite_points().map(|(_, y)| y).collect();
    yvals.extend(panel.guides.iter().copied().filter(|g| g.is_finite()));
    if panel.kind == PanelKind::Bars {
        yvals.push(0.0);
    }
    let yr = Range::of(yvals.into_iter()).padded(0.06);

    let _ = write!(
        out,
        "<rect x=\"{x0:.2}\" y=\"{y1:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"white\" stroke=\"#888888\" stroke-width=\"1\"/>",
        x1 - x0,
        y0 - y1
    );
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" \
         font-family=\"monospace\">{}</text>",
        (x0 + x1) / 2.0,
        y1 - 8.0,
        escape(&panel.title)
    );

    // Axis ticks: min, mid, max on both axes.
    for frac in [0.0, 0.5, 1.0] {
        let xv = xr.min + (xr.max - xr.min) * frac;
        let xp = xr.map(xv, x0, x1);
        let _ = write!(
            out,
            "<line x1=\"{xp:.2}\" y1=\"{y0:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" \
             stroke=\"#888888\" stroke-width=\"1\"/>",
            y0 + 4.0
        );
        let _ = write!(
            out,
            "<text x=\"{xp:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\" \
             font-family=\"monospace\">{}</text>",
            y0 + 16.0,
            fmt_tick(xv)
        );
        let yv = yr.min + (yr.max - yr.min) * frac;
        let yp = yr.map(yv, y0, y1);
        let _ = write!(
            out,
            "<line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{x0:.2}\" y2=\"{yp:.2}\" \
             stroke=\"#888888\" stroke-width=\"1\"/>",
            x0 - 4.0
        );
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\" \
             font-family=\"monospace\">{}</text>",
            x0 - 6.0,
            yp + 3.0,
            fmt_tick(yv)
        );
    }
    if !panel.x_label.is_empty() {
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\" \
             font-family=\"monospace\">{}</text>",
            (x0 + x1) / 2.0,
            y0 + 30.0,
            escape(&panel.x_label)
        );
    }
    if !panel.y_label.is_empty() {
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\" \
             font-family=\"monospace\" transform=\"rotate(-90 {:.2} {:.2})\">{}</text>",
            x0 - 38.0,
            (y0 + y1) / 2.0,
            x0 - 38.0,
            (y0 + y1) / 2.0,
            escape(&panel.y_label)
        );
    }

    for &guide in &panel.guides {
        if !guide.is_finite() || guide < yr.min || guide > yr.max {
            continue;
        }
        let yp = yr.map(guide, y0, y1);
        let _ = write!(
            out,
            "<line x1=\"{x0:.2}\" y1=\"{yp:.2}\" x2=\"{x1:.2}\" y2=\"{yp:.2}\" \
             stroke=\"#555555\" stroke-width=\"1\" stroke-dasharray=\"4,3\"/>"
        );
    }

    for (i, series) in panel.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = series
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        match panel.kind {
            PanelKind::Lines => {
                if pts.len() < 2 {
                    continue;
                }
                let mut path = String::new();
                for (x, y) in &pts {
                    let _ = write!(
                        path,
                        "{:.2},{:.2} ",
                        xr.map(*x, x0, x1),
                        yr.map(*y, y0, y1)
                    );
                }
                let _ = write!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                     stroke-width=\"1\"/>",
                    path.trim_end()
                );
            }
            PanelKind::Bars => {
                let base = yr.map(0.0f64.clamp(yr.min, yr.max), y0, y1);
                let slot = (x1 - x0) / pts.len().max(1) as f64;
                let w = (slot * 0.6 / panel.series.len() as f64).max(1.0);
                for (x, y) in &pts {
                    let xp = xr.map(*x, x0, x1) - w * panel.series.len() as f64 / 2.0
                        + i as f64 * w;
                    let yp = yr.map(*y, y0, y1);
                    let (top, h) = if yp < base { (yp, base - yp) } else { (base, yp - base) };
                    let _ = write!(
                        out,
                        "<rect x=\"{xp:.2}\" y=\"{top:.2}\" width=\"{w:.2}\" \
                         height=\"{h:.2}\" fill=\"{color}\"/>"
                    );
                }
            }
        }
    }

    // Legend only when there is something to distinguish.
    if panel.series.len() > 1 {
        for (i, series) in panel.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let ly = y1 + 12.0 + i as f64 * 12.0;
            let _ = write!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"4\" fill=\"{color}\"/>",
                x1 - 86.0,
                ly - 4.0
            );
            let _ = write!(
                out,
                "<text x=\"{:.2}\" y=\"{ly:.2}\" font-size=\"9\" \
                 font-family=\"monospace\">{}</text>",
                x1 - 72.0,
                escape(&series.label)
            );
        }
    }
}

/// Render panels into a fixed grid, `cols` across.
pub fn render_grid(panels: &[PlotPanel], cols: usize, panel_w: u32, panel_h: u32) -> String {
    assert!(cols >= 1);
    let rows = panels.len().div_ceil(cols);
    let width = cols as u32 * panel_w;
    let height = rows.max(1) as u32 * panel_h;
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    let _ = write!(out, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    for (i, panel) in panels.iter().enumerate() {
        let gx = (i % cols) as u32 * panel_w;
        let gy = (i / cols) as u32 * panel_h;
        let _ = write!(out, "<g transform=\"translate({gx} {gy})\">");
        render_panel(&mut out, panel, panel_w as f64, panel_h as f64);
        let _ = write!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_single(panel: &PlotPanel, width: u32, height: u32) -> String {
    render_grid(std::slice::from_ref(panel), 1, width, height)
}

/// Equal-width histogram of `values` as (bin center, count) points.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64)> {
    assert!(bins >= 1);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Vec::new();
    }
    let r = Range::of(finite.iter().copied());
    let width = (r.max - r.min) / bins as f64;
    let mut counts = vec![0u64; bins];
    for v in &finite {
        let idx = (((v - r.min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (r.min + (i as f64 + 0.5) * width, c as f64))
        .collect()
}
