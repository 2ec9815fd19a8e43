//! Minimal hand-rolled SVG plots: polyline charts and histogram bars.
//!
//! Output is plain text with fixed float formatting, so two renders of the
//! same data are byte-identical and plots diff cleanly in version control.

use crate::numerics::write_atomic;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 18.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;
const TICKS: usize = 5;
const PALETTE: [&str; 4] = ["#1f6fb2", "#c84b31", "#3a7d44", "#7b5aa6"];

/// One labeled polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points }
    }
}

/// A line chart with axes, ticks and a legend.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Explicit axis range; data extent (padded) when absent.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl LinePlot {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        LinePlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            x_range: None,
            y_range: None,
        }
    }

    pub fn with_series(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    pub fn with_ranges(mut self, x: (f64, f64), y: (f64, f64)) -> Self {
        self.x_range = Some(x);
        self.y_range = Some(y);
        self
    }

    pub fn render(&self) -> Result<String> {
        if self.series.iter().all(|s| s.points.is_empty()) {
            return Err(Error::DegenerateInput("nothing to plot".into()));
        }
        for s in &self.series {
            if s.points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::Numeric(format!("non-finite point in series {}", s.label)));
            }
        }
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
        let ys = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
        let x_range = checked_range(self.x_range, xs)?;
        let y_range = checked_range(self.y_range, ys)?;

        let mut svg = svg_open(&self.title, &self.x_label, &self.y_label, x_range, y_range);
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", fmt(to_px_x(x, x_range)), fmt(to_px_y(y, y_range))))
                .collect();
            let _ = writeln!(
                svg,
                "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                coords.join(" ")
            );
            if self.series.len() > 1 || !s.label.is_empty() {
                let _ = writeln!(
                    svg,
                    "  <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>",
                    fmt(MARGIN_LEFT + 8.0),
                    fmt(MARGIN_TOP + 14.0 + 13.0 * i as f64),
                    escape(&s.label)
                );
            }
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render()?.as_bytes())
    }
}

/// A histogram rendered as adjacent bars, one per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BarPlot {
    pub title: String,
    pub x_label: String,
    /// `(bin_lo, bin_hi, count)` rows, e.g. from `Histogram::rows`.
    pub bars: Vec<(f64, f64, u64)>,
}

impl BarPlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, bars: Vec<(f64, f64, u64)>) -> Self {
        BarPlot { title: title.into(), x_label: x_label.into(), bars }
    }

    pub fn render(&self) -> Result<String> {
        if self.bars.is_empty() {
            return Err(Error::DegenerateInput("nothing to plot".into()));
        }
        if self.bars.iter().any(|&(lo, hi, _)| !lo.is_finite() || !hi.is_finite() || hi <= lo) {
            return Err(Error::Numeric("histogram bins must be finite and ordered".into()));
        }
        let x_range = (self.bars[0].0, self.bars[self.bars.len() - 1].1);
        let max_count = self.bars.iter().map(|b| b.2).max().unwrap().max(1);
        let y_range = (0.0, max_count as f64);

        let mut svg = svg_open(&self.title, &self.x_label, "count", x_range, y_range);
        for &(lo, hi, count) in &self.bars {
            let x0 = to_px_x(lo, x_range);
            let x1 = to_px_x(hi, x_range);
            let y1 = to_px_y(count as f64, y_range);
            let y0 = to_px_y(0.0, y_range);
            let _ = writeln!(
                svg,
                "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\" stroke-width=\"0.3\"/>",
                fmt(x0),
                fmt(y1),
                fmt(x1 - x0),
                fmt(y0 - y1),
                PALETTE[0]
            );
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render()?.as_bytes())
    }
}

fn checked_range(
    explicit: Option<(f64, f64)>,
    values: impl Iterator<Item = f64>,
) -> Result<(f64, f64)> {
    let (lo, hi) = match explicit {
        Some(r) => r,
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            // A flat series still deserves a drawable band.
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Config(format!("bad axis range {lo}..{hi}")));
    }
    Ok((lo, hi))
}

fn to_px_x(x: f64, (lo, hi): (f64, f64)) -> f64 {
    MARGIN_LEFT + (x - lo) / (hi - lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn to_px_y(y: f64, (lo, hi): (f64, f64)) -> f64 {
    // SVG y grows downward.
    HEIGHT - MARGIN_BOTTOM - (y - lo) / (hi - lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

/// Two decimals is well under a pixel and keeps output byte-stable.
fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    // Avoid the distinct bit pattern "-0.00".
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Tick labels: up to four significant decimals, trailing zeros trimmed.
fn fmt_tick(v: f64) -> String {
    let mut s = format!("{v:.4}");
    while s.contains('.') && (s.ends_with('0') || s.ends_with('.')) {
        s.pop();
    }
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Opens the document and draws the frame, tick marks, grid and labels
/// shared by every chart type.
fn svg_open(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        fmt(WIDTH / 2.0),
        escape(title)
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x_range.0 + f * (x_range.1 - x_range.0);
        let yv = y_range.0 + f * (y_range.1 - y_range.0);
        let xp = to_px_x(xv, x_range);
        let yp = to_px_y(yv, y_range);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#dddddd\"/>",
            fmt(MARGIN_TOP),
            fmt(HEIGHT - MARGIN_BOTTOM),
            x = fmt(xp)
        );
        let _ = writeln!(
            svg,
            "  <line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#dddddd\"/>",
            fmt(MARGIN_LEFT),
            fmt(WIDTH - MARGIN_RIGHT),
            y = fmt(yp)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            fmt(xp),
            fmt(HEIGHT - MARGIN_BOTTOM + 14.0),
            fmt_tick(xv)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            fmt(MARGIN_LEFT - 6.0),
            fmt(yp + 3.0),
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
        fmt(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        fmt(WIDTH / 2.0),
        fmt(HEIGHT - 8.0),
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
        fmt(HEIGHT / 2.0),
        fmt(HEIGHT / 2.0),
        escape(y_label)
    );
    svg
}
