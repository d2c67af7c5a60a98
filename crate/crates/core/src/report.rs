//! SVG figures and the regression table.
//!
//! Figures are plain SVG 1.1 strings built by hand. Output depends only on the
//! data and the [`FigureSpec`], so rendering the same input twice gives
//! identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::stats::{self, histogram_counts, ols_fit, simple_fit, Design, LinearFit, OlsFit, StatsError, Summary};
use crate::sweep::AgentResult;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no data to plot")]
    Empty,
    #[error("invalid figure spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Scatter,
    Histogram,
    Heatmap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Axis ranges; `None` fits the data.
    pub x_bounds: Option<(f64, f64)>,
    pub y_bounds: Option<(f64, f64)>,
    /// Histogram bin count.
    pub bins: usize,
    /// Heatmap cells along x and y.
    pub grid: (usize, usize),
    pub file_name: String,
    pub width: f64,
    pub height: f64,
}

impl FigureSpec {
    pub fn new(kind: FigureKind, title: &str, x_label: &str, y_label: &str, file_name: &str) -> Self {
        Self {
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_bounds: None,
            y_bounds: None,
            bins: 20,
            grid: (20, 20),
            file_name: file_name.into(),
            width: 640.0,
            height: 480.0,
        }
    }

    fn validate(&self) -> Result<(), ReportError> {
        let ordered = |b: Option<(f64, f64)>| b.is_none_or(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi);
        if !ordered(self.x_bounds) || !ordered(self.y_bounds) {
            return Err(ReportError::InvalidSpec("bounds must be finite and ordered".into()));
        }
        if self.bins < 1 || self.grid.0 < 1 || self.grid.1 < 1 {
            return Err(ReportError::InvalidSpec("bin counts must be at least 1".into()));
        }
        Ok(())
    }
}

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 64.0;
const LEGEND_WIDTH: f64 = 70.0;
const EMPTY_CELL: &str = "#cccccc";

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Compact number for tick labels.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Roughly five round tick positions covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    (0..)
        .map(|i| first + i as f64 * step)
        .take_while(|t| *t <= hi + step * 1e-9)
        .collect()
}

fn padded_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Maps data coordinates to the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn new(spec: &FigureSpec, x: (f64, f64), y: (f64, f64), extra_right: f64) -> Self {
        Self {
            x,
            y,
            left: MARGIN_LEFT,
            right: spec.width - MARGIN_RIGHT - extra_right,
            top: MARGIN_TOP,
            bottom: spec.height - MARGIN_BOTTOM,
        }
    }

    fn px(&self, v: f64) -> f64 {
        let span = self.x.1 - self.x.0;
        let t = if span > 0.0 { (v - self.x.0) / span } else { 0.5 };
        self.left + t * (self.right - self.left)
    }

    fn py(&self, v: f64) -> f64 {
        let span = self.y.1 - self.y.0;
        let t = if span > 0.0 { (v - self.y.0) / span } else { 0.5 };
        self.bottom - t * (self.bottom - self.top)
    }
}

fn open_svg(spec: &FigureSpec) -> String {
    let (w, h) = (spec.width, spec.height);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        xml_escape(&spec.title)
    );
    s
}

/// Axes, ticks and labels. Drawn with `path` so `line` stays reserved for fits.
fn draw_axes(s: &mut String, frame: &Frame, spec: &FigureSpec, x_ticks: &[f64], y_ticks: &[f64]) {
    let _ = writeln!(
        s,
        r#"<path class="axis" d="M{l:.2} {t:.2} V{b:.2} H{r:.2}" fill="none" stroke="black"/>"#,
        l = frame.left,
        t = frame.top,
        b = frame.bottom,
        r = frame.right
    );
    for &t in x_ticks {
        let x = frame.px(t);
        let _ = writeln!(
            s,
            r#"<path class="tick" d="M{x:.2} {b:.2} v5" stroke="black"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{label}</text>"#,
            b = frame.bottom,
            ty = frame.bottom + 18.0,
            label = tick_label(t)
        );
    }
    for &t in y_ticks {
        let y = frame.py(t);
        let _ = writeln!(
            s,
            r#"<path class="tick" d="M{l:.2} {y:.2} h-5" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{label}</text>"#,
            l = frame.left,
            tx = frame.left - 8.0,
            ty = y + 4.0,
            label = tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (frame.left + frame.right) / 2.0,
        spec.height - 20.0,
        xml_escape(&spec.x_label)
    );
    let cy = (frame.top + frame.bottom) / 2.0;
    let _ = writeln!(
        s,
        r#"<text x="20" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 20 {cy:.2})">{}</text>"#,
        xml_escape(&spec.y_label)
    );
}

/// Segment of `y = intercept + slope x` inside the box, if any.
fn clip_line(fit: LinearFit, x: (f64, f64), y: (f64, f64)) -> Option<((f64, f64), (f64, f64))> {
    let (mut x0, mut x1) = x;
    if fit.slope == 0.0 {
        if fit.intercept < y.0 || fit.intercept > y.1 {
            return None;
        }
    } else {
        let xa = (y.0 - fit.intercept) / fit.slope;
        let xb = (y.1 - fit.intercept) / fit.slope;
        let (lo, hi) = if xa < xb { (xa, xb) } else { (xb, xa) };
        x0 = x0.max(lo);
        x1 = x1.min(hi);
        if x0 > x1 {
            return None;
        }
    }
    Some(((x0, fit.at(x0)), (x1, fit.at(x1))))
}

/// One `circle` per point and one `line` for the fit.
pub fn render_scatter(points: &[(f64, f64)], fit: LinearFit, spec: &FigureSpec) -> Result<String, ReportError> {
    spec.validate()?;
    if points.is_empty() {
        return Err(ReportError::Empty);
    }
    let xb = spec.x_bounds.unwrap_or_else(|| padded_bounds(points.iter().map(|p| p.0)));
    let yb = spec.y_bounds.unwrap_or_else(|| padded_bounds(points.iter().map(|p| p.1)));
    let frame = Frame::new(spec, xb, yb, 0.0);
    let mut s = open_svg(spec);
    draw_axes(&mut s, &frame, spec, &nice_ticks(xb.0, xb.1), &nice_ticks(yb.0, yb.1));
    s.push_str("<g class=\"points\" fill=\"#1f77b4\" fill-opacity=\"0.6\">\n");
    for &(x, y) in points {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, frame.px(x), frame.py(y));
    }
    s.push_str("</g>\n");
    if let Some(((x0, y0), (x1, y1))) = clip_line(fit, xb, yb) {
        let _ = writeln!(
            s,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="red" stroke-width="2"/>"#,
            frame.px(x0),
            frame.py(y0),
            frame.px(x1),
            frame.py(y1)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Bin range and counts used by [`render_histogram`].
pub fn histogram_bins(values: &[f64], bins: usize, spec: &FigureSpec) -> (f64, f64, Vec<usize>) {
    let (lo, hi) = spec.x_bounds.unwrap_or_else(|| {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    });
    (lo, hi, histogram_counts(values, bins, lo, hi))
}

pub fn render_histogram(values: &[f64], bins: usize, spec: &FigureSpec) -> Result<String, ReportError> {
    spec.validate()?;
    if values.is_empty() {
        return Err(ReportError::Empty);
    }
    if bins < 1 {
        return Err(ReportError::InvalidSpec("bins must be at least 1".into()));
    }
    let (lo, hi, counts) = histogram_bins(values, bins, spec);
    let max_count = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let yb = (0.0, max_count * 1.05);
    let frame = Frame::new(spec, (lo, hi), yb, 0.0);
    let mut s = open_svg(spec);
    draw_axes(&mut s, &frame, spec, &nice_ticks(lo, hi), &nice_ticks(yb.0, yb.1));
    let width = (hi - lo) / bins as f64;
    s.push_str("<g class=\"bars\" fill=\"#4c72b0\" stroke=\"white\">\n");
    for (i, &count) in counts.iter().enumerate() {
        let x0 = frame.px(lo + i as f64 * width);
        let x1 = frame.px(lo + (i + 1) as f64 * width);
        let top = frame.py(count as f64);
        let _ = writeln!(
            s,
            r#"<rect class="bar" x="{x0:.2}" y="{top:.2}" width="{:.2}" height="{:.2}"><title>{count}</title></rect>"#,
            (x1 - x0).max(0.0),
            (frame.bottom - top).max(0.0)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

/// Color for `t` in `[0, 1]`: pale yellow through orange to dark red. Every
/// channel is non-increasing in `t`, so darker always means larger.
pub fn color_ramp(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 3] = [(255.0, 255.0, 204.0), (253.0, 141.0, 60.0), (128.0, 0.0, 38.0)];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let (a, b, u) = if t <= 0.5 {
        (STOPS[0], STOPS[1], t / 0.5)
    } else {
        (STOPS[1], STOPS[2], (t - 0.5) / 0.5)
    };
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn hex((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Mean value per cell, row-major with `iy` along the second axis:
/// index `iy * nx + ix`. Empty cells are `None`.
pub fn heatmap_cells(points: &[(f64, f64, f64)], nx: usize, ny: usize, xb: (f64, f64), yb: (f64, f64)) -> Vec<Option<f64>> {
    let mut sums = vec![(0.0, 0usize); nx * ny];
    let cell = |v: f64, (lo, hi): (f64, f64), n: usize| {
        if hi > lo {
            ((((v - lo) / (hi - lo)) * n as f64).floor().max(0.0) as usize).min(n - 1)
        } else {
            0
        }
    };
    for &(x, y, v) in points {
        let idx = cell(y, yb, ny) * nx + cell(x, xb, nx);
        sums[idx].0 += v;
        sums[idx].1 += 1;
    }
    sums.into_iter()
        .map(|(s, n)| (n > 0).then(|| s / n as f64))
        .collect()
}

fn data_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Cells colored by mean value, gray where empty, with a color legend.
/// Cell rects carry `id="cell-<ix>-<iy>"`.
pub fn render_heatmap(points: &[(f64, f64, f64)], nx: usize, ny: usize, spec: &FigureSpec) -> Result<String, ReportError> {
    spec.validate()?;
    if nx < 1 || ny < 1 {
        return Err(ReportError::InvalidSpec("heatmap grid must be at least 1 x 1".into()));
    }
    let xb = spec.x_bounds.unwrap_or_else(|| data_bounds(points.iter().map(|p| p.0)));
    let yb = spec.y_bounds.unwrap_or_else(|| data_bounds(points.iter().map(|p| p.1)));
    let cells = heatmap_cells(points, nx, ny, xb, yb);
    let occupied: Vec<f64> = cells.iter().flatten().copied().collect();
    let vmin = occupied.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = occupied.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = |v: f64| if vmax > vmin { (v - vmin) / (vmax - vmin) } else { 0.5 };

    let frame = Frame::new(spec, xb, yb, LEGEND_WIDTH);
    let mut s = open_svg(spec);
    let (cw, ch) = (
        (frame.right - frame.left) / nx as f64,
        (frame.bottom - frame.top) / ny as f64,
    );
    s.push_str("<g class=\"cells\">\n");
    for iy in 0..ny {
        for ix in 0..nx {
            let x = frame.left + ix as f64 * cw;
            let y = frame.bottom - (iy + 1) as f64 * ch;
            match cells[iy * nx + ix] {
                Some(v) => {
                    let _ = writeln!(
                        s,
                        r#"<rect id="cell-{ix}-{iy}" class="cell" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}"><title>{}</title></rect>"#,
                        hex(color_ramp(scale(v))),
                        tick_label(v)
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<rect id="cell-{ix}-{iy}" class="empty" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{EMPTY_CELL}"/>"#
                    );
                }
            }
        }
    }
    s.push_str("</g>\n");
    draw_axes(&mut s, &frame, spec, &nice_ticks(xb.0, xb.1), &nice_ticks(yb.0, yb.1));

    // legend: vertical ramp from low (bottom) to high (top)
    let steps = 16;
    let lx = frame.right + 20.0;
    let lh = (frame.bottom - frame.top) / steps as f64;
    s.push_str("<g class=\"legend\">\n");
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        let y = frame.bottom - (i + 1) as f64 * lh;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            lh + 0.5,
            hex(color_ramp(t))
        );
    }
    if !occupied.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            frame.bottom,
            tick_label(vmin)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            frame.top + 10.0,
            tick_label(vmax)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

/// `x` rounded to four significant digits, plain notation for moderate
/// magnitudes and scientific otherwise.
pub fn sig4(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (3 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

/// Display names for the three regressors, matching the table layout.
fn display_name(name: &str) -> &str {
    match name {
        "Y" => "Y (x1)",
        "p" => "p (x2)",
        other => other,
    }
}

/// Fixed-width table with columns Parameter, Coefficient, p-value, StdErr.
pub fn regression_table(fit: &OlsFit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>14} {:>14} {:>14}", "Parameter", "Coefficient", "p-value", "StdErr");
    let _ = writeln!(s, "{}", "-".repeat(57));
    for i in 0..fit.k {
        let _ = writeln!(
            s,
            "{:<12} {:>14} {:>14} {:>14}",
            display_name(&fit.names[i]),
            sig4(fit.coefficients[i]),
            sig4(fit.p_values[i]),
            sig4(fit.std_errors[i])
        );
    }
    let _ = writeln!(s, "{}", "-".repeat(57));
    s
}

/// Parses the rows of [`regression_table`] back into
/// `(parameter, coefficient, p-value, stderr)`.
pub fn parse_regression_table(text: &str) -> Vec<(String, f64, f64, f64)> {
    text.lines()
        .filter_map(|line| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (name, nums) = match fields.as_slice() {
                [name, a, b, c] => (name.to_string(), [*a, *b, *c]),
                [name, tag, a, b, c] if tag.starts_with('(') => (format!("{name} {tag}"), [*a, *b, *c]),
                _ => return None,
            };
            let parsed: Vec<f64> = nums.iter().filter_map(|v| v.parse().ok()).collect();
            (parsed.len() == 3).then(|| (name, parsed[0], parsed[1], parsed[2]))
        })
        .collect()
}

pub fn regression_csv(fit: &OlsFit) -> String {
    let mut s = String::from("parameter,coefficient,std_err,t_stat,p_value\n");
    for i in 0..fit.k {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fit.names[i], fit.coefficients[i], fit.std_errors[i], fit.t_stats[i], fit.p_values[i]
        );
    }
    s
}

pub const FIG_SPOILAGE: &str = "fig1_culture_vs_spoilage.svg";
pub const FIG_YIELD: &str = "fig2_culture_vs_yield.svg";
pub const FIG_HISTOGRAM: &str = "fig3_culture_histogram.svg";
pub const FIG_HEATMAP: &str = "fig4_culture_heatmap.svg";
pub const REPORT_FILE: &str = "report.txt";
pub const REGRESSION_CSV: &str = "regression.csv";

/// Everything `analyze` produces.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub fit: OlsFit,
    pub summary: Summary,
    pub rows_used: usize,
    pub rows_excluded: usize,
    /// `|beta_p * sd(p)|` and `|beta_Y * sd(Y)|`.
    pub standardized_spoilage: f64,
    pub standardized_yield: f64,
    pub files: Vec<PathBuf>,
}

/// Regresses mean complexity on `(Y, p)` over non-diverged rows.
pub fn regress_results(results: &[AgentResult]) -> Result<OlsFit, StatsError> {
    let used: Vec<&AgentResult> = results.iter().filter(|r| !r.diverged).collect();
    let design = Design::with_intercept(
        vec![
            ("Y", used.iter().map(|r| r.yield_base).collect()),
            ("p", used.iter().map(|r| r.spoilage).collect()),
        ],
        used.iter().map(|r| r.mean_culture).collect(),
    )?;
    ols_fit(&design)
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the regression report, its CSV and the four figures into `out_dir`.
pub fn analyze(results: &[AgentResult], out_dir: &Path) -> Result<Analysis, ReportError> {
    let used: Vec<AgentResult> = results.iter().filter(|r| !r.diverged).cloned().collect();
    if used.is_empty() {
        return Err(ReportError::Empty);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let fit = regress_results(&used)?;
    let summary = stats::summarize(&used)?;

    let ys: Vec<f64> = used.iter().map(|r| r.yield_base).collect();
    let ps: Vec<f64> = used.iter().map(|r| r.spoilage).collect();
    let cs: Vec<f64> = used.iter().map(|r| r.mean_culture).collect();
    let standardized_spoilage = (fit.coefficients[2] * stats::sample_std(&ps)).abs();
    let standardized_yield = (fit.coefficients[1] * stats::sample_std(&ys)).abs();

    let mut files = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        write_file(&path, &contents)?;
        files.push(path);
        Ok(())
    };

    let spec = FigureSpec::new(
        FigureKind::Scatter,
        "Cultural complexity vs spoilage",
        "spoilage p",
        "mean C",
        FIG_SPOILAGE,
    );
    let pts: Vec<(f64, f64)> = ps.iter().copied().zip(cs.iter().copied()).collect();
    emit(FIG_SPOILAGE, render_scatter(&pts, simple_fit(&ps, &cs), &spec)?)?;

    let spec = FigureSpec::new(FigureKind::Scatter, "Cultural complexity vs yield", "yield Y", "mean C", FIG_YIELD);
    let pts: Vec<(f64, f64)> = ys.iter().copied().zip(cs.iter().copied()).collect();
    emit(FIG_YIELD, render_scatter(&pts, simple_fit(&ys, &cs), &spec)?)?;

    let spec = FigureSpec::new(
        FigureKind::Histogram,
        "Distribution of cultural complexity",
        "mean C",
        "agents",
        FIG_HISTOGRAM,
    );
    emit(FIG_HISTOGRAM, render_histogram(&cs, spec.bins, &spec)?)?;

    let spec = FigureSpec::new(FigureKind::Heatmap, "Mean C over (Y, p)", "yield Y", "spoilage p", FIG_HEATMAP);
    let pts: Vec<(f64, f64, f64)> = used.iter().map(|r| (r.yield_base, r.spoilage, r.mean_culture)).collect();
    emit(FIG_HEATMAP, render_heatmap(&pts, spec.grid.0, spec.grid.1, &spec)?)?;

    let mut text = String::new();
    let _ = writeln!(text, "OLS regression: mean_C ~ const + Y + p");
    let _ = writeln!(
        text,
        "n = {}  (excluded diverged: {})  R^2 = {}  sigma^2 = {}",
        fit.n,
        results.len() - used.len(),
        sig4(fit.r_squared),
        sig4(fit.sigma2)
    );
    text.push('\n');
    text.push_str(&regression_table(&fit));
    text.push('\n');
    let _ = writeln!(text, "standardized effect |beta_p * sd(p)| = {}", sig4(standardized_spoilage));
    let _ = writeln!(text, "standardized effect |beta_Y * sd(Y)| = {}", sig4(standardized_yield));
    let _ = writeln!(text, "corr(p, C) = {}", sig4(summary.corr_spoilage_culture.value));
    let _ = writeln!(text, "corr(Y, C) = {}", sig4(summary.corr_yield_culture.value));
    let _ = writeln!(text, "mean C = {}", sig4(summary.mean_culture));
    let _ = writeln!(text, "mean starvation rate = {}", sig4(summary.mean_starvation_rate));
    emit(REPORT_FILE, text)?;
    emit(REGRESSION_CSV, regression_csv(&fit))?;

    Ok(Analysis {
        fit,
        summary,
        rows_used: used.len(),
        rows_excluded: results.len() - used.len(),
        standardized_spoilage,
        standardized_yield,
        files,
    })
}
