//! Self-contained SVG plots rendered from the CSV tables.
//!
//! Output depends only on the table contents, so identical CSVs give
//! identical SVG bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{PlotKind, Polarity};
use crate::output::{
    fmt_num, read_trajectory, OutputError, Table, ADVANTAGE_FILE, ADVANTAGE_HEADER, BATCH_FILE,
    BATCH_HEADER, CORRELATION_FILE, CORRELATION_HEADER, TRAJECTORY_FILE,
};

/// Most points drawn for a time series; longer series are bucketed.
pub const MAX_SERIES_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlotOptions {
    pub polarity: Polarity,
    pub log_period: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            polarity: Polarity::Raw,
            log_period: true,
        }
    }
}

pub fn plot_file(kind: PlotKind) -> &'static str {
    match kind {
        PlotKind::Timeseries => "timeseries.svg",
        PlotKind::Sweep => "sweep.svg",
        PlotKind::Heatmap => "heatmap.svg",
        PlotKind::Correlation => "correlation.svg",
    }
}

pub fn source_file(kind: PlotKind) -> &'static str {
    match kind {
        PlotKind::Timeseries => TRAJECTORY_FILE,
        PlotKind::Sweep => BATCH_FILE,
        PlotKind::Heatmap => ADVANTAGE_FILE,
        PlotKind::Correlation => CORRELATION_FILE,
    }
}

/// Renders each requested plot whose source CSV exists in `dir` and returns
/// the SVG paths written.
pub fn render_plots(
    dir: &Path,
    kinds: &[PlotKind],
    opts: &PlotOptions,
) -> Result<Vec<PathBuf>, OutputError> {
    let mut written = Vec::new();
    for &kind in kinds {
        let source = dir.join(source_file(kind));
        if !source.exists() {
            continue;
        }
        let svg = match kind {
            PlotKind::Timeseries => timeseries_svg(&source)?,
            PlotKind::Sweep => sweep_svg(&source, opts)?,
            PlotKind::Heatmap => heatmap_svg(&source, opts)?,
            PlotKind::Correlation => correlation_svg(&source)?,
        };
        let target = dir.join(plot_file(kind));
        std::fs::write(&target, svg).map_err(|source| OutputError::Io {
            path: target.clone(),
            source,
        })?;
        written.push(target);
    }
    Ok(written)
}

/// Splits `series` into at most `max_points / 2` buckets and keeps each
/// bucket's minimum and maximum in time order. Short series pass through.
pub fn decimate(series: &[f64], max_points: usize) -> Vec<(usize, f64)> {
    if series.len() <= max_points {
        return series.iter().copied().enumerate().collect();
    }
    let buckets = (max_points / 2).max(1);
    let mut out = Vec::with_capacity(2 * buckets);
    for b in 0..buckets {
        let lo = b * series.len() / buckets;
        let hi = (b + 1) * series.len() / buckets;
        let slice = &series[lo..hi];
        let (mut imin, mut imax) = (0, 0);
        for (i, &v) in slice.iter().enumerate() {
            if v < slice[imin] {
                imin = i;
            }
            if v > slice[imax] {
                imax = i;
            }
        }
        let (first, second) = if imin <= imax {
            (imin, imax)
        } else {
            (imax, imin)
        };
        out.push((lo + first, slice[first]));
        if second != first {
            out.push((lo + second, slice[second]));
        }
    }
    out
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(width: u32, height: u32) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            body,
            r#"<rect width="{width}" height="{height}" fill="white"/>"#
        );
        Svg { body }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn vertical_text(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
            escape(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, title: Option<&str>) {
        let _ = write!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" shape-rendering="crispEdges""#
        );
        match title {
            Some(t) => {
                let _ = writeln!(self.body, "><title>{}</title></rect>", escape(t));
            }
            None => {
                let _ = writeln!(self.body, "/>");
            }
        }
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str) {
        let mut pts = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            if i > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{x:.2},{y:.2}");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>"#
        );
    }

    fn circle(&mut self, x: f64, y: f64, color: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// A plotting rectangle mapping data ranges onto pixels.
#[derive(Clone, Copy)]
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn axes(&self, svg: &mut Svg, xlabel: &str, ylabel: &str) {
        let bottom = self.top + self.height;
        let right = self.left + self.width;
        let axis = r##"stroke="#333" stroke-width="1""##;
        svg.line(self.left, bottom, right, bottom, axis);
        svg.line(self.left, self.top, self.left, bottom, axis);
        for t in ticks(self.x.0, self.x.1) {
            let x = self.px(t);
            svg.line(x, bottom, x, bottom + 4.0, axis);
            svg.text(x, bottom + 16.0, "middle", &tick_label(t));
        }
        for t in ticks(self.y.0, self.y.1) {
            let y = self.py(t);
            svg.line(self.left - 4.0, y, self.left, y, axis);
            svg.text(self.left - 6.0, y + 4.0, "end", &tick_label(t));
        }
        svg.text(
            self.left + self.width / 2.0,
            bottom + 34.0,
            "middle",
            xlabel,
        );
        svg.vertical_text(self.left - 48.0, self.top + self.height / 2.0, ylabel);
    }
}

fn tick_label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    fmt_num(if r == 0.0 { 0.0 } else { r })
}

/// About five round tick values inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Range padded so flat data still spans some height.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn timeseries_svg(path: &Path) -> Result<String, OutputError> {
    let table = read_trajectory(path)?;
    let series = &table.system_cost;
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let points = decimate(series, MAX_SERIES_POINTS);

    let mut svg = Svg::new(800, 360);
    let frame = Frame {
        left: 70.0,
        top: 30.0,
        width: 700.0,
        height: 270.0,
        x: (0.0, (series.len().max(2) - 1) as f64),
        y: padded_range(series.iter().copied()),
    };
    svg.text(
        400.0,
        18.0,
        "middle",
        &format!("system cost, mean {}", fmt_num(mean)),
    );
    frame.axes(&mut svg, "t", "C_t");
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|&(t, c)| (frame.px(t as f64), frame.py(c)))
        .collect();
    svg.polyline(&pts, SERIES_COLORS[0]);
    let y = frame.py(mean);
    svg.line(
        frame.left,
        y,
        frame.left + frame.width,
        y,
        r##"stroke="#d62728" stroke-width="1" stroke-dasharray="6,4""##,
    );
    Ok(svg.finish())
}

/// Blue for negative, white at zero, red for positive; `v` in `[-1, 1]`.
fn diverging(v: f64) -> String {
    if !v.is_finite() {
        return "#cccccc".to_string();
    }
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v < 0.0 {
        let s = -v;
        (
            255.0 - s * (255.0 - 33.0),
            255.0 - s * (255.0 - 102.0),
            255.0 - s * (255.0 - 172.0),
        )
    } else {
        (
            255.0 - v * (255.0 - 178.0),
            255.0 - v * (255.0 - 24.0),
            255.0 - v * (255.0 - 43.0),
        )
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

/// Dark to light for `v` in `[0, 1]`.
fn sequential(v: f64) -> String {
    if !v.is_finite() {
        return "#cccccc".to_string();
    }
    let v = v.clamp(0.0, 1.0);
    let (r, g, b) = (
        68.0 + v * (253.0 - 68.0),
        1.0 + v * (231.0 - 1.0),
        84.0 + v * (37.0 - 84.0),
    );
    format!(
        "#{:02x}{:02x}{:02x}",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

/// A grid of cell values keyed by (x, y) category.
struct Grid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: BTreeMap<(usize, usize), f64>,
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Averages `z` over repeated (x, y) keys, ignoring missing entries.
fn grid_means(x: &[f64], y: &[f64], z: &[Option<f64>]) -> Grid {
    let xs = sorted_unique(x);
    let ys = sorted_unique(y);
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for ((&xv, &yv), zv) in x.iter().zip(y).zip(z) {
        let (Some(i), Some(j)) = (
            xs.iter().position(|&v| v == xv),
            ys.iter().position(|&v| v == yv),
        ) else {
            continue;
        };
        if let Some(zv) = zv.filter(|v| v.is_finite()) {
            let e = sums.entry((i, j)).or_insert((0.0, 0));
            e.0 += zv;
            e.1 += 1;
        }
    }
    let values = sums
        .into_iter()
        .map(|(k, (s, c))| (k, s / c as f64))
        .collect();
    Grid { xs, ys, values }
}

enum Palette {
    /// Symmetric about zero.
    Diverging,
    Sequential,
}

struct HeatmapPanel<'a> {
    title: &'a str,
    xlabel: &'a str,
    ylabel: &'a str,
    grid: &'a Grid,
    palette: Palette,
}

fn draw_heatmap(svg: &mut Svg, left: f64, top: f64, size: f64, panel: &HeatmapPanel) {
    let grid = panel.grid;
    let (nx, ny) = (grid.xs.len().max(1), grid.ys.len().max(1));
    let (cw, ch) = (size / nx as f64, size / ny as f64);
    let finite: Vec<f64> = grid.values.values().copied().collect();
    let (lo, hi) = match panel.palette {
        Palette::Diverging => {
            let m = finite.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let m = if m > 0.0 { m } else { 1.0 };
            (-m, m)
        }
        Palette::Sequential => {
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi > lo {
                (lo, hi)
            } else if lo.is_finite() {
                (lo - 0.5, lo + 0.5)
            } else {
                (0.0, 1.0)
            }
        }
    };
    let color = |v: f64| match panel.palette {
        Palette::Diverging => diverging(v / hi),
        Palette::Sequential => sequential((v - lo) / (hi - lo)),
    };

    svg.text(left + size / 2.0, top - 8.0, "middle", panel.title);
    for j in 0..ny {
        for i in 0..nx {
            let x = left + i as f64 * cw;
            // Row 0 at the bottom.
            let y = top + size - (j + 1) as f64 * ch;
            match grid.values.get(&(i, j)) {
                Some(&v) => {
                    let title = format!(
                        "{}={}, {}={}: {}",
                        panel.xlabel,
                        fmt_num(grid.xs[i]),
                        panel.ylabel,
                        fmt_num(grid.ys[j]),
                        fmt_num(v)
                    );
                    svg.rect(x, y, cw, ch, &color(v), Some(&title));
                }
                None => svg.rect(x, y, cw, ch, "#cccccc", None),
            }
        }
    }
    // Label at most ~8 categories per axis.
    let every = |n: usize| n.div_ceil(8).max(1);
    for (i, v) in grid.xs.iter().enumerate().step_by(every(nx)) {
        svg.text(
            left + (i as f64 + 0.5) * cw,
            top + size + 14.0,
            "middle",
            &fmt_num(*v),
        );
    }
    for (j, v) in grid.ys.iter().enumerate().step_by(every(ny)) {
        svg.text(
            left - 4.0,
            top + size - (j as f64 + 0.5) * ch + 4.0,
            "end",
            &fmt_num(*v),
        );
    }
    svg.text(left + size / 2.0, top + size + 32.0, "middle", panel.xlabel);
    svg.vertical_text(left - 44.0, top + size / 2.0, panel.ylabel);

    // Color bar.
    let bar_x = left + size + 10.0;
    const STEPS: usize = 32;
    for k in 0..STEPS {
        let v = lo + (hi - lo) * (k as f64 + 0.5) / STEPS as f64;
        let h = size / STEPS as f64;
        svg.rect(
            bar_x,
            top + size - (k + 1) as f64 * h,
            12.0,
            h,
            &color(v),
            None,
        );
    }
    svg.text(bar_x + 16.0, top + 10.0, "start", &fmt_num(hi));
    svg.text(bar_x + 16.0, top + size, "start", &fmt_num(lo));
}

fn heatmap_svg(path: &Path, opts: &PlotOptions) -> Result<String, OutputError> {
    let table = Table::read(path, &ADVANTAGE_HEADER)?;
    table.require_rows()?;
    let param = table.strings("param").first().cloned().unwrap_or_default();
    let pop = table.floats("pop_value")?;
    let dev = table.floats("dev_value")?;
    let sign = match opts.polarity {
        Polarity::Raw => 1.0,
        Polarity::Negated => -1.0,
    };
    let d: Vec<Option<f64>> = table
        .floats("D_j")?
        .into_iter()
        .map(|v| Some(sign * v))
        .collect();
    let grid = grid_means(&pop, &dev, &d);
    let title = match opts.polarity {
        Polarity::Raw => "mean D_j (deviant cost minus mean cost)".to_string(),
        Polarity::Negated => "mean -D_j (deviant advantage)".to_string(),
    };
    let mut svg = Svg::new(520, 480);
    draw_heatmap(
        &mut svg,
        80.0,
        50.0,
        360.0,
        &HeatmapPanel {
            title: &title,
            xlabel: &format!("population {param}"),
            ylabel: &format!("deviant {param}"),
            grid: &grid,
            palette: Palette::Diverging,
        },
    );
    Ok(svg.finish())
}

const SWEEP_VARS: [&str; 3] = ["alpha", "beta", "epsilon"];

fn sweep_svg(path: &Path, opts: &PlotOptions) -> Result<String, OutputError> {
    let table = Table::read(path, &BATCH_HEADER)?;
    table.require_rows()?;
    let params: Vec<(&str, Vec<f64>)> = SWEEP_VARS
        .iter()
        .map(|&name| Ok((name, table.floats(name)?)))
        .collect::<Result<_, OutputError>>()?;
    let varying: Vec<usize> = (0..params.len())
        .filter(|&i| sorted_unique(&params[i].1).len() > 1)
        .collect();

    let mean_c: Vec<Option<f64>> = table.floats("mean_C")?.into_iter().map(Some).collect();
    let f: Vec<Option<f64>> = table.floats("F")?.into_iter().map(Some).collect();
    let mut l = table.optional_floats("L")?;
    let l_label = if opts.log_period {
        for v in &mut l {
            *v = v.map(f64::log10);
        }
        "log10 L"
    } else {
        "L"
    };
    let metrics = [("mean C", mean_c), (l_label, l), ("F", f)];

    if varying.len() >= 2 {
        let (xi, yi) = (varying[0], varying[1]);
        let mut svg = Svg::new(3 * 330 + 40, 400);
        for (k, (label, z)) in metrics.iter().enumerate() {
            let grid = grid_means(&params[xi].1, &params[yi].1, z);
            draw_heatmap(
                &mut svg,
                70.0 + 330.0 * k as f64,
                50.0,
                220.0,
                &HeatmapPanel {
                    title: label,
                    xlabel: params[xi].0,
                    ylabel: params[yi].0,
                    grid: &grid,
                    palette: Palette::Sequential,
                },
            );
        }
        return Ok(svg.finish());
    }

    // Line panels against the varying parameter, one series per rep-mean.
    let xi = varying.first().copied().unwrap_or(0);
    let x = &params[xi].1;
    let zero = vec![0.0; x.len()];
    let mut svg = Svg::new(3 * 320 + 40, 360);
    for (k, (label, z)) in metrics.iter().enumerate() {
        let grid = grid_means(x, &zero, z);
        let pts: Vec<(f64, f64)> = grid
            .xs
            .iter()
            .enumerate()
            .filter_map(|(i, &xv)| grid.values.get(&(i, 0)).map(|&v| (xv, v)))
            .collect();
        let frame = Frame {
            left: 80.0 + 320.0 * k as f64,
            top: 40.0,
            width: 230.0,
            height: 250.0,
            x: padded_range(grid.xs.iter().copied()),
            y: padded_range(pts.iter().map(|p| p.1)),
        };
        svg.text(frame.left + frame.width / 2.0, 24.0, "middle", label);
        frame.axes(&mut svg, params[xi].0, label);
        let px: Vec<(f64, f64)> = pts
            .iter()
            .map(|&(a, b)| (frame.px(a), frame.py(b)))
            .collect();
        svg.polyline(&px, SERIES_COLORS[0]);
        for &(a, b) in &px {
            svg.circle(a, b, SERIES_COLORS[0]);
        }
    }
    Ok(svg.finish())
}

fn correlation_svg(path: &Path) -> Result<String, OutputError> {
    let table = Table::read(path, &CORRELATION_HEADER)?;
    table.require_rows()?;
    let vx = table.strings("var_x");
    let vy = table.strings("var_y");
    let r = table.floats("pearson_r")?;
    let mut xs: Vec<String> = Vec::new();
    let mut ys: Vec<String> = Vec::new();
    for v in &vx {
        if !xs.contains(v) {
            xs.push(v.clone());
        }
    }
    for v in &vy {
        if !ys.contains(v) {
            ys.push(v.clone());
        }
    }
    let cell = 56.0;
    let (left, top) = (90.0, 50.0);
    let width = left + cell * ys.len() as f64 + 80.0;
    let height = top + cell * xs.len() as f64 + 60.0;
    let mut svg = Svg::new(width as u32, height as u32);
    svg.text(width / 2.0, 20.0, "middle", "Pearson correlation");
    for ((x, y), &v) in vx.iter().zip(&vy).zip(&r) {
        let i = xs.iter().position(|s| s == x).expect("collected");
        let j = ys.iter().position(|s| s == y).expect("collected");
        let (cx, cy) = (left + j as f64 * cell, top + i as f64 * cell);
        svg.rect(
            cx,
            cy,
            cell,
            cell,
            &diverging(v),
            Some(&format!("{x} vs {y}: {}", fmt_num(v))),
        );
        let label = if v.is_finite() {
            format!("{v:.2}")
        } else {
            "n/a".to_string()
        };
        svg.text(cx + cell / 2.0, cy + cell / 2.0 + 4.0, "middle", &label);
    }
    for (i, x) in xs.iter().enumerate() {
        svg.text(left - 6.0, top + (i as f64 + 0.5) * cell + 4.0, "end", x);
    }
    for (j, y) in ys.iter().enumerate() {
        svg.text(
            left + (j as f64 + 0.5) * cell,
            top + cell * xs.len() as f64 + 16.0,
            "middle",
            y,
        );
    }
    let bar_x = left + cell * ys.len() as f64 + 14.0;
    let bar_h = cell * xs.len() as f64;
    const STEPS: usize = 32;
    for k in 0..STEPS {
        let v = -1.0 + 2.0 * (k as f64 + 0.5) / STEPS as f64;
        let h = bar_h / STEPS as f64;
        svg.rect(
            bar_x,
            top + bar_h - (k + 1) as f64 * h,
            12.0,
            h,
            &diverging(v),
            None,
        );
    }
    svg.text(bar_x + 16.0, top + 10.0, "start", "1");
    svg.text(bar_x + 16.0, top + bar_h, "start", "-1");
    Ok(svg.finish())
}
