//! Static SVG charts: well fan charts, map panels and RMSE bars.
//!
//! Everything is rendered to strings first; nothing touches the disk until
//! every chart has been built, so bad input never leaves partial files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use shmked::io::matrix_from_csv;

use crate::error::{CliError, CliResult};
use crate::pipeline::{text, Artifacts};
use crate::report::{ReportSummary, SERIES_HEADER};

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FanPanel {
    pub title: String,
    pub times: Vec<f64>,
    /// One curve per ensemble member, sampled at `times`.
    pub members: Vec<Vec<f64>>,
    pub truth: Option<Vec<f64>>,
    pub observed: Vec<(f64, f64)>,
    /// History/forecast boundary (days).
    pub divider: Option<f64>,
}

fn header(width: f64, height: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        width / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.5 * hi.abs().max(1.0) * 1e-3;
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

struct Frame {
    x0: f64,
    y0: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + MARGIN_L + (v - self.xr.0) / (self.xr.1 - self.xr.0) * (PANEL_W - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + PANEL_H - MARGIN_B - (v - self.yr.0) / (self.yr.1 - self.yr.0) * (PANEL_H - MARGIN_T - MARGIN_B)
    }

    fn axes(&self, svg: &mut String, title: &str) {
        let (l, r) = (self.x(self.xr.0), self.x(self.xr.1));
        let (b, t) = (self.y(self.yr.0), self.y(self.yr.1));
        let _ = writeln!(
            svg,
            "<rect x=\"{l:.1}\" y=\"{t:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
            r - l,
            b - t
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
            (l + r) / 2.0,
            self.y0 + MARGIN_T - 10.0,
            escape(title)
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.xr.0 + f * (self.xr.1 - self.xr.0);
            let yv = self.yr.0 + f * (self.yr.1 - self.yr.0);
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                self.x(xv),
                b + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                l - 4.0,
                self.y(yv) + 4.0,
                tick(yv)
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == 0.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn polyline(svg: &mut String, frame: &Frame, xs: &[f64], ys: &[f64], style: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| format!("{:.1},{:.1}", frame.x(*x), frame.y(*y)))
        .collect();
    if !pts.is_empty() {
        let _ = writeln!(svg, "<polyline fill=\"none\" {style} points=\"{}\"/>", pts.join(" "));
    }
}

/// Side-by-side fan panels sharing one y range.
pub fn fan_figure(title: &str, panels: &[FanPanel]) -> CliResult<String> {
    if panels.is_empty() {
        return Err(CliError::other("fan chart needs at least one panel"));
    }
    for p in panels {
        if p.members.is_empty() {
            return Err(CliError::other(format!("empty ensemble in panel \"{}\"", p.title)));
        }
        if p.members.iter().any(|m| m.len() != p.times.len()) {
            return Err(CliError::other(format!("ragged ensemble curves in panel \"{}\"", p.title)));
        }
    }
    let xr = finite_range(panels.iter().flat_map(|p| p.times.iter().copied()))
        .ok_or_else(|| CliError::other("fan chart has no time axis"))?;
    let yr = finite_range(panels.iter().flat_map(|p| {
        p.members
            .iter()
            .flatten()
            .copied()
            .chain(p.truth.iter().flatten().copied())
            .chain(p.observed.iter().map(|o| o.1))
    }))
    .ok_or_else(|| CliError::other("fan chart has no finite values"))?;
    let mut svg = header(PANEL_W * panels.len() as f64, PANEL_H + 10.0, title);
    for (k, p) in panels.iter().enumerate() {
        let frame = Frame {
            x0: k as f64 * PANEL_W,
            y0: 10.0,
            xr,
            yr,
        };
        for m in &p.members {
            polyline(&mut svg, &frame, &p.times, m, "stroke=\"#7a8fb8\" stroke-width=\"0.8\" stroke-opacity=\"0.6\"");
        }
        if let Some(t) = &p.truth {
            polyline(&mut svg, &frame, &p.times, t, "stroke=\"#c0392b\" stroke-width=\"2\"");
        }
        for &(t, v) in p.observed.iter().filter(|o| o.1.is_finite()) {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.2\" fill=\"black\"/>",
                frame.x(t),
                frame.y(v)
            );
        }
        if let Some(d) = p.divider.filter(|d| *d >= xr.0 && *d <= xr.1) {
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.1}\" x2=\"{x:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"#222\" stroke-dasharray=\"5,4\"/>",
                frame.y(yr.1),
                frame.y(yr.0),
                x = frame.x(d)
            );
        }
        frame.axes(&mut svg, &p.title);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Linear blend through a perceptually ordered palette.
fn colour(f: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let f = f.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (f.floor() as usize).min(STOPS.len() - 2);
    let t = f - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + t * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Map panels (`rows × cols`, row 0 at the bottom) on a shared colour scale.
pub fn map_figure(title: &str, panels: &[(String, Vec<f64>)], rows: usize, cols: usize) -> CliResult<String> {
    if panels.is_empty() || rows == 0 || cols == 0 {
        return Err(CliError::other("map figure needs at least one non-empty panel"));
    }
    if let Some((name, _)) = panels.iter().find(|(_, v)| v.len() != rows * cols) {
        return Err(CliError::other(format!("map \"{name}\" is not {rows}×{cols}")));
    }
    let (lo, hi) = finite_range(panels.iter().flat_map(|(_, v)| v.iter().copied()))
        .ok_or_else(|| CliError::other("maps hold no finite values"))?;
    let size = 240.0;
    let cell = size / rows.max(cols) as f64;
    let width = 20.0 + panels.len() as f64 * (size + 20.0);
    let mut svg = header(width, size + 90.0, title);
    for (k, (name, values)) in panels.iter().enumerate() {
        let x0 = 20.0 + k as f64 * (size + 20.0);
        let y0 = 50.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
            x0 + cols as f64 * cell / 2.0,
            y0 - 8.0,
            escape(name)
        );
        for r in 0..rows {
            for c in 0..cols {
                let v = values[r * cols + c];
                let fill = if v.is_finite() {
                    colour((v - lo) / (hi - lo))
                } else {
                    "#bbbbbb".to_string()
                };
                let _ = writeln!(
                    svg,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{w:.2}\" fill=\"{fill}\"/>",
                    x0 + c as f64 * cell,
                    y0 + (rows - 1 - r) as f64 * cell,
                    w = cell + 0.05
                );
            }
        }
    }
    let bar_y = 50.0 + size + 12.0;
    for i in 0..50 {
        let _ = writeln!(
            svg,
            "<rect x=\"{:.1}\" y=\"{bar_y:.1}\" width=\"4.1\" height=\"10\" fill=\"{}\"/>",
            20.0 + 4.0 * i as f64,
            colour(i as f64 / 49.0)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"20\" y=\"{:.1}\">{}</text><text x=\"220\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
        bar_y + 24.0,
        tick(lo),
        bar_y + 24.0,
        tick(hi)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Grouped bars: one group per label, one bar per series.
pub fn bar_chart(title: &str, labels: &[String], series: &[(String, Vec<f64>)]) -> CliResult<String> {
    if labels.is_empty() || series.is_empty() {
        return Err(CliError::other("bar chart needs labels and series"));
    }
    if series.iter().any(|(_, v)| v.len() != labels.len() || v.iter().any(|x| !x.is_finite())) {
        return Err(CliError::other("bar chart series must be finite and match the labels"));
    }
    let top = series.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0f64, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let frame = Frame {
        x0: 0.0,
        y0: 10.0,
        xr: (0.0, labels.len() as f64),
        yr: (0.0, top),
    };
    let palette = ["#3b528b", "#21918c", "#5ec962", "#fde725"];
    let mut svg = header(PANEL_W + 120.0, PANEL_H + 10.0, title);
    let group = 0.8 / series.len() as f64;
    for (s, (name, values)) in series.iter().enumerate() {
        let fill = palette[s % palette.len()];
        for (g, v) in values.iter().enumerate() {
            let left = frame.x(g as f64 + 0.1 + s as f64 * group);
            let right = frame.x(g as f64 + 0.1 + (s + 1) as f64 * group);
            let _ = writeln!(
                svg,
                "<rect x=\"{left:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{fill}\"/>",
                frame.y(*v),
                right - left,
                frame.y(0.0) - frame.y(*v)
            );
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{fill}\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            PANEL_W + 4.0,
            60.0 + 16.0 * s as f64,
            PANEL_W + 18.0,
            69.0 + 16.0 * s as f64,
            escape(name)
        );
    }
    for (g, l) in labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            frame.x(g as f64 + 0.5),
            frame.y(0.0) + 14.0,
            escape(l)
        );
    }
    let (l, b, t) = (frame.x(0.0), frame.y(0.0), frame.y(top));
    let _ = writeln!(
        svg,
        "<line x1=\"{l:.1}\" x2=\"{l:.1}\" y1=\"{t:.1}\" y2=\"{b:.1}\" stroke=\"#444\"/><line x1=\"{l:.1}\" x2=\"{:.1}\" y1=\"{b:.1}\" y2=\"{b:.1}\" stroke=\"#444\"/>",
        frame.x(labels.len() as f64)
    );
    for i in 0..=4 {
        let v = top * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            l - 4.0,
            frame.y(v) + 4.0,
            tick(v)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One well's curves: `source -> member -> (times, bhp, wct)`.
type WellCurves = BTreeMap<String, BTreeMap<usize, (Vec<f64>, Vec<f64>, Vec<f64>)>>;

fn read_series(text: &str) -> CliResult<BTreeMap<String, WellCurves>> {
    let mut lines = text.lines();
    if lines.next() != Some(SERIES_HEADER) {
        return Err(CliError::other("well_series.csv has an unexpected header"));
    }
    let mut wells: BTreeMap<String, WellCurves> = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || CliError::other(format!("well_series.csv line {}: malformed", n + 2));
        if f.len() != 6 {
            return Err(bad());
        }
        let member: usize = f[1].parse().map_err(|_| bad())?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let (time, bhp, wct) = (num(f[2])?, num(f[4])?, num(f[5])?);
        let curve = wells
            .entry(f[3].to_string())
            .or_default()
            .entry(f[0].to_string())
            .or_default()
            .entry(member)
            .or_default();
        curve.0.push(time);
        curve.1.push(bhp);
        curve.2.push(wct);
    }
    Ok(wells)
}

fn read_matrix(dir: &Path, name: &str) -> CliResult<(Vec<f64>, usize, usize)> {
    let text = std::fs::read_to_string(dir.join(name)).map_err(|e| CliError::other(format!("missing report data {name}: {e}")))?;
    Ok(matrix_from_csv(&text)?)
}

/// Builds every chart from the report stage's artifacts.
pub fn plot_emit(report_dir: &Path) -> CliResult<Artifacts> {
    let read = |name: &str| {
        std::fs::read_to_string(report_dir.join(name)).map_err(|e| CliError::other(format!("missing report data {name}: {e}")))
    };
    let summary: ReportSummary = serde_json::from_str(&read("summary.json")?)?;
    let wells = read_series(&read("well_series.csv")?)?;
    let mut out = Artifacts::new();

    for well in &summary.wells {
        let curves = wells
            .get(well)
            .ok_or_else(|| CliError::other(format!("no series for well {well}")))?;
        let truth = curves.get("truth").and_then(|m| m.get(&0));
        let observed = curves.get("observed").and_then(|m| m.get(&0));
        for (quantity, pick) in [("bhp", 1usize), ("wct", 2usize)] {
            let get = |c: &(Vec<f64>, Vec<f64>, Vec<f64>)| if pick == 1 { c.1.clone() } else { c.2.clone() };
            let mut panels = Vec::new();
            for source in ["initial", "esmda", "shm-ked"] {
                let members = curves.get(source).cloned().unwrap_or_default();
                let times = members.values().next().map(|c| c.0.clone()).unwrap_or_default();
                panels.push(FanPanel {
                    title: source.to_string(),
                    times,
                    members: members.values().map(get).collect(),
                    truth: truth.map(get),
                    observed: observed.map(|o| o.0.iter().copied().zip(get(o)).collect()).unwrap_or_default(),
                    divider: Some(summary.history_end),
                });
            }
            let unit = if quantity == "bhp" { "BHP (bar)" } else { "water cut" };
            let svg = fan_figure(&format!("{well} {unit}"), &panels)
                .map_err(|e| CliError::other(format!("{well} {quantity}: {e}")))?;
            out.push(text(format!("fan_{well}_{quantity}.svg"), svg));
        }
    }

    for t in &summary.survey_times {
        let mut panels = Vec::new();
        for source in ["truth", "esmda", "shm-ked"] {
            let (v, r, c) = read_matrix(report_dir, &format!("impedance_t{t}_{source}.csv"))?;
            if (r, c) != (summary.rows, summary.cols) {
                return Err(CliError::other(format!("impedance map {source} at {t} has the wrong shape")));
            }
            panels.push((source.to_string(), v));
        }
        out.push(text(
            format!("impedance_t{t}.svg"),
            map_figure(&format!("Acoustic impedance at day {t}"), &panels, summary.rows, summary.cols)?,
        ));
    }

    let mut panels = Vec::new();
    for source in ["truth", "initial", "esmda", "shm-ked"] {
        let (v, _, _) = read_matrix(report_dir, &format!("lnk_{source}.csv"))?;
        panels.push((source.to_string(), v));
    }
    out.push(text(
        "lnk_maps.svg",
        map_figure("Layer-averaged ln K (ensemble means)", &panels, summary.rows, summary.cols)?,
    ));

    let metrics = read("metrics.csv")?;
    let mut labels = Vec::new();
    let (mut mean, mut field) = (Vec::new(), Vec::new());
    for line in metrics.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| CliError::other("malformed metrics.csv"));
        if f.len() != 5 {
            return Err(CliError::other("malformed metrics.csv"));
        }
        labels.push(f[0].to_string());
        mean.push(num(f[1])?);
        field.push(num(f[2])?);
    }
    out.push(text(
        "rmse.svg",
        bar_chart(
            "Production RMSE",
            &labels,
            &[("ensemble mean".to_string(), mean), ("mean field".to_string(), field)],
        )?,
    ));
    Ok(out)
}
