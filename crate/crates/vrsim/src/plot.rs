//! Self-contained SVG line charts from trace CSV files.
//!
//! Each series is also embedded as a comment,
//! `<!-- series label="…" points="x,y;x,y;…" -->`, with the unscaled values
//! so the chart can be parsed back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    LossVsIter,
    LossVsSfo,
    Gradnorm,
    Stability,
}

impl PlotKind {
    /// `(x column, y column, x label, y label)`
    fn columns(self) -> (&'static str, &'static str, &'static str, &'static str) {
        match self {
            PlotKind::LossVsIter => ("k", "loss", "iteration k", "f(x_k)"),
            PlotKind::LossVsSfo => ("sfo_paper", "loss", "SFO calls", "f(x_k)"),
            PlotKind::Gradnorm => ("k", "grad_norm_sq", "iteration k", "|grad f(x_k)|^2"),
            PlotKind::Stability => ("k", "delta_norm", "iteration k", "|x_k - x'_k|"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads the series for `kind` from each file. Files with an `algorithm`
/// column yield one series per algorithm.
pub fn load_series(files: &[PathBuf], kind: PlotKind) -> Result<Vec<Series>> {
    if files.is_empty() {
        return Err(CliError::Config("plot: no trace files given".into()));
    }
    let (xc, yc, _, _) = kind.columns();
    let mut out = Vec::new();
    for f in files {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(f)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", f.display())))?;
        let headers = rdr.headers().map_err(|e| CliError::Runtime(format!("{}: {e}", f.display())))?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let (Some(xi), Some(yi)) = (find(xc), find(yc)) else {
            return Err(CliError::Runtime(format!(
                "schema mismatch in {}: {kind:?} plots need columns `{xc}` and `{yc}`",
                f.display()
            )));
        };
        let algo = find("algorithm");
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string();
        let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        let mut order = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Runtime(format!("{}: {e}", f.display())))?;
            let parse = |i: usize, name: &str| -> Result<f64> {
                rec.get(i).unwrap_or("").parse().map_err(|_| {
                    CliError::Runtime(format!("{}: row {}, column `{name}` is not a number", f.display(), row + 1))
                })
            };
            let x = parse(xi, xc)?;
            let y = parse(yi, yc)?;
            let label = match algo {
                Some(a) => format!("{stem}:{}", rec.get(a).unwrap_or("")),
                None => stem.clone(),
            };
            if !groups.contains_key(&label) {
                order.push(label.clone());
            }
            groups.entry(label).or_default().push((x, y));
        }
        for label in order {
            let points = groups.remove(&label).unwrap_or_default();
            out.push(Series { label, points });
        }
    }
    Ok(out)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;").replace("--", "- -")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

/// Renders `series` as an SVG document. With `log_y`, non-positive values
/// are dropped from the drawing (they stay in the embedded data).
pub fn render_svg(series: &[Series], kind: PlotKind, log_y: bool) -> Result<String> {
    if series.is_empty() {
        return Err(CliError::Config("plot: nothing to draw".into()));
    }
    let (_, _, xlabel, ylabel) = kind.columns();
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let drawable = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite() && (!log_y || p.1 > 0.0);

    let mut x_max = f64::NEG_INFINITY;
    let mut x_min = f64::INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for p in s.points.iter().filter(drawable) {
            x_min = x_min.min(p.0);
            x_max = x_max.max(p.0);
            y_min = y_min.min(ty(p.1));
            y_max = y_max.max(ty(p.1));
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * pw;
    let sy = |y: f64| TOP + ph - (y - y_min) / (y_max - y_min) * ph;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(w, "<!-- kind={kind:?} log_y={log_y} -->");
    for s in series {
        let pts: Vec<String> = s.points.iter().map(|(x, y)| format!("{x},{y}")).collect();
        let _ = writeln!(w, r#"<!-- series label="{}" points="{}" -->"#, escape(&s.label), pts.join(";"));
    }
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(w, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let (px, py) = (sx(xv), sy(yv));
        let ylab = if log_y { format!("1e{yv:.1}") } else { tick_label(yv) };
        let _ = writeln!(w, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(w, r#"<text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(xv));
        let _ = writeln!(w, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{ylab}</text>"#, LEFT - 8.0, py + 4.0);
    }
    let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{xlabel}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0);
    let ylab = if log_y { format!("{ylabel} (log10)") } else { ylabel.to_string() };
    let _ = writeln!(
        w,
        r#"<text x="20" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&ylab)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s.points.iter().filter(drawable).map(|p| format!("{:.2},{:.2}", sx(p.0), sy(ty(p.1)))).collect();
        let _ = writeln!(w, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(w, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(w, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, lx + 25.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Parses the embedded series comments back out of an SVG document.
pub fn parse_embedded(svg: &str) -> Vec<Series> {
    let mut out = Vec::new();
    for line in svg.lines() {
        let Some(rest) = line.strip_prefix("<!-- series label=\"") else { continue };
        let Some((label, rest)) = rest.split_once("\" points=\"") else { continue };
        let Some((pts, _)) = rest.split_once("\" -->") else { continue };
        let points = pts
            .split(';')
            .filter(|p| !p.is_empty())
            .filter_map(|p| {
                let (x, y) = p.split_once(',')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect();
        out.push(Series {
            label: label.replace("&quot;", "\"").replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&"),
            points,
        });
    }
    out
}

pub fn plot_files(files: &[PathBuf], kind: PlotKind, log_y: bool) -> Result<String> {
    render_svg(&load_series(files, kind)?, kind, log_y)
}

pub fn default_output(files: &[PathBuf], kind: PlotKind) -> PathBuf {
    let dir = files.first().and_then(|f| f.parent()).unwrap_or(Path::new("."));
    let name = format!("{kind:?}").to_lowercase();
    dir.join(format!("plot-{name}.svg"))
}
