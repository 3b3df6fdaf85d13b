//! Standalone SVG plots of sweep rows. Output bytes depend only on the rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{GenlabError, Result};
use crate::report::{format_g_digits, SweepResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    DivergenceVsWidth,
    GapVsWidth,
    FrechetVsDivergence,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::DivergenceVsWidth, PlotKind::GapVsWidth, PlotKind::FrechetVsDivergence];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::DivergenceVsWidth => "divergence_vs_width",
            PlotKind::GapVsWidth => "gap_vs_width",
            PlotKind::FrechetVsDivergence => "frechet_vs_divergence",
        }
    }
}

impl FromStr for PlotKind {
    type Err = GenlabError;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let known: Vec<_> = PlotKind::ALL.iter().map(|k| k.as_str()).collect();
            GenlabError::Usage(format!("unknown plot kind `{s}`, expected one of {}", known.join(", ")))
        })
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
    color: &'static str,
    /// Scatter series draw markers only.
    line: bool,
}

struct Chart {
    title: &'static str,
    x_label: &'static str,
    y_label: &'static str,
    /// Tick at every distinct x, labelled `2^x`.
    log2_x: bool,
    series: Vec<Series>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Median over seeds of `value` at each width, x = log₂ width.
fn per_width(rows: &[SweepResultRow], value: impl Fn(&SweepResultRow) -> f64) -> Vec<(f64, f64)> {
    let mut by_width: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let v = value(r);
        if v.is_finite() {
            by_width.entry(r.width).or_default().push(v);
        }
    }
    by_width
        .into_iter()
        .map(|(w, vs)| ((w as f64).log2(), median(vs)))
        .collect()
}

type Getter = fn(&SweepResultRow) -> f64;

fn width_series(rows: &[SweepResultRow], specs: &[(&str, Getter, bool)]) -> Vec<Series> {
    specs
        .iter()
        .enumerate()
        .map(|(i, &(label, get, dashed))| Series {
            label: label.to_string(),
            points: per_width(rows, get),
            dashed,
            color: PALETTE[(i / 2) % PALETTE.len()],
            line: true,
        })
        .collect()
}

fn build(rows: &[SweepResultRow], kind: PlotKind) -> Chart {
    match kind {
        PlotKind::DivergenceVsWidth => Chart {
            title: "Critic divergence vs discriminator width (median over seeds)",
            x_label: "discriminator width multiplier (log2)",
            y_label: "divergence",
            log2_x: true,
            series: width_series(
                rows,
                &[
                    ("original train1", |r| r.l_o_train1, false),
                    ("original test", |r| r.l_o_test, true),
                    ("auxiliary train1", |r| r.l_a_train1, false),
                    ("auxiliary test", |r| r.l_a_test, true),
                    ("independent train1", |r| r.l_i_base_train1, false),
                    ("independent test", |r| r.l_i_base_test, true),
                ],
            ),
        },
        PlotKind::GapVsWidth => Chart {
            title: "Generalization gaps vs discriminator width (median over seeds)",
            x_label: "discriminator width multiplier (log2)",
            y_label: "gap",
            log2_x: true,
            series: width_series(
                rows,
                &[
                    ("generator gap", |r| r.generator_gap, false),
                    ("generator gap SE", |r| r.generator_gap_se, true),
                    ("original train1 - test", |r| r.l_o_train1 - r.l_o_test, false),
                    ("auxiliary train1 - test", |r| r.l_a_train1 - r.l_a_test, false),
                ],
            ),
        },
        PlotKind::FrechetVsDivergence => {
            let ok = || rows.iter().filter(|r| r.is_ok());
            let pts = |f: fn(&SweepResultRow) -> (f64, f64)| -> Vec<(f64, f64)> {
                ok().map(f).filter(|p| p.0.is_finite() && p.1.is_finite()).collect()
            };
            Chart {
                title: "Frechet distance vs independent critic divergence",
                x_label: "independent divergence (baseline width)",
                y_label: "Frechet distance",
                log2_x: false,
                series: vec![
                    Series {
                        label: "train1".into(),
                        points: pts(|r| (r.l_i_base_train1, r.frechet_train1)),
                        dashed: false,
                        color: PALETTE[0],
                        line: false,
                    },
                    Series {
                        label: "test".into(),
                        points: pts(|r| (r.l_i_base_test, r.frechet_test)),
                        dashed: true,
                        color: PALETTE[1],
                        line: false,
                    },
                ],
            }
        }
    }
}

fn padded_range(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let d = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - d, hi + d);
    }
    let d = (hi - lo) * pad;
    (lo - d, hi + d)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render(chart: &Chart) -> String {
    let all = || chart.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = padded_range(all().map(|p| p.0), if chart.log2_x { 0.08 } else { 0.05 });
    let (y0, y1) = padded_range(all().map(|p| p.1), 0.05);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(chart.title)
    );
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" data-x-range="{} {}" data-y-range="{} {}"/>"#,
        format_g_digits(x0, 17),
        format_g_digits(x1, 17),
        format_g_digits(y0, 17),
        format_g_digits(y1, 17)
    );

    let x_ticks: Vec<f64> = if chart.log2_x {
        let mut xs: Vec<f64> = all().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    } else {
        (0..=4).map(|i| x0 + (x1 - x0) * i as f64 / 4.0).collect()
    };
    for x in x_ticks {
        let px = sx(x);
        let label = if chart.log2_x { format!("{}", x.exp2().round()) } else { format_g_digits(x, 3) };
        let _ = writeln!(
            s,
            r#"<line x1="{px:.3}" y1="{:.3}" x2="{px:.3}" y2="{:.3}" stroke="black"/><text x="{px:.3}" y="{:.3}" text-anchor="middle">{label}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0
        );
    }
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let py = sy(y);
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{py:.3}" x2="{LEFT}" y2="{py:.3}" stroke="black"/><text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            format_g_digits(y, 3)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(chart.y_label)
    );

    for (i, series) in chart.series.iter().enumerate() {
        let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let label = escape(&series.label);
        if series.line && !series.points.is_empty() {
            let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="series" data-series="{i}" data-label="{label}" fill="none" stroke="{}" stroke-width="2"{dash} points="{}"/>"#,
                series.color,
                pts.join(" ")
            );
        }
        let fill = if series.dashed { "white" } else { series.color };
        for &(x, y) in &series.points {
            let _ = writeln!(
                s,
                r#"<circle class="marker" data-series="{i}" cx="{:.3}" cy="{:.3}" r="4" fill="{fill}" stroke="{}" stroke-width="1.5"/>"#,
                sx(x),
                sy(y),
                series.color
            );
        }
        let ly = TOP + 12.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><circle cx="{:.1}" cy="{ly}" r="4" fill="{fill}" stroke="{}"/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            lx + 30.0,
            series.color,
            lx + 15.0,
            series.color,
            lx + 38.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_svg(rows: &[SweepResultRow], kind: PlotKind) -> Result<String> {
    if rows.is_empty() {
        return Err(GenlabError::Usage("cannot plot zero rows".into()));
    }
    Ok(render(&build(rows, kind)))
}

pub fn write_svg_plot(path: &Path, rows: &[SweepResultRow], kind: PlotKind) -> Result<()> {
    let svg = render_svg(rows, kind)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| GenlabError::io(dir, e))?;
    }
    fs::write(path, svg).map_err(|e| GenlabError::io(path, e))
}
