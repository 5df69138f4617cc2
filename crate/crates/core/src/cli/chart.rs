//! Trace CSV reading and SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::CliError;
use crate::qce::fit_exponent;

/// Parsed trace CSV. Numeric cells that are empty become `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub n: Vec<usize>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
    pub status: Vec<String>,
}

impl TraceTable {
    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns
            .iter()
            .find(|(c, _)| c == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Direction tags, in column order.
    pub fn tags(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter_map(|(c, _)| c.strip_prefix("mean_Dn_").map(str::to_string))
            .collect()
    }

    pub fn is_ok(&self, row: usize) -> bool {
        self.status[row] == "ok"
    }
}

fn parse_error(line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_trace_csv(text: &str) -> Result<TraceTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    let n_col = headers
        .iter()
        .position(|h| h == "n")
        .ok_or_else(|| parse_error(1, "missing column `n`"))?;
    let status_col = headers.iter().position(|h| h == "status");
    let numeric: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != n_col && Some(i) != status_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut table = TraceTable {
        n: Vec::new(),
        columns: numeric.iter().map(|(_, h)| (h.clone(), Vec::new())).collect(),
        status: Vec::new(),
    };
    let mut last_line = 1;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        last_line = line;
        let n = rec[n_col]
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_error(line, format!("bad step `{}`", &rec[n_col])))?;
        table.n.push(n);
        for (k, (i, name)) in numeric.iter().enumerate() {
            let cell = rec[*i].trim();
            let value = if cell.is_empty() {
                None
            } else {
                Some(
                    cell.parse::<f64>()
                        .map_err(|_| parse_error(line, format!("bad number `{cell}` in `{name}`")))?,
                )
            };
            table.columns[k].1.push(value);
        }
        table
            .status
            .push(status_col.map_or("ok".into(), |i| rec[i].trim().to_string()));
    }
    match table.n.len() {
        0 => Err(parse_error(1, "no data rows after header")),
        1 => Err(parse_error(last_line, "a chart needs at least 2 rows")),
        _ => Ok(table),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Growth for several directions, `⟨Dₙ⟩` for one.
    Auto,
    Growth,
    Dn,
    Loglog,
}

impl Quantity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Self::Auto),
            "growth" => Some(Self::Growth),
            "dn" => Some(Self::Dn),
            "loglog" => Some(Self::Loglog),
            _ => None,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Self::Growth | Self::Auto => "mean_growth_",
            Self::Dn => "mean_Dn_",
            Self::Loglog => "loglog_",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Growth | Self::Auto => "(1/n)⟨Dₙ − D₀⟩",
            Self::Dn => "⟨Dₙ⟩",
            Self::Loglog => "⟨Dₙ⟩ / log log(n+1)",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChartOptions {
    pub quantity: Quantity,
    /// Draw `λ + c/n` curves for growth charts.
    pub fit: bool,
    pub fit_min_n: usize,
    pub title: Option<String>,
}

impl Default for ChartOptions {
    fn default() -> Self {
        Self {
            quantity: Quantity::Auto,
            fit: true,
            fit_min_n: 2,
            title: None,
        }
    }
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    tag: String,
    points: Vec<(f64, f64, bool)>,
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn tick_label(x: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{x:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a self-contained SVG.
pub fn render_chart(table: &TraceTable, opts: &ChartOptions) -> Result<String, CliError> {
    let tags = table.tags();
    let quantity = match opts.quantity {
        Quantity::Auto if tags.len() > 1 => Quantity::Growth,
        Quantity::Auto => Quantity::Dn,
        q => q,
    };
    let mut series = Vec::new();
    for tag in &tags {
        let name = format!("{}{tag}", quantity.prefix());
        let col = table
            .column(&name)
            .ok_or_else(|| parse_error(1, format!("missing column `{name}`")))?;
        let points = col
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|y| (table.n[i] as f64, y, table.is_ok(i))))
            .collect();
        series.push(Series {
            tag: tag.clone(),
            points,
        });
    }

    let fit = if opts.fit && quantity == Quantity::Growth {
        let data: Vec<Vec<(usize, f64)>> = series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter(|p| p.2 && p.0 as usize >= opts.fit_min_n.max(1))
                    .map(|p| (p.0 as usize, p.1))
                    .collect()
            })
            .collect();
        fit_exponent(&data).ok()
    } else {
        None
    };

    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in series.iter().flat_map(|s| &s.points) {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    if !x0.is_finite() {
        return Err(parse_error(1, format!("no values for {}", quantity.label())));
    }
    let curves: Vec<Vec<(f64, f64)>> = match &fit {
        Some(e) => e
            .transients
            .iter()
            .map(|c| {
                let a = e.n_range.0 as f64;
                (0..=120)
                    .map(|k| {
                        let n = a + (x1 - a) * k as f64 / 120.0;
                        (n, e.lambda + c / n)
                    })
                    .collect()
            })
            .collect(),
        None => Vec::new(),
    };
    if let Some(e) = &fit {
        y0 = y0.min(e.lambda);
        y1 = y1.max(e.lambda);
    }
    for &(_, y) in curves.iter().flatten() {
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 - y0 < 1e-12 {
        let pad = y0.abs().max(1.0) * 0.1;
        y0 -= pad;
        y1 += pad;
    }
    let pad = 0.06 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if let Some(t) = &opts.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            escape(t)
        );
    }
    let xstep = nice_step(x1 - x0, 6);
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 18.0,
            tick_label(t, xstep)
        );
    }
    let ystep = nice_step(y1 - y0, 6);
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t, ystep)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n</text>"#,
        LEFT + pw / 2.0,
        H - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(quantity.label())
    );

    if let Some(e) = &fit {
        let y = sy(e.lambda);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="gray" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" text-anchor="end" fill="gray">λ = {:.4}</text>"#,
            LEFT + pw,
            LEFT + pw - 6.0,
            y - 6.0,
            e.lambda
        );
    }
    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = curve
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<g fill="{color}" stroke="{color}">"#);
        for &(x, y, ok) in &ser.points {
            let fill = if ok { color } else { "none" };
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{fill}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let mut legend: Vec<(String, &str, bool)> = series
        .iter()
        .enumerate()
        .map(|(i, ser)| (format!("direction {}", ser.tag), COLORS[i % COLORS.len()], false))
        .collect();
    if fit.is_some() {
        legend.push(("fit λ + c/n, shared λ".into(), "gray", true));
    }
    for (k, (label, color, line)) in legend.iter().enumerate() {
        let y = TOP + 16.0 + 16.0 * k as f64;
        let x = LEFT + pw - 190.0;
        if *line {
            let _ = write!(
                s,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="1.5"/>"#,
                x - 6.0,
                x + 6.0
            );
        } else {
            let _ = write!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 12.0,
            y + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Read `csv_path` and write the chart to `svg_path`.
pub fn emit_chart(csv_path: &Path, svg_path: &Path, opts: &ChartOptions) -> Result<(), CliError> {
    let text = fs::read_to_string(csv_path).map_err(|e| CliError::io(csv_path, e))?;
    let table = read_trace_csv(&text)?;
    let svg = render_chart(&table, opts)?;
    fs::write(svg_path, svg).map_err(|e| CliError::io(svg_path, e))
}
