//! File formats: Matrix Market for matrices and vectors, CSV for spectra and
//! SVG scatter plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::spectral::{SpectrumMetadata, SpectrumReport};

/// Contents of a Matrix Market file.
#[derive(Clone, Debug, PartialEq)]
pub enum MmObject {
    /// Coordinate format.
    Matrix(CsrMatrix),
    /// Dense single-column array format.
    Vector(Vec<f64>),
}

/// Seventeen significant digits, enough to round-trip any `f64`.
fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Coordinate Matrix Market text. Exactly symmetric matrices are stored as
/// their lower triangle with the `symmetric` qualifier.
pub fn matrix_market_string(a: &CsrMatrix) -> String {
    let symmetric = a.rows() == a.cols() && a.asymmetry() == 0.0;
    let mut entries = Vec::with_capacity(a.nnz());
    for i in 0..a.rows() {
        let (idx, val) = a.row(i);
        for (j, v) in idx.iter().zip(val) {
            if !symmetric || *j <= i {
                entries.push((i, *j, *v));
            }
        }
    }
    let mut s = format!(
        "%%MatrixMarket matrix coordinate real {}\n{} {} {}\n",
        if symmetric { "symmetric" } else { "general" },
        a.rows(),
        a.cols(),
        entries.len()
    );
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {}", i + 1, j + 1, fmt_real(v));
    }
    s
}

/// Array Matrix Market text for a column vector.
pub fn vector_market_string(x: &[f64]) -> String {
    let mut s = format!("%%MatrixMarket matrix array real general\n{} 1\n", x.len());
    for v in x {
        s.push_str(&fmt_real(*v));
        s.push('\n');
    }
    s
}

pub fn write_matrix_market(a: &CsrMatrix, path: &Path) -> Result<()> {
    fs::write(path, matrix_market_string(a)).map_err(|e| Error::io(path, e))
}

pub fn write_vector_market(x: &[f64], path: &Path) -> Result<()> {
    fs::write(path, vector_market_string(x)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_market(path: &Path) -> Result<MmObject> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses real or integer matrices in coordinate or array format with
/// `general` or `symmetric` structure.
pub fn parse_matrix_market(text: &str) -> Result<MmObject> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, format!("invalid header `{header}`")));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported format `{other}`"))),
    };
    if !matches!(tokens[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_err(1, format!("unsupported field `{}`", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry `{other}`"))),
    };
    let mut data = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line, size) = data
        .next()
        .ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(size_line, format!("invalid size `{t}`")))
        })
        .collect::<Result<_>>()?;
    let real = |line: usize, t: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|_| parse_err(line, format!("invalid value `{t}`")))
    };
    if coordinate {
        let &[rows, cols, nnz] = dims.as_slice() else {
            return Err(parse_err(size_line, "expected `rows cols entries`"));
        };
        let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
        let mut count = 0;
        for (ln, l) in data {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(parse_err(ln, "expected `row col value`"));
            }
            let index = |s: &str, bound: usize| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(k) if k >= 1 && k <= bound => Ok(k - 1),
                    _ => Err(parse_err(
                        ln,
                        format!("index `{s}` out of range 1..={bound}"),
                    )),
                }
            };
            let (i, j, v) = (index(t[0], rows)?, index(t[1], cols)?, real(ln, t[2])?);
            if symmetric && j > i {
                return Err(parse_err(
                    ln,
                    "symmetric storage holds the lower triangle only",
                ));
            }
            triplets.push((i, j, v));
            if symmetric && i != j {
                triplets.push((j, i, v));
            }
            count += 1;
        }
        if count != nnz {
            return Err(parse_err(
                size_line,
                format!("declared {nnz} entries, found {count}"),
            ));
        }
        Ok(MmObject::Matrix(CsrMatrix::from_triplets(
            rows, cols, &triplets,
        )?))
    } else {
        let &[rows, cols] = dims.as_slice() else {
            return Err(parse_err(size_line, "expected `rows cols`"));
        };
        if cols != 1 || symmetric {
            return Err(parse_err(
                size_line,
                "only general single-column arrays are supported",
            ));
        }
        let values: Vec<f64> = data.map(|(ln, l)| real(ln, l)).collect::<Result<_>>()?;
        if values.len() != rows {
            return Err(parse_err(
                size_line,
                format!("declared {rows} values, found {}", values.len()),
            ));
        }
        Ok(MmObject::Vector(values))
    }
}

/// Spectrum as CSV: `#`-prefixed metadata lines followed by `re,im` rows.
pub fn spectrum_csv_string(report: &SpectrumReport) -> String {
    let m = &report.metadata;
    let mut s = String::new();
    let _ = writeln!(s, "# label={}", m.label);
    let _ = writeln!(
        s,
        "# gamma1={} gamma2={} beta={} beta2={}",
        m.gamma1, m.gamma2, m.beta, m.beta2
    );
    let _ = writeln!(s, "# n={} m={} l={}", m.n, m.m, m.l);
    let _ = writeln!(
        s,
        "# count_at_one={} eta={} max_imag={}",
        report.count_at_one, report.eta, report.max_imag
    );
    s.push_str("re,im\n");
    for z in &report.eigenvalues {
        let _ = writeln!(s, "{},{}", fmt_real(z.re), fmt_real(z.im));
    }
    s
}

pub fn write_spectrum_csv(report: &SpectrumReport, path: &Path) -> Result<()> {
    fs::write(path, spectrum_csv_string(report)).map_err(|e| Error::io(path, e))
}

/// Reads a spectrum CSV back; summaries are recomputed from the values.
pub fn parse_spectrum_csv(text: &str) -> Result<SpectrumReport> {
    let mut meta = SpectrumMetadata::default();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| l.starts_with('#')) {
        for kv in line.trim_start_matches('#').split_whitespace() {
            let Some((k, v)) = kv.split_once('=') else {
                return Err(parse_err(i + 1, format!("expected key=value, got `{kv}`")));
            };
            let num = || {
                v.parse::<f64>()
                    .map_err(|_| parse_err(i + 1, format!("invalid number `{v}`")))
            };
            let int = || {
                v.parse::<usize>()
                    .map_err(|_| parse_err(i + 1, format!("invalid count `{v}`")))
            };
            match k {
                "label" => meta.label = v.to_string(),
                "gamma1" => meta.gamma1 = num()?,
                "gamma2" => meta.gamma2 = num()?,
                "beta" => meta.beta = num()?,
                "beta2" => meta.beta2 = num()?,
                "n" => meta.n = int()?,
                "m" => meta.m = int()?,
                "l" => meta.l = int()?,
                _ => {}
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let get = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| parse_err(line, "expected `re,im`"))?
                .trim()
                .parse()
                .map_err(|_| parse_err(line, "invalid number"))
        };
        values.push(Complex64::new(get(0)?, get(1)?));
    }
    Ok(SpectrumReport::from_eigenvalues(values, meta))
}

/// One set of points drawn with a common color.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    /// Connect consecutive points.
    pub line: bool,
}

impl Series {
    pub fn scatter(
        name: impl Into<String>,
        points: Vec<(f64, f64)>,
        color: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            points,
            color: color.into(),
            line: false,
        }
    }
}

/// A scatter or line plot with optional logarithmic axes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl ScatterPlot {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    fn range(&self, pick: impl Fn(&(f64, f64)) -> f64, log: bool) -> (f64, f64) {
        let vals = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(&pick))
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v });
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        if !lo.is_finite() {
            return (0.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            return (lo - 0.5, hi + 0.5);
        }
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }

    /// The plot as an SVG document. Points that are not finite, or not
    /// positive on a logarithmic axis, are skipped.
    pub fn to_svg(&self) -> String {
        let (x0, x1) = self.range(|p| p.0, self.log_x);
        let (y0, y1) = self.range(|p| p.1, self.log_y);
        let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * pw;
        let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph;
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let label = |v: f64, log: bool| {
            if log {
                format!("1e{v:.1}")
            } else {
                format!("{v:.3e}")
            }
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            MARGIN / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<g class="axes" stroke="black" fill="none"><rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}"/></g>"#
        );
        for k in 0..=TICKS {
            let f = k as f64 / TICKS as f64;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
                HEIGHT - MARGIN,
                HEIGHT - MARGIN + 5.0,
                HEIGHT - MARGIN + 18.0,
                label(xv, self.log_x)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
                MARGIN - 5.0,
                MARGIN - 7.0,
                py + 3.0,
                label(yv, self.log_y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = series
                .points
                .iter()
                .filter(|(x, y)| {
                    x.is_finite()
                        && y.is_finite()
                        && (!self.log_x || *x > 0.0)
                        && (!self.log_y || *y > 0.0)
                })
                .map(|(x, y)| (sx(tx(*x)), sy(ty(*y))))
                .collect();
            let _ = writeln!(
                s,
                r#"<g class="series" fill="{0}" stroke="{0}">"#,
                escape(&series.color)
            );
            if series.line && pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" points="{}"/>"#, path.join(" "));
            }
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2"/>"#);
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" stroke="none">{}</text></g>"#,
                WIDTH - MARGIN - 120.0,
                MARGIN + 15.0 + 14.0 * k as f64,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_svg()).map_err(|e| Error::io(path, e))
    }
}

/// Complex-plane scatter of a spectrum.
pub fn spectrum_plot(report: &SpectrumReport) -> ScatterPlot {
    let mut plot = ScatterPlot::new(
        format!("{} spectrum", report.metadata.label),
        "Re λ",
        "Im λ",
    );
    plot.series.push(Series::scatter(
        "eigenvalues",
        report.eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
        "seagreen",
    ));
    plot
}
