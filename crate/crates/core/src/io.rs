//! Curve and homotopy files, the energy-trace CSV and SVG rendering.
//!
//! Curve JSON is `{"nodes": [[x, y], ...]}`; curve CSV is one `x,y` row per
//! node without a header. Homotopy JSON is `{"N": .., "n": .., "slices":
//! [[[x, y], ...], ...]}`, time-major. Floats are written in shortest
//! round-trip form, so save-then-load reproduces every coordinate exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::{bounding_box, PolyCurve};
use crate::error::{Error, Result};
use crate::optimizer::TraceRow;
use crate::path::Homotopy;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveFormat {
    /// By file extension: `.csv` is CSV, anything else JSON.
    #[default]
    Auto,
    Json,
    Csv,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveDoc {
    nodes: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HomotopyDoc {
    #[serde(rename = "N")]
    big_n: usize,
    n: usize,
    slices: Vec<Vec<[f64; 2]>>,
}

fn parse_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), msg: msg.into() }
}

fn json_err(path: &str, e: serde_json::Error) -> Error {
    parse_err(path, format!("line {} column {}: {}", e.line(), e.column(), e))
}

fn to_points(nodes: &[Vec2]) -> Vec<[f64; 2]> {
    nodes.iter().map(|p| [p.x, p.y]).collect()
}

/// Parses and validates a curve (at least 3 finite nodes, no zero chords).
pub fn parse_curve_json(text: &str, path: &str) -> Result<PolyCurve> {
    let doc: CurveDoc = serde_json::from_str(text).map_err(|e| json_err(path, e))?;
    PolyCurve::new_immersed(doc.nodes.iter().map(|p| Vec2::new(p[0], p[1])).collect())
}

pub fn parse_curve_csv(text: &str, path: &str) -> Result<PolyCurve> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut nodes = Vec::new();
    for record in reader.deserialize::<(f64, f64)>() {
        let (x, y) = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, format!("line {line}: {e}"))
        })?;
        nodes.push(Vec2::new(x, y));
    }
    PolyCurve::new_immersed(nodes)
}

pub fn load_curve(path: &Path, format: CurveFormat) -> Result<PolyCurve> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let csv = match format {
        CurveFormat::Csv => true,
        CurveFormat::Json => false,
        CurveFormat::Auto => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    if csv {
        parse_curve_csv(&text, &name)
    } else {
        parse_curve_json(&text, &name)
    }
}

pub fn curve_to_json(curve: &PolyCurve) -> String {
    let doc = CurveDoc { nodes: to_points(curve.nodes()) };
    serde_json::to_string(&doc).expect("finite floats serialize") + "\n"
}

pub fn curve_to_csv(curve: &PolyCurve) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for p in curve.nodes() {
        w.serialize((p.x, p.y)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
}

pub fn save_curve(curve: &PolyCurve, path: &Path, format: CurveFormat) -> Result<()> {
    let csv = match format {
        CurveFormat::Csv => true,
        CurveFormat::Json => false,
        CurveFormat::Auto => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    fs::write(path, if csv { curve_to_csv(curve) } else { curve_to_json(curve) })?;
    Ok(())
}

pub fn parse_homotopy_json(text: &str, path: &str) -> Result<Homotopy> {
    let doc: HomotopyDoc = serde_json::from_str(text).map_err(|e| json_err(path, e))?;
    if doc.slices.len() != doc.big_n {
        return Err(parse_err(path, format!("N = {} but {} slices given", doc.big_n, doc.slices.len())));
    }
    if let Some((i, s)) = doc.slices.iter().enumerate().find(|(_, s)| s.len() != doc.n) {
        return Err(parse_err(path, format!("n = {} but slice {i} has {} nodes", doc.n, s.len())));
    }
    let slices = doc
        .slices
        .iter()
        .map(|s| PolyCurve::new(s.iter().map(|p| Vec2::new(p[0], p[1])).collect()))
        .collect::<Result<Vec<_>>>()?;
    Homotopy::new(slices)
}

pub fn load_homotopy(path: &Path) -> Result<Homotopy> {
    parse_homotopy_json(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn homotopy_to_json(h: &Homotopy) -> String {
    let doc = HomotopyDoc {
        big_n: h.num_slices(),
        n: h.num_nodes(),
        slices: h.slices().iter().map(|s| to_points(s.nodes())).collect(),
    };
    serde_json::to_string(&doc).expect("finite floats serialize") + "\n"
}

pub fn save_homotopy(h: &Homotopy, path: &Path) -> Result<()> {
    fs::write(path, homotopy_to_json(h))?;
    Ok(())
}

/// Columns `iter,eps,objective,energy_part,match_part,grad_norm,step`.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
}

pub fn save_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    fs::write(path, trace_to_csv(rows))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgStyle {
    /// Side of the square canvas in user units.
    pub size: f64,
    pub margin: f64,
    pub stroke_width: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self { size: 512.0, margin: 16.0, stroke_width: 1.5 }
    }
}

/// Slice `i` of `slices` is drawn in `rgb(255 t, 0, 255 (1 - t))`,
/// `t = i / (slices - 1)`: pure blue first, pure red last.
pub fn slice_color(i: usize, slices: usize) -> (u8, u8, u8) {
    let t = if slices > 1 { i as f64 / (slices - 1) as f64 } else { 0.0 };
    ((255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8)
}

/// One closed polyline per slice colored blue to red, the source slice
/// overlaid in black and, if given, the target as a dashed outline. The
/// output depends only on the input coordinates.
pub fn render_svg(h: &Homotopy, target: Option<&PolyCurve>, style: &SvgStyle) -> String {
    let mut all: Vec<PolyCurve> = h.slices().to_vec();
    if let Some(t) = target {
        all.push(t.clone());
    }
    let (lo, hi) = bounding_box(&all);
    let extent = (hi - lo).max();
    let scale = if extent > 0.0 { (style.size - 2.0 * style.margin) / extent } else { 1.0 };
    // y grows downwards in SVG.
    let map = |p: &Vec2| ((p.x - lo.x) * scale + style.margin, (hi.y - p.y) * scale + style.margin);
    let points = |c: &PolyCurve| {
        c.nodes()
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = style.size
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let big_n = h.num_slices();
    for (i, s) in h.slices().iter().enumerate() {
        let (r, g, b) = slice_color(i, big_n);
        let _ = writeln!(
            out,
            r##"<polygon class="slice" data-index="{i}" fill="none" stroke="#{r:02x}{g:02x}{b:02x}" stroke-width="{w}" points="{p}"/>"##,
            w = style.stroke_width,
            p = points(s)
        );
    }
    let _ = writeln!(
        out,
        r#"<polygon class="source" fill="none" stroke="black" stroke-width="{w}" points="{p}"/>"#,
        w = style.stroke_width,
        p = points(h.first())
    );
    if let Some(t) = target {
        let _ = writeln!(
            out,
            r#"<polygon class="target" fill="none" stroke="black" stroke-width="{w}" stroke-dasharray="6,4" points="{p}"/>"#,
            w = style.stroke_width,
            p = points(t)
        );
    }
    out.push_str("</svg>\n");
    out
}
