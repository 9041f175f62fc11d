//! Two- and three-set Venn diagrams of atom masses.

use std::fmt::Write;

use xfvar::algebra::{measure_coarsen, ExplanationMeasure};
use xfvar::subset::{self, Mask};

use crate::error::{CliError, VENN};

const RADIUS: f64 = 100.0;
const CENTERS: [(f64, f64); 3] = [(150.0, 150.0), (250.0, 150.0), (200.0, 237.0)];
/// Label positions of the regions, indexed by atom mask.
const LABELS_2: [(f64, f64); 4] = [(60.0, 25.0), (110.0, 150.0), (290.0, 150.0), (200.0, 150.0)];
const LABELS_3: [(f64, f64); 8] = [
    (60.0, 25.0),
    (115.0, 120.0),
    (285.0, 120.0),
    (200.0, 105.0),
    (200.0, 300.0),
    (145.0, 215.0),
    (255.0, 215.0),
    (200.0, 180.0),
];
const NAME_POS: [(f64, f64); 3] = [(75.0, 50.0), (325.0, 50.0), (200.0, 362.0)];
const FILLS: [&str; 3] = ["#4c78a8", "#f58518", "#54a24b"];

/// Restricts the measure to its non-outcome variables.
pub fn venn_measure(m: &ExplanationMeasure<f64>) -> Result<ExplanationMeasure<f64>, CliError> {
    let groups: Vec<(String, Mask)> = (0..m.var_count())
        .filter(|&k| Some(k) != m.outcome())
        .map(|k| (m.names()[k].clone(), 1 << k))
        .collect();
    if !(2..=3).contains(&groups.len()) {
        return Err(CliError::new(
            VENN,
            format!(
                "venn supports 2 or 3 variables, report has {}",
                groups.len()
            ),
        ));
    }
    measure_coarsen(m, &groups).map_err(|e| CliError::internal(e.to_string()))
}

fn region_name(mask: Mask, names: &[String]) -> String {
    if mask == 0 {
        return "outside".to_string();
    }
    let parts: Vec<&str> = subset::indices(mask).map(|k| names[k].as_str()).collect();
    format!("{{{}}}", parts.join("∧"))
}

/// Three decimals, without a sign on values that round to zero.
fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One row per region: `{A∧B}  0.250`, ending with the outside mass.
pub fn ascii(m: &ExplanationMeasure<f64>) -> String {
    let n = m.atoms().len();
    let rows: Vec<(String, String)> = (1..n)
        .chain(std::iter::once(0))
        .map(|s| (region_name(s as Mask, m.names()), fmt3(m.atom(s as Mask))))
        .collect();
    let width = rows
        .iter()
        .map(|(r, _)| r.chars().count())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (region, v) in rows {
        let pad = width - region.chars().count();
        writeln!(out, "{region}{}  {v}", " ".repeat(pad)).expect("string write");
    }
    out
}

/// Fixed-layout SVG; identical measures give identical bytes.
pub fn svg(m: &ExplanationMeasure<f64>) -> String {
    let k = m.var_count();
    let (labels, height): (&[(f64, f64)], u32) = if k == 2 {
        (&LABELS_2, 280)
    } else {
        (&LABELS_3, 380)
    };
    let mut out = String::new();
    let w = &mut out;
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"{height}\" viewBox=\"0 0 400 {height}\">"
    )
    .expect("string write");
    writeln!(
        w,
        "<rect x=\"0\" y=\"0\" width=\"400\" height=\"{height}\" fill=\"white\" stroke=\"black\"/>"
    )
    .expect("string write");
    for (&(cx, cy), fill) in CENTERS.iter().zip(FILLS).take(k) {
        writeln!(
            w,
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{RADIUS}\" fill=\"{fill}\" fill-opacity=\"0.25\" stroke=\"black\"/>"
        )
        .expect("string write");
    }
    for (&(x, y), name) in NAME_POS.iter().zip(m.names()) {
        writeln!(
            w,
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            escape(name)
        )
        .expect("string write");
    }
    for (s, &(x, y)) in labels.iter().enumerate() {
        let value = fmt3(m.atom(s as Mask));
        let text = if s == 0 {
            format!("outside {value}")
        } else {
            value
        };
        writeln!(
            w,
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{text}</text>"
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    out
}
