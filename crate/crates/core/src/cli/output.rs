use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use super::CliError;

/// Fixed 17-significant-digit rendering.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let cells: Vec<String> = cells.into_iter().collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::numeric(format!("cannot serialize report: {e}")))
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

/// Parses "1,2,3" into 0-based coordinate indices below `dim`.
pub fn validate_projection(spec: &str, dim: usize) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let i: usize = part.trim().parse().map_err(|_| format!("bad coordinate '{}' in --proj", part.trim()))?;
        if i == 0 || i > dim {
            return Err(format!("coordinate {i} outside 1..={dim}"));
        }
        out.push(i - 1);
    }
    if !(2..=3).contains(&out.len()) {
        return Err(format!("--proj needs 2 or 3 coordinates, got {}", out.len()));
    }
    Ok(out)
}

/// Static SVG polyline of `(x, y)` points fitted into a 512×512 canvas.
pub fn svg_polyline(points: &[(f64, f64)], title: &str) -> String {
    const SIZE: f64 = 512.0;
    const MARGIN: f64 = 16.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let k = (SIZE - 2.0 * MARGIN) / span;
    let mut coords = String::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        if i > 0 {
            coords.push(' ');
        }
        let _ = write!(coords, "{:.3},{:.3}", MARGIN + (x - x0) * k, SIZE - MARGIN - (y - y0) * k);
    }
    let title = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <title>{title}</title>\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"{coords}\"/>\n\
         </svg>\n"
    )
}
