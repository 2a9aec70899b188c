//! Field files and synthetic current fields.
//!
//! A field file is line-oriented UTF-8 text:
//!
//! ```text
//! driftfield 1
//! rows 21
//! cols 29
//! origin -118.26 33.30
//! cell_size 0.0187 0.0119
//! depth 10m
//! time 2011-07-01T00
//! data
//! 0 0 0 0.25 -0.5
//! ...
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The header ends at
//! `data`; `depth` and `time` are optional. Each record is
//! `row col land u v` with `land` in {0, 1}, and every cell appears exactly
//! once. Velocities are in cells per unit time; land cells must have zero
//! velocity.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::VectorField;
use crate::grid::{CellIndex, Workspace};

pub const FORMAT_TAG: &str = "driftfield";
pub const FORMAT_VERSION: u32 = 1;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

pub fn parse_field(text: &str) -> Result<(Workspace, VectorField)> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, magic) = lines.next().ok_or_else(|| parse_err(0, "empty field file"))?;
    let mut it = magic.split_whitespace();
    if it.next() != Some(FORMAT_TAG) {
        return Err(parse_err(ln, format!("expected `{FORMAT_TAG} {FORMAT_VERSION}` header")));
    }
    let version: u32 = parse_num(it.next(), ln, "format version")?;
    if version != FORMAT_VERSION {
        return Err(parse_err(ln, format!("unsupported format version {version}")));
    }

    let mut rows: Option<usize> = None;
    let mut cols: Option<usize> = None;
    let mut origin = None;
    let mut cell_size = None;
    let mut depth = String::new();
    let mut time = String::new();
    let mut data_line = None;
    for (ln, line) in lines.by_ref() {
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let mut toks = rest.split_whitespace();
        match key {
            "rows" => rows = Some(parse_num(toks.next(), ln, "rows")?),
            "cols" => cols = Some(parse_num(toks.next(), ln, "cols")?),
            "origin" => {
                origin = Some((parse_num(toks.next(), ln, "origin lon")?, parse_num(toks.next(), ln, "origin lat")?))
            }
            "cell_size" => {
                cell_size = Some((parse_num(toks.next(), ln, "cell dlon")?, parse_num(toks.next(), ln, "cell dlat")?))
            }
            "depth" => depth = rest.to_string(),
            "time" => time = rest.to_string(),
            "data" => {
                data_line = Some(ln);
                break;
            }
            other => return Err(parse_err(ln, format!("unknown header key {other:?}"))),
        }
    }
    let data_line = data_line.ok_or_else(|| parse_err(0, "missing `data` line"))?;
    let rows = rows.ok_or_else(|| parse_err(data_line, "header lacks `rows`"))?;
    let cols = cols.ok_or_else(|| parse_err(data_line, "header lacks `cols`"))?;
    let origin: (f64, f64) = origin.ok_or_else(|| parse_err(data_line, "header lacks `origin`"))?;
    let cell_size: (f64, f64) = cell_size.ok_or_else(|| parse_err(data_line, "header lacks `cell_size`"))?;
    if rows < 2 || cols < 2 {
        return Err(parse_err(data_line, format!("grid must be at least 2x2, got {rows}x{cols}")));
    }
    let n = rows.checked_mul(cols).filter(|&n| n <= 1 << 26).ok_or_else(|| parse_err(data_line, "grid too large"))?;

    let mut seen = vec![false; n];
    let mut land = vec![false; n];
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut count = 0;
    let mut last_line = data_line;
    for (ln, line) in lines {
        last_line = ln;
        let mut toks = line.split_whitespace();
        let r: usize = parse_num(toks.next(), ln, "row")?;
        let c: usize = parse_num(toks.next(), ln, "col")?;
        let flag: u8 = parse_num(toks.next(), ln, "land flag")?;
        let uu: f64 = parse_num(toks.next(), ln, "u")?;
        let vv: f64 = parse_num(toks.next(), ln, "v")?;
        if toks.next().is_some() {
            return Err(parse_err(ln, "trailing fields in record"));
        }
        if r >= rows || c >= cols {
            return Err(parse_err(ln, format!("cell ({r}, {c}) outside a {rows}x{cols} grid")));
        }
        if flag > 1 {
            return Err(parse_err(ln, format!("land flag must be 0 or 1, got {flag}")));
        }
        if !uu.is_finite() || !vv.is_finite() {
            return Err(parse_err(ln, format!("non-finite velocity at cell ({r}, {c})")));
        }
        if flag == 1 && (uu != 0.0 || vv != 0.0) {
            return Err(parse_err(ln, format!("land cell ({r}, {c}) has nonzero velocity")));
        }
        let i = r * cols + c;
        if seen[i] {
            return Err(parse_err(ln, format!("duplicate record for cell ({r}, {c})")));
        }
        seen[i] = true;
        land[i] = flag == 1;
        u[i] = uu;
        v[i] = vv;
        count += 1;
    }
    if count != n {
        return Err(parse_err(last_line, format!("expected {n} records, found {count}")));
    }
    let w = Workspace::new(rows, cols, origin, cell_size, land).map_err(|e| parse_err(data_line, e.to_string()))?;
    let f = VectorField::new(u, v)?.with_labels(depth, time);
    Ok((w, f))
}

pub fn save_field(w: &Workspace, f: &VectorField) -> Result<String> {
    if f.len() != w.num_cells() {
        return Err(Error::Dimension(format!("field has {} cells, workspace has {}", f.len(), w.num_cells())));
    }
    for label in [&f.depth, &f.time] {
        if label.contains('\n') || label.trim() != label.as_str() {
            return Err(Error::Parameter(format!("layer label {label:?} must be one trimmed line")));
        }
    }
    let mut out = String::new();
    let (lon, lat) = w.origin();
    let (dlon, dlat) = w.cell_size();
    let _ = writeln!(out, "{FORMAT_TAG} {FORMAT_VERSION}");
    let _ = writeln!(out, "rows {}", w.rows());
    let _ = writeln!(out, "cols {}", w.cols());
    let _ = writeln!(out, "origin {lon} {lat}");
    let _ = writeln!(out, "cell_size {dlon} {dlat}");
    if !f.depth.is_empty() {
        let _ = writeln!(out, "depth {}", f.depth);
    }
    if !f.time.is_empty() {
        let _ = writeln!(out, "time {}", f.time);
    }
    out.push_str("data\n");
    for i in 0..w.num_cells() {
        let z = CellIndex(i);
        let (r, c) = w.row_col(z);
        let land = w.is_land(z);
        let (u, v) = if land { (0.0, 0.0) } else { f.velocity(z) };
        let _ = writeln!(out, "{r} {c} {} {u} {v}", u8::from(land));
    }
    Ok(out)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<(Workspace, VectorField)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| parse_err(0, format!("not UTF-8: {e}")))?;
    parse_field(text)
}

pub fn write_field(path: impl AsRef<Path>, w: &Workspace, f: &VectorField) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, save_field(w, f)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Analytic stand-ins for model current output, sampled at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticField {
    /// Constant velocity everywhere.
    Uniform { u: f64, v: f64 },
    /// One vortex centered mid-grid, counterclockwise for positive amplitude.
    /// `inflow` tilts the flow toward the center; speed ramps up over `core`
    /// cells from zero at the center.
    SingleGyre { amplitude: f64, inflow: f64, core: f64 },
    /// Two counter-rotating cells from the stream function
    /// `sin(πx) sin(πy)` on `[0, 2] × [0, 1]`, tilted toward each gyre center
    /// by `inflow`. Speed saturates to `amplitude` once the raw speed exceeds
    /// `core` of its peak, so only the gyre centers stagnate.
    DoubleGyre { amplitude: f64, inflow: f64, core: f64 },
    /// Hyperbolic point mid-grid: outflow along x, inflow along y.
    Saddle { amplitude: f64 },
}

impl SyntheticField {
    /// The double gyre used by the shipped fixture.
    pub fn double_gyre() -> Self {
        SyntheticField::DoubleGyre { amplitude: 1.0, inflow: 2.0, core: 0.05 }
    }

    fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            SyntheticField::Uniform { u, v } => {
                if !finite(&[u, v]) {
                    return Err(Error::Parameter("uniform velocity must be finite".into()));
                }
            }
            SyntheticField::SingleGyre { amplitude, inflow, core }
            | SyntheticField::DoubleGyre { amplitude, inflow, core } => {
                if !finite(&[amplitude, inflow, core]) || amplitude == 0.0 || !(core > 0.0) || inflow < 0.0 {
                    return Err(Error::Parameter(
                        "gyre needs finite nonzero amplitude, inflow >= 0 and core > 0".into(),
                    ));
                }
                if rows < 4 || cols < 4 {
                    return Err(Error::Parameter(format!("gyre fields need at least 4x4 cells, got {rows}x{cols}")));
                }
            }
            SyntheticField::Saddle { amplitude } => {
                if !amplitude.is_finite() || amplitude == 0.0 {
                    return Err(Error::Parameter("saddle amplitude must be finite and nonzero".into()));
                }
                if rows < 4 || cols < 4 {
                    return Err(Error::Parameter(format!("saddle fields need at least 4x4 cells, got {rows}x{cols}")));
                }
            }
        }
        Ok(())
    }

    fn velocity_at(&self, row: usize, col: usize, rows: usize, cols: usize) -> (f64, f64) {
        let cx = (cols - 1) as f64 / 2.0;
        let cy = (rows - 1) as f64 / 2.0;
        match *self {
            SyntheticField::Uniform { u, v } => (u, v),
            SyntheticField::SingleGyre { amplitude, inflow, core } => {
                let dx = col as f64 - cx;
                let dy = row as f64 - cy;
                let rho = dx.hypot(dy);
                if rho == 0.0 {
                    return (0.0, 0.0);
                }
                let (tx, ty) = (-dy / rho, dx / rho);
                let (ix, iy) = (-dx / rho, -dy / rho);
                let (mut ux, mut uy) = (tx + inflow * ix, ty + inflow * iy);
                let norm = ux.hypot(uy);
                let speed = amplitude * (rho / core).tanh();
                ux *= speed / norm;
                uy *= speed / norm;
                (ux, uy)
            }
            SyntheticField::DoubleGyre { amplitude, inflow, core } => {
                let x = 2.0 * col as f64 / (cols - 1) as f64;
                let y = row as f64 / (rows - 1) as f64;
                let (sx, cxp) = (PI * x).sin_cos();
                let (sy, cyp) = (PI * y).sin_cos();
                let psi = sx * sy;
                // rotation along streamlines, then a push toward the nearer gyre center
                let rot = (-PI * sx * cyp, PI * cxp * sy);
                let grad = (PI * cxp * sy, PI * sx * cyp);
                let sign = if psi > 0.0 {
                    1.0
                } else if psi < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let raw = (rot.0 + inflow * sign * grad.0, rot.1 + inflow * sign * grad.1);
                let norm = raw.0.hypot(raw.1);
                if norm == 0.0 {
                    return (0.0, 0.0);
                }
                let speed = amplitude.abs() * (rot.0.hypot(rot.1) / (core * PI)).tanh();
                let s = amplitude.signum() * speed / norm;
                (raw.0 * s, raw.1 * s)
            }
            SyntheticField::Saddle { amplitude } => {
                let scale = amplitude / cx.max(cy);
                ((col as f64 - cx) * scale, -(row as f64 - cy) * scale)
            }
        }
    }
}

/// Samples a synthetic field on an all-water grid of unit cells.
pub fn synthesize_field(spec: &SyntheticField, rows: usize, cols: usize) -> Result<(Workspace, VectorField)> {
    spec.validate(rows, cols)?;
    let w = Workspace::open(rows, cols)?;
    let mut u = Vec::with_capacity(w.num_cells());
    let mut v = Vec::with_capacity(w.num_cells());
    for r in 0..rows {
        for c in 0..cols {
            let (a, b) = spec.velocity_at(r, c, rows, cols);
            u.push(a);
            v.push(b);
        }
    }
    Ok((w, VectorField::new(u, v)?))
}
