//! ASCII PLY and XYZ point cloud files.
//!
//! Coordinates are written with 17 significant digits so that a write/read
//! cycle reproduces every `f64` exactly. Writes go to a temporary file in the
//! destination directory and are renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Upper bound on speculative preallocation from header counts.
const MAX_PREALLOC: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Ply,
    Xyz,
}

impl Format {
    /// Infers the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("ply") => Ok(Format::Ply),
            Some("xyz") | Some("txt") => Ok(Format::Xyz),
            _ => Err(Error::InvalidConfig(format!("cannot infer cloud format of {}", path.display()))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Ply => "ply",
            Format::Xyz => "xyz",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ply" => Ok(Format::Ply),
            "xyz" => Ok(Format::Xyz),
            other => Err(Error::InvalidConfig(format!("unknown cloud format `{other}`"))),
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_coord(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| parse_error(line, format!("invalid number `{token}`")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("non-finite value `{token}`")));
    }
    Ok(v)
}

fn parse_label(token: &str, line: usize) -> Result<bool> {
    let v = parse_coord(token, line)?;
    match v {
        0.0 => Ok(false),
        1.0 => Ok(true),
        _ => Err(parse_error(line, format!("label must be 0 or 1, got `{token}`"))),
    }
}

fn id_from_path(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud").to_string()
}

/// Parses whitespace-separated `x y z [label]` lines. `#` starts a comment.
pub fn parse_xyz(text: &str, id: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut columns = None;
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 3 && tokens.len() != 4 {
            return Err(parse_error(line, format!("expected 3 or 4 columns, found {}", tokens.len())));
        }
        match columns {
            None => columns = Some(tokens.len()),
            Some(c) if c != tokens.len() => {
                return Err(parse_error(line, format!("expected {c} columns, found {}", tokens.len())));
            }
            Some(_) => {}
        }
        points.push([parse_coord(tokens[0], line)?, parse_coord(tokens[1], line)?, parse_coord(tokens[2], line)?]);
        if tokens.len() == 4 {
            labels.push(parse_label(tokens[3], line)?);
        }
    }
    let labels = (columns == Some(4)).then_some(labels);
    PointCloud::new(id, points, labels)
}

#[derive(Debug)]
enum Property {
    Scalar(String),
    List,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

const SCALAR_TYPES: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16",
    "int32", "uint32", "float32", "float64",
];

fn check_type(t: &str, line: usize) -> Result<()> {
    if SCALAR_TYPES.contains(&t) {
        Ok(())
    } else {
        Err(parse_error(line, format!("unknown property type `{t}`")))
    }
}

/// Parses an ASCII PLY file. Only the `vertex` element is kept; other
/// elements are validated for line count and skipped.
pub fn parse_ply(text: &str, id: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_error(1, "missing `ply` magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    let mut header_done = false;
    for (line, raw) in lines.by_ref() {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", "1.0"] => format_seen = true,
            ["format", other, ..] => {
                return Err(parse_error(line, format!("unsupported PLY format `{other}`")));
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| parse_error(line, format!("invalid element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            ["property", "list", count_t, item_t, _name] => {
                check_type(count_t, line)?;
                check_type(item_t, line)?;
                let el = elements.last_mut().ok_or_else(|| parse_error(line, "property before element"))?;
                el.properties.push(Property::List);
            }
            ["property", t, name] => {
                check_type(t, line)?;
                let el = elements.last_mut().ok_or_else(|| parse_error(line, "property before element"))?;
                el.properties.push(Property::Scalar(name.to_string()));
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_error(line, format!("unrecognised header line `{}`", raw.trim()))),
        }
    }
    if !header_done {
        return Err(parse_error(text.lines().count().max(1), "missing `end_header`"));
    }
    if !format_seen {
        return Err(parse_error(1, "missing `format ascii 1.0` line"));
    }
    if elements.iter().filter(|e| e.name == "vertex").count() != 1 {
        return Err(Error::MissingProperty("element vertex".into()));
    }
    let vertex = elements.iter().find(|e| e.name == "vertex").expect("checked above");
    let position = |name: &str| {
        vertex.properties.iter().position(|p| matches!(p, Property::Scalar(n) if n == name))
    };
    let axes = [position("x"), position("y"), position("z")];
    for (axis, pos) in ["x", "y", "z"].iter().zip(&axes) {
        if pos.is_none() {
            return Err(Error::MissingProperty(axis.to_string()));
        }
    }
    let axes = axes.map(Option::unwrap);
    let label_pos = position("label");

    let mut data = lines.filter(|(_, l)| !l.trim().is_empty());
    let mut last_line = text.lines().count();
    let mut points = Vec::with_capacity(vertex.count.min(MAX_PREALLOC));
    let mut labels = Vec::with_capacity(if label_pos.is_some() { vertex.count.min(MAX_PREALLOC) } else { 0 });
    for el in &elements {
        for _ in 0..el.count {
            let Some((line, raw)) = data.next() else {
                return Err(parse_error(
                    last_line + 1,
                    format!("file ends before {} `{}` entries were read", el.count, el.name),
                ));
            };
            last_line = line;
            let values = split_values(raw, &el.properties, line)?;
            if el.name == "vertex" {
                let mut p: Point3 = [0.0; 3];
                for (c, &pos) in axes.iter().enumerate() {
                    p[c] = parse_coord(values[pos], line)?;
                }
                points.push(p);
                if let Some(pos) = label_pos {
                    labels.push(parse_label(values[pos], line)?);
                }
            }
        }
    }
    if let Some((line, _)) = data.next() {
        return Err(parse_error(line, "data after the last declared element"));
    }
    PointCloud::new(id, points, label_pos.map(|_| labels))
}

/// Splits a data line into one token per property (list properties keep
/// only their count token).
fn split_values<'a>(raw: &'a str, properties: &[Property], line: usize) -> Result<Vec<&'a str>> {
    let mut tokens = raw.split_whitespace();
    let mut out = Vec::with_capacity(properties.len());
    for prop in properties {
        let tok = tokens.next().ok_or_else(|| parse_error(line, "too few values"))?;
        match prop {
            Property::Scalar(_) => {
                parse_coord(tok, line)?;
                out.push(tok);
            }
            Property::List => {
                let len: usize = tok.parse().map_err(|_| parse_error(line, format!("invalid list length `{tok}`")))?;
                for _ in 0..len {
                    let item = tokens.next().ok_or_else(|| parse_error(line, "list shorter than its length"))?;
                    parse_coord(item, line)?;
                }
                out.push(tok);
            }
        }
    }
    if tokens.next().is_some() {
        return Err(parse_error(line, "too many values"));
    }
    Ok(out)
}

pub fn read_cloud(path: &Path, format: Option<Format>) -> Result<PointCloud> {
    let format = match format {
        Some(f) => f,
        None => Format::from_path(path)?,
    };
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        parse_error(line, "invalid UTF-8")
    })?;
    let id = id_from_path(path);
    match format {
        Format::Ply => parse_ply(text, &id),
        Format::Xyz => parse_xyz(text, &id),
    }
}

fn check_mask(cloud: &PointCloud, mask: Option<&[bool]>) -> Result<()> {
    match mask {
        Some(m) if m.len() != cloud.len() => Err(Error::LengthMismatch { left: cloud.len(), right: m.len() }),
        _ => Ok(()),
    }
}

pub fn format_ply(cloud: &PointCloud, mask: Option<&[bool]>) -> Result<String> {
    check_mask(cloud, mask)?;
    let mut out = String::with_capacity(64 * cloud.len() + 128);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "comment id {}", cloud.id.replace(['\n', '\r'], " "));
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if mask.is_some() {
        out.push_str("property uchar label\n");
    }
    out.push_str("end_header\n");
    write_rows(&mut out, cloud, mask);
    Ok(out)
}

pub fn format_xyz(cloud: &PointCloud, mask: Option<&[bool]>) -> Result<String> {
    check_mask(cloud, mask)?;
    let mut out = String::with_capacity(64 * cloud.len() + 32);
    out.push_str(if mask.is_some() { "# x y z label\n" } else { "# x y z\n" });
    write_rows(&mut out, cloud, mask);
    Ok(out)
}

fn write_rows(out: &mut String, cloud: &PointCloud, mask: Option<&[bool]>) {
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
        if let Some(m) = mask {
            let _ = write!(out, " {}", u8::from(m[i]));
        }
        out.push('\n');
    }
}

/// Writes a cloud, with `mask` as the label column when given.
pub fn write_cloud(cloud: &PointCloud, mask: Option<&[bool]>, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Ply => format_ply(cloud, mask)?,
        Format::Xyz => format_xyz(cloud, mask)?,
    };
    write_atomic(path, text.as_bytes())
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}
