//! File formats: CSTK1 field files, plain-text loop files and
//! representation documents.
//!
//! A CSTK1 file is one ASCII header line
//!
//! ```text
//! CSTK1 <dim> <n_1> … <n_dim> <degree> <kind>
//! ```
//!
//! with `kind` one of `scalar`, `algebra`, `group` and an open axis written
//! as `<n>o`, followed by the values as little-endian `f64` in storage
//! order: site-major (axis 0 slowest), then form component, then the 1, 3
//! or 4 coordinates of the value.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::forms::{AlgebraForm, ScalarForm, TorusGrid};
use crate::gauge::GaugeMap;
use crate::holonomy::LoopPath;
use crate::lie::{AlgebraElement, GroupElement};
use crate::rep::{Presentation, Representation};

pub const MAGIC: &str = "CSTK1";

/// Largest number of sites a header may declare.
const MAX_SITES: usize = 1 << 28;

/// Deviation from unit norm tolerated for stored group elements.
const UNIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Scalar,
    Algebra,
    Group,
}

impl ValueKind {
    pub fn width(self) -> usize {
        match self {
            ValueKind::Scalar => 1,
            ValueKind::Algebra => 3,
            ValueKind::Group => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Scalar => "scalar",
            ValueKind::Algebra => "algebra",
            ValueKind::Group => "group",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(ValueKind::Scalar),
            "algebra" => Ok(ValueKind::Algebra),
            "group" => Ok(ValueKind::Group),
            _ => Err(Error::Format(format!("unknown value kind {s:?}"))),
        }
    }
}

/// Contents of a field file.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(ScalarForm),
    Algebra(AlgebraForm),
    Group(GaugeMap),
}

impl Field {
    pub fn grid(&self) -> &TorusGrid {
        match self {
            Field::Scalar(f) => f.grid(),
            Field::Algebra(f) => f.grid(),
            Field::Group(u) => u.grid(),
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Field::Scalar(_) => ValueKind::Scalar,
            Field::Algebra(_) => ValueKind::Algebra,
            Field::Group(_) => ValueKind::Group,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Field::Scalar(f) => f.degree(),
            Field::Algebra(f) => f.degree(),
            Field::Group(_) => 0,
        }
    }

    fn flat_values(&self) -> Vec<f64> {
        match self {
            Field::Scalar(f) => f.values().to_vec(),
            Field::Algebra(f) => f.values().iter().flat_map(|v| v.0).collect(),
            Field::Group(u) => u.values().iter().flat_map(|g| g.0).collect(),
        }
    }

    pub fn into_connection(self) -> Result<AlgebraForm> {
        match self {
            Field::Algebra(a) if a.degree() == 1 => Ok(a),
            Field::Algebra(a) => Err(Error::DegreeMismatch { expected: 1, found: a.degree() }),
            other => Err(Error::Format(format!("expected an algebra 1-form, found kind {}", other.kind().name()))),
        }
    }

    pub fn into_gauge(self) -> Result<GaugeMap> {
        match self {
            Field::Group(u) => Ok(u),
            other => Err(Error::Format(format!("expected a group field, found kind {}", other.kind().name()))),
        }
    }
}

impl From<AlgebraForm> for Field {
    fn from(a: AlgebraForm) -> Self {
        Field::Algebra(a)
    }
}

impl From<ScalarForm> for Field {
    fn from(f: ScalarForm) -> Self {
        Field::Scalar(f)
    }
}

impl From<GaugeMap> for Field {
    fn from(u: GaugeMap) -> Self {
        Field::Group(u)
    }
}

fn header_line(field: &Field) -> String {
    let g = field.grid();
    let mut parts = vec![MAGIC.to_string(), g.dim().to_string()];
    for axis in 0..g.dim() {
        let n = g.shape()[axis];
        parts.push(if g.is_open(axis) { format!("{n}o") } else { n.to_string() });
    }
    parts.push(field.degree().to_string());
    parts.push(field.kind().name().to_string());
    parts.join(" ")
}

pub fn write_field<W: Write>(mut w: W, field: &Field) -> Result<()> {
    writeln!(w, "{}", header_line(field))?;
    let mut bytes = Vec::new();
    for v in field.flat_values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(TorusGrid, usize, ValueKind)> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.first() != Some(&MAGIC) {
        return Err(Error::Format(format!("missing {MAGIC} magic")));
    }
    let number = |t: &str| t.parse::<usize>().map_err(|_| Error::Format(format!("bad header token {t:?}")));
    let dim = number(tokens.get(1).ok_or_else(|| Error::Format("header ends before dim".into()))?)?;
    if tokens.len() != dim + 4 {
        return Err(Error::Format(format!("header for dim {dim} needs {} tokens, found {}", dim + 4, tokens.len())));
    }
    let mut shape = Vec::with_capacity(dim);
    let mut open = Vec::new();
    for (axis, t) in tokens[2..2 + dim].iter().enumerate() {
        match t.strip_suffix('o') {
            Some(n) => {
                open.push(axis);
                shape.push(number(n)?);
            }
            None => shape.push(number(t)?),
        }
    }
    // Only a trailing open axis is representable.
    let grid = match open[..] {
        [] => TorusGrid::new(&shape)?,
        [axis] if axis == dim - 1 => TorusGrid::new(&shape[..dim - 1])?.with_open_axis(shape[dim - 1])?,
        _ => return Err(Error::Format("only the last axis may be open".into())),
    };
    let degree = number(tokens[dim + 2])?;
    let kind = ValueKind::parse(tokens[dim + 3])?;
    if degree > dim {
        return Err(Error::DegreeTooHigh { degree, dim });
    }
    if kind == ValueKind::Group && degree != 0 {
        return Err(Error::Format("group fields have degree 0".into()));
    }
    if grid.sites() > MAX_SITES {
        return Err(Error::Format(format!("{} sites exceeds the supported maximum", grid.sites())));
    }
    Ok((grid, degree, kind))
}

pub fn read_field<R: Read>(r: R) -> Result<Field> {
    let mut reader = BufReader::new(r);
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    let header = std::str::from_utf8(&header).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let (grid, degree, kind) = parse_header(header.trim_end())?;
    let components = crate::forms::multi_indices(grid.dim(), degree).len();
    let count = grid.sites() * components * kind.width();
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(Error::Format(format!("expected {} bytes of values, found {}", 8 * count, bytes.len())));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite value at index {i}")));
    }
    match kind {
        ValueKind::Scalar => Ok(Field::Scalar(ScalarForm::from_values(grid, degree, values)?)),
        ValueKind::Algebra => {
            let v = values.chunks_exact(3).map(|c| AlgebraElement([c[0], c[1], c[2]])).collect();
            Ok(Field::Algebra(AlgebraForm::from_values(grid, degree, v)?))
        }
        ValueKind::Group => {
            let v = values
                .chunks_exact(4)
                .enumerate()
                .map(|(site, c)| unit_quaternion([c[0], c[1], c[2], c[3]]).map_err(|e| Error::Format(format!("site {site}: {e}"))))
                .collect::<Result<_>>()?;
            Ok(Field::Group(GaugeMap::new(grid, v)?))
        }
    }
}

fn unit_quaternion(q: [f64; 4]) -> Result<GroupElement> {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::Format(format!("quaternion {q:?} has norm {n}, not 1")));
    }
    // Values written by this crate are unit to rounding and are kept bit for bit.
    if (n - 1.0).abs() <= 1e-14 {
        return Ok(GroupElement(q));
    }
    GroupElement::from_quaternion(q)
}

pub fn save_field(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    write_field(std::io::BufWriter::new(fs::File::create(path)?), field)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    read_field(fs::File::open(path)?)
}

pub fn load_connection(path: impl AsRef<Path>) -> Result<AlgebraForm> {
    load_field(path)?.into_connection()
}

pub fn load_gauge(path: impl AsRef<Path>) -> Result<GaugeMap> {
    load_field(path)?.into_gauge()
}

/// Field files in `dir`, sorted by file name.
pub fn path_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file());
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput("path directory holds no field files".into()));
    }
    Ok(files)
}

/// Connections stored one per file in `dir`, in file-name order.
pub fn load_connection_path(dir: impl AsRef<Path>) -> Result<Vec<AlgebraForm>> {
    let samples: Vec<AlgebraForm> = path_files(dir)?.iter().map(load_connection).collect::<Result<_>>()?;
    if samples.windows(2).any(|w| w[0].grid() != w[1].grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(samples)
}

/// Writes `samples` as `sample_0000.cstk`, … into `dir`.
pub fn save_connection_path(dir: impl AsRef<Path>, samples: &[AlgebraForm]) -> Result<()> {
    fs::create_dir_all(&dir)?;
    for (i, a) in samples.iter().enumerate() {
        save_field(dir.as_ref().join(format!("sample_{i:04}.cstk")), &Field::Algebra(a.clone()))?;
    }
    Ok(())
}

/// Loop file text: a header line `<dim> <w_1> … <w_dim>`, then one sample
/// point per line. `#` starts a comment.
pub fn loop_to_text(gamma: &LoopPath) -> String {
    let mut out = String::new();
    let winding: Vec<String> = gamma.winding().iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("{} {}\n", gamma.dim(), winding.join(" ")));
    for p in gamma.samples() {
        let coords: Vec<String> = p.iter().map(|x| format!("{x:.17e}")).collect();
        out.push_str(&coords.join(" "));
        out.push('\n');
    }
    out
}

pub fn loop_from_text(text: &str) -> Result<LoopPath> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty loop file".into()))?;
    let header: Vec<i64> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Format(format!("bad loop header token {t:?}"))))
        .collect::<Result<_>>()?;
    let dim = *header.first().ok_or_else(|| Error::Format("loop header is empty".into()))?;
    if dim < 0 || header.len() != dim as usize + 1 {
        return Err(Error::Format(format!("loop header must be `dim` followed by {dim} winding numbers")));
    }
    let winding = header[1..].to_vec();
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let point: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("line {}: bad coordinate {t:?}", lineno + 1))))
            .collect::<Result<_>>()?;
        if point.len() != dim as usize {
            return Err(Error::Format(format!("line {}: expected {dim} coordinates", lineno + 1)));
        }
        samples.push(point);
    }
    LoopPath::new(samples, winding)
}

pub fn load_loop(path: impl AsRef<Path>) -> Result<LoopPath> {
    loop_from_text(&fs::read_to_string(path)?)
}

/// Generator name → `[a, b, c, d]`, in generator order.
pub fn representation_to_json(p: &Presentation, rho: &Representation) -> Value {
    let mut map = Map::new();
    for (name, g) in p.generators().iter().zip(rho.images()) {
        map.insert(name.clone(), Value::from(g.0.to_vec()));
    }
    Value::Object(map)
}

pub fn representation_from_json(p: &Presentation, doc: &Value) -> Result<Representation> {
    let obj = doc.as_object().ok_or_else(|| Error::Format("representation must be a JSON object".into()))?;
    let mut images: BTreeMap<usize, GroupElement> = BTreeMap::new();
    for (name, value) in obj {
        let idx = p
            .generator_index(name)
            .ok_or_else(|| Error::Format(format!("unknown generator {name:?}")))?;
        let q: Vec<f64> = serde_json::from_value(value.clone())
            .map_err(|_| Error::Format(format!("generator {name:?} needs an array of 4 numbers")))?;
        let q: [f64; 4] = q
            .try_into()
            .map_err(|_| Error::Format(format!("generator {name:?} needs an array of 4 numbers")))?;
        images.insert(idx, unit_quaternion(q)?);
    }
    if images.len() != p.rank() {
        let missing: Vec<&str> = p
            .generators()
            .iter()
            .enumerate()
            .filter(|(i, _)| !images.contains_key(i))
            .map(|(_, n)| n.as_str())
            .collect();
        return Err(Error::Format(format!("missing generators {missing:?}")));
    }
    Representation::new(p, images.into_values().collect())
}

pub fn load_representation(p: &Presentation, path: impl AsRef<Path>) -> Result<Representation> {
    let text = fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    representation_from_json(p, &doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{smooth_random_form, SmoothSpec};

    fn roundtrip(field: &Field) -> Field {
        let mut buf = Vec::new();
        write_field(&mut buf, field).unwrap();
        read_field(&buf[..]).unwrap()
    }

    #[test]
    fn header_layout() {
        let g = TorusGrid::new(&[4, 5, 6]).unwrap();
        let a = AlgebraForm::zeros(g, 1).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &a.into()).unwrap();
        let header = b"CSTK1 3 4 5 6 1 algebra\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 8 * 120 * 3 * 3);
    }

    #[test]
    fn fields_round_trip_bitwise() {
        let g = TorusGrid::cube(3, 5).unwrap();
        for degree in 0..=3 {
            let a = smooth_random_form(g, degree, &SmoothSpec::new(1.0, 2), degree as u64).unwrap();
            assert_eq!(roundtrip(&a.clone().into()), Field::Algebra(a));
        }
        let f = ScalarForm::from_fn(g, 2, |x, m| x[0] * m as f64 - 0.1).unwrap();
        assert_eq!(roundtrip(&f.clone().into()), Field::Scalar(f));
        let u = GaugeMap::smooth_random(g, &SmoothSpec::new(0.2, 1), 4).unwrap();
        assert_eq!(roundtrip(&u.clone().into()), Field::Group(u));
        let open = TorusGrid::cube(3, 4).unwrap().with_open_axis(5).unwrap();
        let c = AlgebraForm::zeros(open, 1).unwrap();
        assert_eq!(roundtrip(&c.clone().into()), Field::Algebra(c));
    }

    #[test]
    fn malformed_fields_are_rejected() {
        let bad = |bytes: &[u8]| read_field(bytes).unwrap_err();
        assert!(matches!(bad(b"CSTK2 3 4 4 4 1 algebra\n"), Error::Format(_)));
        assert!(matches!(bad(b"CSTK1 3 4 4 1 algebra\n"), Error::Format(_)));
        assert!(matches!(bad(b"CSTK1 3 4 4 4 1 spinor\n"), Error::Format(_)));
        assert!(matches!(bad(b"CSTK1 3 4 4 4 1 algebra\n\0\0"), Error::Format(_)));
        assert!(matches!(bad(b"CSTK1 3 4 4 4 4 algebra\n"), Error::DegreeTooHigh { .. }));
        let mut buf = b"CSTK1 2 4 4 0 group\n".to_vec();
        for _ in 0..16 {
            buf.extend([2.0f64, 0.0, 0.0, 0.0].iter().flat_map(|v| v.to_le_bytes()));
        }
        assert!(matches!(bad(&buf), Error::Format(_)));
    }

    #[test]
    fn connection_kind_is_checked() {
        let g = TorusGrid::cube(3, 4).unwrap();
        let f = Field::Algebra(AlgebraForm::zeros(g, 2).unwrap());
        assert!(matches!(f.into_connection(), Err(Error::DegreeMismatch { .. })));
        assert!(Field::Group(GaugeMap::identity(g)).into_connection().is_err());
    }

    #[test]
    fn loops_round_trip() {
        let gamma = LoopPath::from_fn(9, vec![1, 0, -1], |t| vec![0.25 + t, 0.2 + 0.05 * (std::f64::consts::TAU * t).sin().abs(), 0.5 - t]).unwrap();
        let back = loop_from_text(&loop_to_text(&gamma)).unwrap();
        assert_eq!(back, gamma);
        let text = "# square\n2 0 0\n0 0\n0.25 0\n0.25 0.25\n0 0.25\n0 0\n";
        assert_eq!(loop_from_text(text).unwrap().samples().len(), 5);
        assert!(loop_from_text("2 1 0\n0 0\n0.5 0\n").is_err());
        assert!(loop_from_text("3 1 0\n0 0 0\n").is_err());
    }

    #[test]
    fn representations_round_trip() {
        let p = Presentation::bundled("trefoil").unwrap();
        let rho = crate::rep::random_representation(&p, 3);
        let doc = representation_to_json(&p, &rho);
        assert_eq!(doc.as_object().unwrap().keys().collect::<Vec<_>>(), ["x", "y"]);
        let back = representation_from_json(&p, &doc).unwrap();
        assert_eq!(back.images(), rho.images());
        let missing = serde_json::json!({"x": [1.0, 0.0, 0.0, 0.0]});
        assert!(representation_from_json(&p, &missing).is_err());
        let unknown = serde_json::json!({"x": [1.0, 0.0, 0.0, 0.0], "y": [1.0, 0.0, 0.0, 0.0], "z": [1.0, 0.0, 0.0, 0.0]});
        assert!(representation_from_json(&p, &unknown).is_err());
        let short = serde_json::json!({"x": [1.0, 0.0, 0.0], "y": [1.0, 0.0, 0.0, 0.0]});
        assert!(representation_from_json(&p, &short).is_err());
    }

    #[test]
    fn connection_paths_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::cube(3, 4).unwrap();
        let samples: Vec<AlgebraForm> =
            (0..3).map(|s| smooth_random_form(g, 1, &SmoothSpec::new(1.0, 1), s).unwrap()).collect();
        save_connection_path(dir.path(), &samples).unwrap();
        assert_eq!(load_connection_path(dir.path()).unwrap(), samples);
    }
}
