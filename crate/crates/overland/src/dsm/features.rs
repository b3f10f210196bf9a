use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Point,
    Line,
    Polygon,
}

impl FeatureKind {
    fn parse(tok: &str) -> Option<Self> {
        match tok.trim().to_ascii_uppercase().as_str() {
            "POINT" => Some(FeatureKind::Point),
            "LINE" => Some(FeatureKind::Line),
            "POLYGON" => Some(FeatureKind::Polygon),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Point => "POINT",
            FeatureKind::Line => "LINE",
            FeatureKind::Polygon => "POLYGON",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vertex {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vertex { x, y, z }
    }
}

/// A class-tagged point, polyline or polygon in map coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedFeature {
    pub class_id: u16,
    pub kind: FeatureKind,
    pub vertices: Vec<Vertex>,
}

impl ClassifiedFeature {
    /// Builds a feature, checking the vertex-count and closure rules.
    pub fn new(class_id: u16, kind: FeatureKind, vertices: Vec<Vertex>) -> std::result::Result<Self, String> {
        let f = ClassifiedFeature {
            class_id,
            kind,
            vertices,
        };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let n = self.vertices.len();
        if let Some(v) = self
            .vertices
            .iter()
            .find(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(format!("non-finite coordinate {v:?}"));
        }
        match self.kind {
            FeatureKind::Point if n != 1 => Err(format!("POINT needs exactly 1 vertex, got {n}")),
            FeatureKind::Line if n < 2 => Err(format!("LINE needs at least 2 vertices, got {n}")),
            FeatureKind::Polygon if n < 3 => Err(format!("POLYGON needs at least 3 vertices, got {n}")),
            FeatureKind::Polygon if self.vertices[0] != self.vertices[n - 1] => {
                Err("POLYGON first and last vertices differ".to_string())
            }
            _ => Ok(()),
        }
    }
}

/// Parses the `class_id;KIND;x y z,x y z,...` feature format. Blank lines
/// and lines starting with `#` are ignored.
pub fn parse_features(text: &str) -> Result<Vec<ClassifiedFeature>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, ';');
        let (Some(class), Some(kind), Some(coords)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(lineno, "expected `class_id;KIND;coordinates`"));
        };
        let class_id: u16 = class
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad class id `{}`", class.trim())))?;
        let kind = FeatureKind::parse(kind)
            .ok_or_else(|| Error::parse(lineno, format!("bad feature kind `{}`", kind.trim())))?;
        let mut vertices = Vec::new();
        for chunk in coords.split(',') {
            let nums: Vec<&str> = chunk.split_whitespace().collect();
            if nums.len() != 3 {
                return Err(Error::parse(lineno, format!("vertex `{}` must have x y z", chunk.trim())));
            }
            let mut xyz = [0.0; 3];
            for (slot, tok) in xyz.iter_mut().zip(&nums) {
                *slot = tok
                    .parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("non-numeric coordinate `{tok}`")))?;
            }
            vertices.push(Vertex::new(xyz[0], xyz[1], xyz[2]));
        }
        let f = ClassifiedFeature::new(class_id, kind, vertices).map_err(|m| Error::parse(lineno, m))?;
        out.push(f);
    }
    Ok(out)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<ClassifiedFeature>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
    parse_features(&text)
}

/// The set of feature classes kept for the hydraulic surface.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassSelection {
    pub included: BTreeSet<u16>,
}

impl ClassSelection {
    pub fn new(ids: impl IntoIterator<Item = u16>) -> Self {
        ClassSelection {
            included: ids.into_iter().collect(),
        }
    }

    pub fn contains(&self, class_id: u16) -> bool {
        self.included.contains(&class_id)
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    /// One class id per line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut included = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let id = line
                .parse::<u16>()
                .map_err(|_| Error::parse(i + 1, format!("bad class id `{line}`")))?;
            included.insert(id);
        }
        Ok(ClassSelection { included })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
        Self::parse(&text)
    }
}

/// Keeps the features whose class is selected, preserving order. Excluding
/// a class is also how bridges and elevated roads are dropped.
pub fn select_classes(features: &[ClassifiedFeature], sel: &ClassSelection) -> Vec<ClassifiedFeature> {
    features
        .iter()
        .filter(|f| sel.contains(f.class_id))
        .cloned()
        .collect()
}

/// Turns lines whose endpoints are within `tolerance` (planimetric distance)
/// into polygons by snapping the last vertex onto the first. Two-vertex lines
/// cannot enclose anything and pass through unchanged.
pub fn close_lines(features: Vec<ClassifiedFeature>, tolerance: f64) -> Vec<ClassifiedFeature> {
    features
        .into_iter()
        .map(|mut f| {
            if f.kind == FeatureKind::Line && f.vertices.len() >= 3 {
                let first = f.vertices[0];
                let last = f.vertices[f.vertices.len() - 1];
                if (last.x - first.x).hypot(last.y - first.y) <= tolerance {
                    *f.vertices.last_mut().unwrap() = first;
                    f.kind = FeatureKind::Polygon;
                }
            }
            f
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_line() {
        let f = parse_features("7;LINE;0 0 2,10 0 2").unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].class_id, 7);
        assert_eq!(f[0].kind, FeatureKind::Line);
        assert!(f[0].vertices.iter().all(|v| v.z == 2.0));
    }

    #[test]
    fn parses_closed_polygon() {
        let f = parse_features("# building\n3;POLYGON;0 0 5,4 0 5,4 4 5,0 0 5\n\n").unwrap();
        assert_eq!(f[0].kind, FeatureKind::Polygon);
        assert_eq!(f[0].vertices.len(), 4);
    }

    #[test]
    fn malformed_line_is_named() {
        let text = "1;POINT;1 1 1\n2;CIRCLE;0 0 0\n3;LINE;0 0 0,1 1 1\n";
        assert!(matches!(parse_features(text), Err(Error::Parse { line: 2, .. })));
        let text = "1;POINT;1 1 1\n\n3;LINE;0 0 0\n";
        assert!(matches!(parse_features(text), Err(Error::Parse { line: 3, .. })));
        let text = "1;LINE;0 0 0,1 x 1\n";
        assert!(matches!(parse_features(text), Err(Error::Parse { line: 1, .. })));
        // unclosed polygon
        let text = "1;POLYGON;0 0 0,1 0 0,1 1 0\n";
        assert!(matches!(parse_features(text), Err(Error::Parse { line: 1, .. })));
    }

    fn line(class_id: u16, pts: &[(f64, f64)]) -> ClassifiedFeature {
        ClassifiedFeature::new(
            class_id,
            FeatureKind::Line,
            pts.iter().map(|&(x, y)| Vertex::new(x, y, 1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn selection_keeps_order() {
        let fs: Vec<_> = [1, 2, 3, 2, 9].iter().map(|&c| line(c, &[(0.0, 0.0), (1.0, 0.0)])).collect();
        let kept = select_classes(&fs, &ClassSelection::new([2]));
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|f| f.class_id == 2));
        assert_eq!(select_classes(&fs, &ClassSelection::new([1, 2, 3, 9])), fs);
        let once = select_classes(&fs, &ClassSelection::new([2, 9]));
        assert_eq!(select_classes(&once, &ClassSelection::new([2, 9])), once);
    }

    #[test]
    fn selection_file() {
        let sel = ClassSelection::parse("# walls\n4\n 12 # dikes\n\n").unwrap();
        assert_eq!(sel, ClassSelection::new([4, 12]));
        assert!(ClassSelection::parse("4\nfoo\n").is_err());
    }

    #[test]
    fn closing() {
        let near = line(1, &[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.05, 0.0)]);
        let far = line(1, &[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (5.0, 0.0)]);
        let exact = line(1, &[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 0.0)]);
        let out = close_lines(vec![near, far.clone(), exact.clone()], 0.1);
        assert_eq!(out[0].kind, FeatureKind::Polygon);
        assert_eq!(out[0].vertices[0], *out[0].vertices.last().unwrap());
        assert_eq!(out[1], far);

        let out = close_lines(vec![exact], 0.0);
        assert_eq!(out[0].kind, FeatureKind::Polygon);
    }
}
