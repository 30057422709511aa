//! Points, labeled point sets, and the concentric shell configuration.

use std::fmt::Write as _;
use std::fs;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use crate::error::{Error, Result};

/// A point in R³.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction. Returns `None` for the origin.
    pub fn normalized(&self) -> Option<Point3> {
        let r = self.norm();
        (r > 0.0).then(|| self.scale(1.0 / r))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        self.scale(s)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

/// An ordered, labeled collection of points. Index `i` always refers to the
/// same point, so row/column identities of kernel matrices are stable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    points: Vec<Point3>,
    label: String,
}

impl PointSet {
    /// Builds a point set, rejecting non-finite coordinates.
    pub fn new(label: impl Into<String>, points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points, label: label.into() })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, i: usize) -> Point3 {
        self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    /// Points at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize], label: impl Into<String>) -> PointSet {
        PointSet {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            label: label.into(),
        }
    }

    /// Concatenation of `self` followed by `other`.
    pub fn concat(&self, other: &PointSet, label: impl Into<String>) -> PointSet {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        PointSet { points, label: label.into() }
    }

    /// Every point multiplied by `s`.
    pub fn scaled(&self, s: f64) -> PointSet {
        PointSet {
            points: self.points.iter().map(|p| p.scale(s)).collect(),
            label: self.label.clone(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(Point3::norm).fold(0.0, f64::max)
    }

    pub fn min_norm(&self) -> f64 {
        self.points.iter().map(Point3::norm).fold(f64::INFINITY, f64::min)
    }

    /// Parses the plain text format: one point per line, three
    /// whitespace-separated decimal fields; blank lines and lines starting
    /// with `#` are ignored.
    pub fn parse(text: &str, label: impl Into<String>) -> Result<PointSet> {
        let label = label.into();
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { path: label.clone(), line: lineno + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
            }
            let mut xyz = [0.0; 3];
            for (slot, field) in xyz.iter_mut().zip(&fields) {
                *slot = field
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("invalid number {field:?}: {e}")))?;
            }
            let p = Point3::from(xyz);
            if !p.is_finite() {
                return Err(parse_err("non-finite coordinate".into()));
            }
            points.push(p);
        }
        Ok(PointSet { points, label })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<PointSet> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.display().to_string())
    }

    /// Serializes with round-trip exact `{:e}` formatting; `header` lines are
    /// written as `#` comments.
    pub fn to_text(&self, header: &[String]) -> String {
        let mut out = String::with_capacity(self.points.len() * 72);
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        for p in &self.points {
            let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>, header: &[String]) -> Result<()> {
        fs::write(path, self.to_text(header))?;
        Ok(())
    }
}

/// X = B(0, r1), Y = R³ \ B(0, r2) and the proxy surface Γ = ∂B(0, r2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellGeometry {
    r1: f64,
    r2: f64,
}

impl ShellGeometry {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite() && r1 > 0.0 && r1 < r2) {
            return Err(Error::InvalidGeometry { r1, r2 });
        }
        Ok(Self { r1, r2 })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn ratio(&self) -> f64 {
        self.r1 / self.r2
    }

    pub fn gap(&self) -> f64 {
        self.r2 - self.r1
    }

    /// Strictly inside the source ball.
    pub fn in_source(&self, p: &Point3) -> bool {
        p.norm() < self.r1
    }

    /// In the far field (outside the open ball of radius r2, Γ included).
    pub fn in_far_field(&self, p: &Point3) -> bool {
        p.norm() >= self.r2
    }
}

/// Parameters of one proxy-surface compression run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub geometry: ShellGeometry,
    /// Per-point precision scale ε; the ID of K(X0, Yp) uses ε·√|Yp|.
    pub epsilon: f64,
    /// Entry bound for the projection matrix.
    pub c_qr: f64,
    pub seed: u64,
    /// Expansion order to use instead of the automatic choice.
    pub c_override: Option<usize>,
}

impl RunConfig {
    pub fn new(geometry: ShellGeometry, epsilon: f64, c_qr: f64, seed: u64) -> Result<Self> {
        let cfg = Self { geometry, epsilon, c_qr, seed, c_override: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_c(mut self, c: usize) -> Self {
        self.c_override = Some(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.c_qr.is_finite() && self.c_qr >= 1.0) {
            return Err(Error::InvalidArgument(format!("c_qr must be >= 1, got {}", self.c_qr)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_rejects_bad_radii() {
        assert!(ShellGeometry::new(1.0, 2.0).is_ok());
        assert!(ShellGeometry::new(2.0, 2.0).is_err());
        assert!(ShellGeometry::new(0.0, 2.0).is_err());
        assert!(ShellGeometry::new(3.0, 2.0).is_err());
        assert!(ShellGeometry::new(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let text = "# t=1 N=2\n0 0 1\n\n  # comment\n0 0 -1.0e0\n";
        let ps = PointSet::parse(text, "pair").unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps.get(1), Point3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = PointSet::parse("0 0 1\n0 1\n", "bad").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(PointSet::parse("0 0 x\n", "bad").is_err());
        assert!(PointSet::parse("0 0 inf\n", "bad").is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let ps = PointSet::new(
            "p",
            vec![Point3::new(0.1, -1.0 / 3.0, 2.0e-300), Point3::new(1e10, 0.0, -0.0)],
        )
        .unwrap();
        let back = PointSet::parse(&ps.to_text(&["hello".into()]), "p").unwrap();
        assert_eq!(ps.points(), back.points());
    }

    #[test]
    fn run_config_validation() {
        let g = ShellGeometry::new(1.0, 2.0).unwrap();
        assert!(RunConfig::new(g, 1e-6, 2.0, 0).is_ok());
        assert!(RunConfig::new(g, 0.0, 2.0, 0).is_err());
        assert!(RunConfig::new(g, 1e-6, 0.5, 0).is_err());
    }
}
