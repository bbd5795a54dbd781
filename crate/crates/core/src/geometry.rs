//! Kresling unit geometry: unit specifications, flat crease patterns and
//! hexagonal frames.
//!
//! A unit is a loop of six cells joining two regular hexagons. The bottom
//! hexagon has side `a1`, the top hexagon side `a2` and the slanted creases
//! have length `b`. Traditional units (TKO) have `a1 == a2` and parallelogram
//! cells laid out on a straight strip; conical units (CKO) have `a1 != a2` and
//! their cells sit on an annular strip.

use nalgebra::{Matrix3, Point2, Point3, Rotation2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Tolerance used to decide whether two hexagon sides are the same length.
pub const SIDE_MATCH_TOLERANCE: f64 = 1e-6;
/// Tolerance used to decide that a TKO unit really has equal sides.
pub const TKO_SIDE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("length `{name}` must be positive, got {value}")]
    NonPositiveLength { name: &'static str, value: f64 },
    #[error("cell angle must lie in (0, 180) degrees, got {0}")]
    InvalidAngle(f64),
    #[error("{kind:?} unit cannot have a1 = {a1} and a2 = {a2}")]
    KindShapeMismatch { kind: UnitKind, a1: f64, a2: f64 },
    #[error("cell {cell} of the strip is degenerate")]
    DegenerateCell { cell: usize },
    #[error("frame axes must be non-zero and orthogonal")]
    InvalidFrame,
}

impl GeometryError {
    pub fn name(&self) -> &'static str {
        match self {
            GeometryError::NonPositiveLength { .. } => "NonPositiveLength",
            GeometryError::InvalidAngle(_) => "InvalidAngle",
            GeometryError::KindShapeMismatch { .. } => "KindShapeMismatch",
            GeometryError::DegenerateCell { .. } => "DegenerateCell",
            GeometryError::InvalidFrame => "InvalidFrame",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitKind {
    #[serde(rename = "TKO")]
    Tko,
    #[serde(rename = "CKO")]
    Cko,
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::Tko => "TKO",
            UnitKind::Cko => "CKO",
        })
    }
}

/// Handedness of the cell pattern. Adjacent units in a stack use opposite
/// chirality so their twists partly cancel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chirality {
    #[serde(rename = "CW")]
    Cw,
    #[serde(rename = "CCW")]
    Ccw,
}

impl fmt::Display for Chirality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chirality::Cw => "CW",
            Chirality::Ccw => "CCW",
        })
    }
}

impl Chirality {
    /// Column offset of the tendon diagonal: `B_k -> T_{k + shift}`.
    pub fn shift(self) -> i32 {
        match self {
            Chirality::Cw => 1,
            Chirality::Ccw => -1,
        }
    }

    pub fn opposite(self) -> Chirality {
        match self {
            Chirality::Cw => Chirality::Ccw,
            Chirality::Ccw => Chirality::Cw,
        }
    }
}

/// Validated geometry of a single Kresling unit. Lengths in mm, angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSpec {
    kind: UnitKind,
    a1: f64,
    a2: f64,
    b: f64,
    alpha_deg: f64,
    chirality: Chirality,
}

impl UnitSpec {
    pub fn new(
        kind: UnitKind,
        a1: f64,
        a2: f64,
        b: f64,
        alpha_deg: f64,
        chirality: Chirality,
    ) -> Result<Self, GeometryError> {
        for (name, value) in [("a1", a1), ("a2", a2), ("b", b)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeometryError::NonPositiveLength { name, value });
            }
        }
        if !(alpha_deg > 0.0 && alpha_deg < 180.0) {
            return Err(GeometryError::InvalidAngle(alpha_deg));
        }
        let equal_sides = (a1 - a2).abs() <= TKO_SIDE_TOLERANCE;
        let a2 = match (kind, equal_sides) {
            (UnitKind::Tko, true) => a1,
            (UnitKind::Cko, false) => a2,
            _ => return Err(GeometryError::KindShapeMismatch { kind, a1, a2 }),
        };
        Ok(UnitSpec { kind, a1, a2, b, alpha_deg, chirality })
    }

    /// TKO unit with side `a`.
    pub fn tko(a: f64, b: f64, alpha_deg: f64, chirality: Chirality) -> Result<Self, GeometryError> {
        Self::new(UnitKind::Tko, a, a, b, alpha_deg, chirality)
    }

    /// Picks TKO or CKO from the side lengths.
    pub fn from_sides(
        a1: f64,
        a2: f64,
        b: f64,
        alpha_deg: f64,
        chirality: Chirality,
    ) -> Result<Self, GeometryError> {
        let kind = if (a1 - a2).abs() <= TKO_SIDE_TOLERANCE { UnitKind::Tko } else { UnitKind::Cko };
        Self::new(kind, a1, a2, b, alpha_deg, chirality)
    }

    pub fn kind(&self) -> UnitKind {
        self.kind
    }
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a2(&self) -> f64 {
        self.a2
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn alpha_deg(&self) -> f64 {
        self.alpha_deg
    }
    pub fn alpha(&self) -> f64 {
        self.alpha_deg.to_radians()
    }
    pub fn chirality(&self) -> Chirality {
        self.chirality
    }

    pub fn with_chirality(mut self, chirality: Chirality) -> Self {
        self.chirality = chirality;
        self
    }

    /// Same unit with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        Self::new(
            self.kind,
            self.a1 * factor,
            self.a2 * factor,
            self.b * factor,
            self.alpha_deg,
            self.chirality,
        )
    }
}

/// True when `lower`'s top hexagon can be joined to `upper`'s bottom hexagon.
pub fn check_compatibility(lower: &UnitSpec, upper: &UnitSpec) -> bool {
    sides_match(lower.a2(), upper.a1())
}

pub fn sides_match(lower_top: f64, upper_bottom: f64) -> bool {
    (lower_top - upper_bottom).abs() <= SIDE_MATCH_TOLERANCE
}

/// Length of the cell diagonal closed by a tendon (the short diagonal,
/// opposite the base angle).
pub fn cell_tendon_diagonal(spec: &UnitSpec) -> f64 {
    let (a, b) = (spec.a1(), spec.b());
    (a * a + b * b - 2.0 * a * b * spec.alpha().cos()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CreaseKind {
    Mountain,
    Valley,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRole {
    /// Side of the bottom hexagon (length `a1`).
    BottomSide,
    /// Side of the top hexagon (length `a2`).
    TopSide,
    /// Slanted crease between cells (length `b`).
    Slanted,
    /// Cell diagonal shortened by a tendon.
    TendonDiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crease {
    pub start: Point2<f64>,
    pub end: Point2<f64>,
    pub kind: CreaseKind,
    pub role: EdgeRole,
    /// Indices of the cells bounded by this edge.
    pub cells: Vec<usize>,
}

impl Crease {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

/// Planar quadrilateral `[P_k, P_k+1, Q_k+1, Q_k]`, bottom edge first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub vertices: [Point2<f64>; 4],
}

impl Cell {
    pub fn bottom(&self) -> f64 {
        (self.vertices[1] - self.vertices[0]).norm()
    }
    pub fn top(&self) -> f64 {
        (self.vertices[2] - self.vertices[3]).norm()
    }
    pub fn left(&self) -> f64 {
        (self.vertices[3] - self.vertices[0]).norm()
    }
    pub fn right(&self) -> f64 {
        (self.vertices[2] - self.vertices[1]).norm()
    }
}

/// Flat layout of one unit strip.
#[derive(Debug, Clone, PartialEq)]
pub struct CreasePattern {
    pub cells: Vec<Cell>,
    /// Bottom-hexagon vertices `P_0..P_6` along the strip.
    pub bottom: Vec<Point2<f64>>,
    /// Top-hexagon vertices `Q_0..Q_6` along the strip.
    pub top: Vec<Point2<f64>>,
    pub creases: Vec<Crease>,
    /// Bottom end of each cell's tendon diagonal.
    pub eyelet_anchors: Vec<Point2<f64>>,
    /// Edges that receive a connection tab: every hexagon side plus the
    /// closing slanted edge of the loop.
    pub tab_edges: Vec<(Point2<f64>, Point2<f64>)>,
}

impl CreasePattern {
    /// Sum of the bottom (`a1`) sides.
    pub fn bottom_length(&self) -> f64 {
        self.cells.iter().map(Cell::bottom).sum()
    }

    /// Sum of the top (`a2`) sides.
    pub fn top_length(&self) -> f64 {
        self.cells.iter().map(Cell::top).sum()
    }

    fn mirrored(&self) -> CreasePattern {
        let flip = |p: &Point2<f64>| Point2::new(-p.x, p.y);
        CreasePattern {
            cells: self
                .cells
                .iter()
                .map(|c| Cell { vertices: c.vertices.map(|p| flip(&p)) })
                .collect(),
            bottom: self.bottom.iter().map(flip).collect(),
            top: self.top.iter().map(flip).collect(),
            creases: self
                .creases
                .iter()
                .map(|c| Crease { start: flip(&c.start), end: flip(&c.end), ..c.clone() })
                .collect(),
            eyelet_anchors: self.eyelet_anchors.iter().map(flip).collect(),
            tab_edges: self.tab_edges.iter().map(|(a, b)| (flip(a), flip(b))).collect(),
        }
    }
}

/// Lays the six cells of a unit out flat.
///
/// `P_0` sits at the origin and the first slanted edge leaves it at the base
/// angle. TKO cells repeat by translation along +x. CKO cells repeat by the
/// rotation that carries `P_0` to `P_1` and `Q_0` to `Q_1`; its centre is
/// chosen so that the two chord families have lengths `a1` and `a2`. The
/// counter-clockwise chirality is the mirror image (x -> -x) of the clockwise
/// layout.
pub fn unroll_strip(spec: &UnitSpec) -> Result<CreasePattern, GeometryError> {
    let (a1, a2, b) = (spec.a1(), spec.a2(), spec.b());
    let alpha = spec.alpha();
    let p0 = Point2::new(0.0, 0.0);
    let q0 = Point2::new(b * alpha.cos(), b * alpha.sin());

    let (bottom, top): (Vec<_>, Vec<_>) = match spec.kind() {
        UnitKind::Tko => (0..=6)
            .map(|k| {
                let shift = Vector2::new(k as f64 * a1, 0.0);
                (p0 + shift, q0 + shift)
            })
            .unzip(),
        UnitKind::Cko => {
            let (centre, step) = annulus_rotation(a1, a2, b, alpha)?;
            (0..=6)
                .map(|k| {
                    let rot = Rotation2::new(step * k as f64);
                    (centre + rot * (p0 - centre), centre + rot * (q0 - centre))
                })
                .unzip()
        }
    };

    let scale = a1.max(a2).max(b);
    let mut cells = Vec::with_capacity(6);
    for k in 0..6 {
        let v = [bottom[k], bottom[k + 1], top[k + 1], top[k]];
        let lower = cross(v[1] - v[0], v[3] - v[0]);
        let upper = cross(v[2] - v[1], v[3] - v[1]);
        if lower.abs() <= 1e-9 * scale * scale || upper.abs() <= 1e-9 * scale * scale {
            return Err(GeometryError::DegenerateCell { cell: k });
        }
        cells.push(Cell { vertices: v });
    }

    let mut creases = Vec::with_capacity(31);
    for k in 0..6 {
        creases.push(Crease {
            start: bottom[k],
            end: bottom[k + 1],
            kind: CreaseKind::Mountain,
            role: EdgeRole::BottomSide,
            cells: vec![k],
        });
        creases.push(Crease {
            start: top[k],
            end: top[k + 1],
            kind: CreaseKind::Mountain,
            role: EdgeRole::TopSide,
            cells: vec![k],
        });
        creases.push(Crease {
            start: bottom[k + 1],
            end: top[k],
            kind: CreaseKind::Valley,
            role: EdgeRole::TendonDiagonal,
            cells: vec![k],
        });
    }
    for k in 0..=6 {
        let (kind, cells) = match k {
            0 => (CreaseKind::Boundary, vec![0]),
            6 => (CreaseKind::Boundary, vec![5]),
            _ => (CreaseKind::Mountain, vec![k - 1, k]),
        };
        creases.push(Crease { start: bottom[k], end: top[k], kind, role: EdgeRole::Slanted, cells });
    }

    let eyelet_anchors = (0..6).map(|k| bottom[k + 1]).collect();
    let mut tab_edges: Vec<_> = (0..6).map(|k| (bottom[k], bottom[k + 1])).collect();
    tab_edges.extend((0..6).map(|k| (top[k], top[k + 1])));
    tab_edges.push((bottom[6], top[6]));

    let pattern = CreasePattern { cells, bottom, top, creases, eyelet_anchors, tab_edges };
    Ok(match spec.chirality() {
        Chirality::Cw => pattern,
        Chirality::Ccw => pattern.mirrored(),
    })
}

/// Centre and signed per-cell angle of the rotation generating a CKO strip.
///
/// With `P_0 = 0`, `P_1 = (a1, 0)` and `Q_0 = b (cos α, sin α)` the centre lies
/// on `x = a1/2` at `(a1/2, -y)`. Requiring `|C Q_0| / |C P_0| = a2 / a1` gives
/// `(k^2 - 1) y^2 - 2 b sin α y + (k^2 - 1) a1^2 / 4 - b^2 + a1 b cos α = 0`
/// with `k = a2 / a1`. The root that runs off to infinity as `k -> 1` is the
/// one continuous with the straight TKO strip.
fn annulus_rotation(a1: f64, a2: f64, b: f64, alpha: f64) -> Result<(Point2<f64>, f64), GeometryError> {
    let k = a2 / a1;
    let quad = k * k - 1.0;
    let lin = 2.0 * b * alpha.sin();
    let constant = quad * a1 * a1 / 4.0 - b * b + a1 * b * alpha.cos();
    let disc = lin * lin - 4.0 * quad * constant;
    if disc < 0.0 || quad == 0.0 {
        return Err(GeometryError::DegenerateCell { cell: 0 });
    }
    let y = (lin + disc.sqrt()) / (2.0 * quad);
    let centre = Point2::new(a1 / 2.0, -y);
    let radius = (centre - Point2::origin()).norm();
    let half = (a1 / (2.0 * radius)).clamp(-1.0, 1.0).asin();
    // Centre below the strip turns clockwise, above turns counter-clockwise.
    let step = if y > 0.0 { -2.0 * half } else { 2.0 * half };
    Ok((centre, step))
}

fn cross(u: Vector2<f64>, v: Vector2<f64>) -> f64 {
    u.x * v.y - u.y * v.x
}

/// Rigid hexagonal frame in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialFrame {
    center: Point3<f64>,
    normal: Vector3<f64>,
    reference: Vector3<f64>,
    radius: f64,
}

impl SpatialFrame {
    pub fn new(
        center: Point3<f64>,
        normal: Vector3<f64>,
        reference: Vector3<f64>,
        radius: f64,
    ) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonPositiveLength { name: "radius", value: radius });
        }
        let (n, r) = (normal.norm(), reference.norm());
        if !(n > 0.0 && r > 0.0) {
            return Err(GeometryError::InvalidFrame);
        }
        let normal = normal / n;
        let reference = reference / r;
        if normal.dot(&reference).abs() > 1e-9 {
            return Err(GeometryError::InvalidFrame);
        }
        // Re-orthogonalise away the residual so the invariant holds to 1e-12.
        let reference = (reference - normal * normal.dot(&reference)).normalize();
        Ok(SpatialFrame { center, normal, reference, radius })
    }

    /// Frame at the origin with normal +z and reference +x.
    pub fn identity(radius: f64) -> Self {
        SpatialFrame {
            center: Point3::origin(),
            normal: Vector3::z(),
            reference: Vector3::x(),
            radius,
        }
    }

    /// Frame whose local x/z axes are the first/third columns of `rotation`.
    pub(crate) fn from_pose(center: Point3<f64>, rotation: &Matrix3<f64>, radius: f64) -> Self {
        SpatialFrame {
            center,
            normal: rotation.column(2).into_owned(),
            reference: rotation.column(0).into_owned(),
            radius,
        }
    }

    pub fn center(&self) -> Point3<f64> {
        self.center
    }
    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }
    pub fn reference(&self) -> Vector3<f64> {
        self.reference
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn binormal(&self) -> Vector3<f64> {
        self.normal.cross(&self.reference)
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// Rotation whose columns are (reference, binormal, normal).
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.reference, self.binormal(), self.normal])
    }
}

/// Vertices of the frame's regular hexagon; vertex `k` sits at azimuth
/// `60 k + twist_offset_deg` from the reference direction.
pub fn frame_vertices(frame: &SpatialFrame, twist_offset_deg: f64) -> [Point3<f64>; 6] {
    let binormal = frame.binormal();
    std::array::from_fn(|k| {
        let angle = (60.0 * k as f64 + twist_offset_deg).to_radians();
        frame.center + frame.radius * (angle.cos() * frame.reference + angle.sin() * binormal)
    })
}
