//! Closed-form bending limits, neutral semi-folded poses and the 3D
//! realisation of a unit stack.
//!
//! A unit's pose relative to its bottom frame has four parameters: axial
//! height, twist about the axis, and a tilt vector `β (cos φ, sin φ)`. The top
//! frame is built by twisting, then tilting about the in-plane axis
//! perpendicular to `φ`, then translating its centre by `height` along the
//! bisector of the bottom and top normals. The bottom frame of each unit is
//! the top frame of the unit below it, so hexagon vertex indices carry
//! straight through the stack.
//!
//! Stacks are stored palm first (section 1) and assembled from the forearm
//! frame of section 5 upwards.

use crate::geometry::{frame_vertices, Chirality, SpatialFrame, UnitSpec};
use crate::jet::Scalar;
use crate::sizing::{OrthosisDesign, SECTION_COUNT};
use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use thiserror::Error;

/// Sections free to bend (1-based).
pub const MOVABLE_SECTIONS: [usize; 3] = [2, 3, 4];
/// Dorsal/palmar total quoted for the reference orthosis, kept for comparison.
pub const REFERENCE_SAGITTAL_TOTAL_DEG: f64 = 66.84;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("extreme bending state is unreachable (cosine argument {argument})")]
    NotFoldable { argument: f64 },
    #[error("invalid geometry (cosine argument {argument})")]
    InvalidGeometry { argument: f64 },
    #[error("section {section} cannot reach its extreme bending state (cosine argument {argument})")]
    SectionNotFoldable { section: usize, argument: f64 },
    #[error("no twist gives a slanted edge of the requested length (cosine argument {argument})")]
    NoSolution { argument: f64 },
    #[error("tendon index {0} is outside 1..=6")]
    InvalidTendon(usize),
    #[error("invalid unit configuration: {0}")]
    InvalidConfiguration(&'static str),
}

impl KinematicsError {
    pub fn name(&self) -> &'static str {
        match self {
            KinematicsError::NotFoldable { .. } => "NotFoldable",
            KinematicsError::InvalidGeometry { .. } => "InvalidGeometry",
            KinematicsError::SectionNotFoldable { .. } => "NotFoldable",
            KinematicsError::NoSolution { .. } => "NoSolution",
            KinematicsError::InvalidTendon(_) => "InvalidTendon",
            KinematicsError::InvalidConfiguration(_) => "InvalidConfiguration",
        }
    }
}

fn bend_limit(a1: f64, a2: f64, b: f64, alpha_deg: f64, c1: f64, c2: f64) -> Result<f64, KinematicsError> {
    let sin_alpha = alpha_deg.to_radians().sin();
    let argument = (c1 * a1 * a1 + c2 * a2 * a2 - b * b * sin_alpha * sin_alpha) / (4.0 * 3f64.sqrt() * a1 * a2);
    if argument > 1.0 {
        Err(KinematicsError::NotFoldable { argument })
    } else if argument < -1.0 {
        Err(KinematicsError::InvalidGeometry { argument })
    } else {
        Ok(argument.acos().to_degrees())
    }
}

/// Largest bend towards the radial or ulnar side, in degrees.
pub fn max_bend_angle_lateral(spec: &UnitSpec) -> Result<f64, KinematicsError> {
    bend_limit(spec.a1(), spec.a2(), spec.b(), spec.alpha_deg(), 3.0, 4.0)
}

/// Largest bend towards the dorsal or palmar side, in degrees.
pub fn max_bend_angle_sagittal(spec: &UnitSpec) -> Result<f64, KinematicsError> {
    bend_limit(spec.a1(), spec.a2(), spec.b(), spec.alpha_deg(), 4.0, 3.0)
}

/// Twist (degrees) at which every slanted edge `B_k T_k` has length `b` for
/// an unbent unit of the given height. Clockwise units twist negatively,
/// which makes `B_k T_{k+1}` the short diagonal; counter-clockwise units are
/// the mirror image.
pub fn neutral_twist(spec: &UnitSpec, height: f64) -> Result<f64, KinematicsError> {
    let (r1, r2, b) = (spec.a1(), spec.a2(), spec.b());
    let argument = (r1 * r1 + r2 * r2 + height * height - b * b) / (2.0 * r1 * r2);
    if !(-1.0..=1.0).contains(&argument) {
        return Err(KinematicsError::NoSolution { argument });
    }
    let theta = argument.acos().to_degrees();
    Ok(match spec.chirality() {
        Chirality::Cw => -theta,
        Chirality::Ccw => theta,
    })
}

/// Pose of a unit's top frame relative to its bottom frame. Lengths in mm,
/// angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitConfiguration {
    pub height: f64,
    pub twist_deg: f64,
    pub bend_azimuth_deg: f64,
    pub bend_angle_deg: f64,
}

impl UnitConfiguration {
    pub fn new(height: f64, twist_deg: f64, bend_azimuth_deg: f64, bend_angle_deg: f64) -> Result<Self, KinematicsError> {
        if !(height >= 0.0) {
            return Err(KinematicsError::InvalidConfiguration("height must be non-negative"));
        }
        if !(0.0..180.0).contains(&bend_angle_deg) {
            return Err(KinematicsError::InvalidConfiguration("bend angle must lie in [0, 180)"));
        }
        Ok(UnitConfiguration { height, twist_deg, bend_azimuth_deg, bend_angle_deg })
    }

    /// Unbent pose at `height` with the neutral twist.
    pub fn neutral(spec: &UnitSpec, height: f64) -> Result<Self, KinematicsError> {
        Ok(UnitConfiguration { height, twist_deg: neutral_twist(spec, height)?, bend_azimuth_deg: 0.0, bend_angle_deg: 0.0 })
    }

    /// `[height, twist, tilt_x, tilt_y]` with angles in radians.
    pub fn to_params(&self) -> [f64; 4] {
        let beta = self.bend_angle_deg.to_radians();
        let phi = self.bend_azimuth_deg.to_radians();
        [self.height, self.twist_deg.to_radians(), beta * phi.cos(), beta * phi.sin()]
    }

    pub fn from_params(params: [f64; 4]) -> Self {
        let [height, twist, p, q] = params;
        let beta = p.hypot(q);
        let phi = if beta > 0.0 { q.atan2(p) } else { 0.0 };
        UnitConfiguration {
            height,
            twist_deg: twist.to_degrees(),
            bend_azimuth_deg: phi.to_degrees(),
            bend_angle_deg: beta.to_degrees(),
        }
    }
}

/// Relative pose of a top frame: rotation (row-major) and centre.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalPose<T> {
    pub rot: [[T; 3]; 3],
    pub center: [T; 3],
}

/// `sin θ / θ` and `(1 - cos θ) / θ²` as smooth functions of `s = θ²`.
fn rodrigues_coefficients<T: Scalar>(s: T) -> (T, T) {
    if s.value() < 1e-4 {
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let a = T::cst(1.0) - s.scale(1.0 / 6.0) + s2.scale(1.0 / 120.0) - s3.scale(1.0 / 5040.0)
            + s4.scale(1.0 / 362_880.0);
        let b = T::cst(0.5) - s.scale(1.0 / 24.0) + s2.scale(1.0 / 720.0) - s3.scale(1.0 / 40_320.0)
            + s4.scale(1.0 / 3_628_800.0);
        (a, b)
    } else {
        let theta = s.sqrt();
        let half = theta.scale(0.5).sin();
        (theta.sin() / theta, half * half.scale(2.0) / s)
    }
}

/// Twist, then tilt by the vector `(p, q)`, then lift by `h` along the bisector.
pub(crate) fn local_pose<T: Scalar>(h: T, twist: T, p: T, q: T) -> LocalPose<T> {
    let one = T::cst(1.0);
    let s = p * p + q * q;
    let (a, b) = rodrigues_coefficients(s);
    let tilt = [
        [one - b * p * p, -(b * p * q), a * p],
        [-(b * p * q), one - b * q * q, a * q],
        [-(a * p), -(a * q), one - b * s],
    ];
    let (c, sn) = (twist.cos(), twist.sin());
    let mut rot = [[T::cst(0.0); 3]; 3];
    for (row, t) in rot.iter_mut().zip(&tilt) {
        row[0] = t[0] * c + t[1] * sn;
        row[1] = t[1] * c - t[0] * sn;
        row[2] = t[2];
    }
    let (ah, bh) = rodrigues_coefficients(s.scale(0.25));
    let center = [h * ah * p.scale(0.5), h * ah * q.scale(0.5), h * (one - bh * s.scale(0.25))];
    LocalPose { rot, center }
}

pub(crate) fn hexagon_angles() -> [(f64, f64); 6] {
    std::array::from_fn(|k| (60.0 * k as f64).to_radians().sin_cos()).map(|(s, c)| (c, s))
}

/// Bottom and top vertices of a unit in its own bottom frame.
pub(crate) fn local_vertices<T: Scalar>(a1: f64, a2: f64, pose: &LocalPose<T>) -> ([[T; 3]; 6], [[T; 3]; 6]) {
    let angles = hexagon_angles();
    let zero = T::cst(0.0);
    let bottom = angles.map(|(c, s)| [T::cst(a1 * c), T::cst(a1 * s), zero]);
    let top = angles.map(|(c, s)| {
        let (x, y) = (a2 * c, a2 * s);
        std::array::from_fn(|i| pose.center[i] + pose.rot[i][0].scale(x) + pose.rot[i][1].scale(y))
    });
    (bottom, top)
}

pub(crate) fn distance<T: Scalar>(u: &[T; 3], v: &[T; 3]) -> T {
    let d = [u[0] - v[0], u[1] - v[1], u[2] - v[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Index of `k + shift` on the hexagon.
pub(crate) fn wrap(k: i32) -> usize {
    k.rem_euclid(6) as usize
}

/// Lengths of the slanted and diagonal edges of a unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLengths {
    /// Slanted edges `B_k T_k`.
    pub mountain: [f64; 6],
    /// Tendon diagonals `B_k T_{k+s}` with `s` the chirality shift.
    pub valley: [f64; 6],
    pub bottom_sides: [f64; 6],
    pub top_sides: [f64; 6],
}

pub fn edge_lengths(spec: &UnitSpec, config: &UnitConfiguration) -> EdgeLengths {
    let [h, t, p, q] = config.to_params();
    let pose = local_pose(h, t, p, q);
    let (bottom, top) = local_vertices(spec.a1(), spec.a2(), &pose);
    let shift = spec.chirality().shift();
    EdgeLengths {
        mountain: std::array::from_fn(|k| distance(&bottom[k], &top[k])),
        valley: std::array::from_fn(|k| distance(&bottom[k], &top[wrap(k as i32 + shift)])),
        bottom_sides: std::array::from_fn(|k| distance(&bottom[k], &bottom[wrap(k as i32 + 1)])),
        top_sides: std::array::from_fn(|k| distance(&top[k], &top[wrap(k as i32 + 1)])),
    }
}

fn pose_to_world(pose: &LocalPose<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let r = pose.rot;
    (
        Matrix3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]),
        Vector3::new(pose.center[0], pose.center[1], pose.center[2]),
    )
}

/// Top frame of a unit placed on `bottom_frame`, with radius `a2`.
pub fn top_frame(spec: &UnitSpec, config: &UnitConfiguration, bottom_frame: &SpatialFrame) -> SpatialFrame {
    let [h, t, p, q] = config.to_params();
    let (rot, center) = pose_to_world(&local_pose(h, t, p, q));
    let base = bottom_frame.rotation();
    SpatialFrame::from_pose(bottom_frame.center() + base * center, &(base * rot), spec.a2())
}

/// Bottom and top hexagon vertices of a unit sitting on `bottom_frame`.
pub fn unit_vertex_positions(
    spec: &UnitSpec,
    config: &UnitConfiguration,
    bottom_frame: &SpatialFrame,
) -> ([Point3<f64>; 6], [Point3<f64>; 6]) {
    let bottom = frame_vertices(&bottom_frame.with_radius(spec.a1()), 0.0);
    let top = frame_vertices(&top_frame(spec, config, bottom_frame), 0.0);
    (bottom, top)
}

/// One of the six tendons, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TendonId(usize);

impl TendonId {
    pub fn new(index: usize) -> Result<Self, KinematicsError> {
        if (1..=6).contains(&index) {
            Ok(TendonId(index))
        } else {
            Err(KinematicsError::InvalidTendon(index))
        }
    }

    pub fn all() -> [TendonId; 6] {
        std::array::from_fn(|i| TendonId(i + 1))
    }

    pub fn index(&self) -> usize {
        self.0
    }

    /// Nominal bending direction in the forearm frame (0 = dorsal).
    ///
    /// Tendons 2/3 straddle the dorsal side, 5/6 the palmar side, 1 is radial
    /// and 4 ulnar.
    pub fn sector_center_deg(&self) -> f64 {
        60.0 * self.0 as f64 - 150.0
    }
}

/// Hexagon column each tendon occupies at the bottom of every section.
///
/// Tendon `k` enters section 5 at column `k - 1` and shifts by each unit's
/// chirality on the way up. Returned in design order (palm first).
pub fn tendon_columns(design: &OrthosisDesign, tendon: TendonId) -> [usize; SECTION_COUNT] {
    let mut columns = [0usize; SECTION_COUNT];
    let mut column = tendon.index() as i32 - 1;
    for i in (0..SECTION_COUNT).rev() {
        columns[i] = wrap(column);
        column += design.units()[i].chirality().shift();
    }
    columns
}

/// Fold state of a whole orthosis.
#[derive(Debug, Clone, PartialEq)]
pub struct StackConfiguration {
    /// One configuration per section, palm first.
    pub unit_configs: [UnitConfiguration; SECTION_COUNT],
    /// Forearm-fixed frame at the bottom of section 5.
    pub base_pose: SpatialFrame,
    /// Azimuth of hexagon vertex 0 of the base frame, degrees.
    pub vertex_phase_deg: f64,
}

impl StackConfiguration {
    /// Every section unbent at its design height.
    pub fn neutral(design: &OrthosisDesign, base_pose: SpatialFrame, vertex_phase_deg: f64) -> Result<Self, KinematicsError> {
        let mut configs = Vec::with_capacity(SECTION_COUNT);
        for (unit, h) in design.units().iter().zip(design.heights()) {
            configs.push(UnitConfiguration::neutral(unit, *h)?);
        }
        Ok(StackConfiguration {
            unit_configs: configs.try_into().expect("five sections"),
            base_pose,
            vertex_phase_deg,
        })
    }

    /// Bottom frame of section 5 rotated so its reference points at vertex 0.
    fn vertex_frame(&self) -> (Point3<f64>, Matrix3<f64>) {
        let phase = Rotation3::from_axis_angle(&Vector3::z_axis(), self.vertex_phase_deg.to_radians());
        (self.base_pose.center(), self.base_pose.rotation() * phase.matrix())
    }

    /// World poses (centre, rotation) of the frames from the forearm (index 0)
    /// to the palm (index 5).
    pub fn frames(&self) -> Vec<(Point3<f64>, Matrix3<f64>)> {
        let mut frames = Vec::with_capacity(SECTION_COUNT + 1);
        let (mut center, mut rot) = self.vertex_frame();
        frames.push((center, rot));
        for config in self.unit_configs.iter().rev() {
            let [h, t, p, q] = config.to_params();
            let (r, c) = pose_to_world(&local_pose(h, t, p, q));
            center += rot * c;
            rot *= r;
            frames.push((center, rot));
        }
        frames
    }

    /// Palm frame centre and normal.
    pub fn palm(&self) -> (Point3<f64>, Vector3<f64>) {
        let (center, rot) = *self.frames().last().expect("palm frame");
        (center, rot.column(2).into_owned())
    }
}

/// Six frame vertices in world coordinates.
pub type Hexagon = [Point3<f64>; 6];

/// World hexagon vertices of every section, palm first: `(bottom, top)`.
pub fn stack_vertices(design: &OrthosisDesign, stack: &StackConfiguration) -> Vec<(Hexagon, Hexagon)> {
    let frames = stack.frames();
    let mut out = Vec::with_capacity(SECTION_COUNT);
    for i in 0..SECTION_COUNT {
        let unit = &design.units()[i];
        // Section i has its bottom at frame 4 - i and its top at frame 5 - i.
        let hexagon = |(center, rot): (Point3<f64>, Matrix3<f64>), radius: f64| {
            let frame = SpatialFrame::from_pose(center, &rot, radius);
            frame_vertices(&frame, 0.0)
        };
        out.push((hexagon(frames[4 - i], unit.a1()), hexagon(frames[5 - i], unit.a2())));
    }
    out
}

/// Length of a tendon: the sum of the diagonals it closes in each section.
pub fn tendon_length(design: &OrthosisDesign, stack: &StackConfiguration, tendon: TendonId) -> f64 {
    let vertices = stack_vertices(design, stack);
    let columns = tendon_columns(design, tendon);
    (0..SECTION_COUNT)
        .rev()
        .map(|i| {
            let (bottom, top) = &vertices[i];
            let c = columns[i];
            let end = wrap(c as i32 + design.units()[i].chirality().shift());
            (top[end] - bottom[c]).norm()
        })
        .sum()
}

/// Angle between the palm and forearm normals and the direction the palm
/// leans towards, measured in the forearm frame from its reference
/// direction. Both in degrees; the azimuth is 0 for an unbent stack.
pub fn stack_bend_angle(stack: &StackConfiguration) -> (f64, f64) {
    let (_, normal) = stack.palm();
    let base = stack.base_pose.rotation();
    let local = base.transpose() * normal;
    let beta = local.z.clamp(-1.0, 1.0).acos();
    let lateral = local.x.hypot(local.y);
    let phi = if lateral > 1e-15 { local.y.atan2(local.x) } else { 0.0 };
    (beta.to_degrees(), phi.to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionBend {
    pub section: usize,
    pub lateral_max_deg: f64,
    pub sagittal_max_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BendReport {
    pub per_section: Vec<SectionBend>,
    /// Lateral formula summed over the movable sections.
    pub summed_lateral: f64,
    /// Sagittal formula summed over the movable sections.
    pub summed_sagittal: f64,
    /// Sagittal for sections 2 and 4, lateral for section 3.
    pub mixed_sagittal: f64,
}

impl BendReport {
    pub fn discrepancy_note(&self) -> String {
        format!(
            "note: the sagittal total applies the dorsal/palmar formula to every movable section ({:.2} deg); \
             the quoted reference total of {:.2} deg is not reproduced by any single mapping. \
             Using the radial/ulnar formula for section 3 only gives {:.2} deg.",
            self.summed_sagittal, REFERENCE_SAGITTAL_TOTAL_DEG, self.mixed_sagittal
        )
    }
}

pub fn theoretical_bend_report(design: &OrthosisDesign) -> Result<BendReport, KinematicsError> {
    let mut per_section = Vec::with_capacity(MOVABLE_SECTIONS.len());
    for section in MOVABLE_SECTIONS {
        let unit = design.unit(section);
        let tag = |e: KinematicsError| match e {
            KinematicsError::NotFoldable { argument } => KinematicsError::SectionNotFoldable { section, argument },
            other => other,
        };
        per_section.push(SectionBend {
            section,
            lateral_max_deg: max_bend_angle_lateral(unit).map_err(tag)?,
            sagittal_max_deg: max_bend_angle_sagittal(unit).map_err(tag)?,
        });
    }
    let summed_lateral = per_section.iter().map(|s| s.lateral_max_deg).sum();
    let summed_sagittal = per_section.iter().map(|s| s.sagittal_max_deg).sum();
    let mixed_sagittal = per_section
        .iter()
        .map(|s| if s.section == 3 { s.lateral_max_deg } else { s.sagittal_max_deg })
        .sum();
    Ok(BendReport { per_section, summed_lateral, summed_sagittal, mixed_sagittal })
}
