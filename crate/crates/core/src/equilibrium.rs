//! Quasi-static bar-and-hinge model of the stack and its energy minimiser.
//!
//! Each movable unit contributes four reduced coordinates
//! `[height mm, twist rad, tilt_x rad, tilt_y rad]` (see
//! [`UnitConfiguration::to_params`]); locked units stay at their neutral pose.
//! Slanted edges carry the facet stiffness and tendon diagonals the crease
//! stiffness. A taut tendon adds `½ w (L − L*)²` once its length `L` exceeds
//! the commanded length `L*`.
//!
//! Barrier terms keep the minimiser inside the physical range of each unit:
//! the tilt stays below the smaller closed-form bending limit, neither
//! hexagon crosses the plane of the other, and no tendon diagonal collapses
//! to a point. They vanish, with their first two derivatives, away from the
//! boundary, and scale with the tendon penalty weight so that even a fully
//! contracted tendon settles at a well-conditioned state.
//!
//! The minimiser is a damped Newton method. Gradients and Hessians are exact
//! (second-order forward mode through the unit geometry), steps are accepted
//! by Armijo backtracking, and every loop runs in a fixed order so results
//! are bit-reproducible.

use crate::geometry::SpatialFrame;
use crate::jet::{Jet, Scalar};
use crate::kinematics::{
    distance, local_pose, local_vertices, max_bend_angle_lateral, max_bend_angle_sagittal, stack_bend_angle,
    tendon_columns, wrap, KinematicsError, StackConfiguration, TendonId, UnitConfiguration, MOVABLE_SECTIONS,
};
use crate::schedules::{sample_times, Schedule};
use crate::sizing::{OrthosisDesign, SECTION_COUNT};
use nalgebra::{DMatrix, DVector, Point3};
use thiserror::Error;

pub const DEFAULT_CREASE_STIFFNESS: f64 = 1.0;
pub const DEFAULT_FACET_STIFFNESS: f64 = 100.0;
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 5000;
/// Distance of the virtual marker from the palm frame centre along its normal.
pub const DEFAULT_MARKER_OFFSET_MM: f64 = 80.0;
/// Length of a single-tendon pull/loosen sweep.
pub const SWEEP_SECONDS: f64 = 14.0;
/// Sector centre of tendon 2, degrees.
const TENDON2_AZIMUTH_DEG: f64 = -30.0;
/// Contraction probing the small-deflection bending direction.
const RESPONSE_LIGHT_PULL: f64 = 0.01;

/// Bend barrier engages at this fraction of the unit's bending limit.
const BEND_ACTIVATION: f64 = 0.9;
/// Clearance barrier engages below this fraction of `a1`.
const CLEARANCE_ACTIVATION: f64 = 0.1;
/// Diagonal barrier engages below this fraction of the rest length.
const DIAGONAL_ACTIVATION: f64 = 0.2;
/// Barrier weight relative to `w · b²` with `w` the tendon penalty weight.
const BARRIER_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("stiffness must satisfy facet >= crease > 0 (crease {crease}, facet {facet})")]
    InvalidStiffness { crease: f64, facet: f64 },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("expected {expected} parameters, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tendon contraction {0} outside [0, 1]")]
    InvalidCommand(f64),
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
    #[error("section {0} cannot be made movable")]
    InvalidSection(usize),
    #[error("seed configuration violates the unit limits")]
    InfeasibleSeed,
    #[error("equilibrium not reached at t = {time} s (gradient norm {gradient_norm})")]
    NotConverged { time: f64, gradient_norm: f64 },
    #[error("a sweep needs at least 2 steps, got {0}")]
    InvalidSteps(usize),
    #[error("maximum contraction must lie in (0, 1], got {0}")]
    InvalidContraction(f64),
    #[error("sample rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("trajectory timestamps must increase strictly")]
    NonIncreasingTime,
}

impl EquilibriumError {
    pub fn name(&self) -> &'static str {
        match self {
            EquilibriumError::InvalidStiffness { .. } => "InvalidStiffness",
            EquilibriumError::Kinematics(e) => e.name(),
            EquilibriumError::DimensionMismatch { .. } => "DimensionMismatch",
            EquilibriumError::InvalidCommand(_) => "InvalidCommand",
            EquilibriumError::InvalidOptions(_) => "InvalidOptions",
            EquilibriumError::InvalidSection(_) => "InvalidSection",
            EquilibriumError::InfeasibleSeed => "InfeasibleSeed",
            EquilibriumError::NotConverged { .. } => "NotConverged",
            EquilibriumError::InvalidSteps(_) => "InvalidSteps",
            EquilibriumError::InvalidContraction(_) => "InvalidContraction",
            EquilibriumError::InvalidRate(_) => "InvalidRate",
            EquilibriumError::NonIncreasingTime => "NonIncreasingTime",
        }
    }
}

/// One unit's rest state and limits.
#[derive(Debug, Clone)]
struct UnitModel {
    a1: f64,
    a2: f64,
    shift: i32,
    neutral: [f64; 4],
    mountain_rest: [f64; 6],
    valley_rest: [f64; 6],
    /// Largest admissible tilt, radians.
    bend_limit: Option<f64>,
}

struct UnitTerms<T> {
    elastic: T,
    barrier: T,
    valley: [T; 6],
}

/// `μ (−ln r + (r − 1) − (r − 1)²/2)` for `r = z/z0 < 1`, zero above; the
/// value and first two derivatives are continuous at `r = 1`.
fn barrier<T: Scalar>(z: T, z0: f64, mu: f64) -> Option<T> {
    let v = z.value();
    if !(v > 0.0) {
        return None;
    }
    if v >= z0 {
        return Some(T::cst(0.0));
    }
    let r = z.scale(1.0 / z0);
    let d = r - T::cst(1.0);
    Some((d - d * d.scale(0.5) - r.ln()).scale(mu))
}

impl UnitModel {
    fn terms<T: Scalar>(&self, x: [T; 4], kf: f64, kc: f64, mu: f64) -> Option<UnitTerms<T>> {
        let pose = local_pose(x[0], x[1], x[2], x[3]);
        let (bottom, top) = local_vertices(self.a1, self.a2, &pose);
        let mut elastic = T::cst(0.0);
        let mut valley = [T::cst(0.0); 6];
        for k in 0..6 {
            let dm = distance(&bottom[k], &top[k]) - T::cst(self.mountain_rest[k]);
            let d = distance(&bottom[k], &top[wrap(k as i32 + self.shift)]);
            let dv = d - T::cst(self.valley_rest[k]);
            elastic = elastic + (dm * dm).scale(0.5 * kf) + (dv * dv).scale(0.5 * kc);
            valley[k] = d;
        }

        let mut penalty = T::cst(0.0);
        for (d, rest) in valley.iter().zip(&self.valley_rest) {
            penalty = penalty + barrier(d.scale(1.0 / rest), DIAGONAL_ACTIVATION, mu)?;
        }
        if let Some(limit) = self.bend_limit {
            let s = x[2] * x[2] + x[3] * x[3];
            let z = T::cst(1.0) - s.scale(1.0 / (limit * limit));
            penalty = penalty + barrier(z, 1.0 - BEND_ACTIVATION * BEND_ACTIVATION, mu)?;
        }
        let n = [pose.rot[0][2], pose.rot[1][2], pose.rot[2][2]];
        let inv = 1.0 / self.a1;
        for k in 0..6 {
            let above = top[k][2].scale(inv);
            let rel = [pose.center[0] - bottom[k][0], pose.center[1] - bottom[k][1], pose.center[2] - bottom[k][2]];
            let below = (n[0] * rel[0] + n[1] * rel[1] + n[2] * rel[2]).scale(inv);
            penalty = penalty + barrier(above, CLEARANCE_ACTIVATION, mu)? + barrier(below, CLEARANCE_ACTIVATION, mu)?;
        }
        Some(UnitTerms { elastic, barrier: penalty, valley })
    }
}

/// Elastic stack ready for equilibrium solves.
#[derive(Debug, Clone)]
pub struct ElasticModel {
    design: OrthosisDesign,
    crease_stiffness: f64,
    facet_stiffness: f64,
    units: Vec<UnitModel>,
    /// 0-based section indices of the movable units, palm first.
    movable: Vec<usize>,
    columns: [[usize; SECTION_COUNT]; 6],
    neutral_lengths: [f64; 6],
    base_pose: SpatialFrame,
    vertex_phase_deg: f64,
    marker_offset: f64,
    reference_length: f64,
}

/// Builds the elastic model with sections 2 to 4 movable.
pub fn build_elastic_model(
    design: &OrthosisDesign,
    crease_stiffness: f64,
    facet_stiffness: f64,
) -> Result<ElasticModel, EquilibriumError> {
    if !(crease_stiffness > 0.0) || !(facet_stiffness >= crease_stiffness) || !facet_stiffness.is_finite() {
        return Err(EquilibriumError::InvalidStiffness { crease: crease_stiffness, facet: facet_stiffness });
    }
    let mut units = Vec::with_capacity(SECTION_COUNT);
    for (spec, &h) in design.units().iter().zip(design.heights()) {
        let neutral = UnitConfiguration::neutral(spec, h)?.to_params();
        let pose = local_pose(neutral[0], neutral[1], neutral[2], neutral[3]);
        let (bottom, top) = local_vertices(spec.a1(), spec.a2(), &pose);
        let shift = spec.chirality().shift();
        let bend_limit = match (max_bend_angle_lateral(spec), max_bend_angle_sagittal(spec)) {
            (Ok(a), Ok(b)) => Some(a.min(b).to_radians()),
            (Ok(a), Err(_)) | (Err(_), Ok(a)) => Some(a.to_radians()),
            _ => None,
        };
        units.push(UnitModel {
            a1: spec.a1(),
            a2: spec.a2(),
            shift,
            neutral,
            mountain_rest: std::array::from_fn(|k| distance(&bottom[k], &top[k])),
            valley_rest: std::array::from_fn(|k| distance(&bottom[k], &top[wrap(k as i32 + shift)])),
            bend_limit,
        });
    }
    let movable: Vec<usize> = MOVABLE_SECTIONS.iter().map(|s| s - 1).collect();
    let reference_length = movable.iter().map(|&i| design.units()[i].b()).sum::<f64>() / movable.len() as f64;
    let columns = TendonId::all().map(|t| tendon_columns(design, t));
    let neutral_lengths = std::array::from_fn(|k| (0..SECTION_COUNT).map(|i| units[i].valley_rest[columns[k][i]]).sum());

    let mut model = ElasticModel {
        design: design.clone(),
        crease_stiffness,
        facet_stiffness,
        units,
        movable,
        columns,
        neutral_lengths,
        base_pose: SpatialFrame::identity(design.units()[SECTION_COUNT - 1].a1()),
        vertex_phase_deg: 0.0,
        marker_offset: DEFAULT_MARKER_OFFSET_MM,
        reference_length,
    };
    model.vertex_phase_deg = model.response_phase().unwrap_or_else(|| model.geometric_phase());
    Ok(model)
}

fn wrap_deg(angle: f64) -> f64 {
    (angle + 180.0).rem_euclid(360.0) - 180.0
}

impl ElasticModel {
    /// Base rotation centring tendon 2's bending response on its sector: the
    /// stack leans a little differently under a light pull and a full pull,
    /// and the datum is the mean of the two directions.
    fn response_phase(&self) -> Option<f64> {
        let tendon = TendonId::new(2).expect("tendon 2");
        let (mut sx, mut sy) = (0.0, 0.0);
        for c in [RESPONSE_LIGHT_PULL, 1.0] {
            let command = TendonCommand::single(tendon, c).ok()?;
            let result = solve_equilibrium(self, &command, &SolveOptions::default()).ok()?;
            let (beta, phi) = stack_bend_angle(&result.configuration);
            if !result.converged || !(beta > 1e-6) {
                return None;
            }
            sx += phi.to_radians().cos();
            sy += phi.to_radians().sin();
        }
        let mean = sy.atan2(sx).to_degrees();
        Some(wrap_deg(TENDON2_AZIMUTH_DEG - mean + self.vertex_phase_deg))
    }

    /// Base rotation placing tendon 2's diagonals, averaged over the movable
    /// sections, at the centre of its sector.
    fn geometric_phase(&self) -> f64 {
        let stack = StackConfiguration {
            unit_configs: self.units.iter().map(|u| UnitConfiguration::from_params(u.neutral)).collect::<Vec<_>>()
                .try_into()
                .expect("five units"),
            base_pose: self.base_pose,
            vertex_phase_deg: 0.0,
        };
        let vertices = crate::kinematics::stack_vertices(&self.design, &stack);
        let (mut sx, mut sy) = (0.0, 0.0);
        for &i in &self.movable {
            let c = self.columns[1][i];
            let (bottom, top) = &vertices[i];
            let mid = (bottom[c].coords + top[wrap(c as i32 + self.units[i].shift)].coords) * 0.5;
            let az = mid.y.atan2(mid.x);
            sx += az.cos();
            sy += az.sin();
        }
        wrap_deg(TENDON2_AZIMUTH_DEG - sy.atan2(sx).to_degrees())
    }

    /// Restricts motion to the given 1-based sections (all others keep their
    /// neutral pose).
    pub fn with_movable_sections(mut self, sections: &[usize]) -> Result<Self, EquilibriumError> {
        let mut movable: Vec<usize> = Vec::new();
        for &s in sections {
            if !(1..=SECTION_COUNT).contains(&s) || movable.contains(&(s - 1)) {
                return Err(EquilibriumError::InvalidSection(s));
            }
            movable.push(s - 1);
        }
        if movable.is_empty() {
            return Err(EquilibriumError::InvalidSection(0));
        }
        movable.sort_unstable();
        self.movable = movable;
        Ok(self)
    }

    /// Keeps section 2 at its neutral pose.
    pub fn with_section2_pinned(self, pinned: bool) -> Result<Self, EquilibriumError> {
        if pinned {
            let sections: Vec<usize> = self.movable_sections().into_iter().filter(|&s| s != 2).collect();
            self.with_movable_sections(&sections)
        } else {
            Ok(self)
        }
    }

    pub fn with_marker_offset(mut self, offset_mm: f64) -> Self {
        self.marker_offset = offset_mm;
        self
    }

    pub fn design(&self) -> &OrthosisDesign {
        &self.design
    }
    pub fn crease_stiffness(&self) -> f64 {
        self.crease_stiffness
    }
    pub fn facet_stiffness(&self) -> f64 {
        self.facet_stiffness
    }
    pub fn vertex_phase_deg(&self) -> f64 {
        self.vertex_phase_deg
    }
    pub fn base_pose(&self) -> SpatialFrame {
        self.base_pose
    }
    pub fn marker_offset(&self) -> f64 {
        self.marker_offset
    }

    /// 1-based sections free to move.
    pub fn movable_sections(&self) -> Vec<usize> {
        self.movable.iter().map(|i| i + 1).collect()
    }

    /// 1-based sections held at their neutral pose.
    pub fn locked_sections(&self) -> Vec<usize> {
        (1..=SECTION_COUNT).filter(|s| !self.movable.contains(&(s - 1))).collect()
    }

    /// Rest lengths `(slanted, diagonal)` of a 1-based section.
    pub fn rest_lengths(&self, section: usize) -> ([f64; 6], [f64; 6]) {
        let u = &self.units[section - 1];
        (u.mountain_rest, u.valley_rest)
    }

    /// Bending limit of a 1-based section in degrees, if it has one.
    pub fn bend_limit_deg(&self, section: usize) -> Option<f64> {
        self.units[section - 1].bend_limit.map(f64::to_degrees)
    }

    pub fn parameter_count(&self) -> usize {
        4 * self.movable.len()
    }

    pub fn neutral_parameters(&self) -> Vec<f64> {
        self.movable.iter().flat_map(|&i| self.units[i].neutral).collect()
    }

    pub fn neutral_tendon_lengths(&self) -> [f64; 6] {
        self.neutral_lengths
    }

    /// Stack configuration with the movable units set from `params`.
    pub fn configuration(&self, params: &[f64]) -> Result<StackConfiguration, EquilibriumError> {
        self.check_dimension(params)?;
        let mut configs: [UnitConfiguration; SECTION_COUNT] =
            std::array::from_fn(|i| UnitConfiguration::from_params(self.units[i].neutral));
        for (j, &i) in self.movable.iter().enumerate() {
            configs[i] = UnitConfiguration::from_params(unit_slice(params, j));
        }
        Ok(StackConfiguration { unit_configs: configs, base_pose: self.base_pose, vertex_phase_deg: self.vertex_phase_deg })
    }

    /// Parameters of the movable units of `stack`.
    pub fn parameters(&self, stack: &StackConfiguration) -> Vec<f64> {
        self.movable.iter().flat_map(|&i| stack.unit_configs[i].to_params()).collect()
    }

    pub fn neutral_configuration(&self) -> StackConfiguration {
        self.configuration(&self.neutral_parameters()).expect("neutral dimension")
    }

    /// Virtual marker rigidly attached to the palm frame.
    pub fn marker(&self, stack: &StackConfiguration) -> Point3<f64> {
        let (center, normal) = stack.palm();
        center + normal * self.marker_offset
    }

    /// Tendon lengths for the movable parameters `params`.
    pub fn tendon_lengths(&self, params: &[f64]) -> Result<[f64; 6], EquilibriumError> {
        self.check_dimension(params)?;
        let diagonals: Vec<[f64; 6]> = (0..self.movable.len())
            .map(|j| {
                let x = unit_slice(params, j);
                let u = &self.units[self.movable[j]];
                let pose = local_pose(x[0], x[1], x[2], x[3]);
                let (bottom, top) = local_vertices(u.a1, u.a2, &pose);
                std::array::from_fn(|k| distance(&bottom[k], &top[wrap(k as i32 + u.shift)]))
            })
            .collect();
        Ok(std::array::from_fn(|k| self.tendon_length_from(k, &diagonals, |d| d)))
    }

    fn check_dimension(&self, params: &[f64]) -> Result<(), EquilibriumError> {
        if params.len() == self.parameter_count() {
            Ok(())
        } else {
            Err(EquilibriumError::DimensionMismatch { expected: self.parameter_count(), got: params.len() })
        }
    }

    /// `L_k`: locked sections at rest length plus the movable diagonals.
    fn tendon_length_from<T: Scalar>(&self, k: usize, diagonals: &[[T; 6]], lift: impl Fn(f64) -> T) -> T {
        let mut length = T::cst(0.0);
        let mut j = 0;
        for i in 0..SECTION_COUNT {
            let c = self.columns[k][i];
            if self.movable.get(j) == Some(&i) {
                length = length + diagonals[j][c];
                j += 1;
            } else {
                length = length + lift(self.units[i].valley_rest[c]);
            }
        }
        length
    }

    fn unit_terms<T: Scalar>(&self, j: usize, x: [T; 4], weight: f64) -> Option<UnitTerms<T>> {
        let mu = BARRIER_SCALE * weight * self.reference_length * self.reference_length;
        self.units[self.movable[j]].terms(x, self.facet_stiffness, self.crease_stiffness, mu)
    }

    /// Objective value and its elastic part; `None` outside the unit limits.
    fn evaluate(&self, params: &[f64], target: &[f64; 6], weight: f64) -> Option<(f64, f64)> {
        let mut elastic = 0.0;
        let mut barrier = 0.0;
        let mut diagonals = Vec::with_capacity(self.movable.len());
        for j in 0..self.movable.len() {
            let t = self.unit_terms(j, unit_slice(params, j), weight)?;
            elastic += t.elastic;
            barrier += t.barrier;
            diagonals.push(t.valley);
        }
        let mut penalty = 0.0;
        for (k, &goal) in target.iter().enumerate() {
            let excess = self.tendon_length_from(k, &diagonals, |d| d) - goal;
            if excess > 0.0 {
                penalty += 0.5 * weight * excess * excess;
            }
        }
        Some((elastic + barrier + penalty, elastic))
    }

    /// Value, gradient and Hessian of the objective.
    fn derivatives(
        &self,
        params: &[f64],
        target: &[f64; 6],
        weight: f64,
        elastic_only: bool,
    ) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.parameter_count();
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut diagonals: Vec<[Jet<4>; 6]> = Vec::with_capacity(self.movable.len());
        for j in 0..self.movable.len() {
            let x0 = unit_slice(params, j);
            let x: [Jet<4>; 4] = std::array::from_fn(|i| Jet::variable(x0[i], i));
            let t = self.unit_terms(j, x, weight)?;
            let e = if elastic_only { t.elastic } else { t.elastic + t.barrier };
            value += e.v;
            for a in 0..4 {
                grad[4 * j + a] += e.g[a];
                for b in 0..4 {
                    hess[(4 * j + a, 4 * j + b)] += e.h[a][b];
                }
            }
            diagonals.push(t.valley);
        }
        if elastic_only {
            return Some((value, grad, hess));
        }
        for (k, &goal) in target.iter().enumerate() {
            let mut length = 0.0;
            let mut j = 0;
            let mut parts: Vec<(usize, Jet<4>)> = Vec::new();
            for i in 0..SECTION_COUNT {
                let c = self.columns[k][i];
                if self.movable.get(j) == Some(&i) {
                    length += diagonals[j][c].v;
                    parts.push((j, diagonals[j][c]));
                    j += 1;
                } else {
                    length += self.units[i].valley_rest[c];
                }
            }
            let excess = length - goal;
            if excess <= 0.0 {
                continue;
            }
            value += 0.5 * weight * excess * excess;
            for &(ja, da) in &parts {
                for a in 0..4 {
                    grad[4 * ja + a] += weight * excess * da.g[a];
                    for b in 0..4 {
                        hess[(4 * ja + a, 4 * ja + b)] += weight * excess * da.h[a][b];
                    }
                    for &(jb, db) in &parts {
                        for b in 0..4 {
                            hess[(4 * ja + a, 4 * jb + b)] += weight * da.g[a] * db.g[b];
                        }
                    }
                }
            }
        }
        Some((value, grad, hess))
    }

    /// Per-coordinate scale turning angles into lengths (mm per rad).
    fn scales(&self) -> DVector<f64> {
        DVector::from_fn(self.parameter_count(), |i, _| if i % 4 == 0 { 1.0 } else { 1.0 / self.reference_length })
    }
}

fn unit_slice<T: Copy>(params: &[T], j: usize) -> [T; 4] {
    [params[4 * j], params[4 * j + 1], params[4 * j + 2], params[4 * j + 3]]
}

/// Elastic energy (N·mm) of the movable units and its gradient.
pub fn total_energy(model: &ElasticModel, params: &[f64]) -> Result<(f64, Vec<f64>), EquilibriumError> {
    model.check_dimension(params)?;
    // Elastic terms are defined everywhere; barriers are skipped here.
    let mut value = 0.0;
    let mut grad = vec![0.0; params.len()];
    for j in 0..model.movable.len() {
        let x0 = unit_slice(params, j);
        let x: [Jet<4>; 4] = std::array::from_fn(|i| Jet::variable(x0[i], i));
        let u = &model.units[model.movable[j]];
        let pose = local_pose(x[0], x[1], x[2], x[3]);
        let (bottom, top) = local_vertices(u.a1, u.a2, &pose);
        for k in 0..6 {
            let dm = distance(&bottom[k], &top[k]) - Jet::constant(u.mountain_rest[k]);
            let dv = distance(&bottom[k], &top[wrap(k as i32 + u.shift)]) - Jet::constant(u.valley_rest[k]);
            let e = (dm * dm).scale(0.5 * model.facet_stiffness) + (dv * dv).scale(0.5 * model.crease_stiffness);
            value += e.v;
            for a in 0..4 {
                grad[4 * j + a] += e.g[a];
            }
        }
    }
    Ok((value, grad))
}

/// Full objective (elastic, barriers and tendon penalty) and its gradient;
/// `None` outside the unit limits.
pub fn objective(
    model: &ElasticModel,
    command: &TendonCommand,
    penalty_weight: f64,
    params: &[f64],
) -> Result<Option<(f64, Vec<f64>)>, EquilibriumError> {
    model.check_dimension(params)?;
    let target = command.targets(&model.neutral_lengths);
    Ok(model
        .derivatives(params, &target, penalty_weight, false)
        .map(|(v, g, _)| (v, g.iter().copied().collect())))
}

/// Fractional shortening commanded for each tendon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TendonCommand([f64; 6]);

impl TendonCommand {
    pub fn new(contraction: [f64; 6]) -> Result<Self, EquilibriumError> {
        for c in contraction {
            if !(0.0..=1.0).contains(&c) {
                return Err(EquilibriumError::InvalidCommand(c));
            }
        }
        Ok(TendonCommand(contraction))
    }

    pub fn zero() -> Self {
        TendonCommand([0.0; 6])
    }

    pub fn uniform(c: f64) -> Result<Self, EquilibriumError> {
        Self::new([c; 6])
    }

    pub fn single(tendon: TendonId, c: f64) -> Result<Self, EquilibriumError> {
        let mut values = [0.0; 6];
        values[tendon.index() - 1] = c;
        Self::new(values)
    }

    pub fn contraction(&self) -> [f64; 6] {
        self.0
    }

    /// Commanded lengths given the neutral ones.
    pub fn targets(&self, neutral: &[f64; 6]) -> [f64; 6] {
        std::array::from_fn(|k| (1.0 - self.0[k]) * neutral[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub energy_tolerance: f64,
    pub max_iterations: usize,
    /// N/mm; `None` means `1000 × crease stiffness`.
    pub penalty_weight: Option<f64>,
    pub seed: Option<StackConfiguration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            energy_tolerance: DEFAULT_ENERGY_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            penalty_weight: None,
            seed: None,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), EquilibriumError> {
        if !(self.energy_tolerance > 0.0) {
            return Err(EquilibriumError::InvalidOptions("energy tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(EquilibriumError::InvalidOptions("max iterations must be positive"));
        }
        if let Some(w) = self.penalty_weight {
            if !(w > 0.0) || !w.is_finite() {
                return Err(EquilibriumError::InvalidOptions("penalty weight must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub configuration: StackConfiguration,
    pub parameters: Vec<f64>,
    /// Objective at the returned state, N·mm.
    pub energy: f64,
    /// Spring energy alone, N·mm.
    pub elastic_energy: f64,
    pub converged: bool,
    /// Gradient norm with angles scaled to lengths, N.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub tendon_lengths: [f64; 6],
    /// Tension in each tendon, N; zero when slack.
    pub tendon_forces: [f64; 6],
}

impl SolveResult {
    /// Gradient threshold for convergence, N.
    pub fn threshold(model: &ElasticModel, options: &SolveOptions) -> f64 {
        options.energy_tolerance * model.crease_stiffness * model.reference_length
    }
}

pub fn solve_equilibrium(
    model: &ElasticModel,
    command: &TendonCommand,
    options: &SolveOptions,
) -> Result<SolveResult, EquilibriumError> {
    options.validate()?;
    let weight = options.penalty_weight.unwrap_or(1e3 * model.crease_stiffness);
    let target = command.targets(&model.neutral_lengths);
    let mut x = match &options.seed {
        Some(seed) => model.parameters(seed),
        None => model.neutral_parameters(),
    };
    let (mut f, _) = model.evaluate(&x, &target, weight).ok_or(EquilibriumError::InfeasibleSeed)?;
    let threshold = SolveResult::threshold(model, options);
    let scale = model.scales();
    let n = x.len();

    let mut lambda = 0.0;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;
    let mut iterations = 0;
    'outer: while iterations < options.max_iterations {
        let (_, g, h) = model.derivatives(&x, &target, weight, false).expect("current iterate is feasible");
        let gs = g.component_mul(&scale);
        gradient_norm = gs.norm();
        if gradient_norm <= threshold {
            converged = true;
            break;
        }
        iterations += 1;
        let mut hs = h;
        for r in 0..n {
            for c in 0..n {
                hs[(r, c)] *= scale[r] * scale[c];
            }
        }
        let diag_max = (0..n).map(|i| hs[(i, i)].abs()).fold(0.0, f64::max);
        let floor = 1e-10 * (1.0 + diag_max);
        loop {
            let mut m = hs.clone();
            for i in 0..n {
                m[(i, i)] += lambda;
            }
            if let Some(chol) = m.cholesky() {
                let dy = chol.solve(&(-&gs));
                let slope = gs.dot(&dy);
                let dx = dy.component_mul(&scale);
                let mut step = 1.0;
                for _ in 0..60 {
                    let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
                    if let Some((ft, _)) = model.evaluate(&trial, &target, weight) {
                        // Round-off slack lets the final Newton steps through
                        // once the decrease falls below the resolution of `f`.
                        if ft <= f + 1e-4 * step * slope + 8.0 * f64::EPSILON * f.abs() {
                            x = trial;
                            f = ft;
                            lambda = if lambda * 0.1 < floor { 0.0 } else { lambda * 0.1 };
                            continue 'outer;
                        }
                        // Along stiff modes the Newton decrease can sit below the
                        // noise in `f`; accept a full step that stays within
                        // that noise and halves the gradient.
                        if step == 1.0 && ft <= f + 1e-12 * (1.0 + f.abs()) {
                            if let Some((_, gt, _)) = model.derivatives(&trial, &target, weight, false) {
                                if gt.component_mul(&scale).norm() < 0.5 * gradient_norm {
                                    x = trial;
                                    f = ft;
                                    lambda = if lambda * 0.1 < floor { 0.0 } else { lambda * 0.1 };
                                    continue 'outer;
                                }
                            }
                        }
                    }
                    step *= 0.5;
                }
            }
            lambda = (lambda * 10.0).max(floor);
            if lambda > 1e20 * (1.0 + diag_max) {
                break 'outer;
            }
        }
    }

    let (energy, elastic_energy) = model.evaluate(&x, &target, weight).expect("feasible");
    let tendon_lengths = model.tendon_lengths(&x)?;
    let tendon_forces = std::array::from_fn(|k| weight * (tendon_lengths[k] - target[k]).max(0.0));
    Ok(SolveResult {
        configuration: model.configuration(&x)?,
        parameters: x,
        energy,
        elastic_energy,
        converged,
        gradient_norm,
        iterations,
        tendon_lengths,
        tendon_forces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Seconds.
    pub t: f64,
    /// Marker position in the forearm frame, mm.
    pub marker: [f64; 3],
    pub beta_deg: f64,
    pub phi_deg: f64,
    pub tendon_lengths: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory::default()
    }

    pub fn from_samples(samples: Vec<TrajectorySample>) -> Result<Self, EquilibriumError> {
        let mut trajectory = Trajectory::new();
        for s in samples {
            trajectory.push(s)?;
        }
        Ok(trajectory)
    }

    pub fn push(&mut self, sample: TrajectorySample) -> Result<(), EquilibriumError> {
        if let Some(last) = self.samples.last() {
            if !(sample.t > last.t) {
                return Err(EquilibriumError::NonIncreasingTime);
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest stack bending angle reached, degrees.
    pub fn max_beta_deg(&self) -> f64 {
        self.samples.iter().map(|s| s.beta_deg).fold(0.0, f64::max)
    }
}

fn sample(model: &ElasticModel, t: f64, result: &SolveResult) -> TrajectorySample {
    let marker = model.marker(&result.configuration);
    let (beta_deg, phi_deg) = stack_bend_angle(&result.configuration);
    TrajectorySample { t, marker: [marker.x, marker.y, marker.z], beta_deg, phi_deg, tendon_lengths: result.tendon_lengths }
}

/// Solves at each time in order, seeding every solve with the previous state.
fn run_commands(
    model: &ElasticModel,
    times: &[f64],
    command_at: impl Fn(f64) -> Result<TendonCommand, EquilibriumError>,
    options: &SolveOptions,
) -> Result<Trajectory, EquilibriumError> {
    let mut trajectory = Trajectory::new();
    let mut options = options.clone();
    for &t in times {
        let result = solve_equilibrium(model, &command_at(t)?, &options)?;
        if !result.converged {
            return Err(EquilibriumError::NotConverged { time: t, gradient_norm: result.gradient_norm });
        }
        trajectory.push(sample(model, t, &result))?;
        options.seed = Some(result.configuration);
    }
    Ok(trajectory)
}

/// Pulls one tendon linearly to `max_contraction` over 7 s and releases it
/// over the next 7 s, sampled at `steps` evenly spaced instants.
pub fn sweep_single_tendon(
    model: &ElasticModel,
    tendon: TendonId,
    steps: usize,
    max_contraction: f64,
    options: &SolveOptions,
) -> Result<Trajectory, EquilibriumError> {
    if steps < 2 {
        return Err(EquilibriumError::InvalidSteps(steps));
    }
    if !(max_contraction > 0.0 && max_contraction <= 1.0) {
        return Err(EquilibriumError::InvalidContraction(max_contraction));
    }
    let times: Vec<f64> = (0..steps).map(|i| SWEEP_SECONDS * i as f64 / (steps - 1) as f64).collect();
    let half = SWEEP_SECONDS / 2.0;
    run_commands(
        model,
        &times,
        |t| TendonCommand::single(tendon, (max_contraction * (1.0 - (t - half).abs() / half)).clamp(0.0, 1.0)),
        options,
    )
}

pub fn run_schedule(
    model: &ElasticModel,
    schedule: &Schedule,
    samples_per_second: f64,
    options: &SolveOptions,
) -> Result<Trajectory, EquilibriumError> {
    if !(samples_per_second > 0.0) || !samples_per_second.is_finite() {
        return Err(EquilibriumError::InvalidRate(samples_per_second));
    }
    let times = sample_times(schedule.duration(), samples_per_second);
    run_commands(model, &times, |t| TendonCommand::new(schedule.contractions_at(t)), options)
}
