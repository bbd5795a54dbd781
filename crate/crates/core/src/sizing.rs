//! Converts hand, wrist and forearm measurements into a five-unit orthosis.
//!
//! Sections are numbered 1..=5 from the palm to the forearm. Section `i` has
//! a top circumference (palm side), a bottom circumference (forearm side) and
//! a height. Equal circumferences give a TKO unit, unequal ones a CKO unit.

use crate::geometry::{check_compatibility, Chirality, GeometryError, UnitSpec};
use thiserror::Error;

pub const SECTION_COUNT: usize = 5;
pub const DEFAULT_TOLERANCE_MM: f64 = 15.0;
pub const DEFAULT_ALPHA_DEG: f64 = 60.0;
/// Crease length of the palm section relative to its bottom side.
pub const PALM_CREASE_RATIO: f64 = 0.6;
/// Multiplicative growth applied to `b` until the unit can semi-fold.
pub const CREASE_GROWTH: f64 = 1.2;
pub const MAX_GROWTH_STEPS: usize = 64;
/// Sections fixed to the palm and forearm (1-based).
pub const LOCKED_SECTIONS: [usize; 2] = [1, 5];

const SHARED_CIRCUMFERENCE_TOLERANCE: f64 = 1e-6;
const EQUAL_CIRCUMFERENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SizingError {
    #[error("circumference must be positive, got {0}")]
    NonPositiveCircumference(f64),
    #[error("section height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("tolerance must be non-negative, got {0}")]
    NegativeTolerance(f64),
    #[error("cell angle must lie in (0, 180) degrees, got {0}")]
    InvalidAngle(f64),
    #[error("section index {0} is outside 1..=5")]
    InvalidSectionIndex(usize),
    #[error("expected {SECTION_COUNT} sections, got {0}")]
    SectionCount(usize),
    #[error("bottom circumference of section {section} ({bottom}) differs from top of section {} ({top})", section + 1)]
    SharedCircumferenceMismatch { section: usize, bottom: f64, top: f64 },
    #[error("crease length of section {section} did not satisfy the semi-fold condition after {MAX_GROWTH_STEPS} growth steps")]
    NonConvergence { section: usize },
    #[error("section {section} cannot reach a semi-folded configuration")]
    InfeasibleSection { section: usize },
    #[error("sections {upper} and {lower} do not share a hexagon side")]
    IncompatibleInterface { upper: usize, lower: usize },
    #[error("sections {0} and {} have the same chirality", .0 + 1)]
    ChiralityNotAlternating(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl SizingError {
    pub fn name(&self) -> &'static str {
        match self {
            SizingError::NonPositiveCircumference(_) => "NonPositiveCircumference",
            SizingError::NonPositiveHeight(_) => "NonPositiveHeight",
            SizingError::NegativeTolerance(_) => "NegativeTolerance",
            SizingError::InvalidAngle(_) => "InvalidAngle",
            SizingError::InvalidSectionIndex(_) => "InvalidSectionIndex",
            SizingError::SectionCount(_) => "SectionCount",
            SizingError::SharedCircumferenceMismatch { .. } => "SharedCircumferenceMismatch",
            SizingError::NonConvergence { .. } => "NonConvergence",
            SizingError::InfeasibleSection { .. } => "InfeasibleSection",
            SizingError::IncompatibleInterface { .. } => "IncompatibleInterface",
            SizingError::ChiralityNotAlternating(_) => "ChiralityNotAlternating",
            SizingError::Geometry(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionMeasurement {
    c_top: f64,
    c_bottom: f64,
    height: f64,
}

impl SectionMeasurement {
    pub fn new(c_top: f64, c_bottom: f64, height: f64) -> Result<Self, SizingError> {
        for c in [c_top, c_bottom] {
            if !(c > 0.0) || !c.is_finite() {
                return Err(SizingError::NonPositiveCircumference(c));
            }
        }
        if !(height > 0.0) || !height.is_finite() {
            return Err(SizingError::NonPositiveHeight(height));
        }
        Ok(SectionMeasurement { c_top, c_bottom, height })
    }

    pub fn c_top(&self) -> f64 {
        self.c_top
    }
    pub fn c_bottom(&self) -> f64 {
        self.c_bottom
    }
    pub fn height(&self) -> f64 {
        self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    sections: [SectionMeasurement; SECTION_COUNT],
    tolerance: f64,
    alpha_deg: f64,
}

impl MeasurementSet {
    pub fn new(sections: Vec<SectionMeasurement>, tolerance: f64, alpha_deg: f64) -> Result<Self, SizingError> {
        let sections: [SectionMeasurement; SECTION_COUNT] = sections
            .try_into()
            .map_err(|v: Vec<SectionMeasurement>| SizingError::SectionCount(v.len()))?;
        if !(tolerance >= 0.0) || !tolerance.is_finite() {
            return Err(SizingError::NegativeTolerance(tolerance));
        }
        if !(alpha_deg > 0.0 && alpha_deg < 180.0) {
            return Err(SizingError::InvalidAngle(alpha_deg));
        }
        for (i, pair) in sections.windows(2).enumerate() {
            let (bottom, top) = (pair[0].c_bottom, pair[1].c_top);
            if (bottom - top).abs() > SHARED_CIRCUMFERENCE_TOLERANCE {
                return Err(SizingError::SharedCircumferenceMismatch { section: i + 1, bottom, top });
            }
        }
        Ok(MeasurementSet { sections, tolerance, alpha_deg })
    }

    /// Builds the set from the six boundary circumferences (palm edge first)
    /// and five heights.
    pub fn from_boundaries(
        circumferences: [f64; SECTION_COUNT + 1],
        heights: [f64; SECTION_COUNT],
        tolerance: f64,
        alpha_deg: f64,
    ) -> Result<Self, SizingError> {
        let sections = (0..SECTION_COUNT)
            .map(|i| SectionMeasurement::new(circumferences[i], circumferences[i + 1], heights[i]))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(sections, tolerance, alpha_deg)
    }

    pub fn sections(&self) -> &[SectionMeasurement; SECTION_COUNT] {
        &self.sections
    }
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
    pub fn alpha_deg(&self) -> f64 {
        self.alpha_deg
    }
}

/// Hexagon sides `(a1, a2)` for a section: bottom and top circumference plus
/// tolerance, shared evenly over six sides.
pub fn size_section(c_top: f64, c_bottom: f64, tolerance: f64) -> Result<(f64, f64), SizingError> {
    for c in [c_top, c_bottom] {
        if !(c > 0.0) {
            return Err(SizingError::NonPositiveCircumference(c));
        }
    }
    if !(tolerance >= 0.0) {
        return Err(SizingError::NegativeTolerance(tolerance));
    }
    if (c_top - c_bottom).abs() <= EQUAL_CIRCUMFERENCE_TOLERANCE {
        let a = (c_top + tolerance) / 6.0;
        Ok((a, a))
    } else {
        Ok(((c_bottom + tolerance) / 6.0, (c_top + tolerance) / 6.0))
    }
}

/// True when a unit with slanted crease `b` can sit semi-folded at `height`.
pub fn check_semifold(b: f64, alpha_deg: f64, height: f64) -> bool {
    b * alpha_deg.to_radians().sin() > height
}

/// Slanted crease length for a section (1-based index).
///
/// The palm section uses a fixed fraction of its bottom side. Every other
/// section starts at `b = a1` and grows by 20 % until it can semi-fold.
pub fn assign_crease_length(section: usize, a1: f64, alpha_deg: f64, height: f64) -> Result<f64, SizingError> {
    if !(1..=SECTION_COUNT).contains(&section) {
        return Err(SizingError::InvalidSectionIndex(section));
    }
    if !(a1 > 0.0) {
        return Err(SizingError::Geometry(GeometryError::NonPositiveLength { name: "a1", value: a1 }));
    }
    if !(height > 0.0) {
        return Err(SizingError::NonPositiveHeight(height));
    }
    if section == 1 {
        return Ok(PALM_CREASE_RATIO * a1);
    }
    let mut b = a1;
    for _ in 0..MAX_GROWTH_STEPS {
        if check_semifold(b, alpha_deg, height) {
            return Ok(b);
        }
        b *= CREASE_GROWTH;
    }
    if check_semifold(b, alpha_deg, height) {
        Ok(b)
    } else {
        Err(SizingError::NonConvergence { section })
    }
}

/// Five stacked units, palm first, with the height each one spans.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthosisDesign {
    units: [UnitSpec; SECTION_COUNT],
    heights: [f64; SECTION_COUNT],
}

impl OrthosisDesign {
    /// Checks interface compatibility, chirality alternation and heights.
    pub fn new(units: [UnitSpec; SECTION_COUNT], heights: [f64; SECTION_COUNT]) -> Result<Self, SizingError> {
        for h in heights {
            if !(h > 0.0) || !h.is_finite() {
                return Err(SizingError::NonPositiveHeight(h));
            }
        }
        for i in 0..SECTION_COUNT - 1 {
            // Section i + 1 sits below section i.
            if !check_compatibility(&units[i + 1], &units[i]) {
                return Err(SizingError::IncompatibleInterface { upper: i + 1, lower: i + 2 });
            }
            if units[i].chirality() == units[i + 1].chirality() {
                return Err(SizingError::ChiralityNotAlternating(i + 1));
            }
        }
        Ok(OrthosisDesign { units, heights })
    }

    pub fn units(&self) -> &[UnitSpec; SECTION_COUNT] {
        &self.units
    }

    /// Unit of a 1-based section.
    pub fn unit(&self, section: usize) -> &UnitSpec {
        &self.units[section - 1]
    }

    pub fn heights(&self) -> &[f64; SECTION_COUNT] {
        &self.heights
    }

    pub fn is_locked(&self, section: usize) -> bool {
        LOCKED_SECTIONS.contains(&section)
    }

    pub fn locked_sections(&self) -> [usize; 2] {
        LOCKED_SECTIONS
    }
}

/// Chirality of a 1-based section: clockwise at the palm, alternating.
pub fn section_chirality(section: usize) -> Chirality {
    if section % 2 == 1 {
        Chirality::Cw
    } else {
        Chirality::Ccw
    }
}

pub fn design_orthosis(measurements: &MeasurementSet) -> Result<OrthosisDesign, SizingError> {
    let alpha = measurements.alpha_deg();
    let mut units = Vec::with_capacity(SECTION_COUNT);
    let mut heights = [0.0; SECTION_COUNT];
    for (i, m) in measurements.sections().iter().enumerate() {
        let section = i + 1;
        let (a1, a2) = size_section(m.c_top(), m.c_bottom(), measurements.tolerance())?;
        let b = assign_crease_length(section, a1, alpha, m.height())?;
        if section != 1 && !check_semifold(b, alpha, m.height()) {
            return Err(SizingError::InfeasibleSection { section });
        }
        units.push(UnitSpec::from_sides(a1, a2, b, alpha, section_chirality(section))?);
        heights[i] = m.height();
    }
    let units: [UnitSpec; SECTION_COUNT] = units.try_into().expect("five sections");
    OrthosisDesign::new(units, heights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionClearance {
    pub section: usize,
    /// Bottom hexagon perimeter minus the bottom circumference.
    pub bottom_mm: f64,
    /// Top hexagon perimeter minus the top circumference.
    pub top_mm: f64,
}

/// Perimeter slack of every section over the measured limb.
pub fn fit_report(design: &OrthosisDesign, measurements: &MeasurementSet) -> Vec<SectionClearance> {
    design
        .units()
        .iter()
        .zip(measurements.sections())
        .enumerate()
        .map(|(i, (unit, m))| SectionClearance {
            section: i + 1,
            bottom_mm: 6.0 * unit.a1() - m.c_bottom(),
            top_mm: 6.0 * unit.a2() - m.c_top(),
        })
        .collect()
}
