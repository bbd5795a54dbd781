//! JSON measurement and design documents.
//!
//! Lengths are millimetres and angles degrees; every field name carries its
//! unit. Documents are written with two-space indentation, shortest
//! round-trip numbers and a trailing newline, so save → load → save is
//! byte-stable.

use super::InterfaceError;
use crate::geometry::{Chirality, UnitKind, UnitSpec};
use crate::sizing::{
    design_orthosis, MeasurementSet, OrthosisDesign, SectionMeasurement, SizingError, DEFAULT_ALPHA_DEG,
    DEFAULT_TOLERANCE_MM, SECTION_COUNT,
};
use serde::{Deserialize, Serialize};

pub const DESIGN_FORMAT: &str = "kresling-orthosis-design";
pub const DESIGN_FORMAT_VERSION: u32 = 1;
pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest side-length difference accepted when re-deriving a design.
const REPRODUCTION_TOLERANCE_MM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionRecord {
    pub c_top_mm: f64,
    pub c_bottom_mm: f64,
    pub h_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementRecord {
    #[serde(default = "default_alpha")]
    pub alpha_deg: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_mm: f64,
    pub sections: Vec<SectionRecord>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA_DEG
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE_MM
}

impl MeasurementRecord {
    pub fn from_set(set: &MeasurementSet) -> Self {
        MeasurementRecord {
            alpha_deg: set.alpha_deg(),
            tolerance_mm: set.tolerance(),
            sections: set
                .sections()
                .iter()
                .map(|s| SectionRecord { c_top_mm: s.c_top(), c_bottom_mm: s.c_bottom(), h_mm: s.height() })
                .collect(),
        }
    }

    pub fn to_set(&self) -> Result<MeasurementSet, InterfaceError> {
        if self.sections.len() != SECTION_COUNT {
            return Err(InterfaceError::SchemaViolation(format!(
                "expected {SECTION_COUNT} sections, found {}",
                self.sections.len()
            )));
        }
        let sections = self
            .sections
            .iter()
            .map(|s| SectionMeasurement::new(s.c_top_mm, s.c_bottom_mm, s.h_mm))
            .collect::<Result<Vec<_>, _>>()
            .map_err(measurement_error)?;
        MeasurementSet::new(sections, self.tolerance_mm, self.alpha_deg).map_err(measurement_error)
    }
}

fn measurement_error(e: SizingError) -> InterfaceError {
    match e {
        SizingError::SectionCount(_) | SizingError::SharedCircumferenceMismatch { .. } => {
            InterfaceError::SchemaViolation(e.to_string())
        }
        SizingError::NonPositiveCircumference(_)
        | SizingError::NonPositiveHeight(_)
        | SizingError::NegativeTolerance(_) => InterfaceError::NonPositiveValue(e.to_string()),
        other => InterfaceError::Sizing(other),
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, InterfaceError> {
    serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            InterfaceError::SchemaViolation(e.to_string())
        } else {
            InterfaceError::ParseError(e.to_string())
        }
    })
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialise");
    text.push('\n');
    text
}

/// Parses a measurement file, applying the default tolerance and base angle
/// when they are omitted.
pub fn load_measurements(text: &str) -> Result<MeasurementSet, InterfaceError> {
    parse::<MeasurementRecord>(text)?.to_set()
}

pub fn save_measurements(set: &MeasurementSet) -> String {
    to_pretty(&MeasurementRecord::from_set(set))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitRecord {
    pub section: usize,
    pub kind: UnitKind,
    pub a1_mm: f64,
    pub a2_mm: f64,
    pub b_mm: f64,
    pub alpha_deg: f64,
    pub chirality: Chirality,
    pub height_mm: f64,
}

/// Where a design came from: the tool and the sizing parameters it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub tolerance_mm: Option<f64>,
    pub alpha_deg: Option<f64>,
    pub source: Option<String>,
}

impl Provenance {
    pub fn current(tolerance_mm: Option<f64>, alpha_deg: Option<f64>, source: Option<String>) -> Self {
        Provenance {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            tolerance_mm,
            alpha_deg,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignRecord {
    format: String,
    version: u32,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measurements: Option<MeasurementRecord>,
    units: Vec<UnitRecord>,
}

/// A design together with the measurements it was sized from, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDocument {
    pub measurements: Option<MeasurementSet>,
    pub design: OrthosisDesign,
    pub provenance: Provenance,
}

impl DesignDocument {
    /// Sizes a design from measurements and records how.
    pub fn from_measurements(measurements: MeasurementSet, source: Option<String>) -> Result<Self, InterfaceError> {
        let design = design_orthosis(&measurements)?;
        let provenance = Provenance::current(Some(measurements.tolerance()), Some(measurements.alpha_deg()), source);
        Ok(DesignDocument { measurements: Some(measurements), design, provenance })
    }

    /// A design given directly by its units, e.g. a published table.
    pub fn from_design(design: OrthosisDesign, source: Option<String>) -> Self {
        DesignDocument { measurements: None, design, provenance: Provenance::current(None, None, source) }
    }
}

pub fn save_design(doc: &DesignDocument) -> String {
    let units = doc
        .design
        .units()
        .iter()
        .zip(doc.design.heights())
        .enumerate()
        .map(|(i, (u, &h))| UnitRecord {
            section: i + 1,
            kind: u.kind(),
            a1_mm: u.a1(),
            a2_mm: u.a2(),
            b_mm: u.b(),
            alpha_deg: u.alpha_deg(),
            chirality: u.chirality(),
            height_mm: h,
        })
        .collect();
    to_pretty(&DesignRecord {
        format: DESIGN_FORMAT.to_string(),
        version: DESIGN_FORMAT_VERSION,
        provenance: doc.provenance.clone(),
        measurements: doc.measurements.as_ref().map(MeasurementRecord::from_set),
        units,
    })
}

/// Parses a design file. When it embeds measurements, the design must be
/// exactly what [`design_orthosis`] produces from them.
pub fn load_design(text: &str) -> Result<DesignDocument, InterfaceError> {
    let record: DesignRecord = parse(text)?;
    if record.format != DESIGN_FORMAT {
        return Err(InterfaceError::SchemaViolation(format!("unknown format '{}'", record.format)));
    }
    if record.version != DESIGN_FORMAT_VERSION {
        return Err(InterfaceError::SchemaViolation(format!("unsupported version {}", record.version)));
    }
    if record.units.len() != SECTION_COUNT {
        return Err(InterfaceError::SchemaViolation(format!(
            "expected {SECTION_COUNT} units, found {}",
            record.units.len()
        )));
    }
    let mut units = Vec::with_capacity(SECTION_COUNT);
    let mut heights = [0.0; SECTION_COUNT];
    for (i, u) in record.units.iter().enumerate() {
        if u.section != i + 1 {
            return Err(InterfaceError::SchemaViolation(format!("unit {} listed as section {}", i + 1, u.section)));
        }
        for (name, v) in [("a1_mm", u.a1_mm), ("a2_mm", u.a2_mm), ("b_mm", u.b_mm), ("height_mm", u.height_mm)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(InterfaceError::NonPositiveValue(format!("section {}: {name} = {v}", i + 1)));
            }
        }
        units.push(UnitSpec::new(u.kind, u.a1_mm, u.a2_mm, u.b_mm, u.alpha_deg, u.chirality)?);
        heights[i] = u.height_mm;
    }
    let units: [UnitSpec; SECTION_COUNT] = units.try_into().expect("five units");
    let design = OrthosisDesign::new(units, heights)?;
    let measurements = record.measurements.as_ref().map(MeasurementRecord::to_set).transpose()?;
    if let Some(m) = &measurements {
        check_reproducible(&design, m)?;
    }
    Ok(DesignDocument { measurements, design, provenance: record.provenance })
}

fn check_reproducible(design: &OrthosisDesign, measurements: &MeasurementSet) -> Result<(), InterfaceError> {
    let expected = design_orthosis(measurements)?;
    for (i, (got, want)) in design.units().iter().zip(expected.units()).enumerate() {
        let pairs = [
            ("a1", got.a1(), want.a1()),
            ("a2", got.a2(), want.a2()),
            ("b", got.b(), want.b()),
            ("alpha", got.alpha_deg(), want.alpha_deg()),
            ("height", design.heights()[i], expected.heights()[i]),
        ];
        for (name, g, w) in pairs {
            if (g - w).abs() > REPRODUCTION_TOLERANCE_MM {
                return Err(InterfaceError::DesignMismatch(format!("section {}: {name} is {g}, expected {w}", i + 1)));
            }
        }
        if got.kind() != want.kind() || got.chirality() != want.chirality() {
            return Err(InterfaceError::DesignMismatch(format!("section {}: kind or chirality differs", i + 1)));
        }
    }
    Ok(())
}
