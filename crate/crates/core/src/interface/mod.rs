//! File formats, drawing export and the command line.
//!
//! * [`io`]: JSON measurement and design documents.
//! * [`pattern`]: laser-cut drawings of the unit strips (SVG, DXF).
//! * [`tabular`]: CSV trajectories and motor-command schedules.
//! * [`cli`]: the `kresling-orthosis` command.

pub mod cli;
pub mod io;
pub mod pattern;
pub mod tabular;

use crate::equilibrium::EquilibriumError;
use crate::geometry::GeometryError;
use crate::kinematics::KinematicsError;
use crate::schedules::ScheduleError;
use crate::sizing::SizingError;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterfaceError {
    #[error("cannot parse input: {0}")]
    ParseError(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("non-positive value: {0}")]
    NonPositiveValue(String),
    #[error("design does not follow from its measurements: {0}")]
    DesignMismatch(String),
    #[error("drawing style infeasible: {0}")]
    StyleInfeasible(String),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Sizing(#[from] SizingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

impl InterfaceError {
    /// Name of the underlying error variant, as printed by the command line.
    pub fn name(&self) -> &'static str {
        match self {
            InterfaceError::ParseError(_) => "ParseError",
            InterfaceError::SchemaViolation(_) => "SchemaViolation",
            InterfaceError::NonPositiveValue(_) => "NonPositiveValue",
            InterfaceError::DesignMismatch(_) => "DesignMismatch",
            InterfaceError::StyleInfeasible(_) => "StyleInfeasible",
            InterfaceError::ValidationFailed(_) => "ValidationFailed",
            InterfaceError::Io { .. } => "IoError",
            InterfaceError::Sizing(e) => e.name(),
            InterfaceError::Geometry(e) => e.name(),
            InterfaceError::Kinematics(e) => e.name(),
            InterfaceError::Equilibrium(e) => e.name(),
            InterfaceError::Schedule(e) => e.name(),
        }
    }
}

/// Shortest decimal that reads back to the same `f64`; `-0` prints as `0`.
pub fn format_number(x: f64) -> String {
    format!("{}", x + 0.0)
}

pub fn read_file(path: &Path) -> Result<String, InterfaceError> {
    std::fs::read_to_string(path)
        .map_err(|e| InterfaceError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), InterfaceError> {
    let io_err = |e: std::io::Error| InterfaceError::Io { path: path.display().to_string(), message: e.to_string() };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| io_err(std::io::Error::other("not a file path")))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io_err(e)
    })
}
