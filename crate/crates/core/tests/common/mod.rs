#![allow(dead_code)]

pub mod sim;
pub mod svg;

use kresling_orthosis::geometry::{UnitKind, UnitSpec};
use kresling_orthosis::sizing::{design_orthosis, section_chirality, MeasurementSet, OrthosisDesign};

pub const MODEL1_BOUNDARIES: [f64; 6] = [225.3, 225.3, 185.1, 153.9, 153.9, 153.9];
pub const MODEL1_HEIGHTS: [f64; 5] = [18.0, 27.0, 21.0, 20.0, 22.0];
pub const MODEL2_BOUNDARIES: [f64; 6] = [258.2, 258.2, 213.5, 175.6, 175.6, 175.6];
pub const MODEL2_HEIGHTS: [f64; 5] = [20.0, 29.0, 24.0, 26.0, 26.0];

pub fn model1() -> MeasurementSet {
    MeasurementSet::from_boundaries(MODEL1_BOUNDARIES, MODEL1_HEIGHTS, 15.0, 60.0).unwrap()
}

pub fn model2() -> MeasurementSet {
    MeasurementSet::from_boundaries(MODEL2_BOUNDARIES, MODEL2_HEIGHTS, 15.0, 60.0).unwrap()
}

pub fn orthosis2() -> OrthosisDesign {
    design_orthosis(&model2()).unwrap()
}

/// Orthosis 2 with the rounded side lengths of the published table.
pub fn published_orthosis2() -> OrthosisDesign {
    let sides = [(45.7, 45.7, 0.6 * 45.7), (37.7, 45.7, 37.7), (32.0, 37.7, 32.0), (32.0, 32.0, 32.0), (32.0, 32.0, 32.0)];
    let units: Vec<UnitSpec> = sides
        .iter()
        .enumerate()
        .map(|(i, &(a1, a2, b))| {
            let kind = if a1 == a2 { UnitKind::Tko } else { UnitKind::Cko };
            UnitSpec::new(kind, a1, a2, b, 60.0, section_chirality(i + 1)).unwrap()
        })
        .collect();
    OrthosisDesign::new(units.try_into().unwrap(), MODEL2_HEIGHTS).unwrap()
}

/// Five identical TKO units (a = b = 32 mm, h = 26 mm) with alternating
/// chirality: the stack is exactly symmetric under 60° rotations.
pub fn uniform_tko_stack() -> OrthosisDesign {
    let units: Vec<UnitSpec> = (1..=5).map(|s| UnitSpec::tko(32.0, 32.0, 60.0, section_chirality(s)).unwrap()).collect();
    OrthosisDesign::new(units.try_into().unwrap(), [26.0; 5]).unwrap()
}

/// Signed difference `a - b` of two angles in degrees, in (-180, 180].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Index (0..6) of the 60° sector centred on `60 k - 150` closest to `phi`.
pub fn sector_of(phi: f64) -> usize {
    (0..6)
        .min_by(|&i, &j| {
            let ci = 60.0 * (i as f64 + 1.0) - 150.0;
            let cj = 60.0 * (j as f64 + 1.0) - 150.0;
            angle_diff(phi, ci).abs().total_cmp(&angle_diff(phi, cj).abs())
        })
        .unwrap()
}
