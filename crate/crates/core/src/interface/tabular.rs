//! CSV documents for trajectories and motor-command schedules.
//!
//! Numbers are written as the shortest decimal that reads back to the same
//! `f64`, so parsing a written document recovers every value exactly.

use super::{format_number, InterfaceError};
use crate::equilibrium::{Trajectory, TrajectorySample};
use crate::schedules::Schedule;

pub const TRAJECTORY_HEADER: [&str; 12] = ["t", "x", "y", "z", "beta", "phi", "l1", "l2", "l3", "l4", "l5", "l6"];
pub const SCHEDULE_HEADER: [&str; 7] = ["t", "c1", "c2", "c3", "c4", "c5", "c6"];

fn write_rows<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [f64; N]>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    // Writing into memory cannot fail.
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|&v| format_number(v))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

fn read_rows<const N: usize>(header: [&str; N], text: &str) -> Result<Vec<[f64; N]>, InterfaceError> {
    let parse = |e: csv::Error| InterfaceError::ParseError(e.to_string());
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let found = r.headers().map_err(parse)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(InterfaceError::SchemaViolation(format!(
            "expected header {}, found {}",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(parse)?;
        let mut row = [0.0; N];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| InterfaceError::ParseError(format!("row {}: `{field}` is not a number", line + 1)))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// One row per sample: `t,x,y,z,beta,phi,l1..l6`.
pub fn trajectory_to_csv(trajectory: &Trajectory) -> String {
    write_rows(
        TRAJECTORY_HEADER,
        trajectory.samples().iter().map(|s| {
            let mut row = [0.0; 12];
            row[0] = s.t;
            row[1..4].copy_from_slice(&s.marker);
            row[4] = s.beta_deg;
            row[5] = s.phi_deg;
            row[6..].copy_from_slice(&s.tendon_lengths);
            row
        }),
    )
}

pub fn trajectory_from_csv(text: &str) -> Result<Trajectory, InterfaceError> {
    let samples = read_rows(TRAJECTORY_HEADER, text)?
        .into_iter()
        .map(|row| TrajectorySample {
            t: row[0],
            marker: [row[1], row[2], row[3]],
            beta_deg: row[4],
            phi_deg: row[5],
            tendon_lengths: row[6..].try_into().expect("six lengths"),
        })
        .collect();
    Ok(Trajectory::from_samples(samples)?)
}

/// Channel values sampled at `samples_per_second`, from 0 to the schedule
/// duration inclusive.
pub fn schedule_to_csv(schedule: &Schedule, samples_per_second: f64) -> Result<String, InterfaceError> {
    if !(samples_per_second > 0.0) || !samples_per_second.is_finite() {
        return Err(InterfaceError::NonPositiveValue(format!("sample rate {samples_per_second}")));
    }
    Ok(write_rows(
        SCHEDULE_HEADER,
        schedule.sample_times(samples_per_second).into_iter().map(|t| {
            let c = schedule.contractions_at(t);
            [t, c[0], c[1], c[2], c[3], c[4], c[5]]
        }),
    ))
}

/// Rows of a schedule document as `(t, [c1..c6])`.
pub fn schedule_rows_from_csv(text: &str) -> Result<Vec<(f64, [f64; 6])>, InterfaceError> {
    Ok(read_rows(SCHEDULE_HEADER, text)?
        .into_iter()
        .map(|row| (row[0], row[1..].try_into().expect("six channels")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{make_circumduction_schedule, make_workspace_schedule, DEFAULT_MAX_CONTRACTION};

    #[test]
    fn empty_trajectory_is_header_only() {
        assert_eq!(trajectory_to_csv(&Trajectory::new()), "t,x,y,z,beta,phi,l1,l2,l3,l4,l5,l6\n");
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let samples = (0..5)
            .map(|i| TrajectorySample {
                t: i as f64 * 0.1,
                marker: [1.0 / 3.0, -2.0e-17, 123.456789],
                beta_deg: std::f64::consts::PI * i as f64,
                phi_deg: -179.999,
                tendon_lengths: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0 + i as f64 / 7.0],
            })
            .collect();
        let tr = Trajectory::from_samples(samples).unwrap();
        let text = trajectory_to_csv(&tr);
        assert_eq!(text.lines().count(), 6);
        assert_eq!(trajectory_from_csv(&text).unwrap(), tr);
    }

    #[test]
    fn workspace_schedule_rows() {
        let s = make_workspace_schedule(7.0, 7.0, DEFAULT_MAX_CONTRACTION).unwrap();
        let text = schedule_to_csv(&s, 2.0).unwrap();
        let rows = schedule_rows_from_csv(&text).unwrap();
        assert_eq!(rows.len(), 169);
        assert_eq!(rows.last().unwrap().0, 84.0);
        assert!(rows.iter().all(|(_, c)| c.iter().all(|v| (0.0..=1.0).contains(v))));
        assert!(schedule_to_csv(&s, 0.0).is_err());
    }

    #[test]
    fn circumduction_columns_peak_in_phase() {
        let s = make_circumduction_schedule(DEFAULT_MAX_CONTRACTION).unwrap();
        let rows = schedule_rows_from_csv(&schedule_to_csv(&s, 2.0).unwrap()).unwrap();
        for k in 0..6 {
            let peak = rows.iter().max_by(|a, b| a.1[k].total_cmp(&b.1[k])).unwrap().0;
            assert_eq!(peak, 7.0 + 3.5 * k as f64);
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(schedule_rows_from_csv("t,a\n1,2\n"), Err(InterfaceError::SchemaViolation(_))));
        assert!(matches!(schedule_rows_from_csv("t,c1,c2,c3,c4,c5,c6\n0,x,0,0,0,0,0\n"), Err(InterfaceError::ParseError(_))));
    }
}
