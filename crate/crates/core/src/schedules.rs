//! Tendon states for each wrist movement and timed actuation protocols.
//!
//! Every schedule is six piecewise-linear contraction channels. A channel is
//! a sorted list of `(time, value)` breakpoints; between breakpoints the value
//! is interpolated linearly and outside them it holds the nearest endpoint.
//! A channel without breakpoints is identically zero.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_PULL_SECONDS: f64 = 7.0;
pub const DEFAULT_LOOSEN_SECONDS: f64 = 7.0;
/// Contraction used for "P" when a caller does not choose one.
pub const DEFAULT_MAX_CONTRACTION: f64 = 0.3;
pub const CIRCUMDUCTION_PHASE_SECONDS: f64 = 3.5;
pub const CIRCUMDUCTION_LOOSEN_SECONDS: f64 = 14.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("{0} is time-varying and has no single tendon-state row")]
    TimeVaryingMode(MotionMode),
    #[error("{0} is not supported by this schedule builder")]
    UnsupportedMode(MotionMode),
    #[error("{0} has no key action tendons")]
    NoKeyActionTendons(MotionMode),
    #[error("maximum contraction must lie in (0, 1], got {0}")]
    InvalidContraction(f64),
    #[error("durations must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("channel {channel}: breakpoints must have strictly increasing times")]
    UnsortedBreakpoints { channel: usize },
    #[error("channel {channel}: value {value} outside [0, 1]")]
    ValueOutOfRange { channel: usize, value: f64 },
    #[error("unknown motion mode '{0}'")]
    UnknownMode(String),
}

impl ScheduleError {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleError::TimeVaryingMode(_) => "TimeVaryingMode",
            ScheduleError::UnsupportedMode(_) => "UnsupportedMode",
            ScheduleError::NoKeyActionTendons(_) => "NoKeyActionTendons",
            ScheduleError::InvalidContraction(_) => "InvalidContraction",
            ScheduleError::InvalidDuration(_) => "InvalidDuration",
            ScheduleError::UnsortedBreakpoints { .. } => "UnsortedBreakpoints",
            ScheduleError::ValueOutOfRange { .. } => "ValueOutOfRange",
            ScheduleError::UnknownMode(_) => "UnknownMode",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionMode {
    Extension,
    Flexion,
    RadialDeviation,
    UlnarDeviation,
    Dtm,
    DtmMirror,
    Circumduction,
    WorkspaceSweep,
}

impl MotionMode {
    pub const ALL: [MotionMode; 8] = [
        MotionMode::Extension,
        MotionMode::Flexion,
        MotionMode::RadialDeviation,
        MotionMode::UlnarDeviation,
        MotionMode::Dtm,
        MotionMode::DtmMirror,
        MotionMode::Circumduction,
        MotionMode::WorkspaceSweep,
    ];

    /// Command-line spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            MotionMode::Extension => "extension",
            MotionMode::Flexion => "flexion",
            MotionMode::RadialDeviation => "radial-deviation",
            MotionMode::UlnarDeviation => "ulnar-deviation",
            MotionMode::Dtm => "dtm",
            MotionMode::DtmMirror => "dtm-mirror",
            MotionMode::Circumduction => "circumduction",
            MotionMode::WorkspaceSweep => "workspace",
        }
    }
}

impl fmt::Display for MotionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotionMode {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MotionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ScheduleError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TendonState {
    /// Pulled.
    P,
    /// Loosened.
    L,
}

/// States of T1..T6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TendonStateVector(pub [TendonState; 6]);

impl TendonStateVector {
    fn parse(row: &str) -> Self {
        let mut states = [TendonState::L; 6];
        for (s, c) in states.iter_mut().zip(row.chars()) {
            *s = if c == 'P' { TendonState::P } else { TendonState::L };
        }
        TendonStateVector(states)
    }

    pub fn states(&self) -> [TendonState; 6] {
        self.0
    }

    /// 1-based indices of the pulled tendons.
    pub fn pulled(&self) -> Vec<usize> {
        (1..=6).filter(|&k| self.0[k - 1] == TendonState::P).collect()
    }
}

impl fmt::Display for TendonStateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.0 {
            f.write_str(match s {
                TendonState::P => "P",
                TendonState::L => "L",
            })?;
        }
        Ok(())
    }
}

/// Tendon that takes the place of `tendon` when a motion is mirrored about
/// the dorsal-palmar plane.
pub fn mirror_tendon(tendon: usize) -> usize {
    (10 - tendon) % 6 + 1
}

pub fn mode_tendon_states(mode: MotionMode) -> Result<Vec<TendonStateVector>, ScheduleError> {
    let rows: &[&str] = match mode {
        MotionMode::Extension => &["LPPLLL"],
        MotionMode::Flexion => &["LLLLPP"],
        MotionMode::RadialDeviation => &["PPLLLP"],
        MotionMode::UlnarDeviation => &["LLPPPL"],
        MotionMode::Dtm => &["PPPLLL", "LLLPPP"],
        MotionMode::DtmMirror => {
            let rows = mode_tendon_states(MotionMode::Dtm)?;
            return Ok(rows
                .into_iter()
                .map(|row| {
                    let mut mirrored = [TendonState::L; 6];
                    for k in 1..=6 {
                        mirrored[mirror_tendon(k) - 1] = row.0[k - 1];
                    }
                    TendonStateVector(mirrored)
                })
                .collect());
        }
        MotionMode::Circumduction | MotionMode::WorkspaceSweep => {
            return Err(ScheduleError::TimeVaryingMode(mode))
        }
    };
    Ok(rows.iter().map(|r| TendonStateVector::parse(r)).collect())
}

/// Key action tendons, one set per phase of the movement.
pub fn key_action_tendons(mode: MotionMode) -> Result<Vec<Vec<usize>>, ScheduleError> {
    Ok(match mode {
        MotionMode::Extension => vec![vec![2, 3]],
        MotionMode::Flexion => vec![vec![5, 6]],
        MotionMode::RadialDeviation => vec![vec![1]],
        MotionMode::UlnarDeviation => vec![vec![4]],
        MotionMode::Dtm => vec![vec![2], vec![5]],
        MotionMode::DtmMirror => vec![vec![3], vec![6]],
        MotionMode::Circumduction => vec![(1..=6).collect()],
        MotionMode::WorkspaceSweep => return Err(ScheduleError::NoKeyActionTendons(mode)),
    })
}

/// Piecewise-linear contraction of one tendon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Channel {
    breakpoints: Vec<(f64, f64)>,
}

impl Channel {
    pub fn zero() -> Self {
        Channel::default()
    }

    /// Rises from 0 at `start` to `peak` over `pull`, back to 0 over `loosen`.
    pub fn triangle(start: f64, pull: f64, loosen: f64, peak: f64) -> Self {
        Channel { breakpoints: vec![(start, 0.0), (start + pull, peak), (start + pull + loosen, 0.0)] }
    }

    pub fn from_breakpoints(breakpoints: Vec<(f64, f64)>) -> Self {
        Channel { breakpoints }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        match bp.len() {
            0 => 0.0,
            _ if t <= bp[0].0 => bp[0].1,
            n if t >= bp[n - 1].0 => bp[n - 1].1,
            _ => {
                let i = bp.partition_point(|&(ti, _)| ti <= t);
                let ((t0, v0), (t1, v1)) = (bp[i - 1], bp[i]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.breakpoints.iter().all(|&(_, v)| v == 0.0)
    }

    /// Time of the largest breakpoint value (first one on ties).
    pub fn peak_time(&self) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for &(t, v) in &self.breakpoints {
            if v > 0.0 && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((t, v));
            }
        }
        best.map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    duration: f64,
    channels: [Channel; 6],
}

impl Schedule {
    pub fn new(duration: f64, channels: [Channel; 6]) -> Result<Self, ScheduleError> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(ScheduleError::InvalidDuration(duration));
        }
        for (i, ch) in channels.iter().enumerate() {
            for &(t, value) in &ch.breakpoints {
                if !t.is_finite() {
                    return Err(ScheduleError::UnsortedBreakpoints { channel: i + 1 });
                }
                if !(0.0..=1.0).contains(&value) {
                    return Err(ScheduleError::ValueOutOfRange { channel: i + 1, value });
                }
            }
            if ch.breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(ScheduleError::UnsortedBreakpoints { channel: i + 1 });
            }
        }
        Ok(Schedule { duration, channels })
    }

    /// All channels zero for `duration` seconds.
    pub fn idle(duration: f64) -> Result<Self, ScheduleError> {
        Schedule::new(duration, Default::default())
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn channels(&self) -> &[Channel; 6] {
        &self.channels
    }

    /// Channel of 1-based tendon `k`.
    pub fn channel(&self, k: usize) -> &Channel {
        &self.channels[k - 1]
    }

    pub fn contractions_at(&self, t: f64) -> [f64; 6] {
        std::array::from_fn(|i| self.channels[i].value_at(t))
    }

    /// `0, 1/rate, 2/rate, …` up to the duration, which is always included.
    pub fn sample_times(&self, samples_per_second: f64) -> Vec<f64> {
        sample_times(self.duration, samples_per_second)
    }
}

pub(crate) fn sample_times(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 / rate).collect();
    if duration - times[n] > 1e-9 {
        times.push(duration);
    }
    times
}

fn check_contraction(c: f64) -> Result<(), ScheduleError> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(ScheduleError::InvalidContraction(c))
    }
}

fn check_duration(d: f64) -> Result<(), ScheduleError> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(ScheduleError::InvalidDuration(d))
    }
}

/// Pull then loosen the key action tendons of a basic movement.
pub fn make_basic_schedule(
    mode: MotionMode,
    pull_seconds: f64,
    loosen_seconds: f64,
    max_contraction: f64,
) -> Result<Schedule, ScheduleError> {
    if !matches!(
        mode,
        MotionMode::Extension | MotionMode::Flexion | MotionMode::RadialDeviation | MotionMode::UlnarDeviation
    ) {
        return Err(ScheduleError::UnsupportedMode(mode));
    }
    check_contraction(max_contraction)?;
    check_duration(pull_seconds)?;
    check_duration(loosen_seconds)?;
    let kat = &key_action_tendons(mode)?[0];
    let channels = std::array::from_fn(|i| {
        if kat.contains(&(i + 1)) {
            Channel::triangle(0.0, pull_seconds, loosen_seconds, max_contraction)
        } else {
            Channel::zero()
        }
    });
    Schedule::new(pull_seconds + loosen_seconds, channels)
}

/// Each tendon in turn, one pull/loosen triangle apiece.
pub fn make_workspace_schedule(
    pull_seconds: f64,
    loosen_seconds: f64,
    max_contraction: f64,
) -> Result<Schedule, ScheduleError> {
    check_contraction(max_contraction)?;
    check_duration(pull_seconds)?;
    check_duration(loosen_seconds)?;
    let period = pull_seconds + loosen_seconds;
    let channels =
        std::array::from_fn(|i| Channel::triangle(period * i as f64, pull_seconds, loosen_seconds, max_contraction));
    Schedule::new(6.0 * period, channels)
}

/// T2 then T5 (or T3 then T6 when mirrored), 7 s up and 7 s down each.
pub fn make_dtm_schedule(mirror: bool, max_contraction: f64) -> Result<Schedule, ScheduleError> {
    check_contraction(max_contraction)?;
    let (first, second) = if mirror { (3, 6) } else { (2, 5) };
    let period = DEFAULT_PULL_SECONDS + DEFAULT_LOOSEN_SECONDS;
    let channels = std::array::from_fn(|i| match i + 1 {
        k if k == first => Channel::triangle(0.0, DEFAULT_PULL_SECONDS, DEFAULT_LOOSEN_SECONDS, max_contraction),
        k if k == second => Channel::triangle(period, DEFAULT_PULL_SECONDS, DEFAULT_LOOSEN_SECONDS, max_contraction),
        _ => Channel::zero(),
    });
    Schedule::new(2.0 * period, channels)
}

/// Overlapping pulls that hand the bend from one sector to the next.
pub fn make_circumduction_schedule(max_contraction: f64) -> Result<Schedule, ScheduleError> {
    check_contraction(max_contraction)?;
    let channels = std::array::from_fn(|i| {
        Channel::triangle(
            CIRCUMDUCTION_PHASE_SECONDS * i as f64,
            DEFAULT_PULL_SECONDS,
            CIRCUMDUCTION_LOOSEN_SECONDS,
            max_contraction,
        )
    });
    let duration = CIRCUMDUCTION_PHASE_SECONDS * 5.0 + DEFAULT_PULL_SECONDS + CIRCUMDUCTION_LOOSEN_SECONDS;
    Schedule::new(duration, channels)
}

/// Default schedule for any mode.
pub fn make_schedule(mode: MotionMode, max_contraction: f64) -> Result<Schedule, ScheduleError> {
    match mode {
        MotionMode::Dtm => make_dtm_schedule(false, max_contraction),
        MotionMode::DtmMirror => make_dtm_schedule(true, max_contraction),
        MotionMode::Circumduction => make_circumduction_schedule(max_contraction),
        MotionMode::WorkspaceSweep => {
            make_workspace_schedule(DEFAULT_PULL_SECONDS, DEFAULT_LOOSEN_SECONDS, max_contraction)
        }
        _ => make_basic_schedule(mode, DEFAULT_PULL_SECONDS, DEFAULT_LOOSEN_SECONDS, max_contraction),
    }
}
