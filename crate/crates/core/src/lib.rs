//! Design and quasi-static simulation of personalised Kresling-origami wrist
//! orthoses.
//!
//! The pipeline runs from limb measurements ([`sizing`]) through unit
//! geometry ([`geometry`]) and closed-form kinematics ([`kinematics`]) to a
//! tendon-driven elastic simulation ([`equilibrium`]) driven by actuation
//! schedules ([`schedules`]). [`interface`] holds file formats, drawing
//! export and the command line.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod geometry;
pub mod interface;
pub mod jet;
pub mod kinematics;
pub mod schedules;
pub mod sizing;
