//! Sudden-landing recovery pipeline for a multirotor over a simulated city.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod grid;
pub mod judge;
pub mod metrics;
pub mod planner;
pub mod presets;
pub mod runner;
pub mod scene;
pub mod scene_file;
pub mod sensor;
pub mod surface;
pub mod trace;
