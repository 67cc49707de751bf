//! Computational laboratory for caloric measure on space-time domains:
//! parabolic cube trees and net contents, mass-distribution (Frostman)
//! measures, the heat-kernel phase portrait, Monte Carlo caloric measure by
//! time-reversed Brownian motion, the dimension-bound tree algorithm, and
//! the constant-selection procedure behind the upper dimension bound.
//!
//! All estimators are deterministic given a seed: each walk draws from a
//! counter-mode stream keyed by its index, so results do not depend on the
//! parallel schedule.

pub mod alternative;
pub mod audits;
pub mod constants;
pub mod content;
pub mod error;
pub mod frostman;
pub mod geometry;
pub mod grid;
pub mod dimension;
pub mod domain;
pub mod kernel;
pub mod walk;
pub mod wos;

pub use error::{Error, Result};
