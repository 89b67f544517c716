//! Design analysis and optimization for capacitive (condenser) MEMS
//! microphones.
//!
//! * [`design`]: the design data model, validation and JSON file format
//! * [`statics`]: closed-form sensitivities, piston equilibrium and pull-in
//! * [`acoustics`]: backplate damping and second-order dynamics
//! * [`search`]: constrained grid search and refinement
//! * [`cli`]: the `micdesign` command-line tool

pub mod acoustics;
pub mod cli;
pub mod decibel;
pub mod design;
pub mod error;
pub mod numeric;
pub mod report;
pub mod search;
pub mod statics;
pub mod units;

pub use design::{Backplate, Diaphragm, Environment, MicrophoneDesign};
pub use error::{Error, Result};
