//! Design automation and simulation toolkit for 2.4 GHz class-E power
//! amplifiers.
//!
//! The crate is organised the way a design flow runs:
//!
//! * [`classe`] synthesises the class-E load network, the harmonic traps
//!   and L-section matches from closed-form relations.
//! * [`netlist`] holds the circuit data model, validation, JSON
//!   persistence and builders for the single- and two-stage amplifiers.
//! * [`rf`] is the small-signal engine: modified nodal analysis,
//!   S-parameters, ABCD cascades, microstrip lines and Touchstone output.
//! * [`transient`] integrates the large-signal switching circuit to its
//!   periodic steady state and derives output power, efficiency and
//!   harmonic content.
//! * [`tuning`] sweeps gain and PAE, calibrates the behavioural FET and
//!   runs the derivative-free tuning loop.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classe;
pub mod format;
pub mod netlist;
pub mod rf;
pub mod transient;
pub mod tuning;

pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
