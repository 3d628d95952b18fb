//! Digital-twin-assisted resource slicing toolkit for LEO satellite networks.
//!
//! The crate simulates a time-slotted slicing pipeline over a Walker-delta
//! constellation: coverage scheduling, effective-capacity QoS math, demand
//! generation and feature extraction, Bayesian recurrent demand prediction,
//! chance-constrained per-window reservation solving, and the adaptive
//! re-prediction/re-slicing control loop, together with a scenario runner
//! that compares the FRS / FDTRS / ADTRS / Perfect-RS schemes.

pub mod constellation;
pub mod demand;
pub mod linkmodel;
pub mod predictor;
pub mod simkit;
pub mod slicer;
pub mod twin;
pub mod stats;
