//! LMMSE filtering for linear systems whose matrices jump among finitely
//! many realizations, independently at every step, with optional feedback of
//! the running estimate into the measurement and the control input.
//!
//! `no_std` with `alloc`.

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod clutter;
pub mod error;
pub mod expectations;
pub mod filter;
pub mod linalg;
pub mod model;
pub mod sampling;

pub use clutter::{ClutterParams, ClutterScenario, MissModel, Scan, Window};
pub use error::{Error, Result};
pub use filter::{FilterState, GainSet, StepOutput};
pub use model::{Atom, InputPolicy, ModeDistribution, ModeRealization, SystemSpec, Trajectory};
