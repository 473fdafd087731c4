//! Multiscale integration of oscillators forced at a slowly swept frequency.
//!
//! The crate ships several routes to the same trajectories of a swept-forcing
//! Duffing oscillator, from direct high-accuracy integration to stroboscopic
//! averaging evaluated on the fly by micro-integration, together with the
//! diagnostics needed to decide whether a run locked into autoresonance and
//! to locate the forcing threshold where locking first occurs.
//!
//! - [`odecore`]: adaptive embedded Runge–Kutta pair with dense output, plus
//!   a fixed-step baseline.
//! - [`duffing`]: the oscillator in physical, rotating-frame and enlarged
//!   slow-time formulations, with the exact changes of variables.
//! - [`averaging`]: hand-coded first- and second-order stroboscopically
//!   averaged fields, Cartesian and polar.
//! - [`sam`]: the stroboscopic averaging method; the averaged field is
//!   evaluated by differencing powers of the one-period map, each power
//!   obtained from a Strang-splitting micro-integration.
//! - [`analysis`]: action/mismatch diagnostics, the quasi-static action,
//!   the trapping-well threshold, autoresonance detection, the threshold
//!   bisection and the growth-law fit.
//! - [`experiment`]: the six named techniques, sweep and timing drivers.

pub mod analysis;
pub mod averaging;
pub mod duffing;
mod error;
pub mod experiment;
pub mod odecore;
pub mod sam;

pub use error::{Error, Result};

pub use analysis::{ActionMismatch, AutoresonanceVerdict, ThresholdResult};
pub use duffing::{OscillatorParams, PhysState, RotatingState};
pub use experiment::{ExperimentConfig, TechniqueId};
pub use odecore::{MacroConfig, Trajectory};
pub use sam::{DiffOrder, MicroConfig};
