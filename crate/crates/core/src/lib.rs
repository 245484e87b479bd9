//! Calibration framework for superconducting-qubit devices.
//!
//! The crate is organized around the lifecycle of a calibration experiment:
//!
//! * [`platform`] — the serialized, validated device configuration that
//!   protocols read and update.
//! * [`device`] — a deterministic, seedable virtual device that synthesizes
//!   measurement data for every supported experiment kind.
//! * [`numerics`] — nonlinear least squares, derivative-free simplex
//!   optimization, oscillation seeding and IQ shot classification.
//! * [`protocols`] — the routine catalog: acquisition, fitting, config
//!   updates and report sections for each calibration experiment.
//! * [`executor`] — runcard-driven sequential execution and the scriptable
//!   calibration-program API.
//! * [`report`] — self-contained HTML reports, run comparison, metrics
//!   logging and run archiving.

pub mod demo;
pub mod device;
pub mod executor;
pub mod numerics;
pub mod platform;
pub mod protocols;
pub mod report;

pub use device::{Device, DeviceTruth, ExperimentSpec, NoiseModel, PairTruth, QubitTruth};
pub use platform::{
    ClassifierParams, ConfigUpdate, PairCalibration, PlatformConfig, QubitCalibration, QubitId,
};
pub use protocols::{Data, FitQuality, Results, RoutineOutcome};
