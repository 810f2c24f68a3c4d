//! Five-wave FMM decomposition of single ECG heartbeats.
//!
//! A beat is modelled as an intercept plus up to five frequency-modulated
//! Möbius waves labelled P, Q, R, S and T. The crate fits that model,
//! extracts fiducial marks, simulates beats and scores delineations.

pub mod angle;
pub mod cli;
pub mod error;
pub mod fitting;
pub mod ingest;
pub mod marks;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod wave;

pub use error::{Error, Result};
pub use fitting::{fit_beat, FitReport, IStepConfig};
pub use marks::{fiducial_marks, FiducialMark, MarkKind};
pub use model::{Beat, FmmEcgParams, WaveLabel, Waves};
pub use wave::WaveParams;
