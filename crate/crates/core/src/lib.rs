//! Behavioral simulation of analog time-surface construction for event cameras.
//!
//! A DVS event stream is normally turned into a time-surface by storing the most
//! recent timestamp per pixel (the SAE) and applying an exponentially decaying
//! kernel. This crate models an alternative where each pixel's elapsed time is
//! encoded physically in the residual voltage of a leaky storage cell, and
//! provides everything needed to study that design at desk scale:
//!
//! - [`events`]: event data model, CSV/binary stream I/O, synthetic labeled
//!   stream generation and Poisson noise injection.
//! - [`digital_surface`]: the exact digital reference (SAE map, exponential
//!   time-surface, patches, finite-width counter wrap emulation).
//! - [`cell_model`]: calibrated double-exponential retention curve, nonlinear
//!   fitting, per-cell variability sampling, window/threshold mapping.
//! - [`array_sim`]: event-driven pixel-array simulation in 3D (per-pixel write)
//!   and 2D crossbar (half-select droop) modes.
//! - [`stcf`]: spatiotemporal correlation filter denoising with timestamp and
//!   voltage back-ends, plus ROC/AUC evaluation.
//! - [`cost_model`]: analytical power/area/latency comparison of the
//!   architectures against SRAM timestamp storage.
//! - [`frames`]: time-surface frame export (windowing, bilinear resize,
//!   quantization) for downstream CV pipelines.
//! - [`formats`]: the small on-disk formats shared by the above (TSF1 float
//!   surface dumps, binary PGM, key-value config/calibration files).

pub mod array_sim;
pub mod cell_model;
pub mod cost_model;
pub mod digital_surface;
pub mod events;
pub mod formats;
pub mod frames;
pub mod stcf;
pub mod surface;

pub use array_sim::{AnalogArray, AnalogArrayConfig, Architecture, HalfSelectParams, HalfSelectStats};
pub use cell_model::{DecayModel, FitReport, VariabilitySpec};
pub use cost_model::{CostInputs, CostReport};
pub use digital_surface::{SaeMap, TimeSurfacePatch};
pub use events::{EventRecord, Label, Polarity, PolarityMode, SceneConfig, StreamFormat, StreamHeader};
pub use frames::{FrameSpec, SurfaceSource};
pub use stcf::{DenoiseOutcome, StcfConfig, StcfState};
pub use surface::Surface;
