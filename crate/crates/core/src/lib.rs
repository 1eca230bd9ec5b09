//! Simulation and design-optimization toolkit for infrared-absorption readout
//! of NV-diamond spin ensembles on a plasmonic grating metasurface.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`] and [`config`]: physical parameters, drive and geometry types,
//!   and the TOML run configuration.
//! - [`rates`]: the eight-level rate-equation generator, steady-state solver
//!   and stiff time integrator.
//! - [`photonics`]: grating momentum matching, field-enhancement maps,
//!   golden-rule absorption and the wire-array microwave field.
//! - [`detection`]: pixel absorption, homodyne/direct readout and
//!   shot-noise-limited SNR, including the homodyne operating-point optimizer.
//! - [`sensitivity`]: CW, AC and spin-projection sensitivities, readout
//!   fidelity and the optimal pulsed readout window.
//! - [`cli`]: the `nvir` command-line front end.
//!
//! All internal quantities are SI. Reporting units (mW/µm², µs⁻¹, pT) appear
//! only at the I/O boundary, see [`units`].

pub mod cli;
pub mod config;
pub mod detection;
pub mod error;
pub mod model;
pub mod optim;
pub mod photonics;
pub mod rates;
pub mod sensitivity;
pub mod units;

pub use config::{load_config, load_config_file, RunConfig};
pub use error::{Error, Result};
pub use model::{default_params, OpticalDrive, PhotophysicsParams, PixelGeometry};
