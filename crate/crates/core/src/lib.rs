//! Simulation of orbital-angular-momentum transfer in two-pump atomic wave
//! mixing, and the intensity-only measurements used to read it back.
//!
//! Pipeline: [`sources`] builds pump beams, [`mixing`] forms the generated
//! 420 nm and 1370 nm fields, [`propagate`] carries them to the cameras and
//! [`diagnostics`] recovers topological charges from intensity images.
//! [`process`] holds the photon loops and their conservation laws, and
//! [`scenario`] ties everything to config files and on-disk artifacts.

pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod mixing;
pub mod par;
pub mod process;
pub mod propagate;
pub mod scenario;
pub mod sources;

pub use error::{Error, Result};
pub use field::{make_grid, normalize_power, overlap, power, to_intensity, ComplexField, GridSpec, IntensityImage};
