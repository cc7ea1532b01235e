//! Design and analysis toolkit for quasi-phase-matched photon-pair sources:
//! poling synthesis, phase-matching functions, joint spectra and Schmidt
//! decomposition, two-source interference and coincidence statistics.

pub mod counting;
pub mod error;
pub mod interference;
pub mod matrix;
pub mod model;
pub mod optimize;
pub mod poling;
pub mod presets;
pub mod spectrum;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, Matrix, RealMatrix};
pub use model::{DispersionBranch, DispersionModel, FrequencyGrid, RangeStatus};
pub use poling::{NonlinearityProfile, PolingPattern, ProfileShape, SidelobeReport};
pub use spectrum::{JointSpectrum, PumpEnvelope, SchmidtSpectrum};
