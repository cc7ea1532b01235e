//! Bundled device and source configurations.
//!
//! The waveguide is a Type 2 process (TE signal, TM idler) phase-matched
//! near 1505 nm + 1557 nm. Group indices and dispersion coefficients are
//! representative of thin-film lithium niobate; they are not fitted to a
//! particular fabricated chip.

use crate::error::Result;
use crate::model::{omega_from_nm, omega_width_from_nm, DispersionBranch, DispersionModel, FrequencyGrid, SPEED_OF_LIGHT};
use crate::poling::{synthesize_pattern, NonlinearityProfile, PolingPattern};
use crate::spectrum::PumpEnvelope;

pub const POLING_PERIOD_M: f64 = 3.1e-6;
pub const POLING_PERIODS: usize = 1100;
/// Gaussian nonlinearity FWHM as a fraction of the waveguide length.
pub const GAUSSIAN_FWHM_FRACTION: f64 = 0.25;

pub const SIGNAL_NM: f64 = 1505.0;
pub const GRID_SPAN_NM: f64 = 28.0;
pub const DEFAULT_GRID_POINTS: usize = 512;

const GROUP_INDEX_SIGNAL: f64 = 2.22;
const GROUP_INDEX_IDLER: f64 = 2.58;
const GROUP_INDEX_PUMP: f64 = 2.40;
const GVD_SIGNAL: f64 = 1.4e-25;
const GVD_IDLER: f64 = 1.6e-25;
const GVD_PUMP: f64 = 6.0e-24;
const PHASE_INDEX_SIGNAL: f64 = 1.85;
const PHASE_INDEX_IDLER: f64 = 1.77;

pub fn waveguide_length() -> f64 {
    POLING_PERIODS as f64 * POLING_PERIOD_M
}

/// Idler wavelength fixed by energy conservation.
pub fn idler_nm_for_pump(pump_nm: f64, signal_nm: f64) -> f64 {
    1.0 / (1.0 / pump_nm - 1.0 / signal_nm)
}

/// Dispersion of a waveguide phase-matched at first order exactly at
/// (`signal_nm`, `idler_nm`) with the bundled poling period.
pub fn type2_dispersion(signal_nm: f64, idler_nm: f64) -> Result<DispersionModel> {
    let (ws, wi) = (omega_from_nm(signal_nm), omega_from_nm(idler_nm));
    let tau = std::f64::consts::TAU;
    let ks = tau * PHASE_INDEX_SIGNAL / (signal_nm * 1e-9);
    let ki = tau * PHASE_INDEX_IDLER / (idler_nm * 1e-9);
    let kp = ks + ki + tau / POLING_PERIOD_M;
    let window_s = omega_width_from_nm(signal_nm, 2.0 * GRID_SPAN_NM);
    let window_i = omega_width_from_nm(idler_nm, 2.0 * GRID_SPAN_NM);
    DispersionModel::new(
        DispersionBranch::new(ws + wi, kp, GROUP_INDEX_PUMP / SPEED_OF_LIGHT, GVD_PUMP, 0.0).with_span(window_s + window_i),
        DispersionBranch::new(ws, ks, GROUP_INDEX_SIGNAL / SPEED_OF_LIGHT, GVD_SIGNAL, 0.0).with_span(window_s),
        DispersionBranch::new(wi, ki, GROUP_INDEX_IDLER / SPEED_OF_LIGHT, GVD_IDLER, 0.0).with_span(window_i),
    )
}

/// Square grid centred on (`SIGNAL_NM`, `idler_nm`) with equal angular spans.
pub fn source_grid(idler_nm: f64, points: usize) -> Result<FrequencyGrid> {
    let span = omega_width_from_nm(SIGNAL_NM, GRID_SPAN_NM);
    FrequencyGrid::new(omega_from_nm(SIGNAL_NM), omega_from_nm(idler_nm), span, span, points, points)
}

pub fn gaussian_profile() -> NonlinearityProfile {
    NonlinearityProfile::gaussian(GAUSSIAN_FWHM_FRACTION * waveguide_length())
}

pub fn gaussian_poling() -> Result<PolingPattern> {
    synthesize_pattern(&gaussian_profile(), waveguide_length(), POLING_PERIOD_M)
}

pub fn periodic_poling() -> Result<PolingPattern> {
    PolingPattern::periodic(POLING_PERIOD_M, POLING_PERIODS)
}

/// One pumped waveguide of the two-source chip.
#[derive(Clone, Debug, PartialEq)]
pub struct SourcePreset {
    pub name: &'static str,
    pub pump: PumpEnvelope,
}

impl SourcePreset {
    pub fn idler_nm(&self) -> f64 {
        idler_nm_for_pump(self.pump.center_nm, SIGNAL_NM)
    }

    pub fn dispersion(&self) -> Result<DispersionModel> {
        type2_dispersion(SIGNAL_NM, self.idler_nm())
    }

    pub fn grid(&self, points: usize) -> Result<FrequencyGrid> {
        source_grid(self.idler_nm(), points)
    }
}

pub const TOP_CHIRP: f64 = 3.5e-26;
pub const BOT_CHIRP: f64 = 2.0e-26;

pub fn top_source() -> SourcePreset {
    SourcePreset {
        name: "top",
        pump: PumpEnvelope::new(765.2, 1.84).with_chirp(TOP_CHIRP),
    }
}

pub fn bot_source() -> SourcePreset {
    SourcePreset {
        name: "bot",
        pump: PumpEnvelope::new(761.1, 1.65).with_chirp(BOT_CHIRP),
    }
}

/// Design point: the top waveguide with an unchirped pump whose bandwidth
/// is left to the optimizer.
pub fn design_source() -> SourcePreset {
    SourcePreset {
        name: "design",
        pump: PumpEnvelope::new(765.2, 2.0),
    }
}

/// Operating point of the two-source counting experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountingPreset {
    pub rate_hz: f64,
    pub p_top: f64,
    pub p_bot: f64,
    pub signal_efficiency: f64,
    pub idler_efficiency: f64,
    pub reflectivity: f64,
    /// Time-of-flight fibre dispersion, ns/nm.
    pub tof_dispersion_ns_per_nm: f64,
}

pub const COUNTING: CountingPreset = CountingPreset {
    rate_hz: 80e6,
    p_top: 0.0291,
    p_bot: 0.0282,
    signal_efficiency: 0.1,
    idler_efficiency: 0.15,
    reflectivity: 0.625,
    tof_dispersion_ns_per_nm: 0.5,
};
