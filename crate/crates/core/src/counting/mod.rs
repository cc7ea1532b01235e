//! Pulsed pair-source counting: tag-stream simulation, coincidence
//! histograms, pair-probability estimators and time-of-flight spectra.

mod histogram;
mod simulate;
mod stream;
mod tof;

pub use histogram::{
    coincidence_histogram, coupled_ratio, estimate_pspdc_coupled, estimate_pspdc_joint, estimate_pspdc_single,
    invert_coupled_ratio, peak_counts, solve_joint, CoincidenceHistogram, JointPspdc, PspdcEstimate, JOINT_MAX_ITERATIONS,
    JOINT_TOLERANCE, MIN_SIDE_PEAKS,
};
pub use simulate::{
    pair_number_distribution, simulate_tag_stream, simulate_with_emissions, PairEmission, PulseTrainConfig, MAX_PAIRS,
    MAX_TRUNCATED_MASS,
};
pub use stream::{Channel, TagStream};
pub use tof::{fourfold_count, normalize_fourfolds, reconstruct_jsi, simulate_tof_delays, tof_map, TofSpectrometer};
