//! Time-of-flight spectroscopy and fourfold-coincidence bookkeeping.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::stream::{Channel, TagStream};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, RealMatrix};
use crate::model::{nm_from_omega, omega_from_nm, FrequencyGrid};

/// λ = λ_ref + delay / dispersion, with delays in s and dispersion in ns/nm.
pub fn tof_map(delays_s: &[f64], dispersion_ns_per_nm: f64, reference_nm: f64) -> Result<Vec<f64>> {
    if dispersion_ns_per_nm == 0.0 || !dispersion_ns_per_nm.is_finite() {
        return Err(Error::invalid("time-of-flight map", "dispersion must be finite and nonzero"));
    }
    Ok(delays_s.iter().map(|d| reference_nm + d * 1e9 / dispersion_ns_per_nm).collect())
}

/// Dispersive-fibre spectrometer on both arms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TofSpectrometer {
    pub signal_dispersion_ns_per_nm: f64,
    pub idler_dispersion_ns_per_nm: f64,
    pub signal_reference_nm: f64,
    pub idler_reference_nm: f64,
    /// Gaussian timing jitter added to each arrival delay, s.
    pub timing_jitter_s: f64,
}

impl TofSpectrometer {
    /// Same dispersion on both arms, referenced to the grid centre.
    pub fn centered(grid: &FrequencyGrid, dispersion_ns_per_nm: f64) -> Self {
        TofSpectrometer {
            signal_dispersion_ns_per_nm: dispersion_ns_per_nm,
            idler_dispersion_ns_per_nm: dispersion_ns_per_nm,
            signal_reference_nm: nm_from_omega(grid.signal_center()),
            idler_reference_nm: nm_from_omega(grid.idler_center()),
            timing_jitter_s: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for d in [self.signal_dispersion_ns_per_nm, self.idler_dispersion_ns_per_nm] {
            if d == 0.0 || !d.is_finite() {
                return Err(Error::invalid("time-of-flight spectrometer", "dispersion must be finite and nonzero"));
            }
        }
        if !(self.timing_jitter_s >= 0.0) {
            return Err(Error::invalid("time-of-flight spectrometer", "jitter must be nonnegative"));
        }
        Ok(())
    }
}

/// Draws `n_pairs` coincidences from a JSI and returns their (signal, idler)
/// arrival delays relative to the reference wavelengths.
pub fn simulate_tof_delays(
    jsi: &RealMatrix,
    grid: &FrequencyGrid,
    spec: &TofSpectrometer,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    if jsi.shape() != (grid.n_signal(), grid.n_idler()) {
        return Err(Error::shape("simulate_tof_delays", "JSI does not match the grid"));
    }
    let cells = WeightedIndex::new(jsi.as_slice())
        .map_err(|e| Error::numeric("simulate_tof_delays", format!("JSI is not a valid distribution: {e}")))?;
    let (ws, wi) = grid.points();
    let jitter = (spec.timing_jitter_s > 0.0).then(|| Normal::new(0.0, spec.timing_jitter_s).expect("finite jitter"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let k = cells.sample(&mut rng);
        let (r, c) = (k / grid.n_idler(), k % grid.n_idler());
        let mut ds = (nm_from_omega(ws[r]) - spec.signal_reference_nm) * spec.signal_dispersion_ns_per_nm * 1e-9;
        let mut di = (nm_from_omega(wi[c]) - spec.idler_reference_nm) * spec.idler_dispersion_ns_per_nm * 1e-9;
        if let Some(n) = &jitter {
            ds += n.sample(&mut rng);
            di += n.sample(&mut rng);
        }
        out.push((ds, di));
    }
    Ok(out)
}

/// Histograms arrival-delay pairs onto the nearest grid cells.
/// Events mapping outside the grid are dropped.
pub fn reconstruct_jsi(delays: &[(f64, f64)], grid: &FrequencyGrid, spec: &TofSpectrometer) -> Result<RealMatrix> {
    spec.validate()?;
    let (ds, di): (Vec<f64>, Vec<f64>) = delays.iter().copied().unzip();
    let ls = tof_map(&ds, spec.signal_dispersion_ns_per_nm, spec.signal_reference_nm)?;
    let li = tof_map(&di, spec.idler_dispersion_ns_per_nm, spec.idler_reference_nm)?;
    let mut counts = Matrix::filled(grid.n_signal(), grid.n_idler(), 0.0);
    for (a, b) in ls.iter().zip(&li) {
        let r = nearest(omega_from_nm(*a), grid.signal_center(), grid.signal_step(), grid.n_signal());
        let c = nearest(omega_from_nm(*b), grid.idler_center(), grid.idler_step(), grid.n_idler());
        if let (Some(r), Some(c)) = (r, c) {
            let v = *counts.get(r, c) + 1.0;
            counts.set(r, c, v);
        }
    }
    Ok(counts)
}

fn nearest(omega: f64, center: f64, step: f64, n: usize) -> Option<usize> {
    let k = ((omega - center) / step + (n - 1) as f64 / 2.0).round();
    (k >= 0.0 && k < n as f64).then_some(k as usize)
}

/// Pulses in which all four detectors clicked.
pub fn fourfold_count(stream: &TagStream) -> u64 {
    let pulses = |ch: Channel| -> HashSet<u64> {
        stream
            .events(ch)
            .iter()
            .map(|t| (t * stream.rate_hz()).round() as u64)
            .collect()
    };
    let bar = pulses(Channel::SignalBar);
    let cross = pulses(Channel::SignalCross);
    let top = pulses(Channel::IdlerTop);
    let bot = pulses(Channel::IdlerBot);
    bar.iter()
        .filter(|k| cross.contains(k) && top.contains(k) && bot.contains(k))
        .count() as u64
}

/// Fourfold counts divided by P_top·P_bot, scaled so the mean over the
/// first and last `edge_points` entries (the far-delay pedestal) is 1.
pub fn normalize_fourfolds(counts: &[f64], p_top: &[f64], p_bot: &[f64], edge_points: usize) -> Result<Vec<f64>> {
    if counts.len() != p_top.len() || counts.len() != p_bot.len() {
        return Err(Error::shape("normalize_fourfolds", "counts and probabilities differ in length"));
    }
    if edge_points == 0 || 2 * edge_points > counts.len() {
        return Err(Error::invalid("normalize_fourfolds", "edge_points must be between 1 and half the trace"));
    }
    if let Some(k) = p_top.iter().chain(p_bot).position(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::numeric(
            "normalize_fourfolds",
            format!("pair probability entry {} is not positive", k % counts.len()),
        ));
    }
    let raw: Vec<f64> = counts.iter().zip(p_top.iter().zip(p_bot)).map(|(c, (a, b))| c / (a * b)).collect();
    let n = raw.len();
    let pedestal = (raw[..edge_points].iter().sum::<f64>() + raw[n - edge_points..].iter().sum::<f64>()) / (2 * edge_points) as f64;
    if !(pedestal > 0.0) {
        return Err(Error::numeric("normalize_fourfolds", "far-delay pedestal is zero"));
    }
    Ok(raw.iter().map(|v| v / pedestal).collect())
}
