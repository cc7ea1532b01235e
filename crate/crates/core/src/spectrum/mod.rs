//! Joint spectral amplitudes: pump envelope × phase matching, marginals and
//! pump-bandwidth optimization.

mod io;
mod schmidt;

pub use io::{read_jsa_csv, read_jsa_json, read_jsi_csv, read_jsi_json, write_jsa_csv, write_jsa_json, write_jsi_csv, write_jsi_json};
pub use schmidt::{
    purity, purity_from_gram, purity_from_intensity, schmidt_decompose, singular_value_purity, IntensityMode,
    SchmidtSpectrum, TRUNCATION,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Matrix};
use crate::model::{omega_from_nm, omega_width_from_nm, FrequencyGrid};
use crate::optimize::golden_section_max;

/// Gaussian pump spectrum with a quadratic spectral phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpEnvelope {
    pub center_nm: f64,
    /// FWHM of the pump power spectrum |α|², nm.
    pub fwhm_nm: f64,
    /// Coefficient C of the spectral phase C·(ω − ω_p)², s².
    #[serde(default)]
    pub chirp: f64,
    /// Scale the envelope to unit norm on the grid instead of unit peak.
    #[serde(default)]
    pub normalize: bool,
}

impl PumpEnvelope {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Self {
        PumpEnvelope {
            center_nm,
            fwhm_nm,
            chirp: 0.0,
            normalize: false,
        }
    }

    pub fn with_chirp(mut self, chirp: f64) -> Self {
        self.chirp = chirp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_nm > 0.0 && self.fwhm_nm.is_finite()) {
            return Err(Error::invalid("pump envelope", "fwhm must be positive"));
        }
        if !(self.center_nm > 0.0 && self.center_nm.is_finite()) {
            return Err(Error::invalid("pump envelope", "center wavelength must be positive"));
        }
        if !self.chirp.is_finite() {
            return Err(Error::invalid("pump envelope", "chirp must be finite"));
        }
        Ok(())
    }

    pub fn center_omega(&self) -> f64 {
        omega_from_nm(self.center_nm)
    }

    /// Amplitude width σ in α ∝ exp(−Δ²/2σ²), rad/s. The power FWHM is 2σ√ln2.
    pub fn sigma(&self) -> f64 {
        omega_width_from_nm(self.center_nm, self.fwhm_nm) / (2.0 * 2f64.ln().sqrt())
    }

    /// α(ω_s + ω_i).
    pub fn amplitude(&self, omega_sum: f64) -> Complex64 {
        let d = omega_sum - self.center_omega();
        let sigma = self.sigma();
        Complex64::from_polar((-d * d / (2.0 * sigma * sigma)).exp(), self.chirp * d * d)
    }
}

/// Pump-envelope function on the grid.
pub fn gaussian_pef(pump: &PumpEnvelope, grid: &FrequencyGrid) -> Result<ComplexMatrix> {
    pump.validate()?;
    let (ws, wi) = grid.points();
    let mut pef = Matrix::from_fn(ws.len(), wi.len(), |r, c| pump.amplitude(ws[r] + wi[c]));
    if pump.normalize {
        let norm = (pef.norm_sqr() * grid.cell_area()).sqrt();
        if norm > 0.0 {
            pef.scale(1.0 / norm);
        }
    }
    Ok(pef)
}

/// Complex joint spectral amplitude f(ω_s, ω_i) with Σ|f|²Δω_sΔω_i = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpectrum {
    grid: FrequencyGrid,
    amplitude: ComplexMatrix,
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl JointSpectrum {
    /// Normalizes `amplitude` onto the grid.
    pub fn new(grid: FrequencyGrid, mut amplitude: ComplexMatrix) -> Result<Self> {
        check_shape("joint spectrum", &grid, amplitude.shape())?;
        if amplitude.as_slice().iter().any(|z| !z.is_finite()) {
            return Err(Error::numeric("joint spectrum", "non-finite amplitude"));
        }
        let total = amplitude.norm_sqr() * grid.cell_area();
        if !(total > 0.0) {
            return Err(Error::numeric("joint spectrum", "amplitude is identically zero"));
        }
        amplitude.scale(1.0 / total.sqrt());
        Ok(JointSpectrum { grid, amplitude })
    }

    /// Wraps an already normalized amplitude without rescaling it.
    pub fn from_normalized(grid: FrequencyGrid, amplitude: ComplexMatrix) -> Result<Self> {
        check_shape("joint spectrum", &grid, amplitude.shape())?;
        if amplitude.as_slice().iter().any(|z| !z.is_finite()) {
            return Err(Error::numeric("joint spectrum", "non-finite amplitude"));
        }
        let total = amplitude.norm_sqr() * grid.cell_area();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::numeric("joint spectrum", format!("amplitude integrates to {total}, not 1")));
        }
        Ok(JointSpectrum { grid, amplitude })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &ComplexMatrix {
        &self.amplitude
    }

    /// Σ|f|²Δω_sΔω_i.
    pub fn norm(&self) -> f64 {
        self.amplitude.norm_sqr() * self.grid.cell_area()
    }

    /// Signal and idler exchanged.
    pub fn transposed(&self) -> Self {
        JointSpectrum {
            grid: self.grid.transposed(),
            amplitude: self.amplitude.transpose(),
        }
    }

    /// |f|², the joint spectral intensity.
    pub fn intensity(&self) -> crate::matrix::RealMatrix {
        self.amplitude.intensity()
    }

    /// Multiplies every entry by `mask(r, c)` and renormalizes.
    pub fn masked(&self, mask: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        let (rows, cols) = self.amplitude.shape();
        let m = Matrix::from_fn(rows, cols, |r, c| self.amplitude.get(r, c) * mask(r, c));
        JointSpectrum::new(self.grid.clone(), m)
    }
}

fn check_shape(op: &'static str, grid: &FrequencyGrid, shape: (usize, usize)) -> Result<()> {
    if shape != (grid.n_signal(), grid.n_idler()) {
        return Err(Error::shape(
            op,
            format!(
                "matrix is {}x{} but the grid is {}x{}",
                shape.0,
                shape.1,
                grid.n_signal(),
                grid.n_idler()
            ),
        ));
    }
    Ok(())
}

/// f = α·φ, normalized.
pub fn compose_jsa(pef: &ComplexMatrix, pmf: &ComplexMatrix, grid: &FrequencyGrid) -> Result<JointSpectrum> {
    check_shape("compose_jsa", grid, pef.shape())?;
    check_shape("compose_jsa", grid, pmf.shape())?;
    let product: Vec<Complex64> = pef.as_slice().iter().zip(pmf.as_slice()).map(|(a, b)| a * b).collect();
    let product = Matrix::from_vec(grid.n_signal(), grid.n_idler(), product)?;
    if !(product.norm_sqr() > 0.0) {
        return Err(Error::numeric("compose_jsa", "no spectral overlap between PEF and PMF"));
    }
    JointSpectrum::new(grid.clone(), product)
}

/// Signal and idler intensity marginals, each integrating to 1 over its axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
}

pub fn marginals(jsa: &JointSpectrum) -> Marginals {
    let grid = jsa.grid();
    let (rows, cols) = jsa.amplitude().shape();
    let (ds, di) = (grid.signal_step(), grid.idler_step());
    let mut signal = vec![0.0; rows];
    let mut idler = vec![0.0; cols];
    for (r, s) in signal.iter_mut().enumerate() {
        for (c, i) in idler.iter_mut().enumerate() {
            let p = jsa.amplitude().get(r, c).norm_sqr();
            *s += p * di;
            *i += p * ds;
        }
    }
    Marginals { signal, idler }
}

/// Classical fidelity (Σ√(p·q)·Δω)² of two marginals sampled with spacing `step`.
pub fn marginal_fidelity(p: &[f64], q: &[f64], step: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape("marginal_fidelity", "marginals differ in length"));
    }
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).max(0.0).sqrt()).sum::<f64>() * step;
    Ok(bc * bc)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PumpSearch {
    /// Bracket for the pump power FWHM, nm.
    pub fwhm_bracket_nm: (f64, f64),
    /// Convergence tolerance relative to the FWHM.
    pub rel_tol: f64,
}

impl Default for PumpSearch {
    fn default() -> Self {
        PumpSearch {
            fwhm_bracket_nm: (0.1, 10.0),
            rel_tol: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PumpOptimum {
    pub fwhm_nm: f64,
    pub purity: f64,
    pub evaluations: usize,
    pub at_boundary: bool,
}

/// Heralded purity of α·φ for an unchirped Gaussian pump of the given width.
pub fn purity_for_pump(pmf: &ComplexMatrix, grid: &FrequencyGrid, pump: &PumpEnvelope) -> Result<f64> {
    let pef = gaussian_pef(pump, grid)?;
    let jsa = compose_jsa(&pef, pmf, grid)?;
    singular_value_purity(jsa.amplitude())
}

/// Maximizes purity over the pump FWHM by golden-section search.
pub fn optimize_pump_bandwidth(
    pmf: &ComplexMatrix,
    grid: &FrequencyGrid,
    pump_center_nm: f64,
    search: &PumpSearch,
) -> Result<PumpOptimum> {
    check_shape("optimize_pump_bandwidth", grid, pmf.shape())?;
    if !(pmf.norm_sqr() > 0.0) {
        return Err(Error::numeric("optimize_pump_bandwidth", "phase-matching function is zero on the grid"));
    }
    let (lo, hi) = search.fwhm_bracket_nm;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("pump search", "bracket must satisfy 0 < lo < hi"));
    }
    let best = golden_section_max(
        |fwhm| purity_for_pump(pmf, grid, &PumpEnvelope::new(pump_center_nm, fwhm)),
        lo,
        hi,
        search.rel_tol,
    )?;
    if best.at_boundary {
        log::warn!(
            "pump bandwidth optimum lies on the search bracket edge ({:.4} nm); widen the bracket",
            best.x
        );
    }
    Ok(PumpOptimum {
        fwhm_nm: best.x,
        purity: best.value,
        evaluations: best.evaluations,
        at_boundary: best.at_boundary,
    })
}
