//! Frequency grids, Taylor-expanded waveguide dispersion and phase mismatch.
//!
//! Frequencies are angular frequencies in rad/s throughout; wavelengths only
//! appear at the edges through the conversion helpers below.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Angular frequency (rad/s) of a vacuum wavelength given in nm.
pub fn omega_from_nm(wavelength_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

/// Vacuum wavelength in nm of an angular frequency in rad/s.
pub fn nm_from_omega(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e9
}

/// Angular-frequency width of a small wavelength interval around `center_nm`.
pub fn omega_width_from_nm(center_nm: f64, width_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * width_nm * 1e-9 / (center_nm * 1e-9).powi(2)
}

/// Wavelength width in nm corresponding to an angular-frequency width at `center_nm`.
pub fn nm_width_from_omega(center_nm: f64, width_omega: f64) -> f64 {
    width_omega * (center_nm * 1e-9).powi(2) / (2.0 * PI * SPEED_OF_LIGHT) * 1e9
}

/// Rectangular, uniformly spaced sampling of (ω_s, ω_i) space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    signal_center: f64,
    idler_center: f64,
    signal_span: f64,
    idler_span: f64,
    n_signal: usize,
    n_idler: usize,
}

impl FrequencyGrid {
    pub fn new(
        signal_center: f64,
        idler_center: f64,
        signal_span: f64,
        idler_span: f64,
        n_signal: usize,
        n_idler: usize,
    ) -> Result<Self> {
        if n_signal < 2 || n_idler < 2 {
            return Err(Error::invalid(
                "frequency grid",
                format!("need at least 2 points per axis, got {n_signal}x{n_idler}"),
            ));
        }
        if !(signal_span > 0.0 && idler_span > 0.0) {
            return Err(Error::invalid("frequency grid", "spans must be strictly positive"));
        }
        if !(signal_center.is_finite() && idler_center.is_finite())
            || !(signal_span.is_finite() && idler_span.is_finite())
        {
            return Err(Error::invalid("frequency grid", "non-finite center or span"));
        }
        Ok(FrequencyGrid {
            signal_center,
            idler_center,
            signal_span,
            idler_span,
            n_signal,
            n_idler,
        })
    }

    /// Grid centred on two wavelengths with spans given in nm.
    pub fn from_wavelengths(
        signal_center_nm: f64,
        idler_center_nm: f64,
        signal_span_nm: f64,
        idler_span_nm: f64,
        n_signal: usize,
        n_idler: usize,
    ) -> Result<Self> {
        FrequencyGrid::new(
            omega_from_nm(signal_center_nm),
            omega_from_nm(idler_center_nm),
            omega_width_from_nm(signal_center_nm, signal_span_nm),
            omega_width_from_nm(idler_center_nm, idler_span_nm),
            n_signal,
            n_idler,
        )
    }

    pub fn signal_center(&self) -> f64 {
        self.signal_center
    }
    pub fn idler_center(&self) -> f64 {
        self.idler_center
    }
    pub fn signal_span(&self) -> f64 {
        self.signal_span
    }
    pub fn idler_span(&self) -> f64 {
        self.idler_span
    }
    pub fn n_signal(&self) -> usize {
        self.n_signal
    }
    pub fn n_idler(&self) -> usize {
        self.n_idler
    }

    pub fn signal_step(&self) -> f64 {
        self.signal_span / (self.n_signal - 1) as f64
    }

    pub fn idler_step(&self) -> f64 {
        self.idler_span / (self.n_idler - 1) as f64
    }

    /// Area element Δω_s·Δω_i of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.signal_step() * self.idler_step()
    }

    pub fn signal_points(&self) -> Vec<f64> {
        axis(self.signal_center, self.signal_span, self.n_signal)
    }

    pub fn idler_points(&self) -> Vec<f64> {
        axis(self.idler_center, self.idler_span, self.n_idler)
    }

    /// Both axes, signal first.
    pub fn points(&self) -> (Vec<f64>, Vec<f64>) {
        (self.signal_points(), self.idler_points())
    }

    /// Same spans and centres, different resolution.
    pub fn with_resolution(&self, n_signal: usize, n_idler: usize) -> Result<Self> {
        FrequencyGrid::new(
            self.signal_center,
            self.idler_center,
            self.signal_span,
            self.idler_span,
            n_signal,
            n_idler,
        )
    }

    /// Grid with the two axes exchanged.
    pub fn transposed(&self) -> Self {
        FrequencyGrid {
            signal_center: self.idler_center,
            idler_center: self.signal_center,
            signal_span: self.idler_span,
            idler_span: self.signal_span,
            n_signal: self.n_idler,
            n_idler: self.n_signal,
        }
    }

    pub fn same_signal_axis(&self, other: &FrequencyGrid) -> bool {
        self.n_signal == other.n_signal
            && close(self.signal_center, other.signal_center)
            && close(self.signal_span, other.signal_span)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

// Offsets are taken from the middle so an odd-length axis hits the centre exactly.
fn axis(center: f64, span: f64, n: usize) -> Vec<f64> {
    let step = span / (n - 1) as f64;
    let half = (n - 1) as f64 / 2.0;
    (0..n).map(|k| center + (k as f64 - half) * step).collect()
}

/// Third-order Taylor expansion of the propagation constant of one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionBranch {
    /// Expansion point, rad/s.
    pub omega0: f64,
    /// k(ω0), 1/m.
    pub k0: f64,
    /// Inverse group velocity, s/m.
    #[serde(default)]
    pub k1: f64,
    /// Group-velocity dispersion, s²/m.
    #[serde(default)]
    pub k2: f64,
    /// Third-order dispersion, s³/m.
    #[serde(default)]
    pub k3: f64,
    /// Full width (rad/s) of the window around `omega0` where the expansion is trusted.
    /// `None` disables range checking for this branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
}

impl DispersionBranch {
    pub fn new(omega0: f64, k0: f64, k1: f64, k2: f64, k3: f64) -> Self {
        DispersionBranch {
            omega0,
            k0,
            k1,
            k2,
            k3,
            span: None,
        }
    }

    /// Constant wavenumber, no frequency dependence.
    pub fn constant(omega0: f64, k0: f64) -> Self {
        DispersionBranch::new(omega0, k0, 0.0, 0.0, 0.0)
    }

    pub fn with_span(mut self, span: f64) -> Self {
        self.span = Some(span);
        self
    }

    /// k(ω) = k₀ + k₁Δ + k₂Δ²/2 + k₃Δ³/6 with Δ = ω − ω₀.
    pub fn wavenumber(&self, omega: f64) -> f64 {
        let d = omega - self.omega0;
        self.k0 + d * (self.k1 + d * (0.5 * self.k2 + d * self.k3 / 6.0))
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let finite = [self.omega0, self.k0, self.k1, self.k2, self.k3]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("dispersion model", format!("{name} branch has non-finite coefficients")));
        }
        if let Some(span) = self.span {
            if !(span > 0.0 && span.is_finite()) {
                return Err(Error::invalid("dispersion model", format!("{name} branch span must be positive")));
            }
        }
        Ok(())
    }

    fn status(&self, name: &'static str, omega: f64, factor: f64) -> Result<RangeStatus> {
        let Some(span) = self.span else {
            return Ok(RangeStatus::Inside);
        };
        let half = 0.5 * span;
        let dev = (omega - self.omega0).abs();
        if dev <= half {
            Ok(RangeStatus::Inside)
        } else if dev <= factor * half {
            Ok(RangeStatus::Extrapolated { branch: name })
        } else {
            Err(Error::OutOfRange {
                branch: name,
                omega,
                lo: self.omega0 - factor * half,
                hi: self.omega0 + factor * half,
            })
        }
    }
}

/// Whether an evaluation point lies inside the declared expansion windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangeStatus {
    Inside,
    /// Beyond the declared window but within the tolerated extrapolation zone.
    Extrapolated { branch: &'static str },
}

/// Dispersion of the pump, signal and idler modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub pump: DispersionBranch,
    pub signal: DispersionBranch,
    pub idler: DispersionBranch,
    /// Multiple of each branch's half-span tolerated (with a warning) before evaluation fails.
    #[serde(default = "default_extrapolation")]
    pub extrapolation_factor: f64,
}

fn default_extrapolation() -> f64 {
    2.0
}

impl DispersionModel {
    pub fn new(pump: DispersionBranch, signal: DispersionBranch, idler: DispersionBranch) -> Result<Self> {
        let model = DispersionModel {
            pump,
            signal,
            idler,
            extrapolation_factor: default_extrapolation(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.pump.validate("pump")?;
        self.signal.validate("signal")?;
        self.idler.validate("idler")?;
        if !(self.extrapolation_factor >= 1.0) {
            return Err(Error::invalid("dispersion model", "extrapolation factor must be >= 1"));
        }
        Ok(())
    }

    /// Every coefficient zero; Δk vanishes identically.
    pub fn zero() -> Self {
        let b = DispersionBranch::constant(0.0, 0.0);
        DispersionModel {
            pump: b.clone(),
            signal: b.clone(),
            idler: b,
            extrapolation_factor: default_extrapolation(),
        }
    }

    pub fn range_status(&self, omega_s: f64, omega_i: f64) -> Result<RangeStatus> {
        let f = self.extrapolation_factor;
        let checks = [
            self.pump.status("pump", omega_s + omega_i, f)?,
            self.signal.status("signal", omega_s, f)?,
            self.idler.status("idler", omega_i, f)?,
        ];
        Ok(checks
            .into_iter()
            .find(|s| *s != RangeStatus::Inside)
            .unwrap_or(RangeStatus::Inside))
    }

    /// Δk = k_p(ω_s+ω_i) − k_s(ω_s) − k_i(ω_i), failing outside the tolerated range.
    pub fn phase_mismatch(&self, omega_s: f64, omega_i: f64) -> Result<f64> {
        self.range_status(omega_s, omega_i)?;
        Ok(self.phase_mismatch_unchecked(omega_s, omega_i))
    }

    pub fn phase_mismatch_unchecked(&self, omega_s: f64, omega_i: f64) -> f64 {
        self.pump.wavenumber(omega_s + omega_i) - self.signal.wavenumber(omega_s) - self.idler.wavenumber(omega_i)
    }

    /// Mismatch left over after first-order quasi-phase matching with period Λ.
    pub fn qpm_mismatch(&self, period: f64, omega_s: f64, omega_i: f64) -> Result<f64> {
        Ok(self.phase_mismatch(omega_s, omega_i)? - 2.0 * PI / period)
    }

    /// Checks the whole grid (its corners bound every branch argument) and
    /// logs once if any corner needs extrapolation.
    pub fn check_grid(&self, grid: &FrequencyGrid) -> Result<RangeStatus> {
        let (ws, wi) = (grid.signal_points(), grid.idler_points());
        let corners = [
            (ws[0], wi[0]),
            (ws[0], wi[wi.len() - 1]),
            (ws[ws.len() - 1], wi[0]),
            (ws[ws.len() - 1], wi[wi.len() - 1]),
        ];
        let mut worst = RangeStatus::Inside;
        for (s, i) in corners {
            let st = self.range_status(s, i)?;
            if st != RangeStatus::Inside {
                worst = st;
            }
        }
        if let RangeStatus::Extrapolated { branch } = worst {
            log::warn!("grid extends beyond the declared {branch} dispersion window; Taylor extrapolation in use");
        }
        Ok(worst)
    }
}
