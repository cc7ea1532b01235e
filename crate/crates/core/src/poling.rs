//! Poling patterns and the phase-matching function they produce.
//!
//! A pattern is a list of domains `[x_j, x_{j+1})` with orientation `s_j`.
//! Its phase-matching function φ(Δk) = ∫ g(x) e^{iΔk x} dx is evaluated in
//! closed form per domain, so there is no quadrature error.
//!
//! Synthesized patterns follow the deleted-domain convention: a kept period
//! is `[+1, −1]` and a deleted period stays at the background orientation
//! `[+1, +1]`. Adjacent equal-sign domains are merged.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Matrix, RealMatrix};
use crate::model::{DispersionModel, FrequencyGrid};

/// Magnitude of the first-order Fourier coefficient of a 50 % duty-cycle
/// square wave. A periodic pattern of length L peaks at |φ| = (2/π)·L.
pub const QPM_FIRST_ORDER: f64 = 2.0 / PI;

/// Below this |Δk|·L the per-domain sinc form is used instead of the
/// telescoped boundary sum, which divides by Δk.
const SMALL_PHASE: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PolingPattern {
    boundaries: Vec<f64>,
    signs: Vec<i8>,
    period: f64,
    /// Boundary positions as integer multiples of Λ/2, when they all are.
    lattice: Option<Vec<usize>>,
}

impl PolingPattern {
    pub fn new(boundaries: Vec<f64>, signs: Vec<i8>, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("poling pattern", "period must be positive"));
        }
        if signs.is_empty() || boundaries.len() != signs.len() + 1 {
            return Err(Error::invalid(
                "poling pattern",
                format!("{} boundaries for {} segments", boundaries.len(), signs.len()),
            ));
        }
        if boundaries[0] != 0.0 {
            return Err(Error::invalid("poling pattern", "first boundary must be 0"));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid("poling pattern", "boundaries must be strictly increasing"));
        }
        if signs.iter().any(|s| !matches!(s, -1..=1)) {
            return Err(Error::invalid("poling pattern", "signs must be -1, 0 or +1"));
        }
        let length = boundaries[boundaries.len() - 1];
        // Small slack so that lengths computed as M·Λ are accepted.
        if length < period * (1.0 - 1e-12) {
            return Err(Error::invalid("poling pattern", "pattern shorter than one period"));
        }
        let half = 0.5 * period;
        let lattice = boundaries
            .iter()
            .map(|&x| {
                let m = (x / half).round();
                (m as f64 * half == x).then_some(m as usize)
            })
            .collect::<Option<Vec<usize>>>();
        Ok(PolingPattern {
            boundaries,
            signs,
            period,
            lattice,
        })
    }

    /// `periods` full periods of `[+1, −1]`.
    pub fn periodic(period: f64, periods: usize) -> Result<Self> {
        let kept = vec![true; periods];
        PolingPattern::from_kept_domains(period, &kept)
    }

    /// Builds a deleted-domain pattern from a per-period keep mask.
    pub fn from_kept_domains(period: f64, kept: &[bool]) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::invalid("poling pattern", "no periods"));
        }
        let half = 0.5 * period;
        let mut index = vec![0usize];
        let mut signs: Vec<i8> = Vec::new();
        let half_signs = kept.iter().flat_map(|&k| if k { [1i8, -1] } else { [1, 1] });
        for (m, s) in half_signs.enumerate() {
            if signs.last() == Some(&s) {
                *index.last_mut().unwrap() = m + 1;
            } else {
                signs.push(s);
                index.push(m + 1);
            }
        }
        let boundaries = index.iter().map(|&m| m as f64 * half).collect();
        PolingPattern::new(boundaries, signs, period)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn length(&self) -> f64 {
        self.boundaries[self.boundaries.len() - 1]
    }

    pub fn num_segments(&self) -> usize {
        self.signs.len()
    }

    /// Every orientation flipped.
    pub fn inverted(&self) -> Self {
        PolingPattern {
            signs: self.signs.iter().map(|s| -s).collect(),
            ..self.clone()
        }
    }

    /// `self` followed by `other`, whose origin is moved to the end of `self`.
    pub fn concat(&self, other: &PolingPattern) -> Result<Self> {
        let offset = self.length();
        let mut boundaries = self.boundaries.clone();
        boundaries.extend(other.boundaries[1..].iter().map(|x| x + offset));
        let mut signs = self.signs.clone();
        signs.extend_from_slice(&other.signs);
        PolingPattern::new(boundaries, signs, self.period)
    }

    /// Number of inverted (kept) domains.
    pub fn kept_domains(&self) -> usize {
        self.signs.iter().filter(|&&s| s == -1).count()
    }

    /// Fraction of each window of `window_periods` periods covered by
    /// inverted domains, times two; 1 for a strictly periodic stretch.
    /// Returns (window centre, density) pairs for windows sliding by one period.
    pub fn windowed_density(&self, window_periods: usize) -> Vec<(f64, f64)> {
        let n_periods = (self.length() / self.period).round() as usize;
        if window_periods == 0 || window_periods > n_periods {
            return Vec::new();
        }
        let width = window_periods as f64 * self.period;
        (0..=n_periods - window_periods)
            .map(|start| {
                let a = start as f64 * self.period;
                let b = a + width;
                let inverted: f64 = self
                    .boundaries
                    .windows(2)
                    .zip(&self.signs)
                    .filter(|(_, &s)| s == -1)
                    .map(|(w, _)| (w[1].min(b) - w[0].max(a)).max(0.0))
                    .sum();
                (0.5 * (a + b), 2.0 * inverted / width)
            })
            .collect()
    }

    /// φ(Δk) = ∫₀ᴸ g(x) e^{iΔk x} dx for this pattern.
    pub fn response(&self, dk: f64) -> Complex64 {
        if (dk * self.length()).abs() < SMALL_PHASE {
            return self.response_by_segments(dk);
        }
        let coefs = self.boundary_coefficients();
        let sum: Complex64 = self
            .boundaries
            .iter()
            .zip(&coefs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&x, &c)| Complex64::from_polar(c, dk * x))
            .sum();
        sum / Complex64::new(0.0, dk)
    }

    // ∫_a^b e^{iΔk x} dx = (b−a)·sinc(Δk(b−a)/2)·e^{iΔk(a+b)/2}; stable as Δk → 0.
    fn response_by_segments(&self, dk: f64) -> Complex64 {
        self.boundaries
            .windows(2)
            .zip(&self.signs)
            .filter(|(_, &s)| s != 0)
            .map(|(w, &s)| {
                let width = w[1] - w[0];
                let mid = 0.5 * (w[0] + w[1]);
                Complex64::from_polar(f64::from(s) * width * sinc(0.5 * dk * width), dk * mid)
            })
            .sum()
    }

    // Summation by parts: Σ_j s_j (E_{j+1} − E_j) = Σ_j (s_{j−1} − s_j) E_j.
    fn boundary_coefficients(&self) -> Vec<f64> {
        let n = self.signs.len();
        (0..=n)
            .map(|j| {
                let before = if j == 0 { 0 } else { self.signs[j - 1] };
                let after = if j == n { 0 } else { self.signs[j] };
                f64::from(before - after)
            })
            .collect()
    }

    /// Dense coefficient polynomial in z = e^{iΔk Λ/2}, for lattice patterns.
    fn lattice_polynomial(&self) -> Option<Vec<f64>> {
        let lattice = self.lattice.as_ref()?;
        let mut poly = vec![0.0; lattice[lattice.len() - 1] + 1];
        for (&m, c) in lattice.iter().zip(self.boundary_coefficients()) {
            poly[m] += c;
        }
        Some(poly)
    }

    /// Segments as (x_start, x_end, sign) rows, preceded by a comment carrying the period.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = writer;
        writeln!(w, "# nominal_period_m={}", self.period)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["x_start", "x_end", "sign"])?;
        for (seg, s) in self.boundaries.windows(2).zip(&self.signs) {
            csv.write_record([seg[0].to_string(), seg[1].to_string(), s.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Reads the CSV layout written by [`PolingPattern::write_csv`]. `period`
    /// overrides the value in the comment header and is required without one.
    pub fn read_csv<R: BufRead>(reader: R, period: Option<f64>) -> Result<Self> {
        let mut lines = Vec::new();
        let mut header_period = None;
        for line in reader.lines() {
            let line = line?;
            if let Some(rest) = line.trim().strip_prefix("# nominal_period_m=") {
                header_period = Some(
                    rest.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("nominal period: {e}")))?,
                );
            }
            lines.push(line);
        }
        let period = period
            .or(header_period)
            .ok_or_else(|| Error::Parse("pattern CSV carries no nominal period".into()))?;
        let text = lines.join("\n");
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut boundaries = Vec::new();
        let mut signs = Vec::new();
        for rec in csv.deserialize() {
            let SegmentRow { x_start, x_end, sign } = rec?;
            match boundaries.last() {
                None => boundaries.push(x_start),
                Some(&prev) if prev != x_start => {
                    return Err(Error::Parse(format!("gap between segments at x={prev}")));
                }
                _ => {}
            }
            boundaries.push(x_end);
            signs.push(sign);
        }
        PolingPattern::new(boundaries, signs, period)
    }
}

#[derive(Deserialize)]
struct SegmentRow {
    x_start: f64,
    x_end: f64,
    sign: i8,
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileShape {
    Tophat,
    Gaussian,
}

/// Target nonlinearity profile g(x) along the waveguide.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityProfile {
    pub shape: ProfileShape,
    #[serde(default = "unit")]
    pub amplitude: f64,
    /// Full width at half maximum of g(x), m. Required for Gaussian profiles.
    #[serde(default)]
    pub gaussian_fwhm: Option<f64>,
    /// Peak position, m. Defaults to the waveguide centre.
    #[serde(default)]
    pub center: Option<f64>,
}

fn unit() -> f64 {
    1.0
}

impl NonlinearityProfile {
    pub fn tophat() -> Self {
        NonlinearityProfile {
            shape: ProfileShape::Tophat,
            amplitude: 1.0,
            gaussian_fwhm: None,
            center: None,
        }
    }

    pub fn gaussian(fwhm: f64) -> Self {
        NonlinearityProfile {
            shape: ProfileShape::Gaussian,
            amplitude: 1.0,
            gaussian_fwhm: Some(fwhm),
            center: None,
        }
    }

    fn validate(&self, length: f64) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(Error::invalid("nonlinearity profile", "amplitude must be positive"));
        }
        if self.shape == ProfileShape::Gaussian {
            match self.gaussian_fwhm {
                Some(f) if f > 0.0 && f <= length => {}
                Some(f) if f > length => {
                    return Err(Error::invalid(
                        "nonlinearity profile",
                        format!("gaussian fwhm {f:e} m exceeds waveguide length {length:e} m"),
                    ))
                }
                _ => return Err(Error::invalid("nonlinearity profile", "gaussian fwhm must be positive")),
            }
        }
        Ok(())
    }

    /// g(x) on a waveguide of the given length; within [0, amplitude].
    pub fn value(&self, x: f64, length: f64) -> f64 {
        match self.shape {
            ProfileShape::Tophat => self.amplitude,
            ProfileShape::Gaussian => {
                let fwhm = self.gaussian_fwhm.unwrap_or(length);
                let sigma = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
                let c = self.center.unwrap_or(0.5 * length);
                self.amplitude * (-(x - c).powi(2) / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

/// Deleted-domain pattern whose local density of kept domains follows `profile`.
///
/// The per-period target density is quantized by error diffusion with a
/// threshold of 0.5, keeping the domain on ties. A length that is not a
/// whole number of periods is cut down to one.
pub fn synthesize_pattern(profile: &NonlinearityProfile, length: f64, period: f64) -> Result<PolingPattern> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid("poling synthesis", "period must be positive"));
    }
    if !(length >= period && length.is_finite()) {
        return Err(Error::invalid("poling synthesis", "length must be at least one period"));
    }
    profile.validate(length)?;
    let ratio = length / period;
    let periods = (ratio + 1e-9).floor() as usize;
    let effective = periods as f64 * period;
    if (ratio - periods as f64).abs() > 1e-9 {
        log::warn!(
            "waveguide length {length:e} m is not a whole number of {period:e} m periods; truncated to {effective:e} m"
        );
    }
    let mut carry = 0.0;
    let kept: Vec<bool> = (0..periods)
        .map(|m| {
            let x = (m as f64 + 0.5) * period;
            carry += profile.value(x, effective) / profile.amplitude;
            if carry >= 0.5 {
                carry -= 1.0;
                true
            } else {
                false
            }
        })
        .collect();
    PolingPattern::from_kept_domains(period, &kept)
}

const LANES: usize = 8;

// Horner evaluation of Σ c_m z^m for LANES values of z at once.
fn horner_lanes(poly: &[f64], zr: &[f64; LANES], zi: &[f64; LANES]) -> [Complex64; LANES] {
    let mut ar = [0.0f64; LANES];
    let mut ai = [0.0f64; LANES];
    for &c in poly.iter().rev() {
        for l in 0..LANES {
            let r = ar[l] * zr[l] - ai[l] * zi[l] + c;
            let i = ar[l] * zi[l] + ai[l] * zr[l];
            ar[l] = r;
            ai[l] = i;
        }
    }
    std::array::from_fn(|l| Complex64::new(ar[l], ai[l]))
}

/// φ(ω_s, ω_i) of `pattern` on every grid point.
pub fn pmf_from_pattern(pattern: &PolingPattern, model: &DispersionModel, grid: &FrequencyGrid) -> Result<ComplexMatrix> {
    model.check_grid(grid)?;
    let (ws, wi) = grid.points();
    let poly = pattern.lattice_polynomial();
    let half = 0.5 * pattern.period();
    let length = pattern.length();
    let mut out = Matrix::filled(ws.len(), wi.len(), Complex64::new(0.0, 0.0));
    out.as_mut_slice()
        .par_chunks_mut(wi.len())
        .zip(ws.par_iter())
        .for_each(|(row, &s)| {
            let dks: Vec<f64> = wi.iter().map(|&i| model.phase_mismatch_unchecked(s, i)).collect();
            match &poly {
                Some(poly) => {
                    let mut idx = 0;
                    while idx < dks.len() {
                        let end = (idx + LANES).min(dks.len());
                        let chunk = &dks[idx..end];
                        if chunk.len() == LANES && chunk.iter().all(|dk| (dk * length).abs() >= SMALL_PHASE) {
                            let zr = std::array::from_fn(|l| (chunk[l] * half).cos());
                            let zi = std::array::from_fn(|l| (chunk[l] * half).sin());
                            let vals = horner_lanes(poly, &zr, &zi);
                            for l in 0..LANES {
                                row[idx + l] = vals[l] / Complex64::new(0.0, chunk[l]);
                            }
                        } else {
                            for (l, &dk) in chunk.iter().enumerate() {
                                row[idx + l] = pattern.response(dk);
                            }
                        }
                        idx = end;
                    }
                }
                None => {
                    for (v, &dk) in row.iter_mut().zip(&dks) {
                        *v = pattern.response(dk);
                    }
                }
            }
        });
    Ok(out)
}

/// First-order QPM response of a strictly periodic pattern of length L at
/// residual mismatch δk = Δk − 2π/Λ: i·(2/π)·L·sinc(δkL/2)·e^{iδkL/2}. The
/// factor i matches patterns that start with a +1 half-period.
pub fn pmf_analytic_periodic(dk: f64, length: f64) -> Complex64 {
    let x = 0.5 * dk * length;
    Complex64::new(0.0, QPM_FIRST_ORDER * length * sinc(x)) * Complex64::from_polar(1.0, x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SidelobeReport {
    pub peak: f64,
    /// (signal index, idler index) of the peak used for the cut.
    pub peak_index: (usize, usize),
    /// Largest sidelobe relative to the peak in dB, `-inf` when none rises above the noise floor.
    pub first_sidelobe_ratio_db: f64,
    /// Unit direction (signal, idler) of the cut, perpendicular to the ridge.
    pub direction: (f64, f64),
    /// (offset from the peak in rad/s, intensity) samples along the cut.
    pub antidiagonal_cut: Vec<(f64, f64)>,
}

pub const DEFAULT_NOISE_FLOOR_DB: f64 = -60.0;

/// Locates the strongest sidelobe of a |PMF|² map along the cut through the
/// peak that crosses the phase-matching ridge.
pub fn sidelobe_report(intensity: &RealMatrix, grid: &FrequencyGrid, noise_floor_db: f64) -> Result<SidelobeReport> {
    let (rows, cols) = intensity.shape();
    if rows != grid.n_signal() || cols != grid.n_idler() {
        return Err(Error::shape("sidelobe_report", "matrix does not match grid"));
    }
    if intensity.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::numeric("sidelobe_report", "intensity must be finite and nonnegative"));
    }
    let peak = intensity.max();
    if !(peak > 0.0) {
        return Err(Error::numeric("sidelobe_report", "all-zero intensity"));
    }
    let (hs, hi) = (grid.signal_step(), grid.idler_step());

    // Structure tensor: gradients point across the ridge.
    let (mut jss, mut jsi, mut jii) = (0.0, 0.0, 0.0);
    for r in 1..rows.saturating_sub(1) {
        for c in 1..cols.saturating_sub(1) {
            let gs = (intensity.get(r + 1, c) - intensity.get(r - 1, c)) / (2.0 * hs);
            let gi = (intensity.get(r, c + 1) - intensity.get(r, c - 1)) / (2.0 * hi);
            jss += gs * gs;
            jsi += gs * gi;
            jii += gi * gi;
        }
    }
    let theta = 0.5 * (2.0 * jsi).atan2(jss - jii);
    let direction = (theta.cos(), theta.sin());

    // Among near-maximal points take the one closest to the grid centre,
    // which gives the longest cut when the ridge is flat.
    let (cr, cc) = ((rows - 1) as f64 / 2.0, (cols - 1) as f64 / 2.0);
    let mut best = (0usize, 0usize);
    let mut best_d = f64::INFINITY;
    for r in 0..rows {
        for c in 0..cols {
            if *intensity.get(r, c) >= peak * (1.0 - 1e-6) {
                let d = ((r as f64 - cr) * hs).powi(2) + ((c as f64 - cc) * hi).powi(2);
                if d < best_d {
                    best_d = d;
                    best = (r, c);
                }
            }
        }
    }
    let peak_value = *intensity.get(best.0, best.1);

    let step = 0.5 * hs.min(hi);
    let sample = |t: f64| -> Option<f64> {
        let fr = best.0 as f64 + t * direction.0 / hs;
        let fc = best.1 as f64 + t * direction.1 / hi;
        bilinear(intensity, fr, fc)
    };
    let walk = |sign: f64| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut k = 1usize;
        while let Some(v) = sample(sign * k as f64 * step) {
            out.push((sign * k as f64 * step, v));
            k += 1;
        }
        out
    };
    let forward = walk(1.0);
    let backward = walk(-1.0);

    let mut strongest: f64 = 0.0;
    for side in [&forward, &backward] {
        let mut values = vec![peak_value];
        values.extend(side.iter().map(|p| p.1));
        if let Some(v) = strongest_beyond_first_minimum(&values) {
            strongest = strongest.max(v);
        }
    }
    let ratio_db = if strongest > 0.0 {
        10.0 * (strongest / peak_value).log10()
    } else {
        f64::NEG_INFINITY
    };
    let first_sidelobe_ratio_db = if ratio_db > noise_floor_db { ratio_db } else { f64::NEG_INFINITY };

    let mut cut: Vec<(f64, f64)> = backward.into_iter().rev().collect();
    cut.push((0.0, peak_value));
    cut.extend(forward);
    Ok(SidelobeReport {
        peak: peak_value,
        peak_index: best,
        first_sidelobe_ratio_db,
        direction,
        antidiagonal_cut: cut,
    })
}

fn bilinear(m: &RealMatrix, r: f64, c: f64) -> Option<f64> {
    let (rows, cols) = m.shape();
    if r < 0.0 || c < 0.0 || r > (rows - 1) as f64 || c > (cols - 1) as f64 {
        return None;
    }
    let r0 = (r.floor() as usize).min(rows - 2);
    let c0 = (c.floor() as usize).min(cols - 2);
    let (fr, fc) = (r - r0 as f64, c - c0 as f64);
    let v00 = m.get(r0, c0);
    let v01 = m.get(r0, c0 + 1);
    let v10 = m.get(r0 + 1, c0);
    let v11 = m.get(r0 + 1, c0 + 1);
    Some(v00 * (1.0 - fr) * (1.0 - fc) + v01 * (1.0 - fr) * fc + v10 * fr * (1.0 - fc) + v11 * fr * fc)
}

// values[0] is the peak; returns the largest local maximum after the first
// minimum, refined by a parabola through its neighbours.
pub(crate) fn strongest_beyond_first_minimum(values: &[f64]) -> Option<f64> {
    let mut k = 0;
    while k + 1 < values.len() && values[k + 1] <= values[k] {
        k += 1;
    }
    let mut best: Option<f64> = None;
    for j in (k + 1)..values.len().saturating_sub(1) {
        let (a, b, c) = (values[j - 1], values[j], values[j + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let refined = if denom < 0.0 {
                b - 0.125 * (c - a).powi(2) / denom
            } else {
                b
            };
            best = Some(best.map_or(refined, |v: f64| v.max(refined)));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DispersionBranch;

    const LAMBDA: f64 = 3.1e-6;

    #[test]
    fn single_segment_at_zero_mismatch() {
        let p = PolingPattern::new(vec![0.0, 2.5e-3], vec![1], LAMBDA).unwrap();
        let v = p.response(0.0);
        assert!((v.re - 2.5e-3).abs() < 1e-18 && v.im.abs() < 1e-18);
    }

    #[test]
    fn small_and_large_mismatch_paths_agree() {
        let p = PolingPattern::periodic(LAMBDA, 50).unwrap();
        for dk in [0.9 / p.length(), 1.1 / p.length()] {
            let a = p.response_by_segments(dk);
            let coefs = p.boundary_coefficients();
            let b: Complex64 = p
                .boundaries()
                .iter()
                .zip(&coefs)
                .map(|(&x, &c)| Complex64::from_polar(c, dk * x))
                .sum::<Complex64>()
                / Complex64::new(0.0, dk);
            assert!((a - b).norm() < 1e-9 * p.length());
        }
    }

    #[test]
    fn tophat_is_strictly_periodic() {
        let p = synthesize_pattern(&NonlinearityProfile::tophat(), 40.0 * LAMBDA, LAMBDA).unwrap();
        assert_eq!(p.num_segments(), 80);
        assert_eq!(p.kept_domains(), 40);
        for (j, w) in p.boundaries().windows(2).enumerate() {
            assert!((w[1] - w[0] - 0.5 * LAMBDA).abs() < 1e-18);
            assert_eq!(p.signs()[j], if j % 2 == 0 { 1 } else { -1 });
        }
    }

    #[test]
    fn narrow_gaussian_keeps_only_center_domains() {
        let length = 200.0 * LAMBDA;
        let p = synthesize_pattern(&NonlinearityProfile::gaussian(2.0 * LAMBDA), length, LAMBDA).unwrap();
        assert!(p.kept_domains() >= 1);
        for (w, s) in p.boundaries().windows(2).zip(p.signs()) {
            if *s == -1 {
                assert!((0.5 * (w[0] + w[1]) - 0.5 * length).abs() < 3.0 * LAMBDA);
            }
        }
    }

    #[test]
    fn fwhm_longer_than_waveguide_is_rejected() {
        let r = synthesize_pattern(&NonlinearityProfile::gaussian(2.0e-3), 1.0e-3, LAMBDA);
        assert!(matches!(r, Err(Error::Invalid { .. })));
    }

    #[test]
    fn incommensurate_length_is_truncated() {
        let p = synthesize_pattern(&NonlinearityProfile::tophat(), 10.4 * LAMBDA, LAMBDA).unwrap();
        assert!((p.length() - 10.0 * LAMBDA).abs() < 1e-18);
    }

    #[test]
    fn rejects_malformed_patterns() {
        assert!(PolingPattern::new(vec![0.0, 1.0], vec![1, 1], 0.5).is_err());
        assert!(PolingPattern::new(vec![0.1, 1.0], vec![1], 0.5).is_err());
        assert!(PolingPattern::new(vec![0.0, 0.6, 0.6], vec![1, -1], 0.5).is_err());
        assert!(PolingPattern::new(vec![0.0, 1.0], vec![2], 0.5).is_err());
        assert!(PolingPattern::new(vec![0.0, 0.4], vec![1], 0.5).is_err());
    }

    #[test]
    fn analytic_periodic_landmarks() {
        let l = 1.0e-3;
        assert!((pmf_analytic_periodic(0.0, l).norm() - QPM_FIRST_ORDER * l).abs() < 1e-15);
        assert!(pmf_analytic_periodic(2.0 * PI / l, l).norm() < 1e-15 * l);
    }

    #[test]
    fn lattice_and_direct_evaluation_agree() {
        let p = synthesize_pattern(&NonlinearityProfile::gaussian(30.0 * LAMBDA), 100.0 * LAMBDA, LAMBDA).unwrap();
        let k = 2.0 * PI / LAMBDA;
        let model = DispersionModel::new(
            DispersionBranch::new(2.0e15, k, 1e-8, 0.0, 0.0),
            DispersionBranch::constant(1.0e15, 0.0),
            DispersionBranch::constant(1.0e15, 0.0),
        )
        .unwrap();
        let grid = FrequencyGrid::new(1.0e15, 1.0e15, 4.0e13, 4.0e13, 9, 11).unwrap();
        let fast = pmf_from_pattern(&p, &model, &grid).unwrap();
        let (ws, wi) = grid.points();
        for (r, &s) in ws.iter().enumerate() {
            for (c, &i) in wi.iter().enumerate() {
                let direct = p.response(model.phase_mismatch(s, i).unwrap());
                assert!((fast.get(r, c) - direct).norm() < 1e-12 * p.length());
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = synthesize_pattern(&NonlinearityProfile::gaussian(20.0 * LAMBDA), 60.0 * LAMBDA, LAMBDA).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = PolingPattern::read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn sidelobe_search_skips_main_lobe() {
        let v = [1.0, 0.8, 0.3, 0.0, 0.04, 0.05, 0.04, 0.0, 0.01, 0.0];
        let s = strongest_beyond_first_minimum(&v).unwrap();
        assert!(s >= 0.05 && s < 0.06);
        assert_eq!(strongest_beyond_first_minimum(&[1.0, 0.5, 0.2, 0.1]), None);
    }

    #[test]
    fn zero_matrix_is_an_error() {
        let g = FrequencyGrid::new(1.0, 1.0, 1.0, 1.0, 4, 4).unwrap();
        let m = Matrix::filled(4, 4, 0.0);
        assert!(sidelobe_report(&m, &g, DEFAULT_NOISE_FLOOR_DB).is_err());
    }
}
