//! Heralded two-source Hong-Ou-Mandel interference and the g² purity relation.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectrum::SchmidtSpectrum;

/// Modes whose weight ν² falls below this do not enter the visibility sum.
const MODE_WEIGHT_CUTOFF: f64 = 1e-16;

/// 2R(1−R)/(R² + (1−R)²), the visibility ceiling of an unbalanced splitter.
pub fn splitter_prefactor(reflectivity: f64) -> f64 {
    let t = 1.0 - reflectivity;
    let denom = reflectivity * reflectivity + t * t;
    2.0 * reflectivity * t / denom
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterferometerConfig {
    pub reflectivity: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_steps: usize,
}

impl InterferometerConfig {
    pub fn new(reflectivity: f64, tau_min: f64, tau_max: f64, n_steps: usize) -> Result<Self> {
        let cfg = InterferometerConfig {
            reflectivity,
            tau_min,
            tau_max,
            n_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_reflectivity(self.reflectivity)?;
        if !(self.tau_min < self.tau_max) || !self.tau_min.is_finite() || !self.tau_max.is_finite() {
            return Err(Error::invalid("interferometer", "delay sweep needs tau_min < tau_max"));
        }
        if self.n_steps < 2 {
            return Err(Error::invalid("interferometer", "delay sweep needs at least 2 steps"));
        }
        Ok(())
    }

    /// Evenly spaced delays from `tau_min` to `tau_max` inclusive.
    pub fn delays(&self) -> Vec<f64> {
        let step = (self.tau_max - self.tau_min) / (self.n_steps - 1) as f64;
        (0..self.n_steps).map(|k| self.tau_min + k as f64 * step).collect()
    }
}

fn check_reflectivity(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid("interferometer", format!("reflectivity {r} outside [0, 1]")));
    }
    Ok(())
}

/// Normalized fourfold rate c(τ) = 1 − V(τ) and the headline visibility V(0).
#[derive(Clone, Debug, PartialEq)]
pub struct HomTrace {
    pub delays: Vec<f64>,
    pub rates: Vec<f64>,
    pub visibilities: Vec<f64>,
    pub visibility: f64,
}

/// Heralded signal-mode weights and vectors of one source, weight-filtered.
struct HeraldedModes<'a> {
    weights: Vec<f64>,
    modes: Vec<&'a [Complex64]>,
}

fn heralded(s: &SchmidtSpectrum) -> HeraldedModes<'_> {
    let mut weights = Vec::new();
    let mut modes = Vec::new();
    for (nu, psi) in s.coefficients().iter().zip(s.signal_modes()) {
        let w = nu * nu;
        if w >= MODE_WEIGHT_CUTOFF {
            weights.push(w);
            modes.push(psi.as_slice());
        }
    }
    HeraldedModes { weights, modes }
}

struct Pair<'a> {
    a: HeraldedModes<'a>,
    b: HeraldedModes<'a>,
    detuning: Vec<f64>,
}

impl<'a> Pair<'a> {
    fn new(a: &'a SchmidtSpectrum, b: &'a SchmidtSpectrum) -> Result<Self> {
        if !a.grid().same_signal_axis(b.grid()) {
            return Err(Error::shape("hom_visibility", "the two sources are sampled on different signal axes"));
        }
        let center = a.grid().signal_center();
        let detuning = a.grid().signal_points().into_iter().map(|w| w - center).collect();
        Ok(Pair {
            a: heralded(a),
            b: heralded(b),
            detuning,
        })
    }

    /// Σ ν²υ² |⟨ψ_n| e^{−iωτ} |χ_n'⟩|².
    fn overlap(&self, tau: f64) -> f64 {
        let phase: Vec<Complex64> = self.detuning.iter().map(|w| Complex64::from_polar(1.0, -w * tau)).collect();
        let shifted: Vec<Vec<Complex64>> = self
            .b
            .modes
            .iter()
            .map(|chi| chi.iter().zip(&phase).map(|(c, p)| c * p).collect())
            .collect();
        let mut total = 0.0;
        for (wa, psi) in self.a.weights.iter().zip(&self.a.modes) {
            for (wb, chi) in self.b.weights.iter().zip(&shifted) {
                let ip: Complex64 = psi.iter().zip(chi).map(|(p, c)| p.conj() * c).sum();
                total += wa * wb * ip.norm_sqr();
            }
        }
        total
    }
}

/// Heralded HOM visibility between the signal photons of two sources.
pub fn hom_visibility(a: &SchmidtSpectrum, b: &SchmidtSpectrum, reflectivity: f64, tau: f64) -> Result<f64> {
    check_reflectivity(reflectivity)?;
    let pair = Pair::new(a, b)?;
    Ok(splitter_prefactor(reflectivity) * pair.overlap(tau))
}

pub fn hom_dip_trace(a: &SchmidtSpectrum, b: &SchmidtSpectrum, cfg: &InterferometerConfig) -> Result<HomTrace> {
    cfg.validate()?;
    let pair = Pair::new(a, b)?;
    let pref = splitter_prefactor(cfg.reflectivity);
    let delays = cfg.delays();
    let alias = std::f64::consts::PI / a.grid().signal_step();
    if cfg.tau_min.abs().max(cfg.tau_max.abs()) > alias {
        log::warn!("delays beyond {alias:.3e} s alias on this signal grid; refine the grid spacing");
    }
    let visibilities: Vec<f64> = delays.par_iter().map(|&tau| pref * pair.overlap(tau)).collect();
    let rates = visibilities.iter().map(|v| 1.0 - v).collect();
    Ok(HomTrace {
        visibility: pref * pair.overlap(0.0),
        delays,
        rates,
        visibilities,
    })
}

/// V(0) for each reflectivity.
pub fn visibility_vs_reflectivity(
    a: &SchmidtSpectrum,
    b: &SchmidtSpectrum,
    reflectivities: &[f64],
) -> Result<Vec<(f64, f64)>> {
    for &r in reflectivities {
        check_reflectivity(r)?;
    }
    let overlap = Pair::new(a, b)?.overlap(0.0);
    Ok(reflectivities.iter().map(|&r| (r, splitter_prefactor(r) * overlap)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct G2Purity {
    /// g²(0)/g²(∞) of one marginal, with g²(∞) = 1.
    pub g2_zero: f64,
    pub purity: f64,
}

/// Thermal-marginal relation g²(0) = 1 + Σν⁴.
pub fn g2_purity(s: &SchmidtSpectrum) -> G2Purity {
    let purity = s.purity();
    G2Purity {
        g2_zero: 1.0 + purity,
        purity,
    }
}

/// Columns `tau_s,c,V`.
pub fn write_hom_trace_csv<W: Write>(trace: &HomTrace, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["tau_s", "c", "V"])?;
    for ((t, c), v) in trace.delays.iter().zip(&trace.rates).zip(&trace.visibilities) {
        csv.write_record([t.to_string(), c.to_string(), v.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Columns `R,V`.
pub fn write_reflectivity_sweep_csv<W: Write>(rows: &[(f64, f64)], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["R", "V"])?;
    for (r, v) in rows {
        csv.write_record([r.to_string(), v.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FrequencyGrid;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(1.25e15, 1.21e15, 4e13, 4e13, 257, 3).unwrap()
    }

    fn gaussian(center: f64, width: f64) -> Vec<Complex64> {
        (0..257)
            .map(|k| Complex64::new((-((k as f64 - center) / width).powi(2) / 2.0).exp(), 0.0))
            .collect()
    }

    fn idler() -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); 3]
    }

    #[test]
    fn identical_pure_sources() {
        let s = SchmidtSpectrum::rank_one(gaussian(128.0, 12.0), idler(), grid()).unwrap();
        assert!((hom_visibility(&s, &s, 0.5, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let v = hom_visibility(&s, &s, 0.625, 0.0).unwrap();
        assert!((v - 0.882_352_941_176_470_6).abs() < 1e-12);
        let sweep = visibility_vs_reflectivity(&s, &s, &[0.0, 0.3, 0.5, 0.7, 1.0]).unwrap();
        assert_eq!(sweep[0].1, 0.0);
        assert_eq!(sweep[4].1, 0.0);
        assert!(sweep.iter().all(|&(_, v)| v <= sweep[2].1));
    }

    #[test]
    fn rank_one_overlap() {
        let a = SchmidtSpectrum::rank_one(gaussian(120.0, 10.0), idler(), grid()).unwrap();
        let b = SchmidtSpectrum::rank_one(gaussian(136.0, 14.0), idler(), grid()).unwrap();
        let (pa, pb) = (&a.signal_modes()[0], &b.signal_modes()[0]);
        let o: Complex64 = pa.iter().zip(pb.iter()).map(|(x, y)| x.conj() * y).sum();
        let v = hom_visibility(&a, &b, 0.5, 0.0).unwrap();
        assert!((v - o.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn far_delay_is_distinguishable() {
        let s = SchmidtSpectrum::rank_one(gaussian(128.0, 12.0), idler(), grid()).unwrap();
        let cfg = InterferometerConfig::new(0.5, -10e-12, 10e-12, 81).unwrap();
        let t = hom_dip_trace(&s, &s, &cfg).unwrap();
        assert!((t.rates[0] - 1.0).abs() < 1e-6);
        assert!((t.rates[80] - 1.0).abs() < 1e-6);
        assert!((t.visibility - 1.0).abs() < 1e-12);
        for k in 0..81 {
            assert!((t.rates[k] - t.rates[80 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_axes_are_rejected() {
        let s = SchmidtSpectrum::rank_one(gaussian(128.0, 12.0), idler(), grid()).unwrap();
        let other = FrequencyGrid::new(1.26e15, 1.21e15, 4e13, 4e13, 257, 3).unwrap();
        let t = SchmidtSpectrum::rank_one(gaussian(128.0, 12.0), idler(), other).unwrap();
        assert!(hom_visibility(&s, &t, 0.5, 0.0).is_err());
    }

    #[test]
    fn g2_of_equal_weight_modes() {
        let g = FrequencyGrid::new(1.0e15, 1.0e15, 1e13, 1e13, 4, 4).unwrap();
        let basis: Vec<Vec<Complex64>> = (0..4)
            .map(|k| (0..4).map(|j| Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        let s = SchmidtSpectrum::from_parts(vec![0.5; 4], basis.clone(), basis, g).unwrap();
        let r = g2_purity(&s);
        assert!((r.g2_zero - 1.25).abs() < 1e-15);
        assert_eq!(r.purity, s.purity());
    }

    #[test]
    fn invalid_config() {
        assert!(InterferometerConfig::new(1.5, 0.0, 1.0, 10).is_err());
        assert!(InterferometerConfig::new(0.5, 1.0, 1.0, 10).is_err());
        assert!(InterferometerConfig::new(0.5, 0.0, 1.0, 1).is_err());
    }
}
