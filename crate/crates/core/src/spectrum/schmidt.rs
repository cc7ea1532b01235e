//! Schmidt decomposition of a joint spectrum and heralded-purity estimators.

use num_complex::Complex64;

use super::JointSpectrum;
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Matrix, RealMatrix};
use crate::model::FrequencyGrid;

/// Schmidt coefficients below this are dropped.
pub const TRUNCATION: f64 = 1e-12;

/// f = Σ ν_n ψ_n(ω_s) φ_n(ω_i) with orthonormal discrete modes.
///
/// Modes are normalized as vectors (Σ_k |ψ_n[k]|² = 1); multiply by
/// 1/√Δω to recover continuum normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    coefficients: Vec<f64>,
    signal_modes: Vec<Vec<Complex64>>,
    idler_modes: Vec<Vec<Complex64>>,
    grid: FrequencyGrid,
}

impl SchmidtSpectrum {
    /// Assembles a spectrum from explicit parts. Coefficients are sorted,
    /// truncated and renormalized; modes must be orthonormal within 1e-8.
    pub fn from_parts(
        coefficients: Vec<f64>,
        signal_modes: Vec<Vec<Complex64>>,
        idler_modes: Vec<Vec<Complex64>>,
        grid: FrequencyGrid,
    ) -> Result<Self> {
        let n = coefficients.len();
        if n == 0 || signal_modes.len() != n || idler_modes.len() != n {
            return Err(Error::invalid("schmidt spectrum", "one signal and one idler mode per coefficient"));
        }
        if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("schmidt spectrum", "coefficients must be finite and nonnegative"));
        }
        if signal_modes.iter().any(|m| m.len() != grid.n_signal()) || idler_modes.iter().any(|m| m.len() != grid.n_idler()) {
            return Err(Error::shape("schmidt spectrum", "mode length does not match the grid"));
        }
        for modes in [&signal_modes, &idler_modes] {
            for a in 0..n {
                for b in a..n {
                    let ip: Complex64 = modes[a].iter().zip(&modes[b]).map(|(x, y)| x.conj() * y).sum();
                    let target = if a == b { 1.0 } else { 0.0 };
                    if (ip - target).norm() > 1e-8 {
                        return Err(Error::invalid("schmidt spectrum", format!("modes {a} and {b} are not orthonormal")));
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| coefficients[b].total_cmp(&coefficients[a]));
        let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::invalid("schmidt spectrum", "all coefficients are zero"));
        }
        let mut out = SchmidtSpectrum {
            coefficients: Vec::new(),
            signal_modes: Vec::new(),
            idler_modes: Vec::new(),
            grid,
        };
        for k in order {
            let c = coefficients[k] / norm;
            if c < TRUNCATION {
                continue;
            }
            out.coefficients.push(c);
            out.signal_modes.push(signal_modes[k].clone());
            out.idler_modes.push(idler_modes[k].clone());
        }
        out.renormalize();
        Ok(out)
    }

    /// Single mode pair with ν₀ = 1.
    pub fn rank_one(signal: Vec<Complex64>, idler: Vec<Complex64>, grid: FrequencyGrid) -> Result<Self> {
        let ns = signal.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let ni = idler.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(ns > 0.0 && ni > 0.0) {
            return Err(Error::invalid("schmidt spectrum", "zero mode"));
        }
        SchmidtSpectrum::from_parts(
            vec![1.0],
            vec![signal.into_iter().map(|z| z / ns).collect()],
            vec![idler.into_iter().map(|z| z / ni).collect()],
            grid,
        )
    }

    fn renormalize(&mut self) {
        let norm = self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut self.coefficients {
            *c /= norm;
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn signal_modes(&self) -> &[Vec<Complex64>] {
        &self.signal_modes
    }

    pub fn idler_modes(&self) -> &[Vec<Complex64>] {
        &self.idler_modes
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// Σν⁴.
    pub fn purity(&self) -> f64 {
        self.coefficients.iter().map(|c| c.powi(4)).sum()
    }

    /// K = 1/Σν⁴.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.purity()
    }

    /// Σ ν_n ψ_n φ_nᵀ in discrete normalization (unit Frobenius norm).
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (rows, cols) = (self.grid.n_signal(), self.grid.n_idler());
        let mut out = Matrix::filled(rows, cols, Complex64::new(0.0, 0.0));
        for ((c, psi), phi) in self.coefficients.iter().zip(&self.signal_modes).zip(&self.idler_modes) {
            for (r, p) in psi.iter().enumerate() {
                let scaled = p * c;
                let row = &mut out.as_mut_slice()[r * cols..(r + 1) * cols];
                for (v, q) in row.iter_mut().zip(phi) {
                    *v += scaled * q;
                }
            }
        }
        out
    }

    /// Signal and idler roles exchanged.
    pub fn transposed(&self) -> Self {
        SchmidtSpectrum {
            coefficients: self.coefficients.clone(),
            signal_modes: self.idler_modes.clone(),
            idler_modes: self.signal_modes.clone(),
            grid: self.grid.transposed(),
        }
    }
}

/// Singular value decomposition of the normalized amplitude.
pub fn schmidt_decompose(jsa: &JointSpectrum) -> Result<SchmidtSpectrum> {
    let amp = jsa.amplitude();
    if amp.as_slice().iter().any(|z| !z.is_finite()) {
        return Err(Error::numeric("schmidt_decompose", "non-finite entries"));
    }
    let scale = jsa.grid().cell_area().sqrt();
    let mut m = amp.to_faer();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= scale;
        }
    }
    let svd = m
        .thin_svd()
        .map_err(|e| Error::numeric("schmidt_decompose", format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let total = (0..s.nrows()).map(|k| s[k].re.powi(2)).sum::<f64>().sqrt();
    let mut coefficients = Vec::new();
    let mut signal_modes = Vec::new();
    let mut idler_modes = Vec::new();
    for k in 0..s.nrows() {
        let nu = s[k].re / total;
        if nu < TRUNCATION {
            break;
        }
        coefficients.push(nu);
        signal_modes.push((0..u.nrows()).map(|r| u[(r, k)]).collect());
        // A = U S Vᴴ, so the idler mode multiplying ψ_k without conjugation is conj(V[:, k]).
        idler_modes.push((0..v.nrows()).map(|r| v[(r, k)].conj()).collect());
    }
    if coefficients.is_empty() {
        return Err(Error::numeric("schmidt_decompose", "no singular value above truncation"));
    }
    let mut out = SchmidtSpectrum {
        coefficients,
        signal_modes,
        idler_modes,
        grid: jsa.grid().clone(),
    };
    out.renormalize();
    Ok(out)
}

/// Σν⁴ of a Schmidt spectrum.
pub fn purity(s: &SchmidtSpectrum) -> f64 {
    s.purity()
}

/// Σν⁴ from the singular values of any amplitude matrix, normalization
/// not required. Skips the mode vectors, so it is the cheap path used
/// inside optimization loops.
pub fn singular_value_purity(amplitude: &ComplexMatrix) -> Result<f64> {
    if amplitude.as_slice().iter().any(|z| !z.is_finite()) {
        return Err(Error::numeric("purity", "non-finite entries"));
    }
    let sv = amplitude
        .to_faer()
        .singular_values()
        .map_err(|e| Error::numeric("purity", format!("SVD did not converge: {e:?}")))?;
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::numeric("purity", "zero amplitude"));
    }
    let norm = total.sqrt();
    Ok(sv.iter().map(|s| s / norm).filter(|&nu| nu >= TRUNCATION).map(|nu| nu.powi(4)).sum())
}

/// Tr(ρ²)/Tr(ρ)² with ρ = AᴴA. Equals Σν⁴ without computing an SVD.
pub fn purity_from_gram(amplitude: &ComplexMatrix) -> Result<f64> {
    let a = amplitude.to_faer();
    let gram = a.adjoint() * &a;
    let trace: f64 = (0..gram.nrows()).map(|k| gram[(k, k)].re).sum();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::numeric("purity", "zero or non-finite amplitude"));
    }
    let mut frob = 0.0;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            frob += gram[(i, j)].norm_sqr();
        }
    }
    Ok(frob / (trace * trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntensityMode {
    /// Decompose √JSI, discarding all phase information.
    Sqrt,
    /// Decompose |f|² directly. Biased; kept for comparison.
    Raw,
}

/// Purity estimated from a measured joint spectral intensity.
pub fn purity_from_intensity(jsi: &RealMatrix, mode: IntensityMode) -> Result<f64> {
    if jsi.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("purity_from_intensity", "non-finite entries"));
    }
    if jsi.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::numeric("purity_from_intensity", "intensity has negative entries"));
    }
    let amp = jsi.map(|&v| {
        Complex64::new(
            match mode {
                IntensityMode::Sqrt => v.sqrt(),
                IntensityMode::Raw => v,
            },
            0.0,
        )
    });
    if !(amp.norm_sqr() > 0.0) {
        return Err(Error::numeric("purity_from_intensity", "intensity is identically zero"));
    }
    singular_value_purity(&amp)
}
