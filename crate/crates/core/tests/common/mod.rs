#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use qpm_core::counting::{simulate_tag_stream, PulseTrainConfig};
use qpm_core::interference::hom_visibility;
use qpm_core::model::{DispersionBranch, DispersionModel, FrequencyGrid};
use qpm_core::poling::{pmf_from_pattern, PolingPattern};
use qpm_core::presets::SourcePreset;
use qpm_core::spectrum::{compose_jsa, gaussian_pef, marginals, schmidt_decompose, JointSpectrum, SchmidtSpectrum};
use qpm_core::{presets, ComplexMatrix, Matrix};

pub fn grid_with(n_signal: usize, n_idler: usize) -> impl Strategy<Value = FrequencyGrid> {
    (1.2e15..1.3e15f64, 1.1e15..1.2e15f64, 1e12..5e13f64, 1e12..5e13f64).prop_map(move |(sc, ic, ss, is)| {
        FrequencyGrid::new(sc, ic, ss, is, n_signal, n_idler).expect("valid grid")
    })
}

pub fn amplitude(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols).prop_map(move |v| {
        let data = v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        Matrix::from_vec(rows, cols, data).expect("shape")
    })
}

/// A random grid with a random complex amplitude on it.
pub fn random_jsa() -> impl Strategy<Value = (FrequencyGrid, ComplexMatrix)> {
    (3usize..24, 3usize..24).prop_flat_map(|(r, c)| (grid_with(r, c), amplitude(r, c)))
}

/// Two random amplitudes on a shared grid.
pub fn random_jsa_pair() -> impl Strategy<Value = (FrequencyGrid, ComplexMatrix, ComplexMatrix)> {
    (3usize..20, 3usize..20).prop_flat_map(|(r, c)| (grid_with(r, c), amplitude(r, c), amplitude(r, c)))
}

pub fn check_jsa_normalization(grid: &FrequencyGrid, amp: &ComplexMatrix) -> Result<(), TestCaseError> {
    let jsa = JointSpectrum::new(grid.clone(), amp.clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!((jsa.norm() - 1.0).abs() <= 1e-9, "norm {}", jsa.norm());
    let m = marginals(&jsa);
    let s: f64 = m.signal.iter().sum::<f64>() * grid.signal_step();
    let i: f64 = m.idler.iter().sum::<f64>() * grid.idler_step();
    prop_assert!((s - 1.0).abs() <= 1e-8 && (i - 1.0).abs() <= 1e-8, "marginals {s} {i}");
    Ok(())
}

pub fn check_reconstruction(grid: &FrequencyGrid, amp: &ComplexMatrix) -> Result<(), TestCaseError> {
    let jsa = JointSpectrum::new(grid.clone(), amp.clone()).unwrap();
    let s = schmidt_decompose(&jsa).unwrap();
    let scale = grid.cell_area().sqrt();
    let rec = s.reconstruct();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (a, b) in jsa.amplitude().as_slice().iter().zip(rec.as_slice()) {
        diff += (a * scale - b).norm_sqr();
        norm += (a * scale).norm_sqr();
    }
    let rel = (diff / norm).sqrt();
    prop_assert!(rel <= 1e-7, "relative reconstruction error {rel}");
    let sum_sq: f64 = s.coefficients().iter().map(|c| c * c).sum();
    prop_assert!((sum_sq - 1.0).abs() <= 1e-9);
    prop_assert!(s.coefficients().windows(2).all(|w| w[0] >= w[1]));
    for modes in [s.signal_modes(), s.idler_modes()] {
        for a in 0..modes.len() {
            for b in 0..modes.len() {
                let ip: Complex64 = modes[a].iter().zip(&modes[b]).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                prop_assert!((ip - target).norm() <= 1e-8, "modes {a},{b}: {ip}");
            }
        }
    }
    Ok(())
}

fn schmidt_of(grid: &FrequencyGrid, amp: &ComplexMatrix) -> SchmidtSpectrum {
    schmidt_decompose(&JointSpectrum::new(grid.clone(), amp.clone()).unwrap()).unwrap()
}

/// `tau_frac` is the delay as a fraction of the grid's alias-free range.
pub fn check_reflectivity_symmetry(
    grid: &FrequencyGrid,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    r: f64,
    tau_frac: f64,
) -> Result<(), TestCaseError> {
    let (sa, sb) = (schmidt_of(grid, a), schmidt_of(grid, b));
    let tau = tau_frac * std::f64::consts::PI / grid.signal_step();
    let v = hom_visibility(&sa, &sb, r, tau).unwrap();
    let v_mirror = hom_visibility(&sa, &sb, 1.0 - r, tau).unwrap();
    let v_swap = hom_visibility(&sb, &sa, r, -tau).unwrap();
    prop_assert!((v - v_mirror).abs() <= 1e-12, "V(R)={v} V(1-R)={v_mirror}");
    prop_assert!((v - v_swap).abs() <= 1e-12, "V(a,b,τ)={v} V(b,a,-τ)={v_swap}");
    let ceiling = qpm_core::interference::splitter_prefactor(r);
    prop_assert!(v >= -1e-15 && v <= ceiling + 1e-12 && ceiling <= 1.0 + 1e-15);
    Ok(())
}

pub fn check_phase_mask_invariance(
    grid: &FrequencyGrid,
    amp: &ComplexMatrix,
    phases: &[f64],
    on_signal: bool,
) -> Result<(), TestCaseError> {
    let jsa = JointSpectrum::new(grid.clone(), amp.clone()).unwrap();
    let masked = jsa
        .masked(|r, c| Complex64::from_polar(1.0, phases[if on_signal { r } else { c } % phases.len()]))
        .unwrap();
    let (a, b) = (schmidt_decompose(&jsa).unwrap(), schmidt_decompose(&masked).unwrap());
    prop_assert_eq!(a.rank(), b.rank());
    for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
        prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
    }
    Ok(())
}

pub fn random_dispersion() -> impl Strategy<Value = DispersionModel> {
    let branch = |w0: f64| {
        (1e6..1e7f64, 5e-9..1e-8f64, -1e-24..1e-24f64, -1e-38..1e-38f64)
            .prop_map(move |(k0, k1, k2, k3)| DispersionBranch::new(w0, k0, k1, k2, k3))
    };
    (branch(2.45e15), branch(1.25e15), branch(1.2e15))
        .prop_map(|(p, s, i)| DispersionModel::new(p, s, i).expect("finite coefficients"))
}

/// Kept-domain pattern, dispersion, and a small grid around ω ≈ 1.2e15.
pub fn random_pattern_setup() -> impl Strategy<Value = (PolingPattern, DispersionModel, FrequencyGrid)> {
    (
        prop::collection::vec(any::<bool>(), 5..80),
        1e-6..1e-5f64,
        random_dispersion(),
        grid_with(6, 7),
    )
        .prop_map(|(kept, period, model, grid)| {
            let pattern = PolingPattern::from_kept_domains(period, &kept).expect("valid pattern");
            (pattern, model, grid)
        })
}

pub fn check_sign_flip(pattern: &PolingPattern, model: &DispersionModel, grid: &FrequencyGrid) -> Result<(), TestCaseError> {
    let a = pmf_from_pattern(pattern, model, grid).unwrap();
    let b = pmf_from_pattern(&pattern.inverted(), model, grid).unwrap();
    let peak = a.intensity().max().max(1e-300);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        prop_assert!((x + y).norm() <= 1e-12 * peak.sqrt(), "φ not negated: {x} vs {y}");
        prop_assert!((x.norm_sqr() - y.norm_sqr()).abs() <= 1e-12 * peak);
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct StreamCase {
    pub seed: u64,
    pub n_pulses: u64,
    pub p: Vec<f64>,
    pub signal_efficiency: f64,
    pub idler_efficiency: f64,
    pub reflectivity: f64,
    pub jitter_s: f64,
}

pub fn stream_case() -> impl Strategy<Value = StreamCase> {
    (
        any::<u64>(),
        prop_oneof![1_000u64..20_000, 262_000u64..270_000],
        prop::collection::vec(0.001..0.03f64, 1..=2),
        0.05..=1.0f64,
        0.05..=1.0f64,
        0.0..=1.0f64,
        prop_oneof![Just(0.0), 1e-12..1e-9f64],
    )
        .prop_map(|(seed, n_pulses, p, se, ie, r, j)| StreamCase {
            seed,
            n_pulses,
            p,
            signal_efficiency: se,
            idler_efficiency: ie,
            reflectivity: r,
            jitter_s: j,
        })
}

pub fn two_mode_spectrum() -> SchmidtSpectrum {
    let g = FrequencyGrid::new(1.25e15, 1.2e15, 1e13, 1e13, 2, 2).unwrap();
    let e0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let e1 = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    SchmidtSpectrum::from_parts(vec![0.9, 0.3], vec![e0.clone(), e1.clone()], vec![e0, e1], g).unwrap()
}

pub fn check_seed_determinism(case: &StreamCase) -> Result<(), TestCaseError> {
    let spectrum = two_mode_spectrum();
    let sources: Vec<&SchmidtSpectrum> = case.p.iter().map(|_| &spectrum).collect();
    let mut cfg = PulseTrainConfig::new(80e6, case.n_pulses, case.p.clone());
    cfg.seed = case.seed;
    cfg.signal_efficiency = case.signal_efficiency;
    cfg.idler_efficiency = case.idler_efficiency;
    cfg.reflectivity = case.reflectivity;
    cfg.jitter_s = case.jitter_s;
    cfg.record_trigger = false;
    let bytes = || {
        let s = simulate_tag_stream(&cfg, &sources).unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        buf
    };
    let (a, b) = (bytes(), bytes());
    prop_assert!(a == b, "streams differ for seed {}", case.seed);
    Ok(())
}

/// Schmidt decomposition of a bundled source on an n×n grid.
pub fn preset_spectrum(source: &SourcePreset, n: usize) -> (JointSpectrum, SchmidtSpectrum) {
    let grid = source.grid(n).unwrap();
    let pmf = pmf_from_pattern(&presets::gaussian_poling().unwrap(), &source.dispersion().unwrap(), &grid).unwrap();
    let jsa = compose_jsa(&gaussian_pef(&source.pump, &grid).unwrap(), &pmf, &grid).unwrap();
    let s = schmidt_decompose(&jsa).unwrap();
    (jsa, s)
}
