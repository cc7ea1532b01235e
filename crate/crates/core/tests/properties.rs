mod common;

use std::f64::consts::TAU;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use qpm_core::counting::{
    coincidence_histogram, estimate_pspdc_coupled, estimate_pspdc_single, simulate_tag_stream, Channel, PulseTrainConfig,
};
use qpm_core::interference::{g2_purity, hom_visibility};
use qpm_core::model::{DispersionBranch, DispersionModel, FrequencyGrid};
use qpm_core::poling::{pmf_from_pattern, synthesize_pattern, NonlinearityProfile, PolingPattern};
use qpm_core::spectrum::{
    compose_jsa, gaussian_pef, purity, purity_from_intensity, schmidt_decompose, IntensityMode, JointSpectrum, PumpEnvelope,
};
use qpm_core::{presets, ComplexMatrix};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 128,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn naive_wavenumber(b: &DispersionBranch, omega: f64) -> f64 {
    let coefs = [b.k0, b.k1, b.k2, b.k3];
    let mut total = 0.0;
    let mut factorial = 1.0;
    for (n, c) in coefs.iter().enumerate() {
        if n > 0 {
            factorial *= n as f64;
        }
        let mut power = 1.0;
        for _ in 0..n {
            power *= omega - b.omega0;
        }
        total += c * power / factorial;
    }
    total
}

/// |φ| of the Gaussian-poled top waveguide: curved, real, and fixed.
fn ladder_setup() -> &'static (FrequencyGrid, ComplexMatrix) {
    static SETUP: OnceLock<(FrequencyGrid, ComplexMatrix)> = OnceLock::new();
    SETUP.get_or_init(|| {
        let src = presets::top_source();
        let grid = src.grid(96).unwrap();
        let pmf = pmf_from_pattern(&presets::gaussian_poling().unwrap(), &src.dispersion().unwrap(), &grid).unwrap();
        (grid, pmf.map(|z| Complex64::new(z.norm(), 0.0)))
    })
}

fn two_source_stream(seed: u64, p_other: f64) -> qpm_core::counting::TagStream {
    let spectrum = common::two_mode_spectrum();
    let mut cfg = PulseTrainConfig::new(80e6, 200_000, vec![0.03, p_other]);
    cfg.seed = seed;
    cfg.signal_efficiency = 0.5;
    cfg.idler_efficiency = 0.5;
    cfg.record_trigger = false;
    simulate_tag_stream(&cfg, &[&spectrum, &spectrum]).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn polynomial_matches_naive_loop(model in common::random_dispersion(), ws in 1.2e15..1.3e15f64, wi in 1.15e15..1.25e15f64) {
        let dk = model.phase_mismatch(ws, wi).unwrap();
        let naive = naive_wavenumber(&model.pump, ws + wi) - naive_wavenumber(&model.signal, ws) - naive_wavenumber(&model.idler, wi);
        let scale = model.pump.k0.abs() + model.signal.k0.abs() + model.idler.k0.abs();
        prop_assert!((dk - naive).abs() <= 1e-12 * scale, "{dk} vs {naive}");
    }

    #[test]
    fn k0_scaling_is_linear(k in prop::array::uniform3(-1e7..1e7f64), lambda in -10.0..10.0f64, ws in 1e15..2e15f64, wi in 1e15..2e15f64) {
        let model = |s: f64| DispersionModel::new(
            DispersionBranch::constant(2.4e15, s * k[0]),
            DispersionBranch::constant(1.2e15, s * k[1]),
            DispersionBranch::constant(1.2e15, s * k[2]),
        ).unwrap();
        let base = model(1.0).phase_mismatch(ws, wi).unwrap();
        let scaled = model(lambda).phase_mismatch(ws, wi).unwrap();
        prop_assert!((scaled - lambda * base).abs() <= 1e-9 * (1.0 + lambda.abs()) * 3e7);
    }

    #[test]
    fn identical_branches_are_exchange_symmetric(model in common::random_dispersion(), grid in common::grid_with(9, 9)) {
        let mut model = model;
        model.idler = model.signal.clone();
        for &s in &grid.signal_points() {
            for &i in &grid.signal_points() {
                let a = model.phase_mismatch(s, i).unwrap();
                let b = model.phase_mismatch(i, s).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn qpm_offset_is_the_grating_vector(model in common::random_dispersion(), period in 1e-6..1e-5f64, ws in 1.2e15..1.3e15f64, wi in 1.15e15..1.25e15f64) {
        let raw = model.phase_mismatch(ws, wi).unwrap();
        let residual = model.qpm_mismatch(period, ws, wi).unwrap();
        prop_assert!((raw - TAU / period - residual).abs() <= 1e-12 * raw.abs().max(TAU / period));
    }

    #[test]
    fn concatenation_is_linear(
        a in prop::collection::vec(any::<bool>(), 3..60),
        b in prop::collection::vec(any::<bool>(), 3..60),
        period in 1e-6..1e-5f64,
        dk_frac in -3.0..3.0f64,
    ) {
        let (pa, pb) = (PolingPattern::from_kept_domains(period, &a).unwrap(), PolingPattern::from_kept_domains(period, &b).unwrap());
        let joined = pa.concat(&pb).unwrap();
        let dk = dk_frac * TAU / period;
        let expected = pa.response(dk) + Complex64::from_polar(1.0, dk * pa.length()) * pb.response(dk);
        let got = joined.response(dk);
        prop_assert!((got - expected).norm() <= 1e-9 * joined.length(), "{got} vs {expected}");
    }

    #[test]
    fn deleting_domains_never_raises_the_qpm_peak(kept in prop::collection::vec(any::<bool>(), 5..200), period in 1e-6..1e-5f64) {
        let deleted = PolingPattern::from_kept_domains(period, &kept).unwrap();
        let full = PolingPattern::periodic(period, kept.len()).unwrap();
        let dk = TAU / period;
        prop_assert!(deleted.response(dk).norm() <= full.response(dk).norm() * (1.0 + 1e-9));
    }

    #[test]
    fn synthesis_is_deterministic(fwhm_frac in 0.02..1.0f64, periods in 10usize..600, period in 1e-6..1e-5f64) {
        let length = periods as f64 * period;
        let profile = NonlinearityProfile::gaussian(fwhm_frac * length);
        let a = synthesize_pattern(&profile, length, period).unwrap();
        let b = synthesize_pattern(&profile, length, period).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn purity_is_bounded((grid, amp) in common::random_jsa()) {
        let s = schmidt_decompose(&JointSpectrum::new(grid.clone(), amp).unwrap()).unwrap();
        let floor = 1.0 / grid.n_signal().min(grid.n_idler()) as f64;
        let p = purity(&s);
        prop_assert!(p >= floor - 1e-12 && p <= 1.0 + 1e-12, "P = {p}, floor {floor}");
    }

    #[test]
    fn g2_purity_is_the_schmidt_purity((grid, amp) in common::random_jsa()) {
        let s = schmidt_decompose(&JointSpectrum::new(grid, amp).unwrap()).unwrap();
        let g = g2_purity(&s);
        prop_assert_eq!(g.purity, purity(&s));
        prop_assert_eq!(g.g2_zero, 1.0 + purity(&s));
    }

    #[test]
    fn self_interference_at_balance_is_the_purity((grid, amp) in common::random_jsa()) {
        let s = schmidt_decompose(&JointSpectrum::new(grid, amp).unwrap()).unwrap();
        let v = hom_visibility(&s, &s, 0.5, 0.0).unwrap();
        prop_assert!((v - s.purity()).abs() <= 1e-8, "V = {v}, P = {}", s.purity());
    }

    #[test]
    fn purity_degrades_along_a_chirp_ladder(magnitude in 1e-27..2e-25f64, negative in any::<bool>(), fwhm in 0.8..3.0f64) {
        let (grid, pmf) = ladder_setup();
        let sign = if negative { -1.0 } else { 1.0 };
        let mut previous = f64::INFINITY;
        let mut sqrt_reference = None;
        for step in [0.0, 0.25, 0.5, 1.0, 2.0] {
            let pump = PumpEnvelope::new(presets::top_source().pump.center_nm, fwhm).with_chirp(sign * step * magnitude);
            let jsa = compose_jsa(&gaussian_pef(&pump, grid).unwrap(), pmf, grid).unwrap();
            let p = schmidt_decompose(&jsa).unwrap().purity();
            prop_assert!(p <= previous + 1e-12, "purity rose to {p} from {previous} at step {step}");
            previous = p;
            let q = purity_from_intensity(&jsa.intensity(), IntensityMode::Sqrt).unwrap();
            let q0 = *sqrt_reference.get_or_insert(q);
            prop_assert!((q - q0).abs() <= 1e-12, "sqrt-JSI purity moved from {q0} to {q}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..config() })]

    #[test]
    fn coupled_estimator_at_unit_reflectivity_is_the_single_estimator(seed in any::<u64>(), p_other in 0.0..0.05f64) {
        let stream = two_source_stream(seed, 0.02);
        let period = stream.period();
        let hist = coincidence_histogram(&stream, Channel::IdlerTop, Channel::SignalBar, period / 10.0, 5.25 * period).unwrap();
        let single = estimate_pspdc_single(&hist, 80e6).unwrap();
        let coupled = estimate_pspdc_coupled(&hist, 80e6, 1.0, p_other).unwrap();
        prop_assert_eq!(single.value, coupled.value);
        prop_assert_eq!(single.std_error, coupled.std_error);
    }
}
