//! One function per subcommand. Each writes its artifacts and returns the
//! summary line.

use std::io::BufReader;
use std::path::Path;

use serde_json::{json, Value};

use qpm_core::counting::{
    coincidence_histogram, estimate_pspdc_joint, estimate_pspdc_single, fourfold_count, reconstruct_jsi,
    simulate_tag_stream, simulate_tof_delays, Channel, CoincidenceHistogram, PspdcEstimate, PulseTrainConfig, TagStream,
    TofSpectrometer,
};
use qpm_core::interference::{g2_purity, hom_dip_trace, visibility_vs_reflectivity, InterferometerConfig};
use qpm_core::model::{nm_from_omega, omega_from_nm, omega_width_from_nm};
use qpm_core::poling::{pmf_from_pattern, sidelobe_report, synthesize_pattern, DEFAULT_NOISE_FLOOR_DB};
use qpm_core::presets::{idler_nm_for_pump, type2_dispersion};
use qpm_core::spectrum::{
    compose_jsa, gaussian_pef, optimize_pump_bandwidth, purity_from_intensity, schmidt_decompose, write_jsa_csv,
    write_jsa_json, write_jsi_csv, write_jsi_json, IntensityMode, PumpSearch,
};
use qpm_core::{
    ComplexMatrix, DispersionBranch, DispersionModel, FrequencyGrid, JointSpectrum, NonlinearityProfile, PolingPattern,
    PumpEnvelope, SchmidtSpectrum,
};

use crate::config::{BranchSection, PolingShape, RunConfig};
use crate::error::CliError;
use crate::output::{read_file, Output};

type Result<T> = std::result::Result<T, CliError>;

/// Leading Schmidt modes written by `schmidt`.
const MODES_WRITTEN: usize = 4;

fn num(v: f64) -> Value {
    json!(v)
}

fn branch(b: &BranchSection) -> DispersionBranch {
    let omega0 = omega_from_nm(b.center_nm);
    let out = DispersionBranch::new(omega0, b.k0_per_m, b.k1_s_per_m, b.k2_s2_per_m, b.k3_s3_per_m);
    match b.span_nm {
        Some(s) => out.with_span(omega_width_from_nm(b.center_nm, s)),
        None => out,
    }
}

/// Grid, dispersion and pump of one configured source.
pub struct SourceSetup {
    pub name: String,
    pub grid: FrequencyGrid,
    pub dispersion: DispersionModel,
    pub pump: PumpEnvelope,
}

pub fn source_setup(cfg: &RunConfig, name: &str) -> Result<SourceSetup> {
    let src = cfg.source(name)?;
    let g = cfg.grid()?;
    let d = cfg.dispersion()?;
    let idler_nm = idler_nm_for_pump(src.center_nm, g.signal_center_nm);
    if !(idler_nm > 0.0) {
        return Err(CliError::Config {
            section: format!("sources.{name}"),
            reason: format!("pump at {} nm cannot emit a signal at {} nm", src.center_nm, g.signal_center_nm),
        });
    }
    let span = omega_width_from_nm(g.signal_center_nm, g.span_nm);
    let grid = FrequencyGrid::new(omega_from_nm(g.signal_center_nm), omega_from_nm(idler_nm), span, span, g.points, g.points)?;
    let dispersion = match (&d.pump, &d.signal, &d.idler) {
        (Some(p), Some(s), Some(i)) => DispersionModel::new(branch(p), branch(s), branch(i))?,
        _ => type2_dispersion(g.signal_center_nm, idler_nm)?,
    };
    Ok(SourceSetup {
        name: name.to_string(),
        grid,
        dispersion,
        pump: PumpEnvelope::new(src.center_nm, src.fwhm_nm).with_chirp(src.chirp_s2),
    })
}

pub fn poling_pattern(cfg: &RunConfig) -> Result<PolingPattern> {
    let p = cfg.poling()?;
    let length = p.periods as f64 * p.period_m;
    Ok(match p.shape {
        PolingShape::Periodic => PolingPattern::periodic(p.period_m, p.periods)?,
        PolingShape::Gaussian => synthesize_pattern(&NonlinearityProfile::gaussian(p.fwhm_fraction * length), length, p.period_m)?,
    })
}

fn pmf(cfg: &RunConfig, setup: &SourceSetup) -> Result<ComplexMatrix> {
    Ok(pmf_from_pattern(&poling_pattern(cfg)?, &setup.dispersion, &setup.grid)?)
}

fn jsa(cfg: &RunConfig, setup: &SourceSetup) -> Result<JointSpectrum> {
    let phi = pmf(cfg, setup)?;
    Ok(compose_jsa(&gaussian_pef(&setup.pump, &setup.grid)?, &phi, &setup.grid)?)
}

fn schmidt(cfg: &RunConfig, name: &str) -> Result<SchmidtSpectrum> {
    let setup = source_setup(cfg, name)?;
    Ok(schmidt_decompose(&jsa(cfg, &setup)?)?)
}

pub fn pmf_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let setup = source_setup(cfg, cfg.selected_source()?)?;
    let pattern = poling_pattern(cfg)?;
    let phi = pmf_from_pattern(&pattern, &setup.dispersion, &setup.grid)?;
    let intensity = phi.map(|z| z.norm_sqr());
    let report = sidelobe_report(&intensity, &setup.grid, DEFAULT_NOISE_FLOOR_DB)?;
    out.document(
        "pmf",
        |w| write_jsi_csv(&setup.grid, &intensity, w),
        |w| write_jsi_json(&setup.grid, &intensity, w),
    )?;
    out.document(
        "poling",
        |w| pattern.write_csv(w),
        |w| {
            let segments: Vec<Value> = pattern
                .boundaries()
                .windows(2)
                .zip(pattern.signs())
                .map(|(b, s)| json!([b[0], b[1], s]))
                .collect();
            serde_json::to_writer(w, &json!({ "nominal_period_m": pattern.period(), "segments": segments }))?;
            Ok(())
        },
    )?;
    let cut = report.antidiagonal_cut.iter().map(|&(x, v)| vec![num(x), num(v)]).collect();
    out.table("sidelobe_cut", &["offset_rad_s", "intensity"], cut)?;
    Ok(format!(
        "first_sidelobe_db={:.2} kept_domains={} source={}",
        report.first_sidelobe_ratio_db,
        pattern.kept_domains(),
        setup.name
    ))
}

pub fn jsa_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let setup = source_setup(cfg, cfg.selected_source()?)?;
    let f = jsa(cfg, &setup)?;
    let s = schmidt_decompose(&f)?;
    let jsi = f.intensity();
    out.document("jsa", |w| write_jsa_csv(&f, w), |w| write_jsa_json(&f, w))?;
    out.document("jsi", |w| write_jsi_csv(f.grid(), &jsi, w), |w| write_jsi_json(f.grid(), &jsi, w))?;
    Ok(format!("purity={:.6} schmidt_number={:.6} source={}", s.purity(), s.schmidt_number(), setup.name))
}

pub fn schmidt_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let name = cfg.selected_source()?;
    let s = schmidt(cfg, name)?;
    let rows = s
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, nu)| vec![json!(k), num(*nu), num(nu * nu)])
        .collect();
    out.table("schmidt_coefficients", &["k", "nu", "weight"], rows)?;
    let shown = s.rank().min(MODES_WRITTEN);
    let mut columns = vec!["signal_nm".to_string()];
    columns.extend((0..shown).map(|k| format!("signal_mode_{k}_abs2")));
    let modes = s
        .grid()
        .signal_points()
        .iter()
        .enumerate()
        .map(|(r, &w)| {
            let mut row = vec![num(nm_from_omega(w))];
            row.extend((0..shown).map(|k| num(s.signal_modes()[k][r].norm_sqr())));
            row
        })
        .collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    out.table("schmidt_modes", &cols, modes)?;
    Ok(format!("purity={:.6} schmidt_number={:.6} rank={} source={name}", s.purity(), s.schmidt_number(), s.rank()))
}

pub fn optimize_pump_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let setup = source_setup(cfg, cfg.selected_source()?)?;
    let phi = pmf(cfg, &setup)?;
    let best = optimize_pump_bandwidth(&phi, &setup.grid, setup.pump.center_nm, &PumpSearch::default())?;
    out.table(
        "optimize_pump",
        &["source", "center_nm", "fwhm_nm", "purity", "evaluations", "at_boundary"],
        vec![vec![
            json!(setup.name),
            num(setup.pump.center_nm),
            num(best.fwhm_nm),
            num(best.purity),
            json!(best.evaluations),
            json!(best.at_boundary),
        ]],
    )?;
    Ok(format!("fwhm_nm={:.4} purity={:.6} source={}", best.fwhm_nm, best.purity, setup.name))
}

/// The two interfering spectra; both are the leading mode pair of the first source in ideal mode.
fn interfering_pair(cfg: &RunConfig) -> Result<(SchmidtSpectrum, SchmidtSpectrum)> {
    let i = cfg.interferometer()?;
    let a = schmidt(cfg, &i.sources[0])?;
    if i.ideal {
        let pure = SchmidtSpectrum::rank_one(a.signal_modes()[0].clone(), a.idler_modes()[0].clone(), a.grid().clone())?;
        return Ok((pure.clone(), pure));
    }
    let b = match i.sources.get(1) {
        Some(name) => schmidt(cfg, name)?,
        None => a.clone(),
    };
    Ok((a, b))
}

pub fn hom_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let i = cfg.interferometer()?;
    let (a, b) = interfering_pair(cfg)?;
    let trace = hom_dip_trace(&a, &b, &InterferometerConfig::new(i.reflectivity, i.tau_min_s, i.tau_max_s, i.n_steps)?)?;
    let rows = trace
        .delays
        .iter()
        .zip(&trace.rates)
        .zip(&trace.visibilities)
        .map(|((t, c), v)| vec![num(*t), num(*c), num(*v)])
        .collect();
    out.table("hom", &["tau_s", "c", "V"], rows)?;
    Ok(format!(
        "visibility={:.6} purity_a={:.6} purity_b={:.6}",
        trace.visibility,
        a.purity(),
        b.purity()
    ))
}

pub fn rsweep_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let i = cfg.interferometer()?;
    let (a, b) = interfering_pair(cfg)?;
    let last = (i.r_steps - 1) as f64;
    let rs: Vec<f64> = (0..i.r_steps).map(|k| k as f64 / last).collect();
    let sweep = visibility_vs_reflectivity(&a, &b, &rs)?;
    let at = visibility_vs_reflectivity(&a, &b, &[0.5, i.reflectivity])?;
    let rows = sweep.iter().map(|&(r, v)| vec![num(r), num(v)]).collect();
    out.table("rsweep", &["R", "V"], rows)?;
    Ok(format!("v_half={:.6} v_config={:.6} reflectivity={}", at[0].1, at[1].1, i.reflectivity))
}

pub fn g2_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let names: Vec<String> = match &cfg.source {
        Some(s) => vec![s.clone()],
        None => cfg.sources.keys().cloned().collect(),
    };
    if names.is_empty() {
        return Err(CliError::MissingSection("sources".into()));
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for name in &names {
        let s = schmidt(cfg, name)?;
        let g = g2_purity(&s);
        rows.push(vec![json!(name), num(g.g2_zero), num(g.purity), num(s.schmidt_number())]);
        summary.push(format!("g2_{name}={:.6}", g.g2_zero));
    }
    out.table("g2", &["source", "g2_zero", "purity", "schmidt_number"], rows)?;
    Ok(summary.join(" "))
}

fn simulate_stream(cfg: &RunConfig) -> Result<TagStream> {
    let c = cfg.counting()?;
    let spectra = c.sources.iter().map(|n| schmidt(cfg, n)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SchmidtSpectrum> = spectra.iter().collect();
    let mut train = PulseTrainConfig::new(c.rate_hz, c.n_pulses, c.pair_probabilities.clone());
    train.signal_efficiency = c.signal_efficiency;
    train.idler_efficiency = c.idler_efficiency;
    train.reflectivity = c.reflectivity;
    train.seed = c.seed;
    train.jitter_s = c.jitter_s;
    Ok(simulate_tag_stream(&train, &refs)?)
}

fn load_stream(cfg: &RunConfig, path: &Path) -> Result<TagStream> {
    let c = cfg.counting()?;
    let bytes = read_file(path)?;
    let stream = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => TagStream::read_csv(BufReader::new(bytes.as_slice()))?,
        _ => TagStream::read_binary(bytes.as_slice(), c.rate_hz, c.n_pulses)?,
    };
    Ok(stream)
}

pub fn simulate_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let stream = simulate_stream(cfg)?;
    let mut bin = Vec::new();
    stream.write_binary(&mut bin)?;
    out.write_raw("stream.bin", &bin)?;
    let rows = Channel::ALL
        .iter()
        .map(|&ch| vec![json!(ch.name()), json!(stream.events(ch).len())])
        .collect();
    out.table("stream_summary", &["channel", "events"], rows)?;
    let fourfolds = fourfold_count(&stream);
    Ok(format!("events={} fourfolds={fourfolds} pulses={}", stream.total_events(), stream.n_pulses()))
}

fn write_histogram(out: &mut Output, stem: &str, h: &CoincidenceHistogram) -> Result<()> {
    out.document(
        stem,
        |w| h.write_csv(w),
        |w| {
            let delays: Vec<f64> = (0..h.counts().len()).map(|k| h.delay(k)).collect();
            let doc = json!({
                "channels": [h.channel_a.name(), h.channel_b.name()],
                "n_pulses": h.n_pulses(),
                "delay_s": delays,
                "count": h.counts(),
            });
            serde_json::to_writer(w, &doc)?;
            Ok(())
        },
    )?;
    Ok(())
}

fn estimate_row(source: &str, estimator: &str, e: &PspdcEstimate) -> Vec<Value> {
    vec![
        json!(source),
        json!(estimator),
        num(e.value),
        num(e.std_error),
        num(e.ratio),
        json!(e.zero_peak),
        num(e.side_mean),
    ]
}

pub fn pspdc_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let c = cfg.counting()?;
    let stream = match &c.stream {
        Some(path) => load_stream(cfg, path)?,
        None => simulate_stream(cfg)?,
    };
    let signal = [Channel::SignalBar, Channel::SignalCross];
    let mut hists = Vec::new();
    for (k, name) in c.sources.iter().enumerate() {
        let h = coincidence_histogram(&stream, Channel::idler_of(k), signal[k], c.bin_width_s, c.window_s)?;
        write_histogram(out, &format!("histogram_{name}"), &h)?;
        hists.push(h);
    }
    let mut rows = Vec::new();
    let singles = hists
        .iter()
        .map(|h| estimate_pspdc_single(h, stream.rate_hz()))
        .collect::<qpm_core::Result<Vec<_>>>()?;
    for (name, e) in c.sources.iter().zip(&singles) {
        rows.push(estimate_row(name, "single", e));
    }
    let reported: Vec<PspdcEstimate> = if hists.len() == 2 {
        let joint = estimate_pspdc_joint(&hists[0], &hists[1], stream.rate_hz(), c.reflectivity)?;
        rows.push(estimate_row(&c.sources[0], "joint", &joint.top));
        rows.push(estimate_row(&c.sources[1], "joint", &joint.bot));
        vec![joint.top, joint.bot]
    } else {
        singles
    };
    out.table(
        "pspdc",
        &["source", "estimator", "p", "std_error", "ratio", "zero_peak", "side_mean"],
        rows,
    )?;
    Ok(c.sources
        .iter()
        .zip(&reported)
        .map(|(n, e)| format!("p_{n}={:.6} err_{n}={:.6}", e.value, e.std_error))
        .collect::<Vec<_>>()
        .join(" "))
}

pub fn tofmap_cmd(cfg: &RunConfig, out: &mut Output) -> Result<String> {
    let t = cfg.tof()?;
    let setup = source_setup(cfg, cfg.selected_source()?)?;
    let f = jsa(cfg, &setup)?;
    let jsi = f.intensity();
    let mut spec = TofSpectrometer::centered(&setup.grid, t.dispersion_ns_per_nm);
    spec.timing_jitter_s = t.jitter_s;
    let delays = simulate_tof_delays(&jsi, &setup.grid, &spec, t.n_pairs, t.seed)?;
    let measured = reconstruct_jsi(&delays, &setup.grid, &spec)?;
    out.document(
        "jsi_tof",
        |w| write_jsi_csv(&setup.grid, &measured, w),
        |w| write_jsi_json(&setup.grid, &measured, w),
    )?;
    let recovered = purity_from_intensity(&measured, IntensityMode::Sqrt)?;
    let model = purity_from_intensity(&jsi, IntensityMode::Sqrt)?;
    Ok(format!(
        "sqrt_jsi_purity={recovered:.6} model_sqrt_jsi_purity={model:.6} pairs={} source={}",
        t.n_pairs, setup.name
    ))
}
