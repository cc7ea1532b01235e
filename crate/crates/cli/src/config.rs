//! TOML run configuration.
//!
//! Every section is optional at parse time; a subcommand asks for the
//! sections it needs and fails with the section name when one is absent.
//! Keys carry their unit as a suffix (`_nm`, `_m`, `_s`, `_hz`).
//! Fields missing inside a present section take the defaults below.
//! Command-line flags override file values, which override defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Source used by single-source subcommands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poling: Option<PolingSection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sources: BTreeMap<String, SourceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferometer: Option<InterferometerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counting: Option<CountingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tof: Option<TofSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Samples per axis.
    pub points: usize,
    pub signal_center_nm: f64,
    /// Full width of each axis, measured on the signal axis.
    pub span_nm: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            points: 256,
            signal_center_nm: 1505.0,
            span_nm: 28.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    /// `"type2"`: the bundled waveguide, phase-matched at each source's centre wavelengths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<BranchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<BranchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler: Option<BranchSection>,
}

/// Taylor coefficients in SI units about `center_nm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSection {
    pub center_nm: f64,
    pub k0_per_m: f64,
    #[serde(default)]
    pub k1_s_per_m: f64,
    #[serde(default)]
    pub k2_s2_per_m: f64,
    #[serde(default)]
    pub k3_s3_per_m: f64,
    /// Trusted window width; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_nm: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolingShape {
    Periodic,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolingSection {
    pub shape: PolingShape,
    pub period_m: f64,
    pub periods: usize,
    /// Gaussian nonlinearity FWHM over waveguide length.
    pub fwhm_fraction: f64,
}

impl Default for PolingSection {
    fn default() -> Self {
        PolingSection {
            shape: PolingShape::Gaussian,
            period_m: 3.1e-6,
            periods: 1100,
            fwhm_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    #[serde(default)]
    pub chirp_s2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerSection {
    pub sources: Vec<String>,
    pub reflectivity: f64,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
    pub n_steps: usize,
    /// Reflectivity samples for `rsweep`, spaced evenly over [0, 1].
    pub r_steps: usize,
    /// Replace both sources by the leading Schmidt mode pair of the first.
    pub ideal: bool,
}

impl Default for InterferometerSection {
    fn default() -> Self {
        InterferometerSection {
            sources: vec!["top".into(), "bot".into()],
            reflectivity: 0.625,
            tau_min_s: -5e-12,
            tau_max_s: 5e-12,
            n_steps: 201,
            r_steps: 101,
            ideal: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountingSection {
    pub sources: Vec<String>,
    pub pair_probabilities: Vec<f64>,
    pub rate_hz: f64,
    pub n_pulses: u64,
    pub signal_efficiency: f64,
    pub idler_efficiency: f64,
    pub reflectivity: f64,
    pub seed: u64,
    pub jitter_s: f64,
    pub bin_width_s: f64,
    pub window_s: f64,
    /// Existing tag stream for `pspdc` (`.bin` or `.csv`); simulated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream: Option<PathBuf>,
}

impl Default for CountingSection {
    fn default() -> Self {
        CountingSection {
            sources: vec!["top".into(), "bot".into()],
            pair_probabilities: vec![0.0291, 0.0282],
            rate_hz: 80e6,
            n_pulses: 10_000_000,
            signal_efficiency: 0.1,
            idler_efficiency: 0.15,
            reflectivity: 0.625,
            seed: 1,
            jitter_s: 0.0,
            bin_width_s: 1.25e-10,
            window_s: 6.5625e-8,
            stream: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TofSection {
    pub dispersion_ns_per_nm: f64,
    pub jitter_s: f64,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for TofSection {
    fn default() -> Self {
        TofSection {
            dispersion_ns_per_nm: 0.5,
            jitter_s: 5e-11,
            n_pairs: 200_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("qpm-out"),
            format: Format::Csv,
        }
    }
}

fn invalid(section: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        section: section.to_string(),
        reason: reason.into(),
    }
}

fn positive(section: &str, key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(section, format!("{key} must be positive, got {v}")))
    }
}

fn fraction(section: &str, key: &str, v: f64, open_low: bool) -> Result<(), CliError> {
    let ok = if open_low { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
    if ok {
        Ok(())
    } else {
        Err(invalid(section, format!("{key} must lie in {}0, 1], got {v}", if open_low { "(" } else { "[" })))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bundled() -> Self {
        RunConfig::parse(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the effective config with the output directory blanked,
    /// so relocating a run does not change its artifacts.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        Sha256::digest(c.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Unit and range checks on every present section.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(g) = &self.grid {
            if g.points < 2 {
                return Err(invalid("grid", "points must be at least 2"));
            }
            positive("grid", "signal_center_nm", g.signal_center_nm)?;
            positive("grid", "span_nm", g.span_nm)?;
        }
        if let Some(d) = &self.dispersion {
            let explicit = [&d.pump, &d.signal, &d.idler];
            match (&d.preset, explicit.iter().filter(|b| b.is_some()).count()) {
                (Some(p), 0) if p == "type2" => {}
                (Some(p), 0) => return Err(invalid("dispersion", format!("unknown preset '{p}', expected \"type2\""))),
                (None, 3) => {}
                _ => return Err(invalid("dispersion", "give either preset or all of pump, signal and idler")),
            }
            for (name, b) in ["pump", "signal", "idler"].iter().zip(explicit) {
                if let Some(b) = b {
                    let section = format!("dispersion.{name}");
                    positive(&section, "center_nm", b.center_nm)?;
                    let coefs = [b.k0_per_m, b.k1_s_per_m, b.k2_s2_per_m, b.k3_s3_per_m];
                    if coefs.iter().any(|c| !c.is_finite()) {
                        return Err(invalid(&section, "coefficients must be finite"));
                    }
                    if let Some(s) = b.span_nm {
                        positive(&section, "span_nm", s)?;
                    }
                }
            }
        }
        if let Some(p) = &self.poling {
            positive("poling", "period_m", p.period_m)?;
            if p.periods == 0 {
                return Err(invalid("poling", "periods must be at least 1"));
            }
            if p.shape == PolingShape::Gaussian {
                fraction("poling", "fwhm_fraction", p.fwhm_fraction, true)?;
            }
        }
        for (name, s) in &self.sources {
            let section = format!("sources.{name}");
            positive(&section, "center_nm", s.center_nm)?;
            positive(&section, "fwhm_nm", s.fwhm_nm)?;
            if !s.chirp_s2.is_finite() {
                return Err(invalid(&section, "chirp_s2 must be finite"));
            }
        }
        if let Some(i) = &self.interferometer {
            if i.sources.is_empty() || i.sources.len() > 2 {
                return Err(invalid("interferometer", "sources must name one or two sources"));
            }
            fraction("interferometer", "reflectivity", i.reflectivity, false)?;
            if !(i.tau_min_s.is_finite() && i.tau_max_s.is_finite() && i.tau_min_s <= i.tau_max_s) {
                return Err(invalid("interferometer", "need finite tau_min_s <= tau_max_s"));
            }
            if i.n_steps == 0 {
                return Err(invalid("interferometer", "n_steps must be at least 1"));
            }
            if i.r_steps < 2 {
                return Err(invalid("interferometer", "r_steps must be at least 2"));
            }
        }
        if let Some(c) = &self.counting {
            if c.sources.is_empty() || c.sources.len() > 2 {
                return Err(invalid("counting", "sources must name one or two sources"));
            }
            if c.pair_probabilities.len() != c.sources.len() {
                return Err(invalid("counting", "pair_probabilities needs one entry per source"));
            }
            if c.pair_probabilities.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(invalid("counting", "pair_probabilities must lie in (0, 1)"));
            }
            positive("counting", "rate_hz", c.rate_hz)?;
            if c.n_pulses == 0 {
                return Err(invalid("counting", "n_pulses must be at least 1"));
            }
            fraction("counting", "signal_efficiency", c.signal_efficiency, true)?;
            fraction("counting", "idler_efficiency", c.idler_efficiency, true)?;
            fraction("counting", "reflectivity", c.reflectivity, false)?;
            if !(c.jitter_s >= 0.0 && c.jitter_s.is_finite()) {
                return Err(invalid("counting", "jitter_s must be nonnegative"));
            }
            positive("counting", "bin_width_s", c.bin_width_s)?;
            positive("counting", "window_s", c.window_s)?;
        }
        let unresolved = |section: &str, names: &[String]| -> Result<(), CliError> {
            match names.iter().find(|n| !self.sources.contains_key(*n)) {
                Some(n) => Err(invalid(section, format!("source '{n}' has no [sources.{n}] section"))),
                None => Ok(()),
            }
        };
        if let Some(i) = &self.interferometer {
            unresolved("interferometer", &i.sources)?;
        }
        if let Some(c) = &self.counting {
            if c.stream.is_none() {
                unresolved("counting", &c.sources)?;
            }
        }
        if let Some(t) = &self.tof {
            if t.dispersion_ns_per_nm == 0.0 || !t.dispersion_ns_per_nm.is_finite() {
                return Err(invalid("tof", "dispersion_ns_per_nm must be finite and nonzero"));
            }
            if !(t.jitter_s >= 0.0 && t.jitter_s.is_finite()) {
                return Err(invalid("tof", "jitter_s must be nonnegative"));
            }
            if t.n_pairs == 0 {
                return Err(invalid("tof", "n_pairs must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<&GridSection, CliError> {
        self.grid.as_ref().ok_or(CliError::MissingSection("grid".into()))
    }

    pub fn dispersion(&self) -> Result<&DispersionSection, CliError> {
        self.dispersion.as_ref().ok_or(CliError::MissingSection("dispersion".into()))
    }

    pub fn poling(&self) -> Result<&PolingSection, CliError> {
        self.poling.as_ref().ok_or(CliError::MissingSection("poling".into()))
    }

    pub fn selected_source(&self) -> Result<&str, CliError> {
        self.source
            .as_deref()
            .ok_or_else(|| invalid("source", "no source selected; set `source` or pass --source"))
    }

    pub fn source(&self, name: &str) -> Result<&SourceSection, CliError> {
        self.sources
            .get(name)
            .ok_or_else(|| CliError::MissingSection(format!("sources.{name}")))
    }

    pub fn interferometer(&self) -> Result<&InterferometerSection, CliError> {
        self.interferometer
            .as_ref()
            .ok_or(CliError::MissingSection("interferometer".into()))
    }

    pub fn counting(&self) -> Result<&CountingSection, CliError> {
        self.counting.as_ref().ok_or(CliError::MissingSection("counting".into()))
    }

    pub fn tof(&self) -> Result<&TofSection, CliError> {
        self.tof.as_ref().ok_or(CliError::MissingSection("tof".into()))
    }
}
