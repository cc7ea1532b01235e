//! Monte-Carlo generation of time-tag streams from one or two pulsed pair sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal};
use rayon::prelude::*;

use super::stream::{Channel, TagStream};
use crate::error::{Error, Result};
use crate::spectrum::SchmidtSpectrum;

/// Largest pair number drawn per source and pulse.
pub const MAX_PAIRS: usize = 3;
/// Largest probability mass the truncation at [`MAX_PAIRS`] may discard.
pub const MAX_TRUNCATED_MASS: f64 = 1e-6;

/// Pulses simulated per independently seeded block.
const BLOCK: u64 = 1 << 18;

#[derive(Clone, Debug, PartialEq)]
pub struct PulseTrainConfig {
    pub rate_hz: f64,
    pub n_pulses: u64,
    /// Mean number of pairs per pulse, one entry per source (top, then bottom).
    pub pair_probabilities: Vec<f64>,
    pub signal_efficiency: f64,
    pub idler_efficiency: f64,
    /// Probability that a signal photon leaves by its own source's port
    /// (top → bar, bottom → cross).
    pub reflectivity: f64,
    pub seed: u64,
    /// Gaussian timing jitter per detection, s.
    pub jitter_s: f64,
    /// Emit one trigger tag per pulse.
    pub record_trigger: bool,
}

impl PulseTrainConfig {
    pub fn new(rate_hz: f64, n_pulses: u64, pair_probabilities: Vec<f64>) -> Self {
        PulseTrainConfig {
            rate_hz,
            n_pulses,
            pair_probabilities,
            signal_efficiency: 1.0,
            idler_efficiency: 1.0,
            reflectivity: 1.0,
            seed: 0,
            jitter_s: 0.0,
            record_trigger: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("pulse train", reason.to_string()));
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return bad("repetition rate must be positive");
        }
        if self.pair_probabilities.is_empty() || self.pair_probabilities.len() > 2 {
            return bad("one or two sources are supported");
        }
        if self.pair_probabilities.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("pair probabilities must lie in (0, 1)");
        }
        for eta in [self.signal_efficiency, self.idler_efficiency] {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad("efficiencies must lie in (0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return bad("reflectivity must lie in [0, 1]");
        }
        if !(self.jitter_s >= 0.0 && self.jitter_s.is_finite()) {
            return bad("jitter must be nonnegative");
        }
        Ok(())
    }
}

/// Distribution of the pair number N ∈ {0, …, MAX_PAIRS} for independent
/// thermal modes with mean `mean·w_k` each.
pub fn pair_number_distribution(mean: f64, weights: &[f64]) -> Result<[f64; MAX_PAIRS + 1]> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("pair statistics", "mode weights sum to zero"));
    }
    let mut dist = [0.0; MAX_PAIRS + 1];
    dist[0] = 1.0;
    for w in weights {
        let m = mean * w / total;
        if m == 0.0 {
            continue;
        }
        let x = m / (1.0 + m);
        let mode: Vec<f64> = (0..=MAX_PAIRS).map(|n| x.powi(n as i32) / (1.0 + m)).collect();
        let mut next = [0.0; MAX_PAIRS + 1];
        for (a, pa) in dist.iter().enumerate() {
            for (b, pb) in mode.iter().enumerate().take(MAX_PAIRS + 1 - a) {
                next[a + b] += pa * pb;
            }
        }
        dist = next;
    }
    let truncated = 1.0 - dist.iter().sum::<f64>();
    if truncated > MAX_TRUNCATED_MASS {
        return Err(Error::numeric(
            "simulate_tag_stream",
            format!(
                "P(N > {MAX_PAIRS}) = {truncated:.3e} exceeds {MAX_TRUNCATED_MASS:e} at mean pair number {mean}; use a smaller pair probability"
            ),
        ));
    }
    Ok(dist)
}

/// One pulse that emitted at least one pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairEmission {
    pub pulse: u64,
    pub source: usize,
    pub pairs: u32,
}

pub fn simulate_tag_stream(cfg: &PulseTrainConfig, sources: &[&SchmidtSpectrum]) -> Result<TagStream> {
    cfg.validate()?;
    if sources.len() != cfg.pair_probabilities.len() {
        return Err(Error::invalid("pulse train", "need one Schmidt spectrum per pair probability"));
    }
    let dists: Vec<[f64; MAX_PAIRS + 1]> = sources
        .iter()
        .zip(&cfg.pair_probabilities)
        .map(|(s, &p)| {
            let weights: Vec<f64> = s.coefficients().iter().map(|c| c * c).collect();
            pair_number_distribution(p, &weights)
        })
        .collect::<Result<_>>()?;
    let n_blocks = cfg.n_pulses.div_ceil(BLOCK);
    let blocks: Vec<[Vec<f64>; 4]> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let start = b * BLOCK;
            let len = BLOCK.min(cfg.n_pulses - start);
            let emissions = draw_emissions(&dists, start, len, &mut rng);
            detect(cfg, &emissions, &mut rng)
        })
        .collect();
    assemble(cfg, blocks)
}

/// Stream produced by an explicit list of emissions, for controlled scenarios.
pub fn simulate_with_emissions(cfg: &PulseTrainConfig, emissions: &[PairEmission]) -> Result<TagStream> {
    cfg.validate()?;
    let mut sorted = emissions.to_vec();
    sorted.sort();
    if let Some(e) = sorted.iter().find(|e| e.pulse >= cfg.n_pulses || e.source >= cfg.pair_probabilities.len()) {
        return Err(Error::invalid("pair emission", format!("pulse {} / source {} out of range", e.pulse, e.source)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let block = detect(cfg, &sorted, &mut rng);
    assemble(cfg, vec![block])
}

fn draw_emissions(dists: &[[f64; MAX_PAIRS + 1]], start: u64, len: u64, rng: &mut ChaCha8Rng) -> Vec<PairEmission> {
    let mut out = Vec::new();
    for (source, dist) in dists.iter().enumerate() {
        let busy: f64 = dist[1..].iter().sum();
        if !(busy > 0.0) {
            continue;
        }
        let gaps = Geometric::new(busy.min(1.0)).expect("probability in (0, 1]");
        let mut pos = 0u64;
        loop {
            pos = pos.saturating_add(gaps.sample(rng));
            if pos >= len {
                break;
            }
            let mut u = rng.random::<f64>() * busy;
            let mut pairs = MAX_PAIRS as u32;
            for (n, &pn) in dist.iter().enumerate().skip(1) {
                if u < pn {
                    pairs = n as u32;
                    break;
                }
                u -= pn;
            }
            out.push(PairEmission {
                pulse: start + pos,
                source,
                pairs,
            });
            pos += 1;
        }
    }
    out.sort();
    out
}

const DETECTORS: [Channel; 4] = [Channel::SignalBar, Channel::SignalCross, Channel::IdlerTop, Channel::IdlerBot];

/// Threshold detection: each detector clicks at most once per pulse.
fn detect(cfg: &PulseTrainConfig, emissions: &[PairEmission], rng: &mut ChaCha8Rng) -> [Vec<f64>; 4] {
    let mut out: [Vec<f64>; 4] = Default::default();
    let jitter = (cfg.jitter_s > 0.0).then(|| Normal::new(0.0, cfg.jitter_s).expect("finite jitter"));
    let end = cfg.n_pulses as f64 / cfg.rate_hz;
    let mut k = 0;
    while k < emissions.len() {
        let pulse = emissions[k].pulse;
        let mut clicks = [false; 4];
        while k < emissions.len() && emissions[k].pulse == pulse {
            let e = emissions[k];
            let own = if e.source == 0 { 0 } else { 1 };
            for _ in 0..e.pairs {
                if rng.random::<f64>() < cfg.signal_efficiency {
                    let port = if rng.random::<f64>() < cfg.reflectivity { own } else { 1 - own };
                    clicks[port] = true;
                }
                if rng.random::<f64>() < cfg.idler_efficiency {
                    clicks[2 + e.source] = true;
                }
            }
            k += 1;
        }
        let t = pulse as f64 / cfg.rate_hz;
        for (ch, _) in clicks.iter().enumerate().filter(|(_, &c)| c) {
            let tt = match &jitter {
                Some(n) => (t + n.sample(rng)).clamp(0.0, end),
                None => t,
            };
            out[ch].push(tt);
        }
    }
    out
}

fn assemble(cfg: &PulseTrainConfig, blocks: Vec<[Vec<f64>; 4]>) -> Result<TagStream> {
    let mut events: [Vec<f64>; 5] = Default::default();
    for block in blocks {
        for (ch, ts) in DETECTORS.iter().zip(block) {
            events[*ch as usize].extend(ts);
        }
    }
    if cfg.jitter_s > 0.0 {
        for ts in &mut events {
            ts.sort_by(f64::total_cmp);
        }
    }
    if cfg.record_trigger {
        events[Channel::Trigger as usize] = (0..cfg.n_pulses).map(|k| k as f64 / cfg.rate_hz).collect();
    }
    TagStream::new(cfg.rate_hz, cfg.n_pulses, events)
}
