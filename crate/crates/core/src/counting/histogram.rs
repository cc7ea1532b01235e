//! Coincidence histograms and pair-probability estimators from peak ratios.

use std::io::Write;

use super::stream::{Channel, TagStream};
use crate::error::{Error, Result};

/// Side peaks required by the ratio estimators.
pub const MIN_SIDE_PEAKS: usize = 5;

/// Coincidences between two channels binned by delay t_b − t_a.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceHistogram {
    pub channel_a: Channel,
    pub channel_b: Channel,
    bin_width: f64,
    counts: Vec<u64>,
    zero_bin: usize,
    n_pulses: u64,
}

impl CoincidenceHistogram {
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn zero_bin(&self) -> usize {
        self.zero_bin
    }

    pub fn n_pulses(&self) -> u64 {
        self.n_pulses
    }

    /// Delay at the centre of bin `k`.
    pub fn delay(&self, k: usize) -> f64 {
        (k as f64 - self.zero_bin as f64) * self.bin_width
    }

    /// Largest delay magnitude covered by the bins.
    pub fn half_range(&self) -> f64 {
        self.zero_bin as f64 * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sum of bins whose centres lie within `half_width` of `center`.
    pub fn integrate(&self, center: f64, half_width: f64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(k, _)| (self.delay(*k) - center).abs() <= half_width)
            .map(|(_, c)| c)
            .sum()
    }

    /// Columns `delay_s,count`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "# channels={},{} n_pulses={}", self.channel_a, self.channel_b, self.n_pulses)?;
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["delay_s", "count"])?;
        for (k, c) in self.counts.iter().enumerate() {
            csv.write_record([self.delay(k).to_string(), c.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Bidirectional two-pointer histogram over |t_b − t_a| ≤ `window`, rounded
/// out to whole bins centred on multiples of `bin_width`.
pub fn coincidence_histogram(
    stream: &TagStream,
    a: Channel,
    b: Channel,
    bin_width: f64,
    window: f64,
) -> Result<CoincidenceHistogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid("coincidence histogram", "bin width must be positive"));
    }
    if bin_width > stream.period() / 4.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "coincidence histogram",
            format!("bin width {bin_width:e} s exceeds a quarter pulse period"),
        ));
    }
    if !(window >= 0.0 && window.is_finite()) {
        return Err(Error::invalid("coincidence histogram", "window must be nonnegative"));
    }
    let half = (window / bin_width).ceil() as usize;
    let mut counts = vec![0u64; 2 * half + 1];
    let reach = (half as f64 + 0.5) * bin_width;
    let (ta, tb) = (stream.events(a), stream.events(b));
    let mut lo = 0;
    for &t in ta {
        while lo < tb.len() && tb[lo] < t - reach {
            lo += 1;
        }
        for &u in &tb[lo..] {
            let d = u - t;
            if d > reach {
                break;
            }
            let k = (d / bin_width).round() as i64 + half as i64;
            if (0..counts.len() as i64).contains(&k) {
                counts[k as usize] += 1;
            }
        }
    }
    Ok(CoincidenceHistogram {
        channel_a: a,
        channel_b: b,
        bin_width,
        counts,
        zero_bin: half,
        n_pulses: stream.n_pulses(),
    })
}

/// Ratio of mean side-peak to central-peak coincidences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PspdcEstimate {
    pub value: f64,
    pub std_error: f64,
    /// The ratio D before any inversion.
    pub ratio: f64,
    pub ratio_std_error: f64,
    pub zero_peak: u64,
    pub side_peaks: usize,
    pub side_mean: f64,
}

/// Central-peak count and the counts of every side peak fully inside the histogram.
pub fn peak_counts(hist: &CoincidenceHistogram, rate_hz: f64) -> Result<(u64, Vec<u64>)> {
    if !(rate_hz > 0.0) {
        return Err(Error::invalid("peak integration", "repetition rate must be positive"));
    }
    let period = 1.0 / rate_hz;
    let half_width = period / 4.0;
    let zero = hist.integrate(0.0, half_width);
    let mut sides = Vec::new();
    let mut n = 1;
    while n as f64 * period + half_width <= hist.half_range() * (1.0 + 1e-12) {
        sides.push(hist.integrate(n as f64 * period, half_width));
        sides.push(hist.integrate(-(n as f64) * period, half_width));
        n += 1;
    }
    Ok((zero, sides))
}

/// Binomial variance of a count out of `n` trials.
fn binomial_var(count: f64, n: f64) -> f64 {
    count * (1.0 - count / n).max(0.0)
}

/// D = ⟨C_{n≠0}⟩ / C_0, the pair probability per pulse at first order.
pub fn estimate_pspdc_single(hist: &CoincidenceHistogram, rate_hz: f64) -> Result<PspdcEstimate> {
    let (zero, sides) = peak_counts(hist, rate_hz)?;
    if zero == 0 {
        return Err(Error::numeric("estimate_pspdc_single", "central coincidence peak is empty"));
    }
    if sides.len() < MIN_SIDE_PEAKS {
        return Err(Error::numeric(
            "estimate_pspdc_single",
            format!("{} side peaks in the window, need at least {MIN_SIDE_PEAKS}", sides.len()),
        ));
    }
    let n = hist.n_pulses().max(1) as f64;
    let side_total: f64 = sides.iter().map(|&c| c as f64).sum();
    let side_mean = side_total / sides.len() as f64;
    let c0 = zero as f64;
    let d = side_mean / c0;
    let side_var: f64 = sides.iter().map(|&c| binomial_var(c as f64, n)).sum();
    let rel_var = binomial_var(c0, n) / (c0 * c0) + if side_total > 0.0 { side_var / (side_total * side_total) } else { 0.0 };
    let err = if side_total > 0.0 { d * rel_var.sqrt() } else { 1.0 / (c0 * sides.len() as f64) };
    Ok(PspdcEstimate {
        value: d,
        std_error: err,
        ratio: d,
        ratio_std_error: err,
        zero_peak: zero,
        side_peaks: sides.len(),
        side_mean,
    })
}

/// D = (R·P_i + (1−R)·P_j)/(R + (1−R)·P_j) for the source whose signal
/// leaves by its own port with probability R.
pub fn coupled_ratio(p_i: f64, p_j: f64, reflectivity: f64) -> f64 {
    let t = 1.0 - reflectivity;
    (reflectivity * p_i + t * p_j) / (reflectivity + t * p_j)
}

/// Solves the coupled ratio for P_i.
pub fn invert_coupled_ratio(d: f64, reflectivity: f64, p_other: f64) -> Result<f64> {
    if !(reflectivity > 0.0 && reflectivity <= 1.0) {
        return Err(Error::invalid("coupled estimator", "reflectivity must lie in (0, 1]"));
    }
    if !(0.0..1.0).contains(&p_other) {
        return Err(Error::invalid("coupled estimator", "other source probability must lie in [0, 1)"));
    }
    let t = 1.0 - reflectivity;
    Ok((d * (reflectivity + t * p_other) - t * p_other) / reflectivity)
}

/// Single-histogram inversion with the other source's probability held fixed.
pub fn estimate_pspdc_coupled(hist: &CoincidenceHistogram, rate_hz: f64, reflectivity: f64, p_other: f64) -> Result<PspdcEstimate> {
    let single = estimate_pspdc_single(hist, rate_hz)?;
    let value = invert_coupled_ratio(single.ratio, reflectivity, p_other)?;
    let slope = (reflectivity + (1.0 - reflectivity) * p_other) / reflectivity;
    Ok(PspdcEstimate {
        value,
        std_error: slope * single.ratio_std_error,
        ..single
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointPspdc {
    pub top: PspdcEstimate,
    pub bot: PspdcEstimate,
    pub iterations: usize,
}

pub const JOINT_TOLERANCE: f64 = 1e-10;
pub const JOINT_MAX_ITERATIONS: usize = 1000;

/// Solves both coupled ratios for (P_top, P_bot) by Gauss-Seidel iteration
/// starting from the single-source ratios.
///
/// `hist_top` pairs idler_top with signal_bar, `hist_bot` idler_bot with signal_cross.
pub fn estimate_pspdc_joint(
    hist_top: &CoincidenceHistogram,
    hist_bot: &CoincidenceHistogram,
    rate_hz: f64,
    reflectivity: f64,
) -> Result<JointPspdc> {
    let top = estimate_pspdc_single(hist_top, rate_hz)?;
    let bot = estimate_pspdc_single(hist_bot, rate_hz)?;
    let (p_top, p_bot, iterations) = solve_joint(top.ratio, bot.ratio, reflectivity)?;
    let r = reflectivity;
    let t = 1.0 - r;
    // Linearized error propagation through the coupled pair.
    let (a_t, a_b) = ((r + t * p_bot) / r, (r + t * p_top) / r);
    let (b_t, b_b) = (t * (top.ratio - 1.0) / r, t * (bot.ratio - 1.0) / r);
    let det = 1.0 - b_t * b_b;
    let (st, sb) = (top.ratio_std_error, bot.ratio_std_error);
    let err_top = ((a_t * st).powi(2) + (b_t * a_b * sb).powi(2)).sqrt() / det.abs();
    let err_bot = ((a_b * sb).powi(2) + (b_b * a_t * st).powi(2)).sqrt() / det.abs();
    Ok(JointPspdc {
        top: PspdcEstimate {
            value: p_top,
            std_error: err_top,
            ..top
        },
        bot: PspdcEstimate {
            value: p_bot,
            std_error: err_bot,
            ..bot
        },
        iterations,
    })
}

/// Fixed point of the two coupled inversions from measured ratios.
pub fn solve_joint(d_top: f64, d_bot: f64, reflectivity: f64) -> Result<(f64, f64, usize)> {
    if !(reflectivity > 0.0 && reflectivity <= 1.0) {
        return Err(Error::invalid("coupled estimator", "reflectivity must lie in (0, 1]"));
    }
    let t = 1.0 - reflectivity;
    let contraction = (t / reflectivity).powi(2) * (1.0 - d_top).abs() * (1.0 - d_bot).abs();
    if contraction >= 1.0 {
        return Err(Error::numeric(
            "estimate_pspdc_coupled",
            format!("coupled equations are not contractive at R = {reflectivity} (factor {contraction:.3})"),
        ));
    }
    let (mut p_top, mut p_bot) = (d_top, d_bot);
    for it in 1..=JOINT_MAX_ITERATIONS {
        let next_top = invert_coupled_ratio(d_top, reflectivity, p_bot.clamp(0.0, 1.0 - f64::EPSILON))?;
        let next_bot = invert_coupled_ratio(d_bot, reflectivity, next_top.clamp(0.0, 1.0 - f64::EPSILON))?;
        let step = (next_top - p_top).abs().max((next_bot - p_bot).abs());
        p_top = next_top;
        p_bot = next_bot;
        if step <= JOINT_TOLERANCE {
            return Ok((p_top, p_bot, it));
        }
    }
    Err(Error::numeric(
        "estimate_pspdc_coupled",
        format!("fixed-point iteration did not converge in {JOINT_MAX_ITERATIONS} iterations"),
    ))
}
