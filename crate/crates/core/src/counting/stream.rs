//! Time-tag streams and their CSV and binary encodings.
//!
//! Binary layout: a bare sequence of 9-byte little-endian records, each a
//! `u8` channel id followed by an `f64` timestamp in seconds. There is no
//! header; records are written in time order, ties broken by channel id.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    SignalBar,
    SignalCross,
    IdlerTop,
    IdlerBot,
    Trigger,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::SignalBar,
        Channel::SignalCross,
        Channel::IdlerTop,
        Channel::IdlerBot,
        Channel::Trigger,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Channel::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown channel id {id}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::SignalBar => "signal_bar",
            Channel::SignalCross => "signal_cross",
            Channel::IdlerTop => "idler_top",
            Channel::IdlerBot => "idler_bot",
            Channel::Trigger => "trigger",
        }
    }

    /// Idler detector of source `k` (0 = top, 1 = bottom).
    pub fn idler_of(source: usize) -> Channel {
        if source == 0 {
            Channel::IdlerTop
        } else {
            Channel::IdlerBot
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown channel '{s}'")))
    }
}

/// Per-channel, time-ordered detection timestamps from a pulsed experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct TagStream {
    rate_hz: f64,
    n_pulses: u64,
    events: [Vec<f64>; 5],
}

impl TagStream {
    pub fn new(rate_hz: f64, n_pulses: u64, events: [Vec<f64>; 5]) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::invalid("tag stream", "repetition rate must be positive"));
        }
        let end = n_pulses as f64 / rate_hz;
        for (ch, ts) in Channel::ALL.iter().zip(&events) {
            if ts.windows(2).any(|w| !(w[0] <= w[1])) {
                return Err(Error::invalid("tag stream", format!("{ch} timestamps are not nondecreasing")));
            }
            if let (Some(&first), Some(&last)) = (ts.first(), ts.last()) {
                if !(first >= 0.0 && last <= end) {
                    return Err(Error::invalid("tag stream", format!("{ch} has events outside [0, {end}] s")));
                }
            }
        }
        Ok(TagStream {
            rate_hz,
            n_pulses,
            events,
        })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn n_pulses(&self) -> u64 {
        self.n_pulses
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn duration(&self) -> f64 {
        self.n_pulses as f64 / self.rate_hz
    }

    pub fn events(&self, ch: Channel) -> &[f64] {
        &self.events[ch as usize]
    }

    pub fn total_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// All events as (time, channel), time-ordered with ties broken by channel id.
    pub fn merged(&self) -> Vec<(f64, Channel)> {
        let mut all: Vec<(f64, Channel)> = Channel::ALL
            .iter()
            .flat_map(|&ch| self.events(ch).iter().map(move |&t| (t, ch)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut buf = Vec::with_capacity(self.total_events() * 9);
        for (t, ch) in self.merged() {
            buf.push(ch.id());
            buf.extend_from_slice(&t.to_le_bytes());
        }
        writer.write_all(&buf)?;
        Ok(())
    }

    /// Reads the binary layout; the record stream itself does not carry
    /// the repetition rate or pulse count.
    pub fn read_binary<R: Read>(mut reader: R, rate_hz: f64, n_pulses: u64) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() % 9 != 0 {
            return Err(Error::Parse(format!("binary tag stream length {} is not a multiple of 9", bytes.len())));
        }
        let mut events: [Vec<f64>; 5] = Default::default();
        for rec in bytes.chunks_exact(9) {
            let ch = Channel::from_id(rec[0])?;
            let t = f64::from_le_bytes(rec[1..9].try_into().expect("8-byte slice"));
            events[ch as usize].push(t);
        }
        TagStream::new(rate_hz, n_pulses, events)
    }

    /// `channel,timestamp_s` rows after a `# rate_hz=... n_pulses=...` comment.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "# rate_hz={} n_pulses={}", self.rate_hz, self.n_pulses)?;
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["channel", "timestamp_s"])?;
        for (t, ch) in self.merged() {
            csv.write_record([ch.name(), &t.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rate = None;
        let mut pulses = None;
        let mut body = String::new();
        for line in reader.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                for pair in rest.split_whitespace() {
                    match pair.split_once('=') {
                        Some(("rate_hz", v)) => rate = Some(v.parse::<f64>().map_err(|e| Error::Parse(format!("rate_hz: {e}")))?),
                        Some(("n_pulses", v)) => {
                            pulses = Some(v.parse::<u64>().map_err(|e| Error::Parse(format!("n_pulses: {e}")))?)
                        }
                        _ => {}
                    }
                }
            } else if !line.starts_with('#') {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let (rate, pulses) = match (rate, pulses) {
            (Some(r), Some(n)) => (r, n),
            _ => return Err(Error::Parse("tag stream CSV lacks the rate_hz/n_pulses comment".into())),
        };
        let mut events: [Vec<f64>; 5] = Default::default();
        let mut csv = csv::Reader::from_reader(body.as_bytes());
        for rec in csv.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse("expected two columns: channel,timestamp_s".into()));
            }
            let ch: Channel = rec[0].parse()?;
            let t: f64 = rec[1].parse().map_err(|e| Error::Parse(format!("timestamp: {e}")))?;
            events[ch as usize].push(t);
        }
        TagStream::new(rate, pulses, events)
    }
}
