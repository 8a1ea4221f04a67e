//! Timestamped spike streams and their text format.
//!
//! ```text
//! # kind=neuron duration_ms=1000 n_sources=32
//! 3	12.3
//! 0	12.5
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Neuron,
    Stimulus,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Neuron => "neuron",
            SourceKind::Stimulus => "stimulus",
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neuron" => Ok(SourceKind::Neuron),
            "stimulus" => Ok(SourceKind::Stimulus),
            other => Err(Error::Input(format!("unknown source kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeEvent {
    pub source: u32,
    pub time: f64,
}

/// Ordered `(source, time)` events on `[0, duration)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRecord {
    pub kind: SourceKind,
    pub n_sources: usize,
    pub duration: f64,
    events: Vec<SpikeEvent>,
}

impl SpikeRecord {
    pub fn empty(kind: SourceKind, n_sources: usize, duration: f64) -> Self {
        Self {
            kind,
            n_sources,
            duration,
            events: Vec::new(),
        }
    }

    /// Builds a record from unordered events. The sort is stable in time and
    /// breaks ties by source id.
    pub fn from_events(
        kind: SourceKind,
        n_sources: usize,
        duration: f64,
        mut events: Vec<SpikeEvent>,
    ) -> Result<Self> {
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.source.cmp(&b.source)));
        let rec = Self {
            kind,
            n_sources,
            duration,
            events,
        };
        rec.validate()?;
        Ok(rec)
    }

    /// Appends an event; times must be non-decreasing.
    pub fn push(&mut self, source: u32, time: f64) {
        debug_assert!(self.events.last().is_none_or(|e| e.time <= time));
        self.events.push(SpikeEvent { source, time });
    }

    pub fn validate(&self) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        for e in &self.events {
            if !(e.time >= 0.0 && e.time < self.duration) {
                return Err(Error::Input(format!(
                    "event at {} ms outside [0, {})",
                    e.time, self.duration
                )));
            }
            if e.time < last {
                return Err(Error::Input("event times must be non-decreasing".into()));
            }
            if e.source as usize >= self.n_sources {
                return Err(Error::Input(format!(
                    "source {} out of range for {} sources",
                    e.source, self.n_sources
                )));
            }
            last = e.time;
        }
        Ok(())
    }

    #[inline]
    pub fn events(&self) -> &[SpikeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Spike times per source.
    pub fn trains(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_sources];
        for e in &self.events {
            out[e.source as usize].push(e.time);
        }
        out
    }

    /// Mean rate per source in Hz.
    pub fn mean_rate(&self) -> f64 {
        if self.n_sources == 0 || self.duration <= 0.0 {
            return 0.0;
        }
        self.events.len() as f64 / self.n_sources as f64 / (self.duration * 1e-3)
    }

    /// Per-source rates in Hz.
    pub fn rates(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_sources];
        for e in &self.events {
            counts[e.source as usize] += 1;
        }
        counts
            .into_iter()
            .map(|c| c as f64 / (self.duration * 1e-3))
            .collect()
    }

    /// Events in `[start, end)`, shifted so that `start` becomes zero.
    pub fn window(&self, start: f64, end: f64) -> Self {
        let events = self
            .events
            .iter()
            .filter(|e| e.time >= start && e.time < end)
            .map(|e| SpikeEvent {
                source: e.source,
                time: e.time - start,
            })
            .collect();
        Self {
            kind: self.kind,
            n_sources: self.n_sources,
            duration: end - start,
            events,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# kind={} duration_ms={} n_sources={}",
            self.kind.as_str(),
            self.duration,
            self.n_sources
        )?;
        let mut buf = String::with_capacity(self.events.len() * 12);
        for e in &self.events {
            let _ = writeln!(buf, "{}\t{}", e.source, e.time);
        }
        w.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            })??;
        let (kind, duration, n_sources) = parse_header(&header)?;
        let mut events = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let line_no = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let (src, time) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected `source<TAB>time`"))?;
            let source = src.trim().parse().map_err(|_| parse_err("bad source id"))?;
            let time = time.trim().parse().map_err(|_| parse_err("bad time"))?;
            events.push(SpikeEvent { source, time });
        }
        let rec = Self {
            kind,
            n_sources,
            duration,
            events,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn to_string_repr(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii output")
    }
}

fn parse_header(header: &str) -> Result<(SourceKind, f64, usize)> {
    let bad = |msg: String| Error::Parse { line: 1, msg };
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| bad("header must start with `#`".into()))?;
    let (mut kind, mut duration, mut n_sources) = (None, None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed field `{field}`")))?;
        match key {
            "kind" => kind = Some(value.parse()?),
            "duration_ms" => {
                duration = Some(value.parse().map_err(|_| bad("bad duration".into()))?)
            }
            "n_sources" => {
                n_sources = Some(value.parse().map_err(|_| bad("bad n_sources".into()))?)
            }
            _ => {}
        }
    }
    match (kind, duration, n_sources) {
        (Some(k), Some(d), Some(n)) => Ok((k, d, n)),
        _ => Err(bad("header needs kind, duration_ms and n_sources".into())),
    }
}
