//! Binary tactile signal path: force threshold, flip noise and latency.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ReplayError};
use crate::geometry::ForceMap;
use crate::grid::BinaryMap;

// Absorbs rounding in timestamp arithmetic (tick multiples of 1/sample_rate).
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Simulated binarization threshold, N.
    pub force_threshold: f64,
    /// Per-entry flip probability, applied to 0s and 1s alike.
    pub flip_rate: f64,
    /// Latency bounds, s.
    pub min_delay: f64,
    pub max_delay: f64,
    /// Tactile frame rate, Hz.
    pub sample_rate: f64,
    pub rng_seed: u64,
    /// Resample the latency for every frame instead of once per episode.
    pub per_frame_delay: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            force_threshold: 0.05,
            flip_rate: 0.005,
            min_delay: 0.025,
            max_delay: 0.05,
            sample_rate: 40.0,
            rng_seed: 0,
            per_frame_delay: false,
        }
    }
}

impl PipelineConfig {
    /// Latency bounds measured on hardware (0.02–0.04 s), as opposed to the
    /// training defaults.
    pub fn with_measured_latency(self) -> Self {
        PipelineConfig {
            min_delay: 0.02,
            max_delay: 0.04,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |r: &str| Err(ConfigError::invalid("pipeline", r));
        if !(self.force_threshold >= 0.0 && self.force_threshold.is_finite()) {
            return bad("force_threshold must be finite and non-negative");
        }
        if !(0.0..0.5).contains(&self.flip_rate) {
            return bad("flip_rate must lie in [0, 0.5)");
        }
        if !(0.0 <= self.min_delay && self.min_delay <= self.max_delay && self.max_delay.is_finite()) {
            return bad("require 0 <= min_delay <= max_delay");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate must be positive");
        }
        Ok(())
    }

    pub fn tick(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// Lag in whole frames produced by a latency of `delay` seconds.
pub fn lag_ticks(delay: f64, sample_rate: f64) -> u64 {
    (delay * sample_rate - TIME_EPS).ceil().max(0.0) as u64
}

/// One binary tactile observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    pub map: BinaryMap,
    pub timestamp: f64,
    /// Emitted by a delay buffer before any input was old enough.
    pub cold_start: bool,
}

impl TactileFrame {
    pub fn new(map: BinaryMap, timestamp: f64) -> Self {
        TactileFrame {
            map,
            timestamp,
            cold_start: false,
        }
    }
}

pub fn binarize(force: &ForceMap, cfg: &PipelineConfig, timestamp: f64) -> TactileFrame {
    let map = force.values.map(|&f| (f >= cfg.force_threshold) as u8);
    TactileFrame::new(map, timestamp)
}

/// Independently flips every entry with probability `flip_rate`.
///
/// Draws exactly one uniform sample per entry so streams stay aligned
/// across flip rates.
pub fn flip_noise<R: Rng + ?Sized>(frame: &TactileFrame, cfg: &PipelineConfig, rng: &mut R) -> TactileFrame {
    let mut out = frame.clone();
    for v in out.map.as_mut_slice() {
        let u: f64 = rng.random();
        if u < cfg.flip_rate {
            *v ^= 1;
        }
    }
    out
}

/// Latency model for one tactile stream.
///
/// Queries at time `t` return the newest pushed frame with timestamp
/// `<= t - d`. `d` is drawn once per episode unless `per_frame_delay` is set.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    cfg: PipelineConfig,
    delay: f64,
    frames: VecDeque<TactileFrame>,
    rows: usize,
    cols: usize,
}

impl DelayBuffer {
    pub fn new<R: Rng + ?Sized>(cfg: &PipelineConfig, rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut buf = DelayBuffer {
            cfg: cfg.clone(),
            delay: 0.0,
            frames: VecDeque::new(),
            rows,
            cols,
        };
        buf.reset_episode(rng);
        buf
    }

    /// Fixed latency, for tests and replays with a known delay.
    pub fn with_delay(cfg: &PipelineConfig, rows: usize, cols: usize, delay: f64) -> Self {
        DelayBuffer {
            cfg: PipelineConfig {
                per_frame_delay: false,
                ..cfg.clone()
            },
            delay,
            frames: VecDeque::new(),
            rows,
            cols,
        }
    }

    pub fn reset_episode<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.frames.clear();
        self.delay = self.sample_delay(rng);
    }

    fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.cfg.max_delay > self.cfg.min_delay {
            rng.random_range(self.cfg.min_delay..=self.cfg.max_delay)
        } else {
            self.cfg.min_delay
        }
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn push(&mut self, frame: TactileFrame) {
        if let Some(last) = self.frames.back() {
            debug_assert!(frame.timestamp > last.timestamp, "timestamps must increase");
        }
        self.frames.push_back(frame);
    }

    /// Delayed frame visible at time `t`.
    pub fn query<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> TactileFrame {
        if self.cfg.per_frame_delay {
            self.delay = self.sample_delay(rng);
        }
        // Later queries reach back at most max_delay; keep the newest frame
        // older than that horizon and drop the rest.
        let horizon = t - self.cfg.max_delay.max(self.delay) + TIME_EPS;
        while self.frames.len() > 1 && self.frames[1].timestamp <= horizon {
            self.frames.pop_front();
        }
        let cutoff = t - self.delay + TIME_EPS;
        match self.frames.iter().rposition(|f| f.timestamp <= cutoff) {
            Some(idx) => {
                let mut f = self.frames[idx].clone();
                f.timestamp = t;
                f.cold_start = false;
                f
            }
            None => TactileFrame {
                map: BinaryMap::new(self.rows, self.cols),
                timestamp: t,
                cold_start: true,
            },
        }
    }
}

/// Stateful force → observation path for one environment.
#[derive(Debug, Clone)]
pub struct SignalPipeline {
    cfg: PipelineConfig,
    buffer: DelayBuffer,
}

impl SignalPipeline {
    pub fn new<R: Rng + ?Sized>(cfg: &PipelineConfig, rows: usize, cols: usize, rng: &mut R) -> Self {
        SignalPipeline {
            cfg: cfg.clone(),
            buffer: DelayBuffer::new(cfg, rows, cols, rng),
        }
    }

    pub fn delay(&self) -> f64 {
        self.buffer.delay()
    }

    /// Binarize, add flip noise, push, and read back the delayed frame.
    pub fn step<R: Rng + ?Sized>(&mut self, force: &ForceMap, timestamp: f64, rng: &mut R) -> TactileFrame {
        let clean = binarize(force, &self.cfg, timestamp);
        let noisy = flip_noise(&clean, &self.cfg, rng);
        self.buffer.push(noisy);
        self.buffer.query(timestamp, rng)
    }
}

/// Runs a whole stream through a delay buffer, querying at each input time.
pub fn delay_stream<R: Rng + ?Sized>(frames: &[TactileFrame], buffer: &mut DelayBuffer, rng: &mut R) -> Vec<TactileFrame> {
    frames
        .iter()
        .map(|f| {
            buffer.push(f.clone());
            buffer.query(f.timestamp, rng)
        })
        .collect()
}

/// Column names of a tactile stream CSV.
pub fn stream_header(rows: usize, cols: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(rows * cols + 1);
    h.push("timestamp".to_string());
    for r in 0..rows {
        for c in 0..cols {
            h.push(taxel_column(r, c));
        }
    }
    h
}

pub fn taxel_column(row: usize, col: usize) -> String {
    format!("taxel_{row}_{col}")
}

/// Writes frames as CSV: timestamp then rows·cols entries, row-major.
pub fn write_stream<W: Write>(out: W, frames: &[TactileFrame], rows: usize, cols: usize) -> Result<(), ReplayError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(stream_header(rows, cols))?;
    let mut rec: Vec<String> = Vec::with_capacity(rows * cols + 1);
    for f in frames {
        rec.clear();
        rec.push(format!("{}", f.timestamp));
        rec.extend(f.map.as_slice().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a stream written by [`write_stream`].
pub fn read_stream<R: Read>(input: R, rows: usize, cols: usize) -> Result<Vec<TactileFrame>, ReplayError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    let expected = stream_header(rows, cols);
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(ReplayError::Schema(format!(
            "tactile stream header must be timestamp followed by {} taxel columns",
            rows * cols
        )));
    }
    let mut frames = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |m: String| ReplayError::Parse { line, message: m };
        let t: f64 = rec[0].trim().parse().map_err(|_| parse_err(format!("bad timestamp '{}'", &rec[0])))?;
        if t <= last_t {
            return Err(parse_err("timestamps must be strictly increasing".into()));
        }
        last_t = t;
        let mut data = Vec::with_capacity(rows * cols);
        for field in rec.iter().skip(1) {
            match field.trim() {
                "0" => data.push(0),
                "1" => data.push(1),
                other => return Err(parse_err(format!("taxel value '{other}' is not 0 or 1"))),
            }
        }
        frames.push(TactileFrame::new(BinaryMap::from_vec(rows, cols, data), t));
    }
    Ok(frames)
}
