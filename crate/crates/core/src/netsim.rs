//! Fluid link model driven by a piecewise-constant bandwidth trace.
//!
//! Transfers are served FIFO: a transfer starts when it is submitted or when
//! the previous one finishes, whichever is later, and completes once the
//! integral of the trace rate over its service interval equals its size.
//! No packetization, loss or congestion control is modeled.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Resolution of the virtual clock in seconds.
pub const TICK: f64 = 1e-6;

/// One-way propagation delay added to every delivery by default.
pub const DEFAULT_PROPAGATION_DELAY: f64 = 0.002;

/// Step-function bandwidth trace in bytes per second. The last rate holds
/// beyond the final sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTrace {
    samples: Vec<(f64, f64)>,
}

impl BandwidthTrace {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::format("trace", "no samples"))?;
        if first.0 != 0.0 {
            return Err(Error::format("trace", format!("first sample at t={} instead of 0", first.0)));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::format("trace", "timestamps must be strictly increasing"));
        }
        if samples.iter().any(|&(t, r)| !t.is_finite() || !r.is_finite() || r < 0.0) {
            return Err(Error::format("trace", "rates must be finite and non-negative"));
        }
        Ok(BandwidthTrace { samples })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![(0.0, rate)])
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Time of the last sample.
    pub fn duration(&self) -> f64 {
        self.samples.last().map(|s| s.0).unwrap_or(0.0)
    }

    fn segment(&self, t: f64) -> usize {
        self.samples.partition_point(|s| s.0 <= t).saturating_sub(1)
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.samples[self.segment(t)].1
    }

    /// Seconds needed to move `bytes` starting at `start`.
    pub fn transfer_time(&self, start: f64, bytes: u64) -> Result<f64> {
        if bytes == 0 {
            return Ok(0.0);
        }
        let mut remaining = bytes as f64;
        let mut t = start;
        let mut seg = self.segment(start);
        loop {
            let rate = self.samples[seg].1;
            let end = self.samples.get(seg + 1).map(|s| s.0);
            match end {
                Some(end) => {
                    let capacity = rate * (end - t);
                    if capacity >= remaining && rate > 0.0 {
                        return Ok(t + remaining / rate - start);
                    }
                    remaining -= capacity;
                    t = end;
                    seg += 1;
                }
                None if rate > 0.0 => return Ok(t + remaining / rate - start),
                None => return Err(Error::LinkDiverges { bytes }),
            }
        }
    }

    /// Parses `t_seconds rate_bytes_per_second` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::format("trace", format!("line {}: expected `t rate`", n + 1));
            if f.len() != 2 {
                return Err(bad());
            }
            samples.push((f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?));
        }
        Self::new(samples)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# t_seconds rate_bytes_per_second\n");
        for (t, r) in &self.samples {
            let _ = writeln!(s, "{t} {r}");
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<BandwidthTrace> {
    BandwidthTrace::parse(&std::fs::read_to_string(path)?)
}

/// Parameters of the synthetic random-walk trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    pub duration: f64,
    pub mean_rate: f64,
    pub step_interval: f64,
    pub step_size: f64,
}

impl TraceParams {
    /// 100 ms steps of 10% of the mean rate.
    pub fn with_defaults(duration: f64, mean_rate: f64) -> Self {
        TraceParams { duration, mean_rate, step_interval: 0.1, step_size: 0.1 * mean_rate }
    }
}

/// Bounded binomial random walk: each step moves the rate up or down by
/// `step_size` with equal probability, clamped to `[0.1, 2] x mean_rate`.
pub fn generate_trace(seed: u64, params: &TraceParams) -> Result<BandwidthTrace> {
    let TraceParams { duration, mean_rate, step_interval, step_size } = *params;
    if !(duration > 0.0 && mean_rate > 0.0 && step_interval > 0.0 && step_size >= 0.0) {
        return Err(Error::InvalidArgument("trace parameters must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (duration / step_interval).ceil().max(1.0) as usize;
    let (lo, hi) = (0.1 * mean_rate, 2.0 * mean_rate);
    let mut rate = mean_rate;
    let mut samples = Vec::with_capacity(steps);
    for k in 0..steps {
        samples.push((k as f64 * step_interval, rate));
        let delta = if rng.gen_bool(0.5) { step_size } else { -step_size };
        rate = (rate + delta).clamp(lo, hi);
    }
    BandwidthTrace::new(samples)
}

/// Service interval of one transfer on the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub submitted: f64,
    pub start: f64,
    pub end: f64,
    /// `end` plus propagation delay.
    pub delivered: f64,
    pub bytes: u64,
}

impl Transfer {
    pub fn queue_wait(&self) -> f64 {
        self.start - self.submitted
    }
}

/// A single-direction FIFO link replaying a trace on a virtual clock.
#[derive(Debug, Clone)]
pub struct LinkState {
    trace: BandwidthTrace,
    clock: f64,
    propagation_delay: f64,
}

impl LinkState {
    pub fn new(trace: BandwidthTrace) -> Self {
        LinkState { trace, clock: 0.0, propagation_delay: DEFAULT_PROPAGATION_DELAY }
    }

    pub fn with_propagation_delay(mut self, delay: f64) -> Self {
        self.propagation_delay = delay.max(0.0);
        self
    }

    pub fn trace(&self) -> &BandwidthTrace {
        &self.trace
    }

    /// Time at which the link finishes its current backlog.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn propagation_delay(&self) -> f64 {
        self.propagation_delay
    }

    /// Sends `bytes` starting at the current clock and returns the service
    /// time; the clock advances by it.
    pub fn transmit_duration(&mut self, bytes: u64) -> Result<f64> {
        let dt = self.trace.transfer_time(self.clock, bytes)?;
        self.clock += dt;
        Ok(dt)
    }

    /// Queues a transfer submitted at `at`; FIFO behind earlier submissions.
    pub fn submit(&mut self, at: f64, bytes: u64) -> Result<Transfer> {
        let start = at.max(self.clock);
        let end = start + self.trace.transfer_time(start, bytes)?;
        self.clock = end;
        Ok(Transfer { submitted: at, start, end, delivered: end + self.propagation_delay, bytes })
    }
}
