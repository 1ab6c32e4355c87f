//! Discrete-event execution of client, link and server on a virtual clock.
//!
//! Frames are processed in capture order. Stage times are configured, the
//! link times come from the bandwidth trace, and the codec, server and
//! detector run for real so byte counts and detections are genuine.
//!
//! In pipelined mode the stages form a tandem line with bounded FIFO queues
//! and blocking after service: a frame leaves stage `k` once it is served and
//! the queue in front of stage `k + 1` has room, i.e. once frame `f - cap`
//! has started there. Capture forks into the demosaic path and the offload
//! path; rendering waits for both.

use std::fmt;
use std::str::FromStr;

use super::server::EdgeServer;
use super::wire::{FrameGeometry, FrameMessage};
use crate::codec::{encode_frame, CodecConfig, CodecWeights};
use crate::controller::{estimate_bandwidth, select_config, BandwidthSample, Controller};
use crate::error::{Error, Result};
use crate::eval::{evaluate, DEFAULT_IOU_THRESHOLD};
use crate::netsim::{BandwidthTrace, DEFAULT_PROPAGATION_DELAY};
use crate::par::Strategy;
use crate::rawframe::{scale_luminosity, BoundingBox, SyntheticScene};

pub const DEFAULT_QUEUE_CAPACITY: usize = 2;
pub const DEFAULT_CAPTURE_INTERVAL: f64 = 1.0 / 30.0;

/// Configured service times in seconds. Link times are not listed: they
/// follow from message sizes and the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTiming {
    pub capture: f64,
    pub demosaic: f64,
    pub encode: f64,
    pub decode: f64,
    pub inference: f64,
    pub render: f64,
}

impl StageTiming {
    pub fn validate(&self) -> Result<()> {
        let all = [self.capture, self.demosaic, self.encode, self.decode, self.inference, self.render];
        if all.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidArgument(format!("stage times must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    /// Demosaicing at 25 ms with an offload path that is at least as long.
    pub fn timeline() -> Self {
        StageTiming { capture: 0.002, demosaic: 0.025, encode: 0.008, decode: 0.005, inference: 0.020, render: 0.001 }
    }
}

impl Default for StageTiming {
    fn default() -> Self {
        StageTiming { capture: 0.002, demosaic: 0.012, encode: 0.006, decode: 0.004, inference: 0.010, render: 0.001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    /// One frame in flight; every stage, demosaicing included, runs in turn.
    Serialized,
    /// Demosaicing runs beside the offload path and stages overlap across frames.
    #[default]
    Pipelined,
}

impl FromStr for ExecutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "serialized" | "serial" => Ok(ExecutionMode::Serialized),
            "pipelined" | "pipeline" => Ok(ExecutionMode::Pipelined),
            _ => Err(Error::InvalidArgument(format!("unknown execution mode `{s}`"))),
        }
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutionMode::Serialized => "serialized",
            ExecutionMode::Pipelined => "pipelined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TilePolicy {
    /// Tiles chosen by the controller from the previous detections.
    #[default]
    Adaptive,
    /// Every tile of every frame; the configuration still adapts.
    AllTiles,
}

impl FromStr for TilePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "default" | "adaptive" => Ok(TilePolicy::Adaptive),
            "alltiles" | "all-tiles" | "all" => Ok(TilePolicy::AllTiles),
            _ => Err(Error::InvalidArgument(format!("unknown tile policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub timing: StageTiming,
    pub mode: ExecutionMode,
    pub policy: TilePolicy,
    /// Seconds between nominal capture instants; 0 captures as fast as the
    /// pipeline accepts frames. Captures are delayed, never dropped.
    pub capture_interval: f64,
    pub queue_capacity: usize,
    /// Lets the server decode frame `f + 1` while running inference on `f`.
    pub server_overlap: bool,
    pub propagation_delay: f64,
    /// Brightness factor applied to captured frames.
    pub luminosity: f64,
    pub strategy: Strategy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            timing: StageTiming::default(),
            mode: ExecutionMode::default(),
            policy: TilePolicy::default(),
            capture_interval: DEFAULT_CAPTURE_INTERVAL,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            server_overlap: true,
            propagation_delay: DEFAULT_PROPAGATION_DELAY,
            luminosity: 1.0,
            strategy: Strategy::default(),
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        if !(self.capture_interval.is_finite() && self.capture_interval >= 0.0) {
            return Err(Error::InvalidArgument("capture interval must be >= 0".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::InvalidArgument("queue capacity must be at least 1".into()));
        }
        if !(self.propagation_delay.is_finite() && self.propagation_delay >= 0.0) {
            return Err(Error::InvalidArgument("propagation delay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-frame outcome. Times are virtual seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub frame_id: u64,
    /// End of the capture stage; latency is measured from here.
    pub captured_at: f64,
    pub rendered_at: f64,
    pub e2e_latency: f64,
    /// Serialized frame message length, excluding transport framing.
    pub transmitted_bytes: usize,
    pub tiles_sent: usize,
    pub config_used: CodecConfig,
    pub key_frame: bool,
    /// Bandwidth estimate (bytes/s) the controller planned with.
    pub eab: f64,
    pub uplink_start: f64,
    pub uplink_end: f64,
    /// Service, transfer and propagation time spent on the latency path.
    pub service_time: f64,
    /// Time spent waiting in queues, blocked, or waiting for the demosaic path.
    pub queue_wait: f64,
    pub detections: Vec<BoundingBox>,
    pub truth: Vec<BoundingBox>,
    /// Set when the transport failed for this frame; timing fields are then
    /// only meaningful up to the failure.
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Completed (not dropped) frames.
    pub frames: usize,
    pub dropped: usize,
    /// Completed frames over the active duration.
    pub throughput: f64,
    /// Frames per second between the first and last render.
    pub steady_throughput: f64,
    /// First capture start to last render.
    pub active_duration: f64,
    pub mean_latency: f64,
    pub p95_latency: f64,
    pub max_latency: f64,
    pub mean_frame_bytes: f64,
    pub mean_tiles: f64,
    pub max_queue_wait: f64,
    pub map: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

impl RunSummary {
    pub fn from_metrics(all: &[FrameMetrics], first_capture_start: f64) -> Result<Self> {
        let metrics: Vec<&FrameMetrics> = all.iter().filter(|m| !m.dropped).collect();
        let n = metrics.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no frames completed".into()));
        }
        let mean = |f: &dyn Fn(&FrameMetrics) -> f64| metrics.iter().map(|m| f(m)).sum::<f64>() / n as f64;
        let mut lat: Vec<f64> = metrics.iter().map(|m| m.e2e_latency).collect();
        lat.sort_by(f64::total_cmp);
        let p95 = lat[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        let last = metrics.iter().map(|m| m.rendered_at).fold(f64::MIN, f64::max);
        let first = metrics.iter().map(|m| m.rendered_at).fold(f64::MAX, f64::min);
        let active_duration = last - first_capture_start;
        let dets: Vec<Vec<BoundingBox>> = metrics.iter().map(|m| m.detections.clone()).collect();
        let truths: Vec<Vec<BoundingBox>> = metrics.iter().map(|m| m.truth.clone()).collect();
        let acc = evaluate(&dets, &truths, DEFAULT_IOU_THRESHOLD)?;
        Ok(RunSummary {
            frames: n,
            dropped: all.len() - n,
            throughput: n as f64 / active_duration,
            steady_throughput: if n > 1 && last > first { (n - 1) as f64 / (last - first) } else { 0.0 },
            active_duration,
            mean_latency: mean(&|m| m.e2e_latency),
            p95_latency: p95,
            max_latency: lat[n - 1],
            mean_frame_bytes: mean(&|m| m.transmitted_bytes as f64),
            mean_tiles: mean(&|m| m.tiles_sent as f64),
            max_queue_wait: metrics.iter().map(|m| m.queue_wait).fold(0.0, f64::max),
            map: acc.map,
            f1: acc.f1,
            precision: acc.precision,
            recall: acc.recall,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub frames: Vec<FrameMetrics>,
    pub summary: RunSummary,
}

#[derive(Clone, Copy, PartialEq)]
enum Service {
    Fixed(f64),
    Uplink,
    Downlink,
}

/// Start, completion and departure of one frame at one stage.
#[derive(Clone, Copy, Default)]
struct Slot {
    start: f64,
    done: f64,
    depart: f64,
}

/// What the encoder produced for one frame.
struct Encoded {
    bytes: usize,
    tiles: Vec<usize>,
    config: CodecConfig,
    key_frame: bool,
    eab: f64,
    detections: Vec<BoundingBox>,
}

struct Client<'a> {
    controller: Controller,
    weights: &'a CodecWeights,
    server: &'a EdgeServer,
    geometry: FrameGeometry,
    cfg: &'a SimConfig,
    eab: f64,
    delivered: usize,
}

impl Client<'_> {
    /// Runs the controller at `now` with what has arrived by then, encodes,
    /// and lets the server process the message bytes.
    fn encode(
        &mut self,
        frame_id: u64,
        scene: &SyntheticScene,
        now: f64,
        uplinks: &[(u64, f64, f64)],
        results: &[(f64, Vec<usize>, Vec<BoundingBox>)],
    ) -> Result<Encoded> {
        let arrived = results.partition_point(|r| r.0 <= now);
        for (_, tiles, boxes) in &results[self.delivered.min(arrived)..arrived] {
            self.controller.deliver_feedback(tiles, boxes.clone());
        }
        self.delivered = self.delivered.max(arrived);
        let done = uplinks.partition_point(|u| u.2 <= now);
        if let Some(&(bytes, t_start, t_end)) = uplinks[..done].iter().rev().find(|u| u.0 > 0) {
            if let Ok(rate) = estimate_bandwidth(&BandwidthSample { bytes, t_start, t_end }) {
                self.eab = rate;
            }
        }
        let mut plan = self.controller.adapt(self.eab);
        if self.cfg.policy == TilePolicy::AllTiles && !plan.key_frame {
            let grid = self.controller.grid();
            plan.tiles = (0..grid.tile_count()).collect();
            plan.config = select_config(self.controller.lut(), plan.tiles.len(), self.eab);
        }
        let frame = if self.cfg.luminosity == 1.0 {
            scene.frame.clone()
        } else {
            scale_luminosity(&scene.frame, self.cfg.luminosity)?
        };
        let enc = encode_frame(&frame, self.controller.grid(), &plan.tiles, plan.config, self.weights, self.cfg.strategy)?;
        let msg = FrameMessage {
            frame_id,
            key_frame: plan.key_frame,
            config: enc.config,
            quant: enc.quant,
            geometry: self.geometry,
            tiles: enc.tiles,
        };
        let bytes = msg.to_bytes()?;
        let reply = self.server.handle(&bytes);
        Ok(Encoded {
            bytes: bytes.len(),
            tiles: plan.tiles,
            config: plan.config,
            key_frame: plan.key_frame,
            eab: self.eab,
            detections: reply.detections,
        })
    }
}

/// Replays `scenes` through the system. The uplink and the result downlink
/// are independent links driven by the same trace.
pub fn run_simulation<I>(
    scenes: I,
    trace: &BandwidthTrace,
    controller: Controller,
    weights: &CodecWeights,
    server: &EdgeServer,
    cfg: &SimConfig,
) -> Result<SimulationRun>
where
    I: IntoIterator<Item = SyntheticScene>,
{
    cfg.validate()?;
    let t = cfg.timing;
    let mut stages = vec![Service::Fixed(t.encode), Service::Uplink];
    if cfg.server_overlap {
        stages.extend([Service::Fixed(t.decode), Service::Fixed(t.inference)]);
    } else {
        stages.push(Service::Fixed(t.decode + t.inference));
    }
    stages.push(Service::Downlink);
    const ENCODE: usize = 0;

    let mut client: Option<Client> = None;
    let cap = cfg.queue_capacity;
    let mut capture: Vec<Slot> = Vec::new();
    let mut demosaic: Vec<Slot> = Vec::new();
    let mut offload: Vec<Vec<Slot>> = vec![Vec::new(); stages.len()];
    let mut render: Vec<Slot> = Vec::new();
    let mut uplinks: Vec<(u64, f64, f64)> = Vec::new();
    let mut results: Vec<(f64, Vec<usize>, Vec<BoundingBox>)> = Vec::new();
    let mut metrics = Vec::new();
    let mut controller = Some(controller);

    for (f, scene) in scenes.into_iter().enumerate() {
        let client = match client.as_mut() {
            Some(c) => c,
            None => {
                let controller = controller.take().expect("controller consumed once");
                let geometry = FrameGeometry::from_grid(controller.grid(), scene.frame.pattern())?;
                client.insert(Client { controller, weights, server, geometry, cfg, eab: f64::INFINITY, delivered: 0 })
            }
        };
        let prev = |v: &Vec<Slot>| v.last().copied().unwrap_or_default();
        // Start time of frame `f - cap` at a stage, or -inf if it does not exist.
        let ahead = |v: &Vec<Slot>| if f >= cap { v[f - cap].start } else { f64::NEG_INFINITY };
        let nominal = f as f64 * cfg.capture_interval;
        let mut service_time = 0.0;
        let mut wait = 0.0;

        let (cap_slot, dem_slot, enc, up, arrival) = match cfg.mode {
            ExecutionMode::Serialized => {
                let start = nominal.max(prev(&render).done);
                let cap_done = start + t.capture;
                let dem_done = cap_done + t.demosaic;
                service_time += t.demosaic;
                let mut now = dem_done;
                let mut enc = None;
                let mut up = (0.0, 0.0);
                for (k, s) in stages.iter().enumerate() {
                    let slot_start = now;
                    now = match *s {
                        Service::Fixed(d) => {
                            if k == ENCODE {
                                enc = Some(client.encode(f as u64, &scene, now, &uplinks, &results)?);
                            }
                            now + d
                        }
                        Service::Uplink => {
                            let bytes = enc.as_ref().expect("encode precedes uplink").bytes as u64;
                            let end = now + trace.transfer_time(now, bytes)?;
                            up = (now, end);
                            end + cfg.propagation_delay
                        }
                        Service::Downlink => {
                            let bytes = result_len(enc.as_ref().expect("encoded"));
                            now + trace.transfer_time(now, bytes)? + cfg.propagation_delay
                        }
                    };
                    service_time += now - slot_start;
                    offload[k].push(Slot { start: slot_start, done: now, depart: now });
                }
                (
                    Slot { start, done: cap_done, depart: cap_done },
                    Slot { start: cap_done, done: dem_done, depart: dem_done },
                    enc.expect("encode stage present"),
                    up,
                    now,
                )
            }
            ExecutionMode::Pipelined => {
                let start = nominal.max(prev(&capture).depart);
                let cap_done = start + t.capture;
                // Leaves capture once both downstream queues have room.
                let cap_depart = cap_done.max(ahead(&offload[ENCODE])).max(ahead(&demosaic));
                wait += cap_depart - cap_done;

                let dem_start = cap_depart.max(prev(&demosaic).depart);
                let dem_done = dem_start + t.demosaic;
                let dem_depart = dem_done.max(ahead(&render));

                let mut arrival = cap_depart;
                let mut enc = None;
                let mut up = (0.0, 0.0);
                for (k, s) in stages.iter().enumerate() {
                    let start = arrival.max(prev(&offload[k]).depart);
                    wait += start - arrival;
                    let (done, delay) = match *s {
                        Service::Fixed(d) => {
                            if k == ENCODE {
                                enc = Some(client.encode(f as u64, &scene, start, &uplinks, &results)?);
                            }
                            (start + d, 0.0)
                        }
                        Service::Uplink => {
                            let bytes = enc.as_ref().expect("encode precedes uplink").bytes as u64;
                            let end = start + trace.transfer_time(start, bytes)?;
                            up = (start, end);
                            (end, cfg.propagation_delay)
                        }
                        Service::Downlink => {
                            let bytes = result_len(enc.as_ref().expect("encoded"));
                            (start + trace.transfer_time(start, bytes)?, cfg.propagation_delay)
                        }
                    };
                    let next = offload.get(k + 1).unwrap_or(&render);
                    let depart = done.max(ahead(next));
                    service_time += done - start + delay;
                    wait += depart - done;
                    offload[k].push(Slot { start, done, depart });
                    arrival = depart + delay;
                }
                (
                    Slot { start, done: cap_done, depart: cap_depart },
                    Slot { start: dem_start, done: dem_done, depart: dem_depart },
                    enc.expect("encode stage present"),
                    up,
                    arrival,
                )
            }
        };

        let render_start = match cfg.mode {
            ExecutionMode::Serialized => arrival,
            ExecutionMode::Pipelined => arrival.max(dem_slot.depart).max(prev(&render).done),
        };
        wait += render_start - arrival;
        let render_done = render_start + t.render;
        service_time += t.render;
        render.push(Slot { start: render_start, done: render_done, depart: render_done });
        capture.push(cap_slot);
        demosaic.push(dem_slot);
        uplinks.push((enc.bytes as u64, up.0, up.1));
        results.push((arrival, enc.tiles.clone(), enc.detections.clone()));

        metrics.push(FrameMetrics {
            frame_id: f as u64,
            captured_at: cap_slot.done,
            rendered_at: render_done,
            e2e_latency: render_done - cap_slot.done,
            transmitted_bytes: enc.bytes,
            tiles_sent: enc.tiles.len(),
            config_used: enc.config,
            key_frame: enc.key_frame,
            eab: enc.eab,
            uplink_start: up.0,
            uplink_end: up.1,
            service_time,
            queue_wait: wait,
            detections: enc.detections,
            truth: scene.truth,
            dropped: false,
        });
    }
    let first_start = capture.first().map(|s| s.start).unwrap_or(0.0);
    let summary = RunSummary::from_metrics(&metrics, first_start)?;
    Ok(SimulationRun { frames: metrics, summary })
}

fn result_len(enc: &Encoded) -> u64 {
    (super::wire::RESULT_HEADER_LEN + super::wire::DETECTION_RECORD_LEN * enc.detections.len()) as u64
}
