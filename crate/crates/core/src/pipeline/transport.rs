//! Wall-clock mode over a reliable byte stream. Messages are framed with a
//! little-endian `u32` length prefix; the bodies are the same bytes the
//! virtual-clock simulation counts.

use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::server::EdgeServer;
use super::sim::{ExecutionMode, FrameMetrics, TilePolicy, DEFAULT_CAPTURE_INTERVAL, DEFAULT_QUEUE_CAPACITY};
use super::wire::{FrameGeometry, FrameMessage, ResultMessage, ResultStatus};
use crate::codec::{encode_frame, CodecWeights};
use crate::controller::{estimate_bandwidth, select_config, BandwidthSample, Controller};
use crate::error::{Error, Result};
use crate::par::Strategy;
use crate::rawframe::{demosaic_bilinear, scale_luminosity, BoundingBox, SyntheticScene};

/// Upper bound on a single message body.
pub const MAX_MESSAGE_LEN: usize = 64 << 20;

pub fn write_message<W: Write>(out: &mut W, body: &[u8]) -> Result<()> {
    if body.len() > MAX_MESSAGE_LEN {
        return Err(Error::Protocol(format!("message of {} bytes exceeds the limit", body.len())));
    }
    out.write_all(&(body.len() as u32).to_le_bytes())?;
    out.write_all(body)?;
    out.flush()?;
    Ok(())
}

/// `None` on a clean end of stream before a new message.
pub fn read_message<R: Read>(input: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match input.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_MESSAGE_LEN {
        return Err(Error::Protocol(format!("announced message of {len} bytes exceeds the limit")));
    }
    let mut body = vec![0u8; len];
    input.read_exact(&mut body)?;
    Ok(Some(body))
}

/// Answers every message on `stream` in order until the peer closes it.
/// Returns the number of messages handled.
pub fn serve_connection<S: Read + Write>(stream: &mut S, server: &EdgeServer) -> Result<usize> {
    let mut handled = 0;
    while let Some(body) = read_message(stream)? {
        write_message(stream, &server.handle(&body).to_bytes())?;
        handled += 1;
    }
    Ok(handled)
}

/// Accepts connections one after another; stops after `max_connections`
/// when given.
pub fn run_server(listener: &TcpListener, server: &EdgeServer, max_connections: Option<usize>) -> Result<usize> {
    let mut total = 0;
    for (i, conn) in listener.incoming().enumerate() {
        let mut stream = conn?;
        stream.set_nodelay(true)?;
        total += serve_connection(&mut stream, server)?;
        if max_connections.is_some_and(|m| i + 1 >= m) {
            break;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub mode: ExecutionMode,
    pub policy: TilePolicy,
    pub capture_interval: f64,
    pub queue_capacity: usize,
    pub luminosity: f64,
    pub strategy: Strategy,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            mode: ExecutionMode::Pipelined,
            policy: TilePolicy::Adaptive,
            capture_interval: DEFAULT_CAPTURE_INTERVAL,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            luminosity: 1.0,
            strategy: Strategy::default(),
        }
    }
}

/// Offload-path state: controller, bandwidth estimate, and a slot where the
/// reader leaves the newest result.
struct Offload {
    inbox: Arc<Mutex<Vec<(u64, Vec<BoundingBox>)>>>,
    /// Tiles carried by frames whose results are still outstanding.
    in_flight: std::collections::VecDeque<(u64, Vec<usize>)>,
    controller: Controller,
    weights: CodecWeights,
    geometry: Option<FrameGeometry>,
    policy: TilePolicy,
    luminosity: f64,
    strategy: Strategy,
    eab: f64,
}

struct Sent {
    frame_id: u64,
    bytes: usize,
    tiles: usize,
    config: crate::codec::CodecConfig,
    key_frame: bool,
    eab: f64,
    uplink_start: Instant,
    uplink_end: Instant,
    error: bool,
}

impl Offload {
    fn send<W: Write>(&mut self, out: &mut W, frame_id: u64, scene: &SyntheticScene) -> Result<Sent> {
        let arrived = std::mem::take(&mut *self.inbox.lock().expect("inbox poisoned"));
        for (id, boxes) in arrived {
            while let Some((sent_id, tiles)) = self.in_flight.pop_front() {
                if sent_id == id {
                    self.controller.deliver_feedback(&tiles, boxes);
                    break;
                }
            }
        }
        let mut plan = self.controller.adapt(self.eab);
        if self.policy == TilePolicy::AllTiles && !plan.key_frame {
            plan.tiles = (0..self.controller.grid().tile_count()).collect();
            plan.config = select_config(self.controller.lut(), plan.tiles.len(), self.eab);
        }
        let frame = if self.luminosity == 1.0 {
            scene.frame.clone()
        } else {
            scale_luminosity(&scene.frame, self.luminosity)?
        };
        let geometry = match self.geometry {
            Some(g) => g,
            None => *self.geometry.insert(FrameGeometry::from_grid(self.controller.grid(), frame.pattern())?),
        };
        let enc = encode_frame(&frame, self.controller.grid(), &plan.tiles, plan.config, &self.weights, self.strategy)?;
        let body = FrameMessage {
            frame_id,
            key_frame: plan.key_frame,
            config: enc.config,
            quant: enc.quant,
            geometry,
            tiles: enc.tiles,
        }
        .to_bytes()?;
        self.in_flight.push_back((frame_id, plan.tiles.clone()));
        let uplink_start = Instant::now();
        let error = write_message(out, &body).is_err();
        let uplink_end = Instant::now();
        let sample = BandwidthSample {
            bytes: body.len() as u64,
            t_start: 0.0,
            t_end: (uplink_end - uplink_start).as_secs_f64(),
        };
        let eab = self.eab;
        if !error {
            if let Ok(rate) = estimate_bandwidth(&sample) {
                self.eab = rate;
            }
        }
        Ok(Sent {
            frame_id,
            bytes: body.len(),
            tiles: plan.tiles.len(),
            config: plan.config,
            key_frame: plan.key_frame,
            eab,
            uplink_start,
            uplink_end,
            error,
        })
    }
}

fn metrics(
    origin: Instant,
    sent: &Sent,
    captured: Instant,
    rendered: Instant,
    reply: Option<ResultMessage>,
    truth: Vec<BoundingBox>,
) -> FrameMetrics {
    let secs = |t: Instant| t.saturating_duration_since(origin).as_secs_f64();
    let ok = reply.as_ref().is_some_and(|r| r.status == ResultStatus::Ok);
    FrameMetrics {
        frame_id: sent.frame_id,
        captured_at: secs(captured),
        rendered_at: secs(rendered),
        e2e_latency: rendered.saturating_duration_since(captured).as_secs_f64(),
        transmitted_bytes: sent.bytes,
        tiles_sent: sent.tiles,
        config_used: sent.config,
        key_frame: sent.key_frame,
        eab: sent.eab,
        uplink_start: secs(sent.uplink_start),
        uplink_end: secs(sent.uplink_end),
        service_time: 0.0,
        queue_wait: 0.0,
        detections: reply.map(|r| r.detections).unwrap_or_default(),
        truth,
        dropped: sent.error || !ok,
    }
}

/// Streams `scenes` to a server over `stream` and records per-frame metrics
/// with wall-clock timestamps. Transport failures mark frames as dropped.
pub fn run_client<I>(
    stream: TcpStream,
    scenes: I,
    controller: Controller,
    weights: CodecWeights,
    cfg: &ClientConfig,
) -> Result<Vec<FrameMetrics>>
where
    I: IntoIterator<Item = SyntheticScene>,
    I::IntoIter: Send,
{
    stream.set_nodelay(true)?;
    let offload = Offload {
        inbox: Arc::default(),
        in_flight: Default::default(),
        controller,
        weights,
        geometry: None,
        policy: cfg.policy,
        luminosity: cfg.luminosity,
        strategy: cfg.strategy,
        eab: f64::INFINITY,
    };
    match cfg.mode {
        ExecutionMode::Serialized => run_serialized(stream, scenes, offload, cfg),
        ExecutionMode::Pipelined => run_pipelined(stream, scenes, offload, cfg),
    }
}

fn pace(origin: Instant, index: usize, interval: f64) {
    let due = origin + Duration::from_secs_f64(index as f64 * interval);
    if let Some(d) = due.checked_duration_since(Instant::now()) {
        thread::sleep(d);
    }
}

fn run_serialized<I: IntoIterator<Item = SyntheticScene>>(
    mut stream: TcpStream,
    scenes: I,
    mut offload: Offload,
    cfg: &ClientConfig,
) -> Result<Vec<FrameMetrics>> {
    let origin = Instant::now();
    let mut out = Vec::new();
    for (i, scene) in scenes.into_iter().enumerate() {
        pace(origin, i, cfg.capture_interval);
        let captured = Instant::now();
        let _rgb = demosaic_bilinear(&scene.frame);
        let sent = offload.send(&mut stream, i as u64, &scene)?;
        let reply = if sent.error {
            None
        } else {
            read_message(&mut stream).ok().flatten().and_then(|b| ResultMessage::from_bytes(&b).ok())
        };
        if let Some(r) = reply.as_ref().filter(|r| r.status == ResultStatus::Ok) {
            offload.inbox.lock().expect("inbox poisoned").push((r.frame_id, r.detections.clone()));
        }
        out.push(metrics(origin, &sent, captured, Instant::now(), reply, scene.truth));
    }
    Ok(out)
}

fn run_pipelined<I>(stream: TcpStream, scenes: I, offload: Offload, cfg: &ClientConfig) -> Result<Vec<FrameMetrics>>
where
    I: IntoIterator<Item = SyntheticScene>,
    I::IntoIter: Send,
{
    let cap = cfg.queue_capacity.max(1);
    let interval = cfg.capture_interval;
    let origin = Instant::now();
    let (to_encode, encode_rx) = sync_channel::<(u64, Instant, SyntheticScene)>(cap);
    let (to_demosaic, demosaic_rx) = sync_channel::<(u64, SyntheticScene)>(cap);
    let (demosaiced, demosaic_done) = sync_channel::<u64>(cap);
    let (sent_tx, sent_rx) = sync_channel::<(Sent, Instant, Vec<BoundingBox>)>(cap);
    let (reply_tx, reply_rx) = sync_channel::<Option<ResultMessage>>(cap);
    let inbox = Arc::clone(&offload.inbox);
    let mut offload = offload;
    let mut writer = stream.try_clone()?;
    let mut reader = stream;
    let scenes = scenes.into_iter();

    thread::scope(|s| -> Result<Vec<FrameMetrics>> {
        s.spawn(move || {
            for (i, scene) in scenes.enumerate() {
                pace(origin, i, interval);
                let captured = Instant::now();
                if to_demosaic.send((i as u64, scene.clone())).is_err()
                    || to_encode.send((i as u64, captured, scene)).is_err()
                {
                    break;
                }
            }
        });
        s.spawn(move || {
            for (id, scene) in demosaic_rx {
                let _rgb = demosaic_bilinear(&scene.frame);
                if demosaiced.send(id).is_err() {
                    break;
                }
            }
        });
        let sender = s.spawn(move || -> Result<()> {
            let mut result = Ok(());
            for (id, captured, scene) in encode_rx {
                match offload.send(&mut writer, id, &scene) {
                    Ok(sent) => {
                        if sent_tx.send((sent, captured, scene.truth)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
            // Half-close lets the server drain and hang up, which ends the reader.
            let how = if result.is_ok() { Shutdown::Write } else { Shutdown::Both };
            let _ = writer.shutdown(how);
            result
        });
        s.spawn(move || loop {
            let reply = match read_message(&mut reader) {
                Ok(Some(body)) => ResultMessage::from_bytes(&body).ok(),
                Ok(None) | Err(_) => break,
            };
            if let Some(r) = reply.as_ref().filter(|r| r.status == ResultStatus::Ok) {
                inbox.lock().expect("inbox poisoned").push((r.frame_id, r.detections.clone()));
            }
            if reply_tx.send(reply).is_err() {
                break;
            }
        });

        let out = render(origin, sent_rx, reply_rx, demosaic_done);
        sender.join().expect("sender thread panicked")?;
        Ok(out)
    })
}

/// Joins the offload and demosaic paths per frame, in order.
fn render(
    origin: Instant,
    sent_rx: Receiver<(Sent, Instant, Vec<BoundingBox>)>,
    reply_rx: Receiver<Option<ResultMessage>>,
    demosaic_done: Receiver<u64>,
) -> Vec<FrameMetrics> {
    let mut out = Vec::new();
    for (sent, captured, truth) in sent_rx {
        let reply = if sent.error { None } else { reply_rx.recv().ok().flatten() };
        let _ = demosaic_done.recv();
        let reply = reply.filter(|r| r.frame_id == sent.frame_id);
        out.push(metrics(origin, &sent, captured, Instant::now(), reply, truth));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_roundtrip() {
        let mut buf = Vec::new();
        write_message(&mut buf, b"hello").unwrap();
        write_message(&mut buf, b"").unwrap();
        assert_eq!(&buf[..4], &5u32.to_le_bytes());
        let mut r = &buf[..];
        assert_eq!(read_message(&mut r).unwrap().unwrap(), b"hello");
        assert_eq!(read_message(&mut r).unwrap().unwrap(), b"");
        assert!(read_message(&mut r).unwrap().is_none());
        let mut truncated = &buf[..6];
        assert!(read_message(&mut truncated).is_err());
        let huge = (MAX_MESSAGE_LEN as u32 + 1).to_le_bytes();
        assert!(read_message(&mut &huge[..]).is_err());
    }
}
