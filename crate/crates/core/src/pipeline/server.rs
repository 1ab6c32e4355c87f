use super::wire::{peek_frame_id, FrameMessage, ResultMessage, ResultStatus};
use crate::codec::{decode_frame, CodecWeights, DEFAULT_FILL};
use crate::error::Result;
use crate::eval::Detector;
use crate::par::Strategy;
use crate::rawframe::{demosaic_bilinear, BayerFrame, BoundingBox};

/// Decoder side: reconstructs the canvas from received tiles and runs the
/// downstream detector on it.
#[derive(Debug, Clone)]
pub struct EdgeServer {
    weights: CodecWeights,
    detector: Detector,
    fill: u8,
    strategy: Strategy,
}

impl EdgeServer {
    pub fn new(weights: CodecWeights, detector: Detector) -> Self {
        EdgeServer { weights, detector, fill: DEFAULT_FILL, strategy: Strategy::default() }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_fill(mut self, fill: u8) -> Self {
        self.fill = fill;
        self
    }

    pub fn weights(&self) -> &CodecWeights {
        &self.weights
    }

    /// Canvas the detector sees for `msg`.
    pub fn reconstruct(&self, msg: &FrameMessage) -> Result<BayerFrame> {
        let grid = msg.geometry.grid()?;
        decode_frame(&msg.tiles, &grid, msg.geometry.pattern, &self.weights, self.fill, self.strategy)
    }

    /// All detections on the reconstructed frame; the client applies its
    /// own confidence cut.
    pub fn process(&self, msg: &FrameMessage) -> Result<Vec<BoundingBox>> {
        let canvas = self.reconstruct(msg)?;
        Ok(self.detector.detect(&demosaic_bilinear(&canvas), 0.0))
    }

    /// Never fails: malformed input yields an error-status reply that echoes
    /// the frame id when the header is readable (0 otherwise).
    pub fn handle(&self, bytes: &[u8]) -> ResultMessage {
        let outcome = FrameMessage::from_bytes(bytes).and_then(|m| Ok((m.frame_id, self.process(&m)?)));
        match outcome {
            Ok((frame_id, detections)) => ResultMessage { frame_id, status: ResultStatus::Ok, detections },
            Err(_) => ResultMessage {
                frame_id: peek_frame_id(bytes).unwrap_or(0),
                status: ResultStatus::Error,
                detections: Vec::new(),
            },
        }
    }
}
