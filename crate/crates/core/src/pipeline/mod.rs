//! Client/server offloading: wire messages, the edge server, the
//! virtual-clock simulator and the wall-clock TCP transport.

mod scenario;
mod server;
mod sim;
mod transport;
mod wire;

pub use scenario::{Scenario, TraceSource};
pub use server::EdgeServer;
pub use sim::{
    run_simulation, ExecutionMode, FrameMetrics, RunSummary, SimConfig, SimulationRun, StageTiming, TilePolicy,
    DEFAULT_CAPTURE_INTERVAL, DEFAULT_QUEUE_CAPACITY,
};
pub use transport::{
    read_message, run_client, run_server, serve_connection, write_message, ClientConfig, MAX_MESSAGE_LEN,
};
pub use wire::{
    peek_frame_id, FrameGeometry, FrameMessage, ResultMessage, ResultStatus, DETECTION_RECORD_LEN,
    FRAME_HEADER_LEN, FRAME_MAGIC, RESULT_HEADER_LEN, RESULT_MAGIC, WIRE_VERSION,
};
