//! RAW-frame edge offloading: a tile-wise Bayer codec, a bandwidth-adaptive
//! transmission controller, a fluid link simulator and a pipelined
//! client/server harness with detection-accuracy evaluation.

pub mod error;
pub mod par;
pub mod codec;
pub mod rawframe;
pub mod controller;
pub mod netsim;
pub mod pipeline;
pub mod eval;

pub use error::{Error, Result};
