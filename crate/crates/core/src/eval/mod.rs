//! Reference detector, detection metrics, offline profiling, experiment
//! driver and report writers.

mod detect;
mod experiment;
mod metrics;
mod profile;
mod report;

pub use detect::{detect, iou, Detector};
pub use experiment::{resolve_lut, run_experiment, ExperimentConfig, ExperimentOutcome};
pub use metrics::{
    average_precision, evaluate, evaluate_at, ApResult, ClassAp, PrPoint, DEFAULT_CONF_THRESHOLD,
    DEFAULT_IOU_THRESHOLD,
};
pub use profile::{generate_corpus, profile_offline, Profile, ProfileRow};
pub use report::{
    frames_csv, latency_svg, pareto_svg, parse_frame_boxes, profile_csv, summary_text, write_frame_boxes,
    FRAMES_CSV_HEADER, PROFILE_CSV_HEADER,
};
