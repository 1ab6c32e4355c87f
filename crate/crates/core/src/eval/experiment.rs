use std::path::PathBuf;

use super::detect::Detector;
use super::profile::{generate_corpus, profile_offline, Profile};
use super::report::{frames_csv, latency_svg, summary_text};
use crate::codec::CodecWeights;
use crate::controller::{Controller, Lut};
use crate::error::Result;
use crate::pipeline::{run_simulation, EdgeServer, Scenario, SimulationRun, TilePolicy};

/// Seed offset separating the profiling corpus from the run's scenes.
const PROFILE_SEED_OFFSET: u64 = 1_000_003;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Overrides the scenario's tile policy.
    pub policy: Option<TilePolicy>,
    /// Overrides the scenario's luminosity factor.
    pub luminosity: Option<f64>,
    /// Ignore any weight file named by the scenario.
    pub default_weights: bool,
    /// Directory for `frames.csv`, `summary.txt` and `latency.svg`.
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig { scenario, policy: None, luminosity: None, default_weights: false, output: None }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub run: SimulationRun,
    pub lut: Lut,
    /// Present when the LUT was profiled rather than loaded.
    pub profile: Option<Profile>,
}

/// The scenario's LUT file, or a profile over a corpus disjoint from the
/// scenario's own scenes.
pub fn resolve_lut(scenario: &Scenario, weights: &CodecWeights) -> Result<(Lut, Option<Profile>)> {
    if let Some(lut) = scenario.load_lut()? {
        return Ok((lut, None));
    }
    let corpus = generate_corpus(
        scenario.seed.wrapping_add(PROFILE_SEED_OFFSET),
        scenario.profile_scenes.max(1),
        scenario.width,
        scenario.height,
        scenario.objects,
        scenario.pattern,
    )?;
    let profile = profile_offline(
        &corpus,
        weights,
        &Detector::default(),
        &scenario.grid()?,
        scenario.tx_threshold,
        scenario.sim.strategy,
    )?;
    Ok((profile.lut.clone(), Some(profile)))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut scenario = cfg.scenario.clone();
    if let Some(p) = cfg.policy {
        scenario.sim.policy = p;
    }
    if let Some(l) = cfg.luminosity {
        scenario.sim.luminosity = l;
    }
    if cfg.default_weights {
        scenario.weights = None;
    }
    let weights = scenario.codec_weights()?;
    let (lut, profile) = resolve_lut(&scenario, &weights)?;
    let controller = Controller::new(lut.clone(), scenario.grid()?, scenario.window)?;
    let server = EdgeServer::new(weights.clone(), Detector::default()).with_strategy(scenario.sim.strategy);
    let run = run_simulation(
        scenario.scenes()?.take(scenario.frames),
        &scenario.trace()?,
        controller,
        &weights,
        &server,
        &scenario.sim,
    )?;
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("frames.csv"), frames_csv(&run.frames))?;
        std::fs::write(dir.join("summary.txt"), summary_text(&run.summary))?;
        std::fs::write(dir.join("latency.svg"), latency_svg(&run.frames))?;
    }
    Ok(ExperimentOutcome { run, lut, profile })
}
