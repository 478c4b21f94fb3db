//! The Monte-Carlo experiment driver.
//!
//! Runs are independent: each derives its own random stream from the run
//! index, simulates truth and frames, drives the configured filter and
//! scores it. Runs execute on a worker pool and are aggregated in run-index
//! order, so outputs are identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{
    lmb_grouped_update, lmo_gom_step, lmo_reweight, g_lmb_gom_step, FilterConfig,
};
use crate::harness::config::{FilterKind, ScenarioConfig};
use crate::harness::scenario::{generate_truth, simulate_frames, GroundTruth};
use crate::metrics::ospa;
use crate::rfs::{best_lmb_approx, Kinematic, LmbDensity, LmoDensity};
use crate::sensors::{ObservationFrame, SensorModel};
use crate::smc::RandomStream;

const TAG_TRUTH: u64 = 0x11;
const TAG_FRAMES: u64 = 0x22;
const TAG_FILTER: u64 = 0x33;
const TAG_INIT: u64 = 0x44;

/// One reported track at one step.
#[derive(Clone, Debug, Serialize)]
pub struct TrackRow {
    pub label: [u32; 2],
    pub existence: f64,
    pub position: [f64; 2],
}

/// Per-step record of one run.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub ospa: f64,
    pub est_cardinality: usize,
    pub true_cardinality: usize,
    pub frame_ms: f64,
    pub group_count: Option<usize>,
    pub tracks: Vec<TrackRow>,
    pub groups: Vec<(String, usize)>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub run: usize,
    pub steps: Vec<StepRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config_echo: String,
    pub runs: Vec<RunResult>,
    pub warnings: Vec<String>,
    /// Frames of run 0, kept when frame export was requested.
    pub exported_frames: Option<Vec<ObservationFrame>>,
}

impl ExperimentResult {
    pub fn successful_runs(&self) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(|r| r.error.is_none())
    }
}

enum FilterState {
    Lmb(LmbDensity<Kinematic>),
    Lmo(LmoDensity<Kinematic>),
}

/// Executes the configured experiment. `threads` bounds the worker pool
/// (`None` uses the process default).
pub fn run_experiment(cfg: &ScenarioConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sensor = cfg.sensor.build()?;
    let motion = cfg.motion.build()?;
    let birth = cfg.birth_model()?;
    let config_echo = cfg.echo_json()?;

    let run_one = |run: usize| -> RunResult {
        match simulate_run(cfg, &sensor, &motion, &birth, run) {
            Ok(steps) => RunResult {
                run,
                steps,
                error: None,
            },
            Err(e) => RunResult {
                run,
                steps: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    };

    let runs: Vec<RunResult> = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| (0..cfg.runs).into_par_iter().map(run_one).collect())
        }
        None => (0..cfg.runs).into_par_iter().map(run_one).collect(),
    };

    let failed: Vec<&RunResult> = runs.iter().filter(|r| r.error.is_some()).collect();
    let mut warnings = Vec::new();
    if !failed.is_empty() {
        if failed.len() * 10 > cfg.runs {
            return Err(Error::TooManyFailedRuns {
                failed: failed.len(),
                total: cfg.runs,
                first: failed[0].error.clone().unwrap_or_default(),
            });
        }
        for r in &failed {
            warnings.push(format!(
                "run {} failed and is excluded from aggregates: {}",
                r.run,
                r.error.as_deref().unwrap_or("unknown")
            ));
        }
    }

    let exported_frames = if cfg.export_frames {
        let run_stream = RandomStream::root(cfg.seed).child(0);
        let truth = generate_truth(cfg, &motion, run_stream.child(TAG_TRUTH))?;
        Some(simulate_frames(&truth, &sensor, run_stream.child(TAG_FRAMES)))
    } else {
        None
    };

    Ok(ExperimentResult {
        config_echo,
        runs,
        warnings,
        exported_frames,
    })
}

/// Simulates truth and frames for one run without filtering.
pub fn simulate_truth_and_frames(
    cfg: &ScenarioConfig,
    run: usize,
) -> Result<(GroundTruth, Vec<ObservationFrame>)> {
    let sensor = cfg.sensor.build()?;
    let motion = cfg.motion.build()?;
    let run_stream = RandomStream::root(cfg.seed).child(run as u64);
    let truth = generate_truth(cfg, &motion, run_stream.child(TAG_TRUTH))?;
    let frames = simulate_frames(&truth, &sensor, run_stream.child(TAG_FRAMES));
    Ok((truth, frames))
}

fn simulate_run(
    cfg: &ScenarioConfig,
    sensor: &SensorModel,
    motion: &crate::motion::MotionModel,
    birth: &crate::motion::BirthModel,
    run: usize,
) -> Result<Vec<StepRecord>> {
    let run_stream = RandomStream::root(cfg.seed).child(run as u64);
    let truth = generate_truth(cfg, motion, run_stream.child(TAG_TRUTH))?;
    let frames = simulate_frames(&truth, sensor, run_stream.child(TAG_FRAMES));
    let fc: &FilterConfig = &cfg.filter_config;

    let has_init = cfg.init_tracks.as_ref().is_some_and(|v| !v.is_empty());
    let init_lmb = cfg.initial_density(fc.particles_per_hypothesis, run_stream.child(TAG_INIT))?;

    let mut state = match cfg.filter {
        FilterKind::LmoGom => {
            let mut rng = run_stream.child(TAG_INIT).child(u64::MAX).rng();
            FilterState::Lmo(init_lmb.to_lmo(fc.particles_per_hypothesis, &mut rng)?)
        }
        _ => FilterState::Lmb(init_lmb),
    };

    let mut records = Vec::with_capacity(cfg.duration);
    for k in 0..cfg.duration {
        let frame = &frames[k];
        let step_stream = run_stream.child(TAG_FILTER).child(k as u64);
        let start = std::time::Instant::now();

        let mut group_count = None;
        state = match state {
            FilterState::Lmb(prior) => {
                let grouping = match cfg.filter {
                    FilterKind::GLmbGom => cfg.grouping.as_ref(),
                    _ => None,
                };
                let (posterior, diagnostics) = if k == 0 && has_init {
                    lmb_grouped_update(
                        &prior,
                        sensor,
                        frame,
                        grouping,
                        fc,
                        k as u32,
                        step_stream,
                    )?
                } else {
                    g_lmb_gom_step(
                        &prior,
                        birth,
                        motion,
                        sensor,
                        frame,
                        grouping,
                        fc,
                        k as u32,
                        step_stream,
                    )?
                };
                if cfg.filter == FilterKind::GLmbGom {
                    group_count = Some(diagnostics.groups.len());
                }
                let groups = diagnostics
                    .groups
                    .iter()
                    .map(|(labels, obs)| (labels.to_string(), *obs))
                    .collect();
                record_step(
                    &mut records,
                    &truth,
                    cfg,
                    k,
                    start,
                    group_count,
                    groups,
                    &posterior,
                )?;
                FilterState::Lmb(posterior)
            }
            FilterState::Lmo(prior) => {
                let prepared = sensor.prepared(frame, None)?;
                let posterior = if k == 0 && has_init {
                    lmo_reweight(&prior, &prepared, fc, k as u32, step_stream)?
                } else {
                    lmo_gom_step(
                        &prior, birth, motion, &prepared, k as u32, fc, step_stream,
                    )?
                };
                let collapsed = best_lmb_approx(&posterior);
                record_step(
                    &mut records,
                    &truth,
                    cfg,
                    k,
                    start,
                    None,
                    Vec::new(),
                    &collapsed,
                )?;
                FilterState::Lmo(posterior)
            }
        };
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn record_step(
    records: &mut Vec<StepRecord>,
    truth: &GroundTruth,
    cfg: &ScenarioConfig,
    k: usize,
    start: std::time::Instant,
    group_count: Option<usize>,
    groups: Vec<(String, usize)>,
    posterior: &LmbDensity<Kinematic>,
) -> Result<()> {
    let frame_ms = start.elapsed().as_secs_f64() * 1e3;
    let estimates = posterior.extract_estimates(cfg.filter_config.extraction_threshold);
    let est_positions: Vec<[f64; 2]> = estimates.iter().map(|e| e.position()).collect();
    let true_positions = truth.positions(k);
    let error = ospa(&est_positions, &true_positions, &cfg.ospa);
    let tracks = posterior
        .iter()
        .map(|(label, t)| TrackRow {
            label: [label.birth_time, label.birth_index],
            existence: t.existence,
            position: mean_position(&t.cloud),
        })
        .collect();
    records.push(StepRecord {
        ospa: error,
        est_cardinality: estimates.len(),
        true_cardinality: truth.cardinality(k),
        frame_ms,
        group_count,
        tracks,
        groups,
    });
    Ok(())
}

fn mean_position(cloud: &[(f64, Kinematic)]) -> [f64; 2] {
    let mut p = [0.0, 0.0];
    let mut mass = 0.0;
    for (w, x) in cloud {
        p[0] += w * x[0];
        p[1] += w * x[1];
        mass += w;
    }
    if mass > 0.0 {
        [p[0] / mass, p[1] / mass]
    } else {
        p
    }
}
