//! Ground-truth and observation simulation.

use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::motion::MotionModel;
use crate::rfs::{Kinematic, Label, LabeledState};
use crate::sensors::{ObservationFrame, SensorModel};
use crate::smc::RandomStream;

/// Ground truth for one run: the labeled object states present at each step.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub steps: Vec<Vec<LabeledState>>,
}

impl GroundTruth {
    pub fn positions(&self, step: usize) -> Vec<[f64; 2]> {
        self.steps[step].iter().map(|s| s.position()).collect()
    }

    pub fn cardinality(&self, step: usize) -> usize {
        self.steps[step].len()
    }
}

/// Simulates the configured trajectories: objects initialize at their birth
/// step and propagate through the motion model (with its process noise), or
/// follow piecewise-linear waypoints when given. Deterministic in the
/// stream.
pub fn generate_truth(
    cfg: &ScenarioConfig,
    motion: &MotionModel,
    stream: RandomStream,
) -> Result<GroundTruth> {
    let mut steps: Vec<Vec<LabeledState>> = vec![Vec::new(); cfg.duration];
    for (i, trajectory) in cfg.trajectories.iter().enumerate() {
        let label = Label::new(trajectory.birth_step as u32, i as u32 + 1);
        let mut rng = stream.child(i as u64).rng();
        match &trajectory.waypoints {
            Some(waypoints) => {
                for k in trajectory.birth_step..trajectory.death_step.min(cfg.duration) {
                    let state = waypoint_state(waypoints, k, motion.step_seconds());
                    steps[k].push(LabeledState::new(state, label));
                }
            }
            None => {
                let mut x = Kinematic::from_column_slice(&trajectory.init);
                for k in trajectory.birth_step..trajectory.death_step.min(cfg.duration) {
                    if k > trajectory.birth_step {
                        x = motion.propagate(&x, &mut rng);
                    }
                    steps[k].push(LabeledState::new(x, label));
                }
            }
        }
    }
    for step in &mut steps {
        step.sort_by_key(|s| s.label);
    }
    Ok(GroundTruth { steps })
}

fn waypoint_state(
    waypoints: &[crate::harness::config::Waypoint],
    step: usize,
    dt: f64,
) -> Kinematic {
    // Piecewise-linear position; velocity from the active segment slope.
    let first = &waypoints[0];
    let last = &waypoints[waypoints.len() - 1];
    let (a, b) = if step <= first.step {
        (&waypoints[0], &waypoints[1])
    } else if step >= last.step {
        (&waypoints[waypoints.len() - 2], last)
    } else {
        let hi = waypoints.partition_point(|w| w.step <= step);
        (&waypoints[hi - 1], &waypoints[hi])
    };
    let span = (b.step - a.step) as f64;
    let t = ((step as f64 - a.step as f64) / span).clamp(0.0, 1.0);
    let vx = (b.x - a.x) / (span * dt);
    let vy = (b.y - a.y) / (span * dt);
    Kinematic::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), vx, vy)
}

/// Simulates one observation frame per step from the truth.
pub fn simulate_frames(
    truth: &GroundTruth,
    sensor: &SensorModel,
    stream: RandomStream,
) -> Vec<ObservationFrame> {
    truth
        .steps
        .iter()
        .enumerate()
        .map(|(k, objects)| {
            let states: Vec<Kinematic> = objects.iter().map(|s| s.kinematic).collect();
            let mut rng = stream.child(k as u64).rng();
            sensor.sample_frame(&states, &mut rng)
        })
        .collect()
}
