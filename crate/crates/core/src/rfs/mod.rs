//! Labeled-RFS domain types and density operations.
//!
//! A labeled multi-object (LMO) density is held in mixture form: a table of
//! label-set hypotheses, each carrying a joint existence weight and a joint
//! particle cloud over the states of exactly those labels. The labeled
//! multi-Bernoulli (LMB) density is the per-track collapsed form. Types are
//! generic over the single-object state so the same operations run on
//! continuous 4-vector states and on enumerated finite toy spaces.

mod label;
mod lmb;
mod lmo;
mod particles;
mod phd;

pub use label::{Label, LabelSet};
pub use lmb::{LmbDensity, Track};
pub use lmo::{kld_discrete, Hypothesis, LmoDensity};
pub use particles::{JointParticles, Particle};
pub use phd::{best_lmb_approx, labeled_phd_lmb, labeled_phd_lmo, LabeledPhd};

/// Planar position/velocity state `[p_x, p_y, v_x, v_y]` in meters and m/s.
pub type Kinematic = nalgebra::Vector4<f64>;

/// A kinematic state paired with its track label.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LabeledState {
    pub kinematic: Kinematic,
    pub label: Label,
}

impl LabeledState {
    pub fn new(kinematic: Kinematic, label: Label) -> Self {
        debug_assert!(kinematic.iter().all(|v| v.is_finite()));
        LabeledState { kinematic, label }
    }

    /// Planar position block.
    pub fn position(&self) -> [f64; 2] {
        [self.kinematic[0], self.kinematic[1]]
    }
}

/// Tracks whose existence collapses below this are dropped rather than
/// carried with an ill-conditioned normalized density.
pub(crate) const EXISTENCE_EPSILON: f64 = 1e-12;

/// Hard cap on label universes that get their subsets enumerated.
pub(crate) const ENUMERATION_CAP: usize = 20;
