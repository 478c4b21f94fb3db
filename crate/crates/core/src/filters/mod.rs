//! The three filter recursions over labeled multi-object densities: the
//! exact mixture-form recursion, its multi-Bernoulli collapse, and the
//! grouping-parallelized variant.

mod lmb;
mod lmo;
pub mod snapshot;

pub use lmb::{g_lmb_gom_step, lmb_gom_update, lmb_grouped_update, lmb_predict, StepDiagnostics};
pub use lmo::{lmo_gom_step, lmo_predicted_weights, lmo_reweight, PredictedWeightTable};

pub(crate) use lmo::predicted_masks;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs shared by every filter.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Particle budget per hypothesis (and per collapsed track).
    pub particles_per_hypothesis: usize,
    /// Normalized hypothesis weights below this are discarded.
    pub hypothesis_weight_floor: f64,
    /// At most this many hypotheses are kept, by weight.
    pub max_hypotheses: usize,
    /// Tracks below this existence probability are excluded from hypothesis
    /// enumeration and carried through updates unchanged.
    pub existence_floor: f64,
    /// Existence threshold for reporting state estimates.
    pub extraction_threshold: f64,
    /// Resample a particle cloud when its effective sample size falls to
    /// this fraction of the particle count; 1.0 resamples every update.
    pub ess_ratio: f64,
    /// Carried tracks whose existence decays below this are dropped so dead
    /// birth tracks do not accumulate across a long run.
    pub track_drop_floor: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            particles_per_hypothesis: 2000,
            hypothesis_weight_floor: 1e-4,
            max_hypotheses: 64,
            existence_floor: 1e-3,
            extraction_threshold: 0.5,
            ess_ratio: 1.0,
            track_drop_floor: 1e-5,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..1.0).contains(&v);
        if self.particles_per_hypothesis == 0 || self.max_hypotheses == 0 {
            return Err(Error::InvalidConfig(
                "particle and hypothesis budgets must be positive".into(),
            ));
        }
        if !in_unit(self.hypothesis_weight_floor)
            || !in_unit(self.existence_floor)
            || !in_unit(self.extraction_threshold)
            || !in_unit(self.track_drop_floor)
        {
            return Err(Error::InvalidConfig(
                "floors and thresholds must lie in [0,1)".into(),
            ));
        }
        if !(self.ess_ratio > 0.0 && self.ess_ratio <= 1.0) {
            return Err(Error::InvalidConfig("ess_ratio must lie in (0,1]".into()));
        }
        Ok(())
    }

    /// Exact-arithmetic settings for enumeration tests: nothing truncated,
    /// nothing gated.
    pub fn exhaustive(self) -> Self {
        FilterConfig {
            hypothesis_weight_floor: 0.0,
            max_hypotheses: usize::MAX,
            existence_floor: 0.0,
            track_drop_floor: 0.0,
            ..self
        }
    }
}

/// Stream tags separating the independent randomness consumers of a step.
pub(crate) mod tags {
    pub const PREDICT_SURVIVE: u64 = 0x55;
    pub const PREDICT_BIRTH: u64 = 0x66;
    pub const UPDATE_HYP: u64 = 0x77;
    pub const COLLAPSE: u64 = 0x88;
    pub const GROUP: u64 = 0x99;
}

/// Drops entries below the floor, keeps the top `cap` by weight and
/// renormalizes. Falls back to the single best entry if the floor would
/// empty the table.
pub(crate) fn truncate_weighted<T>(
    items: &mut Vec<(T, f64)>,
    floor: f64,
    cap: usize,
) -> Result<()> {
    if items.is_empty() {
        return Err(Error::ZeroWeightSum);
    }
    if floor > 0.0 {
        let best = items
            .iter()
            .map(|(_, w)| *w)
            .fold(f64::NEG_INFINITY, f64::max);
        let effective = floor.min(best);
        items.retain(|(_, w)| *w >= effective);
    }
    if items.len() > cap {
        items.sort_by(|a, b| b.1.total_cmp(&a.1));
        items.truncate(cap);
    }
    let sum: f64 = items.iter().map(|(_, w)| *w).sum();
    if !(sum > 0.0) {
        return Err(Error::ZeroWeightSum);
    }
    for (_, w) in items.iter_mut() {
        *w /= sum;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_floor_and_cap() {
        let mut items = vec![("a", 0.5), ("b", 0.3), ("c", 0.15), ("d", 0.05)];
        truncate_weighted(&mut items, 0.1, 2).unwrap();
        assert_eq!(items.len(), 2);
        let sum: f64 = items.iter().map(|(_, w)| w).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(items[0].0, "a");
    }

    #[test]
    fn truncation_keeps_best_when_floor_too_high() {
        let mut items = vec![("a", 0.6), ("b", 0.4)];
        truncate_weighted(&mut items, 0.9, 10).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].0, "a");
        assert!((items[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        let bad = FilterConfig {
            ess_ratio: 0.0,
            ..FilterConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
