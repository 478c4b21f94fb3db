//! Observation models with generic (non-detection) likelihoods: pixeled
//! track-before-detect imagery and an acoustic amplitude sensor network,
//! plus the observation-region machinery the grouping step builds on.

mod acoustic;
mod tbd;

pub use acoustic::AcousticModel;
pub use tbd::{PixelGrid, TbdModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::{Kinematic, LabelSet};

/// One time step of sensor output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ObservationFrame {
    /// Per-cell intensity image, row-major, length `width * height`.
    Tbd(Vec<f64>),
    /// Per-sensor amplitude readings.
    Acoustic(Vec<f64>),
}

impl ObservationFrame {
    pub fn values(&self) -> &[f64] {
        match self {
            ObservationFrame::Tbd(v) | ObservationFrame::Acoustic(v) => v,
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }
}

/// A subset of observation indices (cells or sensors), sorted and distinct.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region(Vec<usize>);

impl Region {
    pub fn empty() -> Self {
        Region(Vec::new())
    }

    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Region(indices)
    }

    pub fn full(len: usize) -> Self {
        Region((0..len).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Region::new(v)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        let (small, large) = if self.0.len() <= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        Region(
            small
                .0
                .iter()
                .copied()
                .filter(|i| large.contains(*i))
                .collect(),
        )
    }

    /// Indices in `self` but not in `other`.
    pub fn difference(&self, other: &Region) -> Region {
        Region(
            self.0
                .iter()
                .copied()
                .filter(|i| !other.contains(*i))
                .collect(),
        )
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.intersection(other).is_empty()
    }
}

/// A multi-object log-likelihood bound to one observation frame.
///
/// `states` are the kinematic coordinates of the hypothesized objects; the
/// label set is passed alongside for observation models that care about
/// identity (neither bundled sensor does).
pub trait JointLogLik {
    fn log_g(&self, labels: &LabelSet, states: &[Kinematic]) -> f64;
}

impl<F: Fn(&LabelSet, &[Kinematic]) -> f64> JointLogLik for F {
    fn log_g(&self, labels: &LabelSet, states: &[Kinematic]) -> f64 {
        self(labels, states)
    }
}

/// The sensor suite understood by the benchmark harness and the grouping
/// machinery. Likelihood evaluation itself stays generic in the filters.
#[derive(Clone, Debug)]
pub enum SensorModel {
    Tbd(TbdModel),
    Acoustic(AcousticModel),
}

impl SensorModel {
    pub fn frame_len(&self) -> usize {
        match self {
            SensorModel::Tbd(m) => m.grid.cell_count(),
            SensorModel::Acoustic(m) => m.sensor_count(),
        }
    }

    pub fn check_frame(&self, frame: &ObservationFrame) -> Result<()> {
        let matches_kind = matches!(
            (self, frame),
            (SensorModel::Tbd(_), ObservationFrame::Tbd(_))
                | (SensorModel::Acoustic(_), ObservationFrame::Acoustic(_))
        );
        if !matches_kind || frame.len() != self.frame_len() {
            return Err(Error::FrameMismatch {
                got: frame.len(),
                expected: self.frame_len(),
            });
        }
        Ok(())
    }

    /// Full-frame log-likelihood of a multi-object state.
    pub fn log_likelihood(&self, frame: &ObservationFrame, states: &[Kinematic]) -> Result<f64> {
        self.check_frame(frame)?;
        Ok(match self {
            SensorModel::Tbd(m) => m.log_likelihood(frame.values(), states),
            SensorModel::Acoustic(m) => m.log_likelihood(frame.values(), states),
        })
    }

    /// Log-likelihood restricted to the observation indices in `region`.
    pub fn log_likelihood_in(
        &self,
        frame: &ObservationFrame,
        region: &Region,
        states: &[Kinematic],
    ) -> Result<f64> {
        self.check_frame(frame)?;
        Ok(match self {
            SensorModel::Tbd(m) => m.log_likelihood_in(frame.values(), Some(region), states),
            SensorModel::Acoustic(m) => m.log_likelihood_in(frame.values(), Some(region), states),
        })
    }

    /// Simulates one frame for a multi-object state.
    pub fn sample_frame<R: rand::Rng>(&self, states: &[Kinematic], rng: &mut R) -> ObservationFrame {
        match self {
            SensorModel::Tbd(m) => ObservationFrame::Tbd(m.sample_frame(states, rng)),
            SensorModel::Acoustic(m) => ObservationFrame::Acoustic(m.sample_frame(states, rng)),
        }
    }

    /// The valid observation region of a single state: the exact template
    /// for imaging sensors, the sensors within `acoustic_radius` for the
    /// amplitude network (its full region is truncated by that radius).
    pub fn state_vor(&self, x: &Kinematic, acoustic_radius: f64) -> Region {
        match self {
            SensorModel::Tbd(m) => m.template(x),
            SensorModel::Acoustic(m) => m.sensors_within([x[0], x[1]], acoustic_radius),
        }
    }

    /// Binds the sensor to a frame (optionally restricted to a region) for
    /// repeated likelihood evaluation; per-frame constants are precomputed.
    pub fn prepared<'a>(
        &'a self,
        frame: &'a ObservationFrame,
        region: Option<Region>,
    ) -> Result<PreparedLikelihood<'a>> {
        self.check_frame(frame)?;
        let baseline = match self {
            SensorModel::Tbd(m) => m.empty_log_likelihood(frame.values(), region.as_ref()),
            SensorModel::Acoustic(_) => 0.0,
        };
        Ok(PreparedLikelihood {
            sensor: self,
            frame,
            region,
            baseline,
        })
    }
}

/// A sensor bound to one frame and observation restriction.
pub struct PreparedLikelihood<'a> {
    sensor: &'a SensorModel,
    frame: &'a ObservationFrame,
    region: Option<Region>,
    baseline: f64,
}

impl PreparedLikelihood<'_> {
    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }
}

impl JointLogLik for PreparedLikelihood<'_> {
    fn log_g(&self, _labels: &LabelSet, states: &[Kinematic]) -> f64 {
        match self.sensor {
            SensorModel::Tbd(m) => {
                self.baseline + m.correction(self.frame.values(), self.region.as_ref(), states)
            }
            SensorModel::Acoustic(m) => {
                m.log_likelihood_in(self.frame.values(), self.region.as_ref(), states)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_set_algebra() {
        let a = Region::new(vec![5, 1, 3, 3]);
        let b = Region::new(vec![3, 4]);
        assert_eq!(a.indices(), &[1, 3, 5]);
        assert_eq!(a.union(&b).indices(), &[1, 3, 4, 5]);
        assert_eq!(a.intersection(&b).indices(), &[3]);
        assert_eq!(a.difference(&b).indices(), &[1, 5]);
        assert!(!a.is_disjoint(&b));
        assert!(a.is_disjoint(&Region::new(vec![0, 2])));
    }

    #[test]
    fn frame_mismatch_detected() {
        let model = SensorModel::Acoustic(AcousticModel::new(
            vec![[0.0, 0.0], [1.0, 0.0]],
            1.0,
            1.0,
            0.1,
            0.5,
        ).unwrap());
        let bad = ObservationFrame::Acoustic(vec![0.0; 3]);
        assert!(model.check_frame(&bad).is_err());
        let wrong_kind = ObservationFrame::Tbd(vec![0.0; 2]);
        assert!(model.check_frame(&wrong_kind).is_err());
    }
}
