//! Weighted joint particle clouds over the states of one label set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::{Label, LabelSet};

/// One weighted multi-object particle: a state per label, aligned with the
/// owning set's label order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Particle<S> {
    pub weight: f64,
    pub states: Vec<S>,
}

/// A joint particle approximation of the state density conditional on the
/// existence of exactly the labels in `labels`.
///
/// Weights are normalized on construction. The empty label set is valid and
/// is represented by a single unit-weight particle with no states.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointParticles<S> {
    labels: LabelSet,
    particles: Vec<Particle<S>>,
}

impl<S: Clone> JointParticles<S> {
    pub fn new(labels: LabelSet, particles: Vec<Particle<S>>) -> Result<Self> {
        let mut jp = JointParticles { labels, particles };
        jp.validate_and_normalize()?;
        Ok(jp)
    }

    /// The empty-set hypothesis: no objects, unit mass.
    pub fn empty_set() -> Self {
        JointParticles {
            labels: LabelSet::empty(),
            particles: vec![Particle {
                weight: 1.0,
                states: Vec::new(),
            }],
        }
    }

    pub(crate) fn validate_and_normalize(&mut self) -> Result<()> {
        if self.particles.is_empty() {
            if self.labels.is_empty() {
                self.particles.push(Particle {
                    weight: 1.0,
                    states: Vec::new(),
                });
                return Ok(());
            }
            return Err(Error::InvalidDensity(format!(
                "hypothesis {} has no particles",
                self.labels
            )));
        }
        let n = self.labels.len();
        let mut sum = 0.0;
        for p in &self.particles {
            if p.states.len() != n {
                return Err(Error::InvalidDensity(format!(
                    "particle carries {} states for {} labels",
                    p.states.len(),
                    n
                )));
            }
            if !(p.weight >= 0.0) || !p.weight.is_finite() {
                return Err(Error::InvalidDensity("negative or non-finite weight".into()));
            }
            sum += p.weight;
        }
        if !(sum > 0.0) {
            return Err(Error::ZeroWeightSum);
        }
        if (sum - 1.0).abs() > 1e-15 {
            for p in &mut self.particles {
                p.weight /= sum;
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn particles(&self) -> &[Particle<S>] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Projects every particle onto the coordinate block of `label`,
    /// keeping its weight: the particle form of marginalization.
    pub fn marginal(&self, label: &Label) -> Option<Vec<(f64, S)>> {
        let idx = self.labels.position(label)?;
        Some(
            self.particles
                .iter()
                .map(|p| (p.weight, p.states[idx].clone()))
                .collect(),
        )
    }
}

/// Weighted mean of a single-object cloud of 4-vector states.
pub(crate) fn cloud_mean(cloud: &[(f64, crate::rfs::Kinematic)]) -> crate::rfs::Kinematic {
    let mut m = crate::rfs::Kinematic::zeros();
    let mut mass = 0.0;
    for (w, x) in cloud {
        m += *x * *w;
        mass += w;
    }
    if mass > 0.0 {
        m / mass
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_normalizes_weights() {
        let labels = LabelSet::new(vec![Label::new(0, 1)]).unwrap();
        let jp = JointParticles::new(
            labels,
            vec![
                Particle {
                    weight: 3.0,
                    states: vec![1usize],
                },
                Particle {
                    weight: 1.0,
                    states: vec![2usize],
                },
            ],
        )
        .unwrap();
        let total: f64 = jp.particles().iter().map(|p| p.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((jp.particles()[0].weight - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rejects_misaligned_states() {
        let labels = LabelSet::new(vec![Label::new(0, 1), Label::new(0, 2)]).unwrap();
        let r = JointParticles::new(
            labels,
            vec![Particle {
                weight: 1.0,
                states: vec![7usize],
            }],
        );
        assert!(r.is_err());
    }

    #[test]
    fn empty_set_is_unit_mass() {
        let jp: JointParticles<usize> = JointParticles::empty_set();
        assert_eq!(jp.labels().len(), 0);
        assert_eq!(jp.particles().len(), 1);
        assert_eq!(jp.particles()[0].weight, 1.0);
    }

    #[test]
    fn marginal_projects_coordinate_block() {
        let la = Label::new(0, 1);
        let lb = Label::new(0, 2);
        let labels = LabelSet::new(vec![lb, la]).unwrap();
        let jp = JointParticles::new(
            labels,
            vec![Particle {
                weight: 1.0,
                states: vec![10usize, 20usize],
            }],
        )
        .unwrap();
        // Sorted order is (0,1) then (0,2).
        assert_eq!(jp.marginal(&la).unwrap()[0].1, 10);
        assert_eq!(jp.marginal(&lb).unwrap()[0].1, 20);
    }
}
