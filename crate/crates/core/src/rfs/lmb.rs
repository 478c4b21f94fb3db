//! The labeled multi-Bernoulli density and its expansion to mixture form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::particles::cloud_mean;
use crate::rfs::{
    JointParticles, Kinematic, Label, LabelSet, LabeledState, LmoDensity, Particle,
    ENUMERATION_CAP,
};

/// One Bernoulli track: existence probability and the single-object state
/// density given existence, as a normalized weighted cloud.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Track<S> {
    pub existence: f64,
    pub cloud: Vec<(f64, S)>,
}

/// A labeled multi-Bernoulli density: independent Bernoulli tracks keyed by
/// label, kept sorted in label order.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LmbDensity<S> {
    tracks: Vec<(Label, Track<S>)>,
}

impl<S: Clone> LmbDensity<S> {
    pub fn empty() -> Self {
        LmbDensity { tracks: Vec::new() }
    }

    pub fn new(tracks: Vec<(Label, f64, Vec<(f64, S)>)>) -> Result<Self> {
        let mut density = LmbDensity {
            tracks: tracks
                .into_iter()
                .map(|(label, existence, cloud)| (label, Track { existence, cloud }))
                .collect(),
        };
        density.tracks.sort_by_key(|(l, _)| *l);
        if density.tracks.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDensity("duplicate track label".into()));
        }
        density.validate_and_normalize()?;
        Ok(density)
    }

    pub(crate) fn validate_and_normalize(&mut self) -> Result<()> {
        for (label, track) in &mut self.tracks {
            if !(0.0..=1.0 + 1e-9).contains(&track.existence) {
                return Err(Error::InvalidDensity(format!(
                    "track {label} existence {} outside [0,1]",
                    track.existence
                )));
            }
            track.existence = track.existence.min(1.0);
            if track.cloud.is_empty() {
                return Err(Error::InvalidDensity(format!(
                    "track {label} has an empty cloud"
                )));
            }
            let sum: f64 = track.cloud.iter().map(|(w, _)| *w).sum();
            if !(sum > 0.0) || track.cloud.iter().any(|(w, _)| *w < 0.0 || !w.is_finite()) {
                return Err(Error::ZeroWeightSum);
            }
            if (sum - 1.0).abs() > 1e-15 {
                for (w, _) in &mut track.cloud {
                    *w /= sum;
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &Track<S>)> {
        self.tracks.iter().map(|(l, t)| (l, t))
    }

    pub fn labels(&self) -> LabelSet {
        LabelSet::from_sorted_unchecked(self.tracks.iter().map(|(l, _)| *l).collect())
    }

    pub fn get(&self, label: &Label) -> Option<&Track<S>> {
        self.tracks
            .binary_search_by_key(label, |(l, _)| *l)
            .ok()
            .map(|i| &self.tracks[i].1)
    }

    /// Inserts a track; the label must not already be present.
    pub fn insert(&mut self, label: Label, track: Track<S>) -> Result<()> {
        match self.tracks.binary_search_by_key(&label, |(l, _)| *l) {
            Ok(_) => Err(Error::InvalidDensity(format!(
                "track {label} already present"
            ))),
            Err(i) => {
                self.tracks.insert(i, (label, track));
                Ok(())
            }
        }
    }

    /// Retains only tracks whose label satisfies the predicate.
    pub fn filter_labels(&self, keep: impl Fn(&Label) -> bool) -> LmbDensity<S> {
        LmbDensity {
            tracks: self
                .tracks
                .iter()
                .filter(|(l, _)| keep(l))
                .cloned()
                .collect(),
        }
    }

    /// Merges two densities over disjoint label sets.
    pub fn union(mut self, other: LmbDensity<S>) -> Result<LmbDensity<S>> {
        for (label, track) in other.tracks {
            self.insert(label, track)?;
        }
        Ok(self)
    }

    pub fn expected_cardinality(&self) -> f64 {
        self.tracks.iter().map(|(_, t)| t.existence).sum()
    }

    fn check_enumeration(&self) -> Result<()> {
        if self.tracks.len() > ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                count: self.tracks.len(),
                cap: ENUMERATION_CAP,
            });
        }
        Ok(())
    }

    /// Expands to mixture form by enumerating every label subset; joint
    /// clouds are `particles_per_hypothesis` independent resampled draws
    /// from the per-track clouds.
    pub fn to_lmo<R: Rng>(
        &self,
        particles_per_hypothesis: usize,
        rng: &mut R,
    ) -> Result<LmoDensity<S>> {
        self.check_enumeration()?;
        let n = self.tracks.len();
        let mut components = Vec::with_capacity(1 << n);
        for mask in 0u32..(1u32 << n) {
            let weight = self.subset_weight(mask);
            if weight <= 0.0 {
                continue;
            }
            let labels: Vec<Label> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| self.tracks[i].0)
                .collect();
            let joint = if labels.is_empty() {
                JointParticles::empty_set()
            } else {
                let members: Vec<&Track<S>> = (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| &self.tracks[i].1)
                    .collect();
                let w = 1.0 / particles_per_hypothesis as f64;
                let particles = (0..particles_per_hypothesis)
                    .map(|_| Particle {
                        weight: w,
                        states: members
                            .iter()
                            .map(|t| draw_from_cloud(&t.cloud, rng).clone())
                            .collect(),
                    })
                    .collect();
                JointParticles::new(LabelSet::from_sorted_unchecked(labels), particles)?
            };
            components.push((weight, joint));
        }
        LmoDensity::new(components)
    }

    /// Exact mixture expansion: joint clouds are the full cartesian products
    /// of the per-track atoms. Intended for enumerated toy spaces.
    pub fn to_lmo_exact(&self) -> Result<LmoDensity<S>> {
        self.check_enumeration()?;
        let n = self.tracks.len();
        let mut components = Vec::with_capacity(1 << n);
        for mask in 0u32..(1u32 << n) {
            let weight = self.subset_weight(mask);
            if weight <= 0.0 {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let atom_count: usize = members
                .iter()
                .map(|&i| self.tracks[i].1.cloud.len())
                .product();
            if atom_count > 1_000_000 {
                return Err(Error::InvalidDensity(format!(
                    "exact product would materialize {atom_count} atoms"
                )));
            }
            let joint = if members.is_empty() {
                JointParticles::empty_set()
            } else {
                let labels: Vec<Label> = members.iter().map(|&i| self.tracks[i].0).collect();
                let mut particles = vec![Particle {
                    weight: 1.0,
                    states: Vec::new(),
                }];
                for &i in &members {
                    let cloud = &self.tracks[i].1.cloud;
                    let mut next = Vec::with_capacity(particles.len() * cloud.len());
                    for p in &particles {
                        for (w, s) in cloud {
                            let mut states = p.states.clone();
                            states.push(s.clone());
                            next.push(Particle {
                                weight: p.weight * w,
                                states,
                            });
                        }
                    }
                    particles = next;
                }
                JointParticles::new(LabelSet::from_sorted_unchecked(labels), particles)?
            };
            components.push((weight, joint));
        }
        LmoDensity::new(components)
    }

    /// Bernoulli product weight of the subset selected by `mask`.
    fn subset_weight(&self, mask: u32) -> f64 {
        self.tracks
            .iter()
            .enumerate()
            .map(|(i, (_, t))| {
                if mask >> i & 1 == 1 {
                    t.existence
                } else {
                    1.0 - t.existence
                }
            })
            .product()
    }
}

impl LmbDensity<Kinematic> {
    /// One state estimate per track whose existence exceeds the threshold:
    /// the weighted particle mean under the track's label.
    pub fn extract_estimates(&self, existence_threshold: f64) -> Vec<LabeledState> {
        self.tracks
            .iter()
            .filter(|(_, t)| t.existence > existence_threshold)
            .map(|(label, t)| LabeledState::new(cloud_mean(&t.cloud), *label))
            .collect()
    }
}

fn draw_from_cloud<'a, S, R: Rng>(cloud: &'a [(f64, S)], rng: &mut R) -> &'a S {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (w, s) in cloud {
        acc += w;
        if u < acc {
            return s;
        }
    }
    &cloud.last().expect("non-empty cloud").1
}
