//! The labeled multi-object density in mixture form.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rfs::{JointParticles, Label, LabelSet};

/// One mixture component: a label set with its joint existence weight and
/// the joint state density conditional on that set existing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hypothesis<S> {
    pub weight: f64,
    pub joint: JointParticles<S>,
}

/// A labeled multi-object density: hypotheses keyed by label set, weights
/// summing to one. Hypotheses are kept sorted by label set so iteration
/// order is canonical.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmoDensity<S> {
    hypotheses: Vec<Hypothesis<S>>,
}

impl<S: Clone> LmoDensity<S> {
    /// Builds a density from `(weight, joint)` pairs, normalizing weights.
    /// Label sets must be distinct; zero-weight hypotheses are dropped.
    pub fn new(components: Vec<(f64, JointParticles<S>)>) -> Result<Self> {
        let mut hypotheses: Vec<Hypothesis<S>> = components
            .into_iter()
            .map(|(weight, joint)| Hypothesis { weight, joint })
            .collect();
        hypotheses.sort_by(|a, b| a.joint.labels().cmp(b.joint.labels()));
        if hypotheses
            .windows(2)
            .any(|w| w[0].joint.labels() == w[1].joint.labels())
        {
            return Err(Error::InvalidDensity(
                "duplicate label-set hypothesis".into(),
            ));
        }
        let mut density = LmoDensity { hypotheses };
        density.validate_and_normalize()?;
        Ok(density)
    }

    /// A density certain about one label set.
    pub fn certain(joint: JointParticles<S>) -> Self {
        LmoDensity {
            hypotheses: vec![Hypothesis { weight: 1.0, joint }],
        }
    }

    pub(crate) fn validate_and_normalize(&mut self) -> Result<()> {
        let mut sum = 0.0;
        for h in &self.hypotheses {
            if !(h.weight >= 0.0) || !h.weight.is_finite() {
                return Err(Error::InvalidDensity(
                    "negative or non-finite hypothesis weight".into(),
                ));
            }
            sum += h.weight;
        }
        if !(sum > 0.0) {
            return Err(Error::ZeroWeightSum);
        }
        self.hypotheses.retain(|h| h.weight > 0.0);
        for h in &mut self.hypotheses {
            h.weight /= sum;
            h.joint.validate_and_normalize()?;
        }
        Ok(())
    }

    pub fn hypotheses(&self) -> &[Hypothesis<S>] {
        &self.hypotheses
    }

    pub fn get(&self, labels: &LabelSet) -> Option<&Hypothesis<S>> {
        self.hypotheses
            .binary_search_by(|h| h.joint.labels().cmp(labels))
            .ok()
            .map(|i| &self.hypotheses[i])
    }

    /// Weight of a label set, zero if absent.
    pub fn weight_of(&self, labels: &LabelSet) -> f64 {
        self.get(labels).map_or(0.0, |h| h.weight)
    }

    /// All labels that occur in some hypothesis.
    pub fn label_universe(&self) -> LabelSet {
        self.hypotheses
            .iter()
            .flat_map(|h| h.joint.labels().iter().copied())
            .collect()
    }

    /// Marginal existence probability of one label: the summed weight of
    /// hypotheses containing it.
    pub fn label_existence(&self, label: &Label) -> f64 {
        self.hypotheses
            .iter()
            .filter(|h| h.joint.labels().contains(label))
            .map(|h| h.weight)
            .sum()
    }

    /// Distribution of object count: entry `n` is the summed weight of
    /// hypotheses with `n` labels.
    pub fn cardinality_distribution(&self) -> Vec<f64> {
        let max = self
            .hypotheses
            .iter()
            .map(|h| h.joint.labels().len())
            .max()
            .unwrap_or(0);
        let mut dist = vec![0.0; max + 1];
        for h in &self.hypotheses {
            dist[h.joint.labels().len()] += h.weight;
        }
        dist
    }

    /// Expected cardinality.
    pub fn expected_cardinality(&self) -> f64 {
        self.hypotheses
            .iter()
            .map(|h| h.weight * h.joint.labels().len() as f64)
            .sum()
    }
}

/// Consolidated atoms of a density over an enumerated state space:
/// probability mass per (label set, state tuple).
fn atoms<S: Copy + Ord>(density: &LmoDensity<S>) -> BTreeMap<(LabelSet, Vec<S>), f64> {
    let mut map = BTreeMap::new();
    for h in density.hypotheses() {
        for p in h.joint.particles() {
            let mass = h.weight * p.weight;
            if mass > 0.0 {
                *map.entry((h.joint.labels().clone(), p.states.clone()))
                    .or_insert(0.0) += mass;
            }
        }
    }
    map
}

/// Kullback-Leibler divergence between two densities on the same finite
/// discrete state space, `Σ p log(p/q)` over (label set, state tuple) atoms.
///
/// Mass of `p` outside the support of `q` makes the divergence infinite;
/// that is a value, not an error.
pub fn kld_discrete<S: Copy + Ord>(p: &LmoDensity<S>, q: &LmoDensity<S>) -> f64 {
    let p_atoms = atoms(p);
    let q_atoms = atoms(q);
    let mut total = 0.0;
    for (key, &pm) in &p_atoms {
        match q_atoms.get(key) {
            Some(&qm) if qm > 0.0 => total += pm * (pm / qm).ln(),
            _ => return f64::INFINITY,
        }
    }
    total
}
