//! Brute-force oracles for the acceptance suite.
//!
//! Everything here works on the *full* multi-object probability table — a
//! map from (label set, state tuple) to mass — and applies the defining
//! set-integral recursions term by term. It shares no code with the
//! implementation's weight-table/normalizer decomposition.

use std::collections::BTreeMap;

use gomtrack::discrete::DiscreteModel;
use gomtrack::rfs::{JointParticles, Label, LabelSet, LmoDensity, Particle};
use rand::Rng;

pub type Atom = (LabelSet, Vec<usize>);

/// The full multi-object density on an enumerated space.
#[derive(Clone, Debug)]
pub struct FullJoint(pub BTreeMap<Atom, f64>);

impl FullJoint {
    pub fn from_lmo(lmo: &LmoDensity<usize>) -> Self {
        let mut map = BTreeMap::new();
        for h in lmo.hypotheses() {
            for p in h.joint.particles() {
                let mass = h.weight * p.weight;
                if mass > 0.0 {
                    *map.entry((h.joint.labels().clone(), p.states.clone()))
                        .or_insert(0.0) += mass;
                }
            }
        }
        FullJoint(map)
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    /// Marginal label-set weights.
    pub fn weights(&self) -> BTreeMap<LabelSet, f64> {
        let mut out: BTreeMap<LabelSet, f64> = BTreeMap::new();
        for ((labels, _), mass) in &self.0 {
            *out.entry(labels.clone()).or_insert(0.0) += mass;
        }
        out
    }

    /// Normalized state-tuple distribution conditional on one label set.
    pub fn conditional(&self, labels: &LabelSet) -> BTreeMap<Vec<usize>, f64> {
        let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut total = 0.0;
        for ((l, states), mass) in &self.0 {
            if l == labels {
                *out.entry(states.clone()).or_insert(0.0) += mass;
                total += mass;
            }
        }
        for v in out.values_mut() {
            *v /= total;
        }
        out
    }

    /// Existence probability of one label.
    pub fn existence(&self, label: &Label) -> f64 {
        self.0
            .iter()
            .filter(|((l, _), _)| l.contains(label))
            .map(|(_, m)| m)
            .sum()
    }

    /// Normalized single-state distribution of one label, pooled over every
    /// atom containing it.
    pub fn state_marginal(&self, label: &Label) -> BTreeMap<usize, f64> {
        let mut out: BTreeMap<usize, f64> = BTreeMap::new();
        let mut total = 0.0;
        for ((l, states), mass) in &self.0 {
            if let Some(pos) = l.position(label) {
                *out.entry(states[pos]).or_insert(0.0) += mass;
                total += mass;
            }
        }
        for v in out.values_mut() {
            *v /= total;
        }
        out
    }
}

/// Applies the standard multi-object transition kernel to the full joint:
/// every object survives (and moves by the transition table) or dies, and
/// birth components enter independently.
pub fn chapman_kolmogorov(prior: &FullJoint, model: &DiscreteModel, next_time: u32) -> FullJoint {
    let birth_labels = model.birth_labels_at(next_time);
    let mut out: BTreeMap<Atom, f64> = BTreeMap::new();

    for ((labels, states), mass) in &prior.0 {
        let n = labels.len();
        for survive_mask in 0u32..(1u32 << n) {
            let mut base = *mass;
            let mut survivors: Vec<(Label, usize)> = Vec::new();
            for (i, label) in labels.iter().enumerate() {
                if survive_mask >> i & 1 == 1 {
                    base *= model.survival[states[i]];
                    survivors.push((*label, states[i]));
                } else {
                    base *= 1.0 - model.survival[states[i]];
                }
            }
            if base <= 0.0 {
                continue;
            }
            // All joint moves of the survivors.
            let mut moved: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), base)];
            for (_, s) in &survivors {
                let mut next = Vec::new();
                for (tuple, w) in &moved {
                    for (s_next, t) in model.transition[*s].iter().enumerate() {
                        if *t > 0.0 {
                            let mut e = tuple.clone();
                            e.push(s_next);
                            next.push((e, w * t));
                        }
                    }
                }
                moved = next;
            }
            // All birth subsets and their states.
            let n_birth = model.birth_components.len();
            for birth_mask in 0u32..(1u32 << n_birth) {
                let mut bw = 1.0;
                let mut included: Vec<usize> = Vec::new();
                for (i, (r, _)) in model.birth_components.iter().enumerate() {
                    if birth_mask >> i & 1 == 1 {
                        bw *= r;
                        included.push(i);
                    } else {
                        bw *= 1.0 - r;
                    }
                }
                if bw <= 0.0 {
                    continue;
                }
                let mut born: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), bw)];
                for &i in &included {
                    let mut next = Vec::new();
                    for (tuple, w) in &born {
                        for (s, p) in model.birth_components[i].1.iter().enumerate() {
                            if *p > 0.0 {
                                let mut e = tuple.clone();
                                e.push(s);
                                next.push((e, w * p));
                            }
                        }
                    }
                    born = next;
                }
                let mut out_labels: Vec<Label> = survivors.iter().map(|(l, _)| *l).collect();
                out_labels.extend(included.iter().map(|&i| birth_labels[i]));
                let out_set = LabelSet::new(out_labels).expect("distinct by construction");
                for (moved_tuple, mw) in &moved {
                    for (born_tuple, bw2) in &born {
                        let mut tuple = moved_tuple.clone();
                        tuple.extend_from_slice(born_tuple);
                        *out.entry((out_set.clone(), tuple)).or_insert(0.0) += mw * bw2;
                    }
                }
            }
        }
    }
    FullJoint(out)
}

/// Bayes' rule on the full joint.
pub fn bayes<F>(joint: &FullJoint, log_lik: F) -> FullJoint
where
    F: Fn(&LabelSet, &[usize]) -> f64,
{
    let mut out = BTreeMap::new();
    let mut norm = 0.0;
    for ((labels, states), mass) in &joint.0 {
        let v = mass * log_lik(labels, states).exp();
        if v > 0.0 {
            out.insert((labels.clone(), states.clone()), v);
            norm += v;
        }
    }
    for v in out.values_mut() {
        *v /= norm;
    }
    FullJoint(out)
}

/// A random mixture-form density over `labels` on `n_states` states, with
/// correlated joints.
pub fn random_toy_lmo<R: Rng>(labels: &[Label], n_states: usize, rng: &mut R) -> LmoDensity<usize> {
    let n = labels.len();
    let mut components = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let subset: Vec<Label> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| labels[i])
            .collect();
        let weight = 0.05 + rng.gen::<f64>();
        let joint = if subset.is_empty() {
            JointParticles::empty_set()
        } else {
            let count = subset.len();
            let atoms = n_states.pow(count as u32);
            let particles: Vec<Particle<usize>> = (0..atoms)
                .map(|code| {
                    let mut states = Vec::with_capacity(count);
                    let mut c = code;
                    for _ in 0..count {
                        states.push(c % n_states);
                        c /= n_states;
                    }
                    Particle {
                        weight: 0.01 + rng.gen::<f64>(),
                        states,
                    }
                })
                .collect();
            JointParticles::new(LabelSet::new(subset).unwrap(), particles).unwrap()
        };
        components.push((weight, joint));
    }
    LmoDensity::new(components).unwrap()
}

/// A random discrete world with per-state survival and one or two births.
pub fn random_toy_model<R: Rng>(n_states: usize, births: usize, rng: &mut R) -> DiscreteModel {
    let transition = (0..n_states)
        .map(|_| {
            let raw: Vec<f64> = (0..n_states).map(|_| 0.05 + rng.gen::<f64>()).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    let survival = (0..n_states).map(|_| 0.3 + 0.65 * rng.gen::<f64>()).collect();
    let birth_components = (0..births)
        .map(|_| {
            let raw: Vec<f64> = (0..n_states).map(|_| 0.05 + rng.gen::<f64>()).collect();
            let sum: f64 = raw.iter().sum();
            (
                0.1 + 0.5 * rng.gen::<f64>(),
                raw.into_iter().map(|v| v / sum).collect(),
            )
        })
        .collect();
    DiscreteModel::new(transition, survival, birth_components).unwrap()
}

/// A bounded, state-dependent log-likelihood for toy Bayes tests.
pub fn toy_log_likelihood(coefficients: [f64; 3]) -> impl Fn(&LabelSet, &[usize]) -> f64 {
    move |labels: &LabelSet, states: &[usize]| {
        let s: f64 = states.iter().map(|&x| coefficients[x.min(2)]).sum();
        0.4 * s - 0.3 * labels.len() as f64
    }
}
