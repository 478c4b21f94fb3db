//! Exact recursion on enumerated finite state spaces.
//!
//! States are indices into a finite kinematic space, transition and birth
//! are explicit probability tables, and every density is carried as exact
//! atoms, so the recursions evaluate with no Monte-Carlo error. This is the
//! reference path the particle implementations are checked against.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::filters::{predicted_masks, PredictedWeightTable};
use crate::rfs::{
    best_lmb_approx, JointParticles, Label, LabelSet, LmbDensity, LmoDensity, Particle,
};

/// A finite single-object world: a row-stochastic transition table, a
/// per-state survival probability and multi-Bernoulli birth components with
/// explicit state distributions.
#[derive(Clone, Debug)]
pub struct DiscreteModel {
    pub transition: Vec<Vec<f64>>,
    pub survival: Vec<f64>,
    pub birth_components: Vec<(f64, Vec<f64>)>,
}

impl DiscreteModel {
    pub fn new(
        transition: Vec<Vec<f64>>,
        survival: Vec<f64>,
        birth_components: Vec<(f64, Vec<f64>)>,
    ) -> Result<Self> {
        let n = transition.len();
        if n == 0 || survival.len() != n {
            return Err(Error::InvalidConfig(
                "transition and survival tables must agree on the state count".into(),
            ));
        }
        for row in &transition {
            if row.len() != n {
                return Err(Error::InvalidConfig("transition table not square".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
                return Err(Error::InvalidConfig("transition row not a pmf".into()));
            }
        }
        if survival.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("survival outside [0,1]".into()));
        }
        for (r, pmf) in &birth_components {
            if !(0.0..=1.0).contains(r) || pmf.len() != n {
                return Err(Error::InvalidConfig("bad birth component".into()));
            }
            let sum: f64 = pmf.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig("birth pmf not normalized".into()));
            }
        }
        Ok(DiscreteModel {
            transition,
            survival,
            birth_components,
        })
    }

    pub fn n_states(&self) -> usize {
        self.survival.len()
    }

    pub fn birth_labels_at(&self, time: u32) -> Vec<Label> {
        (0..self.birth_components.len())
            .map(|i| Label::new(time, i as u32 + 1))
            .collect()
    }
}

type AtomMap = BTreeMap<Vec<usize>, f64>;

/// Exact predicted hypothesis weights; nothing gated, nothing truncated.
pub fn lmo_predicted_weights_exact(
    prior: &LmoDensity<usize>,
    model: &DiscreteModel,
    next_time: u32,
) -> Result<PredictedWeightTable> {
    let births: Vec<(Label, f64)> = model
        .birth_labels_at(next_time)
        .into_iter()
        .zip(model.birth_components.iter().map(|(r, _)| *r))
        .collect();
    let table = predicted_masks(prior, &births, &|s: &usize| model.survival[*s], 0.0)?;
    Ok(PredictedWeightTable::from_masks(&table))
}

/// One exact prediction-update step of the mixture-form recursion on a
/// finite space. The predicted joint of each label set is materialized as
/// consolidated atoms and pushed through Bayes' rule with the supplied
/// log-likelihood.
pub fn lmo_step_exact<F>(
    prior: &LmoDensity<usize>,
    model: &DiscreteModel,
    log_likelihood: F,
    next_time: u32,
) -> Result<LmoDensity<usize>>
where
    F: Fn(&LabelSet, &[usize]) -> f64,
{
    let births: Vec<(Label, f64)> = model
        .birth_labels_at(next_time)
        .into_iter()
        .zip(model.birth_components.iter().map(|(r, _)| *r))
        .collect();
    let table = predicted_masks(prior, &births, &|s: &usize| model.survival[*s], 0.0)?;

    let mut components: Vec<(f64, JointParticles<usize>)> = Vec::new();

    for &(mask, predicted_weight) in &table.entries {
        let labels = table.label_set(mask);
        let survivor_labels: Vec<Label> = labels
            .iter()
            .filter(|l| table.universe[..table.n_prior].contains(l))
            .copied()
            .collect();
        let birth_labels: Vec<Label> = labels
            .iter()
            .filter(|l| !survivor_labels.contains(l))
            .copied()
            .collect();

        // Survivor atoms: previous hypotheses containing the survivor set,
        // each prior atom extended by every joint transition of the
        // survivors, scaled by survive/die factors.
        let mut survivor_atoms: AtomMap = AtomMap::new();
        for h in prior.hypotheses() {
            let hyp_labels = h.joint.labels();
            if !survivor_labels.iter().all(|l| hyp_labels.contains(l)) {
                continue;
            }
            let survivor_pos: Vec<usize> = survivor_labels
                .iter()
                .map(|l| hyp_labels.position(l).expect("checked subset"))
                .collect();
            for atom in h.joint.particles() {
                let mut base = h.weight * atom.weight;
                for (pos, s) in atom.states.iter().enumerate() {
                    if !survivor_pos.contains(&pos) {
                        base *= 1.0 - model.survival[*s];
                    }
                }
                if base <= 0.0 {
                    continue;
                }
                // Enumerate the joint next states of the survivors.
                let mut partial: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), base)];
                for &pos in &survivor_pos {
                    let s = atom.states[pos];
                    let mut next = Vec::with_capacity(partial.len() * model.n_states());
                    for (tuple, w) in &partial {
                        for (s_next, t) in model.transition[s].iter().enumerate() {
                            let step = w * model.survival[s] * t;
                            if step > 0.0 {
                                let mut extended = tuple.clone();
                                extended.push(s_next);
                                next.push((extended, step));
                            }
                        }
                    }
                    partial = next;
                }
                for (tuple, w) in partial {
                    *survivor_atoms.entry(tuple).or_insert(0.0) += w;
                }
            }
        }
        if survivor_atoms.is_empty() {
            continue;
        }

        // Extend by birth components; birth labels sort after survivors.
        let mut atoms: AtomMap = survivor_atoms;
        for label in &birth_labels {
            let pmf = &model.birth_components[(label.birth_index - 1) as usize].1;
            let mut next: AtomMap = AtomMap::new();
            for (tuple, w) in &atoms {
                for (s, p) in pmf.iter().enumerate() {
                    if *p > 0.0 {
                        let mut extended = tuple.clone();
                        extended.push(s);
                        *next.entry(extended).or_insert(0.0) += w * p;
                    }
                }
            }
            atoms = next;
        }

        // Normalize to the conditional joint, apply Bayes with the
        // likelihood, and score the hypothesis.
        let mass: f64 = atoms.values().sum();
        let mut eta = 0.0;
        let mut posterior: Vec<(Vec<usize>, f64)> = Vec::with_capacity(atoms.len());
        for (tuple, w) in &atoms {
            let g = log_likelihood(&labels, tuple).exp();
            let value = w / mass * g;
            eta += value;
            posterior.push((tuple.clone(), value));
        }
        if !(eta > 0.0) {
            continue;
        }
        let particles = posterior
            .into_iter()
            .map(|(states, w)| Particle {
                weight: w / eta,
                states,
            })
            .collect();
        components.push((
            predicted_weight * eta,
            JointParticles::new(labels, particles)?,
        ));
    }

    if components.is_empty() {
        return Err(Error::DegenerateStep { step: next_time });
    }
    LmoDensity::new(components)
}

/// Exact multi-Bernoulli update on a finite space: every label subset is
/// scored with the full product of the per-track atom clouds, and the
/// posterior mixture is collapsed to the PHD-preserving multi-Bernoulli.
pub fn lmb_update_exact<F>(
    predicted: &LmbDensity<usize>,
    log_likelihood: F,
) -> Result<LmbDensity<usize>>
where
    F: Fn(&LabelSet, &[usize]) -> f64,
{
    let expanded = predicted.to_lmo_exact()?;
    let mut components: Vec<(f64, JointParticles<usize>)> = Vec::new();
    for h in expanded.hypotheses() {
        let labels = h.joint.labels().clone();
        let mut eta = 0.0;
        let mut atoms: Vec<(Vec<usize>, f64)> = Vec::with_capacity(h.joint.len());
        for p in h.joint.particles() {
            let g = log_likelihood(&labels, &p.states).exp();
            let value = p.weight * g;
            eta += value;
            atoms.push((p.states.clone(), value));
        }
        if !(eta > 0.0) {
            continue;
        }
        let particles = atoms
            .into_iter()
            .map(|(states, w)| Particle {
                weight: w / eta,
                states,
            })
            .collect();
        components.push((h.weight * eta, JointParticles::new(labels, particles)?));
    }
    if components.is_empty() {
        return Err(Error::DegenerateStep { step: 0 });
    }
    let posterior = LmoDensity::new(components)?;
    Ok(best_lmb_approx(&posterior))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_model(survival: f64) -> DiscreteModel {
        DiscreteModel::new(
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            vec![survival, survival],
            vec![],
        )
        .unwrap()
    }

    fn bernoulli_prior(r: f64) -> LmoDensity<usize> {
        let l = Label::new(0, 1);
        LmoDensity::new(vec![
            (1.0 - r, JointParticles::empty_set()),
            (
                r,
                JointParticles::new(
                    LabelSet::new(vec![l]).unwrap(),
                    vec![
                        Particle {
                            weight: 0.5,
                            states: vec![0],
                        },
                        Particle {
                            weight: 0.5,
                            states: vec![1],
                        },
                    ],
                )
                .unwrap(),
            ),
        ])
        .unwrap()
    }

    #[test]
    fn exact_prediction_weights_bernoulli() {
        let model = two_state_model(0.5);
        let prior = bernoulli_prior(1.0);
        let table = lmo_predicted_weights_exact(&prior, &model, 1).unwrap();
        let l = LabelSet::new(vec![Label::new(0, 1)]).unwrap();
        assert!((table.weight_of(&l) - 0.5).abs() < 1e-12);
        assert!((table.weight_of(&LabelSet::empty()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_step_flat_likelihood_matches_prediction() {
        let model = two_state_model(0.8);
        let prior = bernoulli_prior(0.6);
        let posterior =
            lmo_step_exact(&prior, &model, |_, _| 0.0, 1).unwrap();
        let l = LabelSet::new(vec![Label::new(0, 1)]).unwrap();
        assert!((posterior.weight_of(&l) - 0.48).abs() < 1e-12);
        // Marginal next-state distribution follows the chain.
        let hyp = posterior.get(&l).unwrap();
        let mut p0 = 0.0;
        for p in hyp.joint.particles() {
            if p.states[0] == 0 {
                p0 += p.weight;
            }
        }
        assert!((p0 - 0.55).abs() < 1e-12); // 0.5*0.7 + 0.5*0.4
    }

    #[test]
    fn exact_lmb_update_flat_is_identity() {
        let lmb = LmbDensity::new(vec![
            (Label::new(0, 1), 0.3, vec![(0.4, 0usize), (0.6, 1usize)]),
            (Label::new(0, 2), 0.9, vec![(1.0, 1usize)]),
        ])
        .unwrap();
        let updated = lmb_update_exact(&lmb, |_, _| 0.0).unwrap();
        for (l, t) in lmb.iter() {
            let u = updated.get(l).unwrap();
            assert!((u.existence - t.existence).abs() < 1e-12);
        }
    }
}
