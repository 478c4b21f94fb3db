//! Labeled first-order moments and the KLD-optimal multi-Bernoulli collapse.

use serde::{Deserialize, Serialize};

use crate::rfs::{Label, LmbDensity, LmoDensity, EXISTENCE_EPSILON};

/// The labeled PHD: per label, an unnormalized single-object cloud whose
/// total mass is the label's existence probability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledPhd<S> {
    per_label: Vec<(Label, Vec<(f64, S)>)>,
}

impl<S: Clone> LabeledPhd<S> {
    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.per_label.iter().map(|(l, _)| l)
    }

    pub fn cloud(&self, label: &Label) -> Option<&[(f64, S)]> {
        self.per_label
            .binary_search_by_key(label, |(l, _)| *l)
            .ok()
            .map(|i| self.per_label[i].1.as_slice())
    }

    /// Mass of one label, zero if absent.
    pub fn mass(&self, label: &Label) -> f64 {
        self.cloud(label)
            .map_or(0.0, |c| c.iter().map(|(w, _)| w).sum())
    }

    /// Total mass, which equals the expected cardinality.
    pub fn total_mass(&self) -> f64 {
        self.per_label
            .iter()
            .map(|(_, c)| c.iter().map(|(w, _)| w).sum::<f64>())
            .sum()
    }

    /// Consolidated per-label mass at each distinct state; exact comparison
    /// helper for enumerated spaces.
    pub fn pointwise(&self, label: &Label) -> Vec<(S, f64)>
    where
        S: Copy + Ord,
    {
        let mut map = std::collections::BTreeMap::new();
        if let Some(cloud) = self.cloud(label) {
            for (w, s) in cloud {
                *map.entry(*s).or_insert(0.0) += *w;
            }
        }
        map.into_iter().collect()
    }
}

/// Labeled PHD of a mixture-form density: for each label, pool the
/// marginals of every hypothesis containing it, scaled by the hypothesis
/// weight. The mass of a label is the summed weight of those hypotheses.
pub fn labeled_phd_lmo<S: Clone>(lmo: &LmoDensity<S>) -> LabeledPhd<S> {
    let mut per_label: Vec<(Label, Vec<(f64, S)>)> = Vec::new();
    for label in lmo.label_universe().iter() {
        let mut cloud = Vec::new();
        for h in lmo.hypotheses() {
            if let Some(idx) = h.joint.labels().position(label) {
                for p in h.joint.particles() {
                    cloud.push((h.weight * p.weight, p.states[idx].clone()));
                }
            }
        }
        per_label.push((*label, cloud));
    }
    LabeledPhd { per_label }
}

/// Labeled PHD of a multi-Bernoulli density: each track's cloud scaled by
/// its existence probability.
pub fn labeled_phd_lmb<S: Clone>(lmb: &LmbDensity<S>) -> LabeledPhd<S> {
    let per_label = lmb
        .iter()
        .map(|(label, track)| {
            (
                *label,
                track
                    .cloud
                    .iter()
                    .map(|(w, s)| (w * track.existence, s.clone()))
                    .collect(),
            )
        })
        .collect();
    LabeledPhd { per_label }
}

/// The multi-Bernoulli density that minimizes the KL divergence from `lmo`
/// and preserves its labeled PHD: per label, existence is the summed weight
/// of hypotheses containing it and the track cloud pools the label's
/// coordinate from every joint particle, weighted by hypothesis weight.
///
/// Labels whose pooled existence is numerically zero are omitted.
pub fn best_lmb_approx<S: Clone>(lmo: &LmoDensity<S>) -> LmbDensity<S> {
    let phd = labeled_phd_lmo(lmo);
    let tracks = phd
        .per_label
        .into_iter()
        .filter_map(|(label, cloud)| {
            let mass: f64 = cloud.iter().map(|(w, _)| w).sum();
            if mass < EXISTENCE_EPSILON {
                return None;
            }
            let normalized = cloud.into_iter().map(|(w, s)| (w / mass, s)).collect();
            Some((label, mass.min(1.0), normalized))
        })
        .collect();
    LmbDensity::new(tracks).expect("pooled clouds are valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfs::{JointParticles, LabelSet, Particle};

    fn label(i: u32) -> Label {
        Label::new(0, i)
    }

    fn joint(labels: &[Label], atoms: &[(f64, &[usize])]) -> JointParticles<usize> {
        JointParticles::new(
            LabelSet::new(labels.to_vec()).unwrap(),
            atoms
                .iter()
                .map(|(w, s)| Particle {
                    weight: *w,
                    states: s.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn phd_of_certain_single_label() {
        let lmo = LmoDensity::certain(joint(&[label(1)], &[(0.25, &[0]), (0.75, &[1])]));
        let phd = labeled_phd_lmo(&lmo);
        assert!((phd.mass(&label(1)) - 1.0).abs() < 1e-12);
        let pw = phd.pointwise(&label(1));
        assert_eq!(pw.len(), 2);
        assert!((pw[1].1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn phd_mass_is_hypothesis_weight_sum() {
        let lmo = LmoDensity::new(vec![
            (0.4, JointParticles::empty_set()),
            (0.6, joint(&[label(1)], &[(1.0, &[2])])),
        ])
        .unwrap();
        let phd = labeled_phd_lmo(&lmo);
        assert!((phd.mass(&label(1)) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn phd_mass_identity_matches_expected_cardinality() {
        let lmo = LmoDensity::new(vec![
            (0.2, JointParticles::empty_set()),
            (0.3, joint(&[label(1)], &[(1.0, &[0])])),
            (0.5, joint(&[label(1), label(2)], &[(1.0, &[0, 1])])),
        ])
        .unwrap();
        let phd = labeled_phd_lmo(&lmo);
        let dist = lmo.cardinality_distribution();
        let expected: f64 = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((phd.total_mass() - expected).abs() < 1e-12);
    }

    #[test]
    fn lmb_phd_scales_by_existence() {
        let lmb = LmbDensity::new(vec![
            (label(1), 0.0, vec![(1.0, 7usize)]),
            (label(2), 1.0, vec![(0.5, 0usize), (0.5, 1usize)]),
        ])
        .unwrap();
        let phd = labeled_phd_lmb(&lmb);
        assert!(phd.mass(&label(1)).abs() < 1e-12);
        assert!((phd.mass(&label(2)) - 1.0).abs() < 1e-12);
        // r = 1 leaves the cloud untouched.
        assert_eq!(phd.pointwise(&label(2)), vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn phd_routes_agree_on_lmb_inputs() {
        // Appendix-level identity checked numerically on a 2-track toy.
        let lmb = LmbDensity::new(vec![
            (label(1), 0.35, vec![(0.2, 0usize), (0.8, 2usize)]),
            (label(2), 0.75, vec![(0.6, 1usize), (0.4, 2usize)]),
        ])
        .unwrap();
        let direct = labeled_phd_lmb(&lmb);
        let via_lmo = labeled_phd_lmo(&lmb.to_lmo_exact().unwrap());
        for l in [label(1), label(2)] {
            let a = direct.pointwise(&l);
            let b = via_lmo.pointwise(&l);
            assert_eq!(a.len(), b.len());
            for ((sa, wa), (sb, wb)) in a.iter().zip(b.iter()) {
                assert_eq!(sa, sb);
                assert!((wa - wb).abs() < 1e-9, "{l}: {wa} vs {wb}");
            }
        }
    }

    #[test]
    fn collapse_restores_lmb_parameters() {
        let lmb = LmbDensity::new(vec![
            (label(1), 0.3, vec![(1.0, 4usize)]),
            (label(2), 0.9, vec![(0.25, 0usize), (0.75, 1usize)]),
        ])
        .unwrap();
        let back = best_lmb_approx(&lmb.to_lmo_exact().unwrap());
        for (l, t) in lmb.iter() {
            let restored = back.get(l).unwrap();
            assert!((restored.existence - t.existence).abs() < 1e-12);
        }
        // Densities match exactly on the enumerated space.
        let a = labeled_phd_lmb(&lmb).pointwise(&label(2));
        let b = labeled_phd_lmb(&back).pointwise(&label(2));
        for ((_, wa), (_, wb)) in a.iter().zip(b.iter()) {
            assert!((wa - wb).abs() < 1e-12);
        }
    }

    #[test]
    fn collapse_point_mass_example() {
        let lmo = LmoDensity::new(vec![
            (0.2, JointParticles::empty_set()),
            (0.8, joint(&[label(1)], &[(1.0, &[5])])),
        ])
        .unwrap();
        let lmb = best_lmb_approx(&lmo);
        let t = lmb.get(&label(1)).unwrap();
        assert!((t.existence - 0.8).abs() < 1e-12);
        assert_eq!(t.cloud.len(), 1);
        assert!((t.cloud[0].0 - 1.0).abs() < 1e-12);
        assert_eq!(t.cloud[0].1, 5);
    }

    #[test]
    fn collapse_preserves_phd_on_correlated_joint() {
        // Correlated two-label joint; moment preservation within 1e-9.
        let lmo = LmoDensity::new(vec![
            (0.1, JointParticles::empty_set()),
            (0.2, joint(&[label(1)], &[(0.5, &[0]), (0.5, &[2])])),
            (
                0.7,
                joint(
                    &[label(1), label(2)],
                    &[(0.6, &[0, 1]), (0.3, &[1, 2]), (0.1, &[2, 2])],
                ),
            ),
        ])
        .unwrap();
        let before = labeled_phd_lmo(&lmo);
        let after = labeled_phd_lmb(&best_lmb_approx(&lmo));
        for l in [label(1), label(2)] {
            let a = before.pointwise(&l);
            let b = after.pointwise(&l);
            assert_eq!(a.len(), b.len());
            for ((sa, wa), (sb, wb)) in a.iter().zip(b.iter()) {
                assert_eq!(sa, sb);
                assert!((wa - wb).abs() < 1e-9);
            }
        }
    }
}
