//! The multi-Bernoulli recursion for generic likelihoods and its grouped
//! parallel variant.
//!
//! Prediction is per-track: existence scaled by expected survival, particles
//! through the kernel, fresh birth tracks appended. The update gates tracks
//! by existence, enumerates label subsets of the gated set, scores each
//! subset with joint particles drawn as products of the per-track clouds,
//! and collapses the resulting mixture back to one Bernoulli track per label
//! by pooling each label's coordinate across hypotheses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{tags, truncate_weighted, FilterConfig};
use crate::grouping::{partition_tracks, GroupingConfig, TrackPartition};
use crate::motion::{BirthModel, MotionModel};
use crate::rfs::{Kinematic, Label, LabelSet, LmbDensity, Track, ENUMERATION_CAP, EXISTENCE_EPSILON};
use crate::sensors::{JointLogLik, ObservationFrame, SensorModel};
use crate::smc::{effective_sample_size, log_sum_exp, resample_systematic, RandomStream};

/// Multi-Bernoulli prediction: survivors keep their labels with existence
/// scaled by the survival expectation over their cloud, particles propagate
/// through the kernel; birth components enter as fresh tracks labeled with
/// the new time step. Tracks decayed below `track_drop_floor` are removed.
pub fn lmb_predict(
    prior: &LmbDensity<Kinematic>,
    birth: &BirthModel,
    motion: &MotionModel,
    next_time: u32,
    cfg: &FilterConfig,
    stream: RandomStream,
) -> Result<LmbDensity<Kinematic>> {
    let mut tracks: Vec<(Label, f64, Vec<(f64, Kinematic)>)> = Vec::with_capacity(prior.len());
    for (label, track) in prior.iter() {
        let survival_mass: f64 = track
            .cloud
            .iter()
            .map(|(w, x)| w * motion.survival(x))
            .sum();
        let existence = survival_mass * track.existence;
        if existence < cfg.track_drop_floor || survival_mass <= 0.0 {
            continue;
        }
        let mut rng = stream
            .child(tags::PREDICT_SURVIVE)
            .child(label.stream_tag())
            .rng();
        let cloud: Vec<(f64, Kinematic)> = track
            .cloud
            .iter()
            .map(|(w, x)| {
                (
                    w * motion.survival(x) / survival_mass,
                    motion.propagate(x, &mut rng),
                )
            })
            .collect();
        tracks.push((*label, existence, cloud));
    }
    let mut predicted = LmbDensity::new(tracks)?;

    if !birth.is_empty() {
        for (i, component) in birth.components().iter().enumerate() {
            if component.existence < cfg.track_drop_floor {
                continue;
            }
            let mut rng = stream
                .child(tags::PREDICT_BIRTH)
                .child(i as u64)
                .rng();
            let w = 1.0 / cfg.particles_per_hypothesis as f64;
            let cloud = (0..cfg.particles_per_hypothesis)
                .map(|_| (w, birth.sample_component(i, &mut rng)))
                .collect();
            predicted.insert(
                Label::new(next_time, i as u32 + 1),
                Track {
                    existence: component.existence,
                    cloud,
                },
            )?;
        }
    }
    Ok(predicted)
}

/// The multi-Bernoulli update under a generic likelihood.
///
/// Tracks with existence under the gate are carried through unchanged (their
/// Bernoulli factors cancel in the normalized hypothesis weights). Gated
/// tracks are re-scored: label subsets get Bernoulli-product predicted
/// weights, each retained subset is scored by joint particles sampled as
/// independent products of per-track clouds and weighted by the likelihood,
/// and the posterior mixture is collapsed by pooling each label's
/// coordinate over all hypotheses containing it, then resampling per track.
pub fn lmb_gom_update<L: JointLogLik>(
    predicted: &LmbDensity<Kinematic>,
    likelihood: &L,
    cfg: &FilterConfig,
    step: u32,
    stream: RandomStream,
) -> Result<LmbDensity<Kinematic>> {
    cfg.validate()?;
    let gated: Vec<(Label, &Track<Kinematic>)> = predicted
        .iter()
        .filter(|(_, t)| t.existence >= cfg.existence_floor)
        .map(|(l, t)| (*l, t))
        .collect();
    if gated.len() > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            count: gated.len(),
            cap: ENUMERATION_CAP,
        });
    }
    let carried = predicted.filter_labels(|l| !gated.iter().any(|(g, _)| g == l));
    if gated.is_empty() {
        return Ok(carried);
    }

    // Predicted hypothesis table over the gated labels.
    let mut table: Vec<(u64, f64)> = Vec::with_capacity(1 << gated.len());
    for mask in 0u64..(1u64 << gated.len()) {
        let w: f64 = gated
            .iter()
            .enumerate()
            .map(|(i, (_, t))| {
                if mask >> i & 1 == 1 {
                    t.existence
                } else {
                    1.0 - t.existence
                }
            })
            .product();
        if w > 0.0 {
            table.push((mask, w));
        }
    }
    truncate_weighted(&mut table, cfg.hypothesis_weight_floor, cfg.max_hypotheses)?;

    let cumulative: Vec<Vec<f64>> = gated
        .iter()
        .map(|(_, t)| {
            let mut acc = 0.0;
            t.cloud
                .iter()
                .map(|(w, _)| {
                    acc += w;
                    acc
                })
                .collect()
        })
        .collect();

    let n_p = cfg.particles_per_hypothesis;
    struct ScoredHypothesis {
        mask: u64,
        log_weight: f64,
        particles: Vec<Vec<Kinematic>>,
        weights: Vec<f64>,
    }
    let mut scored: Vec<ScoredHypothesis> = Vec::with_capacity(table.len());
    let mut log_weights_all: Vec<f64> = Vec::with_capacity(table.len());

    for &(mask, predicted_weight) in &table {
        let members: Vec<usize> = (0..gated.len()).filter(|i| mask >> i & 1 == 1).collect();
        let labels =
            LabelSet::from_sorted_unchecked(members.iter().map(|&i| gated[i].0).collect());
        let mut rng = stream.child(tags::UPDATE_HYP).child(mask).rng();

        if members.is_empty() {
            let log_eta = likelihood.log_g(&labels, &[]);
            if log_eta.is_finite() {
                let lw = log_eta + predicted_weight.ln();
                scored.push(ScoredHypothesis {
                    mask,
                    log_weight: lw,
                    particles: Vec::new(),
                    weights: Vec::new(),
                });
                log_weights_all.push(lw);
            }
            continue;
        }

        let mut particles: Vec<Vec<Kinematic>> = Vec::with_capacity(n_p);
        let mut log_w: Vec<f64> = Vec::with_capacity(n_p);
        for _ in 0..n_p {
            let states: Vec<Kinematic> = members
                .iter()
                .map(|&i| {
                    let u: f64 = rng.gen::<f64>();
                    let cum = &cumulative[i];
                    let j = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                    gated[i].1.cloud[j].1
                })
                .collect();
            log_w.push(likelihood.log_g(&labels, &states));
            particles.push(states);
        }
        let log_eta = log_sum_exp(&log_w) - (n_p as f64).ln();
        if !log_eta.is_finite() {
            continue; // degenerate hypothesis
        }
        let max_lw = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = log_w.iter().map(|lw| (lw - max_lw).exp()).collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        let lw = log_eta + predicted_weight.ln();
        scored.push(ScoredHypothesis {
            mask,
            log_weight: lw,
            particles,
            weights,
        });
        log_weights_all.push(lw);
    }

    if scored.is_empty() {
        return Err(Error::DegenerateStep { step });
    }
    let log_norm = log_sum_exp(&log_weights_all);
    let mut weighted: Vec<(usize, f64)> = scored
        .iter()
        .enumerate()
        .map(|(i, s)| (i, (s.log_weight - log_norm).exp()))
        .collect();
    truncate_weighted(&mut weighted, cfg.hypothesis_weight_floor, cfg.max_hypotheses)?;

    // Collapse: pool each gated label's coordinate across hypotheses.
    let mut output = carried;
    for (i, (label, _)) in gated.iter().enumerate() {
        let mut existence = 0.0;
        let mut pooled: Vec<(f64, Kinematic)> = Vec::new();
        for &(s_idx, hyp_weight) in &weighted {
            let hyp = &scored[s_idx];
            if hyp.mask >> i & 1 == 0 {
                continue;
            }
            existence += hyp_weight;
            let coord = (0..i).filter(|j| hyp.mask >> j & 1 == 1).count();
            for (w, states) in hyp.weights.iter().zip(&hyp.particles) {
                pooled.push((hyp_weight * w, states[coord]));
            }
        }
        if existence < EXISTENCE_EPSILON {
            continue;
        }
        let mass: f64 = pooled.iter().map(|(w, _)| w).sum();
        for (w, _) in &mut pooled {
            *w /= mass;
        }
        let mut rng = stream
            .child(tags::COLLAPSE)
            .child(label.stream_tag())
            .rng();
        let cloud = if effective_sample_size(&pooled.iter().map(|(w, _)| *w).collect::<Vec<_>>())
            <= cfg.ess_ratio * n_p as f64
        {
            let weights: Vec<f64> = pooled.iter().map(|(w, _)| *w).collect();
            resample_systematic(&weights, n_p, &mut rng)
                .into_iter()
                .map(|j| (1.0 / n_p as f64, pooled[j].1))
                .collect()
        } else {
            pooled
        };
        output.insert(
            *label,
            Track {
                existence: existence.min(1.0),
                cloud,
            },
        )?;
    }
    Ok(output)
}

/// Per-step diagnostics of the grouped update.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// The label subsets and claimed observation counts of each group.
    pub groups: Vec<(LabelSet, usize)>,
    /// Groups whose update degenerated; their tracks kept predicted
    /// parameters.
    pub degenerate_groups: Vec<LabelSet>,
}

/// One full prediction-update step of the multi-Bernoulli recursion, with
/// optional grouping.
///
/// With `grouping` set, the gated predicted tracks are partitioned into
/// coupling groups and each group is updated independently against its own
/// observation restriction; the unassociated residual is discarded. A
/// partition with a single group (and a disabled grouping config alike)
/// updates every gated track against the full frame, so the grouped filter
/// degenerates to the plain multi-Bernoulli filter bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn g_lmb_gom_step(
    prior: &LmbDensity<Kinematic>,
    birth: &BirthModel,
    motion: &MotionModel,
    sensor: &SensorModel,
    frame: &ObservationFrame,
    grouping: Option<&GroupingConfig>,
    cfg: &FilterConfig,
    next_time: u32,
    stream: RandomStream,
) -> Result<(LmbDensity<Kinematic>, StepDiagnostics)> {
    let predicted = lmb_predict(prior, birth, motion, next_time, cfg, stream)?;
    lmb_grouped_update(&predicted, sensor, frame, grouping, cfg, next_time, stream)
}

/// The grouped update applied to an already-predicted density.
pub fn lmb_grouped_update(
    predicted: &LmbDensity<Kinematic>,
    sensor: &SensorModel,
    frame: &ObservationFrame,
    grouping: Option<&GroupingConfig>,
    cfg: &FilterConfig,
    next_time: u32,
    stream: RandomStream,
) -> Result<(LmbDensity<Kinematic>, StepDiagnostics)> {
    sensor.check_frame(frame)?;
    let gated: LabelSet = predicted
        .iter()
        .filter(|(_, t)| t.existence >= cfg.existence_floor)
        .map(|(l, _)| *l)
        .collect();
    if gated.is_empty() {
        return Ok((predicted.clone(), StepDiagnostics::default()));
    }

    let partition: Option<TrackPartition> =
        grouping.map(|gcfg| partition_tracks(predicted, &gated, sensor, gcfg));

    let single_group = match &partition {
        None => true,
        Some(p) => p.groups.len() <= 1,
    };

    if single_group {
        let min_label = gated.as_slice()[0];
        let group_stream = stream.child(tags::GROUP).child(min_label.stream_tag());
        let prepared = sensor.prepared(frame, None)?;
        let updated = lmb_gom_update(predicted, &prepared, cfg, next_time, group_stream)?;
        let diagnostics = StepDiagnostics {
            groups: vec![(gated, sensor.frame_len())],
            degenerate_groups: Vec::new(),
        };
        return Ok((updated, diagnostics));
    }

    let partition = partition.expect("multi-group path requires a partition");
    let mut output = predicted.filter_labels(|l| !gated.contains(l));
    let mut diagnostics = StepDiagnostics::default();
    for group in &partition.groups {
        let min_label = group.labels.as_slice()[0];
        let group_stream = stream.child(tags::GROUP).child(min_label.stream_tag());
        let members = predicted.filter_labels(|l| group.labels.contains(l));
        let prepared = sensor.prepared(frame, Some(group.observations.clone()))?;
        diagnostics
            .groups
            .push((group.labels.clone(), group.observations.len()));
        match lmb_gom_update(&members, &prepared, cfg, next_time, group_stream) {
            Ok(updated) => {
                output = output.union(updated)?;
            }
            Err(Error::DegenerateStep { .. }) => {
                // Only this group fails; its tracks keep predicted parameters.
                diagnostics.degenerate_groups.push(group.labels.clone());
                output = output.union(members)?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((output, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::BirthComponent;
    use nalgebra::{Matrix4, Vector4};

    fn motion(survival: f64, sigma_v: f64) -> MotionModel {
        MotionModel::constant_velocity(1.0, sigma_v, survival).unwrap()
    }

    fn one_track(r: f64, x: Kinematic) -> LmbDensity<Kinematic> {
        LmbDensity::new(vec![(Label::new(0, 1), r, vec![(1.0, x)])]).unwrap()
    }

    #[test]
    fn predicted_existence_scales_by_survival() {
        let prior = one_track(0.5, Vector4::new(1.0, 1.0, 0.5, 0.0));
        let cfg = FilterConfig::default();
        let predicted = lmb_predict(
            &prior,
            &BirthModel::none(),
            &motion(0.98, 0.0),
            1,
            &cfg,
            RandomStream::root(0),
        )
        .unwrap();
        let t = predicted.get(&Label::new(0, 1)).unwrap();
        assert!((t.existence - 0.49).abs() < 1e-12);
        // Noiseless kinematics map deterministically.
        assert_eq!(t.cloud[0].1, Vector4::new(1.5, 1.0, 0.5, 0.0));
    }

    #[test]
    fn zero_survival_leaves_births_only() {
        let prior = one_track(0.9, Vector4::zeros());
        let birth = BirthModel::new(vec![BirthComponent {
            existence: 0.02,
            mean: Vector4::new(5.0, 5.0, 0.0, 0.0),
            covariance: Matrix4::zeros(),
        }])
        .unwrap();
        let cfg = FilterConfig {
            particles_per_hypothesis: 8,
            ..FilterConfig::default()
        };
        let predicted = lmb_predict(
            &prior,
            &birth,
            &motion(0.0, 0.0),
            3,
            &cfg,
            RandomStream::root(0),
        )
        .unwrap();
        assert_eq!(predicted.len(), 1);
        let (label, track) = predicted.iter().next().unwrap();
        assert_eq!(*label, Label::new(3, 1));
        assert!((track.existence - 0.02).abs() < 1e-12);
    }

    #[test]
    fn flat_likelihood_is_identity_on_existence() {
        let prior = LmbDensity::new(vec![
            (Label::new(0, 1), 0.8, vec![(1.0, Vector4::zeros())]),
            (Label::new(0, 2), 0.3, vec![(1.0, Vector4::new(9.0, 9.0, 0.0, 0.0))]),
        ])
        .unwrap();
        let cfg = FilterConfig {
            particles_per_hypothesis: 64,
            ..FilterConfig::default().exhaustive()
        };
        let flat = |_: &LabelSet, _: &[Kinematic]| 0.0;
        let updated =
            lmb_gom_update(&prior, &flat, &cfg, 0, RandomStream::root(9)).unwrap();
        for (l, t) in prior.iter() {
            let u = updated.get(l).unwrap();
            assert!(
                (u.existence - t.existence).abs() < 1e-9,
                "{l}: {} vs {}",
                u.existence,
                t.existence
            );
        }
    }

    #[test]
    fn low_existence_tracks_are_carried_unchanged() {
        let prior = LmbDensity::new(vec![
            (Label::new(0, 1), 0.9, vec![(1.0, Vector4::zeros())]),
            (Label::new(0, 2), 1e-4, vec![(1.0, Vector4::new(1.0, 0.0, 0.0, 0.0))]),
        ])
        .unwrap();
        let cfg = FilterConfig {
            particles_per_hypothesis: 32,
            ..FilterConfig::default()
        };
        let flat = |_: &LabelSet, _: &[Kinematic]| 0.0;
        let updated = lmb_gom_update(&prior, &flat, &cfg, 0, RandomStream::root(1)).unwrap();
        let carried = updated.get(&Label::new(0, 2)).unwrap();
        assert_eq!(carried.existence, 1e-4);
        assert_eq!(carried.cloud.len(), 1);
    }

    #[test]
    fn degenerate_update_reports_step() {
        let prior = one_track(0.9, Vector4::zeros());
        let cfg = FilterConfig {
            particles_per_hypothesis: 8,
            ..FilterConfig::default().exhaustive()
        };
        let impossible = |_: &LabelSet, _: &[Kinematic]| f64::NEG_INFINITY;
        let err =
            lmb_gom_update(&prior, &impossible, &cfg, 11, RandomStream::root(1)).unwrap_err();
        assert!(matches!(err, Error::DegenerateStep { step: 11 }));
    }

    #[test]
    fn gating_overflow_is_rejected() {
        let tracks: Vec<_> = (0..21)
            .map(|i| (Label::new(0, i + 1), 0.5, vec![(1.0, Vector4::zeros())]))
            .collect();
        let prior = LmbDensity::new(tracks).unwrap();
        let cfg = FilterConfig::default();
        let flat = |_: &LabelSet, _: &[Kinematic]| 0.0;
        assert!(matches!(
            lmb_gom_update(&prior, &flat, &cfg, 0, RandomStream::root(1)),
            Err(Error::EnumerationCap { .. })
        ));
    }
}
