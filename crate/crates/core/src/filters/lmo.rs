//! The exact mixture-form recursion with its sequential Monte Carlo scheme.
//!
//! Prediction propagates the hypothesis weight table through per-object
//! survival and the multi-Bernoulli birth; the update draws joint particles
//! per predicted hypothesis through an auxiliary-variable proposal (previous
//! hypothesis, previous particle index), weights them by the generic
//! likelihood, and renormalizes across hypotheses.

use rand::Rng;

use crate::error::{Error, Result};
use crate::filters::{tags, truncate_weighted, FilterConfig};
use crate::motion::{BirthModel, MotionModel};
use crate::rfs::{
    JointParticles, Kinematic, Label, LabelSet, LmoDensity, Particle, ENUMERATION_CAP,
};
use crate::sensors::JointLogLik;
use crate::smc::{effective_sample_size, log_sum_exp, resample_systematic, RandomStream};

/// The predicted hypothesis weight table: label sets with normalized
/// weights, gated and renormalized.
#[derive(Clone, Debug)]
pub struct PredictedWeightTable {
    entries: Vec<(LabelSet, f64)>,
}

impl PredictedWeightTable {
    pub fn entries(&self) -> &[(LabelSet, f64)] {
        &self.entries
    }

    pub fn weight_of(&self, labels: &LabelSet) -> f64 {
        self.entries
            .iter()
            .find(|(l, _)| l == labels)
            .map_or(0.0, |(_, w)| *w)
    }

    pub(crate) fn from_masks(table: &MaskTable) -> Self {
        let entries = table
            .entries
            .iter()
            .map(|(mask, w)| (table.label_set(*mask), *w))
            .collect();
        PredictedWeightTable { entries }
    }
}

/// Internal bitmask form of the predicted table. The universe is sorted in
/// label order with all prior labels preceding all birth labels (birth
/// times strictly increase), so bit `i` addresses `universe[i]`.
pub(crate) struct MaskTable {
    pub universe: Vec<Label>,
    pub n_prior: usize,
    /// `(mask, weight)` with weights normalized, ascending mask order.
    pub entries: Vec<(u64, f64)>,
}

impl MaskTable {
    pub fn label_set(&self, mask: u64) -> LabelSet {
        LabelSet::from_sorted_unchecked(
            self.universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, l)| *l)
                .collect(),
        )
    }
}

/// Builds the predicted weight table over the gated label universe.
///
/// Survivor weights follow the prior particle clouds through per-state
/// survival; birth weights are the Bernoulli products of the birth
/// components. Labels whose marginal existence falls below
/// `existence_floor` are excluded from enumeration and the table is
/// renormalized over what remains.
pub(crate) fn predicted_masks<S: Clone>(
    prior: &LmoDensity<S>,
    births: &[(Label, f64)],
    survival: &dyn Fn(&S) -> f64,
    existence_floor: f64,
) -> Result<MaskTable> {
    let prior_labels: Vec<Label> = prior
        .label_universe()
        .iter()
        .filter(|l| prior.label_existence(l) >= existence_floor)
        .copied()
        .collect();
    let gated_births: Vec<(Label, f64)> = births
        .iter()
        .filter(|(_, r)| *r >= existence_floor && *r > 0.0)
        .copied()
        .collect();

    let n_prior = prior_labels.len();
    let n_birth = gated_births.len();
    let total = n_prior + n_birth;
    if total > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            count: total,
            cap: ENUMERATION_CAP,
        });
    }
    if let (Some(last_prior), Some((first_birth, _))) =
        (prior_labels.last(), gated_births.first())
    {
        debug_assert!(last_prior < first_birth, "birth labels must sort last");
    }

    // Per hypothesis: which of its coordinates carry gated labels (and
    // which universe bit), plus per-particle survival values.
    struct HypInfo {
        weight: f64,
        gated_mask: u64,
        bit_of_pos: Vec<Option<usize>>,
        surv: Vec<Vec<f64>>,
        particle_weights: Vec<f64>,
    }
    let hyp_infos: Vec<HypInfo> = prior
        .hypotheses()
        .iter()
        .map(|h| {
            let labels = h.joint.labels();
            let bit_of_pos: Vec<Option<usize>> = labels
                .iter()
                .map(|l| prior_labels.binary_search(l).ok())
                .collect();
            let gated_mask = bit_of_pos
                .iter()
                .flatten()
                .fold(0u64, |m, &b| m | 1 << b);
            let surv = h
                .joint
                .particles()
                .iter()
                .map(|p| p.states.iter().map(|s| survival(s)).collect())
                .collect();
            let particle_weights = h.joint.particles().iter().map(|p| p.weight).collect();
            HypInfo {
                weight: h.weight,
                gated_mask,
                bit_of_pos,
                surv,
                particle_weights,
            }
        })
        .collect();

    let mut survivor_weights = vec![0.0f64; 1usize << n_prior];
    for (j_mask, w) in survivor_weights.iter_mut().enumerate() {
        let j_mask = j_mask as u64;
        let mut acc = 0.0;
        for info in &hyp_infos {
            if j_mask & !info.gated_mask != 0 {
                continue; // J not a subset of this hypothesis
            }
            let mut eta = 0.0;
            for (pw, surv) in info.particle_weights.iter().zip(&info.surv) {
                let mut prod = *pw;
                for (pos, s) in surv.iter().enumerate() {
                    let survives = matches!(info.bit_of_pos[pos], Some(b) if j_mask >> b & 1 == 1);
                    prod *= if survives { *s } else { 1.0 - *s };
                }
                eta += prod;
            }
            acc += info.weight * eta;
        }
        *w = acc;
    }

    let mut birth_weights = vec![0.0f64; 1usize << n_birth];
    for (b_mask, w) in birth_weights.iter_mut().enumerate() {
        *w = gated_births
            .iter()
            .enumerate()
            .map(|(i, (_, r))| if b_mask >> i & 1 == 1 { *r } else { 1.0 - *r })
            .product();
    }

    let mut universe = prior_labels;
    universe.extend(gated_births.iter().map(|(l, _)| *l));

    let mut entries = Vec::new();
    let mut sum = 0.0;
    for (j_mask, sw) in survivor_weights.iter().enumerate() {
        if *sw <= 0.0 {
            continue;
        }
        for (b_mask, bw) in birth_weights.iter().enumerate() {
            let w = sw * bw;
            if w > 0.0 {
                entries.push(((j_mask as u64) | (b_mask as u64) << n_prior, w));
                sum += w;
            }
        }
    }
    if !(sum > 0.0) {
        return Err(Error::ZeroWeightSum);
    }
    for (_, w) in &mut entries {
        *w /= sum;
    }
    entries.sort_unstable_by_key(|(m, _)| *m);
    Ok(MaskTable {
        universe,
        n_prior,
        entries,
    })
}

/// The predicted hypothesis weights for a mixture-form prior under the
/// standard transition kernel, gated by the configured existence floor and
/// renormalized.
pub fn lmo_predicted_weights(
    prior: &LmoDensity<Kinematic>,
    birth: &BirthModel,
    motion: &MotionModel,
    next_time: u32,
    cfg: &FilterConfig,
) -> Result<PredictedWeightTable> {
    let births: Vec<(Label, f64)> = birth
        .labels_at(next_time)
        .into_iter()
        .zip(birth.components().iter().map(|c| c.existence))
        .collect();
    let table = predicted_masks(
        prior,
        &births,
        &|x: &Kinematic| motion.survival(x),
        cfg.existence_floor,
    )?;
    let entries = table
        .entries
        .iter()
        .map(|(mask, w)| (table.label_set(*mask), *w))
        .collect();
    Ok(PredictedWeightTable { entries })
}

/// One prediction-update step of the mixture-form filter.
///
/// For every retained predicted hypothesis, joint particles are drawn with
/// the auxiliary-variable proposal (previous hypothesis with probability
/// proportional to its weight and survival mass, previous particle by its
/// weight, survivors through the transition kernel, births from their birth
/// densities); the unnormalized particle weight is the likelihood of the
/// frame. Hypothesis weights are re-scored by the particle-sum likelihood
/// normalizers, clouds are resampled, and the table is truncated.
pub fn lmo_gom_step<L: JointLogLik>(
    prior: &LmoDensity<Kinematic>,
    birth: &BirthModel,
    motion: &MotionModel,
    likelihood: &L,
    next_time: u32,
    cfg: &FilterConfig,
    stream: RandomStream,
) -> Result<LmoDensity<Kinematic>> {
    cfg.validate()?;
    let births: Vec<(Label, f64)> = birth
        .labels_at(next_time)
        .into_iter()
        .zip(birth.components().iter().map(|c| c.existence))
        .collect();
    let table = predicted_masks(
        prior,
        &births,
        &|x: &Kinematic| motion.survival(x),
        cfg.existence_floor,
    )?;

    let mut predicted: Vec<(u64, f64)> = table.entries.clone();
    truncate_weighted(&mut predicted, cfg.hypothesis_weight_floor, cfg.max_hypotheses)?;

    let n_p = cfg.particles_per_hypothesis;
    let mut posterior: Vec<(LabelSet, f64, JointParticles<Kinematic>)> = Vec::new();
    let mut log_posterior_weights: Vec<f64> = Vec::new();

    for &(mask, predicted_weight) in &predicted {
        let labels = table.label_set(mask);
        let mut rng = stream.child(tags::UPDATE_HYP).child(mask).rng();

        if labels.is_empty() {
            let log_eta = likelihood.log_g(&labels, &[]);
            if log_eta.is_finite() {
                posterior.push((labels, predicted_weight, JointParticles::empty_set()));
                log_posterior_weights.push(log_eta + predicted_weight.ln());
            }
            continue;
        }

        let survivor_mask = mask & ((1u64 << table.n_prior) - 1);
        let selection = if survivor_mask != 0 {
            match build_selection(prior, &table, survivor_mask, motion) {
                Some(sel) => Some(sel),
                None => continue, // no prior mass can reach this hypothesis
            }
        } else {
            None
        };

        let mut particles: Vec<Vec<Kinematic>> = Vec::with_capacity(n_p);
        let mut log_weights: Vec<f64> = Vec::with_capacity(n_p);
        for _ in 0..n_p {
            let source = selection.as_ref().map(|sel| sel.draw(&mut rng));
            let mut states = Vec::with_capacity(labels.len());
            for label in labels.iter() {
                let bit = table
                    .universe
                    .iter()
                    .position(|l| l == label)
                    .expect("label from the universe");
                if bit < table.n_prior {
                    let (hyp_idx, particle_idx) = source.expect("survivors imply a selection");
                    let hyp = &prior.hypotheses()[hyp_idx];
                    let pos = hyp
                        .joint
                        .labels()
                        .position(label)
                        .expect("selection restricted to superset hypotheses");
                    let x = &hyp.joint.particles()[particle_idx].states[pos];
                    states.push(motion.propagate(x, &mut rng));
                } else {
                    let component = (label.birth_index - 1) as usize;
                    states.push(birth.sample_component(component, &mut rng));
                }
            }
            log_weights.push(likelihood.log_g(&labels, &states));
            particles.push(states);
        }

        let log_eta = log_sum_exp(&log_weights) - (n_p as f64).ln();
        if !log_eta.is_finite() {
            continue; // degenerate hypothesis: every particle scored zero
        }

        // Normalize particle weights in log domain, then resample.
        let max_lw = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = log_weights.iter().map(|lw| (lw - max_lw).exp()).collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        let cloud = if effective_sample_size(&weights) <= cfg.ess_ratio * n_p as f64 {
            let idx = resample_systematic(&weights, n_p, &mut rng);
            idx.into_iter()
                .map(|i| Particle {
                    weight: 1.0 / n_p as f64,
                    states: particles[i].clone(),
                })
                .collect()
        } else {
            weights
                .iter()
                .zip(&particles)
                .map(|(w, s)| Particle {
                    weight: *w,
                    states: s.clone(),
                })
                .collect()
        };

        posterior.push((
            labels.clone(),
            predicted_weight,
            JointParticles::new(labels, cloud)?,
        ));
        log_posterior_weights.push(log_eta + predicted_weight.ln());
    }

    if posterior.is_empty() {
        return Err(Error::DegenerateStep { step: next_time });
    }

    let log_norm = log_sum_exp(&log_posterior_weights);
    let mut weighted: Vec<(JointParticles<Kinematic>, f64)> = posterior
        .into_iter()
        .zip(&log_posterior_weights)
        .map(|((_, _, joint), lw)| (joint, (lw - log_norm).exp()))
        .collect();
    truncate_weighted(&mut weighted, cfg.hypothesis_weight_floor, cfg.max_hypotheses)?;
    LmoDensity::new(weighted.into_iter().map(|(j, w)| (w, j)).collect())
}

/// Bayes update of a mixture-form density in place, without prediction:
/// every hypothesis keeps its particle positions, re-weighted by the
/// likelihood; hypothesis weights are re-scored by the particle-sum
/// normalizers. Used when a filter is initialized at the first frame.
pub fn lmo_reweight<L: JointLogLik>(
    density: &LmoDensity<Kinematic>,
    likelihood: &L,
    cfg: &FilterConfig,
    step: u32,
    stream: RandomStream,
) -> Result<LmoDensity<Kinematic>> {
    let mut components: Vec<(JointParticles<Kinematic>, f64)> = Vec::new();
    let mut log_weights: Vec<f64> = Vec::new();
    for (ordinal, h) in density.hypotheses().iter().enumerate() {
        let labels = h.joint.labels();
        let log_w: Vec<f64> = h
            .joint
            .particles()
            .iter()
            .map(|p| p.weight.ln() + likelihood.log_g(labels, &p.states))
            .collect();
        let log_eta = log_sum_exp(&log_w);
        if !log_eta.is_finite() {
            continue;
        }
        let mut weights: Vec<f64> = log_w.iter().map(|lw| (lw - log_eta).exp()).collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        let n = weights.len();
        let cloud: Vec<Particle<Kinematic>> =
            if effective_sample_size(&weights) <= cfg.ess_ratio * n as f64 && !labels.is_empty() {
                let mut rng = stream.child(tags::UPDATE_HYP).child(ordinal as u64).rng();
                resample_systematic(&weights, n, &mut rng)
                    .into_iter()
                    .map(|i| Particle {
                        weight: 1.0 / n as f64,
                        states: h.joint.particles()[i].states.clone(),
                    })
                    .collect()
            } else {
                weights
                    .iter()
                    .zip(h.joint.particles())
                    .map(|(w, p)| Particle {
                        weight: *w,
                        states: p.states.clone(),
                    })
                    .collect()
            };
        components.push((JointParticles::new(labels.clone(), cloud)?, 0.0));
        log_weights.push(log_eta + h.weight.ln());
    }
    if components.is_empty() {
        return Err(Error::DegenerateStep { step });
    }
    let log_norm = log_sum_exp(&log_weights);
    let mut weighted: Vec<(JointParticles<Kinematic>, f64)> = components
        .into_iter()
        .zip(&log_weights)
        .map(|((joint, _), lw)| (joint, (lw - log_norm).exp()))
        .collect();
    truncate_weighted(&mut weighted, cfg.hypothesis_weight_floor, cfg.max_hypotheses)?;
    LmoDensity::new(weighted.into_iter().map(|(j, w)| (w, j)).collect())
}

/// Cumulative table for drawing `(hypothesis, particle)` pairs proportional
/// to prior weight, particle weight and the survive/die factors of the
/// survivor set.
struct SelectionTable {
    cumulative: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl SelectionTable {
    fn draw<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let total = *self.cumulative.last().expect("non-empty selection");
        let u: f64 = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.pairs[idx.min(self.pairs.len() - 1)]
    }
}

fn build_selection(
    prior: &LmoDensity<Kinematic>,
    table: &MaskTable,
    survivor_mask: u64,
    motion: &MotionModel,
) -> Option<SelectionTable> {
    let mut cumulative = Vec::new();
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (hyp_idx, hyp) in prior.hypotheses().iter().enumerate() {
        let labels = hyp.joint.labels();
        let bit_of_pos: Vec<Option<usize>> = labels
            .iter()
            .map(|l| {
                table.universe[..table.n_prior]
                    .binary_search(l)
                    .ok()
            })
            .collect();
        let gated_mask = bit_of_pos.iter().flatten().fold(0u64, |m, &b| m | 1 << b);
        if survivor_mask & !gated_mask != 0 {
            continue;
        }
        for (particle_idx, p) in hyp.joint.particles().iter().enumerate() {
            let mut sel = hyp.weight * p.weight;
            for (pos, x) in p.states.iter().enumerate() {
                let s = motion.survival(x);
                let survives =
                    matches!(bit_of_pos[pos], Some(b) if survivor_mask >> b & 1 == 1);
                sel *= if survives { s } else { 1.0 - s };
            }
            if sel > 0.0 {
                total += sel;
                cumulative.push(total);
                pairs.push((hyp_idx, particle_idx));
            }
        }
    }
    if total > 0.0 {
        Some(SelectionTable { cumulative, pairs })
    } else {
        None
    }
}
