//! Standard multi-object transition kernel: per-object survival,
//! linear-Gaussian constant-velocity kinematics, and multi-Bernoulli birth.

use nalgebra::{Cholesky, Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::{Kinematic, Label, LabeledState, LmbDensity};

const PSD_TOLERANCE: f64 = 1e-12;

/// Single-object linear-Gaussian motion with constant survival probability.
#[derive(Clone, Debug)]
pub struct MotionModel {
    transition: Matrix4<f64>,
    process_noise: Matrix4<f64>,
    survival: f64,
    step_seconds: f64,
    noise_chol: Option<Matrix4<f64>>,
    density_chol: Cholesky<f64, nalgebra::U4>,
}

impl MotionModel {
    pub fn new(
        transition: Matrix4<f64>,
        process_noise: Matrix4<f64>,
        survival: f64,
        step_seconds: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&survival) {
            return Err(Error::InvalidConfig(format!(
                "survival probability {survival} outside [0,1]"
            )));
        }
        if (process_noise - process_noise.transpose()).abs().max() > 1e-9 {
            return Err(Error::InvalidConfig("process noise not symmetric".into()));
        }
        let eigen = process_noise.symmetric_eigenvalues();
        if eigen.iter().any(|&e| e < -PSD_TOLERANCE) {
            return Err(Error::InvalidConfig(
                "process noise has a negative eigenvalue".into(),
            ));
        }
        let noise_chol = if process_noise.abs().max() == 0.0 {
            None
        } else {
            Some(
                Cholesky::new(process_noise)
                    .or_else(|| Cholesky::new(process_noise + Matrix4::identity() * PSD_TOLERANCE))
                    .ok_or_else(|| Error::InvalidConfig("process noise not PSD".into()))?
                    .l(),
            )
        };
        // Density evaluation always works on a regularized covariance so a
        // degenerate kernel stays evaluable.
        let density_chol = Cholesky::new(process_noise)
            .or_else(|| Cholesky::new(process_noise + Matrix4::identity() * PSD_TOLERANCE))
            .ok_or_else(|| Error::InvalidConfig("process noise not PSD".into()))?;
        Ok(MotionModel {
            transition,
            process_noise,
            survival,
            step_seconds,
            noise_chol,
            density_chol,
        })
    }

    /// The planar constant-velocity model: block transition with sampling
    /// period `delta` and process noise scaled by `sigma_v²`.
    pub fn constant_velocity(delta: f64, sigma_v: f64, survival: f64) -> Result<Self> {
        let mut f = Matrix4::identity();
        f[(0, 2)] = delta;
        f[(1, 3)] = delta;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d3 * delta;
        let s2 = sigma_v * sigma_v;
        let mut q = Matrix4::zeros();
        for i in 0..2 {
            q[(i, i)] = s2 * d4 / 3.0;
            q[(i + 2, i + 2)] = s2 * d2;
            q[(i, i + 2)] = s2 * d3 / 2.0;
            q[(i + 2, i)] = s2 * d3 / 2.0;
        }
        MotionModel::new(f, q, survival, delta)
    }

    pub fn transition_matrix(&self) -> &Matrix4<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &Matrix4<f64> {
        &self.process_noise
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds
    }

    /// Survival probability of a labeled state. Constant here; the state
    /// argument keeps the interface open for state-dependent survival.
    pub fn survival_prob(&self, _state: &LabeledState) -> f64 {
        self.survival
    }

    #[inline]
    pub(crate) fn survival(&self, _x: &Kinematic) -> f64 {
        self.survival
    }

    /// Draws the next state from the transition kernel; exact `F x` when the
    /// process noise is zero.
    pub fn propagate<R: Rng>(&self, x: &Kinematic, rng: &mut R) -> Kinematic {
        let mean = self.transition * x;
        match &self.noise_chol {
            None => mean,
            Some(l) => {
                let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                mean + l * z
            }
        }
    }

    /// Transition density value `N(x_next; F x, Q)`, with `Q` regularized by
    /// `1e-12 I` when singular.
    pub fn transition_density(&self, x_next: &Kinematic, x: &Kinematic) -> f64 {
        let diff = x_next - self.transition * x;
        let solved = self.density_chol.solve(&diff);
        let maha = diff.dot(&solved);
        let det = self.density_chol.determinant();
        let norm = (2.0 * std::f64::consts::PI).powi(2) * det.sqrt();
        (-0.5 * maha).exp() / norm
    }
}

/// One Gaussian birth component of a multi-Bernoulli birth model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BirthComponent {
    pub existence: f64,
    pub mean: Kinematic,
    pub covariance: Matrix4<f64>,
}

/// The birth process: component `i` of the step entering time `k` becomes a
/// fresh Bernoulli track labeled `(k, i+1)`, so birth labels can never
/// collide with labels born earlier.
#[derive(Clone, Debug, Default)]
pub struct BirthModel {
    components: Vec<BirthComponent>,
    chols: Vec<Option<Matrix4<f64>>>,
}

impl BirthModel {
    pub fn none() -> Self {
        BirthModel::default()
    }

    pub fn new(components: Vec<BirthComponent>) -> Result<Self> {
        let mut chols = Vec::with_capacity(components.len());
        for c in &components {
            if !(0.0..=1.0).contains(&c.existence) {
                return Err(Error::InvalidConfig(format!(
                    "birth existence {} outside [0,1]",
                    c.existence
                )));
            }
            if c.covariance.abs().max() == 0.0 {
                chols.push(None);
            } else {
                let ch = Cholesky::new(c.covariance)
                    .or_else(|| Cholesky::new(c.covariance + Matrix4::identity() * PSD_TOLERANCE))
                    .ok_or_else(|| Error::InvalidConfig("birth covariance not PSD".into()))?;
                chols.push(Some(ch.l()));
            }
        }
        Ok(BirthModel { components, chols })
    }

    pub fn components(&self) -> &[BirthComponent] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Labels assigned to the components for the step entering `time`.
    pub fn labels_at(&self, time: u32) -> Vec<Label> {
        (0..self.components.len())
            .map(|i| Label::new(time, i as u32 + 1))
            .collect()
    }

    /// Draws one state from component `i`.
    pub fn sample_component<R: Rng>(&self, i: usize, rng: &mut R) -> Kinematic {
        match &self.chols[i] {
            None => self.components[i].mean,
            Some(l) => {
                let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                self.components[i].mean + l * z
            }
        }
    }

    /// The multi-Bernoulli fragment born into `time`: per component, a fresh
    /// track with its existence and `particles` draws from its density.
    pub fn sample_tracks<R: Rng>(
        &self,
        time: u32,
        particles: usize,
        rng: &mut R,
    ) -> Result<LmbDensity<Kinematic>> {
        let w = 1.0 / particles as f64;
        let tracks = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let cloud = (0..particles)
                    .map(|_| (w, self.sample_component(i, rng)))
                    .collect();
                (Label::new(time, i as u32 + 1), c.existence, cloud)
            })
            .collect();
        LmbDensity::new(tracks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smc::RandomStream;

    fn cv(sigma_v: f64) -> MotionModel {
        MotionModel::constant_velocity(1.0, sigma_v, 0.98).unwrap()
    }

    #[test]
    fn noiseless_propagation_is_constant_velocity() {
        let m = cv(0.0);
        let mut rng = RandomStream::root(0).rng();
        let x = Vector4::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(m.propagate(&x, &mut rng), Vector4::new(1.0, 0.0, 1.0, 0.0));
        assert_eq!(
            m.propagate(&Vector4::zeros(), &mut rng),
            Vector4::zeros()
        );
    }

    #[test]
    fn noiseless_propagation_is_linear() {
        let m = cv(0.0);
        let mut rng = RandomStream::root(0).rng();
        let x = Vector4::new(1.0, 2.0, 3.0, 4.0);
        let y = Vector4::new(-2.0, 0.5, 1.0, -1.0);
        let lhs = m.propagate(&(x * 2.0 + y * 3.0), &mut rng);
        let rhs = m.propagate(&x, &mut rng) * 2.0 + m.propagate(&y, &mut rng) * 3.0;
        assert!((lhs - rhs).abs().max() < 1e-12);
    }

    #[test]
    fn propagation_moments_match_kernel() {
        let m = cv(0.7);
        let x0 = Vector4::new(5.0, -3.0, 1.0, 2.0);
        let mean = m.transition_matrix() * x0;
        let n = 100_000;
        let mut rng = RandomStream::root(77).rng();
        let mut acc = Vector4::zeros();
        for _ in 0..n {
            acc += m.propagate(&x0, &mut rng);
        }
        let sample_mean = acc / n as f64;
        for i in 0..4 {
            let sigma = m.process_noise()[(i, i)].sqrt();
            let tol = 3.0 * sigma / (n as f64).sqrt();
            assert!(
                (sample_mean[i] - mean[i]).abs() < tol,
                "coordinate {i}: {} vs {}",
                sample_mean[i],
                mean[i]
            );
        }
    }

    #[test]
    fn density_peak_and_symmetry() {
        let m = cv(0.5);
        let x = Vector4::new(1.0, 1.0, 0.0, 0.0);
        let mean = m.transition_matrix() * x;
        let det = m.process_noise().determinant();
        let peak = 1.0 / ((2.0 * std::f64::consts::PI).powi(2) * det.sqrt());
        assert!((m.transition_density(&mean, &x) - peak).abs() / peak < 1e-9);

        let d = Vector4::new(0.3, -0.2, 0.1, 0.05);
        let plus = m.transition_density(&(mean + d), &x);
        let minus = m.transition_density(&(mean - d), &x);
        assert!((plus - minus).abs() < 1e-12);
    }

    #[test]
    fn density_normalizes_on_grid() {
        // Velocity coordinates integrated over a 6-sigma grid; positions are
        // deterministic given velocity up to the correlated noise, so use a
        // diagonal test kernel instead.
        let q = Matrix4::from_diagonal(&Vector4::new(0.25, 0.25, 0.04, 0.04));
        let m = MotionModel::new(Matrix4::identity(), q, 1.0, 1.0).unwrap();
        let x = Vector4::zeros();
        let sigmas = [0.5, 0.5, 0.2, 0.2];
        let steps = 24usize;
        let mut total = 0.0;
        let h: Vec<f64> = sigmas.iter().map(|s| 12.0 * s / steps as f64).collect();
        let axis =
            |i: usize, k: usize| -> f64 { -6.0 * sigmas[i] + (k as f64 + 0.5) * h[i] };
        for a in 0..steps {
            for b in 0..steps {
                for c in 0..steps {
                    for d in 0..steps {
                        let y = Vector4::new(axis(0, a), axis(1, b), axis(2, c), axis(3, d));
                        total += m.transition_density(&y, &x);
                    }
                }
            }
        }
        total *= h.iter().product::<f64>();
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn degenerate_noise_density_is_regularized() {
        let m = cv(0.0);
        let x = Vector4::new(1.0, 2.0, 3.0, 4.0);
        let mean = m.transition_matrix() * x;
        assert!(m.transition_density(&mean, &x).is_finite());
    }

    #[test]
    fn survival_probability_constant() {
        let state = LabeledState::new(Vector4::zeros(), Label::new(0, 1));
        assert_eq!(cv(0.1).survival_prob(&state), 0.98);
        assert_eq!(
            MotionModel::constant_velocity(1.0, 0.1, 1.0)
                .unwrap()
                .survival_prob(&state),
            1.0
        );
        assert_eq!(
            MotionModel::constant_velocity(1.0, 0.1, 0.0)
                .unwrap()
                .survival_prob(&state),
            0.0
        );
    }

    #[test]
    fn birth_fragment_shapes() {
        let empty = BirthModel::none();
        let mut rng = RandomStream::root(1).rng();
        assert!(empty.sample_tracks(3, 10, &mut rng).unwrap().is_empty());

        let mean = Vector4::new(50.0, 180.0, 0.0, 0.0);
        let birth = BirthModel::new(vec![BirthComponent {
            existence: 0.02,
            mean,
            covariance: Matrix4::zeros(),
        }])
        .unwrap();
        let frag = birth.sample_tracks(3, 5, &mut rng).unwrap();
        let (label, track) = frag.iter().next().unwrap();
        assert_eq!(*label, Label::new(3, 1));
        assert!((track.existence - 0.02).abs() < 1e-12);
        assert!(track.cloud.iter().all(|(_, x)| *x == mean));
    }

    #[test]
    fn birth_labels_never_collide_across_a_run() {
        let birth = BirthModel::new(
            (0..2)
                .map(|_| BirthComponent {
                    existence: 0.02,
                    mean: Vector4::zeros(),
                    covariance: Matrix4::identity(),
                })
                .collect(),
        )
        .unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for step in 1..=100u32 {
            for l in birth.labels_at(step) {
                assert!(seen.insert(l), "label {l} repeated");
            }
        }
    }
}
