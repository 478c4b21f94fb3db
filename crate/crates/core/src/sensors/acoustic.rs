//! Acoustic amplitude sensor network.
//!
//! Every object emits a constant-amplitude tone; sensor `m` reads the sum of
//! per-object amplitudes decayed by a path-loss power of range, plus
//! Gaussian noise. Ranges are clamped below at `min_range` so the model
//! stays finite arbitrarily close to a sensor.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::Kinematic;
use crate::sensors::Region;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcousticModel {
    sensor_positions: Vec<[f64; 2]>,
    /// Emitted amplitude of one object.
    pub amplitude: f64,
    /// Path-loss exponent.
    pub path_loss: f64,
    /// Per-sensor additive noise variance.
    pub noise_var: f64,
    /// Range clamp guarding the singularity at zero distance.
    pub min_range: f64,
}

impl AcousticModel {
    pub fn new(
        sensor_positions: Vec<[f64; 2]>,
        amplitude: f64,
        path_loss: f64,
        noise_var: f64,
        min_range: f64,
    ) -> Result<Self> {
        if amplitude <= 0.0 || path_loss <= 0.0 || noise_var <= 0.0 || min_range <= 0.0 {
            return Err(Error::InvalidConfig(
                "acoustic parameters must be positive".into(),
            ));
        }
        for (i, a) in sensor_positions.iter().enumerate() {
            for b in &sensor_positions[i + 1..] {
                if a == b {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate sensor position ({}, {})",
                        a[0], a[1]
                    )));
                }
            }
        }
        Ok(AcousticModel {
            sensor_positions,
            amplitude,
            path_loss,
            noise_var,
            min_range,
        })
    }

    /// An `nx` by `ny` grid of sensors dispersed evenly over
    /// `[0, extent_x] x [0, extent_y]`, with `min_range` defaulting to half
    /// the grid spacing.
    pub fn grid(
        nx: usize,
        ny: usize,
        extent_x: f64,
        extent_y: f64,
        amplitude: f64,
        path_loss: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidConfig("sensor grid needs at least 2x2".into()));
        }
        let dx = extent_x / (nx - 1) as f64;
        let dy = extent_y / (ny - 1) as f64;
        let mut positions = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                positions.push([i as f64 * dx, j as f64 * dy]);
            }
        }
        let min_range = 0.5 * dx.min(dy);
        AcousticModel::new(positions, amplitude, path_loss, noise_var, min_range)
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_positions.len()
    }

    pub fn sensor_positions(&self) -> &[[f64; 2]] {
        &self.sensor_positions
    }

    #[inline]
    fn contribution(&self, x: &Kinematic, sensor: usize) -> f64 {
        let p = &self.sensor_positions[sensor];
        let dx = x[0] - p[0];
        let dy = x[1] - p[1];
        let range = (dx * dx + dy * dy).sqrt().max(self.min_range);
        if self.path_loss == 1.0 {
            self.amplitude / range
        } else {
            self.amplitude / range.powf(self.path_loss)
        }
    }

    /// Noise-free reading of sensor `m` for a multi-object state: the sum of
    /// clamped path-loss amplitudes.
    pub fn mean_at(&self, states: &[Kinematic], sensor: usize) -> f64 {
        states.iter().map(|x| self.contribution(x, sensor)).sum()
    }

    /// Log-likelihood over a sensor subset (or all sensors).
    pub fn log_likelihood_in(
        &self,
        z: &[f64],
        region: Option<&Region>,
        states: &[Kinematic],
    ) -> f64 {
        let log_norm = -0.5 * (2.0 * std::f64::consts::PI * self.noise_var).ln();
        let inv2v = 0.5 / self.noise_var;
        let term = |m: usize| {
            let d = z[m] - self.mean_at(states, m);
            log_norm - d * d * inv2v
        };
        match region {
            None => (0..self.sensor_count()).map(term).sum(),
            Some(r) => r.iter().map(|&m| term(m)).sum(),
        }
    }

    pub fn log_likelihood(&self, z: &[f64], states: &[Kinematic]) -> f64 {
        self.log_likelihood_in(z, None, states)
    }

    /// Simulates one frame of readings.
    pub fn sample_frame<R: Rng>(&self, states: &[Kinematic], rng: &mut R) -> Vec<f64> {
        let sigma = self.noise_var.sqrt();
        (0..self.sensor_count())
            .map(|m| self.mean_at(states, m) + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Indices of sensors within `radius` of a position.
    pub fn sensors_within(&self, position: [f64; 2], radius: f64) -> Region {
        let r2 = radius * radius;
        Region::new(
            self.sensor_positions
                .iter()
                .enumerate()
                .filter(|(_, p)| {
                    let dx = position[0] - p[0];
                    let dy = position[1] - p[1];
                    dx * dx + dy * dy <= r2
                })
                .map(|(i, _)| i)
                .collect(),
        )
    }

    /// Writes a frame as `sensor_index,x,y,reading` CSV.
    pub fn write_csv(&self, z: &[f64], path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "sensor_index,x,y,reading").expect("in-memory write");
        for (m, p) in self.sensor_positions.iter().enumerate() {
            writeln!(out, "{m},{:.6},{:.6},{:.6}", p[0], p[1], z[m]).expect("in-memory write");
        }
        std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smc::RandomStream;
    use nalgebra::Vector4;

    fn at(px: f64, py: f64) -> Kinematic {
        Vector4::new(px, py, 0.0, 0.0)
    }

    fn three_sensors() -> AcousticModel {
        AcousticModel::new(
            vec![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]],
            10.0,
            1.0,
            0.25,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn empty_state_reads_zero_mean() {
        let m = three_sensors();
        assert_eq!(m.mean_at(&[], 0), 0.0);
    }

    #[test]
    fn unit_distance_ratio() {
        // One object 10 m from the sensor with A=10 and unit path loss.
        let m = three_sensors();
        assert!((m.mean_at(&[at(10.0, 0.0)], 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn means_are_additive_and_decay_with_range() {
        let m = three_sensors();
        let a = [at(3.0, 4.0)];
        let b = [at(8.0, 1.0)];
        let both = [a[0], b[0]];
        for s in 0..3 {
            assert!(
                (m.mean_at(&both, s) - m.mean_at(&a, s) - m.mean_at(&b, s)).abs() < 1e-12
            );
        }
        let near = m.mean_at(&[at(1.0, 0.0)], 0);
        let far = m.mean_at(&[at(5.0, 0.0)], 0);
        assert!(near >= far);
    }

    #[test]
    fn range_clamp_keeps_values_finite() {
        let m = three_sensors();
        let on_top = m.mean_at(&[at(0.0, 0.0)], 0);
        assert!(on_top.is_finite());
        assert!((on_top - 10.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_frame_gives_normalization_constant() {
        let m = three_sensors();
        let states = [at(2.0, 3.0)];
        let z: Vec<f64> = (0..3).map(|s| m.mean_at(&states, s)).collect();
        let expect = 3.0 * (-0.5 * (2.0 * std::f64::consts::PI * m.noise_var).ln());
        assert!((m.log_likelihood(&z, &states) - expect).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_matches_per_sensor_hand_evaluation() {
        let m = three_sensors();
        let states = [at(2.0, 3.0)];
        let z = [0.9, 1.4, 0.3];
        let mut expect = 0.0;
        for s in 0..3 {
            let d: f64 = z[s] - m.mean_at(&states, s);
            expect += -0.5 * (2.0 * std::f64::consts::PI * m.noise_var).ln()
                - d * d / (2.0 * m.noise_var);
        }
        assert!((m.log_likelihood(&z, &states) - expect).abs() < 1e-12);
    }

    #[test]
    fn sensor_regions_by_radius() {
        let m = three_sensors();
        assert!(m.sensors_within([50.0, 50.0], 5.0).is_empty());
        assert_eq!(m.sensors_within([0.0, 0.0], 10.0).len(), 3);
        assert_eq!(m.sensors_within([0.0, 0.0], 9.0).len(), 1);
    }

    #[test]
    fn sampled_variance_matches_model() {
        let m = three_sensors();
        let n = 10_000;
        let mut rng = RandomStream::root(5).rng();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = m.sample_frame(&[], &mut rng);
            sum += z[1];
            sumsq += z[1] * z[1];
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02);
        assert!((var - m.noise_var).abs() / m.noise_var < 0.05);
    }

    #[test]
    fn grid_constructor_spacing() {
        let m = AcousticModel::grid(15, 15, 300.0, 300.0, 10.0, 1.0, 0.01).unwrap();
        assert_eq!(m.sensor_count(), 225);
        let spacing = 300.0 / 14.0;
        assert!((m.sensor_positions()[1][0] - spacing).abs() < 1e-12);
        assert!((m.min_range - spacing / 2.0).abs() < 1e-12);
    }
}
