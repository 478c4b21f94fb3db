//! Pixeled track-before-detect observation model.
//!
//! Each object illuminates a small square template of cells around its
//! position through a Gaussian point-spread function; per-cell intensities
//! are conditionally independent Gaussians around the summed contributions.
//! Because an object touches only its template, the full-image
//! log-likelihood equals an empty-image baseline plus a correction over the
//! union of object templates, and that is how it is evaluated.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::Kinematic;
use crate::sensors::Region;

/// Cell layout of the imaged surveillance region. Cell `(a, b)` is centered
/// at `(a * cell_width, b * cell_height)` and has row-major linear index
/// `b * width + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    pub cell_width: f64,
    pub cell_height: f64,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, cell_width: f64, cell_height: f64) -> Result<Self> {
        if width == 0 || height == 0 || cell_width <= 0.0 || cell_height <= 0.0 {
            return Err(Error::InvalidConfig("degenerate pixel grid".into()));
        }
        Ok(PixelGrid {
            width,
            height,
            cell_width,
            cell_height,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        b * self.width + a
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Grid coordinates of the cell whose center is nearest to a position,
    /// clamped into the image.
    pub fn nearest_cell(&self, px: f64, py: f64) -> (usize, usize) {
        let a = (px / self.cell_width).round().clamp(0.0, (self.width - 1) as f64);
        let b = (py / self.cell_height)
            .round()
            .clamp(0.0, (self.height - 1) as f64);
        (a as usize, b as usize)
    }
}

/// The track-before-detect sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TbdModel {
    pub grid: PixelGrid,
    /// Source intensity of one object.
    pub source_intensity: f64,
    /// Variance of the Gaussian point spread.
    pub blur_var: f64,
    /// Per-cell additive noise variance.
    pub noise_var: f64,
    /// Half-width of the effective template; 3 gives the 7x7 square.
    pub template_half: usize,
}

impl TbdModel {
    pub fn new(
        grid: PixelGrid,
        source_intensity: f64,
        blur_var: f64,
        noise_var: f64,
        template_half: usize,
    ) -> Result<Self> {
        if source_intensity <= 0.0 || blur_var <= 0.0 || noise_var <= 0.0 {
            return Err(Error::InvalidConfig(
                "TBD intensities and variances must be positive".into(),
            ));
        }
        Ok(TbdModel {
            grid,
            source_intensity,
            blur_var,
            noise_var,
            template_half,
        })
    }

    /// Peak per-cell contribution of an object sitting exactly on a cell
    /// center.
    pub fn peak_intensity(&self) -> f64 {
        self.grid.cell_width * self.grid.cell_height * self.source_intensity
            / (2.0 * std::f64::consts::PI * self.blur_var)
    }

    /// The noise level that realizes a given per-object SNR, under the
    /// declared mapping `SNR(dB) = 10 log10(peak² / noise_var)`.
    pub fn noise_sigma_for_snr_db(&self, snr_db: f64) -> f64 {
        self.peak_intensity() / 10f64.powf(snr_db / 20.0)
    }

    /// Returns the model with `noise_var` set from an SNR in decibels.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let sigma = self.noise_sigma_for_snr_db(snr_db);
        self.noise_var = sigma * sigma;
        self
    }

    /// The effective template of a state: cell indices of the square of
    /// half-width `template_half` around the cell nearest the position,
    /// clipped to the image.
    pub fn template(&self, x: &Kinematic) -> Region {
        let (a0, b0) = self.grid.nearest_cell(x[0], x[1]);
        let h = self.template_half as isize;
        let mut cells = Vec::with_capacity((2 * h as usize + 1).pow(2));
        for db in -h..=h {
            let b = b0 as isize + db;
            if b < 0 || b >= self.grid.height as isize {
                continue;
            }
            for da in -h..=h {
                let a = a0 as isize + da;
                if a < 0 || a >= self.grid.width as isize {
                    continue;
                }
                cells.push(self.grid.index(a as usize, b as usize));
            }
        }
        Region::new(cells)
    }

    /// Point-spread contribution of one object to one cell; zero outside
    /// the effective template.
    pub fn point_spread(&self, x: &Kinematic, cell: usize) -> f64 {
        let (a, b) = self.grid.coords(cell);
        let (a0, b0) = self.grid.nearest_cell(x[0], x[1]);
        if (a as isize - a0 as isize).unsigned_abs() > self.template_half
            || (b as isize - b0 as isize).unsigned_abs() > self.template_half
        {
            return 0.0;
        }
        self.spread_value(x, a, b)
    }

    #[inline]
    fn spread_value(&self, x: &Kinematic, a: usize, b: usize) -> f64 {
        let dx = a as f64 * self.grid.cell_width - x[0];
        let dy = b as f64 * self.grid.cell_height - x[1];
        self.peak_intensity() * (-(dx * dx + dy * dy) / (2.0 * self.blur_var)).exp()
    }

    /// Per-cell contributions of one state, appended as `(cell, value)`.
    fn spread_into(&self, x: &Kinematic, region: Option<&Region>, out: &mut Vec<(usize, f64)>) {
        let (a0, b0) = self.grid.nearest_cell(x[0], x[1]);
        let h = self.template_half as isize;
        for db in -h..=h {
            let b = b0 as isize + db;
            if b < 0 || b >= self.grid.height as isize {
                continue;
            }
            for da in -h..=h {
                let a = a0 as isize + da;
                if a < 0 || a >= self.grid.width as isize {
                    continue;
                }
                let cell = self.grid.index(a as usize, b as usize);
                if region.is_some_and(|r| !r.contains(cell)) {
                    continue;
                }
                out.push((cell, self.spread_value(x, a as usize, b as usize)));
            }
        }
    }

    /// Summed template contributions of a multi-object state, merged by cell.
    pub fn intensity_map(&self, states: &[Kinematic], region: Option<&Region>) -> Vec<(usize, f64)> {
        let mut cells = Vec::new();
        for x in states {
            self.spread_into(x, region, &mut cells);
        }
        cells.sort_unstable_by_key(|(c, _)| *c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(cells.len());
        for (c, v) in cells {
            match merged.last_mut() {
                Some((lc, lv)) if *lc == c => *lv += v,
                _ => merged.push((c, v)),
            }
        }
        merged
    }

    #[inline]
    fn log_norm_const(&self) -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI * self.noise_var).ln()
    }

    /// Log-likelihood of the frame given no objects, over `region` (or the
    /// whole image).
    pub fn empty_log_likelihood(&self, z: &[f64], region: Option<&Region>) -> f64 {
        let inv2v = 0.5 / self.noise_var;
        match region {
            None => {
                z.len() as f64 * self.log_norm_const() - z.iter().map(|v| v * v).sum::<f64>() * inv2v
            }
            Some(r) => {
                r.len() as f64 * self.log_norm_const()
                    - r.iter().map(|&j| z[j] * z[j]).sum::<f64>() * inv2v
            }
        }
    }

    /// Correction from the empty-image baseline to the multi-object
    /// log-likelihood: touches only cells in the union of object templates.
    pub(crate) fn correction(
        &self,
        z: &[f64],
        region: Option<&Region>,
        states: &[Kinematic],
    ) -> f64 {
        let inv2v = 0.5 / self.noise_var;
        self.intensity_map(states, region)
            .into_iter()
            .map(|(cell, m)| (2.0 * z[cell] * m - m * m) * inv2v)
            .sum()
    }

    /// Multi-object log-likelihood over `region` (or the whole image),
    /// exactly equal to the per-cell Gaussian product in log domain.
    pub fn log_likelihood_in(
        &self,
        z: &[f64],
        region: Option<&Region>,
        states: &[Kinematic],
    ) -> f64 {
        self.empty_log_likelihood(z, region) + self.correction(z, region, states)
    }

    pub fn log_likelihood(&self, z: &[f64], states: &[Kinematic]) -> f64 {
        self.log_likelihood_in(z, None, states)
    }

    /// Simulates one intensity image.
    pub fn sample_frame<R: Rng>(&self, states: &[Kinematic], rng: &mut R) -> Vec<f64> {
        let sigma = self.noise_var.sqrt();
        let mut frame: Vec<f64> = (0..self.grid.cell_count())
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for (cell, m) in self.intensity_map(states, None) {
            frame[cell] += m;
        }
        frame
    }

    /// Writes a frame as a 16-bit binary PGM, affinely scaled to the full
    /// pixel range, plus a sidecar text header recording the scaling so the
    /// physical values can be recovered (`value = offset + scale * pixel`).
    pub fn write_pgm(&self, z: &[f64], path: &Path) -> Result<()> {
        let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { (hi - lo) / 65535.0 } else { 0.0 };
        let mut buf = Vec::with_capacity(32 + 2 * z.len());
        write!(buf, "P5\n{} {}\n65535\n", self.grid.width, self.grid.height)
            .expect("in-memory write");
        for v in z {
            let pixel = if scale > 0.0 {
                ((v - lo) / scale).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            buf.extend_from_slice(&pixel.to_be_bytes());
        }
        std::fs::write(path, &buf).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        let sidecar = path.with_extension("pgm.txt");
        let meta = format!(
            "offset {lo:.17e}\nscale {scale:.17e}\nwidth {}\nheight {}\n",
            self.grid.width, self.grid.height
        );
        std::fs::write(&sidecar, meta)
            .map_err(|e| Error::io(format!("writing {}", sidecar.display()), e))
    }

    /// Writes a frame as a CSV matrix, one image row per line.
    pub fn write_csv(&self, z: &[f64], path: &Path) -> Result<()> {
        let mut out = String::new();
        for b in 0..self.grid.height {
            let row: Vec<String> = (0..self.grid.width)
                .map(|a| format!("{:.6}", z[self.grid.index(a, b)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
