//! Dynamic track/observation partitioning for the parallel group update.
//!
//! Tracks whose valid observation regions can interact are clustered into
//! groups by taking connected components of a pairwise coupling relation;
//! each group claims the observation indices its tracks can influence, and
//! the leftover indices form the unassociated residual.

use serde::{Deserialize, Serialize};

use crate::rfs::{Kinematic, Label, LabelSet, LmbDensity};
use crate::sensors::{Region, SensorModel};

/// How pairwise coupling between predicted tracks is decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Couple when predicted mean positions are within `tbd_threshold`.
    TbdDistance,
    /// Couple when the `acoustic_radius` discs around the predicted mean
    /// positions share at least one sensor.
    AcousticRadius,
    /// Couple when the tracks' highest-density-region VORs intersect.
    VorIntersection,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroupingConfig {
    pub mode: CouplingMode,
    /// Confidence mass of the highest density region.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Distance threshold for `TbdDistance`, meters.
    #[serde(default = "default_tbd_threshold")]
    pub tbd_threshold: f64,
    /// Sensor-association radius for the acoustic network, meters.
    #[serde(default = "default_acoustic_radius")]
    pub acoustic_radius: f64,
}

fn default_confidence() -> f64 {
    0.99
}
fn default_tbd_threshold() -> f64 {
    10.0
}
fn default_acoustic_radius() -> f64 {
    45.0
}

impl GroupingConfig {
    pub fn tbd_distance(threshold: f64) -> Self {
        GroupingConfig {
            mode: CouplingMode::TbdDistance,
            confidence: default_confidence(),
            tbd_threshold: threshold,
            acoustic_radius: default_acoustic_radius(),
        }
    }

    pub fn acoustic(radius: f64) -> Self {
        GroupingConfig {
            mode: CouplingMode::AcousticRadius,
            confidence: default_confidence(),
            tbd_threshold: default_tbd_threshold(),
            acoustic_radius: radius,
        }
    }
}

impl Default for GroupingConfig {
    fn default() -> Self {
        GroupingConfig {
            mode: CouplingMode::VorIntersection,
            confidence: default_confidence(),
            tbd_threshold: default_tbd_threshold(),
            acoustic_radius: default_acoustic_radius(),
        }
    }
}

/// One group: a label subset and the observation indices it owns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Group {
    pub labels: LabelSet,
    pub observations: Region,
}

/// A partition of the gated tracks and the observation index space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackPartition {
    pub groups: Vec<Group>,
    /// Observation indices claimed by no group.
    pub residual: Region,
}

fn weighted_quantile(sorted: &[(f64, f64)], q: f64) -> f64 {
    // sorted is (value, weight) ascending by value, weights normalized.
    let mut acc = 0.0;
    for (v, w) in sorted {
        acc += w;
        if acc >= q {
            return *v;
        }
    }
    sorted.last().map(|(v, _)| *v).unwrap_or(0.0)
}

/// Axis-aligned position box holding the central `confidence` mass of a
/// cloud: per axis, the weighted quantile interval
/// `[(1-confidence)/2, (1+confidence)/2]`.
fn confidence_box(cloud: &[(f64, Kinematic)], confidence: f64) -> [[f64; 2]; 2] {
    let lo_q = (1.0 - confidence) / 2.0;
    let hi_q = (1.0 + confidence) / 2.0;
    let mut result = [[0.0; 2]; 2];
    for axis in 0..2 {
        let mut vals: Vec<(f64, f64)> = cloud.iter().map(|(w, x)| (x[axis], *w)).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        result[axis] = [weighted_quantile(&vals, lo_q), weighted_quantile(&vals, hi_q)];
    }
    result
}

fn mean_position(cloud: &[(f64, Kinematic)]) -> [f64; 2] {
    let mut p = [0.0; 2];
    let mut mass = 0.0;
    for (w, x) in cloud {
        p[0] += w * x[0];
        p[1] += w * x[1];
        mass += w;
    }
    if mass > 0.0 {
        [p[0] / mass, p[1] / mass]
    } else {
        p
    }
}

/// The valid observation region of one track: the union of single-state
/// VORs over the track's highest-density box.
///
/// Evaluated in closed form over the whole box rather than particle by
/// particle: for the imaging sensor that union is the template span of the
/// box corners, for the sensor network it is every sensor within the
/// association radius of the box. Both cover the VOR of every particle
/// inside the box exactly.
pub fn track_vor(
    cloud: &[(f64, Kinematic)],
    sensor: &SensorModel,
    config: &GroupingConfig,
) -> Region {
    let bounds = confidence_box(cloud, config.confidence);
    match sensor {
        SensorModel::Tbd(m) => {
            let (a_lo, b_lo) = m.grid.nearest_cell(bounds[0][0], bounds[1][0]);
            let (a_hi, b_hi) = m.grid.nearest_cell(bounds[0][1], bounds[1][1]);
            let h = m.template_half;
            let a_range = a_lo.saturating_sub(h)..=(a_hi + h).min(m.grid.width - 1);
            let b_range = b_lo.saturating_sub(h)..=(b_hi + h).min(m.grid.height - 1);
            let mut cells =
                Vec::with_capacity(a_range.size_hint().0 * b_range.size_hint().0);
            for b in b_range {
                for a in a_range.clone() {
                    cells.push(m.grid.index(a, b));
                }
            }
            Region::new(cells)
        }
        SensorModel::Acoustic(m) => {
            let radius = config.acoustic_radius;
            let indices = m
                .sensor_positions()
                .iter()
                .enumerate()
                .filter(|(_, p)| {
                    let dx = (bounds[0][0] - p[0]).max(p[0] - bounds[0][1]).max(0.0);
                    let dy = (bounds[1][0] - p[1]).max(p[1] - bounds[1][1]).max(0.0);
                    dx * dx + dy * dy <= radius * radius
                })
                .map(|(i, _)| i)
                .collect();
            Region::new(indices)
        }
    }
}

/// Whether two tracks exhibit significant coupling under the configured
/// criterion.
pub fn coupled(
    a: &[(f64, Kinematic)],
    b: &[(f64, Kinematic)],
    config: &GroupingConfig,
    sensor: &SensorModel,
) -> bool {
    match config.mode {
        CouplingMode::TbdDistance => {
            let pa = mean_position(a);
            let pb = mean_position(b);
            let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            d <= config.tbd_threshold
        }
        CouplingMode::AcousticRadius => match sensor {
            SensorModel::Acoustic(m) => {
                let ra = m.sensors_within(mean_position(a), config.acoustic_radius);
                let rb = m.sensors_within(mean_position(b), config.acoustic_radius);
                !ra.is_disjoint(&rb)
            }
            // The radius criterion only makes sense for the sensor network;
            // fall back to plain distance against the same radius.
            _ => {
                let pa = mean_position(a);
                let pb = mean_position(b);
                let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                d <= 2.0 * config.acoustic_radius
            }
        },
        CouplingMode::VorIntersection => {
            !track_vor(a, sensor, config).is_disjoint(&track_vor(b, sensor, config))
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let root = self.find(self.0[i]);
            self.0[i] = root;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Partitions the gated tracks of an LMB density into coupling groups and
/// splits the observation index space accordingly.
///
/// Groups are connected components of the pairwise coupling relation. Each
/// group's observation subset is the frame restriction of the union of its
/// track VORs; in the distance criteria two components whose observation
/// regions overlap are merged until every pair of groups owns disjoint
/// indices. Groups come out ordered by their smallest label.
pub fn partition_tracks(
    lmb: &LmbDensity<Kinematic>,
    gated: &LabelSet,
    sensor: &SensorModel,
    config: &GroupingConfig,
) -> TrackPartition {
    let labels: Vec<Label> = gated.iter().copied().collect();
    let clouds: Vec<&[(f64, Kinematic)]> = labels
        .iter()
        .map(|l| {
            lmb.get(l)
                .map(|t| t.cloud.as_slice())
                .unwrap_or(&[])
        })
        .collect();
    let n = labels.len();
    if n == 0 {
        return TrackPartition {
            groups: Vec::new(),
            residual: Region::full(sensor.frame_len()),
        };
    }

    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if coupled(clouds[i], clouds[j], config, sensor) {
                uf.union(i, j);
            }
        }
    }

    let vors: Vec<Region> = clouds
        .iter()
        .map(|c| track_vor(c, sensor, config))
        .collect();

    // Merge components whose observation regions overlap; iterate to a
    // fixed point since merging can create new overlaps.
    loop {
        let mut roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        let mut component_region: std::collections::BTreeMap<usize, Region> = Default::default();
        for i in 0..n {
            let entry = component_region
                .entry(roots[i])
                .or_insert_with(Region::empty);
            *entry = entry.union(&vors[i]);
        }
        let keys: Vec<usize> = component_region.keys().copied().collect();
        let mut merged_any = false;
        for (ai, &a) in keys.iter().enumerate() {
            for &b in &keys[ai + 1..] {
                if !component_region[&a].is_disjoint(&component_region[&b]) {
                    uf.union(a, b);
                    merged_any = true;
                }
            }
        }
        if !merged_any {
            roots = (0..n).map(|i| uf.find(i)).collect();
            let mut groups: std::collections::BTreeMap<usize, (Vec<Label>, Region)> =
                Default::default();
            for i in 0..n {
                let entry = groups
                    .entry(roots[i])
                    .or_insert_with(|| (Vec::new(), Region::empty()));
                entry.0.push(labels[i]);
                entry.1 = entry.1.union(&vors[i]);
            }
            let groups: Vec<Group> = groups
                .into_values()
                .map(|(labels, observations)| Group {
                    labels: LabelSet::new(labels).expect("labels distinct by construction"),
                    observations,
                })
                .collect();
            let mut claimed = Region::empty();
            for g in &groups {
                claimed = claimed.union(&g.observations);
            }
            let residual = Region::full(sensor.frame_len()).difference(&claimed);
            return TrackPartition { groups, residual };
        }
    }
}
