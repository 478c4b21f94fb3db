//! Track labels and canonically ordered label sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A track identity: the time step the track was born and a positive index
/// distinguishing tracks born at the same step.
///
/// Labels order lexicographically by `(birth_time, birth_index)`; that total
/// order fixes the coordinate-block convention of joint particle states.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Label {
    pub birth_time: u32,
    pub birth_index: u32,
}

impl Label {
    pub fn new(birth_time: u32, birth_index: u32) -> Self {
        Label {
            birth_time,
            birth_index,
        }
    }

    /// Stable 64-bit tag, used to derive per-track random streams.
    pub fn stream_tag(&self) -> u64 {
        ((self.birth_time as u64) << 32) | self.birth_index as u64
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.birth_time, self.birth_index)
    }
}

/// A set of distinct labels kept sorted in label order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize)]
pub struct LabelSet(Vec<Label>);

impl LabelSet {
    pub fn empty() -> Self {
        LabelSet(Vec::new())
    }

    /// Builds a set from arbitrary order, rejecting duplicates.
    pub fn new(mut labels: Vec<Label>) -> Result<Self> {
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDensity(
                "label set contains duplicate labels".into(),
            ));
        }
        Ok(LabelSet(labels))
    }

    /// Wraps a slice already sorted and distinct.
    pub fn from_sorted_unchecked(labels: Vec<Label>) -> Self {
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        LabelSet(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Label> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.0
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.0.binary_search(label).is_ok()
    }

    /// Index of `label` inside the canonical ordering, if present.
    pub fn position(&self, label: &Label) -> Option<usize> {
        self.0.binary_search(label).ok()
    }

    pub fn is_subset_of(&self, other: &LabelSet) -> bool {
        self.0.iter().all(|l| other.contains(l))
    }

    pub fn union(&self, other: &LabelSet) -> Result<LabelSet> {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        LabelSet::new(v)
    }
}

impl FromIterator<Label> for LabelSet {
    /// Collects labels, sorting and deduplicating.
    fn from_iter<T: IntoIterator<Item = Label>>(iter: T) -> Self {
        let mut v: Vec<Label> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        LabelSet(v)
    }
}

impl std::fmt::Display for LabelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}
