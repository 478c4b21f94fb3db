//! Versioned filter-state snapshots for checkpoint and replay.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::{Kinematic, LmbDensity, LmoDensity};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterState {
    Lmb { density: LmbDensity<Kinematic> },
    Lmo { density: LmoDensity<Kinematic> },
}

/// A filter state at one time step, tagged with the snapshot format version.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    pub time: u32,
    pub state: FilterState,
}

impl Snapshot {
    pub fn lmb(time: u32, density: LmbDensity<Kinematic>) -> Self {
        Snapshot {
            format_version: FORMAT_VERSION,
            time,
            state: FilterState::Lmb { density },
        }
    }

    pub fn lmo(time: u32, density: LmoDensity<Kinematic>) -> Self {
        Snapshot {
            format_version: FORMAT_VERSION,
            time,
            state: FilterState::Lmo { density },
        }
    }
}

pub fn save(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let json = serde_json::to_string(snapshot).map_err(|e| Error::Serde {
        context: "serializing snapshot".into(),
        source: Box::new(e),
    })?;
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Loads a snapshot and re-validates the density invariants.
pub fn load(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut snapshot: Snapshot = serde_json::from_str(&text).map_err(|e| Error::Serde {
        context: format!("parsing snapshot {}", path.display()),
        source: Box::new(e),
    })?;
    if snapshot.format_version != FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "snapshot format {} unsupported (expected {FORMAT_VERSION})",
            snapshot.format_version
        )));
    }
    match &mut snapshot.state {
        FilterState::Lmb { density } => density.validate_and_normalize()?,
        FilterState::Lmo { density } => density.validate_and_normalize()?,
    }
    Ok(snapshot)
}
