use std::fs;
use std::path::{Path, PathBuf};

use autocab_core::geo::{KbError, RegionKb};
use autocab_core::gui::{LayoutError, Layouts};
use autocab_core::task::{Suite, TaskError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Suite { path: PathBuf, source: TaskError },
    #[error("{path}: {source}")]
    Kb { path: PathBuf, source: KbError },
    #[error("{path}: {source}")]
    Layouts { path: PathBuf, source: LayoutError },
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })
}

/// Loads a suite manifest; listed files resolve relative to its directory.
pub fn load_suite(manifest: &Path) -> Result<Suite, LoadError> {
    let text = read(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    Suite::load(&text, |name| fs::read_to_string(dir.join(name)).ok())
        .map_err(|source| LoadError::Suite { path: manifest.to_path_buf(), source })
}

pub fn load_kb(path: &Path) -> Result<RegionKb, LoadError> {
    RegionKb::from_json(&read(path)?).map_err(|source| LoadError::Kb { path: path.to_path_buf(), source })
}

pub fn load_layouts(path: &Path) -> Result<Layouts, LoadError> {
    Layouts::from_json(&read(path)?).map_err(|source| LoadError::Layouts { path: path.to_path_buf(), source })
}

/// Immutable artifacts every episode reads: templates, regions, layouts.
#[derive(Clone, Debug)]
pub struct World {
    pub suite: Suite,
    pub kb: RegionKb,
    pub layouts: Layouts,
}

impl World {
    pub fn bundled() -> Self {
        World {
            suite: autocab_core::assets::suite(),
            kb: autocab_core::assets::regions(),
            layouts: autocab_core::assets::layouts(),
        }
    }

    /// Bundled data with any of the three replaced from disk.
    pub fn load(suite: Option<&Path>, kb: Option<&Path>, layouts: Option<&Path>) -> Result<Self, LoadError> {
        let mut w = World::bundled();
        if let Some(p) = suite {
            w.suite = load_suite(p)?;
        }
        if let Some(p) = kb {
            w.kb = load_kb(p)?;
        }
        if let Some(p) = layouts {
            w.layouts = load_layouts(p)?;
        }
        Ok(w)
    }
}
