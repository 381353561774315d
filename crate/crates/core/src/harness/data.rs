//! Dataset resolution: explicit path, named dataset under `$VROPT_DATA_DIR`,
//! or seeded synthetic data.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{DataSection, SyntheticSpec};
use crate::dataset::{load_libsvm, synthetic_categorical, Dataset};
use crate::error::{Error, Result};
use crate::objective::{LinearLoss, LossKind};

pub const DATA_DIR_ENV: &str = "VROPT_DATA_DIR";

/// Where the data actually came from, after lookup and fallback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    File { path: PathBuf },
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug)]
pub struct LoadedData {
    pub data: Arc<Dataset>,
    pub source: DataSource,
    pub loss: LossKind,
}

impl LoadedData {
    /// Fresh objective with its own IFO counter.
    pub fn objective(&self) -> LinearLoss {
        LinearLoss::new(Arc::clone(&self.data), self.loss)
    }

    /// The `[data]` section that reproduces this exact dataset.
    pub fn resolved_section(&self, dim: Option<usize>) -> DataSection {
        let mut s = DataSection {
            fallback_synthetic: false,
            loss: self.loss,
            dim,
            ..Default::default()
        };
        match &self.source {
            DataSource::File { path } => s.path = Some(path.clone()),
            DataSource::Synthetic(spec) => s.synthetic = Some(*spec),
        }
        s
    }
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

fn find_file(p: &Path) -> Option<PathBuf> {
    if p.is_file() {
        return Some(p.to_path_buf());
    }
    if p.is_relative() {
        let cand = data_dir()?.join(p);
        if cand.is_file() {
            return Some(cand);
        }
    }
    None
}

/// `name` itself, then `name.txt` and `name.libsvm`, under the data dir.
fn find_named(name: &str) -> Option<PathBuf> {
    let dir = data_dir()?;
    [
        name.to_string(),
        format!("{name}.txt"),
        format!("{name}.libsvm"),
    ]
    .into_iter()
    .map(|f| dir.join(f))
    .find(|p| p.is_file())
}

pub fn load(section: &DataSection) -> Result<LoadedData> {
    let (data, source) = if let Some(p) = &section.path {
        let path = find_file(p)
            .ok_or_else(|| Error::Config(format!("data file {} not found", p.display())))?;
        (load_libsvm(&path)?, DataSource::File { path })
    } else if let Some(spec) = section.synthetic {
        (
            synthetic_categorical(spec.n, spec.d, spec.seed)?,
            DataSource::Synthetic(spec),
        )
    } else {
        let found = section.dataset.as_deref().and_then(find_named);
        match (found, &section.dataset) {
            (Some(path), _) => (load_libsvm(&path)?, DataSource::File { path }),
            (None, Some(name)) if !section.fallback_synthetic => {
                return Err(Error::Config(format!(
                    "dataset {name:?} not found under ${DATA_DIR_ENV}"
                )));
            }
            _ => {
                let spec = SyntheticSpec::default();
                (
                    synthetic_categorical(spec.n, spec.d, spec.seed)?,
                    DataSource::Synthetic(spec),
                )
            }
        }
    };
    let data = match section.dim {
        Some(d) => data.with_dim(d)?,
        None => data,
    };
    Ok(LoadedData {
        data: Arc::new(data),
        source,
        loss: section.loss,
    })
}
