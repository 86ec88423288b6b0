use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::datasets::{generate_synthetic, load_dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{Dataset, LabelVector};

/// A named pool the service can open sessions on.
#[derive(Debug)]
pub struct DatasetEntry {
    pub dataset: Arc<Dataset>,
    /// Known labels; only needed for sessions with an evaluation split.
    pub labels: LabelVector,
    /// Directory that patch references are relative to.
    pub root: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct DatasetRegistry {
    entries: BTreeMap<String, Arc<DatasetEntry>>,
}

impl DatasetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding the default synthetic pool as `synthetic`.
    pub fn with_synthetic() -> Result<Self> {
        let mut reg = Self::new();
        let (ds, labels) = generate_synthetic(&SyntheticSpec::default())?;
        reg.insert("synthetic", ds, labels, None);
        Ok(reg)
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        dataset: Dataset,
        labels: LabelVector,
        root: Option<PathBuf>,
    ) {
        self.entries.insert(
            name.into(),
            Arc::new(DatasetEntry {
                dataset: Arc::new(dataset),
                labels,
                root,
            }),
        );
    }

    /// Registers every subdirectory of `dir` holding a `manifest.toml`,
    /// under the subdirectory's name. Returns how many were loaded.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize> {
        let read = std::fs::read_dir(dir)
            .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
        let mut paths: Vec<PathBuf> = read
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("manifest.toml").is_file())
            .collect();
        paths.sort();
        for path in &paths {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::Format(format!("dataset directory name {}", path.display())))?
                .to_owned();
            let (ds, labels, _) = load_dataset(path)?;
            tracing::info!(%name, n = ds.n(), "registered dataset");
            self.insert(name, ds, labels, Some(path.clone()));
        }
        Ok(paths.len())
    }

    pub fn get(&self, name: &str) -> Option<Arc<DatasetEntry>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// First dataset (by name) with patch files for `sample_id`.
    pub fn find_patch(&self, sample_id: &str) -> Option<(Arc<DatasetEntry>, usize)> {
        self.entries.values().find_map(|e| {
            e.root.as_ref()?;
            e.dataset.patch_refs()?;
            e.dataset.index_of(sample_id).map(|i| (e.clone(), i))
        })
    }
}
