use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::domain::io::{load_catalog, load_json, load_jsonl, save_catalog, save_json, save_jsonl};
use crate::domain::{Catalog, Fixture, Planogram};

use super::{CorpusConfig, CorpusError};

pub const PLANOGRAMS_FILE: &str = "planograms.jsonl";
pub const CATALOG_FILE: &str = "catalog.csv";
pub const CONSTRAINTS_FILE: &str = "constraints.json";
pub const STORES_FILE: &str = "stores.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub store_id: String,
    pub store_index: usize,
    pub fixture: Fixture,
    pub category_preferences: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub store_id: String,
    pub store_index: usize,
    pub planogram_index: usize,
    pub planogram: Planogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub rng_seed: u64,
    pub config: CorpusConfig,
}

impl Manifest {
    pub fn new(config: CorpusConfig) -> Self {
        Self {
            format_version: 1,
            rng_seed: config.rng_seed,
            config,
        }
    }
}

/// A generated corpus with everything needed to train on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub catalog: Catalog,
    pub constraints: ConstraintSet,
    pub stores: Vec<StoreMeta>,
    pub records: Vec<CorpusRecord>,
}

impl Dataset {
    pub fn planograms(&self) -> impl Iterator<Item = &Planogram> {
        self.records.iter().map(|r| &r.planogram)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the dataset files into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
        let dir = dir.as_ref();
        save_jsonl(&self.records, dir.join(PLANOGRAMS_FILE))?;
        save_catalog(&self.catalog, dir.join(CATALOG_FILE))?;
        save_json(&self.constraints, dir.join(CONSTRAINTS_FILE))?;
        save_json(&self.stores, dir.join(STORES_FILE))?;
        save_json(&self.manifest, dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let dir = dir.as_ref();
        Ok(Self {
            manifest: load_json(dir.join(MANIFEST_FILE))?,
            catalog: load_catalog(dir.join(CATALOG_FILE))?,
            constraints: load_json(dir.join(CONSTRAINTS_FILE))?,
            stores: load_json(dir.join(STORES_FILE))?,
            records: load_jsonl(dir.join(PLANOGRAMS_FILE))?,
        })
    }
}
