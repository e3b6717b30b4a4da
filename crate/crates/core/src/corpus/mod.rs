//! Synthetic multi-store planogram corpus and the two augmentations.

mod augment;
mod dataset;
mod fill;
mod synth;

pub use augment::{augment, rotate_shelves, substitute};
pub use dataset::{CorpusRecord, Dataset, Manifest, StoreMeta};
pub use fill::{fill_planogram, generate_corpus, generate_store};
pub use synth::{default_constraints, synthesize_catalog, CategoryProfile, CATEGORY_PROFILES};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintError;
use crate::domain::DomainError;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid corpus config: {0}")]
    InvalidConfig(String),
    #[error("store {store}: no valid planogram after {attempts} attempts ({reason})")]
    Infeasible {
        store: usize,
        attempts: usize,
        reason: String,
    },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Inclusive range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> Span<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    fn is_ordered(&self) -> bool {
        self.min <= self.max
    }
}

/// Ranges fixtures are drawn from, one fixture per store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureDistribution {
    pub shelves: Span<usize>,
    pub columns: Span<usize>,
    pub width_cm: Span<f64>,
    pub height_cm: Span<f64>,
    pub weight_capacity_kg: Span<f64>,
}

impl Default for FixtureDistribution {
    fn default() -> Self {
        Self {
            shelves: Span::new(3, 5),
            columns: Span::new(16, 16),
            width_cm: Span::new(90.0, 120.0),
            height_cm: Span::new(160.0, 200.0),
            weight_capacity_kg: Span::new(35.0, 60.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub store_count: usize,
    pub planograms_per_store: usize,
    pub catalog_size: usize,
    pub fixture_distribution: FixtureDistribution,
    pub rng_seed: u64,
    /// 0 gives every store the same category preferences; 1 gives strongly
    /// skewed, store-specific preferences.
    pub store_style_variance: f64,
    /// Regeneration attempts per planogram before giving up.
    pub max_attempts: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            store_count: 50,
            planograms_per_store: 10,
            catalog_size: 120,
            fixture_distribution: FixtureDistribution::default(),
            rng_seed: 7,
            store_style_variance: 0.5,
            max_attempts: 50,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fd = &self.fixture_distribution;
        let mut problems = Vec::new();
        for (name, v) in [
            ("store_count", self.store_count),
            ("planograms_per_store", self.planograms_per_store),
            ("catalog_size", self.catalog_size),
            ("max_attempts", self.max_attempts),
            ("shelves.min", fd.shelves.min),
            ("columns.min", fd.columns.min),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        if !fd.shelves.is_ordered() || !fd.columns.is_ordered() {
            problems.push("shelves and columns ranges must have min <= max".into());
        }
        for (name, s) in [
            ("width_cm", fd.width_cm),
            ("height_cm", fd.height_cm),
            ("weight_capacity_kg", fd.weight_capacity_kg),
        ] {
            if !(s.min.is_finite() && s.max.is_finite() && s.min > 0.0 && s.is_ordered()) {
                problems.push(format!("{name} range must be positive with min <= max"));
            }
        }
        if !(0.0..=1.0).contains(&self.store_style_variance) {
            problems.push(format!(
                "store_style_variance {} outside [0, 1]",
                self.store_style_variance
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CorpusError::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Independent stream for the catalog (`None`) or a store.
pub(crate) fn stream_rng(seed: u64, store: Option<usize>) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(store.map_or(0, |s| s as u64 + 1));
    rng
}
