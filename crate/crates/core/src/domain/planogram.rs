use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Catalog, DomainError};

const FIT_TOLERANCE: f64 = 1e-9;

/// Per-shelf physical limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelfSpec {
    pub clearance_height_cm: f64,
    pub weight_capacity_kg: f64,
}

/// A shelving unit. Shelf 0 is the bottom shelf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub width_cm: f64,
    pub height_cm: f64,
    pub shelf_count: usize,
    pub per_shelf: Vec<ShelfSpec>,
    pub slot_columns: usize,
}

impl Fixture {
    pub fn validate(&self) -> Result<(), DomainError> {
        let mut problems = Vec::new();
        if !(self.width_cm.is_finite() && self.width_cm > 0.0) {
            problems.push(format!("width_cm must be positive, got {}", self.width_cm));
        }
        if !(self.height_cm.is_finite() && self.height_cm > 0.0) {
            problems.push(format!("height_cm must be positive, got {}", self.height_cm));
        }
        if self.shelf_count == 0 {
            problems.push("shelf_count must be at least 1".into());
        }
        if self.slot_columns == 0 {
            problems.push("slot_columns must be at least 1".into());
        }
        if self.per_shelf.len() != self.shelf_count {
            problems.push(format!(
                "per_shelf has {} entries for {} shelves",
                self.per_shelf.len(),
                self.shelf_count
            ));
        }
        for (i, s) in self.per_shelf.iter().enumerate() {
            if !(s.clearance_height_cm.is_finite() && s.clearance_height_cm > 0.0) {
                problems.push(format!("shelf {i}: clearance must be positive"));
            }
            if !(s.weight_capacity_kg.is_finite() && s.weight_capacity_kg > 0.0) {
                problems.push(format!("shelf {i}: weight capacity must be positive"));
            }
        }
        let total: f64 = self.per_shelf.iter().map(|s| s.clearance_height_cm).sum();
        if total > self.height_cm * (1.0 + FIT_TOLERANCE) {
            problems.push(format!(
                "shelf clearances sum to {total} cm, above fixture height {}",
                self.height_cm
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DomainError::InvalidRecords(problems))
        }
    }

    /// Width of one slot column, `W / K`.
    pub fn column_width(&self) -> f64 {
        self.width_cm / self.slot_columns as f64
    }

    /// Columns needed to show `facings` units of a product `width_cm` wide.
    pub fn columns_needed(&self, width_cm: f64, facings: u32) -> usize {
        ((facings as f64 * width_cm / self.column_width()) - FIT_TOLERANCE).ceil().max(0.0) as usize
    }

    /// Largest facing count that fits in `span` columns.
    pub fn max_facings(&self, width_cm: f64, span: usize) -> u32 {
        ((span as f64 * self.column_width() / width_cm) + FIT_TOLERANCE).floor() as u32
    }

    pub fn cell_count(&self) -> usize {
        self.shelf_count * self.slot_columns
    }

    /// Height of the bottom edge of each shelf space above the floor.
    pub fn shelf_bottoms(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.per_shelf
            .iter()
            .map(|s| {
                let b = acc;
                acc += s.clearance_height_cm;
                b
            })
            .collect()
    }
}

/// One product block on the slot grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub sku: String,
    pub shelf_index: usize,
    pub start_column: usize,
    pub span_columns: usize,
    pub facings: u32,
}

impl Placement {
    pub fn end_column(&self) -> usize {
        self.start_column + self.span_columns
    }

    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start_column..self.end_column()
    }
}

/// A fixture filled with placements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Planogram {
    pub fixture: Fixture,
    pub placements: Vec<Placement>,
    pub store_id: String,
}

/// A broken grid invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StructuralViolation {
    InvalidFixture { detail: String },
    UnknownSku { sku: String },
    ShelfOutOfRange { sku: String, shelf_index: usize },
    ColumnsOutOfRange { sku: String, shelf_index: usize, end_column: usize },
    EmptyPlacement { sku: String },
    DoesNotFit { sku: String, shelf_index: usize, span_columns: usize, required_columns: usize },
    Overlap { shelf_index: usize, first: String, second: String, columns: (usize, usize) },
}

impl fmt::Display for StructuralViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidFixture { detail } => write!(f, "invalid fixture: {detail}"),
            Self::UnknownSku { sku } => write!(f, "unknown sku {sku}"),
            Self::ShelfOutOfRange { sku, shelf_index } => write!(f, "{sku}: shelf {shelf_index} out of range"),
            Self::ColumnsOutOfRange { sku, shelf_index, end_column } => {
                write!(f, "{sku}: shelf {shelf_index} columns end at {end_column}, past the grid")
            }
            Self::EmptyPlacement { sku } => write!(f, "{sku}: span and facings must be positive"),
            Self::DoesNotFit { sku, shelf_index, span_columns, required_columns } => write!(
                f,
                "{sku}: shelf {shelf_index} span {span_columns} is narrower than the {required_columns} columns required"
            ),
            Self::Overlap { shelf_index, first, second, columns } => write!(
                f,
                "shelf {shelf_index}: {first} and {second} overlap on columns {}..{}",
                columns.0, columns.1
            ),
        }
    }
}

impl Planogram {
    pub fn empty(fixture: Fixture, store_id: impl Into<String>) -> Self {
        Self {
            fixture,
            placements: Vec::new(),
            store_id: store_id.into(),
        }
    }

    /// Every broken grid invariant, in a stable order.
    pub fn structural_violations(&self, catalog: &Catalog) -> Vec<StructuralViolation> {
        let mut out = Vec::new();
        if let Err(DomainError::InvalidRecords(problems)) = self.fixture.validate() {
            out.extend(problems.into_iter().map(|detail| StructuralViolation::InvalidFixture { detail }));
            return out;
        }
        let fx = &self.fixture;
        for p in &self.placements {
            let Some(product) = catalog.get(&p.sku) else {
                out.push(StructuralViolation::UnknownSku { sku: p.sku.clone() });
                continue;
            };
            if p.span_columns == 0 || p.facings == 0 {
                out.push(StructuralViolation::EmptyPlacement { sku: p.sku.clone() });
                continue;
            }
            if p.shelf_index >= fx.shelf_count {
                out.push(StructuralViolation::ShelfOutOfRange {
                    sku: p.sku.clone(),
                    shelf_index: p.shelf_index,
                });
            }
            if p.end_column() > fx.slot_columns {
                out.push(StructuralViolation::ColumnsOutOfRange {
                    sku: p.sku.clone(),
                    shelf_index: p.shelf_index,
                    end_column: p.end_column(),
                });
            }
            let required = fx.columns_needed(product.width_cm, p.facings);
            if p.span_columns < required {
                out.push(StructuralViolation::DoesNotFit {
                    sku: p.sku.clone(),
                    shelf_index: p.shelf_index,
                    span_columns: p.span_columns,
                    required_columns: required,
                });
            }
        }
        let mut sorted: Vec<&Placement> = self.placements.iter().filter(|p| p.span_columns > 0).collect();
        sorted.sort_by_key(|p| (p.shelf_index, p.start_column));
        for pair in sorted.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.shelf_index == b.shelf_index && b.start_column < a.end_column() {
                out.push(StructuralViolation::Overlap {
                    shelf_index: a.shelf_index,
                    first: a.sku.clone(),
                    second: b.sku.clone(),
                    columns: (b.start_column, a.end_column().min(b.end_column())),
                });
            }
        }
        out
    }

    pub fn check_structure(&self, catalog: &Catalog) -> Result<(), DomainError> {
        let violations = self.structural_violations(catalog);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(DomainError::Structure(violations))
        }
    }

    /// Same planogram with placements ordered by shelf, then column.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        out.placements.sort_by(|a, b| (a.shelf_index, a.start_column).cmp(&(b.shelf_index, b.start_column)));
        out
    }

    /// Placement index owning each cell, row-major by `(shelf, column)`.
    /// Assumes the structure is valid.
    pub fn cell_owners(&self) -> Vec<Option<usize>> {
        let k = self.fixture.slot_columns;
        let mut cells = vec![None; self.fixture.cell_count()];
        for (i, p) in self.placements.iter().enumerate() {
            for c in p.columns() {
                cells[p.shelf_index * k + c] = Some(i);
            }
        }
        cells
    }
}
