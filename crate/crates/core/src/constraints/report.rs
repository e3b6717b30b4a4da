use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Catalog, Planogram};

use super::layout;
use super::margins::{layout_margin, layout_satisfied};
use super::spec::{ConstraintKind, ConstraintSet};
use super::ConstraintError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintOutcome {
    pub kind: ConstraintKind,
    pub satisfied: bool,
    pub margin: f64,
}

/// Satisfaction summary. `overall` is the mean of the per-kind rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub per_constraint: Vec<ConstraintOutcome>,
    pub per_category_rate: BTreeMap<ConstraintKind, f64>,
    pub overall: f64,
}

impl ValidationReport {
    pub fn from_outcomes(per_constraint: Vec<ConstraintOutcome>) -> Self {
        let mut tally: BTreeMap<ConstraintKind, (usize, usize)> = BTreeMap::new();
        for o in &per_constraint {
            let t = tally.entry(o.kind).or_default();
            t.0 += usize::from(o.satisfied);
            t.1 += 1;
        }
        let rates = tally
            .into_iter()
            .map(|(k, (ok, n))| (k, ok as f64 / n as f64))
            .collect();
        let mut report = Self::from_rates(rates);
        report.per_constraint = per_constraint;
        report
    }

    /// Report carrying only aggregate rates. No kinds gives `overall = 1`.
    pub fn from_rates(per_category_rate: BTreeMap<ConstraintKind, f64>) -> Self {
        let overall = if per_category_rate.is_empty() {
            1.0
        } else {
            per_category_rate.values().sum::<f64>() / per_category_rate.len() as f64
        };
        Self {
            per_constraint: Vec::new(),
            per_category_rate,
            overall,
        }
    }

    pub fn rate(&self, kind: ConstraintKind) -> Option<f64> {
        self.per_category_rate.get(&kind).copied()
    }

    pub fn all_satisfied(&self) -> bool {
        self.per_constraint.iter().all(|o| o.satisfied)
    }
}

/// Validates one planogram against every constraint in the set.
pub fn validate(planogram: &Planogram, constraints: &ConstraintSet, catalog: &Catalog) -> Result<ValidationReport, ConstraintError> {
    Ok(ValidationReport::from_outcomes(outcomes(planogram, constraints, catalog)?))
}

/// Pools the outcomes of many planograms into one report.
pub fn validate_batch<'a>(
    planograms: impl IntoIterator<Item = &'a Planogram>,
    constraints: &ConstraintSet,
    catalog: &Catalog,
) -> Result<ValidationReport, ConstraintError> {
    let mut all = Vec::new();
    for p in planograms {
        all.extend(outcomes(p, constraints, catalog)?);
    }
    Ok(ValidationReport::from_outcomes(all))
}

fn outcomes(planogram: &Planogram, constraints: &ConstraintSet, catalog: &Catalog) -> Result<Vec<ConstraintOutcome>, ConstraintError> {
    let layout = layout::from_planogram(planogram, catalog)?;
    Ok(constraints
        .iter()
        .map(|c| ConstraintOutcome {
            kind: c.kind(),
            satisfied: layout_satisfied(&c.params, &layout, catalog, &planogram.fixture),
            margin: layout_margin(&c.params, &layout, catalog, &planogram.fixture),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_is_mean_of_kind_rates() {
        let rates: BTreeMap<_, _> = ConstraintKind::ALL
            .into_iter()
            .zip([0.943, 0.987, 0.912, 0.991, 0.885])
            .collect();
        let r = ValidationReport::from_rates(rates);
        assert!((r.overall - 0.944).abs() < 5e-4, "{}", r.overall);
    }

    #[test]
    fn always_failing_kind_has_rate_zero() {
        let outcome = |kind, satisfied| ConstraintOutcome {
            kind,
            satisfied,
            margin: if satisfied { 0.1 } else { -0.1 },
        };
        let mut all = Vec::new();
        for i in 0..4 {
            all.push(outcome(ConstraintKind::WeightLimit, false));
            all.push(outcome(ConstraintKind::PhysicalFit, true));
            all.push(outcome(ConstraintKind::RegulatoryAge, i % 2 == 0));
        }
        let r = ValidationReport::from_outcomes(all);
        assert_eq!(r.rate(ConstraintKind::WeightLimit), Some(0.0));
        assert_eq!(r.rate(ConstraintKind::PhysicalFit), Some(1.0));
        assert_eq!(r.rate(ConstraintKind::RegulatoryAge), Some(0.5));
        assert!((r.overall - 0.5).abs() < 1e-12);
    }
}
