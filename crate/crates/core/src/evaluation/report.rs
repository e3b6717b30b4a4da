use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::constraints::{validate, ConstraintKind, ConstraintOutcome, ConstraintSet};
use crate::domain::{Catalog, Planogram};

use super::revenue::{expected_revenue, RevenueModel};
use super::EvaluationError;

/// Fraction of grid cells covered by placements.
pub fn space_utilization(planogram: &Planogram) -> f64 {
    let total = planogram.fixture.cell_count();
    if total == 0 {
        return 0.0;
    }
    let used: usize = planogram.placements.iter().map(|p| p.span_columns).sum();
    (used as f64 / total as f64).min(1.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub satisfied: usize,
    pub total: usize,
}

impl Tally {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.total as f64
        }
    }

    fn add(&mut self, other: Tally) {
        self.satisfied += other.satisfied;
        self.total += other.total;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Summary {
    /// Statistics of an ascending-sorted sample.
    pub fn of_sorted(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let pick = |q: f64| values[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            count: n,
            mean,
            std: var.sqrt(),
            min: values[0],
            p50: pick(0.5),
            p95: pick(0.95),
            max: values[n - 1],
        }
    }
}

/// Aggregate metrics of a batch of generated planograms.
///
/// Raw tallies and sorted per-sample values are kept so that merging reports
/// of any partition of a sample set gives exactly the report of the whole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sample_count: usize,
    pub per_category_rate: BTreeMap<ConstraintKind, f64>,
    pub overall: f64,
    /// Standard deviation of each kind's rate across stores.
    pub per_store_std: BTreeMap<ConstraintKind, f64>,
    pub utilization: Summary,
    pub mean_expected_revenue: f64,
    pub sampling_ms: Summary,
    kind_tallies: BTreeMap<ConstraintKind, Tally>,
    store_tallies: BTreeMap<String, BTreeMap<ConstraintKind, Tally>>,
    utilization_values: Vec<f64>,
    revenue_values: Vec<f64>,
    sampling_values: Vec<f64>,
}

impl RunReport {
    /// Report from per-sample outcomes grouped by store.
    pub fn from_outcomes<'a>(samples: impl IntoIterator<Item = (&'a str, &'a [ConstraintOutcome])>) -> Self {
        let mut report = Self::blank();
        for (store, outcomes) in samples {
            report.sample_count += 1;
            let per_store = report.store_tallies.entry(store.to_string()).or_default();
            for o in outcomes {
                let t = Tally {
                    satisfied: usize::from(o.satisfied),
                    total: 1,
                };
                report.kind_tallies.entry(o.kind).or_default().add(t);
                per_store.entry(o.kind).or_default().add(t);
            }
        }
        report.finish()
    }

    fn blank() -> Self {
        Self {
            sample_count: 0,
            per_category_rate: BTreeMap::new(),
            overall: 1.0,
            per_store_std: BTreeMap::new(),
            utilization: Summary::default(),
            mean_expected_revenue: 0.0,
            sampling_ms: Summary::default(),
            kind_tallies: BTreeMap::new(),
            store_tallies: BTreeMap::new(),
            utilization_values: Vec::new(),
            revenue_values: Vec::new(),
            sampling_values: Vec::new(),
        }
    }

    fn finish(mut self) -> Self {
        for v in [&mut self.utilization_values, &mut self.revenue_values, &mut self.sampling_values] {
            v.sort_by(f64::total_cmp);
        }
        self.per_category_rate = self.kind_tallies.iter().map(|(&k, t)| (k, t.rate())).collect();
        self.overall = if self.per_category_rate.is_empty() {
            1.0
        } else {
            self.per_category_rate.values().sum::<f64>() / self.per_category_rate.len() as f64
        };
        self.per_store_std = self
            .kind_tallies
            .keys()
            .map(|&k| {
                let rates: Vec<f64> = self
                    .store_tallies
                    .values()
                    .filter_map(|m| m.get(&k).map(Tally::rate))
                    .collect();
                let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
                let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rates.len().max(1) as f64;
                (k, var.sqrt())
            })
            .collect();
        self.utilization = Summary::of_sorted(&self.utilization_values);
        self.mean_expected_revenue = Summary::of_sorted(&self.revenue_values).mean;
        self.sampling_ms = Summary::of_sorted(&self.sampling_values);
        self
    }

    /// Attaches per-sample generation times in milliseconds.
    pub fn with_sampling_ms(mut self, millis: impl IntoIterator<Item = f64>) -> Self {
        self.sampling_values.extend(millis);
        self.finish()
    }

    pub fn tally(&self, kind: ConstraintKind) -> Option<Tally> {
        self.kind_tallies.get(&kind).copied()
    }

    /// Combined report of two disjoint sample sets.
    pub fn merge(&self, other: &RunReport) -> RunReport {
        let mut out = self.clone();
        out.sample_count += other.sample_count;
        for (&k, &t) in &other.kind_tallies {
            out.kind_tallies.entry(k).or_default().add(t);
        }
        for (store, m) in &other.store_tallies {
            let target = out.store_tallies.entry(store.clone()).or_default();
            for (&k, &t) in m {
                target.entry(k).or_default().add(t);
            }
        }
        out.utilization_values.extend(&other.utilization_values);
        out.revenue_values.extend(&other.revenue_values);
        out.sampling_values.extend(&other.sampling_values);
        out.finish()
    }

    /// Five-row satisfaction table followed by utilization and revenue.
    pub fn to_table(&self) -> String {
        let label = |k: ConstraintKind| match k {
            ConstraintKind::PhysicalFit => "Physical feasibility",
            ConstraintKind::WeightLimit => "Weight limits",
            ConstraintKind::CategoryGrouping => "Category grouping",
            ConstraintKind::RegulatoryAge => "Regulatory compliance",
            ConstraintKind::BrandPlacement => "Brand placement",
        };
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:>12} {:>14}", "Constraint category", "Satisfaction", "Store sd");
        for (k, rate) in &self.per_category_rate {
            let sd = self.per_store_std.get(k).copied().unwrap_or(0.0);
            let _ = writeln!(s, "{:<24} {:>11.1}% {:>13.1}%", label(*k), rate * 100.0, sd * 100.0);
        }
        let _ = writeln!(s, "{:<24} {:>11.1}%", "Overall", self.overall * 100.0);
        let _ = writeln!(
            s,
            "samples {}  utilization mean {:.1}% (min {:.1}%, max {:.1}%)  revenue mean {:.2}",
            self.sample_count,
            self.utilization.mean * 100.0,
            self.utilization.min * 100.0,
            self.utilization.max * 100.0,
            self.mean_expected_revenue
        );
        if self.sampling_ms.count > 0 {
            let _ = writeln!(
                s,
                "sampling ms/planogram  p50 {:.1}  p95 {:.1}  max {:.1}",
                self.sampling_ms.p50, self.sampling_ms.p95, self.sampling_ms.max
            );
        }
        s
    }
}

/// Validates, measures and aggregates a nonempty set of samples.
pub fn build_report(
    samples: &[Planogram],
    constraints: &ConstraintSet,
    catalog: &Catalog,
    revenue_model: &RevenueModel,
) -> Result<RunReport, EvaluationError> {
    if samples.is_empty() {
        return Err(EvaluationError::EmptySamples);
    }
    let mut outcomes = Vec::with_capacity(samples.len());
    let mut utilization = Vec::with_capacity(samples.len());
    let mut revenue = Vec::with_capacity(samples.len());
    for pg in samples {
        outcomes.push(validate(pg, constraints, catalog)?.per_constraint);
        utilization.push(space_utilization(pg));
        revenue.push(expected_revenue(pg, catalog, revenue_model)?);
    }
    let mut report = RunReport::from_outcomes(
        samples
            .iter()
            .zip(&outcomes)
            .map(|(pg, o)| (pg.store_id.as_str(), o.as_slice())),
    );
    report.utilization_values = utilization;
    report.revenue_values = revenue;
    Ok(report.finish())
}
