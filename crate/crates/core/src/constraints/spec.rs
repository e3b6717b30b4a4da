use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ConstraintError;

/// The five constraint families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    PhysicalFit,
    WeightLimit,
    CategoryGrouping,
    RegulatoryAge,
    BrandPlacement,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 5] = [
        ConstraintKind::PhysicalFit,
        ConstraintKind::WeightLimit,
        ConstraintKind::CategoryGrouping,
        ConstraintKind::RegulatoryAge,
        ConstraintKind::BrandPlacement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::PhysicalFit => "physical-fit",
            ConstraintKind::WeightLimit => "weight-limit",
            ConstraintKind::CategoryGrouping => "category-grouping",
            ConstraintKind::RegulatoryAge => "regulatory-age",
            ConstraintKind::BrandPlacement => "brand-placement",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintKind {
    type Err = ConstraintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConstraintKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConstraintError::UnknownKind(s.to_string()))
    }
}

/// A brand's contracted shelf band (inclusive shelf indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrandContract {
    pub brand: String,
    pub min_shelf: usize,
    pub max_shelf: usize,
}

/// Kind-specific parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintParams {
    PhysicalFit,
    WeightLimit,
    CategoryGrouping { threshold: f64 },
    RegulatoryAge { min_shelf_index: usize },
    BrandPlacement { contracts: Vec<BrandContract> },
}

impl ConstraintParams {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            ConstraintParams::PhysicalFit => ConstraintKind::PhysicalFit,
            ConstraintParams::WeightLimit => ConstraintKind::WeightLimit,
            ConstraintParams::CategoryGrouping { .. } => ConstraintKind::CategoryGrouping,
            ConstraintParams::RegulatoryAge { .. } => ConstraintKind::RegulatoryAge,
            ConstraintParams::BrandPlacement { .. } => ConstraintKind::BrandPlacement,
        }
    }
}

pub const DEFAULT_GROUPING_THRESHOLD: f64 = 0.8;

/// One constraint `cᵢ` with its penalty weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub params: ConstraintParams,
    pub weight: f64,
}

impl Constraint {
    pub fn new(params: ConstraintParams) -> Self {
        Self { params, weight: 1.0 }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn kind(&self) -> ConstraintKind {
        self.params.kind()
    }
}

/// Wire form: `{kind, params, weight}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    kind: String,
    #[serde(default)]
    params: serde_json::Value,
    #[serde(default = "unit_weight")]
    weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupingParams {
    #[serde(default = "default_threshold")]
    threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_GROUPING_THRESHOLD
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AgeParams {
    min_shelf_index: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BrandParams {
    contracts: Vec<BrandContract>,
}

impl TryFrom<RawConstraint> for Constraint {
    type Error = ConstraintError;

    fn try_from(raw: RawConstraint) -> Result<Self, Self::Error> {
        let kind: ConstraintKind = raw.kind.parse()?;
        let value = match raw.params {
            serde_json::Value::Null => serde_json::json!({}),
            v => v,
        };
        let bad = |e: serde_json::Error| ConstraintError::InvalidParams {
            kind,
            message: e.to_string(),
        };
        let params = match kind {
            ConstraintKind::PhysicalFit => {
                serde_json::from_value::<NoParams>(value).map_err(bad)?;
                ConstraintParams::PhysicalFit
            }
            ConstraintKind::WeightLimit => {
                serde_json::from_value::<NoParams>(value).map_err(bad)?;
                ConstraintParams::WeightLimit
            }
            ConstraintKind::CategoryGrouping => {
                let p: GroupingParams = serde_json::from_value(value).map_err(bad)?;
                if !(0.0..=1.0).contains(&p.threshold) {
                    return Err(ConstraintError::InvalidParams {
                        kind,
                        message: format!("threshold {} outside [0, 1]", p.threshold),
                    });
                }
                ConstraintParams::CategoryGrouping { threshold: p.threshold }
            }
            ConstraintKind::RegulatoryAge => {
                let p: AgeParams = serde_json::from_value(value).map_err(bad)?;
                ConstraintParams::RegulatoryAge {
                    min_shelf_index: p.min_shelf_index,
                }
            }
            ConstraintKind::BrandPlacement => {
                let p: BrandParams = serde_json::from_value(value).map_err(bad)?;
                if let Some(c) = p.contracts.iter().find(|c| c.min_shelf > c.max_shelf) {
                    return Err(ConstraintError::InvalidParams {
                        kind,
                        message: format!("contract for {} has min_shelf > max_shelf", c.brand),
                    });
                }
                ConstraintParams::BrandPlacement { contracts: p.contracts }
            }
        };
        if !(raw.weight.is_finite() && raw.weight >= 0.0) {
            return Err(ConstraintError::InvalidParams {
                kind,
                message: format!("weight must be nonnegative, got {}", raw.weight),
            });
        }
        Ok(Constraint {
            params,
            weight: raw.weight,
        })
    }
}

impl From<&Constraint> for RawConstraint {
    fn from(c: &Constraint) -> Self {
        let params = match &c.params {
            ConstraintParams::PhysicalFit | ConstraintParams::WeightLimit => serde_json::json!({}),
            ConstraintParams::CategoryGrouping { threshold } => serde_json::json!({ "threshold": threshold }),
            ConstraintParams::RegulatoryAge { min_shelf_index } => {
                serde_json::json!({ "min_shelf_index": min_shelf_index })
            }
            ConstraintParams::BrandPlacement { contracts } => serde_json::json!({ "contracts": contracts }),
        };
        RawConstraint {
            kind: c.kind().as_str().to_string(),
            params,
            weight: c.weight,
        }
    }
}

impl Serialize for Constraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawConstraint::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawConstraint::deserialize(d)?;
        Constraint::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// The constraint set `{c₁ … c_m}`; serialized as a plain JSON list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    /// One constraint of each kind with the standard parameters.
    pub fn standard(min_age_shelf: usize, contracts: Vec<BrandContract>) -> Self {
        Self::new(vec![
            Constraint::new(ConstraintParams::PhysicalFit),
            Constraint::new(ConstraintParams::WeightLimit),
            Constraint::new(ConstraintParams::CategoryGrouping {
                threshold: DEFAULT_GROUPING_THRESHOLD,
            }),
            Constraint::new(ConstraintParams::RegulatoryAge {
                min_shelf_index: min_age_shelf,
            }),
            Constraint::new(ConstraintParams::BrandPlacement { contracts }),
        ])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Copy with every penalty weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.constraints
                .iter()
                .map(|c| c.clone().with_weight(c.weight * factor))
                .collect(),
        )
    }
}
