//! The data fact 5-tuple, its per-type field matrix, validation and evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;
use crate::table::{
    apply_subspace, group_and_aggregate, ColumnType, DataTable, Group, Subspace, TableError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactType {
    Value,
    Difference,
    Proportion,
    Trend,
    Categorization,
    Distribution,
    Rank,
    Association,
    Extreme,
    Outlier,
}

impl FactType {
    pub const ALL: [FactType; 10] = [
        FactType::Value,
        FactType::Difference,
        FactType::Proportion,
        FactType::Trend,
        FactType::Categorization,
        FactType::Distribution,
        FactType::Rank,
        FactType::Association,
        FactType::Extreme,
        FactType::Outlier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FactType::Value => "value",
            FactType::Difference => "difference",
            FactType::Proportion => "proportion",
            FactType::Trend => "trend",
            FactType::Categorization => "categorization",
            FactType::Distribution => "distribution",
            FactType::Rank => "rank",
            FactType::Association => "association",
            FactType::Extreme => "extreme",
            FactType::Outlier => "outlier",
        }
    }

    pub fn index(self) -> usize {
        FactType::ALL.iter().position(|&t| t == self).unwrap_or(0)
    }
}

impl fmt::Display for FactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FactType::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim().to_lowercase())
            .ok_or_else(|| format!("unknown fact type '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    Sum,
    Mean,
    Count,
    Min,
    Max,
}

impl Agg {
    pub const ALL: [Agg; 5] = [Agg::Sum, Agg::Mean, Agg::Count, Agg::Min, Agg::Max];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Measure {
    pub column: String,
    pub agg: Agg,
}

impl Measure {
    pub fn new(column: impl Into<String>, agg: Agg) -> Measure {
        Measure { column: column.into(), agg }
    }
}

/// How a fact type constrains its breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakdownRule {
    Forbidden,
    Optional,
    Any,
    Only(ColumnType),
}

impl BreakdownRule {
    pub fn admits(self, kind: ColumnType) -> bool {
        match self {
            BreakdownRule::Forbidden => false,
            BreakdownRule::Optional | BreakdownRule::Any => kind != ColumnType::Numerical,
            BreakdownRule::Only(k) => k == kind,
        }
    }

    pub fn required(self) -> bool {
        matches!(self, BreakdownRule::Any | BreakdownRule::Only(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocusRule {
    None,
    Exactly(usize),
    AtLeastOne,
}

impl FocusRule {
    pub fn required(self) -> bool {
        !matches!(self, FocusRule::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldMask {
    pub breakdown: BreakdownRule,
    pub measures: usize,
    pub focus: FocusRule,
}

pub fn required_fields(t: FactType) -> FieldMask {
    use BreakdownRule::*;
    let (breakdown, measures, focus) = match t {
        FactType::Value => (Forbidden, 1, FocusRule::None),
        FactType::Difference => (Any, 1, FocusRule::Exactly(2)),
        FactType::Proportion => (Only(ColumnType::Categorical), 1, FocusRule::Exactly(1)),
        FactType::Trend => (Only(ColumnType::Temporal), 1, FocusRule::None),
        FactType::Categorization => (Only(ColumnType::Categorical), 0, FocusRule::None),
        FactType::Distribution => (Any, 1, FocusRule::None),
        FactType::Rank => (Any, 1, FocusRule::None),
        FactType::Association => (Optional, 2, FocusRule::None),
        FactType::Extreme => (Any, 1, FocusRule::Exactly(1)),
        FactType::Outlier => (Any, 1, FocusRule::AtLeastOne),
    };
    FieldMask { breakdown, measures, focus }
}

/// The 5-tuple {type, subspace, breakdown, measure, focus}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFact {
    #[serde(rename = "type")]
    pub fact_type: FactType,
    #[serde(default)]
    pub subspace: Subspace,
    #[serde(default)]
    pub breakdown: Option<String>,
    #[serde(default)]
    pub measure: Vec<Measure>,
    #[serde(default)]
    pub focus: Vec<String>,
}

impl DataFact {
    pub fn new(fact_type: FactType) -> DataFact {
        DataFact {
            fact_type,
            subspace: Subspace::all(),
            breakdown: None,
            measure: Vec::new(),
            focus: Vec::new(),
        }
    }

    pub fn with_measure(mut self, m: Measure) -> DataFact {
        self.measure.push(m);
        self
    }

    pub fn with_breakdown(mut self, column: impl Into<String>) -> DataFact {
        self.breakdown = Some(column.into());
        self
    }

    pub fn with_subspace(mut self, subspace: Subspace) -> DataFact {
        self.subspace = subspace;
        self
    }

    pub fn with_focus<I: IntoIterator<Item = S>, S: Into<String>>(mut self, focus: I) -> DataFact {
        self.focus = focus.into_iter().map(Into::into).collect();
        self
    }

    /// Canonical JSON text, used for deterministic tie-breaking.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("facts always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub key: String,
    pub x: f64,
    pub y: f64,
}

/// Type-specific answer content computed from the groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Derived {
    Value { value: f64 },
    Difference { a: String, b: String, value_a: f64, value_b: f64, gap: f64 },
    Proportion { item: String, value: f64, total: f64, share: f64 },
    Trend { direction: Direction, slope: f64, intercept: f64 },
    Categorization { categories: Vec<Group> },
    Distribution { min: Group, max: Group, mean: f64 },
    Rank { order: Vec<String> },
    Association { correlation: f64, slope: f64, intercept: f64, points: Vec<Point> },
    Extreme { item: String, value: f64, highest: bool },
    Outlier { items: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactResult {
    pub fact: DataFact,
    pub breakdown_type: Option<ColumnType>,
    pub groups: Vec<Group>,
    pub derived: Derived,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactError {
    #[error("invalid fact: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Checks the fact's fields against the type matrix and the table schema.
///
/// Focus references are checked against the evaluated groups, so this may aggregate.
pub fn validate_fact(f: &DataFact, x: &DataTable) -> Result<(), Vec<String>> {
    let mut violations = validate_structure(f, x);
    if violations.is_empty() {
        violations.extend(validate_focus(f, x));
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Field-matrix and schema checks only (no aggregation).
pub fn validate_structure(f: &DataFact, x: &DataTable) -> Vec<String> {
    let mut v = validate_shape(f, x);
    match required_fields(f.fact_type).focus {
        FocusRule::None if !f.focus.is_empty() => v.push(format!("{} takes no focus", f.fact_type)),
        FocusRule::Exactly(n) if f.focus.len() != n => {
            v.push(format!("expected {n} focus item(s), found {}", f.focus.len()))
        }
        FocusRule::AtLeastOne if f.focus.is_empty() => v.push("at least one focus item is required".into()),
        _ => {}
    }
    v
}

/// [`validate_structure`] without the focus-count rules, for facts whose focus is still open.
pub fn validate_shape(f: &DataFact, x: &DataTable) -> Vec<String> {
    let mask = required_fields(f.fact_type);
    let mut v = Vec::new();
    match (&f.breakdown, mask.breakdown) {
        (Some(_), BreakdownRule::Forbidden) => v.push(format!("{} takes no breakdown", f.fact_type)),
        (None, rule) if rule.required() => v.push("breakdown is required".to_string()),
        (Some(name), rule) => match x.column(name) {
            None => v.push(format!("unknown column '{name}'")),
            Some(col) if !rule.admits(col.kind()) => v.push(match rule {
                BreakdownRule::Only(ColumnType::Temporal) => "breakdown must be temporal".to_string(),
                BreakdownRule::Only(ColumnType::Categorical) => "breakdown must be categorical".to_string(),
                _ => "breakdown must be temporal or categorical".to_string(),
            }),
            Some(_) => {}
        },
        _ => {}
    }
    if f.measure.len() != mask.measures {
        v.push(format!("expected {} measure(s), found {}", mask.measures, f.measure.len()));
    }
    for m in &f.measure {
        match x.column(&m.column) {
            None => v.push(format!("unknown column '{}'", m.column)),
            Some(col) if col.kind() != ColumnType::Numerical => {
                v.push(format!("measure '{}' must be numerical", m.column))
            }
            Some(_) => {}
        }
    }
    let mut seen = std::collections::HashSet::new();
    if f.focus.iter().any(|k| !seen.insert(k)) {
        v.push("focus items must be distinct".into());
    }
    if let Err(e) = f.subspace.validate(x) {
        v.push(e.to_string());
    }
    v
}

fn validate_focus(f: &DataFact, x: &DataTable) -> Vec<String> {
    if f.focus.is_empty() {
        return Vec::new();
    }
    let groups = match groups_of(f, x) {
        Ok(g) => g,
        Err(e) => return vec![e.to_string()],
    };
    let mut v: Vec<String> = f
        .focus
        .iter()
        .filter(|k| !groups.iter().any(|g| &g.key == *k))
        .map(|k| format!("focus '{k}' is not a group"))
        .collect();
    if !v.is_empty() {
        return v;
    }
    match f.fact_type {
        FactType::Extreme => {
            let (hi, lo) = (argmax(&groups), argmin(&groups));
            if Some(&f.focus[0]) != hi.map(|g| &g.key) && Some(&f.focus[0]) != lo.map(|g| &g.key) {
                v.push("extreme focus must be the highest or lowest group".into());
            }
        }
        FactType::Outlier => {
            let found = outlier_keys(&groups);
            for k in &f.focus {
                if !found.contains(k) {
                    v.push(format!("focus '{k}' is not an outlier"));
                }
            }
        }
        _ => {}
    }
    v
}

fn groups_of(f: &DataFact, x: &DataTable) -> Result<Vec<Group>, TableError> {
    group_and_aggregate(x, &f.subspace, f.breakdown.as_deref(), f.measure.first())
}

/// First group attaining the maximum (groups come in key order).
pub fn argmax(groups: &[Group]) -> Option<&Group> {
    groups.iter().fold(None, |best: Option<&Group>, g| match best {
        Some(b) if b.value >= g.value => Some(b),
        _ => Some(g),
    })
}

pub fn argmin(groups: &[Group]) -> Option<&Group> {
    groups.iter().fold(None, |best: Option<&Group>, g| match best {
        Some(b) if b.value <= g.value => Some(b),
        _ => Some(g),
    })
}

pub fn outlier_keys(groups: &[Group]) -> Vec<String> {
    let values: Vec<f64> = groups.iter().map(|g| g.value).collect();
    stats::outliers(&values).into_iter().map(|i| groups[i].key.clone()).collect()
}

/// Groups sorted by descending value; ties keep key order.
pub fn ranked(groups: &[Group]) -> Vec<Group> {
    let mut sorted = groups.to_vec();
    sorted.sort_by(|a, b| b.value.total_cmp(&a.value));
    sorted
}

/// Cap on focus candidates generated per partial fact.
pub const FOCUS_CANDIDATE_CAP: usize = 12;

/// Focus values a complete fact could take, derived from the data.
///
/// `f` must be valid apart from its focus. Extreme yields the highest then the lowest group,
/// outlier the detected outlier set, proportion each group, difference each group pair.
pub fn focus_candidates(f: &DataFact, x: &DataTable) -> Result<Vec<Vec<String>>, FactError> {
    let groups = groups_of(f, x)?;
    let mut out: Vec<Vec<String>> = match f.fact_type {
        FactType::Extreme => {
            let mut c = Vec::new();
            if let Some(hi) = argmax(&groups) {
                c.push(vec![hi.key.clone()]);
            }
            if let Some(lo) = argmin(&groups) {
                if c.first() != Some(&vec![lo.key.clone()]) {
                    c.push(vec![lo.key.clone()]);
                }
            }
            c
        }
        FactType::Outlier => {
            let keys = outlier_keys(&groups);
            if keys.is_empty() {
                Vec::new()
            } else {
                vec![keys]
            }
        }
        FactType::Proportion => groups.iter().map(|g| vec![g.key.clone()]).collect(),
        FactType::Difference => {
            let mut c = Vec::new();
            for i in 0..groups.len() {
                for j in i + 1..groups.len() {
                    c.push(vec![groups[i].key.clone(), groups[j].key.clone()]);
                }
            }
            c
        }
        _ => Vec::new(),
    };
    out.truncate(FOCUS_CANDIDATE_CAP);
    Ok(out)
}

/// Evaluates a valid fact into its groups and derived payload.
pub fn evaluate_fact(f: &DataFact, x: &DataTable) -> Result<FactResult, FactError> {
    validate_fact(f, x).map_err(FactError::Invalid)?;
    let breakdown_type = f.breakdown.as_deref().and_then(|b| x.column(b)).map(|c| c.kind());
    let groups = groups_of(f, x)?;
    let derived = if f.fact_type == FactType::Association {
        associate(f, x)?
    } else {
        derive(f, &groups)?
    };
    Ok(FactResult { fact: f.clone(), breakdown_type, groups, derived })
}

/// Computes the derived payload of a single-measure fact from already aggregated groups.
pub fn derive(f: &DataFact, groups: &[Group]) -> Result<Derived, FactError> {
    let insufficient = |what: &str| FactError::InsufficientData(what.to_string());
    let find = |key: &str| groups.iter().find(|g| g.key == key).map(|g| g.value);
    Ok(match f.fact_type {
        FactType::Value => Derived::Value {
            value: groups.first().ok_or_else(|| insufficient("no rows in subspace"))?.value,
        },
        FactType::Difference => {
            let (a, b) = match f.focus.as_slice() {
                [a, b] => (a.clone(), b.clone()),
                _ => return Err(insufficient("difference needs two focus groups")),
            };
            let va = find(&a).ok_or_else(|| insufficient("focus group missing"))?;
            let vb = find(&b).ok_or_else(|| insufficient("focus group missing"))?;
            Derived::Difference { a, b, value_a: va, value_b: vb, gap: va - vb }
        }
        FactType::Proportion => {
            let item = f.focus.first().cloned().ok_or_else(|| insufficient("no focus group"))?;
            let value = find(&item).ok_or_else(|| insufficient("focus group missing"))?;
            let total: f64 = groups.iter().map(|g| g.value).sum();
            if total == 0.0 {
                return Err(insufficient("total is zero"));
            }
            Derived::Proportion { item, value, total, share: value / total }
        }
        FactType::Trend => {
            if groups.len() < 2 {
                return Err(insufficient("trend needs at least 2 points"));
            }
            let xs: Vec<f64> = (0..groups.len()).map(|i| i as f64).collect();
            let ys: Vec<f64> = groups.iter().map(|g| g.value).collect();
            let (slope, intercept) = stats::linear_fit(&xs, &ys).ok_or_else(|| insufficient("degenerate series"))?;
            let scale = stats::mean(&ys).unwrap_or(0.0).abs().max(1.0);
            let direction = if slope.abs() <= 1e-9 * scale {
                Direction::Flat
            } else if slope > 0.0 {
                Direction::Increasing
            } else {
                Direction::Decreasing
            };
            Derived::Trend { direction, slope, intercept }
        }
        FactType::Categorization => {
            if groups.is_empty() {
                return Err(insufficient("no categories in subspace"));
            }
            Derived::Categorization { categories: groups.to_vec() }
        }
        FactType::Distribution => {
            let min = argmin(groups).ok_or_else(|| insufficient("no groups"))?.clone();
            let max = argmax(groups).ok_or_else(|| insufficient("no groups"))?.clone();
            let values: Vec<f64> = groups.iter().map(|g| g.value).collect();
            Derived::Distribution { min, max, mean: stats::mean(&values).unwrap_or(0.0) }
        }
        FactType::Rank => {
            if groups.is_empty() {
                return Err(insufficient("no groups"));
            }
            Derived::Rank { order: ranked(groups).into_iter().map(|g| g.key).collect() }
        }
        FactType::Extreme => {
            let item = f.focus.first().cloned().ok_or_else(|| insufficient("no focus group"))?;
            let value = find(&item).ok_or_else(|| insufficient("focus group missing"))?;
            let highest = argmax(groups).is_some_and(|g| g.key == item);
            Derived::Extreme { item, value, highest }
        }
        FactType::Outlier => {
            let items = outlier_keys(groups);
            if items.is_empty() {
                return Err(insufficient("no outliers"));
            }
            Derived::Outlier { items }
        }
        FactType::Association => return Err(insufficient("association needs two measures")),
    })
}

/// Association points: per group with a breakdown, per row without one.
fn associate(f: &DataFact, x: &DataTable) -> Result<Derived, FactError> {
    let (m1, m2) = (&f.measure[0], &f.measure[1]);
    let points: Vec<Point> = match f.breakdown.as_deref() {
        Some(b) => {
            let g1 = group_and_aggregate(x, &f.subspace, Some(b), Some(m1))?;
            let g2 = group_and_aggregate(x, &f.subspace, Some(b), Some(m2))?;
            g1.iter()
                .filter_map(|a| {
                    g2.iter()
                        .find(|c| c.key == a.key)
                        .map(|c| Point { key: a.key.clone(), x: a.value, y: c.value })
                })
                .collect()
        }
        None => {
            let c1 = x.require(&m1.column)?;
            let c2 = x.require(&m2.column)?;
            apply_subspace(x, &f.subspace)?
                .into_iter()
                .filter_map(|r| {
                    Some(Point { key: format!("row {}", r + 1), x: c1.number(r)?, y: c2.number(r)? })
                })
                .collect()
        }
    };
    if points.len() < 2 {
        return Err(FactError::InsufficientData("association needs at least 2 points".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let correlation = stats::pearson(&xs, &ys)
        .ok_or_else(|| FactError::InsufficientData("constant series".into()))?;
    let (slope, intercept) = stats::linear_fit(&xs, &ys)
        .ok_or_else(|| FactError::InsufficientData("constant series".into()))?;
    Ok(Derived::Association { correlation, slope, intercept, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn toy() -> DataTable {
        fixtures::toy_brands()
    }

    #[test]
    fn matrix_has_ten_types() {
        assert_eq!(FactType::ALL.len(), 10);
        let trend = required_fields(FactType::Trend);
        assert_eq!(trend.breakdown, BreakdownRule::Only(ColumnType::Temporal));
        assert_eq!(trend.measures, 1);
        assert_eq!(required_fields(FactType::Association).measures, 2);
        assert_eq!(required_fields(FactType::Categorization).measures, 0);
    }

    #[test]
    fn trend_with_categorical_breakdown_is_rejected() {
        let f = DataFact::new(FactType::Trend)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("brand");
        let err = validate_fact(&f, &toy()).unwrap_err();
        assert!(err.contains(&"breakdown must be temporal".to_string()));
    }

    #[test]
    fn unknown_column_is_reported() {
        let f = DataFact::new(FactType::Value).with_measure(Measure::new("profit", Agg::Sum));
        let err = validate_fact(&f, &toy()).unwrap_err();
        assert!(err.iter().any(|v| v.contains("unknown column")));
    }

    #[test]
    fn extreme_over_toy_brands() {
        let f = DataFact::new(FactType::Extreme)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("brand")
            .with_focus(["B"]);
        let r = evaluate_fact(&f, &toy()).unwrap();
        assert_eq!(r.derived, Derived::Extreme { item: "B".into(), value: 30.0, highest: true });
        let cands = focus_candidates(&DataFact { focus: vec![], ..f }, &toy()).unwrap();
        assert_eq!(cands, vec![vec!["B".to_string()], vec!["A".to_string()]]);
    }

    #[test]
    fn extreme_focus_must_be_an_extreme() {
        let f = DataFact::new(FactType::Extreme)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("brand")
            .with_focus(["C"]);
        assert!(validate_fact(&f, &toy()).is_err());
    }

    #[test]
    fn self_association_is_perfect() {
        let f = DataFact::new(FactType::Association)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_measure(Measure::new("sales", Agg::Sum));
        let Derived::Association { correlation, slope, .. } = evaluate_fact(&f, &toy()).unwrap().derived else {
            panic!()
        };
        assert!((correlation - 1.0).abs() < 1e-12);
        assert!((slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trend_needs_two_points() {
        let t = crate::table::load_table(b"year,v\n2001,3\n", &Default::default()).unwrap();
        let f = DataFact::new(FactType::Trend).with_measure(Measure::new("v", Agg::Sum)).with_breakdown("year");
        assert!(matches!(evaluate_fact(&f, &t), Err(FactError::InsufficientData(_))));
    }

    #[test]
    fn increasing_trend() {
        let t = crate::table::load_table(b"year,v\n2000,1\n2001,2\n2002,3\n", &Default::default()).unwrap();
        let f = DataFact::new(FactType::Trend).with_measure(Measure::new("v", Agg::Sum)).with_breakdown("year");
        let Derived::Trend { direction, .. } = evaluate_fact(&f, &t).unwrap().derived else { panic!() };
        assert_eq!(direction, Direction::Increasing);
    }

    #[test]
    fn fact_json_shape() {
        let f = DataFact::new(FactType::Extreme)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("brand")
            .with_focus(["B"]);
        let json = serde_json::to_value(&f).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"type":"extreme","subspace":[],"breakdown":"brand",
                "measure":[{"column":"sales","agg":"sum"}],"focus":["B"]})
        );
    }
}
