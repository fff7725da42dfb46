//! Annotated chart specifications and dashboard layout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact::{Derived, FactResult, FactType};
use crate::render::{fact_to_caption, measure_phrase, result_question};
use crate::table::ColumnType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Bar,
    Line,
    Pie,
    Area,
    Scatter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnotationKind {
    ValueLabel,
    DashedDifferenceLine,
    TrendLine,
    HighlightColor,
    Pointer,
    RankBadge,
    RegressionLine,
    OutlierRing,
    SliceEmphasis,
}

impl AnnotationKind {
    pub const ALL: [AnnotationKind; 9] = [
        AnnotationKind::ValueLabel,
        AnnotationKind::DashedDifferenceLine,
        AnnotationKind::TrendLine,
        AnnotationKind::HighlightColor,
        AnnotationKind::Pointer,
        AnnotationKind::RankBadge,
        AnnotationKind::RegressionLine,
        AnnotationKind::OutlierRing,
        AnnotationKind::SliceEmphasis,
    ];
}

/// Chart for a fact type and breakdown kind. Facts without a breakdown use the categorical row.
pub fn select_chart(t: FactType, breakdown: ColumnType) -> (Base, &'static [AnnotationKind]) {
    use AnnotationKind::*;
    let temporal = breakdown == ColumnType::Temporal;
    match t {
        FactType::Value => (Base::Bar, &[ValueLabel]),
        FactType::Difference if temporal => (Base::Line, &[DashedDifferenceLine]),
        FactType::Difference => (Base::Bar, &[DashedDifferenceLine]),
        FactType::Proportion => (Base::Pie, &[SliceEmphasis]),
        FactType::Trend if temporal => (Base::Line, &[TrendLine]),
        FactType::Trend => (Base::Bar, &[TrendLine]),
        FactType::Categorization => (Base::Bar, &[HighlightColor]),
        FactType::Distribution if temporal => (Base::Area, &[ValueLabel]),
        FactType::Distribution => (Base::Bar, &[ValueLabel]),
        FactType::Rank if temporal => (Base::Line, &[RankBadge]),
        FactType::Rank => (Base::Bar, &[RankBadge]),
        FactType::Association => (Base::Scatter, &[RegressionLine]),
        FactType::Extreme if temporal => (Base::Line, &[HighlightColor, Pointer]),
        FactType::Extreme => (Base::Bar, &[HighlightColor, Pointer]),
        FactType::Outlier if temporal => (Base::Line, &[OutlierRing]),
        FactType::Outlier => (Base::Scatter, &[OutlierRing]),
    }
}

/// Every distinct (base, annotation set) the mapping can produce.
pub fn registered_combinations() -> Vec<(Base, Vec<AnnotationKind>)> {
    let mut out: Vec<(Base, Vec<AnnotationKind>)> = Vec::new();
    for t in FactType::ALL {
        for k in [ColumnType::Categorical, ColumnType::Temporal] {
            let (b, a) = select_chart(t, k);
            let mut a = a.to_vec();
            a.sort();
            if !out.iter().any(|(ob, oa)| *ob == b && *oa == a) {
                out.push((b, a));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    /// One of `x`, `y`, `angle`, `color`.
    pub channel: String,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datum {
    pub key: String,
    pub value: f64,
    /// Horizontal position on scatter charts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    /// Keys of the data points the annotation refers to.
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl Annotation {
    fn on(kind: AnnotationKind, targets: Vec<String>) -> Annotation {
        Annotation { kind, targets, params: BTreeMap::new() }
    }

    fn param(mut self, name: &str, v: f64) -> Annotation {
        self.params.insert(name.to_string(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub base: Base,
    pub fact_type: FactType,
    pub question: String,
    pub encodings: Vec<Encoding>,
    pub data: Vec<Datum>,
    pub annotations: Vec<Annotation>,
    pub caption: String,
    pub relevance: f64,
}

impl ChartSpec {
    /// Annotation targets that name no datum; empty for a well-formed spec.
    pub fn dangling_targets(&self) -> Vec<&str> {
        self.annotations
            .iter()
            .flat_map(|a| a.targets.iter())
            .filter(|t| !self.data.iter().any(|d| &d.key == *t))
            .map(String::as_str)
            .collect()
    }

    pub fn annotation_set(&self) -> Vec<AnnotationKind> {
        let mut kinds: Vec<AnnotationKind> = self.annotations.iter().map(|a| a.kind).collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("fact result has no groups to chart")]
    Empty,
}

/// Binds a fact result to its chart with annotations and caption.
pub fn build_chart(r: &FactResult, score: f64) -> Result<ChartSpec, ChartError> {
    use AnnotationKind::*;
    let kind = r.breakdown_type.unwrap_or(ColumnType::Categorical);
    let (base, _) = select_chart(r.fact.fact_type, kind);
    let data: Vec<Datum> = match &r.derived {
        Derived::Association { points, .. } => {
            points.iter().map(|p| Datum { key: p.key.clone(), value: p.y, x: Some(p.x) }).collect()
        }
        _ => r.groups.iter().map(|g| Datum { key: g.key.clone(), value: g.value, x: None }).collect(),
    };
    if data.is_empty() {
        return Err(ChartError::Empty);
    }
    let keys = || data.iter().map(|d| d.key.clone()).collect::<Vec<_>>();
    let ends = || {
        let mut v = vec![data[0].key.clone()];
        if data.len() > 1 {
            v.push(data[data.len() - 1].key.clone());
        }
        v
    };
    let annotations = match &r.derived {
        Derived::Value { value } => vec![Annotation::on(ValueLabel, keys()).param("value", *value)],
        Derived::Difference { a, b, gap, .. } => {
            vec![Annotation::on(DashedDifferenceLine, vec![a.clone(), b.clone()]).param("gap", *gap)]
        }
        Derived::Proportion { item, share, .. } => {
            vec![Annotation::on(SliceEmphasis, vec![item.clone()]).param("share", *share)]
        }
        Derived::Trend { slope, intercept, .. } => {
            vec![Annotation::on(TrendLine, ends()).param("slope", *slope).param("intercept", *intercept)]
        }
        Derived::Categorization { categories } => {
            vec![Annotation::on(HighlightColor, categories.iter().map(|g| g.key.clone()).collect())]
        }
        Derived::Distribution { min, max, mean } => {
            vec![Annotation::on(ValueLabel, vec![min.key.clone(), max.key.clone()]).param("mean", *mean)]
        }
        Derived::Rank { order } => vec![Annotation::on(RankBadge, order.clone())],
        Derived::Association { correlation, slope, intercept, .. } => vec![Annotation::on(RegressionLine, ends())
            .param("slope", *slope)
            .param("intercept", *intercept)
            .param("correlation", *correlation)],
        Derived::Extreme { item, value, .. } => vec![
            Annotation::on(HighlightColor, vec![item.clone()]),
            Annotation::on(Pointer, vec![item.clone()]).param("value", *value),
        ],
        Derived::Outlier { items } => vec![Annotation::on(OutlierRing, items.clone())],
    };
    let breakdown = r.fact.breakdown.clone().unwrap_or_else(|| "all".into());
    let measures: Vec<String> = r.fact.measure.iter().map(measure_phrase).collect();
    let encodings = match base {
        Base::Pie => vec![
            Encoding { channel: "color".into(), field: breakdown },
            Encoding { channel: "angle".into(), field: measures.first().cloned().unwrap_or_else(|| "count".into()) },
        ],
        Base::Scatter if measures.len() == 2 => vec![
            Encoding { channel: "x".into(), field: measures[0].clone() },
            Encoding { channel: "y".into(), field: measures[1].clone() },
        ],
        _ => vec![
            Encoding { channel: "x".into(), field: breakdown },
            Encoding { channel: "y".into(), field: measures.first().cloned().unwrap_or_else(|| "count".into()) },
        ],
    };
    Ok(ChartSpec {
        base,
        fact_type: r.fact.fact_type,
        question: result_question(r),
        encodings,
        data,
        annotations,
        caption: fact_to_caption(r),
        relevance: score,
    })
}

pub const GRID_COLUMNS: u32 = 12;
pub const WIDE: u32 = 6;
pub const NARROW: u32 = 4;
pub const CHART_HEIGHT: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedChart {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub chart: ChartSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub sub_question: String,
    pub charts: Vec<PlacedChart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dashboard {
    pub title: String,
    pub sections: Vec<Section>,
}

impl Dashboard {
    /// Whether reading each section row by row meets charts in non-increasing relevance.
    pub fn reading_order_is_relevance_order(&self) -> bool {
        self.sections.iter().all(|s| {
            let mut placed: Vec<&PlacedChart> = s.charts.iter().collect();
            placed.sort_by_key(|c| (c.y, c.x));
            placed.windows(2).all(|w| w[0].chart.relevance >= w[1].chart.relevance)
        })
    }
}

/// Wide when within 20% of the section's best score, measured on its magnitude.
fn width_for(relevance: f64, best: f64) -> u32 {
    if relevance >= best - 0.2 * best.abs() {
        WIDE
    } else {
        NARROW
    }
}

/// Places each section's charts on a 12-column grid, best first, left to right then down.
pub fn layout(title: &str, sections: Vec<(String, Vec<ChartSpec>)>) -> Dashboard {
    let sections = sections
        .into_iter()
        .map(|(sub_question, mut charts)| {
            charts.sort_by(|a, b| b.relevance.total_cmp(&a.relevance));
            let best = charts.first().map_or(0.0, |c| c.relevance);
            let (mut x, mut y) = (0, 0);
            let placed = charts
                .into_iter()
                .map(|chart| {
                    let w = width_for(chart.relevance, best);
                    if x + w > GRID_COLUMNS {
                        x = 0;
                        y += CHART_HEIGHT;
                    }
                    let p = PlacedChart { x, y, w, h: CHART_HEIGHT, chart };
                    x += w;
                    p
                })
                .collect();
            Section { sub_question, charts: placed }
        })
        .collect();
    Dashboard { title: title.to_string(), sections }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fact::{evaluate_fact, DataFact, Measure, Agg};
    use crate::fixtures;

    fn spec(rel: f64) -> ChartSpec {
        ChartSpec {
            base: Base::Bar,
            fact_type: FactType::Value,
            question: String::new(),
            encodings: vec![],
            data: vec![Datum { key: "all".into(), value: 1.0, x: None }],
            annotations: vec![],
            caption: String::new(),
            relevance: rel,
        }
    }

    #[test]
    fn mapping_examples() {
        assert_eq!(select_chart(FactType::Difference, ColumnType::Categorical),
            (Base::Bar, &[AnnotationKind::DashedDifferenceLine][..]));
        assert_eq!(select_chart(FactType::Trend, ColumnType::Categorical), (Base::Bar, &[AnnotationKind::TrendLine][..]));
        assert_eq!(registered_combinations().len(), 15);
    }

    #[test]
    fn extreme_highlights_winner() {
        let x = fixtures::toy_brands();
        let f = DataFact::new(FactType::Extreme).with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("brand").with_focus(["B"]);
        let c = build_chart(&evaluate_fact(&f, &x).unwrap(), 0.5).unwrap();
        assert_eq!(c.base, Base::Bar);
        assert_eq!(c.annotation_set(), vec![AnnotationKind::HighlightColor, AnnotationKind::Pointer]);
        assert!(c.annotations.iter().all(|a| a.targets == vec!["B".to_string()]));
        assert!(c.caption.contains('B') && c.caption.contains("30"));
        assert!(c.dangling_targets().is_empty());
    }

    #[test]
    fn layout_examples() {
        let d = layout("q", vec![("s".into(), vec![spec(0.4), spec(0.9), spec(0.85)])]);
        let c = &d.sections[0].charts;
        assert_eq!(c.iter().map(|p| p.w).collect::<Vec<_>>(), vec![6, 6, 4]);
        assert_eq!((c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y), (0, 0, 6, 0, 0, 4));
        assert!(d.reading_order_is_relevance_order());

        let one = layout("q", vec![("s".into(), vec![spec(0.3)])]);
        assert_eq!((one.sections[0].charts[0].x, one.sections[0].charts[0].y), (0, 0));
    }

    #[test]
    fn equal_scores_keep_order() {
        let mut a = spec(0.5);
        a.caption = "first".into();
        let mut b = spec(0.5);
        b.caption = "second".into();
        let d = layout("q", vec![("s".into(), vec![a, b])]);
        let c = &d.sections[0].charts;
        assert_eq!(c[0].chart.caption, "first");
        assert_eq!(c[0].w, c[1].w);
    }
}
