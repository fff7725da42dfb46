//! Template rendering of facts into questions and captions.
//!
//! Questions are lowercase apart from cell values; partial facts render from whatever fields are
//! filled, which is what the search ranks against the user's question.

use thiserror::Error;

use crate::fact::{
    required_fields, Agg, DataFact, Derived, Direction, FactResult, FactType, FocusRule, Measure,
};
use crate::table::Subspace;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("no template for {fact_type} with fields {fields}")]
pub struct TemplateError {
    pub fact_type: FactType,
    pub fields: String,
}

/// At most two decimals, thousands separators, trailing zeros trimmed.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded = (v * 100.0).round() / 100.0;
    let negative = rounded < 0.0;
    let text = format!("{:.2}", rounded.abs());
    let (int_part, frac) = text.split_once('.').unwrap_or((&text, ""));
    let mut grouped = String::new();
    for (i, ch) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    let frac = frac.trim_end_matches('0');
    let mut out = String::new();
    if negative && (grouped != "0" || !frac.is_empty()) {
        out.push('-');
    }
    out.push_str(&grouped);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    out
}

pub fn percent(share: f64) -> String {
    format!("{}%", format_number(share * 100.0))
}

/// Noun phrase for a measure, e.g. `sales`, `average price`.
pub fn measure_phrase(m: &Measure) -> String {
    let col = m.column.to_lowercase();
    match m.agg {
        Agg::Sum => col,
        Agg::Mean => format!("average {col}"),
        Agg::Count => format!("number of {col}"),
        Agg::Min => format!("minimum {col}"),
        Agg::Max => format!("maximum {col}"),
    }
}

pub fn plural(word: &str) -> String {
    let lower = word.to_lowercase();
    let (head, last) = match lower.rsplit_once(' ') {
        Some((h, l)) => (format!("{h} "), l.to_string()),
        None => (String::new(), lower.clone()),
    };
    let pl = if last.ends_with('y') && !last.ends_with("ay") && !last.ends_with("ey") && !last.ends_with("oy") {
        format!("{}ies", &last[..last.len() - 1])
    } else if last.ends_with('s') || last.ends_with('x') || last.ends_with("ch") || last.ends_with("sh") {
        if last.ends_with("ss") || !last.ends_with('s') {
            format!("{last}es")
        } else {
            last.clone()
        }
    } else {
        format!("{last}s")
    };
    format!("{head}{pl}")
}

fn scope_prefix(s: &Subspace) -> String {
    if s.is_empty() {
        String::new()
    } else {
        let parts: Vec<String> = s.filters.iter().map(|f| f.describe()).collect();
        format!("in {}, ", parts.join(" and "))
    }
}

fn fields_of(f: &DataFact) -> String {
    format!(
        "breakdown={} measures={} focus={}",
        f.breakdown.is_some(),
        f.measure.len(),
        f.focus.len()
    )
}

/// Renders a fact as a question.
///
/// With `allow_partial` unset, every field required by the type must be filled. Extreme facts
/// always read "highest"; [`result_question`] words them from the evaluated data instead.
pub fn fact_to_question(f: &DataFact, allow_partial: bool) -> Result<String, TemplateError> {
    render_question(f, allow_partial, false)
}

/// Question for an evaluated fact, choosing "highest" or "lowest" for extremes from the data.
pub fn result_question(r: &FactResult) -> String {
    let lowest = matches!(r.derived, Derived::Extreme { highest: false, .. });
    render_question(&r.fact, true, lowest).unwrap_or_default()
}

pub(crate) fn render_question(f: &DataFact, allow_partial: bool, lowest: bool) -> Result<String, TemplateError> {
    let err = || TemplateError { fact_type: f.fact_type, fields: fields_of(f) };
    let mask = required_fields(f.fact_type);
    if !allow_partial {
        let complete = f.measure.len() == mask.measures
            && (f.breakdown.is_some() || !mask.breakdown.required())
            && match mask.focus {
                FocusRule::None => f.focus.is_empty(),
                FocusRule::Exactly(n) => f.focus.len() == n,
                FocusRule::AtLeastOne => !f.focus.is_empty(),
            };
        if !complete {
            return Err(err());
        }
    }
    let m = f.measure.first().map(measure_phrase);
    let bd = f.breakdown.as_deref().map(str::to_lowercase);
    let body = match f.fact_type {
        FactType::Value => match f.measure.first() {
            Some(me) if me.agg == Agg::Sum => format!("what is the total {}?", measure_phrase(me)),
            Some(me) => format!("what is the overall {}?", measure_phrase(me)),
            None => "what is the overall value?".to_string(),
        },
        FactType::Difference => {
            let m = m.unwrap_or_else(|| "value".into());
            match (&bd, f.focus.as_slice()) {
                (_, [a, b]) => format!("what is the difference in {m} between {a} and {b}?"),
                (Some(bd), _) => format!("what are the differences in {m} between each {bd}?"),
                (None, _) => format!("what are the differences in {m}?"),
            }
        }
        FactType::Proportion => {
            let m = m.unwrap_or_else(|| "value".into());
            match (&bd, f.focus.first()) {
                (_, Some(a)) => format!("what proportion of {m} does {a} account for?"),
                (Some(bd), None) => format!("what is the proportion of {m} for each {bd}?"),
                (None, None) => format!("what is the proportion of {m}?"),
            }
        }
        FactType::Trend => match (&m, &bd) {
            (Some(m), Some(bd)) => format!("what is the trend of {m} over {bd}?"),
            (Some(m), None) => format!("what is the trend of {m}?"),
            (None, Some(bd)) => format!("what is the trend over {bd}?"),
            (None, None) => "what is the trend?".to_string(),
        },
        FactType::Categorization => match &bd {
            Some(bd) => format!("what are the categories of {bd}?"),
            None => "what are the categories?".to_string(),
        },
        FactType::Distribution => match (&m, &bd) {
            (Some(m), Some(bd)) => format!("what is the overall distribution of {m} over {bd}?"),
            (Some(m), None) => format!("what is the overall distribution of {m}?"),
            (None, Some(bd)) => format!("what is the overall distribution over {bd}?"),
            (None, None) => "what is the overall distribution?".to_string(),
        },
        FactType::Rank => match (&m, &bd) {
            (Some(m), Some(bd)) => format!("what is the order of {m} for each {bd}?"),
            (Some(m), None) => format!("what is the order of {m}?"),
            (None, Some(bd)) => format!("what is the order for each {bd}?"),
            (None, None) => "what is the order?".to_string(),
        },
        FactType::Association => {
            let over = bd.as_ref().map(|b| format!(" over {b}")).unwrap_or_default();
            match f.measure.as_slice() {
                [a, b] => format!(
                    "what is the relationship between {} and {}{over}?",
                    measure_phrase(a),
                    measure_phrase(b)
                ),
                [a] => format!("what is the relationship with {}{over}?", measure_phrase(a)),
                _ => format!("what is the relationship{over}?"),
            }
        }
        FactType::Extreme => {
            let side = if lowest { "lowest" } else { "highest" };
            let m = m.unwrap_or_else(|| "value".into());
            let bd = bd.unwrap_or_else(|| "category".into());
            format!("which {bd} has the {side} {m}?")
        }
        FactType::Outlier => match (&m, &bd) {
            (Some(m), Some(bd)) => format!("which {bd} has an anomaly {m}?"),
            (Some(m), None) => format!("what is the outlier of {m}?"),
            (None, Some(bd)) => format!("which {bd} is an outlier?"),
            (None, None) => "what is the outlier?".to_string(),
        },
    };
    Ok(format!("{}{}", scope_prefix(&f.subspace), body))
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn list(items: &[String], limit: usize) -> String {
    let shown: Vec<&str> = items.iter().take(limit).map(String::as_str).collect();
    let mut text = match shown.as_slice() {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] if items.len() <= limit => format!("{} and {last}", init.join(", ")),
        _ => shown.join(", "),
    };
    if items.len() > limit {
        text.push_str(&format!(" and {} more", items.len() - limit));
    }
    text
}

/// One-sentence caption embedding the computed values.
pub fn fact_to_caption(r: &FactResult) -> String {
    let f = &r.fact;
    let m = f.measure.first().map(measure_phrase).unwrap_or_else(|| "records".into());
    let bd = f.breakdown.as_deref().map(str::to_lowercase).unwrap_or_else(|| "category".into());
    let n = format_number;
    let body = match &r.derived {
        Derived::Value { value } => match f.measure.first() {
            Some(me) if me.agg == Agg::Sum => format!("the total {m} is {}.", n(*value)),
            _ => format!("the overall {m} is {}.", n(*value)),
        },
        Derived::Difference { a, b, value_a, value_b, gap } => {
            let rel = if *gap >= 0.0 { "higher" } else { "lower" };
            format!(
                "the {m} of {a} ({}) is {rel} than {b} ({}) by {}.",
                n(*value_a),
                n(*value_b),
                n(gap.abs())
            )
        }
        Derived::Proportion { item, share, .. } => {
            format!("{item} accounts for {} of the total {m}.", percent(*share))
        }
        Derived::Trend { direction, .. } => match direction {
            Direction::Increasing => format!("the {m} shows an increasing trend over {bd}."),
            Direction::Decreasing => format!("the {m} shows a decreasing trend over {bd}."),
            Direction::Flat => format!("the {m} shows no clear trend over {bd}."),
        },
        Derived::Categorization { categories } => {
            let names: Vec<String> = categories.iter().map(|g| g.key.clone()).collect();
            format!("there are {} {}: {}.", names.len(), plural(&bd), list(&names, 5))
        }
        Derived::Distribution { min, max, .. } => format!(
            "the {m} over {bd} ranges from {} ({}) to {} ({}).",
            n(min.value),
            min.key,
            n(max.value),
            max.key
        ),
        Derived::Rank { order } => {
            let shown: Vec<&str> = order.iter().take(5).map(String::as_str).collect();
            let more = if order.len() > 5 { ", ..." } else { "" };
            format!("ranked by {m}, the order of {} is {}{more}.", plural(&bd), shown.join(" > "))
        }
        Derived::Association { correlation, .. } => {
            let m2 = f.measure.get(1).map(measure_phrase).unwrap_or_default();
            let sign = if *correlation > 0.0 {
                "positive"
            } else if *correlation < 0.0 {
                "negative"
            } else {
                "no"
            };
            format!("{m} and {m2} show a {sign} correlation ({}).", n(*correlation))
                .replace("a no correlation", "no correlation")
        }
        Derived::Extreme { item, value, highest } => {
            let side = if *highest { "highest" } else { "lowest" };
            format!("{item} has the {side} {m} ({}) among all {}.", n(*value), plural(&bd))
        }
        Derived::Outlier { items } => {
            let verb = if items.len() == 1 { "is an outlier" } else { "are outliers" };
            format!("{} {verb} in {m} across {}.", list(items, 5), plural(&bd))
        }
    };
    let prefix = scope_prefix(&f.subspace);
    capitalize(&format!("{prefix}{body}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fact::evaluate_fact;
    use crate::fixtures;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(1234.0), "1,234");
        assert_eq!(format_number(1234567.891), "1,234,567.89");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(-1000.0), "-1,000");
        assert_eq!(format_number(-0.001), "0");
        assert_eq!(format_number(30.0), "30");
    }

    #[test]
    fn plurals() {
        assert_eq!(plural("brand"), "brands");
        assert_eq!(plural("city"), "cities");
        assert_eq!(plural("day"), "days");
        assert_eq!(plural("class"), "classes");
        assert_eq!(plural("sales"), "sales");
        assert_eq!(plural("book title"), "book titles");
    }

    #[test]
    fn golden_questions() {
        let trend = DataFact::new(FactType::Trend)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("year");
        assert_eq!(fact_to_question(&trend, false).unwrap(), "what is the trend of sales over year?");
        let ext = DataFact::new(FactType::Extreme)
            .with_measure(Measure::new("reviews", Agg::Sum))
            .with_breakdown("year")
            .with_focus(["2014"]);
        assert_eq!(fact_to_question(&ext, false).unwrap(), "which year has the highest reviews?");
        let dist = DataFact::new(FactType::Distribution)
            .with_measure(Measure::new("price", Agg::Mean))
            .with_breakdown("genre");
        assert_eq!(
            fact_to_question(&dist, false).unwrap(),
            "what is the overall distribution of average price over genre?"
        );
    }

    #[test]
    fn incomplete_fact_without_partial_is_an_error() {
        let f = DataFact::new(FactType::Trend).with_measure(Measure::new("sales", Agg::Sum));
        assert!(fact_to_question(&f, false).is_err());
        assert_eq!(fact_to_question(&f, true).unwrap(), "what is the trend of sales?");
    }

    #[test]
    fn golden_captions() {
        let toy = fixtures::toy_brands();
        let ext = DataFact::new(FactType::Extreme)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("brand")
            .with_focus(["B"]);
        let r = evaluate_fact(&ext, &toy).unwrap();
        assert_eq!(fact_to_caption(&r), "B has the highest sales (30) among all brands.");
        let val = DataFact::new(FactType::Value).with_measure(Measure::new("sales", Agg::Sum));
        assert_eq!(fact_to_caption(&evaluate_fact(&val, &toy).unwrap()), "The total sales is 60.");
        let trend = DataFact::new(FactType::Trend)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("year");
        assert_eq!(
            fact_to_caption(&evaluate_fact(&trend, &toy).unwrap()),
            "The sales shows an increasing trend over year."
        );
    }

    #[test]
    fn lowest_extreme_is_worded_from_data() {
        let toy = fixtures::toy_brands();
        let f = DataFact::new(FactType::Extreme)
            .with_measure(Measure::new("sales", Agg::Sum))
            .with_breakdown("brand")
            .with_focus(["A"]);
        let r = evaluate_fact(&f, &toy).unwrap();
        assert_eq!(result_question(&r), "which brand has the lowest sales?");
    }
}
