//! Typed columnar tables: CSV ingestion, filtering and grouped aggregation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact::{Agg, Measure};

/// Share of non-empty cells that must parse as a type for the column to take it.
const TYPE_THRESHOLD: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("empty input")]
    EmptyInput,
    #[error("row {row}: expected {expected} cells, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("column '{column}' is {found}, expected {expected}")]
    WrongType { column: String, found: ColumnType, expected: &'static str },
    #[error("bad operand for column '{column}': {message}")]
    Operand { column: String, message: String },
    #[error("column '{0}' appears in more than one filter")]
    RepeatedFilterColumn(String),
    #[error("cannot infer the type of an all-empty column")]
    AllEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Numerical,
    Temporal,
    Categorical,
}

impl ColumnType {
    /// Marker token used in formulated questions.
    pub fn marker(self) -> &'static str {
        match self {
            ColumnType::Numerical => "<N>",
            ColumnType::Temporal => "<T>",
            ColumnType::Categorical => "<C>",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Numerical => "numerical",
            ColumnType::Temporal => "temporal",
            ColumnType::Categorical => "categorical",
        })
    }
}

/// A bare year (`month == 0`) or a calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimePoint {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

impl TimePoint {
    pub fn parse(text: &str) -> Option<TimePoint> {
        let text = text.trim();
        if text.len() == 4 && text.bytes().all(|b| b.is_ascii_digit()) {
            let year: i32 = text.parse().ok()?;
            return (1000..=2999)
                .contains(&year)
                .then_some(TimePoint { year, month: 0, day: 0 });
        }
        let date = NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()?;
        use chrono::Datelike;
        Some(TimePoint { year: date.year(), month: date.month(), day: date.day() })
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.month == 0 {
            write!(f, "{}", self.year)
        } else {
            write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
        }
    }
}

/// Locale-free number parsing: period decimals, optional thousands commas.
pub fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let cleaned: String = if text.contains(',') {
        let (int_part, frac) = match text.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (text, None),
        };
        let digits = int_part.trim_start_matches(['-', '+']);
        let groups: Vec<&str> = digits.split(',').collect();
        let well_formed = !groups[0].is_empty()
            && groups[0].len() <= 3
            && groups[1..].iter().all(|g| g.len() == 3);
        if !well_formed {
            return None;
        }
        let mut s = int_part.replace(',', "");
        if let Some(frac) = frac {
            s.push('.');
            s.push_str(frac);
        }
        s
    } else {
        text.to_string()
    };
    let body = cleaned.trim_start_matches(['-', '+']);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let mut parts = mantissa.splitn(2, '.');
    let int_digits = parts.next().unwrap_or("");
    let frac_digits = parts.next().unwrap_or("");
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if (int_digits.is_empty() && frac_digits.is_empty())
        || !digits_ok(int_digits)
        || !digits_ok(frac_digits)
    {
        return None;
    }
    if let Some(exp) = exponent {
        let exp = exp.trim_start_matches(['-', '+']);
        if exp.is_empty() || !digits_ok(exp) {
            return None;
        }
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Assigns a column type from raw cell text.
///
/// Temporal wins when at least 95% of the non-empty cells are ISO dates or 4-digit years in
/// [1000, 2999]; otherwise Numerical at the same threshold; otherwise Categorical.
pub fn infer_column_type<S: AsRef<str>>(values: &[S]) -> Result<ColumnType, TableError> {
    let non_empty: Vec<&str> = values
        .iter()
        .map(|v| v.as_ref().trim())
        .filter(|v| !v.is_empty())
        .collect();
    if non_empty.is_empty() {
        return Err(TableError::AllEmpty);
    }
    let n = non_empty.len() as f64;
    let temporal = non_empty.iter().filter(|v| TimePoint::parse(v).is_some()).count();
    if temporal as f64 >= TYPE_THRESHOLD * n {
        return Ok(ColumnType::Temporal);
    }
    let numeric = non_empty.iter().filter(|v| parse_number(v).is_some()).count();
    if numeric as f64 >= TYPE_THRESHOLD * n {
        return Ok(ColumnType::Numerical);
    }
    Ok(ColumnType::Categorical)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numerical(Vec<Option<f64>>),
    Temporal(Vec<Option<TimePoint>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Numerical(v) => v.len(),
            ColumnData::Temporal(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn kind(&self) -> ColumnType {
        match self.data {
            ColumnData::Numerical(_) => ColumnType::Numerical,
            ColumnData::Temporal(_) => ColumnType::Temporal,
            ColumnData::Categorical(_) => ColumnType::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Group key of a row, or `None` for nulls and numerical columns.
    pub fn key(&self, row: usize) -> Option<GroupKey> {
        match &self.data {
            ColumnData::Temporal(v) => v[row].map(GroupKey::Time),
            ColumnData::Categorical(v) => v[row].clone().map(GroupKey::Text),
            ColumnData::Numerical(_) => None,
        }
    }

    pub fn number(&self, row: usize) -> Option<f64> {
        match &self.data {
            ColumnData::Numerical(v) => v[row],
            _ => None,
        }
    }

    /// Distinct non-null keys in sorted order (chronological or lexicographic).
    pub fn distinct_keys(&self) -> Vec<GroupKey> {
        let mut keys: Vec<GroupKey> = (0..self.len()).filter_map(|r| self.key(r)).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    pub fn cardinality(&self) -> usize {
        self.distinct_keys().len()
    }
}

/// Grouping key; temporal keys sort chronologically, text keys lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    Time(TimePoint),
    Text(String),
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::Time(t) => t.fmt(f),
            GroupKey::Text(s) => f.write_str(s),
        }
    }
}

/// One aggregated group. `key` is `"all"` when there is no breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub key: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ColumnRef<'a> {
    pub name: &'a str,
    pub kind: ColumnType,
}

/// Schema summary emitted over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<SchemaColumn>,
    pub row_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub name: String,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { name: "table".into(), delimiter: b',', has_header: true }
    }
}

impl LoadOptions {
    pub fn named(name: impl Into<String>) -> Self {
        LoadOptions { name: name.into(), ..Default::default() }
    }
}

/// Rectangular, immutable, typed table.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    name: String,
    columns: Vec<Column>,
    row_count: usize,
}

fn fold_name(name: &str) -> String {
    name.trim().to_lowercase()
}

impl DataTable {
    /// Builds a table from already-typed columns.
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<DataTable, TableError> {
        let row_count = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for (i, col) in columns.iter().enumerate() {
            if !seen.insert(fold_name(&col.name)) {
                return Err(TableError::DuplicateColumn(col.name.clone()));
            }
            if col.len() != row_count {
                return Err(TableError::Ragged { row: i, expected: row_count, found: col.len() });
            }
        }
        Ok(DataTable { name: name.into(), columns, row_count })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    /// Case- and whitespace-insensitive lookup.
    pub fn column(&self, name: &str) -> Option<&Column> {
        let key = fold_name(name);
        self.columns.iter().find(|c| fold_name(&c.name) == key)
    }

    pub fn require(&self, name: &str) -> Result<&Column, TableError> {
        self.column(name).ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn columns_of(&self, kind: ColumnType) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(move |c| c.kind() == kind)
    }

    pub fn schema(&self) -> TableSchema {
        TableSchema {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| SchemaColumn { name: c.name.clone(), kind: c.kind() })
                .collect(),
            row_count: self.row_count,
        }
    }

    /// Writes the table back out as canonical CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let _ = w.write_record(self.columns.iter().map(|c| c.name.as_str()));
        for row in 0..self.row_count {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|c| match &c.data {
                    ColumnData::Numerical(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
                    ColumnData::Temporal(v) => v[row].map(|t| t.to_string()).unwrap_or_default(),
                    ColumnData::Categorical(v) => v[row].clone().unwrap_or_default(),
                })
                .collect();
            let _ = w.write_record(&cells);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// Parses CSV bytes (RFC-4180 quoting) into a typed table.
///
/// Row indices in errors are 1-based data rows (the header is row 0).
pub fn load_table(bytes: &[u8], options: &LoadOptions) -> Result<DataTable, TableError> {
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(TableError::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();
    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    let header: Vec<String> = if options.has_header {
        match records.next() {
            Some(Ok(rec)) => rec.iter().map(|s| s.trim().to_string()).collect(),
            Some(Err(e)) => return Err(TableError::Csv { row: 0, message: e.to_string() }),
            None => return Err(TableError::EmptyInput),
        }
    } else {
        Vec::new()
    };
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| TableError::Csv { row, message: e.to_string() })?;
        raw_rows.push(rec.iter().map(str::to_string).collect());
    }
    let header = if options.has_header {
        header
    } else {
        let width = raw_rows.first().map_or(0, Vec::len);
        (1..=width).map(|i| format!("column{i}")).collect()
    };
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(TableError::EmptyInput);
    }
    for (i, row) in raw_rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(TableError::Ragged { row: i + 1, expected: header.len(), found: row.len() });
        }
    }
    let mut columns = Vec::with_capacity(header.len());
    for (c, name) in header.iter().enumerate() {
        let cells: Vec<&str> = raw_rows.iter().map(|r| r[c].trim()).collect();
        // All-empty (or zero-row) columns carry no type evidence; treat them as categorical.
        let kind = infer_column_type(&cells).unwrap_or(ColumnType::Categorical);
        let data = match kind {
            ColumnType::Numerical => ColumnData::Numerical(cells.iter().map(|s| parse_number(s)).collect()),
            ColumnType::Temporal => ColumnData::Temporal(cells.iter().map(|s| TimePoint::parse(s)).collect()),
            ColumnType::Categorical => ColumnData::Categorical(
                cells
                    .iter()
                    .map(|s| (!s.is_empty()).then(|| s.to_string()))
                    .collect(),
            ),
        };
        columns.push(Column { name: name.clone(), data });
    }
    DataTable::new(options.name.clone(), columns)
}

/// A single predicate over one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "kebab-case")]
pub enum Predicate {
    Equals(String),
    InSet(Vec<String>),
    NumericRange(f64, f64),
    TemporalRange(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    #[serde(flatten)]
    pub predicate: Predicate,
}

impl Filter {
    pub fn equals(column: impl Into<String>, value: impl Into<String>) -> Filter {
        Filter { column: column.into(), predicate: Predicate::Equals(value.into()) }
    }

    /// Human-readable scope, e.g. `Fiction` or `year from 2010 to 2012`.
    pub fn describe(&self) -> String {
        match &self.predicate {
            Predicate::Equals(v) => v.clone(),
            Predicate::InSet(vs) => vs.join(" or "),
            Predicate::NumericRange(lo, hi) => format!("{} from {} to {}", self.column, lo, hi),
            Predicate::TemporalRange(lo, hi) => format!("{} from {} to {}", self.column, lo, hi),
        }
    }
}

enum Compiled {
    Text(HashSet<String>),
    Time(TimePoint, TimePoint),
    TimeSet(HashSet<TimePoint>),
    Number(f64, f64),
}

fn compile(filter: &Filter, column: &Column) -> Result<Compiled, TableError> {
    let bad = |message: &str| TableError::Operand {
        column: filter.column.clone(),
        message: message.to_string(),
    };
    let time = |s: &str| TimePoint::parse(s).ok_or_else(|| bad("expected a year or ISO date"));
    let number = |s: &str| parse_number(s).ok_or_else(|| bad("expected a number"));
    Ok(match (&filter.predicate, column.kind()) {
        (Predicate::Equals(v), ColumnType::Categorical) => Compiled::Text([v.clone()].into()),
        (Predicate::InSet(vs), ColumnType::Categorical) => Compiled::Text(vs.iter().cloned().collect()),
        (Predicate::Equals(v), ColumnType::Temporal) => Compiled::TimeSet([time(v)?].into()),
        (Predicate::InSet(vs), ColumnType::Temporal) => {
            Compiled::TimeSet(vs.iter().map(|v| time(v)).collect::<Result<_, _>>()?)
        }
        (Predicate::Equals(v), ColumnType::Numerical) => {
            let x = number(v)?;
            Compiled::Number(x, x)
        }
        (Predicate::NumericRange(lo, hi), ColumnType::Numerical) => Compiled::Number(*lo, *hi),
        (Predicate::TemporalRange(lo, hi), ColumnType::Temporal) => Compiled::Time(time(lo)?, time(hi)?),
        (Predicate::InSet(_), ColumnType::Numerical) => return Err(bad("in-set needs a temporal or categorical column")),
        (Predicate::NumericRange(..), _) => return Err(bad("numeric-range needs a numerical column")),
        (Predicate::TemporalRange(..), _) => return Err(bad("temporal-range needs a temporal column")),
    })
}

fn matches(compiled: &Compiled, column: &Column, row: usize) -> bool {
    match (compiled, &column.data) {
        (Compiled::Text(set), ColumnData::Categorical(v)) => v[row].as_ref().is_some_and(|s| set.contains(s)),
        (Compiled::TimeSet(set), ColumnData::Temporal(v)) => v[row].is_some_and(|t| set.contains(&t)),
        (Compiled::Time(lo, hi), ColumnData::Temporal(v)) => v[row].is_some_and(|t| *lo <= t && t <= *hi),
        (Compiled::Number(lo, hi), ColumnData::Numerical(v)) => v[row].is_some_and(|x| *lo <= x && x <= *hi),
        _ => false,
    }
}

/// Conjunction of filters; empty means the whole table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subspace {
    pub filters: Vec<Filter>,
}

impl Subspace {
    pub fn all() -> Subspace {
        Subspace::default()
    }

    pub fn of(filters: Vec<Filter>) -> Subspace {
        Subspace { filters }
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn validate(&self, table: &DataTable) -> Result<(), TableError> {
        let mut seen = HashSet::new();
        for f in &self.filters {
            let column = table.require(&f.column)?;
            if !seen.insert(fold_name(&column.name)) {
                return Err(TableError::RepeatedFilterColumn(column.name.clone()));
            }
            compile(f, column)?;
        }
        Ok(())
    }
}

/// Row indices (ascending) satisfying every filter of the subspace.
pub fn apply_subspace(table: &DataTable, subspace: &Subspace) -> Result<Vec<usize>, TableError> {
    subspace.validate(table)?;
    let compiled: Vec<(&Column, Compiled)> = subspace
        .filters
        .iter()
        .map(|f| {
            let col = table.require(&f.column)?;
            Ok((col, compile(f, col)?))
        })
        .collect::<Result<_, TableError>>()?;
    Ok((0..table.row_count())
        .filter(|&r| compiled.iter().all(|(col, c)| matches(c, col, r)))
        .collect())
}

#[derive(Default)]
struct Accumulator {
    rows: usize,
    count: usize,
    sum: f64,
    min: f64,
    max: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.count += 1;
        self.sum += x;
    }

    fn finish(&self, agg: Option<Agg>) -> Option<f64> {
        match agg {
            None => Some(self.rows as f64),
            Some(Agg::Count) => Some(self.count as f64),
            Some(Agg::Sum) => Some(self.sum),
            Some(_) if self.count == 0 => None,
            Some(Agg::Mean) => Some(self.sum / self.count as f64),
            Some(Agg::Min) => Some(self.min),
            Some(Agg::Max) => Some(self.max),
        }
    }
}

/// Groups the subspace rows by `breakdown` and aggregates `measure` per group.
///
/// Without a breakdown there is one group keyed `"all"`; without a measure the value is the row
/// count. Null breakdown cells are skipped; null measure cells are left out of the aggregate.
/// Mean, min and max of a group with no measure values leave that group out.
pub fn group_and_aggregate(
    table: &DataTable,
    subspace: &Subspace,
    breakdown: Option<&str>,
    measure: Option<&Measure>,
) -> Result<Vec<Group>, TableError> {
    let rows = apply_subspace(table, subspace)?;
    let breakdown_col = match breakdown {
        Some(name) => {
            let col = table.require(name)?;
            if col.kind() == ColumnType::Numerical {
                return Err(TableError::WrongType {
                    column: col.name.clone(),
                    found: col.kind(),
                    expected: "temporal or categorical",
                });
            }
            Some(col)
        }
        None => None,
    };
    let measure_col = match measure {
        Some(m) => {
            let col = table.require(&m.column)?;
            if col.kind() != ColumnType::Numerical {
                return Err(TableError::WrongType {
                    column: col.name.clone(),
                    found: col.kind(),
                    expected: "numerical",
                });
            }
            Some(col)
        }
        None => None,
    };
    let agg = measure.map(|m| m.agg);
    let mut groups: BTreeMap<GroupKey, Accumulator> = BTreeMap::new();
    if breakdown_col.is_none() && rows.is_empty() {
        return Ok(Accumulator::default()
            .finish(agg)
            .map(|value| vec![Group { key: "all".into(), value }])
            .unwrap_or_default());
    }
    for &r in &rows {
        let key = match breakdown_col {
            Some(col) => match col.key(r) {
                Some(k) => k,
                None => continue,
            },
            None => GroupKey::Text("all".into()),
        };
        let acc = groups.entry(key).or_default();
        acc.rows += 1;
        if let Some(col) = measure_col {
            if let Some(x) = col.number(r) {
                acc.push(x);
            }
        }
    }
    Ok(groups
        .into_iter()
        .filter_map(|(k, acc)| acc.finish(agg).map(|value| Group { key: k.to_string(), value }))
        .collect())
}

/// Compares two group keys of the same column the way [`Column::distinct_keys`] orders them.
pub fn compare_keys(column: &Column, a: &str, b: &str) -> Ordering {
    match column.kind() {
        ColumnType::Temporal => TimePoint::parse(a).cmp(&TimePoint::parse(b)),
        _ => a.cmp(b),
    }
}
