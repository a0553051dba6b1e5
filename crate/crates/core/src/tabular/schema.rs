use std::collections::{BTreeSet, HashSet};
use std::fmt;

use chrono::NaiveDate;

use super::value::{Value, DATE_FORMAT};
use crate::error::{Error, Result};

/// Default number of distinct values up to which a text column is categorical.
pub const DEFAULT_DISTINCT_CAP: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnType {
    Integer,
    Float,
    Boolean,
    /// Low-cardinality text; carries the observed value domain.
    Categorical(BTreeSet<String>),
    String,
    Date,
}

impl ColumnType {
    pub fn name(&self) -> &'static str {
        match self {
            ColumnType::Integer => "integer",
            ColumnType::Float => "float",
            ColumnType::Boolean => "boolean",
            ColumnType::Categorical(_) => "categorical",
            ColumnType::String => "string",
            ColumnType::Date => "date",
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnType::Integer | ColumnType::Float)
    }

    pub fn is_text(&self) -> bool {
        matches!(self, ColumnType::Categorical(_) | ColumnType::String)
    }

    /// Parses one raw CSV field. Empty fields are `Missing` for every type.
    pub fn parse(&self, raw: &str) -> Option<Value> {
        if raw.is_empty() {
            return Some(Value::Missing);
        }
        match self {
            ColumnType::Integer => parse_int(raw).map(Value::Int),
            ColumnType::Float => parse_float(raw).map(Value::Float),
            ColumnType::Boolean => parse_bool(raw).map(Value::Bool),
            ColumnType::Date => parse_date(raw).map(Value::Date),
            ColumnType::Categorical(_) | ColumnType::String => Some(Value::Text(raw.to_string())),
        }
    }

    /// Whether `value` may be stored in a column of this type.
    pub fn admits(&self, value: &Value) -> bool {
        matches!(
            (self, value),
            (_, Value::Missing)
                | (ColumnType::Integer, Value::Int(_))
                | (ColumnType::Float, Value::Float(_))
                | (ColumnType::Boolean, Value::Bool(_))
                | (ColumnType::Date, Value::Date(_))
                | (ColumnType::Categorical(_), Value::Text(_))
                | (ColumnType::String, Value::Text(_))
        )
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Categorical(domain) => write!(f, "categorical({})", domain.len()),
            other => f.write_str(other.name()),
        }
    }
}

pub(crate) fn parse_int(raw: &str) -> Option<i64> {
    raw.parse().ok()
}

pub(crate) fn parse_float(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub(crate) fn parse_bool(raw: &str) -> Option<bool> {
    if raw.eq_ignore_ascii_case("true") {
        Some(true)
    } else if raw.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

pub(crate) fn parse_date(raw: &str) -> Option<NaiveDate> {
    // chrono accepts unpadded fields; require the strict 10-character form.
    if raw.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(raw, DATE_FORMAT).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Self {
            name: name.into(),
            ty,
        }
    }
}

/// Ordered column list plus an optional target column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
    target: Option<String>,
}

impl Schema {
    pub fn new(columns: Vec<Column>, target: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", c.name)));
            }
        }
        let schema = Self {
            columns,
            target: None,
        };
        schema.with_target(target)
    }

    pub fn with_target(mut self, target: Option<String>) -> Result<Self> {
        if let Some(t) = &target {
            if self.index_of(t).is_none() {
                return Err(Error::Schema(format!("target column '{t}' does not exist")));
            }
        }
        self.target = target;
        Ok(self)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn target_index(&self) -> Option<usize> {
        self.target.as_deref().and_then(|t| self.index_of(t))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Names of every column except the target.
    pub fn feature_names(&self) -> Vec<&str> {
        self.names()
            .filter(|n| Some(*n) != self.target.as_deref())
            .collect()
    }

    pub(crate) fn columns_mut(&mut self) -> &mut Vec<Column> {
        &mut self.columns
    }
}

/// Assigns each column the narrowest type that parses every non-empty value,
/// trying boolean, integer, float, ISO date, categorical (at most
/// `distinct_cap` distinct values) and finally string.
pub fn infer_schema_with_cap(
    raw_rows: &[Vec<String>],
    header: &[String],
    distinct_cap: usize,
) -> Result<Schema> {
    for (row, fields) in raw_rows.iter().enumerate() {
        if fields.len() != header.len() {
            return Err(Error::Structural {
                row,
                expected: header.len(),
                found: fields.len(),
            });
        }
    }
    let columns = header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values = raw_rows
                .iter()
                .map(|r| r[j].as_str())
                .filter(|v| !v.is_empty());
            Column::new(name.clone(), infer_column(values, distinct_cap))
        })
        .collect();
    Schema::new(columns, None)
}

pub fn infer_schema(raw_rows: &[Vec<String>], header: &[String]) -> Result<Schema> {
    infer_schema_with_cap(raw_rows, header, DEFAULT_DISTINCT_CAP)
}

fn infer_column<'a>(values: impl Iterator<Item = &'a str> + Clone, distinct_cap: usize) -> ColumnType {
    if values.clone().next().is_none() {
        return ColumnType::String;
    }
    if values.clone().all(|v| parse_bool(v).is_some()) {
        return ColumnType::Boolean;
    }
    if values.clone().all(|v| parse_int(v).is_some()) {
        return ColumnType::Integer;
    }
    if values.clone().all(|v| parse_float(v).is_some()) {
        return ColumnType::Float;
    }
    if values.clone().all(|v| parse_date(v).is_some()) {
        return ColumnType::Date;
    }
    let mut domain = BTreeSet::new();
    for v in values {
        domain.insert(v.to_string());
        if domain.len() > distinct_cap {
            return ColumnType::String;
        }
    }
    ColumnType::Categorical(domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[&str]) -> ColumnType {
        let rows: Vec<Vec<String>> = values.iter().map(|v| vec![v.to_string()]).collect();
        infer_schema(&rows, &["c".to_string()]).unwrap().columns[0]
            .ty
            .clone()
    }

    #[test]
    fn ladder() {
        assert_eq!(col(&["1", "2", "3"]), ColumnType::Integer);
        assert_eq!(col(&["1.5", "2"]), ColumnType::Float);
        assert_eq!(col(&["true", "FALSE", ""]), ColumnType::Boolean);
        assert_eq!(col(&["2024-01-31", "1999-12-01"]), ColumnType::Date);
        assert_eq!(
            col(&["Y", "N", "Y"]),
            ColumnType::Categorical(["N", "Y"].iter().map(|s| s.to_string()).collect())
        );
        assert_eq!(col(&["", ""]), ColumnType::String);
        assert_eq!(col(&["1", "NaN"]), ColumnType::Categorical(["1", "NaN"].iter().map(|s| s.to_string()).collect()));
    }

    #[test]
    fn distinct_cap_separates_strings() {
        let values: Vec<String> = (0..51).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = values.iter().map(|s| s.as_str()).collect();
        assert_eq!(col(&refs), ColumnType::String);
        assert!(matches!(col(&refs[..50]), ColumnType::Categorical(d) if d.len() == 50));
    }

    #[test]
    fn ragged_rows_report_index() {
        let rows = vec![vec!["1".to_string(), "2".to_string()], vec!["3".to_string()]];
        let err = infer_schema(&rows, &["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, Error::Structural { row: 1, expected: 2, found: 1 }));
    }

    #[test]
    fn schema_rejects_duplicates_and_bad_target() {
        let cols = vec![
            Column::new("a", ColumnType::Integer),
            Column::new("a", ColumnType::Float),
        ];
        assert!(Schema::new(cols, None).is_err());
        let cols = vec![Column::new("a", ColumnType::Integer)];
        assert!(Schema::new(cols, Some("b".into())).is_err());
    }

    #[test]
    fn loose_dates_are_not_dates() {
        assert!(parse_date("2024-1-5").is_none());
        assert!(parse_date("2024-01-05").is_some());
    }
}
