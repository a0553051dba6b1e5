use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use super::dataset::Dataset;
use super::schema::ColumnType;
use super::value::Value;
use crate::error::Result;

/// Descriptive statistics over the non-missing cells of one column.
///
/// `mean`, `std`, `min` and `max` are filled for integer, float, boolean and
/// date columns (dates as days since the epoch) and are zero otherwise.
/// `std` is the population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub distinct: BTreeSet<String>,
    pub date_min: Option<NaiveDate>,
    pub date_max: Option<NaiveDate>,
}

impl FeatureStats {
    fn empty() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            std: 0.0,
            min: 0.0,
            max: 0.0,
            distinct: BTreeSet::new(),
            date_min: None,
            date_max: None,
        }
    }

    /// True for an all-missing column.
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

pub fn column_stats(ds: &Dataset, feature: &str) -> Result<FeatureStats> {
    let col = ds.schema().require(feature)?;
    Ok(stats_for_column(ds, col))
}

pub(crate) fn stats_for_column(ds: &Dataset, col: usize) -> FeatureStats {
    let ty = &ds.schema().column(col).ty;
    let present: Vec<&Value> = ds.column_values(col).filter(|v| !v.is_missing()).collect();
    let mut stats = FeatureStats::empty();
    stats.count = present.len();
    if present.is_empty() {
        return stats;
    }
    match ty {
        ColumnType::Categorical(_) | ColumnType::String => {
            stats.distinct = present
                .iter()
                .filter_map(|v| v.as_text().map(str::to_string))
                .collect();
        }
        _ => {
            let numbers: Vec<f64> = present.iter().filter_map(|v| v.as_f64()).collect();
            let (mean, std, min, max) = moments(&numbers);
            stats.mean = mean;
            stats.std = std;
            stats.min = min;
            stats.max = max;
            if let ColumnType::Date = ty {
                let dates = present.iter().filter_map(|v| match v {
                    Value::Date(d) => Some(*d),
                    _ => None,
                });
                stats.date_min = dates.clone().min();
                stats.date_max = dates.max();
            }
            if let ColumnType::Boolean = ty {
                stats.distinct = present.iter().map(|v| v.render()).collect();
            }
        }
    }
    stats
}

/// Mean and population std computed over distinct values weighted by their
/// relative frequency. The result depends only on the multiset's frequency
/// profile, so it is unchanged by row order and by repeating every row k times.
fn moments(values: &[f64]) -> (f64, f64, f64, f64) {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &v in values {
        counts.entry(order_key(v)).or_insert((v, 0)).1 += 1;
    }
    let n = values.len() as f64;
    let weighted: Vec<(f64, f64)> = counts.values().map(|&(v, c)| (v, c as f64 / n)).collect();
    let mean: f64 = weighted.iter().map(|(v, w)| v * w).sum();
    let var: f64 = weighted.iter().map(|(v, w)| (v - mean) * (v - mean) * w).sum();
    let min = weighted.first().map(|p| p.0).unwrap_or(0.0);
    let max = weighted.last().map(|p| p.0).unwrap_or(0.0);
    // Rounding in the weighted sum can push the mean a hair outside the range.
    (mean.clamp(min, max), var.max(0.0).sqrt(), min, max)
}

/// Total-order key for finite floats, with -0.0 and 0.0 treated as one value.
fn order_key(v: f64) -> u64 {
    let v = if v == 0.0 { 0.0 } else { v };
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Column, Schema};

    fn numeric(values: &[i64]) -> Dataset {
        let schema = Schema::new(vec![Column::new("x", ColumnType::Integer)], None).unwrap();
        Dataset::from_rows(schema, values.iter().map(|v| vec![Value::Int(*v)]).collect()).unwrap()
    }

    #[test]
    fn textbook_set() {
        let s = column_stats(&numeric(&[2, 4, 4, 4, 5, 5, 7, 9]), "x").unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.std, 2.0);
        assert_eq!((s.min, s.max), (2.0, 9.0));
    }

    #[test]
    fn single_value() {
        let s = column_stats(&numeric(&[7]), "x").unwrap();
        assert_eq!((s.mean, s.std), (7.0, 0.0));
    }

    #[test]
    fn categorical_distinct() {
        let schema = Schema::new(
            vec![Column::new("c", ColumnType::Categorical(BTreeSet::new()))],
            None,
        )
        .unwrap();
        let rows = ["c", "c", "d"].iter().map(|s| vec![Value::Text(s.to_string())]).collect();
        let s = column_stats(&Dataset::from_rows(schema, rows).unwrap(), "c").unwrap();
        assert_eq!(s.distinct.into_iter().collect::<Vec<_>>(), vec!["c", "d"]);
    }

    #[test]
    fn all_missing_is_empty_marker() {
        let schema = Schema::new(vec![Column::new("x", ColumnType::Float)], None).unwrap();
        let ds = Dataset::from_rows(schema, vec![vec![Value::Missing]; 3]).unwrap();
        assert!(column_stats(&ds, "x").unwrap().is_empty());
    }

    #[test]
    fn unknown_feature() {
        assert!(column_stats(&numeric(&[1]), "nope").is_err());
    }

    #[test]
    fn order_key_is_monotone() {
        let mut xs = [-3.5, -0.0, 0.0, 1e-300, 2.0, -1e300, 7.25];
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let keys: Vec<u64> = xs.iter().map(|v| order_key(*v)).collect();
        assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    }
}
