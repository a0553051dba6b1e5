//! Typed tables: values, schemas, CSV ingestion/emission and column statistics.

mod dataset;
mod schema;
mod stats;
mod value;

pub use dataset::{read_csv, read_csv_from, to_csv_string, write_csv, write_csv_to, Dataset, RowId};
pub use schema::{infer_schema, infer_schema_with_cap, Column, ColumnType, Schema, DEFAULT_DISTINCT_CAP};
pub use stats::{column_stats, FeatureStats};
pub use value::Value;

pub(crate) use stats::stats_for_column;
pub(crate) use value::{date_from_days, days_from_epoch};
