use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Number, Value as Json};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::error_model::ErrorKind;
use crate::tabular::{ColumnType, Dataset, RowId, Schema, Value};

const FORMAT: &str = "taintlab-manifest/1";

/// What one record changed.
#[derive(Debug, Clone, PartialEq)]
pub enum Change {
    Cell {
        column: String,
        original: Value,
        corrupted: Value,
    },
    /// `row_id` of the owning record is a fresh row copied from `parent`.
    RowCopy { parent: RowId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionRecord {
    pub row_id: RowId,
    pub kind: ErrorKind,
    pub change: Change,
    /// Fingerprint of the error model that produced the record.
    pub model: String,
}

impl CorruptionRecord {
    pub fn column(&self) -> Option<&str> {
        match &self.change {
            Change::Cell { column, .. } => Some(column),
            Change::RowCopy { .. } => None,
        }
    }

    fn to_json(&self) -> Json {
        let (column, original, corrupted, parent) = match &self.change {
            Change::Cell {
                column,
                original,
                corrupted,
            } => (Json::from(column.as_str()), value_to_json(original), value_to_json(corrupted), Json::Null),
            Change::RowCopy { parent } => ("*".into(), (*parent).into(), self.row_id.into(), (*parent).into()),
        };
        json!({
            "row_id": self.row_id,
            "column": column,
            "kind": self.kind.as_str(),
            "original": original,
            "corrupted": corrupted,
            "parent": parent,
            "model": self.model,
        })
    }

    fn from_json(v: &Json, schema: &Schema, line: usize) -> Result<Self> {
        let bad = |what: &str| Error::Manifest(format!("line {line}: {what}"));
        let obj = v.as_object().ok_or_else(|| bad("expected an object"))?;
        let row_id = obj.get("row_id").and_then(Json::as_u64).ok_or_else(|| bad("row_id"))?;
        let kind = obj
            .get("kind")
            .and_then(Json::as_str)
            .ok_or_else(|| bad("kind"))?
            .parse::<ErrorKind>()
            .map_err(|e| bad(&e))?;
        let model = obj.get("model").and_then(Json::as_str).unwrap_or_default().to_string();
        let column = obj.get("column").and_then(Json::as_str).ok_or_else(|| bad("column"))?;
        let change = if column == "*" {
            let parent = obj.get("parent").and_then(Json::as_u64).ok_or_else(|| bad("parent"))?;
            Change::RowCopy { parent }
        } else {
            let idx = schema
                .index_of(column)
                .ok_or_else(|| bad(&format!("unknown column '{column}'")))?;
            let ty = &schema.column(idx).ty;
            let get = |key: &str| {
                let raw = obj.get(key).unwrap_or(&Json::Null);
                value_from_json(raw, ty).ok_or_else(|| bad(&format!("{key} {raw} is not a {} value", ty.name())))
            };
            Change::Cell {
                column: column.to_string(),
                original: get("original")?,
                corrupted: get("corrupted")?,
            }
        };
        Ok(Self {
            row_id,
            kind,
            change,
            model,
        })
    }
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Missing => Json::Null,
        Value::Int(i) => (*i).into(),
        Value::Float(f) => Number::from_f64(*f).map_or(Json::Null, Json::Number),
        Value::Bool(b) => (*b).into(),
        Value::Text(_) | Value::Date(_) => v.render().into(),
    }
}

fn value_from_json(v: &Json, ty: &ColumnType) -> Option<Value> {
    if v.is_null() {
        return Some(Value::Missing);
    }
    match ty {
        ColumnType::Integer => v.as_i64().map(Value::Int),
        ColumnType::Float => v.as_f64().map(Value::Float),
        ColumnType::Boolean => v.as_bool().map(Value::Bool),
        ColumnType::Categorical(_) | ColumnType::String => v.as_str().map(|s| Value::Text(s.into())),
        ColumnType::Date => v.as_str().and_then(|s| ty.parse(s)).filter(|x| !x.is_missing()),
    }
}

/// Ordered provenance log of every injected change, bound to the clean
/// dataset it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionManifest {
    pub dataset_fingerprint: String,
    /// Fingerprints of the models applied, in application order.
    pub models: Vec<String>,
    /// Cumulative rate per `kind:feature` (`duplicate:*` for row copies).
    pub cumulative_p: BTreeMap<String, f64>,
    pub records: Vec<CorruptionRecord>,
}

impl CorruptionManifest {
    pub fn new(dataset_fingerprint: String) -> Self {
        Self {
            dataset_fingerprint,
            models: Vec::new(),
            cumulative_p: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records of `kind` touching `column` (`None` counts row copies).
    pub fn count(&self, kind: ErrorKind, column: Option<&str>) -> usize {
        self.records
            .iter()
            .filter(|r| r.kind == kind && r.column() == column)
            .count()
    }

    pub(crate) fn key(kind: ErrorKind, column: Option<&str>) -> String {
        format!("{}:{}", kind.as_str(), column.unwrap_or("*"))
    }

    /// JSON-lines: one header object, then one record per line.
    pub fn to_jsonl(&self) -> String {
        let header = json!({
            "format": FORMAT,
            "dataset_fingerprint": self.dataset_fingerprint,
            "models": self.models,
            "cumulative_p": self.cumulative_p,
            "records": self.records.len(),
        });
        let mut out = header.to_string();
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_json().to_string());
            out.push('\n');
        }
        out
    }

    /// Parses JSON-lines; `schema` types the cell values.
    pub fn from_jsonl(text: &str, schema: &Schema) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| Error::Manifest("empty manifest".into()))?;
        let header: Json = serde_json::from_str(head).map_err(|e| Error::Manifest(format!("line 1: {e}")))?;
        let header: &Map<String, Json> = header
            .as_object()
            .ok_or_else(|| Error::Manifest("line 1: header must be an object".into()))?;
        if header.get("format").and_then(Json::as_str) != Some(FORMAT) {
            return Err(Error::Manifest(format!("line 1: expected format {FORMAT}")));
        }
        let dataset_fingerprint = header
            .get("dataset_fingerprint")
            .and_then(Json::as_str)
            .ok_or_else(|| Error::Manifest("line 1: dataset_fingerprint".into()))?
            .to_string();
        let models = header
            .get("models")
            .and_then(Json::as_array)
            .map(|a| a.iter().filter_map(|m| m.as_str().map(str::to_string)).collect())
            .unwrap_or_default();
        let cumulative_p = header
            .get("cumulative_p")
            .and_then(Json::as_object)
            .map(|m| m.iter().filter_map(|(k, v)| v.as_f64().map(|p| (k.clone(), p))).collect())
            .unwrap_or_default();
        let mut records = Vec::new();
        for (i, line) in lines {
            let v: Json = serde_json::from_str(line).map_err(|e| Error::Manifest(format!("line {}: {e}", i + 1)))?;
            records.push(CorruptionRecord::from_json(&v, schema, i + 1)?);
        }
        if let Some(n) = header.get("records").and_then(Json::as_u64) {
            if n as usize != records.len() {
                return Err(Error::Manifest(format!("header announces {n} records, found {}", records.len())));
            }
        }
        Ok(Self {
            dataset_fingerprint,
            models,
            cumulative_p,
            records,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>, schema: &Schema) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text, schema)
    }
}

/// Content hash of a dataset: column names and types, row ids and cell
/// values. The target designation and categorical domains do not contribute.
pub fn dataset_fingerprint(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    for c in ds.schema().columns() {
        h.update(c.name.as_bytes());
        h.update([0x1f]);
        h.update(c.ty.name().as_bytes());
        h.update([0x1e]);
    }
    for (row, id) in ds.rows().iter().zip(ds.row_ids()) {
        h.update(id.to_le_bytes());
        for cell in row {
            // The tag keeps Missing distinct from an empty rendering.
            h.update([if cell.is_missing() { 0 } else { 1 }]);
            h.update(cell.render().as_bytes());
            h.update([0x1f]);
        }
        h.update([0x1e]);
    }
    hex::encode(&h.finalize()[..16])
}

/// Applies `records` in order to `ds`, checking each recorded original value.
pub(crate) fn apply_records(ds: &mut Dataset, records: &[CorruptionRecord]) -> Result<()> {
    let mut positions: HashMap<RowId, usize> = ds.positions();
    for (i, rec) in records.iter().enumerate() {
        match &rec.change {
            Change::Cell {
                column,
                original,
                corrupted,
            } => {
                let col = ds.schema().require(column)?;
                let row = *positions
                    .get(&rec.row_id)
                    .ok_or_else(|| Error::Manifest(format!("record {i}: unknown row id {}", rec.row_id)))?;
                if ds.cell(row, col) != original {
                    return Err(Error::Manifest(format!(
                        "record {i}: row {} column '{column}' holds {} but the manifest expects {}",
                        rec.row_id,
                        ds.cell(row, col),
                        original
                    )));
                }
                if !ds.schema().column(col).ty.admits(corrupted) {
                    return Err(Error::Manifest(format!("record {i}: {corrupted} does not fit column '{column}'")));
                }
                ds.set_cell(row, col, corrupted.clone());
            }
            Change::RowCopy { parent } => {
                if positions.contains_key(&rec.row_id) {
                    return Err(Error::Manifest(format!("record {i}: row id {} already exists", rec.row_id)));
                }
                let src = *positions
                    .get(parent)
                    .ok_or_else(|| Error::Manifest(format!("record {i}: unknown parent row {parent}")))?;
                let copy = ds.row(src).to_vec();
                positions.insert(rec.row_id, ds.n_rows());
                ds.push_row(rec.row_id, copy);
            }
        }
    }
    Ok(())
}

/// Reconstructs a corrupted dataset from its clean source and manifest. No
/// randomness is involved.
pub fn replay(clean: &Dataset, manifest: &CorruptionManifest) -> Result<Dataset> {
    let fp = dataset_fingerprint(clean);
    if fp != manifest.dataset_fingerprint {
        return Err(Error::Precondition(format!(
            "manifest was produced for dataset {} but this dataset is {fp}",
            manifest.dataset_fingerprint
        )));
    }
    let mut ds = clean.clone();
    apply_records(&mut ds, &manifest.records)?;
    Ok(ds)
}
