use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::schema::{infer_schema, ColumnType, Schema};
use super::value::Value;
use crate::error::{Error, Result};

pub type RowId = u64;

/// A schema-typed table with stable per-row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Value>>,
    row_ids: Vec<RowId>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>, row_ids: Vec<RowId>) -> Result<Self> {
        if rows.len() != row_ids.len() {
            return Err(Error::Schema(format!(
                "{} rows but {} row ids",
                rows.len(),
                row_ids.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(row_ids.len());
        for id in &row_ids {
            if !seen.insert(*id) {
                return Err(Error::Schema(format!("duplicate row id {id}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Structural {
                    row: i,
                    expected: schema.len(),
                    found: row.len(),
                });
            }
            for (j, cell) in row.iter().enumerate() {
                let col = schema.column(j);
                if !col.ty.admits(cell) {
                    return Err(Error::TypeMismatch {
                        row: i,
                        column: col.name.clone(),
                        value: cell.render(),
                        expected: col.ty.name(),
                    });
                }
            }
        }
        Ok(Self {
            schema,
            rows,
            row_ids,
        })
    }

    /// Builds a dataset with row ids `0..n`.
    pub fn from_rows(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self> {
        let ids = (0..rows.len() as RowId).collect();
        Self::new(schema, rows, ids)
    }

    /// Parses raw string fields, inferring the schema when none is supplied.
    pub fn from_raw(
        header: &[String],
        raw_rows: &[Vec<String>],
        schema: Option<&Schema>,
        target: Option<&str>,
    ) -> Result<Self> {
        let schema = match schema {
            Some(s) => {
                let names: Vec<&str> = s.names().collect();
                if names != header.iter().map(|h| h.as_str()).collect::<Vec<_>>() {
                    return Err(Error::Schema(format!(
                        "header {header:?} does not match schema columns {names:?}"
                    )));
                }
                s.clone()
            }
            None => infer_schema(raw_rows, header)?,
        };
        let mut rows = Vec::with_capacity(raw_rows.len());
        for (i, fields) in raw_rows.iter().enumerate() {
            if fields.len() != schema.len() {
                return Err(Error::Structural {
                    row: i,
                    expected: schema.len(),
                    found: fields.len(),
                });
            }
            let mut row = Vec::with_capacity(fields.len());
            for (col, raw) in schema.columns().iter().zip(fields) {
                let v = col.ty.parse(raw).ok_or_else(|| Error::TypeMismatch {
                    row: i,
                    column: col.name.clone(),
                    value: raw.clone(),
                    expected: col.ty.name(),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        let target = match target {
            Some(t) => Some(t.to_string()),
            None => schema.target().map(str::to_string),
        };
        let mut ds = Self::from_rows(schema, rows)?;
        ds.refresh_domains();
        ds.schema = ds.schema.clone().with_target(target)?;
        Ok(ds)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row(&self, idx: usize) -> &[Value] {
        &self.rows[idx]
    }

    pub fn row_ids(&self) -> &[RowId] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Value {
        &self.rows[row][col]
    }

    pub fn column_values(&self, col: usize) -> impl Iterator<Item = &Value> {
        self.rows.iter().map(move |r| &r[col])
    }

    /// Map from row id to row position.
    pub fn positions(&self) -> HashMap<RowId, usize> {
        self.row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, i))
            .collect()
    }

    /// Smallest id greater than every existing id.
    pub fn next_row_id(&self) -> RowId {
        self.row_ids.iter().max().map_or(0, |m| m + 1)
    }

    pub fn with_target(mut self, target: Option<&str>) -> Result<Self> {
        self.schema = self.schema.with_target(target.map(str::to_string))?;
        Ok(self)
    }

    /// Keeps the rows whose position satisfies `keep`, preserving order and ids.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Dataset {
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for (i, (row, id)) in self.rows.iter().zip(&self.row_ids).enumerate() {
            if keep(i) {
                rows.push(row.clone());
                ids.push(*id);
            }
        }
        Dataset {
            schema: self.schema.clone(),
            rows,
            row_ids: ids,
        }
    }

    pub(crate) fn set_cell(&mut self, row: usize, col: usize, value: Value) {
        self.rows[row][col] = value;
    }

    pub(crate) fn push_row(&mut self, id: RowId, row: Vec<Value>) {
        self.rows.push(row);
        self.row_ids.push(id);
    }

    pub(crate) fn replace_column(&mut self, col: usize, ty: ColumnType, values: Vec<Value>) {
        self.schema.columns_mut()[col].ty = ty;
        for (row, v) in self.rows.iter_mut().zip(values) {
            row[col] = v;
        }
    }

    pub(crate) fn append_column(&mut self, name: String, ty: ColumnType, values: Vec<Value>) -> Result<()> {
        if self.schema.index_of(&name).is_some() {
            return Err(Error::Schema(format!("column '{name}' already exists")));
        }
        self.schema
            .columns_mut()
            .push(super::schema::Column::new(name, ty));
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
        Ok(())
    }

    /// Recomputes categorical domains from the observed values.
    pub(crate) fn refresh_domains(&mut self) {
        for j in 0..self.schema.len() {
            if let ColumnType::Categorical(_) = self.schema.column(j).ty {
                let domain: BTreeSet<String> = self
                    .rows
                    .iter()
                    .filter_map(|r| r[j].as_text().map(str::to_string))
                    .collect();
                self.schema.columns_mut()[j].ty = ColumnType::Categorical(domain);
            }
        }
    }
}

/// Reads an RFC-4180 CSV with a mandatory header row. Empty fields become
/// `Missing`; rows get ids `0..n` in file order.
pub fn read_csv(path: impl AsRef<Path>, schema: Option<&Schema>, target: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file, schema, target)
}

pub fn read_csv_from<R: Read>(reader: R, schema: Option<&Schema>, target: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }
    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Structural {
                row: i,
                expected: header.len(),
                found: rec.len(),
            });
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }
    Dataset::from_raw(&header, &raw, schema, target)
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv_to(ds, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(ds.schema.names())?;
    let mut buf: Vec<String> = Vec::with_capacity(ds.schema.len());
    for row in &ds.rows {
        buf.clear();
        buf.extend(row.iter().map(Value::render));
        w.write_record(&buf)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn to_csv_string(ds: &Dataset) -> String {
    let mut out = Vec::new();
    write_csv_to(ds, &mut out).expect("writing to memory cannot fail");
    String::from_utf8(out).expect("CSV output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
person_age,loan_int_rate,grade,flag
22,11.5,A,true
25,,B,false
31,7.25,A,
";

    #[test]
    fn reads_with_inference_and_missing() {
        let ds = read_csv_from(SAMPLE.as_bytes(), None, Some("grade")).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.row_ids(), &[0, 1, 2]);
        assert_eq!(ds.schema().column(0).ty, ColumnType::Integer);
        assert_eq!(ds.schema().column(1).ty, ColumnType::Float);
        assert_eq!(ds.schema().column(3).ty, ColumnType::Boolean);
        assert_eq!(ds.cell(1, 1), &Value::Missing);
        assert_eq!(ds.cell(2, 3), &Value::Missing);
        assert_eq!(ds.schema().target(), Some("grade"));
    }

    #[test]
    fn explicit_schema_type_mismatch() {
        let ds = read_csv_from(SAMPLE.as_bytes(), None, None).unwrap();
        let bad = SAMPLE.replace("22,", "abc,");
        let err = read_csv_from(bad.as_bytes(), Some(ds.schema()), None).unwrap_err();
        match err {
            Error::TypeMismatch { row, column, .. } => {
                assert_eq!(row, 0);
                assert_eq!(column, "person_age");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_target_column_is_an_error() {
        assert!(read_csv_from(SAMPLE.as_bytes(), None, Some("loan_status")).is_err());
    }

    #[test]
    fn ragged_row_is_structural() {
        let text = "a,b\n1,2\n3\n";
        assert!(matches!(
            read_csv_from(text.as_bytes(), None, None),
            Err(Error::Structural { row: 1, .. })
        ));
    }

    #[test]
    fn missing_cell_writes_consecutive_commas() {
        let ds = read_csv_from(SAMPLE.as_bytes(), None, None).unwrap();
        let out = to_csv_string(&ds);
        assert!(out.lines().nth(2).unwrap().contains(",,"));
    }

    #[test]
    fn quoted_fields_round_trip() {
        let text = "name,x\n\"a, b\",1\n\"say \"\"hi\"\"\",2\n";
        let ds = read_csv_from(text.as_bytes(), None, None).unwrap();
        assert_eq!(ds.cell(0, 0), &Value::Text("a, b".into()));
        let again = read_csv_from(to_csv_string(&ds).as_bytes(), Some(ds.schema()), None).unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn float_survives_round_trip() {
        let text = "x\n0.30000000000000004\n2\n";
        let ds = read_csv_from(text.as_bytes(), None, None).unwrap();
        let again = read_csv_from(to_csv_string(&ds).as_bytes(), None, None).unwrap();
        assert_eq!(again, ds);
        assert_eq!(again.cell(0, 0), &Value::Float(0.30000000000000004));
    }

    #[test]
    fn empty_file_fails() {
        assert!(read_csv_from("".as_bytes(), None, None).is_err());
    }
}
