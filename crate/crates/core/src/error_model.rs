//! The error model: which error to inject (kind), where (features and a row
//! predicate), how much (rate `p`), how rows are weighted (distribution) and
//! whether the run starts fresh or extends a prior corruption (mode).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value as Json};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, fingerprint, rng_from_seed, round_half_up, Rng};
use crate::tabular::{ColumnType, Dataset, RowId, Schema, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorKind {
    Missing,
    Noise,
    Outlier,
    Duplicate,
    Mislabel,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 5] = [
        ErrorKind::Missing,
        ErrorKind::Noise,
        ErrorKind::Outlier,
        ErrorKind::Duplicate,
        ErrorKind::Mislabel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Missing => "missing",
            ErrorKind::Noise => "noise",
            ErrorKind::Outlier => "outlier",
            ErrorKind::Duplicate => "duplicate",
            ErrorKind::Mislabel => "mislabel",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ErrorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown error kind '{s}' (expected one of missing, noise, outlier, duplicate, mislabel)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
}

impl CompareOp {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "=" | "==" => CompareOp::Eq,
            "!=" | "<>" => CompareOp::Ne,
            "<" => CompareOp::Lt,
            "<=" => CompareOp::Le,
            ">" => CompareOp::Gt,
            ">=" => CompareOp::Ge,
            "in" => CompareOp::In,
            _ => return None,
        })
    }

    fn as_str(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::In => "in",
        }
    }
}

/// One `column op literal` comparison as written in the config.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub column: String,
    pub op: CompareOp,
    pub value: Json,
}

/// Conjunction of atoms; empty means every row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    pub atoms: Vec<Atom>,
}

impl Predicate {
    pub fn all() -> Self {
        Self::default()
    }

    /// Resolves column names and types the literals against `schema`.
    pub fn bind(&self, schema: &Schema) -> Result<BoundPredicate> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, atom) in self.atoms.iter().enumerate() {
            let path = format!("predicate[{i}]");
            let col = schema.index_of(&atom.column).ok_or_else(|| {
                Error::config(format!("{path}.column"), format!("unknown column '{}'", atom.column))
            })?;
            let ty = &schema.column(col).ty;
            let literal = if atom.op == CompareOp::In {
                let items = atom
                    .value
                    .as_array()
                    .ok_or_else(|| Error::config(format!("{path}.value"), "'in' requires an array"))?;
                let values = items
                    .iter()
                    .map(|v| literal_for(ty, v).ok_or_else(|| literal_error(&path, ty, v)))
                    .collect::<Result<Vec<_>>>()?;
                Literal::Set(values)
            } else {
                Literal::One(literal_for(ty, &atom.value).ok_or_else(|| literal_error(&path, ty, &atom.value))?)
            };
            if matches!(ty, ColumnType::Boolean) && !matches!(atom.op, CompareOp::Eq | CompareOp::Ne | CompareOp::In) {
                return Err(Error::config(format!("{path}.op"), "boolean columns support only =, != and in"));
            }
            atoms.push(BoundAtom {
                col,
                op: atom.op,
                literal,
            });
        }
        Ok(BoundPredicate { atoms })
    }

    fn to_json(&self) -> Json {
        Json::Array(
            self.atoms
                .iter()
                .map(|a| json!({"column": a.column, "op": a.op.as_str(), "value": a.value}))
                .collect(),
        )
    }
}

fn literal_error(path: &str, ty: &ColumnType, v: &Json) -> Error {
    Error::config(format!("{path}.value"), format!("literal {v} is not compatible with a {} column", ty.name()))
}

fn literal_for(ty: &ColumnType, v: &Json) -> Option<Value> {
    match ty {
        ColumnType::Integer => v.as_i64().map(Value::Int).or_else(|| v.as_f64().map(Value::Float)),
        ColumnType::Float => v.as_f64().map(Value::Float),
        ColumnType::Boolean => v.as_bool().map(Value::Bool),
        ColumnType::Categorical(_) | ColumnType::String => v.as_str().map(|s| Value::Text(s.to_string())),
        ColumnType::Date => v
            .as_str()
            .and_then(|s| ColumnType::Date.parse(s))
            .filter(|x| !x.is_missing()),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Literal {
    One(Value),
    Set(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq)]
struct BoundAtom {
    col: usize,
    op: CompareOp,
    literal: Literal,
}

/// A predicate validated against a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPredicate {
    atoms: Vec<BoundAtom>,
}

/// True iff every atom holds. Comparisons against a missing cell are false,
/// except `!=` which is true.
pub fn eval_predicate(row: &[Value], predicate: &BoundPredicate) -> bool {
    predicate.atoms.iter().all(|atom| {
        let cell = &row[atom.col];
        if cell.is_missing() {
            return atom.op == CompareOp::Ne;
        }
        match (&atom.literal, atom.op) {
            (Literal::Set(values), _) => values.iter().any(|v| cell.compare(v) == Some(std::cmp::Ordering::Equal)),
            (Literal::One(v), op) => {
                let Some(ord) = cell.compare(v) else {
                    return op == CompareOp::Ne;
                };
                use std::cmp::Ordering::*;
                match op {
                    CompareOp::Eq => ord == Equal,
                    CompareOp::Ne => ord != Equal,
                    CompareOp::Lt => ord == Less,
                    CompareOp::Le => ord != Greater,
                    CompareOp::Gt => ord == Greater,
                    CompareOp::Ge => ord != Less,
                    CompareOp::In => unreachable!("'in' always binds to a set"),
                }
            }
        }
    })
}

/// How selection weight is spread over the candidate rows' rank positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionDistribution {
    Uniform,
    /// Gaussian bump centred at `center_fraction * |C|` with standard
    /// deviation `spread_fraction * |C|`.
    Normal { center_fraction: f64, spread_fraction: f64 },
    /// Poisson pmf over ranks with rate `lambda_fraction * |C|`.
    Poisson { lambda_fraction: f64 },
}

impl SelectionDistribution {
    pub const DEFAULT_CENTER: f64 = 0.5;
    pub const DEFAULT_SPREAD: f64 = 0.25;
    pub const DEFAULT_LAMBDA: f64 = 0.5;

    fn to_json(self) -> Json {
        match self {
            SelectionDistribution::Uniform => json!({"name": "uniform"}),
            SelectionDistribution::Normal {
                center_fraction,
                spread_fraction,
            } => json!({"name": "normal", "center_fraction": center_fraction, "spread_fraction": spread_fraction}),
            SelectionDistribution::Poisson { lambda_fraction } => {
                json!({"name": "poisson", "lambda_fraction": lambda_fraction})
            }
        }
    }

    /// Unnormalised log-weight of rank `r` among `n` candidates.
    fn log_weights(self, n: usize) -> Vec<f64> {
        let len = n as f64;
        match self {
            SelectionDistribution::Uniform => vec![0.0; n],
            SelectionDistribution::Normal {
                center_fraction,
                spread_fraction,
            } => {
                let center = center_fraction * len;
                let spread = spread_fraction * len;
                (0..n)
                    .map(|r| {
                        let z = (r as f64 - center) / spread;
                        -0.5 * z * z
                    })
                    .collect()
            }
            SelectionDistribution::Poisson { lambda_fraction } => {
                let lambda = lambda_fraction * len;
                let ln_lambda = lambda.ln();
                let mut ln_fact = 0.0;
                (0..n)
                    .map(|r| {
                        if r > 0 {
                            ln_fact += (r as f64).ln();
                        }
                        r as f64 * ln_lambda - lambda - ln_fact
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    New,
    Extended,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::New => "new",
            Mode::Extended => "extended",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "new" => Ok(Mode::New),
            "extended" => Ok(Mode::Extended),
            other => Err(format!("unknown mode '{other}' (expected new or extended)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub kind: ErrorKind,
    /// Columns to corrupt. For duplicates, the columns perturbed in each copy
    /// (empty means exact copies).
    pub features: Vec<String>,
    pub predicate: Predicate,
    pub p: f64,
    pub distribution: SelectionDistribution,
    pub mode: Mode,
    pub seed: u64,
}

impl ErrorModel {
    pub fn new(kind: ErrorKind, features: &[&str], p: f64) -> Self {
        Self {
            kind,
            features: features.iter().map(|s| s.to_string()).collect(),
            predicate: Predicate::all(),
            p,
            distribution: SelectionDistribution::Uniform,
            mode: Mode::New,
            seed: 0,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_distribution(mut self, distribution: SelectionDistribution) -> Self {
        self.distribution = distribution;
        self
    }

    pub fn with_predicate(mut self, predicate: Predicate) -> Self {
        self.predicate = predicate;
        self
    }

    /// Canonical JSON in the config format (keys sorted).
    pub fn to_json(&self) -> Json {
        json!({
            "kind": self.kind.as_str(),
            "features": self.features,
            "predicate": self.predicate.to_json(),
            "p": self.p,
            "eta": self.distribution.to_json(),
            "mode": self.mode.as_str(),
            "seed": self.seed,
        })
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self.to_json().to_string().as_bytes())
    }

    /// Checks the model against a dataset schema and binds its predicate.
    pub fn validate(&self, schema: &Schema) -> Result<BoundPredicate> {
        check_invariants(self, "$")?;
        for (i, f) in self.features.iter().enumerate() {
            if schema.index_of(f).is_none() {
                return Err(Error::config(format!("$.features[{i}]"), format!("unknown column '{f}'")));
            }
        }
        if self.kind == ErrorKind::Mislabel {
            match schema.target() {
                Some(t) if self.features.len() == 1 && self.features[0] == t => {}
                Some(t) => {
                    return Err(Error::config("$.features", format!("mislabel must target exactly the target column '{t}'")));
                }
                None => return Err(Error::InvalidModel("mislabel requires a designated target column".into())),
            }
        }
        self.predicate.bind(schema)
    }
}

fn check_invariants(m: &ErrorModel, root: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&m.p) || m.p.is_nan() {
        return Err(Error::config(format!("{root}.p"), format!("rate {} outside [0, 1]", m.p)));
    }
    if m.features.is_empty() && m.kind != ErrorKind::Duplicate {
        return Err(Error::config(format!("{root}.features"), "at least one feature is required"));
    }
    if m.kind == ErrorKind::Mislabel && m.features.len() != 1 {
        return Err(Error::config(format!("{root}.features"), "mislabel takes exactly the target column"));
    }
    let mut seen = HashSet::new();
    for (i, f) in m.features.iter().enumerate() {
        if !seen.insert(f) {
            return Err(Error::config(format!("{root}.features[{i}]"), format!("duplicate feature '{f}'")));
        }
    }
    match m.distribution {
        SelectionDistribution::Uniform => {}
        SelectionDistribution::Normal {
            center_fraction,
            spread_fraction,
        } => {
            if !(0.0..=1.0).contains(&center_fraction) {
                return Err(Error::config(format!("{root}.eta.center_fraction"), "must lie in [0, 1]"));
            }
            if !(spread_fraction > 0.0 && spread_fraction.is_finite()) {
                return Err(Error::config(format!("{root}.eta.spread_fraction"), "must be positive"));
            }
        }
        SelectionDistribution::Poisson { lambda_fraction } => {
            if !(lambda_fraction > 0.0 && lambda_fraction.is_finite()) {
                return Err(Error::config(format!("{root}.eta.lambda_fraction"), "must be positive"));
            }
        }
    }
    Ok(())
}

/// Parses error-model configuration JSON.
///
/// Accepts `{"models": [...]}`, a bare array of models, or a single model
/// object. Omitted fields default to uniform selection, all rows, new mode
/// and seed 0.
pub fn parse_error_models(config_text: &str) -> Result<Vec<ErrorModel>> {
    let doc: Json = serde_json::from_str(config_text).map_err(|e| Error::config("$", format!("invalid JSON: {e}")))?;
    match &doc {
        Json::Object(obj) if obj.contains_key("models") => {
            if let Some(key) = obj.keys().find(|k| *k != "models") {
                return Err(Error::config(format!("$.{key}"), "unexpected field"));
            }
            let arr = obj["models"]
                .as_array()
                .ok_or_else(|| Error::config("$.models", "expected an array"))?;
            arr.iter()
                .enumerate()
                .map(|(i, m)| parse_model(m, &format!("$.models[{i}]")))
                .collect()
        }
        Json::Array(arr) => arr
            .iter()
            .enumerate()
            .map(|(i, m)| parse_model(m, &format!("$[{i}]")))
            .collect(),
        Json::Object(_) => Ok(vec![parse_model(&doc, "$")?]),
        _ => Err(Error::config("$", "expected an object or array")),
    }
}

/// Parses a single model object; `root` is its JSON path for error messages.
pub fn parse_model(v: &Json, root: &str) -> Result<ErrorModel> {
    const FIELDS: [&str; 7] = ["kind", "features", "predicate", "p", "eta", "mode", "seed"];
    let obj = v
        .as_object()
        .ok_or_else(|| Error::config(root, "expected an object"))?;
    if let Some(key) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(Error::config(format!("{root}.{key}"), "unexpected field"));
    }

    let kind = obj
        .get("kind")
        .ok_or_else(|| Error::config(format!("{root}.kind"), "missing"))?
        .as_str()
        .ok_or_else(|| Error::config(format!("{root}.kind"), "expected a string"))?
        .parse::<ErrorKind>()
        .map_err(|e| Error::config(format!("{root}.kind"), e))?;

    let features = match obj.get("features") {
        None => Vec::new(),
        Some(Json::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::config(format!("{root}.features[{i}]"), "expected a string"))
            })
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::config(format!("{root}.features"), "expected an array of column names")),
    };

    let p = obj
        .get("p")
        .ok_or_else(|| Error::config(format!("{root}.p"), "missing"))?
        .as_f64()
        .ok_or_else(|| Error::config(format!("{root}.p"), "expected a number"))?;

    let predicate = match obj.get("predicate") {
        None | Some(Json::Null) => Predicate::all(),
        Some(Json::Array(items)) => Predicate {
            atoms: items
                .iter()
                .enumerate()
                .map(|(i, a)| parse_atom(a, &format!("{root}.predicate[{i}]")))
                .collect::<Result<_>>()?,
        },
        Some(_) => return Err(Error::config(format!("{root}.predicate"), "expected an array of comparisons")),
    };

    let distribution = match obj.get("eta") {
        None | Some(Json::Null) => SelectionDistribution::Uniform,
        Some(e) => parse_eta(e, &format!("{root}.eta"))?,
    };

    let mode = match obj.get("mode") {
        None => Mode::New,
        Some(m) => m
            .as_str()
            .ok_or_else(|| Error::config(format!("{root}.mode"), "expected a string"))?
            .parse()
            .map_err(|e| Error::config(format!("{root}.mode"), e))?,
    };

    let seed = match obj.get("seed") {
        None => 0,
        Some(s) => s
            .as_u64()
            .ok_or_else(|| Error::config(format!("{root}.seed"), "expected a non-negative integer"))?,
    };

    let model = ErrorModel {
        kind,
        features,
        predicate,
        p,
        distribution,
        mode,
        seed,
    };
    check_invariants(&model, root)?;
    Ok(model)
}

fn parse_atom(v: &Json, path: &str) -> Result<Atom> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::config(path, "expected {\"column\", \"op\", \"value\"}"))?;
    if let Some(key) = obj.keys().find(|k| !["column", "op", "value"].contains(&k.as_str())) {
        return Err(Error::config(format!("{path}.{key}"), "unexpected field"));
    }
    let column = obj
        .get("column")
        .and_then(Json::as_str)
        .ok_or_else(|| Error::config(format!("{path}.column"), "expected a column name"))?
        .to_string();
    let op_text = obj
        .get("op")
        .and_then(Json::as_str)
        .ok_or_else(|| Error::config(format!("{path}.op"), "expected an operator"))?;
    let op = CompareOp::parse(op_text).ok_or_else(|| Error::config(format!("{path}.op"), format!("unknown operator '{op_text}'")))?;
    let value = obj
        .get("value")
        .cloned()
        .filter(|v| !v.is_null())
        .ok_or_else(|| Error::config(format!("{path}.value"), "missing literal"))?;
    if op == CompareOp::In && !value.is_array() {
        return Err(Error::config(format!("{path}.value"), "'in' requires an array"));
    }
    if op != CompareOp::In && (value.is_array() || value.is_object()) {
        return Err(Error::config(format!("{path}.value"), "expected a scalar literal"));
    }
    Ok(Atom { column, op, value })
}

fn parse_eta(v: &Json, path: &str) -> Result<SelectionDistribution> {
    let obj: &Map<String, Json> = v
        .as_object()
        .ok_or_else(|| Error::config(path, "expected {\"name\": ...}"))?;
    let name = obj
        .get("name")
        .and_then(Json::as_str)
        .ok_or_else(|| Error::config(format!("{path}.name"), "expected a distribution name"))?;
    let num = |key: &str, default: f64| -> Result<f64> {
        match obj.get(key) {
            None => Ok(default),
            Some(x) => x
                .as_f64()
                .ok_or_else(|| Error::config(format!("{path}.{key}"), "expected a number")),
        }
    };
    let (dist, allowed): (SelectionDistribution, &[&str]) = match name {
        "uniform" => (SelectionDistribution::Uniform, &["name"]),
        "normal" | "gaussian" => (
            SelectionDistribution::Normal {
                center_fraction: num("center_fraction", SelectionDistribution::DEFAULT_CENTER)?,
                spread_fraction: num("spread_fraction", SelectionDistribution::DEFAULT_SPREAD)?,
            },
            &["name", "center_fraction", "spread_fraction"],
        ),
        "poisson" => (
            SelectionDistribution::Poisson {
                lambda_fraction: num("lambda_fraction", SelectionDistribution::DEFAULT_LAMBDA)?,
            },
            &["name", "lambda_fraction"],
        ),
        other => return Err(Error::config(format!("{path}.name"), format!("unknown distribution '{other}'"))),
    };
    if let Some(key) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::config(format!("{path}.{key}"), "unexpected field"));
    }
    Ok(dist)
}

/// Row ids chosen for corruption, in draw order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSelection {
    pub ids: Vec<RowId>,
    /// Size of the candidate set the ids were drawn from.
    pub candidates: usize,
}

/// Selects rows satisfying the model's predicate, minus `exclusions`.
///
/// The selection size tops the already-excluded predicate rows up to
/// `round_half_up(p * |predicate rows|)`.
pub fn select_rows(ds: &Dataset, model: &ErrorModel, exclusions: &HashSet<RowId>) -> Result<RowSelection> {
    let predicate = model.predicate.bind(ds.schema())?;
    let rho: Vec<RowId> = ds
        .rows()
        .iter()
        .zip(ds.row_ids())
        .filter(|(row, _)| eval_predicate(row, &predicate))
        .map(|(_, id)| *id)
        .collect();
    Ok(select_from(&rho, model.p, model.distribution, exclusions, derive_seed(model.seed, &["select"])))
}

/// Core draw: `rho` lists the predicate rows in rank order.
pub fn select_from(
    rho: &[RowId],
    p: f64,
    distribution: SelectionDistribution,
    exclusions: &HashSet<RowId>,
    seed: u64,
) -> RowSelection {
    let target_total = round_half_up(p, rho.len());
    let candidates: Vec<RowId> = rho.iter().copied().filter(|id| !exclusions.contains(id)).collect();
    let already = rho.len() - candidates.len();
    let n = target_total.saturating_sub(already).min(candidates.len());
    let ranks = draw_ranks(candidates.len(), n, distribution, &mut rng_from_seed(seed));
    RowSelection {
        ids: ranks.into_iter().map(|r| candidates[r]).collect(),
        candidates: candidates.len(),
    }
}

/// Draws `n` distinct ranks out of `0..len` without replacement, each draw
/// proportional to the distribution's weight among the remaining ranks
/// (Gumbel top-k). Returned in draw order.
pub(crate) fn draw_ranks(len: usize, n: usize, distribution: SelectionDistribution, rng: &mut Rng) -> Vec<usize> {
    if n == 0 || len == 0 {
        return Vec::new();
    }
    let log_w = distribution.log_weights(len);
    let mut keyed: Vec<(f64, usize)> = log_w
        .into_iter()
        .enumerate()
        .map(|(r, lw)| (lw + gumbel(rng), r))
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.truncate(n);
    keyed.into_iter().map(|(_, r)| r).collect()
}

fn gumbel(rng: &mut Rng) -> f64 {
    -(-open_unit(rng).ln()).ln()
}

/// Uniform draw from the open interval (0, 1).
pub(crate) fn open_unit(rng: &mut Rng) -> f64 {
    use rand::RngCore;
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}
