//! Tabular ingestion: raw text tables, protected-attribute schemas, binning of
//! continuous columns and encoding of rows into per-feature category indices.
//!
//! Every feature carries an explicit missing category as its last label, so an
//! empty cell is a value like any other instead of a dropped row.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Label reserved for absent values; always the last category of a feature.
pub const MISSING_LABEL: &str = "⟨missing⟩";

/// Default number of equal-frequency bins.
pub const DEFAULT_QUANTILE_BINS: usize = 4;

/// Rows of text cells keyed by a header. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<String>,
    rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Option<String>>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(AuditError::DuplicateColumn(c.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(AuditError::RaggedRow {
                    row: i + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        Ok(RawTable { columns, rows })
    }

    /// Builds a table from plain strings; empty strings become missing cells.
    pub fn from_strings<S: AsRef<str>, T: AsRef<str>>(columns: &[S], rows: &[Vec<T>]) -> Result<Self> {
        let columns = columns.iter().map(|c| c.as_ref().to_string()).collect();
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|c| missing_if_empty(c.as_ref())).collect())
            .collect();
        RawTable::new(columns, rows)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| AuditError::ColumnNotFound(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<impl Iterator<Item = Option<&str>> + '_> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(move |r| r[j].as_deref()))
    }

    /// Row-wise concatenation of two tables over the same columns (in any order).
    pub fn concat(&self, other: &RawTable) -> Result<RawTable> {
        let mut rows = self.rows.clone();
        let order: Vec<usize> = self
            .columns
            .iter()
            .map(|c| other.column_index(c))
            .collect::<Result<_>>()?;
        rows.extend(
            other
                .rows
                .iter()
                .map(|r| order.iter().map(|&j| r[j].clone()).collect()),
        );
        RawTable::new(self.columns.clone(), rows)
    }

    fn check_columns(&self, target_col: Option<&str>, protected: &[String]) -> Result<()> {
        for p in protected {
            self.column_index(p)?;
        }
        if let Some(t) = target_col {
            self.column_index(t)?;
            if protected.iter().any(|p| p == t) {
                return Err(AuditError::TargetIsProtected(t.to_string()));
            }
        }
        Ok(())
    }
}

fn missing_if_empty(cell: &str) -> Option<String> {
    if cell.is_empty() {
        None
    } else {
        Some(cell.to_string())
    }
}

/// Reads a comma-separated file with a mandatory header row.
pub fn read_csv(
    path: impl AsRef<Path>,
    target_col: Option<&str>,
    protected: &[String],
) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AuditError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file, target_col, protected)
}

/// Same as [`read_csv`] over any reader.
pub fn parse_csv<R: Read>(reader: R, target_col: Option<&str>, protected: &[String]) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(AuditError::MissingHeader);
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(AuditError::RaggedRow {
                row: i + 1,
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(missing_if_empty).collect());
    }
    let table = RawTable::new(header, rows)?;
    table.check_columns(target_col, protected)?;
    Ok(table)
}

/// Serializes a raw table back to CSV text (missing cells become empty fields).
pub fn write_csv(table: &RawTable) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(&table.columns)?;
    for row in &table.rows {
        wtr.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))?;
    }
    let bytes = wtr.into_inner().map_err(|e| AuditError::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Category (or bin) labels; the last one is always [`MISSING_LABEL`].
    pub categories: Vec<String>,
    /// Strictly increasing; one fewer than the number of non-missing bins.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bin_edges: Vec<f64>,
}

impl FeatureSpec {
    pub fn categorical<S: Into<String>>(name: impl Into<String>, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let mut categories: Vec<String> = Vec::new();
        let mut seen = HashSet::new();
        for l in labels {
            let l = l.into();
            if l == MISSING_LABEL {
                return Err(AuditError::ReservedLabel { column: name, value: l });
            }
            if !seen.insert(l.clone()) {
                return Err(AuditError::Binning {
                    column: name,
                    reason: format!("duplicate category {l:?}"),
                });
            }
            categories.push(l);
        }
        categories.push(MISSING_LABEL.to_string());
        Ok(FeatureSpec {
            name,
            kind: FeatureKind::Categorical,
            categories,
            bin_edges: Vec::new(),
        })
    }

    /// Continuous feature with explicit edges; `lo`/`hi` only shape the outer labels.
    pub fn continuous(name: impl Into<String>, edges: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        let name = name.into();
        validate_edges(&name, &edges)?;
        let mut categories = bin_labels(&edges, lo, hi);
        categories.push(MISSING_LABEL.to_string());
        Ok(FeatureSpec {
            name,
            kind: FeatureKind::Continuous,
            categories,
            bin_edges: edges,
        })
    }

    /// Sorts categorical labels (the missing label stays last).
    pub fn sort_categories(&mut self) {
        if self.kind == FeatureKind::Categorical {
            let n = self.categories.len() - 1;
            self.categories[..n].sort();
        }
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn missing_index(&self) -> u32 {
        (self.categories.len() - 1) as u32
    }

    pub fn missing_label(&self) -> &str {
        self.categories.last().map(String::as_str).unwrap_or(MISSING_LABEL)
    }

    pub fn category_index(&self, label: &str) -> Option<u32> {
        self.categories.iter().position(|c| c == label).map(|i| i as u32)
    }

    pub fn label(&self, index: u32) -> &str {
        &self.categories[index as usize]
    }

    /// Bin index for a finite value; intervals are left-closed.
    pub fn bin_of(&self, x: f64) -> u32 {
        self.bin_edges.partition_point(|e| *e <= x) as u32
    }

    /// Maps a raw cell to its category index; `None` means the value is unseen.
    pub fn encode_cell(&self, cell: Option<&str>) -> Option<u32> {
        let Some(v) = cell else {
            return Some(self.missing_index());
        };
        match self.kind {
            FeatureKind::Categorical => {
                if v == MISSING_LABEL {
                    return None;
                }
                self.category_index(v)
            }
            FeatureKind::Continuous => parse_finite(v).map(|x| self.bin_of(x)),
        }
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

fn validate_edges(column: &str, edges: &[f64]) -> Result<()> {
    if edges.is_empty() {
        return Err(AuditError::Binning {
            column: column.to_string(),
            reason: "need at least 2 bins".into(),
        });
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(AuditError::Binning {
            column: column.to_string(),
            reason: "bin edges must be finite".into(),
        });
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AuditError::Binning {
            column: column.to_string(),
            reason: "bin edges must be strictly increasing".into(),
        });
    }
    Ok(())
}

fn bin_labels(edges: &[f64], lo: f64, hi: f64) -> Vec<String> {
    let mut labels = Vec::with_capacity(edges.len() + 1);
    let first = edges[0];
    labels.push(if lo < first {
        format!("{lo}-{first}")
    } else {
        format!("<{first}")
    });
    for w in edges.windows(2) {
        labels.push(format!("{}-{}", w[0], w[1]));
    }
    let last = edges[edges.len() - 1];
    labels.push(if hi > last {
        format!("{last}-{hi}")
    } else {
        format!(">={last}")
    });
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_name: Option<String>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>, target_name: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(AuditError::DuplicateColumn(f.name.clone()));
            }
        }
        Ok(Schema { features, target_name })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Result<(usize, &FeatureSpec)> {
        self.feature_index(name)
            .map(|i| (i, &self.features[i]))
            .ok_or_else(|| AuditError::UnknownFeature(name.to_string()))
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }
}

/// How one continuous column is cut into bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSpec {
    Edges(Vec<f64>),
    Quantiles(usize),
}

/// Columns declared continuous, with their binning. Everything else is categorical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinningConfig {
    pub columns: BTreeMap<String, BinSpec>,
}

impl BinningConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: impl Into<String>, spec: BinSpec) -> Self {
        self.columns.insert(column.into(), spec);
        self
    }

    /// Adds an entry parsed from `col:edge,edge,...` or `col:qK`.
    pub fn push_entry(&mut self, entry: &str) -> Result<()> {
        let (col, spec) = parse_bin_entry(entry)?;
        self.columns.insert(col, spec);
        Ok(())
    }
}

fn parse_bin_entry(entry: &str) -> Result<(String, BinSpec)> {
    let bad = |why: &str| AuditError::InvalidParameter(format!("--bins {entry:?}: {why}"));
    // a bare column name means equal-frequency binning with the default count
    let (col, rest) = entry.rsplit_once(':').unwrap_or((entry, "q"));
    let col = col.trim();
    if col.is_empty() {
        return Err(bad("empty column name"));
    }
    let rest = rest.trim();
    if let Some(k) = rest.strip_prefix(['q', 'Q']) {
        let k = match k.trim() {
            "" => DEFAULT_QUANTILE_BINS,
            k => usize::from_str(k).map_err(|_| bad("bin count must be an integer"))?,
        };
        return Ok((col.to_string(), BinSpec::Quantiles(k)));
    }
    let edges = rest
        .split(',')
        .map(|e| e.trim().parse::<f64>().map_err(|_| bad("edges must be numbers")))
        .collect::<Result<Vec<_>>>()?;
    Ok((col.to_string(), BinSpec::Edges(edges)))
}

/// Equal-frequency edges for `k` bins. Values tied at a boundary stay in the
/// lower bin; coinciding boundaries collapse, so fewer bins may result.
pub fn quantile_edges(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = Vec::new();
    for j in 1..k {
        let below = (j * n).div_ceil(k);
        if below == 0 || below >= n {
            continue;
        }
        let v = sorted[below - 1];
        let next = sorted[below..].iter().copied().find(|x| *x > v);
        if let Some(next) = next {
            let edge = v + (next - v) / 2.0;
            if edges.last().is_none_or(|&last| edge > last) {
                edges.push(edge);
            }
        }
    }
    edges
}

/// Derives a schema for the protected columns of `raw`.
pub fn infer_schema(raw: &RawTable, protected: &[String], binning: &BinningConfig) -> Result<Schema> {
    for col in binning.columns.keys() {
        if !protected.iter().any(|p| p == col) {
            return Err(AuditError::Binning {
                column: col.clone(),
                reason: "binning given for a column that is not protected".into(),
            });
        }
    }
    let mut features = Vec::with_capacity(protected.len());
    for name in protected {
        let cells: Vec<Option<&str>> = raw.column(name)?.collect();
        if cells.is_empty() {
            return Err(AuditError::EmptyTable);
        }
        let spec = match binning.columns.get(name) {
            Some(bins) => continuous_feature(name, &cells, bins)?,
            None => {
                let mut seen = HashSet::new();
                let labels: Vec<&str> = cells.iter().flatten().copied().filter(|v| seen.insert(*v)).collect();
                FeatureSpec::categorical(name.as_str(), labels)?
            }
        };
        features.push(spec);
    }
    Schema::new(features, None)
}

fn continuous_feature(name: &str, cells: &[Option<&str>], bins: &BinSpec) -> Result<FeatureSpec> {
    let err = |reason: String| AuditError::Binning {
        column: name.to_string(),
        reason,
    };
    let values = cells
        .iter()
        .flatten()
        .map(|v| parse_finite(v).ok_or_else(|| err(format!("non-numeric value {v:?} in continuous column"))))
        .collect::<Result<Vec<f64>>>()?;
    let distinct: HashSet<u64> = values.iter().map(|x| x.to_bits()).collect();
    if distinct.len() < 2 {
        return Err(err("continuous column needs at least 2 distinct values".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let edges = match bins {
        BinSpec::Edges(e) => e.clone(),
        BinSpec::Quantiles(k) => {
            if *k < 2 {
                return Err(err(format!("requested {k} bins, need at least 2")));
            }
            quantile_edges(&values, *k)
        }
    };
    FeatureSpec::continuous(name, edges, lo, hi)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    /// Map unseen values to the missing category instead of failing.
    pub lenient: bool,
}

/// Rows as category indices, one column per protected feature.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTable {
    schema: Schema,
    n_rows: usize,
    cells: Vec<u32>,
    target: Option<Vec<bool>>,
}

impl EncodedTable {
    /// `cells` is row-major with `schema.n_features()` entries per row.
    pub fn new(schema: Schema, n_rows: usize, cells: Vec<u32>, target: Option<Vec<bool>>) -> Result<Self> {
        if n_rows == 0 {
            return Err(AuditError::EmptyTable);
        }
        let d = schema.n_features();
        if cells.len() != n_rows * d {
            return Err(AuditError::SchemaMismatch(format!(
                "{} cells for {n_rows} rows of {d} features",
                cells.len()
            )));
        }
        for (k, &c) in cells.iter().enumerate() {
            let f = &schema.features[k % d];
            if c as usize >= f.n_categories() {
                return Err(AuditError::SchemaMismatch(format!(
                    "row {}: index {c} out of range for {:?}",
                    k / d + 1,
                    f.name
                )));
            }
        }
        if let Some(t) = &target {
            if t.len() != n_rows {
                return Err(AuditError::TargetLength {
                    rows: n_rows,
                    found: t.len(),
                });
            }
        }
        Ok(EncodedTable {
            schema,
            n_rows,
            cells,
            target,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let d = self.n_features();
        &self.cells[i * d..(i + 1) * d]
    }

    pub fn cell(&self, row: usize, feature: usize) -> u32 {
        self.cells[row * self.n_features() + feature]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn target(&self) -> Option<&[bool]> {
        self.target.as_deref()
    }

    pub fn with_target(self, target: Vec<bool>) -> Result<Self> {
        EncodedTable::new(self.schema, self.n_rows, self.cells, Some(target))
    }

    /// Label of every cell, per row; the inverse of encoding.
    pub fn decode_row(&self, i: usize) -> Vec<&str> {
        self.row(i)
            .iter()
            .zip(&self.schema.features)
            .map(|(&c, f)| f.label(c))
            .collect()
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> Option<EncodedTable> {
        let d = self.n_features();
        let idx: Vec<usize> = (0..self.n_rows).filter(|&i| keep(i)).collect();
        if idx.is_empty() {
            return None;
        }
        let mut cells = Vec::with_capacity(idx.len() * d);
        for &i in &idx {
            cells.extend_from_slice(self.row(i));
        }
        let target = self.target.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect());
        Some(EncodedTable {
            schema: self.schema.clone(),
            n_rows: idx.len(),
            cells,
            target,
        })
    }
}

/// Parses a binary outcome: 0/1, true/false, yes/no, case-insensitive.
pub fn parse_target(value: &str) -> Option<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Reads a target column as booleans, failing on the first invalid row.
pub fn target_column(raw: &RawTable, target_col: &str) -> Result<Vec<bool>> {
    raw.column(target_col)?
        .enumerate()
        .map(|(i, v)| {
            v.and_then(parse_target).ok_or_else(|| AuditError::InvalidTarget {
                row: i + 1,
                value: v.unwrap_or("").to_string(),
            })
        })
        .collect()
}

pub fn encode(raw: &RawTable, schema: &Schema, opts: EncodeOptions) -> Result<EncodedTable> {
    if raw.n_rows() == 0 {
        return Err(AuditError::EmptyTable);
    }
    let cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| raw.column_index(&f.name))
        .collect::<Result<_>>()?;
    let d = cols.len();
    let mut cells = Vec::with_capacity(raw.n_rows() * d);
    for (i, row) in raw.rows().iter().enumerate() {
        for (f, &j) in schema.features.iter().zip(&cols) {
            let cell = row[j].as_deref();
            let idx = match f.encode_cell(cell) {
                Some(idx) => idx,
                None if opts.lenient => f.missing_index(),
                None => {
                    return Err(AuditError::UnseenCategory {
                        column: f.name.clone(),
                        row: i + 1,
                        value: cell.unwrap_or("").to_string(),
                    })
                }
            };
            cells.push(idx);
        }
    }
    let target = match &schema.target_name {
        Some(t) if raw.column_index(t).is_ok() => Some(target_column(raw, t)?),
        _ => None,
    };
    EncodedTable::new(schema.clone(), raw.n_rows(), cells, target)
}

/// Splits rows into (target = 1, target = 0), preserving row order.
pub fn split_by_target(table: &EncodedTable) -> Result<(EncodedTable, EncodedTable)> {
    let target = table.target().ok_or(AuditError::NoTarget)?;
    let pos = table.select(|i| target[i]).ok_or(AuditError::DegenerateTarget(1))?;
    let neg = table.select(|i| !target[i]).ok_or(AuditError::DegenerateTarget(0))?;
    Ok((pos, neg))
}
