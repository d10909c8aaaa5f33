use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

const SPLIT_STREAM: u64 = 0x5_9117;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::structural(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::structural("ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Column roles for CSV ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    /// Binary 0/1 outcome column.
    pub label: String,
    pub categorical: Vec<String>,
    pub numeric: Vec<String>,
    /// Optional integer id column; row numbers are used otherwise.
    pub id: Option<String>,
}

/// Encoded features (one-hot categoricals, raw numerics) and binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub ids: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Feature columns that hold numeric inputs (standardized per fold).
    pub numeric_columns: Vec<usize>,
}

impl TabularDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().map(|&l| l as f64).sum::<f64>() / self.len().max(1) as f64
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<TabularDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    let ds = ingest_reader(file, schema)?;
    info!(
        "ingested {}: {} rows, {} features",
        path.as_ref().display(),
        ds.len(),
        ds.features.cols()
    );
    Ok(ds)
}

/// Reads CSV with a header row. Categorical columns are one-hot encoded
/// over their sorted distinct values; numeric columns are kept raw.
pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<TabularDataset> {
    if schema.label.is_empty() {
        return Err(Error::config("schema has no label column"));
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let col = |name: &str| {
        index.get(name).copied().ok_or_else(|| Error::Ingestion {
            row: 0,
            message: format!("missing column {name:?}"),
        })
    };
    let label_col = col(&schema.label)?;
    let cat_cols = schema.categorical.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let num_cols = schema.numeric.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let id_col = schema.id.as_deref().map(col).transpose()?;

    let records = rdr
        .records()
        .enumerate()
        .map(|(r, rec)| {
            rec.map_err(|e| Error::Ingestion {
                row: r + 2,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut levels: Vec<BTreeSet<String>> = vec![BTreeSet::new(); cat_cols.len()];
    for rec in &records {
        for (set, &c) in levels.iter_mut().zip(&cat_cols) {
            set.insert(rec.get(c).unwrap_or("").trim().to_string());
        }
    }
    let levels: Vec<Vec<String>> = levels.into_iter().map(|s| s.into_iter().collect()).collect();

    let mut feature_names = Vec::new();
    for (name, lv) in schema.categorical.iter().zip(&levels) {
        feature_names.extend(lv.iter().map(|l| format!("{name}={l}")));
    }
    let numeric_columns: Vec<usize> = (feature_names.len()..feature_names.len() + num_cols.len()).collect();
    feature_names.extend(schema.numeric.iter().cloned());

    let cols = feature_names.len();
    let mut data = Vec::with_capacity(records.len() * cols);
    let mut labels = Vec::with_capacity(records.len());
    let mut ids = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        // Row numbers count the header as row 1.
        let row = r + 2;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        for (lv, &c) in levels.iter().zip(&cat_cols) {
            let v = field(c);
            data.extend(lv.iter().map(|l| if l == v { 1.0 } else { 0.0 }));
        }
        for (name, &c) in schema.numeric.iter().zip(&num_cols) {
            let v: f64 = field(c).parse().map_err(|_| Error::Ingestion {
                row,
                message: format!("column {name:?}: cannot parse {:?} as a number", field(c)),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row,
                    message: format!("column {name:?} is not finite"),
                });
            }
            data.push(v);
        }
        let label = match field(label_col).parse::<f64>() {
            Ok(v) if v == 0.0 => 0,
            Ok(v) if v == 1.0 => 1,
            _ => {
                return Err(Error::Ingestion {
                    row,
                    message: format!("label {:?} is not 0 or 1", field(label_col)),
                })
            }
        };
        labels.push(label);
        ids.push(match id_col {
            Some(c) => field(c).parse().map_err(|_| Error::Ingestion {
                row,
                message: format!("id {:?} is not a non-negative integer", field(c)),
            })?,
            None => r,
        });
    }
    let features = Matrix::new(records.len(), cols, data)?;
    info!(
        "encoded {} categorical column(s) into {} indicator(s); {} numeric column(s)",
        cat_cols.len(),
        cols - num_cols.len(),
        num_cols.len()
    );
    Ok(TabularDataset {
        features,
        labels,
        ids,
        feature_names,
        numeric_columns,
    })
}

/// Mean/std of selected columns, fitted on one fold and applied to any rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    columns: Vec<usize>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix, columns: &[usize]) -> Self {
        let n = x.rows().max(1) as f64;
        let means: Vec<f64> = columns
            .iter()
            .map(|&c| x.iter_rows().map(|r| r[c]).sum::<f64>() / n)
            .collect();
        let stds = columns
            .iter()
            .zip(&means)
            .map(|(&c, &m)| {
                let var = x.iter_rows().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            columns: columns.to_vec(),
            means,
            stds,
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        let cols = out.cols;
        for row in out.data.chunks_mut(cols.max(1)) {
            for ((&c, &m), &s) in self.columns.iter().zip(&self.means).zip(&self.stds) {
                row[c] = (row[c] - m) / s;
            }
        }
        out
    }
}

/// Row indices of one train/test split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle split; `repetition` selects an independent permutation.
/// Both index lists come back sorted.
pub fn split(n_rows: usize, train_ratio: f64, repetition: u64, seed: u64) -> Result<Split> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::config(format!(
            "train ratio must lie in (0, 1), got {train_ratio}"
        )));
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    RandomSource::derive(seed, &[SPLIT_STREAM, repetition]).shuffle(&mut idx);
    let n_train = (train_ratio * n_rows as f64).round() as usize;
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
