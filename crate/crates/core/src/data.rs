//! Matrix containers for features, labels and observation masks, plus CSV
//! ingestion.
//!
//! Features are stored feature-major (`d x n`, one row per feature, one
//! column per sample). Labels and masks are sample-major (`n x k`).

use std::fmt;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// How a CSV file lays out its matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    RowsAreFeatures,
    RowsAreSamples,
}

/// A numeric table exactly as laid out in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub values: Array2<f64>,
    pub header: Option<Vec<String>>,
}

impl CsvMatrix {
    /// Returns the table in feature-major layout, transposing when the file
    /// stores one sample per row.
    pub fn into_orientation(self, orientation: Orientation) -> CsvMatrix {
        match orientation {
            Orientation::RowsAreFeatures => self,
            Orientation::RowsAreSamples => CsvMatrix {
                values: self.values.t().to_owned(),
                header: self.header,
            },
        }
    }
}

/// Reads a rectangular numeric CSV. A first row containing any cell that does
/// not parse as a number is treated as a header.
///
/// Row and column numbers in errors are 1-based and count the header line.
pub fn load_csv_matrix(path: impl AsRef<Path>) -> Result<CsvMatrix, DataError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv_matrix(bytes.as_slice(), path)
}

/// Parses CSV from any reader; `origin` is only used in error messages.
pub fn parse_csv_matrix<R: Read>(reader: R, origin: &Path) -> Result<CsvMatrix, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header = None;
    let mut data: Vec<f64> = Vec::new();
    let mut width = 0usize;
    let mut rows = 0usize;

    for (line, record) in rdr.records().enumerate() {
        let row = line + 1;
        let record = record.map_err(|source| DataError::Csv {
            path: origin.to_path_buf(),
            source,
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if line == 0 && record.iter().any(|cell| cell.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_owned).collect::<Vec<_>>());
            width = record.len();
            continue;
        }
        if width == 0 {
            width = record.len();
        } else if record.len() != width {
            return Err(DataError::Ragged {
                path: origin.to_path_buf(),
                row,
                found: record.len(),
                expected: width,
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| DataError::NotNumeric {
                path: origin.to_path_buf(),
                row,
                col: c + 1,
                cell: cell.to_owned(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    path: origin.to_path_buf(),
                    row,
                    col: c + 1,
                    cell: cell.to_owned(),
                });
            }
            data.push(value);
        }
        rows += 1;
    }

    if rows == 0 {
        return Err(DataError::Empty {
            path: origin.to_path_buf(),
        });
    }
    let values = Array2::from_shape_vec((rows, width), data)
        .map_err(|e| DataError::Shape(e.to_string()))?;
    Ok(CsvMatrix { values, header })
}

/// Writes a matrix as CSV using the shortest decimal form that reads back to
/// the identical `f64`.
pub fn write_csv_matrix(
    path: impl AsRef<Path>,
    values: &Array2<f64>,
    header: Option<&[String]>,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::write(path, format_csv_matrix(values, header)).map_err(io_err)
}

pub fn format_csv_matrix(values: &Array2<f64>, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in values.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Reads a single-column CSV of group (participant) identifiers. The first
/// line is a header.
pub fn load_groups(path: impl AsRef<Path>) -> Result<Vec<String>, DataError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_groups(bytes.as_slice(), path)
}

/// [`load_groups`] from any reader; `origin` is only used in error messages.
pub fn parse_groups<R: Read>(reader: R, origin: &Path) -> Result<Vec<String>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut groups = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|source| DataError::Csv {
            path: origin.to_path_buf(),
            source,
        })?;
        groups.push(record.get(0).unwrap_or_default().to_owned());
    }
    if groups.is_empty() {
        return Err(DataError::Empty {
            path: origin.to_path_buf(),
        });
    }
    Ok(groups)
}

/// Feature matrix, `d x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    names: Option<Vec<String>>,
    constant_rows: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, names: Option<Vec<String>>) -> Result<Self, DataError> {
        let (d, n) = values.dim();
        if d < 1 || n < 2 {
            return Err(DataError::Shape(format!(
                "feature matrix needs d >= 1 and n >= 2, got {d}x{n}"
            )));
        }
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::Shape(format!(
                "non-finite feature value at ({r}, {c})"
            )));
        }
        if let Some(names) = &names {
            if names.len() != d {
                return Err(DataError::Shape(format!(
                    "{} feature names for {d} features",
                    names.len()
                )));
            }
        }
        let constant_rows = values.rows().into_iter().map(row_is_constant).collect();
        Ok(Self {
            values,
            names,
            constant_rows,
        })
    }

    pub fn from_csv(path: impl AsRef<Path>, orientation: Orientation) -> Result<Self, DataError> {
        let m = load_csv_matrix(path)?.into_orientation(orientation);
        let names = match orientation {
            Orientation::RowsAreSamples => m.header,
            // a header over a feature-major file names the samples
            Orientation::RowsAreFeatures => None,
        };
        Self::new(m.values, names)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    /// Rows whose values do not vary across samples.
    pub fn constant_rows(&self) -> &[bool] {
        &self.constant_rows
    }

    /// Keeps only the given sample columns, in the given order.
    pub fn select_samples(&self, samples: &[usize]) -> Array2<f64> {
        self.values.select(Axis(1), samples)
    }

    /// Keeps only the given feature rows, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<Self, DataError> {
        let names = self
            .names
            .as_ref()
            .map(|n| features.iter().map(|&i| n[i].clone()).collect());
        Self::new(self.values.select(Axis(0), features), names)
    }
}

fn row_is_constant(row: ndarray::ArrayView1<f64>) -> bool {
    let n = row.len() as f64;
    let mean = row.sum() / n;
    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() <= 1e-12 * mean.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Zscore,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zscore" => Ok(Self::Zscore),
            "none" => Ok(Self::None),
            _ => Err(format!("unknown normalization {s:?} (zscore, none)")),
        }
    }
}

/// Standardises each feature row to zero mean and unit (population)
/// variance. Constant rows become all zeros and stay flagged.
pub fn normalize_features(x: &FeatureMatrix, mode: Normalization) -> FeatureMatrix {
    match mode {
        Normalization::None => x.clone(),
        Normalization::Zscore => {
            let mut values = x.values.clone();
            let n = values.ncols() as f64;
            for (mut row, &constant) in values.rows_mut().into_iter().zip(&x.constant_rows) {
                if constant {
                    row.fill(0.0);
                    continue;
                }
                let mean = row.sum() / n;
                let std = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                row.mapv_inplace(|v| (v - mean) / std);
            }
            FeatureMatrix {
                values,
                names: x.names.clone(),
                constant_rows: x.constant_rows.clone(),
            }
        }
    }
}

/// Label matrix, `n x k`, entries expected in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    values: Array2<f64>,
    names: Option<Vec<String>>,
}

impl LabelMatrix {
    /// Wraps a matrix without checking binariness; [`validate_dataset`]
    /// reports non-binary entries.
    pub fn new(values: Array2<f64>) -> Self {
        Self {
            values,
            names: None,
        }
    }

    pub fn with_names(mut self, names: Option<Vec<String>>) -> Self {
        self.names = names;
        self
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let m = load_csv_matrix(path)?;
        Ok(Self::new(m.values).with_names(m.header))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_labels(&self) -> usize {
        self.values.ncols()
    }
}

/// Observation mask, `n x k`: 1 where the label is known, 0 where missing.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMatrix {
    values: Array2<f64>,
}

impl MaskMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn all_observed(n: usize, k: usize) -> Self {
        Self {
            values: Array2::ones((n, k)),
        }
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Ok(Self::new(load_csv_matrix(path)?.values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.values[[i, j]] != 0.0
    }
}

/// Features, (possibly incomplete) labels and their observation mask.
///
/// At masked cells `labels` holds 0; the removed truth, when known, lives in
/// `hidden_labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: LabelMatrix,
    pub mask: MaskMatrix,
    pub hidden_labels: Option<LabelMatrix>,
    /// Optional participant identifier per sample, used for grouped splits.
    pub groups: Option<Vec<String>>,
}

impl Dataset {
    /// Assembles a dataset and rejects it if [`validate_dataset`] reports any
    /// violation. A missing mask means every label is observed.
    pub fn new(
        features: FeatureMatrix,
        labels: LabelMatrix,
        mask: Option<MaskMatrix>,
    ) -> Result<Self, DataError> {
        let ds = Self::from_parts(features, labels, mask);
        ds.validated()
    }

    /// Assembles without validation.
    pub fn from_parts(features: FeatureMatrix, labels: LabelMatrix, mask: Option<MaskMatrix>) -> Self {
        let mask = mask
            .unwrap_or_else(|| MaskMatrix::all_observed(labels.n_samples(), labels.n_labels()));
        Self {
            features,
            labels,
            mask,
            hidden_labels: None,
            groups: None,
        }
    }

    pub fn validated(self) -> Result<Self, DataError> {
        let report = validate_dataset(&self);
        if report.is_empty() {
            Ok(self)
        } else {
            Err(DataError::Invalid(
                report.violations.iter().map(ToString::to_string).collect(),
            ))
        }
    }

    pub fn n_samples(&self) -> usize {
        self.features.n_samples()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_features()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.n_labels()
    }

    /// Labels with hidden truth restored at masked cells. Without hidden
    /// labels this is just the stored labels.
    pub fn complete_labels(&self) -> LabelMatrix {
        match &self.hidden_labels {
            None => self.labels.clone(),
            Some(hidden) => {
                let mut values = self.labels.values.clone();
                ndarray::Zip::from(&mut values)
                    .and(&self.mask.values)
                    .and(&hidden.values)
                    .for_each(|y, &p, &h| {
                        if p == 0.0 {
                            *y = h;
                        }
                    });
                LabelMatrix {
                    values,
                    names: self.labels.names.clone(),
                }
            }
        }
    }

    /// Restricts every member to the given samples, in order.
    pub fn subset(&self, samples: &[usize]) -> Result<Self, DataError> {
        let features = FeatureMatrix::new(
            self.features.select_samples(samples),
            self.features.names.clone(),
        )?;
        let rows = |m: &Array2<f64>| m.select(Axis(0), samples);
        Ok(Self {
            features,
            labels: LabelMatrix {
                values: rows(&self.labels.values),
                names: self.labels.names.clone(),
            },
            mask: MaskMatrix::new(rows(&self.mask.values)),
            hidden_labels: self.hidden_labels.as_ref().map(|h| LabelMatrix {
                values: rows(&h.values),
                names: h.names.clone(),
            }),
            groups: self
                .groups
                .as_ref()
                .map(|g| samples.iter().map(|&i| g[i].clone()).collect()),
        })
    }
}

/// One broken dataset invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewFeatures(usize),
    TooFewSamples(usize),
    NonFiniteFeature { row: usize, col: usize },
    TooFewLabels(usize),
    LabelSampleCount { features: usize, labels: usize },
    NonBinaryLabel { row: usize, col: usize, value: f64 },
    MaskShape { labels: (usize, usize), mask: (usize, usize) },
    NonBinaryMask { row: usize, col: usize, value: f64 },
    UnmaskedHiddenLabel { row: usize, col: usize },
    HiddenShape { labels: (usize, usize), hidden: (usize, usize) },
    GroupCount { samples: usize, groups: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewFeatures(d) => write!(f, "too few features: {d} (need >= 1)"),
            Violation::TooFewSamples(n) => write!(f, "too few samples: {n} (need >= 2)"),
            Violation::NonFiniteFeature { row, col } => {
                write!(f, "non-finite feature at ({row}, {col})")
            }
            Violation::TooFewLabels(k) => write!(f, "too few label dimensions: {k} (need >= 2)"),
            Violation::LabelSampleCount { features, labels } => write!(
                f,
                "sample count mismatch: features have {features}, labels have {labels}"
            ),
            Violation::NonBinaryLabel { row, col, value } => {
                write!(f, "non-binary label {value} at ({row}, {col})")
            }
            Violation::MaskShape { labels, mask } => {
                write!(f, "mask shape {mask:?} differs from label shape {labels:?}")
            }
            Violation::NonBinaryMask { row, col, value } => {
                write!(f, "non-binary mask entry {value} at ({row}, {col})")
            }
            Violation::UnmaskedHiddenLabel { row, col } => {
                write!(f, "unmasked hidden label: mask is 0 but label is nonzero at ({row}, {col})")
            }
            Violation::HiddenShape { labels, hidden } => write!(
                f,
                "hidden label shape {hidden:?} differs from label shape {labels:?}"
            ),
            Violation::GroupCount { samples, groups } => {
                write!(f, "{groups} group ids for {samples} samples")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

fn is_binary(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

/// Lists every violated dataset invariant; an empty report means the
/// dataset is usable.
pub fn validate_dataset(ds: &Dataset) -> ValidationReport {
    let mut violations = Vec::new();
    let (d, n) = ds.features.values.dim();
    if d < 1 {
        violations.push(Violation::TooFewFeatures(d));
    }
    if n < 2 {
        violations.push(Violation::TooFewSamples(n));
    }
    for ((row, col), v) in ds.features.values.indexed_iter() {
        if !v.is_finite() {
            violations.push(Violation::NonFiniteFeature { row, col });
        }
    }

    let labels = ds.labels.values.dim();
    if labels.1 < 2 {
        violations.push(Violation::TooFewLabels(labels.1));
    }
    if labels.0 != n {
        violations.push(Violation::LabelSampleCount {
            features: n,
            labels: labels.0,
        });
    }
    for ((row, col), &value) in ds.labels.values.indexed_iter() {
        if !is_binary(value) {
            violations.push(Violation::NonBinaryLabel { row, col, value });
        }
    }

    let mask = ds.mask.values.dim();
    if mask != labels {
        violations.push(Violation::MaskShape { labels, mask });
    } else {
        for ((row, col), &value) in ds.mask.values.indexed_iter() {
            if !is_binary(value) {
                violations.push(Violation::NonBinaryMask { row, col, value });
            } else if value == 0.0 && ds.labels.values[[row, col]] != 0.0 {
                violations.push(Violation::UnmaskedHiddenLabel { row, col });
            }
        }
    }

    if let Some(hidden) = &ds.hidden_labels {
        let hidden = hidden.values.dim();
        if hidden != labels {
            violations.push(Violation::HiddenShape { labels, hidden });
        }
    }
    if let Some(groups) = &ds.groups {
        if groups.len() != n {
            violations.push(Violation::GroupCount {
                samples: n,
                groups: groups.len(),
            });
        }
    }
    ValidationReport { violations }
}
