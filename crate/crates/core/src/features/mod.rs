//! Design-matrix assembly and the feature-side transforms.
//!
//! A [`FeatureFrame`] is a dense, date-indexed matrix of finite values with
//! optional 0/1 labels. Everything fitted here (correlations, PCA
//! statistics, ridge standardization) is computed on an explicit range of
//! training rows and only applied to the rest.

mod linear;
mod prune;

use std::fmt::Write as _;
use std::io::Read;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{IndicatorColumn, IndicatorKind};
use crate::preprocess::Labels;
use crate::sentiment::{DailySentiment, SENTIMENT_FEATURES};

pub use linear::{apply_pca, fit_pca, ridge_fit, standardize_stats, PcaTransform, RidgeDiagnostic};
pub use prune::{max_abs_correlation, pearson, prune_correlated, DropReason, DroppedFeature, PruneReport};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("calendar mismatch: {0}")]
    CalendarMismatch(String),
    #[error("no date has every column defined and a label")]
    EmptyIntersection,
    #[error("column `{column}` has a non-finite value at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("duplicate column name `{0}`")]
    DuplicateName(String),
    #[error("row {row} has {got} values, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("{0} labels for {1} rows")]
    LabelCount(usize, usize),
    #[error("label must be 0 or 1, got {0}")]
    LabelValue(u8),
    #[error("frame has no labels")]
    MissingLabels,
    #[error("correlation threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("variance target must lie in (0, 1], got {0}")]
    VarianceTarget(f64),
    #[error("column `{0}` is constant on the training rows")]
    ConstantColumn(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("row range {start}..{end} is outside a frame of {rows} rows")]
    RowRange { start: usize, end: usize, rows: usize },
    #[error("ridge system is singular at lambda = {0}; use lambda > 0")]
    Singular(f64),
    #[error("lambda must be finite and >= 0, got {0}")]
    Lambda(f64),
    #[error("train fraction must lie in (0, 1), got {0}")]
    TrainFraction(f64),
    #[error("split of {rows} rows at fraction {fraction} leaves one side empty")]
    EmptySplit { rows: usize, fraction: f64 },
    #[error("columns do not match: expected [{expected}], found [{found}]")]
    Schema { expected: String, found: String },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    /// Row-major.
    values: Vec<f64>,
    labels: Option<Vec<u8>>,
}

impl FeatureFrame {
    pub fn new(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self, FeatureError> {
        let width = names.len();
        if rows.len() != dates.len() {
            return Err(FeatureError::CalendarMismatch(format!(
                "{} rows for {} dates",
                rows.len(),
                dates.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(FeatureError::RowWidth {
                    row: i,
                    got: row.len(),
                    expected: width,
                });
            }
            values.extend(row);
        }
        Self::from_parts(dates, names, values, labels)
    }

    fn from_parts(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        values: Vec<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self, FeatureError> {
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(FeatureError::DuplicateName(name.clone()));
            }
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(FeatureError::CalendarMismatch(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        let width = names.len();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                column: names[pos % width].clone(),
                row: pos / width,
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != dates.len() {
                return Err(FeatureError::LabelCount(labels.len(), dates.len()));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
                return Err(FeatureError::LabelValue(bad));
            }
        }
        Ok(Self {
            dates,
            names,
            values,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; a zero-width frame has empty rows
        let w = self.n_cols().max(1);
        let empty = self.n_cols() == 0;
        self.values
            .chunks_exact(w)
            .map(move |r| if empty { &r[..0] } else { r })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.column_range(j, 0..self.n_rows())
    }

    pub fn column_range(&self, j: usize, rows: Range<usize>) -> Vec<f64> {
        let w = self.n_cols();
        rows.map(|i| self.values[i * w + j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn slice_rows(&self, range: Range<usize>) -> Result<Self, FeatureError> {
        self.check_rows(&range)?;
        let w = self.n_cols();
        Ok(Self {
            dates: self.dates[range.clone()].to_vec(),
            names: self.names.clone(),
            values: self.values[range.start * w..range.end * w].to_vec(),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
        })
    }

    pub fn select_columns(&self, indices: &[usize]) -> Self {
        let names = indices.iter().map(|&j| self.names[j].clone()).collect();
        let mut values = Vec::with_capacity(self.n_rows() * indices.len());
        for row in self.rows() {
            values.extend(indices.iter().map(|&j| row[j]));
        }
        Self {
            dates: self.dates.clone(),
            names,
            values,
            labels: self.labels.clone(),
        }
    }

    /// Frame without the named columns; unknown names are ignored.
    pub fn without_columns(&self, drop: &[&str]) -> Self {
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&j| !drop.contains(&self.names[j].as_str()))
            .collect();
        self.select_columns(&keep)
    }

    pub fn with_labels(mut self, labels: Option<Vec<u8>>) -> Result<Self, FeatureError> {
        self.labels = labels;
        Self::from_parts(self.dates, self.names, self.values, self.labels)
    }

    pub(crate) fn check_rows(&self, range: &Range<usize>) -> Result<(), FeatureError> {
        if range.start > range.end || range.end > self.n_rows() {
            return Err(FeatureError::RowRange {
                start: range.start,
                end: range.end,
                rows: self.n_rows(),
            });
        }
        Ok(())
    }

    /// Errors unless this frame's columns are exactly `expected`, in order.
    pub fn check_schema(&self, expected: &[String]) -> Result<(), FeatureError> {
        if self.names != expected {
            return Err(FeatureError::Schema {
                expected: expected.join(", "),
                found: self.names.join(", "),
            });
        }
        Ok(())
    }

    /// `date,<names...>,label`; the label cell is empty for unlabeled frames.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("date");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",label\n");
        for (i, row) in self.rows().enumerate() {
            let _ = write!(out, "{}", self.dates[i].format("%Y-%m-%d"));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            match &self.labels {
                Some(l) => {
                    let _ = writeln!(out, ",{}", l[i]);
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn from_csv(reader: impl Read) -> Result<Self, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| FeatureError::Csv {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 2 || cols[0] != "date" || cols[cols.len() - 1] != "label" {
            return Err(FeatureError::Csv {
                line: 1,
                message: "header must be `date,<names...>,label`".into(),
            });
        }
        let names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let mut dates = Vec::new();
        let mut values = Vec::new();
        let mut labels: Vec<Option<u8>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| FeatureError::Csv {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let err = |message: String| FeatureError::Csv { line, message };
            dates.push(
                NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                    .map_err(|e| err(format!("bad date `{}`: {e}", &rec[0])))?,
            );
            for j in 0..names.len() {
                let raw = &rec[j + 1];
                values.push(
                    raw.parse::<f64>()
                        .map_err(|_| err(format!("column `{}`: cannot parse `{raw}`", names[j])))?,
                );
            }
            let raw = rec[names.len() + 1].trim();
            labels.push(match raw {
                "" => None,
                "0" => Some(0),
                "1" => Some(1),
                other => return Err(err(format!("label must be 0, 1 or empty, got `{other}`"))),
            });
        }
        let labels = if labels.iter().all(Option::is_none) {
            None
        } else if labels.iter().all(Option::is_some) {
            Some(labels.into_iter().flatten().collect())
        } else {
            return Err(FeatureError::Csv {
                line: 0,
                message: "label column is partially empty".into(),
            });
        };
        Self::from_parts(dates, names, values, labels)
    }
}

/// Joins indicator columns, optional daily sentiment, and labels on the
/// trading calendar.
///
/// Rows are the dates where every column is defined and a label exists.
/// Technical columns come first in [`IndicatorKind::ALL`] order, then the
/// four sentiment means.
pub fn assemble(
    columns: &[IndicatorColumn],
    sentiment: Option<&[DailySentiment]>,
    calendar: &[NaiveDate],
    labels: &Labels,
) -> Result<FeatureFrame, FeatureError> {
    let n = calendar.len();
    for col in columns {
        if col.warm_up + col.values.len() != n {
            return Err(FeatureError::CalendarMismatch(format!(
                "column `{}` covers {} days, calendar has {n}",
                col.name,
                col.warm_up + col.values.len()
            )));
        }
    }
    if let Some(days) = sentiment {
        if days.len() != n || days.iter().zip(calendar).any(|(d, c)| d.date != *c) {
            return Err(FeatureError::CalendarMismatch(
                "sentiment days differ from the bar calendar".into(),
            ));
        }
    }
    if labels.dates.len() > n || labels.dates[..] != calendar[..labels.dates.len()] {
        return Err(FeatureError::CalendarMismatch(
            "label dates are not a prefix of the bar calendar".into(),
        ));
    }

    let mut ordered: Vec<&IndicatorColumn> = columns.iter().collect();
    ordered.sort_by_key(|c| {
        IndicatorKind::from_name(&c.name).map_or(usize::MAX, |k| k as usize)
    });

    let first = columns.iter().map(|c| c.warm_up).max().unwrap_or(0);
    let end = labels.len();
    if first >= end {
        return Err(FeatureError::EmptyIntersection);
    }

    let mut names: Vec<String> = ordered.iter().map(|c| c.name.clone()).collect();
    if sentiment.is_some() {
        names.extend(SENTIMENT_FEATURES.iter().map(|s| s.to_string()));
    }
    let width = names.len();
    let mut values = Vec::with_capacity((end - first) * width);
    for t in first..end {
        for col in &ordered {
            values.push(col.values[t - col.warm_up]);
        }
        if let Some(days) = sentiment {
            values.extend(days[t].features());
        }
    }
    FeatureFrame::from_parts(
        calendar[first..end].to_vec(),
        names,
        values,
        Some(labels.values[first..end].to_vec()),
    )
}

/// Number of leading training rows: `ceil(n * fraction)`.
pub fn train_size(n_rows: usize, fraction: f64) -> Result<usize, FeatureError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(FeatureError::TrainFraction(fraction));
    }
    // The small slack keeps products like 9 * (2/3) from rounding up past an integer.
    let n_train = (n_rows as f64 * fraction - 1e-9).ceil().max(0.0) as usize;
    if n_train == 0 || n_train >= n_rows {
        return Err(FeatureError::EmptySplit {
            rows: n_rows,
            fraction,
        });
    }
    Ok(n_train)
}

/// First `ceil(n * fraction)` rows train, the rest test. No shuffling.
pub fn chronological_split(
    frame: &FeatureFrame,
    train_fraction: f64,
) -> Result<(FeatureFrame, FeatureFrame), FeatureError> {
    let n_train = train_size(frame.n_rows(), train_fraction)?;
    Ok((
        frame.slice_rows(0..n_train)?,
        frame.slice_rows(n_train..frame.n_rows())?,
    ))
}
