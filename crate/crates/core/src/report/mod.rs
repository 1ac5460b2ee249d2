//! Per-model score tables, human-rating means and metric/human alignment.

mod stats;
mod table;

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stats::{average_ranks, pearson, spearman};
pub use table::{read_table_csv, render_csv, render_markdown, Format, Table, TableRow, COLUMN_TITLES};

use crate::evalkit::{Metric, MetricVector};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("rating row {row}: {reason}")]
    Rating { row: usize, reason: String },
    #[error("alignment needs at least {min} models with both scores, got {got}")]
    TooFewModels { min: usize, got: usize },
    #[error("table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = ReportError> = std::result::Result<T, E>;

/// Metrics for one generated sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub model: String,
    pub entry: String,
    pub metrics: MetricVector,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// One aggregated table cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Mean score times 100, rounded to 2 decimals; `None` when no sample scored.
    pub value: Option<f64>,
    /// Samples that contributed.
    pub used: usize,
    /// Samples of this model.
    pub total: usize,
}

impl Cell {
    pub fn coverage(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.used as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: String,
    /// In [`Metric::ALL`] order.
    pub cells: Vec<Cell>,
}

impl ModelScores {
    pub fn cell(&self, metric: Metric) -> &Cell {
        &self.cells[Metric::ALL.iter().position(|&m| m == metric).expect("metric listed")]
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Order-independent mean: values are summed in sorted order.
fn stable_mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Per-model means of every metric, scaled to 0..100. Failed and
/// not-applicable outcomes are left out of the mean and show up as reduced
/// coverage. Models are sorted by name.
pub fn aggregate(results: &[SampleResult]) -> Vec<ModelScores> {
    let mut by_model: BTreeMap<&str, Vec<&SampleResult>> = BTreeMap::new();
    for r in results {
        by_model.entry(&r.model).or_default().push(r);
    }
    by_model
        .into_iter()
        .map(|(model, rows)| {
            let cells = Metric::ALL
                .iter()
                .map(|&m| {
                    let mut values: Vec<f64> = rows.iter().filter_map(|r| r.metrics.get(m).value()).collect();
                    let used = values.len();
                    Cell {
                        value: stable_mean(&mut values).map(|v| round2(v * 100.0)),
                        used,
                        total: rows.len(),
                    }
                })
                .collect();
            ModelScores {
                model: model.to_string(),
                cells,
            }
        })
        .collect()
}

/// One rater's 1..5 scores for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanRating {
    pub rater: String,
    pub entry: String,
    pub model: String,
    pub smooth: u8,
    pub motion: u8,
    pub appeal: u8,
    pub tvc: u8,
    pub ivc: u8,
    pub ipc: u8,
    /// Separate overall rating, when the ingest file has an `overall` column.
    #[serde(default)]
    pub overall: Option<u8>,
}

impl HumanRating {
    /// Ratings in [`Metric::ALL`] order.
    pub fn dimensions(&self) -> [u8; 6] {
        [self.smooth, self.motion, self.appeal, self.tvc, self.ivc, self.ipc]
    }

    fn validate(&self, row: usize) -> Result<()> {
        let bad = self
            .dimensions()
            .into_iter()
            .chain(self.overall)
            .find(|r| !(1..=5).contains(r));
        match bad {
            Some(r) => Err(ReportError::Rating {
                row,
                reason: format!("rating {r} is outside 1..=5"),
            }),
            None => Ok(()),
        }
    }
}

/// Ratings CSV with header `rater,entry,model,smooth,motion,appeal,tvc,ivc,ipc`
/// and an optional trailing `overall` column.
pub fn read_ratings_csv(reader: impl Read) -> Result<Vec<HumanRating>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let rating: HumanRating = row.map_err(|e| ReportError::Rating {
            row: i + 1,
            reason: e.to_string(),
        })?;
        rating.validate(i + 1)?;
        out.push(rating);
    }
    Ok(out)
}

/// Human means on the 0..100 scale, per model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanScores {
    pub model: String,
    /// In [`Metric::ALL`] order.
    pub dimensions: Vec<f64>,
    /// Mean of the overall ratings when every rating has one, otherwise
    /// the mean of the six dimension means.
    pub overall: f64,
    pub ratings: usize,
}

/// Map a 1..5 rating onto 0..100.
pub fn rescale_rating(mean: f64) -> f64 {
    (mean - 1.0) / 4.0 * 100.0
}

pub fn human_mean(ratings: &[HumanRating]) -> Vec<HumanScores> {
    let mut by_model: BTreeMap<&str, Vec<&HumanRating>> = BTreeMap::new();
    for r in ratings {
        by_model.entry(&r.model).or_default().push(r);
    }
    by_model
        .into_iter()
        .map(|(model, rows)| {
            let n = rows.len() as f64;
            let dimensions: Vec<f64> = (0..6)
                .map(|d| rescale_rating(rows.iter().map(|r| f64::from(r.dimensions()[d])).sum::<f64>() / n))
                .collect();
            let overall = if rows.iter().all(|r| r.overall.is_some()) {
                rescale_rating(rows.iter().filter_map(|r| r.overall).map(f64::from).sum::<f64>() / n)
            } else {
                dimensions.iter().sum::<f64>() / 6.0
            };
            HumanScores {
                model: model.to_string(),
                dimensions,
                overall,
                ratings: rows.len(),
            }
        })
        .collect()
}

/// Agreement between benchmark cells and human means for one metric across models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub metric: Metric,
    pub models: usize,
    /// `None` when either series has zero variance.
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

pub const MIN_ALIGNMENT_MODELS: usize = 3;

/// Pearson and Spearman coefficients per metric over models that have both
/// a benchmark value and human ratings.
pub fn alignment(scores: &[ModelScores], human: &[HumanScores]) -> Result<Vec<Alignment>> {
    let human: BTreeMap<&str, &HumanScores> = human.iter().map(|h| (h.model.as_str(), h)).collect();
    Metric::ALL
        .iter()
        .enumerate()
        .map(|(d, &metric)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = scores
                .iter()
                .filter_map(|s| Some((s.cells[d].value?, human.get(s.model.as_str())?.dimensions[d])))
                .unzip();
            if xs.len() < MIN_ALIGNMENT_MODELS {
                return Err(ReportError::TooFewModels {
                    min: MIN_ALIGNMENT_MODELS,
                    got: xs.len(),
                });
            }
            Ok(Alignment {
                metric,
                models: xs.len(),
                pearson: pearson(&xs, &ys),
                spearman: spearman(&xs, &ys),
            })
        })
        .collect()
}

/// Table rows from aggregated scores, with the human column filled from
/// `human` when given.
pub fn build_table(scores: &[ModelScores], human: Option<&[HumanScores]>) -> Table {
    let lookup: BTreeMap<&str, f64> = human
        .unwrap_or_default()
        .iter()
        .map(|h| (h.model.as_str(), round2(h.overall)))
        .collect();
    Table {
        has_human: human.is_some(),
        rows: scores
            .iter()
            .map(|s| TableRow {
                model: s.model.clone(),
                human: lookup.get(s.model.as_str()).copied(),
                values: s.cells.iter().map(|c| c.value).collect(),
            })
            .collect(),
    }
}
